//! SVG chart of mean cumulative gain over time, one line per strategy.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;
use thiserror::Error;

use dualtask::config::StrategyTag;
use dualtask::experiment::ExperimentReport;

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("no time series to plot")]
    Empty,
    #[error("drawing failed: {0}")]
    Draw(String),
}

const COLORS: [RGBColor; 4] = [
    RGBColor(120, 120, 120),
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
];

fn read_series(path: &Path) -> Result<Vec<(f64, f64)>, ChartError> {
    let wrap = |source| ChartError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(wrap)?;
    reader.deserialize().collect::<Result<_, _>>().map_err(wrap)
}

/// Mean of equally sampled series; shorter series are ignored past their end.
fn mean_series(all: &[Vec<(f64, f64)>]) -> Vec<(f64, f64)> {
    let len = all.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .filter_map(|i| {
            let points: Vec<(f64, f64)> = all.iter().filter_map(|s| s.get(i).copied()).collect();
            let (t, _) = *points.first()?;
            Some((t, points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64))
        })
        .collect()
}

/// Reads every successful run's `timeseries.csv` and writes the chart.
pub fn cumulative_gain_chart(report: &ExperimentReport, out: &Path) -> Result<(), ChartError> {
    let mut by_strategy: BTreeMap<usize, (StrategyTag, Vec<Vec<(f64, f64)>>)> = BTreeMap::new();
    for run in report.runs.iter().filter(|r| r.metrics.is_some()) {
        let series = read_series(&run.dir.join("timeseries.csv"))?;
        let slot = StrategyTag::ALL.iter().position(|&t| t == run.strategy).unwrap_or(0);
        by_strategy
            .entry(slot)
            .or_insert_with(|| (run.strategy, Vec::new()))
            .1
            .push(series);
    }
    let lines: Vec<(usize, StrategyTag, Vec<(f64, f64)>)> = by_strategy
        .into_iter()
        .map(|(slot, (tag, all))| (slot, tag, mean_series(&all)))
        .filter(|(_, _, s)| !s.is_empty())
        .collect();
    if lines.is_empty() {
        return Err(ChartError::Empty);
    }
    let t_max = lines.iter().flat_map(|l| l.2.iter().map(|p| p.0)).fold(1.0, f64::max);
    let g_max = lines.iter().flat_map(|l| l.2.iter().map(|p| p.1)).fold(1.0, f64::max);

    let draw = |e: &dyn std::fmt::Display| ChartError::Draw(e.to_string());
    let root = SVGBackend::new(out, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Mean cumulative information gain", ("sans-serif", 20))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0.0..t_max, 0.0..g_max * 1.05)
        .map_err(|e| draw(&e))?;
    chart
        .configure_mesh()
        .x_desc("time (s)")
        .y_desc("gain")
        .draw()
        .map_err(|e| draw(&e))?;
    for (slot, tag, series) in lines {
        let color = COLORS[slot % COLORS.len()];
        chart
            .draw_series(LineSeries::new(series, color.stroke_width(2)))
            .map_err(|e| draw(&e))?
            .label(tag.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperLeft)
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| draw(&e))?;
    root.present().map_err(|e| draw(&e))?;
    Ok(())
}
