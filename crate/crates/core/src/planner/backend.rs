//! Solver-agnostic linear model and the MILP backend interface.
//!
//! A [`LinearModel`] is a plain list of bounded columns and ranged rows. Any
//! engine that can solve it implements [`MilpBackend`]; [`HighsBackend`] is the
//! default implementation.

use std::fmt::Write as _;
use std::num::NonZeroU32;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense as HighsSense};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
    pub integer: bool,
}

/// `lower <= sum(coef * var) <= upper`; either side may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub sense: Sense,
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
}

impl LinearModel {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            vars: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, objective: f64) -> VarId {
        self.push_var(name.into(), lower, upper, objective, false)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, objective: f64) -> VarId {
        self.push_var(name.into(), 0.0, 1.0, objective, true)
    }

    fn push_var(&mut self, name: String, lower: f64, upper: f64, objective: f64, integer: bool) -> VarId {
        self.vars.push(Variable {
            name,
            lower,
            upper,
            objective,
            integer,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, lower: f64, upper: f64) {
        self.rows.push(Constraint {
            name: name.into(),
            terms,
            lower,
            upper,
        });
    }

    pub fn le(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, rhs: f64) {
        self.add_row(name, terms, f64::NEG_INFINITY, rhs);
    }

    pub fn ge(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, rhs: f64) {
        self.add_row(name, terms, rhs, f64::INFINITY);
    }

    pub fn equal(&mut self, name: impl Into<String>, terms: Vec<(VarId, f64)>, rhs: f64) {
        self.add_row(name, terms, rhs, rhs);
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn integer_count(&self) -> usize {
        self.vars.iter().filter(|v| v.integer).count()
    }

    /// Objective value of an assignment.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    /// Largest bound or row violation of an assignment.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|(id, c)| c * values[id.0]).sum();
            worst = worst.max(row.lower - lhs).max(lhs - row.upper);
        }
        worst
    }

    /// CPLEX LP text format.
    pub fn to_lp_format(&self) -> String {
        fn expr(out: &mut String, model: &LinearModel, terms: &[(VarId, f64)]) {
            if terms.is_empty() {
                out.push_str(" 0 ");
                out.push_str(&model.vars.first().map(|v| v.name.clone()).unwrap_or_default());
            }
            for (i, (id, c)) in terms.iter().enumerate() {
                // readers commonly cap line length
                let line = out.len() - out.rfind('\n').map_or(0, |p| p + 1);
                if line > 200 {
                    out.push_str("\n ");
                }
                let sign = if *c < 0.0 { '-' } else { '+' };
                if i == 0 && sign == '+' {
                    let _ = write!(out, " {} {}", c.abs(), model.vars[id.0].name);
                } else {
                    let _ = write!(out, " {} {} {}", sign, c.abs(), model.vars[id.0].name);
                }
            }
        }
        let mut out = String::new();
        out.push_str(match self.sense {
            Sense::Maximize => "Maximize\n obj:",
            Sense::Minimize => "Minimize\n obj:",
        });
        let objective: Vec<(VarId, f64)> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.objective != 0.0)
            .map(|(i, v)| (VarId(i), v.objective))
            .collect();
        expr(&mut out, self, &objective);
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let mut emit = |name: &str, op: &str, rhs: f64| {
                let _ = write!(out, " {name}:");
                expr(&mut out, self, &row.terms);
                let _ = writeln!(out, " {op} {rhs}");
            };
            if row.lower == row.upper {
                emit(&row.name, "=", row.upper);
            } else {
                match (row.lower.is_finite(), row.upper.is_finite()) {
                    (true, true) => {
                        emit(&format!("{}_lo", row.name), ">=", row.lower);
                        emit(&format!("{}_hi", row.name), "<=", row.upper);
                    }
                    (true, false) => emit(&row.name, ">=", row.lower),
                    (false, true) => emit(&row.name, "<=", row.upper),
                    (false, false) => {}
                }
            }
        }
        out.push_str("Bounds\n");
        for v in self.vars.iter().filter(|v| !v.integer) {
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => {
                    let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
                }
                (true, false) => {
                    let _ = writeln!(out, " {} >= {}", v.name, v.lower);
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {} <= {}", v.name, v.upper);
                }
                (false, false) => {
                    let _ = writeln!(out, " {} free", v.name);
                }
            }
        }
        let binaries: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.integer)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binaries\n");
            for chunk in binaries.chunks(8) {
                let _ = writeln!(out, " {}", chunk.join(" "));
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// A work limit was hit; the values are the best incumbent found.
    TimeLimited,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolveError {
    #[error("model is infeasible")]
    Infeasible,
    #[error("work limit reached without a feasible incumbent")]
    NoIncumbent,
    #[error("solver backend failure: {0}")]
    Backend(String),
}

/// Work limits of one solve. The node limit is deterministic; the time limit
/// is a wall-clock safety net and makes results timing dependent when hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveLimits {
    /// Seconds; non-positive or infinite means unlimited.
    pub time: f64,
    /// Branch-and-bound nodes.
    pub nodes: Option<u64>,
}

impl SolveLimits {
    pub const fn time(seconds: f64) -> Self {
        Self {
            time: seconds,
            nodes: None,
        }
    }
}

/// A MILP engine. Implementations must be deterministic for identical models
/// as long as the time limit is not reached.
pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(&self, model: &LinearModel, limits: &SolveLimits) -> Result<RawSolution, SolveError>;
}

/// HiGHS, single-threaded with a fixed random seed and zero optimality gap.
#[derive(Debug, Clone, Default)]
pub struct HighsBackend;

impl MilpBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &LinearModel, limits: &SolveLimits) -> Result<RawSolution, SolveError> {
        if model.vars.is_empty() {
            return Ok(RawSolution {
                status: SolveStatus::Optimal,
                objective: 0.0,
                values: Vec::new(),
            });
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .vars
            .iter()
            .map(|v| pb.add_column_with_integrality(v.objective, v.lower..=v.upper, v.integer))
            .collect();
        for row in &model.rows {
            let factors: Vec<_> = row.terms.iter().map(|(id, c)| (cols[id.0], *c)).collect();
            pb.add_row(row.lower..=row.upper, factors);
        }
        let sense = match model.sense {
            Sense::Maximize => HighsSense::Maximise,
            Sense::Minimize => HighsSense::Minimise,
        };
        let mut m = pb
            .try_optimise(sense)
            .map_err(|e| SolveError::Backend(format!("{e:?}")))?;
        m.make_quiet();
        m.set_threads(NonZeroU32::new(1).unwrap());
        m.set_option("random_seed", 0);
        m.set_option("mip_rel_gap", 0.0);
        m.set_option("mip_abs_gap", 1e-9);
        m.set_option("mip_feasibility_tolerance", 1e-9);
        m.set_option("primal_feasibility_tolerance", 1e-9);
        if limits.time.is_finite() && limits.time > 0.0 {
            m.set_option("time_limit", limits.time);
        }
        if let Some(nodes) = limits.nodes {
            m.set_option("mip_max_nodes", nodes.min(i32::MAX as u64) as i32);
        }
        let solved = m.try_solve().map_err(|e| SolveError::Backend(format!("{e:?}")))?;
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible => return Err(SolveError::Infeasible),
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit => {
                if solved.primal_solution_status() == HighsSolutionStatus::Feasible {
                    SolveStatus::TimeLimited
                } else {
                    return Err(SolveError::NoIncumbent);
                }
            }
            other => return Err(SolveError::Backend(format!("unexpected status {other:?}"))),
        };
        let values = solved.get_solution().columns().to_vec();
        Ok(RawSolution {
            status,
            objective: model.evaluate(&values),
            values,
        })
    }
}
