//! Structured event log, one JSON object per line.

use std::io::{self, Write};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Order,
    OrderDropped,
    Assign,
    Pickup,
    Deliver,
    Scan,
    Replan,
    Fallback,
    Cluster,
    ToCharge,
    ChargeStart,
    ChargeEnd,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drone: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parcel: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub battery: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl EventRecord {
    pub fn new(time: f64, kind: EventKind) -> Self {
        Self {
            time,
            kind,
            drone: None,
            parcel: None,
            edge: None,
            node: None,
            reward: None,
            battery: None,
            detail: None,
        }
    }

    pub fn drone(mut self, d: usize) -> Self {
        self.drone = Some(d);
        self
    }

    pub fn parcel(mut self, p: usize) -> Self {
        self.parcel = Some(p);
        self
    }

    pub fn edge(mut self, label: String) -> Self {
        self.edge = Some(label);
        self
    }

    pub fn node(mut self, name: &str) -> Self {
        self.node = Some(name.to_string());
        self
    }

    pub fn reward(mut self, r: f64) -> Self {
        self.reward = Some(r);
        self
    }

    pub fn battery(mut self, b: f64) -> Self {
        self.battery = Some(b);
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn push(&mut self, rec: EventRecord) {
        self.records.push(rec);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}
