//! Online prize-collecting node-weighted Steiner forest.
//!
//! [`DriverState`] runs the augmented-greedy algorithm for a fixed `k` and
//! length unit. [`OnlineForest`] adds the two doubling wrappers: guessing the
//! scale of the optimum from the arrived pairs, and guessing `k` by squaring.

mod driver;
mod wrappers;

pub use driver::{Action, ClientEmission, CostTotals, DriverConfig, DriverState, IterationRecord};
pub use wrappers::{ForestConfig, OnlineForest, ScalePoint};

use std::io::Write;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::VertexId;

/// A demand pair with its penalty; an infinite penalty forbids abandoning it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalEvent {
    pub s: VertexId,
    pub t: VertexId,
    #[serde(
        serialize_with = "ser_penalty",
        deserialize_with = "de_penalty",
        default = "infinite"
    )]
    pub penalty: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn ser_penalty<S: Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

fn de_penalty<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) if v >= 0.0 => Ok(v),
        Raw::Num(v) => Err(serde::de::Error::custom(format!("negative penalty {v}"))),
        Raw::Str(s) if matches!(s.as_str(), "inf" | "Infinity" | "infinity") => Ok(f64::INFINITY),
        Raw::Str(s) => Err(serde::de::Error::custom(format!("bad penalty {s:?}"))),
    }
}

impl TerminalEvent {
    pub fn new(s: VertexId, t: VertexId, penalty: f64) -> Self {
        TerminalEvent { s, t, penalty }
    }

    pub fn pair(s: VertexId, t: VertexId) -> Self {
        Self::new(s, t, f64::INFINITY)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.s >= n {
            return Err(Error::InvalidVertex { vertex: self.s, n });
        }
        if self.t >= n {
            return Err(Error::InvalidVertex { vertex: self.t, n });
        }
        if self.s == self.t {
            return Err(Error::input(format!(
                "pair ({}, {}) has equal terminals",
                self.s, self.t
            )));
        }
        if self.penalty.is_nan() || self.penalty < 0.0 {
            return Err(Error::input(format!(
                "penalty {} is negative",
                self.penalty
            )));
        }
        Ok(())
    }
}

/// On-disk event list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventList {
    pub pairs: Vec<TerminalEvent>,
}

/// Writes the per-iteration cost ledger as CSV.
pub fn write_ledger_csv<W: Write>(out: W, records: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "step",
        "level",
        "greedy_cost",
        "aug_greedy_cost",
        "facility_cost",
        "connection_cost",
        "penalty_paid",
    ])?;
    for r in records {
        let level = r.level.map_or(String::new(), |j| j.to_string());
        let aug: f64 = r.aug_costs.iter().map(|w| w.to_f64()).sum();
        w.write_record([
            r.step.to_string(),
            level,
            r.greedy_cost.to_f64().to_string(),
            aug.to_string(),
            r.facility_cost.to_f64().to_string(),
            r.connection_cost.to_f64().to_string(),
            r.penalty_paid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_round_trip() {
        let json = r#"{"pairs":[{"s":0,"t":2,"penalty":1.5},{"s":1,"t":3,"penalty":"inf"},{"s":4,"t":5}]}"#;
        let ev: EventList = serde_json::from_str(json).unwrap();
        assert_eq!(ev.pairs[0].penalty, 1.5);
        assert!(ev.pairs[1].penalty.is_infinite());
        assert!(ev.pairs[2].penalty.is_infinite());
        let back: EventList = serde_json::from_str(&serde_json::to_string(&ev).unwrap()).unwrap();
        assert_eq!(back, ev);
        assert!(
            serde_json::from_str::<EventList>(r#"{"pairs":[{"s":0,"t":1,"penalty":-1}]}"#).is_err()
        );
    }

    #[test]
    fn validation() {
        assert!(TerminalEvent::pair(0, 0).validate(3).is_err());
        assert!(TerminalEvent::pair(0, 5).validate(3).is_err());
        assert!(TerminalEvent::pair(0, 1).validate(3).is_ok());
    }
}
