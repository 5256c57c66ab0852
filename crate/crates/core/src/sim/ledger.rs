//! Trapezoidal energy accounting over step records.

use std::collections::BTreeMap;

use serde::Serialize;

use super::engine::StepRecord;

/// Station energies in MWh (positive: delivered to the catenary).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StationEnergy {
    pub nts1_mwh: f64,
    pub ats_mwh: f64,
    pub nts2_mwh: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TrainEnergy {
    pub consumed_mwh: f64,
    pub regenerated_mwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub step_s: f64,
    pub stations: StationEnergy,
    pub trains: BTreeMap<String, TrainEnergy>,
}

fn trapezoid(a: f64, b: f64, dt_h: f64) -> f64 {
    0.5 * (a + b) * dt_h
}

impl EnergyLedger {
    pub fn new(step_s: f64) -> Self {
        EnergyLedger {
            step_s,
            stations: StationEnergy::default(),
            trains: BTreeMap::new(),
        }
    }

    /// Adds the interval between `prev` and `rec`. A train absent from one
    /// end contributes zero power there.
    pub fn accumulate(&mut self, prev: Option<&StepRecord>, rec: &StepRecord) {
        for (id, _) in &rec.trains {
            self.trains.entry(id.clone()).or_default();
        }
        let Some(prev) = prev else { return };
        let dt_h = (rec.time_s - prev.time_s) / 3600.0;
        let st = &mut self.stations;
        st.nts1_mwh += trapezoid(prev.nts1().p, rec.nts1().p, dt_h);
        st.ats_mwh += trapezoid(prev.ats().p, rec.ats().p, dt_h);
        st.nts2_mwh += trapezoid(prev.nts2().p, rec.nts2().p, dt_h);

        let power = |r: &StepRecord, id: &str| r.trains.iter().find(|(i, _)| i == id).map_or(0.0, |(_, s)| s.p);
        for (id, acc) in self.trains.iter_mut() {
            let (a, b) = (power(prev, id), power(rec, id));
            acc.consumed_mwh += trapezoid(a.max(0.0), b.max(0.0), dt_h);
            acc.regenerated_mwh += trapezoid((-a).max(0.0), (-b).max(0.0), dt_h);
        }
    }

    pub fn total_consumed_mwh(&self) -> f64 {
        self.trains.values().map(|t| t.consumed_mwh).sum()
    }

    pub fn total_regenerated_mwh(&self) -> f64 {
        self.trains.values().map(|t| t.regenerated_mwh).sum()
    }

    pub fn station_total_mwh(&self) -> f64 {
        self.stations.nts1_mwh + self.stations.ats_mwh + self.stations.nts2_mwh
    }
}
