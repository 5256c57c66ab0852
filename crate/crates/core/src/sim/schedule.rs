//! Train timetables: entry, speed and piecewise-constant power profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComplexPower, Track, TrainLoad, TscSpec, ZsoId};

pub const DEFAULT_SPEED_KMH: f64 = 300.0;

/// Distance kept between a train and a station busbar, km.
pub const STATION_CLEARANCE_KM: f64 = 1e-3;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Towards N-TS2.
    #[default]
    Forward,
    Backward,
}

/// Constant power over `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSegment {
    pub start_s: f64,
    pub end_s: f64,
    #[serde(flatten)]
    pub power: ComplexPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub id: String,
    /// Zone the train enters the cluster through.
    pub zso: ZsoId,
    pub track: Track,
    pub entry_s: f64,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default = "default_speed")]
    pub speed_kmh: f64,
    #[serde(default)]
    pub profile: Vec<PowerSegment>,
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_KMH
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(default)]
    pub trains: Vec<TrainPlan>,
}

/// Where a train is at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub zso: ZsoId,
    /// Distance from the zone's first station (N-TS1 for zone 1, A-TS for
    /// zone 2), km.
    pub l1: f64,
    /// Distance along the whole cluster from N-TS1, km.
    pub corridor_km: f64,
}

impl TrainPlan {
    /// Corridor position at entry, km from N-TS1.
    fn entry_position(&self, l_1: f64, l_2: f64) -> f64 {
        match (self.zso, self.direction) {
            (ZsoId::One, Direction::Forward) => 0.0,
            (ZsoId::Two, Direction::Forward) => l_1,
            (ZsoId::One, Direction::Backward) => l_1,
            (ZsoId::Two, Direction::Backward) => l_1 + l_2,
        }
    }

    /// Time at which the train leaves the cluster.
    pub fn exit_s(&self, l_1: f64, l_2: f64) -> f64 {
        let x0 = self.entry_position(l_1, l_2);
        let remaining = match self.direction {
            Direction::Forward => l_1 + l_2 - x0,
            Direction::Backward => x0,
        };
        self.entry_s + remaining / self.speed_kmh * 3600.0
    }

    /// Position at `t`, or `None` before entry and from exit on.
    pub fn placement(&self, t: f64, l_1: f64, l_2: f64) -> Option<Placement> {
        if t < self.entry_s - TIME_EPS || t >= self.exit_s(l_1, l_2) - TIME_EPS {
            return None;
        }
        let travelled = (t - self.entry_s).max(0.0) * self.speed_kmh / 3600.0;
        let x = match self.direction {
            Direction::Forward => self.entry_position(l_1, l_2) + travelled,
            Direction::Backward => self.entry_position(l_1, l_2) - travelled,
        };
        let in_first = match self.direction {
            Direction::Forward => x < l_1,
            Direction::Backward => x <= l_1,
        };
        let (zso, l1, len) = if in_first {
            (ZsoId::One, x, l_1)
        } else {
            (ZsoId::Two, x - l_1, l_2)
        };
        Some(Placement {
            zso,
            l1: l1.clamp(STATION_CLEARANCE_KM, len - STATION_CLEARANCE_KM),
            corridor_km: x,
        })
    }

    /// Power drawn at `t`; zero outside every segment.
    pub fn power_at(&self, t: f64) -> ComplexPower {
        self.profile
            .iter()
            .find(|s| t >= s.start_s - TIME_EPS && t < s.end_s - TIME_EPS)
            .map(|s| s.power)
            .unwrap_or(ComplexPower::ZERO)
    }

    fn validate(&self, at: &str) -> Result<()> {
        let err = |field: &str, msg: &str| Err(Error::Schedule(format!("{at}.{field}: {msg}")));
        if self.id.is_empty() {
            return err("id", "must not be empty");
        }
        if !(self.speed_kmh.is_finite() && self.speed_kmh > 0.0) {
            return err("speed_kmh", "must be positive");
        }
        if !self.entry_s.is_finite() {
            return err("entry_s", "must be finite");
        }
        for (i, s) in self.profile.iter().enumerate() {
            let field = format!("profile[{i}]");
            if !(s.start_s.is_finite() && s.end_s.is_finite() && s.start_s < s.end_s) {
                return err(&field, "start_s must be below end_s");
            }
            if !s.power.is_finite() {
                return err(&field, "power must be finite");
            }
            if i > 0 && (s.start_s - self.profile[i - 1].end_s).abs() > TIME_EPS {
                return err(&field, "segments must be contiguous and ordered");
            }
        }
        Ok(())
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        for (i, plan) in self.trains.iter().enumerate() {
            plan.validate(&format!("schedule.trains[{i}]"))?;
            if self.trains[..i].iter().any(|p| p.id == plan.id) {
                return Err(Error::Schedule(format!("schedule.trains[{i}].id: duplicate id {:?}", plan.id)));
            }
        }
        Ok(())
    }

    /// Trains present at `t` as loads, in schedule order.
    pub fn snapshot(&self, tsc: &TscSpec, t: f64) -> Vec<(ZsoId, TrainLoad)> {
        let (l_1, l_2) = (tsc.zso1.up.length_km, tsc.zso2.up.length_km);
        self.trains
            .iter()
            .filter_map(|plan| {
                let at = plan.placement(t, l_1, l_2)?;
                Some((at.zso, TrainLoad::new(plan.id.clone(), at.l1, plan.power_at(t), plan.track)))
            })
            .collect()
    }

    /// The cluster with the trains present at `t` loaded onto it.
    pub fn populate(&self, tsc: &TscSpec, t: f64) -> TscSpec {
        let mut out = tsc.clone();
        out.clear_trains();
        for (zso, train) in self.snapshot(tsc, t) {
            out.zso_mut(zso).push_train(train);
        }
        out
    }
}
