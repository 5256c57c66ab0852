//! JSON scenario documents: topology, a train snapshot, a schedule and
//! run settings in one file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dispatch::DispatchMode;
use crate::equivalent::ModelOptions;
use crate::error::{Error, Result};
use crate::fpad::CirculationConstraint;
use crate::model::{AngleInterval, LineImpedance, TrainLoad, TscSpec, ZsoId, DEFAULT_U_N_KV};
use crate::sim::{ModeChange, Schedule, SimConfig};

/// Both zones of equal length and impedance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterDoc {
    #[serde(default = "default_length")]
    pub length_km: f64,
    #[serde(default)]
    pub z0: LineImpedance,
    #[serde(default = "default_u_n")]
    pub u_n_kv: f64,
    #[serde(default = "default_limit")]
    pub delta_limit_deg: f64,
    #[serde(default = "default_alpha")]
    pub alpha_margin: f64,
    #[serde(default = "default_q_cir")]
    pub q_cir_max_mvar: f64,
    #[serde(default = "default_s_base")]
    pub s_base_mva: f64,
}

fn default_length() -> f64 {
    40.0
}
fn default_u_n() -> f64 {
    DEFAULT_U_N_KV
}
fn default_limit() -> f64 {
    20.0
}
fn default_alpha() -> f64 {
    0.95
}
fn default_q_cir() -> f64 {
    0.2
}
fn default_s_base() -> f64 {
    100.0
}

impl Default for ClusterDoc {
    fn default() -> Self {
        ClusterDoc {
            length_km: default_length(),
            z0: LineImpedance::default(),
            u_n_kv: default_u_n(),
            delta_limit_deg: default_limit(),
            alpha_margin: default_alpha(),
            q_cir_max_mvar: default_q_cir(),
            s_base_mva: default_s_base(),
        }
    }
}

impl ClusterDoc {
    pub fn to_spec(&self) -> TscSpec {
        let mut tsc = TscSpec::uniform(self.length_km, self.z0, self.u_n_kv);
        tsc.delta_limits = AngleInterval { lo: -self.delta_limit_deg, hi: self.delta_limit_deg };
        tsc.alpha_margin = self.alpha_margin;
        tsc.q_cir_max_mvar = self.q_cir_max_mvar;
        tsc.base.s_base_mva = self.s_base_mva;
        tsc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    #[default]
    Strict,
    Relaxed,
}

/// A train at a fixed position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotTrain {
    pub zso: ZsoId,
    #[serde(flatten)]
    pub load: TrainLoad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default = "default_step")]
    pub step_s: f64,
    /// Defaults to the last train exit.
    #[serde(default)]
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub modes: Vec<ModeChange>,
    #[serde(default)]
    pub dump_power_functions: bool,
}

fn default_step() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub cluster: Option<ClusterDoc>,
    /// Full topology; excludes `cluster`.
    #[serde(default)]
    pub tsc: Option<TscSpec>,
    #[serde(default)]
    pub constraint: ConstraintKind,
    #[serde(default)]
    pub model: ModelOptions,
    #[serde(default)]
    pub trains: Vec<SnapshotTrain>,
    #[serde(default)]
    pub dispatch: Option<DispatchMode>,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub sim: Option<SimSettings>,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Topology with the snapshot trains loaded.
    pub tsc: TscSpec,
    pub constraint_kind: ConstraintKind,
    pub model: ModelOptions,
    pub dispatch: Option<DispatchMode>,
    pub schedule: Schedule,
    pub sim: Option<SimSettings>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioDoc = serde_json::from_str(text)?;
        Scenario::from_doc(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Scenario::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn from_doc(doc: ScenarioDoc) -> Result<Self> {
        let mut tsc = match (doc.cluster, doc.tsc) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `cluster` or `tsc`, not both".into())),
            (Some(c), None) => c.to_spec(),
            (None, Some(t)) => t,
            (None, None) => ClusterDoc::default().to_spec(),
        };
        for t in doc.trains {
            tsc.zso_mut(t.zso).push_train(t.load);
        }
        tsc.ensure_valid()?;
        doc.schedule.validate()?;
        Ok(Scenario {
            name: doc.name.unwrap_or_default(),
            tsc,
            constraint_kind: doc.constraint,
            model: doc.model,
            dispatch: doc.dispatch,
            schedule: doc.schedule,
            sim: doc.sim,
        })
    }

    pub fn constraint(&self) -> CirculationConstraint {
        match self.constraint_kind {
            ConstraintKind::Strict => CirculationConstraint::Strict,
            ConstraintKind::Relaxed => CirculationConstraint::Relaxed { q_cir_max_mvar: self.tsc.q_cir_max_mvar },
        }
    }

    /// Time at which the last scheduled train leaves the cluster.
    pub fn schedule_end_s(&self) -> f64 {
        let (l_1, l_2) = (self.tsc.zso1.up.length_km, self.tsc.zso2.up.length_km);
        self.schedule.trains.iter().map(|p| p.exit_s(l_1, l_2)).fold(0.0, f64::max)
    }

    /// Simulation settings applied to the bare topology.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let settings = self.sim.clone().ok_or_else(|| Error::Config("scenario has no `sim` section".into()))?;
        let mut tsc = self.tsc.clone();
        tsc.clear_trains();
        let duration_s = match settings.duration_s {
            Some(d) => d,
            None => (self.schedule_end_s() / settings.step_s).ceil() * settings.step_s,
        };
        let modes = if settings.modes.is_empty() {
            vec![ModeChange { t_s: 0.0, mode: self.dispatch.unwrap_or(DispatchMode::Mcm) }]
        } else {
            settings.modes
        };
        let cfg = SimConfig {
            tsc,
            step_s: settings.step_s,
            duration_s,
            modes,
            constraint: self.constraint(),
            model: self.model,
            dump_power_functions: settings.dump_power_functions,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
