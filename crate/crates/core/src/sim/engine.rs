//! Quasi-static stepping: populate, domain, dispatch range, angle, powers.

use std::time::Instant;

use serde::Serialize;

use crate::dispatch::{fpdd, kp, rpa, DispatchMode, Fpdd, Scope};
use crate::equivalent::{ModelOptions, PowerFunction};
use crate::error::{Error, Result};
use crate::fpad::{station_powers_pu, tsc_fpad_from, tsc_power_functions, CirculationConstraint};
use crate::model::{AngleInterval, ComplexPower, TscSpec};

use super::ledger::EnergyLedger;
use super::schedule::Schedule;

/// Magnitude (p.u.) below which a station power counts as zero for the
/// circulation indicators.
pub const INDICATOR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ModeChange {
    pub t_s: f64,
    #[serde(flatten)]
    pub mode: DispatchMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub tsc: TscSpec,
    pub step_s: f64,
    pub duration_s: f64,
    pub modes: Vec<ModeChange>,
    pub constraint: CirculationConstraint,
    pub model: ModelOptions,
    /// Keep the zone power functions of every step.
    pub dump_power_functions: bool,
}

impl SimConfig {
    pub fn new(tsc: TscSpec, duration_s: f64, mode: DispatchMode) -> Self {
        SimConfig {
            tsc,
            step_s: 1.0,
            duration_s,
            modes: vec![ModeChange { t_s: 0.0, mode }],
            constraint: CirculationConstraint::Strict,
            model: ModelOptions::default(),
            dump_power_functions: false,
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration_s / self.step_s + 1e-9).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_s.is_finite() && self.step_s > 0.0) {
            return Err(Error::Config("step_s must be positive".into()));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return Err(Error::Config("duration_s must be non-negative".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        if self.modes[0].t_s > 0.0 {
            return Err(Error::Config("the first mode must start at t_s = 0".into()));
        }
        for (i, m) in self.modes.iter().enumerate() {
            let k = m.t_s / self.step_s;
            if !m.t_s.is_finite() || (k - k.round()).abs() > 1e-9 {
                return Err(Error::Config(format!("modes[{i}].t_s must fall on a step boundary")));
            }
            if i > 0 && m.t_s <= self.modes[i - 1].t_s {
                return Err(Error::Config(format!("modes[{i}].t_s must increase")));
            }
            let finite = match m.mode {
                DispatchMode::Pdm { k, .. } => k.is_finite(),
                DispatchMode::Cpm { p_ref_mw } => p_ref_mw.is_finite(),
                DispatchMode::Mcm => true,
            };
            if !finite {
                return Err(Error::Config(format!("modes[{i}] parameter must be finite")));
            }
        }
        if let CirculationConstraint::Relaxed { q_cir_max_mvar } = self.constraint {
            if !(q_cir_max_mvar.is_finite() && q_cir_max_mvar >= 0.0) {
                return Err(Error::Config("q_cir_max_mvar must be non-negative".into()));
            }
        }
        self.tsc.ensure_valid()
    }

    pub fn mode_at(&self, t: f64) -> DispatchMode {
        self.modes
            .iter()
            .rev()
            .find(|m| m.t_s <= t + 1e-9)
            .map(|m| m.mode)
            .unwrap_or(DispatchMode::Mcm)
    }
}

/// Wall time per pipeline stage, microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageTiming {
    pub fpad_us: f64,
    pub fpdd_us: f64,
    pub rpa_us: f64,
}

/// Station powers of one zone, N-TS first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZonePowers {
    pub nts: ComplexPower,
    pub ats: ComplexPower,
}

impl ZonePowers {
    /// Stations of the zone export and import active power at once.
    pub fn apc(&self, s_base: f64) -> bool {
        let eps = INDICATOR_EPS * s_base;
        (self.nts.p > eps && self.ats.p < -eps) || (self.nts.p < -eps && self.ats.p > eps)
    }

    pub fn min_q(&self) -> f64 {
        self.nts.q.min(self.ats.q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub time_s: f64,
    pub trains: Vec<(String, ComplexPower)>,
    pub mode: DispatchMode,
    pub delta_a: f64,
    pub fpad: Option<AngleInterval>,
    pub fpdd: Option<Fpdd>,
    pub clamped: bool,
    pub degenerate: bool,
    /// Fail-safe: the previous angle was kept.
    pub hold: bool,
    pub error: Option<String>,
    pub zones: [ZonePowers; 2],
    pub kp_tsc: Option<f64>,
    pub solver_iterations: usize,
    pub timing: StageTiming,
}

impl StepRecord {
    pub fn nts1(&self) -> ComplexPower {
        self.zones[0].nts
    }

    pub fn nts2(&self) -> ComplexPower {
        self.zones[1].nts
    }

    pub fn ats(&self) -> ComplexPower {
        self.zones[0].ats + self.zones[1].ats
    }

    pub fn apc(&self, s_base: f64) -> bool {
        self.zones.iter().any(|z| z.apc(s_base))
    }

    pub fn min_q(&self) -> f64 {
        self.zones[0].min_q().min(self.zones[1].min_q())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFunctionDump {
    pub time_s: f64,
    pub zso1: PowerFunction,
    pub zso2: PowerFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub records: Vec<StepRecord>,
    pub ledger: EnergyLedger,
    pub power_functions: Vec<PowerFunctionDump>,
}

struct Planned {
    fpad: AngleInterval,
    fpdd: Option<Fpdd>,
    delta: f64,
    clamped: bool,
    degenerate: bool,
    iterations: usize,
}

fn micros(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e6
}

fn plan(tsc: &TscSpec, cfg: &SimConfig, mode: DispatchMode, timing: &mut StageTiming, pfs_out: &mut Option<[PowerFunction; 2]>) -> Result<Planned> {
    let t0 = Instant::now();
    let pfs = tsc_power_functions(tsc, cfg.model)?;
    *pfs_out = Some(pfs.clone());
    let domain = tsc_fpad_from(&pfs, tsc, cfg.constraint)?;
    let iterations = domain.zso1.solver_iterations() + domain.zso2.solver_iterations();
    timing.fpad_us = micros(t0);
    let fpad = domain.require()?;

    let t1 = Instant::now();
    let scope = match mode {
        DispatchMode::Pdm { scope, .. } => scope,
        _ => Scope::Tsc,
    };
    let range = match fpdd(fpad, &pfs, scope) {
        Ok(r) => Some(r),
        Err(Error::UndefinedRatio { .. }) => None,
        Err(e) => return Err(e),
    };
    timing.fpdd_us = micros(t1);

    let t2 = Instant::now();
    let d = rpa(mode, fpad, &pfs)?;
    timing.rpa_us = micros(t2);
    if !fpad.contains(d.delta_a) {
        return Err(Error::Config(format!("angle {} left the domain {fpad}", d.delta_a)));
    }
    Ok(Planned {
        fpad,
        fpdd: range,
        delta: d.delta_a,
        clamped: d.clamped,
        degenerate: d.degenerate,
        iterations: iterations + d.iterations,
    })
}

fn zone_powers(pf: &PowerFunction, delta: f64, s_base: f64) -> ZonePowers {
    let [s1, s2] = station_powers_pu(pf, delta);
    let mw = |s: num_complex::Complex64| ComplexPower::new(s.re * s_base, s.im * s_base);
    ZonePowers { nts: mw(s1), ats: mw(s2) }
}

const NAN_ZONE: ZonePowers = ZonePowers {
    nts: ComplexPower { p: f64::NAN, q: f64::NAN },
    ats: ComplexPower { p: f64::NAN, q: f64::NAN },
};

/// One controller step at time `t` given the previous angle.
pub fn step(cfg: &SimConfig, schedule: &Schedule, t: f64, previous_delta: f64) -> (StepRecord, Option<[PowerFunction; 2]>) {
    let tsc = schedule.populate(&cfg.tsc, t);
    let mode = cfg.mode_at(t);
    let s_base = tsc.base.s_base_mva;
    let mut timing = StageTiming::default();
    let mut pfs = None;
    let trains = tsc.trains().map(|tr| (tr.id.clone(), tr.power)).collect();
    let mut rec = StepRecord {
        time_s: t,
        trains,
        mode,
        delta_a: previous_delta,
        fpad: None,
        fpdd: None,
        clamped: false,
        degenerate: false,
        hold: false,
        error: None,
        zones: [NAN_ZONE; 2],
        kp_tsc: None,
        solver_iterations: 0,
        timing,
    };
    match plan(&tsc, cfg, mode, &mut timing, &mut pfs) {
        Ok(p) => {
            rec.delta_a = p.delta;
            rec.fpad = Some(p.fpad);
            rec.fpdd = p.fpdd;
            rec.clamped = p.clamped;
            rec.degenerate = p.degenerate;
            rec.solver_iterations = p.iterations;
        }
        Err(e) => {
            log::warn!("t = {t} s: holding {previous_delta:.4} deg ({e})");
            rec.hold = true;
            rec.error = Some(format!("{}: {e}", e.code()));
        }
    }
    rec.timing = timing;
    if let Some(pfs) = &pfs {
        rec.zones = [zone_powers(&pfs[0], rec.delta_a, s_base), zone_powers(&pfs[1], rec.delta_a, s_base)];
        rec.kp_tsc = kp(pfs, rec.delta_a, Scope::Tsc).ok();
    }
    (rec, pfs)
}

/// Runs the whole schedule. Only configuration problems abort; failures
/// inside a step hold the previous angle.
pub fn run(cfg: &SimConfig, schedule: &Schedule) -> Result<SimOutput> {
    cfg.validate()?;
    schedule.validate()?;
    let n = cfg.steps();
    let mut records: Vec<StepRecord> = Vec::with_capacity(n);
    let mut ledger = EnergyLedger::new(cfg.step_s);
    let mut dumps = Vec::new();
    let mut delta = 0.0;
    for i in 0..n {
        let t = i as f64 * cfg.step_s;
        let (rec, pfs) = step(cfg, schedule, t, delta);
        delta = rec.delta_a;
        ledger.accumulate(records.last(), &rec);
        if cfg.dump_power_functions {
            if let Some([zso1, zso2]) = pfs {
                dumps.push(PowerFunctionDump { time_s: t, zso1, zso2 });
            }
        }
        records.push(rec);
    }
    Ok(SimOutput { records, ledger, power_functions: dumps })
}
