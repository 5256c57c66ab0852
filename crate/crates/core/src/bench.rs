//! Wall-clock comparison of the closed-form pipeline against the power-flow
//! baseline at the same residual tolerance.

use std::time::Instant;

use serde::Serialize;

use crate::dispatch::{fpdd, ratio_parts, ats_power, rpa, DispatchMode, Scope};
use crate::equivalent::ModelOptions;
use crate::error::Result;
use crate::fpad::{tsc_fpad, tsc_fpad_from, tsc_power_functions, CirculationConstraint};
use crate::model::{AngleInterval, TscSpec, ZsoId};
use crate::oracle::bisect::bisect_root;
use crate::oracle::{tsc_fpad_bisect, NrOptions, ZsoOracle};
use crate::sim::export::StageStats;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub stage: &'static str,
    pub repetitions: usize,
    /// Fewer than two samples.
    pub low_confidence: bool,
    pub fast: StageStats,
    pub baseline: StageStats,
    /// Baseline median over fast median.
    pub speedup: f64,
    /// Largest difference between the two results, degrees.
    pub max_result_diff_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub trains: usize,
    pub tolerance_pu: f64,
    pub fpad: Comparison,
    pub rpa: Comparison,
}

fn time<T>(f: impl FnOnce() -> Result<T>) -> Result<(f64, T)> {
    let t = Instant::now();
    let out = f()?;
    Ok((t.elapsed().as_secs_f64() * 1e6, out))
}

fn compare(stage: &'static str, fast: &[f64], baseline: &[f64], diff: f64) -> Comparison {
    let (p, b) = (StageStats::from_samples(fast), StageStats::from_samples(baseline));
    Comparison {
        stage,
        repetitions: fast.len(),
        low_confidence: fast.len() < 2,
        speedup: if p.median_us > 0.0 { b.median_us / p.median_us } else { f64::INFINITY },
        fast: p,
        baseline: b,
        max_result_diff_deg: diff,
    }
}

fn bound_diff(a: Option<AngleInterval>, b: Option<AngleInterval>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => (a.lo - b.lo).abs().max((a.hi - b.hi).abs()),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    }
}

/// Domain computation: power functions plus critical angles against
/// sign scans and bisection on full power flows.
pub fn bench_fpad(tsc: &TscSpec, constraint: CirculationConstraint, model: ModelOptions, reps: usize) -> Result<Comparison> {
    let opts = NrOptions::default();
    let reps = reps.max(1);
    let (mut p, mut b) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
    let mut diff: f64 = 0.0;
    tsc_fpad(tsc, constraint, model)?;
    for _ in 0..reps {
        let (tp, fp) = time(|| tsc_fpad(tsc, constraint, model))?;
        let (tb, fb) = time(|| tsc_fpad_bisect(tsc, constraint, opts))?;
        p.push(tp);
        b.push(tb);
        diff = diff.max(bound_diff(fp.unmargined, fb.unmargined));
    }
    Ok(compare("fpad", &p, &b, diff))
}

/// The mode actually benchmarked: PDM and CPM as given, anything else
/// replaced by PDM at the middle of the achievable ratio range.
pub fn bench_mode(tsc: &TscSpec, constraint: CirculationConstraint, model: ModelOptions, mode: Option<DispatchMode>) -> Result<(DispatchMode, AngleInterval)> {
    let pfs = tsc_power_functions(tsc, model)?;
    let fpad = tsc_fpad_from(&pfs, tsc, constraint)?.require()?;
    let mode = match mode {
        Some(m @ (DispatchMode::Pdm { .. } | DispatchMode::Cpm { .. })) => m,
        _ => {
            let r = fpdd(fpad, &pfs, Scope::Tsc)?;
            let k = if r.lo_open || r.hi_open { 1.0 } else { 0.5 * (r.k_lo + r.k_hi) };
            DispatchMode::Pdm { k, scope: Scope::Tsc }
        }
    };
    Ok((mode, fpad))
}

/// Angle for `mode` by bisection over full power flows.
pub fn rpa_baseline(tsc: &TscSpec, mode: DispatchMode, fpad: AngleInterval, opts: NrOptions) -> Result<(f64, usize)> {
    let mut z1 = ZsoOracle::for_tsc(tsc, ZsoId::One, opts)?;
    let mut z2 = ZsoOracle::for_tsc(tsc, ZsoId::Two, opts)?;
    let s_base = tsc.base.s_base_mva;
    let mut g = |d: f64| -> Result<f64> {
        let [n1, a1] = z1.powers(d)?;
        let [n2, a2] = z2.powers(d)?;
        Ok(match mode {
            DispatchMode::Pdm { k, scope } => match scope {
                Scope::Zso1 => a1.re - k * n1.re,
                Scope::Zso2 => a2.re - k * n2.re,
                Scope::Tsc => a1.re + a2.re - k * (n1.re + n2.re),
            },
            DispatchMode::Cpm { p_ref_mw } => a1.re + a2.re - p_ref_mw / s_base,
            DispatchMode::Mcm => 0.0,
        })
    };
    if let DispatchMode::Mcm = mode {
        return Ok((fpad.hi, 0));
    }
    bisect_root(&mut g, fpad.lo, fpad.hi, opts.tol, 200)
}

/// Reference angle computation given the domain.
pub fn bench_rpa(tsc: &TscSpec, constraint: CirculationConstraint, model: ModelOptions, mode: Option<DispatchMode>, reps: usize) -> Result<Comparison> {
    let opts = NrOptions::default();
    let reps = reps.max(1);
    let (mode, fpad) = bench_mode(tsc, constraint, model, mode)?;
    let (mut p, mut b) = (Vec::with_capacity(reps), Vec::with_capacity(reps));
    let mut diff: f64 = 0.0;
    for _ in 0..reps {
        let (tp, dp) = time(|| {
            let pfs = tsc_power_functions(tsc, model)?;
            rpa(mode, fpad, &pfs)
        })?;
        let (tb, (db, _)) = time(|| rpa_baseline(tsc, mode, fpad, opts))?;
        p.push(tp);
        b.push(tb);
        diff = diff.max((dp.delta_a - db).abs());
    }
    Ok(compare("rpa", &p, &b, diff))
}

pub fn bench(tsc: &TscSpec, constraint: CirculationConstraint, model: ModelOptions, mode: Option<DispatchMode>, reps: usize) -> Result<BenchReport> {
    Ok(BenchReport {
        trains: tsc.train_count(),
        tolerance_pu: NrOptions::default().tol,
        fpad: bench_fpad(tsc, constraint, model, reps)?,
        rpa: bench_rpa(tsc, constraint, model, mode, reps)?,
    })
}

/// Residual of `mode` on the equivalent model at `delta`, p.u.
pub fn mode_residual(tsc: &TscSpec, model: ModelOptions, mode: DispatchMode, delta: f64) -> Result<f64> {
    let pfs = tsc_power_functions(tsc, model)?;
    Ok(match mode {
        DispatchMode::Pdm { k, scope } => {
            let (n, d) = ratio_parts(&pfs, delta, scope);
            n[0] - k * d[0]
        }
        DispatchMode::Cpm { p_ref_mw } => ats_power(&pfs, delta)[0] - p_ref_mw / tsc.base.s_base_mva,
        DispatchMode::Mcm => 0.0,
    })
}
