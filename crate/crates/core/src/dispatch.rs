//! Power distribution coefficient, its feasible range, and the three
//! dispatch modes that turn a feasible domain into a reference angle.

use serde::{Deserialize, Serialize};

use crate::equivalent::{PowerFunction, Quantity};
use crate::error::{Error, Result};
use crate::model::{AngleInterval, ZsoId};
use crate::solver::{solve_scalar, SolveKind, SolverConfig};

/// Denominators below this (p.u.) leave the ratio undefined.
pub const RATIO_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Zso1,
    Zso2,
    Tsc,
}

impl From<ZsoId> for Scope {
    fn from(z: ZsoId) -> Self {
        match z {
            ZsoId::One => Scope::Zso1,
            ZsoId::Two => Scope::Zso2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DispatchMode {
    /// Hold `P_A-TS / P_N-TS` at `k`.
    Pdm { k: f64, scope: Scope },
    /// Hold the A-TS output at `p_ref_mw`.
    Cpm { p_ref_mw: f64 },
    /// Run on the upper edge of the feasible domain.
    Mcm,
}

impl DispatchMode {
    pub fn name(&self) -> &'static str {
        match self {
            DispatchMode::Pdm { .. } => "pdm",
            DispatchMode::Cpm { .. } => "cpm",
            DispatchMode::Mcm => "mcm",
        }
    }
}

/// Numerator (A-TS) and denominator (N-TS) active powers with derivatives,
/// p.u. per degree.
pub fn ratio_parts(pfs: &[PowerFunction; 2], delta: f64, scope: Scope) -> ([f64; 3], [f64; 3]) {
    let add = |a: [f64; 3], b: [f64; 3]| [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    match scope {
        Scope::Zso1 | Scope::Zso2 => {
            let pf = &pfs[if scope == Scope::Zso1 { 0 } else { 1 }];
            let jet = pf.jet(delta);
            (jet.p2(), jet.p1())
        }
        Scope::Tsc => {
            let (a, b) = (pfs[0].jet(delta), pfs[1].jet(delta));
            (add(a.p2(), b.p2()), add(a.p1(), b.p1()))
        }
    }
}

/// Total A-TS active power (p.u.) and derivatives over both zones.
pub fn ats_power(pfs: &[PowerFunction; 2], delta: f64) -> [f64; 3] {
    let a = pfs[0].quantity(Quantity::P2, delta);
    let b = pfs[1].quantity(Quantity::P2, delta);
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Power distribution coefficient `K_P` at `delta`.
pub fn kp(pfs: &[PowerFunction; 2], delta: f64, scope: Scope) -> Result<f64> {
    let (num, den) = ratio_parts(pfs, delta, scope);
    if den[0].abs() < RATIO_EPS {
        return Err(Error::UndefinedRatio { denominator: den[0] });
    }
    Ok(num[0] / den[0])
}

/// Achievable range of `K_P` over a feasible domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fpdd {
    pub k_lo: f64,
    pub k_hi: f64,
    /// `k_lo` unbounded (ratio undefined at the corresponding angle).
    pub lo_open: bool,
    pub hi_open: bool,
    /// `K_P` grows with the angle; false when the N-TS power is negative
    /// (the ratio then falls as the angle rises).
    pub increasing: bool,
}

impl Fpdd {
    pub fn contains(&self, k: f64) -> bool {
        (self.lo_open || k >= self.k_lo) && (self.hi_open || k <= self.k_hi)
    }
}

/// `K_P` at both ends of the domain. Monotonicity between them is a
/// property of the power functions and is checked by the test suite.
pub fn fpdd(fpad: AngleInterval, pfs: &[PowerFunction; 2], scope: Scope) -> Result<Fpdd> {
    let a = kp(pfs, fpad.lo, scope);
    let b = kp(pfs, fpad.hi, scope);
    let increasing = match (&a, &b) {
        (Ok(x), Ok(y)) if fpad.width() > 0.0 => y >= x,
        (Ok(_), Ok(_)) => true,
        (Ok(_), Err(_)) => slope_sign(pfs, fpad.lo, scope) >= 0.0,
        (Err(_), Ok(_)) => slope_sign(pfs, fpad.hi, scope) >= 0.0,
        (Err(e), Err(_)) => {
            return Err(match e {
                Error::UndefinedRatio { denominator } => Error::UndefinedRatio { denominator: *denominator },
                _ => Error::EmptyFpad,
            })
        }
    };
    let (at_lo, at_hi) = if increasing { (a, b) } else { (b, a) };
    Ok(Fpdd {
        k_lo: at_lo.as_ref().copied().unwrap_or(f64::NEG_INFINITY),
        k_hi: at_hi.as_ref().copied().unwrap_or(f64::INFINITY),
        lo_open: at_lo.is_err(),
        hi_open: at_hi.is_err(),
        increasing,
    })
}

fn slope_sign(pfs: &[PowerFunction; 2], delta: f64, scope: Scope) -> f64 {
    let (n, d) = ratio_parts(pfs, delta, scope);
    n[1] * d[0] - n[0] * d[1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RpaDecision {
    /// Degrees.
    pub delta_a: f64,
    pub clamped: bool,
    pub mode: DispatchMode,
    /// Mode residual at `delta_a`, p.u.
    pub residual: f64,
    /// Load too small for the ratio to be defined; angle held.
    pub degenerate: bool,
    pub iterations: usize,
}

fn decision(mode: DispatchMode, delta_a: f64, clamped: bool, residual: f64, iterations: usize) -> RpaDecision {
    RpaDecision { delta_a, clamped, mode, residual, degenerate: false, iterations }
}

fn solver_for(fpad: AngleInterval) -> SolverConfig {
    let mut cfg = SolverConfig::for_domain(fpad);
    cfg.radius_max = cfg.radius_max.max(1.0);
    cfg
}

/// Angle that holds `K_P = k_target` (`P_A − k·P_N = 0`), clamped to the
/// domain when the target is outside the achievable range.
pub fn rpa_pdm(k_target: f64, scope: Scope, fpad: AngleInterval, pfs: &[PowerFunction; 2]) -> Result<RpaDecision> {
    let mode = DispatchMode::Pdm { k: k_target, scope };
    if !k_target.is_finite() {
        return Err(Error::Config("k target must be finite".into()));
    }
    let residual = |x: f64| {
        let (n, d) = ratio_parts(pfs, x, scope);
        [n[0] - k_target * d[0], n[1] - k_target * d[1], n[2] - k_target * d[2]]
    };
    let range = match fpdd(fpad, pfs, scope) {
        Ok(r) => r,
        Err(Error::UndefinedRatio { .. }) => {
            let x = fpad.clamp(0.0);
            return Ok(RpaDecision { degenerate: true, ..decision(mode, x, false, residual(x)[0], 0) });
        }
        Err(e) => return Err(e),
    };
    if !range.contains(k_target) {
        let above = !range.hi_open && k_target > range.k_hi;
        let x = if above == range.increasing { fpad.hi } else { fpad.lo };
        return Ok(decision(mode, x, true, residual(x)[0], 0));
    }
    let r = solve_scalar(residual, &solver_for(fpad))?;
    let clamped = r.kind != SolveKind::Root;
    Ok(decision(mode, r.x, clamped, r.residual, r.iterations))
}

/// Angle at which the A-TS delivers `p_ref_mw`, clamped to the domain.
pub fn rpa_cpm(p_ref_mw: f64, fpad: AngleInterval, pfs: &[PowerFunction; 2]) -> Result<RpaDecision> {
    let mode = DispatchMode::Cpm { p_ref_mw };
    let target = p_ref_mw / pfs[0].s_base_mva;
    let residual = |x: f64| {
        let p = ats_power(pfs, x);
        [p[0] - target, p[1], p[2]]
    };
    let lo = residual(fpad.lo)[0];
    let hi = residual(fpad.hi)[0];
    // The A-TS output rises with the angle.
    if hi < 0.0 {
        return Ok(decision(mode, fpad.hi, true, hi, 0));
    }
    if lo > 0.0 {
        return Ok(decision(mode, fpad.lo, true, lo, 0));
    }
    let r = solve_scalar(residual, &solver_for(fpad))?;
    Ok(decision(mode, r.x, r.kind != SolveKind::Root, r.residual, r.iterations))
}

/// Upper edge of the domain: largest A-TS output in traction, least
/// regenerated energy absorbed by the A-TS in braking.
pub fn rpa_mcm(fpad: AngleInterval) -> RpaDecision {
    decision(DispatchMode::Mcm, fpad.hi, false, 0.0, 0)
}

/// Reference angle for any mode.
pub fn rpa(mode: DispatchMode, fpad: AngleInterval, pfs: &[PowerFunction; 2]) -> Result<RpaDecision> {
    match mode {
        DispatchMode::Pdm { k, scope } => rpa_pdm(k, scope, fpad, pfs),
        DispatchMode::Cpm { p_ref_mw } => rpa_cpm(p_ref_mw, fpad, pfs),
        DispatchMode::Mcm => Ok(rpa_mcm(fpad)),
    }
}
