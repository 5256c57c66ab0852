//! Feasible phase-angle domains.
//!
//! For one section the active-power domain is bracketed by the angles where
//! `P1` and `P2` vanish, the reactive-power domain by the inner zeros of `Q1`
//! and `Q2` (or their shifted versions under a circulation allowance). The
//! role of each critical angle (lower or upper bound) follows from the sign
//! of the other station's power there. The assembly functions here are
//! shared with the power-flow oracle, which only differs in how critical
//! angles and sign tests are obtained.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equivalent::{zso_power_function, ModelOptions, PowerFunction, Quantity};
use crate::error::{Error, Result};
use crate::model::{AngleInterval, TrainLoad, TscSpec, ZsoId};
use crate::solver::{minimize_abs, solve_scalar, SolverConfig};

/// Sign tests treat values within this band (p.u.) as zero.
pub const SIGN_DEAD_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CirculationConstraint {
    /// No active or reactive circulation at all.
    #[default]
    Strict,
    /// Reactive circulation up to `q_cir_max_mvar` tolerated.
    Relaxed { q_cir_max_mvar: f64 },
}

impl CirculationConstraint {
    pub fn q_allowance_mvar(&self) -> f64 {
        match self {
            CirculationConstraint::Strict => 0.0,
            CirculationConstraint::Relaxed { q_cir_max_mvar } => *q_cir_max_mvar,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemState {
    Traction,
    Braking,
}

/// Traction when the trains draw net active power (ties count as traction).
pub fn detect_state<'a>(trains: impl IntoIterator<Item = &'a TrainLoad>) -> SystemState {
    let total: f64 = trains.into_iter().map(|t| t.power.p).sum();
    if total >= 0.0 {
        SystemState::Traction
    } else {
        SystemState::Braking
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Lower,
    Upper,
}

/// Which circulation condition produced a critical angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Binding {
    /// `P1 = 0`
    P1Zero,
    /// `P2 = 0`
    P2Zero,
    /// `Q1 = 0` (or `Q1 = ∓Q_cir`)
    Q1Zero,
    Q2Zero,
    /// Substituted angle-limit bound (no zero inside the limits).
    Limit,
}

/// A critical angle as used by the assembly step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Critical {
    /// Degrees. The zero itself, or the substituted limit when none exists.
    pub angle: f64,
    /// True when `angle` is a zero of the residual.
    pub root: bool,
    /// Arg-min of the residual magnitude when no zero exists.
    pub argmin: f64,
    pub iterations: usize,
}

impl Critical {
    /// Zero found at `angle`.
    pub fn root(angle: f64, iterations: usize) -> Self {
        Critical { angle, root: true, argmin: angle, iterations }
    }

    /// No zero: the limit on the side of the magnitude minimum is used.
    pub fn fallback(argmin: f64, limits: AngleInterval, iterations: usize) -> Self {
        let angle = if argmin < 0.0 { limits.lo } else { limits.hi };
        Critical { angle, root: false, argmin, iterations }
    }

    fn fallback_role(&self) -> Role {
        if self.argmin < 0.0 {
            Role::Lower
        } else {
            Role::Upper
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Active,
    Reactive,
}

/// One-sided interval from two critical angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Assembled {
    /// `None` when the bounds cross.
    pub interval: Option<AngleInterval>,
    pub lo: f64,
    pub hi: f64,
    pub lo_binding: Binding,
    pub hi_binding: Binding,
}

fn non_negative(v: f64) -> bool {
    v >= -SIGN_DEAD_BAND
}

/// Role assignment and interval assembly.
///
/// `s1` is where station 1's residual vanishes and `t1` the other station's
/// (shifted) residual there; `s2`/`t2` likewise for station 2.
pub fn assemble(species: Species, s1: Critical, t1: f64, s2: Critical, t2: f64) -> Result<Assembled> {
    let role1 = if !s1.root {
        s1.fallback_role()
    } else {
        match (species, non_negative(t1)) {
            (Species::Active, true) | (Species::Reactive, false) => Role::Upper,
            _ => Role::Lower,
        }
    };
    let role2 = if !s2.root {
        s2.fallback_role()
    } else {
        match (species, non_negative(t2)) {
            (Species::Active, true) | (Species::Reactive, false) => Role::Lower,
            _ => Role::Upper,
        }
    };
    let (b1, b2) = match species {
        Species::Active => (Binding::P1Zero, Binding::P2Zero),
        Species::Reactive => (Binding::Q1Zero, Binding::Q2Zero),
    };
    let tag = |c: &Critical, b: Binding| if c.root { b } else { Binding::Limit };
    let what = match species {
        Species::Active => "active power",
        Species::Reactive => "reactive power",
    };
    let (lo, lo_b, hi, hi_b) = match (role1, role2) {
        (Role::Lower, Role::Upper) => (s1.angle, tag(&s1, b1), s2.angle, tag(&s2, b2)),
        (Role::Upper, Role::Lower) => (s2.angle, tag(&s2, b2), s1.angle, tag(&s1, b1)),
        _ => {
            return Err(Error::InconsistentBranch {
                what,
                detail: format!(
                    "both critical angles ({:.6}°, {:.6}°) take the {:?} role (tests {t1:.3e}, {t2:.3e})",
                    s1.angle, s2.angle, role1
                ),
            })
        }
    };
    Ok(Assembled {
        interval: AngleInterval::new(lo, hi),
        lo,
        hi,
        lo_binding: lo_b,
        hi_binding: hi_b,
    })
}

/// Sign of the shift applied to reactive residuals: `Q + sign·Q_cir`.
///
/// Chosen from the reactive regime at 0°: when the stations jointly supply
/// reactive power the allowance widens the domain downwards (`Q ≥ −Q_cir`).
pub fn relaxed_shift_sign(q1_at_0: f64, q2_at_0: f64) -> f64 {
    if q1_at_0 + q2_at_0 >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Margin step: scale about 0° and keep only what stays inside the
/// unscaled domain.
pub fn apply_margin(domain: AngleInterval, alpha: f64) -> Option<AngleInterval> {
    domain.scaled(alpha).intersect(&domain)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fpad {
    pub apc: Assembled,
    pub rpc: Assembled,
    /// `APC ∩ RPC ∩ limits`, before the margin.
    pub unmargined: Option<AngleInterval>,
    pub interval: Option<AngleInterval>,
    pub lo_binding: Binding,
    pub hi_binding: Binding,
    pub critical: [Critical; 4],
    /// Shift applied to the reactive residuals, p.u.
    pub q_shift: f64,
}

impl Fpad {
    pub fn is_empty(&self) -> bool {
        self.interval.is_none()
    }

    pub fn solver_iterations(&self) -> usize {
        self.critical.iter().map(|c| c.iterations).sum()
    }
}

/// Intersects APC, RPC and the limits and applies the margin.
pub fn combine(apc: Assembled, rpc: Assembled, limits: AngleInterval, alpha: f64, critical: [Critical; 4], q_shift: f64) -> Fpad {
    let pick_lo = |a: &Assembled, b: &Assembled| if a.lo >= b.lo { a.lo_binding } else { b.lo_binding };
    let pick_hi = |a: &Assembled, b: &Assembled| if a.hi <= b.hi { a.hi_binding } else { b.hi_binding };
    let unmargined = match (apc.interval, rpc.interval) {
        (Some(a), Some(b)) => a.intersect(&b).and_then(|x| x.intersect(&limits)),
        _ => None,
    };
    let mut lo_binding = pick_lo(&apc, &rpc);
    let mut hi_binding = pick_hi(&apc, &rpc);
    if let Some(u) = unmargined {
        if u.lo <= limits.lo && apc.lo.max(rpc.lo) < limits.lo {
            lo_binding = Binding::Limit;
        }
        if u.hi >= limits.hi && apc.hi.min(rpc.hi) > limits.hi {
            hi_binding = Binding::Limit;
        }
    }
    Fpad {
        apc,
        rpc,
        unmargined,
        interval: unmargined.and_then(|u| apply_margin(u, alpha)),
        lo_binding,
        hi_binding,
        critical,
        q_shift,
    }
}

fn find_critical(pf: &PowerFunction, q: Quantity, shift: f64, cfg: &SolverConfig) -> Result<Critical> {
    let f = |x: f64| {
        let mut v = pf.quantity(q, x);
        v[0] += shift;
        v
    };
    let r = solve_scalar(f, cfg)?;
    if r.is_root() {
        return Ok(Critical::root(r.x, r.iterations));
    }
    let m = minimize_abs(f, cfg)?;
    if m.is_root() {
        return Ok(Critical::root(m.x, r.iterations + m.iterations));
    }
    Ok(Critical::fallback(m.x, cfg.domain, r.iterations + m.iterations))
}

/// Critical angles of `P1 = 0` and `P2 = 0`, each searched from 0°.
pub fn critical_angles_apc(pf: &PowerFunction, limits: AngleInterval) -> Result<(Critical, Critical)> {
    let cfg = SolverConfig::for_domain(limits);
    Ok((
        find_critical(pf, Quantity::P1, 0.0, &cfg)?,
        find_critical(pf, Quantity::P2, 0.0, &cfg)?,
    ))
}

fn apc_with(pf: &PowerFunction, limits: AngleInterval) -> Result<(Assembled, [Critical; 2])> {
    let (s1, s2) = critical_angles_apc(pf, limits)?;
    let t1 = pf.quantity(Quantity::P2, s1.angle)[0];
    let t2 = pf.quantity(Quantity::P1, s2.angle)[0];
    Ok((assemble(Species::Active, s1, t1, s2, t2)?, [s1, s2]))
}

/// Domain free of active-power circulation.
pub fn apc_interval(pf: &PowerFunction, limits: AngleInterval) -> Result<Assembled> {
    apc_with(pf, limits).map(|a| a.0)
}

/// Shift (p.u.) applied to reactive residuals for `constraint`.
pub fn reactive_shift(pf: &PowerFunction, constraint: CirculationConstraint) -> f64 {
    let q = constraint.q_allowance_mvar() / pf.s_base_mva;
    if q == 0.0 {
        return 0.0;
    }
    let jet = pf.jet(0.0);
    relaxed_shift_sign(jet.q1()[0], jet.q2()[0]) * q
}

fn rpc_with(pf: &PowerFunction, constraint: CirculationConstraint, limits: AngleInterval) -> Result<(Assembled, [Critical; 2], f64)> {
    let cfg = SolverConfig::for_domain(limits);
    let shift = reactive_shift(pf, constraint);
    let s1 = find_critical(pf, Quantity::Q1, shift, &cfg)?;
    let s2 = find_critical(pf, Quantity::Q2, shift, &cfg)?;
    let t1 = pf.quantity(Quantity::Q2, s1.angle)[0] + shift;
    let t2 = pf.quantity(Quantity::Q1, s2.angle)[0] + shift;
    Ok((assemble(Species::Reactive, s1, t1, s2, t2)?, [s1, s2], shift))
}

/// Domain free of reactive circulation (or within the allowance).
pub fn rpc_interval(pf: &PowerFunction, constraint: CirculationConstraint, limits: AngleInterval) -> Result<Assembled> {
    rpc_with(pf, constraint, limits).map(|a| a.0)
}

/// Feasible domain of one section: `α·(APC ∩ RPC)`.
pub fn mso_fpad(pf: &PowerFunction, constraint: CirculationConstraint, alpha: f64, limits: AngleInterval) -> Result<Fpad> {
    let (apc, [p1, p2]) = apc_with(pf, limits)?;
    let (rpc, [q1, q2], shift) = rpc_with(pf, constraint, limits)?;
    Ok(combine(apc, rpc, limits, alpha, [p1, p2, q1, q2], shift))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TscFpad {
    pub zso1: Fpad,
    pub zso2: Fpad,
    pub unmargined: Option<AngleInterval>,
    pub interval: Option<AngleInterval>,
}

impl TscFpad {
    pub fn from_parts(zso1: Fpad, zso2: Fpad) -> Self {
        let both = |a: Option<AngleInterval>, b: Option<AngleInterval>| match (a, b) {
            (Some(a), Some(b)) => a.intersect(&b),
            _ => None,
        };
        TscFpad {
            unmargined: both(zso1.unmargined, zso2.unmargined),
            interval: both(zso1.interval, zso2.interval),
            zso1,
            zso2,
        }
    }

    pub fn require(&self) -> Result<AngleInterval> {
        self.interval.ok_or(Error::EmptyFpad)
    }
}

/// Power functions of both zones, each oriented with the N-TS as station 1.
pub fn tsc_power_functions(tsc: &TscSpec, opts: ModelOptions) -> Result<[PowerFunction; 2]> {
    tsc.ensure_valid()?;
    Ok([
        zso_power_function(tsc, ZsoId::One, opts)?,
        zso_power_function(tsc, ZsoId::Two, opts)?,
    ])
}

/// Cluster domain from prebuilt zone power functions.
pub fn tsc_fpad_from(pfs: &[PowerFunction; 2], tsc: &TscSpec, constraint: CirculationConstraint) -> Result<TscFpad> {
    let a = mso_fpad(&pfs[0], constraint, tsc.alpha_margin, tsc.delta_limits)?;
    let b = mso_fpad(&pfs[1], constraint, tsc.alpha_margin, tsc.delta_limits)?;
    Ok(TscFpad::from_parts(a, b))
}

/// Cluster domain: intersection of both zone domains.
pub fn tsc_fpad(tsc: &TscSpec, constraint: CirculationConstraint, opts: ModelOptions) -> Result<TscFpad> {
    tsc_fpad_from(&tsc_power_functions(tsc, opts)?, tsc, constraint)
}

/// Evaluates both station powers (p.u.) of a power function.
pub fn station_powers_pu(pf: &PowerFunction, delta: f64) -> [Complex64; 2] {
    let jet = pf.jet(delta);
    [jet.s1[0], jet.s2[0]]
}
