//! Power-flow based reference: station powers from full Newton-Raphson
//! solves and feasible domains from sign scans plus bisection.

use std::collections::HashMap;

use num_complex::Complex64;

use super::network::{build_network_zso, NetworkModel, ATS, NTS1, NTS2};
use super::nr::{solve_nr, NrOptions, PfSolution};
use crate::equivalent::Quantity;
use crate::error::{Error, Result};
use crate::fpad::{assemble, combine, relaxed_shift_sign, CirculationConstraint, Critical, Fpad, Species, TscFpad};
use crate::model::{AngleInterval, PerUnitBase, TscSpec, ZsoId, ZsoSpec};

/// Scan step used to bracket sign changes, degrees.
pub const SCAN_STEP: f64 = 0.5;
/// Bracket width at which bisection stops, degrees.
pub const BISECT_RESOLUTION: f64 = 1e-3;

/// Station powers of one zone as a function of the A-TS angle, solved on
/// the full double-track network. Results are cached per angle.
pub struct ZsoOracle {
    net: NetworkModel,
    nts: usize,
    ats: usize,
    u_n: f64,
    opts: NrOptions,
    cache: HashMap<u64, [Complex64; 2]>,
    solves: usize,
}

impl ZsoOracle {
    pub fn new(zso: &ZsoSpec, ats_left: bool, base: PerUnitBase, opts: NrOptions) -> Result<Self> {
        let net = build_network_zso(zso, 0.0, ats_left, base)?;
        let nts = net.node_index(if ats_left { NTS2 } else { NTS1 }).expect("station node");
        let ats = net.node_index(ATS).expect("station node");
        Ok(ZsoOracle { net, nts, ats, u_n: zso.up.left.u_n_kv, opts, cache: HashMap::new(), solves: 0 })
    }

    /// Zone of a cluster with the N-TS as station 1 and the A-TS as station 2.
    pub fn for_tsc(tsc: &TscSpec, which: ZsoId, opts: NrOptions) -> Result<Self> {
        tsc.ensure_valid()?;
        ZsoOracle::new(tsc.zso(which), which == ZsoId::Two, tsc.base, opts)
    }

    pub fn network(&self) -> &NetworkModel {
        &self.net
    }

    /// Number of power-flow solves performed so far.
    pub fn solves(&self) -> usize {
        self.solves
    }

    pub fn solve(&mut self, delta: f64) -> Result<PfSolution> {
        self.net.set_station_voltage(self.ats, Complex64::from_polar(self.u_n, delta.to_radians()));
        self.solves += 1;
        solve_nr(&self.net, &self.opts)
    }

    /// `[N-TS, A-TS]` complex powers in p.u.
    pub fn powers(&mut self, delta: f64) -> Result<[Complex64; 2]> {
        if let Some(p) = self.cache.get(&delta.to_bits()) {
            return Ok(*p);
        }
        let sol = self.solve(delta)?;
        let sb = self.net.base.s_base_mva;
        let get = |node: usize| {
            sol.station_powers.iter().find(|s| s.node == node).map(|s| s.power.to_complex() / sb).unwrap()
        };
        let out = [get(self.nts), get(self.ats)];
        self.cache.insert(delta.to_bits(), out);
        Ok(out)
    }

    pub fn quantity(&mut self, q: Quantity, delta: f64) -> Result<f64> {
        let [s1, s2] = self.powers(delta)?;
        Ok(match q {
            Quantity::P1 => s1.re,
            Quantity::P2 => s2.re,
            Quantity::Q1 => s1.im,
            Quantity::Q2 => s2.im,
        })
    }
}

/// Bisects a bracketed sign change of `f` down to `resolution` degrees.
pub fn bisect_bracket(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    resolution: f64,
) -> Result<(f64, usize)> {
    let mut evals = 0;
    while (b - a).abs() > resolution {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        evals += 1;
        if fm == 0.0 {
            return Ok((m, evals));
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok((0.5 * (a + b), evals))
}

/// Critical angle of `f` by scanning outward from 0° and bisecting the
/// nearest sign change; without any sign change the scan's magnitude
/// minimum decides which limit substitutes.
pub fn critical_by_scan(f: &mut dyn FnMut(f64) -> Result<f64>, limits: AngleInterval, tol: f64) -> Result<Critical> {
    let x0 = limits.clamp(0.0);
    let f0 = f(x0)?;
    if f0.abs() <= tol {
        return Ok(Critical::root(x0, 0));
    }
    let mut best = (f0.abs(), x0);
    let (mut up, mut down) = ((x0, f0), (x0, f0));
    let mut evals = 0;
    loop {
        let mut found: Vec<(f64, f64, f64)> = Vec::new();
        let mut moved = false;
        if up.0 < limits.hi {
            let b = (up.0 + SCAN_STEP).min(limits.hi);
            let fb = f(b)?;
            evals += 1;
            best = best.min_by_abs(fb, b);
            if fb.abs() <= tol || (fb > 0.0) != (up.1 > 0.0) {
                found.push((up.0, up.1, b));
            }
            up = (b, fb);
            moved = true;
        }
        if down.0 > limits.lo {
            let b = (down.0 - SCAN_STEP).max(limits.lo);
            let fb = f(b)?;
            evals += 1;
            best = best.min_by_abs(fb, b);
            if fb.abs() <= tol || (fb > 0.0) != (down.1 > 0.0) {
                found.push((down.0, down.1, b));
            }
            down = (b, fb);
            moved = true;
        }
        if !found.is_empty() {
            let mut roots = Vec::new();
            for (a, fa, b) in found {
                let (x, n) = bisect_bracket(f, a, fa, b, BISECT_RESOLUTION)?;
                evals += n;
                roots.push(x);
            }
            let x = roots.into_iter().min_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            return Ok(Critical::root(x, evals));
        }
        if !moved {
            return Ok(Critical::fallback(best.1, limits, evals));
        }
    }
}

trait MinByAbs {
    fn min_by_abs(self, v: f64, x: f64) -> Self;
}

impl MinByAbs for (f64, f64) {
    fn min_by_abs(self, v: f64, x: f64) -> Self {
        if v.abs() < self.0 {
            (v.abs(), x)
        } else {
            self
        }
    }
}

/// Reference feasible domain of one zone.
pub fn fpad_bisect(
    oracle: &mut ZsoOracle,
    constraint: CirculationConstraint,
    alpha: f64,
    limits: AngleInterval,
) -> Result<Fpad> {
    let tol = oracle.opts.tol;
    let crit = |o: &mut ZsoOracle, q: Quantity, shift: f64| {
        critical_by_scan(&mut |d| o.quantity(q, d).map(|v| v + shift), limits, tol)
    };
    let p1 = crit(oracle, Quantity::P1, 0.0)?;
    let p2 = crit(oracle, Quantity::P2, 0.0)?;
    let t1 = oracle.quantity(Quantity::P2, p1.angle)?;
    let t2 = oracle.quantity(Quantity::P1, p2.angle)?;
    let apc = assemble(Species::Active, p1, t1, p2, t2)?;

    let q = constraint.q_allowance_mvar() / oracle.net.base.s_base_mva;
    let shift = if q == 0.0 {
        0.0
    } else {
        let [s1, s2] = oracle.powers(limits.clamp(0.0))?;
        relaxed_shift_sign(s1.im, s2.im) * q
    };
    let q1 = crit(oracle, Quantity::Q1, shift)?;
    let q2 = crit(oracle, Quantity::Q2, shift)?;
    let t1 = oracle.quantity(Quantity::Q2, q1.angle)? + shift;
    let t2 = oracle.quantity(Quantity::Q1, q2.angle)? + shift;
    let rpc = assemble(Species::Reactive, q1, t1, q2, t2)?;
    Ok(combine(apc, rpc, limits, alpha, [p1, p2, q1, q2], shift))
}

/// Reference feasible domain of a cluster.
pub fn tsc_fpad_bisect(tsc: &TscSpec, constraint: CirculationConstraint, opts: NrOptions) -> Result<TscFpad> {
    let mut a = ZsoOracle::for_tsc(tsc, ZsoId::One, opts)?;
    let mut b = ZsoOracle::for_tsc(tsc, ZsoId::Two, opts)?;
    let fa = fpad_bisect(&mut a, constraint, tsc.alpha_margin, tsc.delta_limits)?;
    let fb = fpad_bisect(&mut b, constraint, tsc.alpha_margin, tsc.delta_limits)?;
    Ok(TscFpad::from_parts(fa, fb))
}

/// Root of `g` on `[lo, hi]` by bisection until `|g| ≤ tol`; when `g` does
/// not change sign the endpoint with the smaller magnitude is returned.
pub fn bisect_root(
    g: &mut dyn FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, usize)> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = g(a)?;
    let fb = g(b)?;
    if fa.abs() <= tol {
        return Ok((a, 2));
    }
    if fb.abs() <= tol {
        return Ok((b, 2));
    }
    if (fa > 0.0) == (fb > 0.0) {
        return Ok((if fa.abs() <= fb.abs() { a } else { b }, 2));
    }
    for it in 0..max_iter {
        let m = 0.5 * (a + b);
        let fm = g(m)?;
        if fm.abs() <= tol || (b - a) < 1e-13 {
            return Ok((m, it + 3));
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Err(Error::NoConvergence { what: "bisection", iterations: max_iter, residual: fa, best_x: 0.5 * (a + b) })
}
