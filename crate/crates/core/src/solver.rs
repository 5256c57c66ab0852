//! Scalar trust-region solver with a dogleg step.
//!
//! Every root and |·|-minimum search in the crate goes through
//! [`solve_scalar`]: it minimizes `½f(x)²` over a closed angle interval,
//! starting from `x0` (0° by default). Residuals supply value, slope and
//! curvature per degree; a zero curvature makes the model Gauss-Newton.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::AngleInterval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveKind {
    Root,
    Minimum,
    /// Stopped on a domain bound with the descent direction pointing out.
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveResult {
    /// Degrees.
    pub x: f64,
    /// Residual at `x`, p.u.
    pub residual: f64,
    pub kind: SolveKind,
    pub iterations: usize,
}

impl SolveResult {
    pub fn is_root(&self) -> bool {
        self.kind == SolveKind::Root
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Residual tolerance, p.u.
    pub tol: f64,
    /// Bound on `|d(f²)/dx|` for a minimum, p.u.² per degree.
    pub grad_tol: f64,
    /// Steps shorter than this (degrees) end the search.
    pub step_tol: f64,
    pub max_iter: usize,
    pub radius_init: f64,
    pub radius_max: f64,
    pub eta_accept: f64,
    pub shrink: f64,
    pub grow: f64,
    pub domain: AngleInterval,
    pub x0: f64,
}

impl SolverConfig {
    pub fn for_domain(domain: AngleInterval) -> Self {
        SolverConfig {
            tol: 1e-8,
            grad_tol: 1e-16,
            step_tol: 1e-11,
            max_iter: 100,
            radius_init: 1.0,
            radius_max: (0.5 * domain.width()).max(1e-6),
            eta_accept: 0.1,
            shrink: 0.25,
            grow: 2.0,
            domain,
            x0: domain.clamp(0.0),
        }
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = self.domain.clamp(x0);
        self
    }

    fn check(&self) -> Result<()> {
        let ok = self.tol > 0.0
            && self.eta_accept > 0.0
            && self.eta_accept < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.grow > 1.0
            && self.radius_init > 0.0
            && self.radius_max > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("solver settings out of range".into()))
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::for_domain(AngleInterval { lo: -20.0, hi: 20.0 })
    }
}

/// Finds a zero of `f` near `cfg.x0`, or the local minimum of `|f|` the
/// descent reaches when no zero is met. `f(x)` returns value, first and
/// second derivative at `x` degrees.
pub fn solve_scalar<F>(f: F, cfg: &SolverConfig) -> Result<SolveResult>
where
    F: Fn(f64) -> [f64; 3],
{
    run(&f, cfg, None)
}

/// Like [`solve_scalar`], also returning `f²` at every accepted iterate.
pub fn solve_scalar_traced<F>(f: F, cfg: &SolverConfig) -> Result<(SolveResult, Vec<f64>)>
where
    F: Fn(f64) -> [f64; 3],
{
    let mut trace = Vec::new();
    let r = run(&f, cfg, Some(&mut trace))?;
    Ok((r, trace))
}

/// Arg-min of `|f|` over the domain. An interior zero is returned as a root;
/// otherwise the smaller of the local minimum and the domain bounds wins.
pub fn minimize_abs<F>(f: F, cfg: &SolverConfig) -> Result<SolveResult>
where
    F: Fn(f64) -> [f64; 3],
{
    let r = run(&f, cfg, None)?;
    if r.kind == SolveKind::Root {
        return Ok(r);
    }
    let mut best = r;
    for x in [cfg.domain.lo, cfg.domain.hi] {
        let v = f(x)[0];
        if v.abs() < best.residual.abs() {
            best = SolveResult {
                x,
                residual: v,
                kind: if v.abs() <= cfg.tol { SolveKind::Root } else { SolveKind::Clamped },
                iterations: r.iterations,
            };
        }
    }
    Ok(best)
}

fn classify(x: f64, v: [f64; 3], cfg: &SolverConfig) -> Option<SolveKind> {
    let [f, d1, d2] = v;
    if f.abs() <= cfg.tol {
        return Some(SolveKind::Root);
    }
    let g = f * d1;
    let d = cfg.domain;
    if (x <= d.lo && g > 0.0) || (x >= d.hi && g < 0.0) {
        return Some(SolveKind::Clamped);
    }
    if (2.0 * g).abs() <= cfg.grad_tol && d1 * d1 + f * d2 >= 0.0 {
        return Some(SolveKind::Minimum);
    }
    None
}

fn run<F>(f: &F, cfg: &SolverConfig, mut trace: Option<&mut Vec<f64>>) -> Result<SolveResult>
where
    F: Fn(f64) -> [f64; 3],
{
    cfg.check()?;
    let dom = cfg.domain;
    let mut x = dom.clamp(cfg.x0);
    let mut v = f(x);
    if !v.iter().all(|c| c.is_finite()) {
        return Err(Error::Config(format!("residual not finite at {x}°")));
    }
    let mut radius = cfg.radius_init.min(cfg.radius_max);
    if let Some(t) = trace.as_deref_mut() {
        t.push(v[0] * v[0]);
    }

    for it in 0..=cfg.max_iter {
        if let Some(kind) = classify(x, v, cfg) {
            return Ok(SolveResult { x, residual: v[0], kind, iterations: it });
        }
        if it == cfg.max_iter {
            break;
        }
        let [fx, d1, d2] = v;
        let g = fx * d1;
        let b = d1 * d1 + fx * d2;

        // One-dimensional dogleg: the Newton point when the model is convex
        // and it fits in the region, else the region edge along −g.
        let mut p = if b > 0.0 {
            (-g / b).clamp(-radius, radius)
        } else if g != 0.0 {
            -g.signum() * radius
        } else {
            // Stationary point of f² that is not a minimum: probe both sides.
            let lo = f(dom.clamp(x - radius))[0].abs();
            let hi = f(dom.clamp(x + radius))[0].abs();
            if hi <= lo { radius } else { -radius }
        };
        let target = dom.clamp(x + p);
        if target != x + p {
            p = target - x;
            radius = radius.min(p.abs().max(cfg.step_tol));
        }
        if p.abs() < cfg.step_tol {
            return Ok(SolveResult {
                x,
                residual: fx,
                kind: if x <= dom.lo || x >= dom.hi { SolveKind::Clamped } else { SolveKind::Minimum },
                iterations: it,
            });
        }

        let vn = f(target);
        let pred = -(g * p + 0.5 * b * p * p);
        let actual = 0.5 * (fx * fx - vn[0] * vn[0]);
        let rho = if pred > 0.0 { actual / pred } else if actual > 0.0 { 1.0 } else { -1.0 };

        if rho > cfg.eta_accept && vn[0].abs() <= fx.abs() && vn.iter().all(|c| c.is_finite()) {
            x = target;
            v = vn;
            if let Some(t) = trace.as_deref_mut() {
                t.push(v[0] * v[0]);
            }
            if rho > 0.75 && p.abs() >= 0.99 * radius {
                radius = (radius * cfg.grow).min(cfg.radius_max);
            } else if rho < 0.25 {
                radius *= cfg.shrink;
            }
        } else {
            radius = p.abs() * cfg.shrink;
            if radius < cfg.step_tol {
                return Ok(SolveResult {
                    x,
                    residual: fx,
                    kind: if x <= dom.lo || x >= dom.hi { SolveKind::Clamped } else { SolveKind::Minimum },
                    iterations: it + 1,
                });
            }
        }
    }
    Err(Error::NoConvergence {
        what: "trust-region solve",
        iterations: cfg.max_iter,
        residual: v[0],
        best_x: x,
    })
}
