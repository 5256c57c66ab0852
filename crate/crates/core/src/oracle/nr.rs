//! Newton-Raphson power flow in rectangular coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::network::{NetworkModel, NodeKind};
use crate::error::{Error, Result};
use crate::model::{ComplexPower, Phasor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NrOptions {
    /// Largest accepted power mismatch component, p.u.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NrOptions {
    fn default() -> Self {
        NrOptions { tol: 1e-8, max_iter: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationPower {
    pub node: usize,
    pub name: String,
    pub power: ComplexPower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfSolution {
    /// Node voltages, p.u.
    pub voltages: Vec<Complex64>,
    pub station_powers: Vec<StationPower>,
    pub iterations: usize,
    /// Largest mismatch component at the accepted point, p.u.
    pub max_mismatch: f64,
}

impl PfSolution {
    pub fn voltage_phasors(&self, v_base_kv: f64) -> Vec<Phasor> {
        self.voltages.iter().map(|v| Phasor::from(v * v_base_kv)).collect()
    }

    pub fn station(&self, name: &str) -> Option<ComplexPower> {
        self.station_powers.iter().find(|s| s.name == name).map(|s| s.power)
    }
}

fn station_voltage_pu(net: &NetworkModel, i: usize) -> Complex64 {
    match net.nodes[i].kind {
        NodeKind::Station { voltage } => voltage / net.base.v_base_kv,
        NodeKind::Train { .. } => Complex64::new(0.0, 0.0),
    }
}

fn mismatch(net: &NetworkModel, v: &[Complex64], trains: &[usize]) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut f = Vec::with_capacity(trains.len());
    let mut currents = Vec::with_capacity(trains.len());
    for &i in trains {
        let cur = row_current(net, i, v);
        let y = net.node_shunt_pu(i);
        f.push(v[i] * cur.conj() + net.node_load_pu(i) - v[i].norm_sqr() * y.conj());
        currents.push(cur);
    }
    (f, currents)
}

/// Current injected at node `i`, `(Y·V)_i`.
fn row_current(net: &NetworkModel, i: usize, v: &[Complex64]) -> Complex64 {
    v.iter().enumerate().map(|(j, vj)| net.ybus[(i, j)] * vj).sum()
}

fn max_component(f: &[Complex64]) -> f64 {
    f.iter().fold(0.0f64, |m, c| m.max(c.re.abs()).max(c.im.abs()))
}

/// Solves the network for fixed station voltages.
pub fn solve_nr(net: &NetworkModel, opts: &NrOptions) -> Result<PfSolution> {
    let n = net.nodes.len();
    let trains = net.train_indices();
    let stations = net.station_indices();
    let m = trains.len();
    let mut v: Vec<Complex64> = (0..n).map(|i| station_voltage_pu(net, i)).collect();

    if m > 0 {
        // Start from the unloaded network: loads and shunts removed.
        let mut a = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        let mut rhs = DVector::from_element(m, Complex64::new(0.0, 0.0));
        for (r, &i) in trains.iter().enumerate() {
            for (c, &j) in trains.iter().enumerate() {
                a[(r, c)] = net.ybus[(i, j)];
            }
            a[(r, r)] -= net.node_shunt_pu(i);
            for &s in &stations {
                rhs[r] -= net.ybus[(i, s)] * v[s];
            }
        }
        let x = a.lu().solve(&rhs).ok_or_else(|| Error::Config("singular network matrix".into()))?;
        for (r, &i) in trains.iter().enumerate() {
            v[i] = x[r];
        }
    }

    let mut iterations = 0;
    let mut polished = false;
    loop {
        let (f, currents) = mismatch(net, &v, &trains);
        let worst = max_component(&f);
        if !worst.is_finite() {
            break;
        }
        if worst <= opts.tol {
            // One extra step pushes the mismatch to rounding level so that
            // results do not depend on where the tolerance was crossed.
            if polished || worst <= 1e-14 || iterations >= opts.max_iter {
                return Ok(finish(net, v, iterations, worst));
            }
            polished = true;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                what: "Newton-Raphson power flow",
                iterations,
                residual: worst,
                best_x: f64::NAN,
            });
        }
        let mut jac = DMatrix::<f64>::zeros(2 * m, 2 * m);
        let j = Complex64::new(0.0, 1.0);
        for (a, &i) in trains.iter().enumerate() {
            let y = net.node_shunt_pu(i).conj();
            for (b, &k) in trains.iter().enumerate() {
                let yik = net.ybus[(i, k)].conj();
                let mut de = v[i] * yik;
                let mut df = -j * v[i] * yik;
                if a == b {
                    de += currents[a].conj() - 2.0 * v[i].re * y;
                    df += j * currents[a].conj() - 2.0 * v[i].im * y;
                }
                jac[(a, b)] = de.re;
                jac[(a, m + b)] = df.re;
                jac[(m + a, b)] = de.im;
                jac[(m + a, m + b)] = df.im;
            }
        }
        let rhs = DVector::from_iterator(2 * m, f.iter().map(|c| -c.re).chain(f.iter().map(|c| -c.im)));
        let dx = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Config("singular power-flow Jacobian".into()))?;
        for (a, &i) in trains.iter().enumerate() {
            v[i] += Complex64::new(dx[a], dx[m + a]);
        }
        iterations += 1;
    }
    Err(Error::NoConvergence {
        what: "Newton-Raphson power flow",
        iterations,
        residual: f64::INFINITY,
        best_x: f64::NAN,
    })
}

fn finish(net: &NetworkModel, v: Vec<Complex64>, iterations: usize, worst: f64) -> PfSolution {
    let station_powers = net
        .station_indices()
        .into_iter()
        .map(|s| {
            let cur = row_current(net, s, &v);
            StationPower {
                node: s,
                name: net.nodes[s].name.clone(),
                power: (v[s] * cur.conj() * net.base.s_base_mva).into(),
            }
        })
        .collect();
    PfSolution { voltages: v, station_powers, iterations, max_mismatch: worst }
}

/// Power (MW, MVar) a station delivers into the branches of one group.
pub fn group_power(net: &NetworkModel, sol: &PfSolution, station: usize, group: &str) -> ComplexPower {
    let v = &sol.voltages;
    let mut s = Complex64::new(0.0, 0.0);
    for b in net.branches.iter().filter(|b| b.group == group) {
        let z = net.z_pu(b);
        if b.from == station {
            s += v[b.from] * ((v[b.from] - v[b.to]) / z).conj();
        } else if b.to == station {
            s += v[b.to] * ((v[b.to] - v[b.from]) / z).conj();
        }
    }
    (s * net.base.s_base_mva).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationReport {
    /// p.u.
    pub stations: Complex64Pair,
    pub loads: Complex64Pair,
    pub losses: Complex64Pair,
    /// `stations − loads − losses`, p.u.
    pub residual: Complex64Pair,
    /// Smallest active loss of any branch, p.u.
    pub min_branch_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Complex64Pair {
    pub p: f64,
    pub q: f64,
}

impl From<Complex64> for Complex64Pair {
    fn from(c: Complex64) -> Self {
        Complex64Pair { p: c.re, q: c.im }
    }
}

impl ConservationReport {
    pub fn balanced(&self, tol: f64) -> bool {
        self.residual.p.abs() <= tol && self.residual.q.abs() <= tol && self.min_branch_loss >= -tol
    }
}

/// Power balance of a solution: station output against train loads plus
/// series losses.
pub fn conservation_check(net: &NetworkModel, sol: &PfSolution) -> ConservationReport {
    let sb = net.base.s_base_mva;
    let stations: Complex64 = sol.station_powers.iter().map(|s| s.power.to_complex()).sum::<Complex64>() / sb;
    let loads: Complex64 = net.train_indices().into_iter().map(|i| net.node_load_pu(i)).sum();
    let mut losses = Complex64::new(0.0, 0.0);
    let mut min_loss = f64::INFINITY;
    for b in &net.branches {
        let dv = sol.voltages[b.from] - sol.voltages[b.to];
        let l = dv.norm_sqr() / net.z_pu(b).conj();
        min_loss = min_loss.min(l.re);
        losses += l;
    }
    ConservationReport {
        stations: stations.into(),
        loads: loads.into(),
        losses: losses.into(),
        residual: (stations - loads - losses).into(),
        min_branch_loss: if min_loss.is_finite() { min_loss } else { 0.0 },
    }
}
