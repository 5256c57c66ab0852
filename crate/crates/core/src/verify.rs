//! Equivalent model against the full power flow: station powers on an
//! angle grid and feasible-domain bounds.

use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::equivalent::ModelOptions;
use crate::error::Result;
use crate::fpad::{station_powers_pu, tsc_fpad, tsc_power_functions, CirculationConstraint};
use crate::model::{AngleInterval, TscSpec, ZsoId};
use crate::oracle::{conservation_check, tsc_fpad_bisect, NrOptions, ZsoOracle};

/// One zone at one angle, powers in p.u.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub case: usize,
    pub zso: ZsoId,
    pub delta_a_deg: f64,
    pub s1_model: [f64; 2],
    pub s1_oracle: [f64; 2],
    pub s2_model: [f64; 2],
    pub s2_oracle: [f64; 2],
    pub nr_iterations: usize,
    pub conservation_residual: f64,
}

impl PowerRow {
    pub fn max_diff(&self) -> f64 {
        let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).abs().max((a[1] - b[1]).abs());
        d(self.s1_model, self.s1_oracle).max(d(self.s2_model, self.s2_oracle))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FpadRow {
    pub case: usize,
    pub constraint: CirculationConstraint,
    pub model: Option<AngleInterval>,
    pub oracle: Option<AngleInterval>,
    pub diff_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySummary {
    pub cases: usize,
    pub grid_points: usize,
    pub max_power_diff_pu: f64,
    pub max_fpad_diff_deg: f64,
    pub max_nr_iterations: usize,
    pub max_conservation_residual_pu: f64,
}

fn parts(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

/// Station powers of both zones on `grid` angles.
pub fn compare_powers(case: usize, tsc: &TscSpec, model: ModelOptions, grid: &[f64], nr: NrOptions) -> Result<Vec<PowerRow>> {
    let pfs = tsc_power_functions(tsc, model)?;
    let mut rows = Vec::with_capacity(2 * grid.len());
    for (which, pf) in [ZsoId::One, ZsoId::Two].into_iter().zip(pfs.iter()) {
        let mut oracle = ZsoOracle::for_tsc(tsc, which, nr)?;
        for &d in grid {
            let sol = oracle.solve(d)?;
            let report = conservation_check(oracle.network(), &sol);
            let [o1, o2] = oracle.powers(d)?;
            let [m1, m2] = station_powers_pu(pf, d);
            rows.push(PowerRow {
                case,
                zso: which,
                delta_a_deg: d,
                s1_model: parts(m1),
                s1_oracle: parts(o1),
                s2_model: parts(m2),
                s2_oracle: parts(o2),
                nr_iterations: sol.iterations,
                conservation_residual: report.residual.p.abs().max(report.residual.q.abs()),
            });
        }
    }
    Ok(rows)
}

fn bound_diff(a: Option<AngleInterval>, b: Option<AngleInterval>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => (a.lo - b.lo).abs().max((a.hi - b.hi).abs()),
        (None, None) => 0.0,
        _ => f64::INFINITY,
    }
}

/// Unmargined cluster domains from both methods.
pub fn compare_fpad(case: usize, tsc: &TscSpec, constraint: CirculationConstraint, model: ModelOptions, nr: NrOptions) -> Result<FpadRow> {
    let m = tsc_fpad(tsc, constraint, model)?.unmargined;
    let o = tsc_fpad_bisect(tsc, constraint, nr)?.unmargined;
    Ok(FpadRow { case, constraint, model: m, oracle: o, diff_deg: bound_diff(m, o) })
}

pub fn summarize(powers: &[PowerRow], fpads: &[FpadRow], cases: usize, grid_points: usize) -> VerifySummary {
    VerifySummary {
        cases,
        grid_points,
        max_power_diff_pu: powers.iter().map(PowerRow::max_diff).fold(0.0, f64::max),
        max_fpad_diff_deg: fpads.iter().map(|r| r.diff_deg).fold(0.0, f64::max),
        max_nr_iterations: powers.iter().map(|r| r.nr_iterations).max().unwrap_or(0),
        max_conservation_residual_pu: powers.iter().map(|r| r.conservation_residual).fold(0.0, f64::max),
    }
}

pub const VERIFY_COLUMNS: [&str; 14] = [
    "case",
    "zso",
    "delta_a_deg",
    "p1_model_pu",
    "p1_oracle_pu",
    "q1_model_pu",
    "q1_oracle_pu",
    "p2_model_pu",
    "p2_oracle_pu",
    "q2_model_pu",
    "q2_oracle_pu",
    "max_diff_pu",
    "nr_iterations",
    "conservation_residual_pu",
];

/// Discrepancy table, one row per zone and angle.
pub fn write_power_rows<W: Write>(mut w: W, rows: &[PowerRow]) -> Result<()> {
    writeln!(w, "# tsc-verify v1")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(VERIFY_COLUMNS)?;
    for r in rows {
        let mut rec = vec![r.case.to_string(), r.zso.to_string(), r.delta_a_deg.to_string()];
        for (m, o) in [(r.s1_model, r.s1_oracle), (r.s2_model, r.s2_oracle)] {
            rec.extend([m[0], o[0], m[1], o[1]].map(|v| v.to_string()));
        }
        rec.extend([r.max_diff().to_string(), r.nr_iterations.to_string(), r.conservation_residual.to_string()]);
        csv.write_record(rec)?;
    }
    csv.flush()?;
    Ok(())
}
