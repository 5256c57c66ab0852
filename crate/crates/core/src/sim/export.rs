//! `records.csv`, `summary.json` and `powerfunc-dump.json`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dispatch::{DispatchMode, Scope};
use crate::error::Result;
use crate::fpad::CirculationConstraint;

use super::engine::{ModeChange, PowerFunctionDump, SimConfig, SimOutput, StepRecord};
use super::ledger::EnergyLedger;

pub const RECORDS_SCHEMA: &str = "# tsc-records v1";
pub const SUMMARY_SCHEMA: &str = "tsc-summary v1";
pub const DUMP_SCHEMA: &str = "tsc-powerfunc v1";

pub const COLUMNS: [&str; 27] = [
    "time_s",
    "n_trains",
    "mode",
    "mode_param",
    "delta_a_deg",
    "fpad_lo_deg",
    "fpad_hi_deg",
    "fpdd_lo",
    "fpdd_hi",
    "clamped",
    "degenerate",
    "hold",
    "p_nts1_mw",
    "q_nts1_mvar",
    "p_ats_mw",
    "q_ats_mvar",
    "p_nts2_mw",
    "q_nts2_mvar",
    "p_ats_z1_mw",
    "q_ats_z1_mvar",
    "p_ats_z2_mw",
    "q_ats_z2_mvar",
    "kp_tsc",
    "apc",
    "min_q_mvar",
    "solver_iterations",
    "error",
];

pub const TIMING_COLUMNS: [&str; 3] = ["fpad_us", "fpdd_us", "rpa_us"];

/// One parsed row of `records.csv`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub time_s: f64,
    pub n_trains: usize,
    pub mode: String,
    pub mode_param: Option<f64>,
    pub delta_a_deg: f64,
    pub fpad_lo_deg: Option<f64>,
    pub fpad_hi_deg: Option<f64>,
    pub fpdd_lo: Option<f64>,
    pub fpdd_hi: Option<f64>,
    pub clamped: bool,
    pub degenerate: bool,
    pub hold: bool,
    pub p_nts1_mw: f64,
    pub q_nts1_mvar: f64,
    pub p_ats_mw: f64,
    pub q_ats_mvar: f64,
    pub p_nts2_mw: f64,
    pub q_nts2_mvar: f64,
    pub p_ats_z1_mw: f64,
    pub q_ats_z1_mvar: f64,
    pub p_ats_z2_mw: f64,
    pub q_ats_z2_mvar: f64,
    pub kp_tsc: Option<f64>,
    pub apc: bool,
    pub min_q_mvar: f64,
    pub solver_iterations: usize,
    pub error: Option<String>,
    #[serde(default)]
    pub fpad_us: Option<f64>,
    #[serde(default)]
    pub fpdd_us: Option<f64>,
    #[serde(default)]
    pub rpa_us: Option<f64>,
}

fn mode_label(mode: &DispatchMode) -> (String, Option<f64>) {
    match mode {
        DispatchMode::Pdm { k, scope } => {
            let s = match scope {
                Scope::Zso1 => "zso1",
                Scope::Zso2 => "zso2",
                Scope::Tsc => "tsc",
            };
            (format!("pdm-{s}"), Some(*k))
        }
        DispatchMode::Cpm { p_ref_mw } => ("cpm".into(), Some(*p_ref_mw)),
        DispatchMode::Mcm => ("mcm".into(), None),
    }
}

fn opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(|v| v.to_string()).unwrap_or_default()
}

fn row(r: &StepRecord, s_base: f64, timing: bool) -> Vec<String> {
    let (mode, param) = mode_label(&r.mode);
    let (z1, z2) = (r.zones[0].ats, r.zones[1].ats);
    let mut out = vec![
        r.time_s.to_string(),
        r.trains.len().to_string(),
        mode,
        opt(param),
        r.delta_a.to_string(),
        opt(r.fpad.map(|f| f.lo)),
        opt(r.fpad.map(|f| f.hi)),
        opt(r.fpdd.map(|f| f.k_lo)),
        opt(r.fpdd.map(|f| f.k_hi)),
        r.clamped.to_string(),
        r.degenerate.to_string(),
        r.hold.to_string(),
        r.nts1().p.to_string(),
        r.nts1().q.to_string(),
        r.ats().p.to_string(),
        r.ats().q.to_string(),
        r.nts2().p.to_string(),
        r.nts2().q.to_string(),
        z1.p.to_string(),
        z1.q.to_string(),
        z2.p.to_string(),
        z2.q.to_string(),
        opt(r.kp_tsc),
        r.apc(s_base).to_string(),
        r.min_q().to_string(),
        r.solver_iterations.to_string(),
        r.error.clone().unwrap_or_default(),
    ];
    if timing {
        out.extend([r.timing.fpad_us, r.timing.fpdd_us, r.timing.rpa_us].map(|v| v.to_string()));
    }
    out
}

/// Writes the schema comment, the header and one row per record.
pub fn write_records<W: Write>(mut w: W, records: &[StepRecord], s_base: f64, timing: bool) -> Result<()> {
    writeln!(w, "{RECORDS_SCHEMA}")?;
    let mut csv = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if timing {
        header.extend(TIMING_COLUMNS);
    }
    csv.write_record(&header)?;
    for r in records {
        csv.write_record(row(r, s_base, timing))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(r: R) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut rows = Vec::new();
    for row in rdr.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub samples: usize,
    pub mean_us: f64,
    pub median_us: f64,
    pub p95_us: f64,
    pub max_us: f64,
}

impl StageStats {
    /// Nearest-rank statistics; all zero for no samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut v: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return StageStats { samples: 0, mean_us: 0.0, median_us: 0.0, p95_us: 0.0, max_us: 0.0 };
        }
        v.sort_by(f64::total_cmp);
        let rank = |p: f64| v[((p * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        StageStats {
            samples: v.len(),
            mean_us: v.iter().sum::<f64>() / v.len() as f64,
            median_us: rank(0.5),
            p95_us: rank(0.95),
            max_us: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub fpad: StageStats,
    pub fpdd: StageStats,
    pub rpa: StageStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema: &'static str,
    pub steps: usize,
    pub step_s: f64,
    pub duration_s: f64,
    pub constraint: CirculationConstraint,
    pub modes: Vec<ModeChange>,
    pub trains_seen: usize,
    pub clamped_steps: usize,
    pub hold_steps: usize,
    pub degenerate_steps: usize,
    pub apc_steps: usize,
    pub min_q_mvar: f64,
    pub max_solver_iterations: usize,
    pub delta_a_range_deg: [f64; 2],
    pub energy: EnergyLedger,
    pub timing: TimingSummary,
}

pub fn summarize(cfg: &SimConfig, out: &SimOutput) -> Summary {
    let rs = &out.records;
    let s_base = cfg.tsc.base.s_base_mva;
    let count = |f: &dyn Fn(&StepRecord) -> bool| rs.iter().filter(|r| f(r)).count();
    let stats = |f: &dyn Fn(&StepRecord) -> f64| StageStats::from_samples(&rs.iter().filter(|r| !r.hold).map(f).collect::<Vec<_>>());
    let fold = |init: f64, f: fn(f64, f64) -> f64| rs.iter().map(|r| r.delta_a).fold(init, f);
    Summary {
        schema: SUMMARY_SCHEMA,
        steps: rs.len(),
        step_s: cfg.step_s,
        duration_s: cfg.duration_s,
        constraint: cfg.constraint,
        modes: cfg.modes.clone(),
        trains_seen: out.ledger.trains.len(),
        clamped_steps: count(&|r| r.clamped),
        hold_steps: count(&|r| r.hold),
        degenerate_steps: count(&|r| r.degenerate),
        apc_steps: count(&|r| r.apc(s_base)),
        min_q_mvar: rs.iter().map(|r| r.min_q()).fold(f64::INFINITY, f64::min),
        max_solver_iterations: rs.iter().map(|r| r.solver_iterations).max().unwrap_or(0),
        delta_a_range_deg: if rs.is_empty() { [0.0, 0.0] } else { [fold(f64::INFINITY, f64::min), fold(f64::NEG_INFINITY, f64::max)] },
        energy: out.ledger.clone(),
        timing: TimingSummary {
            fpad: stats(&|r| r.timing.fpad_us),
            fpdd: stats(&|r| r.timing.fpdd_us),
            rpa: stats(&|r| r.timing.rpa_us),
        },
    }
}

#[derive(Serialize)]
struct Dump<'a> {
    schema: &'static str,
    steps: &'a [PowerFunctionDump],
}

pub fn write_power_functions<W: Write>(w: W, dumps: &[PowerFunctionDump]) -> Result<()> {
    serde_json::to_writer_pretty(w, &Dump { schema: DUMP_SCHEMA, steps: dumps })?;
    Ok(())
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub power_functions: Option<PathBuf>,
}

/// Writes all run outputs into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, cfg: &SimConfig, out: &SimOutput, timing_columns: bool) -> Result<Written> {
    fs::create_dir_all(dir)?;
    let records = dir.join("records.csv");
    write_records(fs::File::create(&records)?, &out.records, cfg.tsc.base.s_base_mva, timing_columns)?;
    let summary = dir.join("summary.json");
    let mut f = fs::File::create(&summary)?;
    serde_json::to_writer_pretty(&mut f, &summarize(cfg, out))?;
    writeln!(f)?;
    let power_functions = if cfg.dump_power_functions {
        let p = dir.join("powerfunc-dump.json");
        write_power_functions(fs::File::create(&p)?, &out.power_functions)?;
        Some(p)
    } else {
        None
    };
    Ok(Written { records, summary, power_functions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_is_header_only() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[], 100.0, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], RECORDS_SCHEMA);
        assert_eq!(lines[1], COLUMNS.join(","));
        assert!(read_records(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn percentiles() {
        let s = StageStats::from_samples(&(1..=100).map(f64::from).collect::<Vec<_>>());
        assert_eq!(s.median_us, 50.0);
        assert_eq!(s.p95_us, 95.0);
        assert_eq!(s.max_us, 100.0);
        assert_eq!(StageStats::from_samples(&[]).samples, 0);
    }
}
