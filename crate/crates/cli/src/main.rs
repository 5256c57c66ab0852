use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tsc_core::bench;
use tsc_core::dispatch::{ats_power, fpdd, kp, rpa, DispatchMode, Scope};
use tsc_core::equivalent::Coupling;
use tsc_core::fpad::{station_powers_pu, tsc_fpad_from, tsc_power_functions};
use tsc_core::oracle::NrOptions;
use tsc_core::scenario::{ConstraintKind, Scenario};
use tsc_core::sim::{self, export};
use tsc_core::verify;
use tsc_core::Error;

#[derive(Parser)]
#[command(name = "tsc", version, about = "Phase-angle dispatch for traction station clusters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Feasible phase-angle domain of the scenario snapshot.
    Fpad {
        #[command(flatten)]
        common: Common,
        /// Also write the zone power functions to this file.
        #[arg(long, value_name = "PATH")]
        dump_powerfunc: Option<PathBuf>,
    },
    /// Achievable power distribution coefficient range.
    Fpdd {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "tsc")]
        scope: ScopeArg,
    },
    /// Reference phase angle for one dispatch mode.
    Rpa {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dispatch: DispatchArgs,
    },
    /// Runs the scenario schedule and writes records.csv and summary.json.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Add per-stage wall times to records.csv.
        #[arg(long)]
        timing: bool,
        /// Write powerfunc-dump.json with every step's power functions.
        #[arg(long)]
        dump_powerfunc: bool,
    },
    /// Compares the equivalent model with the full power flow.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Angles per sweep, spread over the allowed range.
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// Sample the schedule every this many seconds.
        #[arg(long, default_value_t = 60.0)]
        every: f64,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Times the closed-form path against the power-flow baseline.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        dispatch: DispatchArgs,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long, short, value_name = "PATH")]
    scenario: PathBuf,
    #[arg(long, value_enum)]
    constraint: Option<ConstraintArg>,
    /// Reactive circulation allowance for the relaxed constraint, MVar.
    #[arg(long, value_name = "MVAR")]
    q_cir_max: Option<f64>,
    /// Angle margin factor in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    coupling: Option<CouplingArg>,
}

#[derive(Args)]
struct DispatchArgs {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Target ratio for pdm.
    #[arg(long)]
    k: Option<f64>,
    /// A-TS reference power for cpm, MW.
    #[arg(long, value_name = "MW")]
    p_ref: Option<f64>,
    #[arg(long, value_enum)]
    scope: Option<ScopeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintArg {
    Strict,
    Relaxed,
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    Mutual,
    Isolated,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pdm,
    Cpm,
    Mcm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Zso1,
    Zso2,
    Tsc,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Zso1 => Scope::Zso1,
            ScopeArg::Zso2 => Scope::Zso2,
            ScopeArg::Tsc => Scope::Tsc,
        }
    }
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Json(_) | Error::Schedule(_) | Error::Config(_) | Error::InvalidTopology(_) => Failure::Usage(e.to_string()),
            e => Failure::Domain(e),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn load(common: &Common) -> CliResult<Scenario> {
    if !common.scenario.is_file() {
        return Err(Failure::Usage(format!("scenario file not found: {}", common.scenario.display())));
    }
    let mut s = Scenario::load(&common.scenario)?;
    if let Some(c) = common.constraint {
        s.constraint_kind = match c {
            ConstraintArg::Strict => ConstraintKind::Strict,
            ConstraintArg::Relaxed => ConstraintKind::Relaxed,
        };
    }
    if let Some(q) = common.q_cir_max {
        s.tsc.q_cir_max_mvar = q;
    }
    if let Some(a) = common.alpha {
        s.tsc.alpha_margin = a;
    }
    if let Some(c) = common.coupling {
        s.model.coupling = match c {
            CouplingArg::Mutual => Coupling::Mutual,
            CouplingArg::Isolated => Coupling::Isolated,
        };
    }
    s.tsc.ensure_valid()?;
    log::info!("loaded scenario {:?} with {} snapshot trains", s.name, s.tsc.train_count());
    Ok(s)
}

fn dispatch_mode(args: &DispatchArgs, fallback: Option<DispatchMode>) -> CliResult<Option<DispatchMode>> {
    let scope = args.scope.map(Scope::from).unwrap_or(Scope::Tsc);
    let mode = match (args.mode, args.k, args.p_ref) {
        (Some(ModeArg::Pdm), Some(k), _) | (None, Some(k), None) => Some(DispatchMode::Pdm { k, scope }),
        (Some(ModeArg::Pdm), None, _) => return Err(Failure::Usage("--mode pdm needs --k".into())),
        (Some(ModeArg::Cpm), _, Some(p_ref_mw)) | (None, None, Some(p_ref_mw)) => Some(DispatchMode::Cpm { p_ref_mw }),
        (Some(ModeArg::Cpm), _, None) => return Err(Failure::Usage("--mode cpm needs --p-ref".into())),
        (Some(ModeArg::Mcm), _, _) => Some(DispatchMode::Mcm),
        (None, Some(_), Some(_)) => return Err(Failure::Usage("give --mode when both --k and --p-ref are set".into())),
        (None, None, None) => fallback,
    };
    if let Some(DispatchMode::Pdm { k: v, .. } | DispatchMode::Cpm { p_ref_mw: v }) = mode {
        if !v.is_finite() {
            return Err(Failure::Usage("dispatch parameter must be finite".into()));
        }
    }
    Ok(mode)
}

fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| Failure::from(Error::Io(e)))
}

fn cmd_fpad(common: &Common, dump: Option<&Path>) -> CliResult<Value> {
    let s = load(common)?;
    let pfs = tsc_power_functions(&s.tsc, s.model)?;
    if let Some(p) = dump {
        write_json(p, &json!({ "schema": export::DUMP_SCHEMA, "steps": [{ "time_s": 0.0, "zso1": &pfs[0], "zso2": &pfs[1] }] }))?;
    }
    let domain = tsc_fpad_from(&pfs, &s.tsc, s.constraint())?;
    domain.require()?;
    let mut v = json!(domain);
    v["constraint"] = json!(s.constraint());
    Ok(v)
}

fn cmd_fpdd(common: &Common, scope: Scope) -> CliResult<Value> {
    let s = load(common)?;
    let pfs = tsc_power_functions(&s.tsc, s.model)?;
    let domain = tsc_fpad_from(&pfs, &s.tsc, s.constraint())?;
    let fpad = match scope {
        Scope::Zso1 => domain.zso1.interval.ok_or(Error::EmptyFpad)?,
        Scope::Zso2 => domain.zso2.interval.ok_or(Error::EmptyFpad)?,
        Scope::Tsc => domain.require()?,
    };
    let range = fpdd(fpad, &pfs, scope)?;
    Ok(json!({ "scope": scope, "fpad": fpad, "fpdd": range, "constraint": s.constraint() }))
}

fn cmd_rpa(common: &Common, args: &DispatchArgs) -> CliResult<Value> {
    let s = load(common)?;
    let mode = dispatch_mode(args, s.dispatch)?.ok_or_else(|| Failure::Usage("no dispatch mode: give --mode or a `dispatch` section".into()))?;
    let pfs = tsc_power_functions(&s.tsc, s.model)?;
    let fpad = tsc_fpad_from(&pfs, &s.tsc, s.constraint())?.require()?;
    let d = rpa(mode, fpad, &pfs)?;
    let s_base = s.tsc.base.s_base_mva;
    let mw = |p: f64, q: f64| json!({ "p_mw": p * s_base, "q_mvar": q * s_base });
    let [n1, a1] = station_powers_pu(&pfs[0], d.delta_a);
    let [n2, a2] = station_powers_pu(&pfs[1], d.delta_a);
    Ok(json!({
        "decision": d,
        "fpad": fpad,
        "stations": {
            "nts1": mw(n1.re, n1.im),
            "ats": mw(a1.re + a2.re, a1.im + a2.im),
            "nts2": mw(n2.re, n2.im),
        },
        "ats_p_mw": ats_power(&pfs, d.delta_a)[0] * s_base,
        "kp_tsc": kp(&pfs, d.delta_a, Scope::Tsc).ok(),
    }))
}

fn cmd_simulate(common: &Common, out: &Path, timing: bool, dump: bool) -> CliResult<Value> {
    let s = load(common)?;
    let mut cfg = s.sim_config()?;
    cfg.dump_power_functions |= dump;
    let result = sim::run(&cfg, &s.schedule)?;
    let written = export::write_outputs(out, &cfg, &result, timing)?;
    let summary = export::summarize(&cfg, &result);
    Ok(json!({
        "steps": summary.steps,
        "hold_steps": summary.hold_steps,
        "clamped_steps": summary.clamped_steps,
        "records": written.records,
        "summary": written.summary,
        "powerfunc": written.power_functions,
    }))
}

fn cmd_verify(common: &Common, grid: usize, every: f64, out: Option<&Path>) -> CliResult<Value> {
    let s = load(common)?;
    if grid < 2 {
        return Err(Failure::Usage("--grid must be at least 2".into()));
    }
    let mut cases = vec![s.tsc.clone()];
    if !s.schedule.trains.is_empty() {
        if !(every.is_finite() && every > 0.0) {
            return Err(Failure::Usage("--every must be positive".into()));
        }
        let end = s.schedule_end_s();
        let mut t = 0.0;
        while t < end {
            cases.push(s.schedule.populate(&s.tsc, t));
            t += every;
        }
    }
    let nr = NrOptions::default();
    let angles = s.tsc.delta_limits.grid(grid);
    let (mut powers, mut fpads) = (Vec::new(), Vec::new());
    for (i, tsc) in cases.iter().enumerate() {
        powers.extend(verify::compare_powers(i, tsc, s.model, &angles, nr)?);
        fpads.push(verify::compare_fpad(i, tsc, s.constraint(), s.model, nr)?);
    }
    let summary = json!(verify::summarize(&powers, &fpads, cases.len(), angles.len()));
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Failure::from(Error::Io(e)))?;
        let f = fs::File::create(dir.join("verify.csv")).map_err(|e| Failure::from(Error::Io(e)))?;
        verify::write_power_rows(f, &powers)?;
        write_json(&dir.join("verify.json"), &json!({ "summary": &summary, "fpad": fpads }))?;
    }
    Ok(summary)
}

fn cmd_bench(common: &Common, args: &DispatchArgs, reps: usize) -> CliResult<Value> {
    let s = load(common)?;
    if reps == 0 {
        return Err(Failure::Usage("--repetitions must be at least 1".into()));
    }
    let mode = dispatch_mode(args, s.dispatch)?;
    let report = bench::bench(&s.tsc, s.constraint(), s.model, mode, reps)?;
    Ok(json!(report))
}

fn execute(cli: &Cli) -> CliResult<Value> {
    match &cli.command {
        Command::Fpad { common, dump_powerfunc } => cmd_fpad(common, dump_powerfunc.as_deref()),
        Command::Fpdd { common, scope } => cmd_fpdd(common, (*scope).into()),
        Command::Rpa { common, dispatch } => cmd_rpa(common, dispatch),
        Command::Simulate { common, out, timing, dump_powerfunc } => cmd_simulate(common, out, *timing, *dump_powerfunc),
        Command::Verify { common, grid, every, out } => cmd_verify(common, *grid, *every, out.as_deref()),
        Command::Bench { common, dispatch, repetitions } => cmd_bench(common, dispatch, *repetitions),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TSC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("serializable");
            let _ = writeln!(std::io::stdout(), "{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{}", Cli::command().render_usage());
            ExitCode::from(1)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("{}", json!({ "error": e.code(), "message": e.to_string() }));
            ExitCode::from(2)
        }
    }
}
