//! Command-line surface of the interpretation-engine power model.
//!
//! Exit codes: 0 success, 1 malformed input, 2 semantic validation
//! failure, 3 numerically infeasible request.

pub mod error;
pub mod files;
pub mod report;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use interp_hls::design::{derive_routing, routing_bits, validate_design, DesignSpec, FunctionSpec};
use interp_hls::power::{
    calibrate_design, fit_activity, predict, remap_activity, substitute_optimized, ActivityProfile,
    FitTarget, PowerParams,
};
use interp_hls::sim::{extract_activity, run_periods, EngineState, ImplRegistry};

pub use error::{exit_code, Failure};
use files::*;

#[derive(Debug, Parser)]
#[command(
    name = "interp-hls",
    version,
    about = "Power model for interpreter-style HLS accelerators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lower a source program to a state machine and print its dump.
    Translate {
        source: PathBuf,
        /// Write the dump here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a design against its library.
    Validate(DesignArgs),
    /// Rebuild R and D from the program's dataflow.
    DeriveRouting(DesignArgs),
    /// Fit the per-bit routing power to a measured design.
    Calibrate {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        activity: PathBuf,
        #[arg(long)]
        measurement: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        opts: ModelArgs,
    },
    /// Predict the power of a design from a calibration.
    Predict {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        activity: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        /// Measurement to compare against.
        #[arg(long)]
        measured: Option<PathBuf>,
        /// Library of optimized variants to substitute before predicting.
        #[arg(long)]
        optimized: Vec<PathBuf>,
        /// Write the report record here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a one-row comparison CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        opts: ModelArgs,
    },
    /// Run the interpreter for whole periods.
    Simulate {
        #[command(flatten)]
        design: DesignArgs,
        /// Source file whose function bodies implement library functions.
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        periods: u64,
        /// States per period; defaults to one idle state plus every
        /// instance's state count.
        #[arg(long)]
        period_states: Option<u32>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long = "activity-out")]
        activity_out: Option<PathBuf>,
    },
    /// Render report records as a comparison table.
    Report {
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Search integer activity allocations that reproduce a target Gamma.
    FitActivity {
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        optimized: Vec<PathBuf>,
        #[arg(long)]
        period_states: Option<u32>,
        #[arg(long)]
        ldiv: Option<u32>,
        #[arg(
            long,
            conflicts_with = "target_numerator",
            required_unless_present = "target_numerator"
        )]
        target_gamma: Option<f64>,
        #[arg(long)]
        target_numerator: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print every improvement found during the search.
        #[arg(long)]
        log: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub design: PathBuf,
    /// Function library; may be repeated.
    #[arg(long, required = true)]
    pub library: Vec<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Disable noise (the default unless --sigma is given).
    #[arg(long, conflicts_with = "sigma")]
    pub deterministic: bool,
    /// Noise standard deviation: of the measurement when calibrating, of
    /// the estimate itself when predicting.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the Gamma divisor.
    #[arg(long)]
    pub ldiv: Option<u32>,
}

/// Runs one command and returns what it prints on stdout.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Translate { source, out } => cmd_translate(&source, out.as_deref()),
        Command::Validate(d) => cmd_validate(&d),
        Command::DeriveRouting(d) => cmd_derive_routing(&d),
        Command::Calibrate {
            design,
            activity,
            measurement,
            out,
            opts,
        } => cmd_calibrate(&design, &activity, &measurement, out.as_deref(), &opts),
        Command::Predict {
            design,
            activity,
            calibration,
            measured,
            optimized,
            out,
            csv,
            opts,
        } => cmd_predict(&PredictArgs {
            design,
            activity,
            calibration,
            measured,
            optimized,
            out,
            csv,
            opts,
        }),
        Command::Simulate {
            design,
            source,
            periods,
            period_states,
            trace,
            activity_out,
        } => cmd_simulate(
            &design,
            source.as_deref(),
            periods,
            period_states,
            trace.as_deref(),
            activity_out.as_deref(),
        ),
        Command::Report { records, csv } => cmd_report(&records, csv.as_deref()),
        Command::FitActivity {
            design,
            optimized,
            period_states,
            ldiv,
            target_gamma,
            target_numerator,
            out,
            log,
        } => {
            let target = match (target_gamma, target_numerator) {
                (Some(g), _) => FitTarget::Gamma(g),
                (None, Some(n)) => FitTarget::Numerator(n),
                (None, None) => return Err(Failure::Syntax("a target is required".into()).into()),
            };
            cmd_fit_activity(
                &design,
                &optimized,
                period_states,
                ldiv,
                target,
                out.as_deref(),
                log,
            )
        }
    }
}

pub struct Library {
    pub functions: BTreeMap<String, FunctionSpec>,
    pub engine: Option<EngineEntry>,
}

pub fn load_library(paths: &[PathBuf]) -> Result<Library> {
    let mut functions: BTreeMap<String, FunctionSpec> = BTreeMap::new();
    let mut engine: Option<EngineEntry> = None;
    for p in paths {
        let lib: LibraryFile = read_json(p)?;
        check_schema(lib.schema, p)?;
        if let Some(e) = lib.engine {
            if engine.as_ref().is_some_and(|old| old != &e) {
                return Err(
                    Failure::Invalid(format!("{}: conflicting engine block", p.display())).into(),
                );
            }
            engine = Some(e);
        }
        for f in lib.functions {
            let spec = f.to_spec();
            if functions.get(&spec.name).is_some_and(|old| old != &spec) {
                return Err(Failure::Invalid(format!(
                    "{}: conflicting definitions of `{}`",
                    p.display(),
                    spec.name
                ))
                .into());
            }
            functions.insert(spec.name.clone(), spec);
        }
    }
    Ok(Library { functions, engine })
}

/// Reads, assembles and validates a design.
pub fn load_design(args: &DesignArgs) -> Result<(DesignSpec, Library)> {
    let lib = load_library(&args.library)?;
    let file: DesignFile = read_json(&args.design)?;
    check_schema(file.schema, &args.design)?;
    let design = file.to_spec(&lib.functions)?;
    let diags = validate_design(&design);
    if !diags.is_empty() {
        let mut msg = format!(
            "{}: design `{}` is invalid:",
            args.design.display(),
            design.name
        );
        for d in &diags {
            let _ = write!(msg, "\n  {d}");
        }
        return Err(Failure::Invalid(msg).into());
    }
    Ok((design, lib))
}

fn base_params(lib: &Library) -> PowerParams {
    match &lib.engine {
        Some(e) => PowerParams {
            ps_c: e.static_watts,
            pd_c: e.dynamic_watts,
            pr1_static: e.routing_static_watts_per_bit,
            ..Default::default()
        },
        None => PowerParams::default(),
    }
}

fn load_activity(path: &Path, ldiv: Option<u32>) -> Result<ActivityProfile> {
    let file: ActivityFile = read_json(path)?;
    check_schema(file.schema, path)?;
    let mut a = file.to_profile()?;
    if ldiv.is_some() {
        a.l_div = ldiv;
    }
    Ok(a)
}

/// One idle state plus the state count of every instance.
pub fn default_period_states(design: &DesignSpec) -> u32 {
    1 + design
        .instances
        .iter()
        .filter_map(|i| design.function(&i.function))
        .map(|f| f.state_count)
        .sum::<u32>()
}

fn emit(out: Option<&Path>, text: &str) -> Result<String> {
    match out {
        Some(p) => {
            write_atomic(p, text)?;
            Ok(String::new())
        }
        None => Ok(text.to_string()),
    }
}

fn cmd_translate(source: &Path, out: Option<&Path>) -> Result<String> {
    let text =
        std::fs::read_to_string(source).with_context(|| format!("reading {}", source.display()))?;
    let g = load_source(source, &text)?;
    let m = interp_hls::fsm::translate(&g);
    emit(out, &m.dump())
}

/// Parses and validates a `.hlsw` source.
fn load_source(path: &Path, text: &str) -> Result<interp_hls::TaskGraph> {
    let g = interp_hls::frontend::parse(text).map_err(|e| {
        let msg = format!("{}:{e}", path.display());
        if e.is_syntax() {
            Failure::Syntax(msg)
        } else {
            Failure::Invalid(msg)
        }
    })?;
    interp_hls::frontend::validate(&g)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
    Ok(g)
}

fn cmd_validate(args: &DesignArgs) -> Result<String> {
    let (d, _) = load_design(args)?;
    let bits = routing_bits(&d.routing, &d.costs).map_err(|e| Failure::Invalid(e.to_string()))?;
    Ok(format!(
        "{}: ok ({} instructions, {} instances, {bits} routing bits)\n",
        d.name,
        d.program.len(),
        d.instances.len()
    ))
}

fn cmd_derive_routing(args: &DesignArgs) -> Result<String> {
    let (d, _) = load_design(args)?;
    let (r, c) = derive_routing(&d.program, &d.functions, &d.storage, &d.instances)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    let bits = routing_bits(&r, &c).map_err(|e| Failure::Invalid(e.to_string()))?;
    let declared = r.entries == d.routing.entries && c == d.costs && d.routing.nodes.is_none();
    let v = serde_json::json!({
        "instances": d.instances.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "matrix": r.entries,
        "costs": c.bits,
        "routing_bits": bits,
        "matches_declared": declared,
    });
    Ok(to_json(&v))
}

fn model_params(lib: &Library, opts: &ModelArgs) -> Result<PowerParams> {
    let mut p = base_params(lib);
    if let Some(s) = opts.sigma {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Failure::Invalid(format!(
                "sigma must be finite and non-negative, got {s}"
            ))
            .into());
        }
        p.sigma = s;
    }
    p.seed = opts.seed;
    Ok(p)
}

fn cmd_calibrate(
    design: &DesignArgs,
    activity: &Path,
    measurement: &Path,
    out: Option<&Path>,
    opts: &ModelArgs,
) -> Result<String> {
    let (d, lib) = load_design(design)?;
    let a = load_activity(activity, opts.ldiv)?;
    let m: MeasurementFile = read_json(measurement)?;
    check_schema(m.schema, measurement)?;
    let params = model_params(&lib, opts)?;
    let cal = calibrate_design(&d, &a, &m.to_measured(), &params).map_err(Failure::from)?;
    let file = CalibrationFile::from_calibration(&d.name, &cal);
    let mut text = format!(
        "{}: pr1 = {} W/bit (residual {} W over {} bits, noise std {})\n",
        d.name, cal.pr1, cal.residual, cal.routing_bits, cal.noise_std
    );
    match out {
        Some(p) => write_atomic(p, &to_json(&file))?,
        None => text.push_str(&to_json(&file)),
    }
    Ok(text)
}

pub struct PredictArgs {
    pub design: DesignArgs,
    pub activity: PathBuf,
    pub calibration: PathBuf,
    pub measured: Option<PathBuf>,
    pub optimized: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub opts: ModelArgs,
}

/// Applies optimized variants, carrying the activity over when it was
/// written for the baseline design.
fn apply_optimized(
    design: DesignSpec,
    activity: Option<ActivityProfile>,
    optimized: &[PathBuf],
) -> Result<(DesignSpec, Option<ActivityProfile>)> {
    if optimized.is_empty() {
        return Ok((design, activity));
    }
    let lib = load_library(optimized)?;
    let variants: Vec<FunctionSpec> = lib.functions.into_values().collect();
    let (sub, subs) = substitute_optimized(&design, &variants).map_err(Failure::from)?;
    let activity = activity.map(|a| {
        if a.check(&sub).is_ok() {
            a
        } else {
            remap_activity(&a, &subs)
        }
    });
    Ok((sub, activity))
}

fn cmd_predict(args: &PredictArgs) -> Result<String> {
    let (d, lib) = load_design(&args.design)?;
    let a = load_activity(&args.activity, args.opts.ldiv)?;
    let (d, a) = apply_optimized(d, Some(a), &args.optimized)?;
    let a = a.expect("activity given");
    let cal_file: CalibrationFile = read_json(&args.calibration)?;
    check_schema(cal_file.schema, &args.calibration)?;
    let mut params = cal_file
        .to_calibration()
        .apply(&model_params(&lib, &args.opts)?);
    if let Some(s) = args.opts.sigma {
        params.sigma = s;
    }
    if args.opts.deterministic {
        params.sigma = 0.0;
    }
    let measured = match &args.measured {
        Some(p) => {
            let m: MeasurementFile = read_json(p)?;
            check_schema(m.schema, p)?;
            Some(m.to_measured())
        }
        None => None,
    };
    let p = predict(&d, &a, &params, measured).map_err(Failure::from)?;
    let sample = (p.dynamic.std > 0.0).then(|| p.dynamic.samples(1, params.seed)[0]);
    let record = ReportRecord::from_prediction(&p, sample);
    if let Some(path) = &args.csv {
        write_atomic(path, &report::csv(std::slice::from_ref(&record)))?;
    }
    let mut text = report::describe(&record);
    match &args.out {
        Some(path) => write_atomic(path, &to_json(&record))?,
        None => text.push_str(&to_json(&record)),
    }
    Ok(text)
}

fn cmd_simulate(
    args: &DesignArgs,
    source: Option<&Path>,
    periods: u64,
    period_states: Option<u32>,
    trace_out: Option<&Path>,
    activity_out: Option<&Path>,
) -> Result<String> {
    if periods == 0 {
        return Err(Failure::Invalid("--periods must be at least 1".into()).into());
    }
    let (d, _) = load_design(args)?;
    let registry = match source {
        Some(src) => {
            let text = std::fs::read_to_string(src)
                .with_context(|| format!("reading {}", src.display()))?;
            let g = load_source(src, &text)?;
            ImplRegistry::from_graph(&d, &g)
        }
        None => ImplRegistry::stubs(&d),
    };
    let (state, trace) = run_periods(&EngineState::initial(&d), &d, &registry, periods)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    let l = period_states.unwrap_or_else(|| default_period_states(&d));
    let activity = extract_activity(&trace, l).map_err(|e| Failure::Numeric(e.to_string()))?;
    if let Some(p) = trace_out {
        write_atomic(p, &trace.to_csv())?;
    }
    if let Some(p) = activity_out {
        write_atomic(p, &to_json(&ActivityFile::from_profile(&d.name, &activity)))?;
    }
    let mut text = format!(
        "{}: {} periods, {} dispatches, final {}\n",
        d.name,
        state.period_count,
        trace.len(),
        state.values
    );
    for (id, n) in &activity.active {
        let _ = writeln!(text, "  {id}: {n}/{l} states");
    }
    if trace_out.is_none() {
        text.push_str(&trace.to_csv());
    }
    Ok(text)
}

fn cmd_report(paths: &[PathBuf], csv_out: Option<&Path>) -> Result<String> {
    let mut records = Vec::new();
    for p in paths {
        let r: ReportRecord = read_json(p)?;
        check_schema(r.schema, p)?;
        records.push(r);
    }
    if let Some(p) = csv_out {
        write_atomic(p, &report::csv(&records))?;
    }
    Ok(report::table(&records))
}

fn cmd_fit_activity(
    args: &DesignArgs,
    optimized: &[PathBuf],
    period_states: Option<u32>,
    ldiv: Option<u32>,
    target: FitTarget,
    out: Option<&Path>,
    log: bool,
) -> Result<String> {
    let (d, _) = load_design(args)?;
    let (d, _) = apply_optimized(d, None, optimized)?;
    let l = period_states.unwrap_or_else(|| default_period_states(&d));
    let fit = fit_activity(&d, l, ldiv, target).map_err(Failure::from)?;
    let mut text = String::new();
    if log {
        for line in &fit.log {
            let _ = writeln!(text, "{line}");
        }
    }
    let alloc: Vec<String> = fit
        .activity
        .active
        .iter()
        .map(|(id, n)| format!("{id}={n}"))
        .collect();
    let _ = writeln!(
        text,
        "{}: L={l} L_div={} allocation [{}] numerator={:.6} gamma={:.6} error={:.9} ({} allocations searched)",
        d.name,
        fit.activity.divisor(),
        alloc.join(", "),
        fit.numerator,
        fit.gamma,
        fit.error,
        fit.evaluated
    );
    let file = ActivityFile::from_profile(&d.name, &fit.activity);
    match out {
        Some(p) => write_atomic(p, &to_json(&file))?,
        None => text.push_str(&to_json(&file)),
    }
    Ok(text)
}
