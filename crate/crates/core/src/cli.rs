//! Batch command-line front end. Every command writes its artifacts into the
//! output directory together with a run manifest listing them.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{propagate_qubit, DeviceParams};
use crate::error::Error;
use crate::gates::{
    build_condition_i, build_condition_ii, build_condition_iii, build_cyclic_geometric, su2_infidelity, GateRecipe,
    GateTarget, GATE_TOLERANCE,
};
use crate::robustness::{
    condition_iii_start, optimize_intermediate, reference_intermediate, sweep_errors, sweep_intermediate,
    transmon_gate_run, Axis, ErrorModel, FidelityGrid, Scheme,
};
use crate::synthesis::{ControlPulse, SynthesisConfig};
use crate::trajectory::{classify, dynamical_phase, gamma_prime, geometric_phase};
use crate::twoqubit::{
    beta_for_coupling, build_iswap_schedule, channel_breakdown, full_simulation, scan_delta_beta, IswapDesign,
    TwoQubitMetric, TwoQubitParams,
};
use crate::units::{parse_angle, parse_frequency};

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// A check the command performs did not pass.
    #[error("check failed: {0}")]
    Check(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    /// 1 for usage and configuration problems, 2 for solver or physics failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Check(_) => 2,
            CliError::Core(e) if e.is_physics_failure() => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn angle_arg(s: &str) -> std::result::Result<f64, String> {
    parse_angle(s).map_err(|e| e.to_string())
}

fn freq_arg(s: &str) -> std::result::Result<f64, String> {
    parse_frequency(s).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "geogate", version, about = "Noncyclic geometric gate synthesis and simulation")]
pub struct Cli {
    /// Seed for every random choice (error-direction ensembles).
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// JSON file with `device`, `twoqubit` and `iswap` sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving all outputs.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Peak control amplitude, rad/µs or e.g. `2pi*32MHz`.
    #[arg(long, global = true, default_value = "2pi*32MHz", value_parser = freq_arg)]
    pub omega_max: f64,
    /// Largest latitude detuning as a multiple of the peak amplitude.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub detuning_ratio: f64,
    /// Samples per longest trajectory segment.
    #[arg(long, global = true, default_value_t = 256)]
    pub spp: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Condition {
    I,
    Ii,
    Iii,
    Cyclic,
}

impl Condition {
    fn name(self) -> &'static str {
        match self {
            Condition::I => "i",
            Condition::Ii => "ii",
            Condition::Iii => "iii",
            Condition::Cyclic => "cyclic",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RecipeArgs {
    /// Target gate: `h`, `rx:pi`, `ry:pi/2`, `rz:pi/4`, ...
    #[arg(long)]
    pub gate: String,
    #[arg(long, value_enum, default_value = "i")]
    pub condition: Condition,
    /// Starting latitude (conditions i and iii).
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    pub chi0: Option<f64>,
    /// First intermediate latitude (condition i).
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    pub chi1: Option<f64>,
    /// Second intermediate latitude (condition i).
    #[arg(long, value_parser = angle_arg, allow_hyphen_values = true)]
    pub chi2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    /// Intermediate latitudes of condition-(i) recipes.
    Params,
    /// Systematic and ZZ error strengths.
    Errors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DragMode {
    On,
    Off,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a recipe, synthesize its pulse and write both.
    Synth(RecipeArgs),
    /// Verify a recipe (or a stored pulse) against its target gate.
    Gatecheck {
        #[command(flatten)]
        recipe: RecipeArgs,
        /// Check this pulse file instead of a freshly synthesized one.
        #[arg(long)]
        pulse: Option<PathBuf>,
        #[arg(long, default_value_t = GATE_TOLERANCE)]
        tolerance: f64,
    },
    /// Fidelity landscapes under quasi-static errors.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        #[arg(long)]
        gate: String,
        #[arg(long, default_value = "ngg-i")]
        scheme: String,
        #[arg(long, default_value_t = 25)]
        grid: usize,
        /// Relative error strength used for both channels (params sweeps).
        #[arg(long, default_value_t = 0.05)]
        strength: f64,
        /// Upper end of the systematic-error axis (errors sweeps).
        #[arg(long, default_value_t = 0.2)]
        lambda_max: f64,
        /// Upper end of the ZZ axis (errors sweeps).
        #[arg(long, default_value_t = 0.2)]
        zeta_max: f64,
        #[arg(long, value_parser = angle_arg)]
        chi1: Option<f64>,
        #[arg(long, value_parser = angle_arg)]
        chi2: Option<f64>,
    },
    /// Most robust intermediate latitudes of a condition-(i) recipe.
    Optimize {
        #[arg(long)]
        gate: String,
        #[arg(long, default_value_t = 25)]
        grid: usize,
        #[arg(long, default_value_t = 0.05)]
        strength: f64,
        /// Keep the best grid cell without local refinement.
        #[arg(long)]
        no_refine: bool,
    },
    /// Open-system simulation on the transmon ladder, with and without DRAG.
    Transmon {
        #[arg(long)]
        gate: String,
        #[arg(long, value_enum, default_value = "both")]
        drag: DragMode,
        #[arg(long, default_value_t = 1000)]
        states: usize,
        #[arg(long, value_parser = angle_arg)]
        chi1: Option<f64>,
        #[arg(long, value_parser = angle_arg)]
        chi2: Option<f64>,
    },
    /// Parametric iSWAP: scan over the qubit splitting and modulation depth,
    /// or a single run at a requested effective coupling.
    Twoqubit {
        #[arg(long, default_value = "2pi*480MHz", value_parser = freq_arg)]
        delta1_min: f64,
        #[arg(long, default_value = "2pi*660MHz", value_parser = freq_arg)]
        delta1_max: f64,
        #[arg(long, default_value_t = 10)]
        delta1_n: usize,
        #[arg(long, default_value_t = 0.93)]
        beta_min: f64,
        #[arg(long, default_value_t = 1.74)]
        beta_max: f64,
        #[arg(long, default_value_t = 10)]
        beta_n: usize,
        /// Leave out relaxation and dephasing.
        #[arg(long)]
        closed: bool,
        /// Also compare leakage-only and decoherence-only runs at the best cell.
        #[arg(long)]
        breakdown: bool,
        /// Single run at this peak effective coupling instead of a scan.
        #[arg(long, value_parser = freq_arg)]
        omega_e: Option<f64>,
    },
    /// Summarise fidelity-grid CSV files.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Gatecheck { .. } => "gatecheck",
            Command::Sweep { .. } => "sweep",
            Command::Optimize { .. } => "optimize",
            Command::Transmon { .. } => "transmon",
            Command::Twoqubit { .. } => "twoqubit",
            Command::Report { .. } => "report",
        }
    }
}

/// Device and two-qubit settings loaded from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub device: DeviceParams,
    pub twoqubit: TwoQubitParams,
    pub iswap: IswapDesign,
}

impl RunConfig {
    pub fn load(path: &Path) -> crate::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.device.validate()?;
        cfg.twoqubit.validate()?;
        Ok(cfg)
    }
}

/// Provenance of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// SHA-256 of the arguments and the effective configuration.
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

/// Digest of the arguments and configuration; independent of timing.
pub fn config_digest(args: &[String], config: &RunConfig) -> crate::Result<String> {
    let canonical = serde_json::to_string(&(args, config))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

struct Context<'a> {
    cli: &'a Cli,
    config: RunConfig,
    outputs: Vec<PathBuf>,
}

impl Context<'_> {
    fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig::new(self.cli.omega_max)
            .with_samples(self.cli.spp)
            .with_detuning_ratio(self.cli.detuning_ratio)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cli.out.join(name)
    }

    fn wrote(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    fn wrote_grid(&mut self, grid: &FidelityGrid, path: PathBuf) -> CliResult<()> {
        grid.write_csv(&path)?;
        self.outputs.push(FidelityGrid::manifest_path(&path));
        self.outputs.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name);
        std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
        self.wrote(path);
        Ok(())
    }
}

/// Parse `args` (including the program name), run the command and return
/// the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let words: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, &words) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Run a parsed command; `words` is the full command line for the manifest.
pub fn run(cli: &Cli, words: &[String]) -> CliResult<RunManifest> {
    let start = Instant::now();
    if cli.threads > 0 {
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(&cli.out)?;
    let args: Vec<String> = words.iter().skip(1).cloned().collect();
    let digest = config_digest(&args, &config)?;
    let mut ctx = Context { cli, config, outputs: Vec::new() };

    match &cli.command {
        Command::Synth(r) => cmd_synth(&mut ctx, r)?,
        Command::Gatecheck { recipe, pulse, tolerance } => cmd_gatecheck(&mut ctx, recipe, pulse.as_deref(), *tolerance)?,
        Command::Sweep { kind, gate, scheme, grid, strength, lambda_max, zeta_max, chi1, chi2 } => {
            let intermediate = pair(*chi1, *chi2)?;
            cmd_sweep(&mut ctx, *kind, gate, scheme, *grid, *strength, (*lambda_max, *zeta_max), intermediate)?
        }
        Command::Optimize { gate, grid, strength, no_refine } => cmd_optimize(&mut ctx, gate, *grid, *strength, !no_refine)?,
        Command::Transmon { gate, drag, states, chi1, chi2 } => {
            let intermediate = pair(*chi1, *chi2)?;
            cmd_transmon(&mut ctx, gate, *drag, *states, intermediate)?
        }
        Command::Twoqubit { delta1_min, delta1_max, delta1_n, beta_min, beta_max, beta_n, closed, breakdown, omega_e } => {
            match omega_e {
                Some(w) => cmd_twoqubit_single(&mut ctx, *w, !closed)?,
                None => {
                    let d1 = Axis::linspace("delta1", *delta1_min, *delta1_max, *delta1_n).values;
                    let b = Axis::linspace("beta", *beta_min, *beta_max, *beta_n).values;
                    cmd_twoqubit_scan(&mut ctx, &d1, &b, !closed, *breakdown)?
                }
            }
        }
        Command::Report { inputs } => cmd_report(&mut ctx, inputs)?,
    }

    let manifest_path = ctx.path(&format!("{}.run.json", cli.command.name()));
    let manifest = RunManifest {
        command_line: words.to_vec(),
        config_digest: digest,
        seeds: vec![cli.seed],
        tool_version: env!("CARGO_PKG_VERSION").into(),
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs: ctx.outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn pair(a: Option<f64>, b: Option<f64>) -> CliResult<Option<(f64, f64)>> {
    match (a, b) {
        (Some(a), Some(b)) => Ok(Some((a, b))),
        (None, None) => Ok(None),
        _ => Err(CliError::Usage("--chi1 and --chi2 must be given together".into())),
    }
}

fn gate_arg(text: &str) -> CliResult<GateTarget> {
    GateTarget::parse(text).map_err(|e| CliError::Usage(e.to_string()))
}

fn build_recipe(r: &RecipeArgs) -> CliResult<(GateTarget, GateRecipe)> {
    let gate = gate_arg(&r.gate)?;
    let recipe = match r.condition {
        Condition::I => {
            let (c1, c2) = match pair(r.chi1, r.chi2)? {
                Some(p) => p,
                None => reference_intermediate(&gate)
                    .ok_or_else(|| CliError::Usage(format!("no default latitudes for {}", gate.label)))?,
            };
            build_condition_i(&gate, r.chi0.unwrap_or(0.0), c1, c2)?
        }
        Condition::Ii => build_condition_ii(&gate, None)?,
        Condition::Iii => build_condition_iii(&gate, r.chi0.unwrap_or_else(|| condition_iii_start(&gate)))?,
        Condition::Cyclic => build_cyclic_geometric(&gate)?,
    };
    Ok((gate, recipe))
}

fn cmd_synth(ctx: &mut Context, r: &RecipeArgs) -> CliResult<()> {
    let (gate, recipe) = build_recipe(r)?;
    let cfg = ctx.synthesis();
    let pulse = recipe.pulse(&cfg)?;
    let infidelity = recipe.propagated_infidelity(&cfg)?;
    let stem = format!("{}_{}", gate.tag(), r.condition.name());
    let pulse_path = ctx.path(&format!("{stem}.pulse.json"));
    pulse.write_json(&pulse_path)?;
    ctx.wrote(pulse_path);
    let recipe_path = ctx.path(&format!("{stem}.recipe.json"));
    recipe.write_json(&recipe_path)?;
    ctx.wrote(recipe_path);
    println!("gate {} condition {}", gate.label, r.condition.name());
    println!("duration {:.6} us, {} samples", pulse.duration(), pulse.n);
    println!("infidelity {infidelity:.3e}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct GateCheck {
    gate: String,
    classification: Option<String>,
    geometric_phase: Option<f64>,
    gamma_prime: Option<f64>,
    dynamical_phase: Option<f64>,
    recipe_infidelity: Option<f64>,
    propagated_infidelity: f64,
    tolerance: f64,
    passed: bool,
}

fn cmd_gatecheck(ctx: &mut Context, r: &RecipeArgs, pulse_file: Option<&Path>, tolerance: f64) -> CliResult<()> {
    let check = match pulse_file {
        Some(path) => {
            let gate = gate_arg(&r.gate)?;
            let ideal = gate
                .su2()
                .ok_or_else(|| CliError::Usage("pulse checks need a single-qubit gate".into()))?;
            let pulse = ControlPulse::read_json(path)?;
            let inf = su2_infidelity(&ideal, &propagate_qubit(&pulse));
            GateCheck {
                gate: gate.label.to_string(),
                classification: None,
                geometric_phase: None,
                gamma_prime: None,
                dynamical_phase: None,
                recipe_infidelity: None,
                propagated_infidelity: inf,
                tolerance,
                passed: inf < tolerance,
            }
        }
        None => {
            let (gate, recipe) = build_recipe(r)?;
            let cfg = ctx.synthesis();
            let pulse = recipe.pulse(&cfg)?;
            let inf = recipe.propagated_infidelity(&cfg)?;
            GateCheck {
                gate: gate.label.to_string(),
                classification: Some(format!("{:?}", classify(&recipe.spec)?)),
                geometric_phase: Some(geometric_phase(&recipe.spec)?),
                gamma_prime: Some(gamma_prime(&recipe.spec)?),
                dynamical_phase: Some(dynamical_phase(&pulse, recipe.spec.segments[0].start)?),
                recipe_infidelity: Some(recipe.infidelity),
                propagated_infidelity: inf,
                tolerance,
                passed: inf < tolerance,
            }
        }
    };
    println!("{}", serde_json::to_string_pretty(&check)?);
    let name = format!("{}.check.json", gate_arg(&r.gate)?.tag());
    ctx.write_json(&name, &check)?;
    if !check.passed {
        return Err(CliError::Check(format!(
            "infidelity {:.3e} is not below {:.1e}",
            check.propagated_infidelity, tolerance
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    ctx: &mut Context,
    kind: SweepKind,
    gate: &str,
    scheme: &str,
    grid_n: usize,
    strength: f64,
    maxima: (f64, f64),
    intermediate: Option<(f64, f64)>,
) -> CliResult<()> {
    let gate = gate_arg(gate)?;
    let cfg = ctx.synthesis();
    let (grid, name) = match kind {
        SweepKind::Params => {
            let em = ErrorModel::new(strength, strength, ctx.cli.seed);
            (sweep_intermediate(&gate, grid_n, &em, &cfg)?, format!("sweep_params_{}.csv", gate.tag()))
        }
        SweepKind::Errors => {
            let scheme = Scheme::parse(scheme).map_err(|e| CliError::Usage(e.to_string()))?;
            let grid = sweep_errors(scheme, &gate, (0.0, maxima.0), (0.0, maxima.1), grid_n, ctx.cli.seed, &cfg, intermediate)?;
            (grid, format!("sweep_errors_{}_{}.csv", scheme, gate.tag()))
        }
    };
    let (i, j, f) = grid.argmax();
    println!(
        "{} x {} grid: best {:.6} at {} = {:.6}, {} = {:.6}; mean {:.6}",
        grid.axis1.values.len(),
        grid.axis2.values.len(),
        f,
        grid.axis1.name,
        grid.axis1.values[i],
        grid.axis2.name,
        grid.axis2.values[j],
        grid.mean()
    );
    let path = ctx.path(&name);
    ctx.wrote_grid(&grid, path)
}

fn cmd_optimize(ctx: &mut Context, gate: &str, grid_n: usize, strength: f64, refine: bool) -> CliResult<()> {
    let gate = gate_arg(gate)?;
    let em = ErrorModel::new(strength, strength, ctx.cli.seed);
    let (c1, c2, f) = optimize_intermediate(&gate, &em, grid_n, refine, &ctx.synthesis())?;
    println!("chi1 = {:.4}pi, chi2 = {:.4}pi, fidelity {:.6}", c1 / std::f64::consts::PI, c2 / std::f64::consts::PI, f);
    let summary = serde_json::json!({
        "gate": gate.label.to_string(),
        "chi1": c1,
        "chi2": c2,
        "fidelity": f,
        "grid": grid_n,
        "refine": refine,
        "error_model": em,
    });
    ctx.write_json(&format!("optimize_{}.json", gate.tag()), &summary)
}

fn cmd_transmon(ctx: &mut Context, gate: &str, drag: DragMode, states: usize, intermediate: Option<(f64, f64)>) -> CliResult<()> {
    let gate = gate_arg(gate)?;
    let intermediate = match intermediate {
        Some(p) => p,
        None => reference_intermediate(&gate)
            .ok_or_else(|| CliError::Usage(format!("no default latitudes for {}", gate.label)))?,
    };
    let dev = ctx.config.device;
    let run = transmon_gate_run(&gate, ctx.cli.omega_max, &dev, intermediate, states, ctx.cli.spp)?;
    let mut csv = String::from("drag,lambda,fidelity,leakage,duration,states\n");
    let rows = match drag {
        DragMode::On => vec![("on", run.drag_lambda, run.drag_on)],
        DragMode::Off => vec![("off", 0.0, run.drag_off)],
        DragMode::Both => vec![("on", run.drag_lambda, run.drag_on), ("off", 0.0, run.drag_off)],
    };
    for (mode, lambda, rep) in &rows {
        csv.push_str(&format!(
            "{mode},{lambda:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            rep.fidelity, rep.leakage, rep.duration, rep.states
        ));
        println!(
            "{} DRAG {mode}: fidelity {:.6}, leakage {:.3e}, duration {:.2} ns",
            gate.label,
            rep.fidelity,
            rep.leakage,
            rep.duration * 1e3
        );
    }
    let path = ctx.path(&format!("transmon_{}.csv", gate.tag()));
    std::fs::write(&path, csv)?;
    ctx.wrote(path);
    ctx.write_json(&format!("transmon_{}.json", gate.tag()), &run)
}

fn cmd_twoqubit_scan(ctx: &mut Context, delta1: &[f64], beta: &[f64], decoherence: bool, breakdown: bool) -> CliResult<()> {
    let p = ctx.config.twoqubit;
    let design = ctx.config.iswap;
    let grid = scan_delta_beta(delta1, beta, &p, &design, decoherence)?;
    let (i, j, f) = grid.argmax();
    let best = TwoQubitParams { beta: beta[j], ..p.with_delta1(delta1[i]) };
    println!(
        "best cell: delta1 = 2pi*{:.2} MHz, beta = {:.4}, fidelity {:.6}",
        delta1[i] / (2.0 * std::f64::consts::PI),
        beta[j],
        f
    );
    let path = ctx.path("twoqubit_scan.csv");
    ctx.wrote_grid(&grid, path)?;

    let mut summary = serde_json::json!({
        "delta1": delta1[i],
        "beta": beta[j],
        "fidelity": f,
        "with_decoherence": decoherence,
        "metric": if decoherence { TwoQubitMetric::ProductStates } else { TwoQubitMetric::Trace },
        "params": best,
        "design": design,
    });
    if best.beta > 0.0 {
        let omega = 2.0 * crate::engine::bessel_j_unchecked(1, best.beta) * best.g12;
        let schedule = build_iswap_schedule(&best, &design, omega)?;
        let path = ctx.path("twoqubit_best.schedule.json");
        schedule.write_json(&path)?;
        ctx.wrote(path);
        summary["duration"] = schedule.duration.into();
    }
    if breakdown && best.beta > 0.0 {
        let b = channel_breakdown(&best, &design)?;
        println!(
            "combined {:.6}, leakage only {:.6}, decoherence only {:.6}",
            b.combined, b.leakage_only, b.decoherence_only
        );
        summary["breakdown"] = serde_json::to_value(b)?;
    }
    ctx.write_json("twoqubit_best.json", &summary)
}

fn cmd_twoqubit_single(ctx: &mut Context, omega_e: f64, decoherence: bool) -> CliResult<()> {
    let p = ctx.config.twoqubit;
    let design = ctx.config.iswap;
    let schedule = build_iswap_schedule(&p, &design, omega_e)?;
    let q = TwoQubitParams { beta: beta_for_coupling(omega_e, p.g12)?, ..p };
    let q = if decoherence { q } else { q.closed() };
    let result = full_simulation(&schedule, &q, decoherence)?;
    let metric = if decoherence { TwoQubitMetric::ProductStates } else { TwoQubitMetric::Trace };
    let fit = result.fidelity(&GateTarget::iswap().matrix, metric)?;
    println!(
        "iSWAP fidelity {:.6}, leakage {:.3e}, duration {:.2} ns",
        fit.fidelity,
        result.leakage,
        schedule.duration * 1e3
    );
    let path = ctx.path("twoqubit_single.schedule.json");
    schedule.write_json(&path)?;
    ctx.wrote(path);
    let summary = serde_json::json!({
        "omega_e": omega_e,
        "fidelity": fit,
        "leakage": result.leakage,
        "duration": schedule.duration,
        "metric": metric,
        "params": q,
    });
    ctx.write_json("twoqubit_single.json", &summary)
}

fn cmd_report(ctx: &mut Context, inputs: &[PathBuf]) -> CliResult<()> {
    let mut entries = Vec::new();
    for path in inputs {
        let grid = FidelityGrid::read_csv(path)?;
        let (i, j, f) = grid.argmax();
        println!(
            "{}: {}x{}, min {:.6}, mean {:.6}, max {:.6} at ({:.6}, {:.6})",
            path.display(),
            grid.axis1.values.len(),
            grid.axis2.values.len(),
            grid.min(),
            grid.mean(),
            f,
            grid.axis1.values[i],
            grid.axis2.values[j]
        );
        entries.push(serde_json::json!({
            "file": path.display().to_string(),
            "scheme": grid.manifest.scheme,
            "gate": grid.manifest.gate,
            "axes": [grid.axis1.name, grid.axis2.name],
            "shape": [grid.axis1.values.len(), grid.axis2.values.len()],
            "min": grid.min(),
            "mean": grid.mean(),
            "max": f,
            "argmax": [grid.axis1.values[i], grid.axis2.values[j]],
        }));
    }
    ctx.write_json("report.json", &entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Core(Error::InvalidConfig("x".into())).exit_code(), 1);
        assert_eq!(CliError::Core(Error::DegenerateLatitudes { gap: 0.0 }).exit_code(), 2);
        assert_eq!(CliError::Check("x".into()).exit_code(), 2);
    }

    #[test]
    fn digest_ignores_nothing_but_timing() {
        let args = vec!["synth".to_string(), "--gate".into(), "h".into()];
        let cfg = RunConfig::default();
        let a = config_digest(&args, &cfg).unwrap();
        assert_eq!(a, config_digest(&args, &cfg).unwrap());
        assert_eq!(a.len(), 64);
        let other = RunConfig { device: DeviceParams { levels: 3, ..cfg.device }, ..cfg };
        assert_ne!(a, config_digest(&args, &other).unwrap());
    }

    #[test]
    fn config_accepts_frequency_notation() {
        let text = r#"{"device": {"alpha": "2pi*320MHz", "kappa_minus": 0.0},
                       "twoqubit": {"delta1": "2pi*560MHz", "alpha1": "2pi*320MHz", "alpha2": "2pi*300MHz",
                                    "g12": "2pi*8MHz", "nu": "2pi*560MHz", "beta": 1.29}}"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert!((cfg.device.alpha - crate::units::mhz(320.0)).abs() < 1e-9);
        assert!((cfg.twoqubit.g12 - crate::units::mhz(8.0)).abs() < 1e-9);
        assert_eq!(cfg.twoqubit.kmax, 7);
    }

    #[test]
    fn chi_flags_come_in_pairs() {
        assert!(pair(Some(1.0), None).is_err());
        assert_eq!(pair(None, None).unwrap(), None);
    }
}
