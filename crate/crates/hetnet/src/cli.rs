//! Command line: `analyze`, `simulate`, `sweep` and `ncc`.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mec_core::config::{BiasMatrix, NetworkConfig};
use mec_core::optimizer::{EvalMethod, Grid, GridScale, Objective, ParamPath, SweepResult, SweepSpec};
use mec_core::queueing::{overall_secp, QueueLoad, SecpMethod};
use mec_core::MecError;
use serde::Serialize;
use serde_json::json;

use crate::config_file::{apply_bias_overrides, load_config, parse_bias_override, reference_config, LoadedConfig};
use crate::error::{HetnetError, Result};
use crate::output::{Cell, OutDir, RunManifest, Table};
use crate::runs::{is_unimodal, par_ncc_family, par_sweep, single_tier_baseline, Evaluator};
use crate::sim::{simulate_secp, trace_replication, SecpSimOptions};

pub const OUT_ENV: &str = "MEC_HETNET_OUT";

#[derive(Debug, Parser)]
#[command(name = "mec-hetnet", version, about = "Edge computing success probability in multi-tier networks")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration; the reference table when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Simulated tasks per tier.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory; falls back to $MEC_HETNET_OUT, then ./out.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Bias override `i,k,valdB` with one-based indices; repeatable.
    #[arg(long = "bias", global = true, value_parser = bias_arg)]
    pub bias: Vec<(usize, usize, f64)>,
    /// Evaluation of the computation part.
    #[arg(long, global = true, value_enum, default_value_t = MethodArg::Auto)]
    pub secp_method: MethodArg,
}

fn bias_arg(s: &str) -> std::result::Result<(usize, usize, f64), String> {
    parse_bias_override(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Auto,
    Exact,
    Inversion,
    Gamma,
}

impl From<MethodArg> for SecpMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Auto => SecpMethod::Auto,
            MethodArg::Exact => SecpMethod::ExactClosedForm,
            MethodArg::Inversion => SecpMethod::LaplaceInversion,
            MethodArg::Gamma => SecpMethod::GammaApprox,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    #[value(name = "dB", alias = "db")]
    Db,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Secp,
    Scp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalArg {
    Analytical,
    Simulation,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-pair analytical table and overall success probabilities.
    Analyze,
    /// Discrete-event estimate of the success probabilities.
    Simulate(SimulateArgs),
    /// One-parameter sweep.
    Sweep(SweepArgs),
    /// Density/speed sweep of one tier at fixed computation capability.
    Ncc(NccArgs),
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Warmup per replication, in slots.
    #[arg(long, default_value_t = 1e5)]
    pub warmup: f64,
    #[arg(long, default_value_t = 10)]
    pub replications: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Also write one departure log per tier (first replication).
    #[arg(long)]
    pub trace: bool,
    #[arg(long, default_value_t = 100_000)]
    pub trace_limit: usize,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = EvalArg::Analytical)]
    pub method: EvalArg,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Secp)]
    pub objective: ObjectiveArg,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// bias[i][k], theta[k], lambda_u, mu[k], d[i] or t_tg[i], one-based.
    #[arg(long)]
    pub param: String,
    #[arg(long, value_enum, default_value_t = ScaleArg::Linear)]
    pub scale: ScaleArg,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Report where the curve beats the one-tier network of equal capability.
    #[arg(long)]
    pub compare_single_tier: bool,
}

#[derive(Debug, Args)]
pub struct NccArgs {
    /// Tier whose density/speed ratio moves (one-based).
    #[arg(long, default_value_t = 2)]
    pub tier: usize,
    #[arg(long, value_enum, default_value_t = ScaleArg::Linear)]
    pub scale: ScaleArg,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Computation capability Σ λ_{m,k} μ_k to rescale to; repeatable. Default: as configured.
    #[arg(long)]
    pub nk: Vec<f64>,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let started = Instant::now();
    let shown: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let out = resolve_out_dir(cli.common.out_dir.clone());
    let threads = cli.common.threads;
    let result = with_threads(threads, || execute(&cli, &out));
    let (code, ctx, mut dir) = match result {
        Ok((ctx, dir)) => (ctx.exit_code, Some(ctx), Some(dir)),
        Err(e) => {
            eprintln!("error: {e}");
            (e.exit_code(), None, None)
        }
    };
    if dir.is_none() {
        dir = OutDir::create(&out).ok();
    }
    if let Some(dir) = dir.as_mut() {
        let (hash, bias_db, path) = match &ctx {
            Some(c) => (c.loaded.hash.clone(), c.loaded.bias.to_db_rows(), c.loaded.source.clone()),
            None => (String::new(), Vec::new(), cli.common.config.as_ref().map(|p| p.display().to_string())),
        };
        let m = RunManifest {
            command: command_name(&cli.command).into(),
            args: shown,
            config_path: path,
            config_hash: hash,
            bias_db,
            seed: cli.common.seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_s: started.elapsed().as_secs_f64(),
            exit_code: code,
            outputs: Vec::new(),
        };
        if let Err(e) = dir.manifest(m) {
            eprintln!("error: {e}");
            return if code == 0 { e.exit_code() } else { code };
        }
    }
    code
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Analyze => "analyze",
        Command::Simulate(_) => "simulate",
        Command::Sweep(_) => "sweep",
        Command::Ncc(_) => "ncc",
    }
}

pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(HetnetError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| HetnetError::Usage(e.to_string()))?;
            pool.install(f)
        }
    }
}

struct Ctx {
    loaded: LoadedConfig,
    exit_code: i32,
}

fn load(common: &Common) -> Result<LoadedConfig> {
    let mut loaded = match &common.config {
        Some(p) => load_config(p)?,
        None => reference_config(),
    };
    apply_bias_overrides(&mut loaded.bias, &common.bias)?;
    Ok(loaded)
}

fn execute(cli: &Cli, out: &std::path::Path) -> Result<(Ctx, OutDir)> {
    let loaded = load(&cli.common)?;
    let mut dir = OutDir::create(out)?;
    let method: SecpMethod = cli.common.secp_method.into();
    let code = match &cli.command {
        Command::Analyze => analyze(&loaded.cfg, &loaded.bias, method, &loaded.hash, &mut dir)?,
        Command::Simulate(a) => simulate(&cli.common, a, &loaded, method, &mut dir)?,
        Command::Sweep(a) => sweep(&cli.common, a, &loaded, method, &mut dir)?,
        Command::Ncc(a) => ncc(&cli.common, a, &loaded, method, &mut dir)?,
    };
    Ok((Ctx { loaded, exit_code: code }, dir))
}

fn sim_options(common: &Common, s: &SimArgs) -> Result<SecpSimOptions> {
    if s.replications == 0 {
        return Err(HetnetError::Usage("--replications must be at least 1".into()));
    }
    if !(s.warmup >= 0.0) {
        return Err(HetnetError::Usage("--warmup must be non-negative".into()));
    }
    Ok(SecpSimOptions { tasks_per_tier: common.trials.unwrap_or(1_000_000).max(1), warmup_slots: s.warmup, replications: s.replications })
}

/// Tier diagnostics on stderr; true if any tier is unstable.
fn report_instability(cfg: &NetworkConfig, bias: &BiasMatrix) -> Result<bool> {
    let mut any = false;
    for k in 0..cfg.num_tiers() {
        let l = QueueLoad::from_config(cfg, bias, k)?;
        if !l.is_stable() {
            eprintln!("tier {}: utilization {:.6} >= 1, queue is unstable", k + 1, l.utilization);
            any = true;
        }
    }
    Ok(any)
}

fn analyze(cfg: &NetworkConfig, bias: &BiasMatrix, method: SecpMethod, hash: &str, dir: &mut OutDir) -> Result<i32> {
    cfg.validate()?;
    bias.check_shape(cfg)?;
    if report_instability(cfg, bias)? {
        return Ok(2);
    }
    let r = overall_secp(cfg, bias, method)?;
    let mut t = Table::new(&[
        "user_type",
        "tier",
        "p_o",
        "rate_up_bps",
        "rate_down_bps",
        "latency_up_s",
        "latency_down_s",
        "arrival_rate",
        "utilization",
        "threshold_slots",
        "p_ec",
        "p_cp",
        "method",
    ]);
    for p in &r.pairs {
        t.push(vec![
            (p.user_type + 1).into(),
            (p.tier + 1).into(),
            p.offload_probability.into(),
            p.uplink.max_rate.into(),
            p.downlink.max_rate.into(),
            p.uplink.latency.into(),
            p.downlink.latency.into(),
            p.arrival_rate.into(),
            p.utilization.into(),
            p.threshold_slots.into(),
            p.secp.into(),
            p.scp.into(),
            p.method.as_str().into(),
        ]);
    }
    dir.csv("analyze_pairs.csv", &t)?;
    let tiers: Vec<_> = r
        .loads
        .iter()
        .map(|l| json!({"tier": l.tier + 1, "total_rate": l.total_rate, "utilization": l.utilization}))
        .collect();
    dir.json(
        "analyze_summary.json",
        &json!({
            "p_s": r.overall,
            "p_cp": r.overall_scp,
            "method": r.method,
            "tiers": tiers,
            "config_hash": hash,
        }),
    )?;
    println!("p_s = {:.6}  p_cp = {:.6}", r.overall, r.overall_scp);
    Ok(0)
}

fn simulate(common: &Common, a: &SimulateArgs, loaded: &LoadedConfig, method: SecpMethod, dir: &mut OutDir) -> Result<i32> {
    let (cfg, bias) = (&loaded.cfg, &loaded.bias);
    let opts = sim_options(common, &a.sim)?;
    let r = simulate_secp(cfg, bias, &opts, common.seed)?;
    let analytical = if r.unstable_tiers.is_empty() { Some(overall_secp(cfg, bias, method)?) } else { None };
    let mut t = Table::new(&[
        "user_type",
        "tier",
        "p_o",
        "threshold_slots",
        "tasks",
        "p_ec",
        "p_ec_half_width",
        "p_cp",
        "p_cp_half_width",
        "p_ec_analytical",
        "p_cp_analytical",
    ]);
    for p in &r.pairs {
        let an = analytical.as_ref().and_then(|x| x.pair(p.user_type, p.tier));
        t.push(vec![
            (p.user_type + 1).into(),
            (p.tier + 1).into(),
            p.offload_probability.into(),
            p.threshold_slots.into(),
            p.secp.trials.into(),
            p.secp.estimate.into(),
            p.secp.half_width_95.into(),
            p.scp.estimate.into(),
            p.scp.half_width_95.into(),
            an.map_or(Cell::Text(String::new()), |x| x.secp.into()),
            an.map_or(Cell::Text(String::new()), |x| x.scp.into()),
        ]);
    }
    dir.csv("simulate_pairs.csv", &t)?;
    let tiers: Vec<_> = r
        .tiers
        .iter()
        .map(|x| {
            json!({
                "tier": x.tier + 1,
                "utilization": x.utilization,
                "unstable": x.unstable,
                "tasks": x.tasks,
                "arrival_rate": x.arrival_rate,
                "mean_wait_slots": x.mean_wait,
                "mean_sojourn_slots": x.mean_sojourn,
                "mean_in_system": x.mean_in_system,
            })
        })
        .collect();
    dir.json(
        "simulate_summary.json",
        &json!({
            "p_s": r.overall,
            "p_cp": r.overall_scp,
            "p_s_analytical": analytical.as_ref().map(|x| x.overall),
            "p_cp_analytical": analytical.as_ref().map(|x| x.overall_scp),
            "unstable_tiers": r.unstable_tiers.iter().map(|k| k + 1).collect::<Vec<_>>(),
            "tiers": tiers,
            "options": r.options,
            "seed": r.seed,
            "config_hash": loaded.hash,
        }),
    )?;
    if a.trace {
        for k in 0..cfg.num_tiers() {
            let recs = trace_replication(cfg, bias, &opts, common.seed, k, a.trace_limit)?;
            let mut t = Table::new(&["server_id", "tier", "type", "arrival", "start", "departure"]);
            for rec in recs {
                t.push(vec![rec.server_id.into(), (rec.tier + 1).into(), (rec.user_type + 1).into(), rec.arrival.into(), rec.start.into(), rec.departure.into()]);
            }
            dir.csv(&format!("trace_tier{}.csv", k + 1), &t)?;
        }
    }
    println!(
        "p_s = {:.6} ± {:.6}  p_cp = {:.6} ± {:.6}",
        r.overall.estimate, r.overall.half_width_95, r.overall_scp.estimate, r.overall_scp.half_width_95
    );
    if !r.unstable_tiers.is_empty() {
        report_instability(cfg, bias)?;
        return Ok(2);
    }
    Ok(0)
}

fn to_grid(g: &GridArgs, scale: ScaleArg) -> Grid {
    Grid {
        start: g.from,
        stop: g.to,
        steps: g.steps,
        scale: match scale {
            ScaleArg::Db => GridScale::Db,
            ScaleArg::Linear => GridScale::Linear,
        },
    }
}

fn evaluator(common: &Common, g: &GridArgs, method: SecpMethod) -> Result<Evaluator> {
    Ok(Evaluator {
        method: match g.method {
            EvalArg::Analytical => EvalMethod::Analytical,
            EvalArg::Simulation => EvalMethod::Simulation,
        },
        secp_method: method,
        sim: sim_options(common, &g.sim)?,
        seed: common.seed,
    })
}

fn objective(o: ObjectiveArg) -> Objective {
    match o {
        ObjectiveArg::Secp => Objective::Secp,
        ObjectiveArg::Scp => Objective::Scp,
    }
}

fn curve_rows(t: &mut Table, s: &SweepResult, lead: Option<f64>) {
    let obj = s.objective_values();
    for (j, &v) in s.values.iter().enumerate() {
        let blank = || Cell::Text(String::new());
        let m = s.metrics[j];
        let mut row: Vec<Cell> = lead.map(|x| vec![x.into()]).unwrap_or_default();
        row.extend([
            v.into(),
            if m.is_some() { obj[j].into() } else { blank() },
            m.is_some().into(),
            m.map_or_else(blank, |m| m.secp.into()),
            m.map_or_else(blank, |m| m.scp.into()),
        ]);
        t.push(row);
    }
}

#[derive(Serialize)]
struct CurveSummary {
    argmax_index: usize,
    argmax_value: f64,
    best: f64,
    /// Argmax of the other metric, for comparing the two optima.
    argmax_value_other: Option<f64>,
    stable_points: usize,
    unimodal: bool,
    interior_argmax: bool,
}

fn summarize(s: &SweepResult) -> CurveSummary {
    let other = match s.objective {
        Objective::Secp => Objective::Scp,
        Objective::Scp => Objective::Secp,
    };
    let stable: Vec<f64> = s.objective_values().into_iter().filter(|v| v.is_finite()).collect();
    CurveSummary {
        argmax_index: s.argmax_index,
        argmax_value: s.argmax_value,
        best: s.best,
        argmax_value_other: s.argmax_of(other).map(|j| s.values[j]),
        stable_points: stable.len(),
        unimodal: is_unimodal(&stable),
        // a peak only counts as interior if both neighbours were evaluated
        interior_argmax: s.argmax_index > 0 && s.argmax_index + 1 < s.values.len() && s.stable(s.argmax_index - 1) && s.stable(s.argmax_index + 1),
    }
}

fn sweep(common: &Common, a: &SweepArgs, loaded: &LoadedConfig, method: SecpMethod, dir: &mut OutDir) -> Result<i32> {
    let param = ParamPath::parse(&a.param)?;
    let eval = evaluator(common, &a.grid, method)?;
    let spec = SweepSpec { param, grid: to_grid(&a.grid, a.scale), objective: objective(a.grid.objective), method: eval.method, secp_method: method };
    let s = par_sweep(&loaded.cfg, &loaded.bias, &spec, &eval)?;
    let mut t = Table::new(&["value", "objective", "stable", "secp", "scp"]);
    curve_rows(&mut t, &s, None);
    dir.csv("sweep.csv", &t)?;
    let baseline = if a.compare_single_tier { Some(single_tier_baseline(&loaded.cfg, spec.objective, &eval)?) } else { None };
    let intervals = baseline.map(|b| s.intervals_above(b));
    dir.json(
        "sweep_summary.json",
        &json!({
            "spec": spec,
            "curve": summarize(&s),
            "single_tier_baseline": baseline,
            "intervals_above_baseline": intervals,
            "seed": common.seed,
            "config_hash": loaded.hash,
        }),
    )?;
    println!("{} argmax {} -> {:.6}", s.param, s.argmax_value, s.best);
    Ok(0)
}

fn ncc(common: &Common, a: &NccArgs, loaded: &LoadedConfig, method: SecpMethod, dir: &mut OutDir) -> Result<i32> {
    if a.tier == 0 || a.tier > loaded.cfg.num_tiers() {
        return Err(MecError::Config(format!("--tier {} out of range 1..={}", a.tier, loaded.cfg.num_tiers())).into());
    }
    let eval = evaluator(common, &a.grid, method)?;
    let nks = if a.nk.is_empty() { vec![loaded.cfg.computation_capability()] } else { a.nk.clone() };
    let grid = to_grid(&a.grid, a.scale);
    let sweeps = par_ncc_family(&loaded.cfg, &loaded.bias, a.tier - 1, grid, objective(a.grid.objective), &nks, &eval)?;
    let mut t = Table::new(&["nk", "theta", "objective", "stable", "secp", "scp"]);
    let mut per = Vec::new();
    for (nk, s) in nks.iter().zip(&sweeps) {
        curve_rows(&mut t, &s.sweep, Some(*nk));
        per.push(json!({
            "nk": nk,
            "capability": s.capability,
            "max_capability_deviation": s.max_capability_deviation,
            "curve": summarize(&s.sweep),
        }));
    }
    dir.csv("ncc.csv", &t)?;
    let argmaxes: Vec<f64> = sweeps.iter().map(|s| s.sweep.argmax_value).collect();
    dir.json(
        "ncc_summary.json",
        &json!({
            "tier": a.tier,
            "grid": grid,
            "objective": objective(a.grid.objective),
            "capability_constant": sweeps.iter().all(|s| s.max_capability_deviation <= 1e-12),
            "argmax_nondecreasing_in_nk": argmaxes.windows(2).all(|w| w[1] >= w[0]),
            "sweeps": per,
            "seed": common.seed,
            "config_hash": loaded.hash,
        }),
    )?;
    for (nk, s) in nks.iter().zip(&sweeps) {
        println!("nk {nk:e}: theta argmax {} -> {:.6}", s.sweep.argmax_value, s.sweep.best);
    }
    Ok(0)
}
