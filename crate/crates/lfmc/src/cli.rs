//! Command-line front end: training, evaluation batteries, frequency
//! sweeps and the standalone analyses, all driven by one run file.
//!
//! Every run writes a `manifest.txt` (version, seed, derived quantities,
//! config snapshot) into its output directory and refuses to overwrite an
//! existing manifest unless `--force` is passed. With `--workers 1` (the
//! default) every artifact is byte-reproducible from config plus seed.

use std::cell::RefCell;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{load_policy, save_policy};
use crate::config::{parse_run_file, RunFile};
use crate::csvio::{fmt_f64, CsvTable};
use crate::env::EnvConfig;
use crate::eval::{
    ablation_table, gait_sequence, jacobian_saliency, latency_limit, pd_toy_study, success_rate,
    velocity_tracking, GridPolicy, PdStudyConfig,
};
use crate::policy::PolicyNetwork;
use crate::train::{train_with, IterationLog};
use crate::{Error, Result};

/// Environment variable naming the default output root.
pub const OUT_ROOT_VAR: &str = "LFMC_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "lfmc",
    version,
    about = "Planar legged locomotion: train, evaluate, analyze"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy from a run configuration.
    Train(TrainArgs),
    /// Run the full evaluation battery against a checkpoint.
    Eval(EvalArgs),
    /// Train and evaluate one policy per control frequency.
    Sweep(SweepArgs),
    /// Extract stance/swing intervals from a fixed-command rollout.
    Gait(PolicyArgs),
    /// Aggregate input-gradient saliency of a policy over a rollout.
    Jacobian(PolicyArgs),
    /// Run the fixed-plant PD setpoint-rate study (no policy needed).
    PdStudy(PdStudyArgs),
    /// Fill the frequency x history x randomization grid from checkpoints.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration file.
    #[arg(short = 'c', long = "config")]
    pub config: PathBuf,
    /// Root seed override (defaults to the config's seed).
    #[arg(short = 's', long)]
    pub seed: Option<u64>,
    /// Output directory (default: $LFMC_OUT or ./runs, plus a run name).
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
    /// Overwrite results already present in the output directory.
    #[arg(long)]
    pub force: bool,
    /// Worker threads; 1 keeps everything serial and bit-reproducible.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Policy checkpoint to evaluate.
    #[arg(short = 'p', long = "policy")]
    pub policy: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Control frequencies to train at (Hz), comma separated.
    #[arg(short = 'f', long = "freqs", value_delimiter = ',', required = true)]
    pub freqs: Vec<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Policy checkpoint to analyze.
    #[arg(short = 'p', long = "policy")]
    pub policy: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct PdStudyArgs {
    /// Output directory (default: $LFMC_OUT or ./runs, plus `pd-study`).
    #[arg(short = 'o', long = "out")]
    pub out: Option<PathBuf>,
    /// Overwrite results already present in the output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Grid file: one `control_freq history dr checkpoint` line per cell,
    /// with `dr` on/off and `absent` for missing checkpoints.
    #[arg(long = "policies")]
    pub policies: PathBuf,
    /// Terrains to evaluate each cell on.
    #[arg(long, value_delimiter = ',', default_values_t = default_terrains())]
    pub terrains: Vec<String>,
    #[command(flatten)]
    pub common: Common,
}

fn default_terrains() -> Vec<String> {
    ["flat", "perlin", "stairs", "bricks"]
        .map(str::to_string)
        .to_vec()
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gait(args) => cmd_gait(args),
        Command::Jacobian(args) => cmd_jacobian(args),
        Command::PdStudy(args) => cmd_pd_study(args),
        Command::Ablate(args) => cmd_ablate(args),
    }
}

fn out_root() -> PathBuf {
    std::env::var_os(OUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn run_dir(out: &Option<PathBuf>, config: Option<&Path>, sub: &str) -> PathBuf {
    if let Some(dir) = out {
        return dir.clone();
    }
    let name = match config.and_then(Path::file_stem) {
        Some(stem) => format!("{}-{sub}", stem.to_string_lossy()),
        None => sub.to_string(),
    };
    out_root().join(name)
}

/// Creates `dir`, refusing to reuse one that already holds a manifest
/// unless `force` is set.
fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.join("manifest.txt").exists() && !force {
        return Err(Error::Config(format!(
            "results already present in `{}`; pass --force to overwrite",
            dir.display()
        )));
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn version_string() -> String {
    format!("lfmc {}", env!("CARGO_PKG_VERSION"))
}

fn write_manifest(dir: &Path, sub: &str, seed: u64, body: &str) -> Result<()> {
    let text = format!(
        "{}\nsubcommand: {sub}\nseed: {seed}\n{body}",
        version_string()
    );
    fs::write(dir.join("manifest.txt"), text)?;
    Ok(())
}

/// Loads the run file and applies command-line overrides.
fn load_run(common: &Common) -> Result<RunFile> {
    let mut run = parse_run_file(&common.config)?;
    if let Some(seed) = common.seed {
        run.train.seed = seed;
    }
    run.train.workers = common.workers;
    run.train.validate()?;
    Ok(run)
}

fn manifest_body(run: &RunFile, config: &Path) -> String {
    let snapshot = fs::read_to_string(config).unwrap_or_default();
    format!("{}\n-- config --\n{snapshot}", run.echo())
}

fn build_pool(workers: usize) -> Result<Option<rayon::ThreadPool>> {
    if workers <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

fn curve_csv(curve: &[IterationLog]) -> String {
    let mut table = CsvTable::new(&[
        "iteration",
        "mean_return",
        "mean_episode_length",
        "policy_loss",
        "value_loss",
        "entropy",
        "approx_kl",
        "clip_fraction",
        "orientation",
        "base_contact",
        "knee_contact",
        "joint_limit",
        "truncations",
    ]);
    for log in curve {
        table.row_f64(&[
            log.iteration as f64,
            log.mean_return,
            log.mean_episode_length,
            log.policy_loss,
            log.value_loss,
            log.entropy,
            log.approx_kl,
            log.clip_fraction,
            log.terminations[0] as f64,
            log.terminations[1] as f64,
            log.terminations[2] as f64,
            log.terminations[3] as f64,
            log.truncations as f64,
        ]);
    }
    table.contents().to_string()
}

/// Trains per `run`, writing curve and checkpoints into `dir`. Returns the
/// final policy and last mean return; a runtime fault is still
/// checkpointed before erroring out.
fn train_into(run: &RunFile, dir: &Path) -> Result<(PolicyNetwork, f64)> {
    let save_err: RefCell<Option<Error>> = RefCell::new(None);
    let out = train_with(&run.train, |log, policy, _| {
        println!(
            "iter {:4}  return {:9.3}  len {:6.1}  kl {:.4}  clip {:.3}",
            log.iteration,
            log.mean_return,
            log.mean_episode_length,
            log.approx_kl,
            log.clip_fraction
        );
        if run.checkpoint_every > 0 && (log.iteration + 1) % run.checkpoint_every == 0 {
            let path = dir.join(format!("checkpoint_iter{:05}.policy", log.iteration + 1));
            if let Err(e) = save_policy(&path, policy) {
                *save_err.borrow_mut() = Some(e);
                return false;
            }
        }
        true
    })?;
    fs::write(dir.join("curve.csv"), curve_csv(&out.curve))?;
    if let Some(e) = save_err.into_inner() {
        return Err(e);
    }
    if let Some(fault) = out.fault {
        save_policy(&dir.join("checkpoint_fault.policy"), &out.policy)?;
        return Err(Error::Analysis(format!(
            "training halted after {} iterations (state saved to checkpoint_fault.policy): {fault}",
            out.curve.len()
        )));
    }
    save_policy(&dir.join("checkpoint.policy"), &out.policy)?;
    let final_return = out.curve.last().map_or(f64::NAN, |log| log.mean_return);
    Ok((out.policy, final_return))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let run = load_run(&args.common)?;
    print!("{}", run.echo());
    let dir = run_dir(&args.common.out, Some(&args.common.config), "train");
    prepare_dir(&dir, args.common.force)?;
    write_manifest(
        &dir,
        "train",
        run.train.seed,
        &manifest_body(&run, &args.common.config),
    )?;
    train_into(&run, &dir)?;
    println!("artifacts in {}", dir.display());
    Ok(())
}

/// One named analysis: runs it, writes its files, returns the summary line
/// or the failure message.
fn try_analysis(
    name: &str,
    failures: &mut Vec<String>,
    body: impl FnOnce() -> Result<String>,
) -> String {
    match body() {
        Ok(summary) => {
            println!("{name}: {summary}");
            format!("{name}: {summary}")
        }
        Err(e) => {
            eprintln!("{name} failed: {e}");
            failures.push(format!("{name}: {e}"));
            format!("{name}: FAILED ({e})")
        }
    }
}

/// Success, latency, tracking, gait and saliency against one checkpoint.
fn eval_battery(
    policy: &PolicyNetwork,
    run: &RunFile,
    env: &EnvConfig,
    dir: &Path,
    pool: Option<&rayon::ThreadPool>,
) -> Result<()> {
    let seed = run.train.seed;
    let ev = &run.eval;
    let mut failures = Vec::new();
    let mut report = Vec::new();

    report.push(try_analysis("success", &mut failures, || {
        let r = success_rate(policy, env, ev.rollouts, ev.horizon_seconds, seed, pool)?;
        fs::write(dir.join("success.csv"), r.csv())?;
        Ok(r.summary())
    }));
    report.push(try_analysis("latency", &mut failures, || {
        let r = latency_limit(policy, env, &ev.latency, seed, pool)?;
        fs::write(dir.join("latency.csv"), r.csv())?;
        Ok(r.summary())
    }));
    report.push(try_analysis("tracking", &mut failures, || {
        let r = velocity_tracking(policy, env, ev.command, ev.horizon_seconds, seed)?;
        fs::write(dir.join("tracking.csv"), r.csv())?;
        Ok(r.summary())
    }));
    report.push(try_analysis("gait", &mut failures, || {
        let r = gait_sequence(policy, env, ev.gait_duration, ev.command, seed)?;
        fs::write(dir.join("gait.csv"), r.csv())?;
        Ok(r.summary())
    }));
    report.push(try_analysis("saliency", &mut failures, || {
        let r = jacobian_saliency(
            policy,
            env,
            ev.saliency_duration,
            seed,
            ev.saliency_aggregation,
        )?;
        fs::write(dir.join("saliency.csv"), r.csv())?;
        fs::write(dir.join("saliency_blocks.csv"), r.block_csv())?;
        Ok(r.summary())
    }));

    fs::write(dir.join("report.txt"), report.join("\n") + "\n")?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Analysis(format!(
            "{} of 5 analyses failed:\n  {}",
            failures.len(),
            failures.join("\n  ")
        )))
    }
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let run = load_run(&args.common)?;
    let policy = load_policy(&args.policy)?;
    let dir = run_dir(&args.common.out, Some(&args.common.config), "eval");
    prepare_dir(&dir, args.common.force)?;
    write_manifest(
        &dir,
        "eval",
        run.train.seed,
        &manifest_body(&run, &args.common.config),
    )?;
    let pool = build_pool(args.common.workers)?;
    eval_battery(&policy, &run, &run.train.env, &dir, pool.as_ref())?;
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let base = load_run(&args.common)?;
    let dir = run_dir(&args.common.out, Some(&args.common.config), "sweep");
    prepare_dir(&dir, args.common.force)?;
    write_manifest(
        &dir,
        "sweep",
        base.train.seed,
        &manifest_body(&base, &args.common.config),
    )?;
    let pool = build_pool(args.common.workers)?;

    let mut table = CsvTable::new(&[
        "control_freq",
        "final_return",
        "success_rate",
        "latency_limit_ms",
        "status",
    ]);
    let mut failures = Vec::new();

    for &freq in &args.freqs {
        let label = format!("{freq} Hz");
        println!("== {label} ==");
        let mut row = vec![fmt_f64(freq), String::new(), String::new(), String::new()];
        let sub_dir = dir.join(format!("f{:03}", freq.round() as u64));

        let outcome = (|| -> Result<()> {
            let mut run = base.clone();
            run.train.env.control_freq = freq;
            run.train.validate()?;
            fs::create_dir_all(&sub_dir)?;
            print!("{}", run.echo());
            let (policy, final_return) = train_into(&run, &sub_dir)?;

            let sr = success_rate(
                &policy,
                &run.train.env,
                run.eval.rollouts,
                run.eval.horizon_seconds,
                run.train.seed,
                pool.as_ref(),
            )?;
            fs::write(sub_dir.join("success.csv"), sr.csv())?;
            let lat = latency_limit(
                &policy,
                &run.train.env,
                &run.eval.latency,
                run.train.seed,
                pool.as_ref(),
            )?;
            fs::write(sub_dir.join("latency.csv"), lat.csv())?;

            row[1] = fmt_f64(final_return);
            row[2] = fmt_f64(sr.success_rate);
            row[3] = fmt_f64(lat.limit * 1e3);
            println!(
                "{label}: SR {:.3}, latency limit {:.0} ms",
                sr.success_rate,
                lat.limit * 1e3
            );
            Ok(())
        })();

        let status = match outcome {
            Ok(()) => "ok".to_string(),
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                eprintln!("{label} failed: {msg}");
                failures.push(format!("{label}: {msg}"));
                msg
            }
        };
        row.push(status);
        table.row(&row);
    }

    fs::write(dir.join("sweep.csv"), table.contents())?;
    println!("artifacts in {}", dir.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Analysis(format!(
            "{} of {} frequencies failed:\n  {}",
            failures.len(),
            args.freqs.len(),
            failures.join("\n  ")
        )))
    }
}

fn cmd_gait(args: PolicyArgs) -> Result<()> {
    let run = load_run(&args.common)?;
    let policy = load_policy(&args.policy)?;
    let dir = run_dir(&args.common.out, Some(&args.common.config), "gait");
    prepare_dir(&dir, args.common.force)?;
    write_manifest(
        &dir,
        "gait",
        run.train.seed,
        &manifest_body(&run, &args.common.config),
    )?;
    let report = gait_sequence(
        &policy,
        &run.train.env,
        run.eval.gait_duration,
        run.eval.command,
        run.train.seed,
    )?;
    fs::write(dir.join("gait.csv"), report.csv())?;
    println!("{}", report.summary());
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_jacobian(args: PolicyArgs) -> Result<()> {
    let run = load_run(&args.common)?;
    let policy = load_policy(&args.policy)?;
    let dir = run_dir(&args.common.out, Some(&args.common.config), "jacobian");
    prepare_dir(&dir, args.common.force)?;
    write_manifest(
        &dir,
        "jacobian",
        run.train.seed,
        &manifest_body(&run, &args.common.config),
    )?;
    let report = jacobian_saliency(
        &policy,
        &run.train.env,
        run.eval.saliency_duration,
        run.train.seed,
        run.eval.saliency_aggregation,
    )?;
    fs::write(dir.join("saliency.csv"), report.csv())?;
    fs::write(dir.join("saliency_blocks.csv"), report.block_csv())?;
    println!("{}", report.summary());
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn cmd_pd_study(args: PdStudyArgs) -> Result<()> {
    let dir = run_dir(&args.out, None, "pd-study");
    prepare_dir(&dir, args.force)?;
    write_manifest(&dir, "pd-study", 0, "built-in plant and gain defaults\n")?;
    let report = pd_toy_study(&PdStudyConfig::default())?;
    fs::write(dir.join("pd_traces.csv"), report.traces_csv())?;
    fs::write(dir.join("pd_spread.csv"), report.spread_csv())?;
    println!("{}", report.summary());
    println!("artifacts in {}", dir.display());
    Ok(())
}

/// Parses the ablation grid file: `control_freq history dr checkpoint`
/// per line, `#` comments, `dr` on/off, checkpoint path or `absent`.
fn parse_grid_file(path: &Path) -> Result<Vec<GridPolicy>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read grid file `{}`: {e}", path.display())))?;
    let mut grid = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: String| Error::ConfigParse {
            path: path.display().to_string(),
            line: i + 1,
            msg,
        };
        if fields.len() != 4 {
            return Err(bad(format!(
                "expected `control_freq history dr checkpoint`, found {} fields",
                fields.len()
            )));
        }
        let control_freq: f64 = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad control_freq `{}`", fields[0])))?;
        let history: usize = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad history `{}`", fields[1])))?;
        let domain_rand = match fields[2] {
            "on" => true,
            "off" => false,
            other => return Err(bad(format!("dr must be on or off, got `{other}`"))),
        };
        let policy = match fields[3] {
            "absent" | "-" => None,
            p => Some(load_policy(Path::new(p))?),
        };
        grid.push(GridPolicy {
            control_freq,
            history,
            domain_rand,
            policy,
        });
    }
    if grid.is_empty() {
        return Err(Error::Config(format!(
            "grid file `{}` lists no cells",
            path.display()
        )));
    }
    Ok(grid)
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let run = load_run(&args.common)?;
    let grid = parse_grid_file(&args.policies)?;
    let terrains = args
        .terrains
        .iter()
        .map(|t| crate::sim::TerrainKind::parse(t))
        .collect::<Result<Vec<_>>>()?;
    let dir = run_dir(&args.common.out, Some(&args.common.config), "ablate");
    prepare_dir(&dir, args.common.force)?;
    write_manifest(
        &dir,
        "ablate",
        run.train.seed,
        &manifest_body(&run, &args.common.config),
    )?;
    let pool = build_pool(args.common.workers)?;
    let table = ablation_table(
        &grid,
        &terrains,
        &run.train.env,
        run.eval.rollouts,
        run.eval.horizon_seconds,
        run.train.seed,
        pool.as_ref(),
    )?;
    fs::write(dir.join("ablation.csv"), table.csv())?;
    println!("{}", table.summary());
    println!("artifacts in {}", dir.display());
    Ok(())
}
