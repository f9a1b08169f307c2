//! The `irsopt` command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O or
//! file-format error.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use irsopt_core::config::{PlacementLaw, ScenarioConfig};
use irsopt_core::irs::IrsBeamSet;
use toml::Table;

use crate::config::{self, apply_override, beam_compat_hash, config_from_table, parse_override};
use crate::error::{CliError, Result};
use crate::formats::BeamSetFile;
use crate::harness;
use crate::output::{self, EvalSummary, ExperimentManifest};
use crate::parallel::{init_threads, Parallel, StdClock};

#[derive(Debug, Parser)]
#[command(name = "irsopt", version, about = "Offline IRS beam optimization and online WMMSE evaluation")]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize IRS beams on the training samples.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Include per-iteration wall time in the report.
        #[arg(long)]
        timing: bool,
    },
    /// Average sum-rate of a beam set over the evaluation realizations.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        beams: BeamSource,
        /// Placement law of the evaluated UEs (default: config).
        #[arg(long)]
        placement: Option<PlacementLaw>,
        /// Number of realizations (default: config).
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Optimize and evaluate over a grid of config overrides.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweep axis `key=v1,v2,...`; the grid is the Cartesian product.
        #[arg(long = "axis", required = true)]
        axes: Vec<String>,
        /// Also evaluate the random beams at every grid point.
        #[arg(long)]
        baseline: bool,
    },
    /// Array factors of the BS and every tile for one realization.
    ArrayFactor {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        beams: BeamSource,
        /// Evaluation realization index.
        #[arg(long, default_value_t = 0)]
        realization: u64,
        /// Azimuth step in degrees.
        #[arg(long, default_value_t = 0.5)]
        step: f64,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long, short)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set offline.samples=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (default: $IRSOPT_OUTPUT_ROOT/<command>).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BeamSource {
    /// Beam-set file, or `random` for the unoptimized baseline.
    #[arg(long)]
    pub beams: String,
    /// Accept a beam set optimized for a different config.
    #[arg(long)]
    pub force: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads);
    match cli.command {
        Command::Optimize { common, timing } => cmd_optimize(&common, timing).map(|_| ()),
        Command::Evaluate {
            common,
            beams,
            placement,
            realizations,
        } => cmd_evaluate(&common, &beams, placement, realizations).map(|_| ()),
        Command::Sweep { common, axes, baseline } => cmd_sweep(&common, &axes, baseline).map(|_| ()),
        Command::ArrayFactor {
            common,
            beams,
            realization,
            step,
        } => cmd_array_factor(&common, &beams, realization, step).map(|_| ()),
    }
}

fn load(common: &Common) -> Result<ScenarioConfig> {
    config::load_config(&common.config, &common.overrides)
}

fn start(command: &str, common: &Common, cfg: &ScenarioConfig, beam_hash: Option<String>) -> Result<(PathBuf, ExperimentManifest)> {
    let dir = output::output_dir(common.out.as_deref(), command);
    output::ensure_dir(&dir)?;
    let m = ExperimentManifest::start(
        command,
        Some(&common.config),
        &config::config_hash(cfg),
        cfg.seed,
        &dir,
        beam_hash,
    );
    std::fs::write(dir.join("config.toml"), config::to_toml(cfg)).map_err(|e| CliError::io(dir.join("config.toml"), e))?;
    Ok((dir, m))
}

/// Writes `beams.json`, `opt_report.csv`, `config.toml` and `manifest.json`.
pub fn cmd_optimize(common: &Common, timing: bool) -> Result<PathBuf> {
    let cfg = load(common)?;
    let (dir, mut m) = start("optimize", common, &cfg, None)?;
    optimize_into(&dir, &m, &cfg, timing)?;
    m.finish();
    m.write(&dir)?;
    Ok(dir)
}

fn optimize_into(dir: &Path, m: &ExperimentManifest, cfg: &ScenarioConfig, timing: bool) -> Result<(IrsBeamSet, irsopt_core::irs::OptReport)> {
    let (beams, report) = harness::optimize(&Parallel, &StdClock::new(), cfg)?;
    BeamSetFile::new(&beams, beam_compat_hash(cfg), cfg.seed).write(&dir.join("beams.json"))?;
    output::write_opt_report(&dir.join("opt_report.csv"), m, &report, timing)?;
    Ok((beams, report))
}

/// Resolves `--beams` to a beam set and the hash of its file form.
fn resolve_beams(src: &BeamSource, cfg: &ScenarioConfig) -> Result<(IrsBeamSet, String)> {
    if src.beams == "random" {
        let beams = IrsBeamSet::random_for(cfg);
        let hash = BeamSetFile::new(&beams, beam_compat_hash(cfg), cfg.seed).hash();
        return Ok((beams, hash));
    }
    let path = Path::new(&src.beams);
    let file = BeamSetFile::read(path)?;
    if file.config_hash != beam_compat_hash(cfg) && !src.force {
        return Err(CliError::Validation(format!(
            "{}: beam set was optimized for a different config (use --force to evaluate anyway)",
            path.display()
        )));
    }
    let beams = file.to_beams();
    if beams.tiles() != cfg.tile_count() || beams.beams.iter().any(|b| b.len() != cfg.tile_size()) {
        return Err(CliError::Validation(format!(
            "{}: beam set shape does not match the config's tiles",
            path.display()
        )));
    }
    beams
        .check_feasible()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    Ok((beams, file.hash()))
}

/// Writes `eval.csv`, `summary.json`, `config.toml` and `manifest.json`.
pub fn cmd_evaluate(
    common: &Common,
    src: &BeamSource,
    placement: Option<PlacementLaw>,
    realizations: Option<usize>,
) -> Result<PathBuf> {
    let mut cfg = load(common)?;
    if let Some(n) = realizations {
        cfg.evaluation.realizations = n;
    }
    if placement.is_some() {
        cfg.evaluation.placement = placement;
    }
    cfg.validate()?;
    let (beams, beam_hash) = resolve_beams(src, &cfg)?;
    let (dir, mut m) = start("evaluate", common, &cfg, Some(beam_hash.clone()))?;
    evaluate_into(&dir, &m, &cfg, &beams, &beam_hash, "eval")?;
    m.finish();
    m.write(&dir)?;
    Ok(dir)
}

fn evaluate_into(
    dir: &Path,
    m: &ExperimentManifest,
    cfg: &ScenarioConfig,
    beams: &IrsBeamSet,
    beam_hash: &str,
    stem: &str,
) -> Result<EvalSummary> {
    let res = harness::evaluate(&Parallel, cfg, beams, None)?;
    output::write_eval_csv(&dir.join(format!("{stem}.csv")), m, &res)?;
    let summary = EvalSummary::new(m, beam_hash, cfg.evaluation_law().name(), &res);
    output::write_json(&dir.join(format!("{stem}_summary.json")), &summary)?;
    Ok(summary)
}

/// Parses `key=v1,v2,...`.
pub fn parse_axis(s: &str) -> Result<(String, Vec<toml::Value>)> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("axis `{s}` is not of the form key=v1,v2,...")))?;
    let values = values
        .split(',')
        .map(|v| parse_override(&format!("{key}={v}")).map(|(_, v)| v))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(CliError::Validation(format!("axis `{key}` has no values")));
    }
    Ok((key.trim().to_string(), values))
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes one `point-NNN/` directory per grid point and `sweep.csv`.
/// A failing point is recorded in the summary and the sweep continues.
pub fn cmd_sweep(common: &Common, axes: &[String], baseline: bool) -> Result<PathBuf> {
    let text = std::fs::read_to_string(&common.config).map_err(|e| CliError::io(&common.config, e))?;
    let mut base: Table = toml::from_str(&text).map_err(|e| CliError::Validation(format!("invalid TOML: {e}")))?;
    for o in &common.overrides {
        let (k, v) = parse_override(o)?;
        apply_override(&mut base, &k, v)?;
    }
    let base_cfg = config_from_table(base.clone())?;
    let axes = axes.iter().map(|a| parse_axis(a)).collect::<Result<Vec<_>>>()?;
    let (dir, mut m) = start("sweep", common, &base_cfg, None)?;

    let mut points: Vec<Vec<usize>> = vec![vec![]];
    for (_, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                (0..values.len()).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }

    let mut cols = vec!["point".to_string()];
    cols.extend(axes.iter().map(|(k, _)| k.clone()));
    cols.extend(
        [
            "status",
            "iterations",
            "converged",
            "mean_sum_rate",
            "stderr_sum_rate",
            "mean_eff_rank",
            "stderr_eff_rank",
            "baseline_mean_sum_rate",
            "baseline_stderr_sum_rate",
            "error",
        ]
        .map(String::from),
    );
    let mut rows = Vec::new();
    for (n, point) in points.iter().enumerate() {
        let mut row = vec![n.to_string()];
        row.extend(point.iter().zip(&axes).map(|(&i, (_, vals))| value_label(&vals[i])));
        let pdir = dir.join(format!("point-{n:03}"));
        let outcome = sweep_point(&base, &axes, point, &pdir, baseline);
        match outcome {
            Ok(p) => {
                let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
                row.extend([
                    "ok".to_string(),
                    p.iterations.to_string(),
                    p.converged.to_string(),
                    p.opt.mean_sum_rate.to_string(),
                    p.opt.stderr_sum_rate.to_string(),
                    opt(p.opt.mean_effective_rank),
                    opt(p.opt.stderr_effective_rank),
                    opt(p.baseline.as_ref().map(|b| b.mean_sum_rate)),
                    opt(p.baseline.as_ref().map(|b| b.stderr_sum_rate)),
                    String::new(),
                ]);
            }
            Err(e) => {
                row.extend(["failed".to_string()]);
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(e.to_string());
            }
        }
        rows.push(row);
    }
    output::write_csv(&dir.join("sweep.csv"), &m.header(), &cols, &rows)?;
    m.finish();
    m.write(&dir)?;
    Ok(dir)
}

struct PointResult {
    iterations: usize,
    converged: bool,
    opt: EvalSummary,
    baseline: Option<EvalSummary>,
}

fn sweep_point(base: &Table, axes: &[(String, Vec<toml::Value>)], point: &[usize], dir: &Path, baseline: bool) -> Result<PointResult> {
    let mut table = base.clone();
    for ((key, vals), &i) in axes.iter().zip(point) {
        apply_override(&mut table, key, vals[i].clone())?;
    }
    let cfg = config_from_table(table)?;
    output::ensure_dir(dir)?;
    std::fs::write(dir.join("config.toml"), config::to_toml(&cfg)).map_err(|e| CliError::io(dir.join("config.toml"), e))?;
    let m = ExperimentManifest::start("sweep-point", None, &config::config_hash(&cfg), cfg.seed, dir, None);
    let (beams, report) = optimize_into(dir, &m, &cfg, false)?;
    let hash = BeamSetFile::new(&beams, beam_compat_hash(&cfg), cfg.seed).hash();
    let opt = evaluate_into(dir, &m, &cfg, &beams, &hash, "eval")?;
    let baseline = if baseline {
        let rnd = IrsBeamSet::random_for(&cfg);
        let h = BeamSetFile::new(&rnd, beam_compat_hash(&cfg), cfg.seed).hash();
        Some(evaluate_into(dir, &m, &cfg, &rnd, &h, "baseline")?)
    } else {
        None
    };
    Ok(PointResult {
        iterations: report.iterations,
        converged: report.converged,
        opt,
        baseline,
    })
}

/// Writes one CSV per (BS or tile, UE, stream) profile plus `ue_directions.csv`.
pub fn cmd_array_factor(common: &Common, src: &BeamSource, realization: u64, step: f64) -> Result<PathBuf> {
    if !(step > 0.0 && step <= 360.0) {
        return Err(CliError::Validation("--step must be in (0, 360]".into()));
    }
    let cfg = load(common)?;
    let (beams, beam_hash) = resolve_beams(src, &cfg)?;
    let (dir, mut m) = start("array-factor", common, &cfg, Some(beam_hash))?;
    let n = (360.0 / step).round() as usize;
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    let af = harness::array_factors(&cfg, &beams, realization, &grid)?;
    output::write_array_factors(&dir, &m, &af)?;
    let cols = ["tile", "ue", "azimuth_deg"].map(String::from);
    let rows: Vec<Vec<String>> = af
        .ue_azimuth_deg
        .iter()
        .enumerate()
        .flat_map(|(k, per)| per.iter().enumerate().map(move |(i, a)| vec![k.to_string(), i.to_string(), a.to_string()]))
        .collect();
    output::write_csv(&dir.join("ue_directions.csv"), &m.header(), &cols, &rows)?;
    m.finish();
    m.write(&dir)?;
    Ok(dir)
}
