//! Result files: CSVs, summary JSON and the experiment manifest.
//!
//! Every CSV starts with a `# run=<id> config_hash=<hex> seed=<n>` comment
//! line; JSON documents carry the same fields. The run id hashes only the
//! deterministic inputs of a run, so identical inputs give byte-identical
//! result files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use irsopt_core::irs::OptReport;
use irsopt_core::metrics::EvalResult;
use serde::{Deserialize, Serialize};

use crate::config::hex_digest;
use crate::error::{CliError, Result};
use crate::harness::AfReport;

pub const MANIFEST_VERSION: u32 = 1;
pub const OUTPUT_ROOT_ENV: &str = "IRSOPT_OUTPUT_ROOT";

/// Provenance of one command invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub config_hash: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub input_beam_hash: Option<String>,
    /// Hash of the fields above that determine the numerical outputs.
    pub run_id: String,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
}

impl ExperimentManifest {
    pub fn start(
        command: &str,
        config_path: Option<&Path>,
        config_hash: &str,
        seed: u64,
        output_dir: &Path,
        input_beam_hash: Option<String>,
    ) -> Self {
        let id_input = serde_json::json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config_hash": config_hash,
            "seed": seed,
            "input_beam_hash": input_beam_hash,
        });
        ExperimentManifest {
            format_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_path: config_path.map(Path::to_path_buf),
            config_hash: config_hash.to_string(),
            seed,
            output_dir: output_dir.to_path_buf(),
            input_beam_hash,
            run_id: hex_digest(id_input.to_string().as_bytes())[..16].to_string(),
            started_unix: unix_now(),
            finished_unix: None,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = Some(unix_now());
    }

    pub fn header(&self) -> String {
        format!("# run={} config_hash={} seed={}\n", self.run_id, self.config_hash, self.seed)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("manifest.json"), self)
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Resolves the output directory: explicit, else `$IRSOPT_OUTPUT_ROOT/<name>`,
/// else `./results/<name>`.
pub fn output_dir(explicit: Option<&Path>, name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("results"))
            .join(name),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes `header` followed by CSV `rows`.
pub fn write_csv(path: &Path, header: &str, columns: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(header.as_bytes().to_vec());
    let err = |e: csv::Error| CliError::format(path, e);
    w.write_record(columns).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::format(path, e.error()))?;
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Columns: `iteration, delta, objective, wall_secs`.
pub fn write_opt_report(path: &Path, m: &ExperimentManifest, report: &OptReport, with_time: bool) -> Result<()> {
    let cols = ["iteration", "delta", "objective", "wall_secs"].map(String::from);
    let rows: Vec<Vec<String>> = (0..report.iterations)
        .map(|q| {
            vec![
                (q + 1).to_string(),
                report.delta[q].to_string(),
                report.objective[q].to_string(),
                // wall time varies run to run; blanked in deterministic output
                if with_time { report.wall_secs[q].to_string() } else { String::new() },
            ]
        })
        .collect();
    write_csv(path, &m.header(), &cols, &rows)
}

/// Columns: `realization, ue_x_i, ue_y_i, rate_i ..., sum_rate, rank_i ...`.
pub fn write_eval_csv(path: &Path, m: &ExperimentManifest, res: &EvalResult) -> Result<()> {
    let n = res.realizations.first().map_or(0, |r| r.rates.len());
    let mut cols = vec!["realization".to_string()];
    for i in 0..n {
        cols.push(format!("ue{i}_x"));
        cols.push(format!("ue{i}_y"));
    }
    cols.extend((0..n).map(|i| format!("rate_ue{i}")));
    cols.push("sum_rate".into());
    cols.extend((0..n).map(|i| format!("eff_rank_ue{i}")));
    let rows: Vec<Vec<String>> = res
        .realizations
        .iter()
        .map(|r| {
            let mut row = vec![r.index.to_string()];
            for p in &r.ue_positions {
                row.push(p.x.to_string());
                row.push(p.y.to_string());
            }
            row.extend(r.rates.iter().map(f64::to_string));
            row.push(r.sum_rate.to_string());
            row.extend(r.effective_rank.iter().map(|x| x.map_or(String::new(), |v| v.to_string())));
            row
        })
        .collect();
    write_csv(path, &m.header(), &cols, &rows)
}

/// Summary document of an evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub run_id: String,
    pub config_hash: String,
    pub beam_hash: String,
    pub seed: u64,
    pub placement: String,
    pub realizations: usize,
    pub excluded: Vec<u64>,
    pub mean_sum_rate: f64,
    pub stderr_sum_rate: f64,
    pub mean_effective_rank: Option<f64>,
    pub stderr_effective_rank: Option<f64>,
}

impl EvalSummary {
    pub fn new(m: &ExperimentManifest, beam_hash: &str, placement: &str, res: &EvalResult) -> Self {
        EvalSummary {
            run_id: m.run_id.clone(),
            config_hash: m.config_hash.clone(),
            beam_hash: beam_hash.to_string(),
            seed: m.seed,
            placement: placement.to_string(),
            realizations: res.realizations.len(),
            excluded: res.excluded.clone(),
            mean_sum_rate: res.mean_sum_rate,
            stderr_sum_rate: res.stderr_sum_rate,
            mean_effective_rank: res.mean_effective_rank,
            stderr_effective_rank: res.stderr_effective_rank,
        }
    }
}

/// One file per profile, `af_bs_ue<i>_s<j>.csv` or `af_tile<k>_ue<i>_s<j>.csv`,
/// with columns `angle_deg, gain_db`.
pub fn write_array_factors(dir: &Path, m: &ExperimentManifest, af: &AfReport) -> Result<Vec<PathBuf>> {
    let cols = ["angle_deg", "gain_db"].map(String::from);
    let mut written = Vec::new();
    for p in &af.profiles {
        let name = match p.tile {
            None => format!("af_bs_ue{}_s{}.csv", p.ue, p.stream),
            Some(k) => format!("af_tile{}_ue{}_s{}.csv", k, p.ue, p.stream),
        };
        let rows: Vec<Vec<String>> = af
            .azimuth_deg
            .iter()
            .zip(&p.gain_db)
            .map(|(a, g)| vec![a.to_string(), g.to_string()])
            .collect();
        let path = dir.join(name);
        write_csv(&path, &m.header(), &cols, &rows)?;
        written.push(path);
    }
    Ok(written)
}
