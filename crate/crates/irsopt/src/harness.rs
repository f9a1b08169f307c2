//! Experiment orchestration shared by the CLI and the acceptance run.

use irsopt_core::channel::ChannelSet;
use irsopt_core::config::{PlacementLaw, ScenarioConfig};
use irsopt_core::exec::{Clock, Executor};
use irsopt_core::irs::{self, IrsBeamSet, OfflineSettings, OptReport, SampleState};
use irsopt_core::metrics::{self, EvalResult};
use irsopt_core::rng::domain;
use irsopt_core::scenario::Scenario;
use irsopt_core::wmmse::{self, WmmseParams};
use irsopt_core::C64;

use crate::error::Result;

/// Channel sets of the training stream, `0..n`.
pub fn training_channels<E: Executor>(exec: &E, scenario: &Scenario, n: usize, config_hash: u64) -> Result<Vec<ChannelSet>> {
    let bs_irs = ChannelSet::bs_irs_all(scenario)?;
    let indices: Vec<u64> = (0..n as u64).collect();
    let sets = exec.map(&indices, |_, &i| -> irsopt_core::Result<ChannelSet> {
        let sample = scenario.sample(domain::TRAIN, i)?;
        ChannelSet::build(scenario, &sample, bs_irs.clone(), config_hash)
    });
    Ok(sets.into_iter().collect::<irsopt_core::Result<Vec<_>>>()?)
}

/// Offline optimization from the random initial beams.
pub fn optimize<E: Executor, C: Clock>(exec: &E, clock: &C, cfg: &ScenarioConfig) -> Result<(IrsBeamSet, OptReport)> {
    let (beams, report, _) = optimize_with_samples(exec, clock, cfg)?;
    Ok((beams, report))
}

/// Like [`optimize`], also returning the frozen sample states.
pub fn optimize_with_samples<E: Executor, C: Clock>(
    exec: &E,
    clock: &C,
    cfg: &ScenarioConfig,
) -> Result<(IrsBeamSet, OptReport, Vec<SampleState>)> {
    let scenario = Scenario::new(cfg.clone())?;
    let settings = OfflineSettings::from_config(cfg);
    let init = IrsBeamSet::random_for(cfg);
    let channels = training_channels(exec, &scenario, cfg.offline.samples, 0)?;
    let mut samples = irs::prepare_samples(exec, channels, &init, &settings.params)?;
    let (beams, report) = irs::offline_optimize(exec, clock, &mut samples, init, &settings)?;
    Ok((beams, report, samples))
}

/// Paired evaluation over the config's realization count and law.
pub fn evaluate<E: Executor>(exec: &E, cfg: &ScenarioConfig, beams: &IrsBeamSet, law: Option<PlacementLaw>) -> Result<EvalResult> {
    let scenario = Scenario::new(cfg.clone())?;
    let law = law.unwrap_or_else(|| cfg.evaluation_law());
    Ok(metrics::evaluate_with_law(
        exec,
        &scenario,
        beams,
        cfg.evaluation.realizations,
        law,
    )?)
}

/// One array-factor profile.
#[derive(Clone, Debug, PartialEq)]
pub struct AfProfile {
    /// `None` for the BS array.
    pub tile: Option<usize>,
    pub ue: usize,
    pub stream: usize,
    pub gain_db: Vec<f64>,
}

/// Array factors of one evaluation realization after the online phase.
#[derive(Clone, Debug, PartialEq)]
pub struct AfReport {
    pub realization: u64,
    pub azimuth_deg: Vec<f64>,
    pub profiles: Vec<AfProfile>,
    /// Azimuth of each UE from each tile centre, `[tile][ue]`.
    pub ue_azimuth_deg: Vec<Vec<f64>>,
}

pub fn array_factors(cfg: &ScenarioConfig, beams: &IrsBeamSet, realization: u64, azimuths: &[f64]) -> Result<AfReport> {
    let scenario = Scenario::new(cfg.clone())?;
    let sample = scenario.sample_with_law(domain::EVAL, realization, cfg.evaluation_law())?;
    let channels = ChannelSet::build(&scenario, &sample, ChannelSet::bs_irs_all(&scenario)?, 0)?;
    let h = channels.composite_all(&beams.beams)?;
    let link = wmmse::online_wmmse(&h, &WmmseParams::from_config(cfg))?;
    let mut profiles = Vec::new();
    for (ue, v) in link.v.iter().enumerate() {
        for stream in 0..v.cols() {
            let col: Vec<C64> = v.col(stream);
            if col.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            profiles.push(AfProfile {
                tile: None,
                ue,
                stream,
                gain_db: metrics::bs_array_factor(&scenario, &col, azimuths)?,
            });
            for k in 0..scenario.n_tiles() {
                profiles.push(AfProfile {
                    tile: Some(k),
                    ue,
                    stream,
                    gain_db: metrics::equivalent_array_factor(&scenario, &channels, beams, &col, k, azimuths)?,
                });
            }
        }
    }
    let ue_azimuth_deg = scenario
        .layout
        .tiles
        .iter()
        .map(|t| {
            let c = tile_center(&t.elements);
            sample.ue_positions.iter().map(|&u| metrics::azimuth_deg(c, u)).collect()
        })
        .collect();
    Ok(AfReport {
        realization,
        azimuth_deg: azimuths.to_vec(),
        profiles,
        ue_azimuth_deg,
    })
}

fn tile_center(elements: &[irsopt_core::geometry::Point3]) -> irsopt_core::geometry::Point3 {
    let mut c = irsopt_core::geometry::Point3::new(0.0, 0.0, 0.0);
    for &e in elements {
        c = c + e;
    }
    c * (1.0 / elements.len() as f64)
}
