//! Evaluation quantities: average sum-rate, effective rank and equivalent
//! array factors.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::channel::{CellPattern, ChannelSet};
use crate::config::PlacementLaw;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::geometry::Point3;
use crate::irs::IrsBeamSet;
use crate::math;
use crate::numerics::{self, CMat, C64, ZERO};
use crate::rng::domain;
use crate::scenario::Scenario;
use crate::wmmse::{self, WmmseParams};

/// `Σσ_i / max σ_i` over the singular values of `h`.
pub fn effective_rank(h: &CMat) -> Result<f64> {
    let s = numerics::singular_values(h)?;
    let max = s.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::InvalidArgument {
            context: "effective rank of a zero matrix",
        });
    }
    Ok(s.iter().sum::<f64>() / max)
}

/// Reported instead of `-∞` where the pattern or array factor vanishes.
pub const AF_FLOOR_DB: f64 = -300.0;

/// Horizontal unit vector at azimuth `deg` (from +x towards +y).
pub fn azimuth_direction(deg: f64) -> Point3 {
    let a = deg.to_radians();
    Point3::new(math::cos(a), math::sin(a), 0.0)
}

/// Azimuth in degrees, in `[0, 360)`, of `to` seen from `from`.
pub fn azimuth_deg(from: Point3, to: Point3) -> f64 {
    let d = to - from;
    let a = math::atan2(d.y, d.x).to_degrees();
    if a < 0.0 {
        a + 360.0
    } else {
        a
    }
}

/// Default grid: 0° to 360° (exclusive) in 0.5° steps.
pub fn default_azimuth_grid() -> Vec<f64> {
    (0..720).map(|k| 0.5 * k as f64).collect()
}

/// `|Σ_p e_p exp(j(2π/λ)⟨pos_p, û⟩)|² F(û)` per azimuth, in dB relative
/// to the grid maximum.
pub fn array_factor_db(
    positions: &[Point3],
    excitation: &[C64],
    wavelength: f64,
    pattern: impl Fn(Point3) -> f64,
    azimuths: &[f64],
) -> Result<Vec<f64>> {
    if azimuths.is_empty() {
        return Err(Error::InvalidArgument {
            context: "array factor needs a non-empty direction grid",
        });
    }
    if positions.len() != excitation.len() {
        return Err(Error::DimensionMismatch { context: "array factor" });
    }
    let k = 2.0 * PI / wavelength;
    let power: Vec<f64> = azimuths
        .iter()
        .map(|&az| {
            let u = azimuth_direction(az);
            let mut s = ZERO;
            for (p, e) in positions.iter().zip(excitation) {
                s += e * C64::from_polar(1.0, k * p.dot(u));
            }
            s.norm_sqr() * pattern(u)
        })
        .collect();
    let max = power.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::InvalidArgument {
            context: "array factor vanishes on the whole grid",
        });
    }
    Ok(power
        .iter()
        .map(|&p| if p > 0.0 { (10.0 * math::log10(p / max)).max(AF_FLOOR_DB) } else { AF_FLOOR_DB })
        .collect())
}

/// Array factor of the tile-`k` excitation `diag(b_k) S_k v`.
pub fn equivalent_array_factor(
    scenario: &Scenario,
    channels: &ChannelSet,
    beams: &IrsBeamSet,
    v: &[C64],
    k: usize,
    azimuths: &[f64],
) -> Result<Vec<f64>> {
    if k >= beams.tiles() || k >= channels.n_tiles() {
        return Err(Error::InvalidArgument { context: "tile index out of range" });
    }
    let s = &channels.bs_irs[k];
    if s.cols() != v.len() {
        return Err(Error::DimensionMismatch { context: "precoder column" });
    }
    let excitation: Vec<C64> = s.mul_vec(v).iter().zip(&beams.beams[k]).map(|(x, b)| x * b).collect();
    let tile = &scenario.layout.tiles[k];
    let cell = CellPattern::from_config(&scenario.config)?;
    array_factor_db(
        &tile.elements,
        &excitation,
        scenario.config.wavelength,
        |u| cell.power_cos(tile.normal.dot(u)),
        azimuths,
    )
}

/// Array factor of the BS excitation `v` (isotropic elements).
pub fn bs_array_factor(scenario: &Scenario, v: &[C64], azimuths: &[f64]) -> Result<Vec<f64>> {
    array_factor_db(&scenario.layout.bs, v, scenario.config.wavelength, |_| 1.0, azimuths)
}

/// Rates and ranks of one evaluated realization.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizationResult {
    pub index: u64,
    pub ue_positions: Vec<Point3>,
    /// Bits/s/Hz per UE.
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    /// Effective rank of each UE's composite channel; `None` when it is zero.
    pub effective_rank: Vec<Option<f64>>,
    pub iterations: usize,
}

/// Aggregate of [`evaluate_average_sum_rate`].
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub realizations: Vec<RealizationResult>,
    /// Realization indices whose online solve failed.
    pub excluded: Vec<u64>,
    pub mean_sum_rate: f64,
    pub stderr_sum_rate: f64,
    pub mean_effective_rank: Option<f64>,
    pub stderr_effective_rank: Option<f64>,
    pub config_hash: u64,
    pub beam_hash: u64,
    pub seed: u64,
}

/// Largest tolerated fraction of failed realizations.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

/// Mean and standard error of the mean (`n − 1` normalization; zero for one value).
pub fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, math::sqrt(var / n as f64))
}

/// Online WMMSE on one realization with fixed beams.
pub fn evaluate_realization(
    scenario: &Scenario,
    bs_irs: &alloc::sync::Arc<Vec<CMat>>,
    beams: &IrsBeamSet,
    params: &WmmseParams,
    law: PlacementLaw,
    index: u64,
) -> Result<RealizationResult> {
    let sample = scenario.sample_with_law(domain::EVAL, index, law)?;
    let channels = ChannelSet::build(scenario, &sample, bs_irs.clone(), 0)?;
    let h = channels.composite_all(&beams.beams)?;
    score_channels(index, sample.ue_positions, &h, params)
}

/// Online WMMSE and effective ranks for given composite channels.
pub fn score_channels(index: u64, ue_positions: Vec<Point3>, h: &[CMat], params: &WmmseParams) -> Result<RealizationResult> {
    let link = wmmse::online_wmmse(h, params)?;
    let rates = link.rates_bits();
    let effective_rank = h.iter().map(|hi| effective_rank(hi).ok()).collect();
    Ok(RealizationResult {
        index,
        ue_positions,
        sum_rate: rates.iter().sum(),
        rates,
        effective_rank,
        iterations: link.iterations,
    })
}

/// Average sum-rate of `beams` over realizations `0..n` of the evaluation
/// stream.
///
/// Realization `r` is the same network for every beam set, so comparisons
/// between beam sets are paired.
pub fn evaluate_average_sum_rate<E: Executor>(
    exec: &E,
    scenario: &Scenario,
    beams: &IrsBeamSet,
    n_realizations: usize,
) -> Result<EvalResult> {
    let law = scenario.config.evaluation_law();
    evaluate_with_law(exec, scenario, beams, n_realizations, law)
}

/// [`evaluate_average_sum_rate`] with an explicit placement law.
pub fn evaluate_with_law<E: Executor>(
    exec: &E,
    scenario: &Scenario,
    beams: &IrsBeamSet,
    n_realizations: usize,
    law: PlacementLaw,
) -> Result<EvalResult> {
    if n_realizations == 0 {
        return Err(Error::InvalidArgument {
            context: "evaluation needs at least one realization",
        });
    }
    if beams.tiles() != scenario.n_tiles() {
        return Err(Error::DimensionMismatch { context: "beam set tiles" });
    }
    beams.check_feasible()?;
    let params = WmmseParams::from_config(&scenario.config);
    let bs_irs = ChannelSet::bs_irs_all(scenario)?;
    let indices: Vec<u64> = (0..n_realizations as u64).collect();
    let outcomes = exec.map(&indices, |_, &r| evaluate_realization(scenario, &bs_irs, beams, &params, law, r));

    let mut realizations = Vec::with_capacity(n_realizations);
    let mut excluded = Vec::new();
    for (r, out) in indices.iter().zip(outcomes) {
        match out {
            Ok(res) => realizations.push(res),
            // geometry and configuration errors are not solver failures
            Err(e) if !e.is_numerical() => return Err(e),
            Err(_) => excluded.push(*r),
        }
    }
    if excluded.len() as f64 > MAX_EXCLUDED_FRACTION * n_realizations as f64 {
        return Err(Error::TooManyFailures {
            failed: excluded.len(),
            total: n_realizations,
        });
    }
    let sums: Vec<f64> = realizations.iter().map(|r| r.sum_rate).collect();
    let (mean_sum_rate, stderr_sum_rate) = mean_stderr(&sums);
    // one value per realization: the UE average, so samples stay independent
    let ranks: Vec<f64> = realizations
        .iter()
        .filter_map(|r| {
            let v: Vec<f64> = r.effective_rank.iter().flatten().copied().collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    let (mean_effective_rank, stderr_effective_rank) = if ranks.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_stderr(&ranks);
        (Some(m), Some(s))
    };
    Ok(EvalResult {
        realizations,
        excluded,
        mean_sum_rate,
        stderr_sum_rate,
        mean_effective_rank,
        stderr_effective_rank,
        config_hash: 0,
        beam_hash: 0,
        seed: scenario.config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::fixtures::desk;
    use crate::exec::Sequential;
    use crate::rng::{complex_normal, stream_rng};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn random_mat(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut rng = stream_rng(seed, domain::TEST, 21, 0);
        CMat::from_fn(rows, cols, |_, _| complex_normal(&mut rng))
    }

    #[test]
    fn effective_rank_cases() {
        assert_relative_eq!(effective_rank(&CMat::identity(4)).unwrap(), 4.0, epsilon = 1e-12);
        let a = random_mat(3, 1, 1);
        let b = random_mat(1, 5, 2);
        assert_relative_eq!(effective_rank(&a.matmul(&b)).unwrap(), 1.0, epsilon = 1e-9);
        let d = CMat::from_real_diag(&[2.0, 1.0, 1.0, 0.0]);
        assert_relative_eq!(effective_rank(&d).unwrap(), 2.0, epsilon = 1e-12);
        assert!(effective_rank(&CMat::zeros(2, 3)).is_err());
    }

    #[test]
    fn effective_rank_invariances() {
        for seed in 0..20 {
            let h = random_mat(2, 6, seed);
            let r = effective_rank(&h).unwrap();
            assert!((1.0..=2.0 + 1e-12).contains(&r));
            let scaled = h.scale(C64::new(-3.7, 0.4));
            assert!((effective_rank(&scaled).unwrap() - r).abs() <= 1e-9);
            let ul = numerics::svd(&random_mat(2, 2, seed + 100)).unwrap().u;
            let ur = numerics::svd(&random_mat(6, 6, seed + 200)).unwrap().u;
            let rotated = ul.matmul(&h).matmul(&ur);
            assert!((effective_rank(&rotated).unwrap() - r).abs() <= 1e-9);
        }
    }

    #[test]
    fn single_element_is_flat() {
        let grid = default_azimuth_grid();
        let af = array_factor_db(&[Point3::new(0.3, -0.2, 1.0)], &[C64::new(0.2, 0.7)], 0.01, |_| 1.0, &grid).unwrap();
        assert!(af.iter().all(|&x| x.abs() < 1e-12));
        // with a pattern: equals the pattern in dB
        let n = Point3::new(1.0, 0.0, 0.0);
        let cell = CellPattern::new(0.57, 1.0, 1.0).unwrap();
        let af = array_factor_db(&[Point3::new(0.0, 0.0, 0.0)], &[C64::new(1.0, 0.0)], 0.01, |u| cell.power_cos(n.dot(u)), &grid).unwrap();
        for (&az, &v) in grid.iter().zip(&af) {
            let f = cell.power_cos(n.dot(azimuth_direction(az)));
            let expect = if f > 0.0 { (10.0 * math::log10(f)).max(AF_FLOOR_DB) } else { AF_FLOOR_DB };
            assert!((v - expect).abs() < 1e-9, "{az} {v} {expect}");
        }
    }

    #[test]
    fn two_element_pattern() {
        let lambda = 0.02;
        // elements along y at λ/2: endfire is ±y, broadside ±x
        let pos = [Point3::new(0.0, 0.0, 0.0), Point3::new(0.0, lambda / 2.0, 0.0)];
        let e = [C64::new(1.0, 0.0); 2];
        let grid = default_azimuth_grid();
        let af = array_factor_db(&pos, &e, lambda, |_| 1.0, &grid).unwrap();
        let at = |deg: f64| af[(deg / 0.5) as usize];
        assert!(at(0.0).abs() < 1e-12 && at(180.0).abs() < 1e-12);
        assert!(at(90.0) <= -200.0 && at(270.0) <= -200.0);
    }

    #[test]
    fn ten_element_main_lobe_matches_search() {
        let lambda = 0.01;
        let pos: Vec<Point3> = (0..10).map(|p| Point3::new(0.0, p as f64 * lambda / 2.0, 0.0)).collect();
        // steer towards azimuth 30°: progressive phase −k d sin(30°) per element
        let steer = 30.0f64.to_radians();
        let k = 2.0 * PI / lambda;
        let e: Vec<C64> = pos.iter().map(|p| C64::from_polar(1.0, -k * p.y * math::sin(steer))).collect();
        let grid = default_azimuth_grid();
        let af = array_factor_db(&pos, &e, lambda, |u| if u.x > 0.0 { 1.0 } else { 0.0 }, &grid).unwrap();
        let peak = grid[af.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0];
        // fine golden-section-free oracle: dense scan of the closed form
        let closed = |az: f64| {
            let x = PI * (math::sin(az.to_radians()) - math::sin(steer));
            if x.abs() < 1e-12 {
                100.0
            } else {
                let r = math::sin(10.0 * x / 2.0) / math::sin(x / 2.0);
                r * r
            }
        };
        let oracle = (0..90_000)
            .map(|i| i as f64 * 0.001)
            .max_by(|a, b| closed(*a).partial_cmp(&closed(*b)).unwrap())
            .unwrap();
        assert!((peak - oracle).abs() <= 0.5, "{peak} vs {oracle}");
    }

    #[test]
    fn af_global_phase_invariant() {
        let cfg = desk();
        let sc = Scenario::new(cfg.clone()).unwrap();
        let smp = sc.sample(domain::EVAL, 0).unwrap();
        let ch = ChannelSet::build(&sc, &smp, ChannelSet::bs_irs_all(&sc).unwrap(), 0).unwrap();
        let beams = IrsBeamSet::random_for(&cfg);
        let mut rotated = beams.clone();
        let ph = C64::from_polar(1.0, 1.234);
        for b in &mut rotated.beams {
            for z in b.iter_mut() {
                *z *= ph;
            }
        }
        let v: Vec<C64> = random_mat(8, 1, 5).into_vec();
        let grid = default_azimuth_grid();
        let a = equivalent_array_factor(&sc, &ch, &beams, &v, 1, &grid).unwrap();
        let b = equivalent_array_factor(&sc, &ch, &rotated, &v, 1, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9 || (*x <= AF_FLOOR_DB + 1.0 && *y <= AF_FLOOR_DB + 1.0));
        }
        assert!(array_factor_db(&[], &[], 0.01, |_| 1.0, &[]).is_err());
    }

    #[test]
    fn mean_stderr_values() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_relative_eq!(s, (5.0f64 / 3.0 / 4.0).sqrt(), epsilon = 1e-15);
        assert_eq!(mean_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn evaluation_reproducible() {
        let cfg = desk();
        let sc = Scenario::new(cfg.clone()).unwrap();
        let beams = IrsBeamSet::random_for(&cfg);
        let a = evaluate_average_sum_rate(&Sequential, &sc, &beams, 4).unwrap();
        let b = evaluate_average_sum_rate(&Sequential, &sc, &beams, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.realizations.len(), 4);
        assert!(a.mean_sum_rate > 0.0);
        for r in &a.realizations {
            assert_relative_eq!(r.sum_rate, r.rates.iter().sum::<f64>(), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_channels_give_zero_rate() {
        let params = WmmseParams::from_config(&desk());
        let h = vec![CMat::zeros(2, 8); 2];
        let r = score_channels(0, Vec::new(), &h, &params).unwrap();
        assert_eq!(r.sum_rate, 0.0);
        assert_eq!(r.effective_rank, vec![None, None]);
    }
}
