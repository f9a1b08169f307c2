//! Online digital beamforming by weighted-MMSE block coordinate descent.
//!
//! Channels `H_i` (`L × M`, IRS already folded in) are fixed. Each BCD
//! iteration updates the MMSE receivers `G`, the weights `W = E⁻¹` and the
//! power-constrained precoders `V`, each block exactly, so the weighted-MSE
//! objective `Σ α_i (tr(W_i E_i) − log det W_i)` never increases.
//!
//! Rates are in nats here; convert with [`nats_to_bits`] for reporting.

use alloc::vec::Vec;

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::numerics::{self, CMat, C64};

/// Absolute objective increase tolerated between BCD blocks.
pub const MONOTONICITY_TOL: f64 = 1e-9;

pub fn nats_to_bits(x: f64) -> f64 {
    x * core::f64::consts::LOG2_E
}

#[derive(Clone, Debug, PartialEq)]
pub struct WmmseParams {
    /// Noise power σ², same unit as the channel-scaled transmit power.
    pub noise: f64,
    /// Per-UE transmit power budget `P_i`.
    pub budgets: Vec<f64>,
    /// Per-UE rate weights `α_i`.
    pub weights: Vec<f64>,
    /// Relative objective change that stops the loop.
    pub tol: f64,
    pub max_iter: usize,
}

impl WmmseParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        WmmseParams {
            noise: cfg.noise_power(),
            budgets: cfg.power_budgets(),
            weights: cfg.weights(),
            tol: cfg.online.tol,
            max_iter: cfg.online.max_iter,
        }
    }

    fn check(&self, n_users: usize) -> Result<()> {
        if !(self.noise > 0.0) || !self.noise.is_finite() {
            return Err(Error::config("power.noise_dbm", "noise power must be positive"));
        }
        if self.budgets.len() != n_users || self.weights.len() != n_users {
            return Err(Error::DimensionMismatch {
                context: "wmmse: budgets/weights per UE",
            });
        }
        Ok(())
    }
}

/// Digital beamforming variables of one channel realization.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkVariables {
    /// Precoders `V_i`, `M × L`.
    pub v: Vec<CMat>,
    /// Receive filters `G_i`, `L × L`.
    pub g: Vec<CMat>,
    /// MSE weights `W_i`, `L × L`.
    pub w: Vec<CMat>,
    /// Precoder multipliers `μ_i` of the last update.
    pub mu: Vec<f64>,
    /// Per-UE rates in nats.
    pub rates: Vec<f64>,
    /// Weighted-MSE objective after every iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LinkVariables {
    pub fn rates_bits(&self) -> Vec<f64> {
        self.rates.iter().map(|&r| nats_to_bits(r)).collect()
    }

    pub fn sum_rate_bits(&self) -> f64 {
        self.rates.iter().map(|&r| nats_to_bits(r)).sum()
    }
}

fn check_dims(h: &[CMat], v: &[CMat]) -> Result<()> {
    if h.len() != v.len() {
        return Err(Error::DimensionMismatch {
            context: "wmmse: one precoder per UE",
        });
    }
    for (hi, vi) in h.iter().zip(v) {
        if hi.cols() != vi.rows() || hi.cols() != h[0].cols() {
            return Err(Error::DimensionMismatch {
                context: "wmmse: channel/precoder shapes",
            });
        }
    }
    Ok(())
}

/// `J_i = Σ_j H_i V_j V_jᴴ H_iᴴ + σ² I` together with `H_i V_i`.
fn covariance(h_i: &CMat, v: &[CMat], noise: f64, skip: Option<usize>) -> CMat {
    let l = h_i.rows();
    let mut j = CMat::identity(l).scale_real(noise);
    for (k, vk) in v.iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        let hv = h_i.matmul(vk);
        j += &hv.mul_adjoint(&hv);
    }
    j
}

/// `R_i = log det(I + V_iᴴ H_iᴴ J̄_i⁻¹ H_i V_i)` in nats, with `J̄_i` the
/// interference-plus-noise covariance.
pub fn user_rate(h_i: &CMat, v: &[CMat], noise: f64, i: usize) -> Result<f64> {
    if !(noise > 0.0) {
        return Err(Error::config("power.noise_dbm", "noise power must be positive"));
    }
    let jbar = numerics::Cholesky::new(&covariance(h_i, v, noise, Some(i)))?;
    let x = jbar.lower_solve(&h_i.matmul(&v[i]));
    let gram = &CMat::identity(x.cols()) + &x.adjoint_mul(&x);
    numerics::logdet_psd(&gram)
}

/// Rates of all UEs in nats.
pub fn rates(h: &[CMat], v: &[CMat], noise: f64) -> Result<Vec<f64>> {
    check_dims(h, v)?;
    (0..h.len()).map(|i| user_rate(&h[i], v, noise, i)).collect()
}

/// MSE matrix of UE `i` for an arbitrary receiver `G_i`.
pub fn mse_matrix(h_i: &CMat, v: &[CMat], g_i: &CMat, noise: f64, i: usize) -> CMat {
    let l = g_i.cols();
    let mut e = CMat::identity(l);
    for (j, vj) in v.iter().enumerate() {
        let x = g_i.adjoint_mul(&h_i.matmul(vj));
        if j == i {
            e -= &x;
            e -= &x.adjoint();
        }
        e += &x.mul_adjoint(&x);
    }
    e += &g_i.adjoint_mul(g_i).scale_real(noise);
    e.hermitian_part()
}

pub fn mse_matrices(h: &[CMat], v: &[CMat], g: &[CMat], noise: f64) -> Vec<CMat> {
    (0..h.len()).map(|i| mse_matrix(&h[i], v, &g[i], noise, i)).collect()
}

/// MMSE receivers `G_i = J_i⁻¹ H_i V_i` (the sum in `J_i` includes `j = i`).
pub fn update_receivers(h: &[CMat], v: &[CMat], noise: f64) -> Result<Vec<CMat>> {
    check_dims(h, v)?;
    if !(noise > 0.0) {
        return Err(Error::config("power.noise_dbm", "noise power must be positive"));
    }
    h.iter()
        .enumerate()
        .map(|(i, hi)| {
            let j = numerics::Cholesky::new(&covariance(hi, v, noise, None))?;
            Ok(j.solve(&hi.matmul(&v[i])))
        })
        .collect()
}

/// `W_i = E_i⁻¹`.
pub fn update_weights(e: &[CMat]) -> Result<Vec<CMat>> {
    e.iter().map(numerics::hermitian_inverse).collect()
}

/// `V_i = α_i (K + μ_i I)⁻¹ H_iᴴ G_i W_i` with
/// `K = Σ_j α_j H_jᴴ G_j W_j G_jᴴ H_j` and the smallest `μ_i ≥ 0` meeting
/// `tr(V_i V_iᴴ) ≤ P_i`. Returns the precoders and multipliers.
pub fn update_precoders(
    h: &[CMat],
    g: &[CMat],
    w: &[CMat],
    alpha: &[f64],
    budgets: &[f64],
) -> Result<(Vec<CMat>, Vec<f64>)> {
    let n = h.len();
    if g.len() != n || w.len() != n || alpha.len() != n || budgets.len() != n {
        return Err(Error::DimensionMismatch {
            context: "update_precoders: per-UE inputs",
        });
    }
    let m = h[0].cols();
    let mut k = CMat::zeros(m, m);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let hg = h[i].adjoint_mul(&g[i]);
        let hgw = hg.matmul(&w[i]);
        k.axpy(C64::new(alpha[i], 0.0), &hgw.mul_adjoint(&hg));
        rhs.push(hgw.scale_real(alpha[i]));
    }
    let k = k.hermitian_part();
    let mut v = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    for i in 0..n {
        let sol = numerics::power_constrained_solve(&k, &rhs[i], budgets[i], "precoder")?;
        v.push(sol.x);
        mu.push(sol.mu);
    }
    Ok((v, mu))
}

/// Weighted-MSE objective `Σ α_i (tr(W_i E_i) − log det W_i)`.
pub fn weighted_mse(h: &[CMat], v: &[CMat], g: &[CMat], w: &[CMat], noise: f64, alpha: &[f64]) -> Result<f64> {
    let mut f = 0.0;
    for i in 0..h.len() {
        let e = mse_matrix(&h[i], v, &g[i], noise, i);
        f += alpha[i] * (w[i].matmul(&e).trace().re - numerics::logdet_psd(&w[i])?);
    }
    Ok(f)
}

/// Full-power precoders along the leading right singular vectors of each
/// `H_i`, one stream per UE antenna.
pub fn init_precoders(h: &[CMat], budgets: &[f64]) -> Result<Vec<CMat>> {
    h.iter()
        .zip(budgets)
        .map(|(hi, &p)| {
            let (l, m) = hi.shape();
            let svd = numerics::svd(hi)?;
            let mut v = CMat::zeros(m, l);
            for c in 0..l.min(svd.v.cols()) {
                v.set_col(c, &svd.v.col(c));
            }
            let norm = v.norm_sqr();
            Ok(if norm > 0.0 { v.scale_real(crate::math::sqrt(p / norm)) } else { v })
        })
        .collect()
}

/// One BCD pass `G → W → V` starting from precoders `v`.
///
/// Returns the receivers and weights computed for `v` and the updated
/// precoders with their multipliers.
pub fn bcd_step(h: &[CMat], v: &[CMat], params: &WmmseParams) -> Result<(Vec<CMat>, Vec<CMat>, Vec<CMat>, Vec<f64>)> {
    let g = update_receivers(h, v, params.noise)?;
    let e = mse_matrices(h, v, &g, params.noise);
    let w = update_weights(&e)?;
    let (v_new, mu) = update_precoders(h, &g, &w, &params.weights, &params.budgets)?;
    Ok((g, w, v_new, mu))
}

/// Runs BCD from the SVD initialization until the relative objective change
/// drops below `params.tol` or `params.max_iter` iterations.
pub fn online_wmmse(h: &[CMat], params: &WmmseParams) -> Result<LinkVariables> {
    params.check(h.len())?;
    let v0 = init_precoders(h, &params.budgets)?;
    online_wmmse_from(h, params, v0)
}

/// As [`online_wmmse`], from given initial precoders.
pub fn online_wmmse_from(h: &[CMat], params: &WmmseParams, v0: Vec<CMat>) -> Result<LinkVariables> {
    params.check(h.len())?;
    check_dims(h, &v0)?;
    let noise = params.noise;
    let alpha = &params.weights;
    let mut v = v0;
    let mut mu = alpha.iter().map(|_| 0.0).collect();
    let mut objective = Vec::new();
    let mut prev: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..params.max_iter {
        let g = update_receivers(h, &v, noise)?;
        let e = mse_matrices(h, &v, &g, noise);
        let w = update_weights(&e)?;
        let after_w = weighted_mse(h, &v, &g, &w, noise, alpha)?;
        check_increase(prev, after_w, it)?;
        let (v_new, mu_new) = update_precoders(h, &g, &w, alpha, &params.budgets)?;
        let f = weighted_mse(h, &v_new, &g, &w, noise, alpha)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteObjective {
                sample: 0,
                iteration: it,
            });
        }
        check_increase(Some(after_w), f, it)?;
        v = v_new;
        mu = mu_new;
        objective.push(f);
        iterations = it + 1;
        if let Some(p) = prev {
            if (p - f).abs() <= params.tol * p.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        prev = Some(f);
    }
    let g = update_receivers(h, &v, noise)?;
    let e = mse_matrices(h, &v, &g, noise);
    let w = update_weights(&e)?;
    let rates = rates(h, &v, noise)?;
    Ok(LinkVariables {
        v,
        g,
        w,
        mu,
        rates,
        objective,
        iterations,
        converged,
    })
}

fn check_increase(prev: Option<f64>, f: f64, iteration: usize) -> Result<()> {
    if let Some(p) = prev {
        if f > p + MONOTONICITY_TOL {
            return Err(Error::ObjectiveIncrease {
                iteration,
                increase: f - p,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, domain, stream_rng};
    use alloc::vec;
    use approx::assert_relative_eq;

    fn random_mat(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut rng = stream_rng(seed, domain::TEST, 7, 0);
        CMat::from_fn(rows, cols, |_, _| complex_normal(&mut rng))
    }

    fn instance(n_users: usize, l: usize, m: usize, seed: u64) -> (Vec<CMat>, WmmseParams) {
        let h = (0..n_users).map(|i| random_mat(l, m, seed * 31 + i as u64)).collect();
        let params = WmmseParams {
            noise: 0.1,
            budgets: vec![1.0; n_users],
            weights: (0..n_users).map(|i| 1.0 + 0.25 * i as f64).collect(),
            tol: 1e-8,
            max_iter: 300,
        };
        (h, params)
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn rate_trivial_cases() {
        let h = CMat::from_vec(1, 1, vec![C64::new(0.6, 0.8)]);
        assert_eq!(user_rate(&h, &[CMat::zeros(1, 1)], 1.0, 0).unwrap(), 0.0);
        // |hv|² = σ²
        let v = CMat::from_vec(1, 1, vec![c(0.5)]);
        assert_relative_eq!(user_rate(&h, &[v], 0.25, 0).unwrap(), core::f64::consts::LN_2, epsilon = 1e-14);
        assert!(matches!(user_rate(&h, &[CMat::zeros(1, 1)], 0.0, 0), Err(Error::Config { .. })));
    }

    #[test]
    fn rate_equals_mmse_logdet() {
        let (h, p) = instance(3, 2, 6, 1);
        let v: Vec<CMat> = (0..3).map(|i| random_mat(6, 2, 50 + i)).collect();
        let g = update_receivers(&h, &v, p.noise).unwrap();
        for i in 0..3 {
            let e = mse_matrix(&h[i], &v, &g[i], p.noise, i);
            let dual = -numerics::logdet_psd(&e).unwrap();
            assert_relative_eq!(user_rate(&h[i], &v, p.noise, i).unwrap(), dual, max_relative = 1e-8);
        }
    }

    #[test]
    fn mse_trivial_cases() {
        let (h, p) = instance(2, 2, 4, 2);
        let v: Vec<CMat> = (0..2).map(|i| random_mat(4, 2, 60 + i)).collect();
        assert_eq!(mse_matrix(&h[0], &v, &CMat::zeros(2, 2), p.noise, 0), CMat::identity(2));
        // single user, no noise, G^H H V = I
        let hh = CMat::identity(2);
        let vv = CMat::identity(2);
        let e = mse_matrix(&hh, &[vv], &CMat::identity(2), 0.0, 0);
        assert!(e.max_abs() < 1e-15);
    }

    #[test]
    fn mse_matches_monte_carlo() {
        let (h, p) = instance(2, 2, 3, 3);
        let v: Vec<CMat> = (0..2).map(|i| random_mat(3, 2, 70 + i).scale_real(0.5)).collect();
        let g = random_mat(2, 2, 80).scale_real(0.3);
        let i = 0;
        let e = mse_matrix(&h[i], &v, &g, p.noise, i);
        let mut rng = stream_rng(99, domain::TEST, 0, 0);
        let draws = 100_000;
        let mut acc = CMat::zeros(2, 2);
        for _ in 0..draws {
            let s: Vec<Vec<C64>> = (0..2).map(|_| (0..2).map(|_| complex_normal(&mut rng)).collect()).collect();
            let mut y: Vec<C64> = (0..2).map(|_| complex_normal(&mut rng) * p.noise.sqrt()).collect();
            for (j, vj) in v.iter().enumerate() {
                let x = h[i].mul_vec(&vj.mul_vec(&s[j]));
                for (yy, xx) in y.iter_mut().zip(x) {
                    *yy += xx;
                }
            }
            let shat = g.adjoint().mul_vec(&y);
            let err: Vec<C64> = s[i].iter().zip(&shat).map(|(a, b)| a - b).collect();
            let col = CMat::column_vector(&err);
            acc += &col.mul_adjoint(&col);
        }
        let est = acc.scale_real(1.0 / draws as f64);
        assert!(est.max_abs_diff(&e) <= 0.02 * e.frobenius_norm(), "{est:?} vs {e:?}");
    }

    #[test]
    fn receivers_trivial_and_scalar() {
        let (h, p) = instance(2, 2, 4, 4);
        let zero = vec![CMat::zeros(4, 2); 2];
        assert!(update_receivers(&h, &zero, p.noise).unwrap().iter().all(CMat::is_zero));
        let hs = CMat::from_vec(1, 1, vec![C64::new(0.3, -1.2)]);
        let vs = CMat::from_vec(1, 1, vec![C64::new(0.7, 0.2)]);
        let hv = hs[(0, 0)] * vs[(0, 0)];
        let g = update_receivers(&[hs], &[vs], 0.4).unwrap();
        let expected = hv / (hv.norm_sqr() + 0.4);
        assert!((g[0][(0, 0)] - expected).norm() < 1e-15);
    }

    #[test]
    fn receivers_minimize_trace_mse() {
        let (h, p) = instance(3, 2, 5, 5);
        let v: Vec<CMat> = (0..3).map(|i| random_mat(5, 2, 90 + i).scale_real(0.4)).collect();
        let g = update_receivers(&h, &v, p.noise).unwrap();
        for i in 0..3 {
            let best = mse_matrix(&h[i], &v, &g[i], p.noise, i).trace().re;
            for k in 0..1000 {
                let d = random_mat(2, 2, 1000 + k).scale_real(1e-3 * (1 + k % 10) as f64);
                let probe = &g[i] + &d;
                assert!(mse_matrix(&h[i], &v, &probe, p.noise, i).trace().re >= best - 1e-14);
            }
        }
    }

    #[test]
    fn weights_invert_mse() {
        let w = update_weights(&[CMat::identity(3), CMat::from_real_diag(&[0.5, 0.25])]).unwrap();
        assert!(w[0].max_abs_diff(&CMat::identity(3)) < 1e-15);
        assert!(w[1].max_abs_diff(&CMat::from_real_diag(&[2.0, 4.0])) < 1e-14);
        let x = random_mat(4, 4, 6);
        let e = &CMat::identity(4) + &x.mul_adjoint(&x);
        let w = update_weights(core::slice::from_ref(&e)).unwrap();
        assert!(w[0].matmul(&e).max_abs_diff(&CMat::identity(4)) < 1e-9);
    }

    #[test]
    fn precoders_trivial_and_scalar() {
        let (h, _) = instance(2, 2, 4, 7);
        let zero = vec![CMat::zeros(2, 2); 2];
        let w = vec![CMat::identity(2); 2];
        let (v, mu) = update_precoders(&h, &zero, &w, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(v.iter().all(CMat::is_zero));
        assert_eq!(mu, vec![0.0, 0.0]);

        // scalar, power-limited
        let hs = C64::new(2.0, 1.0);
        let gs = C64::new(0.5, -0.5);
        let (ws, alpha, p) = (3.0, 1.5, 0.01);
        let (v, mu) = update_precoders(
            &[CMat::from_vec(1, 1, vec![hs])],
            &[CMat::from_vec(1, 1, vec![gs])],
            &[CMat::from_vec(1, 1, vec![c(ws)])],
            &[alpha],
            &[p],
        )
        .unwrap();
        let expected = hs.conj() * gs * (alpha * ws) / (alpha * hs.norm_sqr() * gs.norm_sqr() * ws + mu[0]);
        assert!((v[0][(0, 0)] - expected).norm() < 1e-12);
        assert_relative_eq!(v[0].norm_sqr(), p, max_relative = 1e-12);
    }

    #[test]
    fn precoders_complementary_slackness() {
        for seed in 0..20 {
            let (h, p) = instance(3, 2, 8, 100 + seed);
            let v0 = init_precoders(&h, &p.budgets).unwrap();
            let (g, w, v, mu) = bcd_step(&h, &v0, &p).unwrap();
            let _ = (g, w);
            for i in 0..3 {
                let tr = v[i].norm_sqr();
                assert!(tr <= p.budgets[i] + 1e-9);
                assert!(mu[i] * (p.budgets[i] - tr) <= 1e-6);
            }
        }
    }

    #[test]
    fn zero_channel_gives_zero_rates() {
        let h = vec![CMat::zeros(2, 4); 2];
        let (_, p) = instance(2, 2, 4, 0);
        let out = online_wmmse(&h, &p).unwrap();
        assert!(out.v.iter().all(CMat::is_zero));
        assert!(out.rates.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn single_antenna_single_user_closed_form() {
        let h = vec![CMat::from_vec(1, 1, vec![C64::new(0.3, 0.4)])];
        let p = WmmseParams {
            noise: 0.01,
            budgets: vec![2.0],
            weights: vec![1.0],
            tol: 1e-12,
            max_iter: 500,
        };
        let out = online_wmmse(&h, &p).unwrap();
        assert_relative_eq!(out.v[0].norm_sqr(), 2.0, max_relative = 1e-9);
        assert_relative_eq!(out.rates[0], (1.0 + 2.0 * 0.25 / 0.01f64).ln(), max_relative = 1e-9);
    }

    #[test]
    fn monotone_and_dual_at_convergence() {
        for seed in 0..10 {
            let (h, p) = instance(3, 2, 8, 200 + seed);
            let out = online_wmmse(&h, &p).unwrap();
            for w in out.objective.windows(2) {
                assert!(w[1] <= w[0] + MONOTONICITY_TOL);
            }
            let weighted: f64 = out.rates.iter().zip(&p.weights).map(|(r, a)| a * r).sum();
            let dual: f64 = out
                .w
                .iter()
                .zip(&p.weights)
                .map(|(w, a)| a * numerics::logdet_psd(w).unwrap())
                .sum();
            assert_relative_eq!(weighted, dual, max_relative = 1e-6);
            for (v, &b) in out.v.iter().zip(&p.budgets) {
                assert!(v.norm_sqr() <= b + 1e-9);
            }
        }
    }

    #[test]
    fn beats_random_feasible_precoders() {
        let (h, mut p) = instance(2, 2, 4, 300);
        p.weights = vec![1.0, 1.0];
        let out = online_wmmse(&h, &p).unwrap();
        let best: f64 = out.rates.iter().sum();
        for k in 0..100 {
            let v: Vec<CMat> = (0..2)
                .map(|i| {
                    let x = random_mat(4, 2, 5000 + 2 * k + i);
                    x.scale_real(1.0 / x.frobenius_norm())
                })
                .collect();
            let r: f64 = rates(&h, &v, p.noise).unwrap().iter().sum();
            assert!(best >= r, "random draw {k}: {r} > {best}");
        }
    }

    #[test]
    fn rates_scale_invariant() {
        let (h, p) = instance(2, 2, 4, 400);
        let base = online_wmmse(&h, &p).unwrap();
        let c = 3.7e-5;
        let hs: Vec<CMat> = h.iter().map(|x| x.scale_real(c)).collect();
        let ps = WmmseParams {
            noise: p.noise * c * c,
            ..p.clone()
        };
        let scaled = online_wmmse(&hs, &ps).unwrap();
        for (a, b) in base.rates.iter().zip(&scaled.rates) {
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
    }
}
