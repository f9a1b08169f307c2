//! Offline IRS beam optimization from statistical CSI.
//!
//! A frozen set of Monte-Carlo channel samples stands in for the channel
//! distribution. Every outer iteration performs one WMMSE step per sample
//! and then re-optimizes each tile's reflection vector `b_m` from the
//! sample-averaged quadratic model of the weighted MSE,
//! `bᴴ M̄ b − 2 Re(ūᴴ b) + c̄`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::channel::ChannelSet;
use crate::config::{Constraint, ScenarioConfig, TileUpdate};
use crate::error::{Error, Result};
use crate::exec::{Clock, Executor};
use crate::math;
use crate::numerics::{self, CMat, CompensatedSum, C64, ZERO};
use crate::rng::{self, domain};
use crate::wmmse::{self, WmmseParams};

/// Reflection vectors of every tile.
#[derive(Clone, Debug, PartialEq)]
pub struct IrsBeamSet {
    pub beams: Vec<Vec<C64>>,
    pub constraint: Constraint,
    /// GC bound on `‖b_k‖²`.
    pub gc_radius_sq: f64,
}

/// Tolerance on `‖b_k‖²` above the GC radius.
pub const GC_FEASIBILITY_TOL: f64 = 1e-9;

impl IrsBeamSet {
    /// I.i.d. uniform phases with unit modulus, projected to the constraint.
    ///
    /// This is both the optimizer's starting point and the NON-OPT baseline.
    pub fn random(seed: u64, tiles: usize, tile_size: usize, constraint: Constraint, gc_radius_sq: f64) -> Self {
        let mut rng = rng::stream_rng(seed, domain::BEAMS, 0, 0);
        let mut beams = Vec::with_capacity(tiles);
        for _ in 0..tiles {
            let b: Vec<C64> = (0..tile_size)
                .map(|_| C64::from_polar(1.0, 2.0 * PI * rng::uniform(&mut rng)))
                .collect();
            beams.push(b);
        }
        let mut set = IrsBeamSet {
            beams,
            constraint,
            gc_radius_sq,
        };
        for b in &mut set.beams {
            *b = project(b, constraint, gc_radius_sq);
        }
        set
    }

    /// Random beams for a configuration.
    pub fn random_for(cfg: &ScenarioConfig) -> Self {
        Self::random(
            cfg.seed,
            cfg.tile_count(),
            cfg.tile_size(),
            cfg.beams.constraint,
            cfg.gc_radius_sq(),
        )
    }

    pub fn tiles(&self) -> usize {
        self.beams.len()
    }

    /// Checks the constraint on every tile.
    pub fn check_feasible(&self) -> Result<()> {
        for b in &self.beams {
            if !b.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { context: "IRS beam" });
            }
            let ok = match self.constraint {
                Constraint::Global => numerics::vec_norm_sqr(b) <= self.gc_radius_sq + GC_FEASIBILITY_TOL,
                Constraint::Local { bits } => b.iter().all(|&z| on_phase_grid(z, bits)),
            };
            if !ok {
                return Err(Error::InvalidArgument {
                    context: "IRS beam violates its constraint",
                });
            }
        }
        Ok(())
    }

    /// Frobenius distance over all tiles.
    pub fn distance(&self, other: &IrsBeamSet) -> f64 {
        let mut s = 0.0;
        for (a, b) in self.beams.iter().zip(&other.beams) {
            for (x, y) in a.iter().zip(b) {
                s += (x - y).norm_sqr();
            }
        }
        math::sqrt(s)
    }
}

/// Grid point `e^{j2πl/2^bits}`.
pub fn grid_point(l: u32, bits: u32) -> C64 {
    let n = 1u64 << bits;
    let l = (l as u64) % n;
    // exact values at the axis points
    match (4 * l).checked_rem(n) {
        Some(0) => match 4 * l / n {
            0 => return C64::new(1.0, 0.0),
            1 => return C64::new(0.0, 1.0),
            2 => return C64::new(-1.0, 0.0),
            _ => return C64::new(0.0, -1.0),
        },
        _ => {}
    }
    let phi = 2.0 * PI * l as f64 / n as f64;
    C64::new(math::cos(phi), math::sin(phi))
}

/// Nearest phase-grid point of `z`.
pub fn quantize_phase(z: C64, bits: u32) -> C64 {
    let n = (1u64 << bits) as f64;
    let phi = math::atan2(z.im, z.re);
    let l = math::round(phi * n / (2.0 * PI)) as i64;
    grid_point(l.rem_euclid(n as i64) as u32, bits)
}

fn on_phase_grid(z: C64, bits: u32) -> bool {
    z == quantize_phase(z, bits)
}

/// Projection onto the constraint set.
pub fn project(b: &[C64], constraint: Constraint, gc_radius_sq: f64) -> Vec<C64> {
    match constraint {
        Constraint::Global => {
            let n2 = numerics::vec_norm_sqr(b);
            if n2 > gc_radius_sq {
                let s = math::sqrt(gc_radius_sq / n2);
                b.iter().map(|z| z * s).collect()
            } else {
                b.to_vec()
            }
        }
        Constraint::Local { bits } => b.iter().map(|&z| quantize_phase(z, bits)).collect(),
    }
}

/// `Q1 diag(b) Q2 = q_map(Q1, Q2) · gamma_expand(b)`.
///
/// Block `p` of the `L × (P·L)` result is the outer product of column `p`
/// of `Q1` with row `p` of `Q2`.
pub fn q_map(q1: &CMat, q2: &CMat) -> Result<CMat> {
    let (l, p) = q1.shape();
    if q2.rows() != p {
        return Err(Error::DimensionMismatch { context: "q_map" });
    }
    let l2 = q2.cols();
    let mut out = CMat::zeros(l, p * l2);
    for k in 0..p {
        for r in 0..l {
            for c in 0..l2 {
                out[(r, k * l2 + c)] = q1[(r, k)] * q2[(k, c)];
            }
        }
    }
    Ok(out)
}

/// `Γ(b) = b ⊗ I_L`, `(P·L) × L`.
pub fn gamma_expand(b: &[C64], l: usize) -> CMat {
    let mut out = CMat::zeros(b.len() * l, l);
    for (k, &bk) in b.iter().enumerate() {
        for d in 0..l {
            out[(k * l + d, d)] = bk;
        }
    }
    out
}

/// Per-sample digital variables and composite channels.
#[derive(Clone, Debug)]
pub struct SampleState {
    pub channels: ChannelSet,
    /// Composite `H_i(B)` for the current beams.
    pub h: Vec<CMat>,
    pub v: Vec<CMat>,
    pub g: Vec<CMat>,
    pub w: Vec<CMat>,
}

impl SampleState {
    /// State with SVD-initialized precoders for `beams`; `G`, `W` are the
    /// MMSE receivers and weights of those precoders.
    pub fn new(channels: ChannelSet, beams: &IrsBeamSet, params: &WmmseParams) -> Result<Self> {
        let h = channels.composite_all(&beams.beams)?;
        let v = wmmse::init_precoders(&h, &params.budgets)?;
        let g = wmmse::update_receivers(&h, &v, params.noise)?;
        let w = wmmse::update_weights(&wmmse::mse_matrices(&h, &v, &g, params.noise))?;
        Ok(SampleState { channels, h, v, g, w })
    }

    /// Recomputes the composites for `beams`.
    pub fn refresh_channels(&mut self, beams: &[Vec<C64>]) -> Result<()> {
        self.h = self.channels.composite_all(beams)?;
        Ok(())
    }

    /// One BCD pass `G → W → V` on the current composite channels.
    pub fn bcd_step(&mut self, params: &WmmseParams) -> Result<()> {
        let (g, w, v, _) = wmmse::bcd_step(&self.h, &self.v, params)?;
        self.g = g;
        self.w = w;
        self.v = v;
        Ok(())
    }

    /// MMSE receivers and `W = E⁻¹` for the current precoders.
    pub fn enforce_mmse(&mut self, params: &WmmseParams) -> Result<()> {
        self.g = wmmse::update_receivers(&self.h, &self.v, params.noise)?;
        self.w = wmmse::update_weights(&wmmse::mse_matrices(&self.h, &self.v, &self.g, params.noise))?;
        Ok(())
    }

    /// `Σ α_i (tr(W_i E_i) − log det W_i)` at the current state.
    pub fn objective(&self, params: &WmmseParams) -> Result<f64> {
        wmmse::weighted_mse(&self.h, &self.v, &self.g, &self.w, params.noise, &params.weights)
    }

    /// Objective with the beams replaced by `beams`, all else fixed.
    pub fn objective_with(&self, beams: &[Vec<C64>], params: &WmmseParams) -> Result<f64> {
        let h = self.channels.composite_all(beams)?;
        wmmse::weighted_mse(&h, &self.v, &self.g, &self.w, params.noise, &params.weights)
    }

    /// `Σ α_i R_i` in nats with the beams replaced by `beams`, `V` fixed.
    pub fn weighted_rate_with(&self, beams: &[Vec<C64>], params: &WmmseParams) -> Result<f64> {
        let h = self.channels.composite_all(beams)?;
        let r = wmmse::rates(&h, &self.v, params.noise)?;
        Ok(r.iter().zip(&params.weights).map(|(r, a)| r * a).sum())
    }

    /// `H_i += T_{i,m} diag(delta) S_m` for every UE.
    fn apply_tile_change(&mut self, m: usize, delta: &[C64]) {
        let s = &self.channels.bs_irs[m];
        for (i, h) in self.h.iter_mut().enumerate() {
            *h += &self.channels.irs_ue[i][m].mul_diag(delta).matmul(s);
        }
    }
}

/// Factors of tile `m`'s contribution, for UE `i` and stream block `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFactors {
    /// `G_iᴴ T_{i,m}`, `L × P`.
    pub a: CMat,
    /// `S_m V_j`, `P × L`.
    pub c: CMat,
    /// Direct-channel cross term `S_m V_j V_jᴴ H̄_iᴴ G_i`, `P × L`.
    pub d: CMat,
    /// Other-tile cross term `S_m V_j V_jᴴ (Σ_{k≠m} T_{i,k} diag(b_k) S_k)ᴴ G_i`.
    pub f: CMat,
}

pub fn build_linear_factors(state: &SampleState, beams: &[Vec<C64>], m: usize, i: usize, j: usize) -> LinearFactors {
    let ch = &state.channels;
    let g = &state.g[i];
    let vj = &state.v[j];
    let a = g.adjoint_mul(&ch.irs_ue[i][m]);
    let c = ch.bs_irs[m].matmul(vj);
    let cv = c.mul_adjoint(vj);
    let d = cv.matmul(&ch.direct[i].adjoint_mul(g));
    let (l, mm) = ch.direct[i].shape();
    let mut others = CMat::zeros(l, mm);
    for (k, bk) in beams.iter().enumerate() {
        if k != m {
            others += &ch.irs_ue[i][k].mul_diag(bk).matmul(&ch.bs_irs[k]);
        }
    }
    let f = cv.matmul(&others.adjoint_mul(g));
    LinearFactors { a, c, d, f }
}

/// Quadratic model of one sample's weighted MSE in a single tile vector:
/// `Σ_i α_i tr(W_i E_i) = bᴴ M b − 2 Re(uᴴ b) + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct TileQuadratic {
    pub m: CMat,
    pub u: Vec<C64>,
    pub c: f64,
}

impl TileQuadratic {
    pub fn zeros(p: usize) -> Self {
        TileQuadratic {
            m: CMat::zeros(p, p),
            u: vec![ZERO; p],
            c: 0.0,
        }
    }

    fn add(&mut self, other: &TileQuadratic) {
        self.m += &other.m;
        for (a, b) in self.u.iter_mut().zip(&other.u) {
            *a += b;
        }
        self.c += other.c;
    }

    fn scale(&mut self, s: f64) {
        self.m = self.m.scale_real(s);
        for a in &mut self.u {
            *a *= s;
        }
        self.c *= s;
    }

    pub fn value(&self, b: &[C64]) -> f64 {
        let mb = self.m.mul_vec(b);
        numerics::vec_dot(b, &mb).re - 2.0 * numerics::vec_dot(&self.u, b).re + self.c
    }

    /// Complex gradient `2Mb − 2u = ∂/∂Re b + j ∂/∂Im b`.
    pub fn gradient(&self, b: &[C64]) -> Vec<C64> {
        self.m
            .mul_vec(b)
            .iter()
            .zip(&self.u)
            .map(|(mb, u)| (mb - u) * 2.0)
            .collect()
    }
}

/// `(M, u, c)` of tile `m` for one sample at its current state.
///
/// `state.h` must be the composite channel for `beams`.
pub fn accumulate_quadratic(
    state: &SampleState,
    beams: &[Vec<C64>],
    m: usize,
    params: &WmmseParams,
) -> Result<TileQuadratic> {
    let ch = &state.channels;
    let s = &ch.bs_irs[m];
    let p = s.rows();
    let n = state.h.len();
    let alpha = &params.weights;

    // S_m (Σ_j V_j V_jᴴ) S_mᴴ, shared by all users
    let c_all: Vec<CMat> = state.v.iter().map(|vj| s.matmul(vj)).collect();
    let mut ccv = CMat::zeros(p, p);
    for c in &c_all {
        ccv += &c.mul_adjoint(c);
    }
    let ccv_t = ccv.transpose();

    let mut out = TileQuadratic::zeros(p);
    for i in 0..n {
        let g = &state.g[i];
        let w = &state.w[i];
        let a = g.adjoint_mul(&ch.irs_ue[i][m]);
        let wa = w.matmul(&a);
        out.m.axpy(C64::new(alpha[i], 0.0), &a.adjoint_mul(&wa).hadamard(&ccv_t));

        // H_i without tile m
        let h_rest = &state.h[i] - &ch.irs_ue[i][m].mul_diag(&beams[m]).matmul(s);
        let gh = g.adjoint_mul(&h_rest);
        let mut cross = CMat::zeros(p, g.cols());
        let mut c_term = 0.0;
        for (j, vj) in state.v.iter().enumerate() {
            let y = gh.matmul(vj);
            cross += &c_all[j].mul_adjoint(&y);
            c_term += w.matmul(&y.mul_adjoint(&y)).trace().re;
            if j == i {
                c_term -= 2.0 * w.matmul(&y).trace().re;
            }
        }
        c_term += w.trace().re + params.noise * w.matmul(&g.adjoint_mul(g)).trace().re;
        out.c += alpha[i] * c_term;

        let desired = c_all[i].matmul(&wa);
        let crossed = cross.matmul(&wa);
        for (q, u) in out.u.iter_mut().enumerate() {
            *u += (desired[(q, q)] - crossed[(q, q)]).conj() * alpha[i];
        }
    }
    let defect = out.m.hermitian_defect();
    if defect > numerics::HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    out.m = out.m.hermitian_part();
    Ok(out)
}

/// Sample mean of per-sample models, summed pairwise in index order.
pub fn mc_expectation(stats: &[TileQuadratic]) -> Result<TileQuadratic> {
    if stats.is_empty() {
        return Err(Error::InvalidArgument {
            context: "mc_expectation needs at least one sample",
        });
    }
    let mut total = pairwise_sum(stats);
    total.scale(1.0 / stats.len() as f64);
    Ok(total)
}

fn pairwise_sum(stats: &[TileQuadratic]) -> TileQuadratic {
    if stats.len() == 1 {
        return stats[0].clone();
    }
    let mid = stats.len() / 2;
    let mut left = pairwise_sum(&stats[..mid]);
    left.add(&pairwise_sum(&stats[mid..]));
    left
}

/// Closed-form tile update.
///
/// GC: `b = (M̄ + μI)⁻¹ ū` with the smallest `μ ≥ 0` meeting `‖b‖² ≤ ρ²`.
/// LC: the GC solution with radius `P`, projected entry-wise to the nearest
/// phase-grid point. Returns the beam and `μ`.
pub fn update_b(stats: &TileQuadratic, constraint: Constraint, gc_radius_sq: f64) -> Result<(Vec<C64>, f64)> {
    let p = stats.u.len();
    let radius = match constraint {
        Constraint::Global => gc_radius_sq,
        Constraint::Local { .. } => p as f64,
    };
    let rhs = CMat::column_vector(&stats.u);
    let sol = numerics::power_constrained_solve(&stats.m, &rhs, radius, "tile")?;
    let b = sol.x.into_vec();
    let b = match constraint {
        Constraint::Global => b,
        Constraint::Local { .. } => project(&b, constraint, gc_radius_sq),
    };
    Ok((b, sol.mu))
}

/// Settings of the offline loop.
#[derive(Clone, Debug, PartialEq)]
pub struct OfflineSettings {
    pub params: WmmseParams,
    pub constraint: Constraint,
    pub gc_radius_sq: f64,
    /// Stop when `‖B(q+1) − B(q)‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub tile_update: TileUpdate,
}

impl OfflineSettings {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        OfflineSettings {
            params: WmmseParams::from_config(cfg),
            constraint: cfg.beams.constraint,
            gc_radius_sq: cfg.gc_radius_sq(),
            tol: cfg.offline_tol(),
            max_iter: cfg.offline.max_iter,
            tile_update: cfg.offline.tile_update,
        }
    }
}

/// Convergence record of [`offline_optimize`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptReport {
    pub iterations: usize,
    /// `‖B(q+1) − B(q)‖` per iteration.
    pub delta: Vec<f64>,
    /// Sample-averaged weighted-MSE objective after each iteration.
    pub objective: Vec<f64>,
    /// Wall-clock seconds per iteration.
    pub wall_secs: Vec<f64>,
    pub converged: bool,
}

/// Samples per reduction chunk; fixed so results do not depend on the
/// executor.
const CHUNK: usize = 8;

fn averaged_stats<E: Executor>(
    exec: &E,
    samples: &[SampleState],
    beams: &[Vec<C64>],
    m: usize,
    params: &WmmseParams,
) -> Result<TileQuadratic> {
    let chunks: Vec<&[SampleState]> = samples.chunks(CHUNK).collect();
    let sums = exec.map(&chunks, |_, chunk| -> Result<TileQuadratic> {
        let mut acc: Option<TileQuadratic> = None;
        for s in chunk.iter() {
            let q = accumulate_quadratic(s, beams, m, params)?;
            match &mut acc {
                None => acc = Some(q),
                Some(a) => a.add(&q),
            }
        }
        Ok(acc.expect("chunks are non-empty"))
    });
    let sums = sums.into_iter().collect::<Result<Vec<_>>>()?;
    let mut total = pairwise_sum(&sums);
    total.scale(1.0 / samples.len() as f64);
    Ok(total)
}

/// Sample-averaged weighted-MSE objective at the current states.
pub fn averaged_objective<E: Executor>(exec: &E, samples: &[SampleState], params: &WmmseParams, iteration: usize) -> Result<f64> {
    let vals = exec.map(samples, |_, s| s.objective(params));
    let mut acc = CompensatedSum::default();
    for (n, v) in vals.into_iter().enumerate() {
        let v = v?;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { sample: n, iteration });
        }
        acc.add(C64::new(v, 0.0));
    }
    Ok(acc.value().re / samples.len() as f64)
}

/// Builds the frozen per-sample states for the initial beams.
pub fn prepare_samples<E: Executor>(
    exec: &E,
    channels: Vec<ChannelSet>,
    beams: &IrsBeamSet,
    params: &WmmseParams,
) -> Result<Vec<SampleState>> {
    let mut slots: Vec<Option<ChannelSet>> = channels.into_iter().map(Some).collect();
    exec.map_mut(&mut slots, |_, c| SampleState::new(c.take().expect("taken once"), beams, params))
        .into_iter()
        .collect()
}

/// Runs the offline loop on frozen samples, starting from `init`.
///
/// Each outer iteration: one BCD step per sample, then each tile's beam is
/// re-optimized from the averaged quadratic model. With
/// [`TileUpdate::Sequential`] tiles are updated one after another, each
/// seeing the new beams of the tiles before it; with
/// [`TileUpdate::Simultaneous`] all tiles are solved from the same iterate.
pub fn offline_optimize<E: Executor, C: Clock>(
    exec: &E,
    clock: &C,
    samples: &mut [SampleState],
    init: IrsBeamSet,
    settings: &OfflineSettings,
) -> Result<(IrsBeamSet, OptReport)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument {
            context: "offline optimization needs at least one sample",
        });
    }
    let params = &settings.params;
    let mut beams = init;
    beams.constraint = settings.constraint;
    beams.gc_radius_sq = settings.gc_radius_sq;
    let mut report = OptReport::default();
    for q in 0..settings.max_iter {
        let t0 = clock.now();
        let previous = beams.clone();
        let current = &beams.beams;
        exec.map_mut(samples, |_, s| -> Result<()> {
            s.refresh_channels(current)?;
            s.bcd_step(params)
        })
        .into_iter()
        .collect::<Result<Vec<()>>>()?;

        match settings.tile_update {
            TileUpdate::Sequential => {
                for m in 0..beams.tiles() {
                    let stats = averaged_stats(exec, samples, &beams.beams, m, params)?;
                    let new_b = next_beam(&stats, &beams.beams[m], settings)?;
                    let delta: Vec<C64> = new_b.iter().zip(&beams.beams[m]).map(|(a, b)| a - b).collect();
                    beams.beams[m] = new_b;
                    exec.map_mut(samples, |_, s| s.apply_tile_change(m, &delta));
                }
            }
            TileUpdate::Simultaneous => {
                let mut next = Vec::with_capacity(beams.tiles());
                for m in 0..beams.tiles() {
                    let stats = averaged_stats(exec, samples, &beams.beams, m, params)?;
                    next.push(next_beam(&stats, &beams.beams[m], settings)?);
                }
                beams.beams = next;
                let current = &beams.beams;
                exec.map_mut(samples, |_, s| s.refresh_channels(current))
                    .into_iter()
                    .collect::<Result<Vec<()>>>()?;
            }
        }

        let f = averaged_objective(exec, samples, params, q)?;
        let delta = beams.distance(&previous);
        report.objective.push(f);
        report.delta.push(delta);
        report.wall_secs.push(clock.now() - t0);
        report.iterations = q + 1;
        if delta <= settings.tol {
            report.converged = true;
            break;
        }
    }
    // composites exact for the returned beams
    let current = &beams.beams;
    exec.map_mut(samples, |_, s| s.refresh_channels(current))
        .into_iter()
        .collect::<Result<Vec<()>>>()?;
    Ok((beams, report))
}

fn next_beam(stats: &TileQuadratic, current: &[C64], settings: &OfflineSettings) -> Result<Vec<C64>> {
    // a flat model leaves any beam optimal; keep the current one
    if stats.m.is_zero() && stats.u.iter().all(|z| *z == ZERO) {
        return Ok(current.to_vec());
    }
    Ok(update_b(stats, settings.constraint, settings.gc_radius_sq)?.0)
}

/// Closed-form versus finite-difference gradients at a beam set.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientCheck {
    /// Largest per-tile `‖g_cf − g_fd‖ / ‖g_fd‖` (absolute when `g_fd = 0`).
    pub max_rel_deviation: f64,
    pub per_tile: Vec<f64>,
}

/// Relative step of the central differences.
const FD_STEP: f64 = 1e-6;

fn fd_gradient(
    beams: &[Vec<C64>],
    m: usize,
    mut eval: impl FnMut(&[Vec<C64>]) -> Result<f64>,
) -> Result<Vec<C64>> {
    let scale = beams[m].iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let h = FD_STEP * scale;
    let mut work = beams.to_vec();
    let mut grad = Vec::with_capacity(beams[m].len());
    for p in 0..beams[m].len() {
        let mut parts = [0.0; 2];
        for (slot, dir) in parts.iter_mut().zip([C64::new(h, 0.0), C64::new(0.0, h)]) {
            work[m][p] = beams[m][p] + dir;
            let fp = eval(&work)?;
            work[m][p] = beams[m][p] - dir;
            let fm = eval(&work)?;
            work[m][p] = beams[m][p];
            *slot = (fp - fm) / (2.0 * h);
        }
        grad.push(C64::new(parts[0], parts[1]));
    }
    Ok(grad)
}

fn deviation(cf: &[C64], fd: &[C64]) -> f64 {
    let diff: Vec<C64> = cf.iter().zip(fd).map(|(a, b)| a - b).collect();
    let n = numerics::vec_norm(fd);
    let d = numerics::vec_norm(&diff);
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

/// Checks `2M̄b − 2ū` against central differences of the averaged
/// weighted-MSE objective with `G`, `W`, `V` frozen.
pub fn check_quadratic_gradient<E: Executor>(
    exec: &E,
    samples: &[SampleState],
    beams: &IrsBeamSet,
    params: &WmmseParams,
) -> Result<GradientCheck> {
    let mut per_tile = Vec::with_capacity(beams.tiles());
    for m in 0..beams.tiles() {
        let stats = stats_fresh(exec, samples, &beams.beams, m, params)?;
        let cf = stats.gradient(&beams.beams[m]);
        let fd = fd_gradient(&beams.beams, m, |b| mean_of(exec, samples, |s| s.objective_with(b, params)))?;
        per_tile.push(deviation(&cf, &fd));
    }
    Ok(summarize(per_tile))
}

fn summarize(per_tile: Vec<f64>) -> GradientCheck {
    GradientCheck {
        max_rel_deviation: per_tile.iter().copied().fold(0.0, f64::max),
        per_tile,
    }
}

fn mean_of<E: Executor>(exec: &E, samples: &[SampleState], f: impl Fn(&SampleState) -> Result<f64> + Sync + Send) -> Result<f64> {
    let vals = exec.map(samples, |_, s| f(s));
    let mut acc = CompensatedSum::default();
    for v in vals {
        acc.add(C64::new(v?, 0.0));
    }
    Ok(acc.value().re / samples.len() as f64)
}

/// Averaged stats for `beams`, with composites recomputed per sample.
fn stats_fresh<E: Executor>(
    exec: &E,
    samples: &[SampleState],
    beams: &[Vec<C64>],
    m: usize,
    params: &WmmseParams,
) -> Result<TileQuadratic> {
    let stats = exec.map(samples, |_, s| -> Result<TileQuadratic> {
        let mut local = s.clone();
        local.refresh_channels(beams)?;
        accumulate_quadratic(&local, beams, m, params)
    });
    mc_expectation(&stats.into_iter().collect::<Result<Vec<_>>>()?)
}

/// How `W` is set before the stationarity check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightChoice {
    /// `G` = MMSE receivers and `W = E⁻¹`, the premise of the check.
    Mmse,
    /// `G` = MMSE receivers but `W = I`; the negative control.
    Identity,
}

/// Compares the closed-form gradient of the weighted-MSE objective with
/// finite differences of the negated average weighted sum-rate (`V` fixed).
/// The two agree when `W = E⁻¹`; with [`WeightChoice::Identity`] they
/// should not.
pub fn verify_gradient_identity<E: Executor>(
    exec: &E,
    samples: &[SampleState],
    beams: &IrsBeamSet,
    params: &WmmseParams,
    weights: WeightChoice,
) -> Result<GradientCheck> {
    let prepared: Vec<SampleState> = exec
        .map(samples, |_, s| -> Result<SampleState> {
            let mut local = s.clone();
            local.refresh_channels(&beams.beams)?;
            local.enforce_mmse(params)?;
            if weights == WeightChoice::Identity {
                for w in &mut local.w {
                    *w = CMat::identity(w.rows());
                }
            }
            Ok(local)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut per_tile = Vec::with_capacity(beams.tiles());
    for m in 0..beams.tiles() {
        let stats = averaged_stats(exec, &prepared, &beams.beams, m, params)?;
        let cf = stats.gradient(&beams.beams[m]);
        let fd = fd_gradient(&beams.beams, m, |b| {
            mean_of(exec, &prepared, |s| Ok(-s.weighted_rate_with(b, params)?))
        })?;
        per_tile.push(deviation(&cf, &fd));
    }
    Ok(summarize(per_tile))
}
