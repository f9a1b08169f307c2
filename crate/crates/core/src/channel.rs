//! Channel synthesis: clustered direct links, near-field BS→IRS and IRS→UE
//! links, and the composite channel for a set of IRS beams.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::config::{Profile, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::math;
use crate::numerics::{CMat, C64, ZERO};
use crate::scenario::{Scenario, ScenarioSample, Tile};

static CLAMPED_DISTANCES: AtomicU64 = AtomicU64::new(0);

/// Number of path-loss evaluations clamped to the 1 m reference distance.
pub fn clamped_distances() -> u64 {
    CLAMPED_DISTANCES.load(Ordering::Relaxed)
}

/// NLOS path gain in dB (negative), `−PL0 − 10·n·log10(d)`.
///
/// Distances below 1 m are clamped to 1 m and counted.
pub fn pathloss_nlos_db(d: f64, profile: Profile, pl0_db: f64) -> f64 {
    let d = if d < 1.0 {
        CLAMPED_DISTANCES.fetch_add(1, Ordering::Relaxed);
        1.0
    } else {
        d
    };
    -pl0_db - 10.0 * profile.exponent() * math::log10(d)
}

/// Unit-cell radiation pattern parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellPattern {
    pub q: f64,
    /// Cell area in m².
    pub area: f64,
    /// Boresight gain `4π·A/λ²`.
    pub gain: f64,
}

impl CellPattern {
    pub fn new(q: f64, area: f64, wavelength: f64) -> Result<Self> {
        if !(q > 0.0 && area > 0.0 && wavelength > 0.0) {
            return Err(Error::InvalidArgument {
                context: "cell pattern parameters must be positive",
            });
        }
        Ok(CellPattern {
            q,
            area,
            gain: 4.0 * PI * area / (wavelength * wavelength),
        })
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        let lambda = cfg.wavelength;
        Self::new(cfg.irs.q, cfg.irs.cell_area * lambda * lambda, lambda)
    }

    pub fn power(&self, theta: f64) -> f64 {
        cell_pattern(theta, self.q)
    }

    /// Pattern from `cos θ` directly; avoids the `acos`/`cos` round trip
    /// that leaves a tiny non-zero value at grazing incidence.
    pub fn power_cos(&self, cos_theta: f64) -> f64 {
        if cos_theta <= 0.0 {
            0.0
        } else {
            math::powf(cos_theta.min(1.0), self.q)
        }
    }
}

/// Normalized power pattern: `cos^q θ` in front of the surface, zero behind.
pub fn cell_pattern(theta: f64, q: f64) -> f64 {
    if theta <= core::f64::consts::FRAC_PI_2 {
        math::powf(math::cos(theta).max(0.0), q)
    } else {
        0.0
    }
}

#[inline]
fn phase(d: f64, lambda: f64) -> C64 {
    let x = -2.0 * PI * d / lambda;
    C64::new(math::cos(x), math::sin(x))
}

/// Near-field link between antennas `ant` and the elements of `tile`,
/// `P × ant.len()`: entry `(p, m)` is
/// `√(G_a·G_c·F(θ_pm))·λ/(4π d_pm)·e^{−j2πd_pm/λ}`.
pub fn reflect_link(ant: &[Point3], antenna_gain: f64, tile: &Tile, cell: &CellPattern, lambda: f64) -> Result<CMat> {
    let mut out = CMat::zeros(tile.elements.len(), ant.len());
    for (p, &e) in tile.elements.iter().enumerate() {
        for (m, &a) in ant.iter().enumerate() {
            let d = e.distance(a);
            if d == 0.0 {
                return Err(Error::ZeroDistance {
                    context: "IRS element and antenna",
                });
            }
            let f = cell.power_cos(tile.normal.dot(a - e) / d);
            if f == 0.0 {
                continue;
            }
            let amp = math::sqrt(antenna_gain * cell.gain * f) * lambda / (4.0 * PI * d);
            out[(p, m)] = phase(d, lambda) * amp;
        }
    }
    Ok(out)
}

/// `S_k`, `P × M`.
pub fn bs_irs_channel(scenario: &Scenario, k: usize) -> Result<CMat> {
    let cfg = &scenario.config;
    let tile = scenario.layout.tiles.get(k).ok_or(Error::InvalidArgument {
        context: "tile index out of range",
    })?;
    let cell = CellPattern::from_config(cfg)?;
    reflect_link(
        &scenario.layout.bs,
        math::db_to_power(cfg.bs.gain_db),
        tile,
        &cell,
        cfg.wavelength,
    )
}

/// `T_{i,k}`, `L × P`.
pub fn irs_ue_channel(scenario: &Scenario, sample: &ScenarioSample, i: usize, k: usize) -> Result<CMat> {
    let cfg = &scenario.config;
    let tile = scenario.layout.tiles.get(k).ok_or(Error::InvalidArgument {
        context: "tile index out of range",
    })?;
    let ue = sample.ue_elements.get(i).ok_or(Error::InvalidArgument {
        context: "UE index out of range",
    })?;
    let cell = CellPattern::from_config(cfg)?;
    Ok(reflect_link(ue, math::db_to_power(cfg.ue.gain_db), tile, &cell, cfg.wavelength)?.transpose())
}

/// `H̄_i` for every UE, each `L × M`.
pub fn direct_channel(scenario: &Scenario, sample: &ScenarioSample) -> Result<Vec<CMat>> {
    let cfg = &scenario.config;
    let lambda = cfg.wavelength;
    let pl0 = cfg.channel.pl0_db(lambda);
    let profile = cfg.channel.profile;
    let g_los = math::sqrt(math::db_to_power(cfg.bs.gain_db) * math::db_to_power(cfg.ue.gain_db));
    let bs = &scenario.layout.bs;
    let mut out = Vec::with_capacity(sample.ue_elements.len());
    for (ue, link) in sample.ue_elements.iter().zip(&sample.links) {
        let n_paths: usize = link.clusters.iter().map(|c| c.paths.len()).sum();
        let mut h = CMat::zeros(ue.len(), bs.len());
        for (n, &r) in ue.iter().enumerate() {
            for (m, &t) in bs.iter().enumerate() {
                let d = t.distance(r);
                if d == 0.0 {
                    return Err(Error::ZeroDistance {
                        context: "BS and UE antennas",
                    });
                }
                let mut acc = ZERO;
                if link.los {
                    acc += phase(d, lambda) * (g_los * lambda / (4.0 * PI * d));
                }
                if n_paths > 0 {
                    let beta = math::db_to_amplitude(pathloss_nlos_db(d, profile, pl0));
                    let mut nlos = ZERO;
                    for cl in &link.clusters {
                        for (&p, &a) in cl.paths.iter().zip(&cl.gains) {
                            nlos += a * phase(t.distance(p) + r.distance(p), lambda);
                        }
                    }
                    acc += nlos * (beta / n_paths as f64);
                }
                h[(n, m)] = acc;
            }
        }
        out.push(h);
    }
    Ok(out)
}

/// All channel matrices of one scenario sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub index: u64,
    pub config_hash: u64,
    /// `H̄_i`, `L × M`.
    pub direct: Vec<CMat>,
    /// `S_k`, `P × M`; identical for every sample of a scenario.
    pub bs_irs: Arc<Vec<CMat>>,
    /// `T_{i,k}` indexed `[i][k]`, `L × P`.
    pub irs_ue: Vec<Vec<CMat>>,
}

impl ChannelSet {
    /// All `S_k` of a scenario; share the result between samples.
    pub fn bs_irs_all(scenario: &Scenario) -> Result<Arc<Vec<CMat>>> {
        let s = (0..scenario.n_tiles())
            .map(|k| bs_irs_channel(scenario, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(s))
    }

    pub fn build(scenario: &Scenario, sample: &ScenarioSample, bs_irs: Arc<Vec<CMat>>, config_hash: u64) -> Result<Self> {
        let direct = direct_channel(scenario, sample)?;
        let irs_ue = (0..sample.ue_elements.len())
            .map(|i| {
                (0..scenario.n_tiles())
                    .map(|k| irs_ue_channel(scenario, sample, i, k))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let set = ChannelSet {
            index: sample.index,
            config_hash,
            direct,
            bs_irs,
            irs_ue,
        };
        set.check()?;
        Ok(set)
    }

    pub fn n_users(&self) -> usize {
        self.direct.len()
    }

    pub fn n_tiles(&self) -> usize {
        self.bs_irs.len()
    }

    /// `(L, M)` of UE `i`.
    pub fn dims(&self, i: usize) -> (usize, usize) {
        self.direct[i].shape()
    }

    /// Dimension and finiteness check.
    pub fn check(&self) -> Result<()> {
        let k = self.bs_irs.len();
        for (i, h) in self.direct.iter().enumerate() {
            let (l, m) = h.shape();
            if self.irs_ue.get(i).map(Vec::len) != Some(k) {
                return Err(Error::DimensionMismatch {
                    context: "channel set: tile count of T",
                });
            }
            for (s, t) in self.bs_irs.iter().zip(&self.irs_ue[i]) {
                if s.cols() != m || t.rows() != l || t.cols() != s.rows() {
                    return Err(Error::DimensionMismatch {
                        context: "channel set: S/T shapes",
                    });
                }
                if !t.is_finite() || !s.is_finite() {
                    return Err(Error::NonFinite { context: "channel set" });
                }
            }
            if !h.is_finite() {
                return Err(Error::NonFinite { context: "channel set" });
            }
        }
        Ok(())
    }

    /// `H_i(B) = H̄_i + Σ_k T_{i,k} diag(b_k) S_k`.
    pub fn composite(&self, i: usize, beams: &[Vec<C64>]) -> Result<CMat> {
        if beams.len() != self.n_tiles() {
            return Err(Error::DimensionMismatch {
                context: "composite channel: number of beams",
            });
        }
        let mut h = self.direct[i].clone();
        for ((t, s), b) in self.irs_ue[i].iter().zip(self.bs_irs.iter()).zip(beams) {
            if b.len() != s.rows() {
                return Err(Error::DimensionMismatch {
                    context: "composite channel: beam length",
                });
            }
            h += &t.mul_diag(b).matmul(s);
        }
        Ok(h)
    }

    pub fn composite_all(&self, beams: &[Vec<C64>]) -> Result<Vec<CMat>> {
        (0..self.n_users()).map(|i| self.composite(i, beams)).collect()
    }
}
