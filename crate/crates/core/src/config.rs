//! Experiment configuration.
//!
//! [`ScenarioConfig`] is the single description of an experiment: geometry,
//! arrays, IRS tiling, channel law, constraint mode, power levels and
//! optimizer tolerances. Every struct rejects unknown keys when deserialized.
//! Key paths in validation errors use the same dotted names as the config
//! file (`irs.tile`, `placement.nominal[1]`, ...).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Master RNG seed.
    #[serde(default)]
    pub seed: u64,
    /// Carrier wavelength λ in metres.
    #[serde(default = "defaults::wavelength")]
    pub wavelength: f64,
    #[serde(default)]
    pub room: RoomConfig,
    #[serde(default)]
    pub bs: BsConfig,
    #[serde(default)]
    pub ue: UeConfig,
    pub irs: IrsConfig,
    pub placement: PlacementConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub beams: BeamConfig,
    #[serde(default)]
    pub power: PowerConfig,
    #[serde(default)]
    pub online: OnlineConfig,
    #[serde(default)]
    pub offline: OfflineConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub x: f64,
    pub y: f64,
    #[serde(default = "defaults::room_height")]
    pub z: f64,
}

impl Default for RoomConfig {
    fn default() -> Self {
        RoomConfig {
            x: 30.0,
            y: 30.0,
            z: defaults::room_height(),
        }
    }
}

/// Base-station planar array on the y–z plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsConfig {
    pub position: [f64; 3],
    /// Elements along y.
    pub ny: usize,
    /// Elements along z.
    pub nz: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "defaults::half")]
    pub spacing: f64,
    #[serde(default = "defaults::antenna_gain_db")]
    pub gain_db: f64,
}

impl Default for BsConfig {
    fn default() -> Self {
        BsConfig {
            position: [15.0, 30.0, 2.0],
            ny: 8,
            nz: 2,
            spacing: 0.5,
            gain_db: defaults::antenna_gain_db(),
        }
    }
}

/// User equipment: linear arrays along y.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    pub count: usize,
    pub antennas: usize,
    #[serde(default = "defaults::half")]
    pub spacing: f64,
    #[serde(default = "defaults::ue_height")]
    pub height: f64,
    #[serde(default = "defaults::antenna_gain_db")]
    pub gain_db: f64,
}

impl Default for UeConfig {
    fn default() -> Self {
        UeConfig {
            count: 1,
            antennas: 4,
            spacing: 0.5,
            height: defaults::ue_height(),
            gain_db: defaults::antenna_gain_db(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    /// `x = 0`, facing +x.
    X0,
    /// `x = room.x`, facing −x.
    X1,
    /// `y = 0`, facing +y.
    Y0,
    /// `y = room.y`, facing −y.
    Y1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsSurface {
    pub wall: Wall,
    /// `[along-wall coordinate, height]` of the surface centre, metres.
    pub center: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsConfig {
    /// Number of deployed surfaces; the first `count` entries of `surfaces`
    /// are used.
    pub count: usize,
    /// `[rows, cols]` element grid, λ/2 spacing. Per surface, or the total
    /// across all surfaces when `constant_total_area` is set.
    pub grid: [usize; 2],
    /// `[rows, cols]` of one tile; every tile is optimized with its own beam.
    pub tile: [usize; 2],
    #[serde(default)]
    pub constant_total_area: bool,
    /// Unit-cell pattern exponent q.
    #[serde(default = "defaults::cell_q")]
    pub q: f64,
    /// Unit-cell area in units of λ².
    #[serde(default = "defaults::cell_area")]
    pub cell_area: f64,
    pub surfaces: Vec<IrsSurface>,
}

/// How much is known about where the users are.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlacementLaw {
    /// Uniform over the service area.
    #[serde(rename = "UD")]
    Uniform,
    /// Uniform over a disk around each nominal position.
    #[serde(rename = "UD-1m")]
    Disk,
    /// Exactly the nominal positions.
    #[serde(rename = "UD-0m")]
    Exact,
}

impl PlacementLaw {
    pub fn name(self) -> &'static str {
        match self {
            PlacementLaw::Uniform => "UD",
            PlacementLaw::Disk => "UD-1m",
            PlacementLaw::Exact => "UD-0m",
        }
    }
}

impl FromStr for PlacementLaw {
    type Err = String;
    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s {
            "UD" => Ok(PlacementLaw::Uniform),
            "UD-1m" => Ok(PlacementLaw::Disk),
            "UD-0m" => Ok(PlacementLaw::Exact),
            _ => Err(format!("unknown placement law `{s}` (expected UD, UD-1m or UD-0m)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceArea {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementConfig {
    pub law: PlacementLaw,
    pub area: ServiceArea,
    /// Nominal `[x, y]` per UE, at `ue.height`. Required for UD-1m and UD-0m.
    #[serde(default)]
    pub nominal: Vec<[f64; 2]>,
    #[serde(default = "defaults::disk_diameter")]
    pub disk_diameter: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    /// Indoor office.
    #[serde(rename = "IO")]
    IndoorOffice,
    /// Shopping mall.
    #[serde(rename = "SM")]
    ShoppingMall,
}

impl Profile {
    /// NLOS path-loss exponent.
    pub fn exponent(self) -> f64 {
        match self {
            Profile::IndoorOffice => 3.83,
            Profile::ShoppingMall => 3.21,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::IndoorOffice => "IO",
            Profile::ShoppingMall => "SM",
        }
    }
}

impl FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s {
            "IO" => Ok(Profile::IndoorOffice),
            "SM" => Ok(Profile::ShoppingMall),
            _ => Err(format!("unknown channel profile `{s}` (expected IO or SM)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "defaults::profile")]
    pub profile: Profile,
    /// Path loss at 1 m in dB; free-space at λ when absent.
    #[serde(default)]
    pub pl0_db: Option<f64>,
    #[serde(default = "defaults::clusters")]
    pub clusters: usize,
    #[serde(default = "defaults::paths")]
    pub paths: usize,
    #[serde(default = "defaults::half")]
    pub eccentricity: f64,
    #[serde(default = "defaults::angle_spread_deg")]
    pub angle_spread_deg: f64,
    /// LOS indicator of the direct BS–UE link.
    #[serde(default)]
    pub los: bool,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            profile: defaults::profile(),
            pl0_db: None,
            clusters: defaults::clusters(),
            paths: defaults::paths(),
            eccentricity: 0.5,
            angle_spread_deg: defaults::angle_spread_deg(),
            los: false,
        }
    }
}

impl ChannelConfig {
    pub fn pl0_db(&self, wavelength: f64) -> f64 {
        self.pl0_db
            .unwrap_or_else(|| 20.0 * math::log10(4.0 * core::f64::consts::PI / wavelength))
    }
}

/// Reflection-coefficient constraint of every tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Constraint {
    /// Tile power `‖b‖² ≤ ρ²`.
    Global,
    /// Unit modulus with phases on a `2^bits` grid.
    Local { bits: u32 },
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Global => write!(f, "GC"),
            Constraint::Local { bits } => write!(f, "LC({bits})"),
        }
    }
}

impl FromStr for Constraint {
    type Err = String;
    fn from_str(s: &str) -> core::result::Result<Self, String> {
        let t = s.trim();
        if t == "GC" {
            return Ok(Constraint::Global);
        }
        let inner = t
            .strip_prefix("LC(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| t.strip_prefix("LC"));
        match inner.and_then(|n| n.trim().parse::<u32>().ok()) {
            Some(bits) if (1..=16).contains(&bits) => Ok(Constraint::Local { bits }),
            _ => Err(format!(
                "invalid constraint mode `{s}` (expected GC or LC(n) with 1 <= n <= 16)"
            )),
        }
    }
}

impl TryFrom<String> for Constraint {
    type Error = String;
    fn try_from(s: String) -> core::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Constraint> for String {
    fn from(c: Constraint) -> String {
        c.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    #[serde(default = "defaults::constraint")]
    pub constraint: Constraint,
    /// GC radius ρ² per tile; defaults to the tile size P.
    #[serde(default)]
    pub gc_radius_sq: Option<f64>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            constraint: Constraint::Global,
            gc_radius_sq: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    #[serde(default = "defaults::noise_dbm")]
    pub noise_dbm: f64,
    #[serde(default)]
    pub budget_dbm: f64,
    /// Per-UE rate weights α; all ones when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            noise_dbm: defaults::noise_dbm(),
            budget_dbm: 0.0,
            weights: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineConfig {
    /// Relative objective change that stops the BCD loop.
    #[serde(default = "defaults::online_tol")]
    pub tol: f64,
    #[serde(default = "defaults::online_max_iter")]
    pub max_iter: usize,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig {
            tol: defaults::online_tol(),
            max_iter: defaults::online_max_iter(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TileUpdate {
    /// Tiles updated one after another, each seeing the others' new beams.
    Sequential,
    /// All tiles updated from the same iterate.
    Simultaneous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineConfig {
    /// Monte-Carlo samples N_s.
    #[serde(default = "defaults::samples")]
    pub samples: usize,
    /// Stopping threshold on ‖B(q+1) − B(q)‖; `1e-3·√(K·P)` when absent.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default = "defaults::offline_max_iter")]
    pub max_iter: usize,
    #[serde(default = "defaults::tile_update")]
    pub tile_update: TileUpdate,
}

impl Default for OfflineConfig {
    fn default() -> Self {
        OfflineConfig {
            samples: defaults::samples(),
            tol: None,
            max_iter: defaults::offline_max_iter(),
            tile_update: defaults::tile_update(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "defaults::realizations")]
    pub realizations: usize,
    /// Placement law of the evaluation draws; `placement.law` when absent.
    #[serde(default)]
    pub placement: Option<PlacementLaw>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            realizations: defaults::realizations(),
            placement: None,
        }
    }
}

mod defaults {
    use super::{Constraint, Profile, TileUpdate};

    pub fn wavelength() -> f64 {
        0.011
    }
    pub fn room_height() -> f64 {
        3.0
    }
    pub fn half() -> f64 {
        0.5
    }
    pub fn antenna_gain_db() -> f64 {
        3.0
    }
    pub fn ue_height() -> f64 {
        1.0
    }
    pub fn cell_q() -> f64 {
        0.57
    }
    pub fn cell_area() -> f64 {
        0.25
    }
    pub fn disk_diameter() -> f64 {
        1.0
    }
    pub fn profile() -> Profile {
        Profile::IndoorOffice
    }
    pub fn clusters() -> usize {
        5
    }
    pub fn paths() -> usize {
        10
    }
    pub fn angle_spread_deg() -> f64 {
        15.0
    }
    pub fn constraint() -> Constraint {
        Constraint::Global
    }
    pub fn noise_dbm() -> f64 {
        -97.0
    }
    pub fn online_tol() -> f64 {
        1e-6
    }
    pub fn online_max_iter() -> usize {
        500
    }
    pub fn samples() -> usize {
        1000
    }
    pub fn offline_max_iter() -> usize {
        200
    }
    pub fn tile_update() -> TileUpdate {
        TileUpdate::Sequential
    }
    pub fn realizations() -> usize {
        10_000
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be a positive finite number, got {v}")))
    }
}

fn nonzero(key: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(Error::config(key, "must be at least 1"))
    }
}

impl ScenarioConfig {
    /// Number of IRS tiles per surface, `K_t`.
    pub fn tiles_per_surface(&self) -> usize {
        let [r, c] = self.surface_grid();
        (r / self.irs.tile[0].max(1)) * (c / self.irs.tile[1].max(1))
    }

    /// Element grid of one surface, `[rows, cols]`.
    ///
    /// With `constant_total_area` the total grid is split by halving its
    /// larger side once per doubling of the surface count.
    pub fn surface_grid(&self) -> [usize; 2] {
        let [mut r, mut c] = self.irs.grid;
        if self.irs.constant_total_area && self.irs.count > 1 {
            let mut n = self.irs.count;
            while n > 1 {
                if c >= r {
                    c /= 2;
                } else {
                    r /= 2;
                }
                n /= 2;
            }
        }
        [r, c]
    }

    /// Elements per tile, `P`.
    pub fn tile_size(&self) -> usize {
        self.irs.tile[0] * self.irs.tile[1]
    }

    /// Total number of tiles, `K`.
    pub fn tile_count(&self) -> usize {
        self.irs.count * self.tiles_per_surface()
    }

    pub fn gc_radius_sq(&self) -> f64 {
        self.beams.gc_radius_sq.unwrap_or(self.tile_size() as f64)
    }

    pub fn noise_power(&self) -> f64 {
        math::dbm_to_mw(self.power.noise_dbm)
    }

    pub fn power_budgets(&self) -> Vec<f64> {
        vec![math::dbm_to_mw(self.power.budget_dbm); self.ue.count]
    }

    pub fn weights(&self) -> Vec<f64> {
        match &self.power.weights {
            Some(w) => w.clone(),
            None => vec![1.0; self.ue.count],
        }
    }

    pub fn offline_tol(&self) -> f64 {
        self.offline
            .tol
            .unwrap_or_else(|| 1e-3 * math::sqrt((self.tile_count() * self.tile_size()) as f64))
    }

    pub fn evaluation_law(&self) -> PlacementLaw {
        self.evaluation.placement.unwrap_or(self.placement.law)
    }

    /// Checks every field; errors name the offending key path.
    pub fn validate(&self) -> Result<()> {
        positive("wavelength", self.wavelength)?;
        positive("room.x", self.room.x)?;
        positive("room.y", self.room.y)?;
        positive("room.z", self.room.z)?;

        nonzero("bs.ny", self.bs.ny)?;
        nonzero("bs.nz", self.bs.nz)?;
        positive("bs.spacing", self.bs.spacing)?;
        let [bx, by, bz] = self.bs.position;
        if !(self.inside_room(bx, by, bz)) {
            return Err(Error::config("bs.position", "outside the room"));
        }
        if !self.bs.gain_db.is_finite() {
            return Err(Error::config("bs.gain_db", "must be finite"));
        }

        nonzero("ue.count", self.ue.count)?;
        nonzero("ue.antennas", self.ue.antennas)?;
        positive("ue.spacing", self.ue.spacing)?;
        if !(self.ue.height >= 0.0 && self.ue.height <= self.room.z) {
            return Err(Error::config("ue.height", "outside the room"));
        }
        if !self.ue.gain_db.is_finite() {
            return Err(Error::config("ue.gain_db", "must be finite"));
        }

        self.validate_irs()?;
        self.validate_placement()?;

        let ch = &self.channel;
        if !(ch.eccentricity > 0.0 && ch.eccentricity < 1.0) {
            return Err(Error::config("channel.eccentricity", "must lie in (0, 1)"));
        }
        nonzero("channel.clusters", ch.clusters)?;
        nonzero("channel.paths", ch.paths)?;
        if !(ch.angle_spread_deg > 0.0 && ch.angle_spread_deg < 180.0) {
            return Err(Error::config("channel.angle_spread_deg", "must lie in (0, 180)"));
        }
        if let Some(pl0) = ch.pl0_db {
            if !pl0.is_finite() {
                return Err(Error::config("channel.pl0_db", "must be finite"));
            }
        }

        if let Some(r) = self.beams.gc_radius_sq {
            positive("beams.gc_radius_sq", r)?;
        }

        if !self.power.noise_dbm.is_finite() {
            return Err(Error::config("power.noise_dbm", "must be finite"));
        }
        if !self.power.budget_dbm.is_finite() {
            return Err(Error::config("power.budget_dbm", "must be finite"));
        }
        if let Some(w) = &self.power.weights {
            if w.len() != self.ue.count {
                return Err(Error::config(
                    "power.weights",
                    format!("expected {} weights, got {}", self.ue.count, w.len()),
                ));
            }
            if w.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
                return Err(Error::config("power.weights", "weights must be positive"));
            }
        }

        positive("online.tol", self.online.tol)?;
        nonzero("online.max_iter", self.online.max_iter)?;
        nonzero("offline.samples", self.offline.samples)?;
        nonzero("offline.max_iter", self.offline.max_iter)?;
        if let Some(t) = self.offline.tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config("offline.tol", "must be non-negative"));
            }
        }
        nonzero("evaluation.realizations", self.evaluation.realizations)?;
        if self.evaluation_law() != PlacementLaw::Uniform && self.placement.nominal.len() < self.ue.count {
            return Err(Error::config(
                "evaluation.placement",
                "nominal positions are required for this placement law",
            ));
        }
        Ok(())
    }

    fn inside_room(&self, x: f64, y: f64, z: f64) -> bool {
        (0.0..=self.room.x).contains(&x) && (0.0..=self.room.y).contains(&y) && (0.0..=self.room.z).contains(&z)
    }

    fn validate_irs(&self) -> Result<()> {
        let irs = &self.irs;
        if irs.count > irs.surfaces.len() {
            return Err(Error::config(
                "irs.count",
                format!("{} surfaces requested but only {} listed", irs.count, irs.surfaces.len()),
            ));
        }
        nonzero("irs.grid[0]", irs.grid[0])?;
        nonzero("irs.grid[1]", irs.grid[1])?;
        nonzero("irs.tile[0]", irs.tile[0])?;
        nonzero("irs.tile[1]", irs.tile[1])?;
        positive("irs.q", irs.q)?;
        positive("irs.cell_area", irs.cell_area)?;
        if irs.constant_total_area && irs.count > 1 {
            if !irs.count.is_power_of_two() {
                return Err(Error::config(
                    "irs.count",
                    "constant total area requires a power-of-two surface count",
                ));
            }
            let total: usize = irs.grid[0] * irs.grid[1];
            if total % irs.count != 0 {
                return Err(Error::config("irs.grid", "total grid cannot be split evenly"));
            }
        }
        if irs.count == 0 {
            return Ok(());
        }
        let [r, c] = self.surface_grid();
        if r == 0 || c == 0 || r % irs.tile[0] != 0 || c % irs.tile[1] != 0 {
            return Err(Error::config(
                "irs.tile",
                format!(
                    "surface grid {}x{} is not an exact multiple of tile {}x{}",
                    r, c, irs.tile[0], irs.tile[1]
                ),
            ));
        }
        let half_w = (c as f64 - 1.0) * 0.25 * self.wavelength;
        let half_h = (r as f64 - 1.0) * 0.25 * self.wavelength;
        for (n, s) in irs.surfaces.iter().take(irs.count).enumerate() {
            let along_max = match s.wall {
                Wall::X0 | Wall::X1 => self.room.y,
                Wall::Y0 | Wall::Y1 => self.room.x,
            };
            let [a, h] = s.center;
            if !(a - half_w >= 0.0 && a + half_w <= along_max && h - half_h >= 0.0 && h + half_h <= self.room.z)
            {
                return Err(Error::config(
                    format!("irs.surfaces[{n}].center"),
                    "surface does not fit on its wall",
                ));
            }
        }
        Ok(())
    }

    fn validate_placement(&self) -> Result<()> {
        let p = &self.placement;
        let [x0, x1] = p.area.x;
        let [y0, y1] = p.area.y;
        if !(x0 < x1 && y0 < y1 && x0 >= 0.0 && y0 >= 0.0 && x1 <= self.room.x && y1 <= self.room.y) {
            return Err(Error::config("placement.area", "must be a non-empty rectangle inside the room"));
        }
        positive("placement.disk_diameter", p.disk_diameter)?;
        if p.law != PlacementLaw::Uniform && p.nominal.len() < self.ue.count {
            return Err(Error::config(
                "placement.nominal",
                format!("{} nominal positions required, {} given", self.ue.count, p.nominal.len()),
            ));
        }
        for (n, &[x, y]) in p.nominal.iter().enumerate() {
            if !self.inside_room(x, y, self.ue.height) {
                return Err(Error::config(format!("placement.nominal[{n}]"), "outside the room"));
            }
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraint_parsing() {
        assert_eq!("GC".parse::<Constraint>().unwrap(), Constraint::Global);
        assert_eq!("LC(3)".parse::<Constraint>().unwrap(), Constraint::Local { bits: 3 });
        assert_eq!("LC2".parse::<Constraint>().unwrap(), Constraint::Local { bits: 2 });
        assert!("LC(0)".parse::<Constraint>().is_err());
        assert!("XC".parse::<Constraint>().is_err());
    }

    #[test]
    fn fixture_is_valid() {
        let cfg = fixtures::desk();
        cfg.validate().unwrap();
        assert_eq!(cfg.tile_count(), 4);
        assert_eq!(cfg.tile_size(), 16);
    }

    #[test]
    fn constant_area_halves_grids() {
        let mut cfg = fixtures::desk();
        cfg.irs.constant_total_area = true;
        cfg.irs.grid = [4, 16];
        cfg.irs.count = 1;
        assert_eq!(cfg.surface_grid(), [4, 16]);
        cfg.irs.count = 2;
        assert_eq!(cfg.surface_grid(), [4, 8]);
        cfg.irs.surfaces.push(cfg.irs.surfaces[0].clone());
        cfg.irs.surfaces.push(cfg.irs.surfaces[1].clone());
        cfg.irs.count = 4;
        assert_eq!(cfg.surface_grid(), [4, 4]);
        cfg.validate().unwrap();
        assert_eq!(cfg.tile_count() * cfg.tile_size(), 64);
    }

    #[test]
    fn validation_names_keys() {
        let mut cfg = fixtures::desk();
        cfg.irs.tile = [3, 4];
        match cfg.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "irs.tile"),
            other => panic!("{other:?}"),
        }
        let mut cfg = fixtures::desk();
        cfg.placement.nominal[1] = [30.0, 1.0];
        match cfg.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "placement.nominal[1]"),
            other => panic!("{other:?}"),
        }
        let mut cfg = fixtures::desk();
        cfg.channel.eccentricity = 1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "channel.eccentricity"));
    }
}
