//! Room geometry, antenna layouts and random scenario draws.
//!
//! A [`Scenario`] holds the validated configuration together with the fixed
//! antenna layout (BS array and IRS tiles). Random draws ([`ScenarioSample`])
//! are pure functions of `(seed, domain, index)`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
use core::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use crate::config::{ChannelConfig, PlacementLaw, ScenarioConfig, Wall};
use crate::error::{Error, Result};
use crate::geometry::{Point3, RoomBox};
use crate::math;
use crate::numerics::C64;
use crate::rng::{self, complex_normal, substream, uniform};

const MAX_REJECTIONS: usize = 4096;

static CLUSTERS_OUTSIDE_ROOM: AtomicU64 = AtomicU64::new(0);

/// Clusters placed outside the room because no point of their ellipse lies
/// inside it (far links in small rooms). Process-wide counter.
pub fn clusters_outside_room() -> u64 {
    CLUSTERS_OUTSIDE_ROOM.load(Ordering::Relaxed)
}

/// One IRS tile: a contiguous rectangle of elements on a single surface.
#[derive(Clone, Debug, PartialEq)]
pub struct Tile {
    pub surface: usize,
    /// Unit normal of the wall, pointing into the room.
    pub normal: Point3,
    /// Element positions, row-major inside the tile.
    pub elements: Vec<Point3>,
}

/// Fixed antenna geometry of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub room: RoomBox,
    /// BS element positions, row-major over `(z, y)`.
    pub bs: Vec<Point3>,
    pub bs_center: Point3,
    /// All tiles, surface-major then row-major over the surface.
    pub tiles: Vec<Tile>,
}

/// Scatterer cluster of one BS–UE link.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub center: Point3,
    pub paths: Vec<Point3>,
    /// Fading coefficient per path, CN(0, 1).
    pub gains: Vec<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkGeometry {
    pub clusters: Vec<Cluster>,
    /// LOS indicator `X_d`.
    pub los: bool,
}

/// One random draw of user positions and scatterers.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSample {
    pub domain: u64,
    pub index: u64,
    pub ue_positions: Vec<Point3>,
    /// Per UE, per antenna element.
    pub ue_elements: Vec<Vec<Point3>>,
    /// Per BS–UE link.
    pub links: Vec<LinkGeometry>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub layout: Layout,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let layout = build_antenna_positions(&config)?;
        Ok(Scenario { config, layout })
    }

    pub fn n_users(&self) -> usize {
        self.config.ue.count
    }

    pub fn n_tiles(&self) -> usize {
        self.layout.tiles.len()
    }

    pub fn sample(&self, domain: u64, index: u64) -> Result<ScenarioSample> {
        self.sample_with_law(domain, index, self.config.placement.law)
    }

    /// Draw with an explicit placement law, e.g. the evaluation law.
    pub fn sample_with_law(&self, domain: u64, index: u64, law: PlacementLaw) -> Result<ScenarioSample> {
        let cfg = &self.config;
        let ue_positions = sample_ue_positions(cfg, law, domain, index)?;
        let ue_elements = ue_positions
            .iter()
            .map(|&c| ue_element_positions(cfg, c))
            .collect();
        let t = self.layout.bs_center;
        let mut links = Vec::with_capacity(ue_positions.len());
        for (i, &r) in ue_positions.iter().enumerate() {
            let mut rng = rng::stream_rng(cfg.seed, domain, index, substream::LINK_BASE + i as u64);
            let clusters = sample_clusters(t, r, &cfg.channel, &self.layout.room, &mut rng)?;
            links.push(LinkGeometry {
                clusters,
                los: cfg.channel.los,
            });
        }
        Ok(ScenarioSample {
            domain,
            index,
            ue_positions,
            ue_elements,
            links,
        })
    }
}

fn room_of(cfg: &ScenarioConfig) -> RoomBox {
    RoomBox {
        x: cfg.room.x,
        y: cfg.room.y,
        z: cfg.room.z,
    }
}

/// UE antenna-centre positions for draw `(domain, index)` under `law`.
pub fn sample_ue_positions(
    cfg: &ScenarioConfig,
    law: PlacementLaw,
    domain: u64,
    index: u64,
) -> Result<Vec<Point3>> {
    let n = cfg.ue.count;
    let h = cfg.ue.height;
    let room = room_of(cfg);
    let nominal = |i: usize| -> Result<Point3> {
        let [x, y] = *cfg.placement.nominal.get(i).ok_or_else(|| {
            Error::config("placement.nominal", "missing nominal position")
        })?;
        let p = Point3::new(x, y, h);
        if !room.contains(p) {
            return Err(Error::config(
                alloc::format!("placement.nominal[{i}]"),
                "outside the room",
            ));
        }
        Ok(p)
    };
    let mut rng = rng::stream_rng(cfg.seed, domain, index, substream::UE_POSITIONS);
    let mut out = Vec::with_capacity(n);
    match law {
        PlacementLaw::Exact => {
            for i in 0..n {
                out.push(nominal(i)?);
            }
        }
        PlacementLaw::Uniform => {
            let [x0, x1] = cfg.placement.area.x;
            let [y0, y1] = cfg.placement.area.y;
            for _ in 0..n {
                let x = x0 + (x1 - x0) * uniform(&mut rng);
                let y = y0 + (y1 - y0) * uniform(&mut rng);
                out.push(Point3::new(x, y, h));
            }
        }
        PlacementLaw::Disk => {
            let radius = 0.5 * cfg.placement.disk_diameter;
            for i in 0..n {
                let c = nominal(i)?;
                let p = sample_in_disk(c, radius, &room, &mut rng).ok_or_else(|| {
                    Error::config(
                        alloc::format!("placement.nominal[{i}]"),
                        "placement disk does not intersect the room",
                    )
                })?;
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Uniform point in the horizontal disk around `c`, rejected until inside
/// the room.
fn sample_in_disk<R: Rng + ?Sized>(c: Point3, radius: f64, room: &RoomBox, rng: &mut R) -> Option<Point3> {
    for _ in 0..MAX_REJECTIONS {
        let p = disk_point(c, radius, rng);
        if room.contains(p) {
            return Some(p);
        }
    }
    None
}

fn disk_point<R: Rng + ?Sized>(c: Point3, radius: f64, rng: &mut R) -> Point3 {
    let r = radius * math::sqrt(uniform(rng));
    let phi = 2.0 * PI * uniform(rng);
    Point3::new(c.x + r * math::cos(phi), c.y + r * math::sin(phi), c.z)
}

/// UE elements along y, centred on `center`.
pub fn ue_element_positions(cfg: &ScenarioConfig, center: Point3) -> Vec<Point3> {
    let l = cfg.ue.antennas;
    let d = cfg.ue.spacing * cfg.wavelength;
    (0..l)
        .map(|n| {
            let off = (n as f64 - (l as f64 - 1.0) / 2.0) * d;
            Point3::new(center.x, center.y + off, center.z)
        })
        .collect()
}

fn wall_frame(wall: Wall, room: &RoomBox) -> (Point3, fn(f64, f64) -> (f64, f64), f64) {
    // (normal, (along) -> (x, y), wall coordinate)
    match wall {
        Wall::X0 => (Point3::new(1.0, 0.0, 0.0), |w, a| (w, a), 0.0),
        Wall::X1 => (Point3::new(-1.0, 0.0, 0.0), |w, a| (w, a), room.x),
        Wall::Y0 => (Point3::new(0.0, 1.0, 0.0), |w, a| (a, w), 0.0),
        Wall::Y1 => (Point3::new(0.0, -1.0, 0.0), |w, a| (a, w), room.y),
    }
}

/// BS array and IRS tiles for a configuration.
pub fn build_antenna_positions(cfg: &ScenarioConfig) -> Result<Layout> {
    let room = room_of(cfg);
    let bs_center = Point3::from_array(cfg.bs.position);
    let d = cfg.bs.spacing * cfg.wavelength;
    let (ny, nz) = (cfg.bs.ny, cfg.bs.nz);
    let mut bs = Vec::with_capacity(ny * nz);
    for iz in 0..nz {
        for iy in 0..ny {
            let oy = (iy as f64 - (ny as f64 - 1.0) / 2.0) * d;
            let oz = (iz as f64 - (nz as f64 - 1.0) / 2.0) * d;
            bs.push(Point3::new(bs_center.x, bs_center.y + oy, bs_center.z + oz));
        }
    }

    let [rows, cols] = cfg.surface_grid();
    let [tr, tc] = cfg.irs.tile;
    if cfg.irs.count > 0 && (rows % tr != 0 || cols % tc != 0) {
        return Err(Error::config("irs.tile", "tile partition is not exact"));
    }
    let pitch = 0.5 * cfg.wavelength;
    let mut tiles = Vec::with_capacity(cfg.tile_count());
    for (s, surf) in cfg.irs.surfaces.iter().take(cfg.irs.count).enumerate() {
        let (normal, place, w) = wall_frame(surf.wall, &room);
        let [ca, ch] = surf.center;
        let element = |r: usize, c: usize| {
            let a = ca + (c as f64 - (cols as f64 - 1.0) / 2.0) * pitch;
            let z = ch + (r as f64 - (rows as f64 - 1.0) / 2.0) * pitch;
            let (x, y) = place(w, a);
            Point3::new(x, y, z)
        };
        for kr in 0..rows / tr {
            for kc in 0..cols / tc {
                let mut elements = Vec::with_capacity(tr * tc);
                for r in 0..tr {
                    for c in 0..tc {
                        elements.push(element(kr * tr + r, kc * tc + c));
                    }
                }
                tiles.push(Tile {
                    surface: s,
                    normal,
                    elements,
                });
            }
        }
    }
    Ok(Layout {
        room,
        bs,
        bs_center,
        tiles,
    })
}

/// Distance from the ellipse centre to the ellipse in the horizontal
/// direction `e`, for the ellipsoid of revolution with foci `t`, `r` and
/// eccentricity `ecc`.
fn ellipse_radius(t: Point3, r: Point3, ecc: f64, e: Point3) -> f64 {
    let dist = t.distance(r);
    let a = dist / (2.0 * ecc);
    let b2 = a * a - 0.25 * dist * dist;
    let axis = (r - t).normalized();
    let c = e.dot(axis);
    1.0 / math::sqrt(c * c / (a * a) + (1.0 - c * c) / b2)
}

/// Scatterer clusters of the link from `t` to `r`.
///
/// Cluster centres lie on the intersection of the ellipsoid with foci `t`,
/// `r` and the horizontal plane at mid height, at uniform angles on the
/// receiver-facing half, rejected until inside the room (falling back to the
/// whole ellipse, and to an out-of-room point counted by
/// [`clusters_outside_room`] when no part of the ellipse is inside). Path
/// points are uniform in a horizontal disk whose angular size seen from `r`
/// is the configured spread.
pub fn sample_clusters<R: Rng + ?Sized>(
    t: Point3,
    r: Point3,
    ch: &ChannelConfig,
    room: &RoomBox,
    rng: &mut R,
) -> Result<Vec<Cluster>> {
    let ecc = ch.eccentricity;
    if !(ecc > 0.0 && ecc < 1.0) {
        return Err(Error::config("channel.eccentricity", "must lie in (0, 1)"));
    }
    if t.distance(r) == 0.0 {
        return Err(Error::ZeroDistance {
            context: "cluster ellipse foci",
        });
    }
    let mid = (t + r) * 0.5;
    let dh = (r - t).horizontal();
    // heading of the t→r direction; vertical links have no preferred side
    let heading = if dh.norm() > 0.0 { math::atan2(dh.y, dh.x) } else { 0.0 };
    let half_spread = 0.5 * ch.angle_spread_deg.to_radians();

    let mut clusters = Vec::with_capacity(ch.clusters);
    for _ in 0..ch.clusters {
        let (center, inside) = sample_on_ellipse(t, r, mid, heading, ecc, room, rng);
        let radius = center.horizontal().distance(r.horizontal()) * math::sin(half_spread);
        let mut paths = Vec::with_capacity(ch.paths);
        for _ in 0..ch.paths {
            let p = if inside {
                sample_in_disk(center, radius, room, rng).ok_or_else(|| {
                    Error::config("channel.angle_spread_deg", "path disk does not fit in the room")
                })?
            } else {
                disk_point(center, radius, rng)
            };
            paths.push(p);
        }
        let gains = (0..ch.paths).map(|_| complex_normal(rng)).collect();
        clusters.push(Cluster {
            center,
            paths,
            gains,
        });
    }
    Ok(clusters)
}

fn sample_on_ellipse<R: Rng + ?Sized>(
    t: Point3,
    r: Point3,
    mid: Point3,
    heading: f64,
    ecc: f64,
    room: &RoomBox,
    rng: &mut R,
) -> (Point3, bool) {
    let point = |phi: f64| {
        let e = Point3::new(math::cos(phi), math::sin(phi), 0.0);
        mid + e * ellipse_radius(t, r, ecc, e)
    };
    let facing = |rng: &mut R| point(heading - FRAC_PI_2 + PI * uniform(rng));
    for _ in 0..MAX_REJECTIONS {
        let p = facing(rng);
        if room.contains(p) {
            return (p, true);
        }
    }
    for _ in 0..MAX_REJECTIONS {
        let p = point(2.0 * PI * uniform(rng));
        if room.contains(p) {
            return (p, true);
        }
    }
    CLUSTERS_OUTSIDE_ROOM.fetch_add(1, Ordering::Relaxed);
    (facing(rng), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::fixtures::desk;
    use crate::rng::domain;
    use alloc::vec;
    use rand::SeedableRng;

    #[test]
    fn exact_law_returns_nominal() {
        let mut cfg = desk();
        cfg.room.x = 15.0;
        cfg.room.y = 30.0;
        cfg.ue.count = 1;
        cfg.placement.nominal = vec![[7.5, 15.0]];
        let p = sample_ue_positions(&cfg, PlacementLaw::Exact, domain::TRAIN, 3).unwrap();
        assert_eq!(p, vec![Point3::new(7.5, 15.0, 1.0)]);
    }

    #[test]
    fn nominal_outside_room_is_config_error() {
        let mut cfg = desk();
        cfg.placement.nominal[0] = [-1.0, 2.0];
        let err = sample_ue_positions(&cfg, PlacementLaw::Exact, domain::TRAIN, 0).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "placement.nominal[0]"));
    }

    #[test]
    fn disk_law_stays_within_radius() {
        let cfg = desk();
        for n in 0..2000 {
            let p = sample_ue_positions(&cfg, PlacementLaw::Disk, domain::TRAIN, n).unwrap();
            for (i, q) in p.iter().enumerate() {
                let [x, y] = cfg.placement.nominal[i];
                assert!(q.distance(Point3::new(x, y, 1.0)) <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn uniform_law_mean_is_area_centroid() {
        let mut cfg = desk();
        cfg.ue.count = 1;
        let (mut sx, mut sy) = (0.0, 0.0);
        let n = 100_000;
        for idx in 0..n {
            let p = sample_ue_positions(&cfg, PlacementLaw::Uniform, domain::TEST, idx).unwrap()[0];
            sx += p.x;
            sy += p.y;
        }
        let cx = 0.5 * (cfg.placement.area.x[0] + cfg.placement.area.x[1]);
        let cy = 0.5 * (cfg.placement.area.y[0] + cfg.placement.area.y[1]);
        assert!((sx / n as f64 - cx).abs() < 0.01 * cx);
        assert!((sy / n as f64 - cy).abs() < 0.01 * cy);
    }

    #[test]
    fn ue_elements_symmetric() {
        let cfg = desk();
        let c = Point3::new(2.0, 3.0, 1.0);
        let e = ue_element_positions(&cfg, c);
        let q = cfg.wavelength / 4.0;
        assert!((e[0].y - (3.0 - q)).abs() < 1e-15);
        assert!((e[1].y - (3.0 + q)).abs() < 1e-15);
        assert_eq!(e[0].x, 2.0);
    }

    #[test]
    fn bs_grid_is_planar_and_distinct() {
        let mut cfg = desk();
        cfg.bs.ny = 8;
        cfg.bs.nz = 2;
        let layout = build_antenna_positions(&cfg).unwrap();
        assert_eq!(layout.bs.len(), 16);
        for (i, a) in layout.bs.iter().enumerate() {
            assert_eq!(a.x, cfg.bs.position[0]);
            for b in &layout.bs[i + 1..] {
                assert!(a.distance(*b) > 1e-6);
            }
        }
    }

    #[test]
    fn irs_tiles_partition_the_grid() {
        let mut cfg = desk();
        cfg.room = crate::config::RoomConfig { x: 15.0, y: 30.0, z: 3.0 };
        cfg.irs.count = 1;
        cfg.irs.grid = [40, 80];
        cfg.irs.tile = [5, 10];
        cfg.irs.surfaces[0].center = [15.0, 1.5];
        cfg.validate().unwrap();
        let layout = build_antenna_positions(&cfg).unwrap();
        assert_eq!(layout.tiles.len(), 64);
        let pitch = cfg.wavelength / 2.0;
        let mut seen = vec![false; 40 * 80];
        for t in &layout.tiles {
            assert_eq!(t.elements.len(), 50);
            for e in &t.elements {
                assert_eq!(e.x, 0.0);
                let c = ((e.y - 15.0) / pitch + 39.5).round() as usize;
                let r = ((e.z - 1.5) / pitch + 19.5).round() as usize;
                assert!(!seen[r * 80 + c], "element covered twice");
                seen[r * 80 + c] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn cluster_centres_on_ellipse() {
        let ch = ChannelConfig::default();
        let room = RoomBox { x: 30.0, y: 30.0, z: 3.0 };
        let t = Point3::new(15.0, 29.0, 2.0);
        let r = Point3::new(15.0, 19.0, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            for c in sample_clusters(t, r, &ch, &room, &mut rng).unwrap() {
                let s = c.center.distance(t) + c.center.distance(r);
                assert!((s - t.distance(r) / 0.5).abs() < 1e-9);
                assert!((c.center.z - 1.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ellipse_sum_matches_tabulated_value() {
        let ch = ChannelConfig::default();
        let room = RoomBox { x: 40.0, y: 40.0, z: 3.0 };
        let t = Point3::new(10.0, 20.0, 1.0);
        let r = Point3::new(20.0, 20.0, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let c = &sample_clusters(t, r, &ch, &room, &mut rng).unwrap()[0];
        assert!((c.center.distance(t) + c.center.distance(r) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn receive_angular_spread() {
        let ch = ChannelConfig {
            clusters: 1,
            paths: 1,
            ..ChannelConfig::default()
        };
        let room = RoomBox { x: 1e3, y: 1e3, z: 3.0 };
        let t = Point3::new(500.0, 510.0, 1.5);
        let r = Point3::new(500.0, 500.0, 1.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut widest: f64 = 0.0;
        for _ in 0..10_000 {
            let c = &sample_clusters(t, r, &ch, &room, &mut rng).unwrap()[0];
            let to_c = c.center - r;
            let to_p = c.paths[0] - r;
            let cross = to_c.x * to_p.y - to_c.y * to_p.x;
            let dot = to_c.x * to_p.x + to_c.y * to_p.y;
            widest = widest.max(math::atan2(cross, dot).abs());
        }
        let spread = 2.0 * widest.to_degrees();
        assert!((spread - 15.0).abs() < 1.5, "spread {spread}");
    }

    #[test]
    fn eccentricity_out_of_range_is_rejected() {
        let ch = ChannelConfig {
            eccentricity: 1.2,
            ..ChannelConfig::default()
        };
        let room = RoomBox { x: 30.0, y: 30.0, z: 3.0 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let err = sample_clusters(Point3::new(1.0, 1.0, 1.0), Point3::new(2.0, 2.0, 1.0), &ch, &room, &mut rng);
        assert!(matches!(err, Err(Error::Config { .. })));
    }

    #[test]
    fn samples_reproducible_and_inside_room() {
        let sc = Scenario::new(desk()).unwrap();
        let a = sc.sample(domain::TRAIN, 7).unwrap();
        let b = sc.sample(domain::TRAIN, 7).unwrap();
        assert_eq!(a, b);
        let c = sc.sample(domain::TRAIN, 8).unwrap();
        assert_ne!(a.links, c.links);
        for n in 0..50 {
            let s = sc.sample(domain::EVAL, n).unwrap();
            for link in &s.links {
                for cl in &link.clusters {
                    assert!(sc.layout.room.contains(cl.center));
                    assert!(cl.paths.iter().all(|&p| sc.layout.room.contains(p)));
                }
            }
        }
    }

    #[test]
    fn fading_streams_uncorrelated_across_samples() {
        let sc = Scenario::new(desk()).unwrap();
        let mut acc = C64::new(0.0, 0.0);
        let mut count = 0usize;
        let mut idx = 0;
        while count < 40_000 {
            let a = sc.sample(domain::TRAIN, idx).unwrap();
            let b = sc.sample(domain::TRAIN, idx + 1).unwrap();
            for (la, lb) in a.links.iter().zip(&b.links) {
                for (ca, cb) in la.clusters.iter().zip(&lb.clusters) {
                    for (ga, gb) in ca.gains.iter().zip(&cb.gains) {
                        acc += ga * gb.conj();
                        count += 1;
                    }
                }
            }
            idx += 2;
        }
        assert!((acc / count as f64).norm() < 0.01);
    }
}
