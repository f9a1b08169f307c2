//! On-disk formats: beam-set JSON and the binary channel dump.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use irsopt_core::channel::ChannelSet;
use irsopt_core::config::Constraint;
use irsopt_core::irs::IrsBeamSet;
use irsopt_core::{CMat, C64};
use serde::{Deserialize, Serialize};

use crate::config::hex_digest;
use crate::error::{CliError, Result};

pub const BEAM_FORMAT_VERSION: u32 = 1;

/// Serialized [`IrsBeamSet`]; entries are `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSetFile {
    pub format_version: u32,
    /// Compatibility hash of the config the beams were optimized for.
    pub config_hash: String,
    pub seed: u64,
    pub constraint: Constraint,
    pub gc_radius_sq: f64,
    pub tiles: Vec<Vec<[f64; 2]>>,
}

impl BeamSetFile {
    pub fn new(beams: &IrsBeamSet, config_hash: String, seed: u64) -> Self {
        BeamSetFile {
            format_version: BEAM_FORMAT_VERSION,
            config_hash,
            seed,
            constraint: beams.constraint,
            gc_radius_sq: beams.gc_radius_sq,
            tiles: beams
                .beams
                .iter()
                .map(|b| b.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
    }

    pub fn to_beams(&self) -> IrsBeamSet {
        IrsBeamSet {
            beams: self
                .tiles
                .iter()
                .map(|t| t.iter().map(|&[re, im]| C64::new(re, im)).collect())
                .collect(),
            constraint: self.constraint,
            gc_radius_sq: self.gc_radius_sq,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("beam set serializes");
        out.push(b'\n');
        out
    }

    /// Hash of the serialized file.
    pub fn hash(&self) -> String {
        hex_digest(&self.to_bytes())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: BeamSetFile = serde_json::from_str(&text).map_err(|e| CliError::format(path, e))?;
        if file.format_version != BEAM_FORMAT_VERSION {
            return Err(CliError::format(
                path,
                format!("unsupported beam-set format version {}", file.format_version),
            ));
        }
        Ok(file)
    }
}

pub const CHANNEL_MAGIC: &[u8; 8] = b"IRSCHAN\0";
pub const CHANNEL_FORMAT_VERSION: u32 = 1;

/// Writes a [`ChannelSet`] as little-endian binary.
///
/// Layout: magic, version (u32), config hash and index (u64), then
/// `n_users, n_tiles, M, L, P` (u32), followed by the matrices as
/// interleaved `re, im` f64 in row-major order: direct `H̄_i`, `S_k`,
/// `T_{i,k}` (UE-major).
pub fn write_channels(w: &mut impl Write, set: &ChannelSet) -> std::io::Result<()> {
    set.check().map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e.to_string()))?;
    let (l, m) = set.direct.first().map_or((0, 0), |h| h.shape());
    let p = set.bs_irs.first().map_or(0, |s| s.rows());
    if set.bs_irs.iter().any(|s| s.rows() != p) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "channel dump needs equal tile sizes",
        ));
    }
    w.write_all(CHANNEL_MAGIC)?;
    w.write_all(&CHANNEL_FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&set.config_hash.to_le_bytes())?;
    w.write_all(&set.index.to_le_bytes())?;
    for d in [set.n_users(), set.n_tiles(), m, l, p] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    let mats = set.direct.iter().chain(set.bs_irs.iter()).chain(set.irs_ue.iter().flatten());
    for mat in mats {
        for z in mat.as_slice() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_channels(r: &mut impl Read) -> std::io::Result<ChannelSet> {
    let invalid = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHANNEL_MAGIC {
        return Err(invalid("not a channel dump"));
    }
    let version = read_u32(r)?;
    if version != CHANNEL_FORMAT_VERSION {
        return Err(invalid("unsupported channel dump version"));
    }
    let config_hash = read_u64(r)?;
    let index = read_u64(r)?;
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = read_u32(r)? as usize;
    }
    let [n, k, m, l, p] = dims;
    let mut mat = |rows: usize, cols: usize| -> std::io::Result<CMat> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(C64::new(read_f64(r)?, read_f64(r)?));
        }
        Ok(CMat::from_vec(rows, cols, data))
    };
    let direct = (0..n).map(|_| mat(l, m)).collect::<std::io::Result<Vec<_>>>()?;
    let bs_irs = (0..k).map(|_| mat(p, m)).collect::<std::io::Result<Vec<_>>>()?;
    let mut irs_ue = Vec::with_capacity(n);
    for _ in 0..n {
        irs_ue.push((0..k).map(|_| mat(l, p)).collect::<std::io::Result<Vec<_>>>()?);
    }
    let set = ChannelSet {
        index,
        config_hash,
        direct,
        bs_irs: Arc::new(bs_irs),
        irs_ue,
    };
    set.check().map_err(|e| invalid(&e.to_string()))?;
    Ok(set)
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}
