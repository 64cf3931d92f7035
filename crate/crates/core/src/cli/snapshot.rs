//! Binary snapshot of one time slice.
//!
//! Layout, all little-endian:
//!
//! | bytes | field                          |
//! |-------|--------------------------------|
//! | 5     | magic `KFIX1`                  |
//! | 4     | dimension (u32)                |
//! | 8     | velocity extent V (f64)        |
//! | 4     | velocity nodes per axis (u32)  |
//! | 8     | spatial period X (f64)         |
//! | 4     | spatial nodes per axis (u32)   |
//! | 4     | time index (u32)               |
//! | 8     | time (f64)                     |
//! | 8 * N | values (f64), row-major (x, v) |
//!
//! `N = x_nodes^dim * v_nodes^dim`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DistributionField, SpatialGrid, VelocityGrid};

pub const MAGIC: &[u8; 5] = b"KFIX1";
pub const HEADER_LEN: usize = 5 + 4 + 8 + 4 + 8 + 4 + 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub velocity: VelocityGrid,
    pub space: SpatialGrid,
    pub time_index: u32,
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(f: &DistributionField, m: usize) -> Result<Self> {
        if m >= f.time_count() {
            return Err(Error::InvalidArgument(format!("time index {m} out of range")));
        }
        Ok(Snapshot {
            velocity: *f.velocity_grid(),
            space: *f.spatial_grid(),
            time_index: m as u32,
            time: f.times()[m],
            values: f.slice(m).to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.velocity.dim() as u32).to_le_bytes());
        out.extend_from_slice(&self.velocity.extent().to_le_bytes());
        out.extend_from_slice(&(self.velocity.nodes_per_axis() as u32).to_le_bytes());
        out.extend_from_slice(&self.space.period().to_le_bytes());
        out.extend_from_slice(&(self.space.nodes_per_axis() as u32).to_le_bytes());
        out.extend_from_slice(&self.time_index.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Snapshot(format!(
                "{} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if &bytes[..5] != MAGIC {
            return Err(Error::Snapshot("bad magic, expected KFIX1".into()));
        }
        let mut pos = 5;
        let mut take = |n: usize| {
            let s = &bytes[pos..pos + n];
            pos += n;
            s
        };
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
        let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());
        let dim = u32_at(take(4)) as usize;
        let extent = f64_at(take(8));
        let v_nodes = u32_at(take(4)) as usize;
        let period = f64_at(take(8));
        let x_nodes = u32_at(take(4)) as usize;
        let time_index = u32_at(take(4));
        let time = f64_at(take(8));
        let velocity = VelocityGrid::new(dim, extent, v_nodes)?;
        let space = SpatialGrid::new(dim, period, x_nodes)?;
        let count = velocity.len() * space.len();
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != 8 * count {
            return Err(Error::Snapshot(format!(
                "payload has {} bytes, header declares {count} values",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Snapshot {
            velocity,
            space,
            time_index,
            time,
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
