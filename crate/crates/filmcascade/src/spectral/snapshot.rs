//! Binary field snapshot format "TFLM".
//!
//! Layout: magic `TFLM`, u32 version = 1, u32 Nx, u32 Ny, f64 time, then the
//! five parameters delta, epsilon, R, W, alpha as f64, then row-major (x-major,
//! matching the in-memory layout data[ix*Ny+iy]) little-endian f64 arrays
//! eta[Nx], u[Nx*Ny], v[Nx*Ny], p[Nx*Ny].

use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::ScalingParams;

pub const MAGIC: &[u8; 4] = b"TFLM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub time: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub reynolds: f64,
    pub weber: f64,
    pub alpha: f64,
    pub eta: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
}

impl Snapshot {
    pub fn new(nx: usize, ny: usize, time: f64, params: &ScalingParams) -> Self {
        Snapshot {
            nx,
            ny,
            time,
            delta: params.delta,
            epsilon: params.epsilon,
            reynolds: params.reynolds,
            weber: params.weber,
            alpha: params.alpha,
            eta: vec![0.0; nx],
            u: vec![0.0; nx * ny],
            v: vec![0.0; nx * ny],
            p: vec![0.0; nx * ny],
        }
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::with_capacity(64 + 8 * (self.nx + 3 * self.nx * self.ny));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.nx as u32).to_le_bytes());
        buf.extend_from_slice(&(self.ny as u32).to_le_bytes());
        for v in [
            self.time,
            self.delta,
            self.epsilon,
            self.reynolds,
            self.weber,
            self.alpha,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for arr in [&self.eta, &self.u, &self.v, &self.p] {
            for v in arr.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(Error::Contract("snapshot truncated".into()));
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 4)? != MAGIC {
            return Err(Error::Contract("bad snapshot magic".into()));
        }
        let rd_u32 = |pos: &mut usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
        };
        let version = rd_u32(&mut pos)?;
        if version != VERSION {
            return Err(Error::Contract(format!("unsupported snapshot version {version}")));
        }
        let nx = rd_u32(&mut pos)? as usize;
        let ny = rd_u32(&mut pos)? as usize;
        let rd_f64 = |pos: &mut usize| -> Result<f64> {
            Ok(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
        };
        let time = rd_f64(&mut pos)?;
        let delta = rd_f64(&mut pos)?;
        let epsilon = rd_f64(&mut pos)?;
        let reynolds = rd_f64(&mut pos)?;
        let weber = rd_f64(&mut pos)?;
        let alpha = rd_f64(&mut pos)?;
        let rd_arr = |pos: &mut usize, n: usize| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                out.push(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()));
            }
            Ok(out)
        };
        let eta = rd_arr(&mut pos, nx)?;
        let u = rd_arr(&mut pos, nx * ny)?;
        let v = rd_arr(&mut pos, nx * ny)?;
        let p = rd_arr(&mut pos, nx * ny)?;
        if pos != bytes.len() {
            return Err(Error::Contract("trailing bytes in snapshot".into()));
        }
        Ok(Snapshot {
            nx,
            ny,
            time,
            delta,
            epsilon,
            reynolds,
            weber,
            alpha,
            eta,
            u,
            v,
            p,
        })
    }
}
