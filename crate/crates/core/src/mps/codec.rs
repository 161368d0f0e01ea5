//! Binary container for [`TemporalMps`].
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "TIMMPS01"
//! sites      u64
//! norm_log   f64
//! center     i64      (-1 when not canonical)
//! shapes     sites × 3 × u64   (left, phys, right)
//! amplitudes per site, row-major, (re f64, im f64) pairs
//! ```

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use super::TemporalMps;
use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

const MAGIC: &[u8; 8] = b"TIMMPS01";
const MAX_SITES: u64 = 1 << 20;

pub fn write_mps<W: Write>(mut w: W, psi: &TemporalMps) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(psi.len() as u64).to_le_bytes())?;
    w.write_all(&psi.norm_log().to_le_bytes())?;
    let center = psi.center().map_or(-1i64, |c| c as i64);
    w.write_all(&center.to_le_bytes())?;
    for s in psi.sites() {
        for &d in s.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
    }
    for s in psi.sites() {
        for z in s.data() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

pub fn read_mps<R: Read>(mut r: R) -> Result<TemporalMps> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an MPS container".into()));
    }
    let t = read_u64(&mut r)?;
    if t == 0 || t > MAX_SITES {
        return Err(Error::Format(format!("implausible site count {t}")));
    }
    let norm_log = read_f64(&mut r)?;
    let center = read_u64(&mut r)? as i64;
    let center = match center {
        -1 => None,
        c if c >= 0 && (c as u64) < t => Some(c as usize),
        c => return Err(Error::Format(format!("center {c} out of range"))),
    };
    let mut shapes = Vec::with_capacity(t as usize);
    for _ in 0..t {
        let shape = [read_u64(&mut r)?, read_u64(&mut r)?, read_u64(&mut r)?];
        if shape.iter().any(|&d| d == 0 || d > 1 << 16) {
            return Err(Error::Format(format!("implausible site shape {shape:?}")));
        }
        shapes.push(shape.map(|d| d as usize).to_vec());
    }
    let mut sites = Vec::with_capacity(shapes.len());
    for shape in shapes {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let re = read_f64(&mut r)?;
            let im = read_f64(&mut r)?;
            data.push(C64::new(re, im));
        }
        sites.push(DenseTensor::new(shape, data)?);
    }
    TemporalMps::new(sites, center, norm_log).map_err(|e| Error::Format(e.to_string()))
}
