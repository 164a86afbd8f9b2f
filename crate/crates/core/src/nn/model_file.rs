//! `DLNN` model files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "DLNN" | version u32 = 1 | layer count u32 | layer sizes u32 × count
//! | parameter count u64 | parameters f64 × count
//! ```
//!
//! Parameters are in the flat order used by [`ParamVector`].

use std::io::{Read, Write};
use std::path::Path;

use super::{NetworkShape, ParamVector};
use crate::data::io_util::{read_exact_or, write_atomic};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"DLNN";
const VERSION: u32 = 1;

pub fn write_model(path: impl AsRef<Path>, params: &ParamVector) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(32 + 8 * params.len());
    encode(&mut buf, params).map_err(|e| Error::io(path, e))?;
    write_atomic(path, &buf)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ParamVector> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&mut bytes.as_slice(), path)
}

fn encode(w: &mut impl Write, params: &ParamVector) -> std::io::Result<()> {
    let sizes = params.shape().layer_sizes();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for &n in sizes {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn decode(r: &mut impl Read, path: &Path) -> Result<ParamVector> {
    let mut magic = [0u8; 4];
    read_exact_or(r, &mut magic, path)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {magic:?}, expected \"DLNN\"",
            path.display()
        )));
    }
    let mut word = [0u8; 4];
    read_exact_or(r, &mut word, path)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported model version {version}",
            path.display()
        )));
    }
    read_exact_or(r, &mut word, path)?;
    let layer_count = u32::from_le_bytes(word) as usize;
    if !(2..=64).contains(&layer_count) {
        return Err(Error::Format(format!(
            "{}: implausible layer count {layer_count}",
            path.display()
        )));
    }
    let mut sizes = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        read_exact_or(r, &mut word, path)?;
        sizes.push(u32::from_le_bytes(word) as usize);
    }
    let shape = NetworkShape::new(sizes).map_err(|e| Error::Format(e.to_string()))?;
    let mut long = [0u8; 8];
    read_exact_or(r, &mut long, path)?;
    let count = u64::from_le_bytes(long) as usize;
    if count != shape.param_count() {
        return Err(Error::Format(format!(
            "{}: header declares {count} parameters but shape {shape} needs {}",
            path.display(),
            shape.param_count()
        )));
    }
    let mut theta = Vec::with_capacity(count);
    for _ in 0..count {
        read_exact_or(r, &mut long, path)?;
        theta.push(f64::from_le_bytes(long));
    }
    ParamVector::new(shape, theta)
}
