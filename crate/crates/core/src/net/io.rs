//! Binary weight files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "IMGW"  u32 version
//! u32 input_size  u32 in_channels  u32 n_levels  u32 width x n_levels
//! u32 tensor_count
//! per tensor: u16 name_len, name, u8 ndim, u32 dim x ndim
//! f32 data of every tensor, in table order
//! u32 crc32 of everything after the version
//! ```

use std::fs;
use std::path::Path;

use super::unet::{Architecture, NamedTensor, Weights};
use super::NetError;

const MAGIC: &[u8; 4] = b"IMGW";
pub const VERSION: u32 = 1;

fn describe(arch: &Architecture) -> String {
    format!("size {} channels {} widths {:?}", arch.input_size, arch.in_channels, arch.widths)
}

pub fn write_weights(weights: &Weights<f32>) -> Vec<u8> {
    let mut payload = Vec::new();
    let a = &weights.arch;
    for v in [a.input_size, a.in_channels, a.widths.len()] {
        payload.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &w in &a.widths {
        payload.extend_from_slice(&(w as u32).to_le_bytes());
    }
    payload.extend_from_slice(&(weights.tensors.len() as u32).to_le_bytes());
    for t in &weights.tensors {
        payload.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
        payload.extend_from_slice(t.name.as_bytes());
        payload.push(t.shape.len() as u8);
        for &d in &t.shape {
            payload.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for t in &weights.tensors {
        for v in &t.data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(payload.len() + 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        let end = self.pos.checked_add(n).ok_or(NetError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(NetError::Truncated)?;
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, NetError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, NetError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_weights(bytes: &[u8]) -> Result<Weights<f32>, NetError> {
    if bytes.len() < 4 {
        return Err(NetError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(NetError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(NetError::Truncated);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(NetError::Version(version));
    }
    let payload = &bytes[8..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(NetError::Checksum { stored, computed });
    }
    let mut r = Reader { buf: payload, pos: 0 };
    let input_size = r.u32()? as usize;
    let in_channels = r.u32()? as usize;
    let n_levels = r.u32()? as usize;
    if n_levels > 16 {
        return Err(NetError::Malformed(format!("{n_levels} levels")));
    }
    let widths = (0..n_levels).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
    let arch = Architecture { input_size, in_channels, widths };
    arch.validate().map_err(|e| NetError::Malformed(e.to_string()))?;
    let count = r.u32()? as usize;
    if count != 2 * arch.conv_shapes().len() {
        return Err(NetError::Malformed(format!("{count} tensors for {}", describe(&arch))));
    }
    let mut table = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| NetError::Malformed("tensor name is not UTF-8".into()))?
            .to_string();
        let ndim = r.u8()? as usize;
        let shape = (0..ndim).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
        table.push((name, shape));
    }
    let mut tensors = Vec::with_capacity(count);
    for (name, shape) in table {
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or(NetError::Truncated)?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        tensors.push(NamedTensor { name, shape, data });
    }
    if r.pos != payload.len() {
        return Err(NetError::Malformed(format!("{} trailing bytes", payload.len() - r.pos)));
    }
    let weights = Weights { arch, tensors };
    weights.check_shapes().map_err(|e| NetError::Malformed(e.to_string()))?;
    Ok(weights)
}

pub fn save_weights(path: impl AsRef<Path>, weights: &Weights<f32>) -> Result<(), NetError> {
    fs::write(path, write_weights(weights))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Weights<f32>, NetError> {
    read_weights(&fs::read(path)?)
}

/// Loads weights and rejects them unless they were built for `arch`.
pub fn load_weights_for(path: impl AsRef<Path>, arch: &Architecture) -> Result<Weights<f32>, NetError> {
    let w = load_weights(path)?;
    if &w.arch != arch {
        return Err(NetError::Fingerprint {
            expected: describe(arch),
            found: describe(&w.arch),
        });
    }
    Ok(w)
}
