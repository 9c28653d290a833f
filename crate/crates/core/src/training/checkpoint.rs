//! Binary checkpoint container.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field                         | type      |
//! |-------------------------------|-----------|
//! | magic `PASSAUTH`              | 8 bytes   |
//! | format version                | u32       |
//! | layer 1 input width           | u64       |
//! | layer 1 hidden width          | u64       |
//! | layer 2 input width           | u64       |
//! | layer 2 hidden width          | u64       |
//! | margin                        | f64       |
//! | parameter count               | u64       |
//! | parameters                    | f64 * n   |
//!
//! Parameters run layer 1 then layer 2; within a layer `W`, then `U`,
//! then `b`; within each, gate blocks `i, f, o, g`, matrices row-major.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{LstmParams, SiameseModel};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PASSAUTH";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &SiameseModel) -> Vec<u8> {
    let n = model.param_count();
    let mut out = Vec::with_capacity(8 + 4 + 8 * 6 + 8 * n);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for w in [
        model.layer1.input_width,
        model.layer1.hidden_width,
        model.layer2.input_width,
        model.layer2.hidden_width,
    ] {
        out.extend_from_slice(&(w as u64).to_le_bytes());
    }
    out.extend_from_slice(&model.margin.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for v in model.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn width(&mut self, what: &str) -> Result<usize> {
        let w = self.u64(what)?;
        if w == 0 || w > 1 << 20 {
            return Err(Error::Checkpoint(format!("implausible {what}: {w}")));
        }
        Ok(w as usize)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SiameseModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(r.take(4, "version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let in1 = r.width("layer 1 input width")?;
    let h1 = r.width("layer 1 hidden width")?;
    let in2 = r.width("layer 2 input width")?;
    let h2 = r.width("layer 2 hidden width")?;
    let margin = r.f64("margin")?;
    let count = r.u64("parameter count")? as usize;
    let mut model = SiameseModel {
        layer1: LstmParams::zeros(in1, h1),
        layer2: LstmParams::zeros(in2, h2),
        margin,
    };
    if count != model.param_count() {
        return Err(Error::Checkpoint(format!(
            "parameter count {count} does not match widths ({} expected)",
            model.param_count()
        )));
    }
    let expected_len = r.pos + 8 * count;
    if bytes.len() != expected_len {
        return Err(Error::Checkpoint(format!(
            "file is {} bytes, layout requires {expected_len}",
            bytes.len()
        )));
    }
    for p in model.params_mut() {
        *p = f64::from_le_bytes(r.take(8, "parameters")?.try_into().unwrap());
    }
    model
        .validate()
        .map_err(|e| Error::Checkpoint(format!("invalid model: {e}")))?;
    Ok(model)
}

pub fn save_checkpoint(model: &SiameseModel, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<SiameseModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{embed_matrix, init_params};
    use ndarray::Array2;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = init_params(4, 6, 16, 1.25).unwrap();
        let back = decode_checkpoint(&encode_checkpoint(&m)).unwrap();
        assert_eq!(back, m);
        let x = Array2::from_shape_fn((20, 6), |(i, j)| ((i * 7 + j) as f64).sin());
        let (a, b) = (embed_matrix(&m, x.view()).unwrap(), embed_matrix(&back, x.view()).unwrap());
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn truncation_and_version_detected() {
        let bytes = encode_checkpoint(&init_params(1, 3, 4, 1.0).unwrap());
        let err = decode_checkpoint(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode_checkpoint(&long).is_err());
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(decode_checkpoint(&v2).unwrap_err().to_string().contains("version 2"));
        assert!(decode_checkpoint(b"NOTACKPT").is_err());
        assert!(decode_checkpoint(&[]).is_err());
    }
}
