//! Binary model container: magic, format version, architecture and
//! optimizer settings, normalization statistics, then named little-endian
//! `f64` parameter blocks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::hyper::{Activation, FnoHyperparams};
use super::model::{FnoModel, Layout, Normalization};
use crate::error::{NsoError, Result};

pub const MAGIC: &[u8; 8] = b"NSO-FNO\0";
pub const FORMAT_VERSION: u32 = 1;

/// Longest block name accepted when reading.
const MAX_NAME: u32 = 256;

pub fn write_model<W: Write>(model: &FnoModel, mut w: W) -> Result<()> {
    let hp = &model.hp;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for v in [
        hp.layers,
        hp.width,
        hp.modes,
        hp.proj_width,
        hp.out_channels,
        hp.batch_size,
        hp.epochs,
    ] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&hp.activation.code().to_le_bytes())?;
    for v in [hp.learning_rate, model.norm.mean, model.norm.std] {
        w.write_all(&v.to_le_bytes())?;
    }
    let blocks = model.blocks();
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for (name, values) in blocks {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| NsoError::Format(format!("truncated model file: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

fn read_usize<R: Read>(r: &mut R) -> Result<usize> {
    usize::try_from(read_u64(r)?).map_err(|_| NsoError::Format("size field overflows".into()))
}

pub fn read_model<R: Read>(mut r: R) -> Result<FnoModel> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(NsoError::Format("not an NSO-FNO model file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(NsoError::Format(format!(
            "unsupported model format version {version}"
        )));
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = read_usize(&mut r)?;
    }
    let activation = Activation::from_code(read_u32(&mut r)?)
        .ok_or_else(|| NsoError::Format("unknown activation code".into()))?;
    let hp = FnoHyperparams {
        layers: dims[0],
        width: dims[1],
        modes: dims[2],
        proj_width: dims[3],
        out_channels: dims[4],
        batch_size: dims[5],
        epochs: dims[6],
        activation,
        learning_rate: read_f64(&mut r)?,
    };
    hp.validate()
        .map_err(|e| NsoError::Format(format!("invalid header: {e}")))?;
    let norm = Normalization {
        mean: read_f64(&mut r)?,
        std: read_f64(&mut r)?,
    };
    let layout = Layout::new(&hp);
    let expected = layout.blocks();
    let count = read_u32(&mut r)? as usize;
    if count != expected.len() {
        return Err(NsoError::Format(format!(
            "expected {} parameter blocks, found {count}",
            expected.len()
        )));
    }
    let mut params = vec![0.0; layout.len];
    for (name, range) in expected {
        let len = read_u32(&mut r)?;
        if len > MAX_NAME {
            return Err(NsoError::Format("block name too long".into()));
        }
        let mut raw = vec![0u8; len as usize];
        r.read_exact(&mut raw)
            .map_err(|e| NsoError::Format(format!("truncated model file: {e}")))?;
        if raw != name.as_bytes() {
            return Err(NsoError::Format(format!(
                "expected block {name}, found {}",
                String::from_utf8_lossy(&raw)
            )));
        }
        let size = read_usize(&mut r)?;
        if size != range.len() {
            return Err(NsoError::Format(format!(
                "block {name} has {size} values, expected {}",
                range.len()
            )));
        }
        for p in &mut params[range] {
            *p = read_f64(&mut r)?;
        }
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(NsoError::Format("non-finite parameter".into()));
    }
    Ok(FnoModel { hp, norm, params })
}

pub fn save_model(model: &FnoModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<FnoModel> {
    read_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    fn model() -> FnoModel {
        let hp = FnoHyperparams {
            layers: 2,
            width: 4,
            modes: 3,
            proj_width: 8,
            out_channels: 2,
            ..FnoHyperparams::default()
        };
        let norm = Normalization {
            mean: 0.1234567,
            std: 0.987654321,
        };
        FnoModel::init(&hp, norm, &RngStream::new(77)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back.hp, m.hp);
        assert_eq!(back.norm.mean.to_bits(), m.norm.mean.to_bits());
        let same = back
            .params
            .iter()
            .zip(&m.params)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(bad.as_slice()), Err(NsoError::Format(_))));
        assert!(matches!(
            read_model(&buf[..buf.len() - 3]),
            Err(NsoError::Format(_))
        ));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(read_model(bad.as_slice()).is_err());
    }
}
