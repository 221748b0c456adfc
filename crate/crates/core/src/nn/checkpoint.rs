//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        4 bytes  "FGPS"
//! version      u32      currently 1
//! activation   u32      0 = relu, 1 = identity
//! num_layers   u32      extractor layers + classifier
//! shapes       num_layers × (fan_out u32, fan_in u32)
//! num_params   u64
//! params       num_params × f64, in `MlpModel::flatten` order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, Dense, MlpModel, ParamVector};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FGPS";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(model: &MlpModel, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&model.activation.tag().to_le_bytes())?;
    let layers: Vec<&Dense> = model.layers().collect();
    w.write_all(&(layers.len() as u32).to_le_bytes())?;
    for layer in &layers {
        w.write_all(&(layer.fan_out() as u32).to_le_bytes())?;
        w.write_all(&(layer.fan_in() as u32).to_le_bytes())?;
    }
    let params = model.flatten();
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    for v in params.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<MlpModel> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let tag = read_u32(&mut r)?;
    let activation = Activation::from_tag(tag)
        .ok_or_else(|| Error::Checkpoint(format!("unknown activation tag {tag}")))?;
    let num_layers = read_u32(&mut r)? as usize;
    if num_layers == 0 {
        return Err(Error::Checkpoint("model has no layers".into()));
    }
    let mut layers = Vec::with_capacity(num_layers);
    for i in 0..num_layers {
        let fan_out = read_u32(&mut r)? as usize;
        let fan_in = read_u32(&mut r)? as usize;
        if let Some(prev) = layers.last().map(Dense::fan_out) {
            if prev != fan_in {
                return Err(Error::Checkpoint(format!(
                    "layer {i} expects {fan_in} inputs but previous layer emits {prev}"
                )));
            }
        }
        layers.push(Dense::zeros(fan_in, fan_out));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    let num_params = u64::from_le_bytes(b8) as usize;

    let classifier = layers.pop().expect("num_layers > 0");
    let mut model = MlpModel {
        extractor: layers,
        classifier,
        activation,
    };
    if num_params != model.num_params() {
        return Err(Error::Checkpoint(format!(
            "parameter count {num_params} does not match layer shapes ({})",
            model.num_params()
        )));
    }
    let mut values = Vec::with_capacity(num_params);
    for _ in 0..num_params {
        r.read_exact(&mut b8)
            .map_err(|e| Error::Checkpoint(format!("truncated parameters: {e}")))?;
        values.push(f64::from_le_bytes(b8));
    }
    model.load_params(&ParamVector::from_vec(values))?;
    Ok(model)
}

pub fn save(model: &MlpModel, path: &Path) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn load(path: &Path) -> Result<MlpModel> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Architecture;
    use crate::rng::{self, Stream};

    #[test]
    fn round_trip_is_bit_exact() {
        let arch = Architecture::desk(5, 4, 3);
        let model = MlpModel::new(&arch, &mut rng::stream(3, Stream::Init));
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"FGPS");
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert!(back.flatten().bit_eq(&model.flatten()));
        assert_eq!(back.architecture(), arch);
    }

    #[test]
    fn truncated_and_corrupt_inputs_fail() {
        let arch = Architecture::desk(2, 2, 2);
        let model = MlpModel::zeros(&arch);
        let mut buf = Vec::new();
        write_checkpoint(&model, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut bad_version = buf;
        bad_version[4] = 9;
        assert!(read_checkpoint(bad_version.as_slice()).is_err());
    }
}
