//! Checkpoint container: magic, version, a JSON manifest of the config and
//! block shapes, then every block as little-endian f64 in manifest order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Generator, GeneratorConfig, GeneratorError};
use crate::autodiff::Mat;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HSIGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    crate_version: String,
    config: GeneratorConfig,
    blocks: Vec<BlockInfo>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockInfo {
    name: String,
    rows: usize,
    cols: usize,
}

pub fn save_checkpoint(gen: &Generator, mut w: impl Write) -> Result<(), GeneratorError> {
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config: gen.config,
        blocks: gen.store.iter().map(|(name, m)| BlockInfo { name: name.clone(), rows: m.nrows(), cols: m.ncols() }).collect(),
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| GeneratorError::Checkpoint(e.to_string()))?;
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, m) in gen.store.iter() {
        for v in m.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint and checks every block against a freshly built model
/// of the stored configuration.
pub fn load_checkpoint(mut r: impl Read) -> Result<Generator, GeneratorError> {
    let bad = |m: &str| GeneratorError::Checkpoint(m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad("not a generator checkpoint"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != CHECKPOINT_VERSION {
        return Err(GeneratorError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    if len > 1 << 24 {
        return Err(bad("manifest too large"));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let manifest: Manifest = serde_json::from_slice(&json).map_err(|e| GeneratorError::Checkpoint(e.to_string()))?;
    let mut gen = Generator::new(manifest.config, 0)?;
    if manifest.blocks.len() != gen.store.len() {
        return Err(GeneratorError::Checkpoint(format!(
            "{} blocks stored, model has {}",
            manifest.blocks.len(),
            gen.store.len()
        )));
    }
    for b in &manifest.blocks {
        let Some(slot) = gen.store.get_mut(&b.name) else {
            return Err(GeneratorError::Checkpoint(format!("unexpected block '{}'", b.name)));
        };
        if slot.dim() != (b.rows, b.cols) {
            return Err(GeneratorError::Checkpoint(format!(
                "block '{}' is {}x{}, model expects {:?}",
                b.name,
                b.rows,
                b.cols,
                slot.dim()
            )));
        }
        let mut bytes = vec![0u8; 8 * b.rows * b.cols];
        r.read_exact(&mut bytes)?;
        let data: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        *slot = Mat::from_shape_vec((b.rows, b.cols), data).expect("checked shape");
    }
    Ok(gen)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let gen = Generator::new(GeneratorConfig::tiny(), 9).unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&gen, &mut buf).unwrap();
        let back = load_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.config, gen.config);
        for ((na, a), (nb, b)) in gen.store.iter().zip(back.store.iter()) {
            assert_eq!(na, nb);
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn corrupt_input_rejected() {
        assert!(load_checkpoint(&b"NOTACKPTxxxx"[..]).is_err());
        let gen = Generator::new(GeneratorConfig::tiny(), 9).unwrap();
        let mut buf = Vec::new();
        save_checkpoint(&gen, &mut buf).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(load_checkpoint(buf.as_slice()).is_err());
    }
}
