//! Binary weight checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes   b"LADIESW1"
//! L          u64       number of weight matrices
//! dims       (L+1) x u64   d_0 .. d_L
//! weights    for l in 0..L: d_l * d_{l+1} f64, row-major
//! ```

use std::io::{Read, Write};

use ndarray::Array2;

use super::{GcnModel, ModelError};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LADIESW1";

pub fn write_checkpoint<W: Write>(model: &GcnModel, mut out: W) -> Result<(), ModelError> {
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(model.num_layers() as u64).to_le_bytes())?;
    for d in model.dims() {
        out.write_all(&(d as u64).to_le_bytes())?;
    }
    for w in model.weights() {
        for v in w.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64, ModelError> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<GcnModel, ModelError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let layers = read_u64(&mut input)? as usize;
    if layers == 0 || layers > 1024 {
        return Err(ModelError::Checkpoint(format!("implausible layer count {layers}")));
    }
    let dims = (0..=layers)
        .map(|_| read_u64(&mut input).map(|d| d as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let mut weights = Vec::with_capacity(layers);
    for d in dims.windows(2) {
        let mut data = Vec::with_capacity(d[0] * d[1]);
        for _ in 0..d[0] * d[1] {
            let mut buf = [0u8; 8];
            input.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        weights.push(Array2::from_shape_vec((d[0], d[1]), data).map_err(|e| ModelError::Checkpoint(e.to_string()))?);
    }
    GcnModel::from_weights(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip() {
        let m = GcnModel::init(&[5, 3, 2], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 3 * 8 + (15 + 6) * 8);
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn truncated_and_corrupt_inputs_fail() {
        let m = GcnModel::init(&[2, 2], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        buf[0] = b'X';
        assert!(read_checkpoint(buf.as_slice()).is_err());
    }
}
