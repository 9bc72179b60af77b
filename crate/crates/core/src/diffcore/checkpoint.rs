//! Binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "ADVCKPT\0"
//! version    u32      (currently 1)
//! meta_len   u32      followed by meta_len bytes of UTF-8 JSON
//! steps      u64      optimiser step count
//! entries    u32      followed by that many records:
//!   name_len u32, name bytes, ndim u32, dims u64 * ndim, data f64 * prod(dims)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{DiffError, ParamStore, Tensor};

const MAGIC: &[u8; 8] = b"ADVCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ParamStore,
    pub metadata: serde_json::Value,
}

pub fn write_checkpoint<W: Write>(
    out: &mut W,
    params: &ParamStore,
    metadata: &serde_json::Value,
) -> Result<(), DiffError> {
    let meta = serde_json::to_vec(metadata).map_err(|e| DiffError::Checkpoint(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(meta.len() as u32).to_le_bytes())?;
    out.write_all(&meta)?;
    out.write_all(&params.step_count().to_le_bytes())?;
    out.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in t.data() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, DiffError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, DiffError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(input: &mut R) -> Result<Checkpoint, DiffError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(DiffError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(input)?;
    if version != CHECKPOINT_VERSION {
        return Err(DiffError::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = read_u32(input)? as usize;
    let mut meta = vec![0u8; meta_len];
    input.read_exact(&mut meta)?;
    let metadata = serde_json::from_slice(&meta).map_err(|e| DiffError::Checkpoint(e.to_string()))?;
    let steps = read_u64(input)?;
    let entries = read_u32(input)?;
    let mut params = ParamStore::new();
    for _ in 0..entries {
        let name_len = read_u32(input)? as usize;
        let mut name = vec![0u8; name_len];
        input.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| DiffError::Checkpoint(e.to_string()))?;
        let ndim = read_u32(input)? as usize;
        let shape = (0..ndim)
            .map(|_| read_u64(input).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let len: usize = shape.iter().product();
        let data = (0..len)
            .map(|_| read_u64(input).map(f64::from_bits))
            .collect::<Result<Vec<_>, _>>()?;
        params.insert(name, Tensor::from_vec(&shape, data)?)?;
    }
    params.set_step_count(steps);
    Ok(Checkpoint { params, metadata })
}

pub fn save_checkpoint(path: &Path, params: &ParamStore, metadata: &serde_json::Value) -> Result<(), DiffError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut f, params, metadata)?;
    f.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, DiffError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_checkpoint(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut p = ParamStore::new();
        p.insert("w", Tensor::uniform(&[3, 4], 1.0, &mut rng)).unwrap();
        let mut odd = Tensor::zeros(&[2]);
        odd.data_mut().copy_from_slice(&[f64::MIN_POSITIVE, -0.0]);
        p.insert("odd", odd).unwrap();
        p.set_step_count(42);
        let meta = serde_json::json!({"method": "ADV", "lr": 0.001});
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p, &meta).unwrap();
        let back = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back.metadata, meta);
        assert_eq!(back.params.step_count(), 42);
        for ((n1, t1), (n2, t2)) in p.iter().zip(back.params.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            let b1: Vec<u64> = t1.data().iter().map(|x| x.to_bits()).collect();
            let b2: Vec<u64> = t2.data().iter().map(|x| x.to_bits()).collect();
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn rejects_foreign_bytes() {
        assert!(read_checkpoint(&mut &b"not a checkpoint"[..]).is_err());
    }
}
