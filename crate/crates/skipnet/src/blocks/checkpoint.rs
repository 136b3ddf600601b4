//! Binary network checkpoints.
//!
//! Layout (all integers little-endian): magic `SKPN`, format version,
//! activation code, input/output dims, seed, stage table (width, block
//! count, variant code per stage), per-block lesion flags, then every
//! parameter matrix in canonical order as (rows, cols, row-major f64
//! payload). Floats are stored as raw IEEE-754 bits, so a loaded network
//! reproduces forward outputs bit for bit.

use std::fs;
use std::path::Path;

use super::{Activation, BlockVariant, Network, NetworkParams, NetworkSpec, StageSpec};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const MAGIC: &[u8; 4] = b"SKPN";
const VERSION: u32 = 1;

pub fn save_checkpoint(net: &Network<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = net.spec();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(spec.activation.code());
    buf.extend_from_slice(&(spec.input_dim as u64).to_le_bytes());
    buf.extend_from_slice(&(spec.output_dim as u64).to_le_bytes());
    buf.extend_from_slice(&spec.seed.to_le_bytes());
    buf.extend_from_slice(&(spec.stages.len() as u64).to_le_bytes());
    for stage in &spec.stages {
        buf.extend_from_slice(&(stage.width as u64).to_le_bytes());
        buf.extend_from_slice(&(stage.blocks as u64).to_le_bytes());
        buf.push(stage.variant.code());
    }
    for stage in &net.params().stages {
        for block in stage {
            buf.push(block.lesioned as u8);
        }
    }
    for m in net.params().matrices() {
        buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for v in m.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!("truncated while reading {what}")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let v = self.u64(what)?;
        usize::try_from(v).map_err(|_| Error::Checkpoint(format!("{what} {v} does not fit in usize")))
    }

    fn matrix(&mut self, what: &str) -> Result<Matrix<f64>> {
        let rows = self.usize(what)?;
        let cols = self.usize(what)?;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Checkpoint(format!("{what} shape overflows")))?;
        let raw = self.take(n * 8, what)?;
        let mut data = Vec::with_capacity(n);
        for chunk in raw.chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        Matrix::new(rows, cols, data)
            .map_err(|e| Error::Checkpoint(format!("{what}: {e}")))
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = Reader { bytes: &bytes, pos: 0 };

    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {magic:02x?}, not a network checkpoint"
        )));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, this build reads version {VERSION}"
        )));
    }
    let activation = Activation::from_code(r.u8("activation")?)?;
    let input_dim = r.usize("input_dim")?;
    let output_dim = r.usize("output_dim")?;
    let seed = r.u64("seed")?;
    let n_stages = r.usize("stage count")?;
    let mut stages = Vec::with_capacity(n_stages);
    for _ in 0..n_stages {
        let width = r.usize("stage width")?;
        let blocks = r.usize("stage block count")?;
        let variant = BlockVariant::from_code(r.u8("stage variant")?)?;
        stages.push(StageSpec { width, blocks, variant });
    }
    let spec = NetworkSpec {
        input_dim,
        output_dim,
        stages,
        activation,
        seed,
    };
    spec.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

    let mut lesioned = Vec::new();
    for stage in &spec.stages {
        let mut flags = Vec::with_capacity(stage.blocks);
        for _ in 0..stage.blocks {
            flags.push(r.u8("lesion flag")? != 0);
        }
        lesioned.push(flags);
    }

    let mut params = NetworkParams::<f64>::zeros(&spec);
    for m in params.matrices_mut() {
        let loaded = r.matrix("parameter matrix")?;
        if loaded.shape() != m.shape() {
            return Err(Error::Checkpoint(format!(
                "parameter matrix is {}x{}, spec requires {}x{}",
                loaded.rows(),
                loaded.cols(),
                m.rows(),
                m.cols()
            )));
        }
        *m = loaded;
    }
    for (stage, flags) in params.stages.iter_mut().zip(&lesioned) {
        for (block, &flag) in stage.iter_mut().zip(flags) {
            block.lesioned = flag;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after parameters",
            bytes.len() - r.pos
        )));
    }
    Network::from_parts(spec, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SplitMix64;

    fn sample_net() -> Network<f64> {
        let spec = NetworkSpec {
            input_dim: 3,
            output_dim: 2,
            stages: vec![
                StageSpec { width: 4, blocks: 2, variant: BlockVariant::Coupled },
                StageSpec { width: 3, blocks: 2, variant: BlockVariant::Full },
            ],
            activation: Activation::Tanh,
            seed: 123,
        };
        Network::new(spec).unwrap()
    }

    fn sample_input() -> Matrix<f64> {
        let mut rng = SplitMix64::new(9);
        Matrix::from_fn(5, 3, |_, _| rng.normal())
    }

    #[test]
    fn round_trip_reproduces_forward_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let mut net = sample_net();
        net.set_lesioned(0, 1, true).unwrap();
        save_checkpoint(&net, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.spec(), net.spec());
        assert!(loaded.is_lesioned(0, 1).unwrap());
        let x = sample_input();
        assert_eq!(loaded.logits(&x).unwrap(), net.logits(&x).unwrap());
        assert_eq!(loaded.flatten(), net.flatten());
    }

    #[test]
    fn save_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        let net = sample_net();
        save_checkpoint(&net, &a).unwrap();
        save_checkpoint(&net, &b).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&sample_net(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("bad magic"), "{err}");
    }

    #[test]
    fn truncation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&sample_net(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn trailing_bytes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&sample_net(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.push(0);
        fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("trailing"), "{err}");
    }

    #[test]
    fn unsupported_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&sample_net(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 9;
        fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }
}
