//! Binary parameter files.
//!
//! Layout, all integers and floats little-endian:
//! magic (8 bytes), version u32, input dim u64, hidden layer count u32,
//! hidden widths u64 each, output dim u64, seed u64, then for every layer
//! its weights (row-major, out x in) followed by its biases as f64.

use std::path::Path;

use super::{Layer, NetError, NetworkConfig, NetworkParams};

pub const PARAMS_MAGIC: &[u8; 8] = b"PULSENN\0";
const VERSION: u32 = 1;
/// Guards allocation against nonsense headers.
const MAX_WIDTH: u64 = 1 << 28;

pub fn write_params(params: &NetworkParams) -> Vec<u8> {
    let dims = params.dims();
    let mut out = Vec::with_capacity(64 + params.n_params() * 8);
    out.extend_from_slice(PARAMS_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dims[0] as u64).to_le_bytes());
    let hidden = &dims[1..dims.len() - 1];
    out.extend_from_slice(&(hidden.len() as u32).to_le_bytes());
    for &h in hidden {
        out.extend_from_slice(&(h as u64).to_le_bytes());
    }
    out.extend_from_slice(&(params.output_dim() as u64).to_le_bytes());
    out.extend_from_slice(&params.seed.to_le_bytes());
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        if self.bytes.len() - self.pos < n {
            return Err(NetError::Corrupt("truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn width(&mut self) -> Result<usize, NetError> {
        let w = self.u64()?;
        if w == 0 || w > MAX_WIDTH {
            return Err(NetError::Corrupt(format!("implausible layer width {w}")));
        }
        Ok(w as usize)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn read_params(bytes: &[u8]) -> Result<NetworkParams, NetError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).map_err(|_| NetError::Corrupt("bad magic".into()))? != PARAMS_MAGIC {
        return Err(NetError::Corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(NetError::Corrupt(format!("unsupported version {version}")));
    }
    let mut dims = vec![r.width()?];
    let n_hidden = r.u32()? as usize;
    if n_hidden > 64 {
        return Err(NetError::Corrupt(format!("implausible hidden layer count {n_hidden}")));
    }
    for _ in 0..n_hidden {
        dims.push(r.width()?);
    }
    dims.push(r.width()?);
    let seed = r.u64()?;

    let n_values: u128 = dims.windows(2).map(|p| (p[0] as u128 + 1) * p[1] as u128).sum();
    let expected = n_values * 8;
    let remaining = r.remaining() as u128;
    if remaining < expected {
        return Err(NetError::Corrupt("truncated".into()));
    }
    if remaining > expected {
        return Err(NetError::Corrupt("trailing bytes".into()));
    }

    let mut read_f64s = |n: usize| -> Result<Vec<f64>, NetError> {
        let raw = r.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    };
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for pair in dims.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let weights = read_f64s(n_in * n_out)?;
        let biases = read_f64s(n_out)?;
        layers.push(Layer {
            n_in,
            n_out,
            weights,
            biases,
        });
    }
    let params = NetworkParams { layers, seed };
    if !params.is_finite() {
        return Err(NetError::Corrupt("non-finite parameter".into()));
    }
    Ok(params)
}

pub fn save_params(params: &NetworkParams, path: &Path) -> Result<(), NetError> {
    std::fs::write(path, write_params(params)).map_err(|source| NetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_params(path: &Path) -> Result<NetworkParams, NetError> {
    let bytes = std::fs::read(path).map_err(|source| NetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_params(&bytes)
}

/// Loads and checks that the stored shape matches `config`.
pub fn load_params_for(path: &Path, config: &NetworkConfig) -> Result<NetworkParams, NetError> {
    let params = load_params(path)?;
    let stored = params.dims();
    let wanted = config.dims();
    if stored.len() != wanted.len() {
        return Err(NetError::Shape {
            what: "layer count".into(),
            expected: wanted.len() - 1,
            actual: stored.len() - 1,
        });
    }
    let last = stored.len() - 1;
    for (i, (&s, &w)) in stored.iter().zip(&wanted).enumerate() {
        if s != w {
            let what = match i {
                0 => "input_dim".to_string(),
                i if i == last => "output_dim".to_string(),
                i => format!("hidden layer {i} width"),
            };
            return Err(NetError::Shape {
                what,
                expected: w,
                actual: s,
            });
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::init_params;

    fn params() -> NetworkParams {
        init_params(&NetworkConfig::new(7, 3, 21)).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = params();
        let bytes = write_params(&p);
        assert_eq!(read_params(&bytes).unwrap(), p);
        assert_eq!(write_params(&read_params(&bytes).unwrap()), bytes);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.bin");
        save_params(&p, &path).unwrap();
        assert_eq!(load_params(&path).unwrap(), p);
        assert_eq!(load_params_for(&path, &NetworkConfig::new(7, 3, 0)).unwrap(), p);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = write_params(&params());
        let err = read_params(&bytes[..bytes.len() - 3]).unwrap_err();
        assert_eq!(err.to_string(), "corrupt parameter file: truncated");
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(read_params(&extra), Err(NetError::Corrupt(_))));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert_eq!(read_params(&magic).unwrap_err().to_string(), "corrupt parameter file: bad magic");
        assert!(read_params(&bytes[..20]).is_err());
        assert!(read_params(&[]).is_err());
        let mut nan = bytes.clone();
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(read_params(&nan).is_err());
    }

    #[test]
    fn shape_mismatch_names_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        save_params(&params(), &path).unwrap();
        let err = load_params_for(&path, &NetworkConfig::new(8, 3, 0)).unwrap_err();
        assert_eq!(err.to_string(), "shape mismatch for input_dim: expected 8, got 7");
        let err = load_params_for(&path, &NetworkConfig::new(7, 5, 0)).unwrap_err();
        assert!(err.to_string().contains("output_dim"));
        assert!(matches!(load_params(&dir.path().join("missing")), Err(NetError::Io { .. })));
    }
}
