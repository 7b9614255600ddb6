//! Binary checkpoint container, all integers and floats little-endian:
//!
//! ```text
//! "phonemix-ckpt/1\n"                     16-byte magic
//! u64 len, [u8; len]                      metadata (UTF-8, usually JSON)
//! u32 count, then per parameter:
//!     u32 len, name, u32 ndim, u64 dims[ndim], f64 values[]
//! u8 has_optimizer, then if 1:
//!     u8 algorithm, u64 step, f64 lr, beta1, beta2, eps
//!     u32 count, then per entry: u32 len, name, u64 n, f64 m[n], f64 v[n]
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::optim::Algorithm;
use super::{OptimizerState, ParameterSet, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 16] = b"phonemix-ckpt/1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub metadata: String,
    pub params: ParameterSet,
    pub optimizer: Option<OptimizerState>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn name(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn floats(&mut self, vs: &[f64]) {
        vs.iter().for_each(|v| self.f64(*v));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::schema(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, n: u64) -> Result<usize> {
        usize::try_from(n)
            .ok()
            .filter(|n| n.saturating_mul(8) <= self.buf.len())
            .ok_or_else(|| Error::schema(format!("implausible length {n}")))
    }
    fn name(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::schema("parameter name is not UTF-8"))
    }
    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(CHECKPOINT_MAGIC);
        w.u64(self.metadata.len() as u64);
        w.0.extend_from_slice(self.metadata.as_bytes());
        w.u32(self.params.len() as u32);
        for (name, p) in self.params.iter() {
            w.name(name);
            w.u32(p.value.shape().len() as u32);
            p.value.shape().iter().for_each(|d| w.u64(*d as u64));
            w.floats(p.value.values());
        }
        match &self.optimizer {
            None => w.u8(0),
            Some(opt) => {
                w.u8(1);
                w.u8(match opt.algorithm {
                    Algorithm::Adam => 0,
                });
                w.u64(opt.step);
                for v in [opt.lr, opt.beta1, opt.beta2, opt.eps] {
                    w.f64(v);
                }
                w.u32(opt.moments.len() as u32);
                for (name, (m, v)) in &opt.moments {
                    w.name(name);
                    w.u64(m.len() as u64);
                    w.floats(m);
                    w.floats(v);
                }
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(16).ok() != Some(&CHECKPOINT_MAGIC[..]) {
            return Err(Error::schema("not a phonemix-ckpt/1 checkpoint"));
        }
        let n = r.u64()?;
        let n = usize::try_from(n).map_err(|_| Error::schema("metadata too large"))?;
        let metadata = String::from_utf8(r.take(n)?.to_vec())
            .map_err(|_| Error::schema("checkpoint metadata is not UTF-8"))?;
        let mut params = ParameterSet::new();
        for _ in 0..r.u32()? {
            let name = r.name()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().and_then(|d| r.len(d)))
                .collect::<Result<Vec<_>>>()?;
            let count = shape.iter().try_fold(1usize, |a, d| a.checked_mul(*d));
            let count = count.ok_or_else(|| Error::schema("tensor too large"))?;
            let count = r.len(count as u64)?;
            let values = r.floats(count)?;
            params.insert(name, Tensor::new(shape, values)?);
        }
        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let algorithm = match r.u8()? {
                    0 => Algorithm::Adam,
                    other => return Err(Error::schema(format!("unknown optimizer tag {other}"))),
                };
                let step = r.u64()?;
                let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
                let mut moments = BTreeMap::new();
                for _ in 0..r.u32()? {
                    let name = r.name()?;
                    let n = r.u64()?;
                    let n = r.len(n)?;
                    let m = r.floats(n)?;
                    let v = r.floats(n)?;
                    moments.insert(name, (m, v));
                }
                Some(OptimizerState {
                    algorithm,
                    lr,
                    beta1,
                    beta2,
                    eps,
                    step,
                    moments,
                })
            }
            other => return Err(Error::schema(format!("bad optimizer flag {other}"))),
        };
        if r.pos != buf.len() {
            return Err(Error::schema("trailing bytes after checkpoint"));
        }
        Ok(Self {
            metadata,
            params,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::from(e).at_path(path))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::from(e).at_path(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::from(e).at_path(path))?;
        Self::from_bytes(&buf).map_err(|e| e.at_path(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::adam_step;

    fn sample() -> Checkpoint {
        let mut params = ParameterSet::new();
        params.insert("a.weight", Tensor::matrix(2, 3, vec![0.1, -0.0, 1e-300, f64::MAX, -7.5, 3.25]).unwrap());
        params.insert("b", Tensor::scalar(std::f64::consts::PI));
        params.zero_grad();
        let mut opt = OptimizerState::adam(1e-3);
        let mut grads = BTreeMap::new();
        grads.insert("b".to_owned(), vec![0.5]);
        params.accumulate(&grads, 1.0).unwrap();
        adam_step(&mut params, &mut opt).unwrap();
        params.clear_grad();
        Checkpoint {
            metadata: "{\"k\":1}".into(),
            params,
            optimizer: Some(opt),
        }
    }

    #[test]
    fn bit_exact_round_trip() {
        let ck = sample();
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..16], CHECKPOINT_MAGIC);
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        let ck = Checkpoint {
            optimizer: None,
            ..sample()
        };
        ck.save(&p).unwrap();
        assert_eq!(Checkpoint::load(&p).unwrap(), ck);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = sample().to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(Checkpoint::from_bytes(b"phonemix-ckpt/2\n").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
