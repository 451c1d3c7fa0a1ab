//! Checkpoint container: `CKPT` magic, version, model-kind tag, an opaque
//! model-spec block, the named parameter table, optional Adam state and a
//! trailing CRC32. All numbers little-endian; complex entries are stored as
//! interleaved `f64` real/imaginary pairs.

use std::path::Path;

use num_complex::Complex64;

use super::adam::AdamState;
use super::params::ParamStore;
use super::tensor::CTensor;
use crate::binio::{Decoder, Encoder};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CKPT";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind_tag: u32,
    pub spec: Vec<u8>,
    pub params: ParamStore,
    pub adam: Option<AdamState>,
}

fn put_complex(enc: &mut Encoder, values: &[Complex64]) {
    for v in values {
        enc.f64(v.re);
        enc.f64(v.im);
    }
}

fn get_complex(dec: &mut Decoder, len: usize, what: &str) -> Result<Vec<Complex64>> {
    dec.require(16 * len as u128, what)?;
    (0..len)
        .map(|_| Ok(Complex64::new(dec.f64(what)?, dec.f64(what)?)))
        .collect()
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.bytes(CHECKPOINT_MAGIC);
        enc.u16(CHECKPOINT_VERSION);
        enc.u32(self.kind_tag);
        enc.u32(self.spec.len() as u32);
        enc.bytes(&self.spec);
        enc.u32(self.params.len() as u32);
        for p in self.params.iter() {
            enc.u32(p.name.len() as u32);
            enc.bytes(p.name.as_bytes());
            enc.u32(p.tensor.shape().len() as u32);
            for &dim in p.tensor.shape() {
                enc.u64(dim as u64);
            }
            put_complex(&mut enc, p.tensor.values());
        }
        match &self.adam {
            None => enc.u8(0),
            Some(state) => {
                enc.u8(1);
                enc.u64(state.step);
                enc.f64(state.lr);
                enc.f64(state.beta1);
                enc.f64(state.beta2);
                enc.f64(state.eps);
                for (m, v) in state.m.iter().zip(&state.v) {
                    put_complex(&mut enc, m);
                    put_complex(&mut enc, v);
                }
            }
        }
        enc.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes);
        dec.magic(CHECKPOINT_MAGIC)?;
        let version = dec.u16("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let kind_tag = dec.u32("model kind")?;
        let spec_len = dec.u32("spec length")? as usize;
        let spec = dec.take(spec_len, "model spec")?.to_vec();
        let count = dec.u32("parameter count")?;
        let mut params = ParamStore::new();
        let mut lengths = Vec::new();
        for _ in 0..count {
            let name_len = dec.u32("name length")? as usize;
            let name = String::from_utf8(dec.take(name_len, "parameter name")?.to_vec())
                .map_err(|_| Error::Format("parameter name is not UTF-8".into()))?;
            let ndim = dec.u32("rank")? as usize;
            if ndim > 8 {
                return Err(Error::Format(format!("{name}: implausible rank {ndim}")));
            }
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(dec.u64("dimension")? as usize);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::Format(format!("{name}: shape overflows")))?;
            let values = get_complex(&mut dec, len, &name)?;
            lengths.push(len);
            params
                .insert(name, CTensor::from_vec(&shape, values)?)
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        let adam = match dec.u8("optimizer flag")? {
            0 => None,
            1 => {
                let mut state = AdamState::new(0.0);
                state.step = dec.u64("adam step")?;
                state.lr = dec.f64("adam lr")?;
                state.beta1 = dec.f64("adam beta1")?;
                state.beta2 = dec.f64("adam beta2")?;
                state.eps = dec.f64("adam eps")?;
                for &len in &lengths {
                    state.m.push(get_complex(&mut dec, len, "adam first moment")?);
                    state.v.push(get_complex(&mut dec, len, "adam second moment")?);
                }
                Some(state)
            }
            other => return Err(Error::Format(format!("bad optimizer flag {other}"))),
        };
        dec.finish()?;
        Ok(Checkpoint {
            kind_tag,
            spec,
            params,
            adam,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::decode(&bytes)
    }
}
