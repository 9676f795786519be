//! Binary model checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "QDDPMCKP"
//! version      u32      FORMAT_VERSION
//! byte order   u32      0x01020304 as written by the producer
//! steps        u32      T
//! schedule     4 × T × f64   beta, alpha, alpha_bar, sigma
//! dims         3 × u32  input, hidden, steps
//! tensors      u32 count, then per tensor:
//!                u16 name length, UTF-8 name, u32 rows, u32 cols,
//!                rows × cols × f64 (row-major)
//! optimizer    u8 flag; when 1: u64 step, 4 × f64 (lr, beta1, beta2, eps),
//!                first moments, second moments (one f64 per weight each)
//! ```
//!
//! Nothing may follow the optimizer section.

use std::fs;
use std::path::Path;

use super::model::{ModelDims, NoisePredictor, ParamGroup};
use super::schedule::NoiseSchedule;
use crate::adam::{Adam, AdamHyper};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"QDDPMCKP";
pub const FORMAT_VERSION: u32 = 1;
const BYTE_ORDER_MARK: u32 = 0x0102_0304;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub schedule: NoiseSchedule,
    pub model: NoisePredictor,
    pub optimizer: Option<Adam>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("checkpoint field exceeds u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
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
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::parse("checkpoint", format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::parse("checkpoint", "array length overflows"))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION as usize);
        w.u32(BYTE_ORDER_MARK as usize);
        let s = &self.schedule;
        w.u32(s.steps());
        w.f64s(s.betas());
        w.f64s(s.alphas());
        w.f64s(s.alpha_bars());
        w.f64s(s.sigmas());

        let d = self.model.dims();
        w.u32(d.input);
        w.u32(d.hidden);
        w.u32(d.steps);
        w.u32(ParamGroup::ALL.len());
        for g in ParamGroup::ALL {
            let name = g.name().as_bytes();
            w.u16(name.len() as u16);
            w.0.extend_from_slice(name);
            let (rows, cols) = g.shape(d);
            w.u32(rows);
            w.u32(cols);
            w.f64s(self.model.group(g));
        }

        match &self.optimizer {
            None => w.u8(0),
            Some(adam) => {
                w.u8(1);
                w.u64(adam.step);
                let h = adam.hyper;
                w.f64s(&[h.learning_rate, h.beta1, h.beta2, h.eps]);
                w.f64s(&adam.m);
                w.f64s(&adam.v);
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::parse("checkpoint", "bad magic bytes"));
        }
        let version = r.u32()?;
        if version > FORMAT_VERSION || version == 0 {
            return Err(Error::Version {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        if r.u32()? != BYTE_ORDER_MARK {
            return Err(Error::parse("checkpoint", "byte-order mark mismatch"));
        }
        let steps = r.usize()?;
        if steps < 2 {
            return Err(Error::parse("checkpoint", "schedule shorter than 2 steps"));
        }
        let betas = r.f64s(steps)?;
        let alphas = r.f64s(steps)?;
        let alpha_bars = r.f64s(steps)?;
        let sigmas = r.f64s(steps)?;
        let schedule = NoiseSchedule::from_betas(betas)?;
        if schedule.alphas() != alphas
            || schedule.alpha_bars() != alpha_bars
            || schedule.sigmas() != sigmas
        {
            return Err(Error::Invariant(
                "stored schedule constants are inconsistent with its betas".into(),
            ));
        }

        let dims = ModelDims {
            input: r.usize()?,
            hidden: r.usize()?,
            steps: r.usize()?,
        };
        dims.validate()?;
        if dims.steps != steps {
            return Err(Error::Invariant(
                "model step count differs from schedule length".into(),
            ));
        }
        let count = r.usize()?;
        if count != ParamGroup::ALL.len() {
            return Err(Error::parse(
                "checkpoint",
                format!("expected {} tensors, found {count}", ParamGroup::ALL.len()),
            ));
        }
        let mut params = Vec::new();
        for g in ParamGroup::ALL {
            let len = r.u16()? as usize;
            let name = r.take(len)?;
            if name != g.name().as_bytes() {
                return Err(Error::parse(
                    "checkpoint",
                    format!(
                        "expected tensor {}, found {}",
                        g.name(),
                        String::from_utf8_lossy(name)
                    ),
                ));
            }
            let shape = (r.usize()?, r.usize()?);
            if shape != g.shape(&dims) {
                return Err(Error::parse(
                    "checkpoint",
                    format!("tensor {} has shape {shape:?}", g.name()),
                ));
            }
            params.extend(r.f64s(shape.0 * shape.1)?);
        }
        let model = NoisePredictor::from_params(dims, params)?;

        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let step = r.u64()?;
                let hyper = AdamHyper {
                    learning_rate: r.f64()?,
                    beta1: r.f64()?,
                    beta2: r.f64()?,
                    eps: r.f64()?,
                };
                let n = model.params().len();
                let m = r.f64s(n)?;
                let v = r.f64s(n)?;
                Some(Adam { hyper, step, m, v })
            }
            f => {
                return Err(Error::parse(
                    "checkpoint",
                    format!("unknown optimizer flag {f}"),
                ))
            }
        };
        if r.pos != buf.len() {
            return Err(Error::parse(
                "checkpoint",
                format!("{} trailing bytes", buf.len() - r.pos),
            ));
        }
        Ok(Checkpoint {
            schedule,
            model,
            optimizer,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
