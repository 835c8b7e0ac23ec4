//! HEAD checkpoint files.
//!
//! Little-endian envelope shared by every classifier:
//!
//! ```text
//! magic "HEAD" 4 B | version u32 = 1 | kind u8 | mask u8 | N u32 | h u32
//! ```
//!
//! Gradient heads (kinds 0–4) follow with `A` (`N × h` f64, row-major),
//! `b` (`N` f64) and `γ` (`N` f64). Kinds 16 and up are reserved for
//! similarity heads:
//!
//! | kind | head        | body                                                     |
//! |------|-------------|----------------------------------------------------------|
//! | 16   | MeanLayer   | counts u64×N, means f64×N×h                              |
//! | 17   | MedianLayer | per class: count u64, count×h f64                        |
//! | 18   | SLDA        | shrinkage f64, total u64, counts u64×N, means f64×N×h, Σ f64×h×h |
//! | 19   | KNN         | k u32, count u64, count × { label u32, h × f64 }         |
//!
//! Optimizer velocity is not stored.

use std::fs;
use std::path::Path;

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::gradient::{GradientHead, HeadKind, MaskMode};
use crate::similarity::{KnnState, PrototypeMode, PrototypeState, SldaState};

pub const MAGIC: &[u8; 4] = b"HEAD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 18;

pub const KIND_MEAN: u8 = 16;
pub const KIND_MEDIAN: u8 = 17;
pub const KIND_SLDA: u8 = 18;
pub const KIND_KNN: u8 = 19;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) -> Result<()> {
        let v =
            u32::try_from(v).map_err(|_| Error::Validation(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
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
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Corruption(format!("checkpoint truncated at byte {}", self.bytes.len()))
            })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::Corruption("length overflow".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Corruption(format!(
                "{} trailing bytes after checkpoint body",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn to_bytes(classifier: &Classifier) -> Result<Vec<u8>> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.0.extend_from_slice(&VERSION.to_le_bytes());
    match classifier {
        Classifier::Gradient(h) => {
            w.u8(h.kind().code());
            w.u8(h.mask().code());
            w.u32(h.num_classes())?;
            w.u32(h.dim())?;
            w.f64s(h.weights());
            w.f64s(h.bias());
            w.f64s(h.gamma());
        }
        Classifier::Prototype(p) => {
            let kind = match p.mode() {
                PrototypeMode::Mean => KIND_MEAN,
                PrototypeMode::Median => KIND_MEDIAN,
            };
            w.u8(kind);
            w.u8(0);
            w.u32(p.num_classes())?;
            w.u32(p.dim())?;
            match p.mode() {
                PrototypeMode::Mean => {
                    p.counts().iter().for_each(|&c| w.u64(c));
                    p.means().iter().for_each(|m| w.f64s(m));
                }
                PrototypeMode::Median => {
                    for class in p.exemplars() {
                        w.u64(class.len() as u64);
                        class.iter().for_each(|x| w.f64s(x));
                    }
                }
            }
        }
        Classifier::Slda(s) => {
            w.u8(KIND_SLDA);
            w.u8(0);
            w.u32(s.num_classes())?;
            w.u32(s.dim())?;
            w.f64s(&[s.shrinkage()]);
            w.u64(s.total());
            s.counts().iter().for_each(|&c| w.u64(c));
            s.means().iter().for_each(|m| w.f64s(m));
            w.f64s(s.covariance());
        }
        Classifier::Knn(s) => {
            let n = s.stored().iter().map(|(_, y)| y + 1).max().unwrap_or(0);
            w.u8(KIND_KNN);
            w.u8(0);
            w.u32(n)?;
            w.u32(s.dim())?;
            w.u32(s.k())?;
            w.u64(s.stored().len() as u64);
            for (x, y) in s.stored() {
                w.u32(*y)?;
                w.f64s(x);
            }
        }
    }
    Ok(w.0)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Classifier> {
    if bytes.len() >= 4 && &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic, expected \"HEAD\"".into()));
    }
    let mut r = Reader { bytes, pos: 0 };
    r.take(4)?;
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let kind = r.u8()?;
    let mask = r.u8()?;
    let n = r.u32()?;
    let h = r.u32()?;
    if h == 0 {
        return Err(Error::Format("checkpoint declares dimension 0".into()));
    }

    let classifier = if let Some(kind) = HeadKind::from_code(kind) {
        let mask = MaskMode::from_code(mask)
            .ok_or_else(|| Error::Format(format!("unknown mask byte {mask}")))?;
        let total = n
            .checked_mul(h)
            .ok_or_else(|| Error::Corruption("shape overflow".into()))?;
        let a = r.f64s(total)?;
        let b = r.f64s(n)?;
        let gamma = r.f64s(n)?;
        Classifier::Gradient(GradientHead::from_parts(kind, mask, n, h, a, b, gamma)?)
    } else {
        match kind {
            KIND_MEAN => {
                let counts = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
                let means = (0..n).map(|_| r.f64s(h)).collect::<Result<Vec<_>>>()?;
                Classifier::Prototype(PrototypeState::from_means(h, counts, means))
            }
            KIND_MEDIAN => {
                let mut exemplars = Vec::with_capacity(n);
                for _ in 0..n {
                    let count = r.u64()? as usize;
                    exemplars.push((0..count).map(|_| r.f64s(h)).collect::<Result<Vec<_>>>()?);
                }
                Classifier::Prototype(PrototypeState::from_exemplars(h, exemplars))
            }
            KIND_SLDA => {
                let shrinkage = r.f64s(1)?[0];
                let total = r.u64()?;
                let counts = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
                let means = (0..n).map(|_| r.f64s(h)).collect::<Result<Vec<_>>>()?;
                let sigma = r.f64s(h * h)?;
                Classifier::Slda(SldaState::from_parts(
                    h, shrinkage, means, counts, sigma, total,
                ))
            }
            KIND_KNN => {
                let k = r.u32()?;
                let count = r.u64()?;
                let mut knn = KnnState::new(k, h)?;
                for _ in 0..count {
                    let y = r.u32()?;
                    knn.observe(&r.f64s(h)?, y)?;
                }
                Classifier::Knn(knn)
            }
            other => return Err(Error::Format(format!("unknown head kind byte {other}"))),
        }
    };
    r.finish()?;
    Ok(classifier)
}

pub fn write_checkpoint(classifier: &Classifier, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(classifier)?)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Classifier> {
    from_bytes(&fs::read(path)?)
}
