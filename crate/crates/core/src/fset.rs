//! FSET1 binary feature files.
//!
//! Layout (little-endian, no padding, no footer):
//!
//! ```text
//! magic     "FSET"        4 B
//! version   u32 = 1       4 B
//! dim       u32           4 B
//! classes   u32           4 B
//! count     u64           8 B
//! count × { class u32, domain u32, dim × f32 }
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::{Example, FeatureSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FSET";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

pub fn record_len(dim: usize) -> usize {
    8 + 4 * dim
}

pub fn write_feature_file(set: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = BufWriter::new(file);
    write_to(set, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_to<W: Write>(set: &FeatureSet, out: &mut W) -> Result<()> {
    let dim = u32::try_from(set.dim()).map_err(|_| Error::Validation("dim exceeds u32".into()))?;
    let classes = u32::try_from(set.num_classes())
        .map_err(|_| Error::Validation("class count exceeds u32".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&dim.to_le_bytes())?;
    out.write_all(&classes.to_le_bytes())?;
    out.write_all(&(set.len() as u64).to_le_bytes())?;
    for ex in set.examples() {
        out.write_all(&ex.class_label.to_le_bytes())?;
        out.write_all(&ex.domain_label.to_le_bytes())?;
        for &v in &ex.features {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn to_bytes(set: &FeatureSet) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + set.len() * record_len(set.dim()));
    write_to(set, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let bytes = fs::read(path)?;
    from_bytes(&bytes)
}

pub fn from_bytes(bytes: &[u8]) -> Result<FeatureSet> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        return Err(Error::Corruption(format!(
            "file holds {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"FSET\"",
            String::from_utf8_lossy(&bytes[..4])
        )));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = u32_at(bytes, 8) as usize;
    let num_classes = u32_at(bytes, 12) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    if dim == 0 {
        return Err(Error::Format("header declares dim 0".into()));
    }

    let body = &bytes[HEADER_LEN..];
    let rec = record_len(dim);
    let expected = (count as u128) * rec as u128;
    if (body.len() as u128) != expected {
        return Err(Error::Corruption(format!(
            "header announces {count} records ({expected} bytes) but the body holds {} bytes",
            body.len()
        )));
    }

    let mut examples = Vec::with_capacity(count as usize);
    for chunk in body.chunks_exact(rec) {
        let class_label = u32_at(chunk, 0);
        let domain_label = u32_at(chunk, 4);
        let features = chunk[8..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        examples.push(Example::new(features, class_label, domain_label));
    }
    FeatureSet::new(dim, num_classes, examples)
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}
