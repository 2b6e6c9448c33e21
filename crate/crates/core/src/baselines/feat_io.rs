//! `FEAT` feature files.
//!
//! ```text
//! "FEAT" | dim u32 | count u32
//! per sample: label u32 | features f32 x dim
//! ```
//! Little-endian.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

const MAGIC: &[u8; 4] = b"FEAT";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("malformed feature file: {0}")]
    Format(String),
    #[error("sample {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub label: u32,
    pub features: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub dim: usize,
    pub samples: Vec<Sample>,
}

impl FeatureSet {
    pub fn new(dim: usize, samples: Vec<Sample>) -> Result<Self, FeatureError> {
        if let Some((index, s)) = samples.iter().enumerate().find(|(_, s)| s.features.len() != dim) {
            return Err(FeatureError::DimensionMismatch {
                index,
                expected: dim,
                found: s.features.len(),
            });
        }
        Ok(Self { dim, samples })
    }
}

fn eof(e: io::Error) -> FeatureError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        FeatureError::Format("truncated file".into())
    } else {
        FeatureError::Io(e)
    }
}

/// Features are stored as `f32`; values round accordingly.
pub fn write_features<W: Write>(set: &FeatureSet, mut out: W) -> Result<(), FeatureError> {
    let narrow =
        |v: usize, what: &str| u32::try_from(v).map_err(|_| FeatureError::Format(format!("{what} exceeds u32")));
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(narrow(set.dim, "dimension")?)?;
    out.write_u32::<LittleEndian>(narrow(set.samples.len(), "sample count")?)?;
    for s in &set.samples {
        out.write_u32::<LittleEndian>(s.label)?;
        for &v in &s.features {
            out.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    Ok(())
}

pub fn read_features<R: Read>(mut input: R) -> Result<FeatureSet, FeatureError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(eof)?;
    if &magic != MAGIC {
        return Err(FeatureError::Format("bad magic, expected FEAT".into()));
    }
    let dim = input.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let count = input.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let mut samples = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let label = input.read_u32::<LittleEndian>().map_err(eof)?;
        let features = (0..dim)
            .map(|_| input.read_f32::<LittleEndian>().map(f64::from).map_err(eof))
            .collect::<Result<Vec<_>, _>>()?;
        if features.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::Format(format!(
                "non-finite feature in sample {}",
                samples.len()
            )));
        }
        samples.push(Sample { label, features });
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(FeatureError::Format("trailing bytes after last sample".into()));
    }
    Ok(FeatureSet { dim, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> FeatureSet {
        FeatureSet::new(
            2,
            vec![
                Sample {
                    label: 3,
                    features: vec![0.5, -1.25],
                },
                Sample {
                    label: 0,
                    features: vec![2.0, 0.0],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn round_trip_and_layout() {
        let mut buf = Vec::new();
        write_features(&set(), &mut buf).unwrap();
        assert_eq!(buf.len(), 12 + 2 * 12);
        assert_eq!(&buf[..12], b"FEAT\x02\x00\x00\x00\x02\x00\x00\x00");
        assert_eq!(&buf[12..16], &[3, 0, 0, 0]);
        assert_eq!(&buf[16..20], &0.5f32.to_le_bytes());
        assert_eq!(read_features(buf.as_slice()).unwrap(), set());
    }

    #[test]
    fn rejects_bad_input() {
        let mut buf = Vec::new();
        write_features(&set(), &mut buf).unwrap();
        assert!(read_features(&buf[..buf.len() - 2]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_features(extra.as_slice()).is_err());
        assert!(FeatureSet::new(3, set().samples).is_err());
    }
}
