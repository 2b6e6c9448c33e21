//! `CLPS` prototype store files.
//!
//! ```text
//! "CLPS" | version u16 | dim u32 | count u32
//! per prototype: label u32 | birth_step u64 | weights i8 x dim
//! ```
//! Little-endian. Capacity and novelty threshold are run configuration and
//! are supplied again on load.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{ClpConfig, ClpError, Prototype, PrototypeStore, Result};

const MAGIC: &[u8; 4] = b"CLPS";
const VERSION: u16 = 1;

fn eof(e: io::Error) -> ClpError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        ClpError::Format("truncated file".into())
    } else {
        ClpError::Io(e)
    }
}

pub fn write_store<W: Write>(store: &PrototypeStore, mut out: W) -> Result<()> {
    let dim = u32::try_from(store.dim()).map_err(|_| ClpError::Format("dimension exceeds u32".into()))?;
    out.write_all(MAGIC)?;
    out.write_u16::<LittleEndian>(VERSION)?;
    out.write_u32::<LittleEndian>(dim)?;
    out.write_u32::<LittleEndian>(store.len() as u32)?;
    for p in store.prototypes() {
        out.write_u32::<LittleEndian>(p.label)?;
        out.write_u64::<LittleEndian>(p.birth_step)?;
        let bytes: Vec<u8> = p.weights.iter().map(|&w| w as u8).collect();
        out.write_all(&bytes)?;
    }
    Ok(())
}

pub fn read_store<R: Read>(mut input: R, config: ClpConfig) -> Result<PrototypeStore> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(eof)?;
    if &magic != MAGIC {
        return Err(ClpError::Format("bad magic, expected CLPS".into()));
    }
    let version = input.read_u16::<LittleEndian>().map_err(eof)?;
    if version != VERSION {
        return Err(ClpError::Format(format!("unsupported version {version}")));
    }
    let dim = input.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let count = input.read_u32::<LittleEndian>().map_err(eof)? as usize;
    let mut prototypes = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let label = input.read_u32::<LittleEndian>().map_err(eof)?;
        let birth_step = input.read_u64::<LittleEndian>().map_err(eof)?;
        let mut raw = vec![0u8; dim];
        input.read_exact(&mut raw).map_err(eof)?;
        if raw.contains(&0x80) {
            return Err(ClpError::Format("weight -128 outside the symmetric 8-bit range".into()));
        }
        prototypes.push(Prototype {
            weights: raw.into_iter().map(|b| b as i8).collect(),
            label,
            birth_step,
        });
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(ClpError::Format("trailing bytes after last prototype".into()));
    }
    PrototypeStore::from_prototypes(dim, config, prototypes)
}
