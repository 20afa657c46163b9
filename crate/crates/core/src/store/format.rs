//! `.mwie` binary container.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "MWIE" | version u16 | dim u32 | label_count u32 | record_count u64
//! label_count × (u16 byte length | UTF-8 name)
//! record_count × (record_id u64 | group_id u64 | n u16 | n × u32 sorted label | dim × f32)
//! ```

use std::fs;
use std::path::Path;

use super::{EmbeddingDataset, EmbeddingRecord};
use crate::codec::{put_string, ByteReader};
use crate::error::{Error, Result};

pub const MWIE_MAGIC: [u8; 4] = *b"MWIE";
pub const MWIE_VERSION: u16 = 1;

pub fn write_dataset(ds: &EmbeddingDataset) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(26 + ds.records.len() * (24 + 4 * ds.dim));
    out.extend_from_slice(&MWIE_MAGIC);
    out.extend_from_slice(&MWIE_VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.dim as u32).to_le_bytes());
    out.extend_from_slice(&(ds.label_vocab.len() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.records.len() as u64).to_le_bytes());
    for name in &ds.label_vocab {
        put_string(&mut out, name)?;
    }
    for r in &ds.records {
        out.extend_from_slice(&r.record_id.to_le_bytes());
        out.extend_from_slice(&r.group_id.to_le_bytes());
        let n = u16::try_from(r.labels.len()).map_err(|_| {
            Error::InvalidDataset(format!("record {} has too many labels", r.record_id))
        })?;
        out.extend_from_slice(&n.to_le_bytes());
        for l in &r.labels {
            out.extend_from_slice(&l.to_le_bytes());
        }
        for x in &r.vector {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_dataset(bytes: &[u8]) -> Result<EmbeddingDataset> {
    let mut rd = ByteReader::new(bytes);
    rd.magic(MWIE_MAGIC)?;
    let version = rd.u16("version")?;
    if version != MWIE_VERSION {
        return Err(Error::UnsupportedVersion {
            expected: MWIE_VERSION,
            found: version,
        });
    }
    let dim = rd.u32("dim")? as usize;
    let label_count = rd.u32("label count")? as usize;
    let record_count = rd.u64("record count")?;

    let mut vocab = Vec::with_capacity(label_count.min(1 << 16));
    for _ in 0..label_count {
        vocab.push(rd.string("label name")?);
    }

    // Cap the preallocation so a corrupt count cannot request absurd memory.
    let mut records = Vec::with_capacity((record_count as usize).min(1 << 20));
    for _ in 0..record_count {
        let record_id = rd.u64("record id")?;
        let group_id = rd.u64("group id")?;
        let n = rd.u16("record label count")? as usize;
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let l = rd.u32("record label")?;
            if l as usize >= label_count {
                return Err(Error::LabelOutOfRange {
                    record_id,
                    label: l,
                    label_count,
                });
            }
            labels.push(l);
        }
        let raw = rd.take(dim * 4, "record vector")?;
        let vector = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        records.push(EmbeddingRecord {
            record_id,
            group_id,
            vector,
            labels,
        });
    }
    rd.finish()?;
    EmbeddingDataset::new(dim, vocab, records)
}

pub fn save_dataset(ds: &EmbeddingDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(&path, write_dataset(ds)?).map_err(Error::file(&path))?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<EmbeddingDataset> {
    read_dataset(&fs::read(&path).map_err(Error::file(&path))?)
}
