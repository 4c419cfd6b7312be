// SPDX-License-Identifier: Apache-2.0

//! Sparse page file: the on-disk carrier for snapshot memory.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  b"SNAPPG01" (6-byte format tag + 2 ASCII version digits)
//! page_size  u32
//! entry_count u64
//! entries    entry_count * (page_id u64, payload page_size bytes)
//! ```
//!
//! Page ids are strictly increasing. Readers reject trailing bytes, truncated
//! payloads and ordering violations as `CorruptFile`; a well-formed header
//! with an unknown version is `VersionMismatch`.

use std::io::{self, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::hash::Fnv64;

const MAGIC_TAG: &[u8; 6] = b"SNAPPG";
const MAGIC_VERSION: &[u8; 2] = b"01";

#[derive(Debug, thiserror::Error)]
pub enum PageFileError {
    #[error("corrupt page file: {0}")]
    CorruptFile(String),
    #[error("unsupported page file version {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },
    #[error("i/o error on page file: {0}")]
    Io(#[from] io::Error),
}

/// Sorted sparse set of page payloads, all of one page size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePageFile {
    page_size: u32,
    entries: Vec<(u64, Box<[u8]>)>,
}

impl SparsePageFile {
    /// Build from pre-sorted entries. Panics on ordering or size violations;
    /// callers construct these from tracked state, never from external input.
    pub fn from_entries(page_size: u32, entries: Vec<(u64, Box<[u8]>)>) -> Self {
        assert!(page_size > 0, "page size must be nonzero");
        for pair in entries.windows(2) {
            assert!(pair[0].0 < pair[1].0, "page ids must strictly increase");
        }
        for (_, payload) in &entries {
            assert_eq!(payload.len(), page_size as usize, "payload size mismatch");
        }
        SparsePageFile { page_size, entries }
    }

    pub fn page_size(&self) -> u32 {
        self.page_size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total payload bytes (page count times page size).
    pub fn total_bytes(&self) -> u64 {
        self.entries.len() as u64 * u64::from(self.page_size)
    }

    pub fn page_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|(id, _)| *id)
    }

    pub fn contains(&self, page_id: u64) -> bool {
        self.get(page_id).is_some()
    }

    pub fn get(&self, page_id: u64) -> Option<&[u8]> {
        self.entries
            .binary_search_by_key(&page_id, |(id, _)| *id)
            .ok()
            .map(|i| &*self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[u8])> + '_ {
        self.entries.iter().map(|(id, p)| (*id, &**p))
    }

    /// Content digest over the exact serialized form.
    pub fn digest(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write(&u64::from(self.page_size).to_le_bytes());
        h.write_u64(self.entries.len() as u64);
        for (id, payload) in &self.entries {
            h.write_u64(*id);
            h.write(payload);
        }
        h.finish()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), PageFileError> {
        w.write_all(MAGIC_TAG)?;
        w.write_all(MAGIC_VERSION)?;
        w.write_all(&self.page_size.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for (id, payload) in &self.entries {
            w.write_all(&id.to_le_bytes())?;
            w.write_all(payload)?;
        }
        Ok(())
    }

    pub fn write_to_path(&self, path: &Path) -> Result<(), PageFileError> {
        let mut f = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, PageFileError> {
        let mut magic = [0u8; 8];
        read_exact(r, &mut magic, "magic")?;
        if &magic[..6] != MAGIC_TAG {
            return Err(PageFileError::CorruptFile(format!(
                "bad magic {magic:02x?}"
            )));
        }
        if &magic[6..8] != MAGIC_VERSION {
            return Err(PageFileError::VersionMismatch {
                found: String::from_utf8_lossy(&magic[6..8]).into_owned(),
                expected: String::from_utf8_lossy(MAGIC_VERSION).into_owned(),
            });
        }
        let page_size = read_u32(r, "page_size")?;
        if page_size == 0 {
            return Err(PageFileError::CorruptFile("page_size is zero".into()));
        }
        let entry_count = read_u64(r, "entry_count")?;
        let mut entries = Vec::new();
        let mut last_id: Option<u64> = None;
        for i in 0..entry_count {
            let id = read_u64(r, "page_id")?;
            if let Some(prev) = last_id {
                if id <= prev {
                    return Err(PageFileError::CorruptFile(format!(
                        "page ids out of order at entry {i}: {prev} then {id}"
                    )));
                }
            }
            last_id = Some(id);
            let mut payload = vec![0u8; page_size as usize];
            read_exact(r, &mut payload, "page payload")?;
            entries.push((id, payload.into_boxed_slice()));
        }
        let mut trailing = [0u8; 1];
        match r.read(&mut trailing)? {
            0 => Ok(SparsePageFile { page_size, entries }),
            _ => Err(PageFileError::CorruptFile(
                "trailing bytes after last entry".into(),
            )),
        }
    }

    pub fn read_from_path(path: &Path) -> Result<Self, PageFileError> {
        let mut f = io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

/// Shared, immutable page file handle; snapshot images are mapped read-only
/// into many instances at once.
pub type PageImage = Arc<SparsePageFile>;

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), PageFileError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            PageFileError::CorruptFile(format!("truncated while reading {what}"))
        } else {
            PageFileError::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32, PageFileError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64, PageFileError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}
