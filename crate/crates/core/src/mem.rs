// SPDX-License-Identifier: Apache-2.0

//! Layered guest memory with per-page restoration policies.
//!
//! Resolution order on access: private store, then eager-loaded pages, then
//! the shared base image, then the disk-backed demand file, then zero fill.
//! A write to a SharedCow or DemandDisk page promotes it to private and
//! records exactly one fault event: a memory fault for SharedCow, a disk
//! fault for DemandDisk (also charged when the first touch is a write:
//! read-modify-write semantics). Reads of SharedCow pages are free; the first
//! touch of a DemandDisk page, read or write, costs one disk fault.
//!
//! Two modes: `Content` materializes every byte (digests are meaningful),
//! `PolicyOnly` performs identical fault and policy bookkeeping without byte
//! work. Latency accounting never depends on page contents, so benchmarking
//! runs in `PolicyOnly`; anything that digests or compares memory must run in
//! `Content`.

use crate::pagefile::PageImage;

#[derive(Debug, thiserror::Error)]
pub enum MemError {
    #[error("page {page} outside memory of {num_pages} pages")]
    PageOutOfRange { page: u64, num_pages: u64 },
    #[error("page {page} has policy {policy:?} but no backing image provides it")]
    MissingBacking { page: u64, policy: PagePolicy },
    #[error("operation requires content mode, memory is policy-only")]
    NoContent,
}

/// Restoration policy of a page at boot; promotions update it at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PagePolicy {
    /// Never restored; reads observe zeros until first write.
    ZeroFill,
    /// Present in instance-private memory.
    ResidentPrivate,
    /// Backed by the shared in-memory base image, copy-on-write.
    SharedCow,
    /// Loaded from the disk file in one batched read at boot.
    EagerDisk,
    /// Faulted in from the disk file on first touch.
    DemandDisk,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaultCounters {
    /// First writes to SharedCow pages.
    pub cow_faults: u64,
    /// First touches of DemandDisk pages.
    pub demand_faults: u64,
}

impl FaultCounters {
    pub fn delta_since(&self, earlier: FaultCounters) -> FaultCounters {
        FaultCounters {
            cow_faults: self.cow_faults - earlier.cow_faults,
            demand_faults: self.demand_faults - earlier.demand_faults,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemoryMode {
    Content,
    PolicyOnly,
}

#[derive(Debug)]
pub struct LayeredMemory {
    page_size: u32,
    num_pages: u64,
    mode: MemoryMode,
    policies: Vec<PagePolicy>,
    /// Content mode tiers; empty vectors in policy-only mode.
    private: Vec<Option<Box<[u8]>>>,
    eager: Vec<Option<Box<[u8]>>>,
    /// Policy-only residency bits, mirroring the tiers above.
    private_bits: Vec<bool>,
    eager_bits: Vec<bool>,
    /// DemandDisk pages whose single disk fault has been charged.
    faulted: Vec<bool>,
    base: Option<PageImage>,
    disk: Option<PageImage>,
    zero_page: Box<[u8]>,
    counters: FaultCounters,
}

impl LayeredMemory {
    /// Fresh all-zero memory (every page ZeroFill), as a regular boot sees it.
    pub fn new_zero(num_pages: u64, page_size: u32, mode: MemoryMode) -> Self {
        Self::with_policies(
            vec![PagePolicy::ZeroFill; num_pages as usize],
            page_size,
            mode,
            None,
            None,
        )
    }

    /// Memory with explicit per-page policies and backing images. The base
    /// image serves SharedCow pages, the disk image Eager/DemandDisk pages.
    pub fn with_policies(
        policies: Vec<PagePolicy>,
        page_size: u32,
        mode: MemoryMode,
        base: Option<PageImage>,
        disk: Option<PageImage>,
    ) -> Self {
        let n = policies.len();
        let content = mode == MemoryMode::Content;
        LayeredMemory {
            page_size,
            num_pages: n as u64,
            mode,
            policies,
            private: if content { vec![None; n] } else { Vec::new() },
            eager: if content { vec![None; n] } else { Vec::new() },
            private_bits: vec![false; n],
            eager_bits: vec![false; n],
            faulted: vec![false; n],
            base,
            disk,
            zero_page: vec![0u8; page_size as usize].into_boxed_slice(),
            counters: FaultCounters::default(),
        }
    }

    pub fn num_pages(&self) -> u64 {
        self.num_pages
    }

    pub fn page_size(&self) -> u32 {
        self.page_size
    }

    pub fn mode(&self) -> MemoryMode {
        self.mode
    }

    pub fn counters(&self) -> FaultCounters {
        self.counters
    }

    pub fn policy(&self, page: u64) -> PagePolicy {
        self.policies[page as usize]
    }

    fn check(&self, page: u64) -> Result<usize, MemError> {
        if page < self.num_pages {
            Ok(page as usize)
        } else {
            Err(MemError::PageOutOfRange {
                page,
                num_pages: self.num_pages,
            })
        }
    }

    fn disk_bytes(&self, page: u64, policy: PagePolicy) -> Result<&[u8], MemError> {
        self.disk
            .as_deref()
            .and_then(|f| f.get(page))
            .ok_or(MemError::MissingBacking { page, policy })
    }

    fn base_bytes(&self, page: u64) -> Result<&[u8], MemError> {
        self.base
            .as_deref()
            .and_then(|f| f.get(page))
            .ok_or(MemError::MissingBacking {
                page,
                policy: PagePolicy::SharedCow,
            })
    }

    /// Install a page into the private tier without any fault accounting
    /// (snapshot generation and fully resident restores).
    pub fn install_private(&mut self, page: u64, bytes: &[u8]) -> Result<(), MemError> {
        let i = self.check(page)?;
        self.policies[i] = PagePolicy::ResidentPrivate;
        self.private_bits[i] = true;
        if self.mode == MemoryMode::Content {
            self.private[i] = Some(bytes.into());
        }
        Ok(())
    }

    /// Copy every EagerDisk page out of the disk image, returning the page
    /// count loaded. Boot charges this as one bandwidth-bound batch.
    pub fn load_eager(&mut self) -> Result<u64, MemError> {
        let mut loaded = 0;
        for i in 0..self.policies.len() {
            if self.policies[i] != PagePolicy::EagerDisk {
                continue;
            }
            if self.mode == MemoryMode::Content {
                let bytes: Box<[u8]> = self.disk_bytes(i as u64, PagePolicy::EagerDisk)?.into();
                self.eager[i] = Some(bytes);
            } else {
                self.disk_bytes(i as u64, PagePolicy::EagerDisk)?;
            }
            self.eager_bits[i] = true;
            loaded += 1;
        }
        Ok(loaded)
    }

    /// Read one page, charging a disk fault on the first touch of a
    /// DemandDisk page. Returns the observed bytes in content mode, `None` in
    /// policy-only mode.
    pub fn read_page(&mut self, page: u64) -> Result<Option<&[u8]>, MemError> {
        let i = self.check(page)?;
        if self.policies[i] == PagePolicy::DemandDisk && !self.faulted[i] {
            // Demand fault: the page becomes resident.
            self.counters.demand_faults += 1;
            self.faulted[i] = true;
            if self.mode == MemoryMode::Content {
                let bytes: Box<[u8]> = self.disk_bytes(page, PagePolicy::DemandDisk)?.into();
                self.private[i] = Some(bytes);
            } else {
                self.disk_bytes(page, PagePolicy::DemandDisk)?;
            }
            self.private_bits[i] = true;
        }
        if self.mode == MemoryMode::PolicyOnly {
            return Ok(None);
        }
        if let Some(p) = self.private[i].as_deref() {
            return Ok(Some(p));
        }
        if let Some(p) = self.eager[i].as_deref() {
            return Ok(Some(p));
        }
        match self.policies[i] {
            PagePolicy::SharedCow => self.base_bytes(page).map(Some),
            PagePolicy::EagerDisk => Err(MemError::MissingBacking {
                page,
                policy: PagePolicy::EagerDisk,
            }),
            _ => Ok(Some(&self.zero_page)),
        }
    }

    /// Overwrite one whole page, promoting it to private. `fill` receives the
    /// destination buffer in content mode and is skipped in policy-only mode.
    pub fn write_page_with(
        &mut self,
        page: u64,
        fill: impl FnOnce(&mut [u8]),
    ) -> Result<(), MemError> {
        let i = self.check(page)?;
        match self.policies[i] {
            PagePolicy::SharedCow => {
                self.counters.cow_faults += 1;
                self.policies[i] = PagePolicy::ResidentPrivate;
            }
            PagePolicy::DemandDisk => {
                if !self.faulted[i] {
                    self.counters.demand_faults += 1;
                    self.faulted[i] = true;
                }
                self.policies[i] = PagePolicy::ResidentPrivate;
            }
            PagePolicy::ZeroFill | PagePolicy::EagerDisk => {
                // Plain memory from the instance's point of view; whole-page
                // writes need no backing content.
            }
            PagePolicy::ResidentPrivate => {}
        }
        self.private_bits[i] = true;
        if self.mode == MemoryMode::Content {
            let buf = self.private[i]
                .get_or_insert_with(|| vec![0u8; self.page_size as usize].into_boxed_slice());
            fill(buf);
        }
        Ok(())
    }

    /// Resolve a page through the layering order without charging any fault,
    /// exactly as a snapshot capture or digest walk observes memory.
    pub fn peek_page(&self, page: u64) -> Result<&[u8], MemError> {
        let i = self.check(page)?;
        if self.mode == MemoryMode::PolicyOnly {
            return Err(MemError::NoContent);
        }
        if let Some(p) = self.private[i].as_deref() {
            return Ok(p);
        }
        if let Some(p) = self.eager[i].as_deref() {
            return Ok(p);
        }
        match self.policies[i] {
            PagePolicy::SharedCow => self.base_bytes(page),
            PagePolicy::EagerDisk | PagePolicy::DemandDisk => {
                self.disk_bytes(page, self.policies[i])
            }
            PagePolicy::ZeroFill | PagePolicy::ResidentPrivate => Ok(&self.zero_page),
        }
    }

    /// True if the page differs from all-zero when fully materialized.
    pub fn page_is_nonzero(&self, page: u64) -> Result<bool, MemError> {
        Ok(self.peek_page(page)?.iter().any(|&b| b != 0))
    }

    /// Pages holding instance-private content, in increasing order. After a
    /// run over clean layers these are exactly the pages written (demand
    /// reads also promote, so keep layers demand-free when capturing dirty
    /// sets).
    pub fn private_pages(&self) -> Vec<u64> {
        self.private_bits
            .iter()
            .enumerate()
            .filter_map(|(i, &set)| set.then_some(i as u64))
            .collect()
    }
}
