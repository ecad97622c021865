//! Greedy construction of instantly decodable (XOR) packets from the devices'
//! Wants sets, their classification by delivery cost, and the two-way split
//! that lets a vector with no free transmitter go out over D2D links.
//!
//! Each group vector has one entry per device: the packet that device is
//! still missing among the vector's constituents, or `None` when the device
//! already has them all. A vector is instantly decodable by construction:
//! every device with a non-`None` entry misses exactly that one constituent.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

pub type DeviceId = usize;

/// One IDNC vector: per-device missing constituent (or `None`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupVector {
    pub entries: Vec<Option<usize>>,
}

impl GroupVector {
    fn new(n: usize) -> Self {
        GroupVector { entries: vec![None; n] }
    }

    pub fn n_devices(&self) -> usize {
        self.entries.len()
    }

    /// Distinct packets combined in this vector.
    pub fn constituents(&self) -> BTreeSet<usize> {
        self.entries.iter().flatten().copied().collect()
    }

    /// Devices with a non-`None` entry (the targeted receivers of the vector).
    pub fn targets(&self) -> Vec<DeviceId> {
        (0..self.entries.len()).filter(|&n| self.entries[n].is_some()).collect()
    }

    /// Devices holding every constituent (eligible local transmitters).
    pub fn holders(&self) -> Vec<DeviceId> {
        (0..self.entries.len()).filter(|&n| self.entries[n].is_none()).collect()
    }

    fn is_source_only(&self) -> bool {
        match self.entries.first() {
            Some(Some(p)) => self.entries.iter().all(|e| *e == Some(*p)),
            _ => false,
        }
    }

    fn has_hole(&self) -> bool {
        self.entries.iter().any(|e| e.is_none())
    }
}

/// Class of a group vector: how many slots it needs on each interface.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum GroupClass {
    /// Wanted by every device; only the source can send it (1 cellular slot).
    SourceOnly,
    /// No device holds all constituents; 1 cellular slot or 2 D2D slots.
    LocalSplit,
    /// Some device holds all constituents; 1 slot on either interface.
    LocalReady,
}

/// Output of the grouping pass, each class in creation order.
#[derive(Clone, Debug, Default)]
pub struct Groups {
    pub source_only: Vec<GroupVector>,
    pub local_split: Vec<GroupVector>,
    pub local_ready: Vec<GroupVector>,
}

impl Groups {
    pub fn is_empty(&self) -> bool {
        self.source_only.is_empty() && self.local_split.is_empty() && self.local_ready.is_empty()
    }

    pub fn classify(v: &GroupVector) -> GroupClass {
        if v.is_source_only() {
            GroupClass::SourceOnly
        } else if v.has_hole() {
            GroupClass::LocalReady
        } else {
            GroupClass::LocalSplit
        }
    }
}

/// Builds group vectors from the per-device Wants sets.
///
/// Packets are processed in ascending order. Each packet's fresh vector is
/// merged into the lowest-index earlier vector whose entries are `None` at
/// every device wanting the packet (first fit), otherwise kept as a new
/// vector. Finally the vectors are classified.
pub fn group_wants(wants: &[BTreeSet<usize>]) -> Groups {
    let n = wants.len();
    let universe: BTreeSet<usize> = wants.iter().flatten().copied().collect();
    let mut vectors: Vec<GroupVector> = Vec::new();

    for &p in &universe {
        let wanters: Vec<DeviceId> = (0..n).filter(|&d| wants[d].contains(&p)).collect();
        let merged = vectors
            .iter_mut()
            .find(|v| wanters.iter().all(|&d| v.entries[d].is_none()));
        match merged {
            Some(v) => {
                for &d in &wanters {
                    v.entries[d] = Some(p);
                }
            }
            None => {
                let mut v = GroupVector::new(n);
                for &d in &wanters {
                    v.entries[d] = Some(p);
                }
                vectors.push(v);
            }
        }
    }

    let mut groups = Groups::default();
    for v in vectors {
        match Groups::classify(&v) {
            GroupClass::SourceOnly => groups.source_only.push(v),
            GroupClass::LocalSplit => groups.local_split.push(v),
            GroupClass::LocalReady => groups.local_ready.push(v),
        }
    }
    groups
}

/// Splits a `LocalSplit` vector for D2D delivery around device `x`.
///
/// The partial covers every entry different from `x`'s (transmittable by `x`,
/// which holds all of them); the residual covers `x`'s own missing packet and
/// targets every device missing that same packet.
pub fn split_local(v: &GroupVector, x: DeviceId) -> Result<(GroupVector, GroupVector)> {
    if Groups::classify(v) != GroupClass::LocalSplit {
        return Err(Error::InvalidPlan(
            "only a vector with no free transmitter can be split".into(),
        ));
    }
    if x >= v.n_devices() {
        return Err(Error::Shape(format!("device {x} out of range")));
    }
    let own = v.entries[x];
    let mut partial = GroupVector::new(v.n_devices());
    let mut residual = GroupVector::new(v.n_devices());
    for (d, e) in v.entries.iter().enumerate() {
        if *e == own {
            residual.entries[d] = *e;
        } else {
            partial.entries[d] = *e;
        }
    }
    Ok((partial, residual))
}
