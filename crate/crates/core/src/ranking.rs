//! Orderings of arms by descending Whittle index.

use crate::error::{invalid, Result};
use crate::model::ArmId;
use crate::whittle::WhittleEntry;
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::HashMap;

/// A permutation of arm ids, best first. Positions are 1-based.
#[derive(Debug, Clone)]
pub struct Ranking {
    order: Vec<ArmId>,
    position: HashMap<ArmId, usize>,
}

impl PartialEq for Ranking {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
    }
}

impl Eq for Ranking {}

impl Serialize for Ranking {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.order.serialize(s)
    }
}

impl Ranking {
    /// Wraps an explicit order; ids must be distinct.
    pub fn new(order: Vec<ArmId>) -> Result<Self> {
        let mut position = HashMap::with_capacity(order.len());
        for (i, &id) in order.iter().enumerate() {
            if position.insert(id, i + 1).is_some() {
                return Err(invalid(format!("arm {id} appears twice in ranking")));
            }
        }
        Ok(Self { order, position })
    }

    /// `prefix` first, in order, then every other id of `all` in ascending id order.
    pub fn with_prefix(prefix: &[ArmId], all: impl IntoIterator<Item = ArmId>) -> Result<Self> {
        let mut order = prefix.to_vec();
        let mut rest: Vec<ArmId> = all.into_iter().collect();
        rest.sort_unstable();
        rest.dedup();
        let chosen: std::collections::HashSet<ArmId> = prefix.iter().copied().collect();
        order.extend(rest.into_iter().filter(|id| !chosen.contains(id)));
        Self::new(order)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn as_slice(&self) -> &[ArmId] {
        &self.order
    }

    pub fn into_vec(self) -> Vec<ArmId> {
        self.order
    }

    /// 1-based position of `id`.
    pub fn rank(&self, id: ArmId) -> Option<usize> {
        self.position.get(&id).copied()
    }

    pub fn contains(&self, id: ArmId) -> bool {
        self.position.contains_key(&id)
    }

    /// True when both rankings order the same set of ids.
    pub fn same_arms(&self, other: &Ranking) -> bool {
        self.len() == other.len() && self.order.iter().all(|id| other.contains(*id))
    }

    pub fn top_k(&self, k: usize) -> &[ArmId] {
        &self.order[..k.min(self.order.len())]
    }
}

/// Descending-index order with ties broken by ascending arm id.
pub fn compare_entries(a: &WhittleEntry, b: &WhittleEntry) -> Ordering {
    b.index
        .total_cmp(&a.index)
        .then_with(|| a.arm_id.cmp(&b.arm_id))
}

/// Sorts arms by descending Whittle index.
pub fn rank_by_index(entries: &[WhittleEntry]) -> Result<Ranking> {
    if let Some(bad) = entries.iter().find(|e| !e.index.is_finite()) {
        return Err(invalid(format!(
            "arm {} has non-finite index {}",
            bad.arm_id, bad.index
        )));
    }
    let mut sorted: Vec<&WhittleEntry> = entries.iter().collect();
    sorted.sort_by(|a, b| compare_entries(a, b));
    Ranking::new(sorted.into_iter().map(|e| e.arm_id).collect())
}

/// The first `min(k, n)` arms of the ranking.
pub fn select_top_k(ranking: &Ranking, k: usize) -> Vec<ArmId> {
    ranking.top_k(k).to_vec()
}
