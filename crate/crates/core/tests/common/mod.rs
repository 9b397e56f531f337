//! Independent oracles shared by the integration tests. None of these call
//! into the code they check beyond reading its public state.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use slicesim::amount::Amount;
use slicesim::ids::{ActorId, SliceId};
use slicesim::resource::{Provenance, ResourceId, ResourceModel};
use slicesim::scenario::ScenarioDocument;

/// Checks, for every live resource, that the shares its live children hold
/// fit in its capacity. Partitions hold their share; aggregations hold the
/// whole member.
pub fn conservation(model: &ResourceModel) -> Result<(), String> {
    let mut claims: BTreeMap<ResourceId, Amount> = BTreeMap::new();
    let capacity: BTreeMap<ResourceId, Amount> = model.iter_live().map(|r| (r.id, r.capacity)).collect();
    for r in model.iter_live() {
        match &r.provenance {
            Provenance::Physical => {}
            Provenance::Partition { parent, share } => *claims.entry(*parent).or_insert(Amount::ZERO) += *share,
            Provenance::Aggregation { parents } => {
                for p in parents {
                    *claims.entry(*p).or_insert(Amount::ZERO) += capacity.get(p).copied().unwrap_or(Amount::ZERO);
                }
            }
        }
    }
    for (id, claimed) in claims {
        let Some(cap) = capacity.get(&id) else {
            return Err(format!("{id:?} is released but still has live children"));
        };
        if claimed > *cap {
            return Err(format!("{id:?}: children hold {claimed} of {cap}"));
        }
    }
    Ok(())
}

/// Weighted water filling with floors, solved by locating the water level
/// on the piecewise-linear fill curve.
///
/// Each request gets `clamp(w * L, floor, max(demand, floor))`; `L` is the
/// smallest level at which the allocations use all of `capacity`, or
/// unbounded when everything fits. Returns `None` when the floors alone
/// exceed the capacity.
pub fn water_fill_oracle(capacity: Amount, requests: &[(Amount, Amount, Amount)]) -> Option<Vec<Amount>> {
    let floors: Amount = requests.iter().map(|r| r.1).sum();
    if floors > capacity {
        return None;
    }
    let top = |r: &(Amount, Amount, Amount)| r.0.max(r.1);
    if requests.iter().map(top).sum::<Amount>() <= capacity {
        return Some(requests.iter().map(top).collect());
    }
    let fill = |level: Amount| -> Amount { requests.iter().map(|r| (r.2 * level).max(r.1).min(top(r))).sum() };
    let mut points: Vec<Amount> = requests.iter().flat_map(|r| [r.1 / r.2, top(r) / r.2]).collect();
    points.push(Amount::ZERO);
    points.sort();
    points.dedup();
    // fill() is linear between consecutive breakpoints.
    let mut lo = Amount::ZERO;
    for &hi in &points {
        if fill(hi) >= capacity {
            let (f_lo, f_hi) = (fill(lo), fill(hi));
            let level = if f_hi == f_lo { hi } else { lo + (capacity - f_lo) * (hi - lo) / (f_hi - f_lo) };
            return Some(requests.iter().map(|r| (r.2 * level).max(r.1).min(top(r))).collect());
        }
        lo = hi;
    }
    unreachable!("the last breakpoint fills every request")
}

/// Who may legitimately hold a slice object in scope: its tenant, its OSS
/// and the end user who requested it.
pub fn scope_oracle(doc: &ScenarioDocument, oss_of: &BTreeMap<SliceId, String>) -> BTreeMap<ActorId, BTreeSet<SliceId>> {
    let mut out: BTreeMap<ActorId, BTreeSet<SliceId>> = BTreeMap::new();
    for s in &doc.slices {
        out.entry(s.tenant.clone()).or_default().insert(s.id.clone());
        out.entry(s.requester.clone()).or_default().insert(s.id.clone());
        if let Some(oss) = oss_of.get(&s.id) {
            out.entry(ActorId::new(oss.clone())).or_default().insert(s.id.clone());
        }
    }
    out
}

/// Whole-word tokens of a text, where words are runs of letters, digits,
/// `-` and `_`.
pub fn tokens(text: &str) -> BTreeSet<&str> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == '_')).filter(|t| !t.is_empty()).collect()
}

pub fn a(v: i64) -> Amount {
    Amount::from_int(v)
}
