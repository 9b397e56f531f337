//! Share-capped throughput and the 1/(1-u) latency proxy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::SliceId;

/// Utilization at or above which the latency proxy saturates.
pub fn saturation() -> Amount {
    Amount::new(99, 100)
}

pub const LATENCY_CAP: i64 = 100;

/// `1 / (1 - u)`, capped at 100 once `u >= 0.99`.
pub fn latency_proxy(utilization: Amount) -> Amount {
    if utilization >= saturation() {
        Amount::from_int(LATENCY_CAP)
    } else {
        Amount::ONE / (Amount::ONE - utilization)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub slice: SliceId,
    pub offered: Amount,
    pub allocated: Amount,
}

/// One networking resource and the slices drawing on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolState {
    pub id: String,
    pub capacity: Amount,
    pub entries: Vec<PoolEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceOutcome {
    pub achieved: Amount,
    pub latency: Amount,
    pub bottleneck: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Congestion {
    pub slices: BTreeMap<SliceId, SliceOutcome>,
    pub utilization: BTreeMap<String, Amount>,
}

/// A slice achieves `min(offered, allocated)` on its tightest pool; its
/// latency proxy is taken at the most utilized pool it crosses.
pub fn evaluate_congestion(pools: &[PoolState]) -> Congestion {
    let mut achieved: BTreeMap<SliceId, Amount> = BTreeMap::new();
    for p in pools {
        for e in &p.entries {
            let a = e.offered.max(Amount::ZERO).min(e.allocated);
            achieved.entry(e.slice.clone()).and_modify(|x| *x = (*x).min(a)).or_insert(a);
        }
    }
    let mut out = Congestion::default();
    for p in pools {
        let total: Amount = p.entries.iter().map(|e| achieved[&e.slice]).sum();
        let u = if p.capacity.is_positive() {
            total / p.capacity
        } else if total.is_zero() {
            Amount::ZERO
        } else {
            Amount::ONE
        };
        out.utilization.insert(p.id.clone(), u);
    }
    for p in pools {
        let u = out.utilization[&p.id];
        for e in &p.entries {
            let lat = latency_proxy(u);
            let slot = out.slices.entry(e.slice.clone()).or_insert_with(|| SliceOutcome {
                achieved: achieved[&e.slice],
                latency: Amount::ONE,
                bottleneck: None,
            });
            if slot.bottleneck.is_none() || lat > slot.latency {
                slot.latency = lat;
                slot.bottleneck = Some(p.id.clone());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(v: i64) -> Amount {
        Amount::from_int(v)
    }

    fn one(offered: i64, allocated: i64, capacity: i64) -> SliceOutcome {
        let pool = PoolState {
            id: "p".into(),
            capacity: a(capacity),
            entries: vec![PoolEntry { slice: "s".into(), offered: a(offered), allocated: a(allocated) }],
        };
        evaluate_congestion(&[pool]).slices.remove(&SliceId::new("s")).unwrap()
    }

    #[test]
    fn examples() {
        let o = one(50, 100, 100);
        assert_eq!((o.achieved, o.latency), (a(50), a(2)));
        let o = one(0, 100, 100);
        assert_eq!((o.achieved, o.latency), (a(0), a(1)));
        let o = one(500, 50, 100);
        assert_eq!(o.achieved, a(50));
    }

    #[test]
    fn proxy_saturates() {
        assert_eq!(latency_proxy(Amount::new(98, 100)), a(50));
        assert_eq!(latency_proxy(Amount::new(99, 100)), a(100));
        assert_eq!(latency_proxy(a(1)), a(100));
    }

    #[test]
    fn tightest_pool_caps_and_worst_pool_sets_latency() {
        let pools = [
            PoolState { id: "x".into(), capacity: a(100), entries: vec![PoolEntry { slice: "s".into(), offered: a(80), allocated: a(60) }] },
            PoolState {
                id: "y".into(),
                capacity: a(80),
                entries: vec![
                    PoolEntry { slice: "s".into(), offered: a(80), allocated: a(70) },
                    PoolEntry { slice: "t".into(), offered: a(20), allocated: a(10) },
                ],
            },
        ];
        let c = evaluate_congestion(&pools);
        assert_eq!(c.slices[&SliceId::new("s")].achieved, a(60));
        assert_eq!(c.utilization["y"], Amount::new(70, 80));
        assert_eq!(c.slices[&SliceId::new("s")].bottleneck.as_deref(), Some("y"));
        assert_eq!(c.slices[&SliceId::new("s")].latency, Amount::new(8, 1));
    }
}
