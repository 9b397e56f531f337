//! Allocation policies shared by SDN orchestration and the tenant RO.
//!
//! Two regimes are supported:
//!
//! * [`AllocationPolicy::Dedicated`]: requests are served in arrival order,
//!   each either fully reserved or rejected. Nothing one request does can
//!   change another request's reservation.
//! * [`AllocationPolicy::SharedWithFloors`]: every admitted request is
//!   guaranteed its floor; capacity is then divided by weighted max-min
//!   fairness (water-filling) up to each request's demand.

use serde::{Deserialize, Serialize};

use crate::amount::Amount;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationPolicy {
    #[default]
    Dedicated,
    SharedWithFloors,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareRequest {
    pub demand: Amount,
    pub floor: Amount,
    pub weight: Amount,
}

impl ShareRequest {
    pub fn new(demand: Amount, floor: Amount, weight: Amount) -> Self {
        ShareRequest { demand, floor, weight }
    }

    fn upper(&self) -> Amount {
        self.demand.max(self.floor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AllocError {
    #[error("floors sum to {floors}, above capacity {capacity}")]
    FloorsExceedCapacity { floors: Amount, capacity: Amount },
    #[error("weights must be positive")]
    NonPositiveWeight,
    #[error("negative demand or floor")]
    Negative,
}

/// Order-respecting all-or-reject admission: request `i` is admitted iff it
/// fits in what the earlier admitted requests left over.
pub fn first_fit(capacity: Amount, demands: &[Amount]) -> Vec<bool> {
    let mut free = capacity;
    demands
        .iter()
        .map(|d| {
            if *d <= free {
                free -= *d;
                true
            } else {
                false
            }
        })
        .collect()
}

/// Weighted max-min fair shares with guaranteed floors.
///
/// Each request ends with `clamp(weight * level, floor, max(demand, floor))`
/// for a common water level. Requests whose fair share falls below their
/// floor are pinned at the floor and the remaining capacity is re-divided
/// among the others until no new request needs pinning.
pub fn water_fill(capacity: Amount, requests: &[ShareRequest]) -> Result<Vec<Amount>, AllocError> {
    if requests.iter().any(|r| !r.weight.is_positive()) {
        return Err(AllocError::NonPositiveWeight);
    }
    if requests.iter().any(|r| r.demand.is_negative() || r.floor.is_negative()) {
        return Err(AllocError::Negative);
    }
    let floors: Amount = requests.iter().map(|r| r.floor).sum();
    if floors > capacity {
        return Err(AllocError::FloorsExceedCapacity { floors, capacity });
    }
    let total: Amount = requests.iter().map(|r| r.upper()).sum();
    if total <= capacity {
        return Ok(requests.iter().map(|r| r.upper()).collect());
    }

    let mut pinned = vec![false; requests.len()];
    loop {
        let available = capacity
            - requests.iter().zip(&pinned).filter(|(_, p)| **p).map(|(r, _)| r.floor).sum::<Amount>();
        let free: Vec<usize> = (0..requests.len()).filter(|i| !pinned[*i]).collect();
        let shares = max_min(available, free.iter().map(|i| (requests[*i].upper(), requests[*i].weight)));

        let mut newly = false;
        for (slot, i) in free.iter().enumerate() {
            if shares[slot] < requests[*i].floor {
                pinned[*i] = true;
                newly = true;
            }
        }
        if !newly {
            let mut out: Vec<Amount> = requests.iter().map(|r| r.floor).collect();
            for (slot, i) in free.iter().enumerate() {
                out[*i] = shares[slot];
            }
            return Ok(out);
        }
    }
}

/// Plain weighted max-min over `(cap, weight)` items.
fn max_min(capacity: Amount, items: impl Iterator<Item = (Amount, Amount)>) -> Vec<Amount> {
    let items: Vec<(Amount, Amount)> = items.collect();
    let mut out = vec![Amount::ZERO; items.len()];
    let mut remaining: Vec<usize> = (0..items.len()).collect();
    let mut left = capacity;
    while !remaining.is_empty() {
        let weights: Amount = remaining.iter().map(|i| items[*i].1).sum();
        let per_weight = left / weights;
        let (done, rest): (Vec<usize>, Vec<usize>) =
            remaining.iter().partition(|i| items[**i].0 <= items[**i].1 * per_weight);
        if done.is_empty() {
            for i in rest {
                out[i] = items[i].1 * per_weight;
            }
            break;
        }
        for i in done {
            out[i] = items[i].0;
            left -= items[i].0;
        }
        remaining = rest;
    }
    out
}

/// Admits requests in order while their floors fit.
pub fn admit_floors(capacity: Amount, floors: &[Amount]) -> Vec<bool> {
    first_fit(capacity, floors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(v: i64) -> Amount {
        Amount::from_int(v)
    }

    fn req(d: i64, f: i64, w: i64) -> ShareRequest {
        ShareRequest::new(a(d), a(f), a(w))
    }

    #[test]
    fn equal_split_under_contention() {
        assert_eq!(water_fill(a(100), &[req(80, 0, 1), req(80, 0, 1)]).unwrap(), vec![a(50), a(50)]);
    }

    #[test]
    fn floors_then_surplus() {
        assert_eq!(water_fill(a(100), &[req(90, 20, 1), req(30, 20, 1)]).unwrap(), vec![a(70), a(30)]);
    }

    #[test]
    fn floor_pins_low_weight_request() {
        // level 100/3 for weight 1 is below the floor 40 of the first request
        let got = water_fill(a(100), &[req(100, 40, 1), req(100, 0, 2)]).unwrap();
        assert_eq!(got, vec![a(40), a(60)]);
    }

    #[test]
    fn fractional_levels_stay_exact() {
        let got = water_fill(a(10), &[req(10, 0, 1), req(10, 0, 1), req(10, 0, 1)]).unwrap();
        assert_eq!(got, vec![Amount::new(10, 3); 3]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(water_fill(a(10), &[req(5, 6, 1), req(5, 6, 1)]), Err(AllocError::FloorsExceedCapacity { .. })));
        assert_eq!(water_fill(a(10), &[req(5, 0, 0)]), Err(AllocError::NonPositiveWeight));
    }

    #[test]
    fn first_fit_is_order_respecting() {
        assert_eq!(first_fit(a(100), &[a(60), a(60)]), vec![true, false]);
        assert_eq!(first_fit(a(100), &[a(60), a(60), a(40)]), vec![true, false, true]);
    }
}
