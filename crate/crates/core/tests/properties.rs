mod common;

use proptest::prelude::*;
use slicesim::alloc::{first_fit, water_fill, AllocError, ShareRequest};
use slicesim::amount::Amount;
use slicesim::ids::SliceId;
use slicesim::scenario::{self, parse_validate, BUILTINS};
use slicesim::sim::congestion::{evaluate_congestion, latency_proxy, PoolEntry, PoolState, LATENCY_CAP};
use slicesim::sim::{generate_workload, WorkloadProfile};

use common::{a, water_fill_oracle};

fn amount(max: i64) -> impl Strategy<Value = Amount> {
    (0..=max * 4).prop_map(|n| Amount::new(n, 4))
}

fn requests() -> impl Strategy<Value = Vec<(Amount, Amount, Amount)>> {
    prop::collection::vec((amount(200), amount(40), (1i64..=6).prop_map(a)), 1..8)
}

proptest! {
    #[test]
    fn water_fill_agrees_with_level_solve(capacity in amount(500), reqs in requests()) {
        let shares: Vec<ShareRequest> = reqs.iter().map(|(d, f, w)| ShareRequest::new(*d, *f, *w)).collect();
        match (water_fill(capacity, &shares), water_fill_oracle(capacity, &reqs)) {
            (Ok(got), Some(want)) => {
                prop_assert_eq!(&got, &want);
                prop_assert!(got.iter().copied().sum::<Amount>() <= capacity);
                for (g, (d, f, _)) in got.iter().zip(&reqs) {
                    prop_assert!(g >= f && *g <= (*d).max(*f));
                }
            }
            (Err(AllocError::FloorsExceedCapacity { .. }), None) => {}
            (got, want) => prop_assert!(false, "water_fill {:?}, oracle {:?}", got, want),
        }
    }

    #[test]
    fn water_fill_ignores_request_order(capacity in amount(500), reqs in requests()) {
        let shares: Vec<ShareRequest> = reqs.iter().map(|(d, f, w)| ShareRequest::new(*d, *f, *w)).collect();
        let reversed: Vec<ShareRequest> = shares.iter().rev().cloned().collect();
        if let (Ok(x), Ok(mut y)) = (water_fill(capacity, &shares), water_fill(capacity, &reversed)) {
            y.reverse();
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn first_fit_never_overcommits(capacity in amount(300), demands in prop::collection::vec(amount(100), 0..10)) {
        let admitted = first_fit(capacity, &demands);
        let used: Amount = demands.iter().zip(&admitted).filter(|(_, ok)| **ok).map(|(d, _)| *d).sum();
        prop_assert!(used <= capacity);
        // A rejected request did not fit in what was left at its turn.
        let mut free = capacity;
        for (d, ok) in demands.iter().zip(&admitted) {
            prop_assert_eq!(*ok, *d <= free);
            if *ok { free -= *d; }
        }
    }

    #[test]
    fn congestion_caps_throughput_and_bounds_latency(
        pools in prop::collection::vec((amount(200), prop::collection::vec((0usize..4, amount(150), amount(150)), 0..5)), 1..4)
    ) {
        let states: Vec<PoolState> = pools
            .iter()
            .enumerate()
            .map(|(i, (capacity, entries))| PoolState {
                id: format!("p{i}"),
                capacity: *capacity,
                entries: entries
                    .iter()
                    .map(|(s, offered, allocated)| PoolEntry { slice: SliceId::new(format!("s{s}")), offered: *offered, allocated: *allocated })
                    .collect(),
            })
            .collect();
        let out = evaluate_congestion(&states);
        for p in &states {
            let u = out.utilization[&p.id];
            prop_assert!(!u.is_negative());
            for e in &p.entries {
                let s = &out.slices[&e.slice];
                prop_assert!(s.achieved <= e.offered && s.achieved <= e.allocated);
                prop_assert!(s.latency >= latency_proxy(u));
                prop_assert!(s.latency >= Amount::ONE && s.latency <= a(LATENCY_CAP));
            }
        }
    }

    #[test]
    fn latency_proxy_is_monotone(x in amount(2), y in amount(2)) {
        let (lo, hi) = (x.min(y), x.max(y));
        prop_assert!(latency_proxy(lo) <= latency_proxy(hi));
    }

    #[test]
    fn amounts_round_trip_through_text(n in -10_000i64..10_000, d in 1i64..500) {
        let x = Amount::new(n, d);
        prop_assert_eq!(x.to_string().parse::<Amount>().unwrap(), x);
        let json = serde_json::to_string(&x).unwrap();
        prop_assert_eq!(serde_json::from_str::<Amount>(&json).unwrap(), x);
    }

    #[test]
    fn poisson_workloads_are_seeded(seed in any::<u64>(), rate in 1i64..5, mean in 1i64..80) {
        let profile = WorkloadProfile::Poisson { rate: Amount::new(rate, 4), mean: a(mean) };
        let s = SliceId::new("s");
        let x = generate_workload(&s, &profile, seed, a(50)).unwrap();
        prop_assert_eq!(&x, &generate_workload(&s, &profile, seed, a(50)).unwrap());
        for w in x.windows(2) {
            prop_assert!(w[0].time < w[1].time);
        }
        for e in &x {
            prop_assert!(!e.time.is_negative() && e.time < a(50) && !e.load.is_negative());
        }
    }
}

#[test]
fn builtins_survive_a_json_round_trip() {
    for name in BUILTINS {
        let doc = scenario::builtin(name).unwrap();
        let back = parse_validate(&doc.to_json()).unwrap_or_else(|e| panic!("{name}: {e:?}"));
        assert_eq!(back, doc, "{name}");
        assert_eq!(back.digest(), doc.digest());
    }
}

#[test]
fn traces_survive_a_json_round_trip() {
    let out = scenario::fig6().run(3).unwrap();
    let json = serde_json::to_string(&out.trace).unwrap();
    let back: slicesim::trace::Trace = serde_json::from_str(&json).unwrap();
    assert_eq!(back.digest(), out.trace.digest());
}
