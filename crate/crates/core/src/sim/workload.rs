//! Offered-load profiles turned into demand-change events.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::SliceId;

use super::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum WorkloadProfile {
    Constant { load: Amount },
    /// `before` from t=0, `after` from `at` on.
    Step { before: Amount, after: Amount, at: Amount },
    /// Load changes arrive at `rate` per tick; each new load is drawn from
    /// an exponential distribution with mean `mean`.
    Poisson { rate: Amount, mean: Amount },
}

impl WorkloadProfile {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: &Amount| if v.is_positive() { Ok(()) } else { Err(format!("{name} must be positive, got {v}")) };
        match self {
            WorkloadProfile::Constant { load } => positive("load", load),
            WorkloadProfile::Step { before, after, at } => {
                positive("before", before)?;
                positive("after", after)?;
                positive("at", at)
            }
            WorkloadProfile::Poisson { rate, mean } => {
                positive("rate", rate)?;
                positive("mean", mean)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandEvent {
    pub time: Amount,
    pub slice: SliceId,
    pub load: Amount,
}

fn time_grain() -> Amount {
    Amount::new(1, 1000)
}

fn load_grain() -> Amount {
    Amount::new(1, 100)
}

/// Quantizes a float onto `grain`, rounding down.
fn quantize(value: f64, grain: Amount) -> Amount {
    let steps = (value / grain.to_f64()).floor();
    Amount::from_int(steps as i64) * grain
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Demand changes for one slice before `horizon`. Each slice draws from its
/// own stream so adding a slice leaves the others unchanged.
pub fn generate_workload(slice: &SliceId, profile: &WorkloadProfile, seed: u64, horizon: Amount) -> Result<Vec<DemandEvent>, SimError> {
    profile.validate().map_err(SimError::InvalidProfile)?;
    let ev = |time: Amount, load: Amount| DemandEvent { time, slice: slice.clone(), load };
    let mut out = Vec::new();
    match profile {
        WorkloadProfile::Constant { load } => out.push(ev(Amount::ZERO, *load)),
        WorkloadProfile::Step { before, after, at } => {
            out.push(ev(Amount::ZERO, *before));
            if *at < horizon {
                out.push(ev(*at, *after));
            }
        }
        WorkloadProfile::Poisson { rate, mean } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(slice.as_str()));
            let gap = Exp::new(rate.to_f64()).map_err(|e| SimError::InvalidProfile(e.to_string()))?;
            let size = Exp::new(1.0 / mean.to_f64()).map_err(|e| SimError::InvalidProfile(e.to_string()))?;
            out.push(ev(Amount::ZERO, quantize(size.sample(&mut rng), load_grain())));
            let mut t = Amount::ZERO;
            loop {
                let dt = quantize(gap.sample(&mut rng), time_grain()).max(time_grain());
                t += dt;
                if t >= horizon {
                    break;
                }
                out.push(ev(t, quantize(size.sample(&mut rng), load_grain())));
                if out.len() > 1_000_000 {
                    return Err(SimError::HorizonExceeded { processed: out.len() });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(v: i64) -> Amount {
        Amount::from_int(v)
    }

    #[test]
    fn constant_and_step() {
        let s = SliceId::new("s");
        let c = generate_workload(&s, &WorkloadProfile::Constant { load: a(50) }, 0, a(100)).unwrap();
        assert_eq!(c, vec![DemandEvent { time: a(0), slice: s.clone(), load: a(50) }]);
        let st = generate_workload(&s, &WorkloadProfile::Step { before: a(50), after: a(500), at: a(50) }, 0, a(100)).unwrap();
        assert_eq!(st.iter().map(|e| (e.time, e.load)).collect::<Vec<_>>(), vec![(a(0), a(50)), (a(50), a(500))]);
    }

    #[test]
    fn poisson_is_seeded() {
        let s = SliceId::new("s");
        let p = WorkloadProfile::Poisson { rate: Amount::new(1, 2), mean: a(40) };
        let x = generate_workload(&s, &p, 7, a(100)).unwrap();
        assert_eq!(x, generate_workload(&s, &p, 7, a(100)).unwrap());
        assert_ne!(x, generate_workload(&s, &p, 8, a(100)).unwrap());
        assert!(x.windows(2).all(|w| w[0].time < w[1].time));
        assert!(x.iter().all(|e| e.time < a(100) && !e.load.is_negative()));
    }

    #[test]
    fn bad_parameters() {
        let s = SliceId::new("s");
        let bad = [
            WorkloadProfile::Constant { load: a(0) },
            WorkloadProfile::Step { before: a(1), after: a(2), at: a(-1) },
            WorkloadProfile::Poisson { rate: a(0), mean: a(1) },
        ];
        for p in bad {
            assert!(matches!(generate_workload(&s, &p, 0, a(10)), Err(SimError::InvalidProfile(_))));
        }
    }
}
