//! Access control with a total audit log, and trace verifiers for fault
//! containment and KPI bounds.
//!
//! Decisions are default-deny. An actor may touch a slice object only if
//! the object lies in the actor's management scope and some allow rule for
//! the actor's role covers the object class and verb. Overlay rule sets
//! (one per virtualization level above the platform) must each allow as
//! well, so stacked policies compose by intersection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::{ActorId, SliceId};
use crate::trace::{Trace, TraceBody};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectClass {
    Config,
    Kpis,
    Faults,
    Placement,
    Accounting,
    UserPolicies,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 6] = [
        ObjectClass::Config,
        ObjectClass::Kpis,
        ObjectClass::Faults,
        ObjectClass::Placement,
        ObjectClass::Accounting,
        ObjectClass::UserPolicies,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::Config => "config",
            ObjectClass::Kpis => "kpis",
            ObjectClass::Faults => "faults",
            ObjectClass::Placement => "placement",
            ObjectClass::Accounting => "accounting",
            ObjectClass::UserPolicies => "user-policies",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Read,
    Write,
}

impl Verb {
    pub const ALL: [Verb; 2] = [Verb::Read, Verb::Write];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Admin,
    Inp,
    Tenant,
    Oss,
    EndUser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Allow,
    Deny,
}

pub fn object_id(slice: &SliceId, class: ObjectClass) -> String {
    format!("{slice}/{}", class.as_str())
}

pub fn parse_object(object: &str) -> Option<(SliceId, ObjectClass)> {
    let (slice, class) = object.rsplit_once('/')?;
    let class = ObjectClass::ALL.into_iter().find(|c| c.as_str() == class)?;
    Some((SliceId::new(slice), class))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AccessRule {
    pub role: Role,
    pub class: ObjectClass,
    pub verb: Verb,
}

pub type RuleSet = BTreeSet<AccessRule>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpiBounds {
    pub throughput_floor: Amount,
    pub latency_ceiling: Amount,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolationPolicy {
    pub performance: BTreeMap<SliceId, KpiBounds>,
    pub rules: RuleSet,
    pub roles: BTreeMap<ActorId, Role>,
    pub management: BTreeMap<ActorId, BTreeSet<String>>,
    pub compartments: BTreeMap<SliceId, BTreeSet<String>>,
}

/// Tenants own everything in their slices; an OSS reads its slice and
/// writes configuration and fault records; end users read KPIs, faults,
/// placement and user policies.
pub fn default_rules() -> RuleSet {
    let mut rules = RuleSet::new();
    for class in ObjectClass::ALL {
        for verb in Verb::ALL {
            rules.insert(AccessRule { role: Role::Tenant, class, verb });
        }
        rules.insert(AccessRule { role: Role::Oss, class, verb: Verb::Read });
    }
    for class in [ObjectClass::Config, ObjectClass::Faults] {
        rules.insert(AccessRule { role: Role::Oss, class, verb: Verb::Write });
    }
    for class in [ObjectClass::Kpis, ObjectClass::Faults, ObjectClass::Placement, ObjectClass::UserPolicies] {
        rules.insert(AccessRule { role: Role::EndUser, class, verb: Verb::Read });
    }
    rules
}

/// `base` with end-user reads limited to `classes`.
pub fn end_user_overlay(base: &RuleSet, classes: &BTreeSet<ObjectClass>) -> RuleSet {
    base.iter().filter(|r| r.role != Role::EndUser || classes.contains(&r.class)).copied().collect()
}

impl IsolationPolicy {
    pub fn new(rules: RuleSet) -> Self {
        IsolationPolicy { rules, ..Default::default() }
    }

    pub fn set_role(&mut self, actor: &ActorId, role: Role) {
        self.roles.insert(actor.clone(), role);
    }

    /// Creates the compartment of `slice` and returns its object ids.
    pub fn register_slice(&mut self, slice: &SliceId) -> BTreeSet<String> {
        let objects: BTreeSet<String> = ObjectClass::ALL.iter().map(|c| object_id(slice, *c)).collect();
        self.compartments.insert(slice.clone(), objects.clone());
        objects
    }

    pub fn grant_scope(&mut self, actor: &ActorId, objects: &BTreeSet<String>) {
        self.management.entry(actor.clone()).or_default().extend(objects.iter().cloned());
    }

    /// Removes a slice's compartment and every scope entry pointing into it.
    pub fn remove_slice(&mut self, slice: &SliceId) {
        if let Some(objects) = self.compartments.remove(slice) {
            for scope in self.management.values_mut() {
                scope.retain(|o| !objects.contains(o));
            }
            self.management.retain(|_, s| !s.is_empty());
        }
        self.performance.remove(slice);
    }

    pub fn in_scope(&self, actor: &ActorId, object: &str) -> bool {
        self.management.get(actor).is_some_and(|s| s.contains(object))
    }

    pub fn decide(&self, actor: &ActorId, object: &str, verb: Verb, overlays: &[&RuleSet]) -> Decision {
        let (Some(role), Some((_, class))) = (self.roles.get(actor), parse_object(object)) else {
            return Decision::Deny;
        };
        let rule = AccessRule { role: *role, class, verb };
        if self.in_scope(actor, object) && self.rules.contains(&rule) && overlays.iter().all(|o| o.contains(&rule)) {
            Decision::Allow
        } else {
            Decision::Deny
        }
    }

    /// Whether compartments are pairwise disjoint.
    pub fn compartments_disjoint(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.compartments.values().flatten().all(|o| seen.insert(o))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub time: Amount,
    pub actor: ActorId,
    pub object: String,
    pub verb: Verb,
    pub decision: Decision,
}

/// Append-only record of every access decision.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
}

impl AuditLog {
    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Decides and records, whatever the outcome.
    pub fn authorize(
        &mut self,
        policy: &IsolationPolicy,
        overlays: &[&RuleSet],
        time: Amount,
        actor: &ActorId,
        object: &str,
        verb: Verb,
    ) -> Decision {
        let decision = policy.decide(actor, object, verb, overlays);
        self.records.push(AuditRecord {
            seq: self.records.len() as u64,
            time,
            actor: actor.clone(),
            object: object.to_string(),
            verb,
            decision,
        });
        decision
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IsolationError {
    #[error("unknown or inactive slice {0}")]
    UnknownSlice(SliceId),
    #[error("fault time {time} outside [{now}, {horizon})")]
    InvalidTime { time: Amount, now: Amount, horizon: Amount },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainmentViolation {
    pub seq: u64,
    pub object: String,
    /// Cause chain from the offending record back to the fault.
    pub chain: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub slice: SliceId,
    pub faults: usize,
    pub effects: usize,
    pub violations: Vec<ContainmentViolation>,
}

/// Checks that everything caused by faults injected into `slice` stays in
/// that slice's scope.
pub fn verify_containment(trace: &Trace, slice: &SliceId) -> ContainmentReport {
    let mut scope = trace.scopes().remove(slice).unwrap_or_default();
    scope.insert(slice.to_string());
    let roots: BTreeSet<u64> = trace
        .entries
        .iter()
        .filter(|e| matches!(&e.body, TraceBody::FaultInjection { slice: s, .. } if s == slice))
        .map(|e| e.seq)
        .collect();
    let mut report = ContainmentReport { slice: slice.clone(), faults: roots.len(), effects: 0, violations: Vec::new() };
    if roots.is_empty() {
        return report;
    }
    for e in &trace.entries {
        if e.cause.is_none() {
            continue;
        }
        let chain = trace.cause_chain(e.seq);
        if !chain.last().is_some_and(|root| roots.contains(root)) {
            continue;
        }
        report.effects += 1;
        for object in e.body.touched() {
            if !scope.contains(object) {
                report.violations.push(ContainmentViolation { seq: e.seq, object: object.to_string(), chain: chain.clone() });
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kpi {
    Throughput,
    Latency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpiViolation {
    pub slice: SliceId,
    pub tick: u64,
    pub kpi: Kpi,
    pub value: Amount,
    pub bound: Amount,
}

/// Lists every (slice, tick) where an Active slice misses its bounds.
///
/// The throughput floor is owed only up to what the slice offers. The
/// latency ceiling applies while the slice stays within its floor; above
/// it the slice is using best-effort capacity.
pub fn verify_performance(trace: &Trace, policy: &IsolationPolicy) -> Vec<KpiViolation> {
    let mut out = Vec::new();
    for e in &trace.entries {
        let TraceBody::MetricTick { tick, slices, .. } = &e.body else { continue };
        for (id, s) in slices {
            let Some(b) = policy.performance.get(id) else { continue };
            if s.state != crate::mano::SliceState::Active {
                continue;
            }
            let owed = s.offered.min(b.throughput_floor);
            if s.achieved < owed {
                out.push(KpiViolation { slice: id.clone(), tick: *tick, kpi: Kpi::Throughput, value: s.achieved, bound: owed });
            }
            if s.offered <= b.throughput_floor && s.latency > b.latency_ceiling {
                out.push(KpiViolation { slice: id.clone(), tick: *tick, kpi: Kpi::Latency, value: s.latency, bound: b.latency_ceiling });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mano::{FaultKind, SliceState};
    use crate::trace::{SliceSample, StateChange};

    fn policy() -> IsolationPolicy {
        let mut p = IsolationPolicy::new(default_rules());
        for (actor, role) in [("tenant-a", Role::Tenant), ("tenant-b", Role::Tenant), ("oss-1", Role::Oss), ("user-1", Role::EndUser)] {
            p.set_role(&actor.into(), role);
        }
        let s1 = p.register_slice(&"slice-1".into());
        let s2 = p.register_slice(&"slice-2".into());
        p.grant_scope(&"tenant-a".into(), &s1);
        p.grant_scope(&"oss-1".into(), &s1);
        p.grant_scope(&"user-1".into(), &s1);
        p.grant_scope(&"tenant-b".into(), &s2);
        p
    }

    #[test]
    fn authorize_examples() {
        let p = policy();
        let mut log = AuditLog::default();
        let t = Amount::ZERO;
        let d = log.authorize(&p, &[], t, &"tenant-a".into(), "slice-2/config", Verb::Read);
        assert_eq!(d, Decision::Deny);
        let d = log.authorize(&p, &[], t, &"oss-1".into(), "slice-1/kpis", Verb::Read);
        assert_eq!(d, Decision::Allow);
        let d = log.authorize(&p, &[], t, &"mallory".into(), "slice-1/kpis", Verb::Read);
        assert_eq!(d, Decision::Deny);
        assert_eq!(log.len(), 3);
        assert_eq!(log.records()[2].decision, Decision::Deny);
    }

    #[test]
    fn overlays_intersect() {
        let p = policy();
        let user = ActorId::new("user-1");
        assert_eq!(p.decide(&user, "slice-1/placement", Verb::Read, &[]), Decision::Allow);
        let overlay = end_user_overlay(&p.rules, &BTreeSet::from([ObjectClass::Kpis]));
        assert_eq!(p.decide(&user, "slice-1/placement", Verb::Read, &[&overlay]), Decision::Deny);
        assert_eq!(p.decide(&user, "slice-1/kpis", Verb::Read, &[&overlay]), Decision::Allow);
        assert_eq!(p.decide(&user, "slice-1/kpis", Verb::Write, &[&overlay]), Decision::Deny);
    }

    #[test]
    fn removing_slice_clears_scopes() {
        let mut p = policy();
        assert!(p.compartments_disjoint());
        p.remove_slice(&"slice-1".into());
        assert_eq!(p.decide(&"oss-1".into(), "slice-1/kpis", Verb::Read, &[]), Decision::Deny);
        assert!(!p.management.contains_key(&ActorId::new("oss-1")));
    }

    fn sample(state: SliceState, offered: i64, achieved: i64, latency: i64) -> SliceSample {
        SliceSample {
            state,
            offered: Amount::from_int(offered),
            achieved: Amount::from_int(achieved),
            latency: Amount::from_int(latency),
            allocations: BTreeMap::new(),
        }
    }

    fn tick(trace: &mut Trace, n: u64, slices: Vec<(&str, SliceSample)>) {
        let slices = slices.into_iter().map(|(s, x)| (SliceId::new(s), x)).collect();
        trace.push(Amount::from_int(n as i64), None, TraceBody::MetricTick { tick: n, slices, pools: BTreeMap::new() });
    }

    #[test]
    fn performance_detector() {
        let mut p = IsolationPolicy::default();
        p.performance.insert("s".into(), KpiBounds { throughput_floor: Amount::from_int(20), latency_ceiling: Amount::from_int(10) });
        let mut trace = Trace::default();
        tick(&mut trace, 0, vec![("s", sample(SliceState::Active, 30, 25, 2))]);
        assert!(verify_performance(&trace, &p).is_empty());
        tick(&mut trace, 1, vec![("s", sample(SliceState::Active, 30, 15, 2))]);
        let v = verify_performance(&trace, &p);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].tick, v[0].kpi, v[0].value, v[0].bound), (1, Kpi::Throughput, Amount::from_int(15), Amount::from_int(20)));
        assert!(verify_performance(&Trace::default(), &p).is_empty());
    }

    #[test]
    fn containment_detector() {
        let mut trace = Trace::default();
        let t = Amount::from_int(30);
        for (s, objs) in [("s1", ["vnf-1", "oss-1"]), ("s2", ["vnf-2", "oss-2"])] {
            trace.push(Amount::ZERO, None, TraceBody::SliceScope { slice: s.into(), objects: objs.iter().map(|o| o.to_string()).collect() });
        }
        assert!(verify_containment(&trace, &"s1".into()).violations.is_empty());

        let f = trace.push(t, None, TraceBody::FaultInjection { slice: "s1".into(), kind: FaultKind::VnfCrash });
        let c = trace.push(t, Some(f), TraceBody::Transition { object: "s1".into(), change: StateChange::Slice { from: SliceState::Active, to: SliceState::Faulted } });
        trace.push(t, Some(c), TraceBody::FaultEffect { target: "oss-1".into(), detail: "notice".into() });
        let clean = verify_containment(&trace, &"s1".into());
        assert_eq!((clean.faults, clean.effects), (1, 2));
        assert!(clean.violations.is_empty());

        let leak = trace.push(t, Some(c), TraceBody::FaultEffect { target: "oss-2".into(), detail: "forwarded".into() });
        let r = verify_containment(&trace, &"s1".into());
        assert_eq!(r.violations, vec![ContainmentViolation { seq: leak, object: "oss-2".into(), chain: vec![leak, c, f] }]);
    }
}
