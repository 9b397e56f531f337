//! Scenario documents: schema, validation, and turning a document into a
//! ready-to-run engine.

mod builtin;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alloc::AllocationPolicy;
use crate::amount::Amount;
use crate::ids::{ActorId, BlueprintId, LinkId, ManagerId, SiteId, SliceId};
use crate::isolation::RuleSet;
use crate::mano::{Deployment, ManoError, NetworkServiceDescriptor, QueryField, SliceBlueprint, TenantSpec};
use crate::resource::ResourceKind;
use crate::sim::{generate_workload, Engine, EngineConfig, EventKind, MetricsSeries, SimError, WorkloadProfile, DEFAULT_EVENT_CAP};
use crate::trace::Trace;

pub use builtin::{builtin, fig6, fig6_shared, fig6_surge, recursion3, sla_breach, BUILTINS};
pub use report::{explain, emit_report, LifecycleLine, PoolSummary, RunReport, SliceSummary, Violations};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopSpec {
    pub vim: ManagerId,
    pub site: SiteId,
    pub inventory: BTreeMap<ResourceKind, Amount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: LinkId,
    pub a: SiteId,
    pub b: SiteId,
    pub capacity: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WanSpec {
    pub wim: ManagerId,
    pub links: Vec<LinkSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InpSpec {
    pub id: ActorId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pops: Vec<PopSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wans: Vec<WanSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeeringSpec {
    pub a: ManagerId,
    pub b: ManagerId,
    pub agreement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaseSpec {
    /// A site or a WAN link id.
    pub location: String,
    pub resource: ResourceKind,
    pub quantity: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TenantDoc {
    pub id: ActorId,
    #[serde(default)]
    pub policy: AllocationPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<ActorId>,
    #[serde(default = "all_fields")]
    pub oss_whitelist: BTreeSet<QueryField>,
    #[serde(default)]
    pub leases: Vec<LeaseSpec>,
}

fn all_fields() -> BTreeSet<QueryField> {
    QueryField::ALL.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceDoc {
    pub id: SliceId,
    pub tenant: ActorId,
    pub blueprint: BlueprintId,
    pub requester: ActorId,
    #[serde(default)]
    pub at: Amount,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<WorkloadProfile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledEvent {
    pub at: Amount,
    #[serde(flatten)]
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub seed: u64,
    /// Number of metric ticks.
    pub horizon: u64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub tick: Amount,
    #[serde(default = "default_cap", skip_serializing_if = "is_default_cap")]
    pub event_cap: usize,
    pub administrator: ActorId,
    pub inps: Vec<InpSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peerings: Vec<PeeringSpec>,
    pub tenants: Vec<TenantDoc>,
    pub end_users: Vec<ActorId>,
    pub descriptors: Vec<NetworkServiceDescriptor>,
    pub blueprints: Vec<SliceBlueprint>,
    #[serde(default)]
    pub slices: Vec<SliceDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<ScheduledEvent>,
    /// Replaces the default role/class/verb rules.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_rules: Option<RuleSet>,
}

fn one() -> Amount {
    Amount::ONE
}

fn is_one(a: &Amount) -> bool {
    *a == Amount::ONE
}

fn default_cap() -> usize {
    DEFAULT_EVENT_CAP
}

fn is_default_cap(c: &usize) -> bool {
    *c == DEFAULT_EVENT_CAP
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("building the deployment failed: {0}")]
    Build(#[from] ManoError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl ScenarioDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("scenario serializes")))
    }

    /// Every problem with the document; empty when it is runnable.
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        let mut err = |m: String| errors.push(m);
        if self.version != SCHEMA_VERSION {
            err(format!("version: expected {SCHEMA_VERSION}, got {}", self.version));
        }
        if self.horizon == 0 {
            err("horizon: must be positive".into());
        }
        if !self.tick.is_positive() {
            err("tick: must be positive".into());
        }
        if self.event_cap == 0 {
            err("event_cap: must be positive".into());
        }
        let end = Amount::from_int(self.horizon as i64) * self.tick;
        let in_window = |t: &Amount| !t.is_negative() && *t < end;

        let mut actors = BTreeSet::from([self.administrator.clone()]);
        let mut dup_actor = |id: &ActorId, err: &mut dyn FnMut(String)| {
            if !actors.insert(id.clone()) {
                err(format!("actor {id}: defined twice"));
            }
        };
        let mut sites = BTreeSet::new();
        let mut links = BTreeSet::new();
        let mut managers = BTreeSet::new();
        let mut wims = BTreeSet::new();
        for inp in &self.inps {
            dup_actor(&inp.id, &mut err);
            for p in &inp.pops {
                if !managers.insert(p.vim.clone()) {
                    err(format!("manager {}: defined twice", p.vim));
                }
                if !sites.insert(p.site.clone()) {
                    err(format!("site {}: defined twice", p.site));
                }
                for (k, q) in &p.inventory {
                    if q.is_negative() {
                        err(format!("site {}: negative {k} inventory", p.site));
                    }
                }
            }
        }
        for inp in &self.inps {
            for w in &inp.wans {
                if !managers.insert(w.wim.clone()) {
                    err(format!("manager {}: defined twice", w.wim));
                }
                wims.insert(w.wim.clone());
                for l in &w.links {
                    if !links.insert(l.id.clone()) {
                        err(format!("link {}: defined twice", l.id));
                    }
                    if !l.capacity.is_positive() {
                        err(format!("link {}: capacity must be positive", l.id));
                    }
                    if l.a == l.b {
                        err(format!("link {}: both ends at {}", l.id, l.a));
                    }
                }
            }
        }
        for p in &self.peerings {
            for w in [&p.a, &p.b] {
                if !wims.contains(w) {
                    err(format!("peering {}-{}: unknown WIM {w}", p.a, p.b));
                }
            }
        }
        let locations: BTreeSet<String> = sites.iter().map(|s| s.to_string()).chain(links.iter().map(|l| l.to_string())).collect();
        let mut tenants = BTreeSet::new();
        for t in &self.tenants {
            dup_actor(&t.id, &mut err);
            if let Some(p) = &t.provider {
                if !tenants.contains(p) {
                    err(format!("tenant {}: provider {p} must be a tenant defined earlier", t.id));
                }
            }
            tenants.insert(t.id.clone());
            for l in &t.leases {
                if !locations.contains(l.location.as_str()) {
                    err(format!("tenant {}: lease at unknown location {}", t.id, l.location));
                }
                if !l.quantity.is_positive() {
                    err(format!("tenant {}: lease quantity at {} must be positive", t.id, l.location));
                }
            }
        }
        let mut users = BTreeSet::new();
        for u in &self.end_users {
            dup_actor(u, &mut err);
            users.insert(u.clone());
        }
        let mut descriptors = BTreeMap::new();
        for d in &self.descriptors {
            if let Err(e) = d.validate() {
                err(e.to_string());
            }
            if descriptors.insert(d.id.clone(), d.clone()).is_some() {
                err(format!("descriptor {}: defined twice", d.id));
            }
        }
        let mut blueprints = BTreeSet::new();
        for b in &self.blueprints {
            if !blueprints.insert(b.id.clone()) {
                err(format!("blueprint {}: defined twice", b.id));
            }
            b.validate(&descriptors).into_iter().for_each(&mut err);
            for (d, placed) in &b.placement {
                if !descriptors.contains_key(d) {
                    continue;
                }
                for s in placed.iter().filter(|s| !sites.contains(*s)) {
                    err(format!("blueprint {}: {d} placed at unknown site {s}", b.id));
                }
            }
        }
        let mut slices = BTreeSet::new();
        for s in &self.slices {
            if !slices.insert(s.id.clone()) {
                err(format!("slice {}: defined twice", s.id));
            }
            if !tenants.contains(&s.tenant) {
                err(format!("slice {}: unknown tenant {}", s.id, s.tenant));
            }
            if !blueprints.contains(&s.blueprint) {
                err(format!("slice {}: unknown blueprint {}", s.id, s.blueprint));
            }
            if !users.contains(&s.requester) {
                err(format!("slice {}: unknown end user {}", s.id, s.requester));
            }
            if !in_window(&s.at) {
                err(format!("slice {}: request time {} outside the horizon", s.id, s.at));
            }
            if let Some(Err(e)) = s.workload.as_ref().map(|w| w.validate()) {
                err(format!("slice {}: {e}", s.id));
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            let at = format!("events[{i}]");
            if !in_window(&e.at) {
                err(format!("{at}: time {} outside the horizon", e.at));
            }
            let slice = match &e.event {
                EventKind::MetricTick { .. } => {
                    err(format!("{at}: metric ticks are generated, not scheduled"));
                    None
                }
                EventKind::SliceRequest { .. } => {
                    err(format!("{at}: slice requests belong in `slices`"));
                    None
                }
                EventKind::DemandChange { slice, load } => {
                    if load.is_negative() {
                        err(format!("{at}: negative load"));
                    }
                    Some(slice)
                }
                EventKind::FaultInjection { slice, .. } => Some(slice),
                EventKind::BlockMessage { slice, .. } => Some(slice),
                EventKind::LeaseChange { tenant, location, quantity, .. } => {
                    if !tenants.contains(tenant) {
                        err(format!("{at}: unknown tenant {tenant}"));
                    }
                    if !locations.contains(location.as_str()) {
                        err(format!("{at}: unknown location {location}"));
                    }
                    if !quantity.is_positive() {
                        err(format!("{at}: lease quantity must be positive"));
                    }
                    None
                }
            };
            if let Some(s) = slice.filter(|s| !slices.contains(*s)) {
                err(format!("{at}: unknown slice {s}"));
            }
        }
        errors
    }

    /// Builds the deployment and queues every scheduled event.
    pub fn build(&self, seed: u64) -> Result<Engine, ScenarioError> {
        let errors = self.validate();
        if !errors.is_empty() {
            return Err(ScenarioError::Invalid(errors));
        }
        let mut d = Deployment::new(self.administrator.clone());
        if let Some(rules) = &self.access_rules {
            d.isolation.rules = rules.clone();
        }
        for inp in &self.inps {
            d.add_inp(&inp.id);
            for p in &inp.pops {
                let inventory: Vec<(ResourceKind, Amount)> = p.inventory.iter().map(|(k, q)| (*k, *q)).collect();
                d.add_pop(&inp.id, p.vim.clone(), p.site.clone(), &inventory)?;
            }
            for w in &inp.wans {
                d.add_wan(&inp.id, w.wim.clone())?;
                for l in &w.links {
                    d.add_wan_link(&w.wim, l.id.clone(), l.a.clone(), l.b.clone(), l.capacity)?;
                }
            }
        }
        for p in &self.peerings {
            d.infra.peer(&p.a, &p.b, &p.agreement)?;
        }
        for u in &self.end_users {
            d.add_end_user(u);
        }
        for t in &self.tenants {
            d.add_tenant(TenantSpec { id: t.id.clone(), policy: t.policy, provider: t.provider.clone(), oss_whitelist: t.oss_whitelist.clone() })?;
            for l in &t.leases {
                d.lease(&t.id, &l.location, l.resource, l.quantity)?;
            }
        }
        for nsd in &self.descriptors {
            d.add_descriptor(nsd.clone())?;
        }
        for bp in &self.blueprints {
            d.add_blueprint(bp.clone())?;
        }
        let config = EngineConfig { horizon: self.horizon, tick: self.tick, event_cap: self.event_cap };
        let end = config.end();
        let mut engine = Engine::new(d, config);
        for s in &self.slices {
            engine.schedule(
                s.at,
                EventKind::SliceRequest {
                    slice: s.id.clone(),
                    tenant: s.tenant.clone(),
                    blueprint: s.blueprint.clone(),
                    requester: s.requester.clone(),
                    inject: None,
                },
            )?;
        }
        for s in &self.slices {
            if let Some(w) = &s.workload {
                let events: Vec<_> = generate_workload(&s.id, w, seed, end)?.into_iter().map(|mut e| {
                    e.time = e.time.max(s.at);
                    e
                }).collect();
                engine.schedule_workload(&events)?;
            }
        }
        for e in &self.events {
            match &e.event {
                EventKind::FaultInjection { slice, fault } => engine.inject_fault(slice, *fault, e.at)?,
                other => engine.schedule(e.at, other.clone())?,
            };
        }
        Ok(engine)
    }

    pub fn run(&self, seed: u64) -> Result<RunOutcome, ScenarioError> {
        let (trace, metrics, deployment) = self.build(seed)?.run()?;
        Ok(RunOutcome { seed, trace, metrics, deployment })
    }
}

/// Parses and validates a scenario, reporting every problem found.
pub fn parse_validate(text: &str) -> Result<ScenarioDocument, Vec<String>> {
    let doc: ScenarioDocument = serde_json::from_str(text).map_err(|e| vec![format!("parse: {e}")])?;
    let errors = doc.validate();
    if errors.is_empty() {
        Ok(doc)
    } else {
        Err(errors)
    }
}

pub struct RunOutcome {
    pub seed: u64,
    pub trace: Trace,
    pub metrics: MetricsSeries,
    pub deployment: Deployment,
}

/// Slice and tenant ids declared by the document.
pub fn identifier_tokens(doc: &ScenarioDocument) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = doc.slices.iter().map(|s| s.id.to_string()).collect();
    out.extend(doc.tenants.iter().map(|t| t.id.to_string()));
    out
}
