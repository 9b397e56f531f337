//! Generic SDN controller: client and server contexts, demand validation,
//! orchestration, event notification and recursive stacking.
//!
//! A controller reaches substrate through its server contexts and offers
//! each client a customized [`ResourceGroup`] through a client context.
//! Controllers stack: attaching an upper controller as the client of a
//! lower one turns the lower client context into an upper server context.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::alloc::{self, AllocationPolicy, ShareRequest};
use crate::amount::Amount;
use crate::ids::{ActorId, ContextId, ControllerId};
use crate::resource::{Handle, ResourceError, ResourceGroup, ResourceId, ResourceKind, ResourceModel};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SdnError {
    #[error("{0} is not the administrator of this controller")]
    NotAdministrator(ActorId),
    #[error("context {0} already exists")]
    DuplicateContext(ContextId),
    #[error("context spec for {0} is missing its policy or substrate group")]
    MissingPolicy(ContextId),
    #[error("no client context for {0}")]
    UnknownClient(ActorId),
    #[error("unknown context {0}")]
    UnknownContext(ContextId),
    #[error("unknown controller {0}")]
    UnknownController(ControllerId),
    #[error("attaching {upper} to {lower} would create a controller cycle")]
    CycleDetected { upper: ControllerId, lower: ControllerId },
    #[error("context client {client} is not the owner {owner} of the attaching controller")]
    OwnerMismatch { client: ActorId, owner: ActorId },
    #[error("{0} is not reachable through any server context")]
    Unreachable(ResourceId),
    #[error("duplicate controller {0}")]
    DuplicateController(ControllerId),
    #[error(transparent)]
    Resource(#[from] ResourceError),
}

/// The identity allowed to create contexts and install policies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdministratorHandle {
    pub identity: ActorId,
}

impl AdministratorHandle {
    pub fn new(identity: impl Into<ActorId>) -> Self {
        AdministratorHandle { identity: identity.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventCategory {
    Context,
    Validation,
    Allocation,
    Configuration,
    Fault,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityPolicy {
    /// Categories the client may ever see.
    pub categories: BTreeSet<EventCategory>,
    /// Whether unscoped (controller-wide) events are visible.
    pub global: bool,
}

impl VisibilityPolicy {
    pub fn own_context(categories: impl IntoIterator<Item = EventCategory>) -> Self {
        VisibilityPolicy { categories: categories.into_iter().collect(), global: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPolicy {
    pub allowed_kinds: BTreeSet<ResourceKind>,
    pub max_per_item: Option<Amount>,
    pub allow_functions: bool,
}

impl ActionPolicy {
    pub fn permissive() -> Self {
        ActionPolicy { allowed_kinds: ResourceKind::ALL.into_iter().collect(), max_per_item: None, allow_functions: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSupport {
    pub visibility: VisibilityPolicy,
    pub action: ActionPolicy,
    /// Capability tag -> network function that realizes it.
    pub mapping: BTreeMap<String, String>,
}

impl ClientSupport {
    pub fn permissive() -> Self {
        ClientSupport {
            visibility: VisibilityPolicy::own_context([
                EventCategory::Context,
                EventCategory::Validation,
                EventCategory::Allocation,
                EventCategory::Configuration,
                EventCategory::Fault,
            ]),
            action: ActionPolicy::permissive(),
            mapping: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Southbound {
    /// Direct programming of substrate resources.
    Substrate,
    /// Client context of a lower controller.
    Controller { controller: ControllerId, context: ContextId },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerContext {
    pub id: ContextId,
    pub group: ResourceGroup,
    pub interface: Southbound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientContext {
    pub id: ContextId,
    pub client: ActorId,
    pub group: ResourceGroup,
    pub support: ClientSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextSide {
    Client,
    Server,
}

/// What the administrator supplies when creating a context.
#[derive(Debug, Clone)]
pub struct ContextSpec {
    pub id: ContextId,
    pub side: ContextSide,
    pub client: Option<ActorId>,
    pub group: Option<ResourceGroup>,
    pub support: Option<ClientSupport>,
}

impl ContextSpec {
    pub fn client(id: impl Into<ContextId>, client: impl Into<ActorId>, group: ResourceGroup, support: ClientSupport) -> Self {
        ContextSpec {
            id: id.into(),
            side: ContextSide::Client,
            client: Some(client.into()),
            group: Some(group),
            support: Some(support),
        }
    }

    pub fn server(id: impl Into<ContextId>, group: ResourceGroup) -> Self {
        ContextSpec { id: id.into(), side: ContextSide::Server, client: None, group: Some(group), support: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandItem {
    pub kind: ResourceKind,
    pub quantity: Amount,
    /// Specific resource the client wants to draw from, if any.
    pub target: Option<ResourceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpiTargets {
    /// Mb/s.
    pub throughput_floor: Amount,
    /// Latency-proxy units.
    pub latency_ceiling: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceDemand {
    pub id: String,
    pub client: ActorId,
    pub items: Vec<DemandItem>,
    pub capabilities: BTreeSet<String>,
    pub kpi: Option<KpiTargets>,
    /// Guaranteed amount per item under the shared policy.
    pub floor: Amount,
    pub weight: Amount,
}

impl ServiceDemand {
    pub fn quantity(id: impl Into<String>, client: impl Into<ActorId>, kind: ResourceKind, quantity: Amount) -> Self {
        ServiceDemand {
            id: id.into(),
            client: client.into(),
            items: vec![DemandItem { kind, quantity, target: None }],
            capabilities: BTreeSet::new(),
            kpi: None,
            floor: Amount::ZERO,
            weight: Amount::ONE,
        }
    }

    pub fn targeting(mut self, target: ResourceId) -> Self {
        for item in &mut self.items {
            item.target = Some(target);
        }
        self
    }

    pub fn with_floor(mut self, floor: Amount) -> Self {
        self.floor = floor;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    NotVisible,
    PolicyDenied,
    Insufficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "kebab-case")]
pub enum Validation {
    Accepted,
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grant {
    pub demand: String,
    pub client: ActorId,
    pub allocations: Vec<(ResourceId, Amount)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub grants: Vec<Grant>,
    pub rejected: Vec<String>,
}

impl AllocationPlan {
    /// Total allocated per resource.
    pub fn per_resource(&self) -> BTreeMap<ResourceId, Amount> {
        let mut out = BTreeMap::new();
        for g in &self.grants {
            for (r, q) in &g.allocations {
                *out.entry(*r).or_insert(Amount::ZERO) += *q;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerEvent {
    pub category: EventCategory,
    /// Client context the event concerns; `None` for controller-wide events.
    pub scope: Option<ContextId>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LogEntry {
    ContextCreated { context: ContextId, side: ContextSide },
    DemandValidated { demand: String, client: ActorId, outcome: Option<Validation> },
    PlanApplied { granted: usize, rejected: usize },
    Emitted { event: ControllerEvent, delivered_to: Vec<ActorId> },
}

#[derive(Debug, Clone)]
struct Pending {
    seq: u64,
    demand: ServiceDemand,
}

#[derive(Debug, Clone)]
pub struct SdnController {
    pub id: ControllerId,
    pub owner: ActorId,
    admin: AdministratorHandle,
    pub policy: AllocationPolicy,
    servers: BTreeMap<ContextId, ServerContext>,
    clients: BTreeMap<ContextId, ClientContext>,
    log: Vec<LogEntry>,
    queue: Vec<Pending>,
    next_seq: u64,
    committed: BTreeMap<ResourceId, Amount>,
    subscriptions: BTreeMap<ActorId, BTreeSet<EventCategory>>,
    inbox: BTreeMap<ActorId, VecDeque<ControllerEvent>>,
}

impl SdnController {
    pub fn new(id: impl Into<ControllerId>, owner: impl Into<ActorId>, admin: AdministratorHandle, policy: AllocationPolicy) -> Self {
        SdnController {
            id: id.into(),
            owner: owner.into(),
            admin,
            policy,
            servers: BTreeMap::new(),
            clients: BTreeMap::new(),
            log: Vec::new(),
            queue: Vec::new(),
            next_seq: 0,
            committed: BTreeMap::new(),
            subscriptions: BTreeMap::new(),
            inbox: BTreeMap::new(),
        }
    }

    pub fn administrator(&self) -> &AdministratorHandle {
        &self.admin
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn server_contexts(&self) -> impl Iterator<Item = &ServerContext> {
        self.servers.values()
    }

    pub fn client_contexts(&self) -> impl Iterator<Item = &ClientContext> {
        self.clients.values()
    }

    pub fn client_context(&self, id: &ContextId) -> Option<&ClientContext> {
        self.clients.get(id)
    }

    pub fn server_context(&self, id: &ContextId) -> Option<&ServerContext> {
        self.servers.get(id)
    }

    fn context_for(&self, client: &ActorId) -> Result<&ClientContext, SdnError> {
        self.clients.values().find(|c| &c.client == client).ok_or_else(|| SdnError::UnknownClient(client.clone()))
    }

    /// Whether `id` is a server-context resource or was carved out of one.
    pub fn reaches(&self, model: &ResourceModel, id: ResourceId) -> bool {
        let roots: BTreeSet<ResourceId> = self.servers.values().flat_map(|s| s.group.resources()).collect();
        let mut stack = vec![id];
        let mut seen = BTreeSet::new();
        while let Some(cur) = stack.pop() {
            if roots.contains(&cur) {
                return true;
            }
            if !seen.insert(cur) {
                continue;
            }
            if let Ok(r) = model.get(cur) {
                stack.extend(r.parents());
            }
        }
        false
    }

    /// Capacity of `kind` the controller sees through all its server contexts.
    pub fn visible_capacity(&self, model: &ResourceModel, kind: ResourceKind) -> Amount {
        self.servers.values().map(|s| model.exposed_capacity(&s.group, kind)).sum()
    }

    pub fn admin_create_context(
        &mut self,
        model: &ResourceModel,
        admin: &AdministratorHandle,
        spec: ContextSpec,
    ) -> Result<ContextId, SdnError> {
        if admin.identity != self.admin.identity {
            return Err(SdnError::NotAdministrator(admin.identity.clone()));
        }
        if self.servers.contains_key(&spec.id) || self.clients.contains_key(&spec.id) {
            return Err(SdnError::DuplicateContext(spec.id));
        }
        let id = spec.id.clone();
        match spec.side {
            ContextSide::Server => {
                let group = spec.group.filter(|g| !g.is_empty()).ok_or_else(|| SdnError::MissingPolicy(id.clone()))?;
                self.insert_server(ServerContext { id: id.clone(), group, interface: Southbound::Substrate });
            }
            ContextSide::Client => {
                let (Some(client), Some(group), Some(support)) = (spec.client, spec.group, spec.support) else {
                    return Err(SdnError::MissingPolicy(id));
                };
                if let Some(r) = group.resources().find(|r| !self.reaches(model, *r)) {
                    return Err(SdnError::Unreachable(r));
                }
                self.clients.insert(id.clone(), ClientContext { id: id.clone(), client, group, support });
                self.log.push(LogEntry::ContextCreated { context: id.clone(), side: ContextSide::Client });
            }
        }
        Ok(id)
    }

    fn insert_server(&mut self, ctx: ServerContext) {
        self.log.push(LogEntry::ContextCreated { context: ctx.id.clone(), side: ContextSide::Server });
        self.servers.insert(ctx.id.clone(), ctx);
    }

    pub fn validate_demand(&mut self, model: &ResourceModel, demand: ServiceDemand) -> Result<Validation, SdnError> {
        let outcome = self.check_demand(model, &demand);
        self.log.push(LogEntry::DemandValidated {
            demand: demand.id.clone(),
            client: demand.client.clone(),
            outcome: outcome.as_ref().ok().copied(),
        });
        let outcome = outcome?;
        if outcome == Validation::Accepted {
            let seq = self.next_seq;
            self.next_seq += 1;
            self.queue.push(Pending { seq, demand });
        }
        Ok(outcome)
    }

    fn check_demand(&self, model: &ResourceModel, demand: &ServiceDemand) -> Result<Validation, SdnError> {
        use RejectReason::*;
        let ctx = self.context_for(&demand.client)?;
        let group = &ctx.group;
        let action = &ctx.support.action;

        for item in &demand.items {
            if let Some(t) = item.target {
                if !group.contains(&Handle::Resource(t)) {
                    return Ok(Validation::Rejected(NotVisible));
                }
            }
        }
        for tag in &demand.capabilities {
            let provided = group.functions().any(|f| {
                model.function(f).is_ok_and(|nf| nf.capabilities.contains(tag)) || ctx.support.mapping.get(tag).is_some_and(|m| m == f)
            });
            if !provided {
                return Ok(Validation::Rejected(NotVisible));
            }
        }
        if !demand.capabilities.is_empty() && !action.allow_functions {
            return Ok(Validation::Rejected(PolicyDenied));
        }
        for item in &demand.items {
            if !action.allowed_kinds.contains(&item.kind) || action.max_per_item.is_some_and(|m| item.quantity > m) {
                return Ok(Validation::Rejected(PolicyDenied));
            }
        }
        let mut per_kind: BTreeMap<ResourceKind, Amount> = BTreeMap::new();
        for item in &demand.items {
            if let Some(t) = item.target {
                let view = model.abstract_view(t, &group.criteria)?;
                if item.quantity > view.capacity.unwrap_or(Amount::ZERO) {
                    return Ok(Validation::Rejected(Insufficient));
                }
            }
            *per_kind.entry(item.kind).or_insert(Amount::ZERO) += item.quantity;
        }
        for (kind, total) in per_kind {
            if total > model.exposed_capacity(group, kind) {
                return Ok(Validation::Rejected(Insufficient));
            }
        }
        Ok(Validation::Accepted)
    }

    fn available(&self, model: &ResourceModel, r: ResourceId, tentative: &BTreeMap<ResourceId, Amount>) -> Amount {
        let free = model.free_capacity(r).unwrap_or(Amount::ZERO);
        free - self.committed.get(&r).copied().unwrap_or(Amount::ZERO) - tentative.get(&r).copied().unwrap_or(Amount::ZERO)
    }

    fn candidates(&self, model: &ResourceModel, demand: &ServiceDemand, item: &DemandItem) -> Vec<ResourceId> {
        match item.target {
            Some(t) => vec![t],
            None => match self.context_for(&demand.client) {
                Ok(ctx) => ctx
                    .group
                    .resources()
                    .filter(|r| model.live(*r).is_ok_and(|res| res.kind == item.kind))
                    .collect(),
                Err(_) => Vec::new(),
            },
        }
    }

    /// Maps every queued demand onto server-context resources under the
    /// installed policy and applies the plan.
    pub fn orchestrate(&mut self, model: &ResourceModel) -> AllocationPlan {
        let mut queue = std::mem::take(&mut self.queue);
        queue.sort_by(|a, b| a.seq.cmp(&b.seq).then_with(|| a.demand.id.cmp(&b.demand.id)));
        let plan = match self.policy {
            AllocationPolicy::Dedicated => self.plan_dedicated(model, &queue),
            AllocationPolicy::SharedWithFloors => self.plan_shared(model, &queue),
        };
        for (r, q) in plan.per_resource() {
            *self.committed.entry(r).or_insert(Amount::ZERO) += q;
        }
        self.log.push(LogEntry::PlanApplied { granted: plan.grants.len(), rejected: plan.rejected.len() });
        for g in &plan.grants {
            let scope = self.context_for(&g.client).ok().map(|c| c.id.clone());
            let detail = g.allocations.iter().map(|(r, q)| format!("{r}:{q}")).collect::<Vec<_>>().join(",");
            self.emit(ControllerEvent { category: EventCategory::Allocation, scope: scope.clone(), detail: format!("{} {detail}", g.demand) });
            self.emit(ControllerEvent { category: EventCategory::Configuration, scope, detail: format!("configured {}", g.demand) });
        }
        plan
    }

    fn plan_dedicated(&self, model: &ResourceModel, queue: &[Pending]) -> AllocationPlan {
        let mut plan = AllocationPlan::default();
        let mut used: BTreeMap<ResourceId, Amount> = BTreeMap::new();
        for p in queue {
            let mut tentative = used.clone();
            let mut allocations = Vec::new();
            let mut ok = true;
            for item in &p.demand.items {
                let pick = self
                    .candidates(model, &p.demand, item)
                    .into_iter()
                    .find(|r| self.available(model, *r, &tentative) >= item.quantity);
                match pick {
                    Some(r) => {
                        *tentative.entry(r).or_insert(Amount::ZERO) += item.quantity;
                        allocations.push((r, item.quantity));
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                used = tentative;
                plan.grants.push(Grant { demand: p.demand.id.clone(), client: p.demand.client.clone(), allocations });
            } else {
                plan.rejected.push(p.demand.id.clone());
            }
        }
        plan
    }

    fn plan_shared(&self, model: &ResourceModel, queue: &[Pending]) -> AllocationPlan {
        // Each item is placed on its first candidate; floors are admitted in
        // order per resource, then each resource is water-filled.
        let mut placed: Vec<Option<Vec<ResourceId>>> = Vec::new();
        let mut floors_used: BTreeMap<ResourceId, Amount> = BTreeMap::new();
        let empty = BTreeMap::new();
        for p in queue {
            let mut slots = Vec::new();
            let mut tentative = floors_used.clone();
            let mut ok = true;
            for item in &p.demand.items {
                let floor = p.demand.floor.min(item.quantity);
                let first = self.candidates(model, &p.demand, item).into_iter().next();
                match first {
                    Some(r) if self.available(model, r, &empty) - tentative.get(&r).copied().unwrap_or(Amount::ZERO) >= floor => {
                        *tentative.entry(r).or_insert(Amount::ZERO) += floor;
                        slots.push(r);
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                floors_used = tentative;
                placed.push(Some(slots));
            } else {
                placed.push(None);
            }
        }

        let mut by_resource: BTreeMap<ResourceId, Vec<(usize, usize)>> = BTreeMap::new();
        for (qi, slots) in placed.iter().enumerate() {
            if let Some(slots) = slots {
                for (ii, r) in slots.iter().enumerate() {
                    by_resource.entry(*r).or_default().push((qi, ii));
                }
            }
        }
        let mut shares: BTreeMap<(usize, usize), Amount> = BTreeMap::new();
        for (r, entries) in &by_resource {
            let requests: Vec<ShareRequest> = entries
                .iter()
                .map(|(qi, ii)| {
                    let d = &queue[*qi].demand;
                    let q = d.items[*ii].quantity;
                    ShareRequest::new(q, d.floor.min(q), d.weight)
                })
                .collect();
            let cap = self.available(model, *r, &empty);
            let got = alloc::water_fill(cap, &requests).expect("floors admitted against capacity");
            for (k, e) in entries.iter().enumerate() {
                shares.insert(*e, got[k]);
            }
        }

        let mut plan = AllocationPlan::default();
        for (qi, p) in queue.iter().enumerate() {
            match &placed[qi] {
                Some(slots) => {
                    let allocations = slots.iter().enumerate().map(|(ii, r)| (*r, shares[&(qi, ii)])).collect();
                    plan.grants.push(Grant { demand: p.demand.id.clone(), client: p.demand.client.clone(), allocations });
                }
                None => plan.rejected.push(p.demand.id.clone()),
            }
        }
        plan
    }

    /// Releases a previously granted allocation.
    pub fn release_grant(&mut self, grant: &Grant) {
        for (r, q) in &grant.allocations {
            if let Some(c) = self.committed.get_mut(r) {
                *c -= *q;
                if c.is_zero() {
                    self.committed.remove(r);
                }
            }
        }
    }

    pub fn committed(&self) -> &BTreeMap<ResourceId, Amount> {
        &self.committed
    }

    pub fn subscribe(&mut self, client: &ActorId, filter: impl IntoIterator<Item = EventCategory>) -> Result<(), SdnError> {
        self.context_for(client)?;
        self.subscriptions.insert(client.clone(), filter.into_iter().collect());
        Ok(())
    }

    pub fn unsubscribe(&mut self, client: &ActorId) -> Result<(), SdnError> {
        self.context_for(client)?;
        self.subscriptions.remove(client);
        Ok(())
    }

    /// Delivers `event` to every subscriber whose filter and visibility
    /// policy admit it. Returns the recipients.
    pub fn emit(&mut self, event: ControllerEvent) -> Vec<ActorId> {
        let mut delivered = Vec::new();
        for ctx in self.clients.values() {
            let Some(filter) = self.subscriptions.get(&ctx.client) else { continue };
            let vis = &ctx.support.visibility;
            let in_scope = match &event.scope {
                Some(s) => s == &ctx.id,
                None => vis.global,
            };
            if filter.contains(&event.category) && vis.categories.contains(&event.category) && in_scope {
                delivered.push(ctx.client.clone());
            }
        }
        delivered.dedup();
        for d in &delivered {
            self.inbox.entry(d.clone()).or_default().push_back(event.clone());
        }
        self.log.push(LogEntry::Emitted { event, delivered_to: delivered.clone() });
        delivered
    }

    pub fn drain_inbox(&mut self, client: &ActorId) -> Vec<ControllerEvent> {
        self.inbox.remove(client).map(Vec::from).unwrap_or_default()
    }
}

/// A set of controllers wired by recursive client/server attachments.
#[derive(Debug, Clone, Default)]
pub struct ControlPlane {
    controllers: BTreeMap<ControllerId, SdnController>,
    /// `(upper, lower)`: upper consumes a client context of lower.
    attachments: Vec<(ControllerId, ControllerId)>,
}

impl ControlPlane {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, controller: SdnController) -> Result<(), SdnError> {
        if self.controllers.contains_key(&controller.id) {
            return Err(SdnError::DuplicateController(controller.id));
        }
        self.controllers.insert(controller.id.clone(), controller);
        Ok(())
    }

    pub fn get(&self, id: &ControllerId) -> Result<&SdnController, SdnError> {
        self.controllers.get(id).ok_or_else(|| SdnError::UnknownController(id.clone()))
    }

    pub fn get_mut(&mut self, id: &ControllerId) -> Result<&mut SdnController, SdnError> {
        self.controllers.get_mut(id).ok_or_else(|| SdnError::UnknownController(id.clone()))
    }

    pub fn controllers(&self) -> impl Iterator<Item = &SdnController> {
        self.controllers.values()
    }

    pub fn attachments(&self) -> &[(ControllerId, ControllerId)] {
        &self.attachments
    }

    fn depends_on(&self, from: &ControllerId, to: &ControllerId) -> bool {
        let mut stack = vec![from.clone()];
        let mut seen = BTreeSet::new();
        while let Some(cur) = stack.pop() {
            if &cur == to {
                return true;
            }
            if seen.insert(cur.clone()) {
                stack.extend(self.attachments.iter().filter(|(u, _)| *u == cur).map(|(_, l)| l.clone()));
            }
        }
        false
    }

    /// Makes `upper` a client of `lower` through `context`, giving `upper` a
    /// server context whose group is exactly that client context's group.
    pub fn attach_as_client(
        &mut self,
        upper: &ControllerId,
        lower: &ControllerId,
        context: &ContextId,
    ) -> Result<ContextId, SdnError> {
        if upper == lower || self.depends_on(lower, upper) {
            return Err(SdnError::CycleDetected { upper: upper.clone(), lower: lower.clone() });
        }
        let owner = self.get(upper)?.owner.clone();
        let lower_ctl = self.get(lower)?;
        let ctx = lower_ctl.client_context(context).ok_or_else(|| SdnError::UnknownContext(context.clone()))?;
        if ctx.client != owner {
            return Err(SdnError::OwnerMismatch { client: ctx.client.clone(), owner });
        }
        let group = ctx.group.clone();
        let server_id = ContextId::new(format!("{lower}/{context}"));
        let upper_ctl = self.get_mut(upper)?;
        if upper_ctl.servers.contains_key(&server_id) {
            return Err(SdnError::DuplicateContext(server_id));
        }
        upper_ctl.insert_server(ServerContext {
            id: server_id.clone(),
            group,
            interface: Southbound::Controller { controller: lower.clone(), context: context.clone() },
        });
        self.attachments.push((upper.clone(), lower.clone()));
        Ok(server_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::AbstractionCriteria;

    fn a(v: i64) -> Amount {
        Amount::from_int(v)
    }

    struct Fixture {
        model: ResourceModel,
        ctl: SdnController,
        admin: AdministratorHandle,
        substrate: ResourceId,
    }

    fn fixture(capacity: i64, policy: AllocationPolicy) -> Fixture {
        let mut model = ResourceModel::new();
        let substrate = model.add_physical(ResourceKind::Networking, a(capacity), ActorId::new("inp"), []).unwrap();
        let admin = AdministratorHandle::new("admin");
        let mut ctl = SdnController::new("ctl", "inp", admin.clone(), policy);
        let group = ResourceGroup::new("sub", [Handle::Resource(substrate)], AbstractionCriteria::capacity_only(), &model).unwrap();
        ctl.admin_create_context(&model, &admin, ContextSpec::server("s0", group)).unwrap();
        Fixture { model, ctl, admin, substrate }
    }

    fn add_client(f: &mut Fixture, ctx: &str, client: &str, members: &[ResourceId]) {
        let group = ResourceGroup::new(
            format!("g-{ctx}"),
            members.iter().map(|r| Handle::Resource(*r)),
            AbstractionCriteria::capacity_only(),
            &f.model,
        )
        .unwrap();
        f.ctl
            .admin_create_context(&f.model, &f.admin, ContextSpec::client(ctx, client, group, ClientSupport::permissive()))
            .unwrap();
    }

    #[test]
    fn admin_context_creation() {
        let mut f = fixture(100, AllocationPolicy::Dedicated);
        let before = f.ctl.log().len();
        let sub = f.substrate;
        add_client(&mut f, "c1", "tenant", &[sub]);
        assert_eq!(f.ctl.log().len(), before + 1);

        let group = ResourceGroup::new("g", [Handle::Resource(f.substrate)], AbstractionCriteria::capacity_only(), &f.model).unwrap();
        let rogue = AdministratorHandle::new("mallory");
        let err = f.ctl.admin_create_context(&f.model, &rogue, ContextSpec::client("c2", "x", group.clone(), ClientSupport::permissive()));
        assert_eq!(err, Err(SdnError::NotAdministrator(ActorId::new("mallory"))));
        let err = f.ctl.admin_create_context(&f.model, &f.admin, ContextSpec::client("c1", "x", group.clone(), ClientSupport::permissive()));
        assert_eq!(err, Err(SdnError::DuplicateContext(ContextId::new("c1"))));
        let mut spec = ContextSpec::client("c3", "x", group, ClientSupport::permissive());
        spec.support = None;
        assert!(matches!(f.ctl.admin_create_context(&f.model, &f.admin, spec), Err(SdnError::MissingPolicy(_))));
    }

    #[test]
    fn client_group_must_be_reachable() {
        let mut f = fixture(100, AllocationPolicy::Dedicated);
        let stray = f.model.add_physical(ResourceKind::Networking, a(5), ActorId::new("other"), []).unwrap();
        let group = ResourceGroup::new("g", [Handle::Resource(stray)], AbstractionCriteria::capacity_only(), &f.model).unwrap();
        let err = f.ctl.admin_create_context(&f.model, &f.admin, ContextSpec::client("c", "t", group, ClientSupport::permissive()));
        assert_eq!(err, Err(SdnError::Unreachable(stray)));
        // partitions of a server resource are reachable
        let part = f.model.partition(f.substrate, &[a(10)]).unwrap()[0];
        add_client(&mut f, "c", "t", &[part]);
    }

    #[test]
    fn validation_outcomes() {
        let mut f = fixture(100, AllocationPolicy::Dedicated);
        let sub = f.substrate;
        add_client(&mut f, "c1", "tenant", &[sub]);
        let ok = ServiceDemand::quantity("d1", "tenant", ResourceKind::Networking, a(20));
        assert_eq!(f.ctl.validate_demand(&f.model, ok).unwrap(), Validation::Accepted);

        let other = f.model.add_physical(ResourceKind::Networking, a(5), ActorId::new("inp"), []).unwrap();
        let hidden = ServiceDemand::quantity("d2", "tenant", ResourceKind::Networking, a(1)).targeting(other);
        assert_eq!(f.ctl.validate_demand(&f.model, hidden).unwrap(), Validation::Rejected(RejectReason::NotVisible));

        let big = ServiceDemand::quantity("d3", "tenant", ResourceKind::Networking, a(101));
        assert_eq!(f.ctl.validate_demand(&f.model, big).unwrap(), Validation::Rejected(RejectReason::Insufficient));

        let nobody = ServiceDemand::quantity("d4", "ghost", ResourceKind::Networking, a(1));
        assert_eq!(f.ctl.validate_demand(&f.model, nobody), Err(SdnError::UnknownClient(ActorId::new("ghost"))));
    }

    #[test]
    fn validation_against_small_group() {
        let mut f = fixture(100, AllocationPolicy::Dedicated);
        let part = f.model.partition(f.substrate, &[a(20)]).unwrap()[0];
        add_client(&mut f, "c1", "tenant", &[part]);
        let d = ServiceDemand::quantity("d", "tenant", ResourceKind::Networking, a(30));
        assert_eq!(f.ctl.validate_demand(&f.model, d).unwrap(), Validation::Rejected(RejectReason::Insufficient));
    }

    #[test]
    fn action_policy_denies() {
        let mut f = fixture(100, AllocationPolicy::Dedicated);
        let group = ResourceGroup::new("g", [Handle::Resource(f.substrate)], AbstractionCriteria::capacity_only(), &f.model).unwrap();
        let mut support = ClientSupport::permissive();
        support.action.max_per_item = Some(a(10));
        f.ctl.admin_create_context(&f.model, &f.admin, ContextSpec::client("c", "t", group, support)).unwrap();
        let d = ServiceDemand::quantity("d", "t", ResourceKind::Networking, a(11));
        assert_eq!(f.ctl.validate_demand(&f.model, d).unwrap(), Validation::Rejected(RejectReason::PolicyDenied));
    }

    #[test]
    fn orchestrate_single_demand() {
        let mut f = fixture(100, AllocationPolicy::Dedicated);
        let sub = f.substrate;
        add_client(&mut f, "c1", "tenant", &[sub]);
        f.ctl.validate_demand(&f.model, ServiceDemand::quantity("d1", "tenant", ResourceKind::Networking, a(20))).unwrap();
        let plan = f.ctl.orchestrate(&f.model);
        assert_eq!(plan.grants[0].allocations, vec![(f.substrate, a(20))]);
        assert_eq!(a(100) - f.ctl.committed()[&f.substrate], a(80));
    }

    #[test]
    fn orchestrate_dedicated_rejects_late_overflow() {
        let mut f = fixture(100, AllocationPolicy::Dedicated);
        let sub = f.substrate;
        add_client(&mut f, "c1", "tenant", &[sub]);
        for id in ["d1", "d2"] {
            f.ctl.validate_demand(&f.model, ServiceDemand::quantity(id, "tenant", ResourceKind::Networking, a(60))).unwrap();
        }
        let plan = f.ctl.orchestrate(&f.model);
        assert_eq!(plan.grants.len(), 1);
        assert_eq!(plan.grants[0].demand, "d1");
        assert_eq!(plan.rejected, vec!["d2".to_string()]);
    }

    #[test]
    fn orchestrate_shared_splits_evenly() {
        let mut f = fixture(100, AllocationPolicy::SharedWithFloors);
        let sub = f.substrate;
        add_client(&mut f, "c1", "tenant", &[sub]);
        for id in ["d1", "d2"] {
            f.ctl.validate_demand(&f.model, ServiceDemand::quantity(id, "tenant", ResourceKind::Networking, a(80))).unwrap();
        }
        let plan = f.ctl.orchestrate(&f.model);
        let got: Vec<Amount> = plan.grants.iter().map(|g| g.allocations[0].1).collect();
        assert_eq!(got, vec![a(50), a(50)]);
    }

    #[test]
    fn notification_scoping() {
        let mut f = fixture(100, AllocationPolicy::Dedicated);
        let sub = f.substrate;
        add_client(&mut f, "c1", "alice", &[sub]);
        let sub = f.substrate;
        add_client(&mut f, "c2", "bob", &[sub]);
        let alice = ActorId::new("alice");
        let bob = ActorId::new("bob");
        f.ctl.subscribe(&alice, [EventCategory::Allocation]).unwrap();
        f.ctl.subscribe(&bob, [EventCategory::Allocation]).unwrap();
        f.ctl.validate_demand(&f.model, ServiceDemand::quantity("d1", "alice", ResourceKind::Networking, a(10))).unwrap();
        f.ctl.orchestrate(&f.model);
        assert_eq!(f.ctl.drain_inbox(&alice).len(), 1);
        assert!(f.ctl.drain_inbox(&bob).is_empty());

        f.ctl.unsubscribe(&alice).unwrap();
        f.ctl.validate_demand(&f.model, ServiceDemand::quantity("d2", "alice", ResourceKind::Networking, a(10))).unwrap();
        f.ctl.orchestrate(&f.model);
        assert!(f.ctl.drain_inbox(&alice).is_empty());
        assert_eq!(f.ctl.subscribe(&ActorId::new("eve"), []), Err(SdnError::UnknownClient(ActorId::new("eve"))));
    }

    #[test]
    fn attach_pass_through_and_cycles() {
        let mut f = fixture(100, AllocationPolicy::Dedicated);
        let lease = f.model.partition_to(f.substrate, &[a(60)], &ActorId::new("tenant")).unwrap()[0];
        add_client(&mut f, "lease", "tenant", &[lease]);
        let model = f.model.clone();
        let mut plane = ControlPlane::new();
        plane.add(f.ctl).unwrap();
        plane.add(SdnController::new("tctl", "tenant", AdministratorHandle::new("tenant"), AllocationPolicy::Dedicated)).unwrap();
        let (lower, upper) = (ControllerId::new("ctl"), ControllerId::new("tctl"));
        plane.attach_as_client(&upper, &lower, &ContextId::new("lease")).unwrap();
        let seen = plane.get(&upper).unwrap().visible_capacity(&model, ResourceKind::Networking);
        assert_eq!(seen, a(60));
        assert!(seen <= plane.get(&lower).unwrap().visible_capacity(&model, ResourceKind::Networking));

        assert!(matches!(plane.attach_as_client(&upper, &upper, &ContextId::new("x")), Err(SdnError::CycleDetected { .. })));
        assert!(matches!(plane.attach_as_client(&lower, &upper, &ContextId::new("x")), Err(SdnError::CycleDetected { .. })));
        assert!(matches!(plane.attach_as_client(&upper, &lower, &ContextId::new("nope")), Err(SdnError::UnknownContext(_))));
    }
}
