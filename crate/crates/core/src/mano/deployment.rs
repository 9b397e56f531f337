//! The assembled world: infrastructure, tenants with their RO and VNFM,
//! slices with their own NSO/TC/OSS, and the isolation policy.
//!
//! Operations append trace bodies to an outbox that the engine drains and
//! stamps. An outbox item's cause is either the engine's current trigger
//! (`None`) or an earlier item of the same outbox (`Some(index)`).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alloc::AllocationPolicy;
use crate::amount::Amount;
use crate::ids::{ActorId, BlueprintId, ContextId, ControllerId, DescriptorId, HostId, LinkId, ManagerId, SiteId, SliceId, VnfId};
use crate::isolation::{self, AuditLog, Decision, IsolationPolicy, KpiBounds, ObjectClass, Role, RuleSet, Verb};
use crate::resource::{AbstractionCriteria, Handle, Resource, ResourceGroup, ResourceId, ResourceKind, ResourceModel};
use crate::sdn::{AdministratorHandle, ClientSupport, ContextSpec, ControlPlane, SdnController};
use crate::sim::congestion::{evaluate_congestion, PoolEntry, PoolState};
use crate::trace::{SliceSample, StateChange, TraceBody};

use super::blocks::{ContextInfo, FaultNotice, Nso, Oss, QueryField, TenantController};
use super::catalog::{NetworkServiceDescriptor, SliceBlueprint};
use super::infra::{Infrastructure, Lease};
use super::ro::ResourceOrchestrator;
use super::slice::{FaultKind, NetworkSlice, SliceState};
use super::vnfm::{EmCounters, VnfInstance, VnfState, VnfTransition, Vnfm};
use super::{CreationStep, ManoError};

/// Function name recorded for the VNF that hosts a slice's TC.
pub const TC_FUNCTION: &str = "tenant-controller";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantSpec {
    pub id: ActorId,
    pub policy: AllocationPolicy,
    /// Tenant that re-offers its leases to this one.
    pub provider: Option<ActorId>,
    pub oss_whitelist: BTreeSet<QueryField>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tenant {
    pub id: ActorId,
    pub provider: Option<ActorId>,
    pub ro: ResourceOrchestrator,
    pub vnfm: Vnfm,
    pub whitelist: BTreeSet<QueryField>,
    overlay: RuleSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceKpi {
    pub offered: Amount,
    pub achieved: Amount,
    pub latency: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutboxItem {
    pub cause: Option<usize>,
    pub body: TraceBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NsAction<'a> {
    Instantiate(&'a str),
    Terminate(&'a str),
}

#[derive(Debug, Clone)]
pub struct Deployment {
    pub administrator: ActorId,
    pub inps: BTreeSet<ActorId>,
    pub end_users: BTreeSet<ActorId>,
    pub model: ResourceModel,
    pub infra: Infrastructure,
    pub tenants: BTreeMap<ActorId, Tenant>,
    pub descriptors: BTreeMap<DescriptorId, NetworkServiceDescriptor>,
    pub catalog: BTreeMap<BlueprintId, SliceBlueprint>,
    pub slices: BTreeMap<SliceId, NetworkSlice>,
    pub nsos: BTreeMap<String, Nso>,
    pub tcs: BTreeMap<String, TenantController>,
    pub osses: BTreeMap<String, Oss>,
    pub isolation: IsolationPolicy,
    pub offered: BTreeMap<SliceId, Amount>,
    kpi: BTreeMap<SliceId, SliceKpi>,
    audit: AuditLog,
    now: Amount,
    outbox: Vec<OutboxItem>,
    next_handle: u64,
    next_vnf: u64,
    next_sublease: u64,
}

impl Deployment {
    pub fn new(administrator: impl Into<ActorId>) -> Self {
        let administrator = administrator.into();
        let mut isolation = IsolationPolicy::new(isolation::default_rules());
        isolation.set_role(&administrator, Role::Admin);
        Deployment {
            administrator,
            inps: BTreeSet::new(),
            end_users: BTreeSet::new(),
            model: ResourceModel::new(),
            infra: Infrastructure::new(),
            tenants: BTreeMap::new(),
            descriptors: BTreeMap::new(),
            catalog: BTreeMap::new(),
            slices: BTreeMap::new(),
            nsos: BTreeMap::new(),
            tcs: BTreeMap::new(),
            osses: BTreeMap::new(),
            isolation,
            offered: BTreeMap::new(),
            kpi: BTreeMap::new(),
            audit: AuditLog::default(),
            now: Amount::ZERO,
            outbox: Vec::new(),
            next_handle: 0,
            next_vnf: 0,
            next_sublease: 0,
        }
    }

    // ---- setup ----

    pub fn add_inp(&mut self, inp: &ActorId) {
        self.inps.insert(inp.clone());
        self.isolation.set_role(inp, Role::Inp);
    }

    pub fn add_end_user(&mut self, user: &ActorId) {
        self.end_users.insert(user.clone());
        self.isolation.set_role(user, Role::EndUser);
    }

    pub fn add_pop(&mut self, inp: &ActorId, vim: ManagerId, site: SiteId, inventory: &[(ResourceKind, Amount)]) -> Result<(), ManoError> {
        self.add_inp(inp);
        self.infra.add_vim(&mut self.model, vim, inp.clone(), site, inventory)
    }

    pub fn add_wan(&mut self, inp: &ActorId, wim: ManagerId) -> Result<(), ManoError> {
        self.add_inp(inp);
        self.infra.add_wim(wim, inp.clone())
    }

    pub fn add_wan_link(&mut self, wim: &ManagerId, link: LinkId, a: SiteId, b: SiteId, capacity: Amount) -> Result<(), ManoError> {
        self.infra.add_wan_link(&mut self.model, wim, link, a, b, capacity)
    }

    pub fn add_tenant(&mut self, spec: TenantSpec) -> Result<(), ManoError> {
        if self.tenants.contains_key(&spec.id) {
            return Err(ManoError::Duplicate(spec.id.to_string()));
        }
        if let Some(p) = &spec.provider {
            if !self.tenants.contains_key(p) {
                return Err(ManoError::UnknownTenant(p.clone()));
            }
        } else {
            let managers: Vec<ManagerId> = self.infra.vims.keys().chain(self.infra.wims.keys()).cloned().collect();
            for m in managers {
                self.infra.register_tenant(&m, &spec.id)?;
            }
        }
        let classes: BTreeSet<ObjectClass> = spec.oss_whitelist.iter().map(|f| f.class()).collect();
        let overlay = isolation::end_user_overlay(&self.isolation.rules, &classes);
        self.isolation.set_role(&spec.id, Role::Tenant);
        self.tenants.insert(
            spec.id.clone(),
            Tenant {
                id: spec.id.clone(),
                provider: spec.provider,
                ro: ResourceOrchestrator::new(&spec.id, spec.policy),
                vnfm: Vnfm::new(&spec.id),
                whitelist: spec.oss_whitelist,
                overlay,
            },
        );
        Ok(())
    }

    /// Leases from the infrastructure, or from the provider tenant's
    /// leases when the tenant has one.
    pub fn lease(&mut self, tenant: &ActorId, location: &str, kind: ResourceKind, quantity: Amount) -> Result<Vec<Lease>, ManoError> {
        let t = self.tenants.get(tenant).ok_or_else(|| ManoError::UnknownTenant(tenant.clone()))?;
        let leases = match t.provider.clone() {
            None => vec![self.infra.lease_at(&mut self.model, tenant, location, kind, quantity)?],
            Some(provider) => {
                let pro = &self.tenants[&provider].ro;
                let mut free = pro.available(&self.model, location, kind);
                if kind == ResourceKind::Networking && pro.policy == AllocationPolicy::SharedWithFloors {
                    free -= pro.admitted_floors(location);
                }
                if !quantity.is_positive() || quantity > free {
                    return Err(ManoError::Insufficient { location: location.to_string(), kind, requested: quantity, free: free.max(Amount::ZERO) });
                }
                let parts = pro.sublet(&mut self.model, location, kind, quantity, tenant)?;
                parts
                    .into_iter()
                    .map(|(resource, q)| {
                        let id = format!("sublease-{}", self.next_sublease);
                        self.next_sublease += 1;
                        Lease {
                            id,
                            tenant: tenant.clone(),
                            manager: ManagerId::new(format!("ro-{provider}")),
                            location: location.to_string(),
                            kind,
                            quantity: q,
                            resource,
                        }
                    })
                    .collect()
            }
        };
        let ro = &mut self.tenants.get_mut(tenant).unwrap().ro;
        for l in &leases {
            ro.add_lease(l.clone());
        }
        Ok(leases)
    }

    pub fn add_descriptor(&mut self, nsd: NetworkServiceDescriptor) -> Result<(), ManoError> {
        nsd.validate()?;
        if self.descriptors.contains_key(&nsd.id) {
            return Err(ManoError::Duplicate(nsd.id.to_string()));
        }
        self.descriptors.insert(nsd.id.clone(), nsd);
        Ok(())
    }

    pub fn add_blueprint(&mut self, bp: SliceBlueprint) -> Result<(), ManoError> {
        if let Some(reason) = bp.validate(&self.descriptors).into_iter().next() {
            return Err(ManoError::PlacementInfeasible(reason));
        }
        if self.catalog.contains_key(&bp.id) {
            return Err(ManoError::Duplicate(bp.id.to_string()));
        }
        self.catalog.insert(bp.id.clone(), bp);
        Ok(())
    }

    // ---- engine plumbing ----

    pub fn now(&self) -> Amount {
        self.now
    }

    pub fn set_now(&mut self, now: Amount) {
        self.now = now;
    }

    pub fn drain_outbox(&mut self) -> Vec<OutboxItem> {
        std::mem::take(&mut self.outbox)
    }

    fn emit(&mut self, cause: Option<usize>, body: TraceBody) -> usize {
        self.outbox.push(OutboxItem { cause, body });
        self.outbox.len() - 1
    }

    fn emit_slice(&mut self, cause: Option<usize>, slice: &SliceId, from: SliceState, to: SliceState) -> usize {
        self.emit(cause, TraceBody::Transition { object: slice.to_string(), change: StateChange::Slice { from, to } })
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn tenant(&self, id: &ActorId) -> Result<&Tenant, ManoError> {
        self.tenants.get(id).ok_or_else(|| ManoError::UnknownTenant(id.clone()))
    }

    pub fn slice(&self, id: &SliceId) -> Result<&NetworkSlice, ManoError> {
        self.slices.get(id).ok_or_else(|| ManoError::UnknownSlice(id.clone()))
    }

    fn live_slice(&self, id: &SliceId) -> Result<&NetworkSlice, ManoError> {
        self.slices.get(id).filter(|s| s.state.is_live()).ok_or_else(|| ManoError::UnknownSlice(id.clone()))
    }

    pub fn vnf(&self, id: &VnfId) -> Option<&VnfInstance> {
        self.tenants.values().find_map(|t| t.vnfm.get(id))
    }

    // ---- lifecycle ----

    pub fn create_slice(&mut self, slice: &SliceId, tenant: &ActorId, blueprint: &BlueprintId, requester: &ActorId) -> Result<(), ManoError> {
        self.create_slice_with(slice, tenant, blueprint, requester, None)
    }

    /// Runs the creation phase. With `inject`, the named step fails after
    /// doing its own work. Any failure restores the pre-call state.
    pub fn create_slice_with(
        &mut self,
        slice: &SliceId,
        tenant: &ActorId,
        blueprint: &BlueprintId,
        requester: &ActorId,
        inject: Option<CreationStep>,
    ) -> Result<(), ManoError> {
        let pre = if self.slices.contains_key(slice) {
            Err(ManoError::Duplicate(slice.to_string()))
        } else if !self.tenants.contains_key(tenant) {
            Err(ManoError::UnknownTenant(tenant.clone()))
        } else if !self.catalog.contains_key(blueprint) {
            Err(ManoError::UnknownBlueprint(blueprint.clone()))
        } else if !self.end_users.contains(requester) {
            Err(ManoError::UnknownEndUser(requester.clone()))
        } else {
            Ok(())
        };
        if let Err(e) = pre {
            self.emit(None, TraceBody::CreationFailed { slice: slice.clone(), step: None, reason: e.to_string() });
            return Err(e);
        }

        let snapshot = self.clone();
        let start = self.emit_slice(None, slice, SliceState::Requested, SliceState::Creating);
        let mut created = Vec::new();
        let result = self.run_creation(slice, tenant, blueprint, requester, inject, start, &mut created);
        let Err((step, err)) = result else { return Ok(()) };

        let states: Vec<(VnfId, VnfState)> =
            created.iter().filter_map(|v| self.tenants[tenant].vnfm.get(v).map(|x| (v.clone(), x.state))).collect();
        let outbox = std::mem::take(&mut self.outbox);
        *self = snapshot;
        self.outbox = outbox;
        for (vnf, state) in states {
            self.emit(Some(start), TraceBody::VnfDiscarded { vnf, state });
        }
        self.emit_slice(Some(start), slice, SliceState::Creating, SliceState::Terminated);
        self.emit(Some(start), TraceBody::CreationFailed { slice: slice.clone(), step: Some(step), reason: err.to_string() });
        Err(err)
    }

    #[allow(clippy::too_many_arguments)]
    fn run_creation(
        &mut self,
        slice: &SliceId,
        tenant: &ActorId,
        blueprint: &BlueprintId,
        requester: &ActorId,
        inject: Option<CreationStep>,
        start: usize,
        created: &mut Vec<VnfId>,
    ) -> Result<(), (CreationStep, ManoError)> {
        use CreationStep::*;
        let fail = |step: CreationStep| move |e: ManoError| (step, e);
        let check = |step: CreationStep| if inject == Some(step) { Err((step, ManoError::InjectedFailure(step))) } else { Ok(()) };
        let bp = self.catalog[blueprint].clone();

        // RO reservation on every pool the slice's traffic crosses.
        let mut placed: Vec<(NetworkServiceDescriptor, Vec<SiteId>)> = Vec::new();
        for d in &bp.descriptors {
            let nsd = self.descriptors[d].clone();
            let sites = bp.placement[d].clone();
            if let Some(s) = sites.iter().find(|s| self.infra.vim_at(s).is_none()) {
                return Err((RoReserve, ManoError::PlacementInfeasible(format!("no NFVI-PoP at {s}"))));
            }
            placed.push((nsd, sites));
        }
        let tc_site = placed[0].1[0].clone();
        let mut pools: BTreeSet<String> = BTreeSet::from([tc_site.to_string()]);
        for (nsd, sites) in &placed {
            pools.extend(sites.iter().map(|s| s.to_string()));
            for e in &nsd.edges {
                let (a, b) = (&sites[e.from], &sites[e.to]);
                if a == b {
                    continue;
                }
                let origin = self
                    .infra
                    .wim_serving(a)
                    .ok_or_else(|| (RoReserve, ManoError::PlacementInfeasible(format!("no WAN serves {a}"))))?
                    .id
                    .clone();
                let path = self.infra.wim_path(&origin, a, b, e.bandwidth).map_err(|e| (RoReserve, ManoError::PlacementInfeasible(e.to_string())))?;
                pools.extend(path.links().map(|l| l.to_string()));
            }
        }
        let pool_req: Vec<(String, Amount, Amount)> = pools.into_iter().map(|p| (p, bp.sla.throughput_floor, bp.bandwidth)).collect();
        let mut hosting: Vec<(SiteId, ResourceKind, Amount)> = tc_demand(&tc_site);
        for (nsd, sites) in &placed {
            hosting.extend(function_demands(nsd, sites));
        }
        let n = self.next_handle;
        self.next_handle += 1;
        let (oss_id, tc_id, nso_id) = (format!("oss-{n}"), format!("tc-{n}"), format!("nso-{n}"));
        {
            let model = &mut self.model;
            let ro = &mut self.tenants.get_mut(tenant).unwrap().ro;
            ro.check_hosting(model, &hosting).map_err(fail(RoReserve))?;
            ro.reserve(model, slice, bp.weight, &pool_req).map_err(fail(RoReserve))?;
            ro.reserve_hosting(model, slice, &tc_id, &tc_demand(&tc_site)).map_err(fail(RoReserve))?;
        }
        let whitelist = self.tenants[tenant].whitelist.clone();
        self.osses.insert(oss_id.clone(), Oss { id: oss_id.clone(), slice: slice.clone(), tenant: tenant.clone(), whitelist, inbox: Vec::new() });
        self.nsos.insert(nso_id.clone(), Nso::new(nso_id.clone(), slice, placed.iter().map(|(d, _)| d.clone())));
        self.tcs.insert(tc_id.clone(), TenantController::new(tc_id.clone(), slice));
        self.slices.insert(
            slice.clone(),
            NetworkSlice {
                id: slice.clone(),
                tenant: tenant.clone(),
                blueprint: blueprint.clone(),
                requester: requester.clone(),
                oss: oss_id.clone(),
                tc: tc_id.clone(),
                nso: nso_id.clone(),
                vnfs: Vec::new(),
                state: SliceState::Creating,
                sla: bp.sla.clone(),
                pools: pool_req.iter().map(|(p, _, _)| p.clone()).collect(),
                bandwidth: bp.bandwidth,
                weight: bp.weight,
                underlay: Vec::new(),
            },
        );
        self.emit(Some(start), TraceBody::BlockMessage { from: format!("ro-{tenant}"), to: nso_id.clone(), message: "grant".into() });
        check(RoReserve)?;

        // NSO instantiates every descriptor; the TC is deployed as a VNF.
        for (nsd, sites) in &placed {
            self.ns_instantiate(slice, &nsd.id, sites, Some(start), created).map_err(fail(NsInstantiate))?;
        }
        self.add_vnf(slice, &VnfId::new(tc_id.clone()), TC_FUNCTION, &tc_site, Amount::ONE, Some(start), created)
            .map_err(fail(NsInstantiate))?;
        check(NsInstantiate)?;

        let vnfs = self.slices[slice].vnfs.clone();
        for v in &vnfs {
            for t in [VnfTransition::Configure, VnfTransition::Start] {
                self.transition_vnf(tenant, v, t, Some(start)).map_err(fail(VnfStart))?;
            }
        }
        check(VnfStart)?;

        // NSO asks the TC, through the OSS, to install the graph.
        self.emit(Some(start), TraceBody::BlockMessage { from: nso_id.clone(), to: oss_id.clone(), message: "compose-request".into() });
        self.emit(Some(start), TraceBody::BlockMessage { from: oss_id.clone(), to: tc_id.clone(), message: "compose-request".into() });
        let instances: Vec<(DescriptorId, Vec<VnfId>)> =
            self.nsos[&nso_id].instances().values().map(|r| (r.descriptor.clone(), r.vnfs.clone())).collect();
        let mut installed = 0;
        for (d, ids) in &instances {
            let nsd = &self.descriptors[d];
            let vnfm = &self.tenants[tenant].vnfm;
            installed += self.tcs.get_mut(&tc_id).unwrap().tc_compose(nsd, ids, vnfm).map_err(fail(TcCompose))?.len();
        }
        self.emit(Some(start), TraceBody::BlockMessage { from: tc_id.clone(), to: oss_id.clone(), message: format!("compose-ack {installed}") });
        self.emit(Some(start), TraceBody::BlockMessage { from: oss_id.clone(), to: nso_id.clone(), message: format!("compose-ack {installed}") });
        check(TcCompose)?;

        // IC programs the underlay hop by hop.
        let mut underlay = Vec::new();
        for (d, ids) in &instances {
            let nsd = self.descriptors[d].clone();
            for e in &nsd.edges {
                let pair = (self.host_of(&ids[e.from]), self.host_of(&ids[e.to]));
                let rules = self.infra.ic_program(&[pair], e.bandwidth).map_err(fail(IcProgram))?;
                underlay.extend(rules);
            }
        }
        self.emit(Some(start), TraceBody::BlockMessage { from: tc_id.clone(), to: "ic".into(), message: format!("underlay {}", underlay.len()) });
        self.slices.get_mut(slice).unwrap().underlay = underlay;
        check(IcProgram)?;

        self.activate(slice, start);
        Ok(())
    }

    fn host_of(&self, vnf: &VnfId) -> HostId {
        self.vnf(vnf).and_then(|v| v.host.clone()).unwrap_or_else(|| HostId::new("-"))
    }

    fn activate(&mut self, slice: &SliceId, start: usize) {
        let s = self.slices.get_mut(slice).unwrap();
        s.state = SliceState::Active;
        let s = s.clone();
        self.emit_slice(Some(start), slice, SliceState::Creating, SliceState::Active);
        let objects = self.isolation.register_slice(slice);
        let oss_actor = ActorId::new(s.oss.clone());
        self.isolation.set_role(&oss_actor, Role::Oss);
        for actor in [&s.tenant, &oss_actor, &s.requester] {
            self.isolation.grant_scope(actor, &objects);
        }
        self.isolation
            .performance
            .insert(slice.clone(), KpiBounds { throughput_floor: s.sla.throughput_floor, latency_ceiling: s.sla.latency_ceiling });
        let mut scope = objects;
        scope.extend(s.handles().iter().map(|h| h.to_string()));
        scope.extend(s.vnfs.iter().map(|v| v.to_string()));
        self.emit(Some(start), TraceBody::SliceScope { slice: slice.clone(), objects: scope });
    }

    #[allow(clippy::too_many_arguments)]
    fn add_vnf(
        &mut self,
        slice: &SliceId,
        id: &VnfId,
        function: &str,
        site: &SiteId,
        compute: Amount,
        cause: Option<usize>,
        created: &mut Vec<VnfId>,
    ) -> Result<(), ManoError> {
        let tenant = self.slices[slice].tenant.clone();
        let host = self.infra.allocate_host(site, id)?;
        self.tenants.get_mut(&tenant).unwrap().vnfm.add(VnfInstance {
            id: id.clone(),
            function: function.to_string(),
            slice: slice.clone(),
            site: site.clone(),
            host: Some(host),
            state: VnfState::Null,
            scale: 0,
            compute,
            faulted: false,
            em: EmCounters::default(),
        })?;
        created.push(id.clone());
        self.slices.get_mut(slice).unwrap().vnfs.push(id.clone());
        self.transition_vnf(&tenant, id, VnfTransition::Instantiate, cause)?;
        Ok(())
    }

    fn transition_vnf(&mut self, tenant: &ActorId, vnf: &VnfId, t: VnfTransition, cause: Option<usize>) -> Result<VnfState, ManoError> {
        let vnfm = &mut self.tenants.get_mut(tenant).ok_or_else(|| ManoError::UnknownTenant(tenant.clone()))?.vnfm;
        let (from, to) = vnfm.vnf_lifecycle(vnf, t)?;
        let scale = vnfm.get(vnf).map(|v| v.scale).unwrap_or(0);
        self.emit(cause, TraceBody::Transition { object: vnf.to_string(), change: StateChange::Vnf { from, to, scale } });
        Ok(to)
    }

    /// Applies a VNFM transition requested from outside the creation phase.
    pub fn vnf_lifecycle(&mut self, vnf: &VnfId, t: VnfTransition) -> Result<VnfState, ManoError> {
        let tenant = self.vnf(vnf).map(|v| self.slices[&v.slice].tenant.clone()).ok_or_else(|| ManoError::UnknownVnf(vnf.clone()))?;
        self.transition_vnf(&tenant, vnf, t, None)
    }

    fn ns_instantiate(
        &mut self,
        slice: &SliceId,
        descriptor: &DescriptorId,
        sites: &[SiteId],
        cause: Option<usize>,
        created: &mut Vec<VnfId>,
    ) -> Result<String, ManoError> {
        let s = self.slices.get(slice).ok_or_else(|| ManoError::UnknownSlice(slice.clone()))?;
        let (tenant, nso_id) = (s.tenant.clone(), s.nso.clone());
        let nsd = self.nsos[&nso_id].descriptor(descriptor)?.clone();
        if self.tenants[&tenant].ro.grant(slice).is_none() {
            return Err(ManoError::NoGrant(slice.clone()));
        }
        if let Some(site) = sites.iter().find(|s| self.infra.vim_at(s).is_none()) {
            return Err(ManoError::UnknownSite(site.clone()));
        }
        let instance = self.nsos.get_mut(&nso_id).unwrap().open(descriptor)?;
        let demands = function_demands(&nsd, sites);
        if let Err(e) = self.tenants.get_mut(&tenant).unwrap().ro.reserve_hosting(&mut self.model, slice, &instance, &demands) {
            let _ = self.nsos.get_mut(&nso_id).unwrap().close(&instance);
            return Err(e);
        }
        self.emit(cause, TraceBody::BlockMessage { from: nso_id.clone(), to: format!("vnfm-{tenant}"), message: format!("instantiate {instance}") });
        for (f, site) in nsd.functions.iter().zip(sites) {
            let id = VnfId::new(format!("vnf-{}", self.next_vnf));
            self.next_vnf += 1;
            let compute = f.demand.get(&ResourceKind::Compute).copied().unwrap_or(Amount::ZERO);
            self.add_vnf(slice, &id, &f.id, site, compute, cause, created)?;
            self.nsos.get_mut(&nso_id).unwrap().attach(&instance, id);
        }
        Ok(instance)
    }

    fn ns_terminate(&mut self, slice: &SliceId, instance: &str, cause: Option<usize>) -> Result<(), ManoError> {
        let s = self.slices.get(slice).ok_or_else(|| ManoError::UnknownSlice(slice.clone()))?;
        let (tenant, nso_id) = (s.tenant.clone(), s.nso.clone());
        let record = self.nsos.get_mut(&nso_id).ok_or_else(|| ManoError::UnknownDescriptor(instance.to_string()))?.close(instance)?;
        let mut hosts = BTreeSet::new();
        for v in &record.vnfs {
            hosts.extend(self.retire_vnf(&tenant, v, cause));
        }
        let s = self.slices.get_mut(slice).unwrap();
        s.vnfs.retain(|v| !record.vnfs.contains(v));
        let (gone, kept): (Vec<_>, Vec<_>) = std::mem::take(&mut s.underlay).into_iter().partition(|(_, r)| hosts.contains(&r.src) || hosts.contains(&r.dst));
        s.underlay = kept;
        self.infra.remove_underlay(&gone);
        if let Some(tc) = self.tcs.get_mut(&s.tc) {
            tc.rules.retain(|r| !record.vnfs.contains(&r.from) && !record.vnfs.contains(&r.to));
        }
        self.tenants.get_mut(&tenant).unwrap().ro.release_hosting(&mut self.model, slice, instance);
        Ok(())
    }

    /// Terminates a running VNF or drops one that never ran, and frees its
    /// host.
    fn retire_vnf(&mut self, tenant: &ActorId, vnf: &VnfId, cause: Option<usize>) -> Option<HostId> {
        let inst = self.tenants[tenant].vnfm.get(vnf)?.clone();
        match inst.state {
            VnfState::Running => {
                let _ = self.transition_vnf(tenant, vnf, VnfTransition::Terminate, cause);
            }
            VnfState::Terminated => {}
            state => {
                self.tenants.get_mut(tenant).unwrap().vnfm.discard(vnf);
                self.emit(cause, TraceBody::VnfDiscarded { vnf: vnf.clone(), state });
            }
        }
        if let Some(h) = &inst.host {
            self.infra.release_host(h);
        }
        inst.host
    }

    /// Instantiates or terminates one network service of a live slice.
    /// Returns the instance id.
    pub fn ns_lifecycle(&mut self, slice: &SliceId, action: NsAction<'_>) -> Result<String, ManoError> {
        let s = self.slices.get(slice).ok_or_else(|| ManoError::UnknownSlice(slice.clone()))?;
        match action {
            NsAction::Instantiate(d) => {
                let d = DescriptorId::new(d);
                if self.tenants[&s.tenant].ro.grant(slice).is_none() {
                    return Err(ManoError::NoGrant(slice.clone()));
                }
                let sites = self.catalog[&s.blueprint].placement.get(&d).cloned().ok_or_else(|| ManoError::UnknownDescriptor(d.to_string()))?;
                self.ns_instantiate(slice, &d, &sites, None, &mut Vec::new())
            }
            NsAction::Terminate(i) => {
                self.ns_terminate(slice, i, None)?;
                Ok(i.to_string())
            }
        }
    }

    /// Tears a live slice down and returns everything it held.
    pub fn terminate_slice(&mut self, slice: &SliceId) -> Result<(), ManoError> {
        let s = self.live_slice(slice)?.clone();
        let instances: Vec<String> = self.nsos[&s.nso].instances().keys().cloned().collect();
        for i in instances {
            self.ns_terminate(slice, &i, None)?;
        }
        let tc_vnf = VnfId::new(s.tc.clone());
        self.retire_vnf(&s.tenant, &tc_vnf, None);
        let rest = std::mem::take(&mut self.slices.get_mut(slice).unwrap().underlay);
        self.infra.remove_underlay(&rest);
        self.tenants.get_mut(&s.tenant).unwrap().ro.release(&mut self.model, slice);
        for h in s.handles() {
            self.nsos.remove(h);
            self.tcs.remove(h);
            self.osses.remove(h);
        }
        self.isolation.remove_slice(slice);
        self.isolation.roles.remove(&ActorId::new(s.oss.clone()));
        self.kpi.remove(slice);
        let sl = self.slices.get_mut(slice).unwrap();
        sl.state = SliceState::Terminated;
        sl.vnfs.clear();
        self.emit_slice(None, slice, s.state, SliceState::Terminated);
        Ok(())
    }

    /// Puts one component of a live slice into a faulted condition. Only the
    /// slice's own OSS is told.
    pub fn apply_fault(&mut self, slice: &SliceId, kind: FaultKind) -> Result<(), ManoError> {
        let s = self.live_slice(slice)?.clone();
        let cause = if s.state == SliceState::Active {
            self.slices.get_mut(slice).unwrap().state = SliceState::Faulted;
            Some(self.emit_slice(None, slice, SliceState::Active, SliceState::Faulted))
        } else {
            None
        };
        let component = match kind {
            FaultKind::VnfCrash => {
                let target = s.vnfs.iter().find(|v| v.as_str() != s.tc && self.vnf(v).is_some_and(|x| !x.faulted)).or_else(|| s.vnfs.first());
                target.map(|v| v.to_string()).unwrap_or_else(|| s.tc.clone())
            }
            FaultKind::TcCrash => {
                if let Some(tc) = self.tcs.get_mut(&s.tc) {
                    tc.faulted = true;
                }
                s.tc.clone()
            }
            FaultKind::ConfigCorruption => isolation::object_id(slice, ObjectClass::Config),
        };
        if let Some(inst) = self.tenants.get_mut(&s.tenant).unwrap().vnfm.get_mut(&VnfId::new(component.clone())) {
            inst.faulted = true;
            inst.em.faults += 1;
        }
        let effect = self.emit(cause, TraceBody::FaultEffect { target: component.clone(), detail: format!("{kind:?}") });
        if let Some(oss) = self.osses.get_mut(&s.oss) {
            oss.inbox.push(FaultNotice { kind, component: component.clone() });
        }
        self.emit(Some(effect), TraceBody::FaultEffect { target: s.oss.clone(), detail: format!("notice {component}") });
        Ok(())
    }

    pub fn set_demand(&mut self, slice: &SliceId, load: Amount) {
        self.offered.insert(slice.clone(), load.max(Amount::ZERO));
    }

    // ---- run time ----

    /// Networking pools as the congestion model sees them, plus the RO
    /// allocation of every live slice.
    pub fn pool_states(&self) -> (Vec<PoolState>, BTreeMap<SliceId, BTreeMap<String, Amount>>) {
        let mut pools = Vec::new();
        let mut allocations = BTreeMap::new();
        for t in self.tenants.values() {
            let alloc = t.ro.ro_allocate(&self.model, &self.offered);
            let effective = |s: &SliceId| {
                let faulted = self.slices.get(s).is_some_and(|x| x.state == SliceState::Faulted);
                if faulted {
                    Amount::ZERO
                } else {
                    self.offered.get(s).copied().unwrap_or(Amount::ZERO)
                }
            };
            match t.ro.policy {
                AllocationPolicy::Dedicated => {
                    for (s, row) in &alloc {
                        for (loc, q) in row {
                            pools.push(PoolState {
                                id: format!("{s}@{loc}"),
                                capacity: *q,
                                entries: vec![PoolEntry { slice: s.clone(), offered: effective(s), allocated: *q }],
                            });
                        }
                    }
                }
                AllocationPolicy::SharedWithFloors => {
                    let mut by_loc: BTreeMap<&str, Vec<PoolEntry>> = BTreeMap::new();
                    for (s, row) in &alloc {
                        for (loc, q) in row {
                            by_loc.entry(loc).or_default().push(PoolEntry { slice: s.clone(), offered: effective(s), allocated: *q });
                        }
                    }
                    for (loc, entries) in by_loc {
                        pools.push(PoolState { id: format!("{}@{loc}", t.id), capacity: t.ro.pool_capacity(&self.model, loc), entries });
                    }
                }
            }
            allocations.extend(alloc);
        }
        (pools, allocations)
    }

    /// Recomputes allocations and congestion for every live slice.
    pub fn sample(&mut self) -> (BTreeMap<SliceId, SliceSample>, BTreeMap<String, Amount>) {
        let (pools, mut allocations) = self.pool_states();
        let congestion = evaluate_congestion(&pools);
        let mut out = BTreeMap::new();
        for s in self.slices.values().filter(|s| s.state.is_live()) {
            let outcome = congestion.slices.get(&s.id);
            let sample = SliceSample {
                state: s.state,
                offered: self.offered.get(&s.id).copied().unwrap_or(Amount::ZERO),
                achieved: outcome.map(|o| o.achieved).unwrap_or(Amount::ZERO),
                latency: outcome.map(|o| o.latency).unwrap_or(Amount::ONE),
                allocations: allocations.remove(&s.id).unwrap_or_default(),
            };
            self.kpi.insert(s.id.clone(), SliceKpi { offered: sample.offered, achieved: sample.achieved, latency: sample.latency });
            out.insert(s.id.clone(), sample);
        }
        for t in self.tenants.values_mut() {
            let ids: Vec<VnfId> = t.vnfm.instances().filter(|v| v.state == VnfState::Running).map(|v| v.id.clone()).collect();
            for id in ids {
                t.vnfm.get_mut(&id).unwrap().em.samples += 1;
            }
        }
        (out, congestion.utilization)
    }

    /// Grows a tenant's leases by `quantity` at `location`.
    pub fn lease_change(&mut self, tenant: &ActorId, location: &str, kind: ResourceKind, quantity: Amount) -> Result<Vec<Lease>, ManoError> {
        self.lease(tenant, location, kind, quantity)
    }

    // ---- isolation ----

    /// Access decision for a slice object, recorded in the audit log. The
    /// owning tenant's rules, and those of every provider above it, must
    /// also allow the access.
    pub fn authorize(&mut self, actor: &ActorId, object: &str, verb: Verb) -> Decision {
        let mut overlays: Vec<&RuleSet> = Vec::new();
        if let Some(s) = isolation::parse_object(object).and_then(|(s, _)| self.slices.get(&s)) {
            let mut cur = Some(&s.tenant);
            while let Some(t) = cur.and_then(|t| self.tenants.get(t)) {
                overlays.push(&t.overlay);
                cur = t.provider.as_ref();
            }
        }
        self.audit.authorize(&self.isolation, &overlays, self.now, actor, object, verb)
    }

    /// Context information served by a slice's OSS, within what the tenant
    /// allows.
    pub fn oss_expose(&mut self, slice: &SliceId, actor: &ActorId, field: QueryField) -> Result<ContextInfo, ManoError> {
        let object = isolation::object_id(slice, field.class());
        let live = self.live_slice(slice).map(|s| (s.oss.clone(), s.sla.clone(), s.vnfs.clone()));
        if self.authorize(actor, &object, Verb::Read) == Decision::Deny {
            return Err(ManoError::Denied { actor: actor.clone(), object });
        }
        let (oss, sla, vnfs) = live?;
        Ok(match field {
            QueryField::Kpis => ContextInfo::Kpis(self.kpi.get(slice).cloned()),
            QueryField::Faults => ContextInfo::Faults(self.osses[&oss].inbox.clone()),
            QueryField::Placement => ContextInfo::Placement(vnfs.iter().filter_map(|v| self.vnf(v).map(|x| (v.clone(), x.site.clone()))).collect()),
            QueryField::UserPolicies => ContextInfo::UserPolicies(sla),
        })
    }

    // ---- views ----

    /// Usage rows per tenant across every VIM and WIM.
    pub fn ic_rule_dump(&self) -> String {
        self.infra.ic_rule_dump()
    }

    /// SHA-256 over live resources, managers, tenants, slices, per-slice
    /// blocks and the isolation policy. Released resources, id counters,
    /// the audit log and the outbox are left out.
    pub fn state_digest(&self) -> String {
        #[derive(Serialize)]
        struct Snapshot<'a> {
            resources: Vec<&'a Resource>,
            infra: &'a Infrastructure,
            tenants: &'a BTreeMap<ActorId, Tenant>,
            slices: &'a BTreeMap<SliceId, NetworkSlice>,
            nsos: &'a BTreeMap<String, Nso>,
            tcs: &'a BTreeMap<String, TenantController>,
            osses: &'a BTreeMap<String, Oss>,
            isolation: &'a IsolationPolicy,
            offered: &'a BTreeMap<SliceId, Amount>,
        }
        let snap = Snapshot {
            resources: self.model.iter_live().collect(),
            infra: &self.infra,
            tenants: &self.tenants,
            slices: &self.slices,
            nsos: &self.nsos,
            tcs: &self.tcs,
            osses: &self.osses,
            isolation: &self.isolation,
            offered: &self.offered,
        };
        hex::encode(Sha256::digest(serde_json::to_vec(&snap).expect("state serializes")))
    }

    /// Builds the SDN view of the deployment: one controller per InP over
    /// its physical resources, one per tenant attached as a client of the
    /// controllers it leases from, and one client context per end user.
    pub fn control_plane(&self) -> Result<ControlPlane, ManoError> {
        let admin = AdministratorHandle::new(self.administrator.clone());
        let criteria = AbstractionCriteria::capacity_only();
        let group = |id: &str, members: Vec<ResourceId>| {
            ResourceGroup::new(id, members.into_iter().map(Handle::Resource), criteria.clone(), &self.model)
        };
        let mut cp = ControlPlane::new();
        let leases_of = |t: &Tenant, manager_owner: &dyn Fn(&ManagerId) -> bool| -> Vec<ResourceId> {
            t.ro.leases().iter().filter(|l| manager_owner(&l.manager)).map(|l| l.resource).filter(|r| self.model.live(*r).is_ok()).collect()
        };
        for inp in &self.inps {
            let mut ctl = SdnController::new(format!("ctl-{inp}"), inp.clone(), admin.clone(), AllocationPolicy::Dedicated);
            let phys: Vec<ResourceId> = self.model.iter_live().filter(|r| r.is_physical() && &r.owner == inp).map(|r| r.id).collect();
            if phys.is_empty() {
                continue;
            }
            ctl.admin_create_context(&self.model, &admin, ContextSpec::server("substrate", group("substrate", phys)?))?;
            let owned = |m: &ManagerId| {
                self.infra.vims.get(m).map(|v| &v.inp).or_else(|| self.infra.wims.get(m).map(|w| &w.inp)) == Some(inp)
            };
            for t in self.tenants.values().filter(|t| t.provider.is_none()) {
                let rs = leases_of(t, &owned);
                if !rs.is_empty() {
                    let spec = ContextSpec::client(t.id.as_str(), t.id.clone(), group(t.id.as_str(), rs)?, ClientSupport::permissive());
                    ctl.admin_create_context(&self.model, &admin, spec)?;
                }
            }
            cp.add(ctl)?;
        }
        let depth = |t: &Tenant| {
            let mut d = 0;
            let mut cur = t.provider.as_ref();
            while let Some(p) = cur {
                d += 1;
                cur = self.tenants.get(p).and_then(|x| x.provider.as_ref());
            }
            d
        };
        let mut order: Vec<&Tenant> = self.tenants.values().collect();
        order.sort_by_key(|t| (depth(t), t.id.clone()));
        for t in order {
            let id = ControllerId::new(format!("ctl-{}", t.id));
            cp.add(SdnController::new(id.clone(), t.id.clone(), admin.clone(), t.ro.policy))?;
            let lowers: Vec<ControllerId> = match &t.provider {
                Some(p) => vec![ControllerId::new(format!("ctl-{p}"))],
                None => self.inps.iter().map(|i| ControllerId::new(format!("ctl-{i}"))).collect(),
            };
            let ctx = ContextId::new(t.id.as_str());
            for lower in lowers {
                if cp.get(&lower).is_ok_and(|c| c.client_context(&ctx).is_some()) {
                    cp.attach_as_client(&id, &lower, &ctx)?;
                }
            }
            let ctl = cp.get_mut(&id)?;
            for sub in self.tenants.values().filter(|s| s.provider.as_ref() == Some(&t.id)) {
                let rs = leases_of(sub, &|_| true);
                if !rs.is_empty() {
                    let spec = ContextSpec::client(sub.id.as_str(), sub.id.clone(), group(sub.id.as_str(), rs)?, ClientSupport::permissive());
                    ctl.admin_create_context(&self.model, &admin, spec)?;
                }
            }
            let own = leases_of(t, &|_| true);
            let users: BTreeSet<&ActorId> = self.slices.values().filter(|s| s.tenant == t.id).map(|s| &s.requester).collect();
            if !own.is_empty() {
                for u in users {
                    let spec = ContextSpec::client(u.as_str(), u.clone(), group(u.as_str(), own.clone())?, ClientSupport::permissive());
                    ctl.admin_create_context(&self.model, &admin, spec)?;
                }
            }
        }
        Ok(cp)
    }
}

fn tc_demand(site: &SiteId) -> Vec<(SiteId, ResourceKind, Amount)> {
    vec![(site.clone(), ResourceKind::Compute, Amount::ONE)]
}

/// Hosting demands of a descriptor's functions at their sites. Networking
/// is carried by the graph edges instead.
fn function_demands(nsd: &NetworkServiceDescriptor, sites: &[SiteId]) -> Vec<(SiteId, ResourceKind, Amount)> {
    nsd.functions
        .iter()
        .zip(sites)
        .flat_map(|(f, site)| {
            f.demand.iter().filter(|(k, q)| **k != ResourceKind::Networking && q.is_positive()).map(move |(k, q)| (site.clone(), *k, *q))
        })
        .collect()
}
