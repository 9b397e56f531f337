//! Infrastructure-level blocks: VIMs for NFVI-PoPs, WIMs for WAN transport,
//! and the infrastructure SDN controllers (IC) they own.
//!
//! Everything here is slice-agnostic. VIMs and WIMs know tenants only as
//! lease holders; ICs know neither tenants nor slices, only hosts and links.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::{ActorId, HostId, LinkId, ManagerId, SiteId, VnfId};
use crate::resource::{ResourceId, ResourceKind, ResourceModel};

use super::ManoError;

/// A tenant's slice of an infrastructure manager's inventory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub id: String,
    pub tenant: ActorId,
    pub manager: ManagerId,
    /// Site id for VIM leases, link id for WIM leases.
    pub location: String,
    pub kind: ResourceKind,
    pub quantity: Amount,
    /// The partition backing this lease.
    pub resource: ResourceId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnderlayRule {
    pub id: String,
    pub src: HostId,
    pub dst: HostId,
    pub links: Vec<LinkId>,
    pub bandwidth: Amount,
}

/// Infrastructure SDN controller. Programs connectivity between hosts over
/// the links of its manager's domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfraController {
    pub id: String,
    links: BTreeMap<LinkId, Amount>,
    programmed: BTreeMap<LinkId, Amount>,
    rules: Vec<UnderlayRule>,
    #[serde(skip)]
    next_rule: u64,
}

impl InfraController {
    pub fn new(id: impl Into<String>) -> Self {
        InfraController { id: id.into(), links: BTreeMap::new(), programmed: BTreeMap::new(), rules: Vec::new(), next_rule: 0 }
    }

    pub fn add_link(&mut self, link: LinkId, capacity: Amount) {
        self.links.insert(link, capacity);
    }

    pub fn rules(&self) -> &[UnderlayRule] {
        &self.rules
    }

    pub fn free(&self, link: &LinkId) -> Option<Amount> {
        self.links.get(link).map(|c| *c - self.programmed.get(link).copied().unwrap_or(Amount::ZERO))
    }

    pub fn programmed(&self) -> &BTreeMap<LinkId, Amount> {
        &self.programmed
    }

    /// Installs one rule carrying `bandwidth` from `src` to `dst` over
    /// `links`, all of which must belong to this controller.
    pub fn program(&mut self, src: &HostId, dst: &HostId, links: &[LinkId], bandwidth: Amount) -> Result<UnderlayRule, ManoError> {
        for l in links {
            match self.free(l) {
                None => return Err(ManoError::UnknownLink(l.clone())),
                Some(free) if free < bandwidth => return Err(ManoError::NoCapacity { link: l.clone(), requested: bandwidth, free }),
                _ => {}
            }
        }
        for l in links {
            *self.programmed.entry(l.clone()).or_insert(Amount::ZERO) += bandwidth;
        }
        let rule = UnderlayRule {
            id: format!("u{}", self.next_rule),
            src: src.clone(),
            dst: dst.clone(),
            links: links.to_vec(),
            bandwidth,
        };
        self.next_rule += 1;
        self.rules.push(rule.clone());
        Ok(rule)
    }

    pub fn remove(&mut self, rule_id: &str) -> Option<UnderlayRule> {
        let pos = self.rules.iter().position(|r| r.id == rule_id)?;
        let rule = self.rules.remove(pos);
        for l in &rule.links {
            if let Some(p) = self.programmed.get_mut(l) {
                *p -= rule.bandwidth;
                if p.is_zero() {
                    self.programmed.remove(l);
                }
            }
        }
        Some(rule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vim {
    pub id: ManagerId,
    pub inp: ActorId,
    pub site: SiteId,
    pub inventory: BTreeMap<ResourceKind, ResourceId>,
    /// Intra-PoP fabric link, backed by the networking inventory.
    pub fabric: LinkId,
    pub tenants: BTreeSet<ActorId>,
    pub leases: Vec<Lease>,
    pub hosts: BTreeMap<HostId, VnfId>,
    pub ic: InfraController,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WanLink {
    pub id: LinkId,
    pub a: SiteId,
    pub b: SiteId,
    pub resource: ResourceId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wim {
    pub id: ManagerId,
    pub inp: ActorId,
    pub links: BTreeMap<LinkId, WanLink>,
    /// Peer WIM -> agreement name. Always mutual.
    pub peers: BTreeMap<ManagerId, String>,
    pub tenants: BTreeSet<ActorId>,
    pub leases: Vec<Lease>,
    pub ic: InfraController,
}

impl Wim {
    pub fn sites(&self) -> BTreeSet<SiteId> {
        self.links.values().flat_map(|l| [l.a.clone(), l.b.clone()]).collect()
    }

    /// Shortest route inside this WAN, links tried in id order. With
    /// `bandwidth` set, only links with that much unprogrammed capacity are
    /// used.
    fn route(&self, from: &SiteId, to: &SiteId, bandwidth: Option<Amount>) -> Option<Vec<LinkId>> {
        if from == to {
            return Some(Vec::new());
        }
        let mut prev: BTreeMap<SiteId, (SiteId, LinkId)> = BTreeMap::new();
        let mut queue = VecDeque::from([from.clone()]);
        let mut seen = BTreeSet::from([from.clone()]);
        while let Some(cur) = queue.pop_front() {
            for l in self.links.values() {
                let next = if l.a == cur {
                    &l.b
                } else if l.b == cur {
                    &l.a
                } else {
                    continue;
                };
                if let Some(bw) = bandwidth {
                    if self.ic.free(&l.id).is_none_or(|f| f < bw) {
                        continue;
                    }
                }
                if seen.insert(next.clone()) {
                    prev.insert(next.clone(), (cur.clone(), l.id.clone()));
                    if next == to {
                        let mut path = Vec::new();
                        let mut at = to.clone();
                        while let Some((p, link)) = prev.get(&at) {
                            path.push(link.clone());
                            at = p.clone();
                        }
                        path.reverse();
                        return Some(path);
                    }
                    queue.push_back(next.clone());
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSegment {
    pub wim: ManagerId,
    pub from: SiteId,
    pub to: SiteId,
    pub links: Vec<LinkId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WanPath {
    pub segments: Vec<PathSegment>,
}

impl WanPath {
    pub fn links(&self) -> impl Iterator<Item = &LinkId> {
        self.segments.iter().flat_map(|s| s.links.iter())
    }

    pub fn is_direct(&self) -> bool {
        self.segments.len() == 1
    }
}

/// Usage rows keyed by tenant (or slice, for RO reports).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageReport {
    pub rows: BTreeMap<String, BTreeMap<ResourceKind, Amount>>,
    pub totals: BTreeMap<ResourceKind, Amount>,
}

impl UsageReport {
    fn add(&mut self, row: &str, kind: ResourceKind, q: Amount) {
        *self.rows.entry(row.to_string()).or_default().entry(kind).or_insert(Amount::ZERO) += q;
        *self.totals.entry(kind).or_insert(Amount::ZERO) += q;
    }

    /// Whether rows sum to the totals, kind by kind.
    pub fn reconciles(&self) -> bool {
        let mut sums: BTreeMap<ResourceKind, Amount> = BTreeMap::new();
        for row in self.rows.values() {
            for (k, q) in row {
                *sums.entry(*k).or_insert(Amount::ZERO) += *q;
            }
        }
        sums.retain(|_, q| !q.is_zero());
        let mut totals = self.totals.clone();
        totals.retain(|_, q| !q.is_zero());
        sums == totals
    }
}

fn usage_of(leases: &[Lease]) -> UsageReport {
    let mut r = UsageReport::default();
    for l in leases {
        r.add(l.tenant.as_str(), l.kind, l.quantity);
    }
    r
}

impl Vim {
    pub fn usage_report(&self) -> UsageReport {
        usage_of(&self.leases)
    }
}

impl Wim {
    pub fn usage_report(&self) -> UsageReport {
        usage_of(&self.leases)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Infrastructure {
    pub vims: BTreeMap<ManagerId, Vim>,
    pub wims: BTreeMap<ManagerId, Wim>,
    #[serde(skip)]
    next_lease: u64,
    #[serde(skip)]
    next_host: u64,
}

impl Infrastructure {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a PoP managed by a new VIM with one physical resource per kind.
    pub fn add_vim(
        &mut self,
        model: &mut ResourceModel,
        id: ManagerId,
        inp: ActorId,
        site: SiteId,
        inventory: &[(ResourceKind, Amount)],
    ) -> Result<(), ManoError> {
        if self.vims.contains_key(&id) || self.wims.contains_key(&id) {
            return Err(ManoError::Duplicate(id.to_string()));
        }
        let fabric = LinkId::new(format!("fabric-{site}"));
        let mut ic = InfraController::new(format!("ic-{id}"));
        let mut inv = BTreeMap::new();
        for (kind, cap) in inventory {
            let attrs = [("site".to_string(), site.to_string()), ("inp".to_string(), inp.to_string())];
            let r = model.add_physical(*kind, *cap, inp.clone(), attrs)?;
            inv.insert(*kind, r);
            if *kind == ResourceKind::Networking {
                ic.add_link(fabric.clone(), *cap);
            }
        }
        self.vims.insert(
            id.clone(),
            Vim {
                id,
                inp,
                site,
                inventory: inv,
                fabric,
                tenants: BTreeSet::new(),
                leases: Vec::new(),
                hosts: BTreeMap::new(),
                ic,
            },
        );
        Ok(())
    }

    pub fn add_wim(&mut self, id: ManagerId, inp: ActorId) -> Result<(), ManoError> {
        if self.vims.contains_key(&id) || self.wims.contains_key(&id) {
            return Err(ManoError::Duplicate(id.to_string()));
        }
        let ic = InfraController::new(format!("ic-{id}"));
        self.wims.insert(
            id.clone(),
            Wim { id, inp, links: BTreeMap::new(), peers: BTreeMap::new(), tenants: BTreeSet::new(), leases: Vec::new(), ic },
        );
        Ok(())
    }

    pub fn add_wan_link(
        &mut self,
        model: &mut ResourceModel,
        wim: &ManagerId,
        link: LinkId,
        a: SiteId,
        b: SiteId,
        capacity: Amount,
    ) -> Result<(), ManoError> {
        if self.wims.values().any(|w| w.links.contains_key(&link)) {
            return Err(ManoError::Duplicate(link.to_string()));
        }
        let w = self.wims.get_mut(wim).ok_or_else(|| ManoError::UnknownManager(wim.clone()))?;
        let attrs = [("link".to_string(), link.to_string()), ("inp".to_string(), w.inp.to_string())];
        let resource = model.add_physical(ResourceKind::Networking, capacity, w.inp.clone(), attrs)?;
        w.ic.add_link(link.clone(), capacity);
        w.links.insert(link.clone(), WanLink { id: link, a, b, resource });
        Ok(())
    }

    pub fn peer(&mut self, a: &ManagerId, b: &ManagerId, agreement: &str) -> Result<(), ManoError> {
        if a == b {
            return Err(ManoError::Duplicate(a.to_string()));
        }
        for w in [a, b] {
            if !self.wims.contains_key(w) {
                return Err(ManoError::UnknownManager(w.clone()));
            }
        }
        self.wims.get_mut(a).unwrap().peers.insert(b.clone(), agreement.to_string());
        self.wims.get_mut(b).unwrap().peers.insert(a.clone(), agreement.to_string());
        Ok(())
    }

    pub fn register_tenant(&mut self, manager: &ManagerId, tenant: &ActorId) -> Result<(), ManoError> {
        if let Some(v) = self.vims.get_mut(manager) {
            v.tenants.insert(tenant.clone());
        } else if let Some(w) = self.wims.get_mut(manager) {
            w.tenants.insert(tenant.clone());
        } else {
            return Err(ManoError::UnknownManager(manager.clone()));
        }
        Ok(())
    }

    pub fn sites(&self) -> BTreeSet<SiteId> {
        self.vims.values().map(|v| v.site.clone()).collect()
    }

    pub fn vim_at(&self, site: &SiteId) -> Option<&Vim> {
        self.vims.values().find(|v| &v.site == site)
    }

    /// The manager that owns a lease location (site or WAN link).
    pub fn manager_of(&self, location: &str) -> Option<ManagerId> {
        if let Some(v) = self.vims.values().find(|v| v.site.as_str() == location) {
            return Some(v.id.clone());
        }
        self.wims.values().find(|w| w.links.contains_key(&LinkId::new(location))).map(|w| w.id.clone())
    }

    /// Leases `request` from a VIM at `location`. All kinds are granted or
    /// none.
    pub fn vim_lease(
        &mut self,
        model: &mut ResourceModel,
        vim: &ManagerId,
        tenant: &ActorId,
        request: &[(ResourceKind, Amount)],
        location: &SiteId,
    ) -> Result<Vec<Lease>, ManoError> {
        let v = self.vims.get(vim).ok_or_else(|| ManoError::UnknownManager(vim.clone()))?;
        if !v.tenants.contains(tenant) {
            return Err(ManoError::UnknownTenant(tenant.clone()));
        }
        let mut plan = Vec::new();
        let mut wanted: BTreeMap<ResourceKind, Amount> = BTreeMap::new();
        for (kind, q) in request {
            *wanted.entry(*kind).or_insert(Amount::ZERO) += *q;
        }
        for (kind, q) in &wanted {
            let free = match (v.site == *location, v.inventory.get(kind)) {
                (true, Some(r)) => model.free_capacity(*r)?,
                _ => Amount::ZERO,
            };
            if !q.is_positive() || *q > free {
                return Err(ManoError::Insufficient { location: location.to_string(), kind: *kind, requested: *q, free });
            }
            plan.push((*kind, *q, v.inventory[kind]));
        }
        let mut leases = Vec::new();
        for (kind, q, r) in plan {
            let part = model.partition_to(r, &[q], tenant)?[0];
            leases.push(self.record_lease(vim, tenant, location.as_str(), kind, q, part));
        }
        Ok(leases)
    }

    /// Leases `quantity` Mb/s on a WAN link.
    pub fn wim_lease(
        &mut self,
        model: &mut ResourceModel,
        wim: &ManagerId,
        tenant: &ActorId,
        link: &LinkId,
        quantity: Amount,
    ) -> Result<Lease, ManoError> {
        let w = self.wims.get(wim).ok_or_else(|| ManoError::UnknownManager(wim.clone()))?;
        if !w.tenants.contains(tenant) {
            return Err(ManoError::UnknownTenant(tenant.clone()));
        }
        let insufficient = |free| ManoError::Insufficient {
            location: link.to_string(),
            kind: ResourceKind::Networking,
            requested: quantity,
            free,
        };
        let Some(l) = w.links.get(link) else { return Err(insufficient(Amount::ZERO)) };
        let free = model.free_capacity(l.resource)?;
        if !quantity.is_positive() || quantity > free {
            return Err(insufficient(free));
        }
        let part = model.partition_to(l.resource, &[quantity], tenant)?[0];
        Ok(self.record_lease(wim, tenant, link.as_str(), ResourceKind::Networking, quantity, part))
    }

    fn record_lease(&mut self, manager: &ManagerId, tenant: &ActorId, location: &str, kind: ResourceKind, quantity: Amount, resource: ResourceId) -> Lease {
        let lease = Lease {
            id: format!("lease-{}", self.next_lease),
            tenant: tenant.clone(),
            manager: manager.clone(),
            location: location.to_string(),
            kind,
            quantity,
            resource,
        };
        self.next_lease += 1;
        if let Some(v) = self.vims.get_mut(manager) {
            v.leases.push(lease.clone());
        } else if let Some(w) = self.wims.get_mut(manager) {
            w.leases.push(lease.clone());
        }
        lease
    }

    /// Leases at whichever manager owns `location`.
    pub fn lease_at(
        &mut self,
        model: &mut ResourceModel,
        tenant: &ActorId,
        location: &str,
        kind: ResourceKind,
        quantity: Amount,
    ) -> Result<Lease, ManoError> {
        let manager = self.manager_of(location).ok_or_else(|| ManoError::Insufficient {
            location: location.to_string(),
            kind,
            requested: quantity,
            free: Amount::ZERO,
        })?;
        if self.vims.contains_key(&manager) {
            Ok(self.vim_lease(model, &manager, tenant, &[(kind, quantity)], &SiteId::new(location))?.remove(0))
        } else {
            if kind != ResourceKind::Networking {
                return Err(ManoError::Insufficient { location: location.to_string(), kind, requested: quantity, free: Amount::ZERO });
            }
            self.wim_lease(model, &manager, tenant, &LinkId::new(location), quantity)
        }
    }

    /// Finds a capacity-feasible WAN path between two sites, starting at
    /// `origin` and delegating to at most one peered WIM.
    pub fn wim_path(&self, origin: &ManagerId, from: &SiteId, to: &SiteId, bandwidth: Amount) -> Result<WanPath, ManoError> {
        let o = self.wims.get(origin).ok_or_else(|| ManoError::UnknownManager(origin.clone()))?;
        let all_sites: BTreeSet<SiteId> = self.wims.values().flat_map(|w| w.sites()).chain(self.sites()).collect();
        for s in [from, to] {
            if !all_sites.contains(s) {
                return Err(ManoError::UnknownSite(s.clone()));
            }
        }
        if let Some(p) = self.search(o, from, to, Some(bandwidth)) {
            return Ok(p);
        }
        if self.search(o, from, to, None).is_some() {
            let link = self
                .search(o, from, to, None)
                .and_then(|p| p.links().find(|l| self.link_free(l).is_some_and(|f| f < bandwidth)).cloned())
                .unwrap_or_else(|| LinkId::new("?"));
            let free = self.link_free(&link).unwrap_or(Amount::ZERO);
            return Err(ManoError::NoCapacity { link, requested: bandwidth, free });
        }
        Err(ManoError::NoPeering { origin: origin.clone(), from: from.clone(), to: to.clone() })
    }

    fn link_free(&self, link: &LinkId) -> Option<Amount> {
        self.wims.values().find_map(|w| w.ic.free(link))
    }

    fn search(&self, origin: &Wim, from: &SiteId, to: &SiteId, bw: Option<Amount>) -> Option<WanPath> {
        let seg = |w: &Wim, a: &SiteId, b: &SiteId, links: Vec<LinkId>| PathSegment { wim: w.id.clone(), from: a.clone(), to: b.clone(), links };
        if let Some(links) = origin.route(from, to, bw) {
            return Some(WanPath { segments: vec![seg(origin, from, to, links)] });
        }
        for peer_id in origin.peers.keys() {
            let Some(peer) = self.wims.get(peer_id) else { continue };
            let shared: BTreeSet<SiteId> = origin.sites().intersection(&peer.sites()).cloned().collect();
            for mid in &shared {
                if mid == from || mid == to {
                    continue;
                }
                if let (Some(a), Some(b)) = (origin.route(from, mid, bw), peer.route(mid, to, bw)) {
                    return Some(WanPath { segments: vec![seg(origin, from, mid, a), seg(peer, mid, to, b)] });
                }
                if let (Some(a), Some(b)) = (peer.route(from, mid, bw), origin.route(mid, to, bw)) {
                    return Some(WanPath { segments: vec![seg(peer, from, mid, a), seg(origin, mid, to, b)] });
                }
            }
        }
        None
    }

    /// First WIM (by id) with a link touching `site`.
    pub fn wim_serving(&self, site: &SiteId) -> Option<&Wim> {
        self.wims.values().find(|w| w.sites().contains(site))
    }

    /// Creates a VM for `vnf` at `site`.
    pub fn allocate_host(&mut self, site: &SiteId, vnf: &VnfId) -> Result<HostId, ManoError> {
        let host = HostId::new(format!("vm-{}", self.next_host));
        let vim = self.vims.values_mut().find(|v| &v.site == site).ok_or_else(|| ManoError::UnknownSite(site.clone()))?;
        self.next_host += 1;
        vim.hosts.insert(host.clone(), vnf.clone());
        Ok(host)
    }

    pub fn release_host(&mut self, host: &HostId) {
        for v in self.vims.values_mut() {
            v.hosts.remove(host);
        }
    }

    pub fn site_of_host(&self, host: &HostId) -> Option<&SiteId> {
        self.vims.values().find(|v| v.hosts.contains_key(host)).map(|v| &v.site)
    }

    /// Programs underlay connectivity for every host pair through the ICs
    /// of the VIMs and WIMs on the way. All-or-nothing; returns
    /// `(ic id, rule)` for each installed rule.
    pub fn ic_program(&mut self, pairs: &[(HostId, HostId)], bandwidth: Amount) -> Result<Vec<(String, UnderlayRule)>, ManoError> {
        let mut installed: Vec<(String, UnderlayRule)> = Vec::new();
        let result = (|| {
            for (src, dst) in pairs {
                let s = self.site_of_host(src).ok_or_else(|| ManoError::UnknownHost(src.clone()))?.clone();
                let d = self.site_of_host(dst).ok_or_else(|| ManoError::UnknownHost(dst.clone()))?.clone();
                let mut hops: Vec<(ManagerId, Vec<LinkId>)> = Vec::new();
                let vim_s = self.vim_at(&s).unwrap();
                hops.push((vim_s.id.clone(), vec![vim_s.fabric.clone()]));
                if s != d {
                    let origin = self
                        .wim_serving(&s)
                        .ok_or_else(|| ManoError::NoPeering { origin: ManagerId::new("-"), from: s.clone(), to: d.clone() })?
                        .id
                        .clone();
                    let path = self.wim_path(&origin, &s, &d, bandwidth)?;
                    for seg in path.segments {
                        hops.push((seg.wim, seg.links));
                    }
                    let vim_d = self.vim_at(&d).unwrap();
                    hops.push((vim_d.id.clone(), vec![vim_d.fabric.clone()]));
                }
                for (manager, links) in hops {
                    let ic = self.ic_mut(&manager);
                    let rule = ic.program(src, dst, &links, bandwidth)?;
                    installed.push((ic.id.clone(), rule));
                }
            }
            Ok(())
        })();
        match result {
            Ok(()) => Ok(installed),
            Err(e) => {
                self.remove_underlay(&installed);
                Err(e)
            }
        }
    }

    fn ic_mut(&mut self, manager: &ManagerId) -> &mut InfraController {
        if let Some(v) = self.vims.get_mut(manager) {
            &mut v.ic
        } else {
            &mut self.wims.get_mut(manager).expect("manager exists").ic
        }
    }

    pub fn remove_underlay(&mut self, rules: &[(String, UnderlayRule)]) {
        for (ic_id, rule) in rules.iter().rev() {
            for ic in self.ics_mut() {
                if &ic.id == ic_id {
                    ic.remove(&rule.id);
                }
            }
        }
    }

    pub fn ics(&self) -> impl Iterator<Item = &InfraController> {
        self.vims.values().map(|v| &v.ic).chain(self.wims.values().map(|w| &w.ic))
    }

    fn ics_mut(&mut self) -> impl Iterator<Item = &mut InfraController> {
        self.vims.values_mut().map(|v| &mut v.ic).chain(self.wims.values_mut().map(|w| &mut w.ic))
    }

    /// Serialized rule tables of every IC.
    pub fn ic_rule_dump(&self) -> String {
        let tables: Vec<&InfraController> = self.ics().collect();
        serde_json::to_string(&tables).expect("rule tables serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(v: i64) -> Amount {
        Amount::from_int(v)
    }

    fn pop(model: &mut ResourceModel, infra: &mut Infrastructure, site: &str, compute: i64) {
        infra
            .add_vim(
                model,
                ManagerId::new(format!("vim-{site}")),
                "inp1".into(),
                site.into(),
                &[(ResourceKind::Compute, a(compute)), (ResourceKind::Networking, a(400))],
            )
            .unwrap();
    }

    #[test]
    fn vim_lease_examples() {
        let mut m = ResourceModel::new();
        let mut infra = Infrastructure::new();
        pop(&mut m, &mut infra, "pop1", 100);
        let vim = ManagerId::new("vim-pop1");
        for t in ["t1", "t2", "t3"] {
            infra.register_tenant(&vim, &t.into()).unwrap();
        }
        let l = infra.vim_lease(&mut m, &vim, &"t1".into(), &[(ResourceKind::Compute, a(40))], &"pop1".into()).unwrap();
        assert_eq!(l[0].quantity, a(40));
        let cpu = infra.vims[&vim].inventory[&ResourceKind::Compute];
        assert_eq!(m.free_capacity(cpu).unwrap(), a(60));

        infra.vim_lease(&mut m, &vim, &"t2".into(), &[(ResourceKind::Compute, a(60))], &"pop1".into()).unwrap();
        let err = infra.vim_lease(&mut m, &vim, &"t3".into(), &[(ResourceKind::Compute, a(1))], &"pop1".into());
        assert!(matches!(err, Err(ManoError::Insufficient { .. })));

        let err = infra.vim_lease(&mut m, &vim, &"t3".into(), &[(ResourceKind::Networking, a(1))], &"elsewhere".into());
        assert!(matches!(err, Err(ManoError::Insufficient { .. })));
        let err = infra.vim_lease(&mut m, &vim, &"ghost".into(), &[(ResourceKind::Networking, a(1))], &"pop1".into());
        assert_eq!(err, Err(ManoError::UnknownTenant("ghost".into())));
    }

    #[test]
    fn vim_lease_is_atomic_across_kinds() {
        let mut m = ResourceModel::new();
        let mut infra = Infrastructure::new();
        pop(&mut m, &mut infra, "pop1", 10);
        let vim = ManagerId::new("vim-pop1");
        infra.register_tenant(&vim, &"t".into()).unwrap();
        let before = m.clone();
        let err = infra.vim_lease(&mut m, &vim, &"t".into(), &[(ResourceKind::Networking, a(5)), (ResourceKind::Compute, a(11))], &"pop1".into());
        assert!(err.is_err());
        assert_eq!(m, before);
    }

    fn wan_fixture() -> (ResourceModel, Infrastructure) {
        let mut m = ResourceModel::new();
        let mut infra = Infrastructure::new();
        pop(&mut m, &mut infra, "pop1", 10);
        pop(&mut m, &mut infra, "pop2", 10);
        pop(&mut m, &mut infra, "pop3", 10);
        infra.add_wim("wim2".into(), "inp2".into()).unwrap();
        infra.add_wim("wim3".into(), "inp3".into()).unwrap();
        infra.add_wan_link(&mut m, &"wim2".into(), "l12".into(), "pop1".into(), "pop2".into(), a(100)).unwrap();
        infra.add_wan_link(&mut m, &"wim2".into(), "l1x".into(), "pop1".into(), "ix".into(), a(100)).unwrap();
        infra.add_wan_link(&mut m, &"wim3".into(), "lx3".into(), "ix".into(), "pop3".into(), a(100)).unwrap();
        (m, infra)
    }

    #[test]
    fn wim_path_direct_peer_and_no_peering() {
        let (_, mut infra) = wan_fixture();
        let p = infra.wim_path(&"wim2".into(), &"pop1".into(), &"pop2".into(), a(10)).unwrap();
        assert!(p.is_direct());
        assert_eq!(p.links().cloned().collect::<Vec<_>>(), vec![LinkId::new("l12")]);

        assert!(matches!(
            infra.wim_path(&"wim2".into(), &"pop1".into(), &"pop3".into(), a(10)),
            Err(ManoError::NoPeering { .. })
        ));

        infra.peer(&"wim2".into(), &"wim3".into(), "ba-23").unwrap();
        assert!(infra.wims[&ManagerId::new("wim3")].peers.contains_key(&ManagerId::new("wim2")));
        let p = infra.wim_path(&"wim2".into(), &"pop1".into(), &"pop3".into(), a(10)).unwrap();
        assert_eq!(p.segments.len(), 2);
        assert_eq!(p.segments[0].wim, ManagerId::new("wim2"));
        assert_eq!(p.segments[1].wim, ManagerId::new("wim3"));
        assert_eq!(p.links().cloned().collect::<Vec<_>>(), vec![LinkId::new("l1x"), LinkId::new("lx3")]);

        assert!(matches!(
            infra.wim_path(&"wim2".into(), &"pop1".into(), &"pop3".into(), a(101)),
            Err(ManoError::NoCapacity { .. })
        ));
    }

    #[test]
    fn ic_program_intra_and_cross_pop() {
        let (_, mut infra) = wan_fixture();
        infra.peer(&"wim2".into(), &"wim3".into(), "ba").unwrap();
        let h1 = infra.allocate_host(&"pop1".into(), &"v1".into()).unwrap();
        let h2 = infra.allocate_host(&"pop1".into(), &"v2".into()).unwrap();
        let h3 = infra.allocate_host(&"pop3".into(), &"v3".into()).unwrap();

        let rules = infra.ic_program(&[(h1.clone(), h2.clone())], a(10)).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].1.links, vec![LinkId::new("fabric-pop1")]);

        let expected_wan: Vec<LinkId> = infra.wim_path(&"wim2".into(), &"pop1".into(), &"pop3".into(), a(10)).unwrap().links().cloned().collect();
        let rules = infra.ic_program(&[(h2.clone(), h3.clone())], a(10)).unwrap();
        let wan: Vec<LinkId> = rules.iter().flat_map(|(_, r)| r.links.clone()).filter(|l| !l.as_str().starts_with("fabric")).collect();
        assert_eq!(wan, expected_wan);
        assert_eq!(rules.len(), 4);

        assert!(matches!(infra.ic_program(&[(h1.clone(), "vm-99".into())], a(1)), Err(ManoError::UnknownHost(_))));
        let before = infra.clone();
        assert!(matches!(infra.ic_program(&[(h1, h3)], a(95)), Err(ManoError::NoCapacity { .. })));
        assert_eq!(infra.ics().map(|ic| ic.rules().len()).sum::<usize>(), before.ics().map(|ic| ic.rules().len()).sum::<usize>());
    }

    #[test]
    fn usage_reports_reconcile() {
        let mut m = ResourceModel::new();
        let mut infra = Infrastructure::new();
        pop(&mut m, &mut infra, "pop1", 100);
        let vim = ManagerId::new("vim-pop1");
        assert!(infra.vims[&vim].usage_report().totals.is_empty());
        infra.register_tenant(&vim, &"t1".into()).unwrap();
        infra.vim_lease(&mut m, &vim, &"t1".into(), &[(ResourceKind::Compute, a(40))], &"pop1".into()).unwrap();
        let r = infra.vims[&vim].usage_report();
        assert_eq!(r.rows["t1"][&ResourceKind::Compute], a(40));
        assert_eq!(r.totals[&ResourceKind::Compute], a(40));
        assert!(r.reconciles());
    }
}
