use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alloc::{water_fill, AllocationPolicy, ShareRequest};
use crate::amount::Amount;
use crate::ids::{ActorId, SiteId, SliceId};
use crate::resource::{ResourceId, ResourceKind, ResourceModel};

use super::infra::{Lease, UsageReport};
use super::ManoError;

/// A slice's claim on one networking pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolShare {
    pub floor: Amount,
    /// Partitions of the tenant's leases held for the slice. Empty under
    /// the shared policy, where only the floor is admitted.
    pub reserved: Vec<(ResourceId, Amount)>,
}

impl PoolShare {
    pub fn reserved_total(&self) -> Amount {
        self.reserved.iter().map(|(_, q)| *q).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceGrant {
    pub weight: Amount,
    pub pools: BTreeMap<String, PoolShare>,
    /// Hosting partitions keyed by the instance (or TC) they serve.
    pub hosting: BTreeMap<String, Vec<(ResourceId, Amount)>>,
}

/// Per-tenant resource orchestrator: splits the tenant's leases among its
/// slices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceOrchestrator {
    pub tenant: ActorId,
    pub policy: AllocationPolicy,
    leases: Vec<Lease>,
    grants: BTreeMap<SliceId, SliceGrant>,
}

impl ResourceOrchestrator {
    pub fn new(tenant: &ActorId, policy: AllocationPolicy) -> Self {
        ResourceOrchestrator { tenant: tenant.clone(), policy, leases: Vec::new(), grants: BTreeMap::new() }
    }

    pub fn add_lease(&mut self, lease: Lease) {
        self.leases.push(lease);
    }

    pub fn leases(&self) -> &[Lease] {
        &self.leases
    }

    pub fn grants(&self) -> &BTreeMap<SliceId, SliceGrant> {
        &self.grants
    }

    pub fn grant(&self, slice: &SliceId) -> Option<&SliceGrant> {
        self.grants.get(slice)
    }

    fn leases_at<'a>(&'a self, location: &'a str, kind: ResourceKind) -> impl Iterator<Item = &'a Lease> + 'a {
        self.leases.iter().filter(move |l| l.location == location && l.kind == kind)
    }

    pub fn leased(&self, location: &str, kind: ResourceKind) -> Amount {
        self.leases_at(location, kind).map(|l| l.quantity).sum()
    }

    /// Unpartitioned lease capacity at `location`.
    pub fn available(&self, model: &ResourceModel, location: &str, kind: ResourceKind) -> Amount {
        self.leases_at(location, kind).map(|l| model.free_capacity(l.resource).unwrap_or(Amount::ZERO)).sum()
    }

    /// Floors already admitted at a shared pool.
    pub(crate) fn admitted_floors(&self, location: &str) -> Amount {
        self.grants.values().filter_map(|g| g.pools.get(location)).map(|p| p.floor).sum()
    }

    /// Carves `quantity` out of the leases at `location`, first lease first.
    fn carve(&self, model: &mut ResourceModel, location: &str, kind: ResourceKind, quantity: Amount) -> Result<Vec<(ResourceId, Amount)>, ManoError> {
        let owner = self.tenant.clone();
        self.sublet(model, location, kind, quantity, &owner)
    }

    /// Like `carve`, with the pieces owned by `owner`. Used when the tenant
    /// acts as a provider for a sub-tenant.
    pub(crate) fn sublet(
        &self,
        model: &mut ResourceModel,
        location: &str,
        kind: ResourceKind,
        quantity: Amount,
        owner: &ActorId,
    ) -> Result<Vec<(ResourceId, Amount)>, ManoError> {
        let available = self.available(model, location, kind);
        if quantity > available {
            return Err(ManoError::InsufficientLease { location: location.to_string(), kind, requested: quantity, available });
        }
        let mut left = quantity;
        let mut parts = Vec::new();
        for l in self.leases_at(location, kind) {
            if !left.is_positive() {
                break;
            }
            let take = left.min(model.free_capacity(l.resource)?);
            if take.is_positive() {
                let child = model.partition_to(l.resource, &[take], owner)?[0];
                parts.push((child, take));
                left -= take;
            }
        }
        Ok(parts)
    }

    /// Whether `reserve` would succeed for these pools.
    pub fn check_pools(&self, model: &ResourceModel, pools: &[(String, Amount, Amount)]) -> Result<(), ManoError> {
        for (location, floor, bandwidth) in pools {
            match self.policy {
                AllocationPolicy::Dedicated => {
                    let available = self.available(model, location, ResourceKind::Networking);
                    if *bandwidth > available {
                        return Err(ManoError::InsufficientLease {
                            location: location.clone(),
                            kind: ResourceKind::Networking,
                            requested: *bandwidth,
                            available,
                        });
                    }
                }
                AllocationPolicy::SharedWithFloors => {
                    let available = self.available(model, location, ResourceKind::Networking) - self.admitted_floors(location);
                    if self.leased(location, ResourceKind::Networking).is_zero() || *floor > available {
                        return Err(ManoError::InsufficientLease {
                            location: location.clone(),
                            kind: ResourceKind::Networking,
                            requested: *floor,
                            available: available.max(Amount::ZERO),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Reserves networking for a new slice on each `(location, floor,
    /// bandwidth)` pool. Dedicated reserves `bandwidth`; shared admits
    /// `floor`. All pools or none.
    pub fn reserve(
        &mut self,
        model: &mut ResourceModel,
        slice: &SliceId,
        weight: Amount,
        pools: &[(String, Amount, Amount)],
    ) -> Result<(), ManoError> {
        if self.grants.contains_key(slice) {
            return Err(ManoError::Duplicate(slice.to_string()));
        }
        self.check_pools(model, pools)?;
        let mut grant = SliceGrant { weight, pools: BTreeMap::new(), hosting: BTreeMap::new() };
        for (location, floor, bandwidth) in pools {
            let reserved = match self.policy {
                AllocationPolicy::Dedicated => self.carve(model, location, ResourceKind::Networking, *bandwidth)?,
                AllocationPolicy::SharedWithFloors => Vec::new(),
            };
            grant.pools.insert(location.clone(), PoolShare { floor: *floor, reserved });
        }
        self.grants.insert(slice.clone(), grant);
        Ok(())
    }

    /// Checks hosting demands `(site, kind, quantity)` against the leases.
    pub fn check_hosting(&self, model: &ResourceModel, demands: &[(SiteId, ResourceKind, Amount)]) -> Result<(), ManoError> {
        let mut per_site: BTreeMap<(&SiteId, ResourceKind), Amount> = BTreeMap::new();
        for (site, kind, q) in demands {
            *per_site.entry((site, *kind)).or_insert(Amount::ZERO) += *q;
        }
        for ((site, kind), q) in per_site {
            let available = self.available(model, site.as_str(), kind);
            if q > available {
                return Err(ManoError::InsufficientLease { location: site.to_string(), kind, requested: q, available });
            }
        }
        Ok(())
    }

    /// Reserves hosting resources for one instance (or the TC) of `slice`.
    /// Needs a grant.
    pub fn reserve_hosting(
        &mut self,
        model: &mut ResourceModel,
        slice: &SliceId,
        key: &str,
        demands: &[(SiteId, ResourceKind, Amount)],
    ) -> Result<(), ManoError> {
        if !self.grants.contains_key(slice) {
            return Err(ManoError::NoGrant(slice.clone()));
        }
        self.check_hosting(model, demands)?;
        let mut parts = Vec::new();
        for (site, kind, q) in demands {
            if q.is_positive() {
                parts.extend(self.carve(model, site.as_str(), *kind, *q)?);
            }
        }
        self.grants.get_mut(slice).unwrap().hosting.entry(key.to_string()).or_default().extend(parts);
        Ok(())
    }

    pub fn release_hosting(&mut self, model: &mut ResourceModel, slice: &SliceId, key: &str) {
        if let Some(parts) = self.grants.get_mut(slice).and_then(|g| g.hosting.remove(key)) {
            for (r, _) in parts {
                let _ = model.release(r);
            }
        }
    }

    /// Releases every reservation of `slice`.
    pub fn release(&mut self, model: &mut ResourceModel, slice: &SliceId) {
        if let Some(g) = self.grants.remove(slice) {
            let parts = g.pools.into_values().flat_map(|p| p.reserved).chain(g.hosting.into_values().flatten());
            for (r, _) in parts {
                let _ = model.release(r);
            }
        }
    }

    /// Networking capacity of a shared pool: unpartitioned lease capacity.
    pub fn pool_capacity(&self, model: &ResourceModel, location: &str) -> Amount {
        self.available(model, location, ResourceKind::Networking)
    }

    /// Per-slice, per-pool networking allocation for the given offered loads.
    pub fn ro_allocate(&self, model: &ResourceModel, offered: &BTreeMap<SliceId, Amount>) -> BTreeMap<SliceId, BTreeMap<String, Amount>> {
        let mut out: BTreeMap<SliceId, BTreeMap<String, Amount>> = BTreeMap::new();
        match self.policy {
            AllocationPolicy::Dedicated => {
                for (slice, g) in &self.grants {
                    let row = out.entry(slice.clone()).or_default();
                    for (loc, p) in &g.pools {
                        row.insert(loc.clone(), p.reserved_total());
                    }
                }
            }
            AllocationPolicy::SharedWithFloors => {
                let mut locations: BTreeMap<&str, Vec<(&SliceId, ShareRequest)>> = BTreeMap::new();
                for (slice, g) in &self.grants {
                    out.entry(slice.clone()).or_default();
                    for (loc, p) in &g.pools {
                        let demand = offered.get(slice).copied().unwrap_or(Amount::ZERO);
                        locations.entry(loc.as_str()).or_default().push((slice, ShareRequest::new(demand, p.floor, g.weight)));
                    }
                }
                for (loc, entries) in locations {
                    let reqs: Vec<ShareRequest> = entries.iter().map(|(_, r)| *r).collect();
                    let shares = water_fill(self.pool_capacity(model, loc), &reqs).expect("floors admitted against pool capacity");
                    for ((slice, _), share) in entries.iter().zip(shares) {
                        out.get_mut(*slice).unwrap().insert(loc.to_string(), share);
                    }
                }
            }
        }
        out
    }

    /// Per-slice holdings. Shared pools report the admitted floor.
    pub fn usage_report(&self, model: &ResourceModel) -> UsageReport {
        let mut r = UsageReport::default();
        for (slice, g) in &self.grants {
            let row = r.rows.entry(slice.to_string()).or_default();
            for p in g.pools.values() {
                let q = match self.policy {
                    AllocationPolicy::Dedicated => p.reserved_total(),
                    AllocationPolicy::SharedWithFloors => p.floor,
                };
                *row.entry(ResourceKind::Networking).or_insert(Amount::ZERO) += q;
                *r.totals.entry(ResourceKind::Networking).or_insert(Amount::ZERO) += q;
            }
            for (res, q) in g.hosting.values().flatten() {
                let kind = model.get(*res).map(|x| x.kind).unwrap_or(ResourceKind::Compute);
                *row.entry(kind).or_insert(Amount::ZERO) += *q;
                *r.totals.entry(kind).or_insert(Amount::ZERO) += *q;
            }
        }
        r
    }

    /// Per location and kind, what slices hold never exceeds what is leased.
    pub fn within_leases(&self, model: &ResourceModel) -> bool {
        let mut held: BTreeMap<(String, ResourceKind), Amount> = BTreeMap::new();
        for g in self.grants.values() {
            for (loc, p) in &g.pools {
                let q = p.reserved_total().max(p.floor);
                *held.entry((loc.clone(), ResourceKind::Networking)).or_insert(Amount::ZERO) += q;
            }
            for (r, q) in g.hosting.values().flatten() {
                let parent = model.get(*r).ok().and_then(|res| res.parents().first().copied());
                let Some(lease) = self.leases.iter().find(|l| Some(l.resource) == parent) else { return false };
                *held.entry((lease.location.clone(), lease.kind)).or_insert(Amount::ZERO) += *q;
            }
        }
        held.iter().all(|((loc, kind), q)| *q <= self.leased(loc, *kind))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::ManagerId;

    fn a(v: i64) -> Amount {
        Amount::from_int(v)
    }

    fn fixture(policy: AllocationPolicy, lease: i64) -> (ResourceModel, ResourceOrchestrator) {
        let mut m = ResourceModel::new();
        let phys = m.add_physical(ResourceKind::Networking, a(1000), "inp".into(), []).unwrap();
        let tenant = ActorId::new("t");
        let part = m.partition_to(phys, &[a(lease)], &tenant).unwrap()[0];
        let mut ro = ResourceOrchestrator::new(&tenant, policy);
        ro.add_lease(Lease {
            id: "lease-0".into(),
            tenant,
            manager: ManagerId::new("vim"),
            location: "pop1".into(),
            kind: ResourceKind::Networking,
            quantity: a(lease),
            resource: part,
        });
        (m, ro)
    }

    fn pool(floor: i64, bw: i64) -> Vec<(String, Amount, Amount)> {
        vec![("pop1".to_string(), a(floor), a(bw))]
    }

    #[test]
    fn dedicated_single_slice_gets_its_reservation() {
        let (mut m, mut ro) = fixture(AllocationPolicy::Dedicated, 100);
        ro.reserve(&mut m, &"s1".into(), a(1), &pool(20, 50)).unwrap();
        let alloc = ro.ro_allocate(&m, &BTreeMap::from([("s1".into(), a(500))]));
        assert_eq!(alloc[&SliceId::new("s1")]["pop1"], a(50));
        assert!(ro.within_leases(&m));
        assert!(matches!(ro.reserve(&mut m, &"s2".into(), a(1), &pool(20, 60)), Err(ManoError::InsufficientLease { .. })));
    }

    #[test]
    fn shared_floors_then_water_fill() {
        let (mut m, mut ro) = fixture(AllocationPolicy::SharedWithFloors, 100);
        ro.reserve(&mut m, &"s1".into(), a(1), &pool(20, 50)).unwrap();
        ro.reserve(&mut m, &"s2".into(), a(1), &pool(20, 50)).unwrap();
        let offered = BTreeMap::from([("s1".into(), a(90)), ("s2".into(), a(30))]);
        let alloc = ro.ro_allocate(&m, &offered);
        assert_eq!(alloc[&SliceId::new("s1")]["pop1"], a(70));
        assert_eq!(alloc[&SliceId::new("s2")]["pop1"], a(30));
    }

    #[test]
    fn shared_admission_respects_floors() {
        let (mut m, mut ro) = fixture(AllocationPolicy::SharedWithFloors, 50);
        ro.reserve(&mut m, &"s1".into(), a(1), &pool(30, 50)).unwrap();
        assert!(ro.reserve(&mut m, &"s2".into(), a(1), &pool(30, 50)).is_err());
        assert!(ro.reserve(&mut m, &"s2".into(), a(1), &pool(20, 50)).is_ok());
    }

    #[test]
    fn hosting_needs_grant_and_release_restores() {
        let (mut m, mut ro) = fixture(AllocationPolicy::Dedicated, 100);
        let phys = m.add_physical(ResourceKind::Compute, a(10), "inp".into(), []).unwrap();
        let part = m.partition_to(phys, &[a(4)], &"t".into()).unwrap()[0];
        ro.add_lease(Lease {
            id: "lease-1".into(),
            tenant: "t".into(),
            manager: ManagerId::new("vim"),
            location: "pop1".into(),
            kind: ResourceKind::Compute,
            quantity: a(4),
            resource: part,
        });
        let demand = [(SiteId::new("pop1"), ResourceKind::Compute, a(3))];
        assert_eq!(ro.reserve_hosting(&mut m, &"s".into(), "i0", &demand), Err(ManoError::NoGrant("s".into())));
        ro.reserve(&mut m, &"s".into(), a(1), &pool(0, 10)).unwrap();
        let before = ro.clone();
        ro.reserve_hosting(&mut m, &"s".into(), "i0", &demand).unwrap();
        assert_eq!(ro.available(&m, "pop1", ResourceKind::Compute), a(1));
        assert_eq!(ro.usage_report(&m).rows["s"][&ResourceKind::Compute], a(3));
        ro.release_hosting(&mut m, &"s".into(), "i0");
        assert_eq!(ro, before);
        assert_eq!(ro.available(&m, "pop1", ResourceKind::Compute), a(4));
    }
}
