//! Layered resource model.
//!
//! Physical resources sit at layer 0. Virtual resources are carved out of
//! them by partitioning (hard reservation of a share) or aggregation
//! (pooling whole members), and may themselves be partitioned again, which
//! is how recursion between InPs and tenants is expressed. A resource's
//! live claims (partition shares plus full capacities of aggregations that
//! pool it) never exceed its capacity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::ActorId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResourceKind {
    /// vCPU units.
    Compute,
    /// GB.
    Storage,
    /// Mb/s.
    Networking,
    /// Abstract resource-block units.
    RadioAccess,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 4] = [
        ResourceKind::Compute,
        ResourceKind::Storage,
        ResourceKind::Networking,
        ResourceKind::RadioAccess,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ResourceKind::Compute => "compute",
            ResourceKind::Storage => "storage",
            ResourceKind::Networking => "networking",
            ResourceKind::RadioAccess => "radio-access",
        }
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(pub u64);

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

impl fmt::Debug for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Provenance {
    Physical,
    Partition { parent: ResourceId, share: Amount },
    Aggregation { parents: Vec<ResourceId> },
}

/// A physical or virtual resource. Physical resources have `layer == 0`
/// and [`Provenance::Physical`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resource {
    pub id: ResourceId,
    pub kind: ResourceKind,
    pub capacity: Amount,
    pub attributes: BTreeMap<String, String>,
    pub owner: ActorId,
    pub layer: u32,
    pub provenance: Provenance,
    /// Attribute keys exposed to holders of this resource. `None` exposes
    /// everything (physical resources).
    pub view: Option<BTreeSet<String>>,
    pub live: bool,
}

impl Resource {
    pub fn parents(&self) -> Vec<ResourceId> {
        match &self.provenance {
            Provenance::Physical => Vec::new(),
            Provenance::Partition { parent, .. } => vec![*parent],
            Provenance::Aggregation { parents } => parents.clone(),
        }
    }

    pub fn is_physical(&self) -> bool {
        matches!(self.provenance, Provenance::Physical)
    }

    /// How much of `parent` this resource holds.
    fn claim_on(&self, parent: ResourceId, parent_capacity: Amount) -> Amount {
        match &self.provenance {
            Provenance::Partition { parent: p, share } if *p == parent => *share,
            Provenance::Aggregation { parents } if parents.contains(&parent) => parent_capacity,
            _ => Amount::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionKind {
    Physical,
    Virtualized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkFunction {
    pub id: String,
    pub kind: FunctionKind,
    pub capabilities: BTreeSet<String>,
    pub demand: BTreeMap<ResourceKind, Amount>,
}

impl NetworkFunction {
    pub fn new(
        id: impl Into<String>,
        kind: FunctionKind,
        capabilities: impl IntoIterator<Item = impl Into<String>>,
        demand: impl IntoIterator<Item = (ResourceKind, Amount)>,
    ) -> Result<Self, ResourceError> {
        let f = NetworkFunction {
            id: id.into(),
            kind,
            capabilities: capabilities.into_iter().map(Into::into).collect(),
            demand: demand.into_iter().collect(),
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), ResourceError> {
        if self.capabilities.is_empty() {
            return Err(ResourceError::NoCapability(self.id.clone()));
        }
        if let Some((kind, q)) = self.demand.iter().find(|(_, q)| q.is_negative()) {
            return Err(ResourceError::NegativeDemand { function: self.id.clone(), kind: *kind, quantity: *q });
        }
        Ok(())
    }
}

/// Member of a [`ResourceGroup`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "kebab-case")]
pub enum Handle {
    Resource(ResourceId),
    Function(String),
}

/// Selection criteria used to build an abstract view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractionCriteria {
    whitelist: BTreeSet<String>,
    granularity: Option<Amount>,
}

/// Pseudo-attribute keys that whitelist the resource kind and capacity.
pub const KIND_KEY: &str = "kind";
pub const CAPACITY_KEY: &str = "capacity";

impl AbstractionCriteria {
    pub fn new(
        whitelist: impl IntoIterator<Item = impl Into<String>>,
        granularity: Option<Amount>,
    ) -> Result<Self, ResourceError> {
        let whitelist: BTreeSet<String> = whitelist.into_iter().map(Into::into).collect();
        if whitelist.is_empty() {
            return Err(ResourceError::EmptyWhitelist);
        }
        if let Some(g) = granularity {
            if !g.is_positive() {
                return Err(ResourceError::InvalidGranularity(g));
            }
        }
        Ok(AbstractionCriteria { whitelist, granularity })
    }

    /// Exposes kind and capacity only.
    pub fn capacity_only() -> Self {
        AbstractionCriteria::new([KIND_KEY, CAPACITY_KEY], None).unwrap()
    }

    pub fn whitelist(&self) -> &BTreeSet<String> {
        &self.whitelist
    }

    pub fn granularity(&self) -> Option<Amount> {
        self.granularity
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractView {
    pub resource: ResourceId,
    pub kind: Option<ResourceKind>,
    pub capacity: Option<Amount>,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceGroup {
    pub id: String,
    members: BTreeSet<Handle>,
    pub criteria: AbstractionCriteria,
}

impl ResourceGroup {
    /// Builds a group, rejecting duplicates and members the model cannot
    /// resolve.
    pub fn new(
        id: impl Into<String>,
        members: impl IntoIterator<Item = Handle>,
        criteria: AbstractionCriteria,
        model: &ResourceModel,
    ) -> Result<Self, ResourceError> {
        let mut set = BTreeSet::new();
        for m in members {
            model.resolve(&m)?;
            if !set.insert(m.clone()) {
                return Err(ResourceError::DuplicateMember(m));
            }
        }
        Ok(ResourceGroup { id: id.into(), members: set, criteria })
    }

    pub fn members(&self) -> &BTreeSet<Handle> {
        &self.members
    }

    pub fn resources(&self) -> impl Iterator<Item = ResourceId> + '_ {
        self.members.iter().filter_map(|h| match h {
            Handle::Resource(r) => Some(*r),
            Handle::Function(_) => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &str> + '_ {
        self.members.iter().filter_map(|h| match h {
            Handle::Function(f) => Some(f.as_str()),
            Handle::Resource(_) => None,
        })
    }

    pub fn contains(&self, handle: &Handle) -> bool {
        self.members.contains(handle)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResourceError {
    #[error("unknown resource {0}")]
    UnknownResource(ResourceId),
    #[error("unknown network function `{0}`")]
    UnknownFunction(String),
    #[error("over-commit on {resource}: requested {requested}, free {free}")]
    OverCommit { resource: ResourceId, requested: Amount, free: Amount },
    #[error("aggregation members have different kinds ({0} vs {1})")]
    KindMismatch(ResourceKind, ResourceKind),
    #[error("empty input")]
    EmptyInput,
    #[error("partition share must be positive, got {0}")]
    NonPositiveShare(Amount),
    #[error("capacity must be non-negative, got {0}")]
    NegativeCapacity(Amount),
    #[error("abstraction whitelist is empty")]
    EmptyWhitelist,
    #[error("granularity must be positive, got {0}")]
    InvalidGranularity(Amount),
    #[error("conservation violated at {resource}: claimed {claimed} of capacity {capacity}")]
    ConservationViolation { resource: ResourceId, claimed: Amount, capacity: Amount },
    #[error("duplicate group member {0:?}")]
    DuplicateMember(Handle),
    #[error("network function `{0}` declares no capability")]
    NoCapability(String),
    #[error("network function `{function}` has negative {kind} demand {quantity}")]
    NegativeDemand { function: String, kind: ResourceKind, quantity: Amount },
    #[error("{0} is physical and cannot be released")]
    NotVirtual(ResourceId),
    #[error("duplicate network function `{0}`")]
    DuplicateFunction(String),
}

/// Arena of resources and network functions.
///
/// Released resources stay in the arena as tombstones (`live == false`) so
/// ids are never reused.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ResourceModel {
    resources: Vec<Resource>,
    functions: BTreeMap<String, NetworkFunction>,
    #[serde(skip)]
    children: Vec<Vec<ResourceId>>,
}

impl ResourceModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_physical(
        &mut self,
        kind: ResourceKind,
        capacity: Amount,
        owner: ActorId,
        attributes: impl IntoIterator<Item = (String, String)>,
    ) -> Result<ResourceId, ResourceError> {
        if capacity.is_negative() {
            return Err(ResourceError::NegativeCapacity(capacity));
        }
        Ok(self.push(Resource {
            id: ResourceId(0),
            kind,
            capacity,
            attributes: attributes.into_iter().collect(),
            owner,
            layer: 0,
            provenance: Provenance::Physical,
            view: None,
            live: true,
        }))
    }

    pub fn add_function(&mut self, function: NetworkFunction) -> Result<(), ResourceError> {
        function.validate()?;
        if self.functions.contains_key(&function.id) {
            return Err(ResourceError::DuplicateFunction(function.id));
        }
        self.functions.insert(function.id.clone(), function);
        Ok(())
    }

    fn push(&mut self, mut r: Resource) -> ResourceId {
        let id = ResourceId(self.resources.len() as u64);
        r.id = id;
        for p in r.parents() {
            self.children[p.0 as usize].push(id);
        }
        self.resources.push(r);
        self.children.push(Vec::new());
        id
    }

    /// Looks up a resource, live or released.
    pub fn get(&self, id: ResourceId) -> Result<&Resource, ResourceError> {
        self.resources.get(id.0 as usize).ok_or(ResourceError::UnknownResource(id))
    }

    /// Looks up a live resource.
    pub fn live(&self, id: ResourceId) -> Result<&Resource, ResourceError> {
        match self.resources.get(id.0 as usize) {
            Some(r) if r.live => Ok(r),
            _ => Err(ResourceError::UnknownResource(id)),
        }
    }

    pub fn function(&self, id: &str) -> Result<&NetworkFunction, ResourceError> {
        self.functions.get(id).ok_or_else(|| ResourceError::UnknownFunction(id.to_string()))
    }

    pub fn resolve(&self, handle: &Handle) -> Result<(), ResourceError> {
        match handle {
            Handle::Resource(r) => self.live(*r).map(|_| ()),
            Handle::Function(f) => self.function(f).map(|_| ()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Resource> {
        self.resources.iter()
    }

    pub fn iter_live(&self) -> impl Iterator<Item = &Resource> {
        self.resources.iter().filter(|r| r.live)
    }

    pub fn functions(&self) -> impl Iterator<Item = &NetworkFunction> {
        self.functions.values()
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    /// Live children (partitions and aggregations that draw on `id`).
    pub fn live_children(&self, id: ResourceId) -> impl Iterator<Item = &Resource> + '_ {
        self.children
            .get(id.0 as usize)
            .into_iter()
            .flatten()
            .map(|c| &self.resources[c.0 as usize])
            .filter(|c| c.live)
    }

    /// Sum of live claims on `id`.
    pub fn claimed(&self, id: ResourceId) -> Result<Amount, ResourceError> {
        let r = self.get(id)?;
        Ok(self.live_children(id).map(|c| c.claim_on(id, r.capacity)).sum())
    }

    pub fn free_capacity(&self, id: ResourceId) -> Result<Amount, ResourceError> {
        let r = self.live(id)?;
        Ok(r.capacity - self.claimed(id)?)
    }

    /// Hides every attribute outside the whitelist and floors the advertised
    /// capacity to the granularity, if any.
    pub fn abstract_view(
        &self,
        id: ResourceId,
        criteria: &AbstractionCriteria,
    ) -> Result<AbstractView, ResourceError> {
        let r = self.live(id)?;
        let wl = &criteria.whitelist;
        let visible = |k: &String| r.view.as_ref().is_none_or(|v| v.contains(k));
        let attributes = r
            .attributes
            .iter()
            .filter(|(k, _)| wl.contains(*k) && visible(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let capacity = wl.contains(CAPACITY_KEY).then(|| match criteria.granularity {
            Some(g) => r.capacity.floor_to(g),
            None => r.capacity,
        });
        Ok(AbstractView {
            resource: id,
            kind: wl.contains(KIND_KEY).then_some(r.kind),
            capacity,
            attributes,
        })
    }

    /// Carves `shares` out of `id`, children owned by the parent's owner.
    pub fn partition(&mut self, id: ResourceId, shares: &[Amount]) -> Result<Vec<ResourceId>, ResourceError> {
        let owner = self.live(id)?.owner.clone();
        self.partition_to(id, shares, &owner)
    }

    /// Carves `shares` out of `id` on behalf of `owner`. All-or-nothing.
    pub fn partition_to(
        &mut self,
        id: ResourceId,
        shares: &[Amount],
        owner: &ActorId,
    ) -> Result<Vec<ResourceId>, ResourceError> {
        let parent = self.live(id)?.clone();
        if let Some(bad) = shares.iter().find(|s| !s.is_positive()) {
            return Err(ResourceError::NonPositiveShare(*bad));
        }
        let requested: Amount = shares.iter().sum();
        let free = parent.capacity - self.claimed(id)?;
        if requested > free {
            return Err(ResourceError::OverCommit { resource: id, requested, free });
        }
        let view = Some(parent.view.clone().unwrap_or_else(|| parent.attributes.keys().cloned().collect()));
        Ok(shares
            .iter()
            .map(|share| {
                self.push(Resource {
                    id: ResourceId(0),
                    kind: parent.kind,
                    capacity: *share,
                    attributes: parent.attributes.clone(),
                    owner: owner.clone(),
                    layer: parent.layer + 1,
                    provenance: Provenance::Partition { parent: id, share: *share },
                    view: view.clone(),
                    live: true,
                })
            })
            .collect())
    }

    /// Pools whole members into one virtual resource. Each member must be
    /// unclaimed, since the aggregation claims its full capacity.
    pub fn aggregate(&mut self, ids: &[ResourceId], owner: &ActorId) -> Result<ResourceId, ResourceError> {
        let first = ids.first().ok_or(ResourceError::EmptyInput)?;
        let kind = self.live(*first)?.kind;
        let mut seen = BTreeSet::new();
        let mut capacity = Amount::ZERO;
        let mut layer = 0;
        for id in ids {
            let r = self.live(*id)?;
            if r.kind != kind {
                return Err(ResourceError::KindMismatch(kind, r.kind));
            }
            if !seen.insert(*id) {
                return Err(ResourceError::DuplicateMember(Handle::Resource(*id)));
            }
            let claimed = self.claimed(*id)?;
            if !claimed.is_zero() {
                return Err(ResourceError::OverCommit {
                    resource: *id,
                    requested: r.capacity,
                    free: r.capacity - claimed,
                });
            }
            capacity += r.capacity;
            layer = layer.max(r.layer);
        }
        // Keep only attributes every member agrees on.
        let mut attributes = self.live(*first)?.attributes.clone();
        for id in &ids[1..] {
            let other = &self.resources[id.0 as usize].attributes;
            attributes.retain(|k, v| other.get(k) == Some(v));
        }
        let view = Some(attributes.keys().cloned().collect());
        Ok(self.push(Resource {
            id: ResourceId(0),
            kind,
            capacity,
            attributes,
            owner: owner.clone(),
            layer: layer + 1,
            provenance: Provenance::Aggregation { parents: ids.to_vec() },
            view,
            live: true,
        }))
    }

    /// Releases a virtual resource and, recursively, everything carved out
    /// of it. Returns the released ids in release order.
    pub fn release(&mut self, id: ResourceId) -> Result<Vec<ResourceId>, ResourceError> {
        let r = self.live(id)?;
        if r.is_physical() {
            return Err(ResourceError::NotVirtual(id));
        }
        let mut released = Vec::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            if !self.resources[cur.0 as usize].live {
                continue;
            }
            self.resources[cur.0 as usize].live = false;
            released.push(cur);
            stack.extend(self.children[cur.0 as usize].iter().rev().copied());
        }
        Ok(released)
    }

    /// Returns the resource's capacity after auditing every level of its
    /// provenance chain down to the physical roots.
    pub fn effective_capacity(&self, id: ResourceId) -> Result<Amount, ResourceError> {
        let r = self.live(id)?;
        let mut stack = vec![id];
        let mut visited = BTreeSet::new();
        while let Some(cur) = stack.pop() {
            if !visited.insert(cur) {
                continue;
            }
            self.audit_one(cur)?;
            stack.extend(self.get(cur)?.parents());
        }
        Ok(r.capacity)
    }

    fn audit_one(&self, id: ResourceId) -> Result<(), ResourceError> {
        let r = self.get(id)?;
        let claimed = self.claimed(id)?;
        if claimed > r.capacity || r.capacity.is_negative() {
            return Err(ResourceError::ConservationViolation { resource: id, claimed, capacity: r.capacity });
        }
        match &r.provenance {
            Provenance::Physical if r.layer != 0 => {
                Err(ResourceError::ConservationViolation { resource: id, claimed, capacity: r.capacity })
            }
            Provenance::Partition { parent, share } => {
                let p = self.get(*parent)?;
                if *share != r.capacity || r.layer != p.layer + 1 {
                    return Err(ResourceError::ConservationViolation {
                        resource: *parent,
                        claimed: self.claimed(*parent)?,
                        capacity: p.capacity,
                    });
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Audits every live resource.
    pub fn audit(&self) -> Result<(), ResourceError> {
        for r in self.iter_live() {
            self.audit_one(r.id)?;
        }
        Ok(())
    }

    /// Sum of advertised capacities of the group's live resources of `kind`.
    pub fn exposed_capacity(&self, group: &ResourceGroup, kind: ResourceKind) -> Amount {
        group
            .resources()
            .filter_map(|id| self.abstract_view(id, &group.criteria).ok())
            .filter(|v| v.kind.is_none_or(|k| k == kind) && self.resources[v.resource.0 as usize].kind == kind)
            .filter_map(|v| v.capacity)
            .sum()
    }

    /// Inserts a partition child without any admission check. Only for
    /// exercising the conservation audit.
    #[doc(hidden)]
    pub fn forge_partition(&mut self, parent: ResourceId, share: Amount) -> ResourceId {
        let p = self.resources[parent.0 as usize].clone();
        self.push(Resource {
            id: ResourceId(0),
            kind: p.kind,
            capacity: share,
            attributes: p.attributes,
            owner: p.owner,
            layer: p.layer + 1,
            provenance: Provenance::Partition { parent, share },
            view: None,
            live: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn amt(v: i64) -> Amount {
        Amount::from_int(v)
    }

    fn model_with(kind: ResourceKind, cap: i64) -> (ResourceModel, ResourceId) {
        let mut m = ResourceModel::new();
        let attrs = [("vendor".to_string(), "acme".to_string()), ("location".to_string(), "pop1".to_string())];
        let id = m.add_physical(kind, amt(cap), ActorId::new("inp1"), attrs).unwrap();
        (m, id)
    }

    #[test]
    fn abstract_hides_attributes() {
        let (m, id) = model_with(ResourceKind::Compute, 16);
        let v = m.abstract_view(id, &AbstractionCriteria::capacity_only()).unwrap();
        assert_eq!(v.kind, Some(ResourceKind::Compute));
        assert_eq!(v.capacity, Some(amt(16)));
        assert!(v.attributes.is_empty());
    }

    #[test]
    fn abstract_identity_when_everything_whitelisted() {
        let (m, id) = model_with(ResourceKind::Compute, 16);
        let crit = AbstractionCriteria::new(["vendor", "location", "kind", "capacity"], None).unwrap();
        let v = m.abstract_view(id, &crit).unwrap();
        assert_eq!(v.attributes, m.get(id).unwrap().attributes);
    }

    #[test]
    fn abstract_floors_to_granularity() {
        let (m, id) = model_with(ResourceKind::Compute, 14);
        let crit = AbstractionCriteria::new(["capacity"], Some(amt(4))).unwrap();
        // floor(14 / 4) * 4
        assert_eq!(m.abstract_view(id, &crit).unwrap().capacity, Some(amt(12)));
    }

    #[test]
    fn abstract_rejects_bad_criteria_and_unknown() {
        assert_eq!(AbstractionCriteria::new(Vec::<String>::new(), None), Err(ResourceError::EmptyWhitelist));
        assert!(AbstractionCriteria::new(["kind"], Some(Amount::ZERO)).is_err());
        let (m, _) = model_with(ResourceKind::Compute, 14);
        assert_eq!(
            m.abstract_view(ResourceId(9), &AbstractionCriteria::capacity_only()),
            Err(ResourceError::UnknownResource(ResourceId(9)))
        );
    }

    #[test]
    fn partition_examples() {
        let (mut m, id) = model_with(ResourceKind::Networking, 100);
        let kids = m.partition(id, &[amt(60), amt(40)]).unwrap();
        assert_eq!(m.get(kids[0]).unwrap().capacity, amt(60));
        assert_eq!(m.get(kids[1]).unwrap().capacity, amt(40));
        assert_eq!(m.get(kids[1]).unwrap().layer, 1);
        assert_eq!(m.free_capacity(id).unwrap(), Amount::ZERO);

        let (mut m, id) = model_with(ResourceKind::Networking, 100);
        let kids = m.partition(id, &[amt(100)]).unwrap();
        assert_eq!(m.get(kids[0]).unwrap().capacity, amt(100));

        let (mut m, id) = model_with(ResourceKind::Networking, 100);
        assert!(matches!(m.partition(id, &[amt(60), amt(50)]), Err(ResourceError::OverCommit { .. })));
        assert_eq!(m.len(), 1, "failed partition must not create children");
        assert!(matches!(m.partition(id, &[amt(0)]), Err(ResourceError::NonPositiveShare(_))));
        assert!(matches!(m.partition(ResourceId(7), &[amt(1)]), Err(ResourceError::UnknownResource(_))));
    }

    #[test]
    fn partition_counts_existing_shares() {
        let (mut m, id) = model_with(ResourceKind::Networking, 100);
        m.partition(id, &[amt(70)]).unwrap();
        assert!(m.partition(id, &[amt(31)]).is_err());
        assert!(m.partition(id, &[amt(30)]).is_ok());
    }

    #[test]
    fn aggregate_examples() {
        let mut m = ResourceModel::new();
        let o = ActorId::new("inp");
        let a = m.add_physical(ResourceKind::Networking, amt(10), o.clone(), []).unwrap();
        let b = m.add_physical(ResourceKind::Networking, amt(20), o.clone(), []).unwrap();
        let agg = m.aggregate(&[a, b], &o).unwrap();
        assert_eq!(m.get(agg).unwrap().capacity, amt(30));
        assert_eq!(m.get(agg).unwrap().layer, 1);

        let c = m.add_physical(ResourceKind::Networking, amt(7), o.clone(), []).unwrap();
        let single = m.aggregate(&[c], &o).unwrap();
        assert_eq!(m.get(single).unwrap().capacity, amt(7));

        let cpu = m.add_physical(ResourceKind::Compute, amt(4), o.clone(), []).unwrap();
        let disk = m.add_physical(ResourceKind::Storage, amt(4), o.clone(), []).unwrap();
        assert!(matches!(m.aggregate(&[cpu, disk], &o), Err(ResourceError::KindMismatch(..))));
        assert_eq!(m.aggregate(&[], &o), Err(ResourceError::EmptyInput));
        // already pooled members are fully claimed
        assert!(matches!(m.aggregate(&[a], &o), Err(ResourceError::OverCommit { .. })));
    }

    #[test]
    fn aggregate_keeps_common_attributes() {
        let mut m = ResourceModel::new();
        let o = ActorId::new("inp");
        let a = m
            .add_physical(ResourceKind::Compute, amt(1), o.clone(), [("site".into(), "x".into()), ("v".into(), "1".into())])
            .unwrap();
        let b = m
            .add_physical(ResourceKind::Compute, amt(1), o.clone(), [("site".into(), "x".into()), ("v".into(), "2".into())])
            .unwrap();
        let agg = m.aggregate(&[a, b], &o).unwrap();
        let attrs = &m.get(agg).unwrap().attributes;
        assert_eq!(attrs.len(), 1);
        assert_eq!(attrs["site"], "x");
    }

    #[test]
    fn effective_capacity_examples() {
        let (mut m, root) = model_with(ResourceKind::Networking, 100);
        assert_eq!(m.effective_capacity(root).unwrap(), amt(100));
        let l1 = m.partition(root, &[amt(60)]).unwrap()[0];
        let l2 = m.partition(l1, &[amt(25)]).unwrap()[0];
        assert_eq!(m.effective_capacity(l2).unwrap(), amt(25));

        let forged = m.forge_partition(l1, amt(70));
        assert!(matches!(
            m.effective_capacity(forged),
            Err(ResourceError::ConservationViolation { resource, .. }) if resource == l1
        ));
    }

    #[test]
    fn release_cascades_and_restores() {
        let (mut m, root) = model_with(ResourceKind::Compute, 100);
        let kids = m.partition(root, &[amt(60), amt(40)]).unwrap();
        let grand = m.partition(kids[0], &[amt(10)]).unwrap();
        let released = m.release(kids[0]).unwrap();
        assert_eq!(released, vec![kids[0], grand[0]]);
        assert_eq!(m.free_capacity(root).unwrap(), amt(60));
        assert_eq!(m.release(root), Err(ResourceError::NotVirtual(root)));
        assert_eq!(m.release(kids[0]), Err(ResourceError::UnknownResource(kids[0])));
    }

    #[test]
    fn group_rejects_duplicates_and_unknown() {
        let (m, id) = model_with(ResourceKind::Compute, 1);
        let crit = AbstractionCriteria::capacity_only();
        assert!(ResourceGroup::new("g", [Handle::Resource(id)], crit.clone(), &m).is_ok());
        assert!(matches!(
            ResourceGroup::new("g", [Handle::Resource(id), Handle::Resource(id)], crit.clone(), &m),
            Err(ResourceError::DuplicateMember(_))
        ));
        assert!(ResourceGroup::new("g", [Handle::Function("nope".into())], crit, &m).is_err());
    }

    #[test]
    fn network_function_invariants() {
        assert!(NetworkFunction::new("f", FunctionKind::Virtualized, Vec::<String>::new(), []).is_err());
        assert!(NetworkFunction::new("f", FunctionKind::Virtualized, ["fw"], [(ResourceKind::Compute, amt(-1))]).is_err());
        assert!(NetworkFunction::new("f", FunctionKind::Physical, ["fw"], [(ResourceKind::Compute, amt(2))]).is_ok());
    }
}
