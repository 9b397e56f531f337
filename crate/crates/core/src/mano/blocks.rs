//! Per-slice blocks: NSO, tenant SDN controller (TC) and OSS.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::{ActorId, DescriptorId, SiteId, SliceId, VnfId};
use crate::isolation::ObjectClass;

use super::catalog::{NetworkServiceDescriptor, Sla, VSWITCH};
use super::deployment::SliceKpi;
use super::slice::FaultKind;
use super::vnfm::{VnfState, Vnfm};
use super::ManoError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub descriptor: DescriptorId,
    pub vnfs: Vec<VnfId>,
}

/// Network service orchestrator of one slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nso {
    pub id: String,
    pub slice: SliceId,
    catalog: BTreeMap<DescriptorId, NetworkServiceDescriptor>,
    instances: BTreeMap<String, InstanceRecord>,
    #[serde(skip)]
    next: u64,
}

impl Nso {
    pub fn new(id: impl Into<String>, slice: &SliceId, catalog: impl IntoIterator<Item = NetworkServiceDescriptor>) -> Self {
        Nso {
            id: id.into(),
            slice: slice.clone(),
            catalog: catalog.into_iter().map(|d| (d.id.clone(), d)).collect(),
            instances: BTreeMap::new(),
            next: 0,
        }
    }

    pub fn descriptor(&self, id: &DescriptorId) -> Result<&NetworkServiceDescriptor, ManoError> {
        self.catalog.get(id).ok_or_else(|| ManoError::UnknownDescriptor(id.to_string()))
    }

    pub fn instances(&self) -> &BTreeMap<String, InstanceRecord> {
        &self.instances
    }

    /// Reserves an instance id for `descriptor`.
    pub(crate) fn open(&mut self, descriptor: &DescriptorId) -> Result<String, ManoError> {
        self.descriptor(descriptor)?;
        let id = format!("{}/i{}", self.id, self.next);
        self.next += 1;
        self.instances.insert(id.clone(), InstanceRecord { descriptor: descriptor.clone(), vnfs: Vec::new() });
        Ok(id)
    }

    pub(crate) fn attach(&mut self, instance: &str, vnf: VnfId) {
        if let Some(r) = self.instances.get_mut(instance) {
            r.vnfs.push(vnf);
        }
    }

    pub(crate) fn close(&mut self, instance: &str) -> Result<InstanceRecord, ManoError> {
        self.instances.remove(instance).ok_or_else(|| ManoError::UnknownDescriptor(instance.to_string()))
    }
}

/// One forwarding-graph edge installed on a virtual switch VNF.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayRule {
    pub from: VnfId,
    pub to: VnfId,
    pub switch: VnfId,
    pub bandwidth: Amount,
}

/// Tenant SDN controller of one slice. Sees the network only as VNFs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TenantController {
    pub id: String,
    pub slice: SliceId,
    pub rules: Vec<OverlayRule>,
    pub faulted: bool,
}

impl TenantController {
    pub fn new(id: impl Into<String>, slice: &SliceId) -> Self {
        TenantController { id: id.into(), slice: slice.clone(), rules: Vec::new(), faulted: false }
    }

    /// Builds one overlay rule per graph edge. `vnfs[i]` realizes
    /// `descriptor.functions[i]`. Nothing is installed unless every VNF of
    /// the graph is Running.
    pub fn tc_compose(&mut self, descriptor: &NetworkServiceDescriptor, vnfs: &[VnfId], vnfm: &Vnfm) -> Result<Vec<OverlayRule>, ManoError> {
        for (i, v) in vnfs.iter().enumerate().take(descriptor.functions.len()) {
            let running = vnfm.get(v).is_some_and(|x| x.state == VnfState::Running);
            let in_graph = descriptor.edges.iter().any(|e| e.from == i || e.to == i);
            if in_graph && !running {
                return Err(ManoError::VnfNotRunning(v.clone()));
            }
        }
        let is_switch = |i: usize| descriptor.functions[i].capabilities.contains(VSWITCH);
        let rules: Vec<OverlayRule> = descriptor
            .edges
            .iter()
            .map(|e| {
                let at = if is_switch(e.from) || !is_switch(e.to) { e.from } else { e.to };
                OverlayRule { from: vnfs[e.from].clone(), to: vnfs[e.to].clone(), switch: vnfs[at].clone(), bandwidth: e.bandwidth }
            })
            .collect();
        self.rules.extend(rules.iter().cloned());
        Ok(rules)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryField {
    Kpis,
    Faults,
    Placement,
    UserPolicies,
}

impl QueryField {
    pub const ALL: [QueryField; 4] = [QueryField::Kpis, QueryField::Faults, QueryField::Placement, QueryField::UserPolicies];

    pub fn class(self) -> ObjectClass {
        match self {
            QueryField::Kpis => ObjectClass::Kpis,
            QueryField::Faults => ObjectClass::Faults,
            QueryField::Placement => ObjectClass::Placement,
            QueryField::UserPolicies => ObjectClass::UserPolicies,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultNotice {
    pub kind: FaultKind,
    pub component: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "field", content = "value", rename_all = "kebab-case")]
pub enum ContextInfo {
    Kpis(Option<SliceKpi>),
    Faults(Vec<FaultNotice>),
    Placement(BTreeMap<VnfId, SiteId>),
    UserPolicies(Sla),
}

/// Operations support system of one slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Oss {
    pub id: String,
    pub slice: SliceId,
    pub tenant: ActorId,
    pub whitelist: BTreeSet<QueryField>,
    pub inbox: Vec<FaultNotice>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mano::catalog::GraphEdge;
    use crate::mano::vnfm::{EmCounters, VnfInstance, VnfTransition};
    use crate::resource::{FunctionKind, NetworkFunction, ResourceKind};

    fn chain() -> NetworkServiceDescriptor {
        let f = |name: &str, caps: &[&str]| {
            NetworkFunction::new(name, FunctionKind::Virtualized, caps.iter().copied(), [(ResourceKind::Compute, Amount::ONE)]).unwrap()
        };
        let e = |from, to| GraphEdge { from, to, bandwidth: Amount::from_int(10) };
        NetworkServiceDescriptor {
            id: "chain".into(),
            functions: vec![f("in", &[VSWITCH]), f("svc", &["dpi"]), f("out", &[VSWITCH])],
            edges: vec![e(0, 1), e(1, 2)],
        }
    }

    fn vnfm(states: &[VnfState]) -> (Vnfm, Vec<VnfId>) {
        let mut m = Vnfm::new(&"t".into());
        let mut ids = Vec::new();
        for (i, target) in states.iter().enumerate() {
            let id = VnfId::new(format!("v{i}"));
            m.add(VnfInstance {
                id: id.clone(),
                function: "f".into(),
                slice: "s".into(),
                site: "pop1".into(),
                host: None,
                state: VnfState::Null,
                scale: 0,
                compute: Amount::ONE,
                faulted: false,
                em: EmCounters::default(),
            })
            .unwrap();
            for t in [VnfTransition::Instantiate, VnfTransition::Configure, VnfTransition::Start] {
                if m.get(&id).unwrap().state == *target {
                    break;
                }
                m.vnf_lifecycle(&id, t).unwrap();
            }
            ids.push(id);
        }
        (m, ids)
    }

    #[test]
    fn chain_gives_one_rule_per_edge_on_switches() {
        let (m, ids) = vnfm(&[VnfState::Running; 3]);
        let mut tc = TenantController::new("tc-0", &"s".into());
        let rules = tc.tc_compose(&chain(), &ids, &m).unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].switch, ids[0]);
        assert_eq!(rules[1].switch, ids[2]);
    }

    #[test]
    fn compose_requires_running_vnfs() {
        let (m, ids) = vnfm(&[VnfState::Running, VnfState::Configured, VnfState::Running]);
        let mut tc = TenantController::new("tc-0", &"s".into());
        assert_eq!(tc.tc_compose(&chain(), &ids, &m), Err(ManoError::VnfNotRunning(ids[1].clone())));
        assert!(tc.rules.is_empty());

        let mut lone = chain();
        lone.edges.clear();
        assert!(tc.tc_compose(&lone, &ids, &m).unwrap().is_empty());
    }

    #[test]
    fn nso_instance_bookkeeping() {
        let mut nso = Nso::new("nso-0", &"s".into(), [chain()]);
        assert!(matches!(nso.open(&"nope".into()), Err(ManoError::UnknownDescriptor(_))));
        let i = nso.open(&"chain".into()).unwrap();
        nso.attach(&i, "v0".into());
        assert_eq!(nso.close(&i).unwrap().vnfs, vec![VnfId::new("v0")]);
        assert!(matches!(nso.close(&i), Err(ManoError::UnknownDescriptor(_))));
    }
}
