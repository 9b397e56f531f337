use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::{ActorId, HostId, ManagerId, SiteId, SliceId, VnfId};

use super::ManoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VnfState {
    Null,
    Instantiated,
    Configured,
    Running,
    Terminated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VnfTransition {
    Instantiate,
    Configure,
    Start,
    Scale(u32),
    Terminate,
}

impl VnfState {
    /// The state reached by `t`, or `None` if the edge does not exist.
    pub fn next(self, t: VnfTransition) -> Option<VnfState> {
        use VnfState::*;
        use VnfTransition::*;
        match (self, t) {
            (Null, Instantiate) => Some(Instantiated),
            (Instantiated, Configure) => Some(Configured),
            (Configured, Start) => Some(Running),
            (Running, Scale(n)) if n > 0 => Some(Running),
            (Running, Terminate) => Some(Terminated),
            _ => None,
        }
    }

    pub fn is_legal_edge(from: VnfState, to: VnfState) -> bool {
        use VnfState::*;
        matches!(
            (from, to),
            (Null, Instantiated) | (Instantiated, Configured) | (Configured, Running) | (Running, Running) | (Running, Terminated)
        )
    }
}

/// Element-manager bookkeeping for one VNF.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmCounters {
    pub faults: u32,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnfInstance {
    pub id: VnfId,
    pub function: String,
    pub slice: SliceId,
    pub site: SiteId,
    pub host: Option<HostId>,
    pub state: VnfState,
    pub scale: u32,
    pub compute: Amount,
    pub faulted: bool,
    pub em: EmCounters,
}

/// VNF manager for one tenant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vnfm {
    pub id: ManagerId,
    pub tenant: ActorId,
    instances: BTreeMap<VnfId, VnfInstance>,
}

impl Vnfm {
    pub fn new(tenant: &ActorId) -> Self {
        Vnfm { id: ManagerId::new(format!("vnfm-{tenant}")), tenant: tenant.clone(), instances: BTreeMap::new() }
    }

    pub fn add(&mut self, instance: VnfInstance) -> Result<(), ManoError> {
        if self.instances.contains_key(&instance.id) {
            return Err(ManoError::Duplicate(instance.id.to_string()));
        }
        self.instances.insert(instance.id.clone(), instance);
        Ok(())
    }

    pub fn get(&self, id: &VnfId) -> Option<&VnfInstance> {
        self.instances.get(id)
    }

    pub fn get_mut(&mut self, id: &VnfId) -> Option<&mut VnfInstance> {
        self.instances.get_mut(id)
    }

    pub fn instances(&self) -> impl Iterator<Item = &VnfInstance> {
        self.instances.values()
    }

    /// Drops a VNF record without a state change. Used when a creation
    /// attempt is abandoned before the VNF ever ran.
    pub fn discard(&mut self, id: &VnfId) -> Option<VnfInstance> {
        self.instances.remove(id)
    }

    /// Applies `t` to `vnf`, returning `(from, to)`.
    pub fn vnf_lifecycle(&mut self, vnf: &VnfId, t: VnfTransition) -> Result<(VnfState, VnfState), ManoError> {
        let inst = self.instances.get_mut(vnf).ok_or_else(|| ManoError::UnknownVnf(vnf.clone()))?;
        let from = inst.state;
        let to = from.next(t).ok_or(ManoError::IllegalTransition { vnf: vnf.clone(), from, transition: t })?;
        inst.state = to;
        match t {
            VnfTransition::Instantiate => inst.scale = 1,
            VnfTransition::Scale(n) => inst.scale = n,
            _ => {}
        }
        Ok((from, to))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vnfm_with(id: &str) -> Vnfm {
        let mut m = Vnfm::new(&"t".into());
        m.add(VnfInstance {
            id: id.into(),
            function: "fw".into(),
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
        m
    }

    #[test]
    fn legal_path_and_scaling() {
        let mut m = vnfm_with("v");
        let v = VnfId::new("v");
        assert_eq!(m.vnf_lifecycle(&v, VnfTransition::Instantiate).unwrap().1, VnfState::Instantiated);
        assert!(matches!(m.vnf_lifecycle(&v, VnfTransition::Start), Err(ManoError::IllegalTransition { .. })));
        m.vnf_lifecycle(&v, VnfTransition::Configure).unwrap();
        m.vnf_lifecycle(&v, VnfTransition::Start).unwrap();
        assert_eq!(m.vnf_lifecycle(&v, VnfTransition::Scale(3)).unwrap(), (VnfState::Running, VnfState::Running));
        assert_eq!(m.get(&v).unwrap().scale, 3);
        m.vnf_lifecycle(&v, VnfTransition::Terminate).unwrap();
        assert!(m.vnf_lifecycle(&v, VnfTransition::Start).is_err());
    }

    #[test]
    fn next_agrees_with_edge_table() {
        use VnfState::*;
        let states = [Null, Instantiated, Configured, Running, Terminated];
        let ts = [VnfTransition::Instantiate, VnfTransition::Configure, VnfTransition::Start, VnfTransition::Scale(2), VnfTransition::Terminate];
        for s in states {
            for t in ts {
                if let Some(to) = s.next(t) {
                    assert!(VnfState::is_legal_edge(s, to));
                }
            }
        }
        assert_eq!(Running.next(VnfTransition::Scale(0)), None);
    }
}
