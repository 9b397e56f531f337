use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::{ActorId, BlueprintId, SliceId, VnfId};

use super::catalog::Sla;
use super::infra::UnderlayRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SliceState {
    Requested,
    Creating,
    Active,
    Faulted,
    Terminated,
}

impl SliceState {
    pub fn is_legal_edge(from: SliceState, to: SliceState) -> bool {
        use SliceState::*;
        matches!(
            (from, to),
            (Requested, Creating)
                | (Creating, Active)
                | (Creating, Terminated)
                | (Active, Faulted)
                | (Active, Terminated)
                | (Faulted, Terminated)
        )
    }

    /// Whether the slice is operating (possibly degraded).
    pub fn is_live(self) -> bool {
        matches!(self, SliceState::Active | SliceState::Faulted)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaultKind {
    VnfCrash,
    TcCrash,
    ConfigCorruption,
}

impl FaultKind {
    pub const ALL: [FaultKind; 3] = [FaultKind::VnfCrash, FaultKind::TcCrash, FaultKind::ConfigCorruption];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSlice {
    pub id: SliceId,
    pub tenant: ActorId,
    pub blueprint: BlueprintId,
    pub requester: ActorId,
    pub oss: String,
    pub tc: String,
    pub nso: String,
    pub vnfs: Vec<VnfId>,
    pub state: SliceState,
    pub sla: Sla,
    /// Networking pools (sites and WAN links) the slice's traffic crosses.
    pub pools: Vec<String>,
    pub bandwidth: Amount,
    pub weight: Amount,
    /// Underlay rules installed for this slice, as `(ic id, rule)`.
    pub underlay: Vec<(String, UnderlayRule)>,
}

impl NetworkSlice {
    pub fn handles(&self) -> [&str; 3] {
        [&self.oss, &self.tc, &self.nso]
    }
}
