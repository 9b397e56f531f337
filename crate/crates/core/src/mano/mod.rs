//! MANO functional blocks and the slice lifecycle built on them.

mod blocks;
mod catalog;
mod deployment;
mod infra;
mod ro;
mod slice;
mod vnfm;

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::{ActorId, BlueprintId, HostId, LinkId, ManagerId, SiteId, SliceId, VnfId};
use crate::resource::{ResourceError, ResourceKind};
use crate::sdn::SdnError;

pub use blocks::{ContextInfo, FaultNotice, InstanceRecord, Nso, Oss, OverlayRule, QueryField, TenantController};
pub use catalog::{GraphEdge, NetworkServiceDescriptor, Sla, SliceBlueprint, VSWITCH};
pub use deployment::{Deployment, NsAction, OutboxItem, SliceKpi, Tenant, TenantSpec, TC_FUNCTION};
pub use infra::{InfraController, Infrastructure, Lease, PathSegment, UnderlayRule, UsageReport, Vim, WanLink, WanPath, Wim};
pub use ro::{PoolShare, ResourceOrchestrator, SliceGrant};
pub use slice::{FaultKind, NetworkSlice, SliceState};
pub use vnfm::{EmCounters, VnfInstance, VnfState, VnfTransition, Vnfm};

/// The five steps of the slice creation phase, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CreationStep {
    RoReserve,
    NsInstantiate,
    VnfStart,
    TcCompose,
    IcProgram,
}

impl CreationStep {
    pub const ALL: [CreationStep; 5] =
        [CreationStep::RoReserve, CreationStep::NsInstantiate, CreationStep::VnfStart, CreationStep::TcCompose, CreationStep::IcProgram];
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ManoError {
    #[error("unknown tenant {0}")]
    UnknownTenant(ActorId),
    #[error("unknown end user {0}")]
    UnknownEndUser(ActorId),
    #[error("unknown blueprint {0}")]
    UnknownBlueprint(BlueprintId),
    #[error("unknown descriptor or instance {0}")]
    UnknownDescriptor(String),
    #[error("unknown slice {0}")]
    UnknownSlice(SliceId),
    #[error("unknown VNF {0}")]
    UnknownVnf(VnfId),
    #[error("unknown manager {0}")]
    UnknownManager(ManagerId),
    #[error("unknown site {0}")]
    UnknownSite(SiteId),
    #[error("unknown host {0}")]
    UnknownHost(HostId),
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("{0} already exists")]
    Duplicate(String),
    #[error("insufficient {kind} at {location}: requested {requested}, free {free}")]
    Insufficient { location: String, kind: ResourceKind, requested: Amount, free: Amount },
    #[error("leases lack {kind} at {location}: requested {requested}, available {available}")]
    InsufficientLease { location: String, kind: ResourceKind, requested: Amount, available: Amount },
    #[error("placement infeasible: {0}")]
    PlacementInfeasible(String),
    #[error("{origin} has no peering that reaches {from} -> {to}")]
    NoPeering { origin: ManagerId, from: SiteId, to: SiteId },
    #[error("no capacity on {link}: requested {requested}, free {free}")]
    NoCapacity { link: LinkId, requested: Amount, free: Amount },
    #[error("illegal transition {transition:?} for {vnf} in state {from:?}")]
    IllegalTransition { vnf: VnfId, from: VnfState, transition: VnfTransition },
    #[error("VNF {0} is not running")]
    VnfNotRunning(VnfId),
    #[error("no RO grant for slice {0}")]
    NoGrant(SliceId),
    #[error("{actor} may not access {object}")]
    Denied { actor: ActorId, object: String },
    #[error("invalid descriptor {descriptor}: {reason}")]
    InvalidDescriptor { descriptor: crate::ids::DescriptorId, reason: String },
    #[error("slice {slice} is {state:?}")]
    InvalidState { slice: SliceId, state: SliceState },
    #[error("injected failure at {0:?}")]
    InjectedFailure(CreationStep),
    #[error(transparent)]
    Resource(#[from] ResourceError),
    #[error(transparent)]
    Sdn(#[from] SdnError),
}
