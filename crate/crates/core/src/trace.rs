//! The totally ordered run record consumed by the verifiers and reports.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::amount::Amount;
use crate::ids::{ActorId, BlueprintId, SliceId, VnfId};
use crate::mano::{CreationStep, FaultKind, SliceState, VnfState};
use crate::resource::ResourceKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "machine", rename_all = "kebab-case")]
pub enum StateChange {
    Slice { from: SliceState, to: SliceState },
    Vnf { from: VnfState, to: VnfState, scale: u32 },
}

impl StateChange {
    pub fn is_legal(&self) -> bool {
        match self {
            StateChange::Slice { from, to } => SliceState::is_legal_edge(*from, *to),
            StateChange::Vnf { from, to, scale } => VnfState::is_legal_edge(*from, *to) && (*to != VnfState::Running || *scale > 0),
        }
    }
}

/// One slice's metrics at a tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSample {
    pub state: SliceState,
    pub offered: Amount,
    pub achieved: Amount,
    pub latency: Amount,
    pub allocations: BTreeMap<String, Amount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceBody {
    SliceRequest { slice: SliceId, tenant: ActorId, blueprint: BlueprintId, requester: ActorId },
    CreationFailed { slice: SliceId, step: Option<CreationStep>, reason: String },
    DemandChange { slice: SliceId, load: Amount },
    FaultInjection { slice: SliceId, kind: FaultKind },
    LeaseChange { tenant: ActorId, location: String, kind: ResourceKind, quantity: Amount, outcome: String },
    MetricTick { tick: u64, slices: BTreeMap<SliceId, SliceSample>, pools: BTreeMap<String, Amount> },
    BlockMessage { from: String, to: String, message: String },
    Transition { object: String, change: StateChange },
    FaultEffect { target: String, detail: String },
    /// Declares the objects that belong to a slice.
    SliceScope { slice: SliceId, objects: BTreeSet<String> },
    VnfDiscarded { vnf: VnfId, state: VnfState },
}

impl TraceBody {
    /// Objects whose state this record changes or delivers to.
    pub fn touched(&self) -> Vec<&str> {
        match self {
            TraceBody::Transition { object, .. } => vec![object.as_str()],
            TraceBody::FaultEffect { target, .. } => vec![target.as_str()],
            TraceBody::BlockMessage { to, .. } => vec![to.as_str()],
            TraceBody::VnfDiscarded { vnf, .. } => vec![vnf.as_str()],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub seq: u64,
    pub time: Amount,
    /// Sequence number of the entry that caused this one.
    pub cause: Option<u64>,
    #[serde(flatten)]
    pub body: TraceBody,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

impl Trace {
    pub fn push(&mut self, time: Amount, cause: Option<u64>, body: TraceBody) -> u64 {
        let seq = self.entries.len() as u64;
        self.entries.push(TraceEntry { seq, time, cause, body });
        seq
    }

    pub fn get(&self, seq: u64) -> Option<&TraceEntry> {
        self.entries.get(seq as usize).filter(|e| e.seq == seq).or_else(|| self.entries.iter().find(|e| e.seq == seq))
    }

    /// SHA-256 over the canonical JSON of every entry in order, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(serde_json::to_vec(e).expect("trace entries serialize"));
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// Chain of causes from `seq` up to its root, starting with `seq`.
    pub fn cause_chain(&self, seq: u64) -> Vec<u64> {
        let mut chain = vec![seq];
        let mut cur = seq;
        while let Some(c) = self.get(cur).and_then(|e| e.cause) {
            if chain.contains(&c) {
                break;
            }
            chain.push(c);
            cur = c;
        }
        chain
    }

    /// Objects declared for each slice.
    pub fn scopes(&self) -> BTreeMap<SliceId, BTreeSet<String>> {
        let mut out: BTreeMap<SliceId, BTreeSet<String>> = BTreeMap::new();
        for e in &self.entries {
            if let TraceBody::SliceScope { slice, objects } = &e.body {
                out.entry(slice.clone()).or_default().extend(objects.iter().cloned());
            }
        }
        out
    }

    /// Per-slice state at every metric tick, `None` before the slice exists.
    pub fn state_series(&self, slice: &SliceId) -> Vec<Option<SliceState>> {
        self.entries
            .iter()
            .filter_map(|e| match &e.body {
                TraceBody::MetricTick { slices, .. } => Some(slices.get(slice).map(|s| s.state)),
                _ => None,
            })
            .collect()
    }
}
