//! Discrete-event engine, workloads and metrics.
//!
//! Events run strictly in `(time, seq)` order on one thread. Scenario events
//! are queued before the first metric tick, so at equal times they run
//! before the tick; later ticks are queued lazily one at a time.

pub mod congestion;
pub mod workload;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::{ActorId, BlueprintId, SliceId};
use crate::isolation::IsolationError;
use crate::mano::{CreationStep, Deployment, FaultKind, ManoError, QueryField, SliceState};
use crate::resource::ResourceKind;
use crate::trace::{SliceSample, Trace, TraceBody};

pub use workload::{generate_workload, DemandEvent, WorkloadProfile};

pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("event cap exceeded after {processed} events")]
    HorizonExceeded { processed: usize },
    #[error("invalid workload profile: {0}")]
    InvalidProfile(String),
    #[error("event time {time} outside [{now}, {horizon})")]
    InvalidTime { time: Amount, now: Amount, horizon: Amount },
    #[error(transparent)]
    Isolation(#[from] IsolationError),
    #[error(transparent)]
    Mano(#[from] ManoError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    SliceRequest {
        slice: SliceId,
        tenant: ActorId,
        blueprint: BlueprintId,
        requester: ActorId,
        /// Makes the named creation step fail.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inject: Option<CreationStep>,
    },
    DemandChange { slice: SliceId, load: Amount },
    FaultInjection { slice: SliceId, fault: FaultKind },
    LeaseChange { tenant: ActorId, location: String, resource: ResourceKind, quantity: Amount },
    MetricTick { tick: u64 },
    /// A context query from `actor` to the OSS of `slice`.
    BlockMessage { actor: ActorId, slice: SliceId, field: QueryField },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueuedEvent {
    pub time: Amount,
    pub seq: u64,
    pub kind: EventKind,
}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Number of metric ticks.
    pub horizon: u64,
    pub tick: Amount,
    pub event_cap: usize,
}

impl EngineConfig {
    pub fn new(horizon: u64) -> Self {
        EngineConfig { horizon, tick: Amount::ONE, event_cap: DEFAULT_EVENT_CAP }
    }

    pub fn end(&self) -> Amount {
        Amount::from_int(self.horizon as i64) * self.tick
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Admission {
    pub time: Amount,
    pub slice: SliceId,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSeries {
    pub state: Vec<Option<SliceState>>,
    pub offered: Vec<Option<Amount>>,
    pub achieved: Vec<Option<Amount>>,
    pub latency: Vec<Option<Amount>>,
    pub allocation: Vec<Option<BTreeMap<String, Amount>>>,
}

impl SliceSeries {
    fn push(&mut self, s: Option<&SliceSample>) {
        self.state.push(s.map(|s| s.state));
        self.offered.push(s.map(|s| s.offered));
        self.achieved.push(s.map(|s| s.achieved));
        self.latency.push(s.map(|s| s.latency));
        self.allocation.push(s.map(|s| s.allocations.clone()));
    }
}

/// Per-tick series. Every series has one slot per tick; `None` marks ticks
/// where the slice was not live or the pool did not exist.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub ticks: Vec<Amount>,
    pub slices: BTreeMap<SliceId, SliceSeries>,
    pub pools: BTreeMap<String, Vec<Option<Amount>>>,
    pub admissions: Vec<Admission>,
}

impl MetricsSeries {
    fn record(&mut self, time: Amount, slices: &BTreeMap<SliceId, SliceSample>, pools: &BTreeMap<String, Amount>) {
        let n = self.ticks.len();
        for s in slices.keys() {
            self.slices.entry(s.clone()).or_insert_with(|| {
                let mut series = SliceSeries::default();
                (0..n).for_each(|_| series.push(None));
                series
            });
        }
        for p in pools.keys() {
            self.pools.entry(p.clone()).or_insert_with(|| vec![None; n]);
        }
        for (id, series) in self.slices.iter_mut() {
            series.push(slices.get(id));
        }
        for (id, series) in self.pools.iter_mut() {
            series.push(pools.get(id).copied());
        }
        self.ticks.push(time);
    }
}

pub struct Engine {
    pub deployment: Deployment,
    pub trace: Trace,
    pub metrics: MetricsSeries,
    config: EngineConfig,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    next_seq: u64,
    started: bool,
    processed: usize,
}

impl Engine {
    pub fn new(deployment: Deployment, config: EngineConfig) -> Self {
        Engine {
            deployment,
            trace: Trace::default(),
            metrics: MetricsSeries::default(),
            config,
            queue: BinaryHeap::new(),
            next_seq: 0,
            started: false,
            processed: 0,
        }
    }

    pub fn now(&self) -> Amount {
        self.deployment.now()
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn check_time(&self, time: Amount) -> Result<(), SimError> {
        let (now, horizon) = (self.now(), self.config.end());
        if time < now || time >= horizon {
            return Err(SimError::InvalidTime { time, now, horizon });
        }
        Ok(())
    }

    fn push(&mut self, time: Amount, kind: EventKind) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(QueuedEvent { time, seq, kind }));
        seq
    }

    /// Queues an event. Times must lie in `[now, horizon)`.
    pub fn schedule(&mut self, time: Amount, kind: EventKind) -> Result<u64, SimError> {
        self.check_time(time)?;
        Ok(self.push(time, kind))
    }

    pub fn schedule_workload(&mut self, events: &[DemandEvent]) -> Result<(), SimError> {
        for e in events {
            self.schedule(e.time, EventKind::DemandChange { slice: e.slice.clone(), load: e.load })?;
        }
        Ok(())
    }

    /// Schedules a fault on a slice that is live now or requested before
    /// `time`.
    pub fn inject_fault(&mut self, slice: &SliceId, fault: FaultKind, time: Amount) -> Result<u64, SimError> {
        let (now, horizon) = (self.now(), self.config.end());
        if time < now || time >= horizon {
            return Err(IsolationError::InvalidTime { time, now, horizon }.into());
        }
        let live = self.deployment.slices.get(slice).is_some_and(|s| s.state.is_live());
        let pending = self.queue.iter().any(|Reverse(e)| e.time <= time && matches!(&e.kind, EventKind::SliceRequest { slice: s, .. } if s == slice));
        if !live && !pending {
            return Err(IsolationError::UnknownSlice(slice.clone()).into());
        }
        Ok(self.push(time, EventKind::FaultInjection { slice: slice.clone(), fault }))
    }

    fn tick_time(&self, tick: u64) -> Amount {
        Amount::from_int(tick as i64) * self.config.tick
    }

    /// Processes the next event. Returns `false` once the queue is empty.
    pub fn step(&mut self) -> Result<bool, SimError> {
        if !self.started {
            self.started = true;
            if self.config.horizon > 0 {
                self.push(Amount::ZERO, EventKind::MetricTick { tick: 0 });
            }
        }
        let Some(Reverse(ev)) = self.queue.pop() else { return Ok(false) };
        self.processed += 1;
        if self.processed > self.config.event_cap {
            return Err(SimError::HorizonExceeded { processed: self.processed });
        }
        self.deployment.set_now(ev.time);
        self.handle(ev);
        Ok(true)
    }

    pub fn run_to_end(&mut self) -> Result<(), SimError> {
        while self.step()? {}
        Ok(())
    }

    /// Runs every event and returns the trace and metrics.
    pub fn run(mut self) -> Result<(Trace, MetricsSeries, Deployment), SimError> {
        self.run_to_end()?;
        Ok((self.trace, self.metrics, self.deployment))
    }

    fn handle(&mut self, ev: QueuedEvent) {
        let d = &mut self.deployment;
        let trigger = match ev.kind {
            EventKind::SliceRequest { slice, tenant, blueprint, requester, inject } => {
                let result = d.create_slice_with(&slice, &tenant, &blueprint, &requester, inject);
                self.metrics.admissions.push(Admission {
                    time: ev.time,
                    slice: slice.clone(),
                    accepted: result.is_ok(),
                    reason: result.err().map(|e| e.to_string()),
                });
                TraceBody::SliceRequest { slice, tenant, blueprint, requester }
            }
            EventKind::DemandChange { slice, load } => {
                d.set_demand(&slice, load);
                TraceBody::DemandChange { slice, load }
            }
            EventKind::FaultInjection { slice, fault } => {
                // A slice that is gone by now simply ignores the fault.
                let _ = d.apply_fault(&slice, fault);
                TraceBody::FaultInjection { slice, kind: fault }
            }
            EventKind::LeaseChange { tenant, location, resource, quantity } => {
                let outcome = match d.lease_change(&tenant, &location, resource, quantity) {
                    Ok(leases) => format!("granted {}", leases.iter().map(|l| l.id.as_str()).collect::<Vec<_>>().join(",")),
                    Err(e) => format!("rejected: {e}"),
                };
                TraceBody::LeaseChange { tenant, location, kind: resource, quantity, outcome }
            }
            EventKind::MetricTick { tick } => {
                let (slices, pools) = d.sample();
                self.metrics.record(ev.time, &slices, &pools);
                if tick + 1 < self.config.horizon {
                    let t = self.tick_time(tick + 1);
                    self.push(t, EventKind::MetricTick { tick: tick + 1 });
                }
                TraceBody::MetricTick { tick, slices, pools }
            }
            EventKind::BlockMessage { actor, slice, field } => {
                let to = d.slices.get(&slice).map(|s| s.oss.clone()).unwrap_or_else(|| format!("oss-of-{slice}"));
                let message = match d.oss_expose(&slice, &actor, field) {
                    Ok(_) => format!("query {} allow", field.class().as_str()),
                    Err(ManoError::Denied { .. }) => format!("query {} deny", field.class().as_str()),
                    Err(e) => format!("query {} failed: {e}", field.class().as_str()),
                };
                TraceBody::BlockMessage { from: actor.to_string(), to, message }
            }
        };
        let root = self.trace.push(ev.time, None, trigger);
        let mut seqs = Vec::new();
        for item in self.deployment.drain_outbox() {
            let cause = Some(item.cause.map(|i| seqs[i]).unwrap_or(root));
            seqs.push(self.trace.push(ev.time, cause, item.body));
        }
    }
}
