//! Run reports and the per-slice explanation view.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::{ActorId, BlueprintId, SliceId};
use crate::isolation::{verify_containment, verify_performance, AuditRecord, ContainmentReport, KpiViolation};
use crate::mano::SliceState;
use crate::sim::MetricsSeries;
use crate::trace::{StateChange, Trace, TraceBody, TraceEntry};

use super::{RunOutcome, ScenarioDocument};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub tenant: ActorId,
    pub blueprint: BlueprintId,
    pub admitted: bool,
    pub final_state: Option<SliceState>,
    pub throughput_floor: Option<Amount>,
    pub latency_ceiling: Option<Amount>,
    pub ticks_live: usize,
    pub min_achieved: Option<Amount>,
    pub mean_achieved: Option<Amount>,
    pub max_latency: Option<Amount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub mean_utilization: Amount,
    pub peak_utilization: Amount,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violations {
    pub performance: Vec<KpiViolation>,
    /// One report per slice that received a fault.
    pub containment: Vec<ContainmentReport>,
}

impl Violations {
    pub fn is_empty(&self) -> bool {
        self.performance.is_empty() && self.containment.iter().all(|c| c.violations.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleLine {
    pub seq: u64,
    pub time: Amount,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<SliceId>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub scenario: String,
    pub scenario_digest: String,
    pub seed: u64,
    pub horizon: u64,
    pub trace_digest: String,
    pub trace_entries: usize,
    pub slices: BTreeMap<SliceId, SliceSummary>,
    pub pools: BTreeMap<String, PoolSummary>,
    pub metrics: MetricsSeries,
    pub audit: Vec<AuditRecord>,
    pub violations: Violations,
    pub lifecycle: Vec<LifecycleLine>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn mean(values: &[Amount]) -> Option<Amount> {
    (!values.is_empty()).then(|| values.iter().copied().sum::<Amount>() / Amount::from_int(values.len() as i64))
}

/// The slice a trace entry belongs to, found from the root of its cause
/// chain.
fn owning_slice(trace: &Trace, e: &TraceEntry) -> Option<SliceId> {
    let root = *trace.cause_chain(e.seq).last()?;
    match &trace.get(root)?.body {
        TraceBody::SliceRequest { slice, .. } | TraceBody::FaultInjection { slice, .. } | TraceBody::DemandChange { slice, .. } => Some(slice.clone()),
        _ => None,
    }
}

fn describe(body: &TraceBody) -> Option<String> {
    Some(match body {
        TraceBody::SliceRequest { slice, tenant, blueprint, requester } => format!("{requester} requests {slice} from {tenant} ({blueprint})"),
        TraceBody::CreationFailed { slice, step, reason } => match step {
            Some(s) => format!("{slice} creation failed at {s:?}: {reason}"),
            None => format!("{slice} rejected: {reason}"),
        },
        TraceBody::FaultInjection { slice, kind } => format!("fault {kind:?} injected into {slice}"),
        TraceBody::BlockMessage { from, to, message } => format!("{from} -> {to}: {message}"),
        TraceBody::Transition { object, change: StateChange::Slice { from, to } } => format!("{object}: {from:?} -> {to:?}"),
        TraceBody::Transition { object, change: StateChange::Vnf { from, to, scale } } => format!("{object}: {from:?} -> {to:?} (scale {scale})"),
        TraceBody::FaultEffect { target, detail } => format!("{target}: {detail}"),
        TraceBody::SliceScope { slice, objects } => format!("{slice} scope: {}", objects.iter().cloned().collect::<Vec<_>>().join(" ")),
        TraceBody::VnfDiscarded { vnf, state } => format!("{vnf}: discarded in {state:?}"),
        TraceBody::LeaseChange { tenant, location, kind, quantity, outcome } => format!("{tenant} lease {quantity} {kind} at {location}: {outcome}"),
        TraceBody::DemandChange { .. } | TraceBody::MetricTick { .. } => return None,
    })
}

/// Assembles the report of a finished run.
pub fn emit_report(doc: &ScenarioDocument, outcome: &RunOutcome) -> RunReport {
    let trace = &outcome.trace;
    let m = &outcome.metrics;
    let d = &outcome.deployment;
    let mut slices = BTreeMap::new();
    for s in &doc.slices {
        let series = m.slices.get(&s.id);
        let achieved: Vec<Amount> = series.map(|x| x.achieved.iter().flatten().copied().collect()).unwrap_or_default();
        let latency: Vec<Amount> = series.map(|x| x.latency.iter().flatten().copied().collect()).unwrap_or_default();
        let bounds = d.isolation.performance.get(&s.id);
        let sla = doc.blueprints.iter().find(|b| b.id == s.blueprint).map(|b| &b.sla);
        slices.insert(
            s.id.clone(),
            SliceSummary {
                tenant: s.tenant.clone(),
                blueprint: s.blueprint.clone(),
                admitted: m.admissions.iter().any(|a| a.slice == s.id && a.accepted),
                final_state: d.slices.get(&s.id).map(|x| x.state),
                throughput_floor: bounds.map(|b| b.throughput_floor).or(sla.map(|x| x.throughput_floor)),
                latency_ceiling: bounds.map(|b| b.latency_ceiling).or(sla.map(|x| x.latency_ceiling)),
                ticks_live: achieved.len(),
                min_achieved: achieved.iter().copied().min(),
                mean_achieved: mean(&achieved),
                max_latency: latency.iter().copied().max(),
            },
        );
    }
    let pools = m
        .pools
        .iter()
        .map(|(id, series)| {
            let values: Vec<Amount> = series.iter().flatten().copied().collect();
            let summary = PoolSummary {
                mean_utilization: mean(&values).unwrap_or(Amount::ZERO),
                peak_utilization: values.iter().copied().max().unwrap_or(Amount::ZERO),
            };
            (id.clone(), summary)
        })
        .collect();
    let mut faulted: Vec<SliceId> = trace
        .entries
        .iter()
        .filter_map(|e| match &e.body {
            TraceBody::FaultInjection { slice, .. } => Some(slice.clone()),
            _ => None,
        })
        .collect();
    faulted.sort();
    faulted.dedup();
    let violations = Violations {
        performance: verify_performance(trace, &d.isolation),
        containment: faulted.iter().map(|s| verify_containment(trace, s)).collect(),
    };
    let lifecycle = trace
        .entries
        .iter()
        .filter_map(|e| describe(&e.body).map(|text| LifecycleLine { seq: e.seq, time: e.time, slice: owning_slice(trace, e), text }))
        .collect();
    RunReport {
        tool: "slicesim".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: doc.name.clone(),
        scenario_digest: doc.digest(),
        seed: outcome.seed,
        horizon: doc.horizon,
        trace_digest: trace.digest(),
        trace_entries: trace.entries.len(),
        slices,
        pools,
        metrics: m.clone(),
        audit: d.audit().records().to_vec(),
        violations,
        lifecycle,
    }
}

/// Lifecycle transcript and KPI series of one slice, or `None` if the
/// report does not know the slice.
pub fn explain(report: &RunReport, slice: &SliceId) -> Option<String> {
    let summary = report.slices.get(slice)?;
    let mut out = String::new();
    let opt = |a: Option<Amount>| a.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
    let _ = writeln!(out, "slice {slice} (tenant {}, blueprint {})", summary.tenant, summary.blueprint);
    let _ = writeln!(
        out,
        "admitted: {}  final state: {}  floor: {}  ceiling: {}",
        summary.admitted,
        summary.final_state.map(|s| format!("{s:?}")).unwrap_or_else(|| "-".into()),
        opt(summary.throughput_floor),
        opt(summary.latency_ceiling)
    );
    let _ = writeln!(out, "\nlifecycle:");
    for l in report.lifecycle.iter().filter(|l| l.slice.as_ref() == Some(slice)) {
        let _ = writeln!(out, "  [{:>5}] t={:<8} {}", l.seq, l.time.to_string(), l.text);
    }
    let _ = writeln!(out, "\nkpis:\n  {:>5} {:>10} {:>10} {:>10} {:>10}", "tick", "state", "offered", "achieved", "latency");
    if let Some(series) = report.metrics.slices.get(slice) {
        for (i, t) in report.metrics.ticks.iter().enumerate() {
            let Some(state) = series.state[i] else { continue };
            let _ = writeln!(
                out,
                "  {:>5} {:>10} {:>10} {:>10} {:>10}",
                t.to_string(),
                format!("{state:?}"),
                opt(series.offered[i]),
                opt(series.achieved[i]),
                opt(series.latency[i])
            );
        }
    }
    Some(out)
}
