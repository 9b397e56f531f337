//! Scenarios shipped with the tool.

use std::collections::BTreeMap;

use crate::alloc::AllocationPolicy;
use crate::amount::Amount;
use crate::mano::{GraphEdge, NetworkServiceDescriptor, QueryField, Sla, SliceBlueprint, VSWITCH};
use crate::resource::{FunctionKind, NetworkFunction, ResourceKind};
use crate::sim::{EventKind, WorkloadProfile};

use super::{InpSpec, LeaseSpec, LinkSpec, PeeringSpec, PopSpec, ScenarioDocument, ScheduledEvent, SliceDoc, TenantDoc, WanSpec, SCHEMA_VERSION};

pub const BUILTINS: [&str; 5] = ["fig6", "fig6-surge", "fig6-shared", "recursion3", "sla-breach"];

pub fn builtin(name: &str) -> Option<ScenarioDocument> {
    match name {
        "fig6" => Some(fig6()),
        "fig6-surge" => Some(fig6_surge()),
        "fig6-shared" => Some(fig6_shared()),
        "recursion3" => Some(recursion3()),
        "sla-breach" => Some(sla_breach()),
        _ => None,
    }
}

fn a(v: i64) -> Amount {
    Amount::from_int(v)
}

fn function(id: &str, caps: &[&str], compute: i64) -> NetworkFunction {
    NetworkFunction::new(id, FunctionKind::Virtualized, caps.iter().copied(), [(ResourceKind::Compute, a(compute))]).expect("valid function")
}

fn edge(from: usize, to: usize, bandwidth: i64) -> GraphEdge {
    GraphEdge { from, to, bandwidth: a(bandwidth) }
}

fn lease(location: &str, resource: ResourceKind, quantity: i64) -> LeaseSpec {
    LeaseSpec { location: location.into(), resource, quantity: a(quantity) }
}

fn pop(vim: &str, site: &str, compute: i64, networking: i64) -> PopSpec {
    PopSpec { vim: vim.into(), site: site.into(), inventory: BTreeMap::from([(ResourceKind::Compute, a(compute)), (ResourceKind::Networking, a(networking))]) }
}

fn tenant(id: &str, policy: AllocationPolicy, provider: Option<&str>, leases: Vec<LeaseSpec>) -> TenantDoc {
    TenantDoc { id: id.into(), policy, provider: provider.map(Into::into), oss_whitelist: QueryField::ALL.into_iter().collect(), leases }
}

fn slice(id: &str, tenant: &str, blueprint: &str, requester: &str, at: i64, workload: WorkloadProfile) -> SliceDoc {
    SliceDoc { id: id.into(), tenant: tenant.into(), blueprint: blueprint.into(), requester: requester.into(), at: a(at), workload: Some(workload) }
}

fn constant(load: i64) -> WorkloadProfile {
    WorkloadProfile::Constant { load: a(load) }
}

/// Ingress switch, service function, egress switch.
fn chain() -> NetworkServiceDescriptor {
    NetworkServiceDescriptor {
        id: "chain".into(),
        functions: vec![function("ingress", &[VSWITCH], 2), function("service", &["firewall"], 2), function("egress", &[VSWITCH], 2)],
        edges: vec![edge(0, 1, 10), edge(1, 2, 10)],
    }
}

fn blueprint(id: &str, descriptor: &NetworkServiceDescriptor, sites: &[&str], floor: i64, ceiling: i64, bandwidth: i64) -> SliceBlueprint {
    SliceBlueprint {
        id: id.into(),
        descriptors: vec![descriptor.id.clone()],
        sla: Sla { throughput_floor: a(floor), latency_ceiling: a(ceiling) },
        bandwidth: a(bandwidth),
        weight: Amount::ONE,
        placement: BTreeMap::from([(descriptor.id.clone(), sites.iter().map(|s| (*s).into()).collect())]),
    }
}

/// Three InPs: one with two PoPs, two with a WAN each, the WANs peered at
/// an exchange. Two tenants run two slices each over a chain that crosses
/// both WANs.
pub fn fig6() -> ScenarioDocument {
    let tenant_leases = || {
        let mut l: Vec<LeaseSpec> = ["pop1", "pop2", "wan-1", "wan-2"].iter().map(|loc| lease(loc, ResourceKind::Networking, 100)).collect();
        l.extend(["pop1", "pop2"].iter().map(|loc| lease(loc, ResourceKind::Compute, 20)));
        l
    };
    let nsd = chain();
    let query = |at: i64, actor: &str, slice: &str, field| ScheduledEvent {
        at: a(at),
        event: EventKind::BlockMessage { actor: actor.into(), slice: slice.into(), field },
    };
    ScenarioDocument {
        version: SCHEMA_VERSION,
        name: "fig6".into(),
        description: "Two tenants over three InPs: two NFVI-PoPs and two peered WANs".into(),
        seed: 1,
        horizon: 100,
        tick: Amount::ONE,
        event_cap: crate::sim::DEFAULT_EVENT_CAP,
        administrator: "admin".into(),
        inps: vec![
            InpSpec { id: "inp-1".into(), pops: vec![pop("vim-1", "pop1", 400, 400), pop("vim-2", "pop2", 400, 400)], wans: vec![] },
            InpSpec {
                id: "inp-2".into(),
                pops: vec![],
                wans: vec![WanSpec { wim: "wim-2".into(), links: vec![LinkSpec { id: "wan-1".into(), a: "pop1".into(), b: "ix".into(), capacity: a(1000) }] }],
            },
            InpSpec {
                id: "inp-3".into(),
                pops: vec![],
                wans: vec![WanSpec { wim: "wim-3".into(), links: vec![LinkSpec { id: "wan-2".into(), a: "ix".into(), b: "pop2".into(), capacity: a(1000) }] }],
            },
        ],
        peerings: vec![PeeringSpec { a: "wim-2".into(), b: "wim-3".into(), agreement: "transit at ix".into() }],
        tenants: vec![
            tenant("tenant-a", AllocationPolicy::Dedicated, None, tenant_leases()),
            tenant("tenant-b", AllocationPolicy::Dedicated, None, tenant_leases()),
        ],
        end_users: vec!["user-1".into(), "user-2".into(), "user-3".into()],
        blueprints: vec![blueprint("bp-chain", &nsd, &["pop1", "pop1", "pop2"], 20, 10, 50)],
        descriptors: vec![nsd],
        slices: vec![
            slice("a1", "tenant-a", "bp-chain", "user-1", 0, constant(30)),
            slice("a2", "tenant-a", "bp-chain", "user-2", 0, constant(30)),
            slice("b1", "tenant-b", "bp-chain", "user-3", 0, constant(30)),
            slice("b2", "tenant-b", "bp-chain", "user-3", 0, WorkloadProfile::Poisson { rate: Amount::new(1, 5), mean: a(30) }),
        ],
        events: vec![
            query(10, "user-1", "a1", QueryField::Kpis),
            query(10, "user-1", "b1", QueryField::Kpis),
            query(20, "tenant-b", "a2", QueryField::Placement),
        ],
        access_rules: None,
    }
}

/// `fig6` with slice a2's offered load rising tenfold at t=50.
pub fn fig6_surge() -> ScenarioDocument {
    let mut doc = fig6();
    doc.name = "fig6-surge".into();
    doc.description = "fig6 with a tenfold load surge on slice a2 at t=50".into();
    surge(&mut doc, "a2");
    doc
}

/// `fig6-surge` with both tenants sharing their leases above the floors.
pub fn fig6_shared() -> ScenarioDocument {
    let mut doc = fig6_surge();
    doc.name = "fig6-shared".into();
    doc.description = "fig6-surge under the shared-with-floors policy".into();
    for t in &mut doc.tenants {
        t.policy = AllocationPolicy::SharedWithFloors;
    }
    doc
}

fn surge(doc: &mut ScenarioDocument, id: &str) {
    let s = doc.slices.iter_mut().find(|s| s.id.as_str() == id).expect("slice exists");
    s.workload = Some(WorkloadProfile::Step { before: a(30), after: a(300), at: a(50) });
}

/// One InP, a tenant leasing 60 of 100, and a sub-tenant leasing 25 of
/// those 60. The sub-tenant asks for a 30 and then a 20 slice.
pub fn recursion3() -> ScenarioDocument {
    let nsd = NetworkServiceDescriptor {
        id: "pair".into(),
        functions: vec![function("ingress", &[VSWITCH], 1), function("service", &["cache"], 1)],
        edges: vec![edge(0, 1, 5)],
    };
    ScenarioDocument {
        version: SCHEMA_VERSION,
        name: "recursion3".into(),
        description: "A tenant re-offers part of its leases to a sub-tenant".into(),
        seed: 1,
        horizon: 10,
        tick: Amount::ONE,
        event_cap: crate::sim::DEFAULT_EVENT_CAP,
        administrator: "admin".into(),
        inps: vec![InpSpec { id: "inp-1".into(), pops: vec![pop("vim-1", "pop1", 100, 100)], wans: vec![] }],
        peerings: vec![],
        tenants: vec![
            tenant(
                "tenant-1",
                AllocationPolicy::Dedicated,
                None,
                vec![lease("pop1", ResourceKind::Networking, 60), lease("pop1", ResourceKind::Compute, 60)],
            ),
            tenant(
                "tenant-2",
                AllocationPolicy::Dedicated,
                Some("tenant-1"),
                vec![lease("pop1", ResourceKind::Networking, 25), lease("pop1", ResourceKind::Compute, 25)],
            ),
        ],
        end_users: vec!["user-1".into()],
        blueprints: vec![blueprint("bp-30", &nsd, &["pop1", "pop1"], 10, 10, 30), blueprint("bp-20", &nsd, &["pop1", "pop1"], 10, 10, 20)],
        descriptors: vec![nsd],
        slices: vec![
            slice("s30", "tenant-2", "bp-30", "user-1", 0, constant(10)),
            slice("s20", "tenant-2", "bp-20", "user-1", 1, constant(10)),
        ],
        events: vec![],
        access_rules: None,
    }
}

/// A shared tenant whose surging slice drives the pool to saturation while
/// the other slice stays under its floor: a latency breach.
pub fn sla_breach() -> ScenarioDocument {
    let nsd = NetworkServiceDescriptor {
        id: "pair".into(),
        functions: vec![function("ingress", &[VSWITCH], 1), function("service", &["cache"], 1)],
        edges: vec![edge(0, 1, 5)],
    };
    ScenarioDocument {
        version: SCHEMA_VERSION,
        name: "sla-breach".into(),
        description: "Shared pool saturated by one slice while another stays within its floor".into(),
        seed: 1,
        horizon: 40,
        tick: Amount::ONE,
        event_cap: crate::sim::DEFAULT_EVENT_CAP,
        administrator: "admin".into(),
        inps: vec![InpSpec { id: "inp-1".into(), pops: vec![pop("vim-1", "pop1", 50, 100)], wans: vec![] }],
        peerings: vec![],
        tenants: vec![tenant(
            "tenant-s",
            AllocationPolicy::SharedWithFloors,
            None,
            vec![lease("pop1", ResourceKind::Networking, 100), lease("pop1", ResourceKind::Compute, 20)],
        )],
        end_users: vec!["user-1".into()],
        blueprints: vec![blueprint("bp-pair", &nsd, &["pop1", "pop1"], 20, 10, 50)],
        descriptors: vec![nsd],
        slices: vec![
            slice("calm", "tenant-s", "bp-pair", "user-1", 0, constant(15)),
            slice("surge", "tenant-s", "bp-pair", "user-1", 0, WorkloadProfile::Step { before: a(30), after: a(300), at: a(20) }),
        ],
        events: vec![],
        access_rules: None,
    }
}
