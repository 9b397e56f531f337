//! Network service descriptors and slice blueprints.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::amount::Amount;
use crate::ids::{BlueprintId, DescriptorId, SiteId};
use crate::resource::NetworkFunction;

use super::ManoError;

/// Capability tag that marks a VNF as a virtual switch/router.
pub const VSWITCH: &str = "vswitch";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    /// Mb/s.
    pub bandwidth: Amount,
}

/// A composition of network functions and the forwarding graph between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkServiceDescriptor {
    pub id: DescriptorId,
    pub functions: Vec<NetworkFunction>,
    #[serde(default)]
    pub edges: Vec<GraphEdge>,
}

impl NetworkServiceDescriptor {
    /// Checks edge indices, bandwidths, function validity and weak
    /// connectivity of the graph.
    pub fn validate(&self) -> Result<(), ManoError> {
        let bad = |why: String| ManoError::InvalidDescriptor { descriptor: self.id.clone(), reason: why };
        if self.functions.is_empty() {
            return Err(bad("no network functions".into()));
        }
        for f in &self.functions {
            f.validate().map_err(|e| bad(e.to_string()))?;
        }
        let n = self.functions.len();
        for e in &self.edges {
            if e.from >= n || e.to >= n {
                return Err(bad(format!("edge {}->{} references a missing function", e.from, e.to)));
            }
            if e.bandwidth.is_negative() {
                return Err(bad(format!("edge {}->{} has negative bandwidth", e.from, e.to)));
            }
        }
        // union-find over the undirected graph
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        if (1..n).any(|i| find(&mut parent, i) != root) {
            return Err(bad("forwarding graph is not connected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sla {
    /// Mb/s the slice is always entitled to.
    pub throughput_floor: Amount,
    /// Latency-proxy bound while the slice stays within its floor.
    pub latency_ceiling: Amount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceBlueprint {
    pub id: BlueprintId,
    pub descriptors: Vec<DescriptorId>,
    pub sla: Sla,
    /// Mb/s reserved on every networking pool under the dedicated policy.
    pub bandwidth: Amount,
    #[serde(default = "one")]
    pub weight: Amount,
    /// Site of each function, per descriptor.
    pub placement: BTreeMap<DescriptorId, Vec<SiteId>>,
}

fn one() -> Amount {
    Amount::ONE
}

impl SliceBlueprint {
    pub fn validate(&self, descriptors: &BTreeMap<DescriptorId, NetworkServiceDescriptor>) -> Vec<String> {
        let mut errors = Vec::new();
        if !self.sla.throughput_floor.is_positive() || !self.sla.latency_ceiling.is_positive() {
            errors.push(format!("blueprint {}: SLA values must be positive", self.id));
        }
        if !self.bandwidth.is_positive() {
            errors.push(format!("blueprint {}: bandwidth must be positive", self.id));
        }
        if !self.weight.is_positive() {
            errors.push(format!("blueprint {}: weight must be positive", self.id));
        }
        if self.descriptors.is_empty() {
            errors.push(format!("blueprint {}: no descriptors", self.id));
        }
        let mut seen = BTreeSet::new();
        for d in &self.descriptors {
            if !seen.insert(d) {
                errors.push(format!("blueprint {}: descriptor {d} listed twice", self.id));
            }
            match descriptors.get(d) {
                None => errors.push(format!("blueprint {}: unknown descriptor {d}", self.id)),
                Some(nsd) => match self.placement.get(d) {
                    Some(sites) if sites.len() == nsd.functions.len() => {}
                    Some(sites) => errors.push(format!(
                        "blueprint {}: placement for {d} has {} sites for {} functions",
                        self.id,
                        sites.len(),
                        nsd.functions.len()
                    )),
                    None => errors.push(format!("blueprint {}: no placement for {d}", self.id)),
                },
            }
        }
        errors
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resource::{FunctionKind, ResourceKind};

    fn nf(name: &str) -> NetworkFunction {
        NetworkFunction::new(name, FunctionKind::Virtualized, ["x"], [(ResourceKind::Compute, Amount::from_int(1))]).unwrap()
    }

    fn edge(from: usize, to: usize) -> GraphEdge {
        GraphEdge { from, to, bandwidth: Amount::from_int(10) }
    }

    #[test]
    fn descriptor_validation() {
        let mut d = NetworkServiceDescriptor {
            id: "d".into(),
            functions: vec![nf("a"), nf("b"), nf("c")],
            edges: vec![edge(0, 1), edge(1, 2)],
        };
        assert!(d.validate().is_ok());
        d.edges = vec![edge(0, 1)];
        assert!(d.validate().is_err(), "disconnected");
        d.edges = vec![edge(0, 1), edge(1, 3)];
        assert!(d.validate().is_err(), "dangling index");
        d.functions.truncate(1);
        d.edges.clear();
        assert!(d.validate().is_ok(), "a single function is trivially connected");
    }
}
