//! CPPN genome: a NEAT genome with 4 fixed inputs and 5 fixed outputs.
//!
//! Inputs are `(x, y, z, d)` where `(x, y, z)` is a voxel position normalized
//! to `[-1, 1]` and `d` is the Euclidean distance of that position from the
//! matrix centre. Outputs gate, in order: skeleton, wheel, joint, sensor,
//! caster.
//!
//! Text format (`to_text`/`from_text`), one item per line, nodes then
//! connections:
//!
//! ```text
//! cppn v1
//! fitness <f64>
//! node <id> <input|hidden|output> <activation-tag>
//! conn <innovation> <source-id> <target-id> <weight f64, 17 sig digits> <enabled 0|1>
//! ```

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use super::activation::Activation;
use crate::num::Real;
use crate::textio::fmt_exact;

pub const CPPN_INPUTS: usize = 4;
pub const CPPN_OUTPUTS: usize = 5;

/// Output slots of the CPPN, by output-node order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputSlot {
    Skeleton = 0,
    Wheel = 1,
    Joint = 2,
    Sensor = 3,
    Caster = 4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRole {
    Input,
    Hidden,
    Output,
}

impl NodeRole {
    fn tag(self) -> &'static str {
        match self {
            NodeRole::Input => "input",
            NodeRole::Hidden => "hidden",
            NodeRole::Output => "output",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "input" => Some(NodeRole::Input),
            "hidden" => Some(NodeRole::Hidden),
            "output" => Some(NodeRole::Output),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGene {
    pub id: u32,
    pub role: NodeRole,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectionGene {
    pub innovation: u64,
    pub source: u32,
    pub target: u32,
    pub weight: f64,
    pub enabled: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum GenomeError {
    #[error("connection {innovation} references missing node {node}")]
    DanglingConnection { innovation: u64, node: u32 },
    #[error("connection graph contains a cycle through node {0}")]
    Cycle(u32),
    #[error("expected {CPPN_INPUTS} input and {CPPN_OUTPUTS} output nodes, found {inputs}/{outputs}")]
    WrongInterface { inputs: usize, outputs: usize },
    #[error("duplicate innovation id {0}")]
    DuplicateInnovation(u64),
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("non-finite weight on connection {0}")]
    NonFiniteWeight(u64),
    #[error("unparseable genome text at line {0}")]
    Parse(usize),
}

/// A NEAT-encoded CPPN. Node ids 0..=3 are the inputs and 4..=8 the outputs
/// in every genome; hidden nodes get fresh ids from the innovation tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct CppnGenome {
    pub nodes: Vec<NodeGene>,
    pub connections: Vec<ConnectionGene>,
    pub fitness: f64,
}

impl CppnGenome {
    /// Fully connected 4-input/5-output genome with weights drawn uniformly
    /// from `[-1, 1]`. Initial connection innovations are `source * 5 +
    /// (target - 4)`, identical across genomes so crossover aligns.
    pub fn fully_connected<R: Rng>(rng: &mut R) -> Self {
        let mut nodes = Vec::with_capacity(CPPN_INPUTS + CPPN_OUTPUTS);
        for id in 0..CPPN_INPUTS as u32 {
            nodes.push(NodeGene {
                id,
                role: NodeRole::Input,
                activation: Activation::Linear,
            });
        }
        for k in 0..CPPN_OUTPUTS as u32 {
            nodes.push(NodeGene {
                id: CPPN_INPUTS as u32 + k,
                role: NodeRole::Output,
                activation: Activation::Sigmoid,
            });
        }
        let mut connections = Vec::with_capacity(CPPN_INPUTS * CPPN_OUTPUTS);
        for src in 0..CPPN_INPUTS as u32 {
            for k in 0..CPPN_OUTPUTS as u32 {
                connections.push(ConnectionGene {
                    innovation: (src * CPPN_OUTPUTS as u32 + k) as u64,
                    source: src,
                    target: CPPN_INPUTS as u32 + k,
                    weight: rng.gen_range(-1.0..=1.0),
                    enabled: true,
                });
            }
        }
        CppnGenome {
            nodes,
            connections,
            fitness: 0.0,
        }
    }

    /// Minimal valid genome with no connections; used by tests and decode
    /// probes that hand-build topologies.
    pub fn unconnected() -> Self {
        let mut nodes = Vec::with_capacity(CPPN_INPUTS + CPPN_OUTPUTS);
        for id in 0..CPPN_INPUTS as u32 {
            nodes.push(NodeGene {
                id,
                role: NodeRole::Input,
                activation: Activation::Linear,
            });
        }
        for k in 0..CPPN_OUTPUTS as u32 {
            nodes.push(NodeGene {
                id: CPPN_INPUTS as u32 + k,
                role: NodeRole::Output,
                activation: Activation::Sigmoid,
            });
        }
        CppnGenome {
            nodes,
            connections: Vec::new(),
            fitness: 0.0,
        }
    }

    pub fn input_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.role == NodeRole::Input)
            .map(|n| n.id)
    }

    pub fn output_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.role == NodeRole::Output)
            .map(|n| n.id)
    }

    pub fn node(&self, id: u32) -> Option<&NodeGene> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn max_node_id(&self) -> u32 {
        self.nodes.iter().map(|n| n.id).max().unwrap_or(0)
    }

    /// Structural validation: fixed interface, unique ids, finite weights,
    /// no dangling endpoints, acyclic over enabled and disabled connections.
    pub fn validate(&self) -> Result<(), GenomeError> {
        let inputs = self.input_ids().count();
        let outputs = self.output_ids().count();
        if inputs != CPPN_INPUTS || outputs != CPPN_OUTPUTS {
            return Err(GenomeError::WrongInterface { inputs, outputs });
        }
        let mut node_ids = BTreeSet::new();
        for n in &self.nodes {
            if !node_ids.insert(n.id) {
                return Err(GenomeError::DuplicateNode(n.id));
            }
        }
        let mut innovations = BTreeSet::new();
        for c in &self.connections {
            if !innovations.insert(c.innovation) {
                return Err(GenomeError::DuplicateInnovation(c.innovation));
            }
            if !c.weight.is_finite() {
                return Err(GenomeError::NonFiniteWeight(c.innovation));
            }
            for node in [c.source, c.target] {
                if !node_ids.contains(&node) {
                    return Err(GenomeError::DanglingConnection {
                        innovation: c.innovation,
                        node,
                    });
                }
            }
        }
        self.topo_order().map(|_| ())
    }

    /// Kahn topological order over all connections (enabled or not); the
    /// feed-forward invariant holds for the full gene set.
    pub(crate) fn topo_order(&self) -> Result<Vec<u32>, GenomeError> {
        let mut indegree: BTreeMap<u32, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        let mut outgoing: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for c in &self.connections {
            *indegree.get_mut(&c.target).ok_or(GenomeError::DanglingConnection {
                innovation: c.innovation,
                node: c.target,
            })? += 1;
            outgoing.entry(c.source).or_default().push(c.target);
        }
        let mut ready: Vec<u32> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        ready.sort_unstable();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = ready.pop() {
            order.push(id);
            if let Some(next) = outgoing.get(&id) {
                for &t in next {
                    let d = indegree.get_mut(&t).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.push(t);
                    }
                }
            }
        }
        if order.len() != self.nodes.len() {
            let stuck = indegree
                .iter()
                .find(|(_, &d)| d > 0)
                .map(|(&id, _)| id)
                .unwrap_or(0);
            return Err(GenomeError::Cycle(stuck));
        }
        Ok(order)
    }

    /// True if adding an edge `source -> target` would close a cycle, i.e.
    /// `source` is reachable from `target`.
    pub(crate) fn would_cycle(&self, source: u32, target: u32) -> bool {
        if source == target {
            return true;
        }
        let mut outgoing: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for c in &self.connections {
            outgoing.entry(c.source).or_default().push(c.target);
        }
        let mut stack = vec![target];
        let mut seen = BTreeSet::new();
        while let Some(id) = stack.pop() {
            if id == source {
                return true;
            }
            if seen.insert(id) {
                if let Some(next) = outgoing.get(&id) {
                    stack.extend_from_slice(next);
                }
            }
        }
        false
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("cppn v1\n");
        out.push_str(&format!("fitness {}\n", fmt_exact(self.fitness)));
        let mut nodes = self.nodes.clone();
        nodes.sort_by_key(|n| n.id);
        for n in &nodes {
            out.push_str(&format!(
                "node {} {} {}\n",
                n.id,
                n.role.tag(),
                n.activation.tag()
            ));
        }
        let mut conns = self.connections.clone();
        conns.sort_by_key(|c| c.innovation);
        for c in &conns {
            out.push_str(&format!(
                "conn {} {} {} {} {}\n",
                c.innovation,
                c.source,
                c.target,
                fmt_exact(c.weight),
                u8::from(c.enabled)
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GenomeError> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l.trim());
        if header != Some("cppn v1") {
            return Err(GenomeError::Parse(1));
        }
        let mut genome = CppnGenome {
            nodes: Vec::new(),
            connections: Vec::new(),
            fitness: 0.0,
        };
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = || GenomeError::Parse(idx + 1);
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("fitness") => {
                    genome.fitness = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
                }
                Some("node") => {
                    let id = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
                    let role = parts.next().and_then(NodeRole::from_tag).ok_or_else(err)?;
                    let activation = parts
                        .next()
                        .and_then(Activation::from_tag)
                        .ok_or_else(err)?;
                    genome.nodes.push(NodeGene {
                        id,
                        role,
                        activation,
                    });
                }
                Some("conn") => {
                    let innovation = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
                    let source = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
                    let target = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
                    let weight = parts.next().and_then(|s| s.parse().ok()).ok_or_else(err)?;
                    let enabled = match parts.next() {
                        Some("0") => false,
                        Some("1") => true,
                        _ => return Err(err()),
                    };
                    genome.connections.push(ConnectionGene {
                        innovation,
                        source,
                        target,
                        weight,
                        enabled,
                    });
                }
                _ => return Err(err()),
            }
        }
        genome.validate()?;
        Ok(genome)
    }
}

/// A genome compiled for evaluation: nodes in topological order with
/// enabled incoming connections resolved to dense indices.
pub struct CppnNetwork<S: Real> {
    // (activation, incoming (source dense index, weight)) per node, topo order
    nodes: Vec<(Activation, Vec<(usize, S)>)>,
    input_slots: [usize; CPPN_INPUTS],
    output_slots: [usize; CPPN_OUTPUTS],
    is_input: Vec<bool>,
}

impl<S: Real> CppnNetwork<S> {
    pub fn compile(genome: &CppnGenome) -> Result<Self, GenomeError> {
        genome.validate()?;
        let order = genome.topo_order()?;
        let dense: BTreeMap<u32, usize> = order.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut nodes: Vec<(Activation, Vec<(usize, S)>)> = order
            .iter()
            .map(|&id| (genome.node(id).unwrap().activation, Vec::new()))
            .collect();
        for c in genome.connections.iter().filter(|c| c.enabled) {
            let t = dense[&c.target];
            nodes[t].1.push((dense[&c.source], S::of(c.weight)));
        }
        let mut input_slots = [0usize; CPPN_INPUTS];
        let mut inputs: Vec<u32> = genome.input_ids().collect();
        inputs.sort_unstable();
        for (k, id) in inputs.iter().enumerate() {
            input_slots[k] = dense[id];
        }
        let mut output_slots = [0usize; CPPN_OUTPUTS];
        let mut outputs: Vec<u32> = genome.output_ids().collect();
        outputs.sort_unstable();
        for (k, id) in outputs.iter().enumerate() {
            output_slots[k] = dense[id];
        }
        let mut is_input = vec![false; order.len()];
        for &slot in &input_slots {
            is_input[slot] = true;
        }
        Ok(CppnNetwork {
            nodes,
            input_slots,
            output_slots,
            is_input,
        })
    }

    /// Evaluate the network at one query point. Deterministic; inputs pass
    /// through unchanged, every other node applies its activation to the
    /// weighted sum of its enabled incoming values.
    pub fn query(&self, inputs: [S; CPPN_INPUTS]) -> [S; CPPN_OUTPUTS] {
        let mut values = vec![S::zero(); self.nodes.len()];
        for (k, &slot) in self.input_slots.iter().enumerate() {
            values[slot] = inputs[k];
        }
        for (i, (act, incoming)) in self.nodes.iter().enumerate() {
            if self.is_input[i] {
                continue;
            }
            let mut sum = S::zero();
            for &(src, w) in incoming {
                sum += values[src] * w;
            }
            values[i] = act.apply(sum);
        }
        let mut out = [S::zero(); CPPN_OUTPUTS];
        for (k, &slot) in self.output_slots.iter().enumerate() {
            out[k] = values[slot];
        }
        out
    }
}

/// Convenience wrapper: compile and run a single query.
pub fn query_cppn<S: Real>(
    genome: &CppnGenome,
    x: S,
    y: S,
    z: S,
    d: S,
) -> Result<[S; CPPN_OUTPUTS], GenomeError> {
    Ok(CppnNetwork::compile(genome)?.query([x, y, z, d]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn fully_connected_is_valid() {
        let g = CppnGenome::fully_connected(&mut rng(1));
        g.validate().unwrap();
        assert_eq!(g.nodes.len(), 9);
        assert_eq!(g.connections.len(), 20);
    }

    #[test]
    fn zero_weight_network_outputs_activation_of_zero() {
        let mut g = CppnGenome::fully_connected(&mut rng(2));
        for c in &mut g.connections {
            c.weight = 0.0;
        }
        let out = query_cppn(&g, 0.7f64, -0.3, 0.1, 0.8).unwrap();
        for v in out {
            assert_eq!(v, 0.5); // sigmoid(0)
        }
    }

    #[test]
    fn query_is_deterministic() {
        let g = CppnGenome::fully_connected(&mut rng(3));
        let a = query_cppn(&g, 0.3f64, -0.1, 0.5, 0.59).unwrap();
        let b = query_cppn(&g, 0.3f64, -0.1, 0.5, 0.59).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_edge_identity_network_multiplies() {
        // input0 -> output0 (weight w, linear output): output0 = x * w
        let mut g = CppnGenome::unconnected();
        g.nodes[CPPN_INPUTS].activation = Activation::Linear;
        let w = -0.735;
        g.connections.push(ConnectionGene {
            innovation: 0,
            source: 0,
            target: CPPN_INPUTS as u32,
            weight: w,
            enabled: true,
        });
        for x in [-1.0f64, -0.25, 0.0, 0.4, 1.0] {
            let out = query_cppn(&g, x, 0.9, -0.9, 0.3).unwrap();
            assert!((out[0] - x * w).abs() < 1e-15);
            // remaining outputs untouched: sigmoid(0)
            for v in &out[1..] {
                assert_eq!(*v, 0.5);
            }
        }
    }

    #[test]
    fn dangling_connection_is_structural_error() {
        let mut g = CppnGenome::fully_connected(&mut rng(4));
        g.connections.push(ConnectionGene {
            innovation: 99,
            source: 77,
            target: 4,
            weight: 0.1,
            enabled: true,
        });
        assert!(matches!(
            g.validate(),
            Err(GenomeError::DanglingConnection { node: 77, .. })
        ));
        assert!(query_cppn(&g, 0.0f64, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn cycle_detected() {
        let mut g = CppnGenome::fully_connected(&mut rng(5));
        // hidden pair forming a 2-cycle
        g.nodes.push(NodeGene {
            id: 10,
            role: NodeRole::Hidden,
            activation: Activation::Sine,
        });
        g.nodes.push(NodeGene {
            id: 11,
            role: NodeRole::Hidden,
            activation: Activation::Sine,
        });
        g.connections.push(ConnectionGene {
            innovation: 100,
            source: 10,
            target: 11,
            weight: 1.0,
            enabled: true,
        });
        g.connections.push(ConnectionGene {
            innovation: 101,
            source: 11,
            target: 10,
            weight: 1.0,
            enabled: true,
        });
        assert!(matches!(g.validate(), Err(GenomeError::Cycle(_))));
    }

    #[test]
    fn would_cycle_detects_back_edge() {
        let g = CppnGenome::fully_connected(&mut rng(6));
        assert!(g.would_cycle(4, 0)); // output -> input closes a cycle
        assert!(g.would_cycle(2, 2));
        assert!(!g.would_cycle(0, 8));
    }

    #[test]
    fn text_round_trip_exact() {
        let mut g = CppnGenome::fully_connected(&mut rng(7));
        g.fitness = 0.8312345678901234;
        g.connections[3].enabled = false;
        let text = g.to_text();
        let back = CppnGenome::from_text(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn from_text_rejects_garbage() {
        assert!(CppnGenome::from_text("nonsense").is_err());
        assert!(CppnGenome::from_text("cppn v1\nnode x y z\n").is_err());
    }

    #[test]
    fn query_works_at_f32() {
        let g = CppnGenome::fully_connected(&mut rng(8));
        let out = query_cppn(&g, 0.25f32, 0.5, -0.5, 0.83).unwrap();
        let out64 = query_cppn(&g, 0.25f64, 0.5, -0.5, 0.83).unwrap();
        for (a, b) in out.iter().zip(out64.iter()) {
            assert!((f64::from(*a) - b).abs() < 1e-6);
        }
    }
}
