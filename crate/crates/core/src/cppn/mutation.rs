//! Structural and weight mutation, crossover, and the compatibility distance
//! used for speciation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::activation::HIDDEN_REPERTOIRE;
use super::genome::{ConnectionGene, CppnGenome, NodeGene, NodeRole};

/// NEAT hyper-parameters. All probabilities are per call to [`mutate`],
/// applied per connection for the weight operators.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NeatParams {
    pub population_size: usize,
    pub add_node_prob: f64,
    pub add_connection_prob: f64,
    pub weight_perturb_prob: f64,
    pub weight_replace_prob: f64,
    pub weight_perturb_scale: f64,
    pub crossover_prob: f64,
    pub elitism: usize,
    pub compat_excess_coeff: f64,
    pub compat_disjoint_coeff: f64,
    pub compat_weight_coeff: f64,
    pub compat_threshold: f64,
    pub species_stagnation: u32,
}

impl Default for NeatParams {
    fn default() -> Self {
        NeatParams {
            population_size: 20,
            add_node_prob: 0.03,
            add_connection_prob: 0.1,
            weight_perturb_prob: 0.8,
            weight_replace_prob: 0.1,
            weight_perturb_scale: 0.5,
            crossover_prob: 0.75,
            elitism: 1,
            compat_excess_coeff: 1.0,
            compat_disjoint_coeff: 1.0,
            compat_weight_coeff: 0.4,
            compat_threshold: 3.0,
            species_stagnation: 15,
        }
    }
}

impl NeatParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("add_node_prob", self.add_node_prob),
            ("add_connection_prob", self.add_connection_prob),
            ("weight_perturb_prob", self.weight_perturb_prob),
            ("weight_replace_prob", self.weight_replace_prob),
            ("crossover_prob", self.crossover_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be in [0,1], got {p}"));
            }
        }
        if self.population_size == 0 {
            return Err("population_size must be positive".into());
        }
        if self.elitism > self.population_size {
            return Err("elitism cannot exceed population_size".into());
        }
        Ok(())
    }
}

/// Mints innovation ids and hidden-node ids, shared by a whole population so
/// the same structural innovation receives the same id wherever it occurs.
#[derive(Debug, Clone, Default)]
pub struct InnovationTracker {
    next_innovation: u64,
    next_node_id: u32,
    // (source, target) -> connection innovation
    connections: BTreeMap<(u32, u32), u64>,
    // split connection innovation -> (node id, in innovation, out innovation)
    splits: BTreeMap<u64, (u32, u64, u64)>,
}

impl InnovationTracker {
    pub fn new(next_innovation: u64, next_node_id: u32) -> Self {
        InnovationTracker {
            next_innovation,
            next_node_id,
            connections: BTreeMap::new(),
            splits: BTreeMap::new(),
        }
    }

    pub fn connection_innovation(&mut self, source: u32, target: u32) -> u64 {
        *self.connections.entry((source, target)).or_insert_with(|| {
            let id = self.next_innovation;
            self.next_innovation += 1;
            id
        })
    }

    pub fn split(&mut self, connection_innovation: u64) -> (u32, u64, u64) {
        if let Some(&hit) = self.splits.get(&connection_innovation) {
            return hit;
        }
        let node = self.next_node_id;
        self.next_node_id += 1;
        let in_innov = self.next_innovation;
        let out_innov = self.next_innovation + 1;
        self.next_innovation += 2;
        let entry = (node, in_innov, out_innov);
        self.splits.insert(connection_innovation, entry);
        entry
    }
}

/// Mutate a genome. Input/output node counts never change; structural
/// mutations that would break feed-forwardness or duplicate a gene are
/// skipped.
pub fn mutate<R: Rng>(
    genome: &CppnGenome,
    params: &NeatParams,
    tracker: &mut InnovationTracker,
    rng: &mut R,
) -> CppnGenome {
    let mut child = genome.clone();
    mutate_weights(&mut child, params, rng);
    if rng.gen_bool(params.add_node_prob) {
        mutate_add_node(&mut child, tracker, rng);
    }
    if rng.gen_bool(params.add_connection_prob) {
        mutate_add_connection(&mut child, tracker, rng);
    }
    debug_assert!(child.validate().is_ok());
    child
}

fn mutate_weights<R: Rng>(genome: &mut CppnGenome, params: &NeatParams, rng: &mut R) {
    let perturb = Normal::new(0.0, params.weight_perturb_scale.max(f64::MIN_POSITIVE))
        .expect("finite perturbation scale");
    for c in &mut genome.connections {
        if rng.gen_bool(params.weight_replace_prob) {
            c.weight = rng.gen_range(-1.0..=1.0);
        } else if rng.gen_bool(params.weight_perturb_prob) {
            c.weight += perturb.sample(rng);
        }
    }
}

fn mutate_add_node<R: Rng>(genome: &mut CppnGenome, tracker: &mut InnovationTracker, rng: &mut R) {
    let enabled: Vec<usize> = genome
        .connections
        .iter()
        .enumerate()
        .filter(|(_, c)| c.enabled)
        .map(|(i, _)| i)
        .collect();
    if enabled.is_empty() {
        return;
    }
    let idx = enabled[rng.gen_range(0..enabled.len())];
    let old = genome.connections[idx];
    let (node_id, in_innov, out_innov) = tracker.split(old.innovation);
    if genome.node(node_id).is_some() {
        // this genome already contains the split of this gene
        return;
    }
    genome.connections[idx].enabled = false;
    genome.nodes.push(NodeGene {
        id: node_id,
        role: NodeRole::Hidden,
        activation: HIDDEN_REPERTOIRE[rng.gen_range(0..HIDDEN_REPERTOIRE.len())],
    });
    genome.connections.push(ConnectionGene {
        innovation: in_innov,
        source: old.source,
        target: node_id,
        weight: 1.0,
        enabled: true,
    });
    genome.connections.push(ConnectionGene {
        innovation: out_innov,
        source: node_id,
        target: old.target,
        weight: old.weight,
        enabled: true,
    });
}

fn mutate_add_connection<R: Rng>(
    genome: &mut CppnGenome,
    tracker: &mut InnovationTracker,
    rng: &mut R,
) {
    const ATTEMPTS: usize = 20;
    let sources: Vec<u32> = genome
        .nodes
        .iter()
        .filter(|n| n.role != NodeRole::Output)
        .map(|n| n.id)
        .collect();
    let targets: Vec<u32> = genome
        .nodes
        .iter()
        .filter(|n| n.role != NodeRole::Input)
        .map(|n| n.id)
        .collect();
    for _ in 0..ATTEMPTS {
        let source = sources[rng.gen_range(0..sources.len())];
        let target = targets[rng.gen_range(0..targets.len())];
        if source == target
            || genome
                .connections
                .iter()
                .any(|c| c.source == source && c.target == target)
            || genome.would_cycle(source, target)
        {
            continue;
        }
        genome.connections.push(ConnectionGene {
            innovation: tracker.connection_innovation(source, target),
            source,
            target,
            weight: rng.gen_range(-1.0..=1.0),
            enabled: true,
        });
        return;
    }
}

/// NEAT crossover. `fitter` contributes the child's structure; matching genes
/// take their weight from either parent with equal probability, and a gene
/// disabled in either parent stays disabled in the child with probability
/// 0.75. Callers put the better-ranked parent first.
pub fn crossover<R: Rng>(fitter: &CppnGenome, other: &CppnGenome, rng: &mut R) -> CppnGenome {
    let other_by_innov: BTreeMap<u64, &ConnectionGene> =
        other.connections.iter().map(|c| (c.innovation, c)).collect();
    let mut child = fitter.clone();
    for c in &mut child.connections {
        if let Some(match_gene) = other_by_innov.get(&c.innovation) {
            if rng.gen_bool(0.5) {
                c.weight = match_gene.weight;
            }
            if !c.enabled || !match_gene.enabled {
                c.enabled = !rng.gen_bool(0.75);
            }
        }
    }
    child.fitness = 0.0;
    debug_assert!(child.validate().is_ok());
    child
}

/// Compatibility distance `c1*E/N + c2*D/N + c3*Wbar`, with `N = 1` when both
/// genomes carry fewer than 20 connection genes.
pub fn compatibility_distance(a: &CppnGenome, b: &CppnGenome, params: &NeatParams) -> f64 {
    let mut ia = a.connections.iter().map(|c| (c.innovation, c.weight)).collect::<Vec<_>>();
    let mut ib = b.connections.iter().map(|c| (c.innovation, c.weight)).collect::<Vec<_>>();
    ia.sort_by_key(|&(i, _)| i);
    ib.sort_by_key(|&(i, _)| i);
    let max_a = ia.last().map(|&(i, _)| i);
    let max_b = ib.last().map(|&(i, _)| i);

    let (mut excess, mut disjoint, mut matching) = (0usize, 0usize, 0usize);
    let mut weight_diff = 0.0;
    let (mut p, mut q) = (0usize, 0usize);
    while p < ia.len() || q < ib.len() {
        match (ia.get(p), ib.get(q)) {
            (Some(&(i, wa)), Some(&(j, wb))) if i == j => {
                matching += 1;
                weight_diff += (wa - wb).abs();
                p += 1;
                q += 1;
            }
            (Some(&(i, _)), Some(&(j, _))) if i < j => {
                if max_b.is_some_and(|m| i > m) {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                p += 1;
            }
            (Some(_), Some(_)) => {
                if max_a.is_some_and(|m| ib[q].0 > m) {
                    excess += 1;
                } else {
                    disjoint += 1;
                }
                q += 1;
            }
            (Some(_), None) => {
                excess += 1;
                p += 1;
            }
            (None, Some(_)) => {
                excess += 1;
                q += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    let n = ia.len().max(ib.len());
    let n = if n < 20 { 1.0 } else { n as f64 };
    let wbar = if matching > 0 {
        weight_diff / matching as f64
    } else {
        0.0
    };
    params.compat_excess_coeff * excess as f64 / n
        + params.compat_disjoint_coeff * disjoint as f64 / n
        + params.compat_weight_coeff * wbar
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cppn::genome::CPPN_INPUTS;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn fresh_tracker() -> InnovationTracker {
        InnovationTracker::new(20, 9)
    }

    #[test]
    fn zero_rates_leave_genome_unchanged() {
        let g = CppnGenome::fully_connected(&mut rng(1));
        let params = NeatParams {
            add_node_prob: 0.0,
            add_connection_prob: 0.0,
            weight_perturb_prob: 0.0,
            weight_replace_prob: 0.0,
            ..NeatParams::default()
        };
        let child = mutate(&g, &params, &mut fresh_tracker(), &mut rng(2));
        assert_eq!(child, g);
    }

    #[test]
    fn add_node_splits_an_enabled_connection() {
        let g = CppnGenome::fully_connected(&mut rng(3));
        let params = NeatParams {
            add_node_prob: 1.0,
            add_connection_prob: 0.0,
            weight_perturb_prob: 0.0,
            weight_replace_prob: 0.0,
            ..NeatParams::default()
        };
        let child = mutate(&g, &params, &mut fresh_tracker(), &mut rng(4));
        assert_eq!(child.nodes.len(), g.nodes.len() + 1);
        assert_eq!(child.connections.len(), g.connections.len() + 2);
        let disabled: Vec<_> = child.connections.iter().filter(|c| !c.enabled).collect();
        assert_eq!(disabled.len(), 1);
        let old = disabled[0];
        let hidden = child.nodes.last().unwrap();
        assert_eq!(hidden.role, NodeRole::Hidden);
        // split wiring: source -> hidden (weight 1), hidden -> target (old weight)
        let in_conn = child
            .connections
            .iter()
            .find(|c| c.source == old.source && c.target == hidden.id)
            .unwrap();
        let out_conn = child
            .connections
            .iter()
            .find(|c| c.source == hidden.id && c.target == old.target)
            .unwrap();
        assert_eq!(in_conn.weight, 1.0);
        assert_eq!(out_conn.weight, old.weight);
        // interface unchanged
        assert_eq!(child.input_ids().count(), CPPN_INPUTS);
        assert_eq!(child.output_ids().count(), 5);
    }

    #[test]
    fn perturbation_magnitude_matches_scale() {
        // perturb prob 1, replace 0: every weight moves, E|dw| = scale*sqrt(2/pi)
        let g = CppnGenome::fully_connected(&mut rng(5));
        let scale = 0.37;
        let params = NeatParams {
            add_node_prob: 0.0,
            add_connection_prob: 0.0,
            weight_perturb_prob: 1.0,
            weight_replace_prob: 0.0,
            weight_perturb_scale: scale,
            ..NeatParams::default()
        };
        let mut r = rng(6);
        let mut tracker = fresh_tracker();
        let mut deltas = Vec::new();
        for _ in 0..1000 {
            let child = mutate(&g, &params, &mut tracker, &mut r);
            for (a, b) in g.connections.iter().zip(child.connections.iter()) {
                let dw = b.weight - a.weight;
                assert!(dw != 0.0, "every weight must change at rate 1");
                deltas.push(dw.abs());
            }
        }
        let mean_abs: f64 = deltas.iter().sum::<f64>() / deltas.len() as f64;
        let expect = scale * (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (mean_abs - expect).abs() < 0.01,
            "mean |dw| {mean_abs} vs expected {expect}"
        );
    }

    #[test]
    fn same_split_reuses_innovation_ids() {
        let mut tracker = fresh_tracker();
        let a = tracker.split(7);
        let b = tracker.split(7);
        assert_eq!(a, b);
        let c = tracker.split(8);
        assert_ne!(a.0, c.0);
        assert_eq!(tracker.connection_innovation(0, 5), tracker.connection_innovation(0, 5));
    }

    #[test]
    fn add_connection_never_creates_cycles() {
        let params = NeatParams {
            add_node_prob: 0.4,
            add_connection_prob: 1.0,
            ..NeatParams::default()
        };
        let mut tracker = fresh_tracker();
        let mut r = rng(7);
        let mut g = CppnGenome::fully_connected(&mut r);
        for _ in 0..200 {
            g = mutate(&g, &params, &mut tracker, &mut r);
            g.validate().unwrap();
        }
        assert!(g.nodes.len() > 9, "expected some structural growth");
    }

    #[test]
    fn crossover_keeps_fitter_structure() {
        let params = NeatParams::default();
        let mut tracker = fresh_tracker();
        let mut r = rng(8);
        let a = CppnGenome::fully_connected(&mut r);
        let mut b = a.clone();
        for _ in 0..20 {
            b = mutate(
                &b,
                &NeatParams {
                    add_node_prob: 0.5,
                    add_connection_prob: 0.5,
                    ..params.clone()
                },
                &mut tracker,
                &mut r,
            );
        }
        let child = crossover(&b, &a, &mut r);
        child.validate().unwrap();
        let b_innovs: Vec<u64> = b.connections.iter().map(|c| c.innovation).collect();
        let child_innovs: Vec<u64> = child.connections.iter().map(|c| c.innovation).collect();
        assert_eq!(b_innovs, child_innovs);
    }

    #[test]
    fn matching_weights_come_from_either_parent() {
        let mut r = rng(9);
        let mut a = CppnGenome::fully_connected(&mut r);
        let mut b = a.clone();
        for c in &mut a.connections {
            c.weight = 1.0;
        }
        for c in &mut b.connections {
            c.weight = -1.0;
        }
        let child = crossover(&a, &b, &mut r);
        let ones = child.connections.iter().filter(|c| c.weight == 1.0).count();
        let neg = child.connections.iter().filter(|c| c.weight == -1.0).count();
        assert_eq!(ones + neg, child.connections.len());
        assert!(ones > 0 && neg > 0, "both parents should contribute");
    }

    #[test]
    fn distance_zero_for_identical_and_positive_for_disjoint() {
        let params = NeatParams::default();
        let mut r = rng(10);
        let a = CppnGenome::fully_connected(&mut r);
        assert_eq!(compatibility_distance(&a, &a, &params), 0.0);

        let mut b = a.clone();
        let mut tracker = fresh_tracker();
        for _ in 0..10 {
            b = mutate(
                &b,
                &NeatParams {
                    add_node_prob: 1.0,
                    ..params.clone()
                },
                &mut tracker,
                &mut r,
            );
        }
        let d = compatibility_distance(&a, &b, &params);
        assert!(d > 0.0);
        // symmetric
        assert!((d - compatibility_distance(&b, &a, &params)).abs() < 1e-12);
    }

    #[test]
    fn distance_weight_term_matches_hand_value() {
        let params = NeatParams::default();
        let mut r = rng(11);
        let a = CppnGenome::fully_connected(&mut r);
        let mut b = a.clone();
        for c in &mut b.connections {
            c.weight += 0.5;
        }
        // 20 matching genes, mean |dw| = 0.5, no excess/disjoint, N=1 rule
        let d = compatibility_distance(&a, &b, &params);
        assert!((d - 0.4 * 0.5).abs() < 1e-12);
    }
}
