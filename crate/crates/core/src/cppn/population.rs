//! Generational NEAT population: speciation, fitness-weighted offspring
//! allocation, elitism, and stagnant-species removal.

use rand::Rng;
use thiserror::Error;

use super::genome::{CppnGenome, CPPN_INPUTS, CPPN_OUTPUTS};
use super::mutation::{compatibility_distance, crossover, mutate, InnovationTracker, NeatParams};

#[derive(Debug, Error)]
pub enum NeatError {
    #[error("expected {expected} fitness values, got {got}")]
    FitnessCount { expected: usize, got: usize },
    #[error("non-finite fitness for genome {0}; map failed evaluations to a minimal fitness first")]
    NonFiniteFitness(usize),
    #[error("invalid NEAT parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone)]
pub struct Species {
    pub id: u32,
    pub representative: CppnGenome,
    /// Indices into the population's genome vector.
    pub members: Vec<usize>,
    pub best_fitness: f64,
    pub last_improved: u32,
}

#[derive(Debug, Clone)]
pub struct NeatPopulation {
    pub genomes: Vec<CppnGenome>,
    pub species: Vec<Species>,
    pub generation: u32,
    tracker: InnovationTracker,
    next_species_id: u32,
}

impl NeatPopulation {
    pub fn new<R: Rng>(params: &NeatParams, rng: &mut R) -> Result<Self, NeatError> {
        params.validate().map_err(NeatError::BadParams)?;
        let genomes: Vec<CppnGenome> = (0..params.population_size)
            .map(|_| CppnGenome::fully_connected(rng))
            .collect();
        let mut pop = NeatPopulation {
            genomes,
            species: Vec::new(),
            generation: 0,
            tracker: InnovationTracker::new(
                (CPPN_INPUTS * CPPN_OUTPUTS) as u64,
                (CPPN_INPUTS + CPPN_OUTPUTS) as u32,
            ),
            next_species_id: 0,
        };
        pop.speciate(params);
        Ok(pop)
    }

    pub fn len(&self) -> usize {
        self.genomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genomes.is_empty()
    }

    /// Assign every genome to the first species whose representative is
    /// within the compatibility threshold; unmatched genomes found new
    /// species. Representatives carry over from the previous generation.
    fn speciate(&mut self, params: &NeatParams) {
        for s in &mut self.species {
            s.members.clear();
        }
        for (idx, genome) in self.genomes.iter().enumerate() {
            let found = self.species.iter_mut().find(|s| {
                compatibility_distance(genome, &s.representative, params) < params.compat_threshold
            });
            match found {
                Some(s) => s.members.push(idx),
                None => {
                    self.species.push(Species {
                        id: self.next_species_id,
                        representative: genome.clone(),
                        members: vec![idx],
                        best_fitness: f64::NEG_INFINITY,
                        last_improved: self.generation,
                    });
                    self.next_species_id += 1;
                }
            }
        }
        self.species.retain(|s| !s.members.is_empty());
        // next generation measures distance against a current member
        for s in &mut self.species {
            s.representative = self.genomes[s.members[0]].clone();
        }
    }

    /// Step one generation. `fitnesses[i]` belongs to `genomes[i]`; all must
    /// be finite. Returns the evolved population (same size, generation + 1).
    pub fn next_generation<R: Rng>(
        mut self,
        fitnesses: &[f64],
        params: &NeatParams,
        rng: &mut R,
    ) -> Result<NeatPopulation, NeatError> {
        params.validate().map_err(NeatError::BadParams)?;
        if fitnesses.len() != self.genomes.len() {
            return Err(NeatError::FitnessCount {
                expected: self.genomes.len(),
                got: fitnesses.len(),
            });
        }
        if let Some(bad) = fitnesses.iter().position(|f| !f.is_finite()) {
            return Err(NeatError::NonFiniteFitness(bad));
        }
        for (g, &f) in self.genomes.iter_mut().zip(fitnesses) {
            g.fitness = f;
        }

        // species bookkeeping: track improvement for stagnation removal
        let best_idx = argmax(fitnesses);
        for s in &mut self.species {
            let species_best = s
                .members
                .iter()
                .map(|&i| fitnesses[i])
                .fold(f64::NEG_INFINITY, f64::max);
            if species_best > s.best_fitness {
                s.best_fitness = species_best;
                s.last_improved = self.generation;
            }
        }
        let stagnation = params.species_stagnation;
        let generation = self.generation;
        if self.species.len() > 1 {
            self.species.retain(|s| {
                s.members.contains(&best_idx)
                    || generation.saturating_sub(s.last_improved) < stagnation
            });
        }

        // offspring allocation proportional to summed raw fitness per species
        // (uniform fitness therefore allocates proportionally to species size);
        // an all-zero generation falls back to size weighting directly
        let elites = params.elitism.min(self.genomes.len());
        let slots = self.genomes.len() - elites;
        let mut weights: Vec<f64> = self
            .species
            .iter()
            .map(|s| s.members.iter().map(|&i| fitnesses[i]).sum::<f64>())
            .collect();
        if weights.iter().all(|&w| w <= 0.0) {
            weights = self.species.iter().map(|s| s.members.len() as f64).collect();
        }
        let allocation = allocate_offspring(&weights, slots);

        let mut next_genomes: Vec<CppnGenome> = Vec::with_capacity(self.genomes.len());
        // elites survive verbatim, best first
        let mut ranked: Vec<usize> = (0..self.genomes.len()).collect();
        ranked.sort_by(|&a, &b| fitnesses[b].partial_cmp(&fitnesses[a]).unwrap().then(a.cmp(&b)));
        for &i in ranked.iter().take(elites) {
            next_genomes.push(self.genomes[i].clone());
        }

        for (s, &count) in self.species.iter().zip(allocation.iter()) {
            if count == 0 {
                continue;
            }
            // parent pool: better half, rounded up
            let mut members = s.members.clone();
            members.sort_by(|&a, &b| {
                fitnesses[b].partial_cmp(&fitnesses[a]).unwrap().then(a.cmp(&b))
            });
            let pool = &members[..members.len().div_ceil(2)];
            for _ in 0..count {
                let child = if pool.len() >= 2 && rng.gen_bool(params.crossover_prob) {
                    let a = pool[rng.gen_range(0..pool.len())];
                    let b = loop {
                        let b = pool[rng.gen_range(0..pool.len())];
                        if b != a {
                            break b;
                        }
                    };
                    let (fit, other) = if fitnesses[a] >= fitnesses[b] { (a, b) } else { (b, a) };
                    let crossed = crossover(&self.genomes[fit], &self.genomes[other], rng);
                    mutate(&crossed, params, &mut self.tracker, rng)
                } else {
                    let p = pool[rng.gen_range(0..pool.len())];
                    mutate(&self.genomes[p], params, &mut self.tracker, rng)
                };
                next_genomes.push(child);
            }
        }
        debug_assert_eq!(next_genomes.len(), self.genomes.len());

        let mut next = NeatPopulation {
            genomes: next_genomes,
            species: self.species,
            generation: self.generation + 1,
            tracker: self.tracker,
            next_species_id: self.next_species_id,
        };
        next.speciate(params);
        Ok(next)
    }
}

/// Largest-remainder apportionment of `slots` across non-negative `weights`.
/// Zero-weight entries receive nothing unless every weight is zero, in which
/// case slots spread evenly from the front.
pub fn allocate_offspring(weights: &[f64], slots: usize) -> Vec<usize> {
    if weights.is_empty() {
        return Vec::new();
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        let mut out = vec![slots / weights.len(); weights.len()];
        for item in out.iter_mut().take(slots % weights.len()) {
            *item += 1;
        }
        return out;
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * slots as f64).collect();
    let mut out: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut remainders: Vec<(usize, f64)> = quotas
        .iter()
        .enumerate()
        .map(|(i, q)| (i, q - q.floor()))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..slots - assigned {
        out[remainders[k % remainders.len()].0] += 1;
    }
    out
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
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
    fn population_size_is_constant_and_generation_increments() {
        let params = NeatParams::default();
        let mut r = rng(1);
        let mut pop = NeatPopulation::new(&params, &mut r).unwrap();
        assert_eq!(pop.len(), 20);
        for gen in 0..5 {
            assert_eq!(pop.generation, gen);
            let fitnesses: Vec<f64> = (0..pop.len()).map(|i| i as f64 / 20.0).collect();
            pop = pop.next_generation(&fitnesses, &params, &mut r).unwrap();
            assert_eq!(pop.len(), 20);
        }
        assert_eq!(pop.generation, 5);
    }

    #[test]
    fn every_genome_belongs_to_exactly_one_species() {
        let params = NeatParams::default();
        let mut r = rng(2);
        let mut pop = NeatPopulation::new(&params, &mut r).unwrap();
        for _ in 0..4 {
            let mut seen = vec![0usize; pop.len()];
            for s in &pop.species {
                for &m in &s.members {
                    seen[m] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
            let fitnesses: Vec<f64> = (0..pop.len()).map(|i| (i % 7) as f64).collect();
            pop = pop.next_generation(&fitnesses, &params, &mut r).unwrap();
        }
    }

    #[test]
    fn elite_survives_verbatim() {
        let params = NeatParams::default();
        let mut r = rng(3);
        let pop = NeatPopulation::new(&params, &mut r).unwrap();
        let mut fitnesses = vec![0.1; pop.len()];
        fitnesses[7] = 0.9;
        let mut expected_elite = pop.genomes[7].clone();
        expected_elite.fitness = 0.9;
        let next = pop.next_generation(&fitnesses, &params, &mut r).unwrap();
        assert_eq!(next.genomes[0], expected_elite);
    }

    #[test]
    fn non_finite_fitness_is_an_error() {
        let params = NeatParams::default();
        let mut r = rng(4);
        let pop = NeatPopulation::new(&params, &mut r).unwrap();
        let mut fitnesses = vec![0.5; pop.len()];
        fitnesses[3] = f64::NAN;
        let err = pop.clone().next_generation(&fitnesses, &params, &mut r);
        assert!(matches!(err, Err(NeatError::NonFiniteFitness(3))));
        let err = pop.next_generation(&[0.5], &params, &mut r);
        assert!(matches!(err, Err(NeatError::FitnessCount { .. })));
    }

    #[test]
    fn allocation_proportional_to_sizes_under_uniform_fitness() {
        // summed raw fitness with uniform values reduces to size weighting
        let weights = [15.0 * 0.5, 5.0 * 0.5];
        let alloc = allocate_offspring(&weights, 20);
        assert_eq!(alloc, vec![15, 5]);
        // no species starves
        let alloc = allocate_offspring(&[0.5, 0.5, 0.5], 19);
        assert_eq!(alloc.iter().sum::<usize>(), 19);
        assert!(alloc.iter().all(|&c| c >= 6));
    }

    #[test]
    fn allocation_handles_all_zero_weights() {
        assert_eq!(allocate_offspring(&[0.0, 0.0], 5), vec![3, 2]);
        assert_eq!(allocate_offspring(&[], 5), Vec::<usize>::new());
    }

    #[test]
    fn same_seed_gives_identical_trajectories() {
        let params = NeatParams::default();
        let run = |seed: u64| {
            let mut r = rng(seed);
            let mut pop = NeatPopulation::new(&params, &mut r).unwrap();
            for g in 0..6 {
                let fitnesses: Vec<f64> =
                    (0..pop.len()).map(|i| ((i * 31 + g as usize * 7) % 13) as f64 / 13.0).collect();
                pop = pop.next_generation(&fitnesses, &params, &mut r).unwrap();
            }
            pop.genomes.iter().map(|g| g.to_text()).collect::<Vec<_>>()
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn interface_invariant_under_long_evolution() {
        let params = NeatParams {
            add_node_prob: 0.3,
            add_connection_prob: 0.5,
            ..NeatParams::default()
        };
        let mut r = rng(5);
        let mut pop = NeatPopulation::new(&params, &mut r).unwrap();
        for g in 0..30 {
            let fitnesses: Vec<f64> = (0..pop.len()).map(|i| ((i + g as usize) % 5) as f64).collect();
            pop = pop.next_generation(&fitnesses, &params, &mut r).unwrap();
        }
        for g in &pop.genomes {
            g.validate().unwrap();
            assert_eq!(g.input_ids().count(), 4);
            assert_eq!(g.output_ids().count(), 5);
        }
        // innovation ids unique within each genome is covered by validate();
        // check cross-genome consistency: same (source, target) implies same innovation
        let mut seen: std::collections::BTreeMap<(u32, u32), u64> = Default::default();
        for g in &pop.genomes {
            for c in &g.connections {
                let entry = seen.entry((c.source, c.target)).or_insert(c.innovation);
                assert_eq!(*entry, c.innovation);
            }
        }
    }
}
