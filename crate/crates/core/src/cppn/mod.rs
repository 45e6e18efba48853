//! NEAT-evolved CPPNs: the body-plan population engine.

pub mod activation;
pub mod genome;
pub mod mutation;
pub mod population;

pub use activation::Activation;
pub use genome::{
    query_cppn, ConnectionGene, CppnGenome, CppnNetwork, GenomeError, NodeGene, NodeRole,
    OutputSlot, CPPN_INPUTS, CPPN_OUTPUTS,
};
pub use mutation::{compatibility_distance, crossover, mutate, InnovationTracker, NeatParams};
pub use population::{allocate_offspring, NeatError, NeatPopulation, Species};
