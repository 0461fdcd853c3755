//! Shared inputs for the pipeline benchmarks.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ogre_core::domain::InvariantDomain;
use ogre_core::fixtures::{example_program, EXAMPLE_DOMAIN};
use ogre_core::generate::{predicate_domain, random_program, GenConfig};
use ogre_core::solver::solver_available;
use ogre_core::{PetriProgram, SolverConfig};

pub fn example() -> (PetriProgram, InvariantDomain) {
    let p = example_program();
    let d = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).expect("bundled domain is well-formed");
    (p, d)
}

/// A three-thread generated program with its predicate domain.
pub fn generated(seed: u64) -> (PetriProgram, InvariantDomain) {
    let cfg = GenConfig {
        min_threads: 3,
        ..GenConfig::default()
    };
    let p = random_program(&mut ChaCha8Rng::seed_from_u64(seed), &cfg);
    let d = predicate_domain(&p, 6);
    (p, d)
}

/// `None` when no solver can be started; solver benchmarks are skipped then.
pub fn solver() -> Option<SolverConfig> {
    let cfg = SolverConfig::resolve(None, None);
    solver_available(&cfg).then_some(cfg)
}
