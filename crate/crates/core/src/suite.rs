//! Population checks over generated programs: empire validity, certificate
//! validity, place-conjunction equivalence, focus conditions, and mutant
//! rejection.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::annotation::{
    check_place_conjunctions, focused_og, ghost_encoding, imperial_og, ImperialOptions, LawSource, OgAnnotation,
};
use crate::domain::{abstract_reach, is_safe};
use crate::empire::{build_saturated_empire, check_empire_valid};
use crate::focus::{check_focus, compute_focus};
use crate::generate::{mutate, predicate_domain, random_program, GenConfig, Mutation};
use crate::petri::PetriProgram;
use crate::solver::{SmtSession, SolverConfig, SolverError};
use crate::validator::{discharge_oracle, discharge_smt, generate_vcs_for, validate, Mode, VcResult, Verdict};

#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    /// Safe programs to check.
    pub programs: usize,
    pub seed: u64,
    /// Generation attempts before giving up on reaching `programs`.
    pub max_attempts: usize,
    pub oracle_bound: i64,
    pub mutations_per_program: usize,
    pub max_subset: usize,
    pub predicates_per_component: usize,
    pub generator: GenConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            programs: 200,
            seed: 0,
            max_attempts: 2000,
            oracle_bound: 4,
            mutations_per_program: 5,
            max_subset: 3,
            predicates_per_component: 6,
            generator: GenConfig::default(),
        }
    }
}

/// Failures are `(seed, detail)`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteReport {
    pub attempts: usize,
    pub unsafe_skipped: usize,
    pub programs: usize,
    pub empire_failures: Vec<(u64, String)>,
    pub validation_failures: Vec<(u64, String)>,
    pub conjunction_failures: Vec<(u64, String)>,
    pub focus_failures: Vec<(u64, String)>,
    pub mutations: usize,
    pub mutations_killed: usize,
    /// Mutants refuted by the oracle but discharged by the solver.
    pub mutation_escapes: Vec<(u64, String)>,
    pub errors: Vec<(u64, String)>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.empire_failures.is_empty()
            && self.validation_failures.is_empty()
            && self.conjunction_failures.is_empty()
            && self.focus_failures.is_empty()
            && self.mutation_escapes.is_empty()
            && self.errors.is_empty()
    }
}

/// Whether the oracle kills `og`, and if so whether the solver agrees on
/// the refuted condition. A condition the solver does not discharge keeps
/// the verdict away from Valid.
fn check_mutant(p: &PetriProgram, og: &OgAnnotation, bound: i64, solver: &mut SmtSession) -> Result<Option<bool>, String> {
    let vcs = generate_vcs_for(p, og).map_err(|e| e.to_string())?;
    for vc in &vcs {
        if let VcResult::Sat { .. } = discharge_oracle(vc, p, og, bound) {
            return Ok(Some(discharge_smt(vc, solver) != VcResult::Unsat));
        }
    }
    Ok(None)
}

fn check_program(seed: u64, p: &PetriProgram, cfg: &SuiteConfig, solver_cfg: &SolverConfig, s: &mut SmtSession, rep: &mut SuiteReport) -> Result<bool, String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let d = predicate_domain(p, cfg.predicates_per_component);
    let reach = abstract_reach(p, &d, s).map_err(|e| err(&e))?;
    if !is_safe(p, &reach).safe {
        return Ok(false);
    }
    let e = build_saturated_empire(p, &d, s).map_err(|e| err(&e))?;
    let er = check_empire_valid(p, &d, &e, s).map_err(|e| err(&e))?;
    if !er.valid() {
        rep.empire_failures.push((seed, format!("{:?} {:?}", er.violations, er.unknown)));
    }
    let f = compute_focus(p, &d, &e, s).map_err(|e| err(&e))?;
    let fv = check_focus(p, &d, &e, &f, s).map_err(|e| err(&e))?;
    if !fv.is_empty() {
        rep.focus_failures.push((seed, format!("{fv:?}")));
        return Ok(true);
    }
    let opts = ImperialOptions::default();
    let enc = ghost_encoding(p, &e, true).map_err(|e| err(&e))?;
    let imperial = imperial_og(p, &d, &e, opts).map_err(|e| err(&e))?;
    let focused = focused_og(p, &d, &e, &f, opts, s).map_err(|e| err(&e))?;
    for (name, og, src) in [("imperial", &imperial, LawSource::Imperial), ("focused", &focused, LawSource::Focused(&f))] {
        let r = validate(p, og, Mode::Both { bound: cfg.oracle_bound }, solver_cfg, 1).map_err(|e| err(&e))?;
        if r.verdict != Verdict::Valid {
            let bad: Vec<_> = r
                .vcs
                .iter()
                .filter(|v| !matches!(v.result, VcResult::Unsat))
                .map(|v| v.name.clone())
                .collect();
            rep.validation_failures.push((seed, format!("{name}: {} {bad:?}", r.verdict)));
        }
        let cf = check_place_conjunctions(p, &d, &e, og, &enc, src, cfg.max_subset, s).map_err(|e| err(&e))?;
        if !cf.is_empty() {
            rep.conjunction_failures.push((seed, format!("{name}: {cf:?}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d75_7461);
    let mut made = 0;
    let mut tries = 0;
    while made < cfg.mutations_per_program && tries < 50 * cfg.mutations_per_program {
        tries += 1;
        let base = if made % 2 == 0 { &focused } else { &imperial };
        let Some((m, mutant)) = mutate(base, &mut rng) else { continue };
        if mutant == *base {
            continue;
        }
        made += 1;
        rep.mutations += 1;
        match check_mutant(p, &mutant, cfg.oracle_bound, s)? {
            Some(true) => rep.mutations_killed += 1,
            Some(false) => rep.mutation_escapes.push((seed, describe(&m, p))),
            None => {}
        }
    }
    Ok(true)
}

fn describe(m: &Mutation, p: &PetriProgram) -> String {
    match m {
        Mutation::DropConjunct { place } => format!("drop conjunct at {}", p.places[*place]),
        Mutation::FlipUpdate { transition } => format!("flip update of {}", p.transitions[*transition].name),
        Mutation::PerturbRho { ghost } => format!("perturb initial {ghost}"),
    }
}

/// Generates programs from consecutive seeds until `cfg.programs` safe ones
/// have been checked or the attempt budget runs out.
pub fn run_suite(cfg: &SuiteConfig, solver_cfg: &SolverConfig) -> Result<SuiteReport, SolverError> {
    let start = Instant::now();
    let mut s = SmtSession::start(solver_cfg.clone())?;
    let mut rep = SuiteReport::default();
    while rep.programs < cfg.programs && rep.attempts < cfg.max_attempts {
        let seed = cfg.seed + rep.attempts as u64;
        rep.attempts += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_program(&mut rng, &cfg.generator);
        match check_program(seed, &p, cfg, solver_cfg, &mut s, &mut rep) {
            Ok(true) => rep.programs += 1,
            Ok(false) => rep.unsafe_skipped += 1,
            Err(e) => {
                rep.programs += 1;
                rep.errors.push((seed, e));
            }
        }
    }
    rep.elapsed = start.elapsed();
    Ok(rep)
}
