//! Owicki-Gries certificates for one-safe Petri programs.

pub mod fixtures;
pub mod logic;
pub mod petri;
pub mod solver;
pub mod domain;
pub mod empire;
pub mod focus;
pub mod annotation;
pub mod validator;
pub mod generate;
pub mod suite;

pub use annotation::{ImperialOptions, Metrics, OgAnnotation};
pub use domain::{InvariantDomain, LawVector};
pub use empire::Empire;
pub use focus::Focus;
pub use logic::{Sort, Term};
pub use petri::{Marking, PetriProgram, PlaceId, TransId};
pub use solver::{SmtSession, SolverConfig};
pub use validator::{Mode, Report, Verdict};
