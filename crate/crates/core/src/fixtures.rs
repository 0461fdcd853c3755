//! The bundled two-thread example: a fork into a loop-carrying left thread
//! and a division-guarding right thread, joined at an assertion.

use crate::petri::PetriProgram;

pub const EXAMPLE_PROGRAM: &str = include_str!("../fixtures/example_program.json");
pub const EXAMPLE_DOMAIN: &str = include_str!("../fixtures/example_domain_product.json");

pub fn example_program() -> PetriProgram {
    PetriProgram::from_json(EXAMPLE_PROGRAM).expect("bundled program is well-formed")
}
