//! Translation of a [`Scenario`](crate::model::Scenario) into the footstep MIQP.

mod assemble;
mod export;
mod layout;
mod validate;

pub use assemble::{add_quadratic_form, assemble, big_m_for_row, Affine, Context};
pub use export::write_lp;
pub use layout::{VarKind, VariableLayout};
pub use validate::{validate_assignment, FamilySummary, Violation, ViolationKind, ViolationReport};
