//! Possibilistic model-based fault isolation.

pub mod dsl;
pub mod engine;
pub mod model;
pub mod scale;
pub mod session;

pub use dsl::{parse_model, parse_observations, serialize_model, Diagnostic, ParsedModel, SourceSpan};
pub use model::{compose_problem, validate_model, Disorder, DiagnosticProblem, Manifestation, Observations, SystemModel};
pub use scale::{Degree, Scale};
pub use session::{replay, BoardView, Session};
