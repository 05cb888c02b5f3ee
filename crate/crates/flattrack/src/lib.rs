//! Analytic optimal trajectory tracking for driftless flat systems with
//! three states and two inputs.
//!
//! The library provides:
//! - differential-geometric primitives (Lie derivatives, brackets,
//!   bracket decompositions, flatness checks) in [`geometry`],
//! - the coupled weight triple in [`weights`],
//! - system descriptors and the two built-in models in [`systems`],
//! - analytic reference signals in [`reference`],
//! - the closed-form costate and bang/singular tracking law in
//!   [`controller`],
//! - a fixed-step closed-loop simulator with cost accounting in
//!   [`simulator`],
//! - independent verification machinery (PMP residuals, a direct
//!   transcription solver, perturbation probes) in [`oracle`],
//! - scenario files, data export and the command implementations behind the
//!   `flattrack` binary in [`cli`].
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod controller;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod reference;
pub mod simulator;
pub mod systems;
pub mod weights;

pub use controller::{control_step, ControlDecision, ControllerContext, Mode1, Mode2, Tuning};
pub use error::{ControlError, GeometryError, OracleError, SimulationError, WeightError};
pub use geometry::{
    decompose_higher_brackets, flatness_check, lie_bracket, lie_derivative, FlatOutputMap,
    SmoothVectorField,
};
pub use reference::ReferenceSignal;
pub use simulator::{simulate, SimulationConfig, SimulationLog};
pub use systems::{chained_form, steerable_axle, FlatSystemDescriptor, InputBounds};
pub use weights::WeightSet;
