//! Private read-update-write for federated submodel learning over
//! storage-constrained, MDS-coded databases.

pub mod audit;
pub mod code;
pub mod error;
pub mod field;
pub mod frame;
pub mod hetero;
pub mod homo;
pub mod linalg;
pub mod partition;
pub mod plan;
pub mod protocol;
pub mod ratio;
pub mod sim;

pub use code::{cost_function, CodeSpec};
pub use error::{Error, Result};
pub use field::{gen_eval_constants, EvalConstants, FieldElement, PrimeField};
pub use hetero::{plan_hetero, plan_hetero_with, ConstraintSet, HeteroOptions};
pub use homo::plan_homo;
pub use plan::StoragePlan;
pub use sim::{init_system, measure_vs_theory, Scenario, SystemState};
