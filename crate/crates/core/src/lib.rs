//! Placement of vehicle-originated processing demands over vehicle, edge
//! and cloud processors, minimizing a weighted sum of total power and
//! worst-case delay.
//!
//! The closed-form models (path loss, queueing, device power) are generic
//! over [`Scalar`]; the aliases below fix them to `f64`, which is what the
//! optimizer uses.

pub mod delaymodel;
pub mod error;
pub mod experiment;
pub mod formulation;
pub mod linkmodel;
pub mod powermodel;
pub mod scalar;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use formulation::{
    evaluate, export_lp, formulate, make_weights, read_lp, Allocation, DemandAllocation, Instance, MilpModel,
    Serving, SolveResult, WeightRequest,
};
pub use linkmodel::{build_links, Device, Link, LinkSet};
pub use scalar::Scalar;
pub use scenario::{parse_scenario, ObjectiveWeights, ProcessingSetting, Scenario, WeightPreset};
pub use solver::{brute_force, solve, Limits};

pub type QueueSpec = delaymodel::QueueSpec<f64>;
pub type DelayTable = delaymodel::DelayTable<f64>;
pub type PowerSpec = powermodel::PowerSpec<f64>;
pub type DeviceLoad = powermodel::DeviceLoad<f64>;
