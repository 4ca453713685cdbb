//! Microservice deployment on MEC servers and priority-based subtask
//! offloading.

pub mod adgraph;
pub mod catalog;
pub mod deployment;
pub mod ids;
pub mod kmst;
pub mod offload;
pub mod scenario;
pub mod sim;

pub use adgraph::{build_ad_graph, star_expand, AdGraph, Anchoring, MecServer};
pub use catalog::{Microservice, NewServiceDistribution, Service, ServiceCatalog};
pub use deployment::{
    solve_deployment, solve_deployment_with, verify_plan, DeploymentError, DeploymentOptions,
    DeploymentPlan, RateCheck,
};
pub use ids::{CloudId, MicroserviceId, ServerId, ServiceId, UeId};
pub use kmst::{kmst_exact, kmst_heuristic, kmst_solve, verify_tree, KmstGraph, TreeSolution};
pub use offload::{
    build_offload_matrix, design_queue, evaluate_schedule, integration_priorities, validate_schedule,
    LatencyProvider, OffloadMatrix, PriorityOrder, Schedule, Subtask, Target, Topology,
};
pub use scenario::{Scenario, ScenarioError};
pub use sim::{SimConfig, SimReport, Simulator, WindowMode};
