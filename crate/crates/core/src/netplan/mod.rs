//! Multi-user measurement units on an optical switch: pair capacity, port
//! budget, pair scheduling and aggregate network key rate.

mod inventory;
mod mu;
mod network;
mod schedule;

pub use inventory::{CapacityReport, GroupCapacity, MuGroup, MuInventory, MuUnit, PortCheck, PortMode};
pub use mu::{
    max_degree_subgraph, max_pairs_bruteforce, mu_capacity, reference_capacity_note, CapacityNote, MuSpec,
    BRUTEFORCE_MAX_USERS,
};
pub use network::{
    network_rate, operating_point_for_loss, symmetric_network, MuLossModel, NetworkReport, NetworkSetup, PairRate,
};
pub use schedule::{
    normalize_requests, schedule, validate_plan, Assignment, PairingPlan, EXACT_SCHEDULE_MAX_USERS,
};
