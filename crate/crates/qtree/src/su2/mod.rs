//! SU(2) expansion tree: node table, bilinear `(σ, τ)` recursion and exact
//! enumeration of the trajectory ensemble.

pub mod ensemble;
pub mod oracle;
pub mod scan;
pub mod table;

pub use ensemble::{
    enumerate, enumerate_trajectories, enumerate_with, order_parameter_r, step, summarize_z_eta, EnumerateConfig,
    Eta, Group, Trajectory, TrajectoryEnsemble, ZEtaSummary, DEFAULT_BUDGET,
};
pub use oracle::statevector_trajectories;
pub use scan::{depth_series, depth_series_partial, grid_angles, phase_diagram, phase_diagram_points, ScanPoint};
pub use table::{bare_rows, node_apply, node_table, Coefficients, NodeCoefficients, Outcome, SigmaTau, Slot};
