//! Exact two-level simulation with systematic-error injection.

pub mod control;
pub mod propagate;
pub mod scan;
pub mod state;

pub use control::{mhz_to_rad_per_s, ControlField, ErrorPair, PulseSequence};
pub use propagate::{evolve_final, evolve_pulse, final_population, propagate_step, step_unitary};
pub use scan::{relative_grid, scan_robustness, GridAxis, ScanRow, ScanTable};
pub use state::{bloch_vector, population_excited, BlochVector, CMat2, DensityMatrix};
