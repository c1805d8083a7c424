mod fixed_pair;
mod solve;
mod sweep;

pub use fixed_pair::{fit_inverse_square, fixed_pair, Fit};
pub use solve::solve;
pub use sweep::{capacity_sweep, qkd_sweep, qkd_problem, ree_sweep, PointRecord, SweepRecord};
