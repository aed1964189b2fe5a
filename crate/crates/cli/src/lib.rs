//! Command implementations behind the `fsi` binary.

pub mod commands;
pub mod summary;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const REFUTED: i32 = 1;
    pub const MAP_DEGENERATE: i32 = 2;
    pub const SOLVER_FAILURE: i32 = 3;
    pub const INVALID_INPUT: i32 = 4;
}
