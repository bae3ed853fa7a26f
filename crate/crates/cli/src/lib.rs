//! Library half of the `optoqfi` command-line tool.

pub mod validate;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const MODEL_ERROR: i32 = 3;
}
