use std::fmt;

use odg_core::Error;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_PERMUTATION: i32 = 5;
pub const EXIT_SYMMETRY_TOO_LARGE: i32 = 6;
pub const EXIT_ORACLE_TOO_LARGE: i32 = 7;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Default mapping; `TooLarge` is command specific and handled by callers.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::MalformedInput(_)
            | Error::NotAContrast { .. }
            | Error::ZeroRow { .. }
            | Error::InvalidGraph(_)
            | Error::InvalidCriterion(_) => EXIT_PARSE,
            Error::InfeasibleDesign(_) | Error::InfeasibleStart(_) => EXIT_INFEASIBLE,
            Error::NotConverged(_) => EXIT_NOT_CONVERGED,
            Error::InvalidPermutation(_) | Error::NotInvariant => EXIT_PERMUTATION,
            _ => EXIT_OTHER,
        };
        Failure::new(code, e.to_string())
    }
}
