use alloc::string::String;

/// Errors raised by the library-generation and evaluation primitives.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no cell above the extraction threshold {0}")]
    EmptyCommonSet(f64),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("library is empty")]
    EmptyLibrary,
    #[error("posterior is identically zero: {0}")]
    ZeroPosterior(String),
    #[error("state graph contains a cycle through state {0}")]
    CyclicStateGraph(usize),
    #[error("td training did not converge after {updates} updates (last sweep max |delta| = {max_delta:e})")]
    NotConverged { updates: u64, max_delta: f64 },
    #[error("space of {cells} cells exceeds the enumeration cap {cap}")]
    TooLarge { cells: usize, cap: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(alloc::format!($($arg)*)) };
}
macro_rules! domain_err {
    ($($arg:tt)*) => { $crate::error::Error::Domain(alloc::format!($($arg)*)) };
}
pub(crate) use config_err;
pub(crate) use domain_err;
