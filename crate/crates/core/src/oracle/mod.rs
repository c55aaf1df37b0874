//! Independent checks: exact truncated dynamic programming for the
//! generating functions, and closed-form constants for the reference kernels.

pub mod closed_form;
pub mod dp;

pub use closed_form::{closed_form, ClosedFormCase, Family, MetricConstants};
pub use dp::{
    dp_g_coefficients, dp_hitting_series, dp_hitting_series_all, dp_return_series, dp_truncated_g,
    DpEngine, DpOptions, DpReport, OracleError, TruncatedSeries, DEFAULT_STATE_CAP,
};
