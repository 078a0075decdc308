//! Error laboratory: strong and weak error estimation, rate regression, the
//! taming comparison and a histogram total-variation proxy.

mod rate;
mod strong;
mod taming;
mod tv;
mod weak;

pub use rate::{fit_rate, RateFit, RateReport, EXACT_THRESHOLD};
pub use strong::{lm_norm_with_bootstrap, strong_error, ReferenceKind, StrongErrorConfig, BOOTSTRAP_RESAMPLES};
pub use taming::{taming_demo, TamingConfig, TamingReport, DEFAULT_TAMING_HORIZON};
pub use tv::{histogram_tv, tv_proxy, HistogramTv, TvConfig, TvReport};
pub use weak::{weak_error, TestFunction, TestFunctionSet, WeakErrorConfig, WeakReport, WeakTimeReport};
