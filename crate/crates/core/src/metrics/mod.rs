//! Metric catalog and evaluation.

mod base;
mod catalog;
pub mod eigen;
mod eval;

pub use base::{
    degree_centrality, fan, loc_metrics, mccabe, nesting_depth, stat_product, unit_weight, vp_counts, LocMetrics,
    VpCounts,
};
pub use catalog::{
    catalog, expand_variations, matches, Agg, DepthAgg, Direction, LocKind, Metric, Mode, SelectionError, Stat,
    Variation, VpKind, Weight,
};
pub use eigen::EigenParams;
pub use eval::{compute_row, Facts, Model};

/// Renders a value: whole numbers without a decimal point, reals with at
/// most six fractional digits.
pub fn format_value(v: f64, integral: bool) -> String {
    if integral && v.fract() == 0.0 && v.abs() < 9.0e15 {
        return format!("{}", v as i64);
    }
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}
