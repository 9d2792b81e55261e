//! CSV emitters. Every file uses `.` decimals, LF line endings and a fixed
//! float format, so equal inputs give byte-equal files.

use std::fmt::Write as _;

use crate::trajectory::GridCell;

/// Shortest round-trip decimal, switching to exponent form outside
/// `1e-6 ≤ |x| < 1e15`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-6..1e15).contains(&a) {
        if x == 0.0 {
            return "0".into();
        }
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub const GRID_HEADER: &str = "omega,phi,rate,kind,convergent";
pub const TRACE_HEADER: &str = "iteration,best_objective,diversity";
pub const DUMP_HEADER: &str = "iteration,particle,dim,x,xm";

pub fn grid_csv(cells: &[GridCell]) -> String {
    let mut s = String::with_capacity(cells.len() * 48);
    s.push_str(GRID_HEADER);
    s.push('\n');
    for c in cells {
        let _ =
            writeln!(s, "{},{},{},{},{}", format_float(c.omega), format_float(c.phi), format_float(c.rate), c.kind.as_str(), c.convergent);
    }
    s
}
