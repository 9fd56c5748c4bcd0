//! CSV text helpers. Output is locale independent: `.` decimal separator, LF
//! line endings, 17 significant digits.

use std::fmt::Write as _;

use crate::noise::TimeGrid;

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `header` then one row per grid point: `t` followed by one value per column.
pub fn grid_csv(header: &str, grid: &TimeGrid, columns: &[&[f64]]) -> String {
    let mut out = String::with_capacity(64 * (grid.n_steps() + 2));
    out.push_str(header);
    out.push('\n');
    for k in 0..=grid.n_steps() {
        out.push_str(&fmt_num(grid.time(k)));
        for col in columns {
            let _ = write!(out, ",{}", fmt_num(col[k]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, 0.0] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert!(digits >= 15);
        }
    }
}
