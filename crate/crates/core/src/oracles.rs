//! Reference computations used to check the integrators. None of them call
//! into [`crate::schemes`]; each follows a different route to the same value.

/// Discrete Skorokhod map of `y0 + scale·W_k` on `[0, ∞)`:
/// `Y_k = y0 + scale·W_k + max(0, max_{j≤k}(-y0 - scale·W_j))`.
///
/// `cumulative` holds `W_0 = 0, W_1, ..., W_n`.
pub fn skorokhod_map(y0: f64, scale: f64, cumulative: &[f64]) -> Vec<f64> {
    let mut regulator = 0.0_f64;
    cumulative
        .iter()
        .map(|w| {
            let free = y0 + scale * w;
            regulator = regulator.max(-free);
            free + regulator
        })
        .collect()
}

/// Running regulator `max(0, max_{j≤k}(-y0 - scale·W_j))` of [`skorokhod_map`].
pub fn skorokhod_regulator(y0: f64, scale: f64, cumulative: &[f64]) -> Vec<f64> {
    let mut regulator = 0.0_f64;
    cumulative
        .iter()
        .map(|w| {
            regulator = regulator.max(-(y0 + scale * w));
            regulator
        })
        .collect()
}

/// Nonnegative root of `lead·y² - beta·y - constant = 0` (`lead > 0`,
/// `constant >= 0`) by bisection to machine precision.
pub fn bisect_quadratic_root(lead: f64, beta: f64, constant: f64) -> f64 {
    let f = |y: f64| lead * y * y - beta * y - constant;
    let mut lo = 0.0_f64;
    let mut hi = (beta.abs() + constant.sqrt() + 1.0) / lead.min(1.0);
    debug_assert!(f(hi) > 0.0);
    if f(lo) >= 0.0 {
        return 0.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean of the CIR process: solution of `m' = a - b·m`, `m(0) = x0`.
pub fn cir_mean(x0: f64, a: f64, b: f64, t: f64) -> f64 {
    if b == 0.0 {
        return x0 + a * t;
    }
    a / b + (x0 - a / b) * (-b * t).exp()
}

/// Mean of the OU process `dU = -(b/2)U dt + (σ/2)dB`.
pub fn ou_mean(u0: f64, b: f64, t: f64) -> f64 {
    u0 * (-0.5 * b * t).exp()
}

/// Sample mean and its standard error.
pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skorokhod_by_hand() {
        // y0 = 1, W = [0, -2, -3, 1]: free path 1, -1, -2, 2.
        let y = skorokhod_map(1.0, 1.0, &[0.0, -2.0, -3.0, 1.0]);
        assert_eq!(y, vec![1.0, 0.0, 0.0, 4.0]);
        assert_eq!(skorokhod_regulator(1.0, 1.0, &[0.0, -2.0, -3.0, 1.0]), vec![0.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn bisection_matches_closed_form() {
        let r = bisect_quadratic_root(2.0, 1.0, 1.0);
        assert!((r - 1.0).abs() < 1e-15);
        assert_eq!(bisect_quadratic_root(1.0, -1.0, 0.0), 0.0);
    }

    #[test]
    fn means() {
        assert!((cir_mean(1.0, 0.25, 1.0, 1.0) - 0.525_909_580_878_581_7).abs() < 1e-15);
        assert!((ou_mean(1.0, 1.0, 1.0) - 0.606_530_659_712_633_4).abs() < 1e-15);
    }
}
