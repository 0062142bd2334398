use crate::error::{Error, Result};

/// The golden section ratio.
pub const PHI: f64 = 1.618_033_988_749_895;

/// Golden-section line search for a minimum of `f` on `[lo, hi]`.
///
/// Each iteration evaluates both interior points `l = a + d/PHI` and
/// `u = b - d/PHI` and keeps the sub-interval around the lower value; equal
/// values keep the left part. Stops once the bracket is narrower than `tol` or
/// after `max_iter` iterations, then returns whichever end of the final
/// bracket evaluates lower (the left end on ties).
pub fn golden_search<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo < hi) {
        return Err(Error::invalid(format!(
            "golden search needs lo < hi, got [{lo}, {hi}]"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut d = b - a;
    let mut l = a + d / PHI;
    let mut u = b - d / PHI;
    for _ in 0..max_iter {
        if f(u) <= f(l) {
            b = l;
        } else {
            a = u;
        }
        d = b - a;
        l = a + d / PHI;
        u = b - d / PHI;
        if (b - a).abs() < tol {
            break;
        }
    }
    Ok(if f(a) <= f(b) { a } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_value() {
        assert_eq!(PHI, (1.0 + 5f64.sqrt()) / 2.0);
        assert!((PHI - 1.618_033_988_7).abs() < 1e-10);
    }

    #[test]
    fn quadratic_vertex() {
        let x = golden_search(|x| (x - 2.0).powi(2), 0.0, 5.0, 1e-6, 200).unwrap();
        assert!((x - 2.0).abs() < 1e-5, "{x}");
    }

    #[test]
    fn monotone_function_goes_to_left_end() {
        let tol = 1e-6;
        let x = golden_search(|x| x.exp(), 0.0, 1.0, tol, 200).unwrap();
        assert!(x.abs() <= tol);
        let y = golden_search(|x| -x, 0.0, 1.0, tol, 200).unwrap();
        assert!((y - 1.0).abs() <= tol);
    }

    #[test]
    fn flat_right_tail_does_not_hide_the_minimum() {
        // Step function: minimum plateau on [1, 2), constant from 3 on.
        let f = |x: f64| {
            if x < 1.0 {
                2.0
            } else if x < 2.0 {
                0.5
            } else if x < 3.0 {
                1.0
            } else {
                1.5
            }
        };
        let x = golden_search(f, 0.0, 40.0, 1e-6, 200).unwrap();
        assert_eq!(f(x), 0.5);
    }

    #[test]
    fn iteration_cap_and_arguments() {
        let mut calls = 0;
        golden_search(
            |x| {
                calls += 1;
                x * x
            },
            -1.0,
            1.0,
            1e-12,
            3,
        )
        .unwrap();
        // Two evaluations per iteration plus the final comparison.
        assert_eq!(calls, 3 * 2 + 2);
        assert!(golden_search(|x| x, 1.0, 1.0, 1e-3, 10).is_err());
        assert!(golden_search(|x| x, 2.0, 1.0, 1e-3, 10).is_err());
        assert!(golden_search(|x| x, 0.0, 1.0, 0.0, 10).is_err());
    }
}
