//! Tie-corrected Kendall rank correlation (tau-b).
//!
//! The numerator (concordant minus discordant pairs) is computed exactly in
//! integers via a merge-sort swap count, so the result agrees with the
//! quadratic definitional computation bit for bit. The optional p-value uses
//! the normal approximation with the standard tie-corrected variance.

use crate::error::{Error, Result};

/// Tau plus the normal-approximation test statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauDetail {
    pub tau: f64,
    /// z-score of the concordant-minus-discordant count.
    pub z: f64,
    /// Two-sided p-value under the normal approximation (approximate).
    pub p_value: f64,
}

/// Kendall's tau-b of two equal-length lists.
pub fn tau_b(xs: &[f64], ys: &[f64]) -> Result<f64> {
    tau_b_detailed(xs, ys).map(|d| d.tau)
}

pub fn tau_b_detailed(xs: &[f64], ys: &[f64]) -> Result<TauDetail> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "tau-b needs at least 2 observations".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("tau-b inputs must be finite".into()));
    }

    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    // Tie statistics over x and joint (x, y) ties.
    let mut x_ties = TieStats::default();
    let mut joint_tied_pairs: u128 = 0;
    {
        let mut run = 1u128;
        let mut joint_run = 1u128;
        for i in 1..n {
            if pairs[i].0 == pairs[i - 1].0 {
                run += 1;
                if pairs[i].1 == pairs[i - 1].1 {
                    joint_run += 1;
                } else {
                    joint_tied_pairs += joint_run * (joint_run - 1) / 2;
                    joint_run = 1;
                }
            } else {
                x_ties.add_run(run);
                run = 1;
                joint_tied_pairs += joint_run * (joint_run - 1) / 2;
                joint_run = 1;
            }
        }
        x_ties.add_run(run);
        joint_tied_pairs += joint_run * (joint_run - 1) / 2;
    }

    let swaps = merge_count_swaps(&mut pairs);

    // `pairs` is now sorted by y: collect y tie statistics.
    let mut y_ties = TieStats::default();
    {
        let mut run = 1u128;
        for i in 1..n {
            if pairs[i].1 == pairs[i - 1].1 {
                run += 1;
            } else {
                y_ties.add_run(run);
                run = 1;
            }
        }
        y_ties.add_run(run);
    }

    let n_u = n as u128;
    let total_pairs = n_u * (n_u - 1) / 2;
    let d1 = total_pairs - x_ties.tied_pairs;
    let d2 = total_pairs - y_ties.tied_pairs;
    if d1 == 0 {
        return Err(Error::UndefinedTau("all x values are tied".into()));
    }
    if d2 == 0 {
        return Err(Error::UndefinedTau("all y values are tied".into()));
    }

    let num: i128 = total_pairs as i128 - x_ties.tied_pairs as i128 - y_ties.tied_pairs as i128
        + joint_tied_pairs as i128
        - 2 * swaps as i128;
    let tau = (num as f64 / (d1 as f64 * d2 as f64).sqrt()).clamp(-1.0, 1.0);

    // Tie-corrected variance of the concordant-minus-discordant count.
    let nf = n as f64;
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let v1 = (x_ties.sum_t1 as f64) * (y_ties.sum_t1 as f64) / (2.0 * nf * (nf - 1.0));
    let v2 = if n > 2 {
        (x_ties.sum_t2 as f64) * (y_ties.sum_t2 as f64)
            / (9.0 * nf * (nf - 1.0) * (nf - 2.0))
    } else {
        0.0
    };
    let var = (v0 - x_ties.sum_v as f64 - y_ties.sum_v as f64) / 18.0 + v1 + v2;
    let z = if var > 0.0 {
        num as f64 / var.sqrt()
    } else {
        0.0
    };
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2);

    Ok(TauDetail { tau, z, p_value })
}

#[derive(Default)]
struct TieStats {
    /// sum over tie runs of t*(t-1)/2
    tied_pairs: u128,
    /// sum of t*(t-1)*(2t+5)
    sum_v: u128,
    /// sum of t*(t-1)
    sum_t1: u128,
    /// sum of t*(t-1)*(t-2)
    sum_t2: u128,
}

impl TieStats {
    fn add_run(&mut self, t: u128) {
        self.tied_pairs += t * (t - 1) / 2;
        self.sum_v += t * (t - 1) * (2 * t + 5);
        self.sum_t1 += t * (t - 1);
        self.sum_t2 += t * (t - 1) * (t.saturating_sub(2));
    }
}

// Bottom-up merge sort on the y component, counting how many exchanges a
// bubble sort would need; that count is the number of discordant pairs.
fn merge_count_swaps(pairs: &mut Vec<(f64, f64)>) -> u128 {
    let n = pairs.len();
    let mut swaps: u128 = 0;
    let mut buf: Vec<(f64, f64)> = vec![(0.0, 0.0); n];
    let mut width = 1usize;
    while width < n {
        for start in (0..n).step_by(2 * width) {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut out) = (start, mid, start);
            while i < mid || j < end {
                if i < mid && (j >= end || pairs[i].1 <= pairs[j].1) {
                    buf[out] = pairs[i];
                    i += 1;
                } else {
                    buf[out] = pairs[j];
                    swaps += (mid - i) as u128;
                    j += 1;
                }
                out += 1;
            }
        }
        std::mem::swap(pairs, &mut buf);
        width *= 2;
    }
    swaps
}

// Complementary error function, Numerical Recipes rational approximation;
// fractional error below 1.2e-7, which is plenty for approximate p-values.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Quadratic-time tau-b straight from the definition: the test oracle.
    fn tau_b_quadratic(xs: &[f64], ys: &[f64]) -> Result<f64> {
        let n = xs.len();
        assert_eq!(n, ys.len());
        assert!(n >= 2);
        let mut concordant: i128 = 0;
        let mut discordant: i128 = 0;
        let mut tied_x: u128 = 0;
        let mut tied_y: u128 = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = xs[i].total_cmp(&xs[j]);
                let dy = ys[i].total_cmp(&ys[j]);
                use std::cmp::Ordering::*;
                match (dx, dy) {
                    (Equal, Equal) => {
                        tied_x += 1;
                        tied_y += 1;
                    }
                    (Equal, _) => tied_x += 1,
                    (_, Equal) => tied_y += 1,
                    (a, b) if a == b => concordant += 1,
                    _ => discordant += 1,
                }
            }
        }
        let total = (n as u128) * (n as u128 - 1) / 2;
        let d1 = total - tied_x;
        let d2 = total - tied_y;
        if d1 == 0 || d2 == 0 {
            return Err(Error::UndefinedTau("all values tied".into()));
        }
        Ok((((concordant - discordant) as f64) / (d1 as f64 * d2 as f64).sqrt()).clamp(-1.0, 1.0))
    }

    #[test]
    fn perfect_agreement_and_reversal() {
        assert_eq!(tau_b(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(tau_b(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn self_correlation_is_exactly_one_with_ties() {
        let xs = [0.5, 0.5, 1.0, 2.0, 2.0, 3.0];
        assert_eq!(tau_b(&xs, &xs).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_undefined() {
        assert!(matches!(
            tau_b(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedTau(_))
        ));
        assert!(matches!(
            tau_b(&[1.0, 2.0, 3.0], &[7.0, 7.0, 7.0]),
            Err(Error::UndefinedTau(_))
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            tau_b(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(tau_b(&[1.0], &[1.0]).is_err());
        assert!(tau_b(&[f64::NAN, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn matches_quadratic_oracle_on_random_tied_lists() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for round in 0..100 {
            let n = rng.random_range(2..200);
            // coarse grid so ties are common
            let xs: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..8) as f64) / 4.0)
                .collect();
            let ys: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..8) as f64) / 4.0)
                .collect();
            match (tau_b(&xs, &ys), tau_b_quadratic(&xs, &ys)) {
                (Ok(fast), Ok(slow)) => {
                    assert!(
                        (fast - slow).abs() < 1e-12,
                        "round {round}: {fast} vs {slow}"
                    );
                }
                (Err(Error::UndefinedTau(_)), Err(Error::UndefinedTau(_))) => {}
                (a, b) => panic!("round {round}: mismatch {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..5.0)).collect();
        let ys: Vec<f64> = (0..50).map(|_| rng.random_range(0.1..5.0)).collect();
        let cubed: Vec<f64> = xs.iter().map(|x| x.powi(3)).collect();
        assert_eq!(tau_b(&xs, &ys).unwrap(), tau_b(&cubed, &ys).unwrap());
    }

    #[test]
    fn p_value_small_for_strong_correlation() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let detail = tau_b_detailed(&xs, &xs).unwrap();
        assert_eq!(detail.tau, 1.0);
        assert!(detail.p_value < 1e-4);
        assert!(detail.z > 0.0);
    }
}
