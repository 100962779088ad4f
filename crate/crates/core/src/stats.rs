//! Wilcoxon signed-rank test for paired per-user metric values.

use statrs::distribution::{ContinuousCDF, Normal};

// Exact null distribution is enumerated up to this many non-zero differences.
const EXACT_MAX_N: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedRank {
    /// Sum of ranks of positive differences.
    pub w_plus: f64,
    /// Number of non-zero differences.
    pub n: usize,
    /// Two-sided p-value.
    pub p_value: f64,
    pub exact: bool,
}

/// Two-sided test of `x - y` centred at zero. Zero differences are dropped;
/// tied magnitudes get average ranks. Small tie-free samples use the exact
/// distribution, everything else the normal approximation with tie and
/// continuity corrections.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> SignedRank {
    assert_eq!(x.len(), y.len(), "paired samples must have equal length");
    let mut diffs: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return SignedRank {
            w_plus: 0.0,
            n: 0,
            p_value: 1.0,
            exact: true,
        };
    }
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));

    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        ranks[i..=j].iter_mut().for_each(|r| *r = avg);
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;

    if tie_term == 0.0 && n <= EXACT_MAX_N {
        // counts[s] = number of sign assignments with rank sum s
        let max = n * (n + 1) / 2;
        let mut counts = vec![0f64; max + 1];
        counts[0] = 1.0;
        for r in 1..=n {
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        let total = 2f64.powi(n as i32);
        let w = w_plus.round() as usize;
        let lower = w.min(max - w);
        let tail: f64 = counts[..=lower].iter().sum::<f64>() / total;
        return SignedRank {
            w_plus,
            n,
            p_value: (2.0 * tail).min(1.0),
            exact: true,
        };
    }

    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p_value = if var <= 0.0 {
        1.0
    } else {
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - normal.cdf(z))).min(1.0)
    };
    SignedRank {
        w_plus,
        n,
        p_value,
        exact: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_are_not_significant() {
        let r = wilcoxon_signed_rank(&[0.1, 0.2], &[0.1, 0.2]);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.n, 0);
    }

    #[test]
    fn exact_small_sample() {
        // all five differences positive: P(W+ = 15) = 1/32, two-sided 1/16
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0; 5];
        let r = wilcoxon_signed_rank(&x, &y);
        assert!(r.exact);
        assert_eq!(r.w_plus, 15.0);
        assert!((r.p_value - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn exact_mixed_signs() {
        // d = [1, -2, 3, 4, -5, 6]: W+ = 1+3+4+6 = 14, n = 6
        let x = [1.0, -2.0, 3.0, 4.0, -5.0, 6.0];
        let r = wilcoxon_signed_rank(&x, &[0.0; 6]);
        assert_eq!(r.w_plus, 14.0);
        // P(W+ <= 7) for n=6 by enumeration of the 64 sign patterns
        let mut le = 0;
        for mask in 0u32..64 {
            let s: u32 = (0..6).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).sum();
            if s <= 7 {
                le += 1;
            }
        }
        assert!((r.p_value - 2.0 * le as f64 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn ties_fall_back_to_normal() {
        let x = [1.0, 1.0, 2.0, 2.0, 3.0, 0.5, 0.5, 1.0];
        let r = wilcoxon_signed_rank(&x, &[0.0; 8]);
        assert!(!r.exact);
        assert!(r.p_value < 0.05);
    }
}
