use crate::error::{Error, Result};
use crate::inference::normal_cdf;

/// Average ranks (1-based) of `values`, and the tie-correction sum
/// `Σ (t³ − t)` over tie groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, f64) {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        let t = (j - i) as f64;
        ties += t * t * t - t;
        i = j;
    }
    (ranks, ties)
}

/// Two-sided Wilcoxon–Mann–Whitney rank-sum test by normal approximation,
/// with tie correction and a 0.5 continuity correction. `in_b[i]` puts
/// observation `i` in the second group.
///
/// Returns 1 when all values are equal.
pub fn wilcoxon_test(values: &[f64], in_b: &[bool]) -> Result<f64> {
    if values.len() != in_b.len() {
        return Err(Error::Dimension(format!(
            "{} values for {} group labels",
            values.len(),
            in_b.len()
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("NaN in test data".into()));
    }
    let n2 = in_b.iter().filter(|&&b| b).count();
    let n1 = values.len() - n2;
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidArgument("both groups need at least one observation".into()));
    }
    let (ranks, ties) = average_ranks(values);
    let w: f64 = ranks.iter().zip(in_b).filter(|(_, &b)| !b).map(|(r, _)| r).sum();
    let (n1, n2) = (n1 as f64, n2 as f64);
    let n = n1 + n2;
    let diff = w - n1 * (n + 1.0) / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = (diff - 0.5 * diff.signum()) / var.sqrt();
    Ok((2.0 * normal_cdf(-z.abs())).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_groups() {
        let v = [1.0, 2.0, 3.0, 10.0, 11.0, 12.0];
        let g = [false, false, false, true, true, true];
        let p = wilcoxon_test(&v, &g).unwrap();
        assert!((p - 0.080_855_598_370_052_29).abs() < 1e-12);
    }

    #[test]
    fn identical_values() {
        let p = wilcoxon_test(&[2.0; 6], &[false, true, false, true, false, true]).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn monotone_transform_invariance() {
        let v = [0.3, 1.7, 0.0, 4.2, 4.2, 2.5, 0.9];
        let g = [true, false, false, true, true, false, true];
        let p = wilcoxon_test(&v, &g).unwrap();
        let w: Vec<f64> = v.iter().map(|x| (x + 1.0f64).ln() * 3.0 - 2.0).collect();
        assert_eq!(p, wilcoxon_test(&w, &g).unwrap());
    }

    #[test]
    fn ranks_with_ties() {
        let (r, t) = average_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, 6.0);
    }

    #[test]
    fn needs_two_groups() {
        assert!(wilcoxon_test(&[1.0, 2.0], &[true, true]).is_err());
    }
}
