use super::normal::{normal_cdf, normal_quantile};

/// Outcome of the debiased-lasso FDR threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdrThreshold {
    pub t_star: f64,
    pub t_max: f64,
    /// True when no threshold in `[0, t_max]` met the bound and `sqrt(2 log m)` was used.
    pub fallback: bool,
}

impl FdrThreshold {
    /// `Φ(-t★)`, the one-sided p-value level matching the threshold.
    pub fn p_level(&self) -> f64 {
        normal_cdf(-self.t_star)
    }
}

/// `sqrt(2 log m - 2 log log m)`, floored at zero (and zero for m < 2).
pub fn t_max(m: usize) -> f64 {
    if m < 2 {
        return 0.0;
    }
    let lm = (m as f64).ln();
    (2.0 * lm - 2.0 * lm.ln()).max(0.0).sqrt()
}

/// Smallest `t` with `2m (1 - Φ(t)) <= level · max(r, 1)`, where `r` is the
/// number of rejections at `t`.
pub fn quantile_for_rejections(r: usize, m: usize, level: f64) -> f64 {
    normal_quantile(1.0 - level * r.max(1) as f64 / (2.0 * m as f64))
}

/// `t★ = inf { 0 <= t <= t_max : 2m(1 - Φ(t)) / (R(t) ∨ 1) <= level }` with
/// `R(t) = #{i : t_i <= -t}`, falling back to `sqrt(2 log m)` when empty.
///
/// On the stretch where `R` equals `r` the bound holds from the quantile
/// `q_r` onward, so the infimum is the smallest `max(lower end, q_r)` that
/// still lies inside its stretch.
pub fn fdr_threshold(t_scores: &[f64], level: f64) -> FdrThreshold {
    let m = t_scores.len();
    let t_max = t_max(m);
    // Descending order of -t_i; stretch r is (a[r], a[r-1]] in 0-based terms.
    let mut a: Vec<f64> = t_scores.iter().map(|&t| -t).collect();
    a.sort_by(|x, y| y.total_cmp(x));

    let mut best = f64::INFINITY;
    for r in 0..=m {
        let upper = if r == 0 { f64::INFINITY } else { a[r - 1] };
        let lower = if r == m { f64::NEG_INFINITY } else { a[r] };
        let hi = upper.min(t_max);
        let lo = lower.max(0.0);
        if lo > hi {
            continue;
        }
        let c = lo.max(quantile_for_rejections(r, m, level));
        if c <= hi && c < best {
            best = c;
        }
    }
    if best.is_finite() {
        FdrThreshold {
            t_star: best,
            t_max,
            fallback: false,
        }
    } else {
        FdrThreshold {
            t_star: (2.0 * (m.max(1) as f64).ln()).sqrt(),
            t_max,
            fallback: true,
        }
    }
}

/// Benjamini–Hochberg step-up adjusted p-values.
pub fn bh_adjust(p: &[f64]) -> Vec<f64> {
    step_up(p, 1.0)
}

/// Benjamini–Yekutieli adjustment: BH scaled by the harmonic number `H_m`.
pub fn by_adjust(p: &[f64]) -> Vec<f64> {
    let h: f64 = (1..=p.len()).map(|k| 1.0 / k as f64).sum();
    step_up(p, h)
}

fn step_up(p: &[f64], factor: f64) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]));
    let mut q = vec![0.0; m];
    let mut running = f64::INFINITY;
    for (rank, &i) in order.iter().enumerate().rev() {
        let candidate = p[i] * m as f64 * factor / (rank + 1) as f64;
        running = running.min(candidate);
        q[i] = running.min(1.0);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_scores_fall_back() {
        let th = fdr_threshold(&[0.0; 40], 0.05);
        assert!(th.fallback);
        assert_eq!(th.t_star, (2.0 * 40f64.ln()).sqrt());
    }

    #[test]
    fn half_strong_half_null() {
        let mut t = vec![-10.0; 50];
        t.extend(vec![0.0; 50]);
        let th = fdr_threshold(&t, 0.05);
        assert!(!th.fallback);
        assert!((th.t_star - 2.241_402_727_604_945).abs() < 1e-9);
        assert!((th.t_max - 2.481_124_970_726_057_7).abs() < 1e-12);
    }

    #[test]
    fn t_max_small_m() {
        assert_eq!(t_max(1), 0.0);
        for m in 2..20 {
            assert!(t_max(m) > 0.0);
        }
    }

    #[test]
    fn bh_reference() {
        let q = bh_adjust(&[0.01, 0.02, 0.03, 0.04]);
        for v in q {
            assert!((v - 0.04).abs() < 1e-15);
        }
        assert_eq!(bh_adjust(&[0.3]), vec![0.3]);
        assert_eq!(by_adjust(&[0.3]), vec![0.3]);
        assert_eq!(bh_adjust(&[]), Vec::<f64>::new());
    }

    #[test]
    fn bh_caps_at_one() {
        let q = bh_adjust(&[0.9, 0.95, 0.99]);
        assert!(q.iter().all(|&v| v <= 1.0));
        let q = by_adjust(&[0.5, 0.6]);
        assert!(q.iter().all(|&v| (v - 0.9).abs() < 1e-15));
    }
}
