use std::cmp::Ordering;

use serde::Serialize;

/// Number of points on the false-positive-rate grid `0, 0.01, …, 1`.
pub const ROC_POINTS: usize = 101;

pub fn roc_grid() -> Vec<f64> {
    (0..ROC_POINTS).map(|i| i as f64 / (ROC_POINTS - 1) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateMetrics {
    pub tpr: f64,
    /// False discovery proportion of this replicate.
    pub fdr: f64,
    pub auc: f64,
    /// True positive rate on [`roc_grid`].
    pub roc: Vec<f64>,
    pub rejections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
}

/// Lexicographic ranking key: smaller is more significant.
pub type RankKey = (f64, f64);

fn cmp_key(a: &RankKey, b: &RankKey) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
}

/// TPR and FDR of the rejection set, AUC of the ranking (ties count half),
/// and the ROC curve interpolated on the fixed grid.
///
/// TPR is NaN without positives and AUC is NaN unless both classes occur.
pub fn evaluate(rejected: &[bool], keys: &[RankKey], truth: &[bool]) -> ReplicateMetrics {
    assert_eq!(rejected.len(), truth.len());
    assert_eq!(keys.len(), truth.len());
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    let tp = rejected.iter().zip(truth).filter(|(&r, &t)| r && t).count();
    let fp = rejected.iter().zip(truth).filter(|(&r, &t)| r && !t).count();
    let rejections = tp + fp;
    let tpr = if pos > 0 { tp as f64 / pos as f64 } else { f64::NAN };
    let fdr = fp as f64 / rejections.max(1) as f64;

    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| cmp_key(&keys[a], &keys[b]));
    // ROC vertices after each tie group, and the AUC by the trapezoid rule.
    let mut points = vec![(0.0, 0.0)];
    let (mut tp_run, mut fp_run) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut gp, mut gn) = (0usize, 0usize);
        while j < order.len() && cmp_key(&keys[order[j]], &keys[order[i]]) == Ordering::Equal {
            if truth[order[j]] {
                gp += 1;
            } else {
                gn += 1;
            }
            j += 1;
        }
        area += gn as f64 * (tp_run as f64 + 0.5 * gp as f64);
        tp_run += gp;
        fp_run += gn;
        if pos > 0 && neg > 0 {
            points.push((fp_run as f64 / neg as f64, tp_run as f64 / pos as f64));
        }
        i = j;
    }
    let auc = if pos > 0 && neg > 0 {
        area / (pos as f64 * neg as f64)
    } else {
        f64::NAN
    };
    let roc = if pos > 0 && neg > 0 {
        interpolate_roc(&points)
    } else {
        vec![f64::NAN; ROC_POINTS]
    };
    ReplicateMetrics {
        tpr,
        fdr,
        auc,
        roc,
        rejections,
        true_positives: tp,
        false_positives: fp,
    }
}

/// Linear interpolation of a monotone ROC polyline on the grid; where the
/// curve is vertical the upper value is taken, except at FPR 0 which is
/// pinned to 0 (and FPR 1 to 1).
fn interpolate_roc(points: &[(f64, f64)]) -> Vec<f64> {
    let grid = roc_grid();
    let mut out = Vec::with_capacity(grid.len());
    let mut seg = 0;
    for (g, &x) in grid.iter().enumerate() {
        if g == 0 {
            out.push(0.0);
            continue;
        }
        if g == grid.len() - 1 {
            out.push(1.0);
            continue;
        }
        while seg + 1 < points.len() && points[seg + 1].0 <= x {
            seg += 1;
        }
        let (x0, y0) = points[seg];
        let y = match points.get(seg + 1) {
            Some(&(x1, y1)) if x1 > x0 => y0 + (y1 - y0) * (x - x0) / (x1 - x0),
            _ => y0,
        };
        out.push(y);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn keys(v: &[f64]) -> Vec<RankKey> {
        v.iter().map(|&x| (x, 0.0)).collect()
    }

    #[test]
    fn perfect_ranking() {
        let truth = [true, true, false, false, false];
        let m = evaluate(&[true, true, false, false, false], &keys(&[0.1, 0.2, 0.5, 0.6, 0.9]), &truth);
        assert_eq!(m.auc, 1.0);
        assert_eq!(m.tpr, 1.0);
        assert_eq!(m.fdr, 0.0);
        assert_eq!(m.roc[0], 0.0);
        assert!(m.roc[1..].iter().all(|&y| y == 1.0));
    }

    #[test]
    fn auc_matches_pair_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.random_range(2..15);
            let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
            // Coarse values to force ties.
            let k: Vec<RankKey> = (0..n)
                .map(|_| (rng.random_range(0..4) as f64, rng.random_range(0..2) as f64))
                .collect();
            let m = evaluate(&vec![false; n], &k, &truth);
            let (mut conc, mut pairs) = (0.0, 0.0);
            for i in (0..n).filter(|&i| truth[i]) {
                for j in (0..n).filter(|&j| !truth[j]) {
                    pairs += 1.0;
                    conc += match cmp_key(&k[i], &k[j]) {
                        Ordering::Less => 1.0,
                        Ordering::Equal => 0.5,
                        Ordering::Greater => 0.0,
                    };
                }
            }
            if pairs == 0.0 {
                assert!(m.auc.is_nan());
            } else {
                assert!((m.auc - conc / pairs).abs() < 1e-12);
                assert!(m.roc.windows(2).all(|w| w[1] >= w[0]));
                assert_eq!((m.roc[0], m.roc[100]), (0.0, 1.0));
            }
        }
    }

    #[test]
    fn random_scores_give_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 4000;
        let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let k: Vec<RankKey> = (0..n).map(|_| (rng.random(), 0.0)).collect();
        let m = evaluate(&vec![false; n], &k, &truth);
        assert!((m.auc - 0.5).abs() < 0.03);
    }

    #[test]
    fn counts_add_up() {
        let truth = [true, false, true, false];
        let m = evaluate(&[true, true, false, false], &keys(&[0.0; 4]), &truth);
        assert_eq!(m.rejections, m.true_positives + m.false_positives);
        assert_eq!((m.tpr, m.fdr, m.auc), (0.5, 0.5, 0.5));
    }
}
