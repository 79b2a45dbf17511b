use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PamResult {
    pub medoids: Vec<usize>,
    /// Cluster index (position in `medoids`) of every point.
    pub assignment: Vec<usize>,
    /// Sum of distances to the assigned medoid.
    pub cost: f64,
    /// Cost after BUILD, then after each accepted swap.
    pub history: Vec<f64>,
}

impl PamResult {
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.medoids.len()];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn assign(d: &DMatrix<f64>, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut cost = 0.0;
    let assignment = (0..d.nrows())
        .map(|i| {
            let (best, dist) = medoids
                .iter()
                .enumerate()
                .map(|(c, &med)| (c, d[(i, med)]))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            cost += dist;
            best
        })
        .collect();
    (assignment, cost)
}

fn total_cost(d: &DMatrix<f64>, medoids: &[usize]) -> f64 {
    (0..d.nrows())
        .map(|i| medoids.iter().map(|&m| d[(i, m)]).fold(f64::INFINITY, f64::min))
        .sum()
}

/// k-medoids by BUILD then SWAP (steepest descent over all medoid /
/// non-medoid exchanges). Deterministic: ties resolve to the lowest index.
pub fn pam_cluster(d: &DMatrix<f64>, k: usize) -> Result<PamResult> {
    let m = d.nrows();
    if d.ncols() != m {
        return Err(Error::Dimension("distance matrix must be square".into()));
    }
    if k < 2 || k >= m {
        return Err(Error::InvalidArgument(format!("need 2 <= k < {m}, got k = {k}")));
    }
    let scale = d.amax().max(f64::MIN_POSITIVE);
    for i in 0..m {
        if d[(i, i)] != 0.0 {
            return Err(Error::InvalidArgument("distance matrix needs a zero diagonal".into()));
        }
        for j in 0..i {
            if (d[(i, j)] - d[(j, i)]).abs() > 1e-9 * scale || d[(i, j)] < 0.0 {
                return Err(Error::InvalidArgument("distance matrix must be symmetric and nonnegative".into()));
            }
        }
    }

    // BUILD: start from the most central point, then add the point that
    // lowers the cost most.
    let first = (0..m)
        .map(|i| (i, d.row(i).sum()))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
        .0;
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = (0..m).map(|i| d[(i, first)]).collect();
    while medoids.len() < k {
        let mut best = (usize::MAX, -1.0);
        for cand in (0..m).filter(|c| !medoids.contains(c)) {
            let gain: f64 = (0..m).map(|i| (nearest[i] - d[(i, cand)]).max(0.0)).sum();
            if gain > best.1 {
                best = (cand, gain);
            }
        }
        medoids.push(best.0);
        for i in 0..m {
            nearest[i] = nearest[i].min(d[(i, best.0)]);
        }
    }

    let mut cost = total_cost(d, &medoids);
    let mut history = vec![cost];
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for slot in 0..k {
            for cand in (0..m).filter(|c| !medoids.contains(c)) {
                let mut trial = medoids.clone();
                trial[slot] = cand;
                let c = total_cost(d, &trial);
                if best.is_none_or(|b| c < b.2) {
                    best = Some((slot, cand, c));
                }
            }
        }
        match best {
            Some((slot, cand, c)) if c < cost - 1e-12 * cost.max(1.0) => {
                medoids[slot] = cand;
                cost = c;
                history.push(cost);
            }
            _ => break,
        }
    }
    let (assignment, cost) = assign(d, &medoids);
    Ok(PamResult {
        medoids,
        assignment,
        cost,
        history,
    })
}
