//! Debiasing of a scaled-lasso fit, by a nodewise score system or by an
//! approximate column-wise inverse of the Gram matrix.
//!
//! Both constructions are stored in one form: for every coefficient a vector
//! `s̃_j` of length `m` and a denominator `d_j`, so that the corrected estimate
//! is `Δ̂_j + ⟨s̃_j, y − XΔ̂⟩ / d_j` and the covariance is
//! `σ̂² ⟨s̃_i, s̃_j⟩ / (d_i d_j)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{normal_cdf, normal_quantile};
use crate::solver::{lasso, newton_direction, sign_cut, ShiftFit, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DebiasMethod {
    /// Nodewise-lasso residuals.
    Ss,
    /// Approximate inverse columns of `XᵀX/m`.
    Ci,
}

impl DebiasMethod {
    pub fn tag(self) -> &'static str {
        match self {
            DebiasMethod::Ss => "ss",
            DebiasMethod::Ci => "ci",
        }
    }
}

impl std::str::FromStr for DebiasMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(DebiasMethod::Ss),
            "ci" => Ok(DebiasMethod::Ci),
            other => Err(Error::InvalidArgument(format!("unknown debias method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScoreSystem {
    pub method: DebiasMethod,
    /// Column `j` is `s̃_j`.
    pub scores: DMatrix<f64>,
    /// `d_j`: `⟨s_j, x_j⟩` for SS, 1 for CI.
    pub denom: DVector<f64>,
    /// Coordinates that cannot be debiased (`d_j` numerically zero, or a CI
    /// column with no admissible solution). They keep their initial estimate
    /// and get zero variance.
    pub flagged: Vec<bool>,
    /// CI only: the slack actually used.
    pub gamma: Option<f64>,
    /// CI only: the raw solutions `s_j` (columns), in coefficient space.
    pub inverse: Option<DMatrix<f64>>,
}

impl ScoreSystem {
    pub fn n_coef(&self) -> usize {
        self.scores.ncols()
    }

    pub fn n_flagged(&self) -> usize {
        self.flagged.iter().filter(|&&f| f).count()
    }
}

/// `|⟨s_j, x_j⟩|` below this fraction of `‖x_j‖²` flags the coordinate.
const DEGENERATE_RATIO: f64 = 1e-8;

/// Default nodewise penalty for column `j`, in the `1/(2m)` loss scaling:
/// `√(2 log n / m) · ‖x_j‖ / √m`.
pub fn default_lambda_node(x: &DMatrix<f64>, j: usize) -> f64 {
    let (m, n) = x.shape();
    let m = m as f64;
    (2.0 * (n.max(2) as f64).ln() / m).sqrt() * x.column(j).norm() / m.sqrt()
}

/// Score system from nodewise lasso regressions of each column on the others.
///
/// `lambda_node` overrides the default penalty (same value for every column,
/// `1/(2m)` loss scaling).
pub fn score_system_ss(x: &DMatrix<f64>, lambda_node: Option<f64>) -> Result<ScoreSystem> {
    let (m, n) = x.shape();
    if let Some(l) = lambda_node {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(format!("nodewise penalty must be positive, got {l}")));
        }
    }
    let opts = SolverOptions::default();
    let columns: Vec<Result<DVector<f64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let xj: DVector<f64> = x.column(j).into_owned();
            if n == 1 {
                return Ok(xj);
            }
            let rest = x.clone().remove_column(j);
            let lam = lambda_node.unwrap_or_else(|| default_lambda_node(x, j));
            let fit = lasso(&rest, &xj, m as f64 * lam, &opts)?;
            Ok(xj - rest * fit.delta)
        })
        .collect();
    let mut scores = DMatrix::zeros(m, n);
    let mut denom = DVector::zeros(n);
    let mut flagged = vec![false; n];
    for (j, col) in columns.into_iter().enumerate() {
        let s = col?;
        let d = s.dot(&x.column(j));
        let xx = x.column(j).norm_squared();
        flagged[j] = d.abs() <= DEGENERATE_RATIO * xx || xx == 0.0;
        scores.set_column(j, &s);
        denom[j] = d;
    }
    Ok(ScoreSystem {
        method: DebiasMethod::Ss,
        scores,
        denom,
        flagged,
        gamma: None,
        inverse: None,
    })
}

/// Starting slack for the column-wise inverse when none is given.
pub const DEFAULT_GAMMA: f64 = 0.05;
const MAX_GAMMA_DOUBLINGS: usize = 30;

/// Column-wise inverse: for each `j`, `s_j = argmin sᵀΣ̂s` subject to
/// `‖Σ̂s − e_j‖∞ ≤ γ`, with `Σ̂ = XᵀX/m`.
///
/// Each column is obtained from the penalised form
/// `min ½βᵀΣ̂β − β_j + γ‖β‖₁`, whose minimiser satisfies the constraint with
/// the smallest quadratic form. When that problem is unbounded for some `j`
/// (no admissible `s_j`), `γ` is doubled and every column recomputed; the
/// value used is reported.
pub fn score_system_ci(x: &DMatrix<f64>, gamma: f64) -> Result<ScoreSystem> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {gamma}")));
    }
    let (m, n) = x.shape();
    let gram = x.transpose() * x / m as f64;
    let null = null_projector(&gram);
    let mut gamma = gamma;
    for _ in 0..=MAX_GAMMA_DOUBLINGS {
        let cols: Vec<Option<DVector<f64>>> = (0..n)
            .into_par_iter()
            .map(|j| inverse_column(&gram, &null, j, gamma))
            .collect();
        if cols.iter().all(Option::is_some) {
            let mut inverse = DMatrix::zeros(n, n);
            for (j, c) in cols.into_iter().enumerate() {
                inverse.set_column(j, &c.expect("checked above"));
            }
            if gamma > 0.0 {
                log::debug!("column-wise inverse feasible at gamma = {gamma}");
            }
            let scores = x * &inverse / m as f64;
            let flagged = (0..n).map(|j| gram[(j, j)] == 0.0).collect();
            return Ok(ScoreSystem {
                method: DebiasMethod::Ci,
                scores,
                denom: DVector::from_element(n, 1.0),
                flagged,
                gamma: Some(gamma),
                inverse: Some(inverse),
            });
        }
        gamma = if gamma == 0.0 { DEFAULT_GAMMA } else { 2.0 * gamma };
    }
    Err(Error::InvalidArgument(format!(
        "no admissible column-wise inverse up to gamma = {gamma}"
    )))
}

/// Orthogonal projector onto the null space of the symmetric `gram`.
fn null_projector(gram: &DMatrix<f64>) -> DMatrix<f64> {
    let n = gram.ncols();
    let eig = gram.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let mut p = DMatrix::zeros(n, n);
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= 1e-10 * top {
            let v = eig.eigenvectors.column(i);
            p += &v * v.transpose();
        }
    }
    p
}

/// A null direction `u` of the Gram matrix with `u_j > γ‖u‖₁` makes the
/// objective unbounded below.
fn unbounded_along(u: &DVector<f64>, j: usize, gamma: f64) -> bool {
    let norm = u.lp_norm(1);
    norm > 0.0 && u[j] > gamma * norm * (1.0 + 1e-9)
}

/// Coordinate descent on `½βᵀGβ − β_j + γ‖β‖₁`, with a Newton step on the
/// current support every few sweeps. `None` when the objective is unbounded
/// below (certified by the null-space part of the iterate) or the iterates
/// fail to settle.
fn inverse_column(gram: &DMatrix<f64>, null: &DMatrix<f64>, j: usize, gamma: f64) -> Option<DVector<f64>> {
    const TOL: f64 = 1e-10;
    const MAX_SWEEPS: usize = 20_000;
    const BLOW_UP: f64 = 1e8;
    const NEWTON_EVERY: usize = 10;
    let n = gram.ncols();
    let rank = n - null.trace().round() as usize;
    if unbounded_along(&null.column(j).into_owned(), j, gamma) {
        return None;
    }
    let objective = |b: &DVector<f64>| 0.5 * b.dot(&(gram * b)) - b[j] + gamma * b.lp_norm(1);
    let mut beta = DVector::<f64>::zeros(n);
    // g = Gβ, kept incrementally.
    let mut g = DVector::<f64>::zeros(n);
    for sweep in 0..MAX_SWEEPS {
        if sweep % NEWTON_EVERY == NEWTON_EVERY - 1 {
            let support: Vec<usize> = (0..n).filter(|&k| beta[k] != 0.0).collect();
            if !support.is_empty() {
                let grad = DVector::from_iterator(
                    support.len(),
                    support.iter().map(|&k| f64::from(u8::from(k == j)) - g[k] - gamma * beta[k].signum()),
                );
                let hess = gram.select_rows(&support).select_columns(&support);
                let dir = newton_direction(&hess, &grad, None, rank);
                let (step, blocking) = sign_cut(&beta, &support, &dir);
                let mut next = beta.clone();
                for (i, &k) in support.iter().enumerate() {
                    next[k] += step * dir[i];
                }
                if let Some(k) = blocking {
                    next[k] = 0.0;
                }
                if objective(&next) < objective(&beta) {
                    beta = next;
                    g = gram * &beta;
                }
            }
        }
        let mut max_change: f64 = 0.0;
        for k in 0..n {
            let gkk = gram[(k, k)];
            if gkk <= 0.0 {
                continue;
            }
            let target = f64::from(u8::from(k == j)) - (g[k] - gkk * beta[k]);
            let new = if target > gamma {
                (target - gamma) / gkk
            } else if target < -gamma {
                (target + gamma) / gkk
            } else {
                0.0
            };
            let d = new - beta[k];
            if d != 0.0 {
                beta[k] = new;
                g.axpy(d, &gram.column(k), 1.0);
                max_change = max_change.max(d.abs());
            }
        }
        if !beta.iter().all(|b| b.is_finite()) || beta.amax() > BLOW_UP {
            return None;
        }
        if max_change < TOL * beta.amax().max(1.0) {
            return Some(beta);
        }
        if sweep % 100 == 99 {
            g = gram * &beta;
            if unbounded_along(&(null * &beta), j, gamma) {
                return None;
            }
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct DebiasedFit {
    pub delta: DVector<f64>,
    /// Covariance of `delta`.
    pub v: DMatrix<f64>,
    pub sigma: f64,
    /// `μ̂ = TΔ̂`.
    pub mu_hat: DVector<f64>,
    /// `√(t_iᵀ V t_i)` per leaf.
    pub leaf_sd: DVector<f64>,
    pub t_scores: DVector<f64>,
    /// `Φ(t_i)`.
    pub p_ss: DVector<f64>,
    pub flagged: Vec<bool>,
    /// Leaves whose mean has zero estimated variance; their t-score is set to 0.
    pub degenerate_leaves: usize,
}

/// Applies the score-system correction to `fit` (which must carry `σ̂`) and
/// derives leaf t-scores and one-sided p-values through `T`.
pub fn debias(
    fit: &ShiftFit,
    system: &ScoreSystem,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    t: &DMatrix<f64>,
) -> Result<DebiasedFit> {
    let (m, n) = x.shape();
    if system.n_coef() != n || system.scores.nrows() != m || fit.delta.len() != n {
        return Err(Error::Dimension("score system does not match the design".into()));
    }
    if y.len() != m || t.ncols() != n {
        return Err(Error::Dimension("response or mean map does not match the design".into()));
    }
    let sigma = fit
        .sigma
        .ok_or_else(|| Error::InvalidArgument("debiasing needs a fit with a noise scale".into()))?;

    let residual = y - x * &fit.delta;
    let correction = system.scores.transpose() * &residual;
    // Scaled scores s̃_j / d_j, zeroed on flagged coordinates.
    let mut w = system.scores.clone();
    let mut delta = fit.delta.clone();
    for j in 0..n {
        if system.flagged[j] {
            w.column_mut(j).fill(0.0);
        } else {
            let d = system.denom[j];
            w.column_mut(j).scale_mut(1.0 / d);
            delta[j] += correction[j] / d;
        }
    }
    let mut v = w.transpose() * &w * (sigma * sigma);
    // Exact symmetry.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (v[(i, j)] + v[(j, i)]);
            v[(i, j)] = avg;
            v[(j, i)] = avg;
        }
    }

    let mu_hat = t * &delta;
    // t_iᵀ V t_i = σ̂² ‖W t_iᵀ‖², computed without forming V t.
    let wt = &w * t.transpose();
    let mut leaf_sd = DVector::zeros(t.nrows());
    let mut t_scores = DVector::zeros(t.nrows());
    let mut degenerate = 0;
    for i in 0..t.nrows() {
        let sd = sigma * wt.column(i).norm();
        leaf_sd[i] = sd;
        t_scores[i] = if sd > 0.0 {
            mu_hat[i] / sd
        } else {
            degenerate += 1;
            0.0
        };
    }
    let p_ss = t_scores.map(normal_cdf);
    Ok(DebiasedFit {
        delta,
        v,
        sigma,
        mu_hat,
        leaf_sd,
        t_scores,
        p_ss,
        flagged: system.flagged.clone(),
        degenerate_leaves: degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceIntervals {
    pub level: f64,
    /// Two-sided intervals for each shift.
    pub shifts: Vec<(f64, f64)>,
    /// Upper ends of the one-sided intervals `(-∞, u_i]` for each leaf mean.
    pub leaf_upper: Vec<f64>,
}

/// Intervals at level `1 − level`: `Δ̂_j ± √v_jj Φ⁻¹(1 − level/2)` and
/// `μ_i ≤ μ̂_i + sd_i Φ⁻¹(1 − level)`.
pub fn confidence_intervals(fit: &DebiasedFit, level: f64) -> Result<ConfidenceIntervals> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0, 1), got {level}")));
    }
    let two = normal_quantile(1.0 - level / 2.0);
    let one = normal_quantile(1.0 - level);
    let shifts = (0..fit.delta.len())
        .map(|j| {
            let half = fit.v[(j, j)].max(0.0).sqrt() * two;
            (fit.delta[j] - half, fit.delta[j] + half)
        })
        .collect();
    let leaf_upper = fit
        .mu_hat
        .iter()
        .zip(fit.leaf_sd.iter())
        .map(|(mu, sd)| mu + sd * one)
        .collect();
    Ok(ConfidenceIntervals {
        level,
        shifts,
        leaf_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthogonal_design() -> DMatrix<f64> {
        // Columns of a scaled Hadamard block: mutually orthogonal.
        DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0],
        )
    }

    fn random_design(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn ss_orthogonal_columns_are_their_own_scores() {
        let x = orthogonal_design();
        let ss = score_system_ss(&x, None).unwrap();
        assert!((&ss.scores - &x).amax() < 1e-14);
        assert_eq!(ss.n_flagged(), 0);
    }

    #[test]
    fn ss_flags_collinear_columns() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
        let ss = score_system_ss(&x, Some(1e-12)).unwrap();
        assert!(ss.flagged.iter().all(|&f| f));
    }

    #[test]
    fn ss_nodewise_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_design(&mut rng, 20, 10);
        let ss = score_system_ss(&x, None).unwrap();
        for j in 0..10 {
            let lam = 20.0 * default_lambda_node(&x, j);
            let s = ss.scores.column(j);
            for k in (0..10).filter(|&k| k != j) {
                assert!(x.column(k).dot(&s).abs() <= lam + 1e-6);
            }
        }
    }

    #[test]
    fn ci_identity_gram() {
        // Columns with XᵀX/m = I.
        let x = orthogonal_design();
        let gram = x.transpose() * &x / 4.0;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-15);
        for gamma in [0.0, 0.2, 0.7] {
            let ci = score_system_ci(&x, gamma).unwrap();
            let s = ci.inverse.unwrap();
            assert!((s - DMatrix::identity(3, 3) * (1.0 - gamma)).amax() < 1e-12);
        }
        let ci = score_system_ci(&x, 1.5).unwrap();
        assert_eq!(ci.inverse.unwrap().amax(), 0.0);
    }

    #[test]
    fn ci_small_gamma_approaches_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_design(&mut rng, 60, 5);
        let gram = x.transpose() * &x / 60.0;
        let ci = score_system_ci(&x, 1e-7).unwrap();
        let inv = gram.clone().try_inverse().unwrap();
        assert!((ci.inverse.unwrap() - inv).amax() < 1e-4);
    }

    #[test]
    fn ci_escalates_on_singular_gram() {
        // n > m: Σ̂ is singular, e_j is not in its range.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_design(&mut rng, 4, 8);
        let ci = score_system_ci(&x, 0.0).unwrap();
        let gamma = ci.gamma.unwrap();
        assert!(gamma > 0.0);
        let gram = x.transpose() * &x / 4.0;
        let s = ci.inverse.unwrap();
        let resid = gram * s - DMatrix::identity(8, 8);
        assert!(resid.amax() <= gamma * (1.0 + 1e-6));
    }

    #[test]
    fn orthogonal_ols_needs_no_correction() {
        let x = orthogonal_design();
        let y = DVector::from_vec(vec![1.0, 2.0, -0.5, 0.3]);
        let ols = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
        let fit = ShiftFit {
            delta: ols.clone(),
            objective: 0.0,
            iterations: 0,
            converged: true,
            sigma: Some(1.0),
            lambda: 0.0,
        };
        let t = DMatrix::identity(3, 3);
        for system in [score_system_ss(&x, None).unwrap(), score_system_ci(&x, 0.0).unwrap()] {
            let d = debias(&fit, &system, &x, &y, &t).unwrap();
            assert!((&d.delta - &ols).amax() < 1e-12);
        }
    }

    #[test]
    fn ss_and_ci_agree_on_orthogonal_design() {
        let x = orthogonal_design();
        let y = DVector::from_vec(vec![-1.0, 0.2, 0.7, 0.3]);
        let fit = ShiftFit {
            delta: DVector::from_vec(vec![-0.1, 0.0, 0.2]),
            objective: 0.0,
            iterations: 0,
            converged: true,
            sigma: Some(0.8),
            lambda: 0.1,
        };
        let t = DMatrix::identity(3, 3);
        let a = debias(&fit, &score_system_ss(&x, None).unwrap(), &x, &y, &t).unwrap();
        let b = debias(&fit, &score_system_ci(&x, 1e-9).unwrap(), &x, &y, &t).unwrap();
        assert!((&a.delta - &b.delta).amax() < 1e-4);
        assert!((&a.v - &b.v).amax() < 1e-4);
    }

    #[test]
    fn intervals() {
        let fit = DebiasedFit {
            delta: DVector::from_vec(vec![0.0]),
            v: DMatrix::identity(1, 1),
            sigma: 1.0,
            mu_hat: DVector::from_vec(vec![-0.7]),
            leaf_sd: DVector::from_vec(vec![0.5]),
            t_scores: DVector::from_vec(vec![-1.4]),
            p_ss: DVector::from_vec(vec![normal_cdf(-1.4)]),
            flagged: vec![false],
            degenerate_leaves: 0,
        };
        let ci = confidence_intervals(&fit, 0.05).unwrap();
        assert!((ci.shifts[0].1 - 1.959_963_984_540_054).abs() < 1e-9);
        assert!((ci.shifts[0].0 + 1.959_963_984_540_054).abs() < 1e-9);
        let half = confidence_intervals(&fit, 0.5).unwrap();
        assert_eq!(half.leaf_upper[0], -0.7);
        for level in [0.05, 0.1, 0.2] {
            let ci = confidence_intervals(&fit, level).unwrap();
            assert_eq!(ci.leaf_upper[0] < 0.0, fit.p_ss[0] <= level);
        }
        assert!(confidence_intervals(&fit, 1.0).is_err());
    }
}
