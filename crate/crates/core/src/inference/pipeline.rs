//! The full correction: p-values to z-scores, model selection over the
//! (α, λ) grid, debiasing, and the FDR threshold.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::fdr::{fdr_threshold, FdrThreshold};
use super::zscore::p_to_z;
use crate::debias::{debias, score_system_ci, score_system_ss, DebiasMethod, DebiasedFit, DEFAULT_GAMMA};
use crate::design::{build_design, OuDesign};
use crate::error::{Error, Result};
use crate::solver::{scaled_lasso_warm, ShiftFit, SolverOptions, SCALE_FLOOR};
use crate::tree::UltrametricTree;

/// Shifts with `|Δ_j|` at or below this count as zero in the BIC.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Eight log-spaced selection strengths in `[0.05/h, 20/h]`.
pub fn default_alpha_grid(height: f64) -> Vec<f64> {
    log_spaced(0.05 / height, 20.0 / height, 8)
}

/// Ten geometric fractions of `λ_max` in `[0.01, 1]`.
pub fn default_lambda_grid() -> Vec<f64> {
    log_spaced(0.01, 1.0, 10)
}

fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// `log(log m) · log m`, floored at zero for `m < 3`.
pub fn bic_penalty(m: usize) -> f64 {
    let lm = (m as f64).ln();
    (lm.ln() * lm).max(0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct BicCell {
    pub alpha: f64,
    /// Grid value, as a fraction of `λ_max(α) = ‖Xᵀy‖∞`.
    pub lambda_fraction: f64,
    /// Penalty of the final lasso solve, `λ₀·m·σ̂`.
    pub lambda: f64,
    pub sigma: f64,
    /// `‖y − XΔ̂‖²`.
    pub rss: f64,
    pub log_det: f64,
    pub support: usize,
    pub bic: f64,
    pub converged: bool,
    #[serde(skip)]
    pub delta: DVector<f64>,
    /// Set when the cell could not be fitted; the numeric fields are then NaN.
    pub error: Option<String>,
}

impl BicCell {
    fn failed(alpha: f64, lambda_fraction: f64, err: &Error) -> Self {
        Self {
            alpha,
            lambda_fraction,
            lambda: f64::NAN,
            sigma: f64::NAN,
            rss: f64::NAN,
            log_det: f64::NAN,
            support: 0,
            bic: f64::NAN,
            converged: false,
            delta: DVector::zeros(0),
            error: Some(err.to_string()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BicTrace {
    pub n_leaves: usize,
    /// α-major, λ in grid order.
    pub cells: Vec<BicCell>,
    pub selected: usize,
}

impl BicTrace {
    pub fn selected_cell(&self) -> &BicCell {
        &self.cells[self.selected]
    }

    /// BIC rebuilt from the stored parts.
    pub fn recompute(&self, cell: &BicCell) -> f64 {
        cell.rss + cell.log_det + cell.support as f64 * bic_penalty(self.n_leaves)
    }

    pub fn n_failed(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_ok()).count()
    }
}

/// The selected model: trace, the design at `α̂`, and the scaled-lasso fit.
#[derive(Debug, Clone)]
pub struct Selection {
    pub trace: BicTrace,
    pub design: OuDesign,
    pub fit: ShiftFit,
}

fn validate_grids(alpha_grid: &[f64], lambda_grid: &[f64]) -> Result<()> {
    if alpha_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("grids must be nonempty".into()));
    }
    if let Some(a) = alpha_grid.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument(format!("alpha grid value {a} is not positive")));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument(format!("lambda grid value {l} is not positive")));
    }
    Ok(())
}

/// Fits every (α, λ) cell by the scaled lasso and scores it with the modified
/// BIC `‖y − XΔ̂‖² + log|Σ| + ‖Δ̂‖₀ log(log m) log m`.
///
/// `lambda_grid` holds fractions of `λ_max(α)`. A fraction `f` is turned into
/// the scaled-lasso base rate `λ₀ = f·λ_max / (m σ₀)` with `σ₀ = ‖y‖/√m`
/// (the penalty a null fit would get). For every α the cells
/// are solved from the largest fraction down, each warm-started from the
/// previous one. Ties go to the larger λ, then the larger α.
pub fn bic_select(
    tree: &UltrametricTree,
    z: &DVector<f64>,
    alpha_grid: &[f64],
    lambda_grid: &[f64],
    opts: &SolverOptions,
) -> Result<BicTrace> {
    validate_grids(alpha_grid, lambda_grid)?;
    let m = tree.n_leaves();
    if z.len() != m {
        return Err(Error::Dimension(format!("{} z-scores for {m} leaves", z.len())));
    }
    let geometry = tree.geometry();
    let penalty = bic_penalty(m);

    let rows: Vec<Vec<BicCell>> = alpha_grid
        .par_iter()
        .map(|&alpha| {
            let design = match build_design(tree, &geometry, z, alpha) {
                Ok(d) => d,
                Err(e) => {
                    return lambda_grid
                        .iter()
                        .map(|&f| BicCell::failed(alpha, f, &e))
                        .collect()
                }
            };
            let lambda_max = (design.x.transpose() * &design.y).amax();
            let sigma0 = design.y.norm() / (m as f64).sqrt();
            let mut order: Vec<usize> = (0..lambda_grid.len()).collect();
            order.sort_by(|&a, &b| lambda_grid[b].total_cmp(&lambda_grid[a]));
            let mut cells: Vec<Option<BicCell>> = vec![None; lambda_grid.len()];
            let mut warm = DVector::zeros(tree.n_nodes());
            let mut multipliers: Option<DVector<f64>> = None;
            for k in order {
                let frac = lambda_grid[k];
                let fit = if sigma0 < SCALE_FLOOR || lambda_max == 0.0 {
                    // Nothing to explain: the null fit.
                    Ok(ShiftFit {
                        delta: DVector::zeros(tree.n_nodes()),
                        objective: 0.5 * design.y.norm_squared(),
                        iterations: 0,
                        converged: true,
                        sigma: Some(sigma0),
                        lambda: frac * lambda_max,
                    })
                } else {
                    let lambda0 = frac * lambda_max / (m as f64 * sigma0);
                    scaled_lasso_warm(
                        &design.x,
                        &design.y,
                        &design.t,
                        lambda0,
                        Some(&warm),
                        multipliers.as_ref(),
                        opts,
                    )
                    .map(|(fit, nu)| {
                        multipliers = nu;
                        fit
                    })
                };
                cells[k] = Some(match fit {
                    Ok(fit) => {
                        warm.copy_from(&fit.delta);
                        let rss = (&design.y - &design.x * &fit.delta).norm_squared();
                        let support = fit.support_size(SUPPORT_TOL);
                        let log_det = design.log_det();
                        BicCell {
                            alpha,
                            lambda_fraction: frac,
                            lambda: fit.lambda,
                            sigma: fit.sigma.unwrap_or(f64::NAN),
                            rss,
                            log_det,
                            support,
                            bic: rss + log_det + support as f64 * penalty,
                            converged: fit.converged,
                            delta: fit.delta,
                            error: None,
                        }
                    }
                    Err(e) => BicCell::failed(alpha, frac, &e),
                });
            }
            cells.into_iter().map(|c| c.expect("every cell visited")).collect()
        })
        .collect();
    let cells: Vec<BicCell> = rows.into_iter().flatten().collect();

    let selected = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_ok())
        .min_by(|(_, a), (_, b)| {
            a.bic
                .total_cmp(&b.bic)
                .then(b.lambda_fraction.total_cmp(&a.lambda_fraction))
                .then(b.alpha.total_cmp(&a.alpha))
        })
        .map(|(i, _)| i);
    match selected {
        Some(selected) => Ok(BicTrace {
            n_leaves: m,
            cells,
            selected,
        }),
        None => Err(Error::AllCellsFailed(
            cells
                .last()
                .and_then(|c| c.error.clone())
                .unwrap_or_default(),
        )),
    }
}

/// [`bic_select`] followed by rebuilding the design at the selected α.
pub fn select_model(
    tree: &UltrametricTree,
    z: &DVector<f64>,
    alpha_grid: &[f64],
    lambda_grid: &[f64],
    opts: &SolverOptions,
) -> Result<Selection> {
    let trace = bic_select(tree, z, alpha_grid, lambda_grid, opts)?;
    let cell = trace.selected_cell();
    let design = build_design(tree, &tree.geometry(), z, cell.alpha)?;
    let fit = ShiftFit {
        delta: cell.delta.clone(),
        objective: 0.0,
        iterations: 0,
        converged: cell.converged,
        sigma: Some(cell.sigma),
        lambda: cell.lambda,
    };
    let fit = ShiftFit {
        objective: 0.5 * cell.rss + cell.lambda * fit.delta.lp_norm(1),
        ..fit
    };
    Ok(Selection { trace, design, fit })
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrectionConfig {
    /// Absolute selection strengths; `None` uses [`default_alpha_grid`].
    pub alpha_grid: Option<Vec<f64>>,
    /// Fractions of `λ_max`; `None` uses [`default_lambda_grid`].
    pub lambda_grid: Option<Vec<f64>>,
    pub method: DebiasMethod,
    /// Target FDR level.
    pub fdr: f64,
    /// Starting slack for the column-wise inverse.
    pub gamma: Option<f64>,
    /// Nodewise-lasso penalty override for the score system.
    pub lambda_node: Option<f64>,
    #[serde(skip)]
    pub solver: SolverOptions,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        Self {
            alpha_grid: None,
            lambda_grid: None,
            method: DebiasMethod::Ss,
            fdr: 0.05,
            gamma: None,
            lambda_node: None,
            solver: SolverOptions::default(),
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fdr > 0.0 && self.fdr < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "target FDR must be in (0, 1), got {}",
                self.fdr
            )));
        }
        if let Some(g) = self.gamma {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {g}")));
            }
        }
        Ok(())
    }

    pub fn alpha_grid_for(&self, tree: &UltrametricTree) -> Vec<f64> {
        self.alpha_grid
            .clone()
            .unwrap_or_else(|| default_alpha_grid(tree.height()))
    }

    pub fn lambda_grid(&self) -> Vec<f64> {
        self.lambda_grid.clone().unwrap_or_else(default_lambda_grid)
    }
}

/// Leaf-level inference on top of a [`Selection`], in tree leaf order.
#[derive(Debug, Clone)]
pub struct LeafInference {
    pub debiased: DebiasedFit,
    pub threshold: FdrThreshold,
    pub q: Vec<f64>,
    pub rejected: Vec<bool>,
    pub gamma: Option<f64>,
    pub flagged: usize,
}

/// `q_i = p_i α / Φ(−t★)` (capped at 1); leaf `i` is rejected when
/// `𝔱_i ≤ −t★`, equivalently `q_i ≤ α`.
pub fn q_values(p_ss: &[f64], t_scores: &[f64], threshold: &FdrThreshold, fdr: f64) -> (Vec<f64>, Vec<bool>) {
    let level = threshold.p_level();
    p_ss.iter()
        .zip(t_scores)
        .map(|(&p, &t)| {
            let rejected = t <= -threshold.t_star;
            let mut q = (p * fdr / level).min(1.0);
            if rejected {
                // Guards the boundary case t = −t★ against rounding.
                q = q.min(fdr);
            }
            (q, rejected)
        })
        .unzip()
}

/// Debiases the selected fit and applies the FDR threshold.
pub fn leaf_inference(selection: &Selection, config: &CorrectionConfig) -> Result<LeafInference> {
    let d = &selection.design;
    let system = match config.method {
        DebiasMethod::Ss => score_system_ss(&d.x, config.lambda_node)?,
        DebiasMethod::Ci => score_system_ci(&d.x, config.gamma.unwrap_or(DEFAULT_GAMMA))?,
    };
    let debiased = debias(&selection.fit, &system, &d.x, &d.y, &d.t)?;
    let t_scores = debiased.t_scores.as_slice();
    let threshold = fdr_threshold(t_scores, config.fdr);
    let (q, rejected) = q_values(debiased.p_ss.as_slice(), t_scores, &threshold, config.fdr);
    Ok(LeafInference {
        flagged: system.n_flagged(),
        gamma: system.gamma,
        debiased,
        threshold,
        q,
        rejected,
    })
}

/// Per-leaf outputs are in the caller's input order; `debiased` is in tree
/// order.
#[derive(Debug, Clone)]
pub struct CorrectionResult {
    pub labels: Vec<String>,
    pub p_raw: Vec<f64>,
    pub z: Vec<f64>,
    pub t_scores: Vec<f64>,
    pub p_ss: Vec<f64>,
    pub q_ss: Vec<f64>,
    pub rejected: Vec<bool>,
    pub threshold: FdrThreshold,
    pub fdr: f64,
    pub alpha_hat: f64,
    pub lambda_hat: f64,
    pub lambda_fraction: f64,
    pub sigma_hat: f64,
    pub method: DebiasMethod,
    pub gamma: Option<f64>,
    pub trace: BicTrace,
    pub debiased: DebiasedFit,
    pub clamped: usize,
    pub warnings: Vec<String>,
}

impl CorrectionResult {
    pub fn n_rejected(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }
}

/// Corrects the p-values of the tree's leaves, given in any order with their
/// labels.
pub fn correct(
    tree: &UltrametricTree,
    labels: &[String],
    p: &[f64],
    config: &CorrectionConfig,
) -> Result<CorrectionResult> {
    correct_each(tree, labels, p, config, &[config.method])?
        .pop()
        .expect("one method requested")
}

/// Like [`correct`] for several debiasing methods, sharing one model
/// selection. The outer error covers the shared steps; each method can still
/// fail on its own.
pub fn correct_each(
    tree: &UltrametricTree,
    labels: &[String],
    p: &[f64],
    config: &CorrectionConfig,
    methods: &[DebiasMethod],
) -> Result<Vec<Result<CorrectionResult>>> {
    config.validate()?;
    let zs = p_to_z(labels.to_vec(), p)?;
    // For every leaf, the input row holding its value.
    let rows: Vec<usize> = tree.align_to_leaves(labels, &(0..labels.len()).collect::<Vec<_>>())?;
    let z_tree = DVector::from_iterator(rows.len(), rows.iter().map(|&r| zs.z[r]));

    let selection = select_model(
        tree,
        &z_tree,
        &config.alpha_grid_for(tree),
        &config.lambda_grid(),
        &config.solver,
    )?;

    let mut shared = Vec::new();
    if zs.clamped > 0 {
        shared.push(format!("{} p-values clamped away from 0/1", zs.clamped));
    }
    let failed = selection.trace.n_failed();
    if failed > 0 {
        shared.push(format!("{failed} grid cells failed to fit"));
    }
    let unconverged = selection
        .trace
        .cells
        .iter()
        .filter(|c| c.is_ok() && !c.converged)
        .count();
    if unconverged > 0 {
        shared.push(format!("{unconverged} grid cells hit the sweep limit"));
    }

    let finish = |method: DebiasMethod| -> Result<CorrectionResult> {
        let config = CorrectionConfig {
            method,
            ..config.clone()
        };
        let leaves = leaf_inference(&selection, &config)?;
        let mut warnings = shared.clone();
        if leaves.flagged > 0 {
            warnings.push(format!("{} shifts could not be debiased", leaves.flagged));
        }
        if leaves.debiased.degenerate_leaves > 0 {
            warnings.push(format!(
                "{} leaves have zero estimated variance (t-score set to 0)",
                leaves.debiased.degenerate_leaves
            ));
        }
        if leaves.threshold.fallback {
            warnings.push("no threshold met the FDR bound; used sqrt(2 log m)".into());
        }
        if let (Some(used), DebiasMethod::Ci) = (leaves.gamma, method) {
            let asked = config.gamma.unwrap_or(DEFAULT_GAMMA);
            if used > asked {
                warnings.push(format!("gamma raised from {asked} to {used} for feasibility"));
            }
        }
        for w in &warnings {
            log::debug!("{w}");
        }

        // Back to input order.
        let n_in = labels.len();
        let mut t_scores = vec![0.0; n_in];
        let mut p_ss = vec![0.0; n_in];
        let mut q_ss = vec![0.0; n_in];
        let mut rejected = vec![false; n_in];
        for (leaf, &row) in rows.iter().enumerate() {
            t_scores[row] = leaves.debiased.t_scores[leaf];
            p_ss[row] = leaves.debiased.p_ss[leaf];
            q_ss[row] = leaves.q[leaf];
            rejected[row] = leaves.rejected[leaf];
        }
        let cell = selection.trace.selected_cell();
        Ok(CorrectionResult {
            labels: labels.to_vec(),
            p_raw: p.to_vec(),
            z: zs.z.as_slice().to_vec(),
            t_scores,
            p_ss,
            q_ss,
            rejected,
            threshold: leaves.threshold,
            fdr: config.fdr,
            alpha_hat: cell.alpha,
            lambda_hat: cell.lambda,
            lambda_fraction: cell.lambda_fraction,
            sigma_hat: cell.sigma,
            method,
            gamma: leaves.gamma,
            clamped: zs.clamped,
            debiased: leaves.debiased,
            trace: selection.trace.clone(),
            warnings,
        })
    };
    Ok(methods.iter().map(|&m| finish(m)).collect())
}

/// Threshold, q-values and rejections for another target level, from the
/// same leaf p-values and t-scores.
pub fn requantify(p_ss: &[f64], t_scores: &[f64], fdr: f64) -> (FdrThreshold, Vec<f64>, Vec<bool>) {
    let threshold = fdr_threshold(t_scores, fdr);
    let (q, r) = q_values(p_ss, t_scores, &threshold, fdr);
    (threshold, q, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_newick;

    const FIG1: &str = "(((T1:1,T2:1):1,T3:2):1,(T4:2,T5:2):1);";

    fn labels(tree: &UltrametricTree) -> Vec<String> {
        tree.leaf_labels().map(str::to_owned).collect()
    }

    #[test]
    fn default_grids() {
        let a = default_alpha_grid(2.0);
        assert_eq!(a.len(), 8);
        assert!((a[0] - 0.025).abs() < 1e-15 && (a[7] - 10.0).abs() < 1e-12);
        let l = default_lambda_grid();
        assert_eq!(l.len(), 10);
        assert!((l[0] - 0.01).abs() < 1e-15 && (l[9] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_data_selects_empty_support() {
        let tree = parse_newick(FIG1).unwrap();
        let z = DVector::zeros(5);
        let trace = bic_select(
            &tree,
            &z,
            &default_alpha_grid(3.0),
            &default_lambda_grid(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(trace.cells.iter().all(|c| c.support == 0 && c.is_ok()));
        // Ties within an α go to the largest λ fraction.
        assert_eq!(trace.selected_cell().lambda_fraction, 1.0);
        for c in &trace.cells {
            assert!((trace.recompute(c) - c.bic).abs() <= 1e-8);
        }
    }

    #[test]
    fn null_correction_rejects_nothing() {
        let tree = parse_newick(FIG1).unwrap();
        let res = correct(&tree, &labels(&tree), &[0.5; 5], &CorrectionConfig::default()).unwrap();
        assert_eq!(res.n_rejected(), 0);
        assert!(res.p_ss.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn q_values_match_rejections() {
        let tree = parse_newick(FIG1).unwrap();
        let p = [1e-9, 2e-9, 0.4, 0.7, 0.9];
        for method in [DebiasMethod::Ss, DebiasMethod::Ci] {
            let config = CorrectionConfig {
                method,
                ..Default::default()
            };
            let res = correct(&tree, &labels(&tree), &p, &config).unwrap();
            for i in 0..5 {
                assert_eq!(res.rejected[i], res.q_ss[i] <= config.fdr);
                assert_eq!(res.rejected[i], res.t_scores[i] <= -res.threshold.t_star);
                assert!(res.p_ss[i] > 0.0 && res.p_ss[i] < 1.0);
            }
        }
    }

    #[test]
    fn permuting_inputs_keeps_per_label_results() {
        let tree = parse_newick(FIG1).unwrap();
        let l = labels(&tree);
        let p = [1e-6, 3e-5, 0.2, 0.6, 0.04];
        let a = correct(&tree, &l, &p, &CorrectionConfig::default()).unwrap();
        let order = [3, 0, 4, 2, 1];
        let l2: Vec<String> = order.iter().map(|&i| l[i].clone()).collect();
        let p2: Vec<f64> = order.iter().map(|&i| p[i]).collect();
        let b = correct(&tree, &l2, &p2, &CorrectionConfig::default()).unwrap();
        for (k, &i) in order.iter().enumerate() {
            assert_eq!(a.q_ss[i], b.q_ss[k]);
            assert_eq!(a.p_ss[i], b.p_ss[k]);
        }
    }

    #[test]
    fn label_mismatch_is_an_error() {
        let tree = parse_newick(FIG1).unwrap();
        let mut l = labels(&tree);
        l[2] = "nope".into();
        let err = correct(&tree, &l, &[0.5; 5], &CorrectionConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel(ref s) if s == "nope"));
    }

    #[test]
    fn bad_config() {
        let tree = parse_newick(FIG1).unwrap();
        let config = CorrectionConfig {
            fdr: 1.5,
            ..Default::default()
        };
        assert!(correct(&tree, &labels(&tree), &[0.5; 5], &config).is_err());
        assert!(bic_select(&tree, &DVector::zeros(5), &[], &[1.0], &SolverOptions::default()).is_err());
        assert!(bic_select(&tree, &DVector::zeros(5), &[-1.0], &[1.0], &SolverOptions::default()).is_err());
    }

    #[test]
    fn bic_penalty_floor() {
        assert_eq!(bic_penalty(2), 0.0);
        assert!(bic_penalty(50) > 0.0);
    }
}
