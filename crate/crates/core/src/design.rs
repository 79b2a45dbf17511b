//! OU covariance on the leaves and the whitened regression problem built from it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tree::{TreeGeometry, UltrametricTree};

/// Diagonal jitter tried once when the Cholesky factorisation fails.
pub const JITTER: f64 = 1e-10;

/// Selection strength and the white-noise variance that gives every leaf unit
/// marginal variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuParams {
    pub alpha: f64,
    pub sigma2: f64,
    pub height: f64,
}

impl OuParams {
    pub fn new(alpha: f64, height: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "selection strength must be positive, got {alpha}"
            )));
        }
        // sigma2 = 2 alpha / (1 - exp(-2 alpha h))
        let sigma2 = 2.0 * alpha / -(-2.0 * alpha * height).exp_m1();
        Ok(Self {
            alpha,
            sigma2,
            height,
        })
    }
}

/// `Σ_ij = σ²/(2α) · exp(-2α d_ij) · (1 - exp(-2α t_ij))` with σ² from
/// [`OuParams`], so the diagonal is exactly one.
pub fn ou_covariance(geometry: &TreeGeometry, alpha: f64) -> Result<DMatrix<f64>> {
    let params = OuParams::new(alpha, geometry.height)?;
    let scale = params.sigma2 / (2.0 * alpha);
    let m = geometry.n_leaves();
    let mut sigma = DMatrix::zeros(m, m);
    for j in 0..m {
        for i in 0..m {
            sigma[(i, j)] = if i == j {
                1.0
            } else {
                let d = geometry.distance[(i, j)];
                let t = geometry.mrca[(i, j)];
                scale * (-2.0 * alpha * d).exp() * -(-2.0 * alpha * t).exp_m1()
            };
        }
    }
    Ok(sigma)
}

/// Upper-triangular `R` with `Σ⁻¹ = RᵀR`, plus `log|Σ|`.
#[derive(Debug, Clone)]
pub struct Whitening {
    pub r: DMatrix<f64>,
    pub log_det: f64,
    pub jittered: bool,
}

/// Factorises `Σ = ŨŨᵀ` with `Ũ` upper-triangular (a Cholesky factorisation of
/// the index-reversed matrix) and returns `R = Ũ⁻¹`.
pub fn whitening_factor(sigma: &DMatrix<f64>) -> Result<Whitening> {
    let m = sigma.nrows();
    if sigma.ncols() != m {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let reversed = DMatrix::from_fn(m, m, |i, j| sigma[(m - 1 - i, m - 1 - j)]);
    let (chol, jittered) = match reversed.clone().cholesky() {
        Some(c) => (c, false),
        None => {
            let jit = reversed + DMatrix::identity(m, m) * JITTER;
            (jit.cholesky().ok_or(Error::Cholesky)?, true)
        }
    };
    let l = chol.l();
    let log_det = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or(Error::Cholesky)?;
    let r = DMatrix::from_fn(m, m, |i, j| l_inv[(m - 1 - i, m - 1 - j)]);
    Ok(Whitening {
        r,
        log_det,
        jittered,
    })
}

/// The whitened regression problem for one selection strength.
#[derive(Debug, Clone)]
pub struct OuDesign {
    pub alpha: f64,
    pub sigma: DMatrix<f64>,
    pub whitening: Whitening,
    /// Phylogenetic design `T = UΛ` (leaves × nodes).
    pub t: DMatrix<f64>,
    /// `X = RT`.
    pub x: DMatrix<f64>,
    /// `y = Rz`.
    pub y: DVector<f64>,
}

impl OuDesign {
    pub fn r(&self) -> &DMatrix<f64> {
        &self.whitening.r
    }

    pub fn log_det(&self) -> f64 {
        self.whitening.log_det
    }
}

/// `T = UΛ(α)`.
pub fn phylo_design(tree: &UltrametricTree, alpha: f64) -> DMatrix<f64> {
    let mut t = tree.incidence();
    let lambda = tree.shrinkage(alpha);
    for (j, mut col) in t.column_iter_mut().enumerate() {
        col *= lambda[j];
    }
    t
}

pub fn build_design(
    tree: &UltrametricTree,
    geometry: &TreeGeometry,
    z: &DVector<f64>,
    alpha: f64,
) -> Result<OuDesign> {
    let m = tree.n_leaves();
    if z.len() != m || geometry.n_leaves() != m {
        return Err(Error::Dimension(format!(
            "{} z-scores for a tree with {m} leaves",
            z.len()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("z-scores must be finite".into()));
    }
    let sigma = ou_covariance(geometry, alpha)?;
    let whitening = whitening_factor(&sigma).map_err(|e| match e {
        Error::Cholesky => Error::SingularCovariance { alpha },
        other => other,
    })?;
    let t = phylo_design(tree, alpha);
    let x = &whitening.r * &t;
    let y = &whitening.r * z;
    Ok(OuDesign {
        alpha,
        sigma,
        whitening,
        t,
        x,
        y,
    })
}
