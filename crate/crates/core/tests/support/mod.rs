#![allow(dead_code)]

pub mod oracle;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use zazou::design::build_design;
use zazou::tree::random_coalescent;

/// A sign-constrained lasso instance derived from a random coalescent tree.
pub struct TreeProblem {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub t: DMatrix<f64>,
    pub lambda: f64,
}

pub fn normal_vec<R: Rng>(rng: &mut R, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Whitened problem for `m` leaves: negative shifts on a couple of random
/// nodes, OU noise, and a penalty at a random fraction of `λ_max`.
pub fn random_tree_problem<R: Rng>(rng: &mut R, m: usize) -> TreeProblem {
    let tree = random_coalescent(m, rng);
    let geom = tree.geometry();
    let alpha = rng.random_range(0.2..5.0);
    let n = tree.n_nodes();
    let t = zazou::design::phylo_design(&tree, alpha);
    let mut delta = DVector::zeros(n);
    for _ in 0..rng.random_range(1..=3) {
        delta[rng.random_range(0..n)] = -rng.random_range(0.5..4.0);
    }
    let sigma = zazou::design::ou_covariance(&geom, alpha).unwrap();
    let chol = sigma.clone().cholesky().unwrap();
    let z = &t * &delta + chol.l() * normal_vec(rng, m);
    let d = build_design(&tree, &geom, &z, alpha).unwrap();
    let lambda_max = (d.x.transpose() * &d.y).amax();
    let lambda = lambda_max * rng.random_range(0.005..0.6);
    TreeProblem {
        x: d.x,
        y: d.y,
        t: d.t,
        lambda,
    }
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Largest violation of the lasso optimality conditions over coordinates
/// not touched by a tight constraint (`T_ij != 0` with `(TΔ)_i > -slack`).
pub fn interior_kkt_residual(p: &TreeProblem, delta: &DVector<f64>, slack: f64) -> f64 {
    let grad = p.x.transpose() * (&p.y - &p.x * delta);
    let td = &p.t * delta;
    let mut worst: f64 = 0.0;
    for j in 0..delta.len() {
        let pinned = (0..p.t.nrows()).any(|i| p.t[(i, j)] != 0.0 && td[i] > -slack);
        if pinned {
            continue;
        }
        let r = if delta[j] == 0.0 {
            (grad[j].abs() - p.lambda).max(0.0)
        } else {
            (grad[j] - p.lambda * delta[j].signum()).abs()
        };
        worst = worst.max(r);
    }
    worst
}
