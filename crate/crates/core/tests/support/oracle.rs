//! Reference solver for the sign-constrained lasso, independent of the
//! coordinate-descent path.
//!
//! The ℓ1 term is removed by splitting `Δ = p − q` with `p, q ≥ 0`; the
//! linear constraint `TΔ ≤ 0` is handled by an augmented Lagrangian whose
//! inner problems are solved by accelerated projected gradient on the
//! nonnegative orthant.

use nalgebra::{DMatrix, DVector};

pub struct OracleSolution {
    pub delta: DVector<f64>,
    pub objective: f64,
    pub max_violation: f64,
}

fn spectral_norm_sq(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let ata = a.transpose() * a;
    let mut v = DVector::from_element(ata.ncols(), 1.0);
    let mut est = 0.0;
    for _ in 0..500 {
        let w = &ata * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        est = nw / v.norm();
        v = w / nw;
    }
    est * 1.01
}

pub fn projected_gradient_oracle(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    t: &DMatrix<f64>,
    lambda: f64,
) -> OracleSolution {
    let n = x.ncols();
    let mc = t.nrows();
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    let lx = spectral_norm_sq(x);
    let lt = spectral_norm_sq(t);

    let mut p = DVector::<f64>::zeros(n);
    let mut q = DVector::<f64>::zeros(n);
    let mut nu = DVector::<f64>::zeros(mc);
    let mut rho = 10.0;
    let mut last_violation = f64::INFINITY;

    for _outer in 0..200 {
        let step = 1.0 / (2.0 * (lx + rho * lt));
        let grad = |p: &DVector<f64>, q: &DVector<f64>, nu: &DVector<f64>, rho: f64| {
            let d = p - q;
            let mut g = &xtx * &d - &xty;
            if mc > 0 {
                let shifted = (nu + (t * &d) * rho).map(|v| v.max(0.0));
                g += t.transpose() * shifted;
            }
            (g.add_scalar(lambda), (-g).add_scalar(lambda))
        };
        let (mut yp, mut yq) = (p.clone(), q.clone());
        let mut momentum = 1.0f64;
        for _inner in 0..200_000 {
            let (gp, gq) = grad(&yp, &yq, &nu, rho);
            let np = (&yp - gp * step).map(|v| v.max(0.0));
            let nq = (&yq - gq * step).map(|v| v.max(0.0));
            let moved = (&np - &p).amax().max((&nq - &q).amax());
            let next_m = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
            let beta = (momentum - 1.0) / next_m;
            // Restart momentum when the step reverses direction.
            let restart = (&np - &p).dot(&(&yp - &np)) + (&nq - &q).dot(&(&yq - &nq)) > 0.0;
            if restart {
                momentum = 1.0;
                yp = np.clone();
                yq = nq.clone();
            } else {
                yp = &np + (&np - &p) * beta;
                yq = &nq + (&nq - &q) * beta;
                momentum = next_m;
            }
            p = np;
            q = nq;
            if moved < 1e-15 {
                break;
            }
        }
        let d = &p - &q;
        let violation = if mc > 0 { (t * &d).max().max(0.0) } else { 0.0 };
        if mc > 0 {
            nu = (&nu + (t * &d) * rho).map(|v| v.max(0.0));
        }
        if violation < 1e-13 && _outer > 3 {
            break;
        }
        if violation > 0.25 * last_violation {
            rho *= 5.0;
        }
        last_violation = violation;
    }
    let delta = &p - &q;
    let objective = 0.5 * (y - x * &delta).norm_squared() + lambda * delta.lp_norm(1);
    let max_violation = if mc > 0 { (t * &delta).max() } else { 0.0 };
    OracleSolution {
        delta,
        objective,
        max_violation,
    }
}
