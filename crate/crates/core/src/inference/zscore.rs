use nalgebra::DVector;

use super::normal::normal_quantile;
use crate::error::{Error, Result};

/// Smallest distance from 0 and 1 a p-value is allowed to have.
pub const P_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreVector {
    pub labels: Vec<String>,
    pub p: Vec<f64>,
    pub z: DVector<f64>,
    /// How many inputs were moved into `[P_CLAMP, 1 − P_CLAMP]`.
    pub clamped: usize,
}

/// `z_i = Φ⁻¹(p_i)` after clamping. Small p-values map to negative scores.
pub fn p_to_z(labels: Vec<String>, p: &[f64]) -> Result<ZScoreVector> {
    if labels.len() != p.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} p-values",
            labels.len(),
            p.len()
        )));
    }
    let mut clamped = 0;
    let mut z = DVector::zeros(p.len());
    for (i, (&pi, label)) in p.iter().zip(&labels).enumerate() {
        if !(0.0..=1.0).contains(&pi) {
            return Err(Error::InvalidArgument(format!(
                "p-value for {label:?} is {pi}, outside [0, 1]"
            )));
        }
        let c = pi.clamp(P_CLAMP, 1.0 - P_CLAMP);
        if c != pi {
            clamped += 1;
        }
        z[i] = normal_quantile(c);
    }
    if clamped > 0 {
        log::warn!("{clamped} p-values clamped to [{P_CLAMP:e}, 1 - {P_CLAMP:e}]");
    }
    Ok(ZScoreVector {
        labels,
        p: p.to_vec(),
        z,
        clamped,
    })
}
