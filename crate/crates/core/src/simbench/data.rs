use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Taxa × samples, nonnegative. `in_b[j]` is set once samples are split into
/// groups A and B.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceMatrix {
    pub taxa: Vec<String>,
    pub samples: Vec<String>,
    pub values: DMatrix<f64>,
    pub in_b: Option<Vec<bool>>,
}

impl AbundanceMatrix {
    pub fn new(taxa: Vec<String>, samples: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != taxa.len() || values.ncols() != samples.len() {
            return Err(Error::Dimension(format!(
                "{}x{} values for {} taxa and {} samples",
                values.nrows(),
                values.ncols(),
                taxa.len(),
                samples.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(format!("abundance {v} is not a nonnegative number")));
        }
        Ok(Self {
            taxa,
            samples,
            values,
            in_b: None,
        })
    }

    pub fn n_taxa(&self) -> usize {
        self.taxa.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Two-sided Wilcoxon p-value for every taxon, in row order.
    pub fn wilcoxon_pvalues(&self) -> Result<Vec<f64>> {
        let groups = self
            .in_b
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("samples have no group assignment".into()))?;
        self.values
            .row_iter()
            .map(|row| {
                let v: Vec<f64> = row.iter().copied().collect();
                super::wilcoxon_test(&v, groups)
            })
            .collect()
    }
}

/// Homogeneous log-normal counts with zero inflation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseDataConfig {
    pub n_samples: usize,
    /// Mean over taxa of the per-taxon log-abundance.
    pub log_mean: f64,
    /// Spread of the per-taxon log-abundance.
    pub log_mean_sd: f64,
    /// Within-taxon sample-to-sample log-scale spread.
    pub log_sd: f64,
    /// Probability that an entry is zero.
    pub zero_prob: f64,
}

impl Default for BaseDataConfig {
    fn default() -> Self {
        Self {
            n_samples: 100,
            log_mean: 3.0,
            log_mean_sd: 1.5,
            log_sd: 1.0,
            zero_prob: 0.2,
        }
    }
}

/// Rounded log-normal counts; rows are taxa, columns samples `S1..Sp`.
pub fn generate_base<R: Rng + ?Sized>(taxa: Vec<String>, config: &BaseDataConfig, rng: &mut R) -> Result<AbundanceMatrix> {
    if config.n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    if !(0.0..1.0).contains(&config.zero_prob) {
        return Err(Error::InvalidArgument(format!("zero probability {} not in [0, 1)", config.zero_prob)));
    }
    let across = Normal::new(config.log_mean, config.log_mean_sd)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let within = Normal::new(0.0, config.log_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let m = taxa.len();
    let p = config.n_samples;
    let means: Vec<f64> = (0..m).map(|_| across.sample(rng)).collect();
    let mut values = DMatrix::zeros(m, p);
    for i in 0..m {
        for j in 0..p {
            let zero = rng.random::<f64>() < config.zero_prob;
            let draw = (means[i] + within.sample(rng)).exp().round();
            values[(i, j)] = if zero { 0.0 } else { draw };
        }
    }
    let samples = (1..=p).map(|j| format!("S{j}")).collect();
    AbundanceMatrix::new(taxa, samples, values)
}
