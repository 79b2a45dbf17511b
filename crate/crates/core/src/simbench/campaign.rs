use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::data::AbundanceMatrix;
use super::metrics::{evaluate, roc_grid, RankKey, ReplicateMetrics, ROC_POINTS};
use super::simulate::{SimScenario, Simulator};
use crate::debias::DebiasMethod;
use crate::error::{Error, Result};
use crate::inference::{bh_adjust, by_adjust, correct_each, CorrectionConfig};
use crate::tree::UltrametricTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Raw,
    Bh,
    By,
    ZazouSs,
    ZazouCi,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Raw, Method::Bh, Method::By, Method::ZazouSs, Method::ZazouCi];

    pub fn name(self) -> &'static str {
        match self {
            Method::Raw => "Raw",
            Method::Bh => "BH",
            Method::By => "BY",
            Method::ZazouSs => "zazou-SS",
            Method::ZazouCi => "zazou-CI",
        }
    }

    fn debias(self) -> Option<DebiasMethod> {
        match self {
            Method::ZazouSs => Some(DebiasMethod::Ss),
            Method::ZazouCi => Some(DebiasMethod::Ci),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub scenarios: Vec<SimScenario>,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Target FDR for every method; also the cut-off for raw p-values.
    pub fdr: f64,
    pub correction: CorrectionConfig,
}

impl CampaignConfig {
    pub fn new(scenarios: Vec<SimScenario>, replicates: usize, seed: u64) -> Self {
        Self {
            scenarios,
            replicates,
            seed,
            methods: Method::ALL.to_vec(),
            fdr: 0.05,
            correction: CorrectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignRow {
    pub fc: f64,
    pub variant: &'static str,
    pub prop_da: f64,
    pub seed: u64,
    pub method: &'static str,
    pub tpr: f64,
    pub fdr: f64,
    pub auc: f64,
    #[serde(skip)]
    pub scenario: usize,
    #[serde(skip)]
    pub metrics: Option<ReplicateMetrics>,
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub scenario: usize,
    pub method: &'static str,
    pub replicates: usize,
    pub failures: usize,
    pub mean_tpr: f64,
    pub mean_fdr: f64,
    /// Standard error of `mean_fdr`.
    pub se_fdr: f64,
    pub mean_auc: f64,
    /// First quartile, median and third quartile of the AUC.
    pub auc_quartiles: [f64; 3],
    /// Pointwise mean of the ROC curves on [`roc_grid`].
    pub mean_roc: Vec<f64>,
}

/// Seed of replicate `index` (counted across all scenarios).
pub fn replicate_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

/// Runs every (scenario, replicate) in parallel and returns one row per
/// method, ordered by scenario, replicate, then method. Each replicate
/// draws from its own generator, seeded by [`replicate_seed`], so results do
/// not depend on scheduling. A method that fails on a replicate yields a row
/// of NaNs with the error attached.
pub fn run_campaign(tree: &UltrametricTree, base: &AbundanceMatrix, config: &CampaignConfig) -> Result<Vec<CampaignRow>> {
    if config.replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods selected".into()));
    }
    for s in &config.scenarios {
        s.validate()?;
    }
    config.correction.validate()?;
    // Fails early on label mismatches and warms the cluster cache.
    let mut prepared = Simulator::new(tree, base)?;
    for s in &config.scenarios {
        prepared.clusters(s.n_clusters(base.n_taxa()))?;
    }

    let jobs: Vec<(usize, usize)> = (0..config.scenarios.len())
        .flat_map(|s| (0..config.replicates).map(move |r| (s, r)))
        .collect();
    let rows: Vec<Vec<CampaignRow>> = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(s, _))| {
            let seed = replicate_seed(config.seed, index);
            let mut sim = prepared.clone();
            run_replicate(&mut sim, s, seed, config)
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn run_replicate(sim: &mut Simulator<'_>, scenario_idx: usize, seed: u64, config: &CampaignConfig) -> Vec<CampaignRow> {
    let scenario = &config.scenarios[scenario_idx];
    let row = |method: Method, result: std::result::Result<ReplicateMetrics, String>| {
        let (metrics, error) = match result {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e)),
        };
        let get = |f: fn(&ReplicateMetrics) -> f64| metrics.as_ref().map_or(f64::NAN, f);
        CampaignRow {
            fc: scenario.fold_change,
            variant: scenario.variant.name(),
            prop_da: scenario.prop_da,
            seed,
            method: method.name(),
            tpr: get(|m| m.tpr),
            fdr: get(|m| m.fdr),
            auc: get(|m| m.auc),
            scenario: scenario_idx,
            metrics,
            error,
        }
    };
    let fail_all = |e: String| config.methods.iter().map(|&m| row(m, Err(e.clone()))).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let replicate = match sim.simulate(scenario, &mut rng) {
        Ok(r) => r,
        Err(e) => return fail_all(e.to_string()),
    };
    let p = match replicate.data.wilcoxon_pvalues() {
        Ok(p) => p,
        Err(e) => return fail_all(e.to_string()),
    };
    let truth = &replicate.truth;
    let fdr = config.fdr;
    let from_q = |q: &[f64]| {
        let rejected: Vec<bool> = q.iter().map(|&v| v <= fdr).collect();
        let keys: Vec<RankKey> = q.iter().zip(&p).map(|(&a, &b)| (a, b)).collect();
        evaluate(&rejected, &keys, truth)
    };

    let debias: Vec<DebiasMethod> = config.methods.iter().filter_map(|m| m.debias()).collect();
    let corrections = if debias.is_empty() {
        Ok(Vec::new())
    } else {
        let cc = CorrectionConfig {
            fdr,
            ..config.correction.clone()
        };
        correct_each(sim.tree, &replicate.data.taxa, &p, &cc, &debias).map_err(|e| e.to_string())
    };

    config
        .methods
        .iter()
        .map(|&method| {
            let result = match method {
                Method::Raw => Ok(from_q(&p)),
                Method::Bh => Ok(from_q(&bh_adjust(&p))),
                Method::By => Ok(from_q(&by_adjust(&p))),
                Method::ZazouSs | Method::ZazouCi => {
                    let k = debias
                        .iter()
                        .position(|&d| Some(d) == method.debias())
                        .expect("method listed");
                    match &corrections {
                        Ok(list) => list[k]
                            .as_ref()
                            .map(|c| from_q(&c.q_ss))
                            .map_err(|e| e.to_string()),
                        Err(e) => Err(e.clone()),
                    }
                }
            };
            if let Err(e) = &result {
                log::warn!("replicate seed {seed}, {}: {e}", method.name());
            }
            row(method, result)
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Per (scenario, method) means, FDR standard error, AUC quartiles and the
/// mean ROC curve, skipping failed rows and NaN entries.
pub fn summarize(rows: &[CampaignRow]) -> Vec<MethodSummary> {
    let mut keys: Vec<(usize, &'static str)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.scenario, r.method)) {
            keys.push((r.scenario, r.method));
        }
    }
    keys.into_iter()
        .map(|(scenario, method)| {
            let group: Vec<&CampaignRow> = rows
                .iter()
                .filter(|r| r.scenario == scenario && r.method == method)
                .collect();
            let ok: Vec<&ReplicateMetrics> = group.iter().filter_map(|r| r.metrics.as_ref()).collect();
            let finite = |f: fn(&ReplicateMetrics) -> f64| -> Vec<f64> {
                ok.iter().map(|m| f(m)).filter(|v| v.is_finite()).collect()
            };
            let fdrs = finite(|m| m.fdr);
            let se_fdr = if fdrs.len() > 1 {
                let mu = mean(&fdrs);
                let var = fdrs.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (fdrs.len() - 1) as f64;
                (var / fdrs.len() as f64).sqrt()
            } else {
                f64::NAN
            };
            let mut aucs = finite(|m| m.auc);
            aucs.sort_by(f64::total_cmp);
            let rocs: Vec<&Vec<f64>> = ok.iter().map(|m| &m.roc).filter(|r| r[0].is_finite()).collect();
            let mean_roc = if rocs.is_empty() {
                vec![f64::NAN; ROC_POINTS]
            } else {
                (0..ROC_POINTS)
                    .map(|i| rocs.iter().map(|r| r[i]).sum::<f64>() / rocs.len() as f64)
                    .collect()
            };
            MethodSummary {
                scenario,
                method,
                replicates: group.len(),
                failures: group.len() - ok.len(),
                mean_tpr: mean(&finite(|m| m.tpr)),
                mean_fdr: mean(&fdrs),
                se_fdr,
                mean_auc: mean(&aucs),
                auc_quartiles: [quantile(&aucs, 0.25), quantile(&aucs, 0.5), quantile(&aucs, 0.75)],
                mean_roc,
            }
        })
        .collect()
}

/// Writes `fc,variant,prop_da,seed,method,tpr,fdr,auc`, numbers with 11
/// significant digits.
pub fn write_campaign_csv<W: Write>(rows: &[CampaignRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("writing campaign CSV: {e}"));
    w.write_record(["fc", "variant", "prop_da", "seed", "method", "tpr", "fdr", "auc"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            fmt_num(r.fc),
            r.variant.to_string(),
            fmt_num(r.prop_da),
            r.seed.to_string(),
            r.method.to_string(),
            fmt_num(r.tpr),
            fmt_num(r.fdr),
            fmt_num(r.auc),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("writing campaign CSV: {e}")))?;
    Ok(())
}

/// Writes the per-grid-point mean ROC of every summary: `scenario,method,fpr,tpr`.
pub fn write_roc_csv<W: Write>(summaries: &[MethodSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("writing ROC CSV: {e}"));
    w.write_record(["scenario", "method", "fpr", "tpr"]).map_err(io)?;
    let grid = roc_grid();
    for s in summaries {
        for (x, y) in grid.iter().zip(&s.mean_roc) {
            w.write_record([s.scenario.to_string(), s.method.to_string(), fmt_num(*x), fmt_num(*y)])
                .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("writing ROC CSV: {e}")))?;
    Ok(())
}

/// Scientific notation with 11 significant digits; NaN as `NaN`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.10e}")
    }
}
