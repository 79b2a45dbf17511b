//! Command-line front end: `correct`, `test` and `simulate`.
//!
//! Exit codes: 0 on success, 1 when the numerics fail or an output cannot
//! be written, 2 when the input is invalid.

mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::debias::DebiasMethod;
use crate::error::Error;
use crate::inference::{correct, default_alpha_grid, CorrectionConfig};
use crate::simbench::{
    fmt_num, generate_base, run_campaign, summarize, write_campaign_csv, BaseDataConfig, CampaignConfig, Method,
    MethodSummary, SimScenario, Variant,
};
use crate::tree::random_coalescent;

pub use io::{read_abundance, read_pvalues, read_tree, PValueTable};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Output(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Output(_) => 1,
            CliError::Lib(e) => match e {
                Error::SingularCovariance { .. }
                | Error::Cholesky
                | Error::ScaleCollapse { .. }
                | Error::AllCellsFailed(_) => 1,
                _ => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "zazou", version, about = "Tree-aware correction of dependent p-values")]
pub struct RunConfig {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correct a p-value table using the tree that relates its features.
    Correct(CorrectArgs),
    /// Two-sided Wilcoxon rank-sum test of every taxon between two groups.
    Test(TestArgs),
    /// Run a simulated differential-abundance campaign.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ss,
    Ci,
}

impl From<MethodArg> for DebiasMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ss => DebiasMethod::Ss,
            MethodArg::Ci => DebiasMethod::Ci,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Positive,
    Negative,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Positive => Variant::Positive,
            VariantArg::Negative => Variant::Negative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMethod {
    Raw,
    Bh,
    By,
    Ss,
    Ci,
}

impl From<BenchMethod> for Method {
    fn from(m: BenchMethod) -> Self {
        match m {
            BenchMethod::Raw => Method::Raw,
            BenchMethod::Bh => Method::Bh,
            BenchMethod::By => Method::By,
            BenchMethod::Ss => Method::ZazouSs,
            BenchMethod::Ci => Method::ZazouCi,
        }
    }
}

/// Model-fitting options shared by `correct` and `simulate`.
#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Selection strengths to scan (comma separated); default spans 0.05/h to 20/h.
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    /// Penalties to scan, as fractions of the largest useful penalty.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Starting slack for the column-wise inverse.
    #[arg(long)]
    pub gamma: Option<f64>,
}

impl FitArgs {
    fn config(&self, method: DebiasMethod, fdr: f64) -> Result<CorrectionConfig, CliError> {
        for (name, grid) in [("--alpha-grid", &self.alpha_grid), ("--lambda-grid", &self.lambda_grid)] {
            if let Some(g) = grid {
                if g.is_empty() || g.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(CliError::Input(format!("{name} needs positive finite values")));
                }
            }
        }
        let config = CorrectionConfig {
            alpha_grid: self.alpha_grid.clone(),
            lambda_grid: self.lambda_grid.clone(),
            method,
            fdr,
            gamma: self.gamma,
            ..CorrectionConfig::default()
        };
        config.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorrectArgs {
    /// Newick tree whose leaves are the features.
    #[arg(long)]
    pub tree: PathBuf,
    /// CSV with columns feature_id,p_value.
    #[arg(long)]
    pub pvalues: PathBuf,
    /// Output CSV; the run report goes next to it with a .json extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Target false discovery rate.
    #[arg(long)]
    pub fdr: f64,
    #[arg(long, value_enum, default_value = "ss")]
    pub method: MethodArg,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// Taxa x samples CSV; first column the taxon, header row the sample ids.
    #[arg(long)]
    pub abundance: PathBuf,
    /// CSV with columns sample_id,group and exactly two groups.
    #[arg(long)]
    pub groups: PathBuf,
    /// Output CSV with columns feature_id,p_value.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Newick tree; a random coalescent tree is drawn when absent.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Leaves of the random tree.
    #[arg(long, default_value_t = 50, conflicts_with = "tree")]
    pub taxa: usize,
    /// Base abundance table (taxa x samples); generated when absent.
    #[arg(long, requires = "tree")]
    pub abundance: Option<PathBuf>,
    /// Samples in the generated base table.
    #[arg(long, default_value_t = 100, conflicts_with = "abundance")]
    pub samples: usize,
    /// Fold change applied to group B of the differentially abundant taxa.
    #[arg(long, default_value_t = 10.0)]
    pub fc: f64,
    #[arg(long, value_enum, default_value = "positive")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    /// Target fraction of differentially abundant taxa.
    #[arg(long, default_value_t = 0.1)]
    pub prop_da: f64,
    /// PAM clusters for the positive variant; default round(m/10).
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Target false discovery rate for every method.
    #[arg(long, default_value_t = 0.05)]
    pub fdr: f64,
    /// Methods to compare (comma separated).
    #[arg(long, value_enum, value_delimiter = ',', default_value = "raw,bh,by,ss,ci")]
    pub methods: Vec<BenchMethod>,
    /// Campaign CSV; a JSON summary goes next to it.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
}

pub fn run(config: &RunConfig) -> Result<(), CliError> {
    match &config.command {
        Command::Correct(a) => cmd_correct(a).map(|_| ()),
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a).map(|_| ()),
    }
}

/// Where the JSON companion of an output CSV goes.
pub fn report_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

#[derive(Debug, Serialize)]
struct CorrectReport<'a> {
    tree: String,
    pvalues: String,
    n_features: usize,
    method: DebiasMethod,
    fdr: f64,
    alpha_hat: f64,
    lambda_hat: f64,
    lambda_fraction: f64,
    sigma_hat: f64,
    t_star: f64,
    t_max: f64,
    fallback: bool,
    n_rejected: usize,
    gamma: Option<f64>,
    alpha_grid: Vec<f64>,
    lambda_grid: Vec<f64>,
    clamped: usize,
    warnings: &'a [String],
    bic_trace: &'a crate::inference::BicTrace,
}

/// Runs the correction and writes the q-value CSV and the JSON report.
/// Returns the number of rejections.
pub fn cmd_correct(args: &CorrectArgs) -> Result<usize, CliError> {
    let config = args.fit.config(args.method.into(), args.fdr)?;
    let tree = read_tree(&args.tree)?;
    let table = read_pvalues(&args.pvalues)?;
    io::check_labels(&tree, &table, &args.pvalues)?;
    log::info!("{} features, {} tree leaves", table.labels.len(), tree.n_leaves());

    let result = correct(&tree, &table.labels, &table.p, &config)?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let rows = (0..result.labels.len()).map(|i| {
        vec![
            result.labels[i].clone(),
            fmt_num(result.p_raw[i]),
            fmt_num(result.z[i]),
            fmt_num(result.p_ss[i]),
            fmt_num(result.q_ss[i]),
            result.rejected[i].to_string(),
        ]
    });
    io::write_csv(&args.out, &["feature_id", "p_raw", "z", "p_ss", "q_ss", "rejected"], rows)?;

    let report = CorrectReport {
        tree: args.tree.display().to_string(),
        pvalues: args.pvalues.display().to_string(),
        n_features: result.labels.len(),
        method: result.method,
        fdr: result.fdr,
        alpha_hat: result.alpha_hat,
        lambda_hat: result.lambda_hat,
        lambda_fraction: result.lambda_fraction,
        sigma_hat: result.sigma_hat,
        t_star: result.threshold.t_star,
        t_max: result.threshold.t_max,
        fallback: result.threshold.fallback,
        n_rejected: result.n_rejected(),
        gamma: result.gamma,
        alpha_grid: config
            .alpha_grid
            .clone()
            .unwrap_or_else(|| default_alpha_grid(tree.height())),
        lambda_grid: config.lambda_grid(),
        clamped: result.clamped,
        warnings: &result.warnings,
        bic_trace: &result.trace,
    };
    io::write_json(&report_path(&args.out), &report)?;
    log::info!(
        "alpha {:.4} lambda {:.4}, {} rejections at FDR {}",
        result.alpha_hat,
        result.lambda_hat,
        result.n_rejected(),
        result.fdr
    );
    Ok(result.n_rejected())
}

pub fn cmd_test(args: &TestArgs) -> Result<(), CliError> {
    let mut data = read_abundance(&args.abundance)?;
    let [a, b] = io::assign_groups(&mut data, &args.groups)?;
    let p = data.wilcoxon_pvalues()?;
    log::info!("{} taxa tested, {a} vs {b}", data.n_taxa());
    io::write_csv(&args.out, &["feature_id", "p_value"], io::pvalue_rows(&data.taxa, &p))
}

#[derive(Debug, Serialize)]
struct SimulateReport<'a> {
    tree: Option<String>,
    n_taxa: usize,
    abundance: Option<String>,
    base: Option<BaseDataConfig>,
    scenario: SimScenario,
    replicates: usize,
    seed: u64,
    fdr: f64,
    methods: Vec<&'static str>,
    failures: usize,
    summary: &'a [MethodSummary],
}

/// Runs the campaign, writes its CSV and a JSON summary, and returns the
/// per-method summaries.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<MethodSummary>, CliError> {
    let scenario = SimScenario {
        fold_change: args.fc,
        variant: args.variant.into(),
        prop_da: args.prop_da,
        clusters: args.clusters,
    };
    scenario.validate().map_err(|e| CliError::Input(e.to_string()))?;
    if args.replicates == 0 {
        return Err(CliError::Input("--replicates must be at least 1".into()));
    }
    if args.methods.is_empty() {
        return Err(CliError::Input("--methods is empty".into()));
    }
    let correction = args.fit.config(DebiasMethod::Ss, args.fdr)?;

    // Tree and base data come from their own stream; replicates use stream 0.
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    rng.set_stream(1);
    let tree = match &args.tree {
        Some(path) => read_tree(path)?,
        None => {
            if args.taxa < 4 {
                return Err(CliError::Input("--taxa must be at least 4".into()));
            }
            random_coalescent(args.taxa, &mut rng)
        }
    };
    let base_config = BaseDataConfig {
        n_samples: args.samples,
        ..BaseDataConfig::default()
    };
    let base = match &args.abundance {
        Some(path) => read_abundance(path)?,
        None => generate_base(tree.leaf_labels().map(str::to_string).collect(), &base_config, &mut rng)
            .map_err(|e| CliError::Input(e.to_string()))?,
    };

    let mut methods: Vec<Method> = Vec::new();
    for m in &args.methods {
        let m = Method::from(*m);
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let config = CampaignConfig {
        methods: methods.clone(),
        fdr: args.fdr,
        correction,
        ..CampaignConfig::new(vec![scenario], args.replicates, args.seed)
    };
    let rows = run_campaign(&tree, &base, &config)?;
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        log::warn!("{failures} method runs failed");
    }
    let file = std::fs::File::create(&args.out)
        .map_err(|e| CliError::Output(format!("{}: {e}", args.out.display())))?;
    write_campaign_csv(&rows, std::io::BufWriter::new(file))
        .map_err(|e| CliError::Output(format!("{}: {e}", args.out.display())))?;

    let summary = summarize(&rows);
    for s in &summary {
        log::info!(
            "{:>9}: TPR {:.3} FDR {:.3} AUC {:.3}",
            s.method,
            s.mean_tpr,
            s.mean_fdr,
            s.mean_auc
        );
    }
    let report = SimulateReport {
        tree: args.tree.as_ref().map(|p| p.display().to_string()),
        n_taxa: tree.n_leaves(),
        abundance: args.abundance.as_ref().map(|p| p.display().to_string()),
        base: args.abundance.is_none().then_some(base_config),
        scenario,
        replicates: args.replicates,
        seed: args.seed,
        fdr: args.fdr,
        methods: methods.iter().map(|m| m.name()).collect(),
        failures,
        summary: &summary,
    };
    io::write_json(&report_path(&args.out), &report)?;
    Ok(summary)
}
