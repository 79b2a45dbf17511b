//! Synthetic differential-abundance experiments: simulate group differences
//! on a homogeneous abundance table, test every taxon, correct the p-values
//! with each method, and score the rejections against the truth.

mod campaign;
mod data;
mod metrics;
mod pam;
mod simulate;
mod wilcoxon;

pub use campaign::{
    fmt_num, replicate_seed, run_campaign, summarize, write_campaign_csv, write_roc_csv, CampaignConfig,
    CampaignRow, Method, MethodSummary,
};
pub use data::{generate_base, AbundanceMatrix, BaseDataConfig};
pub use metrics::{evaluate, roc_grid, RankKey, ReplicateMetrics, ROC_POINTS};
pub use pam::{pam_cluster, PamResult};
pub use simulate::{Replicate, SimScenario, Simulator, Variant};
pub use wilcoxon::{average_ranks, wilcoxon_test};
