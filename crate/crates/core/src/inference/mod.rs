mod fdr;
mod normal;
mod pipeline;
mod zscore;

pub use fdr::{bh_adjust, by_adjust, fdr_threshold, quantile_for_rejections, t_max, FdrThreshold};
pub use normal::{normal_cdf, normal_quantile};
pub use pipeline::{
    bic_penalty, bic_select, correct, correct_each, default_alpha_grid, default_lambda_grid, leaf_inference, q_values,
    requantify, select_model, BicCell, BicTrace, CorrectionConfig, CorrectionResult, LeafInference, Selection,
    SUPPORT_TOL,
};
pub use zscore::{p_to_z, ZScoreVector, P_CLAMP};
