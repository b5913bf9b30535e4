//! Indistinguishability radii and the machinery that certifies them.

pub mod bayes;
pub mod divergence;
pub mod orthant;
pub mod priors;

pub use bayes::{
    bayes_error_estimate, bayes_error_of_test, BayesErrorEstimate, DiracPrior, MeanPrior,
    ProductPrior,
};
pub use divergence::{
    ball_lower_separation, ball_lower_separation_exact, ball_prior_divergence,
    ball_prior_divergence_report, chi2_budget, chi2_two_point, chi2_two_point_report,
    two_point_separation, DivergenceReport,
};
pub use orthant::{
    inflated_orthant_rho, moment_order, prior_parameters, sample_conditional_prior,
    sample_conditional_prior_shifted, tv_bound_product, tv_distance_1d, ConditionalPrior,
    InflatedBranch, InflatedRho, PriorParameters, TvReport,
};
pub use priors::{construct_moment_priors, moment_gaps, scaled_moment_gaps, DiscretePrior};
