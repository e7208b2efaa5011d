//! PSF estimation, image metrics, SNR theory and sweeps.

pub mod metrics;
pub mod psf;
pub mod sweep;
pub mod theory;

pub use metrics::{rmse, rmse_snr, snr_from_rmse};
pub use psf::{fit_gaussian, fit_gaussian_image, greens, predict_via_psf, psf, GaussianFit};
pub use sweep::{
    gen_uniform_object, rmse_components, run_sweep, sweep_ensemble, BudgetMode, ReconMethod, RmseComponents,
    SnrRecord, SweepConfig, SweepFamily, SweepParam, SweepPoint,
};
pub use theory::{
    comparison_ratios, j_opt, rmse0_ortho, rmse0_random, rmse_gaussian, rmse_poisson, theory_snr0_ortho,
    theory_snr0_random, theory_snr_noise, ComparisonRatios, NoiseTheory, TheoryFamily, TheoryParams,
};
