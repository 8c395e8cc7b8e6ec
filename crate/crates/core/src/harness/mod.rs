//! Exit-time campaigns and the statistics used to check Kramers' law.

pub mod bvp;
pub mod campaign;
pub mod config;
pub mod excursions;
pub mod persist;
pub mod stats;

pub use bvp::{bvp_mean_exit_1d, BvpSolution};
pub use campaign::{run_exit_campaign, CampaignResult};
pub use config::{ExperimentConfig, InitSpec};
pub use excursions::{trace_excursions, ExcursionTrace, ExcursionTracer};
pub use stats::{
    estimate_kramers_slope, exit_location_mass, exit_stats, fit_log_times, kramers_window_fraction,
    kramers_window_fraction_by_sigma, ExitStats, SlopeFit, SlopeStatistic,
};
