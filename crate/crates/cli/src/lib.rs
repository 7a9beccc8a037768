//! Command-line front end: flag parsing, experiment dispatch and
//! CSV/JSON/gnuplot output.

pub mod args;
pub mod output;

use spinprice_core::experiments::{
    domains_record, experiment_custom, experiment_domains_vs_time, experiment_pdf_evolution,
    experiment_pdf_vs_dimension, experiment_peak_vs_size, experiment_peak_vs_time, experiment_risk_vs_dimension,
    pdf_vs_dimension_records, peak_vs_size_record, peak_vs_time_record, risk_record,
};
use spinprice_core::{ExperimentError, RunRecord, Settings};

pub use args::{parse_cli, Experiment, Invocation};
pub use output::{config_hash, write_records, Format, OutputSpec, WriteError};

/// Runs the selected experiment and returns its records.
pub fn run(inv: &Invocation) -> Result<Vec<RunRecord>, ExperimentError> {
    let settings = Settings {
        estimator: inv.estimator,
        execution: inv.execution,
    };
    let config = &inv.config;
    let dims = |default: Vec<f64>| inv.dimensions.clone().unwrap_or(default);
    Ok(match inv.experiment {
        Experiment::Fig1 => {
            let rows = experiment_pdf_vs_dimension(config, &dims(args::FIG1_DIMENSIONS.to_vec()), &settings)?;
            pdf_vs_dimension_records(&rows)?
        }
        Experiment::Fig3 => vec![experiment_pdf_evolution(config, &settings)?],
        Experiment::Fig4 => vec![peak_vs_time_record(config, experiment_peak_vs_time(config, &settings)?)],
        Experiment::Fig5 => vec![domains_record(config, &experiment_domains_vs_time(config, &settings)?)?],
        Experiment::Fig6 => {
            let sizes = inv.sizes.clone().unwrap_or(args::FIG6_SIZES.to_vec());
            vec![peak_vs_size_record(
                config,
                &experiment_peak_vs_size(config, &sizes, &settings)?,
            )?]
        }
        Experiment::Fig7 => {
            let points = experiment_risk_vs_dimension(config, &dims(args::fig7_dimensions()), &settings)?;
            vec![risk_record(config, &points)?]
        }
        Experiment::Custom => vec![experiment_custom(config, &settings)?],
    })
}
