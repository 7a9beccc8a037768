//! Monte Carlo simulator of a spin-pair market with local prices.
//!
//! Nodes on a ring are buyers or sellers. A randomly chosen node interacts
//! with a neighbor: two buyers both raise their price by one unit, two sellers
//! both lower it, and a buyer-seller pair deals, keeping prices and redrawing
//! both spins. Long-range links at hierarchical offsets raise the effective
//! dimension `1 + q m / 2`.
//!
//! - [`model`]: spins, topology, the pair rule and pair selection.
//! - [`dynamics`]: sweeps, checkpoints and seeded replica ensembles.
//! - [`observables`]: histograms, modes, variance, kurtosis, domain walls,
//!   log-log fits.
//! - [`experiments`]: drivers for price distributions, peak growth, domain
//!   decay and the risk-versus-dimension curve.

pub mod dynamics;
pub mod experiments;
pub mod model;
pub mod observables;
pub mod rng;

pub use dynamics::{run_ensemble, ConfigError, Execution, ReplicaTrace, SimConfig, Snapshot};
pub use experiments::{Estimator, ExperimentError, RunRecord, Series, Settings};
pub use model::{ModelState, NodeState, Spin, Topology};
pub use observables::{Histogram, Modality, PowerLawFit};
pub use rng::{RandomSource, SimRng};
