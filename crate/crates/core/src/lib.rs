//! Quickest detection of data-injection attacks in sensor networks that
//! report one-bit quantized measurements.
//!
//! The crate is `no_std` (it needs `alloc`) and contains the numerical core:
//! network topologies and consensus weights, the bit-level signal model,
//! closed-form estimators, the centralized detectors (oracle CUSUM, GCUSUM
//! and the alternative statistic), running consensus, the distributed
//! DAG-CUSUM detector and the false-alarm bounds.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod centralized;
pub mod consensus;
pub mod dag;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod noise;
pub mod replication;
pub mod signal;
pub mod topology;

pub use error::{Error, Result};
pub use noise::NoiseModel;
pub use topology::{
    build_laplacian_weights, build_laplacian_weights_with, sigma2, validate_condition1,
    LaplacianScaling, NetworkTopology, ValidationReport, WeightMatrix,
};
pub use bounds::{
    rate_functions, theorem1_probability_floor, threshold_for_kappa, CertificateMode, FalseAlarmCertificate,
};
pub use centralized::{page_step, CusumOracle, GcusumBlocks, GcusumOutput, GcusumSnapshot};
pub use consensus::{lemma1_bound, ConsensusMatrices, ConsensusState, Innovations, LocalLambdaEstimates, Stream};
pub use dag::{DagConfig, DagCusum, DagSensorState, Eta3Scaling};
pub use estimators::SumStatistics;
pub use replication::{
    run_on_source, run_replication, DetectorKind, DetectorOutcome, DetectorPlan, ReplicationOutcome,
    ReplicationSpec, ReplicationTrace,
};
pub use signal::{BitHistory, BitRecord, BitSource, Phase, RunKind, ScenarioConfig, Threshold};
