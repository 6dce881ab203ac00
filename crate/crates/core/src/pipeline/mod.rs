//! The dataset factory: configuration, batch generation, parameter sweeps,
//! manifests.

pub mod config;
pub mod dataset;
pub mod manifest;
pub mod sweep;

pub use config::{echo_config, parse_config, parse_config_str, GenerationConfig};
pub use dataset::{
    build_model, generate_dataset, sample_params, worker_pool, DatasetReport, SampleParams,
};
pub use manifest::{merge_manifests, read_manifest, write_manifest, ManifestRow};
pub use sweep::{sweep_expand, SweepAxes, SweepRow};
