//! Binary system files, test-matrix generators and run configurations.

mod binary;
mod config;
mod poisson;

pub use binary::{decode_system, encode_system, read_system, write_system, SystemFile};
pub use poisson::{gen_poisson3d, manufactured_rhs, poisson3d_nnz};
pub use config::{parse_run_config, parse_run_config_str, BenchMode, BenchSpec, LoadedSystem, RunConfig, SystemSpec};
