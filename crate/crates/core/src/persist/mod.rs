//! Model files, run configurations and trace files.

pub mod config;
pub mod model_file;
pub mod trace_file;

pub use config::{config_values, describe_keys, load_config, parse_config, RunConfig};
pub use model_file::{decode_model, encode_model, load_model, save_model, ModelHeader};
pub use trace_file::{load_traces, read_traces, save_traces, write_traces};
