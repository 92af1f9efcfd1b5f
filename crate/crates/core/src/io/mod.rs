//! File formats: XYZ point clouds, OBJ meshes, binary model files and flat
//! `key = value` run configurations.

mod config;
mod model_file;
mod obj;
mod xyz;

pub use config::RunConfig;
pub use model_file::{load_model, model_from_bytes, model_to_bytes, save_model, MODEL_VERSION};
pub use obj::{format_obj, parse_obj, read_obj, write_obj};
pub use xyz::{format_xyz, parse_xyz, read_xyz, write_xyz};

use crate::error::Error;

pub(crate) fn parse_error(source: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        msg: msg.into(),
    }
}
