pub mod archive;
pub mod edges;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod manifest;
pub mod mask;
pub mod models;
pub mod pipeline;
pub mod raster;
pub mod segmentation;
pub mod site;
pub mod synth;

pub use error::{Error, Result};
pub use site::{Grade, Site};
