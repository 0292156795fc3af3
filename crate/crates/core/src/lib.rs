pub mod data;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod segment;
pub mod tensor;
pub mod training;

mod seed;

pub use error::{Error, Result};
pub use segment::{iou_1d, Segment};
