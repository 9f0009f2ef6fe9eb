pub mod capacity;
pub mod error;
pub mod family;
pub mod homology;
pub mod io;
pub mod morse;
mod numeric;
mod poly;
pub mod slice;

pub use error::{Error, Result};
