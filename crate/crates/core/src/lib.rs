pub mod completion;
pub mod decompose;
pub mod error;
pub mod experiment;
pub mod instance;
pub mod io;
pub mod mask;
pub mod rank_one;
pub mod report;
pub mod spectral;
pub mod tensor;
pub mod unfold;

pub use error::{Error, Result};
