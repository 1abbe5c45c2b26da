pub mod dynamics;
pub mod error;
pub mod formats;
pub mod fpu_model;
pub mod gibbs;
pub mod criteria;
pub mod hankel;
pub mod lie;
pub mod moments;
pub mod precision;
pub mod reference;
pub mod stats;
pub mod stieltjes;

pub use error::{Error, Result};
