//! Explicit tanh networks that approximate smooth functions with certified
//! error bounds in Sobolev norms.

pub mod assembler;
pub mod bounds;
pub mod catalog;
pub mod combinatorics;
pub mod error;
pub mod linalg;
pub mod monomial;
pub mod netgraph;
pub mod partition;
pub mod product;
pub mod scalar;
pub mod tanh_calculus;
pub mod verifier;

pub use error::{Error, Result};
pub use netgraph::{HpNetwork, Network, TanhNetwork};
pub use scalar::{Hp, Real};
