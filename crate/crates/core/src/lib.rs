//! Second-order variational analysis of the Ky-Fan κ-norm and tilt-stability checks for
//! problems `min ν·ϑ(X) + Ψκ(X)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod oracle;
pub mod par;
pub mod phik;
pub mod report;
pub mod secder;
pub mod spectral;
pub mod subgrad;
pub mod testgen;
pub mod tilt;
pub mod tol;
pub mod validate;
pub mod value;

pub use error::{Error, Result};
pub use tol::Tolerances;
