//! Support vector machines with rational lp-norm margins (p = r/(r-s),
//! q = r/s).
//!
//! The crate trains the soft-margin primal
//!
//! ```text
//!   min  ||omega||_p^p + C sum_i xi_i
//!   s.t. y_i (omega' x_i + b) >= 1 - xi_i,   xi >= 0
//! ```
//!
//! through a second-order cone reformulation solved by a self-contained
//! interior-point method, and independently through the Lagrangian dual,
//! which is a polynomial optimization problem over the polytope
//! H_y = {alpha in [0, C]^n : sum_i alpha_i y_i = 0}. For integer q the dual
//! is attacked either by projected gradients (even q) or cell by cell over
//! the sign arrangement of the features (odd q), and a moment-SDP hierarchy
//! provides certified global bounds. Kernel and tensor machinery recovers
//! feature transformations from r-order kernels.

pub mod conic;
pub mod core;
pub mod dual;
pub mod error;
pub mod experiments;
pub mod feature_maps;
pub mod kernel_tensor;
pub mod moment;
pub mod primal;

#[cfg(test)]
pub(crate) mod fixtures {
    use nalgebra::DMatrix;

    use crate::core::Dataset;

    /// Six points in the plane whose classes are separated by a quadratic
    /// curve but not by any line.
    pub fn six_point_dataset() -> Dataset {
        let x = DMatrix::from_row_slice(6, 2, &[
            0.0, 0.0, //
            0.0, 1.0, //
            1.0, 0.0, //
            1.0, 1.0, //
            1.0, -1.0, //
            -1.0, 1.0,
        ]);
        Dataset::new(x, vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0]).unwrap()
    }
}

pub use crate::core::{Dataset, Hyperplane, MultiIndex, NormParam};
pub use crate::error::{Error, Result};
