//! Numerical laboratory for surfaces of prescribed mean curvature in R³.
//!
//! A surface Σ has prescribed mean curvature 𝓗 ∈ C¹(S²) when its mean curvature
//! satisfies `H_Σ = 𝓗 ∘ η` for its unit normal η. The mean curvature is the
//! average of the principal curvatures, so the unit sphere with its inner
//! orientation has `H = 1`.
//!
//! The crate is organized by construction:
//!
//! - [`sphere_field`]: the prescribed function 𝓗 on S² and its spherical calculus.
//! - [`flat_curves`]: flat cylinders α × R generated by planar curves.
//! - [`graph_solver`]: the Dirichlet problem for 𝓗-graphs and graph experiments.
//! - [`rotational`]: rotationally symmetric 𝓗-spheres and 𝓗-hemispheres.
//! - [`stability`]: the stability operator, principal eigenvalues, and the
//!   radius and curvature machinery built on them.
//! - [`suite`]: the reproducible acceptance run.

pub mod error;
pub mod export;
pub mod flat_curves;
pub mod graph_solver;
pub mod linalg;
pub mod rotational;
pub mod sphere_field;
pub mod stability;
pub mod suite;

pub use error::{Error, Result};

/// Ambient vectors in R³.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Planar vectors.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 3×3 matrices.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// 2×2 matrices.
pub type Mat2 = nalgebra::Matrix2<f64>;
