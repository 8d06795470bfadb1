//! Numerical toolkit for infinitesimal bendings of sampled Euclidean
//! submanifolds `f: Mⁿ → ℝᵐ`.
//!
//! A bending `𝓣` is checked against `⟨∂_i𝓣, f_*∂_j⟩ + ⟨f_*∂_i, ∂_j𝓣⟩ = 0`,
//! condensed into its associated pair `(β, 𝓔)`, tested against the linear
//! fundamental system, classified as trivial or not, and rebuilt from a pair
//! by integrating the ambient endomorphism field `𝒟`.
//!
//! ```
//! use infbend::prelude::*;
//!
//! let scene = scene(&Spec::parse("cylinder").unwrap(), 32, None).unwrap();
//! let geom = build_geometry(&scene).unwrap();
//! let tol = Tolerance::for_grid(geom.grid());
//! let t = bending(&Spec::parse("circle_fourier:2").unwrap(), &geom).unwrap();
//! let (_, pair) = associated_pair(&geom, &t, &tol).unwrap();
//! assert!(verify(&geom, &pair, &tol).unwrap().pass);
//! ```

pub mod bending;
pub mod classify;
pub mod error;
pub mod fundsys;
pub mod geometry;
pub mod io;
mod linalg;
pub mod numgrid;
pub mod products;
pub mod reconstruct;
pub mod scenes;
pub mod tolerance;

pub use error::{Error, Result};

/// The names most programs need.
pub mod prelude {
    pub use crate::bending::{associated_pair, bending_residual, AssociatedPair, BendingField, DerivedTensors};
    pub use crate::classify::{fit_killing, pair_triviality, solve_e_from_beta};
    pub use crate::fundsys::verify;
    pub use crate::geometry::{build_geometry, structure_residuals, FramedGeometry, ImmersionScene};
    pub use crate::io::SceneFile;
    pub use crate::numgrid::{ChartGrid, GridField};
    pub use crate::reconstruct::reconstruct;
    pub use crate::scenes::{bending, pair, scene, Spec};
    pub use crate::tolerance::Tolerance;
    pub use crate::{Error, Result};
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scenes.md")]
    mod scenes {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/bendings.md")]
    mod bendings {}
    #[doc = include_str!("../../../book/src/system.md")]
    mod system {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    mod reconstruction {}
    #[doc = include_str!("../../../book/src/triviality.md")]
    mod triviality {}
    #[doc = include_str!("../../../book/src/products.md")]
    mod products {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
