//! Projective Lelieuvre map between surfaces in projective 3-space and their
//! conormal surfaces, in smooth, hypersurface and discrete form.
//!
//! The crate reconstructs surfaces from conormal data by explicit pointwise
//! formulas and checks every accompanying identity as a numerical invariant.
//! Reports are plain data ([`report::InvariantReport`]) so callers decide what
//! counts as a pass.

pub mod affine_gauge;
pub mod error;
pub mod fields;
pub mod multilinear;
pub mod par;
pub mod plm_discrete;
pub mod plm_hyper;
pub mod plm_smooth;
pub mod poly;
pub mod projective;
pub mod report;
pub mod scenarios;

pub use error::{PlmError, Result, Site};
pub use multilinear::{Bivector, Scalar, Vec3, Vec4};
pub use projective::HomogeneousVector;
pub use report::{IdentityRecord, InvariantReport};

/// Default relative threshold below which a determinant counts as vanishing.
pub const DEFAULT_DEGENERACY_EPS: f64 = 1e-10;
