//! Homogeneous coordinates with projective-equivalence semantics.

use crate::error::{PlmError, Result};
use crate::multilinear::norm;

/// A nonzero coordinate vector standing for a point of projective space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneousVector<const D: usize>([f64; D]);

impl<const D: usize> HomogeneousVector<D> {
    pub fn new(coords: [f64; D]) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(PlmError::Domain("homogeneous vector has non-finite entries".into()));
        }
        if coords.iter().all(|&c| c == 0.0) {
            return Err(PlmError::Domain("the zero vector is not a projective point".into()));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64; D] {
        &self.0
    }

    /// Representative with unit Euclidean norm (sign left as is).
    pub fn unit(&self) -> [f64; D] {
        let n = norm(&self.0);
        std::array::from_fn(|i| self.0[i] / n)
    }

    /// Representative whose `k`-th component equals one.
    pub fn normalized_by(&self, k: usize) -> Result<[f64; D]> {
        let c = self.0[k];
        if c == 0.0 {
            return Err(PlmError::Domain(format!("component {k} vanishes; cannot normalize")));
        }
        Ok(std::array::from_fn(|i| self.0[i] / c))
    }

    /// Sign-invariant chordal distance between unit representatives.
    pub fn distance(&self, other: &Self) -> f64 {
        projective_distance(&self.0, &other.0)
    }
}

/// `min(|â - b̂|, |â + b̂|)` for unit representatives `â`, `b̂`; zero iff `a ∥ b`.
pub fn projective_distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return f64::INFINITY;
    }
    let mut minus = 0.0;
    let mut plus = 0.0;
    for i in 0..D {
        let (x, y) = (a[i] / na, b[i] / nb);
        minus += (x - y) * (x - y);
        plus += (x + y) * (x + y);
    }
    minus.min(plus).sqrt()
}

/// Max-abs difference after scaling both vectors so their last component is one.
pub fn last_component_distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let (la, lb) = (a[D - 1], b[D - 1]);
    if la == 0.0 || lb == 0.0 {
        return f64::INFINITY;
    }
    (0..D).map(|i| (a[i] / la - b[i] / lb).abs()).fold(0.0, f64::max)
}
