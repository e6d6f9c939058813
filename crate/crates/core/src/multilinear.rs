//! Exact small-dimension exterior algebra.
//!
//! Vectors are plain `[T; D]` arrays. The alternating tensor is normalized so
//! that `ε(0, 1, …, D-1) = +1`; every sign below follows from that anchor. In
//! particular the generalized cross product in four dimensions gives
//! `[e₁, e₂, e₃] = -e₄`, and the pairing identity
//! `⟨b, [a₁, …, a_{D-1}]⟩ = det|b, a₁, …, a_{D-1}|` holds exactly.
//!
//! All routines are generic over [`Scalar`], which is implemented for `f64`
//! and for exact rationals so that identities can be checked without roundoff.

use std::fmt::Debug;
use std::ops::Neg;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Float, Num, ToPrimitive, Zero};

use crate::error::{PlmError, Result};

/// Largest dimension served by the memoized permutation tables.
pub const MAX_DIM: usize = 6;

pub trait Scalar: Num + Clone + Debug + Neg<Output = Self> + PartialEq {
    /// Approximate magnitude, used only to choose elimination pivots.
    fn magnitude(&self) -> f64;
}

impl Scalar for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Rational64 {
    fn magnitude(&self) -> f64 {
        self.to_f64().map(f64::abs).unwrap_or(f64::INFINITY)
    }
}

impl Scalar for BigInt {
    fn magnitude(&self) -> f64 {
        self.to_f64().map(f64::abs).unwrap_or(f64::INFINITY)
    }
}

impl Scalar for BigRational {
    fn magnitude(&self) -> f64 {
        self.to_f64().map(f64::abs).unwrap_or(f64::INFINITY)
    }
}

pub type Vec3 = [f64; 3];
pub type Vec4 = [f64; 4];

/// Sign of the permutation given by 0-based `indices` of a `indices.len()`-dimensional
/// alternating tensor; 0 when an index repeats.
pub fn levi_civita(indices: &[usize]) -> Result<i8> {
    let d = indices.len();
    if let Some(&bad) = indices.iter().find(|&&i| i >= d) {
        return Err(PlmError::Domain(format!("index {bad} out of range for dimension {d}")));
    }
    let mut seen = vec![false; d];
    for &i in indices {
        if seen[i] {
            return Ok(0);
        }
        seen[i] = true;
    }
    // count cycles: sign = (-1)^(d - cycles)
    let mut visited = vec![false; d];
    let mut cycles = 0;
    for start in 0..d {
        if !visited[start] {
            cycles += 1;
            let mut k = start;
            while !visited[k] {
                visited[k] = true;
                k = indices[k];
            }
        }
    }
    Ok(if (d - cycles) % 2 == 0 { 1 } else { -1 })
}

/// All permutations of `0..d` paired with their signs, memoized per dimension.
pub fn signed_permutations(d: usize) -> &'static [(Vec<usize>, i8)] {
    static TABLES: [OnceLock<Vec<(Vec<usize>, i8)>>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    assert!(d <= MAX_DIM, "permutation tables only cover d <= {MAX_DIM}");
    TABLES[d].get_or_init(|| {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (0..d).collect();
        heap_permute(d, &mut current, 1, &mut out);
        out
    })
}

// Heap's algorithm: each swap flips the sign.
fn heap_permute(k: usize, a: &mut [usize], sign: i8, out: &mut Vec<(Vec<usize>, i8)>) -> i8 {
    if k <= 1 {
        out.push((a.to_vec(), sign));
        return sign;
    }
    let mut sign = heap_permute(k - 1, a, sign, out);
    for i in 0..k - 1 {
        if k % 2 == 0 {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
        sign = -sign;
        sign = heap_permute(k - 1, a, sign, out);
    }
    sign
}

fn signed<T: Scalar>(value: T, sign: i8) -> T {
    if sign < 0 {
        -value
    } else {
        value
    }
}

/// Antisymmetric `D×D` coefficient array, `B[i][j] = -B[j][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bivector<T, const D: usize> {
    coeffs: [[T; D]; D],
}

impl<T: Scalar, const D: usize> Bivector<T, D> {
    pub fn zero() -> Self {
        Self { coeffs: std::array::from_fn(|_| std::array::from_fn(|_| T::zero())) }
    }

    /// Builds a bivector from its strictly upper entries `upper(i, j)` with `i < j`.
    pub fn from_upper(mut upper: impl FnMut(usize, usize) -> T) -> Self {
        let mut b = Self::zero();
        for i in 0..D {
            for j in i + 1..D {
                let v = upper(i, j);
                b.coeffs[j][i] = -v.clone();
                b.coeffs[i][j] = v;
            }
        }
        b
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.coeffs[i][j]
    }

    pub fn as_array(&self) -> &[[T; D]; D] {
        &self.coeffs
    }

    pub fn map(&self, mut f: impl FnMut(&T) -> T) -> Self {
        Self::from_upper(|i, j| f(&self.coeffs[i][j]))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_upper(|i, j| self.coeffs[i][j].clone() + other.coeffs[i][j].clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_upper(|i, j| self.coeffs[i][j].clone() - other.coeffs[i][j].clone())
    }

    pub fn scale(&self, s: &T) -> Self {
        self.map(|v| v.clone() * s.clone())
    }

    pub fn neg(&self) -> Self {
        self.map(|v| -v.clone())
    }
}

impl<const D: usize> Bivector<f64, D> {
    /// Frobenius norm over all `D×D` entries.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `(a ∧ b)[i][j] = a[i] b[j] - a[j] b[i]`.
pub fn wedge2<T: Scalar, const D: usize>(a: &[T; D], b: &[T; D]) -> Bivector<T, D> {
    Bivector::from_upper(|i, j| a[i].clone() * b[j].clone() - a[j].clone() * b[i].clone())
}

/// Hodge star of a bivector in four dimensions:
/// `(⋆B)[k][l] = ½ Σ ε(i,j,k,l) B[i][j]`, evaluated as a sum over `i < j`
/// so that no division is needed.
pub fn hodge_star<T: Scalar>(b: &Bivector<T, 4>) -> Bivector<T, 4> {
    Bivector::from_upper(|k, l| {
        let mut acc = T::zero();
        for i in 0..4 {
            for j in i + 1..4 {
                let s = levi4(i, j, k, l);
                if s != 0 {
                    acc = acc + signed(b.coeffs[i][j].clone(), s);
                }
            }
        }
        acc
    })
}

fn levi4(i: usize, j: usize, k: usize, l: usize) -> i8 {
    levi_civita(&[i, j, k, l]).expect("indices below 4")
}

/// Hodge star of the wedge of `D-2` vectors, as a bivector:
/// `(⋆(a₁∧…∧a_n))[i][k] = Σ ε(i, k, l₁, …, l_n) a₁[l₁] ⋯ a_n[l_n]`.
///
/// For `D = 4` this agrees with `hodge_star(wedge2(a, b))`.
pub fn star_of_wedge<T: Scalar, const D: usize>(vectors: &[[T; D]]) -> Result<Bivector<T, D>> {
    if D < 2 || vectors.len() + 2 != D {
        return Err(PlmError::Domain(format!(
            "star_of_wedge needs {} vectors of dimension {D}, got {}",
            D.saturating_sub(2),
            vectors.len()
        )));
    }
    let mut out = Bivector::<T, D>::zero();
    for (perm, sign) in signed_permutations(D) {
        let (i, k) = (perm[0], perm[1]);
        if i > k {
            continue;
        }
        let mut term = T::one();
        for (a, &l) in vectors.iter().zip(&perm[2..]) {
            term = term * a[l].clone();
        }
        out.coeffs[i][k] = out.coeffs[i][k].clone() + signed(term, *sign);
    }
    for i in 0..D {
        for k in i + 1..D {
            out.coeffs[k][i] = -out.coeffs[i][k].clone();
        }
    }
    Ok(out)
}

/// Generalized cross product of `D-1` vectors:
/// `[a₁, …, a_{D-1}]_i = Σ ε(i, i₂, …, i_D) a₁[i₂] ⋯ a_{D-1}[i_D]`.
pub fn cross<T: Scalar, const D: usize>(vectors: &[[T; D]]) -> Result<[T; D]> {
    if D == 0 || vectors.len() + 1 != D {
        return Err(PlmError::Domain(format!(
            "cross product in dimension {D} needs {} vectors, got {}",
            D.saturating_sub(1),
            vectors.len()
        )));
    }
    if D == 3 {
        let (a, b) = (&vectors[0], &vectors[1]);
        let c = [
            a[1].clone() * b[2].clone() - a[2].clone() * b[1].clone(),
            a[2].clone() * b[0].clone() - a[0].clone() * b[2].clone(),
            a[0].clone() * b[1].clone() - a[1].clone() * b[0].clone(),
        ];
        return Ok(std::array::from_fn(|i| c[i].clone()));
    }
    let mut out: [T; D] = std::array::from_fn(|_| T::zero());
    for (perm, sign) in signed_permutations(D) {
        let mut term = T::one();
        for (a, &l) in vectors.iter().zip(&perm[1..]) {
            term = term * a[l].clone();
        }
        out[perm[0]] = out[perm[0]].clone() + signed(term, *sign);
    }
    Ok(out)
}

/// Determinant of the matrix whose rows are `vectors`.
///
/// Cofactor expansion for `D <= 4`; Gaussian elimination with partial pivoting
/// (by [`Scalar::magnitude`]) above that.
pub fn det<T: Scalar, const D: usize>(vectors: &[[T; D]]) -> Result<T> {
    if vectors.len() != D {
        return Err(PlmError::Domain(format!("determinant of {} rows in dimension {D}", vectors.len())));
    }
    let rows: Vec<Vec<T>> = vectors.iter().map(|v| v.to_vec()).collect();
    if D <= 4 {
        let cols: Vec<usize> = (0..D).collect();
        Ok(cofactor(&rows, 0, &cols))
    } else {
        Ok(eliminate(rows))
    }
}

fn cofactor<T: Scalar>(rows: &[Vec<T>], row: usize, cols: &[usize]) -> T {
    match cols.len() {
        0 => T::one(),
        1 => rows[row][cols[0]].clone(),
        2 => {
            rows[row][cols[0]].clone() * rows[row + 1][cols[1]].clone()
                - rows[row][cols[1]].clone() * rows[row + 1][cols[0]].clone()
        }
        _ => {
            let mut acc = T::zero();
            for (k, &c) in cols.iter().enumerate() {
                let entry = rows[row][c].clone();
                if entry.is_zero() {
                    continue;
                }
                let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let minor = entry * cofactor(rows, row + 1, &rest);
                acc = if k % 2 == 0 { acc + minor } else { acc - minor };
            }
            acc
        }
    }
}

fn eliminate<T: Scalar>(mut m: Vec<Vec<T>>) -> T {
    let n = m.len();
    let mut result = T::one();
    for col in 0..n {
        let pivot = (col..n).max_by(|&a, &b| m[a][col].magnitude().total_cmp(&m[b][col].magnitude())).expect("non-empty range");
        if m[pivot][col].is_zero() {
            return T::zero();
        }
        if pivot != col {
            m.swap(pivot, col);
            result = -result;
        }
        let p = m[col][col].clone();
        result = result * p.clone();
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = m[r][col].clone() / p.clone();
            for c in col..n {
                let v = m[col][c].clone() * factor.clone();
                m[r][c] = m[r][c].clone() - v;
            }
        }
    }
    result
}

/// Determinant of a runtime-sized square matrix (rows), by partial-pivot elimination.
pub fn det_dyn(rows: &[Vec<f64>]) -> Result<f64> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PlmError::Domain("det_dyn needs a square matrix".into()));
    }
    Ok(eliminate(rows.to_vec()))
}

/// Determinant of the rows `v - base` (or of `vectors` when `base` is `None`),
/// evaluated exactly on the given floats and rounded at the end.
///
/// For nearly singular matrices this is accurate where floating-point
/// elimination only resolves the determinant to `ε·(Hadamard bound)`.
pub fn det_exact<const D: usize>(vectors: &[[f64; D]], base: Option<&[f64; D]>) -> Result<f64> {
    let all = vectors.iter().chain(base).flat_map(|v| v.iter());
    if let Some(x) = all.clone().find(|x| !x.is_finite()) {
        return Err(PlmError::Domain(format!("non-finite entry {x}")));
    }
    // Every entry is an integer multiple of 2^e0.
    let e0 = all.filter(|x| **x != 0.0).map(|x| Float::integer_decode(*x).1).min().unwrap_or(0);
    let int = |x: f64| -> BigInt {
        let (m, e, sign) = Float::integer_decode(x);
        let v = BigInt::from(m) << (e - e0) as usize;
        if sign < 0 {
            -v
        } else {
            v
        }
    };
    let b: Vec<BigInt> = match base {
        Some(b) => b.iter().map(|&x| int(x)).collect(),
        None => vec![BigInt::zero(); D],
    };
    let rows: Vec<[BigInt; D]> = vectors.iter().map(|v| std::array::from_fn(|k| int(v[k]) - b[k].clone())).collect();
    let d = if D <= 4 {
        det(&rows)?
    } else {
        if D > MAX_DIM {
            return Err(PlmError::Domain(format!("exact determinant supports d ≤ {MAX_DIM}")));
        }
        signed_permutations(D).iter().fold(BigInt::zero(), |acc, (perm, sign)| {
            let term = perm.iter().enumerate().fold(BigInt::from(*sign), |t, (r, &c)| t * &rows[r][c]);
            acc + term
        })
    };
    let shift = d.bits().saturating_sub(64);
    let top = (d >> shift as usize).to_f64().expect("64-bit value");
    Ok(scale_pow2(top, shift as i64 + D as i64 * e0 as i64))
}

/// `x·2^k` without intermediate overflow of the power.
fn scale_pow2(mut x: f64, mut k: i64) -> f64 {
    while k != 0 {
        let step = k.clamp(-1000, 1000);
        x *= 2f64.powi(step as i32);
        k -= step;
    }
    x
}

/// The dual pairing `⟨f, ν⟩ = Σ f[i] ν[i]`.
pub fn pair<T: Scalar, const D: usize>(f: &[T; D], nu: &[T; D]) -> T {
    f.iter().zip(nu).fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
}

/// Slice form of [`pair`] that reports a dimension mismatch instead of relying on types.
pub fn try_pair(f: &[f64], nu: &[f64]) -> Result<f64> {
    if f.len() != nu.len() {
        return Err(PlmError::Domain(format!("pairing of dimensions {} and {}", f.len(), nu.len())));
    }
    Ok(f.iter().zip(nu).map(|(a, b)| a * b).sum())
}

pub fn norm<const D: usize>(v: &[f64; D]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Product of row norms; bounds `|det|` from above (Hadamard).
pub fn hadamard_bound<const D: usize>(vectors: &[[f64; D]]) -> f64 {
    vectors.iter().map(norm).product()
}

pub fn add<const D: usize>(a: &[f64; D], b: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|i| a[i] + b[i])
}

pub fn sub<const D: usize>(a: &[f64; D], b: &[f64; D]) -> [f64; D] {
    std::array::from_fn(|i| a[i] - b[i])
}

pub fn scale<const D: usize>(a: &[f64; D], s: f64) -> [f64; D] {
    std::array::from_fn(|i| a[i] * s)
}

/// Least-squares coefficients of `target` in the span of `basis` (normal equations),
/// together with the relative norm of the component orthogonal to the span.
///
/// Returns `None` when the Gram matrix is numerically singular.
pub fn span_solve<const D: usize>(target: &[f64; D], basis: &[[f64; D]]) -> Option<(Vec<f64>, f64)> {
    let k = basis.len();
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            gram[i][j] = pair(&basis[i], &basis[j]);
        }
        rhs[i] = pair(&basis[i], target);
    }
    let coeffs = solve_dense(gram, rhs)?;
    let mut fitted = [0.0; D];
    for (c, b) in coeffs.iter().zip(basis) {
        for (acc, v) in fitted.iter_mut().zip(b) {
            *acc += c * v;
        }
    }
    let resid = norm(&sub(target, &fitted));
    let scale = norm(target).max(basis.iter().zip(&coeffs).map(|(b, c)| norm(b) * c.abs()).fold(0.0, f64::max));
    let rel = if scale > 0.0 { resid / scale } else { 0.0 };
    Some((coeffs, rel))
}

/// Solves a small dense system by partial-pivot elimination; `None` if singular
/// relative to the matrix scale.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(pivot, col);
        b.swap(pivot, col);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Like [`span_solve`] but reports a numerically dependent basis as degenerate.
///
/// The basis counts as dependent when the volume it spans (square root of the
/// Gram determinant) falls below `eps` times the product of its norms.
pub fn span_fit<const D: usize>(target: &[f64; D], basis: &[[f64; D]], eps: f64) -> Result<(Vec<f64>, f64)> {
    let k = basis.len();
    let gram: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| pair(&basis[i], &basis[j])).collect()).collect();
    let volume = det_dyn(&gram)?.max(0.0).sqrt();
    if volume <= eps * hadamard_bound(basis) {
        return Err(PlmError::Degenerate { site: None, discriminant: volume });
    }
    span_solve(target, basis).ok_or(PlmError::Degenerate { site: None, discriminant: volume })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e<const D: usize>(i: usize) -> [f64; D] {
        std::array::from_fn(|k| if k == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn levi_civita_examples() {
        assert_eq!(levi_civita(&[0, 1, 2, 3]).unwrap(), 1);
        assert_eq!(levi_civita(&[1, 0, 2, 3]).unwrap(), -1);
        assert_eq!(levi_civita(&[0, 0, 2, 3]).unwrap(), 0);
        assert!(levi_civita(&[0, 1, 4, 3]).is_err());
    }

    #[test]
    fn permutation_table_signs_match_levi_civita() {
        for d in 1..=MAX_DIM {
            let table = signed_permutations(d);
            assert_eq!(table.len(), (1..=d).product::<usize>());
            for (p, s) in table {
                assert_eq!(levi_civita(p).unwrap(), *s);
            }
        }
    }

    #[test]
    fn wedge_examples() {
        let b = wedge2(&e::<4>(0), &e::<4>(1));
        assert_eq!(*b.get(0, 1), 1.0);
        assert_eq!(*b.get(1, 0), -1.0);
        assert_eq!(b.norm(), 2f64.sqrt());

        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(wedge2(&a, &a), Bivector::zero());

        let b = wedge2(&[1.0, 2.0, 0.0, 0.0], &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(*b.get(0, 1), 1.0);
        assert_eq!(*b.get(0, 2), 1.0);
        assert_eq!(*b.get(1, 2), 2.0);
        assert_eq!(*b.get(0, 3), 0.0);
        assert_eq!(*b.get(1, 3), 0.0);
        assert_eq!(*b.get(2, 3), 0.0);
    }

    #[test]
    fn hodge_examples() {
        let s = hodge_star(&wedge2(&e::<4>(0), &e::<4>(1)));
        assert_eq!(s, wedge2(&e::<4>(2), &e::<4>(3)));
        assert_eq!(hodge_star(&Bivector::<f64, 4>::zero()), Bivector::zero());
    }

    #[test]
    fn cross_examples() {
        assert_eq!(cross(&[e::<3>(0), e::<3>(1)]).unwrap(), e::<3>(2));
        assert_eq!(cross(&[e::<4>(0), e::<4>(1), e::<4>(2)]).unwrap(), [0.0, 0.0, 0.0, -1.0]);
        let a = [1.0, 2.0, -1.0, 0.5];
        let b = [0.0, 3.0, 1.0, 2.0];
        assert_eq!(cross(&[a, a, b]).unwrap(), [0.0; 4]);
        assert!(cross(&[a, b]).is_err());
    }

    #[test]
    fn star_of_wedge_matches_hodge_in_four_dims() {
        let a = [1.0, -2.0, 0.5, 3.0];
        let b = [0.25, 1.0, -1.5, 2.0];
        let lhs = star_of_wedge(&[a, b]).unwrap();
        let rhs = hodge_star(&wedge2(&a, &b));
        assert!(lhs.sub(&rhs).norm() < 1e-14);
    }

    #[test]
    fn det_examples() {
        let id = [e::<4>(0), e::<4>(1), e::<4>(2), e::<4>(3)];
        assert_eq!(det(&id).unwrap(), 1.0);
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(det(&[a, id[1], a, id[3]]).unwrap(), 0.0);
        assert!(det(&[a, a]).is_err());
        // hyperbolic-paraboloid conormal jet rows (ν, ν_x, ν_y, ν_xy) at (x, y)
        for &(x, y) in &[(0.3, 0.7), (-0.9, 0.2), (1.5, -2.0)] {
            let rows = [[-y, -x, 1.0, -x * y], [0.0, -1.0, 0.0, -y], [-1.0, 0.0, 0.0, -x], [0.0, 0.0, 0.0, -1.0]];
            assert!((det(&rows).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pairing_examples() {
        let (x, y) = (0.3, 0.7);
        let f = [x, y, x * y, -1.0];
        let nu = [-y, -x, 1.0, -x * y];
        assert!(pair(&f, &nu).abs() < 1e-16);
        assert_eq!(pair(&e::<4>(0), &e::<4>(0)), 1.0);
        assert!(try_pair(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn det_dyn_agrees_with_cofactor() {
        let rows = [[2.0, -1.0, 0.5, 3.0], [1.0, 0.0, 2.0, -1.0], [0.5, 4.0, 1.0, 0.0], [3.0, 1.0, -2.0, 1.0]];
        let dyn_rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        let a = det(&rows).unwrap();
        let b = det_dyn(&dyn_rows).unwrap();
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn span_solve_recovers_combination() {
        let basis = [[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0], [1.0, 1.0, 0.0, 0.0]];
        let t: [f64; 4] = std::array::from_fn(|i| 2.0 * basis[0][i] - 0.5 * basis[1][i] + 3.0 * basis[2][i]);
        let (c, rel) = span_solve(&t, &basis).unwrap();
        assert!((c[0] - 2.0).abs() < 1e-13 && (c[1] + 0.5).abs() < 1e-13 && (c[2] - 3.0).abs() < 1e-13);
        assert!(rel < 1e-14);
        let (_, rel) = span_solve(&[0.0, 0.0, 0.0, 1.0], &[basis[1], basis[2], [1.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!(rel > 0.5);
    }

    #[test]
    fn exact_det_matches_rational_and_resolves_near_singular() {
        let a = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0 + 1e-13]];
        let q = |v: [f64; 3]| v.map(|x| BigRational::from_float(x).unwrap());
        let want = det(&a.map(q)).unwrap().to_f64().unwrap();
        let got = det_exact(&a, None).unwrap();
        assert!((got - want).abs() <= 1e-15 * want.abs(), "{got} vs {want}");
        let base = [0.5, -0.25, 1e-20];
        let shifted = a.map(|r| add(&r, &base));
        let d = det_exact(&shifted, Some(&base)).unwrap();
        assert!((d - det_exact(&a, None).unwrap()).abs() < 1e-3 * want.abs());
        let i6: Vec<[f64; 6]> = (0..6).map(|k| std::array::from_fn(|c| if c == k { 2.0 } else { 0.0 })).collect();
        assert_eq!(det_exact(&i6, None).unwrap(), 64.0);
        assert!(det_exact(&[[f64::NAN, 0.0], [0.0, 1.0]], None).is_err());
    }
}
