//! The map for hypersurfaces in P^{n+1}, `n = D - 2 ≤ 4`:
//!
//! ```text
//! f∧f_α = Σ_β A_αβ ⋆(ν_1∧…∧ν∧…∧ν_n)      (ν in slot β)
//! ```
//!
//! with a constant-or-varying invertible matrix `A`. Reconstruction uses one
//! pivot entry of `A`:
//!
//! ```text
//! f = -√(A_αγ / det|ν_αγ, ν, ν_1, …, ν_n|) · [ν, ν_1, …, ν_n].
//! ```
//!
//! The sign of `A` is fixed by the round trip: [`recover_a`] followed by
//! [`hyper_reconstruct`] gives back the surface it started from.

use crate::error::{PlmError, Result, Site};
use crate::fields::{GridSpec, HyperJet, HyperJetField, JetField, NdField, NdGridSpec};
use crate::multilinear::{cross, det, det_dyn, hadamard_bound, norm, pair, span_fit, star_of_wedge, sub, wedge2, Bivector};
use crate::par;
use crate::report::{relative, IdentityRecord, InvariantReport, ResidualTable};

/// An invertible `n × n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AMatrix {
    rows: Vec<Vec<f64>>,
}

impl AMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if !(1..=4).contains(&n) || rows.iter().any(|r| r.len() != n) {
            return Err(PlmError::Domain(format!("A must be square with n ≤ 4, got {n} rows")));
        }
        if rows.iter().flatten().any(|a| !a.is_finite()) {
            return Err(PlmError::Domain("A has non-finite entries".into()));
        }
        let d = det_dyn(&rows)?;
        let scale = rows.iter().map(|r| r.iter().map(|a| a * a).sum::<f64>().sqrt()).product::<f64>();
        if d.abs() <= 1e-12 * scale || scale == 0.0 {
            return Err(PlmError::Domain(format!("A is singular (det {d:e})")));
        }
        Ok(Self { rows })
    }

    /// Row-major `n²` entries.
    pub fn from_flat(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(PlmError::Domain(format!("expected {} entries for a {n}×{n} matrix, got {}", n * n, entries.len())));
        }
        Self::new(entries.chunks(n).map(|r| r.to_vec()).collect())
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.rows[a][b]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn flat(&self) -> Vec<f64> {
        self.rows.concat()
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        Self::new(self.rows.iter().map(|r| r.iter().map(|a| a * s).collect()).collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.flat().iter().zip(other.flat()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Source of the matrix `A` at each grid site.
pub trait AField: Sync {
    fn a_at(&self, idx: &[usize]) -> Result<AMatrix>;
}

/// The same matrix everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantA(pub AMatrix);

impl AField for ConstantA {
    fn a_at(&self, _idx: &[usize]) -> Result<AMatrix> {
        Ok(self.0.clone())
    }
}

impl AField for NdField<Vec<f64>> {
    fn a_at(&self, idx: &[usize]) -> Result<AMatrix> {
        let flat = self.get(idx);
        let n = (flat.len() as f64).sqrt().round() as usize;
        AMatrix::from_flat(n, flat).map_err(|e| match e {
            PlmError::Domain(m) => PlmError::Domain(format!("at {idx:?}: {m}")),
            other => other,
        })
    }
}

fn check_n<const D: usize>(jet: &HyperJet<D>, a: &AMatrix) -> Result<usize> {
    let n = jet.n();
    if n + 2 != D || a.n() != n {
        return Err(PlmError::Domain(format!("jet has {n} parameters in dimension {D}, A is {}×{}", a.n(), a.n())));
    }
    Ok(n)
}

/// `[ν, ν_1, …, ν_n]` and the rows it is built from.
fn frame<const D: usize>(jet: &HyperJet<D>) -> Result<(Vec<[f64; D]>, [f64; D])> {
    let mut rows = vec![jet.value];
    rows.extend(jet.first.iter().copied());
    let c = cross(&rows)?;
    Ok((rows, c))
}

/// `det|ν_αγ, ν, ν_1, …, ν_n|` with its Hadamard bound.
fn pivot_det<const D: usize>(jet: &HyperJet<D>, rows: &[[f64; D]], pivot: (usize, usize)) -> Result<(f64, f64)> {
    let mut m = vec![jet.second[pivot.0][pivot.1]];
    m.extend_from_slice(rows);
    Ok((det(&m)?, hadamard_bound(&m)))
}

/// Reconstructs the surface point from a conormal jet and one pivot entry of `A`.
pub fn hyper_reconstruct<const D: usize>(jet: &HyperJet<D>, a: &AMatrix, pivot: (usize, usize)) -> Result<[f64; D]> {
    hyper_reconstruct_with(jet, a, pivot, crate::DEFAULT_DEGENERACY_EPS)
}

pub fn hyper_reconstruct_with<const D: usize>(
    jet: &HyperJet<D>,
    a: &AMatrix,
    pivot: (usize, usize),
    eps: f64,
) -> Result<[f64; D]> {
    let n = check_n(jet, a)?;
    if pivot.0 >= n || pivot.1 >= n {
        return Err(PlmError::Domain(format!("pivot {pivot:?} out of range for n = {n}")));
    }
    let (rows, c) = frame(jet)?;
    let (d, b) = pivot_det(jet, &rows, pivot)?;
    if d.abs() <= eps * b {
        return Err(PlmError::Degenerate { site: None, discriminant: d });
    }
    let ratio = a.get(pivot.0, pivot.1) / d;
    if ratio <= 0.0 {
        return Err(PlmError::PivotMismatch { site: None, ratio });
    }
    let s = ratio.sqrt();
    Ok(c.map(|v| -s * v))
}

/// Recovers `A` from matched jets: `A_αγ = -λ ⟨f_α, ν_γ⟩`, where `f = λ [ν, ν_1, …, ν_n]`.
pub fn recover_a<const D: usize>(f: &HyperJet<D>, nu: &HyperJet<D>) -> Result<AMatrix> {
    let n = nu.n();
    if n + 2 != D || f.n() != n {
        return Err(PlmError::Domain(format!("jets need {} parameters in dimension {D}", D - 2)));
    }
    let (rows, c) = frame(nu)?;
    let cc = pair(&c, &c);
    if cc.sqrt() <= crate::DEFAULT_DEGENERACY_EPS * hadamard_bound(&rows) {
        return Err(PlmError::Degenerate { site: None, discriminant: cc.sqrt() });
    }
    let lambda = pair(&f.value, &c) / cc;
    let entries: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|g| -lambda * pair(&f.first[a], &nu.first[g])).collect()).collect();
    AMatrix::new(entries)
}

/// `⋆(ν_1∧…∧ν∧…∧ν_n)` with `ν` in slot `beta`.
fn slot_star<const D: usize>(jet: &HyperJet<D>, beta: usize) -> Result<Bivector<f64, D>> {
    let mut v = jet.first.clone();
    v[beta] = jet.value;
    star_of_wedge(&v)
}

/// Relative residual of `f∧f_α = Σ_β A_αβ ⋆(…)` for each `α`.
pub fn defining_residuals<const D: usize>(f: &HyperJet<D>, nu: &HyperJet<D>, a: &AMatrix) -> Result<Vec<f64>> {
    let n = check_n(nu, a)?;
    let stars: Vec<_> = (0..n).map(|b| slot_star(nu, b)).collect::<Result<_>>()?;
    Ok((0..n)
        .map(|al| {
            let lhs = wedge2(&f.value, &f.first[al]);
            let mut rhs = Bivector::<f64, D>::zero();
            let mut scale = lhs.norm();
            let mut rhs_scale = 0.0;
            for (b, st) in stars.iter().enumerate() {
                rhs = rhs.add(&st.scale(&a.get(al, b)));
                rhs_scale += a.get(al, b).abs() * st.norm();
            }
            scale = scale.max(rhs_scale);
            relative(lhs.sub(&rhs).norm(), scale)
        })
        .collect())
}

/// Distance of `A_αγ ν_βδ - A_βδ ν_αγ` from `span{ν, ν_1, …, ν_n}`, relative to its terms.
pub fn compat_quadruple_residual<const D: usize>(nu: &HyperJet<D>, a: &AMatrix, q: [usize; 4]) -> Result<f64> {
    let n = check_n(nu, a)?;
    if q.iter().any(|&k| k >= n) {
        return Err(PlmError::Domain(format!("index quadruple {q:?} out of range for n = {n}")));
    }
    let [al, be, ga, de] = q;
    let (p, r) = (a.get(al, ga), a.get(be, de));
    let w: [f64; D] = std::array::from_fn(|i| p * nu.second[be][de][i] - r * nu.second[al][ga][i]);
    let scale = p.abs() * norm(&nu.second[be][de]) + r.abs() * norm(&nu.second[al][ga]);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let (rows, _) = frame(nu)?;
    let (coef, _) = span_fit(&w, &rows, crate::DEFAULT_DEGENERACY_EPS)?;
    let mut fitted = [0.0; D];
    for (c, b) in coef.iter().zip(&rows) {
        for (acc, v) in fitted.iter_mut().zip(b) {
            *acc += c * v;
        }
    }
    Ok(norm(&sub(&w, &fitted)) / scale)
}

/// Worst compatibility residual over all index quadruples at one point.
pub fn compat_point_residual<const D: usize>(nu: &HyperJet<D>, a: &AMatrix) -> Result<f64> {
    let n = check_n(nu, a)?;
    let mut worst = 0.0_f64;
    for al in 0..n {
        for be in 0..n {
            for ga in 0..n {
                for de in 0..n {
                    worst = worst.max(compat_quadruple_residual(nu, a, [al, be, ga, de])?);
                }
            }
        }
    }
    Ok(worst)
}

/// Largest relative difference between reconstructions over all admissible pivots.
///
/// Pivots whose entry of `A` vanishes or whose determinant is degenerate are skipped;
/// at least one pivot must be admissible.
pub fn pivot_spread<const D: usize>(jet: &HyperJet<D>, a: &AMatrix) -> Result<f64> {
    let n = check_n(jet, a)?;
    let mut points = Vec::new();
    let mut first_err = None;
    for al in 0..n {
        for ga in 0..n {
            if a.get(al, ga) == 0.0 {
                continue;
            }
            match hyper_reconstruct(jet, a, (al, ga)) {
                Ok(p) => points.push(p),
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
    }
    let Some(base) = points.first() else {
        return Err(first_err.unwrap_or(PlmError::Domain("A has no nonzero entry".into())));
    };
    let scale = norm(base);
    Ok(points.iter().map(|p| norm(&sub(p, base)) / scale).fold(0.0, f64::max))
}

fn check_same_nd(a: &NdGridSpec, b: &NdGridSpec) -> Result<()> {
    let close = |u: f64, v: f64| (u - v).abs() <= 1e-12 * u.abs().max(v.abs()).max(1.0);
    let same = a.dims == b.dims
        && a.origin.iter().zip(&b.origin).all(|(u, v)| close(*u, *v))
        && a.spacing.iter().zip(&b.spacing).all(|(u, v)| close(*u, *v));
    if !same {
        return Err(PlmError::Domain(format!("grids differ: dims {:?} vs {:?}", a.dims, b.dims)));
    }
    Ok(())
}

fn idx_site(idx: &[usize]) -> Site {
    idx.iter().map(|&i| i as i64).collect()
}

/// Checks the defining system at every shared interior site, plus the pairings
/// `⟨f, ν⟩ = ⟨f_α, ν⟩ = ⟨f, ν_α⟩ = 0`.
pub fn hyper_plm_residual<const D: usize, F, N, A>(f: &F, nu: &N, a: &A, tol: f64) -> Result<InvariantReport>
where
    F: HyperJetField<D> + ?Sized,
    N: HyperJetField<D> + ?Sized,
    A: AField + ?Sized,
{
    check_same_nd(f.nd_spec(), nu.nd_spec())?;
    let n = D - 2;
    let sites = nu.nd_spec().interior(f.hyper_margin().max(nu.hyper_margin()));
    if sites.is_empty() {
        return Err(PlmError::Domain("grid interior is empty".into()));
    }
    let rows = par::try_map(&sites, |idx| -> Result<Vec<f64>> {
        let site = idx_site(idx);
        let fj = f.hyper_jet(idx)?;
        let nj = nu.hyper_jet(idx)?;
        let am = a.a_at(idx)?;
        let mut row = defining_residuals(&fj, &nj, &am).map_err(|e| e.at(&site))?;
        let rel = |u: &[f64; D], v: &[f64; D]| relative(pair(u, v), norm(u) * norm(v));
        row.push(rel(&fj.value, &nj.value));
        row.push((0..n).map(|k| rel(&fj.first[k], &nj.value)).fold(0.0, f64::max));
        row.push((0..n).map(|k| rel(&fj.value, &nj.first[k])).fold(0.0, f64::max));
        Ok(row)
    })?;
    let mut names: Vec<String> = (0..n).map(|k| format!("hyper.plm.{k}")).collect();
    names.extend(["pair.f_nu", "pair.fa_nu", "pair.f_nua"].map(String::from));
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let mut table = ResidualTable::new(&name_refs);
    for (idx, row) in sites.iter().zip(rows) {
        table.push(idx_site(idx), &row);
    }
    Ok(table.into_report(tol))
}

/// Worst compatibility residual over all index quadruples at each interior site,
/// reported as the single record `hyper.compat`.
pub fn hyper_compat_residual<const D: usize, N, A>(nu: &N, a: &A, tol: f64) -> Result<InvariantReport>
where
    N: HyperJetField<D> + ?Sized,
    A: AField + ?Sized,
{
    let sites = nu.hyper_interior();
    if sites.is_empty() {
        return Err(PlmError::Domain("grid interior is empty".into()));
    }
    let vals = par::try_map(&sites, |idx| -> Result<f64> {
        let jet = nu.hyper_jet(idx)?;
        compat_point_residual(&jet, &a.a_at(idx)?).map_err(|e| e.at(&idx_site(idx)))
    })?;
    let site_vecs: Vec<Site> = sites.iter().map(|s| idx_site(s)).collect();
    let mut report = InvariantReport::new();
    report.push(IdentityRecord::from_samples("hyper.compat", site_vecs.iter().map(|s| s.as_slice()).zip(vals), tol));
    Ok(report)
}

/// Presents a surface jet field as a hypersurface field with `n = 2`.
pub struct PlanarAsHyper<'a, F: ?Sized> {
    inner: &'a F,
    spec: NdGridSpec,
}

impl<'a, F: JetField<4> + ?Sized> PlanarAsHyper<'a, F> {
    pub fn new(inner: &'a F) -> Self {
        let GridSpec { origin, spacing, dims } = inner.spec().clone();
        let spec = NdGridSpec { origin: origin.to_vec(), spacing: spacing.to_vec(), dims: dims.to_vec() };
        Self { inner, spec }
    }
}

impl<F: JetField<4> + ?Sized> HyperJetField<4> for PlanarAsHyper<'_, F> {
    fn nd_spec(&self) -> &NdGridSpec {
        &self.spec
    }

    fn hyper_margin(&self) -> usize {
        self.inner.margin()
    }

    fn hyper_jet(&self, idx: &[usize]) -> Result<HyperJet<4>> {
        Ok(HyperJet::from(&self.inner.jet(idx[0], idx[1])?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plm_smooth::{reconstruct_point, ChartKind};
    use crate::poly::{Poly, PolyVec};
    use crate::projective::projective_distance;

    fn hypar_nu(x: f64, y: f64) -> HyperJet<4> {
        let (xv, yv) = (Poly::var(2, 0), Poly::var(2, 1));
        let nu = PolyVec([-&yv, -&xv, Poly::constant(2, 1.0), -(&xv * &yv)]);
        HyperJet::from(&nu.jet2(x, y))
    }

    fn anti() -> AMatrix {
        AMatrix::new(vec![vec![0.0, -2.0], vec![-2.0, 0.0]]).unwrap()
    }

    #[test]
    fn hypar_matches_surface_map() {
        let (x, y) = (0.3, -0.7);
        let jet = hypar_nu(x, y);
        let f = hyper_reconstruct(&jet, &anti(), (0, 1)).unwrap();
        let s = 2f64.sqrt();
        let expect = [s * x, s * y, s * x * y, -s];
        assert!(f.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-14), "{f:?}");
        let smooth = reconstruct_point(
            &crate::fields::JetRecord {
                value: jet.value,
                dx: jet.first[0],
                dy: jet.first[1],
                dxx: jet.second[0][0],
                dxy: jet.second[0][1],
                dyy: jet.second[1][1],
                dxxx: None,
                dyyy: None,
            },
            ChartKind::Asymptotic,
        )
        .unwrap();
        assert!(projective_distance(&f, &smooth) < 1e-12);
        assert!(pivot_spread(&jet, &anti()).unwrap() < 1e-12);
    }

    #[test]
    fn diagonal_pivot_on_hypar_is_degenerate() {
        let a = AMatrix::new(vec![vec![1.0, -2.0], vec![-2.0, 0.0]]).unwrap();
        assert!(hyper_reconstruct(&hypar_nu(0.2, 0.1), &a, (0, 0)).unwrap_err().is_degenerate());
    }

    #[test]
    fn wrong_sign_is_pivot_mismatch() {
        let a = anti().scale(-1.0).unwrap();
        assert!(matches!(hyper_reconstruct(&hypar_nu(0.2, 0.1), &a, (0, 1)), Err(PlmError::PivotMismatch { .. })));
    }

    #[test]
    fn singular_a_rejected() {
        assert!(matches!(AMatrix::new(vec![vec![1.0, 2.0], vec![2.0, 4.0]]), Err(PlmError::Domain(_))));
    }

    #[test]
    fn recover_round_trip_on_hypar() {
        let jet = hypar_nu(0.4, 0.25);
        let f = hyper_reconstruct(&jet, &anti(), (1, 0)).unwrap();
        let s = 2f64.sqrt();
        let (xv, yv) = (Poly::var(2, 0), Poly::var(2, 1));
        let fp = PolyVec([xv.scale(s), yv.scale(s), (&xv * &yv).scale(s), Poly::constant(2, -s)]);
        let fj = HyperJet::from(&fp.jet2(0.4, 0.25));
        assert!(projective_distance(&f, &fj.value) < 1e-14);
        let a = recover_a(&fj, &jet).unwrap();
        assert!(a.max_abs_diff(&anti()) < 1e-14, "{a:?}");
        let res = defining_residuals(&fj, &jet, &a).unwrap();
        assert!(res.iter().all(|r| *r < 1e-14));
        let bumped = AMatrix::new(vec![vec![0.1, -2.0], vec![-2.0, 0.0]]).unwrap();
        assert!(defining_residuals(&fj, &jet, &bumped).unwrap()[0] > 1e-2);
    }
}
