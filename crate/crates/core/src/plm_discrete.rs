//! The discrete map on Z²:
//!
//! ```text
//! f∧f_1 = ⋆(ν∧ν_1),   f∧f_2 = -⋆(ν∧ν_2)
//! ```
//!
//! where subscripts are forward shifts. In the gauge `f₄ = -1` it reduces to
//! the affine increments `𝐟_1 - 𝐟 = 𝛎×𝛎_1`, `𝐟_2 - 𝐟 = -𝛎×𝛎_2`, which close
//! around a plaquette exactly when `𝛎` solves the Moutard equation
//! `𝛎_12 + 𝛎 = H(𝛎_1 + 𝛎_2)`.
//!
//! Sites are absolute lattice coordinates, so translating the inputs translates
//! every output.

use crate::error::{PlmError, Result, Site};
use crate::fields::LatticeField;
use crate::multilinear::{
    add, cross, det, det_exact, hadamard_bound, hodge_star, norm, pair, scale, span_fit, sub, wedge2, Vec3, Vec4,
};
use crate::par;
use crate::report::{relative, relative_difference, IdentityRecord, InvariantReport};

type Lat<const D: usize> = LatticeField<D>;

fn nb<const D: usize>(l: &Lat<D>, s: [i64; 2], d: [i64; 2]) -> Option<&[f64; D]> {
    l.get(s[0] + d[0], s[1] + d[1])
}

/// Runs `f` at every site in parallel and summarizes the sites where it returns a value.
fn site_record<F>(name: &str, sites: &[[i64; 2]], tol: f64, f: F) -> IdentityRecord
where
    F: Fn([i64; 2]) -> Option<f64> + Sync + Send,
{
    let vals = par::map(sites, |&s| f(s));
    let kept: Vec<(Site, f64)> = sites.iter().zip(vals).filter_map(|(s, v)| v.map(|v| (s.to_vec(), v))).collect();
    IdentityRecord::from_samples(name, kept.iter().map(|(s, v)| (s.as_slice(), *v)), tol)
}

/// A scalar field on part of a lattice.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SiteValues {
    pub sites: Vec<[i64; 2]>,
    pub values: Vec<f64>,
}

impl SiteValues {
    fn collect<F>(sites: &[[i64; 2]], f: F) -> Self
    where
        F: Fn([i64; 2]) -> Option<f64> + Sync + Send,
    {
        let vals = par::map(sites, |&s| f(s));
        let (sites, values) = sites.iter().zip(vals).filter_map(|(s, v)| v.map(|v| (*s, v))).unzip();
        Self { sites, values }
    }

    pub fn get(&self, n1: i64, n2: i64) -> Option<f64> {
        self.sites.iter().position(|s| *s == [n1, n2]).map(|k| self.values[k])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Moutard coefficient `H` per plaquette, indexed by the plaquette's lower-left site.
#[derive(Clone, Debug, PartialEq)]
pub struct MoutardCoeff(pub LatticeField<1>);

impl MoutardCoeff {
    pub fn constant(extent: [usize; 2], h: f64) -> Result<Self> {
        Self::from_fn(extent, |_, _| h)
    }

    pub fn from_fn(extent: [usize; 2], mut f: impl FnMut(i64, i64) -> f64) -> Result<Self> {
        Ok(Self(LatticeField::from_fn(extent, |a, b| [f(a, b)])?))
    }

    pub fn at(&self, n1: i64, n2: i64) -> Result<f64> {
        Ok(self.0.at(n1, n2)?[0])
    }
}

/// Fills the rectangle spanned by the strips `n₂ = 0` (`row`) and `n₁ = 0` (`col`)
/// with `ν_12 = H(ν_1 + ν_2) - ν`.
pub fn moutard_evolve<const D: usize>(row: &[[f64; D]], col: &[[f64; D]], h: &MoutardCoeff) -> Result<Lat<D>> {
    let (m1, m2) = (row.len(), col.len());
    if m1 == 0 || m2 == 0 {
        return Err(PlmError::Domain("initial strips must be nonempty".into()));
    }
    if row[0] != col[0] {
        return Err(PlmError::Domain(format!("strips disagree at the corner: {:?} vs {:?}", row[0], col[0])));
    }
    let mut v = vec![[0.0; D]; m1 * m2];
    v[..m1].copy_from_slice(row);
    for (j, c) in col.iter().enumerate() {
        v[j * m1] = *c;
    }
    for j in 1..m2 {
        for i in 1..m1 {
            let hh = h.at(i as i64 - 1, j as i64 - 1)?;
            let (a, b, c) = (v[j * m1 + i - 1], v[(j - 1) * m1 + i], v[(j - 1) * m1 + i - 1]);
            let next: [f64; D] = std::array::from_fn(|k| hh * (a[k] + b[k]) - c[k]);
            if next.iter().any(|x| !x.is_finite()) {
                return Err(PlmError::Overflow { site: vec![i as i64, j as i64] });
            }
            v[j * m1 + i] = next;
        }
    }
    Lat::new([0, 0], [m1, m2], v)
}

/// Relative plaquette residual of `ν_12 + ν - H(ν_1 + ν_2)`.
pub fn moutard_defect<const D: usize>(nu: &Lat<D>, h: &MoutardCoeff, tol: f64) -> InvariantReport {
    let sites = nu.sites_with_window([0, 0], [1, 1]);
    let mut rep = InvariantReport::new();
    rep.push(site_record("moutard.plaquette", &sites, tol, |s| {
        let hh = h.0.get(s[0], s[1])?[0];
        let (v, v1, v2, v12) = (nb(nu, s, [0, 0])?, nb(nu, s, [1, 0])?, nb(nu, s, [0, 1])?, nb(nu, s, [1, 1])?);
        let r: [f64; D] = std::array::from_fn(|k| v12[k] + v[k] - hh * (v1[k] + v2[k]));
        Some(relative(norm(&r), norm(v12) + norm(v) + hh.abs() * (norm(v1) + norm(v2))))
    }));
    rep
}

/// Per-plaquette closure defect `|(𝛎 + 𝛎_12) × (𝛎_1 + 𝛎_2)|`, relative to the factor norms.
pub fn closure_defect(nu: &Lat<3>) -> Vec<([i64; 2], f64)> {
    let sites = nu.sites_with_window([0, 0], [1, 1]);
    let vals = par::map(&sites, |&s| {
        let (v, v1, v2, v12) =
            (nu.get(s[0], s[1]).unwrap(), nb(nu, s, [1, 0]).unwrap(), nb(nu, s, [0, 1]).unwrap(), nb(nu, s, [1, 1]).unwrap());
        let (p, q) = (add(v, v12), add(v1, v2));
        relative(norm(&cross3(&p, &q)), norm(&p) * norm(&q))
    });
    sites.into_iter().zip(vals).collect()
}

fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    cross(&[*a, *b]).expect("two vectors in dimension 3")
}

/// Integrates `𝐟_1 - 𝐟 = 𝛎×𝛎_1`, `𝐟_2 - 𝐟 = -𝛎×𝛎_2` from `f0` at the lattice origin,
/// first along the bottom row and then up each column.
///
/// The conormal is checked for closure first; the returned report compares the
/// two paths around every plaquette (`closure.plaquette`).
pub fn discrete_affine_integrate(nu: &Lat<3>, f0: Vec3, tol: f64) -> Result<(Lat<3>, InvariantReport)> {
    if let Some((site, worst)) = closure_defect(nu).into_iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
        if !(worst <= tol) {
            return Err(PlmError::Closure { site: site.to_vec(), residual: worst });
        }
    }
    let [o1, o2] = nu.origin();
    let [m1, m2] = nu.extent();
    let mut f = vec![[0.0; 3]; m1 * m2];
    let at = |i: usize, j: usize| nu.get(o1 + i as i64, o2 + j as i64).unwrap();
    f[0] = f0;
    for i in 1..m1 {
        f[i] = add(&f[i - 1], &cross3(at(i - 1, 0), at(i, 0)));
    }
    for j in 1..m2 {
        for i in 0..m1 {
            f[j * m1 + i] = sub(&f[(j - 1) * m1 + i], &cross3(at(i, j - 1), at(i, j)));
        }
    }
    let field = Lat::new(nu.origin(), nu.extent(), f)?;
    let sites = nu.sites_with_window([0, 0], [1, 1]);
    let mut rep = InvariantReport::new();
    rep.push(site_record("closure.plaquette", &sites, tol, |s| {
        let (v1, v2, v12) = (nb(nu, s, [1, 0])?, nb(nu, s, [0, 1])?, nb(nu, s, [1, 1])?);
        let (f1, f2) = (nb(&field, s, [1, 0])?, nb(&field, s, [0, 1])?);
        let via1 = sub(f1, &cross3(v1, v12));
        let via2 = add(f2, &cross3(v2, v12));
        Some(relative(norm(&sub(&via1, &via2)), norm(f1).max(norm(f2)).max(norm(v1) * norm(v12)).max(norm(v2) * norm(v12))))
    }));
    Ok((field, rep))
}

/// A surface and its conormal in the gauge `f₄ = -1`, as 3-vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePair {
    pub nu: Lat<3>,
    pub f: Lat<3>,
}

/// A surface and its conormal as homogeneous 4-vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectivePair {
    pub nu: Lat<4>,
    pub f: Lat<4>,
}

impl AffinePair {
    /// Integrates the surface from its conormal; see [`discrete_affine_integrate`].
    pub fn from_conormal(nu: Lat<3>, f0: Vec3, tol: f64) -> Result<Self> {
        let (f, _) = discrete_affine_integrate(&nu, f0, tol)?;
        Ok(Self { nu, f })
    }
}

/// `f = (𝐟, -1)`, `ν = (𝛎, ⟨𝐟, 𝛎⟩)`.
pub fn lift_to_projective(p: &AffinePair) -> Result<ProjectivePair> {
    if p.nu.origin() != p.f.origin() || p.nu.extent() != p.f.extent() {
        return Err(PlmError::Domain("affine pair fields cover different sites".into()));
    }
    let f = p.f.map(|v| [v[0], v[1], v[2], -1.0])?;
    let nu = LatticeField::new(
        p.nu.origin(),
        p.nu.extent(),
        p.nu.values().iter().zip(p.f.values()).map(|(n, f)| [n[0], n[1], n[2], pair(f, n)]).collect(),
    )?;
    Ok(ProjectivePair { nu, f })
}

/// `[ν, T₁ν, T₂ν]`, the surface point up to scale.
pub fn discrete_direction(nu: &Lat<4>, n1: i64, n2: i64) -> Result<Vec4> {
    let s = [n1, n2];
    let v = *nu.at(n1, n2)?;
    let v1 = *nb(nu, s, [1, 0]).ok_or(PlmError::Boundary { site: vec![n1 + 1, n2], margin: 1 })?;
    let v2 = *nb(nu, s, [0, 1]).ok_or(PlmError::Boundary { site: vec![n1, n2 + 1], margin: 1 })?;
    let c = cross(&[v, v1, v2])?;
    let scale = norm(&v) * norm(&v1) * norm(&v2);
    if norm(&c) <= crate::DEFAULT_DEGENERACY_EPS * scale || scale == 0.0 {
        return Err(PlmError::Degenerate { site: Some(s.to_vec()), discriminant: norm(&c) });
    }
    Ok(c)
}

fn det4(rows: [&Vec4; 4]) -> (f64, f64) {
    let m = rows.map(|r| *r);
    (det(&m).expect("four rows"), hadamard_bound(&m))
}

/// Coefficients of `ν_11 = A₁ν_12 + B₁ν_1 + C₁ν` and `ν_22 = A₂ν_12 + B₂ν_2 + C₂ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCompat {
    pub sites: Vec<[i64; 2]>,
    /// Per site `[A₁, B₁, C₁, A₂, B₂, C₂]`.
    pub coeffs: Vec<[f64; 6]>,
    pub report: InvariantReport,
}

impl DiscreteCompat {
    pub fn column(&self, k: usize) -> SiteValues {
        SiteValues { sites: self.sites.clone(), values: self.coeffs.iter().map(|c| c[k]).collect() }
    }
}

/// Solves the compatibility system at every site with the needed neighbours.
///
/// A span residual above `tol` is a [`PlmError::NotCompatible`]. When `f` is
/// given, `A₁, C₁, A₂, C₂` are cross-checked against their pairing expressions;
/// `C₂ = ⟨f_22, ν_12⟩ / ⟨f_12, ν⟩` carries the same sign as `C₁`.
pub fn discrete_compat_coeffs(nu: &Lat<4>, f: Option<&Lat<4>>, tol: f64) -> Result<DiscreteCompat> {
    let sites = sites_with(nu, &[[2, 0], [0, 2], [1, 1]]);
    let solved = par::try_map(&sites, |&s| -> Result<[f64; 6]> {
        let g = |d: [i64; 2]| *nb(nu, s, d).unwrap();
        let (v, v1, v2, v12) = (g([0, 0]), g([1, 0]), g([0, 1]), g([1, 1]));
        let mut out = [0.0; 6];
        for (k, (target, side)) in [(g([2, 0]), v1), (g([0, 2]), v2)].into_iter().enumerate() {
            let (c, r) = span_fit(&target, &[v12, side, v], crate::DEFAULT_DEGENERACY_EPS).map_err(|e| e.at(&s))?;
            if !(r <= tol) {
                return Err(PlmError::NotCompatible { site: Some(s.to_vec()), residual: r });
            }
            out[3 * k..3 * k + 3].copy_from_slice(&c);
        }
        Ok(out)
    })?;
    let mut report = InvariantReport::new();
    if let Some(f) = f {
        let lookup = |s: [i64; 2]| sites.iter().position(|t| *t == s).map(|k| solved[k]);
        type Expr = fn(&Lat<4>, &Lat<4>, [i64; 2]) -> Option<f64>;
        let checks: [(&str, usize, Expr, bool); 5] = [
            ("compat.a1", 0, |f, nu, s| Some(-pair(nb(f, s, [2, 0])?, nb(nu, s, [0, 0])?) / f12_nu(f, nu, s)?), false),
            ("compat.c1", 2, |f, nu, s| Some(pair(nb(f, s, [2, 0])?, nb(nu, s, [1, 1])?) / f12_nu(f, nu, s)?), false),
            ("compat.a2", 3, |f, nu, s| Some(-pair(nb(f, s, [0, 2])?, nb(nu, s, [0, 0])?) / f12_nu(f, nu, s)?), false),
            ("compat.c2", 5, |f, nu, s| Some(pair(nb(f, s, [0, 2])?, nb(nu, s, [1, 1])?) / f12_nu(f, nu, s)?), false),
            ("compat.c2_as_printed", 5, |f, nu, s| Some(-pair(nb(f, s, [0, 2])?, nb(nu, s, [1, 1])?) / f12_nu(f, nu, s)?), true),
        ];
        for (name, k, expr, diag) in checks {
            let rec = site_record(name, &sites, tol, |s| {
                let c = lookup(s)?;
                Some(relative_difference(c[k], expr(f, nu, s)?, 1.0))
            });
            report.push(if diag { rec.diagnostic() } else { rec });
        }
    }
    Ok(DiscreteCompat { sites, coeffs: solved, report })
}

fn f12_nu(f: &Lat<4>, nu: &Lat<4>, s: [i64; 2]) -> Option<f64> {
    Some(pair(nb(f, s, [1, 1])?, nb(nu, s, [0, 0])?))
}

fn sites_with<const D: usize>(l: &Lat<D>, offsets: &[[i64; 2]]) -> Vec<[i64; 2]> {
    l.sites().into_iter().filter(|s| offsets.iter().all(|d| nb(l, *s, *d).is_some())).collect()
}

/// Products `s(n)·s(n+e₁)` and `s(n)·s(n+e₂)` of the scales `s = ⟨f_1, ν_2⟩`.
pub fn scale_products(nu: &Lat<4>, s: [i64; 2]) -> Result<(Option<f64>, Option<f64>)> {
    let g = |d: [i64; 2]| nb(nu, s, d);
    let checked = |rows: Option<[&Vec4; 4]>| -> Result<Option<f64>> {
        let Some(rows) = rows else { return Ok(None) };
        let (d, b) = det4(rows);
        if d.abs() <= crate::DEFAULT_DEGENERACY_EPS * b {
            return Err(PlmError::Degenerate { site: Some(s.to_vec()), discriminant: d });
        }
        Ok(Some(d))
    };
    let r1 = (|| Some([g([0, 1])?, g([1, 0])?, g([2, 0])?, g([1, 1])?]))();
    let r2 = (|| Some([g([1, 0])?, g([0, 1])?, g([1, 1])?, g([0, 2])?]))();
    Ok((checked(r1)?, checked(r2)?))
}

/// Normalizes `[ν, ν_1, ν_2]` into a surface solving the discrete map, starting
/// from the scale `s0 = ⟨f_1, ν_2⟩` at the lattice origin.
///
/// Scales are propagated along the bottom row with `s·s_1 = det|ν_2, ν_1, ν_11, ν_12|`
/// and then up each column with `s·s_2 = det|ν_1, ν_2, ν_12, ν_22|`; every site is
/// then re-derived along its row and a disagreement above `tol` is a gauge
/// obstruction. The conormal must pass the compatibility span test first.
pub fn discrete_scale_propagate(nu: &Lat<4>, s0: f64, tol: f64) -> Result<Lat<4>> {
    if s0 == 0.0 || !s0.is_finite() {
        return Err(PlmError::Domain(format!("initial scale must be finite and nonzero, got {s0}")));
    }
    let [m1, m2] = nu.extent();
    if m1 < 2 || m2 < 2 {
        return Err(PlmError::Domain("lattice needs at least 2×2 sites".into()));
    }
    discrete_compat_coeffs(nu, None, tol)?;
    let [o1, o2] = nu.origin();
    let (e1, e2) = (m1 - 1, m2 - 1);
    let site = |i: usize, j: usize| [o1 + i as i64, o2 + j as i64];
    let mut s = vec![0.0; e1 * e2];
    s[0] = s0;
    for i in 1..e1 {
        let r = scale_products(nu, site(i - 1, 0))?.0.expect("row neighbours exist");
        s[i] = r / s[i - 1];
    }
    for j in 1..e2 {
        for i in 0..e1 {
            let r = scale_products(nu, site(i, j - 1))?.1.expect("column neighbours exist");
            s[j * e1 + i] = r / s[(j - 1) * e1 + i];
        }
    }
    for j in 1..e2 {
        for i in 1..e1 {
            let r = scale_products(nu, site(i - 1, j))?.0.expect("row neighbours exist");
            let mismatch = relative_difference(s[j * e1 + i], r / s[j * e1 + i - 1], 0.0);
            if !(mismatch <= tol) {
                return Err(PlmError::GaugeObstruction { site: site(i, j).to_vec(), mismatch });
            }
        }
    }
    let mut f = Vec::with_capacity(e1 * e2);
    for j in 0..e2 {
        for i in 0..e1 {
            let [a, b] = site(i, j);
            let c = discrete_direction(nu, a, b)?;
            let v = scale(&c, 1.0 / s[j * e1 + i]);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(PlmError::Overflow { site: vec![a, b] });
            }
            f.push(v);
        }
    }
    Lat::new(nu.origin(), [e1, e2], f)
}

/// Sites where both fields have the value and its forward neighbours in `offsets`.
fn pair_sites(p: &ProjectivePair, offsets: &[[i64; 2]]) -> Vec<[i64; 2]> {
    sites_with(&p.f, offsets).into_iter().filter(|s| offsets.iter().all(|d| nb(&p.nu, *s, *d).is_some())).collect()
}

/// Residuals of the defining relations, the pairings that follow from them and
/// the symmetries `⟨f_1, ν_2⟩ = ⟨f_2, ν_1⟩`, `⟨f, ν_12⟩ = ⟨f_12, ν⟩`.
pub fn discrete_residual(p: &ProjectivePair, tol: f64) -> InvariantReport {
    let sites = pair_sites(p, &[[0, 0], [1, 0], [0, 1], [1, 1]]);
    let (f, nu) = (&p.f, &p.nu);
    let get = |l: &Lat<4>, s: [i64; 2], d: [i64; 2]| *nb(l, s, d).unwrap();
    let rel_pair = |a: &Vec4, b: &Vec4| relative(pair(a, b), norm(a) * norm(b));
    let mut rep = InvariantReport::new();
    for (name, dir, sign) in [("dplm.1", [1, 0], 1.0), ("dplm.2", [0, 1], -1.0)] {
        rep.push(site_record(name, &sites, tol, |s| {
            let lhs = wedge2(&get(f, s, [0, 0]), &get(f, s, dir));
            let rhs = hodge_star(&wedge2(&get(nu, s, [0, 0]), &get(nu, s, dir))).scale(&sign);
            Some(relative(lhs.sub(&rhs).norm(), lhs.norm().max(rhs.norm())))
        }));
    }
    let pairs: [(&str, [i64; 2], [i64; 2]); 5] = [
        ("pair.f_nu", [0, 0], [0, 0]),
        ("pair.f1_nu", [1, 0], [0, 0]),
        ("pair.f2_nu", [0, 1], [0, 0]),
        ("pair.f_nu1", [0, 0], [1, 0]),
        ("pair.f_nu2", [0, 0], [0, 1]),
    ];
    for (name, df, dn) in pairs {
        rep.push(site_record(name, &sites, tol, |s| Some(rel_pair(&get(f, s, df), &get(nu, s, dn)))));
    }
    let syms: [(&str, [[i64; 2]; 4]); 2] =
        [("sym.f1_nu2", [[1, 0], [0, 1], [0, 1], [1, 0]]), ("sym.f_nu12", [[0, 0], [1, 1], [1, 1], [0, 0]])];
    for (name, [a, b, c, d]) in syms {
        rep.push(site_record(name, &sites, tol, |s| {
            let (x, y) = ((get(f, s, a), get(nu, s, b)), (get(f, s, c), get(nu, s, d)));
            let floor = (norm(&x.0) * norm(&x.1)).max(norm(&y.0) * norm(&y.1)) * f64::EPSILON;
            Some(relative_difference(pair(&x.0, &x.1), pair(&y.0, &y.1), floor.max(f64::MIN_POSITIVE)))
        }));
    }
    rep
}

/// `det|v, v_1, v_2, v_12|`, exact on the stored values, with its Hadamard bound.
fn quad_det(v: Vec4, v1: Vec4, v2: Vec4, v12: Vec4) -> (f64, f64) {
    let rows = [v, v1, v2, v12];
    (det_exact(&rows, None).expect("finite lattice values"), hadamard_bound(&rows))
}

fn det_floor(a: f64, b: f64) -> f64 {
    (1e-12 * a.max(b)).max(f64::MIN_POSITIVE)
}

/// `det|f, f_1, f_2, f_12| = det|ν, ν_1, ν_2, ν_12|` and the pairing products
/// `⟨f_12, ν⟩⟨f_1, ν_2⟩ = -det|ν, ν_1, ν_2, ν_12|`,
/// `⟨f_11, ν⟩⟨f_1, ν_2⟩ = det|ν, ν_1, ν_2, ν_11|`,
/// `⟨f_22, ν⟩⟨f_1, ν_2⟩ = det|ν, ν_1, ν_2, ν_22|`.
pub fn discrete_det_invariance(p: &ProjectivePair, tol: f64) -> InvariantReport {
    let (f, nu) = (&p.f, &p.nu);
    let quad = pair_sites(p, &[[0, 0], [1, 0], [0, 1], [1, 1]]);
    let mut rep = InvariantReport::new();
    rep.push(site_record("det.volume", &quad, tol, |s| {
        let g = |l: &Lat<4>, d: [i64; 2]| *nb(l, s, d).unwrap();
        let (a, ba) = quad_det(g(f, [0, 0]), g(f, [1, 0]), g(f, [0, 1]), g(f, [1, 1]));
        let (b, bb) = quad_det(g(nu, [0, 0]), g(nu, [1, 0]), g(nu, [0, 1]), g(nu, [1, 1]));
        Some(relative_difference(a, b, det_floor(ba, bb)))
    }));
    let products: [(&str, [i64; 2], f64); 3] =
        [("product.f12_nu", [1, 1], -1.0), ("product.f11_nu", [2, 0], 1.0), ("product.f22_nu", [0, 2], 1.0)];
    for (name, d, sign) in products {
        let sites = pair_sites(p, &[[1, 0], [0, 1], d]);
        rep.push(site_record(name, &sites, tol, |s| {
            let g = |l: &Lat<4>, d: [i64; 2]| nb(l, s, d).copied();
            let (v, v1, v2, vd) = (g(nu, [0, 0])?, g(nu, [1, 0])?, g(nu, [0, 1])?, g(nu, d)?);
            let lhs = pair(&g(f, d)?, &v) * pair(&g(f, [1, 0])?, &v2);
            let (rhs, b) = det4([&v, &v1, &v2, &vd]);
            let scale = norm(&g(f, d)?) * norm(&v) * norm(&g(f, [1, 0])?) * norm(&v2);
            Some(relative(lhs - sign * rhs, b.max(scale)))
        }));
    }
    rep
}

/// Affine volume identity `det|𝐟_1-𝐟, 𝐟_2-𝐟, 𝐟_12-𝐟| = det|𝛎, 𝛎_1, 𝛎_12|·det|𝛎, 𝛎_1, 𝛎_2|`.
pub fn affine_det_invariance(p: &AffinePair, tol: f64) -> InvariantReport {
    let (f, nu) = (&p.f, &p.nu);
    let sites: Vec<_> = sites_with(f, &[[1, 1]]).into_iter().filter(|s| nb(nu, *s, [1, 1]).is_some()).collect();
    let mut rep = InvariantReport::new();
    rep.push(site_record("det.affine_volume", &sites, tol, |s| {
        let g = |l: &Lat<3>, d: [i64; 2]| *nb(l, s, d).unwrap();
        let base = g(f, [0, 0]);
        let e = [sub(&g(f, [1, 0]), &base), sub(&g(f, [0, 1]), &base), sub(&g(f, [1, 1]), &base)];
        let lhs = det_exact(&[g(f, [1, 0]), g(f, [0, 1]), g(f, [1, 1])], Some(&base)).ok()?;
        let (v, v1, v2, v12) = (g(nu, [0, 0]), g(nu, [1, 0]), g(nu, [0, 1]), g(nu, [1, 1]));
        let (p, q) = ([v, v1, v12], [v, v1, v2]);
        let rhs = det_exact(&p, None).ok()? * det_exact(&q, None).ok()?;
        let b = hadamard_bound(&e).max(hadamard_bound(&p) * hadamard_bound(&q));
        Some(relative_difference(lhs, rhs, det_floor(b, 0.0)))
    }));
    rep
}

/// Discrete quadratic and cubic forms on a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteForms {
    /// `⟨𝐟_2 - 𝐟, 𝛎_1 - 𝛎⟩`.
    pub omega2: SiteValues,
    /// `⟨𝐟_1 - 𝐟_{-1}, 𝛎 - 𝛎_{-1}⟩`.
    pub omega3: SiteValues,
    /// `⟨𝐟_2 - 𝐟_{-2}, 𝛎 - 𝛎_{-2}⟩`.
    pub omega3_tilde: SiteValues,
    /// `√|det|f, f_1, f_2, f_12||` on the lift.
    pub f2d: SiteValues,
    /// `√|det|f, f_1, f_11, f_111||`.
    pub f3d: SiteValues,
    /// `√|det|f, f_2, f_22, f_222||`.
    pub f3d_tilde: SiteValues,
    /// Signs of the determinants under the three roots above.
    pub f2d_sign: SiteValues,
    pub f3d_sign: SiteValues,
    pub f3d_tilde_sign: SiteValues,
    pub report: InvariantReport,
}

fn det3(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    det(&[*a, *b, *c]).unwrap()
}

/// Computes the discrete forms and checks their determinant expressions.
///
/// `omega3.det` uses `-det|𝛎_{-1}, 𝛎, 𝛎_1|` and `omega3_tilde.det` uses
/// `+det|𝛎_{-2}, 𝛎, 𝛎_2|`, which is what the affine increments give. The variants
/// with `𝛎_2` and a minus sign are reported as diagnostics (`*.as_printed`).
pub fn discrete_forms(p: &AffinePair, tol: f64) -> Result<DiscreteForms> {
    let lift = lift_to_projective(p)?;
    let (f, nu) = (&p.f, &p.nu);
    let all = f.sites();
    let g3 = |l: &Lat<3>, s: [i64; 2], d: [i64; 2]| nb(l, s, d).copied();
    let rel = |a: f64, b: f64, sc: f64| relative(a - b, sc);

    let omega2 = SiteValues::collect(&all, |s| {
        Some(pair(&sub(&g3(f, s, [0, 1])?, &g3(f, s, [0, 0])?), &sub(&g3(nu, s, [1, 0])?, &g3(nu, s, [0, 0])?)))
    });
    let omega3_along = |dir: [i64; 2]| {
        let back = [-dir[0], -dir[1]];
        SiteValues::collect(&all, move |s| {
            Some(pair(&sub(&g3(f, s, dir)?, &g3(f, s, back)?), &sub(&g3(nu, s, [0, 0])?, &g3(nu, s, back)?)))
        })
    };
    let omega3 = omega3_along([1, 0]);
    let omega3_tilde = omega3_along([0, 1]);

    let mut report = InvariantReport::new();
    report.push(site_record("omega2.det", &omega2.sites, tol, |s| {
        let (v, v1, v2) = (g3(nu, s, [0, 0])?, g3(nu, s, [1, 0])?, g3(nu, s, [0, 1])?);
        Some(rel(omega2.get(s[0], s[1])?, det3(&v, &v1, &v2), norm(&v) * norm(&v1) * norm(&v2)))
    }));
    let cubic: [(&str, &SiteValues, [i64; 2], [i64; 2], f64, bool); 4] = [
        ("omega3.det", &omega3, [-1, 0], [1, 0], -1.0, false),
        ("omega3.det_as_printed", &omega3, [-1, 0], [0, 1], -1.0, true),
        ("omega3_tilde.det", &omega3_tilde, [0, -1], [0, 1], 1.0, false),
        ("omega3_tilde.det_as_printed", &omega3_tilde, [0, -1], [0, 1], -1.0, true),
    ];
    for (name, form, back, fwd, sign, diag) in cubic {
        let rec = site_record(name, &form.sites, tol, |s| {
            let (vb, v, vf) = (g3(nu, s, back)?, g3(nu, s, [0, 0])?, g3(nu, s, fwd)?);
            Some(rel(form.get(s[0], s[1])?, sign * det3(&vb, &v, &vf), norm(&vb) * norm(&v) * norm(&vf)))
        });
        report.push(if diag { rec.diagnostic() } else { rec });
    }

    let (lf, ln) = (&lift.f, &lift.nu);
    let det_along = |l: &Lat<4>, s: [i64; 2], ds: [[i64; 2]; 4]| -> Option<(f64, f64)> {
        Some(det4([nb(l, s, ds[0])?, nb(l, s, ds[1])?, nb(l, s, ds[2])?, nb(l, s, ds[3])?]))
    };
    let shapes = [[[0, 0], [1, 0], [0, 1], [1, 1]], [[0, 0], [1, 0], [2, 0], [3, 0]], [[0, 0], [0, 1], [0, 2], [0, 3]]];
    let roots: Vec<(SiteValues, SiteValues)> = shapes
        .iter()
        .map(|&ds| {
            let d = SiteValues::collect(&all, |s| det_along(lf, s, ds).map(|x| x.0));
            let root = SiteValues { sites: d.sites.clone(), values: d.values.iter().map(|x| x.abs().sqrt()).collect() };
            let sign = SiteValues { sites: d.sites.clone(), values: d.values.iter().map(|x| sign_of(*x)).collect() };
            (root, sign)
        })
        .collect();
    for (name, ds) in [("f2d.dual", shapes[0]), ("f3d.dual", shapes[1]), ("f3d_tilde.dual", shapes[2])] {
        report.push(site_record(name, &all, tol, |s| {
            let (a, ba) = det_along(lf, s, ds)?;
            let (b, bb) = det_along(ln, s, ds)?;
            Some(rel(a, b, ba.max(bb)))
        }));
    }
    let pq_sites = pair_sites(&lift, &[[1, 0], [0, 1], [1, 1]]);
    report.push(
        site_record("f2d.as_printed", &pq_sites, tol, |s| {
            let prod = pair(nb(lf, s, [1, 1])?, nb(ln, s, [0, 0])?) * pair(nb(lf, s, [1, 0])?, nb(ln, s, [0, 1])?);
            let (d, b) = det_along(lf, s, shapes[0])?;
            Some(rel(4.0 * prod, d, b))
        })
        .diagnostic(),
    );
    let mut it = roots.into_iter();
    let (f2d, f2d_sign) = it.next().unwrap();
    let (f3d, f3d_sign) = it.next().unwrap();
    let (f3d_tilde, f3d_tilde_sign) = it.next().unwrap();
    Ok(DiscreteForms { omega2, omega3, omega3_tilde, f2d, f3d, f3d_tilde, f2d_sign, f3d_sign, f3d_tilde_sign, report })
}

fn sign_of(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Residual `|⟨𝐟, 𝛎⟩ - 1|` per site.
pub fn affine_sphere_check(p: &AffinePair, tol: f64) -> InvariantReport {
    let sites = p.f.sites();
    let mut rep = InvariantReport::new();
    rep.push(site_record("affine_sphere", &sites, tol, |s| {
        Some((pair(p.f.get(s[0], s[1])?, p.nu.get(s[0], s[1])?) - 1.0).abs())
    }));
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 0.1;

    fn hypar_nu(m: usize) -> Lat<3> {
        Lat::from_fn([m, m], |a, b| [-(b as f64) * H, -(a as f64) * H, 1.0]).unwrap()
    }

    fn hypar_f(a: i64, b: i64) -> Vec3 {
        [a as f64 * H, b as f64 * H, (a * b) as f64 * H * H]
    }

    #[test]
    fn moutard_fixed_point_and_linear_field() {
        let c = [0.3, -1.0, 2.0];
        let h1 = MoutardCoeff::constant([5, 5], 1.0).unwrap();
        let l = moutard_evolve(&[c; 6], &[c; 6], &h1).unwrap();
        assert!(l.values().iter().all(|v| *v == c));
        let nu = hypar_nu(6);
        let row: Vec<_> = (0..6).map(|a| *nu.at(a, 0).unwrap()).collect();
        let col: Vec<_> = (0..6).map(|b| *nu.at(0, b).unwrap()).collect();
        let ev = moutard_evolve(&row, &col, &h1).unwrap();
        assert!(ev.values().iter().zip(nu.values()).all(|(a, b)| norm(&sub(a, b)) < 1e-15));
    }

    #[test]
    fn overflow_names_site() {
        let h = MoutardCoeff::constant([3, 3], 1e308).unwrap();
        let e = moutard_evolve(&[[1.0]; 4], &[[1.0]; 4], &h).unwrap_err();
        assert_eq!(e, PlmError::Overflow { site: vec![1, 1] });
    }

    #[test]
    fn hypar_integrates_to_bilinear_surface() {
        let nu = hypar_nu(7);
        let (f, rep) = discrete_affine_integrate(&nu, [0.0; 3], 1e-12).unwrap();
        assert!(rep.all_pass());
        for s in f.sites() {
            assert!(norm(&sub(f.get(s[0], s[1]).unwrap(), &hypar_f(s[0], s[1]))) < 1e-14, "{s:?}");
        }
    }

    #[test]
    fn non_moutard_is_closure_error() {
        let nu = Lat::from_fn([4, 4], |a, b| [(a * a) as f64, (b * a * b) as f64, 1.0]).unwrap();
        assert!(matches!(discrete_affine_integrate(&nu, [0.0; 3], 1e-10), Err(PlmError::Closure { .. })));
    }

    #[test]
    fn lift_and_direction() {
        let p = AffinePair::from_conormal(hypar_nu(5), [0.0; 3], 1e-12).unwrap();
        let q = lift_to_projective(&p).unwrap();
        assert_eq!(q.nu.get(2, 3).unwrap()[3], -6.0 * H * H);
        let d = discrete_direction(&q.nu, 2, 3).unwrap();
        let f = q.f.get(2, 3).unwrap();
        assert!(crate::projective::projective_distance(&d, f) < 1e-14);
        let rep = discrete_residual(&q, 1e-12);
        assert!(rep.all_pass(), "{:?}", rep.failures().collect::<Vec<_>>());
    }

    #[test]
    fn hypar_volumes_and_forms() {
        let p = AffinePair::from_conormal(hypar_nu(6), [0.0; 3], 1e-12).unwrap();
        let rep = affine_det_invariance(&p, 1e-12);
        assert!(rep.all_pass());
        let q = lift_to_projective(&p).unwrap();
        let dr = discrete_det_invariance(&q, 1e-12);
        assert!(dr.all_pass(), "{:?}", dr.failures().collect::<Vec<_>>());
        let forms = discrete_forms(&p, 1e-12).unwrap();
        assert!(forms.report.all_pass(), "{:?}", forms.report.failures().collect::<Vec<_>>());
        assert!(forms.omega2.values.iter().all(|w| (w + H * H).abs() < 1e-15));
        assert!(forms.f2d.values.iter().all(|w| (w - H * H).abs() < 1e-14));
        assert!(forms.f3d.values.iter().all(|w| w.abs() < 1e-7));
    }

    #[test]
    fn scale_propagation_recovers_lift() {
        let p = AffinePair::from_conormal(hypar_nu(6), [0.0; 3], 1e-12).unwrap();
        let q = lift_to_projective(&p).unwrap();
        let s0 = pair(q.f.get(1, 0).unwrap(), q.nu.get(0, 1).unwrap());
        let f = discrete_scale_propagate(&q.nu, s0, 1e-10).unwrap();
        for s in f.sites() {
            assert!(norm(&sub(f.get(s[0], s[1]).unwrap(), q.f.get(s[0], s[1]).unwrap())) < 1e-12);
        }
        let neg = discrete_scale_propagate(&q.nu, -s0, 1e-10).unwrap();
        assert_eq!(neg.values()[3].map(|x| -x), f.values()[3]);
    }

    #[test]
    fn affine_sphere_controls() {
        let p = AffinePair::from_conormal(hypar_nu(4), [0.0; 3], 1e-12).unwrap();
        assert!(!affine_sphere_check(&p, 1e-6).all_pass());
        let one = AffinePair {
            nu: Lat::from_fn([2, 2], |_, _| [0.0, 0.0, 1.0]).unwrap(),
            f: Lat::from_fn([2, 2], |_, _| [3.0, 1.0, 1.0]).unwrap(),
        };
        assert!(affine_sphere_check(&one, 1e-15).all_pass());
    }

    fn wavy_pair(m: usize) -> AffinePair {
        let base = |a: i64, b: i64| [-(b as f64) * H, -(a as f64) * H, 1.0];
        let row: Vec<Vec3> =
            (0..m as i64).map(|a| add(&base(a, 0), &[0.05 * (a as f64 * 0.7).sin(), 0.0, 0.02 * (a as f64).sin()])).collect();
        let col: Vec<Vec3> = (0..m as i64)
            .map(|b| add(&base(0, b), &[0.0, 0.04 * (b as f64 * 0.9).sin(), -0.03 * (b as f64 * 0.5).sin()]))
            .collect();
        let h = MoutardCoeff::from_fn([m - 1, m - 1], |a, b| 1.0 + 0.05 * ((a + 2 * b) as f64).cos()).unwrap();
        let nu = moutard_evolve(&row, &col, &h).unwrap();
        assert!(moutard_defect(&nu, &h, 1e-13).all_pass());
        AffinePair::from_conormal(nu, [0.1, -0.2, 0.3], 1e-12).unwrap()
    }

    #[test]
    fn scale_recursion_matches_brute_force() {
        let q = lift_to_projective(&wavy_pair(6)).unwrap();
        let nu = &q.nu;
        for s in [[0, 0], [1, 2], [2, 1], [3, 3]] {
            let c = discrete_direction(nu, s[0], s[1]).unwrap();
            let c1 = discrete_direction(nu, s[0] + 1, s[1]).unwrap();
            let b = wedge2(&c, &c1);
            let t = hodge_star(&wedge2(nu.get(s[0], s[1]).unwrap(), nu.get(s[0] + 1, s[1]).unwrap()));
            let dot = |x: &crate::Bivector<f64, 4>, y: &crate::Bivector<f64, 4>| {
                (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| x.get(i, j) * y.get(i, j)).sum::<f64>()
            };
            let k = dot(&b, &t) / dot(&b, &b);
            assert!(b.scale(&k).sub(&t).norm() < 1e-12 * t.norm(), "least squares fit is not exact at {s:?}");
            let r1 = scale_products(nu, s).unwrap().0.unwrap();
            assert!((k * r1 - 1.0).abs() < 1e-10, "{s:?}: {k} vs 1/{r1}");
        }
    }

    #[test]
    fn wavy_lattice_satisfies_everything() {
        let p = wavy_pair(7);
        let q = lift_to_projective(&p).unwrap();
        for rep in [discrete_residual(&q, 1e-10), discrete_det_invariance(&q, 1e-10), affine_det_invariance(&p, 1e-10)] {
            assert!(rep.all_pass(), "{:?}", rep.failures().collect::<Vec<_>>());
        }
        let forms = discrete_forms(&p, 1e-10).unwrap();
        assert!(forms.report.all_pass(), "{:?}", forms.report.failures().collect::<Vec<_>>());
        let compat = discrete_compat_coeffs(&q.nu, Some(&q.f), 1e-10).unwrap();
        assert!(compat.report.all_pass(), "{:?}", compat.report.failures().collect::<Vec<_>>());
        let s0 = pair(q.f.get(1, 0).unwrap(), q.nu.get(0, 1).unwrap());
        let f = discrete_scale_propagate(&q.nu, s0, 1e-10).unwrap();
        let prop = ProjectivePair { nu: q.nu.clone(), f };
        assert!(discrete_residual(&prop, 1e-10).all_pass());
    }
}
