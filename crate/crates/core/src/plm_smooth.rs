//! The map between a smooth surface `f` in P³ and its conormal `ν` in the dual space.
//!
//! Two charts are supported. In asymptotic coordinates
//!
//! ```text
//! f∧f_x = ⋆(ν∧ν_x),   f∧f_y = -⋆(ν∧ν_y)
//! ```
//!
//! and on conjugate lines
//!
//! ```text
//! f∧f_x = -⋆(ν∧ν_y),  f∧f_y = ⋆(ν∧ν_x).
//! ```
//!
//! Reconstruction is pointwise: `f = [ν, ν_x, ν_y] / √det|ν, ν_x, ν_y, ν_xy|`
//! (asymptotic) or with `ν_xx` in the last slot (conjugate). The inverse map is
//! the same routine with the roles of `f` and `ν` exchanged. On conjugate lines
//! the radicand flips sign under the exchange, since
//! `det|f, f_x, f_y, f_xx| = -det|ν, ν_x, ν_y, ν_xx|`.

use crate::error::{PlmError, Result};
use crate::fields::{grid_site, GridSpec, JetField, JetRecord};
use crate::multilinear::{cross, det, hadamard_bound, hodge_star, norm, pair, span_fit, wedge2, Vec4};
use crate::par;
use crate::report::{relative, relative_difference, InvariantReport, ResidualTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    Asymptotic,
    Conjugate,
}

impl std::str::FromStr for ChartKind {
    type Err = PlmError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "asymptotic" => Ok(ChartKind::Asymptotic),
            "conjugate" => Ok(ChartKind::Conjugate),
            other => Err(PlmError::Domain(format!("unknown chart '{other}' (asymptotic|conjugate)"))),
        }
    }
}

/// Which side of the duality a jet belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// The jet is a conormal `ν`; the result is a surface point.
    Conormal,
    /// The jet is a surface `f`; the result is its conormal.
    Surface,
}

/// Thresholds used when deciding whether a point is usable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    /// A determinant counts as vanishing below `degenerate × Hadamard bound`.
    pub degenerate: f64,
    /// On conjugate lines `det|ν, ν_x, ν_y, ν_xy|` must stay below `chart × bound`.
    pub chart: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { degenerate: crate::DEFAULT_DEGENERACY_EPS, chart: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

fn det4(rows: [&Vec4; 4]) -> f64 {
    det(&rows.map(|r| *r)).expect("four rows")
}

fn cross4(a: &Vec4, b: &Vec4, c: &Vec4) -> Vec4 {
    cross(&[*a, *b, *c]).expect("three vectors")
}

fn bound(rows: [&Vec4; 4]) -> f64 {
    hadamard_bound(&rows.map(|r| *r))
}

/// Pointwise reconstruction from a conormal jet: `f = [ν, ν_x, ν_y] / √det`.
pub fn reconstruct_point(jet: &JetRecord<4>, chart: ChartKind) -> Result<Vec4> {
    lelieuvre_point(jet, chart, Role::Conormal, &Thresholds::default())
}

/// Inverse map, `ν = [f, f_x, f_y] / √(±det)`, from a surface jet.
pub fn inverse_reconstruct_point(jet: &JetRecord<4>, chart: ChartKind) -> Result<Vec4> {
    lelieuvre_point(jet, chart, Role::Surface, &Thresholds::default())
}

/// Shared routine behind [`reconstruct_point`] and [`inverse_reconstruct_point`].
pub fn lelieuvre_point(jet: &JetRecord<4>, chart: ChartKind, role: Role, th: &Thresholds) -> Result<Vec4> {
    let JetRecord { value: v, dx, dy, dxx, dxy, .. } = jet;
    let radicand = match chart {
        ChartKind::Asymptotic => {
            let d = det4([v, dx, dy, dxy]);
            if d <= th.degenerate * bound([v, dx, dy, dxy]) {
                return Err(PlmError::Degenerate { site: None, discriminant: d });
            }
            d
        }
        ChartKind::Conjugate => {
            let mixed = det4([v, dx, dy, dxy]);
            if mixed.abs() > th.chart * bound([v, dx, dy, dxy]).max(f64::MIN_POSITIVE) {
                return Err(PlmError::ChartMismatch { site: None, radicand: mixed });
            }
            let d = det4([v, dx, dy, dxx]);
            let d = if role == Role::Surface { -d } else { d };
            let scale = th.degenerate * bound([v, dx, dy, dxx]);
            if d.abs() <= scale {
                return Err(PlmError::Degenerate { site: None, discriminant: d });
            }
            if d < 0.0 {
                return Err(PlmError::ChartMismatch { site: None, radicand: d });
            }
            d
        }
    };
    let c = cross4(v, dx, dy);
    let s = radicand.sqrt();
    Ok(c.map(|x| x / s))
}

/// Reconstruction through third derivatives along one axis:
/// `f = -[ν, ν_x, ν_xx] / √det|ν, ν_x, ν_xx, ν_xxx|` or
/// `f = -[ν, ν_y, ν_yy] / √(-det|ν, ν_y, ν_yy, ν_yyy|)`.
pub fn reconstruct_point_alt(jet: &JetRecord<4>, axis: Axis) -> Result<Vec4> {
    reconstruct_point_alt_with(jet, axis, &Thresholds::default())
}

pub fn reconstruct_point_alt_with(jet: &JetRecord<4>, axis: Axis, th: &Thresholds) -> Result<Vec4> {
    let (d1, d2, d3, sign) = match axis {
        Axis::X => (&jet.dx, &jet.dxx, jet.third_x()?, 1.0),
        Axis::Y => (&jet.dy, &jet.dyy, jet.third_y()?, -1.0),
    };
    let v = &jet.value;
    let d = sign * det4([v, d1, d2, d3]);
    if d.abs() <= th.degenerate * bound([v, d1, d2, d3]) {
        return Err(PlmError::Degenerate { site: None, discriminant: d });
    }
    if d < 0.0 {
        return Err(PlmError::ChartMismatch { site: None, radicand: d });
    }
    let s = d.sqrt();
    Ok(cross4(v, d1, d2).map(|x| -x / s))
}

/// Reconstructed point (or the reason there is none) at one grid site.
#[derive(Clone, Debug, PartialEq)]
pub struct SitePoint {
    pub site: [usize; 2],
    pub coord: [f64; 2],
    pub point: Result<Vec4>,
}

/// Applies [`lelieuvre_point`] at every interior site of `field`.
pub fn reconstruct_field<F: JetField<4> + ?Sized>(field: &F, chart: ChartKind, role: Role, th: &Thresholds) -> Vec<SitePoint> {
    let sites = field.interior();
    par::map(&sites, |&(i, j)| SitePoint {
        site: [i, j],
        coord: field.coord(i, j),
        point: field.jet(i, j).and_then(|jet| lelieuvre_point(&jet, chart, role, th)).map_err(|e| e.at(&grid_site(i, j))),
    })
}

pub(crate) fn check_same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    let close = |u: f64, v: f64| (u - v).abs() <= 1e-12 * u.abs().max(v.abs()).max(1.0);
    if a.dims != b.dims || !(0..2).all(|k| close(a.origin[k], b.origin[k]) && close(a.spacing[k], b.spacing[k])) {
        return Err(PlmError::Domain(format!(
            "grids differ: dims {:?} vs {:?}, origin {:?} vs {:?}, spacing {:?} vs {:?}",
            a.dims, b.dims, a.origin, b.origin, a.spacing, b.spacing
        )));
    }
    Ok(())
}

/// Interior sites shared by two fields on the same grid.
fn shared_sites<F, N, const D: usize, const E: usize>(f: &F, nu: &N) -> Result<Vec<(usize, usize)>>
where
    F: JetField<D> + ?Sized,
    N: JetField<E> + ?Sized,
{
    check_same_grid(f.spec(), nu.spec())?;
    let sites = f.spec().interior(f.margin().max(nu.margin()));
    if sites.is_empty() {
        return Err(PlmError::Domain("grid interior is empty".into()));
    }
    Ok(sites)
}

/// Runs `row` at every shared site and folds the residual columns into a report.
fn sweep<F, N, R, const D: usize, const E: usize>(f: &F, nu: &N, names: &[&str], tol: f64, row: R) -> Result<InvariantReport>
where
    F: JetField<D> + ?Sized,
    N: JetField<E> + ?Sized,
    R: Fn(&JetRecord<D>, &JetRecord<E>) -> Vec<f64> + Sync + Send,
{
    let sites = shared_sites(f, nu)?;
    let rows = par::try_map(&sites, |&(i, j)| {
        let a = f.jet(i, j)?;
        let b = nu.jet(i, j)?;
        Ok::<_, PlmError>(row(&a, &b))
    })?;
    let mut table = ResidualTable::new(names);
    for (&(i, j), r) in sites.iter().zip(&rows) {
        table.push(grid_site(i, j), r);
    }
    Ok(table.into_report(tol))
}

/// `‖L − R‖ / max(‖L‖, ‖R‖)` for bivectors.
fn bivector_residual(l: &crate::Bivector<f64, 4>, r: &crate::Bivector<f64, 4>) -> f64 {
    let scale = l.norm().max(r.norm());
    relative(l.sub(r).norm(), scale)
}

/// Largest of `‖f‖, ‖f_x‖, ‖f_y‖`.
fn jet_scale<const D: usize>(j: &JetRecord<D>) -> f64 {
    norm(&j.value).max(norm(&j.dx)).max(norm(&j.dy))
}

/// `|⟨a, b⟩| / (‖a‖‖b‖)` with each norm floored at its jet's scale, so a derivative
/// that vanishes up to roundoff does not turn its noise into a full violation.
fn jet_pairing_residual<const D: usize>(a: &[f64; D], sa: f64, b: &[f64; D], sb: f64) -> f64 {
    relative(pair(a, b), norm(a).max(sa) * norm(b).max(sb))
}

/// Residual of the defining bivector relations, normalized pointwise.
pub fn plm_residual<F, N>(f: &F, nu: &N, chart: ChartKind, tol: f64) -> Result<InvariantReport>
where
    F: JetField<4> + ?Sized,
    N: JetField<4> + ?Sized,
{
    sweep(f, nu, &["plm.x", "plm.y"], tol, |fj, nj| {
        let lx = wedge2(&fj.value, &fj.dx);
        let ly = wedge2(&fj.value, &fj.dy);
        let sx = hodge_star(&wedge2(&nj.value, &nj.dx));
        let sy = hodge_star(&wedge2(&nj.value, &nj.dy));
        match chart {
            ChartKind::Asymptotic => vec![bivector_residual(&lx, &sx), bivector_residual(&ly, &sy.neg())],
            ChartKind::Conjugate => vec![bivector_residual(&lx, &sy.neg()), bivector_residual(&ly, &sx)],
        }
    })
}

/// Pairings that vanish on every pair related by the map.
pub fn orthogonality_report<F, N>(f: &F, nu: &N, chart: ChartKind, tol: f64) -> Result<InvariantReport>
where
    F: JetField<4> + ?Sized,
    N: JetField<4> + ?Sized,
{
    match chart {
        ChartKind::Asymptotic => sweep(
            f,
            nu,
            &[
                "pair.f_nu",
                "pair.fx_nu",
                "pair.fx_nux",
                "pair.fxx_nu",
                "pair.f_nuxx",
                "pair.fxx_nuxx",
                "pair.fy_nu",
                "pair.fy_nuy",
                "pair.fyy_nu",
                "pair.f_nuyy",
                "pair.fyy_nuyy",
            ],
            tol,
            |a, b| {
                let (sa, sb) = (jet_scale(a), jet_scale(b));
                vec![
                    jet_pairing_residual(&a.value, sa, &b.value, sb),
                    jet_pairing_residual(&a.dx, sa, &b.value, sb),
                    jet_pairing_residual(&a.dx, sa, &b.dx, sb),
                    jet_pairing_residual(&a.dxx, sa, &b.value, sb),
                    jet_pairing_residual(&a.value, sa, &b.dxx, sb),
                    jet_pairing_residual(&a.dxx, sa, &b.dxx, sb),
                    jet_pairing_residual(&a.dy, sa, &b.value, sb),
                    jet_pairing_residual(&a.dy, sa, &b.dy, sb),
                    jet_pairing_residual(&a.dyy, sa, &b.value, sb),
                    jet_pairing_residual(&a.value, sa, &b.dyy, sb),
                    jet_pairing_residual(&a.dyy, sa, &b.dyy, sb),
                ]
            },
        ),
        ChartKind::Conjugate => sweep(
            f,
            nu,
            &[
                "pair.f_nu",
                "pair.f_nux",
                "pair.fx_nu",
                "pair.f_nuy",
                "pair.fy_nu",
                "pair.fx_nuy",
                "pair.fy_nux",
                "pair.fxy_nu",
                "pair.f_nuxy",
                "pair.fx_nux_minus_fy_nuy",
            ],
            tol,
            |a, b| {
                let (sa, sb) = (jet_scale(a), jet_scale(b));
                let diff = pair(&a.dx, &b.dx) - pair(&a.dy, &b.dy);
                let scale = norm(&a.dx) * norm(&b.dx) + norm(&a.dy) * norm(&b.dy);
                vec![
                    jet_pairing_residual(&a.value, sa, &b.value, sb),
                    jet_pairing_residual(&a.value, sa, &b.dx, sb),
                    jet_pairing_residual(&a.dx, sa, &b.value, sb),
                    jet_pairing_residual(&a.value, sa, &b.dy, sb),
                    jet_pairing_residual(&a.dy, sa, &b.value, sb),
                    jet_pairing_residual(&a.dx, sa, &b.dy, sb),
                    jet_pairing_residual(&a.dy, sa, &b.dx, sb),
                    jet_pairing_residual(&a.dxy, sa, &b.value, sb),
                    jet_pairing_residual(&a.value, sa, &b.dxy, sb),
                    relative(diff, scale),
                ]
            },
        ),
    }
}

/// The three determinant families that the asymptotic map preserves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JetDeterminants {
    pub xy: f64,
    pub xxx: Option<f64>,
    pub yyy: Option<f64>,
}

impl JetDeterminants {
    pub fn of(j: &JetRecord<4>) -> Self {
        Self {
            xy: det4([&j.value, &j.dx, &j.dy, &j.dxy]),
            xxx: j.dxxx.as_ref().map(|t| det4([&j.value, &j.dx, &j.dxx, t])),
            yyy: j.dyyy.as_ref().map(|t| det4([&j.value, &j.dy, &j.dyy, t])),
        }
    }
}

/// Absolute pointwise differences of the determinant invariants.
///
/// Asymptotic: `det_f − det_ν` for `(f, f_x, f_y, f_xy)` and, when both jets carry
/// third derivatives, for `(f, f_x, f_xx, f_xxx)` and `(f, f_y, f_yy, f_yyy)`.
///
/// Conjugate: `det_f + det_ν` for `(f, f_x, f_y, f_xx)` and `(…, f_yy)`,
/// the vanishing `det|ν, ν_x, ν_y, ν_xy|`, and the equality of the `ν_xx` and
/// `ν_yy` determinants. The opposite-sign version of that last relation is
/// kept as a diagnostic.
pub fn det_invariance_report<F, N>(f: &F, nu: &N, chart: ChartKind, tol: f64) -> Result<InvariantReport>
where
    F: JetField<4> + ?Sized,
    N: JetField<4> + ?Sized,
{
    match chart {
        ChartKind::Asymptotic => {
            let sites = shared_sites(f, nu)?;
            let (i, j) = sites[0];
            let third = f.jet(i, j)?.dxxx.is_some() && nu.jet(i, j)?.dxxx.is_some();
            let names: &[&str] = if third { &["det.xy", "det.xxx", "det.yyy"] } else { &["det.xy"] };
            sweep(f, nu, names, tol, |a, b| {
                let (da, db) = (JetDeterminants::of(a), JetDeterminants::of(b));
                let mut row = vec![(da.xy - db.xy).abs()];
                if third {
                    row.push(opt_diff(da.xxx, db.xxx));
                    row.push(opt_diff(da.yyy, db.yyy));
                }
                row
            })
        }
        ChartKind::Conjugate => {
            let names = ["det.xx_flip", "det.yy_flip", "det.nu_mixed", "det.nu_xx_eq_yy", "det.nu_xx_eq_minus_yy_as_printed"];
            let mut report = sweep(f, nu, &names, tol, |a, b| {
                let fxx = det4([&a.value, &a.dx, &a.dy, &a.dxx]);
                let fyy = det4([&a.value, &a.dx, &a.dy, &a.dyy]);
                let nxx = det4([&b.value, &b.dx, &b.dy, &b.dxx]);
                let nyy = det4([&b.value, &b.dx, &b.dy, &b.dyy]);
                let mixed = det4([&b.value, &b.dx, &b.dy, &b.dxy]);
                vec![(fxx + nxx).abs(), (fyy + nyy).abs(), mixed.abs(), (nyy - nxx).abs(), (nyy + nxx).abs()]
            })?;
            if let Some(r) = report.identities.last_mut() {
                r.kind = crate::report::RecordKind::Diagnostic;
            }
            Ok(report)
        }
    }
}

fn opt_diff(a: Option<f64>, b: Option<f64>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => f64::NAN,
    }
}

/// Projective Fubini form coefficients at interior sites.
#[derive(Clone, Debug, PartialEq)]
pub struct FubiniForms {
    pub sites: Vec<[usize; 2]>,
    pub coords: Vec<[f64; 2]>,
    /// `2⟨f_x, ν_y⟩`.
    pub f2: Vec<f64>,
    /// `sign(⟨f_x, ν_xx⟩) √det|ν, ν_x, ν_xx, ν_xxx|`.
    pub f3: Vec<f64>,
    /// `sign(⟨f_y, ν_yy⟩) √(-det|ν, ν_y, ν_yy, ν_yyy|)`.
    pub f3tilde: Vec<f64>,
    /// `F2² = 4 det|ν, ν_x, ν_y, ν_xy|`, `F3² = ⟨f_x, ν_xx⟩²` and the tilde analogue.
    pub report: InvariantReport,
}

/// Square root of a radicand that must be nonnegative up to `scale·tol`.
fn signed_root(radicand: f64, scale: f64, tol: f64, sign_of: f64) -> Result<f64> {
    if radicand < -tol * scale.max(f64::MIN_POSITIVE) {
        return Err(PlmError::ChartMismatch { site: None, radicand });
    }
    let r = radicand.max(0.0).sqrt();
    Ok(if sign_of < 0.0 { -r } else { r })
}

/// Fubini forms for an asymptotic-chart pair. Both jets need third derivatives.
pub fn fubini_forms<F, N>(f: &F, nu: &N, tol: f64) -> Result<FubiniForms>
where
    F: JetField<4> + ?Sized,
    N: JetField<4> + ?Sized,
{
    let sites = shared_sites(f, nu)?;
    let th = Thresholds::default();
    let rows = par::try_map(&sites, |&(i, j)| -> Result<[f64; 6]> {
        let at = |e: PlmError| e.at(&grid_site(i, j));
        let a = f.jet(i, j)?;
        let b = nu.jet(i, j)?;
        let (nxxx, nyyy) = (b.third_x()?, b.third_y()?);
        let dxy = det4([&b.value, &b.dx, &b.dy, &b.dxy]);
        let dxxx = det4([&b.value, &b.dx, &b.dxx, nxxx]);
        let dyyy = det4([&b.value, &b.dy, &b.dyy, nyyy]);
        let p3 = pair(&a.dx, &b.dxx);
        let p3t = pair(&a.dy, &b.dyy);
        let f2 = 2.0 * pair(&a.dx, &b.dy);
        let f3 = signed_root(dxxx, bound([&b.value, &b.dx, &b.dxx, nxxx]), th.chart, p3).map_err(at)?;
        let f3t = signed_root(-dyyy, bound([&b.value, &b.dy, &b.dyy, nyyy]), th.chart, p3t).map_err(at)?;
        Ok([
            f2,
            f3,
            f3t,
            relative_difference(f2 * f2, 4.0 * dxy, 1.0),
            relative_difference(p3 * p3, dxxx, 1.0),
            relative_difference(p3t * p3t, -dyyy, 1.0),
        ])
    })?;
    let mut table = ResidualTable::new(&["fubini.f2_squared", "fubini.f3_squared", "fubini.f3tilde_squared"]);
    for (&(i, j), r) in sites.iter().zip(&rows) {
        table.push(grid_site(i, j), &r[3..]);
    }
    Ok(FubiniForms {
        sites: sites.iter().map(|&(i, j)| [i, j]).collect(),
        coords: sites.iter().map(|&(i, j)| f.coord(i, j)).collect(),
        f2: rows.iter().map(|r| r[0]).collect(),
        f3: rows.iter().map(|r| r[1]).collect(),
        f3tilde: rows.iter().map(|r| r[2]).collect(),
        report: table.into_report(tol),
    })
}

/// Coefficients of the linear systems satisfied by `ν` (and `f`).
///
/// Asymptotic: `ν_xx = U₁ν_x + V₁ν_y + W₁ν`, `ν_yy = U₂ν_x + V₂ν_y + W₂ν`, and
/// `f_xx = U₁f_x − V₁f_y + W̃₁f`, `f_yy = −U₂f_x + V₂f_y + W̃₂f`.
///
/// Conjugate: `ν_xy = Uν_x + Vν_y + Wν`, `ν_yy − ν_xx = −2Ṽν_x + 2Ũν_y + Cν`,
/// `f_xy = Ũf_x + Ṽf_y + W̃f`, `f_yy − f_xx = −2Vf_x + 2Uf_y + C̃f`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompatCoeffs {
    pub chart: ChartKind,
    pub sites: Vec<[usize; 2]>,
    /// Column names, e.g. `U1, V1, W1, U2, V2, W2` (+ `W1~, W2~` with `f`).
    pub names: Vec<String>,
    /// One row per site, aligned with `names`.
    pub values: Vec<Vec<f64>>,
    pub report: InvariantReport,
}

impl CompatCoeffs {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.values.iter().map(|r| r[k]).collect())
    }
}

fn fit(target: &Vec4, basis: [&Vec4; 3], tol: f64) -> Result<[f64; 3]> {
    let (c, resid) = span_fit(target, &basis.map(|v| *v), crate::DEFAULT_DEGENERACY_EPS)?;
    if resid > tol {
        return Err(PlmError::NotPlmConormal { site: None, residual: resid });
    }
    Ok([c[0], c[1], c[2]])
}

/// Solves for the compatibility coefficients at every interior site.
///
/// With `f` supplied, the dual system for `f` is solved as well and its shared
/// coefficients are checked against those of `ν`.
pub fn compat_coeffs<N, F>(nu: &N, chart: ChartKind, f: Option<&F>, tol: f64) -> Result<CompatCoeffs>
where
    N: JetField<4> + ?Sized,
    F: JetField<4> + ?Sized,
{
    let sites = match f {
        Some(f) => shared_sites(f, nu)?,
        None => nu.interior(),
    };
    if sites.is_empty() {
        return Err(PlmError::Domain("grid interior is empty".into()));
    }
    let (mut names, checks): (Vec<&str>, Vec<&str>) = match chart {
        ChartKind::Asymptotic => (
            vec!["U1", "V1", "W1", "U2", "V2", "W2"],
            vec![
                "compat.v1_squared",
                "compat.u2_squared",
                "compat.dual_u1",
                "compat.dual_v1",
                "compat.dual_u2",
                "compat.dual_v2",
            ],
        ),
        ChartKind::Conjugate => {
            (vec!["U", "V", "W", "U~", "V~", "C"], vec!["compat.dual_u", "compat.dual_v", "compat.dual_u~", "compat.dual_v~"])
        }
    };
    if f.is_some() {
        names.extend(match chart {
            ChartKind::Asymptotic => ["W1~", "W2~"],
            ChartKind::Conjugate => ["W~", "C~"],
        });
    }
    let rows = par::try_map(&sites, |&(i, j)| -> Result<(Vec<f64>, Vec<f64>)> {
        let at = |e: PlmError| e.at(&grid_site(i, j));
        let n = nu.jet(i, j)?;
        let basis = [&n.dx, &n.dy, &n.value];
        let fj = f.map(|f| f.jet(i, j)).transpose()?;
        match chart {
            ChartKind::Asymptotic => {
                let [u1, v1, w1] = fit(&n.dxx, basis, tol).map_err(at)?;
                let [u2, v2, w2] = fit(&n.dyy, basis, tol).map_err(at)?;
                let mut vals = vec![u1, v1, w1, u2, v2, w2];
                let mut checks = vec![f64::NAN; 6];
                let d = JetDeterminants::of(&n);
                if let (Some(dxxx), Some(dyyy)) = (d.xxx, d.yyy) {
                    checks[0] = relative_difference(v1 * v1, dxxx / d.xy, 1.0);
                    checks[1] = relative_difference(u2 * u2, -dyyy / d.xy, 1.0);
                }
                if let Some(a) = &fj {
                    let fb = [&a.dx, &a.dy, &a.value];
                    let [a1, b1, c1] = fit(&a.dxx, fb, tol).map_err(at)?;
                    let [a2, b2, c2] = fit(&a.dyy, fb, tol).map_err(at)?;
                    checks[2] = relative_difference(a1, u1, 1.0);
                    checks[3] = relative_difference(b1, -v1, 1.0);
                    checks[4] = relative_difference(a2, -u2, 1.0);
                    checks[5] = relative_difference(b2, v2, 1.0);
                    vals.extend([c1, c2]);
                }
                Ok((vals, checks))
            }
            ChartKind::Conjugate => {
                let [u, v, w] = fit(&n.dxy, basis, tol).map_err(at)?;
                let diff = crate::multilinear::sub(&n.dyy, &n.dxx);
                let [a, b, c] = fit(&diff, basis, tol).map_err(at)?;
                let (vt, ut) = (-a / 2.0, b / 2.0);
                let mut vals = vec![u, v, w, ut, vt, c];
                let mut checks = vec![f64::NAN; 4];
                if let Some(fj) = &fj {
                    let fb = [&fj.dx, &fj.dy, &fj.value];
                    let [fu, fv, fw] = fit(&fj.dxy, fb, tol).map_err(at)?;
                    let fdiff = crate::multilinear::sub(&fj.dyy, &fj.dxx);
                    let [fa, fbb, fc] = fit(&fdiff, fb, tol).map_err(at)?;
                    checks[0] = relative_difference(-fa / 2.0, u, 1.0);
                    checks[1] = relative_difference(fbb / 2.0, v, 1.0);
                    checks[2] = relative_difference(fu, ut, 1.0);
                    checks[3] = relative_difference(fv, vt, 1.0);
                    vals.extend([fw, fc]);
                }
                Ok((vals, checks))
            }
        }
    })?;
    let mut report = InvariantReport::new();
    for (k, name) in checks.iter().enumerate() {
        if rows.iter().all(|r| r.1[k].is_nan()) {
            continue;
        }
        let samples: Vec<(Vec<i64>, f64)> = sites.iter().zip(&rows).map(|(&(i, j), r)| (grid_site(i, j), r.1[k])).collect();
        report.push(crate::IdentityRecord::from_samples(*name, samples.iter().map(|(s, v)| (s.as_slice(), *v)), tol));
    }
    Ok(CompatCoeffs {
        chart,
        sites: sites.iter().map(|&(i, j)| [i, j]).collect(),
        names: names.into_iter().map(String::from).collect(),
        values: rows.into_iter().map(|r| r.0).collect(),
        report,
    })
}
