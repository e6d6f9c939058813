//! The gauge `f₄ = -1`, where the map reduces to the classical Lelieuvre
//! formulas `𝐟_x = 𝛎×𝛎_x`, `𝐟_y = -𝛎×𝛎_y` for a position `𝐟` and affine conormal `𝛎`.
//!
//! The lift `f = (𝐟, -1)`, `ν = (𝛎, ⟨𝐟, 𝛎⟩)` turns an affine pair into a
//! projective one, so every check of [`crate::plm_smooth`] applies to it.

use crate::error::{PlmError, Result};
use crate::fields::{grid_site, FieldGrid, GridSpec, JetField, JetRecord};
use crate::multilinear::{add, cross, det, hadamard_bound, norm, pair, scale, sub, Vec3, Vec4};
use crate::par;
use crate::plm_smooth::{check_same_grid, inverse_reconstruct_point, ChartKind};
use crate::report::{relative, InvariantReport, ResidualTable};

fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    cross(&[*a, *b]).expect("two vectors")
}

fn det3(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    det(&[*a, *b, *c]).expect("three rows")
}

/// Order in which the two integration sweeps run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathOrder {
    /// Along the bottom row first, then up every column.
    RowFirst,
    /// Up the left column first, then along every row.
    ColumnFirst,
}

/// Residual of `𝛎_xy ∥ 𝛎`: `|𝛎_xy - U𝛎|` with `U` the least-squares scalar, over
/// the larger of `|𝛎_xy|` and `|𝛎_x||𝛎_y|/|𝛎|`. The second scale keeps
/// roundoff in a vanishing `𝛎_xy` from reading as a full violation.
pub fn mixed_parallel_residual(jet: &JetRecord<3>) -> f64 {
    let v = &jet.value;
    let vv = pair(v, v);
    let u = if vv > 0.0 { pair(&jet.dxy, v) / vv } else { 0.0 };
    let natural = if vv > 0.0 { norm(&jet.dx) * norm(&jet.dy) / vv.sqrt() } else { 0.0 };
    relative(norm(&sub(&jet.dxy, &scale(v, u))), norm(&jet.dxy).max(natural))
}

/// Integrates `𝐟_x = 𝛎×𝛎_x`, `𝐟_y = -𝛎×𝛎_y` with the trapezoid rule over the
/// interior box of `nu`, starting from `f0` at its lower-left site.
///
/// The conormal must satisfy `𝛎_xy ∥ 𝛎` to within `tol` at every site. The
/// report holds `closure.loop`, the trapezoid sum around each cell relative to
/// the summed edge lengths.
pub fn classical_lelieuvre_integrate<J>(nu: &J, f0: Vec3, order: PathOrder, tol: f64) -> Result<(FieldGrid<3>, InvariantReport)>
where
    J: JetField<3> + ?Sized,
{
    let m = nu.margin();
    let full = nu.spec();
    let [nx, ny] = full.dims;
    if nx <= 2 * m + 1 || ny <= 2 * m + 1 {
        return Err(PlmError::Domain("grid interior needs at least 2×2 sites".into()));
    }
    let (mx, my) = (nx - 2 * m, ny - 2 * m);
    let spec = GridSpec::new(full.coord(m, m), full.spacing, [mx, my])?;
    let sites = spec.interior(0);
    let jets = par::try_map(&sites, |&(i, j)| nu.jet(i + m, j + m))?;

    let closure = par::map(&jets, mixed_parallel_residual);
    if let Some((k, &worst)) = closure.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        if !(worst <= tol) {
            let (i, j) = sites[k];
            return Err(PlmError::Closure { site: grid_site(i + m, j + m), residual: worst });
        }
    }

    let [hx, hy] = spec.spacing;
    let dfx: Vec<Vec3> = jets.iter().map(|q| cross3(&q.value, &q.dx)).collect();
    let dfy: Vec<Vec3> = jets.iter().map(|q| scale(&cross3(&q.value, &q.dy), -1.0)).collect();
    let at = |i: usize, j: usize| spec.index(i, j);
    let step_x = |i: usize, j: usize| scale(&add(&dfx[at(i, j)], &dfx[at(i + 1, j)]), 0.5 * hx);
    let step_y = |i: usize, j: usize| scale(&add(&dfy[at(i, j)], &dfy[at(i, j + 1)]), 0.5 * hy);

    let mut f = vec![[0.0; 3]; mx * my];
    f[0] = f0;
    match order {
        PathOrder::RowFirst => {
            for i in 1..mx {
                f[at(i, 0)] = add(&f[at(i - 1, 0)], &step_x(i - 1, 0));
            }
            for j in 1..my {
                for i in 0..mx {
                    f[at(i, j)] = add(&f[at(i, j - 1)], &step_y(i, j - 1));
                }
            }
        }
        PathOrder::ColumnFirst => {
            for j in 1..my {
                f[at(0, j)] = add(&f[at(0, j - 1)], &step_y(0, j - 1));
            }
            for j in 0..my {
                for i in 1..mx {
                    f[at(i, j)] = add(&f[at(i - 1, j)], &step_x(i - 1, j));
                }
            }
        }
    }

    let cells: Vec<(usize, usize)> = sites.iter().copied().filter(|&(i, j)| i + 1 < mx && j + 1 < my).collect();
    let loops = par::map(&cells, |&(i, j)| {
        let (a, b, c, d) = (step_x(i, j), step_y(i + 1, j), step_x(i, j + 1), step_y(i, j));
        let sum = sub(&add(&a, &b), &add(&c, &d));
        relative(norm(&sum), norm(&a) + norm(&b) + norm(&c) + norm(&d))
    });
    let mut table = ResidualTable::new(&["closure.loop"]);
    for (&(i, j), r) in cells.iter().zip(loops) {
        table.push(grid_site(i + m, j + m), &[r]);
    }
    Ok((FieldGrid::new(spec, f)?, table.into_report(tol)))
}

/// `f = (𝐟, -1)` and `ν = (𝛎, ⟨𝐟, 𝛎⟩)` on a shared grid.
pub fn lift_affine(f: &FieldGrid<3>, nu: &FieldGrid<3>) -> Result<(FieldGrid<4>, FieldGrid<4>)> {
    check_same_grid(f.spec(), nu.spec())?;
    let f4 = f.map(|p| [p[0], p[1], p[2], -1.0])?;
    let nu4 = FieldGrid::new(
        nu.spec().clone(),
        f.values().iter().zip(nu.values()).map(|(p, n)| [n[0], n[1], n[2], pair(p, n)]).collect(),
    )?;
    Ok((f4, nu4))
}

/// Lifts a single pair of jets. Derivatives of `⟨𝐟, 𝛎⟩` follow from the Leibniz rule;
/// its third derivatives are present only when both inputs carry them.
pub fn lift_jets(f: &JetRecord<3>, nu: &JetRecord<3>) -> (JetRecord<4>, JetRecord<4>) {
    let ext = |v: &Vec3, last: f64| [v[0], v[1], v[2], last];
    let fl = JetRecord {
        value: ext(&f.value, -1.0),
        dx: ext(&f.dx, 0.0),
        dy: ext(&f.dy, 0.0),
        dxx: ext(&f.dxx, 0.0),
        dxy: ext(&f.dxy, 0.0),
        dyy: ext(&f.dyy, 0.0),
        dxxx: f.dxxx.map(|d| ext(&d, 0.0)),
        dyyy: f.dyyy.map(|d| ext(&d, 0.0)),
    };
    let p = |a: &Vec3, b: &Vec3| pair(a, b);
    let (fv, n) = (&f.value, &nu.value);
    let third = |f1: &Vec3, f2: &Vec3, f3: Option<Vec3>, n1: &Vec3, n2: &Vec3, n3: Option<Vec3>| -> Option<f64> {
        Some(p(&f3?, n) + 3.0 * p(f2, n1) + 3.0 * p(f1, n2) + p(fv, &n3?))
    };
    let w = [
        p(fv, n),
        p(&f.dx, n) + p(fv, &nu.dx),
        p(&f.dy, n) + p(fv, &nu.dy),
        p(&f.dxx, n) + 2.0 * p(&f.dx, &nu.dx) + p(fv, &nu.dxx),
        p(&f.dxy, n) + p(&f.dx, &nu.dy) + p(&f.dy, &nu.dx) + p(fv, &nu.dxy),
        p(&f.dyy, n) + 2.0 * p(&f.dy, &nu.dy) + p(fv, &nu.dyy),
    ];
    let wxxx = third(&f.dx, &f.dxx, f.dxxx, &nu.dx, &nu.dxx, nu.dxxx);
    let wyyy = third(&f.dy, &f.dyy, f.dyyy, &nu.dy, &nu.dyy, nu.dyyy);
    let nl = JetRecord {
        value: ext(&nu.value, w[0]),
        dx: ext(&nu.dx, w[1]),
        dy: ext(&nu.dy, w[2]),
        dxx: ext(&nu.dxx, w[3]),
        dxy: ext(&nu.dxy, w[4]),
        dyy: ext(&nu.dyy, w[5]),
        dxxx: nu.dxxx.zip(wxxx).map(|(d, x)| ext(&d, x)),
        dyyy: nu.dyyy.zip(wyyy).map(|(d, x)| ext(&d, x)),
    };
    (fl, nl)
}

/// Which half of a lifted pair to present.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftSide {
    Surface,
    Conormal,
}

/// Lifted jets served on the fly from affine jet fields.
pub struct LiftedJets<'a, F: ?Sized, N: ?Sized> {
    f: &'a F,
    nu: &'a N,
    side: LiftSide,
}

impl<'a, F: JetField<3> + ?Sized, N: JetField<3> + ?Sized> LiftedJets<'a, F, N> {
    pub fn new(f: &'a F, nu: &'a N, side: LiftSide) -> Result<Self> {
        check_same_grid(f.spec(), nu.spec())?;
        Ok(Self { f, nu, side })
    }
}

impl<F: JetField<3> + ?Sized, N: JetField<3> + ?Sized> JetField<4> for LiftedJets<'_, F, N> {
    fn spec(&self) -> &GridSpec {
        self.f.spec()
    }

    fn margin(&self) -> usize {
        self.f.margin().max(self.nu.margin())
    }

    fn jet(&self, i: usize, j: usize) -> Result<JetRecord<4>> {
        let (fl, nl) = lift_jets(&self.f.jet(i, j)?, &self.nu.jet(i, j)?);
        Ok(match self.side {
            LiftSide::Surface => fl,
            LiftSide::Conormal => nl,
        })
    }
}

/// Blaschke coefficient `F = det|𝛎, 𝛎_x, 𝛎_y|` and cubic coefficients
/// `A = det|𝛎, 𝛎_x, 𝛎_xx|`, `B = det|𝛎, 𝛎_y, 𝛎_yy|` per interior site.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForms {
    pub sites: Vec<[usize; 2]>,
    pub coords: Vec<[f64; 2]>,
    pub blaschke: Vec<f64>,
    pub a_cubic: Vec<f64>,
    pub b_cubic: Vec<f64>,
    pub report: InvariantReport,
}

const FORM_CHECKS: [&str; 6] =
    ["affine.fx_nuy", "affine.f_mixed", "affine.fxx_nux", "affine.fyy_nuy", "affine.lift_volume", "affine.nuxy_parallel"];
const FORM_DIAGNOSTICS: [&str; 2] = ["affine.fxx_nux_as_printed", "affine.fyy_nuy_as_printed"];
const CUBIC_CHECKS: [&str; 2] = ["affine.cubic_x", "affine.cubic_y"];

/// Computes the affine forms and checks the identities that tie them to `𝐟`:
///
/// ```text
/// ⟨𝐟_x, 𝛎_y⟩ = F            det|𝐟_x, 𝐟_y, 𝐟_xy| = F²
/// ⟨𝐟_xx, 𝛎_x⟩ = -A          ⟨𝐟_yy, 𝛎_y⟩ = B
/// det|𝐟_x, 𝐟_xx, 𝐟_xxx| = A²   det|𝐟_y, 𝐟_yy, 𝐟_yyy| = -B²
/// det|ν, ν_x, ν_y, ν_xy| = F²  (on the lift)
/// ```
///
/// The last two cubic checks need third derivatives on both fields. A radicand
/// of the wrong sign beyond `tol` is a [`PlmError::ChartMismatch`].
pub fn affine_forms<F, N>(f: &F, nu: &N, tol: f64) -> Result<AffineForms>
where
    F: JetField<3> + ?Sized,
    N: JetField<3> + ?Sized,
{
    check_same_grid(f.spec(), nu.spec())?;
    let spec = f.spec();
    let sites = spec.interior(f.margin().max(nu.margin()));
    if sites.is_empty() {
        return Err(PlmError::Domain("grid interior is empty".into()));
    }
    let rows = par::try_map(&sites, |&(i, j)| -> Result<(f64, f64, f64, Vec<f64>, Option<[f64; 2]>)> {
        let site = grid_site(i, j);
        let (fj, nj) = (f.jet(i, j)?, nu.jet(i, j)?);
        let v = &nj.value;
        // norms floored at first-order scale: vanishing derivatives must not shrink the bounds to their noise
        let (sf, sn) = (norm(&fj.dx).max(norm(&fj.dy)), norm(v).max(norm(&nj.dx)).max(norm(&nj.dy)));
        let bf = |x: &Vec3, y: &Vec3, z: &Vec3| norm(x).max(sf) * norm(y).max(sf) * norm(z).max(sf);
        let bn = |x: &Vec3, y: &Vec3, z: &Vec3| norm(x).max(sn) * norm(y).max(sn) * norm(z).max(sn);
        let big_f = det3(v, &nj.dx, &nj.dy);
        let a = det3(v, &nj.dx, &nj.dxx);
        let b = det3(v, &nj.dy, &nj.dyy);
        let mixed = det3(&fj.dx, &fj.dy, &fj.dxy);
        let mixed_scale = bf(&fj.dx, &fj.dy, &fj.dxy);
        if mixed < -tol * mixed_scale {
            return Err(PlmError::ChartMismatch { site: Some(site), radicand: mixed });
        }
        let (_, nl) = lift_jets(&fj, &nj);
        let lv: [Vec4; 4] = [nl.value, nl.dx, nl.dy, nl.dxy];
        let fscale = |x: &Vec3, y: &Vec3| norm(x).max(sf) * norm(y).max(sn);
        let mut row = vec![
            relative(pair(&fj.dx, &nj.dy) - big_f, fscale(&fj.dx, &nj.dy).max(bn(v, &nj.dx, &nj.dy))),
            relative(mixed - big_f * big_f, mixed_scale.max(big_f * big_f)),
            relative(pair(&fj.dxx, &nj.dx) + a, fscale(&fj.dxx, &nj.dx).max(bn(v, &nj.dx, &nj.dxx))),
            relative(pair(&fj.dyy, &nj.dy) - b, fscale(&fj.dyy, &nj.dy).max(bn(v, &nj.dy, &nj.dyy))),
            relative(det(&lv)? - big_f * big_f, hadamard_bound(&lv).max(big_f * big_f)),
            mixed_parallel_residual(&nj),
            relative(pair(&fj.dxx, &nj.dx) - a, fscale(&fj.dxx, &nj.dx).max(bn(v, &nj.dx, &nj.dxx))),
            relative(pair(&fj.dyy, &nj.dy) + b, fscale(&fj.dyy, &nj.dy).max(bn(v, &nj.dy, &nj.dyy))),
        ];
        let cubic = match (fj.dxxx, fj.dyyy) {
            (Some(fxxx), Some(fyyy)) => {
                let cx = det3(&fj.dx, &fj.dxx, &fxxx);
                let cy = det3(&fj.dy, &fj.dyy, &fyyy);
                let (sx, sy) = (bf(&fj.dx, &fj.dxx, &fxxx), bf(&fj.dy, &fj.dyy, &fyyy));
                if cx < -tol * sx {
                    return Err(PlmError::ChartMismatch { site: Some(site), radicand: cx });
                }
                if cy > tol * sy {
                    return Err(PlmError::ChartMismatch { site: Some(site), radicand: -cy });
                }
                row.push(relative(cx - a * a, sx.max(a * a)));
                row.push(relative(cy + b * b, sy.max(b * b)));
                Some([cx, cy])
            }
            _ => None,
        };
        Ok((big_f, a, b, row, cubic))
    })?;
    let has_cubic = rows.iter().all(|r| r.4.is_some());
    let mut names: Vec<&str> = FORM_CHECKS.to_vec();
    names.extend(FORM_DIAGNOSTICS);
    if has_cubic {
        names.extend(CUBIC_CHECKS);
    }
    let mut table = ResidualTable::new(&names);
    for (&(i, j), r) in sites.iter().zip(&rows) {
        table.push(grid_site(i, j), &r.3[..names.len()]);
    }
    let mut report = table.into_report(tol);
    for rec in report.identities.iter_mut() {
        if FORM_DIAGNOSTICS.contains(&rec.name.as_str()) {
            rec.kind = crate::report::RecordKind::Diagnostic;
        }
    }
    Ok(AffineForms {
        sites: sites.iter().map(|&(i, j)| [i, j]).collect(),
        coords: sites.iter().map(|&(i, j)| spec.coord(i, j)).collect(),
        blaschke: rows.iter().map(|r| r.0).collect(),
        a_cubic: rows.iter().map(|r| r.1).collect(),
        b_cubic: rows.iter().map(|r| r.2).collect(),
        report,
    })
}

/// The affine conormal of a surface point: the first three components of the
/// inverse reconstruction applied to the lift `(𝐟, -1)`.
///
/// The relations are quadratic in `𝛎`, so the result is fixed only up to sign.
pub fn affine_conormal_from_surface(f: &JetRecord<3>) -> Result<Vec3> {
    let lifted = f.map(|v| [v[0], v[1], v[2], 0.0]);
    let lifted = JetRecord { value: [f.value[0], f.value[1], f.value[2], -1.0], ..lifted };
    let nu = inverse_reconstruct_point(&lifted, ChartKind::Asymptotic)?;
    Ok([nu[0], nu[1], nu[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FdJets, Stencil};
    use crate::poly::{Poly, PolyField, PolyVec};

    fn hypar_fields(spec: &GridSpec) -> (PolyField<3>, PolyField<3>) {
        let (x, y) = (Poly::var(2, 0), Poly::var(2, 1));
        let f = PolyVec([x.clone(), y.clone(), &x * &y]);
        let nu = PolyVec([-&y, -&x, Poly::constant(2, 1.0)]);
        (PolyField::new(spec.clone(), f, 0).unwrap(), PolyField::new(spec.clone(), nu, 0).unwrap())
    }

    #[test]
    fn integrates_hypar() {
        let spec = GridSpec::square(-1.0, 1.0, 0.1).unwrap();
        let (_, nu) = hypar_fields(&spec);
        let f0 = [-1.0, -1.0, 1.0];
        for order in [PathOrder::RowFirst, PathOrder::ColumnFirst] {
            let (f, rep) = classical_lelieuvre_integrate(&nu, f0, order, 1e-10).unwrap();
            assert!(rep.all_pass());
            for (k, p) in f.values().iter().enumerate() {
                let [x, y] = f.spec().coord(k % 21, k / 21);
                assert!(norm(&sub(p, &[x, y, x * y])) < 1e-12, "{x} {y} {p:?}");
            }
        }
    }

    #[test]
    fn sampled_hypar_through_fd() {
        let spec = GridSpec::square(-1.0, 1.0, 0.1).unwrap();
        let nu = FieldGrid::from_fn(spec, |x, y| [-y, -x, 1.0]).unwrap();
        let fd = FdJets::new(&nu, Stencil::Second, 2).unwrap();
        let (f, _) = classical_lelieuvre_integrate(&fd, [0.0; 3], PathOrder::RowFirst, 1e-10).unwrap();
        assert_eq!(f.spec().dims, [19, 19]);
        let p = f.get(18, 18);
        assert!(norm(&sub(p, &[1.8, 1.8, 0.0])) < 1e-12, "{p:?}");
    }

    #[test]
    fn non_parallel_mixed_is_closure_error() {
        let spec = GridSpec::square(-1.0, 1.0, 0.1).unwrap();
        let (x, y) = (Poly::var(2, 0), Poly::var(2, 1));
        let nu = PolyField::new(spec, PolyVec([&x * &y, -&x, Poly::constant(2, 1.0)]), 0).unwrap();
        let e = classical_lelieuvre_integrate(&nu, [0.0; 3], PathOrder::RowFirst, 1e-8).unwrap_err();
        assert!(matches!(e, PlmError::Closure { .. }));
    }

    #[test]
    fn hypar_forms() {
        let spec = GridSpec::square(-1.0, 1.0, 0.25).unwrap();
        let (f, nu) = hypar_fields(&spec);
        let forms = affine_forms(&f, &nu, 1e-12).unwrap();
        assert!(forms.report.all_pass(), "{:?}", forms.report.failures().collect::<Vec<_>>());
        assert!(forms.report.get("affine.cubic_x").is_some());
        assert!(forms.blaschke.iter().all(|v| *v == -1.0));
        assert!(forms.a_cubic.iter().chain(&forms.b_cubic).all(|v| *v == 0.0));
    }

    #[test]
    fn lift_matches_smooth_fixture() {
        let spec = GridSpec::square(-1.0, 1.0, 0.5).unwrap();
        let (f, nu) = hypar_fields(&spec);
        let (fl, nl) = lift_affine(&f.sample().unwrap(), &nu.sample().unwrap()).unwrap();
        let [x, y] = spec.coord(1, 3);
        assert_eq!(*fl.get(1, 3), [x, y, x * y, -1.0]);
        assert_eq!(*nl.get(1, 3), [-y, -x, 1.0, -x * y]);
        let jet = f.jet(1, 3).unwrap();
        let n = affine_conormal_from_surface(&jet).unwrap();
        assert!(crate::projective::projective_distance(&n, &[-y, -x, 1.0]) < 1e-14, "{n:?}");
        assert!((norm(&n) - norm(&[-y, -x, 1.0])).abs() < 1e-14);
    }
}
