//! Fixtures with known ground truth.
//!
//! Smooth and hypersurface fixtures are polynomial, so their jets are exact;
//! lattice fixtures are either closed form or Moutard-evolved from seeded strips.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::affine_gauge::affine_forms;
use crate::error::{PlmError, Result};
use crate::fields::{self, GridSpec, LatticeField, NdField, NdGridSpec};
use crate::multilinear::{det, solve_dense};
use crate::plm_discrete::{
    affine_det_invariance, discrete_affine_integrate, discrete_det_invariance, discrete_residual, lift_to_projective,
    moutard_defect, moutard_evolve, AffinePair, MoutardCoeff,
};
use crate::plm_hyper::{hyper_compat_residual, hyper_plm_residual, recover_a, AMatrix, ConstantA};
use crate::plm_smooth::{det_invariance_report, orthogonality_report, plm_residual, ChartKind};
use crate::poly::{Poly, PolyField, PolyHyperField, PolyVec};
use crate::report::InvariantReport;

pub const AVAILABLE: [&str; 7] =
    ["hypar", "cubic-graph", "quartic-graph", "sphere-family", "ell-paraboloid", "hypar-lattice", "moutard-random"];

pub fn available() -> &'static [&'static str] {
    &AVAILABLE
}

/// Knobs shared by all scenarios; each scenario reads the ones it needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    pub seed: u64,
    /// Lattice extent per axis.
    pub size: usize,
    /// Lattice spacing, or grid spacing for hypersurface fixtures.
    pub h: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    /// Hypersurface parameter count.
    pub n: usize,
    /// Overrides the default parameter box of smooth fixtures.
    pub grid: Option<GridSpec>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self { seed: 42, size: 32, h: None, h_min: 0.9, h_max: 1.1, n: 2, grid: None }
    }
}

/// One expected value of a fixture.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub quantity: &'static str,
    pub value: f64,
    pub tolerance: f64,
    /// How the value was obtained.
    pub basis: &'static str,
}

/// Surface pair on a 2D grid with exact jets.
#[derive(Clone, Debug)]
pub struct SmoothFixture {
    pub chart: ChartKind,
    pub f: PolyField<4>,
    pub nu: PolyField<4>,
    /// Position and affine conormal, when the pair comes from the gauge `f₄ = -1`.
    pub affine: Option<(PolyField<3>, PolyField<3>)>,
}

impl SmoothFixture {
    pub fn spec(&self) -> &GridSpec {
        crate::fields::JetField::spec(&self.f)
    }
}

#[derive(Clone, Debug)]
pub struct LatticeFixture {
    pub h: f64,
    pub pair: AffinePair,
    pub moutard: Option<MoutardCoeff>,
}

#[derive(Clone, Debug)]
pub struct HyperPair<const D: usize> {
    pub f: PolyHyperField<D>,
    pub nu: PolyHyperField<D>,
    pub a: AMatrix,
}

#[derive(Clone, Debug)]
pub enum HyperFixture {
    N2(HyperPair<4>),
    N3(HyperPair<5>),
    N4(HyperPair<6>),
}

#[derive(Clone, Debug)]
pub enum Fixture {
    Smooth(SmoothFixture),
    Lattice(LatticeFixture),
    Hyper(HyperFixture),
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub params: ScenarioParams,
    pub fixture: Fixture,
    pub ground_truth: Vec<GroundTruth>,
}

/// Builds a named scenario.
pub fn scenario(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    let (fixture, ground_truth) = match name {
        "hypar" => hypar(params)?,
        "cubic-graph" => cubic_graph(params)?,
        "quartic-graph" => quartic_graph(params)?,
        "sphere-family" => sphere_family(params)?,
        "ell-paraboloid" => ell_paraboloid(params)?,
        "hypar-lattice" => hypar_lattice(params)?,
        "moutard-random" => moutard_random(params)?,
        other => {
            return Err(PlmError::UnknownScenario {
                name: other.to_string(),
                available: AVAILABLE.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(Scenario { name: name.to_string(), params: params.clone(), fixture, ground_truth })
}

fn xy() -> (Poly, Poly) {
    (Poly::var(2, 0), Poly::var(2, 1))
}

fn c2(v: f64) -> Poly {
    Poly::constant(2, v)
}

/// `(𝐟, -1)` and `(𝛎, ⟨𝐟, 𝛎⟩)` as polynomials.
fn lift_poly(f: &PolyVec<3>, nu: &PolyVec<3>) -> (PolyVec<4>, PolyVec<4>) {
    let nv = f.nvars();
    let [a, b, c] = f.0.clone();
    let [p, q, r] = nu.0.clone();
    (PolyVec([a, b, c, Poly::constant(nv, -1.0)]), PolyVec([p, q, r, f.dot(nu)]))
}

fn affine_fixture(spec: GridSpec, f3: PolyVec<3>, nu3: PolyVec<3>) -> Result<SmoothFixture> {
    let (f4, nu4) = lift_poly(&f3, &nu3);
    Ok(SmoothFixture {
        chart: ChartKind::Asymptotic,
        f: PolyField::new(spec.clone(), f4, 0)?,
        nu: PolyField::new(spec.clone(), nu4, 0)?,
        affine: Some((PolyField::new(spec.clone(), f3, 0)?, PolyField::new(spec, nu3, 0)?)),
    })
}

fn hypar(p: &ScenarioParams) -> Result<(Fixture, Vec<GroundTruth>)> {
    let spec = match &p.grid {
        Some(g) => g.clone(),
        None => GridSpec::square(-1.0, 1.0, 0.05)?,
    };
    let (x, y) = xy();
    let f3 = PolyVec([x.clone(), y.clone(), &x * &y]);
    let nu3 = PolyVec([-&y, -&x, c2(1.0)]);
    let truth = vec![
        GroundTruth { quantity: "det.f_xy", value: 1.0, tolerance: 1e-10, basis: "cofactor expansion by hand" },
        GroundTruth { quantity: "det.nu_xy", value: 1.0, tolerance: 1e-10, basis: "cofactor expansion by hand" },
        GroundTruth { quantity: "blaschke.origin", value: -1.0, tolerance: 1e-10, basis: "det|(-y,-x,1),(0,-1,0),(-1,0,0)|" },
        GroundTruth { quantity: "a_cubic.origin", value: 0.0, tolerance: 1e-10, basis: "quadric" },
        GroundTruth { quantity: "b_cubic.origin", value: 0.0, tolerance: 1e-10, basis: "quadric" },
    ];
    Ok((Fixture::Smooth(affine_fixture(spec, f3, nu3)?), truth))
}

/// A non-quadric surface in asymptotic coordinates:
/// `𝛎 = (-y, -x, 1 + (x² + y²)/2)`,
/// `𝐟 = (x + xy²/2 - x³/6, y + x²y/2 - y³/6, xy)`.
fn cubic_graph(p: &ScenarioParams) -> Result<(Fixture, Vec<GroundTruth>)> {
    let spec = match &p.grid {
        Some(g) => g.clone(),
        None => GridSpec::square(-0.8, 0.8, 0.05)?,
    };
    let (x, y) = xy();
    let half = |q: Poly| q.scale(0.5);
    let sixth = |q: Poly| q.scale(1.0 / 6.0);
    let f3 =
        PolyVec([&(&x + &half(&x * &y.pow(2))) - &sixth(x.pow(3)), &(&y + &half(&x.pow(2) * &y)) - &sixth(y.pow(3)), &x * &y]);
    let nu3 = PolyVec([-&y, -&x, &c2(1.0) + &half(&x.pow(2) + &y.pow(2))]);
    let truth = vec![
        GroundTruth { quantity: "blaschke.origin", value: -1.0, tolerance: 1e-10, basis: "F = (x² + y²)/2 - 1" },
        GroundTruth { quantity: "blaschke.corner", value: -0.36, tolerance: 1e-10, basis: "F = (x² + y²)/2 - 1 at (0.8, 0.8)" },
    ];
    Ok((Fixture::Smooth(affine_fixture(spec, f3, nu3)?), truth))
}

/// Quartic terms added to the cubic graph's conormal, so that polynomial
/// stencils are no longer exact on the lift:
/// `𝛎 = (-y, -x, 1 + (x² + y²)/2 + (x⁴ + y⁴)/24)`.
fn quartic_graph(p: &ScenarioParams) -> Result<(Fixture, Vec<GroundTruth>)> {
    let spec = match &p.grid {
        Some(g) => g.clone(),
        None => GridSpec::square(-0.8, 0.8, 0.05)?,
    };
    let (x, y) = xy();
    let k = |c: f64, q: Poly| q.scale(c);
    let f3 = PolyVec([
        &(&(&x + &k(0.5, &x * &y.pow(2))) + &k(1.0 / 24.0, &x * &y.pow(4)))
            - &(&k(1.0 / 6.0, x.pow(3)) + &k(1.0 / 40.0, x.pow(5))),
        &(&(&y + &k(0.5, &x.pow(2) * &y)) + &k(1.0 / 24.0, &x.pow(4) * &y))
            - &(&k(1.0 / 6.0, y.pow(3)) + &k(1.0 / 40.0, y.pow(5))),
        &x * &y,
    ]);
    let quad = &x.pow(2) + &y.pow(2);
    let quart = &x.pow(4) + &y.pow(4);
    let nu3 = PolyVec([-&y, -&x, &(&c2(1.0) + &k(0.5, quad)) + &k(1.0 / 24.0, quart)]);
    let truth = vec![
        GroundTruth {
            quantity: "blaschke.origin", value: -1.0, tolerance: 1e-10, basis: "F = (x⁴ + y⁴)/8 + (x² + y²)/2 - 1"
        },
        GroundTruth { quantity: "blaschke.corner", value: -0.2576, tolerance: 1e-10, basis: "F at (0.8, 0.8)" },
    ];
    Ok((Fixture::Smooth(affine_fixture(spec, f3, nu3)?), truth))
}

/// Unimodular `M` from the seed, with `det M = 1`.
fn unimodular(seed: u64) -> [[f64; 4]; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = rng.random_range(-0.5..0.5) + if i == j { 1.0 } else { 0.0 };
            }
        }
        let d = det(&m).expect("4×4");
        if d.abs() < 0.1 {
            continue;
        }
        if d < 0.0 {
            m[0] = m[0].map(|v| -v);
        }
        let s = d.abs().powf(-0.25);
        return m.map(|r| r.map(|v| v * s));
    }
}

fn inverse_transpose(m: &[[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let a: Vec<Vec<f64>> = m.iter().map(|r| r.to_vec()).collect();
    let mut inv = [[0.0; 4]; 4];
    for k in 0..4 {
        let e: Vec<f64> = (0..4).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
        let col = solve_dense(a.clone(), e).expect("unimodular");
        for i in 0..4 {
            inv[i][k] = col[i];
        }
    }
    std::array::from_fn(|i| std::array::from_fn(|j| inv[j][i]))
}

/// A projectively transformed sphere on conjugate lines:
/// `f = M(2x, 2y, r² - 1, r² + 1)`, `ν = M^{-T}(2x, 2y, r² - 1, -(r² + 1))`.
fn sphere_family(p: &ScenarioParams) -> Result<(Fixture, Vec<GroundTruth>)> {
    let spec = match &p.grid {
        Some(g) => g.clone(),
        None => GridSpec::square(-0.8, 0.8, 0.05)?,
    };
    let (x, y) = xy();
    let r2 = &x.pow(2) + &y.pow(2);
    let base_f = PolyVec([x.scale(2.0), y.scale(2.0), &r2 - &c2(1.0), &r2 + &c2(1.0)]);
    let base_nu = PolyVec([x.scale(2.0), y.scale(2.0), &r2 - &c2(1.0), -(&r2 + &c2(1.0))]);
    let m = unimodular(p.seed);
    let fixture = SmoothFixture {
        chart: ChartKind::Conjugate,
        f: PolyField::new(spec.clone(), base_f.transform(&m), 0)?,
        nu: PolyField::new(spec, base_nu.transform(&inverse_transpose(&m)), 0)?,
        affine: None,
    };
    let truth = vec![
        GroundTruth { quantity: "det.nu_xx", value: 16.0, tolerance: 1e-8, basis: "invariant under unimodular M" },
        GroundTruth { quantity: "det.f_xx", value: -16.0, tolerance: 1e-8, basis: "invariant under unimodular M" },
        GroundTruth { quantity: "det.nu_xy", value: 0.0, tolerance: 1e-8, basis: "conjugate net" },
    ];
    Ok((Fixture::Smooth(fixture), truth))
}

/// `𝐟 = (x, |x|²/2)`, `𝛎 = (-x, 1)` lifted to P^{n+1}.
fn ell_pair<const D: usize>(h: f64) -> Result<HyperPair<D>> {
    let n = D - 2;
    let xs: Vec<Poly> = (0..n).map(|k| Poly::var(n, k)).collect();
    let r2 = xs.iter().fold(Poly::zero(n), |acc, v| &acc + &v.pow(2)).scale(0.5);
    let f: [Poly; D] = std::array::from_fn(|i| match i {
        i if i < n => xs[i].clone(),
        i if i == n => r2.clone(),
        _ => Poly::constant(n, -1.0),
    });
    let nu: [Poly; D] = std::array::from_fn(|i| match i {
        i if i < n => -&xs[i],
        i if i == n => Poly::constant(n, 1.0),
        _ => -&r2,
    });
    let spec = NdGridSpec::cube(n, -1.0, 1.0, h)?;
    let f = PolyHyperField::new(spec.clone(), PolyVec(f), 1)?;
    let nu = PolyHyperField::new(spec, PolyVec(nu), 1)?;
    let at = vec![0.3; n];
    let a = recover_a(&f.jet_at_point(&at), &nu.jet_at_point(&at))?;
    Ok(HyperPair { f, nu, a })
}

fn ell_paraboloid(p: &ScenarioParams) -> Result<(Fixture, Vec<GroundTruth>)> {
    let default_h = [0.1, 0.25, 0.5];
    let h = |k: usize| p.h.unwrap_or(default_h[k]);
    let (fixture, sign) = match p.n {
        2 => (HyperFixture::N2(ell_pair(h(0))?), 1.0),
        3 => (HyperFixture::N3(ell_pair(h(1))?), -1.0),
        4 => (HyperFixture::N4(ell_pair(h(2))?), 1.0),
        n => return Err(PlmError::Domain(format!("ell-paraboloid supports n in 2..=4, got {n}"))),
    };
    let truth = vec![
        GroundTruth { quantity: "a.diagonal", value: sign, tolerance: 1e-10, basis: "recovered A, fixed by round trip" },
        GroundTruth { quantity: "a.off_diagonal", value: 0.0, tolerance: 1e-12, basis: "diagonal second fundamental form" },
    ];
    Ok((Fixture::Hyper(fixture), truth))
}

/// `𝛎 = (-n₂h, -n₁h, 1)`, `𝐟 = (n₁h, n₂h, n₁n₂h²)`.
pub fn hypar_lattice_pair(h: f64, extent: [usize; 2]) -> Result<AffinePair> {
    let nu = LatticeField::from_fn(extent, |a, b| [-(b as f64) * h, -(a as f64) * h, 1.0])?;
    let f = LatticeField::from_fn(extent, |a, b| [a as f64 * h, b as f64 * h, (a * b) as f64 * h * h])?;
    Ok(AffinePair { nu, f })
}

fn hypar_lattice(p: &ScenarioParams) -> Result<(Fixture, Vec<GroundTruth>)> {
    let h = p.h.unwrap_or(0.1);
    let pair = hypar_lattice_pair(h, [p.size, p.size])?;
    let truth = vec![
        GroundTruth { quantity: "omega2", value: -h * h, tolerance: 1e-15, basis: "hand computation" },
        GroundTruth { quantity: "volume", value: h.powi(4), tolerance: 1e-16, basis: "hand computation" },
        GroundTruth { quantity: "f2d", value: h * h, tolerance: 1e-12, basis: "square root of the volume" },
        GroundTruth { quantity: "f3d", value: 0.0, tolerance: 1e-12, basis: "bilinear surface" },
    ];
    Ok((Fixture::Lattice(LatticeFixture { h, pair, moutard: None }), truth))
}

/// Moutard-evolved conormal from strips that perturb the hyperbolic-paraboloid
/// lattice by seeded sine waves, with `H` uniform in `[h_min, h_max]` per plaquette.
pub fn moutard_random_pair(seed: u64, size: usize, h_min: f64, h_max: f64) -> Result<(AffinePair, MoutardCoeff)> {
    if size < 2 {
        return Err(PlmError::Domain("moutard-random needs size ≥ 2".into()));
    }
    if !(h_min <= h_max) || h_min == 0.0 && h_max == 0.0 {
        return Err(PlmError::Domain(format!("bad H range [{h_min}, {h_max}]")));
    }
    let h = 0.1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wave = || -> [(f64, f64); 3] { std::array::from_fn(|_| (rng.random_range(-0.05..0.05), rng.random_range(0.2..0.8))) };
    let (wr, wc) = (wave(), wave());
    let strip = |k: usize, w: &[(f64, f64); 3], base: [f64; 3]| -> [f64; 3] {
        std::array::from_fn(|i| base[i] + w[i].0 * (w[i].1 * k as f64).sin())
    };
    let row: Vec<[f64; 3]> = (0..size).map(|k| strip(k, &wr, [0.0, -(k as f64) * h, 1.0])).collect();
    let col: Vec<[f64; 3]> = (0..size).map(|k| strip(k, &wc, [-(k as f64) * h, 0.0, 1.0])).collect();
    let m = size - 1;
    let cells: Vec<(i64, i64)> = (0..m as i64).flat_map(|b| (0..m as i64).map(move |a| (a, b))).collect();
    let hv = crate::par::map(&cells, |&(a, b)| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(1 + (b as u64) * m as u64 + a as u64);
        if h_min == h_max {
            h_min
        } else {
            r.random_range(h_min..h_max)
        }
    });
    let coeff = MoutardCoeff(LatticeField::new([0, 0], [m, m], hv.into_iter().map(|v| [v]).collect())?);
    let nu = moutard_evolve(&row, &col, &coeff)?;
    let (f, _) = discrete_affine_integrate(&nu, [0.0; 3], 1e-9)?;
    Ok((AffinePair { nu, f }, coeff))
}

fn moutard_random(p: &ScenarioParams) -> Result<(Fixture, Vec<GroundTruth>)> {
    let (pair, coeff) = moutard_random_pair(p.seed, p.size, p.h_min, p.h_max)?;
    let truth = vec![
        GroundTruth { quantity: "closure", value: 0.0, tolerance: 1e-12, basis: "exact cancellation" },
        GroundTruth { quantity: "volume.relative_gap", value: 0.0, tolerance: 1e-10, basis: "two determinant expressions agree" },
    ];
    Ok((Fixture::Lattice(LatticeFixture { h: 0.1, pair, moutard: Some(coeff) }), truth))
}

impl Scenario {
    /// Runs the residual reports of the fixture's own module.
    pub fn self_check(&self, tol: f64) -> Result<InvariantReport> {
        let mut rep = InvariantReport::new();
        match &self.fixture {
            Fixture::Smooth(s) => {
                rep.extend(plm_residual(&s.f, &s.nu, s.chart, tol)?);
                rep.extend(orthogonality_report(&s.f, &s.nu, s.chart, tol)?);
                rep.extend(det_invariance_report(&s.f, &s.nu, s.chart, tol)?);
                if let Some((f3, nu3)) = &s.affine {
                    rep.extend(affine_forms(f3, nu3, tol)?.report);
                }
            }
            Fixture::Lattice(l) => {
                let q = lift_to_projective(&l.pair)?;
                rep.extend(discrete_residual(&q, tol));
                rep.extend(discrete_det_invariance(&q, tol));
                rep.extend(affine_det_invariance(&l.pair, tol));
                if let Some(h) = &l.moutard {
                    rep.extend(moutard_defect(&l.pair.nu, h, tol));
                }
            }
            Fixture::Hyper(h) => match h {
                HyperFixture::N2(p) => hyper_check(p, tol, &mut rep)?,
                HyperFixture::N3(p) => hyper_check(p, tol, &mut rep)?,
                HyperFixture::N4(p) => hyper_check(p, tol, &mut rep)?,
            },
        }
        Ok(rep)
    }

    /// Writes the fixture's fields as CSV files into `dir` and returns their paths.
    pub fn dump(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| PlmError::Io(format!("{}: {e}", dir.display())))?;
        let mut out = Vec::new();
        let mut path = |name: &str| {
            let p = dir.join(name);
            out.push(p.clone());
            p
        };
        match &self.fixture {
            Fixture::Smooth(s) => {
                fields::write_grid(&s.f.sample()?, path("f.csv"))?;
                fields::write_grid(&s.nu.sample()?, path("nu.csv"))?;
                if let Some((f3, nu3)) = &s.affine {
                    fields::write_grid(&f3.sample()?, path("affine_f.csv"))?;
                    fields::write_grid(&nu3.sample()?, path("affine_nu.csv"))?;
                }
            }
            Fixture::Lattice(l) => {
                fields::write_lattice(&l.pair.nu, path("nu_lattice.csv"))?;
                fields::write_lattice(&l.pair.f, path("f_lattice.csv"))?;
                let q = lift_to_projective(&l.pair)?;
                fields::write_lattice(&q.nu, path("nu_lattice_lifted.csv"))?;
                fields::write_lattice(&q.f, path("f_lattice_lifted.csv"))?;
                if let Some(h) = &l.moutard {
                    fields::write_lattice(&h.0, path("moutard_h.csv"))?;
                }
            }
            Fixture::Hyper(h) => match h {
                HyperFixture::N2(p) => dump_hyper(p, &mut path)?,
                HyperFixture::N3(p) => dump_hyper(p, &mut path)?,
                HyperFixture::N4(p) => dump_hyper(p, &mut path)?,
            },
        }
        Ok(out)
    }
}

fn hyper_check<const D: usize>(p: &HyperPair<D>, tol: f64, rep: &mut InvariantReport) -> Result<()> {
    let a = ConstantA(p.a.clone());
    rep.extend(hyper_plm_residual(&p.f, &p.nu, &a, tol)?);
    rep.extend(hyper_compat_residual(&p.nu, &a, tol)?);
    Ok(())
}

fn dump_hyper<const D: usize>(p: &HyperPair<D>, path: &mut impl FnMut(&str) -> PathBuf) -> Result<()> {
    fields::write_hyper_grid(&p.f.sample()?, path("f.csv"))?;
    fields::write_hyper_grid(&p.nu.sample()?, path("nu.csv"))?;
    let spec = crate::fields::HyperJetField::nd_spec(&p.nu).clone();
    let a = NdField::from_fn(spec, |_| p.a.flat())?;
    fields::write_matrix_field(&a, path("a.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_lists_available() {
        match scenario("torus", &ScenarioParams::default()) {
            Err(PlmError::UnknownScenario { available, .. }) => assert_eq!(available.len(), AVAILABLE.len()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unimodular_has_unit_det() {
        let m = unimodular(7);
        assert!((det(&m).unwrap() - 1.0).abs() < 1e-12);
        let t = inverse_transpose(&m);
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..4).map(|k| m[i][k] * t[j][k]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ell_paraboloid_signs() {
        for (n, s) in [(2, 1.0), (3, -1.0), (4, 1.0)] {
            let sc = scenario("ell-paraboloid", &ScenarioParams { n, ..Default::default() }).unwrap();
            let Fixture::Hyper(h) = &sc.fixture else { panic!() };
            let a = match h {
                HyperFixture::N2(p) => p.a.clone(),
                HyperFixture::N3(p) => p.a.clone(),
                HyperFixture::N4(p) => p.a.clone(),
            };
            assert!(a.max_abs_diff(&AMatrix::identity(n).unwrap().scale(s).unwrap()) < 1e-12, "{n}: {a:?}");
        }
    }

    #[test]
    fn every_scenario_passes_its_self_check() {
        for name in AVAILABLE {
            let params = ScenarioParams { size: 12, grid: None, ..Default::default() };
            let sc = scenario(name, &params).unwrap();
            let rep = sc.self_check(1e-9).unwrap();
            assert!(rep.all_pass(), "{name}: {:?}", rep.failures().collect::<Vec<_>>());
        }
    }

    #[test]
    fn smooth_ground_truth_matches_forms() {
        for name in ["hypar", "cubic-graph", "quartic-graph"] {
            let sc = scenario(name, &ScenarioParams::default()).unwrap();
            let Fixture::Smooth(s) = &sc.fixture else { panic!() };
            let (f3, nu3) = s.affine.as_ref().unwrap();
            let forms = affine_forms(f3, nu3, 1e-9).unwrap();
            let at =
                |x: f64, y: f64| forms.coords.iter().position(|c| (c[0] - x).abs() < 1e-9 && (c[1] - y).abs() < 1e-9).unwrap();
            for t in &sc.ground_truth {
                let (field, i) = match t.quantity.split_once('.').unwrap() {
                    (q, "origin") => (q, at(0.0, 0.0)),
                    (q, "corner") => (q, at(0.8, 0.8)),
                    _ => continue,
                };
                let v = match field {
                    "blaschke" => forms.blaschke[i],
                    "a_cubic" => forms.a_cubic[i],
                    "b_cubic" => forms.b_cubic[i],
                    other => panic!("{other}"),
                };
                assert!((v - t.value).abs() <= t.tolerance, "{name} {}: {v}", t.quantity);
            }
        }
    }

    #[test]
    fn moutard_random_is_deterministic() {
        let (a, _) = moutard_random_pair(42, 10, 0.9, 1.1).unwrap();
        let (b, _) = moutard_random_pair(42, 10, 0.9, 1.1).unwrap();
        let (c, _) = moutard_random_pair(43, 10, 0.9, 1.1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
