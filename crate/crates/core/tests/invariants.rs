use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;

use plm_core::affine_gauge::{classical_lelieuvre_integrate, mixed_parallel_residual, PathOrder};
use plm_core::fields::{self, FdJets, FieldGrid, GridSpec, HyperJetField, JetField, LatticeField, Stencil};
use plm_core::multilinear::{cross, det, det_dyn, hodge_star, pair, signed_permutations, solve_dense, wedge2, Bivector};
use plm_core::plm_discrete::{
    affine_det_invariance, closure_defect, discrete_affine_integrate, discrete_det_invariance, discrete_forms,
    lift_to_projective, moutard_evolve, AffinePair, MoutardCoeff,
};
use plm_core::plm_hyper::{hyper_reconstruct, pivot_spread, AMatrix, PlanarAsHyper};
use plm_core::plm_smooth::{inverse_reconstruct_point, reconstruct_point, reconstruct_point_alt, Axis, ChartKind};
use plm_core::projective::projective_distance;
use plm_core::scenarios::{moutard_random_pair, scenario, Fixture, HyperFixture, ScenarioParams, SmoothFixture};

fn smooth(name: &str) -> SmoothFixture {
    match scenario(name, &ScenarioParams::default()).unwrap().fixture {
        Fixture::Smooth(s) => s,
        _ => unreachable!(),
    }
}

fn permutation_det(rows: &[Vec<f64>]) -> f64 {
    signed_permutations(rows.len())
        .iter()
        .map(|(p, s)| *s as f64 * p.iter().enumerate().map(|(r, &c)| rows[r][c]).product::<f64>())
        .sum()
}

fn matrix(d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, d), d)
}

fn vec4() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-3.0..3.0f64)
}

fn small_int4() -> impl Strategy<Value = [i64; 4]> {
    prop::array::uniform4(-20i64..20)
}

fn rational(v: [i64; 4]) -> [BigRational; 4] {
    v.map(|x| BigRational::from_integer(x.into()))
}

/// Unimodular matrix near the identity, with the inverse transpose.
fn unimodular() -> impl Strategy<Value = ([[f64; 4]; 4], [[f64; 4]; 4])> {
    prop::array::uniform4(prop::array::uniform4(-0.4..0.4f64)).prop_filter_map("near-singular", |p| {
        let mut m: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| p[i][j] + (i == j) as u8 as f64));
        let d = det(&m).unwrap();
        if d.abs() < 0.2 {
            return None;
        }
        if d < 0.0 {
            m[0] = m[0].map(|v| -v);
        }
        let s = d.abs().powf(-0.25);
        let m = m.map(|r| r.map(|v| v * s));
        let a: Vec<Vec<f64>> = m.iter().map(|r| r.to_vec()).collect();
        let mut t = [[0.0; 4]; 4];
        for k in 0..4 {
            let col = solve_dense(a.clone(), (0..4).map(|i| (i == k) as u8 as f64).collect())?;
            t[k] = std::array::from_fn(|i| col[i]);
        }
        Some((m, t))
    })
}

fn apply(m: &[[f64; 4]; 4], v: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| (0..4).map(|k| m[i][k] * v[k]).sum())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn det_matches_permutation_oracle(d in 1usize..=6, seed in any::<u64>()) {
        let rows: Vec<Vec<f64>> = {
            use rand::{Rng, SeedableRng};
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..d).map(|_| (0..d).map(|_| r.random_range(-2.0..2.0)).collect()).collect()
        };
        let want = permutation_det(&rows);
        let got = det_dyn(&rows).unwrap();
        let scale: f64 = rows.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).product();
        prop_assert!((got - want).abs() <= 1e-12 * scale.max(want.abs()), "{got} vs {want}");
    }

    #[test]
    fn fixed_size_det_matches_oracle(m in matrix(4)) {
        let rows: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| m[i][j]));
        let want = permutation_det(&m);
        prop_assert!((det(&rows).unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn cross_is_alternating_exactly(a in small_int4(), b in small_int4(), c in small_int4()) {
        let (a, b, c) = (rational(a), rational(b), rational(c));
        let x = cross(&[a.clone(), b.clone(), c.clone()]).unwrap().map(|v| -v);
        prop_assert_eq!(&x, &cross(&[b.clone(), a.clone(), c.clone()]).unwrap());
        prop_assert_eq!(&x, &cross(&[a, c, b]).unwrap());
    }

    #[test]
    fn cross_is_alternating_in_floats(a in vec4(), b in vec4(), c in vec4()) {
        let x = cross(&[a, b, c]).unwrap();
        let bound = [a, b, c].iter().map(plm_core::multilinear::norm).product::<f64>();
        for y in [cross(&[b, a, c]).unwrap(), cross(&[a, c, b]).unwrap()] {
            prop_assert!(x.iter().zip(&y).all(|(p, q)| (p + q).abs() <= 1e-15 * bound));
        }
    }

    #[test]
    fn pairing_identity_float(b in vec4(), a1 in vec4(), a2 in vec4(), a3 in vec4()) {
        let lhs = pair(&b, &cross(&[a1, a2, a3]).unwrap());
        let rhs = det(&[b, a1, a2, a3]).unwrap();
        let bound = [b, a1, a2, a3].iter().map(plm_core::multilinear::norm).product::<f64>();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * bound.max(rhs.abs()));
    }

    #[test]
    fn pairing_identity_exact(b in small_int4(), a1 in small_int4(), a2 in small_int4(), a3 in small_int4()) {
        let (b, a1, a2, a3) = (rational(b), rational(a1), rational(a2), rational(a3));
        let lhs = pair(&b, &cross(&[a1.clone(), a2.clone(), a3.clone()]).unwrap());
        prop_assert_eq!(lhs, det(&[b, a1, a2, a3]).unwrap());
    }

    #[test]
    fn hodge_is_an_involution_exactly(a in small_int4(), b in small_int4()) {
        let w = wedge2(&rational(a), &rational(b));
        prop_assert_eq!(hodge_star(&hodge_star(&w)), w);
    }

    #[test]
    fn hodge_is_an_involution_in_floats(a in vec4(), b in vec4()) {
        let w: Bivector<f64, 4> = wedge2(&a, &b);
        prop_assert!(hodge_star(&hodge_star(&w)).sub(&w).norm() <= 1e-15 * w.norm().max(1.0));
    }

    #[test]
    fn wedge_is_antisymmetric(a in vec4(), b in vec4()) {
        let w = wedge2(&a, &b);
        for i in 0..4 {
            prop_assert_eq!(*w.get(i, i), 0.0);
            for j in 0..4 {
                prop_assert_eq!(*w.get(i, j), -*w.get(j, i));
            }
        }
        prop_assert_eq!(wedge2(&b, &a), w.neg());
    }

    #[test]
    fn reconstruction_is_projectively_equivariant((g, gt) in unimodular(), site in (3usize..28, 3usize..28)) {
        let s = smooth("quartic-graph");
        let jet = s.nu.jet(site.0, site.1).unwrap();
        let moved = jet.map(|v| apply(&g, v));
        let p = reconstruct_point(&moved, ChartKind::Asymptotic).unwrap();
        let q = apply(&gt, &reconstruct_point(&jet, ChartKind::Asymptotic).unwrap());
        prop_assert!(projective_distance(&p, &q) <= 1e-10);
    }

    #[test]
    fn hyper_homogeneity(lambda in prop::sample::select(vec![0.5, 2.0, -3.0]), n in 2usize..=4, k in 0usize..9) {
        let sc = scenario("ell-paraboloid", &ScenarioParams { n, ..Default::default() }).unwrap();
        let Fixture::Hyper(h) = sc.fixture else { unreachable!() };
        // Odd n flips the sign of the determinant under negative scaling.
        prop_assume!(n % 2 == 0 || lambda > 0.0);
        let d = match h {
            HyperFixture::N2(p) => homogeneity(&p.nu, &p.a, lambda, k),
            HyperFixture::N3(p) => homogeneity(&p.nu, &p.a, lambda, k),
            HyperFixture::N4(p) => homogeneity(&p.nu, &p.a, lambda, k),
        };
        prop_assert!(d <= 1e-12, "{d}");
    }

    #[test]
    fn moutard_closure_is_exact(seed in any::<u64>(), size in 3usize..20, lo in 0.5..1.0f64, width in 0.0..0.5f64) {
        let (pair, _) = moutard_random_pair(seed, size, lo, lo + width).unwrap();
        let worst = closure_defect(&pair.nu).into_iter().map(|(_, r)| r).fold(0.0, f64::max);
        prop_assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn moutard_lattices_keep_volume(seed in any::<u64>(), size in 3usize..16) {
        let (pair, _) = moutard_random_pair(seed, size, 0.9, 1.1).unwrap();
        let lift = lift_to_projective(&pair).unwrap();
        let rep = discrete_det_invariance(&lift, 1e-9);
        prop_assert!(rep.get("det.volume").unwrap().pass, "{:?}", rep.get("det.volume"));
        prop_assert!(affine_det_invariance(&pair, 1e-10).all_pass());
    }

    #[test]
    fn lattice_shift_is_equivariant(seed in 0u64..1000, dx in -50i64..50, dy in -50i64..50) {
        let (pair, _) = moutard_random_pair(seed, 8, 0.9, 1.1).unwrap();
        let moved = AffinePair { nu: pair.nu.translated([dx, dy]), f: pair.f.translated([dx, dy]) };
        let (f, _) = discrete_affine_integrate(&pair.nu, [0.1, 0.2, 0.3], 1e-9).unwrap();
        let (g, _) = discrete_affine_integrate(&moved.nu, [0.1, 0.2, 0.3], 1e-9).unwrap();
        prop_assert_eq!(g.origin(), [dx, dy]);
        prop_assert_eq!(f.values(), g.values());
        let (a, b) = (discrete_forms(&pair, 1e-9).unwrap(), discrete_forms(&moved, 1e-9).unwrap());
        prop_assert_eq!(&a.omega2.values, &b.omega2.values);
        prop_assert_eq!(&a.f2d.values, &b.f2d.values);
        let shifted: Vec<[i64; 2]> = a.omega2.sites.iter().map(|s| [s[0] + dx, s[1] + dy]).collect();
        prop_assert_eq!(shifted, b.omega2.sites.clone());
    }

    #[test]
    fn stencils_are_exact_on_cubics(c in prop::array::uniform10(-2.0..2.0f64)) {
        let p = |x: f64, y: f64| {
            c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
                + c[6] * x * x * x + c[7] * x * x * y + c[8] * x * y * y + c[9] * y * y * y
        };
        let grid = FieldGrid::from_fn(GridSpec::square(-1.0, 1.0, 0.25).unwrap(), |x, y| [p(x, y)]).unwrap();
        let fd = FdJets::new(&grid, Stencil::Fourth, 3).unwrap();
        for (i, j) in fd.interior() {
            let [x, y] = grid.spec().coord(i, j);
            let jet = fd.jet(i, j).unwrap();
            let dxy = c[4] + 2.0 * c[7] * x + 2.0 * c[8] * y;
            let dxxx = 6.0 * c[6];
            prop_assert!((jet.dxy[0] - dxy).abs() <= 1e-12 * (1.0 + dxy.abs()) * 20.0);
            prop_assert!((jet.dxxx.unwrap()[0] - dxxx).abs() <= 1e-10 * (1.0 + dxxx.abs()));
        }
    }

    #[test]
    fn grid_io_is_lossless(vals in prop::collection::vec(prop::array::uniform3(-1e6..1e6f64), 12)) {
        let grid = FieldGrid::new(GridSpec::new([-0.3, 1.7], [0.1, 0.2], [4, 3]).unwrap(), vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        fields::write_grid(&grid, &path).unwrap();
        let back: FieldGrid<3> = fields::read_grid(&path).unwrap();
        prop_assert_eq!(back.values(), grid.values());
        let lat = LatticeField::new([-2, 5], [4, 3], grid.values().to_vec()).unwrap();
        fields::write_lattice(&lat, &path).unwrap();
        prop_assert_eq!(fields::read_lattice::<3>(&path).unwrap(), lat);
    }
}

fn homogeneity<const D: usize>(nu: &plm_core::poly::PolyHyperField<D>, a: &AMatrix, lambda: f64, k: usize) -> f64 {
    let sites = nu.hyper_interior();
    let idx = &sites[k * sites.len() / 9];
    let jet = nu.hyper_jet(idx).unwrap();
    let p = hyper_reconstruct(&jet, a, (0, 0)).unwrap();
    let q = hyper_reconstruct(&jet.map(|v| v.map(|x| x * lambda)), a, (0, 0)).unwrap();
    projective_distance(&p, &q)
}

#[test]
fn fd_convergence_matches_design_order() {
    let f = |x: f64, y: f64| [x.sin() * (2.0 * y).exp()];
    let exact_dxy = |x: f64, y: f64| 2.0 * x.cos() * (2.0 * y).exp();
    for (stencil, design) in [(Stencil::Second, 2.0), (Stencil::Fourth, 4.0)] {
        let mut errs = Vec::new();
        for h in [0.1, 0.05, 0.025, 0.0125] {
            let grid = FieldGrid::from_fn(GridSpec::square(-1.0, 1.0, h).unwrap(), f).unwrap();
            let fd = FdJets::new(&grid, stencil, 2).unwrap();
            // Probe at (0.5, 0.5), which lies on every grid.
            let k = (1.5 / h).round() as usize;
            errs.push((fd.jet(k, k).unwrap().dxy[0] - exact_dxy(0.5, 0.5)).abs());
        }
        for w in errs.windows(2) {
            let p = (w[0] / w[1]).log2();
            assert!((p - design).abs() <= 0.2, "{stencil:?}: order {p} from {errs:?}");
        }
    }
}

#[test]
fn duality_round_trip_on_quartic_graph() {
    let s = smooth("quartic-graph");
    for (i, j) in s.nu.interior() {
        let f = reconstruct_point(&s.nu.jet(i, j).unwrap(), ChartKind::Asymptotic).unwrap();
        assert!(projective_distance(&f, &s.f.jet(i, j).unwrap().value) <= 1e-12);
        let nu = inverse_reconstruct_point(&s.f.jet(i, j).unwrap(), ChartKind::Asymptotic).unwrap();
        assert!(projective_distance(&nu, &s.nu.jet(i, j).unwrap().value) <= 1e-12);
    }
}

#[test]
fn reconstruction_formulas_agree() {
    let s = smooth("cubic-graph");
    let mut compared = 0;
    for (i, j) in s.nu.interior() {
        let jet = s.nu.jet(i, j).unwrap();
        let main = reconstruct_point(&jet, ChartKind::Asymptotic).unwrap();
        for axis in [Axis::X, Axis::Y] {
            match reconstruct_point_alt(&jet, axis) {
                Ok(p) => {
                    assert!(projective_distance(&p, &main) <= 1e-8, "{axis:?} at {i},{j}");
                    compared += 1;
                }
                // The cubic form vanishes on one coordinate axis.
                Err(e) => assert!(e.is_degenerate()),
            }
        }
    }
    assert!(compared > 1500);
}

#[test]
fn hyper_reduces_to_conjugate_chart() {
    let s = smooth("sphere-family");
    let planar = PlanarAsHyper::new(&s.nu);
    let a = AMatrix::new(vec![vec![-2.0, 0.0], vec![0.0, -2.0]]).unwrap();
    for idx in planar.hyper_interior() {
        let jet = planar.hyper_jet(&idx).unwrap();
        let p = hyper_reconstruct(&jet, &a, (0, 0)).unwrap();
        let q = reconstruct_point(&s.nu.jet(idx[0], idx[1]).unwrap(), ChartKind::Conjugate).unwrap();
        assert!(projective_distance(&p, &q) <= 1e-10);
        assert!(pivot_spread(&jet, &a).unwrap() <= 1e-10);
    }
}

#[test]
fn affine_gauge_matches_projective_determinant() {
    let s = smooth("quartic-graph");
    let (_, nu3) = s.affine.as_ref().unwrap();
    for (i, j) in s.nu.interior() {
        let (l, a) = (s.nu.jet(i, j).unwrap(), nu3.jet(i, j).unwrap());
        let big = det(&[l.value, l.dx, l.dy, l.dxy]).unwrap();
        let small = det(&[a.value, a.dx, a.dy]).unwrap();
        assert!((big - small * small).abs() <= 1e-10 * big.abs().max(1.0));
        assert!(mixed_parallel_residual(&a) <= 1e-10);
    }
}

#[test]
fn lelieuvre_paths_agree() {
    let s = smooth("cubic-graph");
    let (f3, nu3) = s.affine.as_ref().unwrap();
    let grid = nu3.sample().unwrap();
    let fd = FdJets::new(&grid, Stencil::Fourth, 2).unwrap();
    let m = fd.margin();
    let f0 = f3.jet(m, m).unwrap().value;
    let (a, _) = classical_lelieuvre_integrate(&fd, f0, PathOrder::RowFirst, 1e-9).unwrap();
    let (b, _) = classical_lelieuvre_integrate(&fd, f0, PathOrder::ColumnFirst, 1e-9).unwrap();
    let h = grid.spec().spacing[0];
    let gap = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(p, q)| plm_core::multilinear::norm(&plm_core::multilinear::sub(p, q)))
        .fold(0.0, f64::max);
    let err = (0..a.spec().dims[1])
        .flat_map(|j| (0..a.spec().dims[0]).map(move |i| (i, j)))
        .map(|(i, j)| plm_core::multilinear::norm(&plm_core::multilinear::sub(a.get(i, j), &f3.jet(i + m, j + m).unwrap().value)))
        .fold(0.0, f64::max);
    assert!(err <= 10.0 * h * h, "trapezoid error {err}");
    assert!(gap <= 10.0 * h * h, "path gap {gap}");
}

#[test]
fn moutard_evolution_is_deterministic_and_exact_to_rational_check() {
    let row: Vec<[f64; 3]> = (0..5).map(|k| [0.0, -0.1 * k as f64, 1.0]).collect();
    let col: Vec<[f64; 3]> = (0..5).map(|k| [-0.1 * k as f64, 0.0, 1.0]).collect();
    let h = MoutardCoeff::from_fn([4, 4], |a, b| 1.0 + 0.01 * (a + 2 * b) as f64).unwrap();
    let nu = moutard_evolve(&row, &col, &h).unwrap();
    let q = |x: f64| BigRational::from_float(x).unwrap();
    for [a, b] in nu.sites_with_window([0, 0], [1, 1]) {
        let g = |da, db| nu.get(a + da, b + db).unwrap().map(q);
        let hh = q(h.at(a, b).unwrap());
        let r: Vec<f64> = (0..3)
            .map(|k| {
                (g(1, 1)[k].clone() + g(0, 0)[k].clone() - hh.clone() * (g(1, 0)[k].clone() + g(0, 1)[k].clone()))
                    .to_f64()
                    .unwrap()
            })
            .collect();
        assert!(r.iter().all(|x| x.abs() <= 1e-15), "{r:?}");
    }
}
