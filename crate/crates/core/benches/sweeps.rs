use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use plm_core::fields::{FdJets, JetField, Stencil};
use plm_core::multilinear::det;
use plm_core::par;
use plm_core::plm_smooth::{reconstruct_point, ChartKind};
use plm_core::scenarios::{moutard_random_pair, scenario, Fixture, ScenarioParams};

fn reconstruct_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("reconstruct_fd4");
    for h in [0.05, 0.025, 0.0125] {
        let params =
            ScenarioParams { grid: Some(plm_core::fields::GridSpec::square(-0.8, 0.8, h).unwrap()), ..Default::default() };
        let sc = scenario("cubic-graph", &params).unwrap();
        let Fixture::Smooth(s) = sc.fixture else { unreachable!() };
        let grid = s.nu.sample().unwrap();
        let fd = FdJets::new(&grid, Stencil::Fourth, 2).unwrap();
        let sites = fd.interior();
        let kernel = |&(i, j): &(usize, usize)| fd.jet(i, j).and_then(|jet| reconstruct_point(&jet, ChartKind::Asymptotic)).ok();
        group.bench_with_input(BenchmarkId::new("parallel", sites.len()), &sites, |b, s| {
            b.iter(|| black_box(par::map(s, kernel)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", sites.len()), &sites, |b, s| {
            b.iter(|| black_box(par::map_sequential(s, kernel)))
        });
    }
    group.finish();
}

fn lattice_volume_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("lattice_volume");
    for size in [32, 64, 128] {
        let (pair, _) = moutard_random_pair(42, size, 0.9, 1.1).unwrap();
        let sites: Vec<[i64; 2]> = (0..size as i64 - 1).flat_map(|b| (0..size as i64 - 1).map(move |a| [a, b])).collect();
        let kernel = |&[a, b]: &[i64; 2]| {
            let g = |da, db| *pair.nu.get(a + da, b + db).unwrap();
            det(&[g(0, 0), g(1, 0), g(1, 1)]).unwrap() * det(&[g(0, 0), g(1, 0), g(0, 1)]).unwrap()
        };
        group.bench_with_input(BenchmarkId::new("parallel", sites.len()), &sites, |b, s| {
            b.iter(|| black_box(par::map(s, kernel)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", sites.len()), &sites, |b, s| {
            b.iter(|| black_box(par::map_sequential(s, kernel)))
        });
    }
    group.finish();
}

criterion_group!(benches, reconstruct_sweep, lattice_volume_sweep);
criterion_main!(benches);
