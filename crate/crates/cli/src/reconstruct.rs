use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use plm_core::affine_gauge::{classical_lelieuvre_integrate, PathOrder};
use plm_core::fields::{self, write_rows, write_rows_to, FieldGrid, HyperJetField, LatticeField};
use plm_core::plm_discrete::discrete_affine_integrate;
use plm_core::plm_hyper::{hyper_reconstruct, AMatrix};
use plm_core::plm_smooth::{reconstruct_field, Role, Thresholds};
use plm_core::scenarios::{HyperFixture, HyperPair};
use plm_core::{InvariantReport, PlmError};

use crate::obj;
use crate::source::{self, LatticeSource, SmoothSource, Source, SourceArgs};
use crate::CliError;

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Surface CSV (stdout when neither this nor --obj is given).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Triangulated mesh of the normalized surface.
    #[arg(long)]
    pub obj: Option<PathBuf>,

    /// Mesh normalization: `affine` (last component -1) or the 1-based component to divide by.
    #[arg(long, default_value = "affine", value_parser = parse_gauge)]
    pub gauge: Gauge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    Affine,
    Component(usize),
}

fn parse_gauge(s: &str) -> Result<Gauge, String> {
    if s == "affine" {
        return Ok(Gauge::Affine);
    }
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(Gauge::Component(k)),
        _ => Err(format!("expected 'affine' or a component number, got '{s}'")),
    }
}

/// Affine chart of a homogeneous point: divide by one component and drop it.
fn normalize(p: &[f64], gauge: Gauge) -> Result<Option<[f64; 3]>, CliError> {
    let (k, sign) = match gauge {
        Gauge::Affine => (p.len() - 1, -1.0),
        Gauge::Component(k) if k <= p.len() => (k - 1, 1.0),
        Gauge::Component(k) => return Err(CliError::Usage(format!("--gauge {k} exceeds the dimension {}", p.len()))),
    };
    if p.len() != 4 {
        return Err(CliError::Usage(format!("OBJ export needs points in dimension 4, not {}", p.len())));
    }
    let w = p[k] * sign;
    if w.abs() < f64::EPSILON * p.iter().fold(0.0_f64, |m, v| m.max(v.abs())) {
        return Ok(None);
    }
    let mut rest = p.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, v)| v / w);
    Ok(Some([rest.next().unwrap(), rest.next().unwrap(), rest.next().unwrap()]))
}

fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|k| format!("{prefix}{k}")).collect()
}

fn emit_rows(out: Option<&Path>, header: &[String], rows: Vec<(Vec<f64>, Vec<f64>)>) -> Result<(), CliError> {
    match out {
        Some(p) => write_rows(p, &[], header, rows)?,
        None => {
            let mut buf = Vec::new();
            write_rows_to(&mut buf, &[], header, rows)?;
            crate::print_stdout(&buf)?
        }
    }
    Ok(())
}

fn wants_csv(args: &ReconstructArgs) -> Option<Option<&Path>> {
    match (&args.out, &args.obj) {
        (Some(p), _) => Some(Some(p)),
        (None, None) => Some(None),
        (None, Some(_)) => None,
    }
}

/// Reports point failures; under `--strict` any failure aborts before output is written.
fn check_failures(failures: &[String], total: usize, strict: bool) -> Result<(), CliError> {
    for f in failures {
        eprintln!("{f}");
    }
    if failures.is_empty() {
        return Ok(());
    }
    eprintln!("{} of {total} points could not be reconstructed", failures.len());
    if strict {
        return Err(CliError::Strict(format!("{} of {total} points failed", failures.len())));
    }
    Ok(())
}

fn smooth(args: &ReconstructArgs, s: &SmoothSource, tol: f64, strict: bool) -> Result<bool, CliError> {
    if s.nu.is_none() && s.f3.is_none() {
        return integrate_affine(args, s, tol);
    }
    let th = Thresholds::default();
    let points = s.with_pair4(2, |_, nu| Ok(reconstruct_field(nu, s.chart, Role::Conormal, &th)))?;
    let failures: Vec<String> = points
        .iter()
        .filter_map(|sp| sp.point.as_ref().err().map(|e| format!("({}, {}): {e}", sp.coord[0], sp.coord[1])))
        .collect();
    check_failures(&failures, points.len(), strict)?;

    if let Some(out) = wants_csv(args) {
        let mut header = vec!["x".to_string(), "y".to_string()];
        header.extend(numbered("v", 4));
        let rows = points.iter().filter_map(|sp| sp.point.as_ref().ok().map(|p| (sp.coord.to_vec(), p.to_vec()))).collect();
        emit_rows(out, &header, rows)?;
    }
    if let Some(path) = &args.obj {
        let mut verts = HashMap::new();
        for sp in &points {
            if let Ok(p) = &sp.point {
                if let Some(v) = normalize(p, args.gauge)? {
                    verts.insert((sp.site[0] as i64, sp.site[1] as i64), v);
                }
            }
        }
        let dims = s.nu.as_ref().map(|f| grid_dims4(f)).unwrap_or_else(|| s.nu3.as_ref().map(grid_dims3).unwrap_or([0, 0]));
        let n = obj::write(path, [0, 0], dims, |a, b| verts.get(&(a, b)).copied())?;
        eprintln!("wrote {n} vertices to {}", path.display());
    }
    Ok(true)
}

fn grid_dims4(f: &source::Field<4>) -> [i64; 2] {
    match f {
        source::Field::Poly(p) => spec_dims(plm_core::fields::JetField::spec(p)),
        source::Field::Grid(g) => spec_dims(g.spec()),
    }
}

fn grid_dims3(f: &source::Field<3>) -> [i64; 2] {
    match f {
        source::Field::Poly(p) => spec_dims(plm_core::fields::JetField::spec(p)),
        source::Field::Grid(g) => spec_dims(g.spec()),
    }
}

fn spec_dims(spec: &fields::GridSpec) -> [i64; 2] {
    [spec.dims[0] as i64, spec.dims[1] as i64]
}

/// Affine-gauge conormal on its own: classical integration from `--f0`.
fn integrate_affine(args: &ReconstructArgs, s: &SmoothSource, tol: f64) -> Result<bool, CliError> {
    let Some(nu) = &s.nu3 else {
        return Err(CliError::Usage("no conormal data to reconstruct from".into()));
    };
    if args.gauge != Gauge::Affine {
        return Err(CliError::Usage("affine-gauge input only supports --gauge affine".into()));
    }
    let nuj = nu.jets(s.stencil, 2)?;
    let f0 = args.source.f0.unwrap_or([0.0; 3]);
    let (f, report) = classical_lelieuvre_integrate(&nuj, f0, PathOrder::RowFirst, tol)?;
    write_grid_outputs(args, &f)?;
    Ok(report_ok(&report))
}

fn write_grid_outputs(args: &ReconstructArgs, f: &FieldGrid<3>) -> Result<(), CliError> {
    match wants_csv(args) {
        Some(Some(p)) => fields::write_grid(f, p)?,
        Some(None) => {
            let spec = f.spec();
            let rows = (0..spec.len())
                .map(|k| {
                    let (i, j) = (k % spec.dims[0], k / spec.dims[0]);
                    (spec.coord(i, j).to_vec(), f.get(i, j).to_vec())
                })
                .collect();
            emit_rows(None, &["x", "y", "v1", "v2", "v3"].map(String::from), rows)?;
        }
        None => {}
    }
    if let Some(path) = &args.obj {
        let n = obj::write(path, [0, 0], spec_dims(f.spec()), |a, b| Some(*f.get(a as usize, b as usize)))?;
        eprintln!("wrote {n} vertices to {}", path.display());
    }
    Ok(())
}

fn report_ok(report: &InvariantReport) -> bool {
    for r in report.failures() {
        eprintln!("FAIL {}: max residual {:e} > tolerance {:e}", r.name, r.max_residual, r.tolerance);
    }
    report.all_pass()
}

fn lattice(args: &ReconstructArgs, l: &LatticeSource, tol: f64) -> Result<bool, CliError> {
    if args.gauge != Gauge::Affine {
        return Err(CliError::Usage("lattice reconstruction only supports --gauge affine".into()));
    }
    let (f, report) = discrete_affine_integrate(&l.nu, l.f0, tol)?;
    write_lattice_outputs(args, &f)?;
    Ok(report_ok(&report))
}

fn write_lattice_outputs(args: &ReconstructArgs, f: &LatticeField<3>) -> Result<(), CliError> {
    match wants_csv(args) {
        Some(Some(p)) => fields::write_lattice(f, p)?,
        Some(None) => {
            let rows = f.sites().into_iter().map(|[a, b]| (vec![a as f64, b as f64], f.at(a, b).unwrap().to_vec())).collect();
            emit_rows(None, &["n1", "n2", "v1", "v2", "v3"].map(String::from), rows)?;
        }
        None => {}
    }
    if let Some(path) = &args.obj {
        let (o, e) = (f.origin(), f.extent());
        let hi = [o[0] + e[0] as i64, o[1] + e[1] as i64];
        let n = obj::write(path, o, hi, |a, b| f.get(a, b).copied())?;
        eprintln!("wrote {n} vertices to {}", path.display());
    }
    Ok(())
}

fn first_pivot(a: &AMatrix) -> Option<(usize, usize)> {
    (0..a.n()).flat_map(|r| (0..a.n()).map(move |c| (r, c))).find(|&(r, c)| a.get(r, c) != 0.0)
}

fn hyper_pair<const D: usize>(args: &ReconstructArgs, p: &HyperPair<D>, strict: bool) -> Result<bool, CliError> {
    let pivot = first_pivot(&p.a).ok_or_else(|| CliError::Plm(PlmError::Domain("A has no nonzero entry".into())))?;
    let spec = p.nu.nd_spec().clone();
    let sites = p.nu.hyper_interior();
    let points: Vec<_> = plm_core::par::map(&sites, |idx| p.nu.hyper_jet(idx).and_then(|j| hyper_reconstruct(&j, &p.a, pivot)));
    let failures: Vec<String> = sites
        .iter()
        .zip(&points)
        .filter_map(|(idx, r)| r.as_ref().err().map(|e| format!("{:?}: {e}", spec.coord(idx))))
        .collect();
    check_failures(&failures, points.len(), strict)?;
    let n = spec.ndim();
    if let Some(out) = wants_csv(args) {
        let mut header = numbered("x", n);
        header.extend(numbered("v", D));
        let rows =
            sites.iter().zip(&points).filter_map(|(idx, r)| r.as_ref().ok().map(|p| (spec.coord(idx), p.to_vec()))).collect();
        emit_rows(out, &header, rows)?;
    }
    if let Some(path) = &args.obj {
        if n != 2 {
            return Err(CliError::Usage(format!("OBJ export needs a 2-parameter surface, this one has {n}")));
        }
        let mut verts = HashMap::new();
        for (idx, r) in sites.iter().zip(&points) {
            if let Ok(p) = r {
                if let Some(v) = normalize(p, args.gauge)? {
                    verts.insert((idx[0] as i64, idx[1] as i64), v);
                }
            }
        }
        let count = obj::write(path, [0, 0], [spec.dims[0] as i64, spec.dims[1] as i64], |a, b| verts.get(&(a, b)).copied())?;
        eprintln!("wrote {count} vertices to {}", path.display());
    }
    Ok(true)
}

pub fn run(args: &ReconstructArgs, strict: bool) -> Result<bool, CliError> {
    let loaded = source::load(&args.source)?;
    match &loaded.source {
        Source::Smooth(s) => smooth(args, s, loaded.tol, strict),
        Source::Lattice(l) => lattice(args, l, loaded.tol),
        Source::Hyper(h) => match h {
            HyperFixture::N2(p) => hyper_pair(args, p, strict),
            HyperFixture::N3(p) => hyper_pair(args, p, strict),
            HyperFixture::N4(p) => hyper_pair(args, p, strict),
        },
    }
}
