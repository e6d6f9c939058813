use std::path::PathBuf;

use clap::{Args, ValueEnum};
use plm_core::affine_gauge::affine_forms;
use plm_core::fields::JetField;
use plm_core::plm_discrete::{
    affine_det_invariance, closure_defect, discrete_affine_integrate, discrete_det_invariance, discrete_forms, discrete_residual,
    lift_to_projective, moutard_defect, AffinePair,
};
use plm_core::plm_hyper::{hyper_compat_residual, hyper_plm_residual, ConstantA};
use plm_core::plm_smooth::{det_invariance_report, fubini_forms, orthogonality_report, plm_residual, ChartKind};
use plm_core::report::ReportMetadata;
use plm_core::scenarios::{HyperFixture, HyperPair};
use plm_core::{IdentityRecord, InvariantReport};

use crate::source::{self, LatticeSource, Loaded, SmoothSource, Source, SourceArgs};
use crate::CliError;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Identity suite; `auto` picks the one matching the input.
    #[arg(long, value_enum, default_value_t = Suite::Auto)]
    pub suite: Suite,

    /// Report destination (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Leave run metadata out of the report so reruns are byte-identical.
    #[arg(long)]
    pub no_meta: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Auto,
    SmoothAsymptotic,
    SmoothConjugate,
    Fubini,
    Affine,
    Discrete,
    Hyper,
}

fn need_f(f: Option<&dyn JetField<4>>) -> Result<&dyn JetField<4>, CliError> {
    f.ok_or_else(|| CliError::Usage("this suite needs the surface as well (--f)".into()))
}

fn smooth(s: &SmoothSource, chart: ChartKind, tol: f64) -> Result<InvariantReport, CliError> {
    s.with_pair4(2, |f, nu| {
        let f = need_f(f)?;
        let mut rep = plm_residual(f, nu, chart, tol)?;
        rep.extend(orthogonality_report(f, nu, chart, tol)?);
        rep.extend(det_invariance_report(f, nu, chart, tol)?);
        Ok(rep)
    })
}

fn affine(s: &SmoothSource, tol: f64) -> Result<InvariantReport, CliError> {
    let (Some(f), Some(nu)) = (&s.f3, &s.nu3) else {
        return Err(CliError::Usage("the affine suite needs 3-column --nu and --f grids".into()));
    };
    let (fj, nuj) = (f.jets(s.stencil, 3)?, nu.jets(s.stencil, 3)?);
    Ok(affine_forms(&fj, &nuj, tol)?.report)
}

fn discrete(l: &LatticeSource, tol: f64) -> Result<InvariantReport, CliError> {
    let mut rep = InvariantReport::new();
    let defects = closure_defect(&l.nu);
    rep.push(IdentityRecord::from_samples("discrete.closure", defects.iter().map(|(s, r)| (&s[..], *r)), tol));
    let f = match &l.f {
        Some(f) => f.clone(),
        None => {
            let (f, r) = discrete_affine_integrate(&l.nu, l.f0, tol)?;
            rep.extend(r);
            f
        }
    };
    let pair = AffinePair { nu: l.nu.clone(), f };
    let lift = lift_to_projective(&pair)?;
    rep.extend(discrete_residual(&lift, tol));
    rep.extend(discrete_det_invariance(&lift, tol));
    rep.extend(affine_det_invariance(&pair, tol));
    rep.extend(discrete_forms(&pair, tol)?.report);
    if let Some(h) = &l.moutard {
        rep.extend(moutard_defect(&l.nu, h, tol));
    }
    Ok(rep)
}

fn hyper_pair<const D: usize>(p: &HyperPair<D>, tol: f64) -> Result<InvariantReport, CliError> {
    let a = ConstantA(p.a.clone());
    let mut rep = hyper_plm_residual(&p.f, &p.nu, &a, tol)?;
    rep.extend(hyper_compat_residual(&p.nu, &a, tol)?);
    Ok(rep)
}

fn hyper(h: &HyperFixture, tol: f64) -> Result<InvariantReport, CliError> {
    match h {
        HyperFixture::N2(p) => hyper_pair(p, tol),
        HyperFixture::N3(p) => hyper_pair(p, tol),
        HyperFixture::N4(p) => hyper_pair(p, tol),
    }
}

pub fn metadata(loaded: &Loaded, no_meta: bool) -> ReportMetadata {
    if no_meta {
        return ReportMetadata::default();
    }
    let mut meta = loaded.meta.clone();
    meta.tool_version = Some(env!("CARGO_PKG_VERSION").to_string());
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    meta.timestamp = Some(format!("unix:{secs}"));
    meta
}

pub fn run(args: &VerifyArgs) -> Result<bool, CliError> {
    let loaded = source::load(&args.source)?;
    let tol = loaded.tol;
    let mut rep = match (args.suite, &loaded.source) {
        (Suite::Auto, Source::Smooth(s)) => smooth(s, s.chart, tol)?,
        (Suite::SmoothAsymptotic, Source::Smooth(s)) => smooth(s, ChartKind::Asymptotic, tol)?,
        (Suite::SmoothConjugate, Source::Smooth(s)) => smooth(s, ChartKind::Conjugate, tol)?,
        (Suite::Fubini, Source::Smooth(s)) => s.with_pair4(3, |f, nu| Ok(fubini_forms(need_f(f)?, nu, tol)?.report))?,
        (Suite::Affine, Source::Smooth(s)) => affine(s, tol)?,
        (Suite::Auto | Suite::Discrete, Source::Lattice(l)) => discrete(l, tol)?,
        (Suite::Auto | Suite::Hyper, Source::Hyper(h)) => hyper(h, tol)?,
        (suite, src) => {
            let name = suite.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            return Err(source::wrong_source(&format!("suite '{name}'"), src));
        }
    };
    rep.metadata = metadata(&loaded, args.no_meta);

    let json = serde_json::to_string_pretty(&rep).map_err(|e| CliError::Plm(plm_core::PlmError::Io(e.to_string())))? + "\n";
    match &args.report {
        Some(p) => std::fs::write(p, json).map_err(|e| plm_core::PlmError::Io(format!("{}: {e}", p.display())))?,
        None => crate::print_stdout(json.as_bytes())?,
    }

    let failures: Vec<_> = rep.failures().collect();
    for r in &failures {
        eprintln!(
            "FAIL {}: max residual {:e} > tolerance {:e} at {:?}",
            r.name,
            r.max_residual,
            r.tolerance,
            r.argmax_site.as_deref().unwrap_or(&[])
        );
    }
    if failures.is_empty() {
        eprintln!("pass: {} identities", rep.identities.len());
    }
    Ok(failures.is_empty())
}
