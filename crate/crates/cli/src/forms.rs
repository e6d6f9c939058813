use std::collections::HashMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use plm_core::affine_gauge::affine_forms;
use plm_core::fields::{write_rows, write_rows_to};
use plm_core::plm_discrete::{discrete_affine_integrate, discrete_forms, AffinePair, SiteValues};
use plm_core::plm_smooth::fubini_forms;
use plm_core::report::Conventions;
use plm_core::InvariantReport;

use crate::source::{self, Source, SourceArgs};
use crate::CliError;

#[derive(Args, Debug)]
pub struct FormsArgs {
    #[command(flatten)]
    pub source: SourceArgs,

    /// Which family of forms to tabulate.
    #[arg(long, value_enum)]
    pub which: Which,

    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    /// F2, F3 and F3tilde of an asymptotic-chart pair.
    Projective,
    /// Blaschke coefficient F and cubic coefficients A, B in the gauge f4 = -1.
    Affine,
    /// Lattice forms Omega2, Omega3, Omega3_tilde and F2d, F3d, F3d_tilde.
    Discrete,
}

type Rows = Vec<(Vec<f64>, Vec<f64>)>;

fn header_comments(which: &str, report: &InvariantReport) -> Vec<String> {
    let c = Conventions::default();
    let mut lines = vec![
        format!("forms: {which}"),
        format!("levi_civita: {}", c.levi_civita),
        format!("cross_sign_anchor: {}", c.cross_sign_anchor),
        format!("hodge_star: {}", c.hodge_star),
        format!("sqrt_branch: {}", c.sqrt_branch),
        format!("forms_sign: {}", c.forms_sign),
    ];
    for r in report.failures() {
        lines.push(format!("check failed: {} max residual {:e} > {:e}", r.name, r.max_residual, r.tolerance));
    }
    lines
}

fn discrete_rows(pair: &AffinePair, tol: f64) -> Result<(Vec<String>, Rows, InvariantReport), CliError> {
    let forms = discrete_forms(pair, tol)?;
    let columns: [(&str, &SiteValues); 9] = [
        ("Omega2", &forms.omega2),
        ("Omega3", &forms.omega3),
        ("Omega3_tilde", &forms.omega3_tilde),
        ("F2d", &forms.f2d),
        ("F3d", &forms.f3d),
        ("F3d_tilde", &forms.f3d_tilde),
        ("F2d_sign", &forms.f2d_sign),
        ("F3d_sign", &forms.f3d_sign),
        ("F3d_tilde_sign", &forms.f3d_tilde_sign),
    ];
    let maps: Vec<HashMap<[i64; 2], f64>> =
        columns.iter().map(|(_, sv)| sv.sites.iter().copied().zip(sv.values.iter().copied()).collect()).collect();
    // only sites where every form is defined
    let rows = pair
        .f
        .sites()
        .into_iter()
        .filter_map(|s| {
            let vals: Option<Vec<f64>> = maps.iter().map(|m| m.get(&s).copied()).collect();
            vals.map(|v| (vec![s[0] as f64, s[1] as f64], v))
        })
        .collect();
    let mut header = vec!["n1".to_string(), "n2".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    Ok((header, rows, forms.report))
}

pub fn run(args: &FormsArgs) -> Result<bool, CliError> {
    let loaded = source::load(&args.source)?;
    let tol = loaded.tol;
    let (name, header, rows, report) = match (args.which, &loaded.source) {
        (Which::Projective, Source::Smooth(s)) => {
            let forms = s.with_pair4(3, |f, nu| {
                let f = f.ok_or_else(|| CliError::Usage("projective forms need the surface as well (--f)".into()))?;
                Ok(fubini_forms(f, nu, tol)?)
            })?;
            let rows = forms
                .coords
                .iter()
                .enumerate()
                .map(|(k, c)| (c.to_vec(), vec![forms.f2[k], forms.f3[k], forms.f3tilde[k]]))
                .collect();
            ("projective", ["x", "y", "F2", "F3", "F3tilde"].map(String::from).to_vec(), rows, forms.report)
        }
        (Which::Affine, Source::Smooth(s)) => {
            let (Some(f), Some(nu)) = (&s.f3, &s.nu3) else {
                return Err(CliError::Usage("affine forms need 3-column --nu and --f grids".into()));
            };
            let forms = affine_forms(&f.jets(s.stencil, 3)?, &nu.jets(s.stencil, 3)?, tol)?;
            let rows = forms
                .coords
                .iter()
                .enumerate()
                .map(|(k, c)| (c.to_vec(), vec![forms.blaschke[k], forms.a_cubic[k], forms.b_cubic[k]]))
                .collect();
            ("affine", ["x", "y", "F", "A", "B"].map(String::from).to_vec(), rows, forms.report)
        }
        (Which::Discrete, Source::Lattice(l)) => {
            let f = match &l.f {
                Some(f) => f.clone(),
                None => discrete_affine_integrate(&l.nu, l.f0, tol)?.0,
            };
            let (header, rows, report) = discrete_rows(&AffinePair { nu: l.nu.clone(), f }, tol)?;
            ("discrete", header, rows, report)
        }
        (which, src) => {
            let name = which.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            return Err(source::wrong_source(&format!("--which {name}"), src));
        }
    };
    let comments = header_comments(name, &report);
    match &args.out {
        Some(p) => write_rows(p, &comments, &header, rows)?,
        None => {
            let mut buf = Vec::new();
            write_rows_to(&mut buf, &comments, &header, rows)?;
            crate::print_stdout(&buf)?
        }
    }
    Ok(true)
}
