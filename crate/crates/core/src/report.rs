//! Residual statistics for verified identities.

use serde::{Deserialize, Serialize};

use crate::error::Site;

pub const SCHEMA_VERSION: u32 = 1;

/// How a record contributes to the overall verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    /// Must stay below tolerance.
    Check,
    /// Reported for comparison only (e.g. a formula as printed vs. as derived).
    Diagnostic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub name: String,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub argmax_site: Option<Site>,
    pub samples: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub kind: RecordKind,
}

impl IdentityRecord {
    /// Summarizes per-site residuals. NaN counts as an infinite residual.
    pub fn from_samples<'a>(
        name: impl Into<String>,
        samples: impl IntoIterator<Item = (&'a [i64], f64)>,
        tolerance: f64,
    ) -> Self {
        let mut max = 0.0_f64;
        let mut sum = 0.0;
        let mut count = 0usize;
        let mut argmax = None;
        for (site, r) in samples {
            let r = if r.is_nan() { f64::INFINITY } else { r.abs() };
            if argmax.is_none() || r > max {
                max = r;
                argmax = Some(site.to_vec());
            }
            sum += r;
            count += 1;
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        Self {
            name: name.into(),
            max_residual: max,
            mean_residual: mean.min(max),
            argmax_site: argmax,
            samples: count,
            tolerance,
            pass: max <= tolerance,
            kind: RecordKind::Check,
        }
    }

    pub fn diagnostic(mut self) -> Self {
        self.kind = RecordKind::Diagnostic;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub inputs: Option<String>,
    pub grid: Option<String>,
    pub stencil: Option<u8>,
    pub seed: Option<u64>,
    pub tool_version: Option<String>,
    pub timestamp: Option<String>,
}

/// Sign and branch conventions every report is computed under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub levi_civita: String,
    pub cross_sign_anchor: String,
    pub hodge_star: String,
    pub sqrt_branch: String,
    pub hyper_a_sign: String,
    pub forms_sign: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            levi_civita: "eps(1,2,...,d) = +1".into(),
            cross_sign_anchor: "[e1,e2,e3] = -e4 in dimension 4".into(),
            hodge_star: "(*B)_kl = 1/2 eps_ijkl B_ij".into(),
            sqrt_branch: "positive square root; reconstructed points are projective classes".into(),
            hyper_a_sign: "A fixed by round trip: recover_A then hyper_reconstruct reproduces f".into(),
            forms_sign:
                "cubic forms carry the sign of the pairing they square to; discrete forms report sqrt|det| with sign separate"
                    .into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub schema_version: u32,
    pub identities: Vec<IdentityRecord>,
    pub conventions: Conventions,
    pub metadata: ReportMetadata,
}

impl Default for InvariantReport {
    fn default() -> Self {
        Self::new()
    }
}

impl InvariantReport {
    pub fn new() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            identities: Vec::new(),
            conventions: Conventions::default(),
            metadata: ReportMetadata::default(),
        }
    }

    pub fn push(&mut self, record: IdentityRecord) {
        self.identities.push(record);
    }

    pub fn extend(&mut self, other: InvariantReport) {
        self.identities.extend(other.identities);
    }

    pub fn get(&self, name: &str) -> Option<&IdentityRecord> {
        self.identities.iter().find(|r| r.name == name)
    }

    /// True when every [`RecordKind::Check`] record passes.
    pub fn all_pass(&self) -> bool {
        self.identities.iter().filter(|r| r.kind == RecordKind::Check).all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityRecord> {
        self.identities.iter().filter(|r| r.kind == RecordKind::Check && !r.pass)
    }
}

/// Per-site residual columns collected during a sweep, keyed by identity name.
#[derive(Debug, Default)]
pub(crate) struct ResidualTable {
    names: Vec<String>,
    sites: Vec<Site>,
    columns: Vec<Vec<f64>>,
}

impl ResidualTable {
    pub(crate) fn new(names: &[&str]) -> Self {
        Self { names: names.iter().map(|s| s.to_string()).collect(), sites: Vec::new(), columns: vec![Vec::new(); names.len()] }
    }

    pub(crate) fn push(&mut self, site: Site, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.sites.push(site);
        for (c, &v) in self.columns.iter_mut().zip(row) {
            c.push(v);
        }
    }

    pub(crate) fn into_report(self, tolerance: f64) -> InvariantReport {
        let mut report = InvariantReport::new();
        for (name, col) in self.names.iter().zip(&self.columns) {
            let samples = self.sites.iter().map(|s| s.as_slice()).zip(col.iter().copied());
            report.push(IdentityRecord::from_samples(name.clone(), samples, tolerance));
        }
        report
    }
}

/// `|value| / scale`, or `|value|` when the scale vanishes.
pub fn relative(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value.abs() / scale
    } else {
        value.abs()
    }
}

/// `|a - b| / max(|a|, |b|, floor)`; zero when both vanish.
pub fn relative_difference(a: f64, b: f64, floor: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        return 0.0;
    }
    d / a.abs().max(b.abs()).max(floor)
}
