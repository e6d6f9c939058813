use thiserror::Error;

/// Lattice or grid location attached to a failure, as integer indices.
pub type Site = Vec<i64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlmError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("site {site:?} lies within {margin} points of the boundary")]
    Boundary { site: Site, margin: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("non-generic point{}: planar/parabolic locus (discriminant {discriminant:e})", fmt_site(.site))]
    Degenerate { site: Option<Site>, discriminant: f64 },

    #[error("chart mismatch{}: radicand {radicand:e} has the wrong sign for this chart", fmt_site(.site))]
    ChartMismatch { site: Option<Site>, radicand: f64 },

    #[error("pivot mismatch{}: A-entry over determinant is {ratio:e}, not positive", fmt_site(.site))]
    PivotMismatch { site: Option<Site>, ratio: f64 },

    #[error("not a PLM conormal{}: span residual {residual:e}", fmt_site(.site))]
    NotPlmConormal { site: Option<Site>, residual: f64 },

    #[error("not compatible{}: span residual {residual:e}", fmt_site(.site))]
    NotCompatible { site: Option<Site>, residual: f64 },

    #[error("closure condition violated; worst cell {site:?} with residual {residual:e}")]
    Closure { site: Site, residual: f64 },

    #[error("non-finite value produced at site {site:?}")]
    Overflow { site: Site },

    #[error("gauge obstruction at site {site:?}: row and column scale propagation disagree by {mismatch:e}")]
    GaugeObstruction { site: Site, mismatch: f64 },

    #[error("unknown scenario '{name}'; available: {}", .available.join(", "))]
    UnknownScenario { name: String, available: Vec<String> },
}

fn fmt_site(site: &Option<Site>) -> String {
    match site {
        Some(s) => format!(" at {s:?}"),
        None => String::new(),
    }
}

impl PlmError {
    /// Attaches a site to point-local errors that were raised without one.
    pub fn at(self, site: &[i64]) -> Self {
        let s = Some(site.to_vec());
        match self {
            PlmError::Degenerate { site: None, discriminant } => PlmError::Degenerate { site: s, discriminant },
            PlmError::ChartMismatch { site: None, radicand } => PlmError::ChartMismatch { site: s, radicand },
            PlmError::PivotMismatch { site: None, ratio } => PlmError::PivotMismatch { site: s, ratio },
            PlmError::NotPlmConormal { site: None, residual } => PlmError::NotPlmConormal { site: s, residual },
            PlmError::NotCompatible { site: None, residual } => PlmError::NotCompatible { site: s, residual },
            other => other,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, PlmError::Degenerate { .. })
    }
}

impl From<std::io::Error> for PlmError {
    fn from(e: std::io::Error) -> Self {
        PlmError::Io(e.to_string())
    }
}

pub type Result<T, E = PlmError> = std::result::Result<T, E>;
