//! Turning command-line flags into jet sources.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use plm_core::affine_gauge::{LiftSide, LiftedJets};
use plm_core::fields::{self, FdJets, FieldGrid, GridSpec, JetField, JetRecord, LatticeField, Stencil};
use plm_core::plm_discrete::MoutardCoeff;
use plm_core::plm_smooth::ChartKind;
use plm_core::poly::PolyField;
use plm_core::report::ReportMetadata;
use plm_core::scenarios::{self, Fixture, HyperFixture, ScenarioParams};
use plm_core::{Result, Vec3};

use crate::CliError;

#[derive(Args, Clone, Debug)]
pub struct SourceArgs {
    /// Built-in scenario; an unknown name lists the available ones.
    #[arg(long, conflicts_with_all = ["nu", "f", "lattice"])]
    pub scenario: Option<String>,

    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Lattice extent per axis.
    #[arg(long, default_value_t = 32)]
    pub size: usize,

    /// Lattice spacing, or grid spacing of hypersurface scenarios.
    #[arg(long)]
    pub h: Option<f64>,

    /// Parameter count of hypersurface scenarios.
    #[arg(long, default_value_t = 2)]
    pub n: usize,

    /// Parameter box `x0:x1:h[,y0:y1:h]` for smooth scenarios.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<GridSpec>,

    /// Conormal grid CSV (`x,y,v1..v4`, or `v1..v3` for the affine gauge).
    #[arg(long)]
    pub nu: Option<PathBuf>,

    /// Surface grid CSV matching `--nu`.
    #[arg(long)]
    pub f: Option<PathBuf>,

    /// Affine conormal lattice CSV (`n1,n2,v1..v3`).
    #[arg(long, conflicts_with = "nu")]
    pub lattice: Option<PathBuf>,

    /// Surface lattice CSV matching `--lattice`; integrated from `--f0` when absent.
    #[arg(long, requires = "lattice")]
    pub f_lattice: Option<PathBuf>,

    /// Finite-difference stencil order. Scenarios use exact jets unless this is given.
    #[arg(long, value_enum)]
    pub stencil: Option<StencilArg>,

    /// Parametrization of the input; scenarios carry their own default.
    #[arg(long, value_enum)]
    pub chart: Option<ChartArg>,

    /// Starting point of lattice or classical integration.
    #[arg(long, value_parser = parse_vec3)]
    pub f0: Option<Vec3>,

    /// Residual tolerance (default 1e-9 with exact jets or lattices, 1e-5 with finite differences).
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilArg {
    #[value(name = "2")]
    Two,
    #[value(name = "4")]
    Four,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartArg {
    Asymptotic,
    Conjugate,
}

impl From<ChartArg> for ChartKind {
    fn from(c: ChartArg) -> Self {
        match c {
            ChartArg::Asymptotic => ChartKind::Asymptotic,
            ChartArg::Conjugate => ChartKind::Conjugate,
        }
    }
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, h] = parts[..] else {
        return Err(format!("expected x0:x1:h, got '{s}'"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number"));
    Ok((num(a)?, num(b)?, num(h)?))
}

pub fn parse_grid(s: &str) -> std::result::Result<GridSpec, String> {
    let (x, y) = match s.split_once(',') {
        Some((x, y)) => (parse_range(x)?, parse_range(y)?),
        None => {
            let r = parse_range(s)?;
            (r, r)
        }
    };
    GridSpec::from_ranges(x, y).map_err(|e| e.to_string())
}

pub fn parse_vec3(s: &str) -> std::result::Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|_| format!("expected three comma-separated numbers, got '{s}'"))
}

pub fn format_grid(spec: &GridSpec) -> String {
    let axis = |k: usize| {
        let hi = spec.origin[k] + spec.spacing[k] * (spec.dims[k] - 1) as f64;
        format!("{}:{}:{}", spec.origin[k], hi, spec.spacing[k])
    };
    format!("{},{}", axis(0), axis(1))
}

impl SourceArgs {
    pub fn scenario_params(&self) -> ScenarioParams {
        ScenarioParams { seed: self.seed, size: self.size, h: self.h, n: self.n, grid: self.grid.clone(), ..Default::default() }
    }

    fn stencil(&self) -> Stencil {
        match self.stencil {
            Some(StencilArg::Two) => Stencil::Second,
            _ => Stencil::Fourth,
        }
    }
}

/// Exact polynomial jets or a sampled grid.
pub enum Field<const D: usize> {
    Poly(PolyField<D>),
    Grid(FieldGrid<D>),
}

pub enum Jets<'a, const D: usize> {
    Poly(&'a PolyField<D>),
    Fd(FdJets<'a, D>),
}

impl<const D: usize> JetField<D> for Jets<'_, D> {
    fn spec(&self) -> &GridSpec {
        match self {
            Jets::Poly(p) => p.spec(),
            Jets::Fd(g) => g.spec(),
        }
    }

    fn margin(&self) -> usize {
        match self {
            Jets::Poly(p) => p.margin(),
            Jets::Fd(g) => g.margin(),
        }
    }

    fn jet(&self, i: usize, j: usize) -> Result<JetRecord<D>> {
        match self {
            Jets::Poly(p) => p.jet(i, j),
            Jets::Fd(g) => g.jet(i, j),
        }
    }
}

impl<const D: usize> Field<D> {
    /// Jets up to derivative order `order` (2 or 3; exact fields always carry 3).
    pub fn jets(&self, stencil: Stencil, order: u8) -> Result<Jets<'_, D>> {
        Ok(match self {
            Field::Poly(p) => Jets::Poly(p),
            Field::Grid(g) => Jets::Fd(FdJets::new(g, stencil, order)?),
        })
    }

    fn sampled(self) -> Result<Self> {
        Ok(match self {
            Field::Poly(p) => Field::Grid(p.sample()?),
            g => g,
        })
    }
}

pub struct SmoothSource {
    pub chart: ChartKind,
    pub stencil: Stencil,
    pub f: Option<Field<4>>,
    pub nu: Option<Field<4>>,
    pub f3: Option<Field<3>>,
    pub nu3: Option<Field<3>>,
}

impl SmoothSource {
    /// Hands the projective pair to `k`, lifting affine-gauge data when that is what was given.
    pub fn with_pair4<T>(
        &self,
        order: u8,
        k: impl FnOnce(Option<&dyn JetField<4>>, &dyn JetField<4>) -> std::result::Result<T, CliError>,
    ) -> std::result::Result<T, CliError> {
        if let Some(nu) = &self.nu {
            let nuj = nu.jets(self.stencil, order)?;
            let fj = self.f.as_ref().map(|f| f.jets(self.stencil, order)).transpose()?;
            return k(fj.as_ref().map(|j| j as &dyn JetField<4>), &nuj);
        }
        let (Some(f3), Some(nu3)) = (&self.f3, &self.nu3) else {
            return Err(CliError::Usage("affine-gauge conormal data needs a matching --f for this command".into()));
        };
        let (fj, nuj) = (f3.jets(self.stencil, order)?, nu3.jets(self.stencil, order)?);
        let fl = LiftedJets::new(&fj, &nuj, LiftSide::Surface)?;
        let nl = LiftedJets::new(&fj, &nuj, LiftSide::Conormal)?;
        k(Some(&fl), &nl)
    }
}

pub struct LatticeSource {
    pub nu: LatticeField<3>,
    pub f: Option<LatticeField<3>>,
    pub moutard: Option<MoutardCoeff>,
    pub f0: Vec3,
}

pub enum Source {
    Smooth(SmoothSource),
    Lattice(LatticeSource),
    Hyper(HyperFixture),
}

pub struct Loaded {
    pub source: Source,
    pub tol: f64,
    pub meta: ReportMetadata,
}

fn read_smooth<const D: usize>(path: &Path) -> Result<Field<D>> {
    Ok(Field::Grid(fields::read_grid::<D>(path)?))
}

/// Loads whatever the flags describe.
pub fn load(args: &SourceArgs) -> std::result::Result<Loaded, CliError> {
    let stencil = args.stencil();
    let mut meta = ReportMetadata::default();
    let source = if let Some(name) = &args.scenario {
        let sc = scenarios::scenario(name, &args.scenario_params())?;
        meta.inputs = Some(format!("scenario:{name}"));
        meta.seed = Some(args.seed);
        match sc.fixture {
            Fixture::Smooth(s) => {
                meta.grid = Some(format_grid(s.spec()));
                let chart = args.chart.map(ChartKind::from).unwrap_or(s.chart);
                let (f3, nu3) = match s.affine {
                    Some((f, n)) => (Some(Field::Poly(f)), Some(Field::Poly(n))),
                    None => (None, None),
                };
                let mut src = SmoothSource { chart, stencil, f: Some(Field::Poly(s.f)), nu: Some(Field::Poly(s.nu)), f3, nu3 };
                if args.stencil.is_some() {
                    meta.stencil = Some(stencil.order());
                    src.f = src.f.map(Field::sampled).transpose()?;
                    src.nu = src.nu.map(Field::sampled).transpose()?;
                    src.f3 = src.f3.map(Field::sampled).transpose()?;
                    src.nu3 = src.nu3.map(Field::sampled).transpose()?;
                }
                Source::Smooth(src)
            }
            Fixture::Lattice(l) => {
                meta.grid = Some(format!("lattice {}x{}", l.pair.nu.extent()[0], l.pair.nu.extent()[1]));
                let o = l.pair.f.origin();
                let f0 = args.f0.unwrap_or(*l.pair.f.at(o[0], o[1])?);
                Source::Lattice(LatticeSource { nu: l.pair.nu, f: Some(l.pair.f), moutard: l.moutard, f0 })
            }
            Fixture::Hyper(h) => Source::Hyper(h),
        }
    } else if let Some(nu_path) = &args.nu {
        let mut inputs = format!("nu:{}", nu_path.display());
        let nu_cols = fields::value_columns(nu_path)?;
        let f_cols = match &args.f {
            Some(p) => {
                inputs.push_str(&format!(",f:{}", p.display()));
                Some(fields::value_columns(p)?)
            }
            None => None,
        };
        if f_cols.is_some_and(|c| c != nu_cols) {
            return Err(CliError::Usage(format!("--f has {} value columns but --nu has {nu_cols}", f_cols.unwrap())));
        }
        meta.inputs = Some(inputs);
        meta.stencil = Some(stencil.order());
        let chart = args.chart.map(ChartKind::from).unwrap_or(ChartKind::Asymptotic);
        let mut src = SmoothSource { chart, stencil, f: None, nu: None, f3: None, nu3: None };
        match nu_cols {
            4 => {
                src.nu = Some(read_smooth(nu_path)?);
                src.f = args.f.as_deref().map(read_smooth).transpose()?;
            }
            3 => {
                src.nu3 = Some(read_smooth(nu_path)?);
                src.f3 = args.f.as_deref().map(read_smooth).transpose()?;
            }
            c => return Err(CliError::Usage(format!("{}: expected 3 or 4 value columns, found {c}", nu_path.display()))),
        }
        let spec = match (&src.nu, &src.nu3) {
            (Some(Field::Grid(g)), _) => g.spec().clone(),
            (_, Some(Field::Grid(g))) => g.spec().clone(),
            _ => unreachable!("file input is always sampled"),
        };
        meta.grid = Some(format_grid(&spec));
        Source::Smooth(src)
    } else if let Some(lat_path) = &args.lattice {
        let mut inputs = format!("lattice:{}", lat_path.display());
        let cols = fields::value_columns(lat_path)?;
        if cols != 3 {
            return Err(CliError::Usage(format!("{}: lattice conormals need 3 value columns, found {cols}", lat_path.display())));
        }
        let nu = fields::read_lattice::<3>(lat_path)?;
        let f = match &args.f_lattice {
            Some(p) => {
                inputs.push_str(&format!(",f:{}", p.display()));
                Some(fields::read_lattice::<3>(p)?)
            }
            None => None,
        };
        meta.inputs = Some(inputs);
        meta.grid = Some(format!("lattice {}x{}", nu.extent()[0], nu.extent()[1]));
        Source::Lattice(LatticeSource { nu, f, moutard: None, f0: args.f0.unwrap_or([0.0; 3]) })
    } else {
        return Err(CliError::Usage("give one of --scenario, --nu or --lattice".into()));
    };
    let fd = meta.stencil.is_some();
    let tol = args.tol.unwrap_or(if fd { 1e-5 } else { 1e-9 });
    if !(tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
    }
    Ok(Loaded { source, tol, meta })
}

/// Fails with a usage error naming what the command expected.
pub fn wrong_source(command: &str, source: &Source) -> CliError {
    let kind = match source {
        Source::Smooth(_) => "smooth grid",
        Source::Lattice(_) => "lattice",
        Source::Hyper(_) => "hypersurface",
    };
    CliError::Usage(format!("{command} does not apply to {kind} input"))
}
