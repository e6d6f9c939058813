//! Sampled vector fields on uniform grids and integer lattices.
//!
//! Grids are stored row-major with `y` outer and `x` inner, so the sample at
//! column `i`, row `j` lives at `j * nx + i`. Derivatives come from central
//! stencils only; sites closer to the edge than the stencil margin have no jet.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{PlmError, Result, Site};

/// Accuracy order of the central stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stencil {
    Second,
    Fourth,
}

impl Stencil {
    pub fn from_order(order: u8) -> Result<Self> {
        match order {
            2 => Ok(Stencil::Second),
            4 => Ok(Stencil::Fourth),
            o => Err(PlmError::Domain(format!("stencil order must be 2 or 4, got {o}"))),
        }
    }

    pub fn order(self) -> u8 {
        match self {
            Stencil::Second => 2,
            Stencil::Fourth => 4,
        }
    }

    fn half_width(self) -> usize {
        match self {
            Stencil::Second => 1,
            Stencil::Fourth => 2,
        }
    }

    /// Points needed on each side for derivatives up to `order` (2 or 3).
    pub fn margin(self, order: u8) -> usize {
        self.half_width() + usize::from(order.saturating_sub(2))
    }
}

// (offset, weight) pairs; divide by h^k.
const D1_2: &[(i64, f64)] = &[(-1, -0.5), (1, 0.5)];
const D2_2: &[(i64, f64)] = &[(-1, 1.0), (0, -2.0), (1, 1.0)];
const D3_2: &[(i64, f64)] = &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)];
const D1_4: &[(i64, f64)] = &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)];
const D2_4: &[(i64, f64)] = &[(-2, -1.0 / 12.0), (-1, 16.0 / 12.0), (0, -30.0 / 12.0), (1, 16.0 / 12.0), (2, -1.0 / 12.0)];
const D3_4: &[(i64, f64)] = &[(-3, 1.0 / 8.0), (-2, -1.0), (-1, 13.0 / 8.0), (1, -13.0 / 8.0), (2, 1.0), (3, -1.0 / 8.0)];

fn weights(stencil: Stencil, k: u8) -> &'static [(i64, f64)] {
    match (stencil, k) {
        (Stencil::Second, 1) => D1_2,
        (Stencil::Second, 2) => D2_2,
        (Stencil::Second, _) => D3_2,
        (Stencil::Fourth, 1) => D1_4,
        (Stencil::Fourth, 2) => D2_4,
        (Stencil::Fourth, _) => D3_4,
    }
}

/// Uniform rectangular parameter box.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub spacing: [f64; 2],
    pub dims: [usize; 2],
}

impl GridSpec {
    pub fn new(origin: [f64; 2], spacing: [f64; 2], dims: [usize; 2]) -> Result<Self> {
        if !spacing.iter().all(|h| h.is_finite() && *h > 0.0) {
            return Err(PlmError::Domain(format!("grid spacing must be positive, got {spacing:?}")));
        }
        if !origin.iter().all(|o| o.is_finite()) {
            return Err(PlmError::Domain("grid origin must be finite".into()));
        }
        if dims.contains(&0) {
            return Err(PlmError::Domain("grid must have at least one point per axis".into()));
        }
        Ok(Self { origin, spacing, dims })
    }

    /// Square box `[lo, hi]²` with spacing `h`; `hi` is included when it lies on the lattice.
    pub fn square(lo: f64, hi: f64, h: f64) -> Result<Self> {
        let n = axis_count(lo, hi, h)?;
        Self::new([lo, lo], [h, h], [n, n])
    }

    pub fn from_ranges(x: (f64, f64, f64), y: (f64, f64, f64)) -> Result<Self> {
        let nx = axis_count(x.0, x.1, x.2)?;
        let ny = axis_count(y.0, y.1, y.2)?;
        Self::new([x.0, y.0], [x.2, y.2], [nx, ny])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.dims[0] + i
    }

    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.spacing[0], self.origin[1] + j as f64 * self.spacing[1]]
    }

    /// Sites at least `margin` points away from every edge, row-major.
    pub fn interior(&self, margin: usize) -> Vec<(usize, usize)> {
        let [nx, ny] = self.dims;
        if nx <= 2 * margin || ny <= 2 * margin {
            return Vec::new();
        }
        (margin..ny - margin).flat_map(|j| (margin..nx - margin).map(move |i| (i, j))).collect()
    }
}

fn axis_count(lo: f64, hi: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(hi >= lo) {
        return Err(PlmError::Domain(format!("bad range {lo}:{hi}:{h}")));
    }
    Ok(((hi - lo) / h + 1e-9).floor() as usize + 1)
}

/// Samples of a `D`-vector field on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGrid<const D: usize> {
    spec: GridSpec,
    values: Vec<[f64; D]>,
}

impl<const D: usize> FieldGrid<D> {
    pub fn new(spec: GridSpec, values: Vec<[f64; D]>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(PlmError::Domain(format!(
                "grid of dims {:?} needs {} samples, got {}",
                spec.dims,
                spec.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            let (i, j) = (k % spec.dims[0], k / spec.dims[0]);
            return Err(PlmError::Overflow { site: vec![i as i64, j as i64] });
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> [f64; D]) -> Result<Self> {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.dims[1] {
            for i in 0..spec.dims[0] {
                let [x, y] = spec.coord(i, j);
                values.push(f(x, y));
            }
        }
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[[f64; D]] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64; D] {
        &self.values[self.spec.index(i, j)]
    }

    fn sample(&self, i: i64, j: i64) -> &[f64; D] {
        &self.values[self.spec.index(i as usize, j as usize)]
    }

    pub fn map<const E: usize>(&self, f: impl FnMut(&[f64; D]) -> [f64; E]) -> Result<FieldGrid<E>> {
        FieldGrid::new(self.spec.clone(), self.values.iter().map(f).collect())
    }
}

/// A vector and its partial derivatives at one parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct JetRecord<const D: usize> {
    pub value: [f64; D],
    pub dx: [f64; D],
    pub dy: [f64; D],
    pub dxx: [f64; D],
    pub dxy: [f64; D],
    pub dyy: [f64; D],
    pub dxxx: Option<[f64; D]>,
    pub dyyy: Option<[f64; D]>,
}

impl<const D: usize> JetRecord<D> {
    /// Applies a linear map to every entry of the jet.
    pub fn map<const E: usize>(&self, f: impl Fn(&[f64; D]) -> [f64; E]) -> JetRecord<E> {
        JetRecord {
            value: f(&self.value),
            dx: f(&self.dx),
            dy: f(&self.dy),
            dxx: f(&self.dxx),
            dxy: f(&self.dxy),
            dyy: f(&self.dyy),
            dxxx: self.dxxx.as_ref().map(&f),
            dyyy: self.dyyy.as_ref().map(&f),
        }
    }

    /// Exchanges the roles of `x` and `y`.
    pub fn swap_axes(&self) -> Self {
        Self {
            value: self.value,
            dx: self.dy,
            dy: self.dx,
            dxx: self.dyy,
            dxy: self.dxy,
            dyy: self.dxx,
            dxxx: self.dyyy,
            dyyy: self.dxxx,
        }
    }

    pub fn third_x(&self) -> Result<&[f64; D]> {
        self.dxxx.as_ref().ok_or_else(|| PlmError::Domain("jet lacks third derivatives".into()))
    }

    pub fn third_y(&self) -> Result<&[f64; D]> {
        self.dyyy.as_ref().ok_or_else(|| PlmError::Domain("jet lacks third derivatives".into()))
    }
}

/// Anything that can hand out jets at the interior sites of a grid.
pub trait JetField<const D: usize>: Sync {
    fn spec(&self) -> &GridSpec;

    /// Sites closer than this to an edge have no jet.
    fn margin(&self) -> usize;

    fn jet(&self, i: usize, j: usize) -> Result<JetRecord<D>>;

    fn interior(&self) -> Vec<(usize, usize)> {
        self.spec().interior(self.margin())
    }

    fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        self.spec().coord(i, j)
    }
}

/// Central-difference jets of order 2 or 3 on a sampled grid.
#[derive(Clone, Copy, Debug)]
pub struct FdJets<'a, const D: usize> {
    pub grid: &'a FieldGrid<D>,
    pub stencil: Stencil,
    pub order: u8,
}

impl<'a, const D: usize> FdJets<'a, D> {
    pub fn new(grid: &'a FieldGrid<D>, stencil: Stencil, order: u8) -> Result<Self> {
        if !(2..=3).contains(&order) {
            return Err(PlmError::Domain(format!("jet order must be 2 or 3, got {order}")));
        }
        Ok(Self { grid, stencil, order })
    }
}

impl<const D: usize> JetField<D> for FdJets<'_, D> {
    fn spec(&self) -> &GridSpec {
        self.grid.spec()
    }

    fn margin(&self) -> usize {
        self.stencil.margin(self.order)
    }

    fn jet(&self, i: usize, j: usize) -> Result<JetRecord<D>> {
        jet_at(self.grid, i, j, self.order, self.stencil)
    }
}

/// Finite-difference jet at grid site `(i, j)`.
pub fn jet_at<const D: usize>(grid: &FieldGrid<D>, i: usize, j: usize, order: u8, stencil: Stencil) -> Result<JetRecord<D>> {
    if !(2..=3).contains(&order) {
        return Err(PlmError::Domain(format!("jet order must be 2 or 3, got {order}")));
    }
    let margin = stencil.margin(order);
    let [nx, ny] = grid.spec.dims;
    if i < margin || j < margin || i + margin >= nx || j + margin >= ny {
        return Err(PlmError::Boundary { site: vec![i as i64, j as i64], margin });
    }
    let [hx, hy] = grid.spec.spacing;
    let (i, j) = (i as i64, j as i64);
    let along = |w: &[(i64, f64)], axis: usize, scale: f64| -> [f64; D] {
        let mut acc = [0.0; D];
        for &(o, c) in w {
            let v = if axis == 0 { grid.sample(i + o, j) } else { grid.sample(i, j + o) };
            for (a, x) in acc.iter_mut().zip(v) {
                *a += c * x;
            }
        }
        acc.map(|a| a / scale)
    };
    let d1 = weights(stencil, 1);
    let mut dxy = [0.0; D];
    for &(a, ca) in d1 {
        for &(b, cb) in d1 {
            let v = grid.sample(i + a, j + b);
            for (acc, x) in dxy.iter_mut().zip(v) {
                *acc += ca * cb * x;
            }
        }
    }
    let third = order == 3;
    Ok(JetRecord {
        value: *grid.sample(i, j),
        dx: along(d1, 0, hx),
        dy: along(d1, 1, hy),
        dxx: along(weights(stencil, 2), 0, hx * hx),
        dxy: dxy.map(|v| v / (hx * hy)),
        dyy: along(weights(stencil, 2), 1, hy * hy),
        dxxx: third.then(|| along(weights(stencil, 3), 0, hx * hx * hx)),
        dyyy: third.then(|| along(weights(stencil, 3), 1, hy * hy * hy)),
    })
}

/// Uniform box in `n` parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NdGridSpec {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub dims: Vec<usize>,
}

impl NdGridSpec {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, dims: Vec<usize>) -> Result<Self> {
        let n = origin.len();
        if spacing.len() != n || dims.len() != n || n == 0 {
            return Err(PlmError::Domain("origin, spacing and dims must have equal nonzero length".into()));
        }
        if !spacing.iter().all(|h| h.is_finite() && *h > 0.0) || dims.contains(&0) {
            return Err(PlmError::Domain(format!("bad grid spacing {spacing:?} or dims {dims:?}")));
        }
        Ok(Self { origin, spacing, dims })
    }

    /// Cube `[lo, hi]^n` with spacing `h`.
    pub fn cube(n: usize, lo: f64, hi: f64, h: f64) -> Result<Self> {
        let k = axis_count(lo, hi, h)?;
        Self::new(vec![lo; n], vec![h; n], vec![k; n])
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First axis varies fastest.
    pub fn index(&self, idx: &[usize]) -> usize {
        let mut k = 0;
        let mut stride = 1;
        for (a, &i) in idx.iter().enumerate() {
            k += i * stride;
            stride *= self.dims[a];
        }
        k
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        self.dims
            .iter()
            .map(|&d| {
                let i = k % d;
                k /= d;
                i
            })
            .collect()
    }

    pub fn coord(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().enumerate().map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a]).collect()
    }

    pub fn interior(&self, margin: usize) -> Vec<Vec<usize>> {
        if self.dims.iter().any(|&d| d <= 2 * margin) {
            return Vec::new();
        }
        (0..self.len())
            .map(|k| self.multi_index(k))
            .filter(|idx| idx.iter().zip(&self.dims).all(|(&i, &d)| i >= margin && i + margin < d))
            .collect()
    }
}

/// Samples of a field over an [`NdGridSpec`]; `T` is a vector or a flattened matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct NdField<T> {
    spec: NdGridSpec,
    values: Vec<T>,
}

impl<T> NdField<T> {
    pub fn new(spec: NdGridSpec, values: Vec<T>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(PlmError::Domain(format!("grid needs {} samples, got {}", spec.len(), values.len())));
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: NdGridSpec, mut f: impl FnMut(&[f64]) -> T) -> Result<Self> {
        let values = (0..spec.len()).map(|k| f(&spec.coord(&spec.multi_index(k)))).collect();
        Self::new(spec, values)
    }

    pub fn spec(&self) -> &NdGridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.values[self.spec.index(idx)]
    }
}

pub type HyperGrid<const D: usize> = NdField<[f64; D]>;

/// A point of a hypersurface jet in `n = D - 2` parameters: value, gradient, Hessian.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperJet<const D: usize> {
    pub value: [f64; D],
    pub first: Vec<[f64; D]>,
    pub second: Vec<Vec<[f64; D]>>,
}

impl<const D: usize> HyperJet<D> {
    pub fn new(value: [f64; D], first: Vec<[f64; D]>, second: Vec<Vec<[f64; D]>>) -> Result<Self> {
        let n = D.checked_sub(2).ok_or_else(|| PlmError::Domain("dimension below 2".into()))?;
        if first.len() != n || second.len() != n || second.iter().any(|r| r.len() != n) {
            return Err(PlmError::Domain(format!("hypersurface jet in dimension {D} needs {n} parameters")));
        }
        Ok(Self { value, first, second })
    }

    pub fn n(&self) -> usize {
        self.first.len()
    }

    pub fn map<const E: usize>(&self, f: impl Fn(&[f64; D]) -> [f64; E]) -> HyperJet<E> {
        HyperJet {
            value: f(&self.value),
            first: self.first.iter().map(&f).collect(),
            second: self.second.iter().map(|r| r.iter().map(&f).collect()).collect(),
        }
    }
}

impl<const D: usize> From<&JetRecord<D>> for HyperJet<D> {
    fn from(j: &JetRecord<D>) -> Self {
        Self { value: j.value, first: vec![j.dx, j.dy], second: vec![vec![j.dxx, j.dxy], vec![j.dxy, j.dyy]] }
    }
}

/// Source of hypersurface jets over an nD grid.
pub trait HyperJetField<const D: usize>: Sync {
    fn nd_spec(&self) -> &NdGridSpec;
    fn hyper_margin(&self) -> usize;
    fn hyper_jet(&self, idx: &[usize]) -> Result<HyperJet<D>>;

    fn hyper_interior(&self) -> Vec<Vec<usize>> {
        self.nd_spec().interior(self.hyper_margin())
    }
}

/// Central-difference hypersurface jets.
#[derive(Clone, Copy, Debug)]
pub struct FdHyperJets<'a, const D: usize> {
    pub grid: &'a HyperGrid<D>,
    pub stencil: Stencil,
}

impl<const D: usize> HyperJetField<D> for FdHyperJets<'_, D> {
    fn nd_spec(&self) -> &NdGridSpec {
        self.grid.spec()
    }

    fn hyper_margin(&self) -> usize {
        self.stencil.margin(2)
    }

    fn hyper_jet(&self, idx: &[usize]) -> Result<HyperJet<D>> {
        let spec = self.grid.spec();
        let n = spec.ndim();
        if n + 2 != D || idx.len() != n {
            return Err(PlmError::Domain(format!("grid has {n} parameters, jet dimension {D}")));
        }
        let m = self.hyper_margin();
        if idx.iter().zip(&spec.dims).any(|(&i, &d)| i < m || i + m >= d) {
            return Err(PlmError::Boundary { site: idx.iter().map(|&i| i as i64).collect(), margin: m });
        }
        let at = |shift: &[(usize, i64)]| -> &[f64; D] {
            let mut k = idx.to_vec();
            for &(a, o) in shift {
                k[a] = (k[a] as i64 + o) as usize;
            }
            self.grid.get(&k)
        };
        let d1 = weights(self.stencil, 1);
        let d2 = weights(self.stencil, 2);
        let mut first = vec![[0.0; D]; n];
        let mut second = vec![vec![[0.0; D]; n]; n];
        for a in 0..n {
            let h = spec.spacing[a];
            for &(o, c) in d1 {
                let v = at(&[(a, o)]);
                for (acc, x) in first[a].iter_mut().zip(v) {
                    *acc += c * x / h;
                }
            }
            for &(o, c) in d2 {
                let v = at(&[(a, o)]);
                for (acc, x) in second[a][a].iter_mut().zip(v) {
                    *acc += c * x / (h * h);
                }
            }
            for b in a + 1..n {
                let hb = spec.spacing[b];
                let mut acc = [0.0; D];
                for &(oa, ca) in d1 {
                    for &(ob, cb) in d1 {
                        let v = at(&[(a, oa), (b, ob)]);
                        for (s, x) in acc.iter_mut().zip(v) {
                            *s += ca * cb * x / (h * hb);
                        }
                    }
                }
                second[a][b] = acc;
                second[b][a] = acc;
            }
        }
        HyperJet::new(*self.grid.get(idx), first, second)
    }
}

/// Values on the integer rectangle `origin + [0, M₁) × [0, M₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField<const D: usize> {
    origin: [i64; 2],
    extent: [usize; 2],
    values: Vec<[f64; D]>,
}

impl<const D: usize> LatticeField<D> {
    pub fn new(origin: [i64; 2], extent: [usize; 2], values: Vec<[f64; D]>) -> Result<Self> {
        if values.len() != extent[0] * extent[1] {
            return Err(PlmError::Domain(format!(
                "lattice of extent {extent:?} needs {} values, got {}",
                extent[0] * extent[1],
                values.len()
            )));
        }
        let field = Self { origin, extent, values };
        if let Some(k) = field.values.iter().position(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(PlmError::Overflow { site: field.site_of(k).to_vec() });
        }
        Ok(field)
    }

    pub fn from_fn(extent: [usize; 2], mut f: impl FnMut(i64, i64) -> [f64; D]) -> Result<Self> {
        let mut values = Vec::with_capacity(extent[0] * extent[1]);
        for n2 in 0..extent[1] as i64 {
            for n1 in 0..extent[0] as i64 {
                values.push(f(n1, n2));
            }
        }
        Self::new([0, 0], extent, values)
    }

    pub fn origin(&self) -> [i64; 2] {
        self.origin
    }

    pub fn extent(&self) -> [usize; 2] {
        self.extent
    }

    pub fn values(&self) -> &[[f64; D]] {
        &self.values
    }

    fn site_of(&self, k: usize) -> [i64; 2] {
        [self.origin[0] + (k % self.extent[0]) as i64, self.origin[1] + (k / self.extent[0]) as i64]
    }

    pub fn contains(&self, n1: i64, n2: i64) -> bool {
        let (a, b) = (n1 - self.origin[0], n2 - self.origin[1]);
        a >= 0 && b >= 0 && (a as usize) < self.extent[0] && (b as usize) < self.extent[1]
    }

    pub fn get(&self, n1: i64, n2: i64) -> Option<&[f64; D]> {
        if !self.contains(n1, n2) {
            return None;
        }
        let (a, b) = ((n1 - self.origin[0]) as usize, (n2 - self.origin[1]) as usize);
        Some(&self.values[b * self.extent[0] + a])
    }

    /// Value at a site, or a boundary error naming it.
    pub fn at(&self, n1: i64, n2: i64) -> Result<&[f64; D]> {
        self.get(n1, n2).ok_or(PlmError::Boundary { site: vec![n1, n2], margin: 0 })
    }

    /// All sites in row-major order (`n₂` outer).
    pub fn sites(&self) -> Vec<[i64; 2]> {
        (0..self.values.len()).map(|k| self.site_of(k)).collect()
    }

    /// Sites whose neighbours at every offset in `lo..=hi` (per axis) exist.
    pub fn sites_with_window(&self, lo: [i64; 2], hi: [i64; 2]) -> Vec<[i64; 2]> {
        self.sites()
            .into_iter()
            .filter(|s| self.contains(s[0] + lo[0], s[1] + lo[1]) && self.contains(s[0] + hi[0], s[1] + hi[1]))
            .collect()
    }

    pub fn map<const E: usize>(&self, f: impl FnMut(&[f64; D]) -> [f64; E]) -> Result<LatticeField<E>> {
        LatticeField::new(self.origin, self.extent, self.values.iter().map(f).collect())
    }

    /// Moves the lattice so that the same values sit at `site + offset`.
    pub fn translated(&self, offset: [i64; 2]) -> Self {
        Self { origin: [self.origin[0] + offset[0], self.origin[1] + offset[1]], ..self.clone() }
    }

    pub fn view(&self) -> LatticeView<'_, D> {
        LatticeView { field: self, offset: [0, 0] }
    }

    /// `T_dir^steps`: the view whose value at `n` is the original value at `n + steps·e_dir`.
    pub fn shift(&self, dir: u8, steps: i64) -> Result<LatticeView<'_, D>> {
        self.view().shift(dir, steps)
    }
}

/// A shifted window onto a [`LatticeField`].
#[derive(Clone, Copy, Debug)]
pub struct LatticeView<'a, const D: usize> {
    field: &'a LatticeField<D>,
    offset: [i64; 2],
}

impl<'a, const D: usize> LatticeView<'a, D> {
    pub fn shift(&self, dir: u8, steps: i64) -> Result<Self> {
        let mut offset = self.offset;
        match dir {
            1 => offset[0] += steps,
            2 => offset[1] += steps,
            d => return Err(PlmError::Domain(format!("shift direction must be 1 or 2, got {d}"))),
        }
        if offset.iter().zip(self.field.extent).any(|(o, m)| o.unsigned_abs() as usize >= m) {
            return Err(PlmError::Boundary { site: offset.to_vec(), margin: 0 });
        }
        Ok(Self { field: self.field, offset })
    }

    pub fn offset(&self) -> [i64; 2] {
        self.offset
    }

    pub fn get(&self, n1: i64, n2: i64) -> Option<&'a [f64; D]> {
        self.field.get(n1 + self.offset[0], n2 + self.offset[1])
    }

    pub fn at(&self, n1: i64, n2: i64) -> Result<&'a [f64; D]> {
        self.get(n1, n2).ok_or(PlmError::Boundary { site: vec![n1, n2], margin: 0 })
    }

    /// Sites of the original domain where the shifted value exists.
    pub fn domain(&self) -> Vec<[i64; 2]> {
        self.field.sites().into_iter().filter(|s| self.get(s[0], s[1]).is_some()).collect()
    }

    /// Copies the view over its domain into a standalone field.
    pub fn to_field(&self) -> Result<LatticeField<D>> {
        let o = self.field.origin;
        let m = self.field.extent;
        let lo = [o[0] + (-self.offset[0]).max(0), o[1] + (-self.offset[1]).max(0)];
        let ext = [m[0] - self.offset[0].unsigned_abs() as usize, m[1] - self.offset[1].unsigned_abs() as usize];
        let mut values = Vec::with_capacity(ext[0] * ext[1]);
        for b in 0..ext[1] as i64 {
            for a in 0..ext[0] as i64 {
                values.push(*self.at(lo[0] + a, lo[1] + b)?);
            }
        }
        LatticeField::new(lo, ext, values)
    }
}

// ---- CSV ----

fn parse_err(line: u64, message: impl Into<String>) -> PlmError {
    PlmError::Parse { line: line as usize, message: message.into() }
}

fn csv_err(e: csv::Error) -> PlmError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::Io(io) => PlmError::Io(io.to_string()),
        _ => parse_err(line, e.to_string()),
    }
}

struct Table {
    coords: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    lines: Vec<u64>,
}

/// Reads rows whose header starts with `coord_names` followed by `v1..v{value_count}`.
/// With `value_count == None` the number of value columns is taken from the header.
fn read_table(path: &Path, coord_names: &[String], value_names: Option<&[String]>) -> Result<Table> {
    let file = File::open(path).map_err(|e| PlmError::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let value_names: Vec<String> = match value_names {
        Some(v) => v.to_vec(),
        None => header.iter().skip(coord_names.len()).cloned().collect(),
    };
    let mut columns = Vec::new();
    for name in coord_names.iter().chain(&value_names) {
        match header.iter().position(|h| h == name) {
            Some(k) => columns.push(k),
            None => return Err(parse_err(1, format!("missing column '{name}'"))),
        }
    }
    let nc = coord_names.len();
    let mut table = Table { coords: Vec::new(), values: Vec::new(), lines: Vec::new() };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let mut parsed = Vec::with_capacity(columns.len());
        for (&k, name) in columns.iter().zip(coord_names.iter().chain(&value_names)) {
            let raw = rec.get(k).ok_or_else(|| parse_err(line, format!("missing value for column '{name}'")))?;
            let v: f64 = raw.parse().map_err(|_| parse_err(line, format!("column '{name}': cannot parse '{raw}'")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column '{name}': non-finite value")));
            }
            parsed.push(v);
        }
        table.values.push(parsed.split_off(nc));
        table.coords.push(parsed);
        table.lines.push(line);
    }
    if table.coords.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Ok(table)
}

fn numbered(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|k| format!("{prefix}{k}")).collect()
}

/// Recovers a uniform grid spec from coordinate rows in first-axis-fastest order.
fn infer_nd_spec(table: &Table) -> Result<NdGridSpec> {
    let n = table.coords[0].len();
    let rows = table.coords.len();
    let mut dims = Vec::with_capacity(n);
    let mut stride = 1usize;
    for a in 0..n {
        // the axis advances every `stride` rows and wraps once its count is reached
        let first = table.coords[0][a];
        let mut count = 1;
        while count * stride < rows && table.coords[count * stride][a] != first {
            if (0..a).any(|b| table.coords[count * stride][b] != table.coords[0][b]) {
                break;
            }
            count += 1;
        }
        dims.push(count);
        stride *= count;
    }
    if stride != rows {
        let line = table.lines.get(stride.min(rows - 1)).copied().unwrap_or(0);
        return Err(parse_err(line, format!("row count {rows} does not match inferred dims {dims:?}")));
    }
    let mut origin = Vec::with_capacity(n);
    let mut spacing = Vec::with_capacity(n);
    let mut stride = 1usize;
    for a in 0..n {
        let x0 = table.coords[0][a];
        let h = if dims[a] > 1 { (table.coords[(dims[a] - 1) * stride][a] - x0) / (dims[a] - 1) as f64 } else { 1.0 };
        if !(h > 0.0) {
            return Err(parse_err(table.lines[stride.min(rows - 1)], format!("axis {} is not increasing", a + 1)));
        }
        origin.push(x0);
        spacing.push(h);
        stride *= dims[a];
    }
    let spec = NdGridSpec::new(origin, spacing, dims)?;
    for (k, row) in table.coords.iter().enumerate() {
        let expect = spec.coord(&spec.multi_index(k));
        for a in 0..n {
            let span = spec.spacing[a] * spec.dims[a] as f64;
            let scale = span.max(expect[a].abs()).max(spec.origin[a].abs());
            if (row[a] - expect[a]).abs() > 1e-12 * scale {
                return Err(parse_err(
                    table.lines[k],
                    format!(
                        "non-uniform spacing or out-of-order row on axis {}: expected {}, found {}",
                        a + 1,
                        expect[a],
                        row[a]
                    ),
                ));
            }
        }
    }
    Ok(spec)
}

fn to_array<const D: usize>(v: &[f64]) -> [f64; D] {
    std::array::from_fn(|i| v[i])
}

/// Reads a grid CSV with header `x,y,v1..vD`.
pub fn read_grid<const D: usize>(path: impl AsRef<Path>) -> Result<FieldGrid<D>> {
    let table = read_table(path.as_ref(), &["x".into(), "y".into()], Some(&numbered("v", D)))?;
    let nd = infer_nd_spec(&table)?;
    let spec = GridSpec::new([nd.origin[0], nd.origin[1]], [nd.spacing[0], nd.spacing[1]], [nd.dims[0], nd.dims[1]])?;
    FieldGrid::new(spec, table.values.iter().map(|v| to_array(v)).collect())
}

pub fn write_grid<const D: usize>(grid: &FieldGrid<D>, path: impl AsRef<Path>) -> Result<()> {
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend(numbered("v", D));
    let spec = grid.spec();
    let rows = (0..spec.len()).map(|k| {
        let c = spec.coord(k % spec.dims[0], k / spec.dims[0]);
        (c.to_vec(), grid.values[k].to_vec())
    });
    write_rows(path.as_ref(), &[], &header, rows)
}

/// Number of `v*` columns in a CSV header, for callers that pick `D` at runtime.
pub fn value_columns(path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| PlmError::Io(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers().map_err(csv_err)?;
    Ok(header.iter().filter(|h| h.starts_with('v') && h[1..].parse::<usize>().is_ok()).count())
}

/// Reads a lattice CSV with header `n1,n2,v1..vD`.
pub fn read_lattice<const D: usize>(path: impl AsRef<Path>) -> Result<LatticeField<D>> {
    let table = read_table(path.as_ref(), &["n1".into(), "n2".into()], Some(&numbered("v", D)))?;
    for (c, &line) in table.coords.iter().zip(&table.lines) {
        if c.iter().any(|v| v.fract() != 0.0) {
            return Err(parse_err(line, "lattice sites must be integers"));
        }
    }
    let nd = infer_nd_spec(&table)?;
    if nd.spacing.iter().any(|&h| h != 1.0) && nd.dims.iter().zip(&nd.spacing).any(|(&d, &h)| d > 1 && h != 1.0) {
        return Err(parse_err(table.lines[0], "lattice sites must be consecutive integers"));
    }
    let origin = [nd.origin[0] as i64, nd.origin[1] as i64];
    LatticeField::new(origin, [nd.dims[0], nd.dims[1]], table.values.iter().map(|v| to_array(v)).collect())
}

pub fn write_lattice<const D: usize>(lat: &LatticeField<D>, path: impl AsRef<Path>) -> Result<()> {
    let mut header = vec!["n1".to_string(), "n2".to_string()];
    header.extend(numbered("v", D));
    let rows = lat.sites().into_iter().zip(&lat.values).map(|(s, v)| (vec![s[0] as f64, s[1] as f64], v.to_vec()));
    write_rows(path.as_ref(), &[], &header, rows)
}

/// Reads an nD grid CSV with header `x1..xn,v1..v(n+2)`, `n = D - 2`.
pub fn read_hyper_grid<const D: usize>(path: impl AsRef<Path>) -> Result<HyperGrid<D>> {
    let n = D - 2;
    let table = read_table(path.as_ref(), &numbered("x", n), Some(&numbered("v", D)))?;
    let spec = infer_nd_spec(&table)?;
    NdField::new(spec, table.values.iter().map(|v| to_array(v)).collect())
}

pub fn write_hyper_grid<const D: usize>(grid: &HyperGrid<D>, path: impl AsRef<Path>) -> Result<()> {
    let n = D - 2;
    let mut header = numbered("x", n);
    header.extend(numbered("v", D));
    let spec = grid.spec();
    let rows = (0..spec.len()).map(|k| (spec.coord(&spec.multi_index(k)), grid.values[k].to_vec()));
    write_rows(path.as_ref(), &[], &header, rows)
}

/// Reads an `n×n` matrix field with header `x1..xn,a11..ann` (row-major entries).
pub fn read_matrix_field(path: impl AsRef<Path>, n: usize) -> Result<NdField<Vec<f64>>> {
    let names: Vec<String> = (1..=n).flat_map(|i| (1..=n).map(move |j| format!("a{i}{j}"))).collect();
    let table = read_table(path.as_ref(), &numbered("x", n), Some(&names))?;
    let spec = infer_nd_spec(&table)?;
    NdField::new(spec, table.values)
}

pub fn write_matrix_field(field: &NdField<Vec<f64>>, path: impl AsRef<Path>) -> Result<()> {
    let n = field.spec().ndim();
    let mut header = numbered("x", n);
    header.extend((1..=n).flat_map(|i| (1..=n).map(move |j| format!("a{i}{j}"))));
    let spec = field.spec();
    let rows = (0..spec.len()).map(|k| (spec.coord(&spec.multi_index(k)), field.values[k].clone()));
    write_rows(path.as_ref(), &[], &header, rows)
}

/// Writes `# comment` lines, a header, then rows of coordinates followed by values.
/// Floats use the shortest representation that parses back to the same bits.
pub fn write_rows(
    path: &Path,
    comments: &[String],
    header: &[String],
    rows: impl IntoIterator<Item = (Vec<f64>, Vec<f64>)>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| PlmError::Io(format!("{}: {e}", path.display())))?;
    write_rows_to(file, comments, header, rows)
}

/// [`write_rows`] into any writer.
pub fn write_rows_to<W: Write>(
    mut out: W,
    comments: &[String],
    header: &[String],
    rows: impl IntoIterator<Item = (Vec<f64>, Vec<f64>)>,
) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(header).map_err(csv_err)?;
    for (coords, values) in rows {
        let rec: Vec<String> = coords.iter().chain(&values).map(|v| format!("{v}")).collect();
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `Site` for a 2D grid index.
pub fn grid_site(i: usize, j: usize) -> Site {
    vec![i as i64, j as i64]
}
