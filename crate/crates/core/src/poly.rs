//! Multivariate polynomials with exact differentiation, used to serve analytic jets.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{PlmError, Result};
use crate::fields::{GridSpec, HyperJet, HyperJetField, JetField, JetRecord, NdGridSpec};

#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.insert(vec![0; nvars], c);
        p
    }

    /// The coordinate function `x_k`.
    pub fn var(nvars: usize, k: usize) -> Self {
        let mut e = vec![0; nvars];
        e[k] = 1;
        let mut p = Self::zero(nvars);
        p.insert(e, 1.0);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    fn insert(&mut self, exps: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(exps).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            p.insert(e.clone(), c * s);
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(self.nvars, 1.0), |acc, _| &acc * self)
    }

    pub fn derivative(&self, k: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[k] > 0 {
                let mut d = e.clone();
                d[k] -= 1;
                p.insert(d, c * e[k] as f64);
            }
        }
        p
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>()).sum()
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut p = self.clone();
        for (e, c) in &rhs.terms {
            p.insert(e.clone(), *c);
        }
        p
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &rhs.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                p.insert(ea.iter().zip(eb).map(|(a, b)| a + b).collect(), ca * cb);
            }
        }
        p
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly { (&self).$m(&rhs) }
        }
        impl $tr<&Poly> for Poly {
            type Output = Poly;
            fn $m(self, rhs: &Poly) -> Poly { (&self).$m(rhs) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

/// A vector of polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVec<const D: usize>(pub [Poly; D]);

impl<const D: usize> PolyVec<D> {
    pub fn nvars(&self) -> usize {
        self.0[0].nvars()
    }

    pub fn eval(&self, x: &[f64]) -> [f64; D] {
        std::array::from_fn(|i| self.0[i].eval(x))
    }

    pub fn derivative(&self, k: usize) -> Self {
        Self(std::array::from_fn(|i| self.0[i].derivative(k)))
    }

    /// `M · v` for a constant matrix.
    pub fn transform(&self, m: &[[f64; D]; D]) -> Self {
        Self(std::array::from_fn(|i| (0..D).fold(Poly::zero(self.nvars()), |acc, j| &acc + &self.0[j].scale(m[i][j]))))
    }

    /// `⟨self, other⟩` as a polynomial.
    pub fn dot(&self, other: &Self) -> Poly {
        (0..D).fold(Poly::zero(self.nvars()), |acc, i| &acc + &(&self.0[i] * &other.0[i]))
    }

    pub fn jet2(&self, x: f64, y: f64) -> JetRecord<D> {
        let p = [x, y];
        let dx = self.derivative(0);
        let dy = self.derivative(1);
        let dxx = dx.derivative(0);
        let dyy = dy.derivative(1);
        JetRecord {
            value: self.eval(&p),
            dx: dx.eval(&p),
            dy: dy.eval(&p),
            dxx: dxx.eval(&p),
            dxy: dx.derivative(1).eval(&p),
            dyy: dyy.eval(&p),
            dxxx: Some(dxx.derivative(0).eval(&p)),
            dyyy: Some(dyy.derivative(1).eval(&p)),
        }
    }
}

/// Polynomial field in two variables sampled on a grid; jets are exact.
#[derive(Clone, Debug)]
pub struct PolyField<const D: usize> {
    spec: GridSpec,
    margin: usize,
    poly: PolyVec<D>,
    derivs: [PolyVec<D>; 7],
}

impl<const D: usize> PolyField<D> {
    pub fn new(spec: GridSpec, poly: PolyVec<D>, margin: usize) -> Result<Self> {
        if poly.nvars() != 2 {
            return Err(PlmError::Domain("surface fields need polynomials in two variables".into()));
        }
        let dx = poly.derivative(0);
        let dy = poly.derivative(1);
        let dxx = dx.derivative(0);
        let dyy = dy.derivative(1);
        let derivs = [dx.clone(), dy.clone(), dxx.clone(), dx.derivative(1), dyy.clone(), dxx.derivative(0), dyy.derivative(1)];
        Ok(Self { spec, margin, poly, derivs })
    }

    pub fn poly(&self) -> &PolyVec<D> {
        &self.poly
    }

    pub fn with_margin(mut self, margin: usize) -> Self {
        self.margin = margin;
        self
    }

    pub fn jet_xy(&self, x: f64, y: f64) -> JetRecord<D> {
        let p = [x, y];
        let [dx, dy, dxx, dxy, dyy, dxxx, dyyy] = &self.derivs;
        JetRecord {
            value: self.poly.eval(&p),
            dx: dx.eval(&p),
            dy: dy.eval(&p),
            dxx: dxx.eval(&p),
            dxy: dxy.eval(&p),
            dyy: dyy.eval(&p),
            dxxx: Some(dxxx.eval(&p)),
            dyyy: Some(dyyy.eval(&p)),
        }
    }

    /// Samples the field values on its grid.
    pub fn sample(&self) -> Result<crate::fields::FieldGrid<D>> {
        crate::fields::FieldGrid::from_fn(self.spec.clone(), |x, y| self.poly.eval(&[x, y]))
    }
}

impl<const D: usize> JetField<D> for PolyField<D> {
    fn spec(&self) -> &GridSpec {
        &self.spec
    }

    fn margin(&self) -> usize {
        self.margin
    }

    fn jet(&self, i: usize, j: usize) -> Result<JetRecord<D>> {
        let [x, y] = self.spec.coord(i, j);
        Ok(self.jet_xy(x, y))
    }
}

/// Polynomial field in `n = D - 2` variables; jets are exact.
#[derive(Clone, Debug)]
pub struct PolyHyperField<const D: usize> {
    spec: NdGridSpec,
    margin: usize,
    poly: PolyVec<D>,
    first: Vec<PolyVec<D>>,
    second: Vec<Vec<PolyVec<D>>>,
}

impl<const D: usize> PolyHyperField<D> {
    pub fn new(spec: NdGridSpec, poly: PolyVec<D>, margin: usize) -> Result<Self> {
        let n = D - 2;
        if poly.nvars() != n || spec.ndim() != n {
            return Err(PlmError::Domain(format!("hypersurface field in dimension {D} needs {n} variables")));
        }
        let first: Vec<_> = (0..n).map(|a| poly.derivative(a)).collect();
        let second = first.iter().map(|p| (0..n).map(|b| p.derivative(b)).collect()).collect();
        Ok(Self { spec, margin, poly, first, second })
    }

    pub fn poly(&self) -> &PolyVec<D> {
        &self.poly
    }

    pub fn jet_at_point(&self, x: &[f64]) -> HyperJet<D> {
        HyperJet {
            value: self.poly.eval(x),
            first: self.first.iter().map(|p| p.eval(x)).collect(),
            second: self.second.iter().map(|r| r.iter().map(|p| p.eval(x)).collect()).collect(),
        }
    }

    pub fn sample(&self) -> Result<crate::fields::HyperGrid<D>> {
        crate::fields::NdField::from_fn(self.spec.clone(), |x| self.poly.eval(x))
    }
}

impl<const D: usize> HyperJetField<D> for PolyHyperField<D> {
    fn nd_spec(&self) -> &NdGridSpec {
        &self.spec
    }

    fn hyper_margin(&self) -> usize {
        self.margin
    }

    fn hyper_jet(&self, idx: &[usize]) -> Result<HyperJet<D>> {
        Ok(self.jet_at_point(&self.spec.coord(idx)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_derivatives() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = &(&x * &y) + &x.pow(3).scale(1.0 / 6.0);
        assert!((p.eval(&[0.5, 2.0]) - (1.0 + 0.125 / 6.0)).abs() < 1e-15);
        let px = p.derivative(0);
        assert!((px.eval(&[0.5, 2.0]) - (2.0 + 0.125)).abs() < 1e-15);
        assert_eq!(p.derivative(0).derivative(0).derivative(0), Poly::constant(2, 1.0));
        assert_eq!(&p - &p, Poly::zero(2));
    }

    #[test]
    fn jets_of_hypar() {
        let (x, y) = (Poly::var(2, 0), Poly::var(2, 1));
        let f = PolyVec([x.clone(), y.clone(), &x * &y, Poly::constant(2, -1.0)]);
        let jet = f.jet2(0.3, 0.7);
        assert_eq!(jet.dx, [1.0, 0.0, 0.7, 0.0]);
        assert_eq!(jet.dxy, [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(jet.dxxx, Some([0.0; 4]));
    }
}
