//! Finite Dirac-comb measures on `𝔅'` and the integrable functionals they
//! induce.
//!
//! A comb `μ = Σ_k c_k δ_{b'_k}` turns `F_μ(b) = ∫ Θ(b, b') dμ(b')` into a
//! finite sum, and the integral of `F_μ` into `Σ_k c_k Z(b'_k)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::hermite;
use crate::quadforms::QuadFormPair;
use crate::scalar::{cabs, cexp, cone, csqrt, czero, lit, phase, re, to_f64, Complex, Real};
use crate::spaces::{pairing, DomainGrid, DualVector, FieldVector, GridRef};

#[derive(Debug, Clone, PartialEq)]
pub struct DiracComb<T: Real> {
    grid: GridRef<T>,
    points: Vec<DualVector<T>>,
    weights: Vec<Complex<T>>,
}

impl<T: Real> DiracComb<T> {
    pub fn new(grid: GridRef<T>, points: Vec<DualVector<T>>, weights: Vec<Complex<T>>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Dimension {
                expected: points.len(),
                found: weights.len(),
            });
        }
        if points.iter().any(|p| !DomainGrid::same(p.grid(), &grid)) {
            return Err(Error::GridMismatch);
        }
        Ok(DiracComb {
            grid,
            points,
            weights,
        })
    }

    /// The zero measure.
    pub fn zero(grid: GridRef<T>) -> Self {
        DiracComb {
            grid,
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// `c·δ_{b'}`.
    pub fn point(point: DualVector<T>, weight: Complex<T>) -> Self {
        DiracComb {
            grid: point.grid().clone(),
            points: vec![point],
            weights: vec![weight],
        }
    }

    /// Unit mass at the origin of `𝔅'`.
    pub fn delta_origin(grid: GridRef<T>) -> Self {
        Self::point(DualVector::zeros(grid), cone())
    }

    pub fn grid(&self) -> &GridRef<T> {
        &self.grid
    }

    pub fn points(&self) -> &[DualVector<T>] {
        &self.points
    }

    pub fn weights(&self) -> &[Complex<T>] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DualVector<T>, Complex<T>)> {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// `Σ_k |c_k|`.
    pub fn total_variation(&self) -> T {
        self.weights.iter().fold(T::zero(), |s, &c| s + cabs(c))
    }

    /// `a·μ + b·ν` as a comb (points are not merged).
    pub fn linear_combination(a: Complex<T>, mu: &Self, b: Complex<T>, nu: &Self) -> Result<Self> {
        if !DomainGrid::same(&mu.grid, &nu.grid) {
            return Err(Error::GridMismatch);
        }
        let points = mu.points.iter().chain(&nu.points).cloned().collect();
        let weights = mu
            .weights
            .iter()
            .map(|&c| a * c)
            .chain(nu.weights.iter().map(|&c| b * c))
            .collect();
        Ok(DiracComb {
            grid: mu.grid.clone(),
            points,
            weights,
        })
    }

    /// Maps every point through `f` onto `grid`, keeping weights.
    pub fn map_points<F>(&self, grid: GridRef<T>, f: F) -> Result<Self>
    where
        F: Fn(&DualVector<T>) -> Result<DualVector<T>>,
    {
        let points = self.points.iter().map(&f).collect::<Result<Vec<_>>>()?;
        Self::new(grid, points, self.weights.clone())
    }

    /// Replaces the weights (same points).
    pub fn with_weights(&self, weights: Vec<Complex<T>>) -> Result<Self> {
        Self::new(self.grid.clone(), self.points.clone(), weights)
    }
}

/// Product measure on the direct sum of the factor spaces.
pub fn convolve<T: Real>(a: &DiracComb<T>, b: &DiracComb<T>) -> DiracComb<T> {
    let grid = DomainGrid::direct_sum(&[a.grid.clone(), b.grid.clone()]);
    convolve_on(grid, a, b).expect("product grid built from the factors")
}

/// Product measure on a given product grid, which must be the direct sum of
/// the factors' grids.
pub fn convolve_on<T: Real>(grid: GridRef<T>, a: &DiracComb<T>, b: &DiracComb<T>) -> Result<DiracComb<T>> {
    match grid.factors() {
        Some([ga, gb]) if DomainGrid::same(ga, &a.grid) && DomainGrid::same(gb, &b.grid) => {}
        _ => return Err(Error::GridMismatch),
    }
    let mut points = Vec::with_capacity(a.len() * b.len());
    let mut weights = Vec::with_capacity(a.len() * b.len());
    for (p, c) in a.iter() {
        for (q, d) in b.iter() {
            points.push(DualVector::concat(&[p, q], grid.clone())?);
            weights.push(c * d);
        }
    }
    DiracComb::new(grid, points, weights)
}

/// Which `Θ` a functional is built on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaKind<T: Real> {
    /// `e^{−2πi⟨b',b⟩}`.
    PhaseOnly,
    /// `e^{−(π/s)Q(b)} e^{−2πi⟨b',b⟩}`.
    GaussianWeighted(Complex<T>),
    /// `H_n(√(πQ(b))) e^{−πQ(b)} e^{−2πi⟨b',b⟩}`; the infinite-dimensional
    /// prefactor `(Det πW/2)^{n/2}` is not applied.
    HermiteWeighted(usize),
}

/// `F_μ(b) = Σ_k c_k Θ(b, b'_k)`.
#[derive(Debug, Clone)]
pub struct IntegrableFunctional<T: Real> {
    comb: DiracComb<T>,
    theta: ThetaKind<T>,
    qf: Arc<QuadFormPair<T>>,
}

impl<T: Real> IntegrableFunctional<T> {
    pub fn new(comb: DiracComb<T>, theta: ThetaKind<T>, qf: Arc<QuadFormPair<T>>) -> Result<Self> {
        if !DomainGrid::same(comb.grid(), qf.grid()) {
            return Err(Error::GridMismatch);
        }
        if let ThetaKind::GaussianWeighted(s) = theta {
            if !(s.re > T::zero()) {
                return Err(Error::Domain(format!("Gaussian weight needs Re(s) > 0, got {s}")));
            }
        }
        Ok(IntegrableFunctional { comb, theta, qf })
    }

    pub fn comb(&self) -> &DiracComb<T> {
        &self.comb
    }

    pub fn theta(&self) -> ThetaKind<T> {
        self.theta
    }

    pub fn qf(&self) -> &Arc<QuadFormPair<T>> {
        &self.qf
    }

    /// Fourier–Stieltjes transform of the comb, `Σ_k c_k e^{−2πi⟨b'_k,b⟩}`.
    pub fn phase_part(&self, b: &FieldVector<T>) -> Result<Complex<T>> {
        let mut acc = czero::<T>();
        for (p, c) in self.comb.iter() {
            let x = pairing(p, b)?;
            // e^{−2πi x} for complex x = e^{2π Im x}·e^{−2πi Re x}
            acc += c * phase(x.re) * re((T::two_pi() * x.im).exp());
        }
        Ok(acc)
    }

    pub fn eval(&self, b: &FieldVector<T>) -> Result<Complex<T>> {
        f_mu_eval(self, b)
    }
}

/// Evaluates `F_μ(b)`.
pub fn f_mu_eval<T: Real>(f: &IntegrableFunctional<T>, b: &FieldVector<T>) -> Result<Complex<T>> {
    let phase_sum = f.phase_part(b)?;
    let envelope = match f.theta {
        ThetaKind::PhaseOnly => cone(),
        ThetaKind::GaussianWeighted(s) => {
            let q = f.qf.q_eval(b)?;
            cexp(-(q * re(T::pi())) / s)
        }
        ThetaKind::HermiteWeighted(n) => {
            let q = f.qf.q_eval(b)?;
            let arg = csqrt(q * re(T::pi()));
            hermite(n, arg) * cexp(-(q * re(T::pi())))
        }
    };
    Ok(envelope * phase_sum)
}

/// JSON form of one comb entry: `{"point": [...], "weight": [re, im]}`.
/// Point coordinates are numbers for real points and `[re, im]` pairs otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombEntry {
    pub point: Vec<Coord>,
    pub weight: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coord {
    Real(f64),
    Complex([f64; 2]),
}

impl Coord {
    fn to_complex<T: Real>(self) -> Complex<T> {
        match self {
            Coord::Real(x) => re(lit(x)),
            Coord::Complex([a, b]) => Complex::new(lit(a), lit(b)),
        }
    }
}

impl<T: Real> DiracComb<T> {
    pub fn to_entries(&self) -> Vec<CombEntry> {
        self.iter()
            .map(|(p, c)| {
                let real = p.values().iter().all(|z| z.im == T::zero());
                let point = p
                    .values()
                    .iter()
                    .map(|z| {
                        if real {
                            Coord::Real(to_f64(z.re))
                        } else {
                            Coord::Complex([to_f64(z.re), to_f64(z.im)])
                        }
                    })
                    .collect();
                CombEntry {
                    point,
                    weight: [to_f64(c.re), to_f64(c.im)],
                }
            })
            .collect()
    }

    pub fn from_entries(grid: GridRef<T>, entries: &[CombEntry]) -> Result<Self> {
        let mut points = Vec::with_capacity(entries.len());
        let mut weights = Vec::with_capacity(entries.len());
        for e in entries {
            let vals = e.point.iter().map(|c| c.to_complex()).collect();
            points.push(DualVector::new(grid.clone(), vals)?);
            weights.push(Complex::new(lit(e.weight[0]), lit(e.weight[1])));
        }
        Self::new(grid, points, weights)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_entries()).expect("comb entries serialize")
    }

    pub fn from_json(grid: GridRef<T>, text: &str) -> Result<Self> {
        let entries: Vec<CombEntry> =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("comb JSON: {e}")))?;
        Self::from_entries(grid, &entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn c(x: f64) -> Complex<f64> {
        Complex::new(x, 0.0)
    }

    fn unit_form(n: usize, a: f64) -> Arc<QuadFormPair<f64>> {
        Arc::new(QuadFormPair::from_real(DomainGrid::free(n), &(DMatrix::identity(n, n) * a)).unwrap())
    }

    #[test]
    fn delta_at_origin_is_constant_one() {
        let qf = unit_form(3, 1.0);
        let f = IntegrableFunctional::new(
            DiracComb::delta_origin(qf.grid().clone()),
            ThetaKind::PhaseOnly,
            qf.clone(),
        )
        .unwrap();
        let b = FieldVector::from_real(qf.grid().clone(), &[0.3, -7.0, 2.0]).unwrap();
        assert_eq!(f.eval(&b).unwrap(), c(1.0));
    }

    #[test]
    fn quarter_pairing_gives_minus_i() {
        let qf = unit_form(1, 1.0);
        let g = qf.grid().clone();
        let comb = DiracComb::point(DualVector::from_real(g.clone(), &[0.5]).unwrap(), c(1.0));
        let f = IntegrableFunctional::new(comb, ThetaKind::PhaseOnly, qf).unwrap();
        let b = FieldVector::from_real(g, &[0.5]).unwrap();
        assert!((f.eval(&b).unwrap() - Complex::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn gaussian_weight_value() {
        let qf = unit_form(1, 2.0);
        let g = qf.grid().clone();
        let f = IntegrableFunctional::new(DiracComb::delta_origin(g.clone()), ThetaKind::GaussianWeighted(c(1.0)), qf).unwrap();
        let b = FieldVector::from_real(g, &[1.0]).unwrap();
        let v = f.eval(&b).unwrap();
        assert!((v.re - (-2.0 * std::f64::consts::PI).exp()).abs() < 1e-17);
        assert!((v.re - 1.86744e-3).abs() < 1e-8);
    }

    #[test]
    fn hermite_weight_uses_sqrt_pi_q() {
        let qf = unit_form(1, 1.0);
        let g = qf.grid().clone();
        let f = IntegrableFunctional::new(DiracComb::delta_origin(g.clone()), ThetaKind::HermiteWeighted(2), qf).unwrap();
        let b = FieldVector::from_real(g, &[0.4]).unwrap();
        let q = 0.16 * std::f64::consts::PI;
        let expect = (4.0 * q - 2.0) * (-q).exp();
        assert!((f.eval(&b).unwrap() - c(expect)).norm() < 1e-14);
    }

    #[test]
    fn total_variation_cases() {
        let g = DomainGrid::<f64>::free(1);
        assert_eq!(DiracComb::zero(g.clone()).total_variation(), 0.0);
        let p = DualVector::zeros(g.clone());
        let two = DiracComb::new(g.clone(), vec![p.clone(), p.clone()], vec![c(1.0), c(-1.0)]).unwrap();
        assert_eq!(two.total_variation(), 2.0);
        assert_eq!(DiracComb::point(p, Complex::new(3.0, 4.0)).total_variation(), 5.0);
    }

    #[test]
    fn convolution_of_deltas() {
        let g1 = DomainGrid::<f64>::free(2);
        let g2 = DomainGrid::<f64>::free(1);
        let prod = convolve(&DiracComb::delta_origin(g1), &DiracComb::delta_origin(g2));
        assert_eq!(prod.len(), 1);
        assert_eq!(prod.weights(), &[c(1.0)]);
        assert!(prod.points()[0].values().iter().all(|z| z.norm() == 0.0));
        assert_eq!(prod.grid().len(), 3);
    }

    #[test]
    fn convolution_single_product() {
        let g1 = DomainGrid::<f64>::free(1);
        let g2 = DomainGrid::<f64>::free(2);
        let p = DiracComb::point(DualVector::from_real(g1, &[1.5]).unwrap(), c(2.0));
        let q = DiracComb::point(DualVector::from_real(g2, &[-1.0, 4.0]).unwrap(), c(3.0));
        let r = convolve(&p, &q);
        assert_eq!(r.weights(), &[c(6.0)]);
        assert_eq!(r.points()[0].values(), &[c(1.5), c(-1.0), c(4.0)]);
    }

    #[test]
    fn convolution_multiplies_total_variation() {
        let g1 = DomainGrid::<f64>::free(1);
        let g2 = DomainGrid::<f64>::free(1);
        let a = DiracComb::new(
            g1.clone(),
            vec![DualVector::from_real(g1.clone(), &[1.0]).unwrap(), DualVector::from_real(g1.clone(), &[2.0]).unwrap()],
            vec![c(0.5), Complex::new(0.0, -2.0)],
        )
        .unwrap();
        let b = DiracComb::new(
            g2.clone(),
            (0..3).map(|k| DualVector::from_real(g2.clone(), &[k as f64]).unwrap()).collect(),
            vec![c(1.0), c(-3.0), Complex::new(1.0, 1.0)],
        )
        .unwrap();
        let r = convolve(&a, &b);
        assert_eq!(r.len(), 6);
        // enumeration oracle
        let mut tv = 0.0;
        for ca in a.weights() {
            for cb in b.weights() {
                tv += (ca * cb).norm();
            }
        }
        assert!((r.total_variation() - tv).abs() < 1e-14);
        assert!((r.total_variation() - a.total_variation() * b.total_variation()).abs() < 1e-14);
    }

    #[test]
    fn convolution_on_wrong_grid_fails() {
        let g1 = DomainGrid::<f64>::free(1);
        let a = DiracComb::delta_origin(g1.clone());
        let bad = DomainGrid::direct_sum(&[DomainGrid::free(2), g1.clone()]);
        assert_eq!(convolve_on(bad, &a, &a), Err(Error::GridMismatch));
    }

    #[test]
    fn json_round_trip() {
        let g = DomainGrid::<f64>::free(2);
        let comb = DiracComb::new(
            g.clone(),
            vec![
                DualVector::from_real(g.clone(), &[0.5, -1.0]).unwrap(),
                DualVector::new(g.clone(), vec![Complex::new(1.0, 2.0), c(0.0)]).unwrap(),
            ],
            vec![c(1.0), Complex::new(-0.5, 0.25)],
        )
        .unwrap();
        let text = comb.to_json();
        assert!(text.contains("\"point\":[0.5,-1.0]"));
        let back = DiracComb::from_json(g, &text).unwrap();
        assert_eq!(back, comb);
    }

    #[test]
    fn json_dimension_error() {
        let g = DomainGrid::<f64>::free(2);
        let e = DiracComb::from_json(g, r#"[{"point":[1.0],"weight":[1.0,0.0]}]"#);
        assert!(matches!(e, Err(Error::Dimension { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn functional_is_linear_in_measure(
            pts in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 1..4),
            ws in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 4),
            b in prop::collection::vec(-1.0..1.0f64, 3),
            a in (-2.0..2.0f64, -1.0..1.0f64),
        ) {
            let qf = unit_form(3, 1.5);
            let g = qf.grid().clone();
            let k = pts.len();
            let points: Vec<_> = pts.iter().map(|p| DualVector::from_real(g.clone(), p).unwrap()).collect();
            let mu = DiracComb::new(g.clone(), points.clone(), ws[..k].iter().map(|w| Complex::new(w.0, w.1)).collect()).unwrap();
            let nu = DiracComb::new(g.clone(), points.iter().rev().cloned().collect(), ws[..k].iter().map(|w| Complex::new(w.1, -w.0)).collect()).unwrap();
            let a = Complex::new(a.0, a.1);
            let bv = c(0.7);
            let b = FieldVector::from_real(g.clone(), &b).unwrap();
            for theta in [ThetaKind::PhaseOnly, ThetaKind::GaussianWeighted(c(1.3)), ThetaKind::HermiteWeighted(3)] {
                let fm = IntegrableFunctional::new(mu.clone(), theta, qf.clone()).unwrap();
                let fn_ = IntegrableFunctional::new(nu.clone(), theta, qf.clone()).unwrap();
                let comb = DiracComb::linear_combination(a, &mu, bv, &nu).unwrap();
                let fc = IntegrableFunctional::new(comb, theta, qf.clone()).unwrap();
                let lhs = fc.eval(&b).unwrap();
                let rhs = a * fm.eval(&b).unwrap() + bv * fn_.eval(&b).unwrap();
                prop_assert!((lhs - rhs).norm() < 1e-12);
            }
        }

        #[test]
        fn gaussian_functional_is_bounded(
            pts in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 1..5),
            ws in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 5),
            b in prop::collection::vec(-3.0..3.0f64, 2),
        ) {
            let qf = unit_form(2, 0.8);
            let g = qf.grid().clone();
            let k = pts.len();
            let comb = DiracComb::new(
                g.clone(),
                pts.iter().map(|p| DualVector::from_real(g.clone(), p).unwrap()).collect(),
                ws[..k].iter().map(|w| Complex::new(w.0, w.1)).collect(),
            ).unwrap();
            let tv = comb.total_variation();
            let f = IntegrableFunctional::new(comb, ThetaKind::GaussianWeighted(c(2.0)), qf).unwrap();
            let v = f.eval(&FieldVector::from_real(g, &b).unwrap()).unwrap();
            prop_assert!(v.norm() <= tv * (1.0 + 1e-12));
        }
    }
}
