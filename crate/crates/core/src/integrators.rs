//! Integrators characterized by `(Θ, Z)`. The Gaussian family `𝒟ω_s` and
//! the Hermite family `𝒟ρ_n` live on a quadratic-form pair; the flat
//! integrator lives on a localization.
//!
//! Gaussian integrals have an analytic route `∫F_μ 𝒟 = Σ_k c_k Z(b'_k)`,
//! checked against localized Gauss–Hermite quadrature and Monte Carlo.
//! Complex `s` is sampled from the real law with `1/s₀ = Re(1/s)` and
//! reweighted by a unit-modulus phase.
//!
//! # Hermite weight
//!
//! The localized Hermite integrator uses the weight `e^{−πu²/W}`, not the
//! printed `e^{−πu²W}`. With `x = √(π/W)·u` the Hermite argument
//! `H_n(√(π/W)u)` is `H_n(x)` and the weight is `e^{−x²}`, the measure under
//! which `H_n` are orthogonal. The normalized weight `W^{−1/2} e^{−πu²/W}`
//! has Fourier transform `e^{−πWv²}`, which is `Z` of `𝒟ω₁` localized to
//! one dimension, so `𝒟ρ₀` coincides with the Gaussian. Both
//! `∫𝒟ρ_n = δ_{n0}` and `∫f_m 𝒟ρ_n = (πW)^m n! δ_nm` follow. The printed
//! weight breaks these identities unless `W = 1`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hermite::{dd_div, gauss_hermite_dd, hermite, hermite_multi, GaussHermite};
use twofloat::TwoFloat;
use crate::linalg;
use crate::mc::{self, McConfig, McEstimate};
use crate::measures::{DiracComb, IntegrableFunctional, ThetaKind};
use crate::quadforms::{localize, Localization, QuadFormPair};
use crate::scalar::{cabs, cexp, cone, count, czero, lit, phase, re, Complex, Real};
use crate::spaces::{DualVector, FieldVector};

pub const DEFAULT_MAX_HERMITE_ORDER: usize = 12;
pub const DEFAULT_QUADRATURE_ORDER: usize = 32;
/// Largest localized dimension handled by tensor quadrature.
pub const MAX_LOCALIZED_DIM: usize = 4;

#[derive(Debug, Clone)]
pub enum IntegratorKind<T: Real> {
    /// `Θ = e^{−(π/s)Q − 2πi⟨·,·⟩}`, `Z = e^{−πsW}`, `Re(s) > 0`.
    Gaussian { s: Complex<T> },
    /// Order-`n` Hermite integrator over the same form.
    Hermite { n: usize },
    /// Translation-invariant integrator on `ℝ^m` with form `W_{ℝ^m}`.
    Flat { form: Localization<T> },
}

#[derive(Debug, Clone)]
pub struct IntegratorSpec<T: Real> {
    kind: IntegratorKind<T>,
    qf: Option<Arc<QuadFormPair<T>>>,
}

impl<T: Real> IntegratorSpec<T> {
    pub fn gaussian(qf: Arc<QuadFormPair<T>>, s: Complex<T>) -> Result<Self> {
        if !(s.re > T::zero()) {
            return Err(Error::Domain(format!("Gaussian integrator needs Re(s) > 0, got {s}")));
        }
        linalg::check_real_positive(&qf.a().map(|z| z / s), "Q/s")?;
        Ok(IntegratorSpec {
            kind: IntegratorKind::Gaussian { s },
            qf: Some(qf),
        })
    }

    pub fn gaussian_real(qf: Arc<QuadFormPair<T>>, s: T) -> Result<Self> {
        Self::gaussian(qf, re(s))
    }

    pub fn hermite(qf: Arc<QuadFormPair<T>>, n: usize) -> Result<Self> {
        Self::hermite_bounded(qf, n, DEFAULT_MAX_HERMITE_ORDER)
    }

    pub fn hermite_bounded(qf: Arc<QuadFormPair<T>>, n: usize, max_order: usize) -> Result<Self> {
        if n > max_order {
            return Err(Error::Config(format!(
                "Hermite order {n} exceeds configured maximum {max_order}"
            )));
        }
        Ok(IntegratorSpec {
            kind: IntegratorKind::Hermite { n },
            qf: Some(qf),
        })
    }

    pub fn flat(form: Localization<T>) -> Self {
        IntegratorSpec {
            kind: IntegratorKind::Flat { form },
            qf: None,
        }
    }

    pub fn kind(&self) -> &IntegratorKind<T> {
        &self.kind
    }

    pub fn qf(&self) -> Option<&Arc<QuadFormPair<T>>> {
        self.qf.as_ref()
    }

    fn gaussian_parts(&self) -> Result<(Complex<T>, &Arc<QuadFormPair<T>>)> {
        match (&self.kind, &self.qf) {
            (IntegratorKind::Gaussian { s }, Some(qf)) => Ok((*s, qf)),
            (k, _) => Err(Error::Unsupported(format!(
                "operation needs a Gaussian integrator, got {}",
                kind_name(k)
            ))),
        }
    }

    /// `s` of a Gaussian spec.
    pub fn s(&self) -> Option<Complex<T>> {
        match self.kind {
            IntegratorKind::Gaussian { s } => Some(s),
            _ => None,
        }
    }
}

fn kind_name<T: Real>(k: &IntegratorKind<T>) -> &'static str {
    match k {
        IntegratorKind::Gaussian { .. } => "Gaussian",
        IntegratorKind::Hermite { .. } => "Hermite",
        IntegratorKind::Flat { .. } => "Flat",
    }
}

/// `Z(b') = e^{−πsW(b')}`, the Fourier–Stieltjes transform of `𝒟ω_s`.
pub fn z_eval<T: Real>(spec: &IntegratorSpec<T>, bp: &DualVector<T>) -> Result<Complex<T>> {
    let (s, qf) = spec.gaussian_parts()?;
    let w = qf.w_eval(bp)?;
    Ok(cexp(-(s * w * re(T::pi()))))
}

/// `∫ F_μ 𝒟 := ∫ Z dμ = Σ_k c_k Z(b'_k)`.
pub fn integrate_analytic<T: Real>(spec: &IntegratorSpec<T>, comb: &DiracComb<T>) -> Result<Complex<T>> {
    comb.iter()
        .try_fold(czero::<T>(), |acc, (p, c)| Ok(acc + c * z_eval(spec, p)?))
}

/// `⟨b⟩ = ∫ b 𝒟ω_s`, which vanishes for the centered Gaussian.
pub fn mean_point<T: Real>(spec: &IntegratorSpec<T>) -> Result<FieldVector<T>> {
    let (_, qf) = spec.gaussian_parts()?;
    Ok(FieldVector::zeros(qf.grid().clone()))
}

/// `F̃_μ(⟨b⟩) = ∫ Θ̃(⟨b⟩, b') dμ(b')` with `Θ̃(⟨b⟩, ·) := Z(·)`.
pub fn mean_value_route<T: Real>(spec: &IntegratorSpec<T>, comb: &DiracComb<T>) -> Result<Complex<T>> {
    let at = mean_point(spec)?;
    let theta_tilde = |_: &FieldVector<T>, bp: &DualVector<T>| z_eval(spec, bp);
    comb.iter()
        .try_fold(czero::<T>(), |acc, (p, c)| Ok(acc + c * theta_tilde(&at, p)?))
}

/// Draws fields with covariance `(s/2π)·G`.
#[derive(Debug, Clone)]
pub struct GaussianSampler<T: Real> {
    factor: DMatrix<T>,
    qf: Arc<QuadFormPair<T>>,
}

impl<T: Real> GaussianSampler<T> {
    pub fn new(spec: &IntegratorSpec<T>) -> Result<Self> {
        let (s, qf) = spec.gaussian_parts()?;
        if s.im != T::zero() {
            return Err(Error::Unsupported("sampling needs real s".into()));
        }
        Self::with_scale(qf, s.re)
    }

    fn with_scale(qf: &Arc<QuadFormPair<T>>, s: T) -> Result<Self> {
        let l = qf
            .covariance_factor()
            .ok_or_else(|| Error::Unsupported("sampling needs a real quadratic form".into()))?;
        let factor = l * (s / T::two_pi()).sqrt();
        Ok(GaussianSampler {
            factor,
            qf: qf.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Fills `out` (weight-folded coordinates) with one draw; `noise` is scratch.
    pub fn draw(&self, rng: &mut ChaCha8Rng, noise: &mut [T], out: &mut [Complex<T>]) {
        let n = self.dim();
        for z in noise.iter_mut() {
            let x: f64 = StandardNormal.sample(rng);
            *z = lit(x);
        }
        for i in 0..n {
            let mut acc = T::zero();
            for j in 0..=i {
                acc += self.factor[(i, j)] * noise[j];
            }
            out[i] = re(acc);
        }
    }

    pub fn zero_field(&self) -> FieldVector<T> {
        FieldVector::zeros(self.qf.grid().clone())
    }
}

/// Reproducible stream of Gaussian samples; sample `i` is the same field the
/// Monte Carlo routines see at index `i` for the same seed.
pub struct GaussianStream<T: Real> {
    sampler: GaussianSampler<T>,
    seed: u64,
    next: u64,
    count: u64,
    rng: Option<ChaCha8Rng>,
    noise: Vec<T>,
}

impl<T: Real> Iterator for GaussianStream<T> {
    type Item = FieldVector<T>;

    fn next(&mut self) -> Option<FieldVector<T>> {
        if self.next >= self.count {
            return None;
        }
        if self.next % mc::BATCH_SIZE == 0 {
            self.rng = Some(mc::batch_rng(self.seed, self.next / mc::BATCH_SIZE));
        }
        let mut field = self.sampler.zero_field();
        let rng = self.rng.as_mut().expect("stream rng initialised");
        self.sampler.draw(rng, &mut self.noise, field.values_mut());
        self.next += 1;
        Some(field)
    }
}

pub fn sample_gaussian<T: Real>(spec: &IntegratorSpec<T>, count: u64, seed: u64) -> Result<GaussianStream<T>> {
    let sampler = GaussianSampler::new(spec)?;
    let noise = vec![T::zero(); sampler.dim()];
    Ok(GaussianStream {
        sampler,
        seed,
        next: 0,
        count,
        rng: None,
        noise,
    })
}

/// Monte Carlo estimate of `∫ F(b) 𝒟ω_s(b)` under the normalized Gaussian law.
pub fn integrate_mc<T, F>(spec: &IntegratorSpec<T>, f: F, cfg: &McConfig) -> Result<McEstimate<T>>
where
    T: Real,
    F: Fn(&FieldVector<T>) -> Result<Complex<T>> + Sync + Send,
{
    let mut est = integrate_mc_many(spec, 1, |b, out| {
        out[0] = f(b)?;
        Ok(())
    }, cfg)?;
    Ok(est.remove(0))
}

/// Several observables from one sample stream.
pub fn integrate_mc_many<T, F>(spec: &IntegratorSpec<T>, k: usize, f: F, cfg: &McConfig) -> Result<Vec<McEstimate<T>>>
where
    T: Real,
    F: Fn(&FieldVector<T>, &mut [Complex<T>]) -> Result<()> + Sync + Send,
{
    let (s, qf) = spec.gaussian_parts()?;
    let inv = cone::<T>() / s;
    let s0 = T::one() / inv.re;
    let sampler = GaussianSampler::with_scale(qf, s0)?;
    let n = sampler.dim();
    // Complex s: draw from the real law with 1/s₀ = Re(1/s) and reweight by
    // (s₀/s)^{n/2}·e^{−πi·Im(1/s)·Q(b)}, which has unit-modulus phase.
    let half = lit::<T>(0.5) * count::<T>(n);
    let ratio = cexp(Complex::new(half * (s0.ln() - cabs(s).ln()), -half * s.im.atan2(s.re)));
    let reweight = inv.im != T::zero();
    mc::estimate_many(
        cfg,
        k,
        || (sampler.zero_field(), vec![T::zero(); n]),
        |(field, noise), rng, _, out| {
            sampler.draw(rng, noise, field.values_mut());
            f(field, out)?;
            if reweight {
                let q = qf.q_eval(field)?;
                let w = ratio * cexp(Complex::new(T::zero(), -T::pi() * inv.im) * q);
                out.iter_mut().for_each(|o| *o *= w);
            }
            Ok(())
        },
    )
}

/// Localized functional on `ℝ^m` (complex coordinates allow contour-shifted
/// evaluation for complex forms).
pub trait LocalFn<T: Real>: Fn(&[Complex<T>]) -> Complex<T> {}
impl<T: Real, F: Fn(&[Complex<T>]) -> Complex<T>> LocalFn<T> for F {}

fn check_local_dim<T: Real>(loc: &Localization<T>) -> Result<usize> {
    let m = loc.dim();
    if m > MAX_LOCALIZED_DIM {
        return Err(Error::Localization(format!(
            "localized dimension {m} exceeds {MAX_LOCALIZED_DIM}"
        )));
    }
    Ok(m)
}

/// `u = L x/√π` for tensor node `x`, where `L Lᵀ = W_{ℝ^m}`.
fn node_to_u<T: Real>(loc: &Localization<T>, x: &[T], u: &mut [Complex<T>]) {
    let l = loc.factor();
    let scale = T::one() / T::pi().sqrt();
    for i in 0..u.len() {
        let mut acc = czero::<T>();
        for j in 0..=i {
            acc += l[(i, j)] * re(x[j]);
        }
        u[i] = acc * re(scale);
    }
}

/// Flat normalized Gaussian integral
/// `∫ f(u) e^{−π uᵀW⁻¹u} |det W|^{−1/2} du` by tensor Gauss–Hermite.
pub fn flat_integrate<T: Real>(loc: &Localization<T>, f: impl LocalFn<T>, order: usize) -> Result<Complex<T>> {
    let m = check_local_dim(loc)?;
    let rule = GaussHermite::<T>::new(order)?;
    let mut u = vec![czero::<T>(); m];
    let mut acc = czero::<T>();
    rule.for_each_tensor_point(m, |x, w| {
        node_to_u(loc, x, &mut u);
        acc += f(&u) * re(w);
    });
    Ok(acc * re(T::pi().powf(-count::<T>(m) / lit(2.0))))
}

/// Multi-index `(n, 0, …, 0)`.
pub fn default_multi_index(n: usize, m: usize) -> Vec<usize> {
    let mut a = vec![0; m];
    if m > 0 {
        a[0] = n;
    }
    a
}

/// Localized Hermite integral
///
/// `(det πW/2)^{n/2} (det W)^{−1/2} ∫ f(u) H_α(√π L⁻¹u) e^{−π uᵀW⁻¹u} du`
///
/// with `W = W_{ℝ^m} = L Lᵀ` and `|α| = n`; `alpha = None` puts all of the
/// order on the first axis.
pub fn integrate_localized_hermite<T: Real>(
    n: usize,
    f: impl LocalFn<T>,
    loc: &Localization<T>,
    alpha: Option<&[usize]>,
    order: usize,
) -> Result<Complex<T>> {
    let m = check_local_dim(loc)?;
    let alpha = match alpha {
        Some(a) => {
            if a.len() != m || a.iter().sum::<usize>() != n {
                return Err(Error::Config(format!(
                    "multi-index {a:?} does not have length {m} and order {n}"
                )));
            }
            a.to_vec()
        }
        None => default_multi_index(n, m),
    };
    if 2 * order < n + 2 {
        return Err(Error::Config(format!(
            "quadrature order {order} too low for Hermite order {n}"
        )));
    }
    let rule = GaussHermite::<T>::new(order)?;
    let mut u = vec![czero::<T>(); m];
    let mut acc = czero::<T>();
    rule.for_each_tensor_point(m, |x, w| {
        node_to_u(loc, x, &mut u);
        acc += f(&u) * re(w * hermite_multi(&alpha, x));
    });
    let mf = count::<T>(m);
    // (det πW/2)^{n/2} · π^{−m/2}; the (det W)^{−1/2} cancels against du.
    let log_det = re(mf * (T::pi() / lit(2.0)).ln()) + loc.logdet_wm();
    let pref = cexp(log_det * re(count::<T>(n) / lit(2.0))) * re(T::pi().powf(-mf / lit(2.0)));
    Ok(acc * pref)
}

/// `f_m(u) = (πW/2)^{m/2} H_m(√(π/W)·u)` on a 1-dim localization.
pub fn hermite_functional<T: Real>(m: usize, w: Complex<T>) -> impl Fn(&[Complex<T>]) -> Complex<T> {
    let pref = crate::scalar::csqrt(w * re(T::pi() / lit(2.0)));
    let pref = (0..m).fold(cone::<T>(), |p, _| p * pref);
    let scale = crate::scalar::csqrt(re(T::pi()) / w);
    move |u: &[Complex<T>]| pref * hermite(m, scale * u[0])
}

/// `∫ f_m 𝒟ρ_n = (πW)^m n! δ_nm` on a 1-dim localization.
///
/// For real `W` the sum runs in double-double arithmetic: the terms reach
/// `(πW)^6·6!` before cancelling, which `f64` cannot resolve to `1e−10`.
pub fn hermite_orthogonality<T: Real>(n: usize, m: usize, loc: &Localization<T>, order: usize) -> Result<Complex<T>> {
    let w = loc.w_scalar()?;
    if w.im != T::zero() {
        return integrate_localized_hermite(n, hermite_functional(m, w), loc, None, order);
    }
    if 2 * order < n + m + 2 {
        return Err(Error::Config(format!(
            "quadrature order {order} too low for degree {}",
            n + m
        )));
    }
    let rule = gauss_hermite_dd(order)?;
    let sum = rule
        .iter()
        .fold(TwoFloat::from(0.0), |acc, &(x, wt)| acc + wt * hermite(n, x) * hermite(m, x));
    let half_pi_w = twofloat::consts::FRAC_PI_2 * TwoFloat::from(crate::scalar::to_f64(w.re));
    let pref = dd_div(half_pi_w.sqrt().powi((n + m) as i32), twofloat::consts::PI.sqrt());
    Ok(re(lit(f64::from(pref * sum))))
}

/// `⟨n|m⟩ = ∫ Ĥ_n 𝒟ρ_m` on a 1-dim localization.
pub fn scalar_product_nm<T: Real>(n: usize, m: usize, loc: &Localization<T>, order: usize) -> Result<Complex<T>> {
    let w = loc.w_scalar()?;
    integrate_localized_hermite(m, hermite_functional(n, w), loc, None, order)
}

/// Closed form `(πW)^m n! δ_nm`.
pub fn orthogonality_exact<T: Real>(n: usize, m: usize, w: Complex<T>) -> Complex<T> {
    if n != m {
        return czero();
    }
    let base = w * re(T::pi());
    (0..m).fold(cone::<T>(), |p, _| p * base) * re(crate::hermite::factorial::<T>(n))
}

/// `∫F_μ 𝒟ω_s` for a comb `μ`, evaluated by
/// localizing onto the span of the comb points and integrating each phase
/// with the flat rule for `s·W_{ℝ^m}`.
pub fn integrate_localized_gaussian<T: Real>(
    spec: &IntegratorSpec<T>,
    comb: &DiracComb<T>,
    order: usize,
) -> Result<Complex<T>> {
    let (s, qf) = spec.gaussian_parts()?;
    let (basis, coeffs) = span_basis(comb.points(), lit(1e-10))?;
    if basis.is_empty() {
        return Ok(comb.weights().iter().fold(czero::<T>(), |a, &c| a + c));
    }
    if basis.len() > 3 {
        return Err(Error::Localization(format!(
            "comb spans {} dimensions; quadrature route supports at most 3",
            basis.len()
        )));
    }
    let loc = localize(qf, basis)?.scaled(s)?;
    let mut acc = czero::<T>();
    for (a, c) in coeffs.iter().zip(comb.weights()) {
        let val = flat_integrate(
            &loc,
            |u: &[Complex<T>]| {
                let x = a.iter().zip(u).fold(czero::<T>(), |t, (&ai, &ui)| t + ai * ui);
                complex_phase(x)
            },
            order,
        )?;
        acc += *c * val;
    }
    Ok(acc)
}

/// `e^{−2πi x}` for complex `x`.
pub fn complex_phase<T: Real>(x: Complex<T>) -> Complex<T> {
    phase(x.re) * re((T::two_pi() * x.im).exp())
}

/// Orthonormal basis (Hermitian Gram–Schmidt) of the span of `points`, with
/// each point's coordinates in that basis.
fn span_basis<T: Real>(points: &[DualVector<T>], rel_tol: T) -> Result<(Vec<DualVector<T>>, Vec<Vec<Complex<T>>>)> {
    let scale = points.iter().fold(T::zero(), |m, p| m.max(p.norm()));
    let mut basis: Vec<DualVector<T>> = Vec::new();
    for p in points {
        let mut r = p.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = herm_dot(q, &r);
                r = r.add(&q.scaled(-proj))?;
            }
        }
        let nr = r.norm();
        if nr > rel_tol * scale && nr > T::zero() {
            basis.push(r.scaled(re(T::one() / nr)));
        }
    }
    let coeffs = points
        .iter()
        .map(|p| basis.iter().map(|q| herm_dot(q, p)).collect())
        .collect();
    Ok((basis, coeffs))
}

fn herm_dot<T: Real>(q: &DualVector<T>, p: &DualVector<T>) -> Complex<T> {
    q.values()
        .iter()
        .zip(p.values())
        .fold(czero::<T>(), |s, (a, b)| s + a.conj() * *b)
}

/// Analytic value of `∫ F 𝒟ω_s` for a functional's comb, with the functional's
/// own `Θ` envelope absorbed by the integrator.
pub fn integrate_functional_analytic<T: Real>(spec: &IntegratorSpec<T>, f: &IntegrableFunctional<T>) -> Result<Complex<T>> {
    match f.theta() {
        ThetaKind::PhaseOnly | ThetaKind::GaussianWeighted(_) => integrate_analytic(spec, f.comb()),
        ThetaKind::HermiteWeighted(_) => Err(Error::Unsupported(
            "Hermite functionals integrate only in localized form".into(),
        )),
    }
}

/// `Σ|c_k|` bound check helper: `|∫F_μ| ≤ ‖μ‖`.
pub fn within_total_variation<T: Real>(value: Complex<T>, comb: &DiracComb<T>) -> bool {
    cabs(value) <= comb.total_variation() * (T::one() + lit(1e-12))
}
