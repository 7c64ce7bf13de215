//! Generating functionals of non-quadratic actions on a localization.
//!
//! Euclidean convention throughout: `S(u) = uᵀW⁻¹u + λ Σ u_i⁴`,
//! `Z̃(u′) = ∫ e^{−πS(u) − 2π⟨u′,u⟩} du / |det W|^{1/2}`, and
//!
//! | quantity | convention |
//! |---|---|
//! | `W_S(u′)` | `(1/π) log Z̃(u′)`, so `W_S = W` when `λ = 0` |
//! | `⟨u⟩(u′)` | `−½ ∇W_S(u′)`, the tilted average of `u` |
//! | `Γ(v)` | `−W_S(u′) − 2⟨u′, v⟩` at `v = ⟨u⟩(u′)`, so `Γ = Q` when `λ = 0` |
//! | `⟨u′⟩(v)` | `−½ ∇Γ(v) = u′` |
//! | Schwinger–Dyson | `⟨∂_i F⟩ = π ⟨F ∂_i Q⟩` |

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hermite::GaussHermite;
use crate::integrators::{flat_integrate, MAX_LOCALIZED_DIM};
use crate::quadforms::Localization;
use crate::scalar::{count, lit, re, Complex, Real};

/// `S(u) = Q_{ℝ^m}(u) + λ Σ u_i⁴` on a real localization.
#[derive(Debug, Clone)]
pub struct ActionFunctional<T: Real> {
    loc: Localization<T>,
    wm: Vec<Vec<T>>,
    wm_inv: Vec<Vec<T>>,
    factor: Vec<Vec<T>>,
    lambda: T,
}

impl<T: Real> ActionFunctional<T> {
    pub fn new(loc: Localization<T>, lambda: T) -> Result<Self> {
        if !(lambda >= T::zero()) {
            return Err(Error::Domain(format!("quartic coupling must be ≥ 0, got {lambda}")));
        }
        let m = loc.dim();
        if m > 3 {
            return Err(Error::Localization(format!("effective action supports m ≤ 3, got {m}")));
        }
        if loc.wm().iter().any(|z| z.im != T::zero()) {
            return Err(Error::Unsupported("effective action needs a real localized form".into()));
        }
        let real = |a: &crate::linalg::CMatrix<T>| (0..m).map(|i| (0..m).map(|j| a[(i, j)].re).collect()).collect();
        Ok(ActionFunctional {
            wm: real(loc.wm()),
            wm_inv: real(loc.wm_inv()),
            factor: real(loc.factor()),
            loc,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.loc.dim()
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn localization(&self) -> &Localization<T> {
        &self.loc
    }

    pub fn q(&self, u: &[T]) -> T {
        quad(&self.wm_inv, u)
    }

    /// `W_{ℝ^m}(u′)`.
    pub fn w(&self, up: &[T]) -> T {
        quad(&self.wm, up)
    }

    pub fn eval(&self, u: &[T]) -> T {
        self.q(u) + self.lambda * u.iter().fold(T::zero(), |s, &x| s + x.powi(4))
    }
}

fn quad<T: Real>(a: &[Vec<T>], u: &[T]) -> T {
    let mut s = T::zero();
    for (i, row) in a.iter().enumerate() {
        for (j, &aij) in row.iter().enumerate() {
            s += u[i] * aij * u[j];
        }
    }
    s
}

/// Quadrature order used for `W_S` and the order it is cross-checked against.
pub const WS_ORDER: usize = 64;
const WS_CHECK_ORDER: usize = 80;
/// Step of the fourth-order central differences.
pub const FD_STEP: f64 = 1e-3;

/// Evaluates `W_S(u′) = W(u′) + (1/π) log E[e^{−πλΣu⁴}]` with
/// `u ~ N(−W u′, W/2π)` by shifted tensor Gauss–Hermite.
#[derive(Debug, Clone)]
pub struct WsEvaluator<T: Real> {
    action: ActionFunctional<T>,
    rule: GaussHermite<T>,
    check: GaussHermite<T>,
}

impl<T: Real> WsEvaluator<T> {
    pub fn new(action: ActionFunctional<T>) -> Result<Self> {
        Ok(WsEvaluator {
            action,
            rule: GaussHermite::new(WS_ORDER)?,
            check: GaussHermite::new(WS_CHECK_ORDER)?,
        })
    }

    pub fn action(&self) -> &ActionFunctional<T> {
        &self.action
    }

    fn log_quartic_mean(&self, rule: &GaussHermite<T>, up: &[T]) -> T {
        let a = &self.action;
        let m = a.dim();
        if a.lambda == T::zero() {
            return T::zero();
        }
        let mean: Vec<T> = (0..m)
            .map(|i| -(0..m).fold(T::zero(), |s, j| s + a.wm[i][j] * up[j]))
            .collect();
        let scale = T::one() / T::pi().sqrt();
        let mut u = vec![T::zero(); m];
        let mut acc = T::zero();
        rule.for_each_tensor_point(m, |x, w| {
            for i in 0..m {
                u[i] = mean[i] + scale * (0..=i).fold(T::zero(), |s, j| s + a.factor[i][j] * x[j]);
            }
            let quartic = u.iter().fold(T::zero(), |s, &v| s + v.powi(4));
            acc += w * (-T::pi() * a.lambda * quartic).exp();
        });
        (acc * T::pi().powf(-count::<T>(m) / lit(2.0))).ln() / T::pi()
    }

    /// `W_S(u′)`, refusing results that change between the two quadrature
    /// orders by more than `1e−11` (relative).
    pub fn w_s(&self, up: &[T]) -> Result<T> {
        if up.len() != self.action.dim() {
            return Err(Error::Dimension { expected: self.action.dim(), found: up.len() });
        }
        let base = self.action.w(up);
        let a = self.log_quartic_mean(&self.rule, up);
        let b = self.log_quartic_mean(&self.check, up);
        if !(a.is_finite() && b.is_finite()) || (a - b).abs() > lit::<T>(1e-11) * (T::one() + (base + a).abs()) {
            return Err(Error::Resolution(format!(
                "W_S at {:?} not converged ({a} vs {b})",
                up.iter().map(|x| crate::scalar::to_f64(*x)).collect::<Vec<_>>()
            )));
        }
        Ok(base + a)
    }

    /// `∂_i W_S(u′)` by fourth-order central differences.
    pub fn grad_w_s(&self, up: &[T]) -> Result<Vec<T>> {
        let h = lit::<T>(FD_STEP);
        (0..up.len())
            .map(|i| {
                let at = |k: f64| {
                    let mut p = up.to_vec();
                    p[i] += h * lit(k);
                    self.w_s(&p)
                };
                let d = (at(-2.0)? - at(2.0)? + lit::<T>(8.0) * (at(1.0)? - at(-1.0)?)) / (lit::<T>(12.0) * h);
                Ok(d)
            })
            .collect()
    }

    /// `⟨u⟩(u′) = −½ ∇W_S(u′)`.
    pub fn mean_field(&self, up: &[T]) -> Result<Vec<T>> {
        Ok(self.grad_w_s(up)?.into_iter().map(|g| -g * lit(0.5)).collect())
    }
}

/// Tables of `W_S` and `⟨u⟩` on a slice `u′ = t·e_axis`.
#[derive(Debug, Clone)]
pub struct EffectiveState<T: Real> {
    pub eval: WsEvaluator<T>,
    pub axis: usize,
    pub uprime: Vec<T>,
    pub w_s: Vec<T>,
    pub mean_field: Vec<Vec<T>>,
    /// `N = Z̃(0)`, so `W_S(0) = (1/π) log N`.
    pub norm: T,
}

impl<T: Real> EffectiveState<T> {
    pub fn dim(&self) -> usize {
        self.eval.action.dim()
    }

    fn point(&self, t: T) -> Vec<T> {
        let mut p = vec![T::zero(); self.dim()];
        p[self.axis] = t;
        p
    }

    fn range(&self) -> (T, T) {
        (self.uprime[0], self.uprime[self.uprime.len() - 1])
    }

    /// Slice mean field `v(t) = ⟨u⟩_axis(t·e_axis)`.
    pub fn slice_mean(&self, t: T) -> Result<T> {
        Ok(self.eval.mean_field(&self.point(t))?[self.axis])
    }
}

/// Tabulates `W_S` and the mean field on `uprime_grid` (sorted, along `axis`).
pub fn w_s_compute<T: Real>(action: ActionFunctional<T>, axis: usize, uprime_grid: &[T]) -> Result<EffectiveState<T>> {
    let m = action.dim();
    if axis >= m {
        return Err(Error::Config(format!("slice axis {axis} outside dimension {m}")));
    }
    if m > MAX_LOCALIZED_DIM.min(3) {
        return Err(Error::Localization(format!("effective action supports m ≤ 3, got {m}")));
    }
    if uprime_grid.len() < 4 || uprime_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("source grid needs ≥ 4 increasing points".into()));
    }
    let eval = WsEvaluator::new(action)?;
    let norm_ws = eval.w_s(&vec![T::zero(); m])?;
    let rows: Vec<(T, Vec<T>)> = uprime_grid
        .par_iter()
        .map(|&t| {
            let mut p = vec![T::zero(); m];
            p[axis] = t;
            Ok((eval.w_s(&p)?, eval.mean_field(&p)?))
        })
        .collect::<Result<_>>()?;
    let (w_s, mean_field) = rows.into_iter().unzip();
    Ok(EffectiveState {
        axis,
        uprime: uprime_grid.to_vec(),
        w_s,
        mean_field,
        norm: (T::pi() * norm_ws).exp(),
        eval,
    })
}

/// `mean_field(state, u′)` for a point inside the tabulated slice range.
pub fn mean_field<T: Real>(state: &EffectiveState<T>, up: &[T]) -> Result<Vec<T>> {
    let (lo, hi) = state.range();
    let t = up.get(state.axis).copied().unwrap_or(T::zero());
    if !(t >= lo && t <= hi) {
        return Err(Error::Domain(format!("source {t} outside the tabulated range [{lo}, {hi}]")));
    }
    state.eval.mean_field(up)
}

/// Effective action on the slice: `(v_k, Γ_k, u′_k)`.
#[derive(Debug, Clone)]
pub struct GammaTable<T: Real> {
    pub v: Vec<T>,
    pub gamma: Vec<T>,
    pub uprime: Vec<T>,
}

/// `Γ(v_k) = −W_S(u′_k) − 2 u′_k v_k` on the slice grid, after checking that
/// the mean field is strictly monotone (so the transform is invertible).
pub fn gamma_legendre<T: Real>(state: &EffectiveState<T>) -> Result<GammaTable<T>> {
    let a = state.axis;
    let v: Vec<T> = state.mean_field.iter().map(|mf| mf[a]).collect();
    if v.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Legendre("mean field is not strictly monotone on the grid".into()));
    }
    let gamma = state
        .uprime
        .iter()
        .zip(&state.w_s)
        .zip(&v)
        .map(|((&t, &w), &vk)| -w - lit::<T>(2.0) * t * vk)
        .collect();
    Ok(GammaTable {
        v,
        gamma,
        uprime: state.uprime.clone(),
    })
}

/// Monotone cubic (Fritsch–Carlson) interpolant through `(x_k, y_k)` with
/// strictly increasing `x`.
#[derive(Debug, Clone)]
pub struct Pchip<T: Real> {
    x: Vec<T>,
    y: Vec<T>,
    d: Vec<T>,
}

impl<T: Real> Pchip<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Legendre("interpolation nodes must increase strictly".into()));
        }
        let delta: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
        let mut d = vec![T::zero(); n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] > T::zero() {
                let h0 = x[k] - x[k - 1];
                let h1 = x[k + 1] - x[k];
                let w1 = lit::<T>(2.0) * h1 + h0;
                let w2 = h1 + lit::<T>(2.0) * h0;
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        Ok(Pchip { x, y, d })
    }

    pub fn eval(&self, t: T) -> T {
        let n = self.x.len();
        let k = match self.x.iter().position(|&xk| xk > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = -two * s3 + three * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }
}

/// `u′(v)` on the slice: monotone-cubic guess from the table, then Newton on
/// `slice_mean(u′) = v` with a finite-difference slope.
pub fn invert_mean_field<T: Real>(state: &EffectiveState<T>, table: &GammaTable<T>, v: T) -> Result<T> {
    let (lo, hi) = state.range();
    let mut vs = table.v.clone();
    let mut ts = table.uprime.clone();
    vs.reverse();
    ts.reverse();
    if !(v >= vs[0] && v <= vs[vs.len() - 1]) {
        return Err(Error::Legendre(format!("mean field value {v} outside the tabulated range")));
    }
    let mut t = Pchip::new(vs, ts)?.eval(v);
    let h = lit::<T>(FD_STEP);
    for _ in 0..30 {
        let f = state.slice_mean(t)? - v;
        let slope = (state.slice_mean(t + h)? - state.slice_mean(t - h)?) / (lit::<T>(2.0) * h);
        if !(slope < T::zero()) {
            return Err(Error::Legendre("mean field lost monotonicity".into()));
        }
        let dt = f / slope;
        t -= dt;
        if dt.abs() <= lit::<T>(1e-14) * (T::one() + t.abs()) {
            break;
        }
    }
    if !(t >= lo - lit::<T>(0.1) * (hi - lo) && t <= hi + lit::<T>(0.1) * (hi - lo)) {
        return Err(Error::Legendre(format!("inversion left the source range at {t}")));
    }
    Ok(t)
}

/// `Γ(v)` at an arbitrary mean-field value on the slice.
pub fn gamma_at<T: Real>(state: &EffectiveState<T>, table: &GammaTable<T>, v: T) -> Result<T> {
    let t = invert_mean_field(state, table, v)?;
    let w = state.eval.w_s(&state.point(t))?;
    Ok(-w - lit::<T>(2.0) * t * v)
}

/// `|dΓ/dv|` at the zero-source mean field `v₀ = ⟨u⟩(0)`.
pub fn quantum_eom_residual<T: Real>(state: &EffectiveState<T>) -> Result<T> {
    let (lo, hi) = state.range();
    if !(lo < T::zero() && hi > T::zero()) {
        return Err(Error::Config("source grid must contain 0 in its interior".into()));
    }
    let table = gamma_legendre(state)?;
    let v0 = state.slice_mean(T::zero())?;
    let h = lit::<T>(FD_STEP);
    let g = |k: f64| gamma_at(state, &table, v0 + h * lit(k));
    let d = (g(-2.0)? - g(2.0)? + lit::<T>(8.0) * (g(1.0)? - g(-1.0)?)) / (lit::<T>(12.0) * h);
    Ok(d.abs())
}

/// `W_S(u′) = −min_v [Γ(v) + 2u′v]` by golden-section search over the
/// tabulated mean-field range.
pub fn inverse_legendre<T: Real>(state: &EffectiveState<T>, table: &GammaTable<T>, t: T) -> Result<T> {
    let (mut a, mut b) = (table.v[table.v.len() - 1], table.v[0]);
    let obj = |v: T| -> Result<T> { Ok(gamma_at(state, table, v)? + lit::<T>(2.0) * t * v) };
    let ratio = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (obj(c)?, obj(d)?);
    while (b - a).abs() > lit::<T>(1e-9) * (T::one() + a.abs().max(b.abs())) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = obj(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = obj(d)?;
        }
    }
    Ok(-obj((a + b) * lit(0.5))?)
}

/// Polynomial `Σ_k c_k Π_i u_i^{e_{k,i}}` on `ℝ^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T: Real> {
    dim: usize,
    terms: Vec<(T, Vec<usize>)>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(dim: usize, terms: Vec<(T, Vec<usize>)>) -> Result<Self> {
        if let Some((_, e)) = terms.iter().find(|(_, e)| e.len() != dim) {
            return Err(Error::Dimension { expected: dim, found: e.len() });
        }
        Ok(Polynomial { dim, terms })
    }

    pub fn constant(dim: usize, c: T) -> Self {
        Polynomial { dim, terms: vec![(c, vec![0; dim])] }
    }

    /// `u_i^k`.
    pub fn monomial(dim: usize, i: usize, k: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = k;
        Polynomial { dim, terms: vec![(T::one(), e)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(_, e)| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, u: &[T]) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |s, (c, e)| s + *c * e.iter().zip(u).fold(T::one(), |p, (&k, &x)| p * x.powi(k as i32)))
    }

    pub fn derivative(&self, i: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[i] > 0)
            .map(|(c, e)| {
                let mut e2 = e.clone();
                e2[i] -= 1;
                (*c * count::<T>(e[i]), e2)
            })
            .collect();
        Polynomial { dim: self.dim, terms }
    }
}

/// `Σ_i |⟨∂_i F⟩ − π⟨F ∂_i Q⟩|` under the normalized weight `e^{−πQ}`.
pub fn schwinger_dyson_residual<T: Real>(loc: &Localization<T>, f: &Polynomial<T>, order: usize) -> Result<T> {
    let m = loc.dim();
    if f.dim() != m {
        return Err(Error::Dimension { expected: m, found: f.dim() });
    }
    if m > 3 {
        return Err(Error::Localization(format!("Schwinger–Dyson check supports m ≤ 3, got {m}")));
    }
    if f.degree() > 6 || 2 * order < f.degree() + 2 {
        return Err(Error::Config(format!(
            "polynomial degree {} too high for quadrature order {order}",
            f.degree()
        )));
    }
    let wm_inv: Vec<Vec<T>> = (0..m).map(|i| (0..m).map(|j| loc.wm_inv()[(i, j)].re).collect()).collect();
    let mut total = T::zero();
    for i in 0..m {
        let df = f.derivative(i);
        // symmetrized under u → −u so that odd integrands cancel exactly
        let sym = |g: &dyn Fn(&[T]) -> T, u: &[Complex<T>]| {
            let x: Vec<T> = u.iter().map(|z| z.re).collect();
            let y: Vec<T> = x.iter().map(|&v| -v).collect();
            re((g(&x) + g(&y)) * lit::<T>(0.5))
        };
        let lhs = flat_integrate(loc, |u: &[Complex<T>]| sym(&|x| df.eval(x), u), order)?;
        let rhs = flat_integrate(
            loc,
            |u: &[Complex<T>]| {
                sym(
                    &|x| {
                        let dq = lit::<T>(2.0) * (0..m).fold(T::zero(), |s, j| s + wm_inv[i][j] * x[j]);
                        f.eval(x) * dq
                    },
                    u,
                )
            },
            order,
        )?;
        total += (lhs - rhs * re(T::pi())).norm_sqr().sqrt();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn action(w: f64, lambda: f64) -> ActionFunctional<f64> {
        ActionFunctional::new(Localization::scalar(w).unwrap(), lambda).unwrap()
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    /// Trapezoid oracle for the tilted average in one dimension.
    fn tilted_mean(w: f64, lambda: f64, up: f64) -> (f64, f64) {
        let (lo, hi, n) = (-12.0, 12.0, 200_001);
        let h = (hi - lo) / (n - 1) as f64;
        let pi = std::f64::consts::PI;
        let (mut z, mut zu) = (0.0, 0.0);
        for k in 0..n {
            let u = lo + h * k as f64;
            let wt = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            let e = (-pi * (u * u / w + lambda * u.powi(4)) - 2.0 * pi * up * u).exp() * wt * h;
            z += e;
            zu += e * u;
        }
        (zu / z, z / w.sqrt())
    }

    #[test]
    fn quadratic_w_s() {
        let st = w_s_compute(action(1.0, 0.0), 0, &grid(-1.0, 1.0, 9)).unwrap();
        for (t, w) in st.uprime.iter().zip(&st.w_s) {
            assert!((w - st.w_s[4] - t * t).abs() < 1e-12);
        }
        assert!((st.norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn quartic_even_and_normalised() {
        let ev = WsEvaluator::new(action(1.0, 0.1)).unwrap();
        for t in [0.1, 0.4, 0.9] {
            assert!((ev.w_s(&[t]).unwrap() - ev.w_s(&[-t]).unwrap()).abs() < 1e-10);
        }
        let (_, n) = tilted_mean(1.0, 0.1, 0.0);
        let ws0 = ev.w_s(&[0.0]).unwrap();
        assert!((ws0 - n.ln() / std::f64::consts::PI).abs() < 1e-10);
        assert!(ev.mean_field(&[0.0]).unwrap()[0].abs() < 1e-10);
    }

    #[test]
    fn mean_field_matches_tilted_average() {
        for (w, lambda) in [(1.0, 0.0), (1.0, 0.1), (0.7, 0.3)] {
            let ev = WsEvaluator::new(action(w, lambda)).unwrap();
            for up in [-0.8, -0.2, 0.3, 1.1] {
                let got = ev.mean_field(&[up]).unwrap()[0];
                let (want, _) = tilted_mean(w, lambda, up);
                assert!((got - want).abs() < 1e-6, "w={w} λ={lambda} u'={up}: {got} vs {want}");
                if lambda == 0.0 {
                    assert!((got + w * up).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn quadratic_gamma_is_q() {
        let st = w_s_compute(action(1.0, 0.0), 0, &grid(-1.0, 1.0, 11)).unwrap();
        let table = gamma_legendre(&st).unwrap();
        let g0 = table.gamma[5];
        for (v, g) in table.v.iter().zip(&table.gamma) {
            assert!((g - g0 - v * v).abs() < 1e-6);
        }
        assert!((g0 + st.w_s[5]).abs() < 1e-14);
        assert!(quantum_eom_residual(&st).unwrap() < 1e-10);
    }

    #[test]
    fn quartic_legendre_round_trip() {
        let st = w_s_compute(action(1.0, 0.1), 0, &grid(-1.0, 1.0, 11)).unwrap();
        let table = gamma_legendre(&st).unwrap();
        for (k, &t) in st.uprime.iter().enumerate().skip(1).take(9) {
            let back = invert_mean_field(&st, &table, table.v[k]).unwrap();
            assert!((back - t).abs() < 1e-8);
            let ws = inverse_legendre(&st, &table, t).unwrap();
            assert!((ws - st.w_s[k]).abs() < 1e-6, "{ws} vs {}", st.w_s[k]);
        }
        assert!(quantum_eom_residual(&st).unwrap() < 1e-6);
        let shifted = w_s_compute(action(1.0, 0.1), 0, &grid(-0.7, 1.3, 13)).unwrap();
        let a = quantum_eom_residual(&st).unwrap();
        let b = quantum_eom_residual(&shifted).unwrap();
        assert!((a - b).abs() < 1e-8);
        for w in table.gamma.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
        }
    }

    #[test]
    fn non_monotone_mean_field_rejected() {
        let mut st = w_s_compute(action(1.0, 0.0), 0, &grid(-1.0, 1.0, 5)).unwrap();
        st.mean_field[2][0] = 10.0;
        assert!(matches!(gamma_legendre(&st), Err(Error::Legendre(_))));
    }

    #[test]
    fn mean_field_refuses_extrapolation() {
        let st = w_s_compute(action(1.0, 0.1), 0, &grid(-1.0, 1.0, 5)).unwrap();
        assert!(mean_field(&st, &[2.0]).is_err());
    }

    #[test]
    fn schwinger_dyson_examples() {
        let loc = Localization::scalar(1.0).unwrap();
        let one = Polynomial::constant(1, 1.0);
        assert_eq!(schwinger_dyson_residual(&loc, &one, 24).unwrap(), 0.0);
        for k in [1, 3] {
            let f = Polynomial::monomial(1, 0, k);
            assert!(schwinger_dyson_residual(&loc, &f, 24).unwrap() < 1e-10);
        }
        let wm = DMatrix::from_row_slice(2, 2, &[1.3, 0.4, 0.4, 0.8]);
        let loc2 = Localization::from_real_form(&wm).unwrap();
        let f = Polynomial::new(2, vec![(0.5, vec![2, 1]), (-1.0, vec![0, 3]), (2.0, vec![1, 0])]).unwrap();
        assert!(schwinger_dyson_residual(&loc2, &f, 24).unwrap() < 1e-10);
        let too_high = Polynomial::monomial(1, 0, 7);
        assert!(schwinger_dyson_residual(&loc, &too_high, 24).is_err());
    }

    #[test]
    fn pchip_is_monotone_and_interpolates() {
        let x: Vec<f64> = vec![0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = vec![0.0, 0.5, 3.0, 3.1];
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((p.eval(*a) - b).abs() < 1e-15);
        }
        let mut prev = -1.0;
        for k in 0..=300 {
            let v = p.eval(k as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }
}
