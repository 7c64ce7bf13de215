//! Physicists' Hermite polynomials and Gauss–Hermite quadrature.
//!
//! `H₀ = 1`, `H₁(x) = 2x`, `H_{k+1} = 2x H_k − 2k H_{k−1}`, orthogonal under
//! `e^{−x²}` with `∫ H_n H_m e^{−x²} dx = 2ⁿ n! √π δ_nm`.

use num_traits::{FromPrimitive, Num};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Real};

/// `H_n(x)` by the three-term recurrence; works for real and complex `x`.
pub fn hermite<S>(n: usize, x: S) -> S
where
    S: Num + Copy + FromPrimitive,
{
    let two = S::from_f64(2.0).unwrap();
    let mut prev = S::one();
    if n == 0 {
        return prev;
    }
    let mut cur = two * x;
    for k in 1..n {
        let next = two * x * cur - S::from_usize(2 * k).unwrap() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Product `Π_i H_{α_i}(x_i)`.
pub fn hermite_multi<S>(alpha: &[usize], x: &[S]) -> S
where
    S: Num + Copy + FromPrimitive,
{
    alpha
        .iter()
        .zip(x)
        .fold(S::one(), |p, (&a, &xi)| p * hermite(a, xi))
}

/// `n!` as a real number.
pub fn factorial<T: Real>(n: usize) -> T {
    (1..=n).fold(T::one(), |p, k| p * count::<T>(k))
}

/// Gauss–Hermite nodes and weights in double-double precision, obtained by
/// polishing the `f64` rule with Newton steps carried out in `TwoFloat`.
pub fn gauss_hermite_dd(order: usize) -> Result<Vec<(TwoFloat, TwoFloat)>> {
    let base = GaussHermite::<f64>::new(order)?;
    let pim4 = dd_div(TwoFloat::from(1.0), twofloat::consts::PI.sqrt().sqrt());
    let two = TwoFloat::from(2.0);
    Ok(base
        .nodes()
        .iter()
        .map(|&x0| {
            let mut z = TwoFloat::from(x0);
            let mut pp = TwoFloat::from(1.0);
            for _ in 0..3 {
                let (p, d) = orthonormal_dd(order, z, pim4);
                pp = d;
                z -= dd_div(p, d);
            }
            if x0 != 0.0 {
                pp = orthonormal_dd(order, z, pim4).1;
            }
            (z, dd_div(two, pp * pp))
        })
        .collect())
}

/// Long division to full double-double precision (`TwoFloat`'s `/` keeps
/// only about `f64` accuracy).
pub fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

fn orthonormal_dd(n: usize, z: TwoFloat, pim4: TwoFloat) -> (TwoFloat, TwoFloat) {
    let mut p1 = pim4;
    let mut p2 = TwoFloat::from(0.0);
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = TwoFloat::from(j as f64);
        p1 = z * dd_div(TwoFloat::from(2.0), jf).sqrt() * p2 - dd_div(jf - 1.0, jf).sqrt() * p3;
    }
    (p1, TwoFloat::from(2.0 * n as f64).sqrt() * p2)
}

/// Gauss–Hermite rule for the weight `e^{−x²}` on `ℝ`.
#[derive(Debug, Clone)]
pub struct GaussHermite<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussHermite<T> {
    /// Nodes by Newton iteration on the orthonormal recurrence; exact for
    /// polynomials of degree `< 2·order`.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Config("quadrature order must be positive".into()));
        }
        let n = order;
        let nf = count::<T>(n);
        let pim4 = T::pi().powf(lit(-0.25));
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let half = (n + 1) / 2;
        let mut z = T::zero();
        for i in 0..half {
            z = match i {
                0 => (lit::<T>(2.0) * nf + T::one()).sqrt()
                    - lit::<T>(1.85575) * (lit::<T>(2.0) * nf + T::one()).powf(lit(-1.0 / 6.0)),
                1 => z - lit::<T>(1.14) * nf.powf(lit(0.426)) / z,
                2 => lit::<T>(1.86) * z - lit::<T>(0.86) * nodes[0],
                3 => lit::<T>(1.91) * z - lit::<T>(0.91) * nodes[1],
                _ => lit::<T>(2.0) * z - nodes[i - 2],
            };
            let mut pp = T::one();
            let mut converged = false;
            for _ in 0..200 {
                let (p, d) = orthonormal_with_derivative(n, z, pim4);
                pp = d;
                let dz = p / pp;
                z -= dz;
                if dz.abs() <= T::eps() * lit::<T>(4.0) * z.abs().max(T::one()) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Resolution(format!(
                    "Gauss-Hermite node {i} of order {n} did not converge"
                )));
            }
            let (_, d) = orthonormal_with_derivative(n, z, pim4);
            pp = if d.is_finite() { d } else { pp };
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            let w = lit::<T>(2.0) / (pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[half - 1] = T::zero();
        }
        // ascending order
        nodes.reverse();
        weights.reverse();
        Ok(GaussHermite { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Visits every point of the `m`-fold tensor-product rule.
    pub fn for_each_tensor_point<F>(&self, m: usize, mut visit: F)
    where
        F: FnMut(&[T], T),
    {
        let n = self.order();
        let mut idx = vec![0usize; m];
        let mut x = vec![T::zero(); m];
        loop {
            let mut w = T::one();
            for k in 0..m {
                x[k] = self.nodes[idx[k]];
                w *= self.weights[idx[k]];
            }
            visit(&x, w);
            let mut k = m;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < n {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

/// Orthonormal Hermite function value `p_n(z)` (without the Gaussian) and its
/// derivative with respect to `z`.
fn orthonormal_with_derivative<T: Real>(n: usize, z: T, pim4: T) -> (T, T) {
    let mut p1 = pim4;
    let mut p2 = T::zero();
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = count::<T>(j + 1);
        p1 = z * (lit::<T>(2.0) / jf).sqrt() * p2 - (count::<T>(j) / jf).sqrt() * p3;
    }
    let d = (lit::<T>(2.0) * count::<T>(n)).sqrt() * p2;
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Complex;

    #[test]
    fn low_order_polynomials() {
        let x = 0.7_f64;
        assert_eq!(hermite(0, x), 1.0);
        assert_eq!(hermite(1, x), 2.0 * x);
        assert!((hermite(2, x) - (4.0 * x * x - 2.0)).abs() < 1e-15);
        assert!((hermite(3, x) - (8.0 * x.powi(3) - 12.0 * x)).abs() < 1e-14);
        assert!((hermite(4, x) - (16.0 * x.powi(4) - 48.0 * x * x + 12.0)).abs() < 1e-13);
    }

    #[test]
    fn complex_argument() {
        let z = Complex::new(0.0, 1.0_f64);
        // H_2(i) = 4i² − 2 = −6
        assert!((hermite(2, z) - Complex::new(-6.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rule_integrates_moments() {
        let rule = GaussHermite::<f64>::new(20).unwrap();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let m0: f64 = rule.weights().iter().sum();
        assert!((m0 - sqrt_pi).abs() < 1e-14);
        let m2: f64 = rule.nodes().iter().zip(rule.weights()).map(|(x, w)| w * x * x).sum();
        assert!((m2 - sqrt_pi / 2.0).abs() < 1e-14);
        let m8: f64 = rule.nodes().iter().zip(rule.weights()).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m8 - 105.0 / 16.0 * sqrt_pi).abs() < 1e-12);
        assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn rule_reproduces_hermite_orthogonality() {
        let rule = GaussHermite::<f64>::new(16).unwrap();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        for n in 0..7 {
            for m in 0..7 {
                let s: f64 = rule
                    .nodes()
                    .iter()
                    .zip(rule.weights())
                    .map(|(&x, &w)| w * hermite(n, x) * hermite(m, x))
                    .sum();
                let expect = if n == m {
                    2f64.powi(n as i32) * factorial::<f64>(n) * sqrt_pi
                } else {
                    0.0
                };
                assert!((s - expect).abs() < 1e-9 * (1.0 + expect), "n={n} m={m} s={s}");
            }
        }
    }

    #[test]
    fn high_orders_converge() {
        for order in [1, 2, 3, 7, 40, 64, 100] {
            let rule = GaussHermite::<f64>::new(order).unwrap();
            let m0: f64 = rule.weights().iter().sum();
            assert!((m0 - std::f64::consts::PI.sqrt()).abs() < 1e-12, "order {order}");
        }
    }

    #[test]
    fn single_precision_rule() {
        let rule = GaussHermite::<f32>::new(10).unwrap();
        let m0: f32 = rule.weights().iter().sum();
        assert!((m0 - std::f32::consts::PI.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn tensor_rule_weights_sum() {
        let rule = GaussHermite::<f64>::new(5).unwrap();
        let mut total = 0.0;
        let mut points = 0;
        rule.for_each_tensor_point(3, |_, w| {
            total += w;
            points += 1;
        });
        assert_eq!(points, 125);
        assert!((total - std::f64::consts::PI.powf(1.5)).abs() < 1e-12);
    }
}
