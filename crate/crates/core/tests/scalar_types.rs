use funcint::integrators::{integrate_analytic, integrate_localized_hermite};
use funcint::scalar::Complex;
use funcint::spaces::Boundary;
use funcint::{DiracCombF32, DomainGridF32, DualVectorF32, IntegratorSpecF32, LocalizationF32, QuadFormPairF32};
use funcint::{DiracCombF64, DomainGridF64, DualVectorF64, IntegratorSpecF64, QuadFormPairF64};
use std::sync::Arc;

#[test]
fn f32_and_f64_aliases_agree_to_single_precision() {
    let g32 = DomainGridF32::line(4, 0.2, Boundary::Dirichlet);
    let g64 = DomainGridF64::line(4, 0.2, Boundary::Dirichlet);
    let q32 = Arc::new(QuadFormPairF32::from_action_density(g32.clone(), 1.0, 0.3).unwrap());
    let q64 = Arc::new(QuadFormPairF64::from_action_density(g64.clone(), 1.0, 0.3).unwrap());
    let raw = [0.3, -0.2, 0.5, 0.1];
    let p32 = DualVectorF32::from_real(g32.clone(), &raw.map(|x| x as f32)).unwrap();
    let p64 = DualVectorF64::from_real(g64.clone(), &raw).unwrap();
    let c32 = DiracCombF32::point(p32, Complex::new(1.0, 0.0));
    let c64 = DiracCombF64::point(p64, Complex::new(1.0, 0.0));
    let v32 = integrate_analytic(&IntegratorSpecF32::gaussian_real(q32, 1.0).unwrap(), &c32).unwrap();
    let v64 = integrate_analytic(&IntegratorSpecF64::gaussian_real(q64, 1.0).unwrap(), &c64).unwrap();
    assert!((v32.re as f64 - v64.re).abs() < 1e-5);
}

#[test]
fn f32_hermite_normalization() {
    let loc = LocalizationF32::scalar(1.5).unwrap();
    for n in 0..=4 {
        let v = integrate_localized_hermite(n, |_: &[Complex<f32>]| Complex::new(1.0f32, 0.0), &loc, None, 16).unwrap();
        let target = if n == 0 { 1.0 } else { 0.0 };
        assert!((v.re - target).abs() < 1e-4, "n = {n}: {v}");
    }
}
