//! Free fields on foliated `d+1` lattices: vacuum overlaps, two-point
//! functions and Hermite-level expectation values.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::factorial;
use crate::integrators::{
    hermite_functional, integrate_analytic, integrate_localized_hermite, integrate_mc_many, IntegratorSpec,
    DEFAULT_QUADRATURE_ORDER,
};
use crate::linalg;
use crate::mc::{McConfig, McEstimate};
use crate::measures::DiracComb;
use crate::quadforms::{localize, Localization, QuadFormPair};
use crate::scalar::{cone, czero, lit, re, Complex, Real};
use crate::spaces::{build_grid, Boundary, DualVector, GridRef, GridSpec};

/// Spatial sites × interior time sites on `[t_a, t_b]`, Dirichlet in time.
///
/// Time is carried on the unit interval (spacing `1/(T+1)`) and the interval
/// length enters as the Gaussian parameter `s = t_b − t_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliatedLattice {
    pub spatial_sites: usize,
    pub spatial_spacing: f64,
    pub spatial_boundary: Boundary,
    pub time_sites: usize,
    pub t_a: f64,
    pub t_b: f64,
}

impl FoliatedLattice {
    /// `n × t` lattice on the unit square, Dirichlet in both directions.
    pub fn square(n: usize, t: usize) -> Self {
        FoliatedLattice {
            spatial_sites: n,
            spatial_spacing: 1.0 / (n as f64 + 1.0),
            spatial_boundary: Boundary::Dirichlet,
            time_sites: t,
            t_a: 0.0,
            t_b: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.spatial_sites == 0 || self.time_sites == 0 {
            return Err(Error::Config("lattice needs at least one spatial and one time site".into()));
        }
        if !(self.t_b > self.t_a) {
            return Err(Error::Domain(format!("t_b = {} must exceed t_a = {}", self.t_b, self.t_a)));
        }
        if !(self.spatial_spacing > 0.0) {
            return Err(Error::Config("spatial spacing must be positive".into()));
        }
        Ok(())
    }

    pub fn s(&self) -> f64 {
        self.t_b - self.t_a
    }

    pub fn sites(&self) -> usize {
        self.spatial_sites * self.time_sites
    }

    pub fn grid<T: Real>(&self) -> Result<GridRef<T>> {
        self.validate()?;
        let extra = usize::from(self.spatial_boundary == Boundary::Dirichlet) * 2;
        build_grid(&GridSpec {
            dims: vec![self.spatial_sites + extra, self.time_sites + 2],
            spacing: vec![self.spatial_spacing, 1.0 / (self.time_sites as f64 + 1.0)],
            boundary: vec![self.spatial_boundary, Boundary::Dirichlet],
        })
    }

    /// `A = −Δ_{d+1} + mass²`.
    pub fn form<T: Real>(&self, mass: f64) -> Result<Arc<QuadFormPair<T>>> {
        Ok(Arc::new(QuadFormPair::from_action_density(self.grid()?, lit(mass), T::one())?))
    }

    pub fn gaussian<T: Real>(&self, mass: f64) -> Result<IntegratorSpec<T>> {
        IntegratorSpec::gaussian_real(self.form(mass)?, lit(self.s()))
    }

    /// Grid index of spatial site `z` at interior time `t`.
    pub fn index(&self, z: usize, t: usize) -> usize {
        z * self.time_sites + t
    }
}

/// `⟨0|0⟩ = ∫ 𝒟ω_s` with the lattice log-determinant for reference.
#[derive(Debug, Clone, PartialEq)]
pub struct VacuumOverlap<T: Real> {
    pub value: Complex<T>,
    pub logdet_a: Complex<T>,
}

pub fn vacuum_overlap<T: Real>(lattice: &FoliatedLattice, mass: f64) -> Result<VacuumOverlap<T>> {
    let spec = lattice.gaussian::<T>(mass)?;
    let qf = spec.qf().expect("Gaussian spec carries a form").clone();
    let value = integrate_analytic(&spec, &DiracComb::delta_origin(qf.grid().clone()))?;
    Ok(VacuumOverlap {
        value,
        logdet_a: qf.logdet_a(),
    })
}

/// Unit dual vector at the lattice centre, the default 1-dim localization.
pub fn centre_row<T: Real>(lattice: &FoliatedLattice, grid: &GridRef<T>) -> DualVector<T> {
    let i = lattice.index(lattice.spatial_sites / 2, lattice.time_sites / 2);
    DualVector::unit(grid.clone(), i)
}

/// 1-dim localization of the lattice form (scaled by `s`) along `row`.
pub fn lattice_localization<T: Real>(lattice: &FoliatedLattice, mass: f64, row: Option<DualVector<T>>) -> Result<Localization<T>> {
    let qf = lattice.form::<T>(mass)?;
    let row = row.unwrap_or_else(|| centre_row(lattice, qf.grid()));
    localize(&qf, vec![row])?.scaled(re(lit(lattice.s())))
}

/// `∫ 𝒟ρ_n = δ_{n0}` on the default localization.
pub fn vacuum_overlap_hermite<T: Real>(lattice: &FoliatedLattice, mass: f64, n: usize) -> Result<Complex<T>> {
    let loc = lattice_localization::<T>(lattice, mass, None)?;
    integrate_localized_hermite(n, |_: &[Complex<T>]| cone(), &loc, None, DEFAULT_QUADRATURE_ORDER)
}

/// `⟨F_n⟩ = ∫ F 𝒟ρ_n` for a functional of the localized coordinate.
pub fn vev_hermite<T: Real>(n: usize, f: impl Fn(&[Complex<T>]) -> Complex<T>, loc: &Localization<T>) -> Result<Complex<T>> {
    if loc.dim() != 1 {
        return Err(Error::Localization(format!("expected a 1-dim localization, got {}", loc.dim())));
    }
    integrate_localized_hermite(n, f, loc, None, DEFAULT_QUADRATURE_ORDER)
}

/// `⟨F_n⟩` for `F = f_m`, the m-th Hermite functional of the localization.
pub fn vev_hermite_functional<T: Real>(n: usize, m: usize, loc: &Localization<T>) -> Result<Complex<T>> {
    vev_hermite(n, hermite_functional(m, loc.w_scalar()?), loc)
}

/// Closed form `(πw)^m n! δ_nm`.
pub fn vev_exact<T: Real>(n: usize, m: usize, w: Complex<T>) -> Complex<T> {
    if n != m {
        return czero();
    }
    (0..m).fold(cone::<T>(), |p, _| p * w * re(T::pi())) * re(factorial::<T>(n))
}

#[derive(Debug, Clone)]
pub struct TwoPointResult<T: Real> {
    pub pairs: Vec<(usize, usize)>,
    pub mc: Vec<McEstimate<T>>,
    pub exact: Vec<T>,
}

impl<T: Real> TwoPointResult<T> {
    /// Pairs whose estimate lies within `sigmas` standard errors of the exact value.
    pub fn covered(&self, sigmas: f64) -> usize {
        self.mc
            .iter()
            .zip(&self.exact)
            .filter(|(e, &x)| e.within(re(x), sigmas))
            .count()
    }
}

/// Exact two-point values `(s/2π)(A⁻¹)_{ij}`.
pub fn twopoint_exact<T: Real>(lattice: &FoliatedLattice, mass: f64, pairs: &[(usize, usize)]) -> Result<Vec<T>> {
    let qf = lattice.form::<T>(mass)?;
    let g = linalg::real_part(qf.g());
    let scale = lit::<T>(lattice.s()) / T::two_pi();
    pairs
        .iter()
        .map(|&(i, j)| {
            check_pair(qf.dim(), i, j)?;
            // symmetrized so that (i, j) and (j, i) agree bit for bit
            Ok((g[(i, j)] + g[(j, i)]) * lit::<T>(0.5) * scale)
        })
        .collect()
}

fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    if i >= n || j >= n {
        return Err(Error::Config(format!("site pair ({i}, {j}) outside a lattice of {n} sites")));
    }
    Ok(())
}

/// Monte Carlo `⟨b_i b_j⟩` under `𝒟ω_s` against the exact covariance.
pub fn free_field_twopoint<T: Real>(
    lattice: &FoliatedLattice,
    mass: f64,
    pairs: &[(usize, usize)],
    cfg: &McConfig,
) -> Result<TwoPointResult<T>> {
    let spec = lattice.gaussian::<T>(mass)?;
    let exact = twopoint_exact(lattice, mass, pairs)?;
    let mc = integrate_mc_many(
        &spec,
        pairs.len(),
        |b, out| {
            let v = b.values();
            for (o, &(i, j)) in out.iter_mut().zip(pairs) {
                *o = re(v[i].re * v[j].re);
            }
            Ok(())
        },
        cfg,
    )?;
    Ok(TwoPointResult {
        pairs: pairs.to_vec(),
        mc,
        exact,
    })
}

/// `count` distinct site pairs drawn from `seed`, at least `min_sep` apart in
/// lattice distance.
pub fn random_pairs(lattice: &FoliatedLattice, count: usize, min_sep: usize, seed: u64) -> Vec<(usize, usize)> {
    let n = lattice.sites();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(count);
    let dist = |a: usize, b: usize| {
        let (za, ta) = (a / lattice.time_sites, a % lattice.time_sites);
        let (zb, tb) = (b / lattice.time_sites, b % lattice.time_sites);
        za.abs_diff(zb) + ta.abs_diff(tb)
    };
    let mut tries = 0;
    while out.len() < count && tries < 100_000 {
        tries += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if dist(i, j) >= min_sep && !out.contains(&(i, j)) && !out.contains(&(j, i)) {
            out.push((i, j));
        }
    }
    out
}

/// `⟨1_P|F_μ|1_P⟩` analytically and by sampling the phase part.
pub fn vacuum_expectation<T: Real>(
    lattice: &FoliatedLattice,
    mass: f64,
    comb: &DiracComb<T>,
    cfg: &McConfig,
) -> Result<(Complex<T>, McEstimate<T>)> {
    let spec = lattice.gaussian::<T>(mass)?;
    let analytic = integrate_analytic(&spec, comb)?;
    let mut est = integrate_mc_many(
        &spec,
        1,
        |b, out| {
            out[0] = comb.iter().try_fold(czero::<T>(), |acc, (p, c)| {
                Ok::<_, Error>(acc + c * crate::scalar::phase(crate::spaces::pairing(p, b)?.re))
            })?;
            Ok(())
        },
        cfg,
    )?;
    Ok((analytic, est.remove(0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_is_normalised() {
        for n in [4, 8] {
            let lat = FoliatedLattice::square(n, n);
            let v = vacuum_overlap::<f64>(&lat, 1.0).unwrap();
            assert_eq!(v.value, Complex::new(1.0, 0.0));
            assert!(v.logdet_a.re.is_finite());
        }
        let lat = FoliatedLattice::square(4, 4);
        assert!((vacuum_overlap_hermite::<f64>(&lat, 1.0, 0).unwrap() - 1.0).norm() < 1e-12);
        assert!(vacuum_overlap_hermite::<f64>(&lat, 1.0, 2).unwrap().norm() < 1e-10);
    }

    #[test]
    fn vev_examples() {
        let lat = FoliatedLattice::square(4, 4);
        let loc = lattice_localization::<f64>(&lat, 1.0, None).unwrap();
        let w = loc.w_scalar().unwrap();
        assert!((vev_hermite(0, |_| Complex::new(1.0, 0.0), &loc).unwrap() - 1.0).norm() < 1e-12);
        let v11 = vev_hermite_functional(1, 1, &loc).unwrap();
        assert!((v11 - w * std::f64::consts::PI).norm() < 1e-12);
        assert!(vev_hermite_functional(1, 2, &loc).unwrap().norm() < 1e-10);
        assert_eq!(vev_exact(1, 1, w), w * std::f64::consts::PI);
    }

    #[test]
    fn single_site_variance() {
        let lat = FoliatedLattice {
            spatial_sites: 1,
            spatial_spacing: 1.0,
            spatial_boundary: Boundary::Free,
            time_sites: 1,
            t_a: 0.0,
            t_b: 1.0,
        };
        let qf = lat.form::<f64>(1.0).unwrap();
        let a = qf.a()[(0, 0)].re;
        let exact = twopoint_exact::<f64>(&lat, 1.0, &[(0, 0)]).unwrap();
        assert!((exact[0] - 1.0 / (std::f64::consts::TAU * a)).abs() < 1e-15);
    }

    #[test]
    fn exact_column_symmetric_and_linear_in_s() {
        let lat = FoliatedLattice::square(6, 6);
        let pairs = random_pairs(&lat, 10, 2, 1);
        assert_eq!(pairs.len(), 10);
        let swapped: Vec<_> = pairs.iter().map(|&(i, j)| (j, i)).collect();
        let a = twopoint_exact::<f64>(&lat, 1.0, &pairs).unwrap();
        let b = twopoint_exact::<f64>(&lat, 1.0, &swapped).unwrap();
        assert_eq!(a, b);
        let mut long = lat.clone();
        long.t_b = 2.0;
        let c = twopoint_exact::<f64>(&long, 1.0, &pairs).unwrap();
        for (x, y) in a.iter().zip(&c) {
            assert!((2.0 * x - y).abs() < 1e-12 * x.abs().max(1e-300));
        }
    }

    #[test]
    fn twopoint_monte_carlo() {
        let lat = FoliatedLattice::square(4, 4);
        let pairs = random_pairs(&lat, 5, 1, 3);
        let res = free_field_twopoint::<f64>(&lat, 1.0, &pairs, &McConfig::new(100_000, 5)).unwrap();
        assert!(res.covered(4.0) == pairs.len());
    }

    #[test]
    fn overlap_matches_determinant_formula() {
        let lat = FoliatedLattice::square(3, 3);
        let grid = lat.grid::<f64>().unwrap();
        let p = DualVector::from_real(grid.clone(), &(0..9).map(|i| 0.3 * (i as f64).sin()).collect::<Vec<_>>()).unwrap();
        let comb = DiracComb::new(grid, vec![p], vec![Complex::new(0.8, -0.2)]).unwrap();
        let (a, est) = vacuum_expectation(&lat, 1.0, &comb, &McConfig::new(50_000, 9)).unwrap();
        assert!(est.within(a, 3.5), "z = {}", est.z_score(a));
    }

    #[test]
    fn invalid_lattice() {
        let mut lat = FoliatedLattice::square(2, 2);
        lat.t_b = -1.0;
        assert!(vacuum_overlap::<f64>(&lat, 1.0).is_err());
    }
}
