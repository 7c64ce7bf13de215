//! Quadratic-form pairs `(Q, W)` with their Riesz maps, lattice actions and
//! localization to `ℝ^m`.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{cabs, lit, re, Complex, Real};
use crate::spaces::{Boundary, DomainGrid, DualVector, FieldVector, GridRef, Layout};

/// Nondegenerate form `Q(b) = bᵀ A b` on `𝔅` and its inverse form
/// `W(b') = b'ᵀ G b'` on `𝔅'`, with `A G = I`.
#[derive(Debug, Clone)]
pub struct QuadFormPair<T: Real> {
    grid: GridRef<T>,
    a: CMatrix<T>,
    g: CMatrix<T>,
    logdet_a: Complex<T>,
    /// Lower Cholesky factor of `G` when `A` is real.
    chol_g: Option<DMatrix<T>>,
}

impl<T: Real> QuadFormPair<T> {
    pub fn new(grid: GridRef<T>, a: CMatrix<T>) -> Result<Self> {
        let n = grid.len();
        check_len(n, a.nrows())?;
        check_len(n, a.ncols())?;
        let scale = linalg::max_abs(&a);
        if linalg::asymmetry(&a) > linalg::tol::<T>(1e-12, 64.0) * scale.max(T::one()) {
            return Err(Error::Degenerate("form matrix is not symmetric".into()));
        }
        linalg::check_real_positive(&a, "quadratic form")?;
        let g = linalg::invert(&a)?;
        let residual = linalg::max_abs(&(&a * &g - CMatrix::<T>::identity(n, n)));
        if residual > linalg::tol::<T>(1e-10, 1e4) {
            return Err(Error::Degenerate(format!(
                "inverse form inaccurate: |AG - I| = {residual}"
            )));
        }
        let logdet_a = linalg::logdet(&a)?;
        let chol_g = if a.iter().all(|z| z.im == T::zero()) {
            let gr = linalg::real_part(&g);
            let gr = (&gr + gr.transpose()) * lit::<T>(0.5);
            gr.cholesky().map(|c| c.l())
        } else {
            None
        };
        Ok(QuadFormPair {
            grid,
            a,
            g,
            logdet_a,
            chol_g,
        })
    }

    pub fn from_real(grid: GridRef<T>, a: &DMatrix<T>) -> Result<Self> {
        Self::new(grid, linalg::to_complex(a))
    }

    /// `Q(f) = ∫ stiffness·|∇f|² + mass²·f² dτ` discretized on `grid`.
    ///
    /// In folded coordinates this is `A = stiffness·(−Δ_h) + mass²·I` with the
    /// grid's boundary conditions built into the Laplacian.
    pub fn from_action_density(grid: GridRef<T>, mass: T, stiffness: T) -> Result<Self> {
        let lap = neg_laplacian(&grid);
        let n = grid.len();
        let a = lap * stiffness + DMatrix::<T>::identity(n, n) * (mass * mass);
        Self::from_real(grid, &a)
    }

    /// Block-diagonal form on the direct sum of the two grids.
    pub fn direct_sum(first: &Self, second: &Self) -> Result<Self> {
        let grid = DomainGrid::direct_sum(&[first.grid.clone(), second.grid.clone()]);
        let (n1, n2) = (first.dim(), second.dim());
        let mut a = CMatrix::<T>::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&first.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&second.a);
        Self::new(grid, a)
    }

    pub fn grid(&self) -> &GridRef<T> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn a(&self) -> &CMatrix<T> {
        &self.a
    }

    pub fn g(&self) -> &CMatrix<T> {
        &self.g
    }

    pub fn logdet_a(&self) -> Complex<T> {
        self.logdet_a
    }

    pub fn is_real(&self) -> bool {
        self.chol_g.is_some()
    }

    /// Lower factor `L` with `L Lᵀ = G`; present only for real forms.
    pub fn covariance_factor(&self) -> Option<&DMatrix<T>> {
        self.chol_g.as_ref()
    }

    fn check_field(&self, b: &FieldVector<T>) -> Result<()> {
        if DomainGrid::same(&self.grid, b.grid()) {
            Ok(())
        } else if b.len() != self.dim() {
            Err(Error::Dimension {
                expected: self.dim(),
                found: b.len(),
            })
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn check_dual(&self, bp: &DualVector<T>) -> Result<()> {
        if DomainGrid::same(&self.grid, bp.grid()) {
            Ok(())
        } else if bp.len() != self.dim() {
            Err(Error::Dimension {
                expected: self.dim(),
                found: bp.len(),
            })
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn q_eval(&self, b: &FieldVector<T>) -> Result<Complex<T>> {
        self.check_field(b)?;
        Ok(linalg::bilinear(b.values(), &self.a, b.values()))
    }

    pub fn w_eval(&self, bp: &DualVector<T>) -> Result<Complex<T>> {
        self.check_dual(bp)?;
        Ok(linalg::bilinear(bp.values(), &self.g, bp.values()))
    }

    /// `D b = A b`.
    pub fn riesz_d(&self, b: &FieldVector<T>) -> Result<DualVector<T>> {
        self.check_field(b)?;
        DualVector::new(self.grid.clone(), linalg::matvec(&self.a, b.values()))
    }

    /// `G b' = A⁻¹ b'`.
    pub fn riesz_g(&self, bp: &DualVector<T>) -> Result<FieldVector<T>> {
        self.check_dual(bp)?;
        FieldVector::new(self.grid.clone(), linalg::matvec(&self.g, bp.values()))
    }
}

/// Discrete `−Δ_h` in folded coordinates.
pub fn neg_laplacian<T: Real>(grid: &DomainGrid<T>) -> DMatrix<T> {
    let n = grid.len();
    let mut lap = DMatrix::<T>::zeros(n, n);
    match grid.layout() {
        Layout::Lattice(axes) => {
            let shape: Vec<usize> = axes.iter().map(|a| a.sites).collect();
            for i in 0..n {
                let c = grid.coords(i);
                for (k, axis) in axes.iter().enumerate() {
                    let inv_h2 = T::one() / (axis.spacing * axis.spacing);
                    let mut nb = Vec::with_capacity(2);
                    if c[k] > 0 {
                        let mut d = c.clone();
                        d[k] -= 1;
                        nb.push(grid.index(&d));
                    }
                    if c[k] + 1 < shape[k] {
                        let mut d = c.clone();
                        d[k] += 1;
                        nb.push(grid.index(&d));
                    }
                    let diag = match axis.boundary {
                        Boundary::Dirichlet => lit::<T>(2.0),
                        Boundary::Free => crate::scalar::count::<T>(nb.len()),
                    };
                    lap[(i, i)] += diag * inv_h2;
                    for j in nb {
                        lap[(i, j)] -= inv_h2;
                    }
                }
            }
        }
        Layout::Sum(factors) => {
            let mut off = 0;
            for f in factors {
                let block = neg_laplacian(f);
                let m = f.len();
                lap.view_mut((off, off), (m, m)).copy_from(&block);
                off += m;
            }
        }
    }
    lap
}

/// Finite-rank map `L: 𝔅 → ℝ^m`, `b ↦ (⟨b'_1,b⟩, …, ⟨b'_m,b⟩)`, with the
/// pushed-forward form `W_{ℝ^m}`.
#[derive(Debug, Clone)]
pub struct Localization<T: Real> {
    rows: Vec<DualVector<T>>,
    wm: CMatrix<T>,
    wm_inv: CMatrix<T>,
    logdet_wm: Complex<T>,
    /// `L Lᵀ = W_{ℝ^m}` (no conjugation).
    factor: CMatrix<T>,
}

/// Localizes `qf` through the dual vectors `rows`.
pub fn localize<T: Real>(qf: &QuadFormPair<T>, rows: Vec<DualVector<T>>) -> Result<Localization<T>> {
    if rows.is_empty() {
        return Err(Error::Localization("no localization rows".into()));
    }
    let m = rows.len();
    let n = qf.dim();
    let mut stacked = CMatrix::<T>::zeros(m, n);
    for (i, r) in rows.iter().enumerate() {
        qf.check_dual(r)?;
        for j in 0..n {
            stacked[(i, j)] = r.values()[j];
        }
    }
    if linalg::rank_complex(&stacked, linalg::tol::<T>(1e-12, 1e3)) < m {
        return Err(Error::Localization(format!(
            "{m} localization rows are linearly dependent"
        )));
    }
    let wm = &stacked * qf.g() * stacked.transpose();
    let wm = (&wm + wm.transpose()) * re(lit::<T>(0.5));
    let mut loc = Localization::from_form(wm)?;
    loc.rows = rows;
    Ok(loc)
}

impl<T: Real> Localization<T> {
    /// Localization given directly by its `m×m` form (no rows recorded).
    pub fn from_form(wm: CMatrix<T>) -> Result<Self> {
        if wm.nrows() != wm.ncols() || wm.nrows() == 0 {
            return Err(Error::Localization("form must be square and nonempty".into()));
        }
        linalg::check_real_positive(&wm, "localized form")
            .map_err(|e| Error::Localization(e.to_string()))?;
        let wm_inv = linalg::invert(&wm).map_err(|e| Error::Localization(e.to_string()))?;
        let logdet_wm = linalg::logdet(&wm)?;
        let factor = linalg::symmetric_cholesky(&wm).map_err(|e| Error::Localization(e.to_string()))?;
        Ok(Localization {
            rows: Vec::new(),
            wm,
            wm_inv,
            logdet_wm,
            factor,
        })
    }

    pub fn from_real_form(wm: &DMatrix<T>) -> Result<Self> {
        Self::from_form(linalg::to_complex(wm))
    }

    /// One-dimensional localization with `W_ℝ = w`.
    pub fn scalar(w: T) -> Result<Self> {
        Self::from_form(CMatrix::<T>::from_element(1, 1, re(w)))
    }

    /// Same rows with the form multiplied by `s` (the Gaussian `s` parameter).
    pub fn scaled(&self, s: Complex<T>) -> Result<Self> {
        let mut out = Self::from_form(&self.wm * s)?;
        out.rows = self.rows.clone();
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.wm.nrows()
    }

    pub fn rows(&self) -> &[DualVector<T>] {
        &self.rows
    }

    pub fn wm(&self) -> &CMatrix<T> {
        &self.wm
    }

    pub fn wm_inv(&self) -> &CMatrix<T> {
        &self.wm_inv
    }

    pub fn logdet_wm(&self) -> Complex<T> {
        self.logdet_wm
    }

    pub fn factor(&self) -> &CMatrix<T> {
        &self.factor
    }

    /// `Q_{ℝ^m}(u) = uᵀ W_{ℝ^m}⁻¹ u`.
    pub fn q_rm(&self, u: &[Complex<T>]) -> Complex<T> {
        linalg::bilinear(u, &self.wm_inv, u)
    }

    /// `W_{ℝ^m}(u') = u'ᵀ W_{ℝ^m} u'`.
    pub fn w_rm(&self, up: &[Complex<T>]) -> Complex<T> {
        linalg::bilinear(up, &self.wm, up)
    }

    /// `L b`.
    pub fn apply(&self, b: &FieldVector<T>) -> Result<Vec<Complex<T>>> {
        self.rows
            .iter()
            .map(|r| crate::spaces::pairing(r, b))
            .collect()
    }

    /// Scalar form for 1-dim localizations.
    pub fn w_scalar(&self) -> Result<Complex<T>> {
        if self.dim() != 1 {
            return Err(Error::Localization(format!(
                "expected a 1-dim localization, got m = {}",
                self.dim()
            )));
        }
        Ok(self.wm[(0, 0)])
    }
}

/// `|Q(b*)·W(b') − ⟨b',b*⟩²|` with `b* = G b'`: the 1-dim localization identity.
pub fn localization_identity_residual<T: Real>(qf: &QuadFormPair<T>, bp: &DualVector<T>) -> Result<T> {
    let b = qf.riesz_g(bp)?;
    let lhs = qf.q_eval(&b)? * qf.w_eval(bp)?;
    let p = crate::spaces::pairing(bp, &b)?;
    Ok(cabs(lhs - p * p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{build_grid, GridSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex<f64> {
        Complex::new(x, 0.0)
    }

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * 0.5
    }

    fn random_dual(g: &GridRef<f64>, rng: &mut ChaCha8Rng) -> DualVector<f64> {
        let v: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        DualVector::from_real(g.clone(), &v).unwrap()
    }

    #[test]
    fn single_site_mass_term() {
        let qf = QuadFormPair::<f64>::from_action_density(DomainGrid::free(1), 1.0, 0.0).unwrap();
        assert_eq!(qf.a()[(0, 0)], c(1.0));
        assert_eq!(qf.g()[(0, 0)], c(1.0));
    }

    #[test]
    fn dirichlet_line_is_tridiagonal() {
        let g = build_grid::<f64>(&GridSpec::uniform(&[5], 1.0, Boundary::Dirichlet)).unwrap();
        let qf = QuadFormPair::from_action_density(g, 0.0, 1.0).unwrap();
        let expect = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(qf.a()[(i, j)], c(expect[i][j]));
            }
        }
        // tridiag(-1,2,-1)^{-1} = [[3,2,1],[2,4,2],[1,2,3]]/4
        let inv = [[0.75, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 0.75]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((qf.g()[(i, j)] - c(inv[i][j])).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn massless_free_lattice_is_degenerate() {
        let g = build_grid::<f64>(&GridSpec::uniform(&[4, 4], 1.0, Boundary::Free)).unwrap();
        let e = QuadFormPair::from_action_density(g, 0.0, 1.0);
        assert!(matches!(e, Err(Error::Degenerate(_))));
    }

    #[test]
    fn inverse_is_accurate_on_lattices() {
        for (dims, bc, mass) in [
            (vec![6, 6], Boundary::Dirichlet, 0.0),
            (vec![8], Boundary::Free, 0.3),
            (vec![3, 4, 5], Boundary::Free, 1.0),
        ] {
            let g = build_grid::<f64>(&GridSpec::uniform(&dims, 0.7, bc)).unwrap();
            let qf = QuadFormPair::from_action_density(g, mass, 1.0).unwrap();
            let n = qf.dim();
            let r = linalg::max_abs(&(qf.a() * qf.g() - CMatrix::<f64>::identity(n, n)));
            assert!(r < 1e-10);
        }
    }

    #[test]
    fn scalar_q_and_w() {
        let g = DomainGrid::<f64>::free(1);
        let qf = QuadFormPair::from_real(g.clone(), &DMatrix::from_element(1, 1, 2.0)).unwrap();
        let b = FieldVector::from_real(g.clone(), &[3.0]).unwrap();
        let bp = DualVector::from_real(g, &[1.0]).unwrap();
        assert_eq!(qf.q_eval(&b).unwrap(), c(18.0));
        assert_eq!(qf.w_eval(&bp).unwrap(), c(0.5));
        let d = qf.riesz_d(&b).unwrap();
        assert_eq!(d.values(), &[c(6.0)]);
        assert_eq!(crate::spaces::pairing(&d, &b).unwrap(), c(18.0));
    }

    #[test]
    fn riesz_of_zero() {
        let g = DomainGrid::<f64>::free(4);
        let qf = QuadFormPair::from_real(g.clone(), &random_spd(4, 1)).unwrap();
        let d = qf.riesz_d(&FieldVector::zeros(g)).unwrap();
        assert!(d.values().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let qf = QuadFormPair::from_real(DomainGrid::<f64>::free(3), &random_spd(3, 2)).unwrap();
        let b = FieldVector::zeros(DomainGrid::free(4));
        assert!(matches!(qf.q_eval(&b), Err(Error::Dimension { .. })));
        assert!(matches!(
            QuadFormPair::from_real(DomainGrid::<f64>::free(3), &random_spd(2, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn w_equals_q_of_riesz_image() {
        let g = DomainGrid::<f64>::free(8);
        let qf = QuadFormPair::from_real(g.clone(), &random_spd(8, 5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let bp = random_dual(&g, &mut rng);
            let q = qf.q_eval(&qf.riesz_g(&bp).unwrap()).unwrap();
            assert!((q - qf.w_eval(&bp).unwrap()).norm() < 1e-10);
            let back = qf.riesz_d(&qf.riesz_g(&bp).unwrap()).unwrap();
            let err = back.add(&bp.scaled(c(-1.0))).unwrap().norm();
            assert!(err < 1e-10);
        }
    }

    #[test]
    fn scalar_localization() {
        let g = DomainGrid::<f64>::free(1);
        let qf = QuadFormPair::from_real(g.clone(), &DMatrix::from_element(1, 1, 2.0)).unwrap();
        let loc = localize(&qf, vec![DualVector::from_real(g, &[1.0]).unwrap()]).unwrap();
        assert_eq!(loc.wm()[(0, 0)], c(0.5));
        assert_eq!(loc.q_rm(&[c(3.0)]), c(18.0));
    }

    #[test]
    fn localization_matches_brute_force() {
        let g = DomainGrid::<f64>::free(8);
        let qf = QuadFormPair::from_real(g.clone(), &random_spd(8, 7)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows = vec![random_dual(&g, &mut rng), random_dual(&g, &mut rng)];
        let loc = localize(&qf, rows.clone()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                // brute force: explicit double sum
                let mut s = c(0.0);
                for k in 0..8 {
                    for l in 0..8 {
                        s += rows[i].values()[k] * qf.g()[(k, l)] * rows[j].values()[l];
                    }
                }
                assert!((loc.wm()[(i, j)] - s).norm() < 1e-12);
            }
        }
        let one = localize(&qf, vec![rows[0].clone()]).unwrap();
        assert!((one.wm()[(0, 0)] - qf.w_eval(&rows[0]).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn dependent_rows_are_rejected() {
        let g = DomainGrid::<f64>::free(4);
        let qf = QuadFormPair::from_real(g.clone(), &random_spd(4, 9)).unwrap();
        let r = DualVector::from_real(g, &[1.0, 2.0, 0.0, -1.0]).unwrap();
        let e = localize(&qf, vec![r.clone(), r.scaled(c(2.0))]);
        assert!(matches!(e, Err(Error::Localization(_))));
    }

    #[test]
    fn complex_form_is_accepted_when_real_part_positive() {
        let g = DomainGrid::<f64>::free(2);
        let mut a = linalg::to_complex(&random_spd(2, 3));
        a[(0, 1)] += Complex::new(0.0, 0.4);
        a[(1, 0)] += Complex::new(0.0, 0.4);
        let qf = QuadFormPair::new(g, a).unwrap();
        assert!(!qf.is_real());
        assert!(qf.covariance_factor().is_none());
    }

    #[test]
    fn direct_sum_is_block_diagonal() {
        let q1 = QuadFormPair::from_real(DomainGrid::<f64>::free(2), &random_spd(2, 1)).unwrap();
        let q2 = QuadFormPair::from_real(DomainGrid::<f64>::free(3), &random_spd(3, 2)).unwrap();
        let q = QuadFormPair::direct_sum(&q1, &q2).unwrap();
        assert_eq!(q.dim(), 5);
        assert_eq!(q.a()[(0, 4)], c(0.0));
        assert!((q.logdet_a() - q1.logdet_a() - q2.logdet_a()).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn riesz_consistency(seed in 0u64..1000, vals in prop::collection::vec(-2.0..2.0f64, 6)) {
            let g = DomainGrid::<f64>::free(6);
            let qf = QuadFormPair::from_real(g.clone(), &random_spd(6, seed)).unwrap();
            let b = FieldVector::from_real(g, &vals).unwrap();
            let q = qf.q_eval(&b).unwrap();
            let p = crate::spaces::pairing(&qf.riesz_d(&b).unwrap(), &b).unwrap();
            prop_assert!((p - q).norm() <= 1e-10 * (1.0 + q.norm()));
        }

        #[test]
        fn one_dim_localization_identity(seed in 0u64..1000, vals in prop::collection::vec(-2.0..2.0f64, 5)) {
            let g = DomainGrid::<f64>::free(5);
            let qf = QuadFormPair::from_real(g.clone(), &random_spd(5, seed)).unwrap();
            let bp = DualVector::from_real(g, &vals).unwrap();
            let w = qf.w_eval(&bp).unwrap().norm();
            let r = localization_identity_residual(&qf, &bp).unwrap();
            prop_assert!(r <= 1e-10 * (1.0 + w * w));
        }
    }
}
