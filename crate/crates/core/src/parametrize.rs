//! Parametrizations `P: 𝔅 → 𝔉(𝕄)` defined by differential systems.
//!
//! Paths develop along `dp = Y(p) dt + X_α(p) db^α` with implicit-midpoint
//! (Stratonovich) steps, fields develop pointwise along the time axis, and
//! integrals pull back through the parametrization. Linear changes of
//! variable are checked analytically on the Gaussian engine.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{z_eval, GaussianSampler, IntegratorKind, IntegratorSpec};
use crate::linalg;
use crate::mc::{self, McConfig, McEstimate};
use crate::measures::DiracComb;
use crate::quadforms::QuadFormPair;
use crate::scalar::{count, cscale, lit, phase, re, Complex, Real};
use crate::spaces::{Boundary, DualVector, FieldVector, GridRef, Layout};

pub type FieldFn<T> = Arc<dyn Fn(&DVector<T>) -> DVector<T> + Send + Sync>;

/// A vector field on `ℝ^M`.
#[derive(Clone)]
pub enum VectorField<T: Real> {
    /// Constant field.
    Flat(DVector<T>),
    /// `ω·(−p₂, p₁, 0, …)`.
    Rotation { omega: T },
    /// `ω·(−p₂, p₁, 0, …) + κ·p`.
    ScaledRotation { omega: T, rate: T },
    /// `A p + c`.
    Affine { a: DMatrix<T>, c: DVector<T> },
    Custom { dim: usize, f: FieldFn<T> },
}

impl<T: Real> fmt::Debug for VectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorField::Flat(v) => write!(f, "Flat({:?})", v.as_slice()),
            VectorField::Rotation { omega } => write!(f, "Rotation({omega})"),
            VectorField::ScaledRotation { omega, rate } => write!(f, "ScaledRotation({omega}, {rate})"),
            VectorField::Affine { .. } => write!(f, "Affine"),
            VectorField::Custom { dim, .. } => write!(f, "Custom(dim {dim})"),
        }
    }
}

impl<T: Real> VectorField<T> {
    /// Builds a catalog field by name: `flat` (direction), `rotation` (ω),
    /// `scaled-rotation` (ω, κ) or `affine` (row-major `A` then `c`).
    pub fn from_catalog(name: &str, params: &[f64], dim: usize) -> Result<Self> {
        let want = |k: usize| -> Result<()> {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "vector field '{name}' needs {k} parameters, got {}",
                    params.len()
                )))
            }
        };
        let v = |xs: &[f64]| DVector::from_iterator(xs.len(), xs.iter().map(|&x| lit::<T>(x)));
        match name {
            "flat" => {
                want(dim)?;
                Ok(VectorField::Flat(v(params)))
            }
            "rotation" => {
                want(1)?;
                Self::need_plane(dim)?;
                Ok(VectorField::Rotation { omega: lit(params[0]) })
            }
            "scaled-rotation" => {
                want(2)?;
                Self::need_plane(dim)?;
                Ok(VectorField::ScaledRotation {
                    omega: lit(params[0]),
                    rate: lit(params[1]),
                })
            }
            "affine" => {
                want(dim * dim + dim)?;
                let a = DMatrix::from_row_iterator(dim, dim, params[..dim * dim].iter().map(|&x| lit::<T>(x)));
                Ok(VectorField::Affine { a, c: v(&params[dim * dim..]) })
            }
            _ => Err(Error::Config(format!("unknown vector field '{name}'"))),
        }
    }

    fn need_plane(dim: usize) -> Result<()> {
        if dim < 2 {
            return Err(Error::Config("rotation fields need a target of dimension ≥ 2".into()));
        }
        Ok(())
    }

    pub fn custom(dim: usize, f: impl Fn(&DVector<T>) -> DVector<T> + Send + Sync + 'static) -> Self {
        VectorField::Custom { dim, f: Arc::new(f) }
    }

    /// Target dimension when the field fixes one.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            VectorField::Flat(v) => Some(v.len()),
            VectorField::Affine { c, .. } => Some(c.len()),
            VectorField::Custom { dim, .. } => Some(*dim),
            _ => None,
        }
    }

    pub fn eval(&self, p: &DVector<T>) -> DVector<T> {
        let rot = |omega: T| {
            let mut out = DVector::zeros(p.len());
            out[0] = -omega * p[1];
            out[1] = omega * p[0];
            out
        };
        match self {
            VectorField::Flat(v) => v.clone(),
            VectorField::Rotation { omega } => rot(*omega),
            VectorField::ScaledRotation { omega, rate } => rot(*omega) + p * *rate,
            VectorField::Affine { a, c } => a * p + c,
            VectorField::Custom { f, .. } => f(p),
        }
    }
}

/// Driving fields `X_(α)`, drift `Y` and start point `m₀`.
#[derive(Debug, Clone)]
pub struct VectorFieldSet<T: Real> {
    x: Vec<VectorField<T>>,
    y: Option<VectorField<T>>,
    m0: DVector<T>,
    bound: T,
    lipschitz: T,
}

impl<T: Real> VectorFieldSet<T> {
    pub const LIPSCHITZ_PROBES: usize = 64;

    pub fn new(x: Vec<VectorField<T>>, y: Option<VectorField<T>>, m0: DVector<T>) -> Result<Self> {
        let dim = m0.len();
        for f in x.iter().chain(y.iter()) {
            if let Some(d) = f.fixed_dim() {
                if d != dim {
                    return Err(Error::Dimension { expected: dim, found: d });
                }
            }
            if matches!(f, VectorField::Rotation { .. } | VectorField::ScaledRotation { .. }) && dim < 2 {
                return Err(Error::Config("rotation fields need a target of dimension ≥ 2".into()));
            }
        }
        let mut set = VectorFieldSet {
            x,
            y,
            m0,
            bound: lit(1e8),
            lipschitz: T::zero(),
        };
        set.validate()?;
        Ok(set)
    }

    /// `X_α = e_α` on `ℝ^n`, no drift, start at the origin.
    pub fn identity(n: usize) -> Result<Self> {
        let x = (0..n).map(|i| VectorField::Flat(DVector::from_fn(n, |j, _| if i == j { T::one() } else { T::zero() }))).collect();
        Self::new(x, None, DVector::zeros(n))
    }

    /// Single rotation field on `ℝ²` started at `(1, 0)`.
    pub fn circle() -> Result<Self> {
        Self::new(
            vec![VectorField::Rotation { omega: T::one() }],
            None,
            DVector::from_vec(vec![T::one(), T::zero()]),
        )
    }

    pub fn with_bound(mut self, bound: T) -> Self {
        self.bound = bound;
        self
    }

    pub fn with_start(&self, m0: DVector<T>) -> Result<Self> {
        if m0.len() != self.m0.len() {
            return Err(Error::Dimension { expected: self.m0.len(), found: m0.len() });
        }
        let mut out = self.clone();
        out.m0 = m0;
        Ok(out)
    }

    pub fn drivers(&self) -> usize {
        self.x.len()
    }

    pub fn target_dim(&self) -> usize {
        self.m0.len()
    }

    pub fn m0(&self) -> &DVector<T> {
        &self.m0
    }

    /// Largest difference quotient seen while validating.
    pub fn lipschitz_estimate(&self) -> T {
        self.lipschitz
    }

    /// Columns `X_α(p)` as an `M × n` matrix.
    pub fn x_matrix(&self, p: &DVector<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(p.len(), self.x.len());
        for (j, f) in self.x.iter().enumerate() {
            out.set_column(j, &f.eval(p));
        }
        out
    }

    pub fn rank_at(&self, p: &DVector<T>) -> usize {
        if self.x.is_empty() {
            return 0;
        }
        linalg::rank(&self.x_matrix(p), lit(1e-10))
    }

    fn drift(&self, p: &DVector<T>) -> DVector<T> {
        self.y.as_ref().map_or_else(|| DVector::zeros(p.len()), |f| f.eval(p))
    }

    fn validate(&mut self) -> Result<()> {
        let n = self.x.len();
        if n > 0 && self.rank_at(&self.m0) < n {
            return Err(Error::Config(format!(
                "driving fields are linearly dependent at m0 (rank {} < {n})",
                self.rank_at(&self.m0)
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dim = self.m0.len();
        let mut worst = T::zero();
        for _ in 0..Self::LIPSCHITZ_PROBES {
            let p = &self.m0 + DVector::from_fn(dim, |_, _| lit::<T>(rng.random_range(-1.0..1.0)));
            let q = &self.m0 + DVector::from_fn(dim, |_, _| lit::<T>(rng.random_range(-1.0..1.0)));
            let d = (&p - &q).norm();
            if d == T::zero() {
                continue;
            }
            for f in self.x.iter().chain(self.y.iter()) {
                let l = (f.eval(&p) - f.eval(&q)).norm() / d;
                if !l.is_finite() {
                    return Err(Error::Config("vector field is not Lipschitz near m0".into()));
                }
                worst = worst.max(l);
            }
        }
        self.lipschitz = worst;
        Ok(())
    }
}

/// Sampled driver `t_i ↦ b(t_i) ∈ ℝ^n` on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Driver<T: Real> {
    pub times: Vec<T>,
    pub values: Vec<DVector<T>>,
}

impl<T: Real> Driver<T> {
    pub fn new(times: Vec<T>, values: Vec<DVector<T>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension { expected: times.len(), found: values.len() });
        }
        if times.len() < 2 {
            return Err(Error::Config("driver needs at least two samples".into()));
        }
        let h = times[1] - times[0];
        let scale = times[times.len() - 1].abs().max(T::one());
        for w in times.windows(2) {
            if !(w[1] > w[0]) || (w[1] - w[0] - h).abs() > lit::<T>(1e-9) * scale {
                return Err(Error::Config("driver must be sampled on a uniform increasing grid".into()));
            }
        }
        let n = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != n) {
            return Err(Error::Dimension { expected: n, found: v.len() });
        }
        Ok(Driver { times, values })
    }

    /// `b(t) = slope·t` sampled at `samples` points of `[t0, t1]`.
    pub fn linear(t0: T, t1: T, samples: usize, slope: &[T]) -> Result<Self> {
        let k = samples.max(2);
        let times: Vec<T> = (0..k).map(|i| t0 + (t1 - t0) * count::<T>(i) / count::<T>(k - 1)).collect();
        let values = times
            .iter()
            .map(|&t| DVector::from_iterator(slope.len(), slope.iter().map(|&c| c * t)))
            .collect();
        Self::new(times, values)
    }

    pub fn samples(&self) -> usize {
        self.times.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }
}

/// Developed path `p(t)` on the integration grid.
#[derive(Debug, Clone)]
pub struct ParamSolution<T: Real> {
    pub times: Vec<T>,
    pub points: Vec<DVector<T>>,
    pub driver: Driver<T>,
    /// Smallest rank of `X` met along the path; below the driver count the
    /// parametrization is irregular there.
    pub min_rank: usize,
}

impl<T: Real> ParamSolution<T> {
    pub fn end(&self) -> &DVector<T> {
        self.points.last().expect("solution has at least one point")
    }

    /// Points at the driver sample times.
    pub fn at_driver_times(&self) -> Vec<DVector<T>> {
        let stride = (self.points.len() - 1) / (self.driver.samples() - 1);
        self.points.iter().step_by(stride).cloned().collect()
    }
}

const MAX_BISECTIONS: usize = 16;
const MAX_FIXED_POINT: usize = 60;

/// Integrates `dp = Y(p) dt + X(p) db` from `m₀` with implicit-midpoint steps;
/// each driver interval is split into `ceil(steps / intervals)` equal steps of
/// the linearly interpolated driver.
pub fn develop_path<T: Real>(vfs: &VectorFieldSet<T>, driver: &Driver<T>, steps: usize) -> Result<ParamSolution<T>> {
    if driver.dim() != vfs.drivers() {
        return Err(Error::Dimension { expected: vfs.drivers(), found: driver.dim() });
    }
    let intervals = driver.samples() - 1;
    if steps < intervals {
        return Err(Error::Config(format!(
            "{steps} steps cannot resolve {intervals} driver intervals"
        )));
    }
    let sub = steps.div_ceil(intervals);
    let mut times = Vec::with_capacity(intervals * sub + 1);
    let mut points = Vec::with_capacity(intervals * sub + 1);
    let mut p = vfs.m0.clone();
    let mut min_rank = vfs.rank_at(&p);
    times.push(driver.times[0]);
    points.push(p.clone());
    for i in 0..intervals {
        let dt = (driver.times[i + 1] - driver.times[i]) / count::<T>(sub);
        let db = (&driver.values[i + 1] - &driver.values[i]) / count::<T>(sub);
        for k in 0..sub {
            p = midpoint_step(vfs, &p, &db, dt, 0)?;
            if !(p.norm() <= vfs.bound) {
                return Err(Error::Development(format!(
                    "path left the bound {} at t = {}",
                    vfs.bound,
                    driver.times[i] + dt * count::<T>(k + 1)
                )));
            }
            min_rank = min_rank.min(vfs.rank_at(&p));
            times.push(driver.times[i] + dt * count::<T>(k + 1));
            points.push(p.clone());
        }
    }
    Ok(ParamSolution {
        times,
        points,
        driver: driver.clone(),
        min_rank,
    })
}

fn midpoint_step<T: Real>(vfs: &VectorFieldSet<T>, p: &DVector<T>, db: &DVector<T>, dt: T, depth: usize) -> Result<DVector<T>> {
    let incr = |q: &DVector<T>| vfs.x_matrix(q) * db + vfs.drift(q) * dt;
    let mut next = p + incr(p);
    let tol = lit::<T>(4.0) * T::eps() * p.norm().max(T::one());
    for _ in 0..MAX_FIXED_POINT {
        let mid = (p + &next) * lit::<T>(0.5);
        let cand = p + incr(&mid);
        let change = (&cand - &next).norm();
        next = cand;
        if change <= tol {
            return Ok(next);
        }
        if !change.is_finite() {
            break;
        }
    }
    if depth >= MAX_BISECTIONS {
        return Err(Error::Development(
            "implicit midpoint iteration did not converge".into(),
        ));
    }
    let half_db = db * lit::<T>(0.5);
    let half_dt = dt * lit::<T>(0.5);
    let q = midpoint_step(vfs, p, &half_db, half_dt, depth + 1)?;
    midpoint_step(vfs, &q, &half_db, half_dt, depth + 1)
}

/// Time grid and spacing of a one-axis (time) grid.
fn time_axis<T: Real>(grid: &GridRef<T>) -> Result<(usize, T, Boundary)> {
    match grid.layout() {
        Layout::Lattice(axes) if !axes.is_empty() => {
            let a = axes.last().expect("non-empty");
            Ok((a.sites, a.spacing, a.boundary))
        }
        _ => Err(Error::Config("parametrization needs a lattice grid with a time axis".into())),
    }
}

/// Driver built from `n` sampled fields on a time grid: `b(t_a) = 0` is
/// prepended and, for Dirichlet time, `b(t_b) = 0` appended.
pub fn driver_from_fields<T: Real>(fields: &[FieldVector<T>]) -> Result<Driver<T>> {
    let grid = fields
        .first()
        .ok_or_else(|| Error::Config("no driver components".into()))?
        .grid()
        .clone();
    let (sites, h, bc) = time_axis(&grid)?;
    if grid.axes().map_or(0, |a| a.len()) != 1 {
        return Err(Error::Config("path drivers live on a one-axis time grid".into()));
    }
    let raw: Vec<Vec<Complex<T>>> = fields.iter().map(|f| f.to_raw()).collect();
    let n = fields.len();
    let total = sites + 1 + usize::from(bc == Boundary::Dirichlet);
    let mut values = Vec::with_capacity(total);
    values.push(DVector::zeros(n));
    for i in 0..sites {
        values.push(DVector::from_fn(n, |a, _| raw[a][i].re));
    }
    if bc == Boundary::Dirichlet {
        values.push(DVector::zeros(n));
    }
    let times = (0..total).map(|i| h * count::<T>(i)).collect();
    Driver::new(times, values)
}

/// Result of a pullback integral; samples whose development failed contribute
/// zero and are counted.
#[derive(Debug, Clone)]
pub struct PullbackEstimate<T: Real> {
    pub estimate: McEstimate<T>,
    pub failures: u64,
}

/// `∫ F(m₀·Σ(b)) 𝒟ω_s(b)` by sampling drivers and developing each path.
pub fn pullback_integrate<T, F>(
    vfs: &VectorFieldSet<T>,
    spec: &IntegratorSpec<T>,
    f: F,
    steps: usize,
    cfg: &McConfig,
) -> Result<PullbackEstimate<T>>
where
    T: Real,
    F: Fn(&ParamSolution<T>) -> Complex<T> + Sync + Send,
{
    let sampler = GaussianSampler::new(spec)?;
    let n = vfs.drivers();
    let dim = sampler.dim();
    let est = mc::estimate_many(
        cfg,
        2,
        || (vec![sampler.zero_field(); n], vec![T::zero(); dim]),
        |(fields, noise), rng, _, out| {
            for field in fields.iter_mut() {
                let mut vals = vec![Complex::<T>::default(); dim];
                sampler.draw(rng, noise, &mut vals);
                *field = FieldVector::new(field.grid().clone(), vals)?;
            }
            let driver = driver_from_fields(fields)?;
            match develop_path(vfs, &driver, steps.max(driver.samples() - 1)) {
                Ok(sol) => {
                    out[0] = f(&sol);
                    out[1] = re(T::zero());
                }
                Err(_) => {
                    out[0] = re(T::zero());
                    out[1] = re(T::one());
                }
            }
            Ok(())
        },
    )?;
    let failures = (est[1].mean.re * count::<T>(cfg.samples as usize)).round();
    Ok(PullbackEstimate {
        estimate: est[0].clone(),
        failures: crate::scalar::to_f64(failures) as u64,
    })
}

/// Field values `f(z, t) ∈ ℝ^M` on a `(d+1)`-grid, indexed like the grid.
#[derive(Debug, Clone)]
pub struct FieldValues<T: Real> {
    pub grid: GridRef<T>,
    pub values: Vec<DVector<T>>,
}

/// Develops each spatial site along the time axis (the last grid axis):
/// `d f = X(f) db(z, ·)` from `f(z, t_a) = f_a(z)`.
pub fn field_parametrize<T: Real>(
    vfs: &VectorFieldSet<T>,
    f_a: &[DVector<T>],
    b: &FieldVector<T>,
    steps_per_interval: usize,
) -> Result<FieldValues<T>> {
    if vfs.drivers() != 1 {
        return Err(Error::Config("field parametrization uses a single driving field".into()));
    }
    let grid = b.grid().clone();
    let (tsites, h, _) = time_axis(&grid)?;
    let spatial = grid.len() / tsites;
    if f_a.len() != spatial {
        return Err(Error::Dimension { expected: spatial, found: f_a.len() });
    }
    let raw = b.to_raw();
    let times: Vec<T> = (0..=tsites).map(|i| h * count::<T>(i)).collect();
    let per_site: Vec<Vec<DVector<T>>> = (0..spatial)
        .into_par_iter()
        .map(|z| {
            let mut values = vec![DVector::zeros(1)];
            values.extend((0..tsites).map(|t| DVector::from_element(1, raw[z * tsites + t].re)));
            let driver = Driver::new(times.clone(), values)?;
            let sol = develop_path(&vfs.with_start(f_a[z].clone())?, &driver, tsites * steps_per_interval.max(1))?;
            Ok(sol.at_driver_times().into_iter().skip(1).collect())
        })
        .collect::<Result<_>>()?;
    Ok(FieldValues {
        grid,
        values: per_site.into_iter().flatten().collect(),
    })
}

/// Linear interpolant in time between boundary data `f_a` and `f_b` on the
/// interior sites of a Dirichlet time axis.
pub fn boundary_interpolant<T: Real>(grid: &GridRef<T>, f_a: &[T], f_b: &[T]) -> Result<FieldVector<T>> {
    let (tsites, _, bc) = time_axis(grid)?;
    if bc != Boundary::Dirichlet {
        return Err(Error::Config("boundary data needs a Dirichlet time axis".into()));
    }
    let spatial = grid.len() / tsites;
    if f_a.len() != spatial || f_b.len() != spatial {
        return Err(Error::Dimension { expected: spatial, found: f_a.len().min(f_b.len()) });
    }
    let raw: Vec<Complex<T>> = (0..grid.len())
        .map(|i| {
            let (z, t) = (i / tsites, i % tsites);
            let theta = count::<T>(t + 1) / count::<T>(tsites + 1);
            re(f_a[z] * (T::one() - theta) + f_b[z] * theta)
        })
        .collect();
    FieldVector::from_raw(grid.clone(), &raw)
}

/// `f = f_cl + b`: the fluctuation `b` (zero at both time ends) shifted by the
/// classical interpolant, via identity development.
pub fn with_boundary<T: Real>(b: &FieldVector<T>, f_a: &[T], f_b: &[T]) -> Result<FieldValues<T>> {
    let grid = b.grid().clone();
    let (tsites, _, _) = time_axis(&grid)?;
    let interp = boundary_interpolant(&grid, f_a, f_b)?.to_raw();
    let raw: Vec<Complex<T>> = b
        .to_raw()
        .iter()
        .zip(&interp)
        .enumerate()
        .map(|(i, (x, c))| x + c - re(f_a[i / tsites]))
        .collect();
    let driver = FieldVector::from_raw(grid, &raw)?;
    let start: Vec<DVector<T>> = f_a.iter().map(|&v| DVector::from_element(1, v)).collect();
    field_parametrize(&VectorFieldSet::identity(1)?, &start, &driver, 1)
}

/// Invertible `x ↦ M x + b₀` on `𝔅` with the transpose `R = Mᵀ` acting on `𝔅′`.
#[derive(Debug, Clone)]
pub struct LinearMapPair<T: Real> {
    m: DMatrix<T>,
    r: DMatrix<T>,
    shift: DVector<T>,
    logdet_m: T,
    sign_m: T,
}

impl<T: Real> LinearMapPair<T> {
    pub fn new(m: DMatrix<T>) -> Result<Self> {
        let n = m.nrows();
        Self::affine(m, DVector::zeros(n))
    }

    pub fn affine(m: DMatrix<T>, shift: DVector<T>) -> Result<Self> {
        if !m.is_square() || m.nrows() != shift.len() {
            return Err(Error::Dimension { expected: m.nrows(), found: shift.len() });
        }
        let (logdet_m, sign_m) = real_logdet(&m)?;
        Ok(LinearMapPair {
            r: m.transpose(),
            m,
            shift,
            logdet_m,
            sign_m,
        })
    }

    pub fn m(&self) -> &DMatrix<T> {
        &self.m
    }

    pub fn r(&self) -> &DMatrix<T> {
        &self.r
    }

    pub fn shift(&self) -> &DVector<T> {
        &self.shift
    }

    /// `log|det M|`.
    pub fn logdet_m(&self) -> T {
        self.logdet_m
    }

    /// `max |⟨R y′, x⟩ − ⟨y′, M x⟩|` over probe vectors.
    pub fn transpose_residual(&self, probes: usize, seed: u64) -> T {
        let n = self.m.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = T::zero();
        for _ in 0..probes {
            let x = DVector::from_fn(n, |_, _| lit::<T>(rng.random_range(-1.0..1.0)));
            let y = DVector::from_fn(n, |_, _| lit::<T>(rng.random_range(-1.0..1.0)));
            worst = worst.max(((&self.r * &y).dot(&x) - y.dot(&(&self.m * &x))).abs());
        }
        worst
    }
}

/// `(log|det A|, sign det A)` via LU.
fn real_logdet<T: Real>(a: &DMatrix<T>) -> Result<(T, T)> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let u = lu.u();
    let mut log = T::zero();
    let mut sign = if lu.p().determinant::<T>() < T::zero() { -T::one() } else { T::one() };
    let scale = linalg::max_abs(&linalg::to_complex(a));
    for i in 0..n {
        let d = u[(i, i)];
        if d.abs() <= lit::<T>(1e3) * T::eps() * scale * count::<T>(n) {
            return Err(Error::SingularMap(format!("pivot {i} vanishes")));
        }
        if d < T::zero() {
            sign = -sign;
        }
        log += d.abs().ln();
    }
    Ok((log, sign))
}

/// `|∫_𝔜 F_μ 𝒟_{Θ̄,Z̄} − ∫_𝔛 F_μ(Mx + b₀) 𝒟_{Θ,Z}x|` on the analytic engine.
///
/// The right side pushes the comb through `Mᵀ` and picks up the phase of
/// the shift. The left side integrates against the image form
/// `A_Y = M⁻ᵀ A M⁻¹` (inverted on its own) with
/// `Z̄ = (Det R′)⁻¹ · J · e^{−2πi⟨y′,b₀⟩} · Z_Y`, where
/// `J = sign(det M)·(det A / det A_Y)^{1/2}`.
pub fn change_of_variable_check<T: Real>(pair: &LinearMapPair<T>, spec: &IntegratorSpec<T>, comb: &DiracComb<T>) -> Result<T> {
    let (s, qf) = match (spec.kind(), spec.qf()) {
        (IntegratorKind::Gaussian { s }, Some(qf)) => (*s, qf.clone()),
        _ => return Err(Error::Unsupported("change of variable needs a Gaussian spec".into())),
    };
    let n = qf.dim();
    if pair.m.nrows() != n {
        return Err(Error::Dimension { expected: n, found: pair.m.nrows() });
    }
    let grid = qf.grid().clone();
    let shift_phase = |y: &DualVector<T>| -> Complex<T> {
        let t = y
            .values()
            .iter()
            .zip(pair.shift.iter())
            .fold(Complex::<T>::default(), |acc, (a, &b)| acc + cscale(*a, b));
        phase(t.re) * re((T::two_pi() * t.im).exp())
    };
    let rc = linalg::to_complex(&pair.r);

    let mut rhs = Complex::<T>::default();
    for (y, c) in comb.iter() {
        let x = DualVector::new(grid.clone(), linalg::matvec(&rc, y.values()))?;
        rhs += c * shift_phase(y) * z_eval(spec, &x)?;
    }

    let m_inv = pair
        .m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularMap("M is not invertible".into()))?;
    let m_inv_c = linalg::to_complex(&m_inv);
    let a_y = m_inv_c.transpose() * qf.a() * &m_inv_c;
    let a_y = (&a_y + a_y.transpose()) * re(lit::<T>(0.5));
    let qf_y = Arc::new(QuadFormPair::new(grid.clone(), a_y)?);
    let spec_y = IntegratorSpec::gaussian(qf_y.clone(), s)?;
    let diff = qf.logdet_a() - qf_y.logdet_a();
    let (logdet_r, sign_r) = real_logdet(&pair.r)?;
    let jacobian = pair.sign_m * ((diff.re * lit::<T>(0.5)) - logdet_r).exp() * sign_r;

    let mut lhs = Complex::<T>::default();
    for (y, c) in comb.iter() {
        lhs += c * shift_phase(y) * z_eval(&spec_y, y)? * re(jacobian);
    }
    Ok(crate::scalar::cabs(lhs - rhs))
}
