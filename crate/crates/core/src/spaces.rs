//! Discretized function spaces: grids, field vectors, dual vectors and the
//! duality pairing.
//!
//! Vectors store *weight-folded* coordinates: a raw site value `x_i` on a
//! site with volume element `τ_i` is stored as `√τ_i · x_i`. The pairing
//! `∫ b'(t) b(t) dt ≈ Σ τ_i b'_i b_i` is then a plain dot product and every
//! quadratic form is a plain matrix.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::scalar::{lit, re, Complex, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Free,
    /// Boundary sites are pinned to zero and removed from the vector space.
    Dirichlet,
}

/// Grid description as read from configuration. Site counts include the
/// boundary sites; Dirichlet axes lose their two end sites when built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: Vec<usize>,
    pub spacing: Vec<f64>,
    /// One entry per axis, or a single entry applied to all axes.
    pub boundary: Vec<Boundary>,
}

impl GridSpec {
    pub fn uniform(dims: &[usize], spacing: f64, boundary: Boundary) -> Self {
        GridSpec {
            dims: dims.to_vec(),
            spacing: vec![spacing; dims.len()],
            boundary: vec![boundary],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis<T> {
    /// Sites present in the vector space (interior sites for Dirichlet).
    pub sites: usize,
    pub spacing: T,
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout<T: Real> {
    /// Rectangular lattice, row-major with the last axis fastest.
    Lattice(Vec<Axis<T>>),
    /// Direct sum of factor spaces; coordinates are concatenated.
    Sum(Vec<Arc<DomainGrid<T>>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid<T: Real> {
    layout: Layout<T>,
    weights: Vec<T>,
}

pub type GridRef<T> = Arc<DomainGrid<T>>;

/// Builds a grid from its description.
pub fn build_grid<T: Real>(spec: &GridSpec) -> Result<GridRef<T>> {
    let naxes = spec.dims.len();
    if naxes == 0 {
        return Err(Error::Config("grid needs at least one axis".into()));
    }
    let spacing = match spec.spacing.len() {
        1 => vec![spec.spacing[0]; naxes],
        k if k == naxes => spec.spacing.clone(),
        k => {
            return Err(Error::Config(format!(
                "{k} spacings given for {naxes} axes"
            )))
        }
    };
    let boundary = match spec.boundary.len() {
        0 => vec![Boundary::Free; naxes],
        1 => vec![spec.boundary[0]; naxes],
        k if k == naxes => spec.boundary.clone(),
        k => {
            return Err(Error::Config(format!(
                "{k} boundary entries given for {naxes} axes"
            )))
        }
    };
    let mut axes = Vec::with_capacity(naxes);
    for ((&n, &h), &bc) in spec.dims.iter().zip(&spacing).zip(&boundary) {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config(format!("spacing must be positive, got {h}")));
        }
        let sites = match bc {
            Boundary::Free => n,
            Boundary::Dirichlet => n.saturating_sub(2),
        };
        if sites == 0 {
            return Err(Error::Config(format!(
                "axis with {n} sites has no interior under {bc:?} boundary"
            )));
        }
        axes.push(Axis {
            sites,
            spacing: lit::<T>(h),
            boundary: bc,
        });
    }
    Ok(Arc::new(DomainGrid::from_axes(axes)))
}

impl<T: Real> DomainGrid<T> {
    fn from_axes(axes: Vec<Axis<T>>) -> Self {
        let n: usize = axes.iter().map(|a| a.sites).product();
        let tau = axes.iter().fold(T::one(), |p, a| p * a.spacing);
        DomainGrid {
            layout: Layout::Lattice(axes),
            weights: vec![tau; n],
        }
    }

    /// One free axis of `n` unit-spaced sites.
    pub fn free(n: usize) -> GridRef<T> {
        Self::line(n, T::one(), Boundary::Free)
    }

    /// One axis holding `n` sites of the vector space with the given boundary.
    pub fn line(n: usize, spacing: T, boundary: Boundary) -> GridRef<T> {
        assert!(n > 0 && spacing > T::zero());
        Arc::new(Self::from_axes(vec![Axis {
            sites: n,
            spacing,
            boundary,
        }]))
    }

    /// Product-space grid `𝔅₁ ⊕ 𝔅₂ ⊕ …` with concatenated coordinates.
    pub fn direct_sum(factors: &[GridRef<T>]) -> GridRef<T> {
        let weights = factors.iter().flat_map(|g| g.weights.iter().copied()).collect();
        Arc::new(DomainGrid {
            layout: Layout::Sum(factors.to_vec()),
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn layout(&self) -> &Layout<T> {
        &self.layout
    }

    pub fn axes(&self) -> Option<&[Axis<T>]> {
        match &self.layout {
            Layout::Lattice(a) => Some(a),
            Layout::Sum(_) => None,
        }
    }

    pub fn factors(&self) -> Option<&[GridRef<T>]> {
        match &self.layout {
            Layout::Sum(f) => Some(f),
            Layout::Lattice(_) => None,
        }
    }

    /// Site counts per axis (lattice grids only).
    pub fn shape(&self) -> Vec<usize> {
        match &self.layout {
            Layout::Lattice(a) => a.iter().map(|x| x.sites).collect(),
            Layout::Sum(_) => vec![self.len()],
        }
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let shape = self.shape();
        debug_assert_eq!(coords.len(), shape.len());
        coords
            .iter()
            .zip(&shape)
            .fold(0, |acc, (&c, &n)| acc * n + c)
    }

    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let shape = self.shape();
        let mut out = vec![0; shape.len()];
        for (k, &n) in shape.iter().enumerate().rev() {
            out[k] = index % n;
            index /= n;
        }
        out
    }

    pub(crate) fn same(a: &GridRef<T>, b: &GridRef<T>) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }
}

macro_rules! site_vector {
    ($name:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name<T: Real> {
            grid: GridRef<T>,
            values: Vec<Complex<T>>,
        }

        impl<T: Real> $name<T> {
            /// Wraps weight-folded coordinates.
            pub fn new(grid: GridRef<T>, values: Vec<Complex<T>>) -> Result<Self> {
                check_len(grid.len(), values.len())?;
                Ok(Self { grid, values })
            }

            pub fn from_real(grid: GridRef<T>, values: &[T]) -> Result<Self> {
                Self::new(grid, values.iter().map(|&x| re(x)).collect())
            }

            pub fn zeros(grid: GridRef<T>) -> Self {
                let n = grid.len();
                Self {
                    grid,
                    values: vec![crate::scalar::czero(); n],
                }
            }

            /// Unit coordinate vector at site `i`.
            pub fn unit(grid: GridRef<T>, i: usize) -> Self {
                let mut v = Self::zeros(grid);
                v.values[i] = crate::scalar::cone();
                v
            }

            /// Folds raw site values with `√τ_i`.
            pub fn from_raw(grid: GridRef<T>, raw: &[Complex<T>]) -> Result<Self> {
                check_len(grid.len(), raw.len())?;
                let values = raw
                    .iter()
                    .zip(grid.weights())
                    .map(|(&x, &w)| x * w.sqrt())
                    .collect();
                Ok(Self { grid, values })
            }

            pub fn to_raw(&self) -> Vec<Complex<T>> {
                self.values
                    .iter()
                    .zip(self.grid.weights())
                    .map(|(&x, &w)| x / w.sqrt())
                    .collect()
            }

            pub fn grid(&self) -> &GridRef<T> {
                &self.grid
            }

            pub fn values(&self) -> &[Complex<T>] {
                &self.values
            }

            #[allow(dead_code)]
            pub(crate) fn values_mut(&mut self) -> &mut [Complex<T>] {
                &mut self.values
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn scaled(&self, a: Complex<T>) -> Self {
                Self {
                    grid: self.grid.clone(),
                    values: self.values.iter().map(|&x| x * a).collect(),
                }
            }

            pub fn add(&self, other: &Self) -> Result<Self> {
                if !DomainGrid::same(&self.grid, &other.grid) {
                    return Err(Error::GridMismatch);
                }
                Ok(Self {
                    grid: self.grid.clone(),
                    values: self
                        .values
                        .iter()
                        .zip(&other.values)
                        .map(|(&a, &b)| a + b)
                        .collect(),
                })
            }

            /// Concatenates coordinates onto a direct-sum grid.
            pub fn concat(parts: &[&Self], grid: GridRef<T>) -> Result<Self> {
                let values: Vec<_> = parts.iter().flat_map(|p| p.values.iter().copied()).collect();
                Self::new(grid, values)
            }

            pub fn norm(&self) -> T {
                self.values
                    .iter()
                    .fold(T::zero(), |s, z| s + z.re * z.re + z.im * z.im)
                    .sqrt()
            }
        }
    };
}

site_vector!(FieldVector, "Element of the discretized field space `𝔅`.");
site_vector!(DualVector, "Element of the dual space `𝔅'`.");

/// Duality pairing `⟨b', b⟩`.
pub fn pairing<T: Real>(bp: &DualVector<T>, b: &FieldVector<T>) -> Result<Complex<T>> {
    if !DomainGrid::same(bp.grid(), b.grid()) {
        return Err(Error::GridMismatch);
    }
    Ok(linalg::dot(bp.values(), b.values()))
}

/// Maps `[t_a, t_b]` onto the unit interval: `b ↦ b/√(t_b−t_a)` and
/// `b' ↦ √(t_b−t_a)·b'`. The pairing is unchanged.
pub fn rescale_interval<T: Real>(
    b: &FieldVector<T>,
    bp: &DualVector<T>,
    t_a: T,
    t_b: T,
) -> Result<(FieldVector<T>, DualVector<T>)> {
    if !(t_b > t_a) {
        return Err(Error::Domain(format!(
            "interval end {t_b} must exceed start {t_a}"
        )));
    }
    let root = (t_b - t_a).sqrt();
    Ok((b.scaled(re(T::one() / root)), bp.scaled(re(root))))
}
