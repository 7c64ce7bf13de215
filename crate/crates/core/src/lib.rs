//! Discretized functional integration: Gaussian integrators on field
//! spaces, Hermite functionals, parametrizations and change of variables,
//! effective actions and free-field lattice experiments.
//!
//! Everything numerical is generic over [`scalar::Real`]; the aliases below
//! fix the scalar to `f64` or `f32`.

pub mod error;
pub mod linalg;
pub mod scalar;
pub mod spaces;
pub mod quadforms;
pub mod hermite;
pub mod measures;
pub mod mc;
pub mod integrators;
pub mod parametrize;
pub mod effective;
pub mod qft;
pub mod cli;

pub use error::{Error, Result};

pub type DomainGridF64 = spaces::DomainGrid<f64>;
pub type FieldVectorF64 = spaces::FieldVector<f64>;
pub type DualVectorF64 = spaces::DualVector<f64>;
pub type QuadFormPairF64 = quadforms::QuadFormPair<f64>;
pub type LocalizationF64 = quadforms::Localization<f64>;
pub type DiracCombF64 = measures::DiracComb<f64>;
pub type IntegratorSpecF64 = integrators::IntegratorSpec<f64>;
pub type McEstimateF64 = mc::McEstimate<f64>;
pub type VectorFieldSetF64 = parametrize::VectorFieldSet<f64>;
pub type LinearMapPairF64 = parametrize::LinearMapPair<f64>;
pub type ActionFunctionalF64 = effective::ActionFunctional<f64>;

pub type DomainGridF32 = spaces::DomainGrid<f32>;
pub type FieldVectorF32 = spaces::FieldVector<f32>;
pub type DualVectorF32 = spaces::DualVector<f32>;
pub type QuadFormPairF32 = quadforms::QuadFormPair<f32>;
pub type LocalizationF32 = quadforms::Localization<f32>;
pub type DiracCombF32 = measures::DiracComb<f32>;
pub type IntegratorSpecF32 = integrators::IntegratorSpec<f32>;
pub type McEstimateF32 = mc::McEstimate<f32>;
pub type VectorFieldSetF32 = parametrize::VectorFieldSet<f32>;
pub type LinearMapPairF32 = parametrize::LinearMapPair<f32>;
pub type ActionFunctionalF32 = effective::ActionFunctional<f32>;
