//! Exact evolution data for time-dependent quadratic Hamiltonians.
//!
//! The Hamiltonian `H = ½a p² + ½b(xp+px) + ½c x² + d p + e x + g` (and its
//! 2D charged-particle sibling) is reduced by a product of unitary
//! transformations whose parameters obey ordinary differential equations.
//! From those parameters the crate assembles the Heisenberg-picture
//! symplectic map and the Gaussian propagator, and ships independent
//! oracles (classical flow, fundamental matrix, split-step grid solver)
//! to check them.
//!
//! Numeric types are generic over [`Real`] (`f32` or `f64`) with `f64` as the
//! default type parameter; the operator algebra in [`quadops`] is generic over
//! an exact field and defaults to [`num_rational::Rational64`].

pub mod closedforms;
pub mod coeffs;
pub mod error;
pub mod greens;
pub mod linalg;
pub mod maps;
pub mod ode;
pub mod oracle;
pub mod paramflow;
pub mod quadops;
pub mod scalar;
pub mod suite;

pub use error::{Error, Result};
pub use scalar::Real;

pub use coeffs::{CoefficientSet1D, FieldProfile2D, TimeProfile};
pub use greens::{GaussianKernel, KernelVariant, WaveGrid};
pub use maps::SymplecticMap;
pub use paramflow::{ParamSample, ParamTrajectory, ParamTrajectory2D, Path};
pub use quadops::{Algebra, QuadraticObservable, StructureTable};

/// Exact rational observable, the form used for structure constants.
pub type RationalObservable = QuadraticObservable<num_rational::Rational64>;
/// Floating-point observable, handy for turning coefficient values into operators.
pub type FloatObservable = QuadraticObservable<f64>;

pub type Complex = num_complex::Complex<f64>;

pub type TimeProfile32 = TimeProfile<f32>;
pub type CoefficientSet1D32 = CoefficientSet1D<f32>;
pub type ParamTrajectory32 = ParamTrajectory<f32>;
pub type SymplecticMap32 = SymplecticMap<f32>;
pub type GaussianKernel32 = GaussianKernel<f32>;
pub type WaveGrid32 = WaveGrid<f32>;
