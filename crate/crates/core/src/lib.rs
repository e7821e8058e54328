//! Least-biased estimation as constrained minimization.
//!
//! One principle, several instances: the maximum-entropy distribution for a
//! mean-energy constraint, the lowest eigenpair of a Schrödinger operator,
//! harmonic soap films, the de Rham Laplacian on cochains and on tensors,
//! the Hilbert action, and a descent explorer for a torsion functional on
//! moving frames.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the gamma-matrix
//! algebra in [`spinor`] is generic over any exact ring. The aliases below
//! fix the common concrete choices.
//!
//! The Laplacian is positive semidefinite throughout: `-sum d^2/dx^2`.

pub mod cartan;
pub mod error;
pub mod geometry;
pub mod grids;
pub mod probkit;
pub mod scalar;
pub mod schroedinger;
pub mod spinor;
pub mod surfaces;
pub mod variational;

pub use error::{Error, Result};
pub use scalar::Real;

pub use cartan::{minimize_torsion_functional, structure_curvature, structure_torsion, torsion_functional};
pub use geometry::{curvature, hilbert_action, laplacian_of_metric};
pub use probkit::{entropy, solve_maxent};
pub use schroedinger::ground_state;
pub use spinor::{build_gamma, dirac_slash};
pub use surfaces::{mean_value_residual, solve_film};
pub use variational::minimize_quadratic_form;

pub type Distribution = probkit::DiscreteDistribution<f64>;
pub type Levels = probkit::EnergyLevels<f64>;
pub type Grid = grids::UniformGrid<f64>;
pub type Field = grids::ScalarField<f64>;
pub type Mesh = grids::PeriodicMesh<f64>;
pub type Cochain = grids::Cochain<f64>;
pub type Config = variational::SolverConfig<f64>;
pub type Potential = schroedinger::Potential<f64>;
pub type Frame = surfaces::WireFrame<f64>;
pub type Metric = geometry::ParametrizedMetric<f64>;
pub type Frames = cartan::FrameConfiguration<f64>;
pub type SampledFrames = cartan::SampledFrame<f64>;
pub type ExactGammaSet = spinor::GammaSet<num_rational::Rational64>;
pub type ExactFourVector = spinor::FourVector<num_rational::Rational64>;
