//! Uniform grids with finite-difference Laplacians, and discrete exterior
//! calculus on periodic structured meshes.
//!
//! Sign convention: every Laplacian here is positive semidefinite,
//! `-sum d^2/dx_k^2` on smooth functions.

mod dec;
mod field;

pub use dec::{
    cochain_inner, codifferential, derham_laplacian, exterior_derivative, hodge_star, Cochain, Complex,
    Incidence, MeshSpec, PeriodicMesh,
};
pub use field::{
    fd_laplacian, inner_product, laplacian_apply, tensor_product_field, Axis, Boundary, ScalarField,
    UniformGrid,
};
