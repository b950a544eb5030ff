//! Finite-dimensional reductions of Hamiltonian action functionals on flat
//! models, and the machinery to verify their closed-form structure: broken
//! orbit loops and their exact gradients, orbit enumeration and solvers,
//! Hessian spectra, index pairs with Monte-Carlo exit certificates, loops of
//! Lagrangian subspaces with winding-number indices, and the explicit
//! quadratic forms of the stabilized reductions.

pub mod discrete_action;
pub mod error;
pub mod flat_geometry;
pub mod hamiltonians;
pub mod index_pair;
pub mod lagrangian;
pub mod orbit_solver;
pub mod quad_forms;
pub mod sampling;
pub mod spectral;
pub mod verification;

pub use error::{CoreError, Result};
