//! Mean-field side: empirical densities on a periodic grid, a spectral solver
//! for the two-species equation
//!
//! `∂_t ρ± ± γ̄ div(ρ± K*(ρ⁺ − ρ⁻)) = ν Δρ±`,
//!
//! the weak-form residual used to measure distance to a solution, and a
//! bounded-Lipschitz distance over a fixed test-function family.
//!
//! The plane is truncated to the periodic square `[−L, L)²`. The kernel's
//! zero Fourier mode is dropped, which neutralizes the mean of `ρ⁺ − ρ⁻`;
//! this is exact for neutral systems and adds a uniform background otherwise.

mod convergence;
mod density;
mod fft;
mod grid;
mod pde;
mod testfn;
mod weakform;

pub use convergence::{convergence_point, convergence_scan, seed_for, ConvergencePoint, MeanFieldSetup, PathConvergence};
pub use density::{empirical_density, gaussian_density, GridDensityPair};
pub use fft::Fft2;
pub use grid::Grid2D;
pub use pde::{kernel_velocity, pde_step, AdvectionScheme, PdeParams, PdeSolver};
pub use testfn::{standard_family, Profile, TestFunction, FAMILY_VERSION};
pub use weakform::{bl_distance, weak_form_residual, MeasureSnapshot, WeakFormAccumulator};
