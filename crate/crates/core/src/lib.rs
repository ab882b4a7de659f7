//! Neumann eigenvalues, bound states and antibound states of the half-line
//! operator `-h^2 d^2/dx^2 + V(x)` by Prüfer-angle shooting.

pub mod experiments;
pub mod io;
pub mod potential;
pub mod prufer;
pub mod spectra;

pub use potential::{PotentialError, PotentialSpec, Profile, WholeLinePotential};
pub use prufer::{PhasePoint, PhaseProblem, PruferError};
