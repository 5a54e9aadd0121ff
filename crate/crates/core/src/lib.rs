//! Equilibria of `(a(x) u')' + f(u) = 0` on `[0, 1]` with Neumann boundary
//! conditions: shooting, spectra of the linearization, level-set identities
//! and exceptional-equilibrium checks.

pub mod cli;
pub mod equilibria;
pub mod exceptional;
pub mod integrate;
pub mod levelsets;
pub mod ode;
pub mod perturb;
pub mod poly;
pub mod problem;
pub mod quadrature;
pub mod report;
pub mod spectrum;
pub mod tridiag;
pub mod verify;

pub use equilibria::{find_equilibria, EquilibriumRecord, EquilibriumSet};
pub use integrate::{integrate_ivp, integrate_variational, Profile};
pub use poly::Poly;
pub use problem::{parse_spec, ProblemSpec, ToleranceSet};
pub use spectrum::{eigenvalues_sl, HyperbolicityClass, SpectrumReport};
