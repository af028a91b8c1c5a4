//! Edge iterated graph systems (EIGS): substitution fractal graphs, their
//! combinatorial matrices, resistance renormalisation, scaling exponents,
//! random-walk Monte Carlo and the critical diamond-lattice percolation
//! recursion.

pub mod dims;
pub mod error;
pub mod level;
pub mod percolation;
pub mod presets;
pub mod psi;
pub mod resistance;
pub mod spectral;
pub mod stats;
pub mod system;
pub mod validate;
pub mod walker;

pub use error::{Error, Result};
pub use level::LevelGraph;
pub use system::{load_system, Colour, EigSystem, RuleEdge, RuleGraph};
