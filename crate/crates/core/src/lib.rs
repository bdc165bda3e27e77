pub mod basis;
pub mod config;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod observables;
pub mod oracle;
pub mod propagator;
