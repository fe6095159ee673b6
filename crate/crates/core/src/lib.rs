//! Simulation and analysis engine for the nonlocal evolution equation
//!
//! ```text
//! u_t = -a u + f(T u),    T u = (K * ũ)|_Ω
//! ```
//!
//! on a bounded 1D or 2D lattice, where `K` is a compactly supported radial
//! kernel and `ũ` the zero extension of `u`.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod operator;
pub mod par;
pub mod preset;
pub mod spectral;

pub use config::{InitialCondition, SimConfig};
pub use dynamics::{Response, ResponseKind, RunReport};
pub use error::{Error, Result};
pub use field::Field;
pub use grid::{Boundary, Grid};
pub use kernel::{Band, Kernel, KernelFamily, KernelParams, KernelSpec};
pub use operator::{apply_t, ConvolutionMethod, Operator, OperatorMatrix};
pub use spectral::Spectrum;
