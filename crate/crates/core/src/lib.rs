//! Spectral theory and dispersive estimates for periodic Schrodinger operators
//! `H = -d^2/dx^2 + P(x)` on the real line with a trigonometric-polynomial
//! potential of period one.
//!
//! The crate computes the Floquet discriminant and band edges, the
//! quasimomentum `k(w)` and band functions `E(k)`, Bloch waves, the Bloch
//! transform and the Schrodinger kernel `K(t, x, y)` of `e^{itH}`, together
//! with the analytic identities and asymptotics these objects satisfy.
//!
//! ```no_run
//! use hillwave::{potential::PeriodicPotential, spectrum::BandStructure};
//!
//! let p = PeriodicPotential::mathieu(2.0);
//! let bands = BandStructure::<f64>::compute(&p, 8, None).unwrap();
//! println!("first gap: {:?}", bands.gap(1));
//! ```

pub mod bloch;
pub mod error;
pub mod floquet;
pub mod fresnel;
pub mod hill;
pub mod kernel;
pub mod potential;
pub mod quad;
pub mod quasimomentum;
pub mod real;
pub mod spectrum;
pub mod transform;

pub use error::{HillError, Result};
