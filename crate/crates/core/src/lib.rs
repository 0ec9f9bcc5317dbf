//! Binary Darboux transformations of step-type Schrödinger potentials and
//! the KdV solutions they generate: pure solitons, composed soliton stacks
//! and soliton condensates from absolutely continuous spectral measures.

pub mod background;
pub mod cli;
pub mod error;
pub mod fredholm;
pub mod measure;
pub mod parallel;
pub mod quadrature;
pub mod transform;
pub mod verify;

pub use background::{nsoliton_reference, one_soliton_reference, BackgroundModel, LocalBackground};
pub use error::{DarbouxError, Result};
pub use fredholm::{KernelSystem, Mode, Solution};
pub use measure::{check_admissible, discretize, DiscretizedMeasure, Scheme, SpectralMeasure};
pub use num_complex::Complex64;
pub use transform::{apply, apply_with, invert, ApplyOptions, FieldState, Method, PotentialField};
