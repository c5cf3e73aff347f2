//! Joint spectra of solvable Lie algebras of matrices.
//!
//! `Sp(L, H)` is the set of characters `f` of `L` (functionals vanishing on
//! `[L, L]`) for which the twisted Koszul complex `(H ⊗ ΛL, d(f))` has
//! nonzero homology. At finite dimension the spectrum lies in a finite set:
//! weights of a simultaneous triangularization shifted by sums of adjoint
//! weights (see [`spectral_candidates`]). Membership is decided by
//! singularity of the self-adjoint operator `T = d + d*`.

pub mod error;
pub mod harness;
pub mod koszul;
pub mod lie;
pub mod numeric;
pub mod problem;
pub mod spectrum;

pub use error::{Error, Result};
pub use harness::{run_verify, VerifySummary};
pub use koszul::{build_complex, homology_dimensions, t_operator, KoszulComplex};
pub use lie::{
    adjoint_weights, build_algebra, close_under_bracket, derived_subalgebra, direct_product, is_character,
    join_character, split_character, triangularize, Character, Ideal, OperatorLieAlgebra,
};
pub use numeric::{Matrix, TolerancePolicy, C64};
pub use problem::ProblemFile;
pub use spectrum::{
    check_product_theorem, check_projection_property, check_tensor_factor_spectra, compute_spectrum, contains,
    project_spectrum, spectral_candidates, SpectrumResult,
};
