//! Seeded random instances and the randomized verification run.
//!
//! Random algebras come from upper-triangular generators closed under the
//! bracket, so they are solvable by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::koszul::{build_complex, homology_dimensions, nilpotency_residuals, t_operator};
use crate::lie::{build_algebra, close_under_bracket, triangularize, Character, Ideal, OperatorLieAlgebra};
use crate::numeric::{min_singular_value, null_space, singular_values, Matrix, TolerancePolicy, C64, ZERO};
use crate::problem::ProblemFile;
use crate::spectrum::{check_product_theorem, check_projection_property, check_tensor_factor_spectra};

pub type HarnessRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> HarnessRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex normal: real and imaginary parts `N(0, 1/2)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Upper-triangular matrix with standard complex normal entries. Entries
/// strictly above the diagonal are kept with probability `density`; the
/// diagonal is zero when `strict`.
pub fn random_upper_triangular<R: Rng + ?Sized>(rng: &mut R, d: usize, density: f64, strict: bool) -> Matrix {
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let keep = if i == j { !strict } else { rng.random_bool(density) };
            if keep {
                m[(i, j)] = complex_normal(rng);
            }
        }
    }
    m
}

/// Haar-ish random unitary from the QR factorization of a Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Matrix {
    let g = Matrix::from_fn(d, d, |_, _| complex_normal(rng));
    g.qr().q()
}

/// A random solvable algebra on `C^d` with `1 <= d <= dmax` and dimension at
/// most `nmax`.
///
/// Draws sparse upper-triangular generators and closes them under the
/// bracket, rejecting closures larger than `nmax`. Falls back to a single
/// dense generator when every attempt overshoots.
pub fn random_solvable_algebra<R: Rng + ?Sized>(
    rng: &mut R,
    dmax: usize,
    nmax: usize,
    pol: &TolerancePolicy,
) -> Result<OperatorLieAlgebra> {
    if dmax == 0 || nmax == 0 {
        return Err(Error::InvalidInput("dmax and nmax must be positive".into()));
    }
    let d = rng.random_range(1..=dmax);
    for _ in 0..64 {
        let generators = rng.random_range(1..=nmax);
        let density = [0.25, 0.5, 1.0][rng.random_range(0..3)];
        let gens: Vec<Matrix> = (0..generators)
            .map(|g| {
                let strict = g > 0 && rng.random_bool(0.5);
                random_upper_triangular(rng, d, density, strict)
            })
            .collect();
        if gens.iter().all(|m| m.iter().all(|z| *z == ZERO)) {
            continue;
        }
        let closed = close_under_bracket(&gens)?;
        if !closed.is_empty() && closed.len() <= nmax {
            return build_algebra(&closed, pol);
        }
    }
    build_algebra(&[random_upper_triangular(rng, d, 1.0, false)], pol)
}

/// `n` matrices diagonal in a common basis: random diagonals, optionally
/// conjugated by a random unitary. Returns the matrices and the joint
/// eigenvalue tuples (one per basis vector of `C^d`).
pub fn random_commuting_family<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    n: usize,
    conjugate: bool,
) -> (Vec<Matrix>, Vec<Character>) {
    let diagonals: Vec<Vec<C64>> = (0..n).map(|_| (0..d).map(|_| complex_normal(rng)).collect()).collect();
    let u = if conjugate {
        random_unitary(rng, d)
    } else {
        crate::numeric::identity(d)
    };
    let mats = diagonals
        .iter()
        .map(|diag| {
            let m = Matrix::from_fn(d, d, |i, j| if i == j { diag[i] } else { ZERO });
            &u * m * u.adjoint()
        })
        .collect();
    let tuples = (0..d)
        .map(|j| Character::new(diagonals.iter().map(|diag| diag[j]).collect()))
        .collect();
    (mats, tuples)
}

/// A random character: a complex normal combination of a basis of the
/// annihilator of `L^2`.
pub fn random_character<R: Rng + ?Sized>(rng: &mut R, alg: &OperatorLieAlgebra, pol: &TolerancePolicy) -> Character {
    let n = alg.dimension();
    let derived = alg.derived_basis(pol);
    let annihilator = if derived.ncols() == 0 {
        crate::numeric::identity(n)
    } else {
        // f(u) = sum_k f_k u_k = 0 for every column u: f ∈ ker(U^T).
        null_space(&derived.transpose(), pol.rank_tol_rel)
    };
    let coeffs: Vec<C64> = (0..annihilator.ncols()).map(|_| complex_normal(rng)).collect();
    Character::new(
        (0..n)
            .map(|k| (0..annihilator.ncols()).map(|c| annihilator[(k, c)] * coeffs[c]).sum())
            .collect(),
    )
}

/// A random ideal containing `L^2`: `L^2` plus a random number of random
/// extra directions (at least one when `L^2 = 0`).
pub fn random_ideal_containing_derived<R: Rng + ?Sized>(
    rng: &mut R,
    alg: &OperatorLieAlgebra,
    pol: &TolerancePolicy,
) -> Result<Ideal> {
    let n = alg.dimension();
    let derived = alg.derived_basis(pol);
    let k = derived.ncols();
    let lo = if k == 0 { 1 } else { 0 };
    let extra = rng.random_range(lo..=n - k);
    let mut span = Matrix::zeros(n, k + extra);
    span.view_mut((0, 0), (n, k)).copy_from(&derived);
    for c in k..k + extra {
        for r in 0..n {
            span[(r, c)] = complex_normal(rng);
        }
    }
    Ideal::from_span(alg, &span, pol)
}

/// One exactness-versus-invertibility comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactnessSample {
    pub homology_dims: Vec<usize>,
    pub t_min_sv: f64,
    pub agrees: bool,
}

/// Compares vanishing homology with a normalized `sigma_min(T) > singularity_tol`,
/// using a full SVD of `T` rather than the parity block used by `contains`.
pub fn exactness_sample(alg: &OperatorLieAlgebra, f: &Character, pol: &TolerancePolicy) -> Result<ExactnessSample> {
    let complex = build_complex(alg, f, pol)?;
    let homology_dims = homology_dimensions(&complex, pol)?;
    let t = t_operator(&complex);
    let smin = min_singular_value(&t)?;
    let smax = singular_values(&t)?.first().copied().unwrap_or(0.0);
    let t_min_sv = complex.normalized_t_min(smin, smax, pol);
    let exact = homology_dims.iter().all(|&h| h == 0);
    Ok(ExactnessSample {
        agrees: exact == (t_min_sv > pol.singularity_tol),
        homology_dims,
        t_min_sv,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub algebra: ProblemFile,
    pub partner: ProblemFile,
    /// Worst `‖D_p D_{p+1}‖_max / bound` over all complexes built.
    pub nilpotency_ratio: f64,
    pub exactness_samples: usize,
    pub exactness_disagreements: usize,
    pub projection_distance: f64,
    pub flip_distance: f64,
    pub inclusion_distance: f64,
    pub product_distance: Option<f64>,
    pub error: Option<String>,
    pub passed: bool,
}

fn run_checks(
    rng: &mut HarnessRng,
    alg: &OperatorLieAlgebra,
    partner: &OperatorLieAlgebra,
    pol: &TolerancePolicy,
    out: &mut TrialOutcome,
) -> Result<bool> {
    let mut ok = true;
    let mut characters = triangularize(alg, pol)?.weights;
    characters.push(random_character(rng, alg, pol));
    for f in &characters {
        let complex = build_complex(alg, f, pol)?;
        for (_, residual, bound) in nilpotency_residuals(complex.boundaries()) {
            out.nilpotency_ratio = out.nilpotency_ratio.max(residual / bound);
        }
        let sample = exactness_sample(alg, f, pol)?;
        out.exactness_samples += 1;
        if !sample.agrees {
            out.exactness_disagreements += 1;
            ok = false;
        }
    }
    ok &= out.nilpotency_ratio <= 1.0;

    let ideal = random_ideal_containing_derived(rng, alg, pol)?;
    let projection = check_projection_property(&ideal, pol)?;
    out.projection_distance = projection.matching.max_distance;
    ok &= projection.passed;

    for d2 in [1, 2] {
        let tensor = check_tensor_factor_spectra(alg, d2, pol)?;
        out.flip_distance = out.flip_distance.max(tensor.flip.max_distance);
        out.inclusion_distance = out
            .inclusion_distance
            .max(tensor.first_inclusion.max_distance)
            .max(tensor.second_inclusion.max_distance);
        ok &= tensor.passed;
    }

    match check_product_theorem(alg, partner, pol) {
        Ok(report) => {
            out.product_distance = Some(report.matching.max_distance);
            ok &= report.passed;
        }
        Err(Error::SizeLimit { .. }) => out.product_distance = None,
        Err(e) => return Err(e),
    }
    Ok(ok)
}

/// Generates one instance pair from `seed` and runs every check on it.
pub fn run_trial(seed: u64, trial: usize, dmax: usize, nmax: usize, pol: &TolerancePolicy) -> Result<TrialOutcome> {
    let mut rng = rng_from_seed(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(trial as u64));
    let alg = random_solvable_algebra(&mut rng, dmax, nmax, pol)?;
    let partner = random_solvable_algebra(&mut rng, dmax, nmax, pol)?;
    let mut out = TrialOutcome {
        trial,
        algebra: ProblemFile::from_algebra(&alg, Some(format!("trial {trial} algebra"))),
        partner: ProblemFile::from_algebra(&partner, Some(format!("trial {trial} partner"))),
        nilpotency_ratio: 0.0,
        exactness_samples: 0,
        exactness_disagreements: 0,
        projection_distance: 0.0,
        flip_distance: 0.0,
        inclusion_distance: 0.0,
        product_distance: None,
        error: None,
        passed: false,
    };
    match run_checks(&mut rng, &alg, &partner, pol, &mut out) {
        Ok(ok) => out.passed = ok,
        Err(e) => out.error = Some(e.to_string()),
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub seed: u64,
    pub trials: usize,
    pub dmax: usize,
    pub nmax: usize,
    pub passed: usize,
    pub failed: usize,
    pub products_skipped: usize,
    pub worst_nilpotency_ratio: f64,
    pub exactness_samples: usize,
    pub exactness_disagreements: usize,
    pub worst_projection_distance: f64,
    pub worst_flip_distance: f64,
    pub worst_inclusion_distance: f64,
    pub worst_product_distance: f64,
    /// Failing trials with their instances for replay.
    pub failures: Vec<TrialOutcome>,
}

/// Runs `trials` independent seeded trials. Output does not depend on the
/// order in which trials execute.
pub fn run_verify(seed: u64, trials: usize, dmax: usize, nmax: usize, pol: &TolerancePolicy) -> Result<VerifySummary> {
    if trials == 0 {
        return Err(Error::InvalidInput("trial count must be positive".into()));
    }
    if dmax == 0 || nmax == 0 {
        return Err(Error::InvalidInput("dmax and nmax must be positive".into()));
    }
    pol.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(seed, t, dmax, nmax, pol))
        .collect::<Result<_>>()?;
    let mut summary = VerifySummary {
        seed,
        trials,
        dmax,
        nmax,
        passed: 0,
        failed: 0,
        products_skipped: 0,
        worst_nilpotency_ratio: 0.0,
        exactness_samples: 0,
        exactness_disagreements: 0,
        worst_projection_distance: 0.0,
        worst_flip_distance: 0.0,
        worst_inclusion_distance: 0.0,
        worst_product_distance: 0.0,
        failures: Vec::new(),
    };
    for o in outcomes {
        summary.worst_nilpotency_ratio = summary.worst_nilpotency_ratio.max(o.nilpotency_ratio);
        summary.exactness_samples += o.exactness_samples;
        summary.exactness_disagreements += o.exactness_disagreements;
        summary.worst_projection_distance = summary.worst_projection_distance.max(o.projection_distance);
        summary.worst_flip_distance = summary.worst_flip_distance.max(o.flip_distance);
        summary.worst_inclusion_distance = summary.worst_inclusion_distance.max(o.inclusion_distance);
        match o.product_distance {
            Some(d) => summary.worst_product_distance = summary.worst_product_distance.max(d),
            None => summary.products_skipped += 1,
        }
        if o.passed {
            summary.passed += 1;
        } else {
            summary.failed += 1;
            summary.failures.push(o);
        }
    }
    Ok(summary)
}
