//! Joint spectrum membership, the full finite spectrum, and checks of the
//! projection property, the tensor-factor inclusions and the product theorem.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::koszul::{build_complex, homology_dimensions};
use crate::lie::{
    adjoint_weights, build_algebra, canonical_dedup, direct_product, join_character, require_character, triangularize,
    Character, Ideal, OperatorLieAlgebra,
};
use crate::numeric::{identity, kron, Matrix, TolerancePolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub homology_dims: Vec<usize>,
    /// `sigma_min(T) / sigma_max(T)`, with the denominator floored at the
    /// input scale (see [`crate::KoszulComplex::normalized_t_min`]).
    pub t_min_sv: f64,
    /// `sigma_max(T)`.
    pub t_max_sv: f64,
}

impl Diagnostics {
    pub fn homology_vanishes(&self) -> bool {
        self.homology_dims.iter().all(|&h| h == 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub character: Character,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub algebra: OperatorLieAlgebra,
    pub points: Vec<SpectralPoint>,
    pub candidates_tested: Vec<Character>,
}

impl SpectrumResult {
    pub fn characters(&self) -> Vec<Character> {
        self.points.iter().map(|p| p.character.clone()).collect()
    }
}

fn complex_size(d: usize, n: usize) -> usize {
    1usize
        .checked_shl(n as u32)
        .and_then(|t| t.checked_mul(d))
        .unwrap_or(usize::MAX)
}

/// Decides `f ∈ Sp(L, H)`.
///
/// The verdict comes from the normalized smallest singular value of
/// `T = D + D*`; the homology dimensions are computed from ranks as an
/// independent witness and must agree.
pub fn contains(alg: &OperatorLieAlgebra, f: &Character, pol: &TolerancePolicy) -> Result<(bool, Diagnostics)> {
    pol.validate()?;
    pol.check_size(
        "complex dimension d * 2^n",
        complex_size(alg.ambient_dim(), alg.dimension()),
    )?;
    require_character(alg, f, pol)?;
    let complex = build_complex(alg, f, pol)?;
    let homology_dims = homology_dimensions(&complex, pol)?;
    let (smin, smax) = complex.t_singular_range()?;
    let t_min_sv = complex.normalized_t_min(smin, smax, pol);
    let diagnostics = Diagnostics {
        homology_dims,
        t_min_sv,
        t_max_sv: smax,
    };
    let singular = t_min_sv <= pol.singularity_tol;
    if singular == diagnostics.homology_vanishes() {
        return Err(Error::ToleranceInconsistency(format!(
            "T-singularity says {} (normalized sigma_min {t_min_sv:.3e}) but homology dims are {:?} for f = {:?}",
            if singular { "member" } else { "non-member" },
            diagnostics.homology_dims,
            f.values
        )));
    }
    Ok((singular, diagnostics))
}

/// A finite set of characters containing `Sp(L, H)`.
///
/// `L` acts on each chain space `H ⊗ Λ^p L` and that action is null-homotopic,
/// so nonzero homology in degree `p` forces `0` to be a weight of the chain
/// space. The weights of `H ⊗ Λ^p L` under the shifted action are `λ - f + α_S`
/// with `λ` a weight of `H` and `α_S` the sum of `p` adjoint weights, hence
/// `f = λ + α_S`. When `L` is not unimodular some of these points lie off the
/// weights of `H`, e.g. `(2, 0)` for the pair `x = E11`, `y = E12`.
pub fn spectral_candidates(alg: &OperatorLieAlgebra, pol: &TolerancePolicy) -> Result<Vec<Character>> {
    let weights = triangularize(alg, pol)?.weights;
    let alphas = adjoint_weights(alg, pol)?;
    let fine = pol.match_tol * 1e-3;
    let mut sums = vec![Character::zero(alg.dimension())];
    for a in alphas.iter().filter(|a| a.values.iter().any(|z| z.norm() > fine)) {
        let shifted: Vec<Character> = sums.iter().map(|s| add(s, a)).collect();
        sums.extend(shifted);
        sums = canonical_dedup(sums, fine);
    }
    let all = weights
        .iter()
        .flat_map(|w| sums.iter().map(move |s| add(w, s)))
        .collect();
    Ok(canonical_dedup(all, pol.match_tol))
}

fn add(a: &Character, b: &Character) -> Character {
    Character::new(a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect())
}

/// `Sp(L, H)` as a finite set: the members among [`spectral_candidates`], in
/// canonical order.
pub fn compute_spectrum(alg: &OperatorLieAlgebra, pol: &TolerancePolicy) -> Result<SpectrumResult> {
    pol.validate()?;
    pol.check_size(
        "complex dimension d * 2^n",
        complex_size(alg.ambient_dim(), alg.dimension()),
    )?;
    let candidates = spectral_candidates(alg, pol)?;
    let verdicts: Vec<(bool, Diagnostics)> = candidates
        .par_iter()
        .map(|f| contains(alg, f, pol))
        .collect::<Result<_>>()?;
    let points: Vec<SpectralPoint> = candidates
        .iter()
        .zip(verdicts)
        .filter(|(_, (member, _))| *member)
        .map(|(f, (_, diagnostics))| SpectralPoint {
            character: f.clone(),
            diagnostics,
        })
        .collect();
    if points.is_empty() {
        return Err(Error::EmptySpectrum {
            candidates: candidates.len(),
        });
    }
    Ok(SpectrumResult {
        algebra: alg.clone(),
        points,
        candidates_tested: candidates,
    })
}

/// Greedy nearest-pair matching between two finite character sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMatch {
    pub equal: bool,
    /// Largest distance among matched pairs.
    pub max_distance: f64,
    pub unmatched_left: usize,
    pub unmatched_right: usize,
}

/// Pairs points in increasing order of distance, never reusing a point, and
/// only accepting pairs within `tol`.
pub fn match_sets(a: &[Character], b: &[Character], tol: f64) -> SetMatch {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push((x.distance(y), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut max_distance: f64 = 0.0;
    let mut matched = 0;
    for (dist, i, j) in pairs {
        if dist > tol {
            break;
        }
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        matched += 1;
        max_distance = max_distance.max(dist);
    }
    let unmatched_left = a.len() - matched;
    let unmatched_right = b.len() - matched;
    SetMatch {
        equal: unmatched_left == 0 && unmatched_right == 0,
        max_distance,
        unmatched_left,
        unmatched_right,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub holds: bool,
    /// Largest nearest-neighbour distance from a point of the subset.
    pub max_distance: f64,
}

/// `a ⊆ b` up to `tol`: every point of `a` has a point of `b` within `tol`.
pub fn check_inclusion(a: &[Character], b: &[Character], tol: f64) -> Inclusion {
    let mut max_distance: f64 = 0.0;
    for x in a {
        let nearest = b.iter().map(|y| x.distance(y)).fold(f64::INFINITY, f64::min);
        max_distance = max_distance.max(nearest);
    }
    Inclusion {
        holds: max_distance <= tol,
        max_distance,
    }
}

/// `π(Sp(L, H))`: spectral characters restricted to the ideal's coordinates.
pub fn project_spectrum(result: &SpectrumResult, ideal: &Ideal, pol: &TolerancePolicy) -> Result<Vec<Character>> {
    if ideal.parent() != &result.algebra {
        return Err(Error::InvalidInput(
            "ideal belongs to a different algebra than the spectrum".into(),
        ));
    }
    let restricted = result
        .points
        .iter()
        .map(|p| p.character.restrict(ideal.members()))
        .collect();
    Ok(canonical_dedup(restricted, pol.match_tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    /// `Sp(I, H)` computed on the ideal as an algebra.
    pub direct: Vec<Character>,
    /// `π(Sp(L, H))`.
    pub projected: Vec<Character>,
    pub matching: SetMatch,
    pub passed: bool,
}

/// Computes both sides of `Sp(I, H) = π(Sp(L, H))` for `ideal` inside its
/// parent algebra.
pub fn check_projection_property(ideal: &Ideal, pol: &TolerancePolicy) -> Result<ProjectionReport> {
    let whole = compute_spectrum(ideal.parent(), pol)?;
    let projected = project_spectrum(&whole, ideal, pol)?;
    let direct = compute_spectrum(&ideal.subalgebra()?, pol)?.characters();
    let matching = match_sets(&direct, &projected, pol.match_tol);
    Ok(ProjectionReport {
        passed: matching.equal,
        direct,
        projected,
        matching,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductReport {
    pub first: Vec<Character>,
    pub second: Vec<Character>,
    /// `Sp(L1 × L2, H1 ⊗ H2)`.
    pub product: Vec<Character>,
    /// `Sp(L1, H1) × Sp(L2, H2)` joined coefficient-wise.
    pub cartesian: Vec<Character>,
    pub matching: SetMatch,
    pub passed: bool,
}

/// Computes both sides of `Sp(L1 × L2, H1 ⊗ H2) = Sp(L1, H1) × Sp(L2, H2)`.
pub fn check_product_theorem(
    a1: &OperatorLieAlgebra,
    a2: &OperatorLieAlgebra,
    pol: &TolerancePolicy,
) -> Result<ProductReport> {
    let d = a1.ambient_dim().saturating_mul(a2.ambient_dim());
    pol.check_size(
        "product complex dimension d1 * d2 * 2^(n1 + n2)",
        complex_size(d, a1.dimension() + a2.dimension()),
    )?;
    let prod = direct_product(a1, a2)?;
    let first = compute_spectrum(a1, pol)?.characters();
    let second = compute_spectrum(a2, pol)?.characters();
    let product = compute_spectrum(&prod, pol)?.characters();
    let cartesian: Vec<Character> = first
        .iter()
        .flat_map(|f1| second.iter().map(move |f2| join_character(f1, f2)))
        .collect();
    let matching = match_sets(&product, &cartesian, pol.match_tol);
    Ok(ProductReport {
        passed: matching.equal,
        first,
        second,
        product,
        cartesian,
        matching,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFactorReport {
    /// `Sp(L, H1)`.
    pub base: Vec<Character>,
    /// `Sp({x ⊗ 1}, H1 ⊗ H2)`.
    pub first_ideal: Vec<Character>,
    /// `Sp({1 ⊗ x}, H2 ⊗ H1)`.
    pub second_ideal: Vec<Character>,
    /// The two tensor-factor spectra agree.
    pub flip: SetMatch,
    /// The first factor spectrum lies in `Sp(L, H1)`.
    pub first_inclusion: Inclusion,
    /// The second factor spectrum lies in `Sp(L, H1)`.
    pub second_inclusion: Inclusion,
    /// Whether the first inclusion was observed to be an equality.
    pub first_is_equality: bool,
    pub passed: bool,
}

/// Builds `{x ⊗ 1}` on `C^{d1} ⊗ C^{d2}` and `{1 ⊗ x}` on `C^{d2} ⊗ C^{d1}`
/// from `a` and compares their spectra with each other and with `Sp(a)`.
pub fn check_tensor_factor_spectra(
    a: &OperatorLieAlgebra,
    d2: usize,
    pol: &TolerancePolicy,
) -> Result<TensorFactorReport> {
    if d2 == 0 {
        return Err(Error::InvalidInput("second space must be nonzero".into()));
    }
    let d = a.ambient_dim().saturating_mul(d2);
    pol.check_size(
        "tensored complex dimension d1 * d2 * 2^n",
        complex_size(d, a.dimension()),
    )?;
    let ident = identity(d2);
    let left: Vec<Matrix> = a.basis().iter().map(|x| kron(x, &ident)).collect::<Result<_>>()?;
    let right: Vec<Matrix> = a.basis().iter().map(|x| kron(&ident, x)).collect::<Result<_>>()?;
    let first_alg = build_algebra(&left, pol)?;
    let second_alg = build_algebra(&right, pol)?;
    if first_alg.dimension() != a.dimension() || second_alg.dimension() != a.dimension() {
        return Err(Error::ToleranceInconsistency(
            "tensoring with the identity changed the algebra dimension".into(),
        ));
    }
    let base = compute_spectrum(a, pol)?.characters();
    let first_ideal = compute_spectrum(&first_alg, pol)?.characters();
    let second_ideal = compute_spectrum(&second_alg, pol)?.characters();
    let flip = match_sets(&first_ideal, &second_ideal, pol.match_tol);
    let first_inclusion = check_inclusion(&first_ideal, &base, pol.match_tol);
    let second_inclusion = check_inclusion(&second_ideal, &base, pol.match_tol);
    let first_is_equality = match_sets(&first_ideal, &base, pol.match_tol).equal;
    Ok(TensorFactorReport {
        passed: flip.equal && first_inclusion.holds && second_inclusion.holds,
        base,
        first_ideal,
        second_ideal,
        flip,
        first_inclusion,
        second_inclusion,
        first_is_equality,
    })
}
