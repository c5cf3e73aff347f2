//! Finite-dimensional solvable Lie algebras of matrices.
//!
//! An [`OperatorLieAlgebra`] is an ordered basis of `d x d` complex matrices
//! together with structure constants `[x_i, x_j] = sum_k c[i][j][k] x_k` for
//! the commutator `xy - yx`. Construction verifies closure and solvability.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    self, column_space, commutator, frobenius, identity, max_abs, null_space, unitary_with_first_column, vectorize,
    Matrix, TolerancePolicy, C64, ZERO,
};

/// Relative threshold used by [`close_under_bracket`] to decide that a
/// commutator adds a new direction.
const CLOSURE_TOL: f64 = 1e-10;

/// Relative radius for grouping eigenvalues that belong to one cluster.
const EIGEN_CLUSTER_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorLieAlgebra {
    ambient_dim: usize,
    basis: Vec<Matrix>,
    /// Flattened `c[i][j][k]` at `(i * n + j) * n + k`.
    structure: Vec<C64>,
    /// `(n, m)` when the algebra was produced by [`direct_product`].
    split: Option<(usize, usize)>,
}

impl OperatorLieAlgebra {
    /// `d`, the dimension of the space the matrices act on.
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// `n`, the number of basis elements.
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Matrix] {
        &self.basis
    }

    pub fn structure_constant(&self, i: usize, j: usize, k: usize) -> C64 {
        let n = self.dimension();
        self.structure[(i * n + j) * n + k]
    }

    pub fn product_split(&self) -> Option<(usize, usize)> {
        self.split
    }

    /// Largest structure constant modulus.
    pub fn structure_scale(&self) -> f64 {
        self.structure.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// The matrix `sum_i coeffs[i] x_i`.
    pub fn combination(&self, coeffs: &[C64]) -> Matrix {
        let d = self.ambient_dim;
        let mut out = Matrix::zeros(d, d);
        for (x, &c) in self.basis.iter().zip(coeffs) {
            if c != ZERO {
                out += x * c;
            }
        }
        out
    }

    /// Coefficients of `[u, v]` for coefficient vectors `u`, `v`.
    pub fn bracket_coefficients(&self, u: &[C64], v: &[C64]) -> Vec<C64> {
        let n = self.dimension();
        let mut out = vec![ZERO; n];
        for (i, &ui) in u.iter().enumerate().take(n) {
            if ui == ZERO {
                continue;
            }
            for (j, &vj) in v.iter().enumerate().take(n) {
                let w = ui * vj;
                if w == ZERO {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += w * self.structure_constant(i, j, k);
                }
            }
        }
        out
    }

    fn derived_floor(&self, pol: &TolerancePolicy) -> f64 {
        pol.rank_tol_rel * self.structure_scale()
    }

    /// Orthonormal coefficient basis (columns) of the derived algebra
    /// `L^2 = span{[x, y]}`.
    pub fn derived_basis(&self, pol: &TolerancePolicy) -> Matrix {
        let n = self.dimension();
        self.derived_of(&identity(n), pol)
    }

    fn derived_of(&self, span: &Matrix, pol: &TolerancePolicy) -> Matrix {
        let n = self.dimension();
        let k = span.ncols();
        let cols: Vec<Vec<C64>> = (0..k).map(|a| span.column(a).iter().copied().collect()).collect();
        let mut brackets = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                brackets.push(self.bracket_coefficients(&cols[a], &cols[b]));
            }
        }
        if brackets.is_empty() {
            return Matrix::zeros(n, 0);
        }
        let m = Matrix::from_fn(n, brackets.len(), |r, c| brackets[c][r]);
        column_space(&m, pol.rank_tol_rel, self.derived_floor(pol))
    }

    /// Dimensions `n = dim L, dim L^(1), dim L^(2), ...` of the derived
    /// series, ending at `0` for solvable algebras or repeating the first
    /// dimension that failed to drop.
    pub fn derived_series_dims(&self, pol: &TolerancePolicy) -> Vec<usize> {
        let n = self.dimension();
        let mut dims = vec![n];
        let mut span = identity(n);
        loop {
            let next = self.derived_of(&span, pol);
            let dim = next.ncols();
            let prev = *dims.last().unwrap();
            dims.push(dim);
            if dim == 0 || dim == prev {
                return dims;
            }
            span = next;
        }
    }

    pub fn is_solvable(&self, pol: &TolerancePolicy) -> bool {
        self.derived_series_dims(pol).last() == Some(&0)
    }

    /// The two distinguished ideals `{x ⊗ 1}` and `{1 ⊗ y}` of a direct product.
    pub fn factor_ideals(&self) -> Option<(Ideal, Ideal)> {
        let (n, m) = self.split?;
        Some((
            Ideal {
                parent: self.clone(),
                members: (0..n).collect(),
            },
            Ideal {
                parent: self.clone(),
                members: (n..n + m).collect(),
            },
        ))
    }
}

/// A linear functional on `L` in the dual of the algebra's basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Character {
    pub values: Vec<C64>,
}

impl Character {
    pub fn new(values: Vec<C64>) -> Self {
        Self { values }
    }

    pub fn zero(n: usize) -> Self {
        Self { values: vec![ZERO; n] }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self {
            values: values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Euclidean distance between coefficient vectors.
    pub fn distance(&self, other: &Character) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn restrict(&self, indices: &[usize]) -> Character {
        Character::new(indices.iter().map(|&i| self.values[i]).collect())
    }

    /// Lexicographic order on `(re, im)` of successive coefficients.
    pub fn canonical_cmp(&self, other: &Character) -> Ordering {
        for (a, b) in self.values.iter().zip(&other.values) {
            let ord = a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
            if ord != Ordering::Equal {
                return ord;
            }
        }
        self.len().cmp(&other.len())
    }
}

/// Sorts canonically and drops points within `tol` of an already kept point.
///
/// The survivors are ordered on coordinates snapped to `tol`-chained
/// clusters, so rounding noise such as `2 + 1e-15` against `2` cannot
/// reorder points that differ only in a later coefficient.
pub fn canonical_dedup(mut chars: Vec<Character>, tol: f64) -> Vec<Character> {
    chars.sort_by(|a, b| a.canonical_cmp(b));
    let mut kept: Vec<Character> = Vec::with_capacity(chars.len());
    for c in chars {
        if kept.iter().all(|k| k.distance(&c) > tol) {
            kept.push(c);
        }
    }
    let keys = snapped_keys(&kept, tol);
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(&keys[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then_with(|| kept[a].canonical_cmp(&kept[b]))
    });
    let mut slots: Vec<Option<Character>> = kept.into_iter().map(Some).collect();
    order
        .into_iter()
        .map(|i| slots[i].take().expect("each index once"))
        .collect()
}

/// Per point, the real and imaginary parts of each coefficient replaced by
/// the smallest member of their cluster (values chained by gaps `<= tol`).
fn snapped_keys(chars: &[Character], tol: f64) -> Vec<Vec<f64>> {
    let n = chars.iter().map(|c| c.len()).min().unwrap_or(0);
    let mut keys = vec![Vec::with_capacity(2 * n); chars.len()];
    for k in 0..2 * n {
        let part = |c: &Character| {
            if k % 2 == 0 {
                c.values[k / 2].re
            } else {
                c.values[k / 2].im
            }
        };
        let mut idx: Vec<usize> = (0..chars.len()).collect();
        idx.sort_by(|&a, &b| part(&chars[a]).total_cmp(&part(&chars[b])));
        let mut rep = f64::NAN;
        let mut prev = f64::NAN;
        for i in idx {
            let v = part(&chars[i]);
            if prev.is_nan() || v - prev > tol {
                rep = v;
            }
            prev = v;
            keys[i].push(rep);
        }
    }
    keys
}

/// A subset of basis indices whose span is an ideal of `parent`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ideal {
    parent: OperatorLieAlgebra,
    members: Vec<usize>,
}

impl Ideal {
    pub fn new(parent: OperatorLieAlgebra, members: Vec<usize>, pol: &TolerancePolicy) -> Result<Self> {
        let n = parent.dimension();
        if members.windows(2).any(|w| w[0] >= w[1]) || members.iter().any(|&i| i >= n) {
            return Err(Error::InvalidInput(format!(
                "ideal indices {members:?} must be strictly increasing and below {n}"
            )));
        }
        let ideal = Self { parent, members };
        let residual = ideal.closure_residual();
        let tol = pol.rank_tol_rel * ideal.parent.structure_scale().max(1.0);
        if residual > tol {
            return Err(Error::InvalidInput(format!(
                "span of basis indices {:?} is not an ideal ([L, I] leaks {residual:.3e} outside)",
                ideal.members
            )));
        }
        Ok(ideal)
    }

    /// Re-bases `alg` so that the span of the coefficient columns of `span`
    /// becomes the trailing basis vectors, then wraps that span as an ideal.
    ///
    /// The algebra is kept unchanged when `span` is already the span of
    /// trailing basis vectors.
    pub fn from_span(alg: &OperatorLieAlgebra, span: &Matrix, pol: &TolerancePolicy) -> Result<Self> {
        let n = alg.dimension();
        if span.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "span has {} coefficient rows, algebra has dimension {n}",
                span.nrows()
            )));
        }
        let span = column_space(span, pol.rank_tol_rel, 0.0);
        let k = span.ncols();
        let lead = n - k;
        let leading_mass = (0..lead).map(|r| span.row(r).iter().map(|z| z.norm()).fold(0.0, f64::max));
        if leading_mass.fold(0.0, f64::max) <= pol.rank_tol_rel {
            return Ideal::new(alg.clone(), (lead..n).collect(), pol);
        }
        let complement = null_space(&span.adjoint(), pol.rank_tol_rel);
        if complement.ncols() != lead {
            return Err(Error::ToleranceInconsistency(format!(
                "complement of a {k}-dimensional span in dimension {n} came out {}-dimensional",
                complement.ncols()
            )));
        }
        let coeff_cols = (0..lead)
            .map(|c| complement.column(c).iter().copied().collect::<Vec<_>>())
            .chain((0..k).map(|c| span.column(c).iter().copied().collect()));
        let new_basis: Vec<Matrix> = coeff_cols.map(|c| alg.combination(&c)).collect();
        let rebased = build_algebra(&new_basis, pol)?;
        if rebased.dimension() != n {
            return Err(Error::ToleranceInconsistency(
                "unitary re-basing lost a basis element".into(),
            ));
        }
        Ideal::new(rebased, (lead..n).collect(), pol)
    }

    pub fn parent(&self) -> &OperatorLieAlgebra {
        &self.parent
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn dimension(&self) -> usize {
        self.members.len()
    }

    /// Largest `|c[i][j][k]|` with `j` inside and `k` outside the ideal.
    pub fn closure_residual(&self) -> f64 {
        let n = self.parent.dimension();
        let outside: Vec<usize> = (0..n).filter(|k| !self.members.contains(k)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for &j in &self.members {
                for &k in &outside {
                    worst = worst.max(self.parent.structure_constant(i, j, k).norm());
                }
            }
        }
        worst
    }

    /// The ideal as a Lie algebra in its own right, with structure constants
    /// restricted from the parent.
    pub fn subalgebra(&self) -> Result<OperatorLieAlgebra> {
        if self.members.is_empty() {
            return Err(Error::InvalidInput("the zero ideal is not a valid algebra".into()));
        }
        let k = self.members.len();
        let mut structure = vec![ZERO; k * k * k];
        for (a, &i) in self.members.iter().enumerate() {
            for (b, &j) in self.members.iter().enumerate() {
                for (c, &l) in self.members.iter().enumerate() {
                    structure[(a * k + b) * k + c] = self.parent.structure_constant(i, j, l);
                }
            }
        }
        Ok(OperatorLieAlgebra {
            ambient_dim: self.parent.ambient_dim,
            basis: self.members.iter().map(|&i| self.parent.basis[i].clone()).collect(),
            structure,
            split: None,
        })
    }
}

fn validate_square_family(mats: &[Matrix]) -> Result<usize> {
    let first = mats
        .first()
        .ok_or_else(|| Error::InvalidInput("empty list of matrices".into()))?;
    let d = first.nrows();
    if d == 0 {
        return Err(Error::InvalidInput("matrices must act on a nonzero space".into()));
    }
    for (i, m) in mats.iter().enumerate() {
        if m.shape() != (d, d) {
            return Err(Error::InvalidInput(format!(
                "matrix {i} has shape {:?}, expected ({d}, {d})",
                m.shape()
            )));
        }
        numeric::check_finite(m)?;
    }
    Ok(d)
}

fn stacked_vectors(mats: &[&Matrix]) -> Matrix {
    let rows = mats.first().map(|m| m.len()).unwrap_or(0);
    let cols: Vec<Vec<C64>> = mats.iter().map(|m| vectorize(m)).collect();
    Matrix::from_fn(rows, cols.len(), |r, c| cols[c][r])
}

fn prune_dependent(candidates: &[Matrix], pol: &TolerancePolicy) -> Result<Vec<Matrix>> {
    let mut kept: Vec<&Matrix> = Vec::new();
    for m in candidates {
        let mut trial = kept.clone();
        trial.push(m);
        if numeric::numerical_rank(&stacked_vectors(&trial), pol)? == trial.len() {
            kept = trial;
        }
    }
    Ok(kept.into_iter().cloned().collect())
}

fn solve_structure_constants(basis: &[Matrix], pol: &TolerancePolicy) -> Result<Vec<C64>> {
    let n = basis.len();
    let refs: Vec<&Matrix> = basis.iter().collect();
    let stacked = stacked_vectors(&refs);
    let svd = stacked.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let scale = basis.iter().map(max_abs).fold(1.0, f64::max).powi(2);
    let tolerance = pol.rank_tol_rel * scale;
    let mut structure = vec![ZERO; n * n * n];
    for i in 0..n {
        for j in i + 1..n {
            let comm = commutator(&basis[i], &basis[j])?;
            if frobenius(&comm) <= pol.rank_tol_rel * frobenius(&basis[i]) * frobenius(&basis[j]) {
                continue;
            }
            let rhs = Matrix::from_column_slice(comm.len(), 1, comm.as_slice());
            let coeffs = svd
                .solve(&rhs, pol.rank_tol_rel * smax)
                .map_err(|e| Error::InvalidInput(format!("least-squares solve failed: {e}")))?;
            let residual = max_abs(&(&stacked * &coeffs - &rhs));
            if residual > tolerance {
                return Err(Error::NotClosed {
                    i,
                    j,
                    residual,
                    tolerance,
                });
            }
            let cmax = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for k in 0..n {
                let mut c = coeffs[(k, 0)];
                if c.norm() <= 1e-13 * cmax {
                    c = ZERO;
                }
                structure[(i * n + j) * n + k] = c;
                structure[(j * n + i) * n + k] = -c;
            }
        }
    }
    Ok(structure)
}

/// Builds a solvable Lie algebra from candidate basis matrices.
///
/// Linearly dependent candidates are pruned (first occurrence wins), structure
/// constants are solved by least squares, and closure and solvability are
/// verified.
pub fn build_algebra(basis_candidates: &[Matrix], pol: &TolerancePolicy) -> Result<OperatorLieAlgebra> {
    pol.validate()?;
    let d = validate_square_family(basis_candidates)?;
    let basis = prune_dependent(basis_candidates, pol)?;
    if basis.is_empty() {
        return Err(Error::InvalidInput("all candidate matrices are zero".into()));
    }
    let structure = solve_structure_constants(&basis, pol)?;
    let alg = OperatorLieAlgebra {
        ambient_dim: d,
        basis,
        structure,
        split: None,
    };
    let dims = alg.derived_series_dims(pol);
    if dims.last() != Some(&0) {
        return Err(Error::NotSolvable { dims });
    }
    Ok(alg)
}

/// Basis of the smallest matrix Lie algebra containing `generators`.
///
/// Independent generators are returned first, unchanged; new directions found
/// among commutators are appended orthonormalized (Frobenius inner product).
pub fn close_under_bracket(generators: &[Matrix]) -> Result<Vec<Matrix>> {
    let d = validate_square_family(generators)?;
    let mut basis: Vec<Matrix> = Vec::new();
    let mut ortho: Vec<Matrix> = Vec::new();

    fn residual_against(ortho: &[Matrix], m: &Matrix) -> Matrix {
        let mut r = m.clone();
        // Two passes of Gram-Schmidt keep the residual orthogonal to working precision.
        for _ in 0..2 {
            for q in ortho {
                let proj = q.dotc(&r);
                r -= q * proj;
            }
        }
        r
    }

    for g in generators {
        let r = residual_against(&ortho, g);
        let rn = frobenius(&r);
        if rn > CLOSURE_TOL * frobenius(g) && rn > 0.0 {
            basis.push(g.clone());
            ortho.push(r / C64::new(rn, 0.0));
        }
    }

    let mut i = 0;
    while i < basis.len() && basis.len() < d * d {
        for j in 0..i {
            let comm = commutator(&basis[j], &basis[i])?;
            let r = residual_against(&ortho, &comm);
            let rn = frobenius(&r);
            if rn > CLOSURE_TOL * frobenius(&basis[i]) * frobenius(&basis[j]) {
                let q = r / C64::new(rn, 0.0);
                basis.push(q.clone());
                ortho.push(q);
            }
        }
        i += 1;
    }
    Ok(basis)
}

/// The derived algebra `L^2` as an ideal spanned by trailing basis vectors of
/// a (possibly re-based) copy of `alg`.
pub fn derived_subalgebra(alg: &OperatorLieAlgebra, pol: &TolerancePolicy) -> Result<Ideal> {
    let span = alg.derived_basis(pol);
    Ideal::from_span(alg, &span, pol)
}

/// Largest `|f([x_i, x_j])|` over basis pairs.
pub fn character_residual(alg: &OperatorLieAlgebra, f: &Character) -> f64 {
    let n = alg.dimension();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let v: C64 = (0..n).map(|k| alg.structure_constant(i, j, k) * f.values[k]).sum();
            worst = worst.max(v.norm());
        }
    }
    worst
}

pub(crate) fn character_tolerance(alg: &OperatorLieAlgebra, f: &Character, pol: &TolerancePolicy) -> f64 {
    let fmax = f.values.iter().map(|z| z.norm()).fold(1.0, f64::max);
    pol.rank_tol_rel * fmax * alg.structure_scale().max(1.0)
}

pub fn is_character(alg: &OperatorLieAlgebra, f: &Character, pol: &TolerancePolicy) -> Result<bool> {
    if f.len() != alg.dimension() {
        return Err(Error::InvalidInput(format!(
            "character has {} coefficients, algebra has dimension {}",
            f.len(),
            alg.dimension()
        )));
    }
    Ok(character_residual(alg, f) <= character_tolerance(alg, f, pol))
}

/// Fails with [`Error::NotACharacter`] unless `f` vanishes on `L^2`.
pub fn require_character(alg: &OperatorLieAlgebra, f: &Character, pol: &TolerancePolicy) -> Result<()> {
    if is_character(alg, f, pol)? {
        Ok(())
    } else {
        Err(Error::NotACharacter {
            residual: character_residual(alg, f),
            tolerance: character_tolerance(alg, f, pol),
        })
    }
}

/// `L1 × L2 = {x ⊗ 1 + 1 ⊗ y}` acting on `C^{d1} ⊗ C^{d2}`, with basis
/// `(x_1 ⊗ 1, ..., x_n ⊗ 1, 1 ⊗ y_1, ..., 1 ⊗ y_m)`.
pub fn direct_product(a1: &OperatorLieAlgebra, a2: &OperatorLieAlgebra) -> Result<OperatorLieAlgebra> {
    let (d1, d2) = (a1.ambient_dim, a2.ambient_dim);
    let d = d1
        .checked_mul(d2)
        .filter(|d| d.checked_mul(*d).is_some())
        .ok_or(Error::SizeLimit {
            what: "product ambient dimension".into(),
            size: usize::MAX,
            cap: usize::MAX,
        })?;
    let (n, m) = (a1.dimension(), a2.dimension());
    let i1 = identity(d1);
    let i2 = identity(d2);
    let mut basis = Vec::with_capacity(n + m);
    for x in &a1.basis {
        basis.push(numeric::kron(x, &i2)?);
    }
    for y in &a2.basis {
        basis.push(numeric::kron(&i1, y)?);
    }
    let t = n + m;
    let mut structure = vec![ZERO; t * t * t];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                structure[(i * t + j) * t + k] = a1.structure_constant(i, j, k);
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                structure[((n + i) * t + n + j) * t + n + k] = a2.structure_constant(i, j, k);
            }
        }
    }
    debug_assert_eq!(basis[0].nrows(), d);
    Ok(OperatorLieAlgebra {
        ambient_dim: d,
        basis,
        structure,
        split: Some((n, m)),
    })
}

/// `f ↦ (f ∘ i_1, f ∘ i_2)` for a character of a direct product.
pub fn split_character(prod: &OperatorLieAlgebra, f: &Character) -> Result<(Character, Character)> {
    let (n, m) = prod
        .split
        .ok_or_else(|| Error::InvalidInput("algebra is not a recorded direct product".into()))?;
    if f.len() != n + m {
        return Err(Error::InvalidInput(format!(
            "character has {} coefficients, product has dimension {}",
            f.len(),
            n + m
        )));
    }
    Ok((
        Character::new(f.values[..n].to_vec()),
        Character::new(f.values[n..].to_vec()),
    ))
}

pub fn join_character(f1: &Character, f2: &Character) -> Character {
    Character::new(f1.values.iter().chain(&f2.values).copied().collect())
}

/// Unitary simultaneous triangularization of a solvable algebra.
#[derive(Debug, Clone)]
pub struct Triangularization {
    /// Unitary `S` with `S^{-1} x S` upper triangular for every basis element.
    pub change_of_basis: Matrix,
    /// Diagonal functionals `λ_j(x_i) = (S^{-1} x_i S)[j, j]` for `j = 0..d`.
    pub diagonals: Vec<Character>,
    /// `diagonals` sorted canonically with duplicates within `match_tol` removed.
    pub weights: Vec<Character>,
    /// Largest `|strict lower entry| / ‖x_i‖_max` over basis elements.
    pub residual: f64,
}

fn cluster_eigenvalue(b: &Matrix) -> Result<C64> {
    let s = b.nrows();
    // An iteration cap of zero means unbounded in nalgebra, and the strictest
    // epsilon can stall on blocks with repeated eigenvalues.
    let eig = [f64::EPSILON, 1e-14, 1e-12]
        .iter()
        .find_map(|&eps| {
            b.clone()
                .try_schur(eps, 200 * s.max(1))
                .and_then(|schur| schur.eigenvalues())
        })
        .ok_or(Error::Triangularization { residual: f64::NAN })?;
    let lead = eig
        .iter()
        .copied()
        .max_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)))
        .expect("nonempty block");
    let radius = EIGEN_CLUSTER_TOL * frobenius(b).max(1.0);
    let cluster: Vec<C64> = eig.iter().copied().filter(|e| (e - lead).norm() <= radius).collect();
    debug_assert!(!cluster.is_empty() && cluster.len() <= s);
    Ok(cluster.iter().sum::<C64>() / C64::new(cluster.len() as f64, 0.0))
}

fn smallest_right_singular_vector(m: &Matrix) -> Matrix {
    let v = null_space(m, f64::INFINITY);
    // null_space with an infinite threshold returns every right singular vector;
    // pick the one with the smallest residual.
    let mut best = 0;
    let mut best_norm = f64::INFINITY;
    for c in 0..v.ncols() {
        let r = (m * v.column(c)).norm();
        if r < best_norm {
            best_norm = r;
            best = c;
        }
    }
    v.columns(best, 1).into_owned()
}

/// A common eigenvector of the block family. `derived` spans the image of
/// `L^2`, which acts nilpotently; on its joint kernel the whole family
/// commutes, so successive eigenspace intersections stay invariant.
///
/// Kernel thresholds are measured against `ref_scale`, the size of the
/// undeflated family: after deflation some blocks are pure rounding noise
/// and a threshold relative to their own norm would reject every direction.
fn common_eigenvector(blocks: &[Matrix], derived: &[Matrix], ref_scale: f64, pol: &TolerancePolicy) -> Result<Matrix> {
    let s = blocks[0].nrows();
    let mut space = if derived.is_empty() {
        identity(s)
    } else {
        let mut stacked = Matrix::zeros(s * derived.len(), s);
        for (k, y) in derived.iter().enumerate() {
            stacked.view_mut((k * s, 0), (s, s)).copy_from(y);
        }
        let scale = frobenius(&stacked).max(ref_scale);
        let ker = null_space(&stacked, pol.singularity_tol * scale);
        if ker.ncols() == 0 {
            smallest_right_singular_vector(&stacked)
        } else {
            ker
        }
    };
    for a in blocks {
        if space.ncols() == 1 {
            break;
        }
        let b = space.adjoint() * a * &space;
        let lambda = cluster_eigenvalue(&b)?;
        let shifted = &b - identity(b.nrows()) * lambda;
        let scale = frobenius(&b).max(lambda.norm()).max(ref_scale);
        let mut ker = null_space(&shifted, pol.singularity_tol * scale);
        if ker.ncols() == 0 {
            ker = smallest_right_singular_vector(&shifted);
        }
        space = &space * ker;
    }
    let v = space.columns(0, 1).into_owned();
    let norm = v.norm();
    Ok(v / C64::new(norm, 0.0))
}

/// Unitary `S` with `S^* x S` upper triangular for every `x` in `family`,
/// together with the conjugated matrices. `family` must span a solvable Lie
/// algebra of matrices whose derived algebra is spanned by `derived`.
///
/// Constructive Lie theorem: peels off one common eigenvector at a time and
/// deflates onto the orthogonal complement.
fn triangularize_family(family: &[Matrix], derived: &[Matrix], pol: &TolerancePolicy) -> Result<(Matrix, Vec<Matrix>)> {
    let d = family[0].nrows();
    let ref_scale = family.iter().map(max_abs).fold(f64::MIN_POSITIVE, f64::max);
    let mut s_total = identity(d);
    let mut blocks = family.to_vec();
    let mut derived_blocks = derived.to_vec();
    for step in 0..d {
        let s = d - step;
        let v = if s == 1 {
            Matrix::from_element(1, 1, numeric::ONE)
        } else {
            common_eigenvector(&blocks, &derived_blocks, ref_scale, pol)?
        };
        let q = unitary_with_first_column(&v);
        let mut embed = identity(d);
        embed.view_mut((step, step), (s, s)).copy_from(&q);
        s_total *= embed;
        let deflate = |a: &Matrix| -> Matrix {
            let t = q.adjoint() * a * &q;
            t.view((1, 1), (s - 1, s - 1)).into_owned()
        };
        blocks = blocks.iter().map(deflate).collect();
        derived_blocks = derived_blocks.iter().map(deflate).collect();
    }
    let conj = family.iter().map(|x| s_total.adjoint() * x * &s_total).collect();
    Ok((s_total, conj))
}

fn strict_lower_max(t: &Matrix) -> f64 {
    let d = t.nrows();
    let mut out: f64 = 0.0;
    for j in 0..d {
        for i in j + 1..d {
            out = out.max(t[(i, j)].norm());
        }
    }
    out
}

fn derived_matrices(alg: &OperatorLieAlgebra, pol: &TolerancePolicy, of: impl Fn(&[C64]) -> Matrix) -> Vec<Matrix> {
    let derived = alg.derived_basis(pol);
    (0..derived.ncols())
        .map(|c| of(&derived.column(c).iter().copied().collect::<Vec<_>>()))
        .collect()
}

pub fn triangularize(alg: &OperatorLieAlgebra, pol: &TolerancePolicy) -> Result<Triangularization> {
    let n = alg.dimension();
    let derived = derived_matrices(alg, pol, |u| alg.combination(u));
    let (s_total, conj) = triangularize_family(&alg.basis, &derived, pol)?;
    let residual = alg
        .basis
        .iter()
        .zip(&conj)
        .map(|(x, t)| strict_lower_max(t) / max_abs(x).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    if residual > pol.singularity_tol {
        return Err(Error::Triangularization { residual });
    }
    let diagonals: Vec<Character> = (0..alg.ambient_dim)
        .map(|j| Character::new((0..n).map(|i| conj[i][(j, j)]).collect()))
        .collect();
    let weights = canonical_dedup(diagonals.clone(), pol.match_tol);
    Ok(Triangularization {
        change_of_basis: s_total,
        diagonals,
        weights,
        residual,
    })
}

/// Matrix of `ad_{x_i}: y -> [x_i, y]` in the basis of `alg`.
pub fn adjoint_matrix(alg: &OperatorLieAlgebra, i: usize) -> Matrix {
    let n = alg.dimension();
    Matrix::from_fn(n, n, |k, j| alg.structure_constant(i, j, k))
}

/// Weights of the adjoint representation, one per basis vector of `L`
/// (with multiplicity, not deduplicated).
pub fn adjoint_weights(alg: &OperatorLieAlgebra, pol: &TolerancePolicy) -> Result<Vec<Character>> {
    let n = alg.dimension();
    let ad: Vec<Matrix> = (0..n).map(|i| adjoint_matrix(alg, i)).collect();
    let scale = ad.iter().map(max_abs).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(vec![Character::zero(n); n]);
    }
    let derived = derived_matrices(alg, pol, |u| {
        u.iter().zip(&ad).fold(Matrix::zeros(n, n), |acc, (&c, a)| acc + a * c)
    });
    let (_, conj) = triangularize_family(&ad, &derived, pol)?;
    // Central elements have ad = 0, so the residual is measured against the
    // whole family rather than per element.
    let residual = conj.iter().map(strict_lower_max).fold(0.0, f64::max) / scale;
    if residual > pol.singularity_tol {
        return Err(Error::Triangularization { residual });
    }
    Ok((0..n)
        .map(|j| Character::new((0..n).map(|i| conj[i][(j, j)]).collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ONE;

    fn diag(vals: &[f64]) -> Matrix {
        let n = vals.len();
        Matrix::from_fn(n, n, |i, j| if i == j { C64::new(vals[i], 0.0) } else { ZERO })
    }

    fn xy_pair() -> (Matrix, Matrix) {
        let x = Matrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let y = Matrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        (x, y)
    }

    fn pol() -> TolerancePolicy {
        TolerancePolicy::default()
    }

    #[test]
    fn build_abelian_single() {
        let alg = build_algebra(&[diag(&[1.0, 2.0])], &pol()).unwrap();
        assert_eq!(alg.dimension(), 1);
        assert_eq!(alg.ambient_dim(), 2);
        assert_eq!(alg.derived_series_dims(&pol()), vec![1, 0]);
    }

    #[test]
    fn build_solvable_pair() {
        let (x, y) = xy_pair();
        let alg = build_algebra(&[x, y], &pol()).unwrap();
        assert_eq!(alg.dimension(), 2);
        assert!((alg.structure_constant(0, 1, 0)).norm() < 1e-15);
        assert!((alg.structure_constant(0, 1, 1) - ONE).norm() < 1e-14);
        assert!((alg.structure_constant(1, 0, 1) + ONE).norm() < 1e-14);
        assert_eq!(alg.derived_series_dims(&pol()), vec![2, 1, 0]);
    }

    #[test]
    fn sl2_generators_are_not_closed_then_not_solvable() {
        let e = Matrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let f = Matrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]);
        let gens = [e, f];
        assert!(matches!(
            build_algebra(&gens, &pol()),
            Err(Error::NotClosed { i: 0, j: 1, .. })
        ));
        let closed = close_under_bracket(&gens).unwrap();
        assert_eq!(closed.len(), 3);
        match build_algebra(&closed, &pol()) {
            Err(Error::NotSolvable { dims }) => assert_eq!(dims, vec![3, 3]),
            other => panic!("expected solvability error, got {other:?}"),
        }
    }

    #[test]
    fn dependent_candidates_are_pruned() {
        let a = diag(&[1.0, 2.0]);
        let b = &a * C64::new(3.0, 0.0);
        let alg = build_algebra(&[a.clone(), b, Matrix::zeros(2, 2)], &pol()).unwrap();
        assert_eq!(alg.basis(), &[a]);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(build_algebra(&[], &pol()).is_err());
        assert!(build_algebra(&[Matrix::zeros(0, 0)], &pol()).is_err());
        assert!(build_algebra(&[Matrix::zeros(2, 2)], &pol()).is_err());
        assert!(build_algebra(&[identity(2), identity(3)], &pol()).is_err());
    }

    #[test]
    fn close_keeps_commuting_generators() {
        let gens = [diag(&[1.0, 2.0, 3.0]), diag(&[0.0, 1.0, -1.0]), diag(&[1.0, 0.0, 0.0])];
        let closed = close_under_bracket(&gens).unwrap();
        assert_eq!(closed.len(), 3);
        assert_eq!(closed[..], gens[..]);
        let (x, y) = xy_pair();
        assert_eq!(close_under_bracket(&[x.clone(), y.clone()]).unwrap(), vec![x, y]);
    }

    #[test]
    fn close_strictly_upper_stays_strictly_upper() {
        let a = Matrix::from_fn(
            4,
            4,
            |i, j| if j > i { C64::new((i + 2 * j) as f64, 1.0) } else { ZERO },
        );
        let b = Matrix::from_fn(4, 4, |i, j| {
            if j > i {
                C64::new(1.0, (i * j) as f64 - 1.5)
            } else {
                ZERO
            }
        });
        let closed = close_under_bracket(&[a, b]).unwrap();
        assert!(closed.len() <= 6 && closed.len() >= 3);
        for m in &closed {
            for i in 0..4 {
                for j in 0..=i {
                    assert!(m[(i, j)].norm() < 1e-12);
                }
            }
        }
        let alg = build_algebra(&closed, &pol()).unwrap();
        assert_eq!(alg.dimension(), closed.len());
    }

    #[test]
    fn derived_subalgebra_examples() {
        let abelian = build_algebra(&[diag(&[1.0, 2.0]), diag(&[3.0, 4.0])], &pol()).unwrap();
        let ideal = derived_subalgebra(&abelian, &pol()).unwrap();
        assert_eq!(ideal.dimension(), 0);

        let (x, y) = xy_pair();
        let alg = build_algebra(&[x, y.clone()], &pol()).unwrap();
        let ideal = derived_subalgebra(&alg, &pol()).unwrap();
        assert_eq!(ideal.members(), &[1]);
        assert_eq!(ideal.parent(), &alg);
        assert_eq!(ideal.subalgebra().unwrap().basis(), &[y]);
    }

    #[test]
    fn derived_subalgebra_rebases_when_needed() {
        // Basis (y, x): L^2 = span{y} is the leading vector, so the algebra is re-based.
        let (x, y) = xy_pair();
        let alg = build_algebra(&[y, x], &pol()).unwrap();
        let ideal = derived_subalgebra(&alg, &pol()).unwrap();
        assert_eq!(ideal.members(), &[1]);
        let sub = ideal.subalgebra().unwrap();
        let z = &sub.basis()[0];
        // The ideal element is a unit multiple of E12.
        assert!(z[(0, 0)].norm() < 1e-14 && z[(1, 0)].norm() < 1e-14 && z[(1, 1)].norm() < 1e-14);
        assert!((z[(0, 1)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn derived_of_product_is_product_of_derived() {
        let (x, y) = xy_pair();
        let a1 = build_algebra(&[x, y], &pol()).unwrap();
        let a2 = build_algebra(&[diag(&[1.0, 2.0])], &pol()).unwrap();
        let prod = direct_product(&a1, &a2).unwrap();
        let ideal = derived_subalgebra(&prod, &pol()).unwrap();
        // L^2 = L1^2 × L2^2 = span{y ⊗ 1} × 0.
        assert_eq!(ideal.dimension(), 1);
        let sub = ideal.subalgebra().unwrap();
        let z = &sub.basis()[0];
        let expect = numeric::kron(&xy_pair().1, &identity(2)).unwrap();
        let phase = z[(0, 2)] / expect[(0, 2)];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        assert!(max_abs(&(z - expect * phase)) < 1e-12);
    }

    #[test]
    fn character_examples() {
        let abelian = build_algebra(&[diag(&[1.0, 2.0]), diag(&[3.0, 4.0])], &pol()).unwrap();
        assert!(is_character(&abelian, &Character::from_real(&[7.0, -3.0]), &pol()).unwrap());
        let (x, y) = xy_pair();
        let alg = build_algebra(&[x, y], &pol()).unwrap();
        assert!(is_character(&alg, &Character::from_real(&[5.0, 0.0]), &pol()).unwrap());
        assert!(!is_character(&alg, &Character::from_real(&[0.0, 1.0]), &pol()).unwrap());
        assert!(is_character(&alg, &Character::from_real(&[1.0]), &pol()).is_err());
    }

    #[test]
    fn direct_product_of_diagonals() {
        let a1 = build_algebra(&[diag(&[1.0, 2.0])], &pol()).unwrap();
        let a2 = build_algebra(&[diag(&[3.0, 4.0])], &pol()).unwrap();
        let prod = direct_product(&a1, &a2).unwrap();
        assert_eq!(prod.ambient_dim(), 4);
        assert_eq!(prod.basis()[0], diag(&[1.0, 1.0, 2.0, 2.0]));
        assert_eq!(prod.basis()[1], diag(&[3.0, 4.0, 3.0, 4.0]));
        assert_eq!(prod.derived_series_dims(&pol()), vec![2, 0]);
        assert_eq!(prod.product_split(), Some((1, 1)));
    }

    #[test]
    fn direct_product_brackets_are_block_diagonal() {
        let (x, y) = xy_pair();
        let a1 = build_algebra(&[x, y], &pol()).unwrap();
        let a2 = build_algebra(&[diag(&[1.0, 2.0])], &pol()).unwrap();
        let prod = direct_product(&a1, &a2).unwrap();
        assert_eq!(prod.dimension(), 3);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let c = prod.structure_constant(i, j, k);
                    let expected = match (i, j, k) {
                        (0, 1, 1) => ONE,
                        (1, 0, 1) => -ONE,
                        _ => ZERO,
                    };
                    assert!((c - expected).norm() < 1e-14, "c[{i}][{j}][{k}] = {c}");
                }
            }
        }
        // The recorded constants agree with direct Kronecker computation.
        let b = prod.basis();
        for i in 0..3 {
            for j in 0..3 {
                let comm = commutator(&b[i], &b[j]).unwrap();
                let coeffs: Vec<C64> = (0..3).map(|k| prod.structure_constant(i, j, k)).collect();
                assert!(max_abs(&(comm - prod.combination(&coeffs))) < 1e-14);
            }
        }
        let (l1, l2) = prod.factor_ideals().unwrap();
        assert_eq!(l1.members(), &[0, 1]);
        assert_eq!(l2.members(), &[2]);
        assert!(Ideal::new(prod.clone(), vec![0, 1], &pol()).is_ok());
        assert!(Ideal::new(prod.clone(), vec![0], &pol()).is_err());
    }

    #[test]
    fn split_and_join() {
        let a1 = build_algebra(&[diag(&[1.0, 2.0])], &pol()).unwrap();
        let a2 = build_algebra(&[diag(&[3.0, 4.0]), identity(2)], &pol()).unwrap();
        let prod = direct_product(&a1, &a2).unwrap();
        let f = Character::from_real(&[1.0, 2.0, 3.0]);
        let (f1, f2) = split_character(&prod, &f).unwrap();
        assert_eq!(f1, Character::from_real(&[1.0]));
        assert_eq!(f2, Character::from_real(&[2.0, 3.0]));
        assert_eq!(join_character(&f1, &f2), f);
        assert!(split_character(&a1, &Character::from_real(&[1.0])).is_err());
    }

    #[test]
    fn split_of_character_gives_characters() {
        let (x, y) = xy_pair();
        let a1 = build_algebra(&[x.clone(), y.clone()], &pol()).unwrap();
        let a2 = build_algebra(&[x, y], &pol()).unwrap();
        let prod = direct_product(&a1, &a2).unwrap();
        let f = Character::from_real(&[2.0, 0.0, -1.0, 0.0]);
        assert!(is_character(&prod, &f, &pol()).unwrap());
        let (f1, f2) = split_character(&prod, &f).unwrap();
        assert!(is_character(&a1, &f1, &pol()).unwrap());
        assert!(is_character(&a2, &f2, &pol()).unwrap());
        let g = Character::from_real(&[2.0, 0.0, -1.0, 1.0]);
        assert!(!is_character(&prod, &g, &pol()).unwrap());
    }

    #[test]
    fn triangularize_examples() {
        let alg = build_algebra(&[diag(&[1.0, 2.0])], &pol()).unwrap();
        let tri = triangularize(&alg, &pol()).unwrap();
        let w: Vec<Vec<C64>> = tri.weights.iter().map(|c| c.values.clone()).collect();
        assert_eq!(w.len(), 2);
        assert!((w[0][0] - ONE).norm() < 1e-12);
        assert!((w[1][0] - C64::new(2.0, 0.0)).norm() < 1e-12);

        let (x, y) = xy_pair();
        let alg = build_algebra(&[x, y], &pol()).unwrap();
        let tri = triangularize(&alg, &pol()).unwrap();
        assert_eq!(tri.weights.len(), 2);
        assert!(tri.weights[0].distance(&Character::from_real(&[0.0, 0.0])) < 1e-12);
        assert!(tri.weights[1].distance(&Character::from_real(&[1.0, 0.0])) < 1e-12);
        for w in &tri.weights {
            assert!(is_character(&alg, w, &pol()).unwrap());
        }
        let s = &tri.change_of_basis;
        assert!(max_abs(&(s.adjoint() * s - identity(2))) < 1e-13);
    }

    #[test]
    fn triangularize_product_with_repeated_eigenvalues() {
        let (x, y) = xy_pair();
        let a1 = build_algebra(&[x, y], &pol()).unwrap();
        let a2 = build_algebra(&[diag(&[5.0, 6.0])], &pol()).unwrap();
        let prod = direct_product(&a1, &a2).unwrap();
        let tri = triangularize(&prod, &pol()).unwrap();
        assert!(tri.residual < 1e-12);
        let expect = [[0.0, 0.0, 5.0], [0.0, 0.0, 6.0], [1.0, 0.0, 5.0], [1.0, 0.0, 6.0]];
        assert_eq!(tri.weights.len(), 4);
        for (w, e) in tri.weights.iter().zip(expect) {
            assert!(w.distance(&Character::from_real(&e)) < 1e-10, "{w:?}");
        }
    }

    #[test]
    fn triangularize_non_normal_conjugated_family() {
        // Upper-triangular algebra conjugated by a fixed non-unitary matrix.
        let a = Matrix::from_row_slice(
            3,
            3,
            &[
                C64::new(1.0, 0.5),
                C64::new(2.0, 0.0),
                C64::new(0.0, 1.0),
                ZERO,
                C64::new(-0.5, 0.0),
                C64::new(1.0, 1.0),
                ZERO,
                ZERO,
                C64::new(2.0, -1.0),
            ],
        );
        let n = Matrix::from_row_slice(3, 3, &[ZERO, ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ZERO, ZERO]);
        let p = Matrix::from_row_slice(
            3,
            3,
            &[
                ONE,
                C64::new(0.3, 0.0),
                ZERO,
                ZERO,
                ONE,
                C64::new(0.0, 0.4),
                C64::new(0.2, 0.0),
                ZERO,
                ONE,
            ],
        );
        let pinv = p.clone().try_inverse().unwrap();
        let gens: Vec<Matrix> = [a, n].iter().map(|m| &p * m * &pinv).collect();
        let closed = close_under_bracket(&gens).unwrap();
        let alg = build_algebra(&closed, &pol()).unwrap();
        let tri = triangularize(&alg, &pol()).unwrap();
        assert!(tri.residual < 1e-10);
        for w in &tri.weights {
            assert!(is_character(&alg, w, &pol()).unwrap());
        }
    }

    #[test]
    fn canonical_dedup_merges_close_points() {
        let pts = vec![
            Character::from_real(&[2.0]),
            Character::from_real(&[1.0]),
            Character::from_real(&[1.0 + 1e-9]),
        ];
        let out = canonical_dedup(pts, 1e-6);
        assert_eq!(out, vec![Character::from_real(&[1.0]), Character::from_real(&[2.0])]);
    }

    #[test]
    fn canonical_order_ignores_rounding_noise() {
        let pts = vec![
            Character::from_real(&[2.0 + 4e-16, 3.0]),
            Character::from_real(&[2.0, 4.0]),
            Character::from_real(&[1.0, 4.0]),
            Character::from_real(&[1.0 - 2e-16, 3.0]),
        ];
        let out: Vec<f64> = canonical_dedup(pts, 1e-6).iter().map(|c| c.values[1].re).collect();
        assert_eq!(out, vec![3.0, 4.0, 3.0, 4.0]);
    }
}
