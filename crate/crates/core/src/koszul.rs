//! The twisted Koszul complex `(H ⊗ ΛL, d(f))` as explicit matrices.
//!
//! Coordinates on `H ⊗ Λ^p L`: one block of size `d` per exterior index, blocks
//! in lexicographic order, the `H` index varying fastest inside a block. The
//! total space is `⊕_p H ⊗ Λ^p L` with degrees ordered `0..=n`.
//!
//! Matrices act on `H` from the left, so `L` acts through the opposite
//! product: the bracket contraction uses `yx - xy`, which is what makes
//! `d ∘ d = 0` with the `(x - f(x))` action terms.
//!
//! Exterior indices are 0-based here (`{0, .., n-1}`).

use std::collections::HashMap;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::lie::{require_character, Character, OperatorLieAlgebra};
use crate::numeric::{identity, kron, max_abs, Matrix, TolerancePolicy, C64, ONE, ZERO};

/// A strictly increasing list of basis indices, i.e. `x_{i_1} ∧ ... ∧ x_{i_p}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExteriorIndex(Vec<usize>);

impl ExteriorIndex {
    pub fn new(subset: Vec<usize>) -> Result<Self> {
        if subset.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "exterior index {subset:?} is not strictly increasing"
            )));
        }
        Ok(Self(subset))
    }

    pub fn subset(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    fn without_positions(&self, skip: &[usize]) -> ExteriorIndex {
        ExteriorIndex(
            self.0
                .iter()
                .enumerate()
                .filter(|(pos, _)| !skip.contains(pos))
                .map(|(_, &i)| i)
                .collect(),
        )
    }
}

/// All `p`-subsets of `{0, .., n-1}` in lexicographic order.
pub fn exterior_basis(n: usize, p: usize) -> Result<Vec<ExteriorIndex>> {
    if p > n {
        return Err(Error::InvalidInput(format!("degree {p} exceeds algebra dimension {n}")));
    }
    Ok((0..n).combinations(p).map(ExteriorIndex).collect())
}

/// Normalizes `x_k ∧ x_S` into the ordered basis: `None` when `k ∈ S`,
/// otherwise the sign of moving `x_k` past the smaller elements of `S`.
pub fn wedge_insert(k: usize, target: &ExteriorIndex) -> Option<(i32, ExteriorIndex)> {
    match target.0.binary_search(&k) {
        Ok(_) => None,
        Err(pos) => {
            let mut out = target.0.clone();
            out.insert(pos, k);
            let sign = if pos % 2 == 0 { 1 } else { -1 };
            Some((sign, ExteriorIndex(out)))
        }
    }
}

/// Exterior bases for every degree of `ΛL` with reverse lookup.
#[derive(Debug, Clone)]
pub struct ExteriorLayout {
    n: usize,
    degrees: Vec<Vec<ExteriorIndex>>,
    lookup: Vec<HashMap<ExteriorIndex, usize>>,
}

impl ExteriorLayout {
    pub fn new(n: usize) -> Self {
        let degrees: Vec<Vec<ExteriorIndex>> = (0..=n).map(|p| exterior_basis(n, p).expect("p <= n")).collect();
        let lookup = degrees
            .iter()
            .map(|basis| basis.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect())
            .collect();
        Self { n, degrees, lookup }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn basis(&self, p: usize) -> &[ExteriorIndex] {
        &self.degrees[p]
    }

    pub fn count(&self, p: usize) -> usize {
        self.degrees[p].len()
    }

    pub fn position(&self, s: &ExteriorIndex) -> usize {
        self.lookup[s.degree()][s]
    }

    /// Offset of each degree inside `⊕_p block_size * C(n, p)`, plus the total.
    pub fn offsets(&self, block_size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n + 2);
        let mut acc = 0;
        for p in 0..=self.n {
            out.push(acc);
            acc += block_size * self.count(p);
        }
        out.push(acc);
        out
    }
}

fn add_block(m: &mut Matrix, row: usize, col: usize, block: &Matrix, scale: C64) {
    let (r, c) = block.shape();
    let mut view = m.view_mut((row, col), (r, c));
    view += block * scale;
}

fn add_identity(m: &mut Matrix, row: usize, col: usize, d: usize, scale: C64) {
    for h in 0..d {
        m[(row + h, col + h)] += scale;
    }
}

fn assemble_boundary(alg: &OperatorLieAlgebra, f: &Character, p: usize, layout: &ExteriorLayout) -> Matrix {
    let d = alg.ambient_dim();
    let n = alg.dimension();
    let mut out = Matrix::zeros(d * layout.count(p - 1), d * layout.count(p));
    let shifted: Vec<Matrix> = alg
        .basis()
        .iter()
        .zip(&f.values)
        .map(|(x, &fx)| x - identity(d) * fx)
        .collect();
    for (col_pos, s) in layout.basis(p).iter().enumerate() {
        let col = col_pos * d;
        let idx = s.subset();
        for k in 0..p {
            let face = s.without_positions(&[k]);
            let sign = if k % 2 == 0 { ONE } else { -ONE };
            add_block(&mut out, layout.position(&face) * d, col, &shifted[idx[k]], sign);
        }
        for k in 0..p {
            for l in k + 1..p {
                let rest = s.without_positions(&[k, l]);
                let sign = if (k + l) % 2 == 0 { 1.0 } else { -1.0 };
                for m in 0..n {
                    // Opposite product: [x_k, x_l]_op = -c[k][l][m] x_m.
                    let c = -alg.structure_constant(idx[k], idx[l], m);
                    if c == ZERO {
                        continue;
                    }
                    if let Some((wsign, target)) = wedge_insert(m, &rest) {
                        let scale = c * (sign * wsign as f64);
                        add_identity(&mut out, layout.position(&target) * d, col, d, scale);
                    }
                }
            }
        }
    }
    out
}

/// Matrix of `d_p(f) : H ⊗ Λ^p L → H ⊗ Λ^{p-1} L` for `1 <= p <= n`.
pub fn boundary_matrix(alg: &OperatorLieAlgebra, f: &Character, p: usize, pol: &TolerancePolicy) -> Result<Matrix> {
    let n = alg.dimension();
    if p == 0 || p > n {
        return Err(Error::InvalidInput(format!("boundary degree {p} outside 1..={n}")));
    }
    require_character(alg, f, pol)?;
    Ok(assemble_boundary(alg, f, p, &ExteriorLayout::new(n)))
}

#[derive(Debug, Clone)]
pub struct KoszulComplex {
    algebra: OperatorLieAlgebra,
    character: Character,
    layout: ExteriorLayout,
    graded_dims: Vec<usize>,
    /// `boundaries[p - 1]` is `D_p`.
    boundaries: Vec<Matrix>,
}

/// Relative bound on `‖D_p D_{p+1}‖_max`.
pub const NILPOTENCY_TOL: f64 = 1e-10;

/// `(p, ‖D_p D_{p+1}‖_max, 1e-10 * max(1, ‖D_p‖_max ‖D_{p+1}‖_max))` for each
/// consecutive pair of boundaries.
pub fn nilpotency_residuals(boundaries: &[Matrix]) -> Vec<(usize, f64, f64)> {
    boundaries
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let residual = max_abs(&(&w[0] * &w[1]));
            let bound = NILPOTENCY_TOL * (max_abs(&w[0]) * max_abs(&w[1])).max(1.0);
            (i + 1, residual, bound)
        })
        .collect()
}

/// Assembles every boundary of `(H ⊗ ΛL, d(f))` and checks `d ∘ d = 0`.
pub fn build_complex(alg: &OperatorLieAlgebra, f: &Character, pol: &TolerancePolicy) -> Result<KoszulComplex> {
    let d = alg.ambient_dim();
    let n = alg.dimension();
    let total = 1usize
        .checked_shl(n as u32)
        .and_then(|t| t.checked_mul(d))
        .unwrap_or(usize::MAX);
    pol.check_size("complex dimension d * 2^n", total)?;
    require_character(alg, f, pol)?;
    let layout = ExteriorLayout::new(n);
    let graded_dims = (0..=n).map(|p| d * layout.count(p)).collect();
    let boundaries: Vec<Matrix> = (1..=n).map(|p| assemble_boundary(alg, f, p, &layout)).collect();
    for (degree, residual, bound) in nilpotency_residuals(&boundaries) {
        if residual > bound {
            return Err(Error::BoundaryNotNilpotent {
                degree,
                residual,
                bound,
            });
        }
    }
    Ok(KoszulComplex {
        algebra: alg.clone(),
        character: f.clone(),
        layout,
        graded_dims,
        boundaries,
    })
}

impl KoszulComplex {
    pub fn algebra(&self) -> &OperatorLieAlgebra {
        &self.algebra
    }

    pub fn character(&self) -> &Character {
        &self.character
    }

    pub fn graded_dims(&self) -> &[usize] {
        &self.graded_dims
    }

    /// `D_p` for `1 <= p <= n`.
    pub fn boundary(&self, p: usize) -> &Matrix {
        &self.boundaries[p - 1]
    }

    pub fn boundaries(&self) -> &[Matrix] {
        &self.boundaries
    }

    pub fn total_dim(&self) -> usize {
        self.graded_dims.iter().sum()
    }

    pub fn offsets(&self) -> Vec<usize> {
        self.layout.offsets(self.algebra.ambient_dim())
    }

    /// `D = ⊕ D_p` as one endomorphism of the total space.
    pub fn total_boundary(&self) -> Matrix {
        let off = self.offsets();
        let total = self.total_dim();
        let mut out = Matrix::zeros(total, total);
        for (i, dp) in self.boundaries.iter().enumerate() {
            let p = i + 1;
            out.view_mut((off[p - 1], off[p]), dp.shape()).copy_from(dp);
        }
        out
    }

    /// The even-degree rows and odd-degree columns of `T = D + D*`. `T` has
    /// no even-even or odd-odd blocks, so its singular values are those of
    /// this block, each doubled.
    fn parity_block(&self) -> Matrix {
        let off = self.offsets();
        let n = self.algebra.dimension();
        let even: Vec<usize> = (0..=n).step_by(2).flat_map(|p| off[p]..off[p + 1]).collect();
        let odd: Vec<usize> = (1..=n).step_by(2).flat_map(|p| off[p]..off[p + 1]).collect();
        let mut pos = vec![0usize; self.total_dim()];
        for (i, &r) in even.iter().enumerate() {
            pos[r] = i;
        }
        for (j, &c) in odd.iter().enumerate() {
            pos[c] = j;
        }
        let mut out = Matrix::zeros(even.len(), odd.len());
        for (i, dp) in self.boundaries.iter().enumerate() {
            let p = i + 1;
            for c in 0..dp.ncols() {
                for r in 0..dp.nrows() {
                    let v = dp[(r, c)];
                    if v == ZERO {
                        continue;
                    }
                    let (row, col) = (off[p - 1] + r, off[p] + c);
                    if p % 2 == 1 {
                        // odd column -> even row, entry of D
                        out[(pos[row], pos[col])] += v;
                    } else {
                        // D* maps odd degree p-1 to even degree p
                        out[(pos[col], pos[row])] += v.conj();
                    }
                }
            }
        }
        out
    }

    /// `(sigma_min, sigma_max)` of `T = D + D*`.
    pub fn t_singular_range(&self) -> Result<(f64, f64)> {
        let sv = crate::numeric::singular_values(&self.parity_block())?;
        Ok((sv.last().copied().unwrap_or(0.0), sv.first().copied().unwrap_or(0.0)))
    }

    /// Largest modulus among basis entries, character coefficients and
    /// structure constants. Cancellation in `x - f(x)` can make `D` tiny
    /// without making it meaningful, so decisions keep a floor at this scale.
    pub fn input_scale(&self) -> f64 {
        let basis = self.algebra.basis().iter().map(max_abs).fold(0.0, f64::max);
        let f = self.character.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        basis.max(f).max(self.algebra.structure_scale())
    }

    /// `sigma_min(T) / max(sigma_max(T), (rank_tol / singularity_tol) * scale)`.
    ///
    /// Equals `sigma_min / sigma_max` unless `T` is negligible against the
    /// input scale; comparing it with `singularity_tol` is the same as testing
    /// `sigma_min <= max(singularity_tol * sigma_max, rank_tol * scale)`.
    pub fn normalized_t_min(&self, sigma_min: f64, sigma_max: f64, pol: &TolerancePolicy) -> f64 {
        let floor = pol.rank_tol_rel / pol.singularity_tol * self.input_scale();
        let denom = sigma_max.max(floor);
        if denom == 0.0 {
            0.0
        } else {
            sigma_min / denom
        }
    }

    /// Ranks counting singular values above
    /// `rank_tol * max(sigma_max(D_p), scale)`.
    pub fn ranks(&self, pol: &TolerancePolicy) -> Result<Vec<usize>> {
        let scale = self.input_scale();
        self.boundaries
            .iter()
            .map(|b| {
                if b.is_empty() {
                    return Err(crate::error::Error::InvalidInput("rank of an empty boundary".into()));
                }
                let sv = crate::numeric::singular_values(b)?;
                let smax = sv.first().copied().unwrap_or(0.0);
                let threshold = pol.rank_tol_rel * smax.max(scale);
                Ok(sv.iter().filter(|&&s| s > threshold).count())
            })
            .collect()
    }
}

/// `dim H_p = dim C_p - rank D_p - rank D_{p+1}` for `p = 0..=n`.
pub fn homology_dimensions(c: &KoszulComplex, pol: &TolerancePolicy) -> Result<Vec<usize>> {
    let ranks = c.ranks(pol)?;
    let n = c.algebra.dimension();
    let mut out = Vec::with_capacity(n + 1);
    for p in 0..=n {
        let incoming = if p >= 1 { ranks[p - 1] } else { 0 };
        let outgoing = if p < n { ranks[p] } else { 0 };
        let dim = c.graded_dims[p] as i64 - incoming as i64 - outgoing as i64;
        if dim < 0 {
            return Err(Error::ToleranceInconsistency(format!(
                "negative homology in degree {p}: dim {} with ranks {ranks:?}",
                c.graded_dims[p]
            )));
        }
        out.push(dim as usize);
    }
    Ok(out)
}

/// `T = D + D*` on the total space.
pub fn t_operator(c: &KoszulComplex) -> Matrix {
    let d = c.total_boundary();
    &d + d.adjoint()
}

fn permutation(size: usize, map: impl Fn(usize) -> usize) -> Matrix {
    let mut out = Matrix::zeros(size, size);
    for src in 0..size {
        out[(map(src), src)] = ONE;
    }
    out
}

/// Chain isomorphism `e1 ⊗ e2 ⟨S⟩ ↦ e2 ⊗ e1 ⟨S⟩` from the complex of
/// `{x ⊗ 1}` on `H1 ⊗ H2` to that of `{1 ⊗ x}` on `H2 ⊗ H1`, over all degrees.
pub fn flip_isomorphism_mu(d1: usize, d2: usize, n: usize) -> Result<Matrix> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::InvalidInput("dimensions must be positive".into()));
    }
    let block = d1 * d2;
    let size = block << n;
    Ok(permutation(size, |src| {
        let (b, h) = (src / block, src % block);
        let (h1, h2) = (h / d2, h % d2);
        b * block + h2 * d1 + h1
    }))
}

/// Chain isomorphism `e1 ⊗ e2 ⟨S⟩ ↦ e1 ⟨S⟩ ⊗ e2` from the complex of
/// `{x ⊗ 1}` on `H1 ⊗ H2` to `(H1 ⊗ ΛL) ⊗ H2` with `d(f) ⊗ 1`.
///
/// With `H` varying fastest inside each exterior block both sides share the
/// same coordinates, so this is the identity permutation.
pub fn regroup_isomorphism_eta(d1: usize, d2: usize, n: usize) -> Result<Matrix> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::InvalidInput("dimensions must be positive".into()));
    }
    let layout = ExteriorLayout::new(n);
    let src_off = layout.offsets(d1 * d2);
    let dst_off = layout.offsets(d1);
    let size = src_off[n + 1];
    let mut degree_of = Vec::with_capacity(size);
    for p in 0..=n {
        degree_of.extend(std::iter::repeat_n(p, src_off[p + 1] - src_off[p]));
    }
    Ok(permutation(size, |src| {
        let p = degree_of[src];
        let local = src - src_off[p];
        let (pos, h) = (local / (d1 * d2), local % (d1 * d2));
        let (h1, h2) = (h / d2, h % d2);
        (dst_off[p] * d2) + (pos * d1 + h1) * d2 + h2
    }))
}

/// The regrouping `ψ` from the complex of `L1 × L2` on `H1 ⊗ H2` to the tensor
/// product of the factor complexes.
#[derive(Debug, Clone)]
pub struct ProductRegrouping {
    /// Per total degree `k`: `(H1 ⊗ H2) ⊗ Λ^k(L1 × L2) → ⊕_{p+q=k} (H1 ⊗ Λ^p L1) ⊗ (H2 ⊗ Λ^q L2)`,
    /// summands ordered by increasing `p`.
    pub blocks: Vec<Matrix>,
    /// All degrees at once, into `V1 ⊗ V2` with `V_i = ⊕_p H_i ⊗ Λ^p L_i` in
    /// Kronecker coordinates.
    pub total: Matrix,
}

pub fn product_regroup_psi(a1: &OperatorLieAlgebra, a2: &OperatorLieAlgebra) -> Result<ProductRegrouping> {
    let (d1, n) = (a1.ambient_dim(), a1.dimension());
    let (d2, m) = (a2.ambient_dim(), a2.dimension());
    let (l1, l2, l) = (
        ExteriorLayout::new(n),
        ExteriorLayout::new(m),
        ExteriorLayout::new(n + m),
    );
    let (off1, off2) = (l1.offsets(d1), l2.offsets(d2));
    let dim_v2 = off2[m + 1];
    let d = d1 * d2;
    let off = l.offsets(d);
    let total_size = off[n + m + 1];
    let mut total = Matrix::zeros(total_size, total_size);
    let mut blocks = Vec::with_capacity(n + m + 1);
    for k in 0..=n + m {
        let ps: Vec<usize> = (k.saturating_sub(m)..=k.min(n)).collect();
        let mut summand_off = Vec::with_capacity(ps.len());
        let mut acc = 0;
        for &p in &ps {
            summand_off.push(acc);
            acc += d1 * l1.count(p) * d2 * l2.count(k - p);
        }
        let mut block = Matrix::zeros(acc, off[k + 1] - off[k]);
        for (pos, s) in l.basis(k).iter().enumerate() {
            let sx = ExteriorIndex(s.subset().iter().copied().filter(|&i| i < n).collect());
            let sy = ExteriorIndex(s.subset().iter().filter(|&&i| i >= n).map(|&i| i - n).collect());
            let (p, q) = (sx.degree(), sy.degree());
            let (px, py) = (l1.position(&sx), l2.position(&sy));
            let which = p - ps[0];
            let width2 = d2 * l2.count(q);
            for h1 in 0..d1 {
                for h2 in 0..d2 {
                    let col = pos * d + h1 * d2 + h2;
                    let a = px * d1 + h1;
                    let b = py * d2 + h2;
                    block[(summand_off[which] + a * width2 + b, col)] = ONE;
                    let row = (off1[p] + a) * dim_v2 + off2[q] + b;
                    total[(row, off[k] + col)] = ONE;
                }
            }
        }
        blocks.push(block);
    }
    Ok(ProductRegrouping { blocks, total })
}

/// `ξ = ⊕_p (-1)^p` on `⊕_p H ⊗ Λ^p L`.
pub fn sign_operator_xi(d: usize, n: usize) -> Matrix {
    let layout = ExteriorLayout::new(n);
    let off = layout.offsets(d);
    let size = off[n + 1];
    let mut out = Matrix::zeros(size, size);
    for p in 0..=n {
        let s = if p % 2 == 0 { ONE } else { -ONE };
        for i in off[p]..off[p + 1] {
            out[(i, i)] = s;
        }
    }
    out
}

/// `A ⊗ 1 + ξ ⊗ B` on `V1 ⊗ V2`, the graded tensor product of two operators
/// on the factor complexes.
pub fn graded_tensor(a: &Matrix, xi: &Matrix, b: &Matrix) -> Result<Matrix> {
    let i2 = identity(b.nrows());
    Ok(kron(a, &i2)? + kron(xi, b)?)
}
