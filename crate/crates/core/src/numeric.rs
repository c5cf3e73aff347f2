//! Dense complex linear algebra with an explicit tolerance policy.
//!
//! Every rank, kernel and invertibility decision downstream goes through this
//! module so the thresholds live in one place.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix. Row/column counts are carried by the storage.
pub type Matrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default cap on the total complex dimension `d * 2^n` of a Koszul complex.
pub const DEFAULT_SIZE_CAP: usize = 32_768;

/// Numerical thresholds shared by every decision in the crate.
///
/// `rank_tol_rel` is relative to the largest singular value of the matrix whose
/// rank is taken (for Koszul boundaries, never below the input scale).
/// `singularity_tol` bounds the normalized smallest singular value
/// `sigma_min / sigma_max` of the self-adjoint operator `T = D + D*`.
/// `match_tol` is the distance under which two characters are the same point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancePolicy {
    pub rank_tol_rel: f64,
    pub singularity_tol: f64,
    pub match_tol: f64,
    pub size_cap: usize,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self {
            rank_tol_rel: 1e-10,
            singularity_tol: 1e-8,
            match_tol: 1e-6,
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

impl TolerancePolicy {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_tol_rel", self.rank_tol_rel),
            ("singularity_tol", self.singularity_tol),
            ("match_tol", self.match_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if self.size_cap == 0 {
            return Err(Error::InvalidInput("size_cap must be positive".into()));
        }
        Ok(())
    }

    /// Fails with a size-limit error when `size` exceeds the cap.
    pub fn check_size(&self, what: &str, size: usize) -> Result<()> {
        if size > self.size_cap {
            return Err(Error::SizeLimit {
                what: what.to_string(),
                size,
                cap: self.size_cap,
            });
        }
        Ok(())
    }
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("matrix has non-finite entries".into()))
    }
}

pub fn identity(d: usize) -> Matrix {
    Matrix::identity(d, d)
}

/// Largest entry modulus, `0` for an empty matrix.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    check_finite(m)?;
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Counts singular values above `rank_tol_rel * sigma_max`.
pub fn numerical_rank(m: &Matrix, pol: &TolerancePolicy) -> Result<usize> {
    if m.is_empty() {
        return Err(Error::InvalidInput("numerical_rank of an empty matrix".into()));
    }
    let sv = singular_values(m)?;
    Ok(rank_from_singular_values(&sv, pol.rank_tol_rel))
}

pub(crate) fn rank_from_singular_values(sv: &[f64], tol_rel: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol_rel * smax).count()
}

pub fn min_singular_value(m: &Matrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!(
            "min_singular_value needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(singular_values(m)?.last().copied().unwrap_or(0.0))
}

/// Kronecker product with `(a ⊗ b)[i*b.rows + k, j*b.cols + l] = a[i,j] * b[k,l]`.
pub fn kron(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("kron of an empty matrix".into()));
    }
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r.checked_mul(c).is_some() => Ok(a.kronecker(b)),
        _ => Err(Error::SizeLimit {
            what: "kronecker product dimension".into(),
            size: usize::MAX,
            cap: usize::MAX,
        }),
    }
}

/// `ab - ba`.
pub fn commutator(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::InvalidInput(format!(
            "commutator needs equal square matrices, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a * b - b * a)
}

pub fn adjoint(m: &Matrix) -> Matrix {
    m.adjoint()
}

/// Orthonormal basis (as columns) of the kernel of `m`.
///
/// A right singular vector belongs to the kernel when its singular value is at
/// most `tol_abs`.
pub fn null_space(m: &Matrix, tol_abs: f64) -> Matrix {
    let (r, c) = m.shape();
    if c == 0 {
        return Matrix::zeros(0, 0);
    }
    // Thin SVD only returns min(r, c) right vectors; pad so all c are present.
    let padded = if r < c {
        let mut p = Matrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let picked: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= tol_abs)
        .collect();
    let mut out = Matrix::zeros(c, picked.len());
    for (col, &i) in picked.iter().enumerate() {
        for j in 0..c {
            out[(j, col)] = v_t[(i, j)].conj();
        }
    }
    out
}

/// Orthonormal basis (as columns) of the column space of `m`, keeping left
/// singular directions whose singular value exceeds
/// `max(tol_rel * sigma_max, abs_floor)`.
pub fn column_space(m: &Matrix, tol_rel: f64, abs_floor: f64) -> Matrix {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Matrix::zeros(r, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let thr = (tol_rel * smax).max(abs_floor);
    let picked: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > thr && svd.singular_values[i] > 0.0)
        .collect();
    let mut out = Matrix::zeros(r, picked.len());
    for (col, &i) in picked.iter().enumerate() {
        out.set_column(col, &u.column(i));
    }
    out
}

/// Unitary matrix whose first column is the unit vector `v` up to a phase.
pub fn unitary_with_first_column(v: &Matrix) -> Matrix {
    let s = v.nrows();
    let mut stacked = Matrix::zeros(s, s + 1);
    stacked.set_column(0, &v.column(0));
    stacked.view_mut((0, 1), (s, s)).copy_from(&identity(s));
    // Householder QR: the first column of Q is parallel to v.
    let q = stacked.qr().q();
    q.columns(0, s).into_owned()
}

/// `vec(m)` stacked column-major into a single column.
pub(crate) fn vectorize(m: &Matrix) -> Vec<C64> {
    m.iter().copied().collect()
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
