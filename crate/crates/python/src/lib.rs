//! Python bindings. Matrices are nested lists (or 2-D arrays) of complex
//! numbers; characters are flat lists of complex coefficients in basis order.

use lie_spectrum as core;
use lie_spectrum::{Character, Error, Matrix, TolerancePolicy, C64};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(
    lie_spectrum_py,
    SizeLimitError,
    PyException,
    "Complex dimension exceeds the size cap."
);
create_exception!(
    lie_spectrum_py,
    NotACharacterError,
    PyValueError,
    "Functional does not vanish on [L, L]."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::SizeLimit { .. } => SizeLimitError::new_err(e.to_string()),
        Error::NotACharacter { .. } => NotACharacterError::new_err(e.to_string()),
        Error::InvalidInput(_) | Error::NotClosed { .. } | Error::NotSolvable { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<C64>>) -> PyResult<Matrix> {
    let d = rows.len();
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != d) {
        return Err(PyValueError::new_err(format!(
            "matrix must be square: row {r} has {} entries, expected {d}",
            row.len()
        )));
    }
    Ok(Matrix::from_fn(d, d, |r, c| rows[r][c]))
}

fn from_matrix(m: &Matrix) -> Vec<Vec<C64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// Numerical thresholds used by every decision.
#[pyclass(module = "lie_spectrum_py", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct Policy {
    inner: TolerancePolicy,
}

#[pymethods]
impl Policy {
    #[new]
    #[pyo3(signature = (rank_tol=1e-10, singularity_tol=1e-8, match_tol=1e-6, size_cap=32768))]
    fn new(rank_tol: f64, singularity_tol: f64, match_tol: f64, size_cap: usize) -> PyResult<Self> {
        let inner = TolerancePolicy {
            rank_tol_rel: rank_tol,
            singularity_tol,
            match_tol,
            size_cap,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn rank_tol(&self) -> f64 {
        self.inner.rank_tol_rel
    }

    #[getter]
    fn singularity_tol(&self) -> f64 {
        self.inner.singularity_tol
    }

    #[getter]
    fn match_tol(&self) -> f64 {
        self.inner.match_tol
    }

    #[getter]
    fn size_cap(&self) -> usize {
        self.inner.size_cap
    }

    fn __repr__(&self) -> String {
        format!(
            "Policy(rank_tol={:e}, singularity_tol={:e}, match_tol={:e}, size_cap={})",
            self.inner.rank_tol_rel, self.inner.singularity_tol, self.inner.match_tol, self.inner.size_cap
        )
    }
}

fn policy(p: Option<PyRef<'_, Policy>>) -> TolerancePolicy {
    p.map(|p| p.inner).unwrap_or_default()
}

/// A solvable Lie algebra of `d x d` matrices with a fixed basis.
#[pyclass(module = "lie_spectrum_py", frozen, skip_from_py_object)]
struct Algebra {
    inner: core::OperatorLieAlgebra,
}

#[pymethods]
impl Algebra {
    /// Prunes dependent matrices, then checks closure and solvability.
    #[new]
    #[pyo3(signature = (basis, policy=None))]
    fn new(basis: Vec<Vec<Vec<C64>>>, policy: Option<PyRef<'_, Policy>>) -> PyResult<Self> {
        let mats: Vec<Matrix> = basis.into_iter().map(to_matrix).collect::<PyResult<_>>()?;
        let inner = core::build_algebra(&mats, &self::policy(policy)).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Closes the generators under the commutator first.
    #[staticmethod]
    #[pyo3(signature = (generators, policy=None))]
    fn generated_by(generators: Vec<Vec<Vec<C64>>>, policy: Option<PyRef<'_, Policy>>) -> PyResult<Self> {
        let mats: Vec<Matrix> = generators.into_iter().map(to_matrix).collect::<PyResult<_>>()?;
        let closed = core::close_under_bracket(&mats).map_err(to_py)?;
        let inner = core::build_algebra(&closed, &self::policy(policy)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn basis(&self) -> Vec<Vec<Vec<C64>>> {
        self.inner.basis().iter().map(from_matrix).collect()
    }

    /// Coefficient of `x_k` in `[x_i, x_j] = x_i x_j - x_j x_i`.
    fn structure_constant(&self, i: usize, j: usize, k: usize) -> PyResult<C64> {
        let n = self.inner.dimension();
        if i >= n || j >= n || k >= n {
            return Err(PyValueError::new_err(format!("indices must be below {n}")));
        }
        Ok(self.inner.structure_constant(i, j, k))
    }

    #[pyo3(signature = (f, policy=None))]
    fn is_character(&self, f: Vec<C64>, policy: Option<PyRef<'_, Policy>>) -> PyResult<bool> {
        core::is_character(&self.inner, &Character::new(f), &self::policy(policy)).map_err(to_py)
    }

    /// Diagonal functionals of a simultaneous triangularization.
    #[pyo3(signature = (policy=None))]
    fn weights(&self, policy: Option<PyRef<'_, Policy>>) -> PyResult<Vec<Vec<C64>>> {
        let t = core::triangularize(&self.inner, &self::policy(policy)).map_err(to_py)?;
        Ok(t.weights.into_iter().map(|w| w.values).collect())
    }

    /// The finite candidate set searched by `spectrum`.
    #[pyo3(signature = (policy=None))]
    fn candidates(&self, policy: Option<PyRef<'_, Policy>>) -> PyResult<Vec<Vec<C64>>> {
        let c = core::spectral_candidates(&self.inner, &self::policy(policy)).map_err(to_py)?;
        Ok(c.into_iter().map(|w| w.values).collect())
    }

    /// `L1 x L2` acting on `H1 (x) H2`, basis `x (x) 1` then `1 (x) y`.
    fn product(&self, other: PyRef<'_, Algebra>) -> PyResult<Algebra> {
        let inner = core::direct_product(&self.inner, &other.inner).map_err(to_py)?;
        Ok(Algebra { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Algebra(dimension={}, ambient_dim={})",
            self.inner.dimension(),
            self.inner.ambient_dim()
        )
    }
}

/// A point of `Sp(L, H)` with its witnesses.
#[pyclass(module = "lie_spectrum_py", frozen, get_all, skip_from_py_object)]
struct SpectralPoint {
    character: Vec<C64>,
    homology_dims: Vec<usize>,
    t_min_sv: f64,
}

#[pymethods]
impl SpectralPoint {
    fn __repr__(&self) -> String {
        format!(
            "SpectralPoint(character={:?}, homology_dims={:?}, t_min_sv={:e})",
            self.character, self.homology_dims, self.t_min_sv
        )
    }
}

/// `(member, homology_dims, t_min_sv)` for a character `f`.
#[pyfunction]
#[pyo3(signature = (algebra, f, policy=None))]
fn contains(
    algebra: PyRef<'_, Algebra>,
    f: Vec<C64>,
    policy: Option<PyRef<'_, Policy>>,
) -> PyResult<(bool, Vec<usize>, f64)> {
    let (member, d) = core::contains(&algebra.inner, &Character::new(f), &self::policy(policy)).map_err(to_py)?;
    Ok((member, d.homology_dims, d.t_min_sv))
}

/// Homology dimensions of the twisted Koszul complex, degrees `0..=n`.
#[pyfunction]
#[pyo3(signature = (algebra, f, policy=None))]
fn homology(algebra: PyRef<'_, Algebra>, f: Vec<C64>, policy: Option<PyRef<'_, Policy>>) -> PyResult<Vec<usize>> {
    let pol = self::policy(policy);
    let f = Character::new(f);
    lie_spectrum::lie::require_character(&algebra.inner, &f, &pol).map_err(to_py)?;
    let complex = core::build_complex(&algebra.inner, &f, &pol).map_err(to_py)?;
    core::homology_dimensions(&complex, &pol).map_err(to_py)
}

/// `Sp(L, H)` in canonical order.
#[pyfunction]
#[pyo3(signature = (algebra, policy=None))]
fn spectrum(
    py: Python<'_>,
    algebra: PyRef<'_, Algebra>,
    policy: Option<PyRef<'_, Policy>>,
) -> PyResult<Vec<SpectralPoint>> {
    let pol = self::policy(policy);
    let alg = algebra.inner.clone();
    let result = py.detach(move || core::compute_spectrum(&alg, &pol)).map_err(to_py)?;
    Ok(result
        .points
        .into_iter()
        .map(|p| SpectralPoint {
            character: p.character.values,
            homology_dims: p.diagnostics.homology_dims,
            t_min_sv: p.diagnostics.t_min_sv,
        })
        .collect())
}

/// `(passed, max_distance, product_points, cartesian_points)` for the
/// product theorem on `first x second`.
#[pyfunction]
#[pyo3(signature = (first, second, policy=None))]
#[allow(clippy::type_complexity)]
fn check_product(
    py: Python<'_>,
    first: PyRef<'_, Algebra>,
    second: PyRef<'_, Algebra>,
    policy: Option<PyRef<'_, Policy>>,
) -> PyResult<(bool, f64, Vec<Vec<C64>>, Vec<Vec<C64>>)> {
    let pol = self::policy(policy);
    let (a, b) = (first.inner.clone(), second.inner.clone());
    let r = py
        .detach(move || core::check_product_theorem(&a, &b, &pol))
        .map_err(to_py)?;
    let values = |v: Vec<Character>| v.into_iter().map(|c| c.values).collect();
    Ok((
        r.passed,
        r.matching.max_distance,
        values(r.product),
        values(r.cartesian),
    ))
}

/// Runs the seeded randomized harness and returns its summary as JSON.
#[pyfunction]
#[pyo3(signature = (seed, trials, dmax=3, nmax=3, policy=None))]
fn verify(
    py: Python<'_>,
    seed: u64,
    trials: usize,
    dmax: usize,
    nmax: usize,
    policy: Option<PyRef<'_, Policy>>,
) -> PyResult<String> {
    let pol = self::policy(policy);
    let summary = py
        .detach(move || core::run_verify(seed, trials, dmax, nmax, &pol))
        .map_err(to_py)?;
    serde_json::to_string(&summary).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
pub fn lie_spectrum_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Policy>()?;
    m.add_class::<Algebra>()?;
    m.add_class::<SpectralPoint>()?;
    m.add_function(wrap_pyfunction!(contains, m)?)?;
    m.add_function(wrap_pyfunction!(homology, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(check_product, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("SizeLimitError", m.py().get_type::<SizeLimitError>())?;
    m.add("NotACharacterError", m.py().get_type::<NotACharacterError>())?;
    Ok(())
}
