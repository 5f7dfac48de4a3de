//! Python bindings: game construction, relaxation solving, oracles, and
//! certificate verification.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ncgames::certificates;
use ncgames::games;
use ncgames::hierarchy::{
    build_moment_sdp, build_sos_sdp, generate_basis, parse_custom_basis, parse_level_spec,
    LevelSpec, RelaxationProblem,
};
use ncgames::oracles;
use ncgames::sdp::{solve, SolveOptions, SolveStatus};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A nonlocal game (probability or correlator form).
#[pyclass(name = "Game", module = "ncgames_py", from_py_object)]
#[derive(Clone)]
struct PyGame {
    inner: games::Game,
}

#[pymethods]
impl PyGame {
    /// Load one of the built-in games: chsh-game, chsh-correlator,
    /// i3322, yao.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(PyGame { inner: games::builtin(name).map_err(err)? })
    }

    /// Parse the text game format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let (game, _report) = games::parse_game(text).map_err(err)?;
        Ok(PyGame { inner: game })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn num_parties(&self) -> usize {
        self.inner.num_parties
    }

    #[getter]
    fn settings(&self) -> Vec<usize> {
        self.inner.settings.clone()
    }

    /// Canonical text serialization.
    fn serialize(&self) -> String {
        games::serialize_game(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Game({:?}, parties={})", self.inner.name, self.inner.num_parties)
    }
}

fn resolve_level(game: &games::Game, level: &str) -> PyResult<LevelSpec> {
    if let Some(text) = level.strip_prefix("custom-text:") {
        let monos = parse_custom_basis(text, game).map_err(err)?;
        return Ok(LevelSpec::Custom(monos));
    }
    if let Some(path) = level.strip_prefix("custom:") {
        let text = std::fs::read_to_string(path).map_err(err)?;
        let monos = parse_custom_basis(&text, game).map_err(err)?;
        return Ok(LevelSpec::Custom(monos));
    }
    parse_level_spec(level, game.num_parties).map_err(err)
}

fn build_relaxation(game: &games::Game, level: &str, form: &str) -> PyResult<RelaxationProblem> {
    let spec = resolve_level(game, level)?;
    let basis = generate_basis(game, &spec).map_err(err)?;
    match form {
        "moment" => build_moment_sdp(game, &basis).map_err(err),
        "sos" => build_sos_sdp(game, &basis).map_err(err),
        other => Err(PyValueError::new_err(format!("unknown form '{other}'"))),
    }
}

/// Solve a hierarchy relaxation. `level` accepts `full:<n>`, shape lists
/// like `1+AB`, `custom:<path>`, or `custom-text:<lines>`. Returns a dict
/// with the bound, solver status, and diagnostics; when `cert_path` is
/// set, a verified certificate is written there.
#[pyfunction]
#[pyo3(signature = (game, level, form="moment", tol=1e-8, cert_path=None))]
fn solve_relaxation<'py>(
    py: Python<'py>,
    game: &PyGame,
    level: &str,
    form: &str,
    tol: f64,
    cert_path: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let relax = build_relaxation(&game.inner, level, form)?;
    let opts = SolveOptions { tol, ..SolveOptions::default() };
    let sol = solve(&relax.sdp, &opts).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("bound", relax.bound_from(&sol))?;
    out.set_item("status", format!("{:?}", sol.status).to_lowercase())?;
    out.set_item("optimal", sol.status == SolveStatus::Optimal)?;
    out.set_item("iterations", sol.iterations)?;
    out.set_item("gap", sol.gap)?;
    out.set_item("basis_size", relax.basis.len())?;
    if let Some(path) = cert_path {
        let cert = certificates::extract(&relax, &sol).map_err(err)?;
        let residual = certificates::verify(&cert, &game.inner).map_err(err)?;
        certificates::write_certificate(std::path::Path::new(path), &cert).map_err(err)?;
        out.set_item("certificate_residual", residual)?;
    }
    Ok(out)
}

/// Exact classical value by deterministic-strategy enumeration.
#[pyfunction]
fn classical_value(game: &PyGame) -> PyResult<f64> {
    oracles::classical_value(&game.inner).map_err(err)
}

/// See-saw lower bound on the entangled value at fixed local dimension.
#[pyfunction]
#[pyo3(signature = (game, dim, restarts=20, seed=0))]
fn seesaw_lower_bound(game: &PyGame, dim: usize, restarts: usize, seed: u64) -> PyResult<f64> {
    oracles::seesaw_lower_bound(&game.inner, dim, restarts, seed).map_err(err)
}

/// Verify a certificate file against a game; returns the residual norm.
#[pyfunction]
fn verify_certificate(path: &str, game: &PyGame) -> PyResult<f64> {
    let cert = certificates::read_certificate(std::path::Path::new(path)).map_err(err)?;
    certificates::verify(&cert, &game.inner).map_err(err)
}

#[pymodule]
fn ncgames_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_function(wrap_pyfunction!(solve_relaxation, m)?)?;
    m.add_function(wrap_pyfunction!(classical_value, m)?)?;
    m.add_function(wrap_pyfunction!(seesaw_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(verify_certificate, m)?)?;
    m.add("YAO25_BASIS", certificates::YAO25_BASIS)?;
    Ok(())
}
