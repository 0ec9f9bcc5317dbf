use darboux::cli::{parse_scheme, MethodChoice};
use darboux::transform::{apply_with, invert as invert_field};
use darboux::verify::reflectionless_step as standalone_step;
use darboux::{ApplyOptions, BackgroundModel, Complex64, Method};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(pydarboux, DarbouxError, PyException);
create_exception!(pydarboux, SingularSystemError, DarbouxError);

fn to_py(e: darboux::DarbouxError) -> PyErr {
    use darboux::DarbouxError as E;
    match e {
        E::SingularSystem { .. } | E::NonPositiveDeterminant { .. } => SingularSystemError::new_err(e.to_string()),
        E::Config(_) | E::InvalidMeasure(_) | E::InadmissibleMeasure(_) | E::Domain { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => DarbouxError::new_err(e.to_string()),
    }
}

fn method(name: &str) -> PyResult<Method> {
    MethodChoice::parse(name).map(MethodChoice::primary).map_err(to_py)
}

/// Signed spectral measure: point masses plus weighted densities on `[a, b]`.
#[pyclass(name = "SpectralMeasure", module = "pydarboux", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMeasure {
    inner: darboux::SpectralMeasure,
}

#[pymethods]
impl PyMeasure {
    /// From JSON, e.g. `{"atoms": [{"kappa": 1.0, "weight": 2.0}]}`.
    #[new]
    fn new(json: &str) -> PyResult<Self> {
        darboux::SpectralMeasure::from_json(json)
            .map(|inner| PyMeasure { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn zero() -> Self {
        PyMeasure {
            inner: darboux::SpectralMeasure::zero(),
        }
    }

    #[staticmethod]
    fn atom(kappa: f64, weight: f64) -> PyResult<Self> {
        darboux::SpectralMeasure::atom(kappa, weight)
            .map(|inner| PyMeasure { inner })
            .map_err(to_py)
    }

    /// From `[(kappa, weight), ...]`.
    #[staticmethod]
    fn atoms(pairs: Vec<(f64, f64)>) -> PyResult<Self> {
        darboux::SpectralMeasure::atoms(&pairs)
            .map(|inner| PyMeasure { inner })
            .map_err(to_py)
    }

    /// `2 s sqrt(1 - s^2) ds` on `[0, 1]`.
    #[staticmethod]
    fn semicircle() -> Self {
        PyMeasure {
            inner: darboux::SpectralMeasure::semicircle(),
        }
    }

    #[staticmethod]
    fn pure_step(h: f64) -> PyResult<Self> {
        darboux::SpectralMeasure::pure_step(h)
            .map(|inner| PyMeasure { inner })
            .map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn evolve(&self, t: f64) -> PyResult<Self> {
        self.inner.evolve(t).map(|inner| PyMeasure { inner }).map_err(to_py)
    }

    fn negate(&self) -> Self {
        PyMeasure {
            inner: self.inner.negate(),
        }
    }

    fn __add__(&self, other: &PyMeasure) -> Self {
        PyMeasure {
            inner: self.inner.plus(&other.inner),
        }
    }

    fn __neg__(&self) -> Self {
        self.negate()
    }

    fn total_mass(&self) -> PyResult<f64> {
        self.inner.total_mass().map_err(to_py)
    }

    fn __eq__(&self, other: &PyMeasure) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("SpectralMeasure({})", self.inner.to_json())
    }
}

/// Transformed potential; every evaluation solves the system at `(x, t)`.
#[pyclass(name = "PotentialField", module = "pydarboux", frozen)]
struct PyField {
    inner: darboux::PotentialField,
}

#[pymethods]
impl PyField {
    #[pyo3(signature = (x, t=0.0, method="direct"))]
    fn potential(&self, x: f64, t: f64, method: &str) -> PyResult<f64> {
        let m = self::method(method)?;
        self.inner.potential(x, t, m).map_err(to_py)
    }

    /// `q` at each `x`, computed without holding the GIL.
    #[pyo3(signature = (xs, t=0.0, method="direct"))]
    fn potential_grid(&self, py: Python<'_>, xs: Vec<f64>, t: f64, method: &str) -> PyResult<Vec<f64>> {
        let m = self::method(method)?;
        let field = &self.inner;
        py.detach(|| {
            darboux::parallel::par_map(&xs, |&x| field.potential(x, t, m))
                .into_iter()
                .collect::<darboux::Result<Vec<f64>>>()
        })
        .map_err(to_py)
    }

    fn jost(&self, x: f64, t: f64, k: Complex64) -> PyResult<Complex64> {
        self.inner.jost(x, t, k).map_err(to_py)
    }

    fn jost_dx(&self, x: f64, t: f64, k: Complex64) -> PyResult<Complex64> {
        self.inner.jost_dx(x, t, k).map_err(to_py)
    }

    fn log_det(&self, x: f64, t: f64) -> PyResult<f64> {
        self.inner.log_det(x, t).map_err(to_py)
    }

    fn condition(&self, x: f64, t: f64) -> PyResult<f64> {
        self.inner.state(x, t).map(|s| s.condition()).map_err(to_py)
    }

    /// Discretization nodes and weights at `t = 0`.
    fn nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.inner.discretization();
        (d.nodes.clone(), d.weights.clone())
    }

    #[getter]
    fn measure(&self) -> PyMeasure {
        PyMeasure {
            inner: self.inner.measure().clone(),
        }
    }

    #[getter]
    fn admissible(&self) -> bool {
        self.inner.admissibility().admissible()
    }

    fn __repr__(&self) -> String {
        format!(
            "PotentialField(measure={}, nodes={})",
            self.inner.measure().to_json(),
            self.inner.discretization().len()
        )
    }
}

/// Transform `background` (zero when omitted) by `measure`.
#[pyfunction]
#[pyo3(signature = (measure, background=None, nodes=128, scheme="gauss_legendre", force=false))]
fn apply(
    measure: &PyMeasure,
    background: Option<&PyField>,
    nodes: usize,
    scheme: &str,
    force: bool,
) -> PyResult<PyField> {
    let bg = match background {
        Some(f) => BackgroundModel::from(f.inner.clone()),
        None => BackgroundModel::Zero,
    };
    let opts = ApplyOptions {
        nodes,
        scheme: parse_scheme(scheme).map_err(to_py)?,
        force,
    };
    apply_with(&bg, &measure.inner, &opts)
        .map(|inner| PyField { inner })
        .map_err(to_py)
}

/// Undo `field`'s own transformation; evaluates to its background.
#[pyfunction]
fn invert(field: &PyField) -> PyResult<PyField> {
    invert_field(&field.inner).map(|inner| PyField { inner }).map_err(to_py)
}

/// Closed-form N-soliton with norming constants `c_m`.
#[pyfunction]
#[pyo3(signature = (kappas, norming, x, t=0.0))]
fn nsoliton(kappas: Vec<f64>, norming: Vec<f64>, x: f64, t: f64) -> PyResult<f64> {
    darboux::nsoliton_reference(&kappas, &norming, x, t).map_err(to_py)
}

/// Extended-precision reflectionless step for the semicircle gas.
#[pyfunction]
#[pyo3(signature = (x, t=0.0, nodes=128))]
fn reflectionless_step(py: Python<'_>, x: f64, t: f64, nodes: usize) -> PyResult<f64> {
    py.detach(|| standalone_step(x, t, nodes)).map_err(to_py)
}

#[pymodule]
fn pydarboux(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(apply, m)?)?;
    m.add_function(wrap_pyfunction!(invert, m)?)?;
    m.add_function(wrap_pyfunction!(nsoliton, m)?)?;
    m.add_function(wrap_pyfunction!(reflectionless_step, m)?)?;
    m.add("DarbouxError", m.py().get_type::<DarbouxError>())?;
    m.add("SingularSystemError", m.py().get_type::<SingularSystemError>())?;
    Ok(())
}
