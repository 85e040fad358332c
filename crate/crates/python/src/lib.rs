//! Python bindings: `import pyrops3d`.
//!
//! Points are row vectors; a pose maps model points `p` to `p·R + t`.
//! Matrices cross the boundary as nested row lists.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use rops3d::mesh::io::{load_mesh, save_mesh};
use rops3d::mesh::{compose_scene, shapes, MeshSearch, SceneOptions};
use rops3d::recognition::{describe_point, LibraryParams};
use rops3d::{Error, LocalReferenceFrame, Mat3, Vec3};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::Stream(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn mat(r: [[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| r[i][j])
}

fn rows(m: &Mat3) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

#[pyclass(name = "Mesh", module = "pyrops3d", frozen, from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: rops3d::TriangleMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>) -> PyResult<Self> {
        let inner = rops3d::TriangleMesh::new(vertices.into_iter().map(vec3).collect(), triangles).map_err(py_err)?;
        Ok(PyMesh { inner })
    }

    /// PLY (ascii/binary) or OBJ.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyMesh {
            inner: load_mesh(path).map_err(py_err)?,
        })
    }

    /// One of `bundled_names()`.
    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        let id = shapes::BUNDLED_NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| PyValueError::new_err(format!("unknown bundled model {name}")))?;
        Ok(PyMesh {
            inner: shapes::bundled_model(id),
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_mesh(&self.inner, path).map_err(py_err)
    }

    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.vertices().iter().map(arr).collect()
    }

    fn triangles(&self) -> Vec<[u32; 3]> {
        self.inner.triangles().to_vec()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn triangle_count(&self) -> usize {
        self.inner.triangle_count()
    }

    /// Mean edge length.
    fn resolution(&self) -> PyResult<f64> {
        self.inner.resolution().map_err(py_err)
    }

    fn transformed(&self, rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Self {
        PyMesh {
            inner: self.inner.transformed(&mat(rotation), &vec3(translation)),
        }
    }

    fn __repr__(&self) -> String {
        format!("Mesh({} vertices, {} triangles)", self.inner.vertex_count(), self.inner.triangle_count())
    }
}

#[pyclass(name = "RopsParams", module = "pyrops3d", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyRopsParams {
    bins: u32,
    rotations: u32,
    radius_mr: f64,
    combination: u8,
}

impl PyRopsParams {
    fn to_core(&self) -> PyResult<rops3d::RopsParams> {
        let p = rops3d::RopsParams {
            bins: self.bins,
            rotations: self.rotations,
            radius_mr: self.radius_mr,
            combination: self.combination,
            ..Default::default()
        };
        p.validate().map_err(py_err)?;
        Ok(p)
    }

    fn from_core(p: &rops3d::RopsParams) -> Self {
        PyRopsParams {
            bins: p.bins,
            rotations: p.rotations,
            radius_mr: p.radius_mr,
            combination: p.combination,
        }
    }
}

#[pymethods]
impl PyRopsParams {
    #[new]
    #[pyo3(signature = (bins=None, rotations=None, radius_mr=None, combination=None))]
    fn new(bins: Option<u32>, rotations: Option<u32>, radius_mr: Option<f64>, combination: Option<u8>) -> PyResult<Self> {
        let mut p = Self::from_core(&rops3d::RopsParams::default());
        p.bins = bins.unwrap_or(p.bins);
        p.rotations = rotations.unwrap_or(p.rotations);
        p.radius_mr = radius_mr.unwrap_or(p.radius_mr);
        p.combination = combination.unwrap_or(p.combination);
        p.to_core()?;
        Ok(p)
    }

    fn descriptor_len(&self) -> PyResult<usize> {
        Ok(self.to_core()?.descriptor_len())
    }

    fn __repr__(&self) -> String {
        format!(
            "RopsParams(bins={}, rotations={}, radius_mr={}, combination={})",
            self.bins, self.rotations, self.radius_mr, self.combination
        )
    }
}

#[pyclass(name = "LocalFrame", module = "pyrops3d", frozen)]
struct PyLrf {
    inner: LocalReferenceFrame,
}

#[pymethods]
impl PyLrf {
    #[getter]
    fn origin(&self) -> [f64; 3] {
        arr(&self.inner.origin)
    }

    /// Rows are the x, y, z axes.
    #[getter]
    fn axes(&self) -> [[f64; 3]; 3] {
        rows(&self.inner.axes)
    }

    #[getter]
    fn eigenvalues(&self) -> [f64; 3] {
        self.inner.eigenvalues
    }

    /// Rotation between the two frames, degrees.
    fn error_to(&self, other: &PyLrf) -> f64 {
        rops3d::lrf_error(&self.inner, &other.inner)
    }
}

/// Frame of the surface within `radius` of `point`.
#[pyfunction]
fn local_frame(mesh: &PyMesh, point: [f64; 3], radius: f64) -> PyResult<PyLrf> {
    let surface = rops3d::mesh::crop_local_surface(&mesh.inner, vec3(point), radius).map_err(py_err)?;
    Ok(PyLrf {
        inner: rops3d::compute_lrf(&surface).map_err(py_err)?,
    })
}

/// Descriptor at `point` with support `radius` (absolute units).
#[pyfunction]
#[pyo3(signature = (mesh, point, radius, params=None))]
fn describe(py: Python<'_>, mesh: &PyMesh, point: [f64; 3], radius: f64, params: Option<PyRopsParams>) -> PyResult<Vec<f64>> {
    let p = match params {
        Some(p) => p.to_core()?,
        None => rops3d::RopsParams::default(),
    };
    py.detach(|| {
        let search = MeshSearch::new(&mesh.inner);
        describe_point(&search, vec3(point), radius, &p).map(|(_, d)| d)
    })
    .map_err(py_err)
}

#[pyclass(name = "Library", module = "pyrops3d", frozen)]
struct PyLibrary {
    inner: rops3d::ModelLibrary,
}

#[pymethods]
impl PyLibrary {
    #[staticmethod]
    #[pyo3(signature = (models, params=None, seeds_per_model=1000, spacing_mr=2.0))]
    fn build(
        py: Python<'_>,
        models: Vec<(String, PyMesh)>,
        params: Option<PyRopsParams>,
        seeds_per_model: usize,
        spacing_mr: f64,
    ) -> PyResult<Self> {
        let lp = LibraryParams {
            rops: match params {
                Some(p) => p.to_core()?,
                None => rops3d::RopsParams::default(),
            },
            seeds_per_model,
            spacing_mr,
        };
        let models = models.into_iter().map(|(n, m)| (n, m.inner)).collect();
        let inner = py.detach(|| rops3d::ModelLibrary::build(models, lp)).map_err(py_err)?;
        Ok(PyLibrary { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyLibrary {
            inner: rops3d::ModelLibrary::load(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(py_err)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, pyo3::types::PyBytes> {
        pyo3::types::PyBytes::new(py, &self.inner.to_bytes())
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(PyLibrary {
            inner: rops3d::ModelLibrary::from_bytes(data).map_err(py_err)?,
        })
    }

    fn model_names(&self) -> Vec<String> {
        self.inner.models().iter().map(|m| m.name.clone()).collect()
    }

    fn feature_count(&self) -> usize {
        self.inner.feature_count()
    }

    /// Mean model resolution.
    fn resolution(&self) -> f64 {
        self.inner.resolution()
    }

    fn params(&self) -> PyRopsParams {
        PyRopsParams::from_core(&self.inner.params().rops)
    }
}

#[pyclass(name = "Instance", module = "pyrops3d", frozen, get_all)]
struct PyInstance {
    model: u32,
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
    epsilon_mr: f64,
    alpha: f64,
}

#[pymethods]
impl PyInstance {
    fn __repr__(&self) -> String {
        format!("Instance(model={}, epsilon_mr={:.3}, alpha={:.3})", self.model, self.epsilon_mr, self.alpha)
    }
}

#[pyclass(name = "Recognition", module = "pyrops3d", frozen)]
struct PyRecognition {
    inner: rops3d::RecognitionResult,
}

#[pymethods]
impl PyRecognition {
    #[getter]
    fn instances(&self) -> Vec<PyInstance> {
        self.inner
            .instances
            .iter()
            .map(|i| PyInstance {
                model: i.model,
                rotation: rows(&i.rotation),
                translation: arr(&i.translation),
                epsilon_mr: i.epsilon_mr,
                alpha: i.alpha,
            })
            .collect()
    }

    /// Per scene vertex: instance index, or -1 for background.
    #[getter]
    fn segmentation(&self) -> Vec<i64> {
        self.inner.segmentation.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }
}

#[pyfunction]
#[pyo3(signature = (scene, library, tau_f=None, decimation=None))]
fn recognize(py: Python<'_>, scene: &PyMesh, library: &PyLibrary, tau_f: Option<f64>, decimation: Option<f64>) -> PyResult<PyRecognition> {
    let mut p = rops3d::RecognitionParams::default();
    p.tau_f = tau_f.unwrap_or(p.tau_f);
    p.decimation = decimation.unwrap_or(p.decimation);
    let inner = py.detach(|| rops3d::recognize(&scene.inner, &library.inner, &p)).map_err(py_err)?;
    Ok(PyRecognition { inner })
}

type Pose = (u32, [[f64; 3]; 3], [f64; 3]);

/// Random scene of `instances` placed models (overlaps allowed) and their
/// ground-truth poses `(model_id, R, t)`.
#[pyfunction]
#[pyo3(signature = (models, instances=3, seed=0))]
fn synth_scene(models: Vec<PyMesh>, instances: usize, seed: u64) -> PyResult<(PyMesh, Vec<Pose>)> {
    let meshes: Vec<_> = models.into_iter().map(|m| m.inner).collect();
    let (scene, poses) = compose_scene(&meshes, SceneOptions::new(instances, seed)).map_err(py_err)?;
    Ok((
        PyMesh { inner: scene },
        poses.iter().map(|p| (p.model_id, rows(&p.rotation), arr(&p.translation))).collect(),
    ))
}

#[pyfunction]
fn bundled_names() -> Vec<&'static str> {
    shapes::BUNDLED_NAMES.to_vec()
}

#[pymodule]
fn pyrops3d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyRopsParams>()?;
    m.add_class::<PyLrf>()?;
    m.add_class::<PyLibrary>()?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyRecognition>()?;
    m.add_function(wrap_pyfunction!(local_frame, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    m.add_function(wrap_pyfunction!(recognize, m)?)?;
    m.add_function(wrap_pyfunction!(synth_scene, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_names, m)?)?;
    Ok(())
}
