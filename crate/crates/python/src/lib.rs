//! Python bindings: ECS codec, zone lookup, scenarios, capture-log metrics and
//! MUD allowlist operations.

use std::net::IpAddr;
use std::path::PathBuf;

use num_rational::Ratio;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use geoecs::dns_wire::{EcsOption, Name};
use geoecs::geo_zone::{GeoZone, RegionCode};
use geoecs::mud_kit::{self, MudError};
use geoecs::prefix::IpPrefix;
use geoecs::resolver_sim::{Scenario, SimError};
use geoecs::traffic_analysis::{self as ta, AnalysisError, Analyzer, DEFAULT_POOL_THRESHOLD};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn analysis_err(e: AnalysisError) -> PyErr {
    match e {
        AnalysisError::Io(m) => PyOSError::new_err(m),
        other => value_err(other),
    }
}

fn mud_err(e: MudError) -> PyErr {
    match e {
        MudError::Io(m) => PyOSError::new_err(m),
        other => value_err(other),
    }
}

fn sim_err(e: SimError) -> PyErr {
    match e {
        SimError::Io(m) => PyOSError::new_err(m),
        other => value_err(other),
    }
}

fn region(s: &str) -> PyResult<RegionCode> {
    RegionCode::new(s).map_err(value_err)
}

fn fraction(py: Python<'_>, r: Ratio<u64>) -> PyResult<Py<PyAny>> {
    let cls = py.import("fractions")?.getattr("Fraction")?;
    Ok(cls.call1((*r.numer(), *r.denom()))?.unbind())
}

/// ECS option payload for `address/source`, with `scope` set.
#[pyfunction]
#[pyo3(signature = (address, source, scope = 0))]
fn ecs_encode<'py>(py: Python<'py>, address: &str, source: u8, scope: u8) -> PyResult<Bound<'py, PyBytes>> {
    let addr: IpAddr = address.parse().map_err(value_err)?;
    let ecs = EcsOption::from_addr(addr, source)
        .and_then(|e| e.with_scope(scope))
        .map_err(value_err)?;
    Ok(PyBytes::new(py, &ecs.encode_data()))
}

/// `(address, source, scope)` from an ECS option payload.
#[pyfunction]
fn ecs_decode(data: &[u8]) -> PyResult<(String, u8, u8)> {
    let ecs = EcsOption::decode_data(data).map_err(value_err)?;
    Ok((ecs.ip().to_string(), ecs.source_prefix_len(), ecs.scope_prefix_len()))
}

#[pyclass(name = "Zone", module = "pygeoecs", frozen)]
struct PyZone(GeoZone);

#[pymethods]
impl PyZone {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyZone> {
        GeoZone::load(&path).map(PyZone).map_err(value_err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<PyZone> {
        geoecs::geo_zone::parse_zone(text).map(PyZone).map_err(value_err)
    }

    /// `(addresses, scope, ttl)`; `subnet` is `"a.b.c.d/len"` or None.
    #[pyo3(signature = (qname, subnet = None))]
    fn lookup(&self, qname: &str, subnet: Option<&str>) -> PyResult<(Vec<String>, u8, u32)> {
        let qname = Name::new(qname).map_err(value_err)?;
        let ecs = subnet
            .map(|s| s.parse::<IpPrefix>().map(|p| EcsOption::from_prefix(&p)))
            .transpose()
            .map_err(value_err)?;
        let a = self.0.lookup(&qname, ecs.as_ref()).map_err(value_err)?;
        Ok((a.addresses.iter().map(|x| x.to_string()).collect(), a.scope, a.ttl))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Transcript CSV of a scenario file; `zone` overrides the file's zone path.
#[pyfunction]
#[pyo3(signature = (path, zone = None))]
fn run_scenario(path: PathBuf, zone: Option<PathBuf>) -> PyResult<String> {
    let s = Scenario::load_with_zone(&path, zone.as_deref()).map_err(sim_err)?;
    Ok(s.run().map_err(sim_err)?.to_csv())
}

#[pyclass(name = "CaptureLog", module = "pygeoecs", frozen)]
struct PyCaptureLog(ta::CaptureLog);

#[pymethods]
impl PyCaptureLog {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyCaptureLog> {
        ta::ingest_log(&path).map(PyCaptureLog).map_err(analysis_err)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<PyCaptureLog> {
        ta::parse_log(text).map(PyCaptureLog).map_err(analysis_err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[pyo3(signature = (device, ip_location, user_a, user_b, pool_threshold = DEFAULT_POOL_THRESHOLD))]
    fn uds(
        &self,
        py: Python<'_>,
        device: &str,
        ip_location: &str,
        user_a: &str,
        user_b: &str,
        pool_threshold: usize,
    ) -> PyResult<Py<PyAny>> {
        let r = Analyzer::new(&self.0)
            .with_pool_threshold(pool_threshold)
            .uds(device, region(ip_location)?, region(user_a)?, region(user_b)?)
            .map_err(analysis_err)?;
        fraction(py, r)
    }

    #[pyo3(signature = (device, user_location, ip_a, ip_b, pool_threshold = DEFAULT_POOL_THRESHOLD))]
    fn ipbs(
        &self,
        py: Python<'_>,
        device: &str,
        user_location: &str,
        ip_a: &str,
        ip_b: &str,
        pool_threshold: usize,
    ) -> PyResult<Py<PyAny>> {
        let r = Analyzer::new(&self.0)
            .with_pool_threshold(pool_threshold)
            .ipbs(device, region(user_location)?, region(ip_a)?, region(ip_b)?)
            .map_err(analysis_err)?;
        fraction(py, r)
    }

    /// Seconds from the first record until the last new domain; None if never seen.
    fn stabilization_time(&self, device: &str, ip_location: &str, user_location: &str) -> PyResult<Option<u64>> {
        Analyzer::new(&self.0)
            .stabilization_time(device, region(ip_location)?, region(user_location)?)
            .map_err(analysis_err)
    }

    /// `[(bucket_end, unique_domains, unique_ips), ...]`
    #[pyo3(signature = (device, ip_location, user_location, bucket_seconds = 86_400))]
    fn cumulative_counts(
        &self,
        device: &str,
        ip_location: &str,
        user_location: &str,
        bucket_seconds: u64,
    ) -> PyResult<Vec<(u64, usize, usize)>> {
        let pts = Analyzer::new(&self.0)
            .cumulative_counts(device, region(ip_location)?, region(user_location)?, bucket_seconds)
            .map_err(analysis_err)?;
        Ok(pts.iter().map(|p| (p.bucket_end, p.unique_domains, p.unique_ips)).collect())
    }
}

#[pyclass(name = "MudFile", module = "pygeoecs", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyMudFile(mud_kit::MudFile);

#[pymethods]
impl PyMudFile {
    #[staticmethod]
    fn parse(data: &[u8]) -> PyResult<PyMudFile> {
        mud_kit::parse_mud(data).map(PyMudFile).map_err(mud_err)
    }

    fn to_json<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &mud_kit::serialize_mud(&self.0))
    }

    #[getter]
    fn device_id(&self) -> &str {
        self.0.device_id()
    }

    #[getter]
    fn mud_url(&self) -> &str {
        self.0.mud_url()
    }

    fn domains(&self) -> Vec<String> {
        self.0.domains().into_iter().map(|n| n.to_string()).collect()
    }

    fn domain_count(&self) -> usize {
        mud_kit::domain_count(&self.0)
    }

    fn __len__(&self) -> usize {
        self.0.acl().len()
    }
}

fn unwrap_muds(muds: Vec<PyMudFile>) -> Vec<mud_kit::MudFile> {
    muds.into_iter().map(|m| m.0).collect()
}

#[pyfunction]
fn unify(muds: Vec<PyMudFile>) -> PyResult<PyMudFile> {
    mud_kit::unify(&unwrap_muds(muds)).map(PyMudFile).map_err(mud_err)
}

/// Collapse regional variants listed in a TOML group document.
#[pyfunction]
fn ecs_collapse(mud: &PyMudFile, groups_toml: &str) -> PyResult<PyMudFile> {
    let groups = mud_kit::parse_groups(groups_toml).map_err(mud_err)?;
    let (out, _) = mud_kit::ecs_collapse(&mud.0, &groups).map_err(mud_err)?;
    Ok(PyMudFile(out))
}

/// `[(k, unified_domains, ecs_domains, ratio), ...]` for k = 1..=len(muds).
#[pyfunction]
fn compare(py: Python<'_>, muds: Vec<PyMudFile>, groups_toml: &str) -> PyResult<Vec<(usize, usize, usize, Py<PyAny>)>> {
    let groups = mud_kit::parse_groups(groups_toml).map_err(mud_err)?;
    let rows = mud_kit::compare_sweep(&unwrap_muds(muds), &groups).map_err(mud_err)?;
    rows.into_iter()
        .map(|r| Ok((r.locations_included, r.unified_domains, r.ecs_domains, fraction(py, r.ratio)?)))
        .collect()
}

#[pymodule]
fn pygeoecs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ecs_encode, m)?)?;
    m.add_function(wrap_pyfunction!(ecs_decode, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(unify, m)?)?;
    m.add_function(wrap_pyfunction!(ecs_collapse, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_class::<PyZone>()?;
    m.add_class::<PyCaptureLog>()?;
    m.add_class::<PyMudFile>()?;
    Ok(())
}
