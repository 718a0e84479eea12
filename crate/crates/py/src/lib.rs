//! Python bindings. Blocks are referred to by label and jumps by
//! `(source, target, occurrence)` tuples, as in scheme documents.

use std::collections::{BTreeSet, HashMap};

use covinstr_core::document::{element_ref, resolve_ref, ElementRef, SchemeDocument};
use covinstr_core::oracle::{self, mask_edges, mask_nodes, Trace};
use covinstr_core::{generators, Cfg, DotAnnotations, Element, Error, InstrumentationScheme, Mode};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(covinstr, CovinstrError, PyException);

fn err(e: Error) -> PyErr {
    CovinstrError::new_err(e.to_string())
}

fn mode(name: &str) -> PyResult<Mode> {
    name.parse().map_err(CovinstrError::new_err)
}

#[derive(Clone, PartialEq, Eq, Hash, FromPyObject, IntoPyObject)]
enum Ref {
    Node(String),
    Edge(String, String, usize),
}

impl From<ElementRef> for Ref {
    fn from(r: ElementRef) -> Self {
        match r {
            ElementRef::Node(l) => Ref::Node(l),
            ElementRef::Edge(a, b, k) => Ref::Edge(a, b, k),
        }
    }
}

impl From<Ref> for ElementRef {
    fn from(r: Ref) -> Self {
        match r {
            Ref::Node(l) => ElementRef::Node(l),
            Ref::Edge(a, b, k) => ElementRef::Edge(a, b, k),
        }
    }
}

#[pyclass(name = "Cfg", module = "covinstr", frozen)]
struct PyCfg {
    inner: Cfg,
}

impl PyCfg {
    fn resolve(&self, refs: Vec<Ref>) -> PyResult<Vec<Element>> {
        refs.into_iter()
            .map(|r| {
                let r = ElementRef::from(r);
                resolve_ref(&self.inner, &r).ok_or_else(|| CovinstrError::new_err(format!("unknown element `{r}`")))
            })
            .collect()
    }

    fn refs(&self, els: impl IntoIterator<Item = Element>) -> Vec<Ref> {
        els.into_iter().map(|el| element_ref(&self.inner, el).into()).collect()
    }
}

#[pymethods]
impl PyCfg {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        covinstr_core::parse_cfg(text).map(|inner| Self { inner }).map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn to_dot(&self) -> String {
        covinstr_core::to_dot(&self.inner, &DotAnnotations::default())
    }

    /// Problems that keep the graph from being analysed; empty when valid.
    fn validate(&self) -> Vec<String> {
        let r = self.inner.validate();
        let cfg = &self.inner;
        let mut out = Vec::new();
        if r.entry_equals_exit {
            out.push("entry equals exit".to_owned());
        }
        if r.entry_has_in_edges {
            out.push("entry has incoming edges".to_owned());
        }
        if r.exit_has_out_edges {
            out.push("exit has outgoing edges".to_owned());
        }
        out.extend(r.unreachable_from_entry.iter().map(|&u| format!("{} unreachable from entry", cfg.label(u))));
        out.extend(r.cannot_reach_exit.iter().map(|&u| format!("{} cannot reach exit", cfg.label(u))));
        out
    }

    fn is_valid(&self) -> bool {
        self.inner.validate().ok
    }

    #[getter]
    fn entry(&self) -> &str {
        self.inner.label(self.inner.entry())
    }

    #[getter]
    fn exit(&self) -> &str {
        self.inner.label(self.inner.exit())
    }

    fn nodes(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    fn edges(&self) -> Vec<Ref> {
        self.refs(self.inner.edge_ids().map(Element::Edge))
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!("Cfg(nodes={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

#[pyclass(name = "Scheme", module = "covinstr", frozen)]
struct PyScheme {
    doc: SchemeDocument,
}

#[pymethods]
impl PyScheme {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        SchemeDocument::from_json(text).map(|doc| Self { doc }).map_err(err)
    }

    fn to_json(&self) -> String {
        self.doc.to_json()
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.doc.mode.as_str()
    }

    #[getter]
    fn probes(&self) -> Vec<Ref> {
        self.doc.probes.iter().cloned().map(Ref::from).collect()
    }

    #[getter]
    fn instrumented_fraction(&self) -> f64 {
        self.doc.stats.instrumented_fraction
    }

    #[getter]
    fn fallbacks(&self) -> usize {
        self.doc.stats.counts.fallbacks
    }

    /// Full coverage from a `{probe: bool}` mapping.
    fn infer(&self, readings: HashMap<Ref, bool>) -> PyResult<HashMap<Ref, bool>> {
        let readings: Vec<(ElementRef, bool)> = readings.into_iter().map(|(r, v)| (r.into(), v)).collect();
        let out = self.doc.infer(&readings).map_err(err)?;
        Ok(out.into_iter().map(|(r, v)| (r.into(), v)).collect())
    }

    fn __len__(&self) -> usize {
        self.doc.probes.len()
    }
}

fn scheme(cfg: &PyCfg, s: &InstrumentationScheme) -> PyScheme {
    PyScheme { doc: SchemeDocument::new(&cfg.inner, s) }
}

#[pyfunction]
#[pyo3(signature = (cfg, mode = "vv"))]
fn analyze(cfg: &PyCfg, mode: &str) -> PyResult<PyScheme> {
    let s = covinstr_core::analyze(&cfg.inner, self::mode(mode)?).map_err(err)?;
    Ok(scheme(cfg, &s))
}

#[pyfunction]
#[pyo3(signature = (cfg, probes, mode = "vv"))]
fn is_valid_scheme(cfg: &PyCfg, probes: Vec<Ref>, mode: &str) -> PyResult<bool> {
    let probes = cfg.resolve(probes)?;
    oracle::is_valid_scheme(&cfg.inner, &probes, self::mode(mode)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (cfg, mode = "vv"))]
fn min_size(cfg: &PyCfg, mode: &str) -> PyResult<usize> {
    oracle::min_size(&cfg.inner, self::mode(mode)?).map_err(err)
}

/// Every achievable set of covered blocks.
#[pyfunction]
fn vertex_profiles(cfg: &PyCfg) -> PyResult<Vec<BTreeSet<String>>> {
    let set = oracle::enumerate_vertex_profiles(&cfg.inner).map_err(err)?;
    Ok(set
        .iter()
        .map(|m| mask_nodes(m).into_iter().map(|u| cfg.inner.label(u).to_owned()).collect())
        .collect())
}

/// Every achievable set of covered jumps.
#[pyfunction]
fn edge_profiles(cfg: &PyCfg) -> PyResult<Vec<Vec<Ref>>> {
    let set = oracle::enumerate_edge_profiles(&cfg.inner).map_err(err)?;
    Ok(set.iter().map(|m| cfg.refs(mask_edges(m).into_iter().map(Element::Edge))).collect())
}

fn walks(cfg: &Cfg, t: &Trace) -> Vec<Vec<String>> {
    t.walks.iter().map(|w| w.nodes.iter().map(|&u| cfg.label(u).to_owned()).collect()).collect()
}

/// Two traces with equal block coverage and different jump coverage, as
/// lists of walks, or `None` when block coverage determines jumps.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn impossibility_witness(cfg: &PyCfg) -> PyResult<Option<(Vec<Vec<String>>, Vec<Vec<String>>)>> {
    let w = oracle::impossibility_witness(&cfg.inner).map_err(err)?;
    Ok(w.map(|(a, b)| (walks(&cfg.inner, &a), walks(&cfg.inner, &b))))
}

#[pyfunction]
fn diamond_chain(k: usize) -> PyResult<PyCfg> {
    if k == 0 {
        return Err(CovinstrError::new_err("diamond chain needs k >= 1"));
    }
    Ok(PyCfg { inner: generators::gen_diamond_chain(k) })
}

#[pyfunction]
fn selfloop_path(k: usize) -> PyResult<PyCfg> {
    if k < 2 {
        return Err(CovinstrError::new_err("self-loop path needs k >= 2"));
    }
    Ok(PyCfg { inner: generators::gen_selfloop_path(k) })
}

#[pyfunction]
fn layered(widths: Vec<usize>) -> PyResult<PyCfg> {
    if widths.len() < 2 || widths[0] != 1 || widths[widths.len() - 1] != 1 || widths.contains(&0) {
        return Err(CovinstrError::new_err("need nonempty layers with the first and last of width 1"));
    }
    Ok(PyCfg { inner: generators::gen_layered(&widths) })
}

#[pyfunction]
#[pyo3(signature = (n, edge_prob = 0.3, seed = 0))]
fn random_cfg(n: usize, edge_prob: f64, seed: u64) -> PyResult<PyCfg> {
    if n < 2 {
        return Err(CovinstrError::new_err("random graph needs n >= 2"));
    }
    Ok(PyCfg { inner: generators::gen_random(n, edge_prob, seed) })
}

#[pymodule]
fn covinstr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CovinstrError", m.py().get_type::<CovinstrError>())?;
    m.add_class::<PyCfg>()?;
    m.add_class::<PyScheme>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(is_valid_scheme, m)?)?;
    m.add_function(wrap_pyfunction!(min_size, m)?)?;
    m.add_function(wrap_pyfunction!(vertex_profiles, m)?)?;
    m.add_function(wrap_pyfunction!(edge_profiles, m)?)?;
    m.add_function(wrap_pyfunction!(impossibility_witness, m)?)?;
    m.add_function(wrap_pyfunction!(diamond_chain, m)?)?;
    m.add_function(wrap_pyfunction!(selfloop_path, m)?)?;
    m.add_function(wrap_pyfunction!(layered, m)?)?;
    m.add_function(wrap_pyfunction!(random_cfg, m)?)?;
    Ok(())
}
