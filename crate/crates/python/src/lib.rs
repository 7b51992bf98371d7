//! Python bindings. Matrices cross the boundary as lists of rows; complex
//! entries map to Python `complex`.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use milac_core::archgraph;
use milac_core::campaign::{self, CampaignConfig, ChannelSource, VerifyRequest};
use milac_core::chancap::{self, LinkBudget, PowerAllocation};
use milac_core::linalg::{CMat, RMat};
use milac_core::netcore::DEFAULT_Y0;
use milac_core::stemopt::{self, Architecture, Side};
use milac_core::MilacError;

type Rows<T> = Vec<Vec<T>>;

fn py_err(e: MilacError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix<T: nalgebra::Scalar + Copy>(rows: &Rows<T>) -> PyResult<nalgebra::DMatrix<T>> {
    let n_cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    let flat: Vec<T> = rows.iter().flatten().copied().collect();
    Ok(nalgebra::DMatrix::from_row_slice(rows.len(), n_cols, &flat))
}

fn from_matrix<T: nalgebra::Scalar + Copy>(m: &nalgebra::DMatrix<T>) -> Rows<T> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn parse_side(side: &str) -> PyResult<Side> {
    match side {
        "tx" => Ok(Side::Tx),
        "rx" => Ok(Side::Rx),
        other => Err(PyValueError::new_err(format!("side must be 'tx' or 'rx', got '{other}'"))),
    }
}

fn parse_arch(arch: &str) -> PyResult<Architecture> {
    arch.parse::<Architecture>().map_err(py_err)
}

fn stem_graph(side: Side, n_streams: usize, n_antennas: usize) -> PyResult<archgraph::MilacGraph> {
    match side {
        Side::Tx => archgraph::tx_stem_graph(n_streams, n_antennas),
        Side::Rx => archgraph::rx_stem_graph(n_streams, n_antennas),
    }
    .map_err(py_err)
}

/// Edges `(i, j)` of the stem-connected graph, 0-based.
#[pyfunction]
fn stem_graph_edges(side: &str, n_streams: usize, n_antennas: usize) -> PyResult<Vec<(usize, usize)>> {
    Ok(stem_graph(parse_side(side)?, n_streams, n_antennas)?.edges().collect())
}

/// 0/1 tunability mask of the stem-connected graph.
#[pyfunction]
fn stem_mask(side: &str, n_streams: usize, n_antennas: usize) -> PyResult<Rows<u8>> {
    let g = stem_graph(parse_side(side)?, n_streams, n_antennas)?;
    let mask = archgraph::ArchitectureMask::from_graph(&g);
    let n = mask.n_ports();
    Ok((0..n)
        .map(|i| (0..n).map(|j| u8::from(mask.is_tunable(i, j))).collect())
        .collect())
}

/// `(stem, fully)` circuit complexities.
#[pyfunction]
fn complexity(n_streams: usize, n_antennas: usize) -> PyResult<(usize, usize)> {
    let rows = campaign::complexity_table(&[n_streams], &[n_antennas]).map_err(py_err)?;
    let row = rows
        .first()
        .ok_or_else(|| PyValueError::new_err("more streams than antennas"))?;
    Ok((row.stem, row.fully))
}

#[pyfunction]
fn rayleigh_channel(n_rx: usize, n_tx: usize, seed: u64) -> PyResult<Rows<Complex64>> {
    Ok(from_matrix(&chancap::rayleigh_channel(n_rx, n_tx, seed).map_err(py_err)?))
}

/// `(U_bar, sigma, V_bar)` of the `n_streams` dominant singular triplets.
#[pyfunction]
fn truncated_svd(h: Rows<Complex64>, n_streams: usize) -> PyResult<(Rows<Complex64>, Vec<f64>, Rows<Complex64>)> {
    let svd = chancap::truncated_svd(&to_matrix(&h)?, n_streams).map_err(py_err)?;
    Ok((from_matrix(&svd.u_bar), svd.sigma.iter().copied().collect(), from_matrix(&svd.v_bar)))
}

#[pyfunction]
fn water_filling(lambdas: Vec<f64>, snr_db: f64) -> PyResult<Vec<f64>> {
    let budget = LinkBudget::from_snr_db(snr_db).map_err(py_err)?;
    let p = chancap::water_filling(&lambdas, budget).map_err(py_err)?;
    Ok(p.as_slice().to_vec())
}

#[pyfunction]
fn capacity(lambdas: Vec<f64>, powers: Vec<f64>, snr_db: f64) -> PyResult<f64> {
    let budget = LinkBudget::from_snr_db(snr_db).map_err(py_err)?;
    let p = PowerAllocation::new(powers).map_err(py_err)?;
    chancap::capacity(&lambdas, &p, budget).map_err(py_err)
}

#[pyfunction]
fn achievable_rate(
    g: Rows<Complex64>,
    h: Rows<Complex64>,
    f: Rows<Complex64>,
    powers: Vec<f64>,
    snr_db: f64,
) -> PyResult<f64> {
    let budget = LinkBudget::from_snr_db(snr_db).map_err(py_err)?;
    let p = PowerAllocation::new(powers).map_err(py_err)?;
    chancap::achievable_rate(&to_matrix(&g)?, &to_matrix(&h)?, &to_matrix(&f)?, &p, budget).map_err(py_err)
}

/// Designs a susceptance matrix for the target (`V_bar` at tx, `U_bar` at rx).
/// Returns the matrix and the target it realizes, which differs from the
/// input by column phases when the stem design needed regularization.
#[pyfunction]
#[pyo3(signature = (side, target, arch = "stem", y0 = DEFAULT_Y0, seed = 0))]
fn design(side: &str, target: Rows<Complex64>, arch: &str, y0: f64, seed: u64) -> PyResult<(Rows<f64>, Rows<Complex64>)> {
    let t = to_matrix(&target)?;
    let (b, realized): (RMat, CMat) = match (parse_side(side)?, parse_arch(arch)?) {
        (Side::Tx, Architecture::Stem) => {
            let r = stemopt::optimize_tx_stem_regularized(&t, y0, seed).map_err(py_err)?;
            (r.solution.assembled, r.target)
        }
        (Side::Rx, Architecture::Stem) => {
            let r = stemopt::optimize_rx_stem_regularized(&t, y0, seed).map_err(py_err)?;
            (r.solution.assembled, r.target)
        }
        (Side::Tx, Architecture::Fully) => (stemopt::optimize_tx_fully(&t, y0).map_err(py_err)?.assembled, t),
        (Side::Rx, Architecture::Fully) => (stemopt::optimize_rx_fully(&t, y0).map_err(py_err)?.assembled, t),
    };
    Ok((from_matrix(&b), from_matrix(&realized)))
}

/// Verification report of `b` against `target`, as JSON.
#[pyfunction]
#[pyo3(signature = (side, b, target, arch = "stem", y0 = DEFAULT_Y0))]
fn verify(side: &str, b: Rows<f64>, target: Rows<Complex64>, arch: &str, y0: f64) -> PyResult<String> {
    let side = parse_side(side)?;
    let t = to_matrix(&target)?;
    let (n_antennas, n_streams) = t.shape();
    let mask = stemopt::mask_for(side, parse_arch(arch)?, n_streams, n_antennas).map_err(py_err)?;
    let b = to_matrix(&b)?;
    let report = match side {
        Side::Tx => stemopt::verify_tx_against(&b, &t, y0, &mask),
        Side::Rx => stemopt::verify_rx_against(&b, &t, y0, &mask),
    }
    .map_err(py_err)?;
    Ok(report.to_json())
}

/// Designs and verifies both networks for a seeded Rayleigh channel.
/// Returns `(passed, json_report)`.
#[pyfunction]
#[pyo3(signature = (seed, n_streams, n_tx, n_rx, arch = "stem", snr_db = 10.0, y0 = DEFAULT_Y0, tol = 1e-8, rate_tol = 1e-9))]
#[allow(clippy::too_many_arguments)]
fn verify_seed(
    seed: u64,
    n_streams: usize,
    n_tx: usize,
    n_rx: usize,
    arch: &str,
    snr_db: f64,
    y0: f64,
    tol: f64,
    rate_tol: f64,
) -> PyResult<(bool, String)> {
    let req = VerifyRequest {
        channel: ChannelSource::Seed(seed),
        n_streams,
        n_tx,
        n_rx,
        arch: parse_arch(arch)?,
        y0,
        snr_db,
        susceptance_tx: None,
        susceptance_rx: None,
    };
    let out = campaign::verify_only(&req).map_err(py_err)?;
    Ok((out.passes(tol, rate_tol), out.render()))
}

/// Runs the campaign described by a TOML file, writes its CSVs and returns
/// `(passed, summary_csv)`.
#[pyfunction]
#[pyo3(signature = (config_path, output_dir = None))]
fn run_campaign(py: Python<'_>, config_path: std::path::PathBuf, output_dir: Option<std::path::PathBuf>) -> PyResult<(bool, String)> {
    let mut cfg = CampaignConfig::load(&config_path).map_err(py_err)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let report = py.detach(|| campaign::run_campaign(&cfg)).map_err(py_err)?;
    Ok((report.passed(), campaign::summary_csv(&report.summaries)))
}

#[pymodule]
fn milac_kit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_Y0", DEFAULT_Y0)?;
    m.add_function(wrap_pyfunction!(stem_graph_edges, m)?)?;
    m.add_function(wrap_pyfunction!(stem_mask, m)?)?;
    m.add_function(wrap_pyfunction!(complexity, m)?)?;
    m.add_function(wrap_pyfunction!(rayleigh_channel, m)?)?;
    m.add_function(wrap_pyfunction!(truncated_svd, m)?)?;
    m.add_function(wrap_pyfunction!(water_filling, m)?)?;
    m.add_function(wrap_pyfunction!(capacity, m)?)?;
    m.add_function(wrap_pyfunction!(achievable_rate, m)?)?;
    m.add_function(wrap_pyfunction!(design, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(verify_seed, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    Ok(())
}
