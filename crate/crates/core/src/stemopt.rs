//! Capacity-achieving susceptance design for stem-connected and fully-connected
//! MiLACs, plus residual-based verification of any candidate design.
//!
//! Port ordering on the transmitter is `[inputs (N_S) | antennas (N_T)]`; on the
//! receiver it is `[antennas (N_R) | outputs (N_S)]`.

use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::archgraph::{self, ArchitectureMask, MilacGraph, MASK_TOL};
use crate::chancap::derive_seed;
use crate::error::{MilacError, Result};
use crate::linalg::{self, block, put_block, CMat, RMat, SortedSvd, RANK_TOL};
use crate::netcore::{self, AdmittanceMatrix, ScatteringMatrix, SusceptanceMatrix};

/// Tolerance on `||T^H T - I||_F` for accepted beamforming targets.
pub const TARGET_UNITARITY_TOL: f64 = 1e-10;

/// Number of random phase rotations tried after a degenerate target.
pub const MAX_PHASE_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Tx,
    Rx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Stem,
    Fully,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Stem => "stem",
            Architecture::Fully => "fully",
        }
    }
}

impl FromStr for Architecture {
    type Err = MilacError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stem" | "stem-connected" => Ok(Architecture::Stem),
            "fully" | "fully-connected" => Ok(Architecture::Fully),
            other => Err(MilacError::Parse(format!("unknown architecture '{other}'"))),
        }
    }
}

/// Real and imaginary parts of a semi-unitary target, transposed:
/// `r = Re(T)^T`, `j = Im(T)^T`, both `N_S x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTargetPair {
    pub r: RMat,
    pub j: RMat,
}

impl RealTargetPair {
    pub fn from_target(target: &CMat) -> Self {
        Self {
            r: linalg::real_part(target).transpose(),
            j: linalg::imag_part(target).transpose(),
        }
    }

    pub fn n_streams(&self) -> usize {
        self.r.nrows()
    }

    pub fn n_ports(&self) -> usize {
        self.r.ncols()
    }

    /// `(||R J^T - J R^T||_F, ||J J^T + R R^T - I||_F)`, both zero for a
    /// semi-unitary target.
    pub fn identity_residuals(&self) -> (f64, f64) {
        let ns = self.n_streams();
        let rjt = &self.r * self.j.transpose();
        let sym = (&rjt - rjt.transpose()).norm();
        let gram = &self.j * self.j.transpose() + &self.r * self.r.transpose();
        (sym, (gram - RMat::identity(ns, ns)).norm())
    }
}

/// SVD of the `N_S x (N_S - 1)` leading block `J_1`, with the orthogonal
/// complement `u_j2` of its column space.
#[derive(Debug, Clone)]
pub struct SvdOfJ1 {
    pub u_j1: RMat,
    pub u_j2: DVector<f64>,
    pub sigma: DVector<f64>,
    pub v_j: RMat,
}

impl SvdOfJ1 {
    pub fn new(j1: &RMat) -> Result<Self> {
        let (m, n) = j1.shape();
        if m != n + 1 || n == 0 {
            return Err(MilacError::Dimension(format!(
                "J_1 must be N_S x (N_S - 1) with N_S >= 2, got {m}x{n}"
            )));
        }
        let svd = SortedSvd::new(j1.clone())?;
        let scale = svd.largest().max(1.0);
        let smallest = svd.smallest();
        if smallest.is_nan() || smallest < RANK_TOL * scale {
            return Err(MilacError::DegeneratePhase {
                context: "J_1 (imaginary part of the leading target rows)".into(),
                ratio: smallest / scale,
            });
        }
        let u_j1 = svd.u;
        let u_j2 = orthogonal_complement(&u_j1);
        Ok(Self {
            u_j1,
            u_j2,
            sigma: svd.singular_values,
            v_j: svd.v_t.transpose(),
        })
    }

    /// `V Sigma^-1 U_1^T c`, the unique symmetric solution of `J_1 X = c`
    /// whenever one exists.
    pub fn solve(&self, c: &RMat) -> RMat {
        let mut proj = self.u_j1.transpose() * c;
        for (i, mut row) in proj.row_iter_mut().enumerate() {
            row /= self.sigma[i];
        }
        &self.v_j * proj
    }
}

/// Unit vector orthogonal to the orthonormal columns of `q` (`m x (m - 1)`).
fn orthogonal_complement(q: &RMat) -> DVector<f64> {
    let m = q.nrows();
    let mut best = DVector::zeros(m);
    let mut best_norm = -1.0;
    for k in 0..m {
        let mut e = DVector::zeros(m);
        e[k] = 1.0;
        let w = &e - q * (q.transpose() * &e);
        let nrm = w.norm();
        if nrm > best_norm {
            best_norm = nrm;
            best = w;
        }
    }
    best /= best_norm;
    let w = &best - q * (q.transpose() * &best);
    let nrm = w.norm();
    w / nrm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Singular values at or below `rank_tol * sigma_max` count as zero.
    pub rank_tol: f64,
    /// Solvability residuals are compared with `residual_tol` times the
    /// natural scale of each quantity.
    pub residual_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            residual_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolvabilityReport {
    /// `||A C^T - C A^T||_F`
    pub symmetry_residual: f64,
    /// `||U_2^T C||_F`
    pub range_residual: f64,
    /// `||A X - C||_F` of the returned solution.
    pub equation_residual: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSolution {
    pub x: RMat,
    pub report: SolvabilityReport,
}

fn check_lineq_shapes(a: &RMat, c: &RMat) -> Result<()> {
    if a.shape() != c.shape() || a.is_empty() {
        return Err(MilacError::Dimension(format!(
            "A is {}x{} but C is {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    Ok(())
}

/// Symmetric `X` with `A X = C` for arbitrary `M x N` data `A`, `C`.
///
/// Returns `A^+ C + (I - V_1 V_1^T) C^T (A^+)^T`, symmetrized, after checking
/// `A C^T = C A^T` and `U_2^T C = 0`.
pub fn solve_symmetric_lineq_general(a: &RMat, c: &RMat) -> Result<SymmetricSolution> {
    solve_symmetric_lineq_general_with(a, c, SolveOptions::default())
}

pub fn solve_symmetric_lineq_general_with(
    a: &RMat,
    c: &RMat,
    opts: SolveOptions,
) -> Result<SymmetricSolution> {
    check_lineq_shapes(a, c)?;
    let n = a.ncols();
    let a_norm = a.norm();
    let c_norm = c.norm();

    let act = a * c.transpose();
    let symmetry_residual = (&act - act.transpose()).norm();

    let svd = SortedSvd::new(a.clone())?;
    let threshold = opts.rank_tol * svd.largest();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > threshold)
        .count();
    let u1 = svd.u.columns(0, rank).into_owned();
    let v1 = svd.v_t.rows(0, rank).transpose();

    let c_in_range = &u1 * (u1.transpose() * c);
    let range_residual = (c - c_in_range).norm();

    if symmetry_residual > opts.residual_tol * (a_norm * c_norm).max(f64::MIN_POSITIVE)
        || range_residual > opts.residual_tol * c_norm.max(f64::MIN_POSITIVE)
    {
        return Err(MilacError::NoSymmetricSolution {
            symmetry_residual,
            range_residual,
        });
    }

    let mut a_pinv_c = u1.transpose() * c;
    for (i, mut row) in a_pinv_c.row_iter_mut().enumerate() {
        row /= svd.singular_values[i];
    }
    let a_pinv_c = &v1 * a_pinv_c;
    let null_proj = RMat::identity(n, n) - &v1 * v1.transpose();
    let x = &a_pinv_c + null_proj * a_pinv_c.transpose();
    let x = (&x + x.transpose()) * 0.5;

    let equation_residual = (a * &x - c).norm();
    Ok(SymmetricSolution {
        x,
        report: SolvabilityReport {
            symmetry_residual,
            range_residual,
            equation_residual,
            rank,
        },
    })
}

/// The tall full-rank case, `A` of size `(N + 1) x N` with rank `N`: the
/// solution is unique and equals `V Sigma^-1 U_1^T C`.
pub fn solve_symmetric_lineq_tall(a: &RMat, c: &RMat) -> Result<SymmetricSolution> {
    check_lineq_shapes(a, c)?;
    let svd = SvdOfJ1::new(a).map_err(|e| match e {
        MilacError::DegeneratePhase { ratio, .. } => MilacError::DegenerateTarget(format!(
            "A is rank deficient (singular value ratio {ratio:.3e})"
        )),
        other => other,
    })?;
    let act = a * c.transpose();
    let symmetry_residual = (&act - act.transpose()).norm();
    if symmetry_residual > SolveOptions::default().residual_tol * (a.norm() * c.norm()).max(f64::MIN_POSITIVE) {
        return Err(MilacError::NoSymmetricSolution {
            symmetry_residual,
            range_residual: 0.0,
        });
    }
    let x = svd.solve(c);
    let x = (&x + x.transpose()) * 0.5;
    let equation_residual = (a * &x - c).norm();
    Ok(SymmetricSolution {
        x,
        report: SolvabilityReport {
            symmetry_residual,
            range_residual: 0.0,
            equation_residual,
            rank: a.ncols(),
        },
    })
}

/// Intermediate blocks of a stem-connected design, in the order they are
/// computed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockTrace {
    pub steps: Vec<(String, RMat)>,
    /// `||J_1 C^T - C J_1^T||_F` for the symmetric subproblem `J_1 X = C`.
    pub subproblem_symmetry_residual: f64,
}

impl BlockTrace {
    fn push(&mut self, name: &str, m: &RMat) {
        self.steps.push((name.to_string(), m.clone()));
    }

    pub fn get(&self, name: &str) -> Option<&RMat> {
        self.steps.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }
}

/// A designed susceptance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StemSolution {
    pub susceptance: SusceptanceMatrix,
    /// The dense matrix exactly as assembled from its blocks, before symmetric
    /// storage.
    pub assembled: RMat,
    pub trace: BlockTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullSolution {
    pub susceptance: SusceptanceMatrix,
    pub assembled: RMat,
    pub report: SolvabilityReport,
}

fn check_target(target: &CMat, what: &str) -> Result<()> {
    let (n, ns) = target.shape();
    if ns == 0 || n < ns {
        return Err(MilacError::Dimension(format!(
            "{what} must be N x N_S with N >= N_S >= 1, got {n}x{ns}"
        )));
    }
    if target.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(MilacError::DegenerateTarget(format!("{what} has non-finite entries")));
    }
    let gram_err = (target.adjoint() * target - CMat::identity(ns, ns)).norm();
    if gram_err > TARGET_UNITARITY_TOL {
        return Err(MilacError::DegenerateTarget(format!(
            "{what} is not semi-unitary (||T^H T - I||_F = {gram_err:.3e})"
        )));
    }
    Ok(())
}

fn check_y0(y0: f64) -> Result<()> {
    if !(y0.is_finite() && y0 > 0.0) {
        return Err(MilacError::Domain(format!("Y0 must be positive, got {y0}")));
    }
    Ok(())
}

/// Symmetric `N x N` block `X` with `J X = coeff * R` and nonzeros confined to
/// the center pattern whose central vertices are the first `N_S - 1` indices.
fn stem_core(pair: &RealTargetPair, coeff: f64, names: [&str; 5], trace: &mut BlockTrace) -> Result<RMat> {
    let ns = pair.n_streams();
    let n = pair.n_ports();
    let k0 = ns - 1;
    let m = n - k0;

    let mut diag = RMat::zeros(m, m);
    let mut x12 = RMat::zeros(k0, m);
    for i in 0..m {
        let col = k0 + i;
        let mut sys = RMat::zeros(ns, ns);
        put_block(&mut sys, 0, 0, &block(&pair.j, 0, 0, ns, k0));
        sys.set_column(k0, &pair.j.column(col));
        let rhs = pair.r.column(col).into_owned();
        let x = linalg::solve_square_svd(&sys, &rhs).map_err(|ratio| MilacError::DegeneratePhase {
            context: format!("column {col} of the target"),
            ratio,
        })?;
        diag[(i, i)] = coeff * x[k0];
        for jj in 0..k0 {
            x12[(jj, i)] = coeff * x[jj];
        }
    }
    trace.push(names[0], &diag);

    let mut core = RMat::zeros(n, n);
    put_block(&mut core, k0, k0, &diag);
    if k0 > 0 {
        let x21 = x12.transpose();
        trace.push(names[1], &x12);
        trace.push(names[2], &x21);

        let j1 = block(&pair.j, 0, 0, ns, k0);
        let j2 = block(&pair.j, 0, k0, ns, m);
        let r1 = block(&pair.r, 0, 0, ns, k0);
        let rhs = r1 * coeff - &j2 * &x21;
        let jct = &j1 * rhs.transpose();
        trace.subproblem_symmetry_residual = (&jct - jct.transpose()).norm();
        let svd = SvdOfJ1::new(&j1)?;
        let x11 = svd.solve(&rhs);
        trace.push(names[3], &x11);

        put_block(&mut core, 0, 0, &x11);
        put_block(&mut core, 0, k0, &x12);
        put_block(&mut core, k0, 0, &x21);
    }
    trace.push(names[4], &core);
    Ok(core)
}

fn finish(assembled: RMat, trace: BlockTrace) -> Result<StemSolution> {
    let (susceptance, _) = SusceptanceMatrix::from_dense(&assembled)?;
    Ok(StemSolution {
        susceptance,
        assembled,
        trace,
    })
}

/// Stem-connected transmitter design realizing `F = V_bar / 2`.
///
/// `v_bar` is the `N_T x N_S` semi-unitary precoding target. The central
/// vertices are the inputs and the first `N_S - 1` antenna ports.
pub fn optimize_tx_stem(v_bar: &CMat, y0: f64) -> Result<StemSolution> {
    check_target(v_bar, "V_bar")?;
    check_y0(y0)?;
    let pair = RealTargetPair::from_target(v_bar);
    let ns = pair.n_streams();
    let nt = pair.n_ports();
    let mut trace = BlockTrace::default();

    let b22 = stem_core(&pair, y0, ["B22_22", "B22_12", "B22_21", "B22_11", "B22"], &mut trace)?;
    let b12 = &pair.j * (-y0) - &pair.r * &b22;
    trace.push("B12", &b12);
    let b21 = b12.transpose();
    trace.push("B21", &b21);
    let b11 = -(&pair.r * &b21);
    trace.push("B11", &b11);

    let mut b = RMat::zeros(ns + nt, ns + nt);
    put_block(&mut b, 0, 0, &b11);
    put_block(&mut b, 0, ns, &b12);
    put_block(&mut b, ns, 0, &b21);
    put_block(&mut b, ns, ns, &b22);
    trace.push("B", &b);
    finish(b, trace)
}

/// Stem-connected receiver design realizing `G = U_bar^H / 2`.
///
/// `u_bar` is the `N_R x N_S` semi-unitary combining target. The central
/// vertices are the first `N_S - 1` antenna ports and the outputs.
pub fn optimize_rx_stem(u_bar: &CMat, y0: f64) -> Result<StemSolution> {
    check_target(u_bar, "U_bar")?;
    check_y0(y0)?;
    let pair = RealTargetPair::from_target(u_bar);
    let ns = pair.n_streams();
    let nr = pair.n_ports();
    let mut trace = BlockTrace::default();

    let b11 = stem_core(&pair, -y0, ["B11_22", "B11_12", "B11_21", "B11_11", "B11"], &mut trace)?;
    let b21 = &pair.j * y0 - &pair.r * &b11;
    trace.push("B21", &b21);
    let b12 = b21.transpose();
    trace.push("B12", &b12);
    let b22 = -(&pair.r * &b12);
    trace.push("B22", &b22);

    let mut b = RMat::zeros(nr + ns, nr + ns);
    put_block(&mut b, 0, 0, &b11);
    put_block(&mut b, 0, nr, &b12);
    put_block(&mut b, nr, 0, &b21);
    put_block(&mut b, nr, nr, &b22);
    trace.push("B", &b);
    finish(b, trace)
}

/// Antenna order putting `central` first, then the remaining antennas
/// ascending.
fn antenna_order(n_antennas: usize, n_streams: usize, central: &[usize]) -> Result<Vec<usize>> {
    if central.len() != n_streams - 1 {
        return Err(MilacError::InvalidGraph(format!(
            "{} central antenna ports given, {} required",
            central.len(),
            n_streams - 1
        )));
    }
    let mut seen = vec![false; n_antennas];
    for &a in central {
        if a >= n_antennas || seen[a] {
            return Err(MilacError::InvalidGraph(format!(
                "central antenna port {a} is out of range or repeated"
            )));
        }
        seen[a] = true;
    }
    let mut order = central.to_vec();
    order.extend((0..n_antennas).filter(|&a| !seen[a]));
    Ok(order)
}

fn permute_rows(m: &CMat, order: &[usize]) -> CMat {
    CMat::from_fn(order.len(), m.ncols(), |r, c| m[(order[r], c)])
}

/// `out[p(a), p(b)] = b[a, b]` for a port map `p`.
fn scatter_ports(b: &RMat, port_of: &[usize]) -> RMat {
    let n = b.nrows();
    let mut out = RMat::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out[(port_of[r], port_of[c])] = b[(r, c)];
        }
    }
    out
}

/// [`optimize_tx_stem`] with the `N_S - 1` central antenna ports chosen by
/// the caller (0-based antenna indices, not port indices).
pub fn optimize_tx_stem_with_center(v_bar: &CMat, y0: f64, central_antennas: &[usize]) -> Result<StemSolution> {
    check_target(v_bar, "V_bar")?;
    let (nt, ns) = v_bar.shape();
    let order = antenna_order(nt, ns, central_antennas)?;
    let sol = optimize_tx_stem(&permute_rows(v_bar, &order), y0)?;
    let port_of: Vec<usize> = (0..ns).chain(order.iter().map(|&a| ns + a)).collect();
    let assembled = scatter_ports(&sol.assembled, &port_of);
    finish(assembled, sol.trace)
}

/// [`optimize_rx_stem`] with the `N_S - 1` central antenna ports chosen by
/// the caller.
pub fn optimize_rx_stem_with_center(u_bar: &CMat, y0: f64, central_antennas: &[usize]) -> Result<StemSolution> {
    check_target(u_bar, "U_bar")?;
    let (nr, ns) = u_bar.shape();
    let order = antenna_order(nr, ns, central_antennas)?;
    let sol = optimize_rx_stem(&permute_rows(u_bar, &order), y0)?;
    let port_of: Vec<usize> = order.iter().copied().chain(nr..nr + ns).collect();
    let assembled = scatter_ports(&sol.assembled, &port_of);
    finish(assembled, sol.trace)
}

/// Picks central antenna ports from a graph whose fixed-side ports (inputs
/// on the transmitter, outputs on the receiver) are all adjacent to every
/// other vertex.
fn central_from_graph(
    g: &MilacGraph,
    fixed: std::ops::Range<usize>,
    antennas: std::ops::Range<usize>,
    n_streams: usize,
) -> Result<Vec<usize>> {
    let full = g.n_ports() - 1;
    if let Some(p) = fixed.clone().find(|&p| g.degree(p) != full) {
        return Err(MilacError::InvalidGraph(format!(
            "port {p} on the stream side is not connected to every other port; \
             only centers containing all stream-side ports are supported"
        )));
    }
    let central: Vec<usize> = antennas
        .clone()
        .filter(|&p| g.degree(p) == full)
        .take(n_streams - 1)
        .map(|p| p - antennas.start)
        .collect();
    if central.len() < n_streams - 1 {
        return Err(MilacError::InvalidGraph(format!(
            "graph has {} fully connected antenna ports, {} required",
            central.len(),
            n_streams - 1
        )));
    }
    Ok(central)
}

/// Transmitter design whose nonzeros fit inside the edge set of `g`.
pub fn optimize_tx_stem_on_graph(v_bar: &CMat, y0: f64, g: &MilacGraph) -> Result<StemSolution> {
    let (nt, ns) = v_bar.shape();
    if g.n_ports() != ns + nt {
        return Err(MilacError::Dimension(format!(
            "graph has {} vertices, network has {}",
            g.n_ports(),
            ns + nt
        )));
    }
    let central = central_from_graph(g, 0..ns, ns..ns + nt, ns)?;
    optimize_tx_stem_with_center(v_bar, y0, &central)
}

/// Receiver design whose nonzeros fit inside the edge set of `g`.
pub fn optimize_rx_stem_on_graph(u_bar: &CMat, y0: f64, g: &MilacGraph) -> Result<StemSolution> {
    let (nr, ns) = u_bar.shape();
    if g.n_ports() != ns + nr {
        return Err(MilacError::Dimension(format!(
            "graph has {} vertices, network has {}",
            g.n_ports(),
            ns + nr
        )));
    }
    let central = central_from_graph(g, nr..nr + ns, 0..nr, ns)?;
    optimize_rx_stem_with_center(u_bar, y0, &central)
}

/// Result of a design that may have rotated the target's column phases.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularized {
    pub solution: StemSolution,
    /// The target actually realized, `T diag(e^{j theta})`.
    pub target: CMat,
    /// Column phases applied, all zero when no retry was needed.
    pub phases: Vec<f64>,
}

fn is_degenerate(e: &MilacError) -> bool {
    matches!(e, MilacError::DegeneratePhase { .. })
}

fn regularize(
    target: &CMat,
    seed: u64,
    optimize: impl Fn(&CMat) -> Result<StemSolution>,
) -> Result<Regularized> {
    let ns = target.ncols();
    let mut last = match optimize(target) {
        Ok(solution) => {
            return Ok(Regularized {
                solution,
                target: target.clone(),
                phases: vec![0.0; ns],
            })
        }
        Err(e) if is_degenerate(&e) => e,
        Err(e) => return Err(e),
    };
    for attempt in 1..=MAX_PHASE_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, attempt as u64]));
        let phases: Vec<f64> = (0..ns)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let mut rotated = target.clone();
        for (s, &theta) in phases.iter().enumerate() {
            let w = Complex64::from_polar(1.0, theta);
            for z in rotated.column_mut(s).iter_mut() {
                *z *= w;
            }
        }
        match optimize(&rotated) {
            Ok(solution) => {
                log::debug!("degenerate target regularized after {attempt} phase rotation(s)");
                return Ok(Regularized {
                    solution,
                    target: rotated,
                    phases,
                });
            }
            Err(e) if is_degenerate(&e) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// [`optimize_tx_stem`], retrying with seeded random column phases when the
/// target is degenerate. Column phases do not change the achievable rate.
pub fn optimize_tx_stem_regularized(v_bar: &CMat, y0: f64, seed: u64) -> Result<Regularized> {
    regularize(v_bar, seed, |t| optimize_tx_stem(t, y0))
}

/// [`optimize_rx_stem`] with the same retry policy as
/// [`optimize_tx_stem_regularized`]. Rotating the columns of `U_bar` rotates
/// the rows of `G`, which leaves every stream's SINR unchanged.
pub fn optimize_rx_stem_regularized(u_bar: &CMat, y0: f64, seed: u64) -> Result<Regularized> {
    regularize(u_bar, seed, |t| optimize_rx_stem(t, y0))
}

fn full_solution(x: SymmetricSolution) -> Result<FullSolution> {
    let (susceptance, _) = SusceptanceMatrix::from_dense(&x.x)?;
    Ok(FullSolution {
        susceptance,
        assembled: x.x,
        report: x.report,
    })
}

/// Fully-connected transmitter design: all four block conditions stacked as
/// one symmetric linear system and solved with
/// [`solve_symmetric_lineq_general`].
pub fn optimize_tx_fully(v_bar: &CMat, y0: f64) -> Result<FullSolution> {
    check_target(v_bar, "V_bar")?;
    check_y0(y0)?;
    let pair = RealTargetPair::from_target(v_bar);
    let ns = pair.n_streams();
    let nt = pair.n_ports();
    let n = ns + nt;

    let mut a = RMat::zeros(2 * ns, n);
    put_block(&mut a, 0, ns, &(-&pair.j));
    put_block(&mut a, ns, 0, &RMat::identity(ns, ns));
    put_block(&mut a, ns, ns, &pair.r);

    let mut c = RMat::zeros(2 * ns, n);
    put_block(&mut c, 0, 0, &RMat::identity(ns, ns));
    put_block(&mut c, 0, ns, &(-&pair.r));
    put_block(&mut c, ns, ns, &(-&pair.j));
    c *= y0;

    full_solution(solve_symmetric_lineq_general(&a, &c)?)
}

/// Fully-connected receiver design.
pub fn optimize_rx_fully(u_bar: &CMat, y0: f64) -> Result<FullSolution> {
    check_target(u_bar, "U_bar")?;
    check_y0(y0)?;
    let pair = RealTargetPair::from_target(u_bar);
    let ns = pair.n_streams();
    let nr = pair.n_ports();
    let n = ns + nr;

    let mut a = RMat::zeros(2 * ns, n);
    put_block(&mut a, 0, 0, &pair.j);
    put_block(&mut a, ns, 0, &pair.r);
    put_block(&mut a, ns, nr, &RMat::identity(ns, ns));

    let mut c = RMat::zeros(2 * ns, n);
    put_block(&mut c, 0, 0, &(-&pair.r));
    put_block(&mut c, 0, nr, &RMat::identity(ns, ns));
    put_block(&mut c, ns, 0, &pair.j);
    c *= y0;

    full_solution(solve_symmetric_lineq_general(&a, &c)?)
}

/// Residuals of a candidate susceptance matrix against a beamforming target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub side: Side,
    /// Frobenius error of the scattering columns that realize the target.
    pub scattering_residual: f64,
    /// Same condition in admittance form, without inverting `Y0 I + jB`.
    pub admittance_residual: f64,
    /// The four block conditions in listing order.
    pub case_residuals: [f64; 4],
    /// `||B - B^T||_F`
    pub symmetry_residual: f64,
    /// Asymmetry of the diagonal block that the stem design never constrains
    /// directly (`B11` on the transmitter, `B22` on the receiver).
    pub unused_block_symmetry_residual: f64,
    /// Residual of the block condition the stem design never imposes
    /// (case 1 on the transmitter, case 2 on the receiver).
    pub unused_case_residual: f64,
    pub unitarity_residual: f64,
    pub reciprocity_residual: f64,
    pub mask_violations: usize,
    pub mask_ok: bool,
}

impl VerificationReport {
    pub fn max_case_residual(&self) -> f64 {
        self.case_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// True when the scattering condition, all block conditions and the
    /// symmetry of `B` hold within `tol`, and the mask is respected.
    pub fn passes(&self, tol: f64) -> bool {
        self.scattering_residual <= tol
            && self.max_case_residual() <= tol
            && self.symmetry_residual <= tol
            && self.mask_ok
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Blocks {
    b11: RMat,
    b12: RMat,
    b21: RMat,
    b22: RMat,
}

fn split_blocks(b: &RMat, first: usize) -> Blocks {
    let n = b.nrows();
    let second = n - first;
    Blocks {
        b11: block(b, 0, 0, first, first),
        b12: block(b, 0, first, first, second),
        b21: block(b, first, 0, second, first),
        b22: block(b, first, first, second, second),
    }
}

fn check_candidate(b: &RMat, target: &CMat, y0: f64, what: &str) -> Result<()> {
    check_y0(y0)?;
    let (n, ns) = target.shape();
    if !b.is_square() || b.nrows() != n + ns || ns == 0 {
        return Err(MilacError::Dimension(format!(
            "B is {}x{} but {what} is {n}x{ns}",
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

fn theta_residuals(b: &RMat, y0: f64) -> (Option<ScatteringMatrix>, f64, f64) {
    let adm = match AdmittanceMatrix::new(linalg::times_j(b), y0) {
        Ok(a) => a,
        Err(_) => return (None, f64::INFINITY, f64::INFINITY),
    };
    match netcore::scattering_from_admittance(&adm) {
        Ok(theta) => {
            let report = netcore::check_lossless_reciprocal(&theta, 0.0);
            (Some(theta), report.unitarity_residual, report.symmetry_residual)
        }
        Err(_) => (None, f64::INFINITY, f64::INFINITY),
    }
}

/// Checks `B` against the transmitter target with the stem-connected mask.
pub fn verify_tx(b: &RMat, v_bar: &CMat, y0: f64) -> Result<VerificationReport> {
    let (nt, ns) = v_bar.shape();
    let mask = ArchitectureMask::from_graph(&archgraph::tx_stem_graph(ns, nt)?);
    verify_tx_against(b, v_bar, y0, &mask)
}

/// Checks `B` against the receiver target with the stem-connected mask.
pub fn verify_rx(b: &RMat, u_bar: &CMat, y0: f64) -> Result<VerificationReport> {
    let (nr, ns) = u_bar.shape();
    let mask = ArchitectureMask::from_graph(&archgraph::rx_stem_graph(ns, nr)?);
    verify_rx_against(b, u_bar, y0, &mask)
}

pub fn mask_for(side: Side, arch: Architecture, n_streams: usize, n_antennas: usize) -> Result<ArchitectureMask> {
    Ok(match (arch, side) {
        (Architecture::Fully, _) => ArchitectureMask::full(n_streams + n_antennas),
        (Architecture::Stem, Side::Tx) => {
            ArchitectureMask::from_graph(&archgraph::tx_stem_graph(n_streams, n_antennas)?)
        }
        (Architecture::Stem, Side::Rx) => {
            ArchitectureMask::from_graph(&archgraph::rx_stem_graph(n_streams, n_antennas)?)
        }
    })
}

pub fn verify_tx_against(
    b: &RMat,
    v_bar: &CMat,
    y0: f64,
    mask: &ArchitectureMask,
) -> Result<VerificationReport> {
    check_candidate(b, v_bar, y0, "V_bar")?;
    let (nt, ns) = v_bar.shape();
    let n = ns + nt;
    let pair = RealTargetPair::from_target(v_bar);
    let Blocks { b11, b12, b21, b22 } = split_blocks(b, ns);

    let case_residuals = [
        (&pair.j * &b21 + RMat::identity(ns, ns) * y0).norm(),
        (&pair.j * &b22 - &pair.r * y0).norm(),
        (&b11 + &pair.r * &b21).norm(),
        (&b12 + &pair.r * &b22 + &pair.j * y0).norm(),
    ];

    let mut inputs = CMat::zeros(n, ns);
    let mut driven = CMat::zeros(n, ns);
    for s in 0..ns {
        inputs[(s, s)] = Complex64::new(1.0, 0.0);
    }
    driven.view_mut((ns, 0), (nt, ns)).copy_from(v_bar);

    let (theta, unitarity_residual, reciprocity_residual) = theta_residuals(b, y0);
    let scattering_residual = match &theta {
        Some(t) => (t.0.columns(0, ns) - &driven).norm(),
        None => f64::INFINITY,
    };
    let jb = linalg::times_j(b);
    let eye = CMat::identity(n, n) * Complex64::new(y0, 0.0);
    let admittance_residual = ((&eye - &jb) * &inputs - (&eye + &jb) * &driven).norm();

    report(
        Side::Tx,
        b,
        mask,
        scattering_residual,
        admittance_residual,
        case_residuals,
        (&b11 - b11.transpose()).norm(),
        case_residuals[0],
        unitarity_residual,
        reciprocity_residual,
    )
}

pub fn verify_rx_against(
    b: &RMat,
    u_bar: &CMat,
    y0: f64,
    mask: &ArchitectureMask,
) -> Result<VerificationReport> {
    check_candidate(b, u_bar, y0, "U_bar")?;
    let (nr, ns) = u_bar.shape();
    let n = nr + ns;
    let pair = RealTargetPair::from_target(u_bar);
    let Blocks { b11, b12, b21, b22 } = split_blocks(b, nr);

    let case_residuals = [
        (&pair.j * &b11 + &pair.r * y0).norm(),
        (&pair.j * &b12 - RMat::identity(ns, ns) * y0).norm(),
        (&pair.r * &b11 + &b21 - &pair.j * y0).norm(),
        (&pair.r * &b12 + &b22).norm(),
    ];

    let mut outputs = CMat::zeros(n, ns);
    let mut driven = CMat::zeros(n, ns);
    for s in 0..ns {
        outputs[(nr + s, s)] = Complex64::new(1.0, 0.0);
    }
    driven.view_mut((0, 0), (nr, ns)).copy_from(&u_bar.conjugate());

    let (theta, unitarity_residual, reciprocity_residual) = theta_residuals(b, y0);
    let scattering_residual = match &theta {
        Some(t) => (t.0.columns(nr, ns) - &driven).norm(),
        None => f64::INFINITY,
    };
    let jb = linalg::times_j(b);
    let eye = CMat::identity(n, n) * Complex64::new(y0, 0.0);
    let admittance_residual = ((&eye - &jb) * &outputs - (&eye + &jb) * &driven).norm();

    report(
        Side::Rx,
        b,
        mask,
        scattering_residual,
        admittance_residual,
        case_residuals,
        (&b22 - b22.transpose()).norm(),
        case_residuals[1],
        unitarity_residual,
        reciprocity_residual,
    )
}

#[allow(clippy::too_many_arguments)]
fn report(
    side: Side,
    b: &RMat,
    mask: &ArchitectureMask,
    scattering_residual: f64,
    admittance_residual: f64,
    case_residuals: [f64; 4],
    unused_block_symmetry_residual: f64,
    unused_case_residual: f64,
    unitarity_residual: f64,
    reciprocity_residual: f64,
) -> Result<VerificationReport> {
    let mask_violations = mask.violations(b, MASK_TOL)?.len();
    Ok(VerificationReport {
        side,
        scattering_residual,
        admittance_residual,
        case_residuals,
        symmetry_residual: (b - b.transpose()).norm(),
        unused_block_symmetry_residual,
        unused_case_residual,
        unitarity_residual,
        reciprocity_residual,
        mask_violations,
        mask_ok: mask_violations == 0,
    })
}
