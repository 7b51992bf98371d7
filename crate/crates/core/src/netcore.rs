//! Microwave network algebra: admittance assembly, admittance/scattering
//! conversion, precoder/combiner extraction and lossless-reciprocal checks.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{MilacError, Result};
use crate::linalg::{self, CMat, RMat};

/// Reference admittance of 50 ohm, in siemens.
pub const DEFAULT_Y0: f64 = 1.0 / 50.0;

/// Real symmetric susceptance matrix `B` (siemens), stored as its upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptanceMatrix {
    n: usize,
    /// Row-major upper triangle including the diagonal.
    upper: Vec<f64>,
}

impl SusceptanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    /// Takes the average of `b` and `b^T`. Returns the asymmetry
    /// `||b - b^T||_F` of the input alongside the matrix.
    pub fn from_dense(b: &RMat) -> Result<(Self, f64)> {
        if !b.is_square() {
            return Err(MilacError::Dimension(format!(
                "susceptance must be square, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let n = b.nrows();
        let mut s = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let k = s.offset(i, j);
                s.upper[k] = 0.5 * (b[(i, j)] + b[(j, i)]);
            }
        }
        let asym = (b - b.transpose()).norm();
        Ok((s, asym))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.offset(i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.offset(i, j);
        self.upper[k] = value;
    }

    pub fn to_dense(&self) -> RMat {
        RMat::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Lossless reciprocal admittance `Y = jB`.
    pub fn admittance(&self, y0: f64) -> AdmittanceMatrix {
        AdmittanceMatrix {
            y: linalg::times_j(&self.to_dense()),
            y0,
        }
    }
}

/// Complex admittance matrix `Y` with its reference admittance `Y0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    pub y: CMat,
    pub y0: f64,
}

impl AdmittanceMatrix {
    pub fn new(y: CMat, y0: f64) -> Result<Self> {
        if !y.is_square() {
            return Err(MilacError::Dimension("admittance must be square".into()));
        }
        if !(y0 > 0.0 && y0.is_finite()) {
            return Err(MilacError::Domain(format!("reference admittance {y0} must be positive")));
        }
        Ok(Self { y, y0 })
    }

    /// `jB` from a (possibly asymmetric) real matrix.
    pub fn from_susceptance(b: &RMat, y0: f64) -> Result<Self> {
        Self::new(linalg::times_j(b), y0)
    }

    pub fn dim(&self) -> usize {
        self.y.nrows()
    }

    /// True when `Re{Y} = 0` and `Y = Y^T` within `tol` (Frobenius).
    pub fn is_lossless_reciprocal(&self, tol: f64) -> bool {
        let re = self.y.map(|z| z.re).norm();
        let asym = (&self.y - self.y.transpose()).norm();
        re <= tol && asym <= tol
    }
}

/// Scattering matrix `Theta` (dimensionless).
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix(pub CMat);

/// `N_T x N_S` precoding matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder(pub CMat);

/// `N_S x N_R` combining matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Combiner(pub CMat);

/// Builds `Y` from component admittances keyed by 0-based port pairs:
/// `(n, n)` is the grounding admittance of port `n`, `(m, n)` with `m != n`
/// the admittance between ports `m` and `n`. Missing components are open
/// circuits.
pub fn assemble_admittance(
    components: &BTreeMap<(usize, usize), Complex64>,
    n_ports: usize,
    y0: f64,
) -> Result<AdmittanceMatrix> {
    let mut y = CMat::zeros(n_ports, n_ports);
    for (&(m, n), &value) in components {
        if m >= n_ports || n >= n_ports {
            return Err(MilacError::Dimension(format!(
                "component ({m}, {n}) out of range for {n_ports} ports"
            )));
        }
        if m != n && components.contains_key(&(n, m)) && m > n {
            return Err(MilacError::Dimension(format!(
                "component between ports {n} and {m} given twice"
            )));
        }
        if m == n {
            y[(n, n)] += value;
        } else {
            y[(m, n)] -= value;
            y[(n, m)] -= value;
            y[(m, m)] += value;
            y[(n, n)] += value;
        }
    }
    AdmittanceMatrix::new(y, y0)
}

/// `Theta = (Y0 I + Y)^-1 (Y0 I - Y)`.
pub fn scattering_from_admittance(adm: &AdmittanceMatrix) -> Result<ScatteringMatrix> {
    let n = adm.dim();
    let eye = CMat::identity(n, n) * Complex64::new(adm.y0, 0.0);
    let theta = linalg::solve_checked(&(&eye + &adm.y), &(&eye - &adm.y), "Y0 I + Y")?;
    Ok(ScatteringMatrix(theta))
}

/// Inverse Cayley map, `Y = Y0 (I + Theta)^-1 (I - Theta)`.
pub fn admittance_from_scattering(theta: &ScatteringMatrix, y0: f64) -> Result<AdmittanceMatrix> {
    let n = theta.0.nrows();
    let eye = CMat::identity(n, n);
    let y = linalg::solve_checked(&(&eye + &theta.0), &(&eye - &theta.0), "I + Theta")?;
    AdmittanceMatrix::new(y * Complex64::new(y0, 0.0), y0)
}

/// `[(Y/Y0 + I)^-1]` restricted to `rows` and `cols`, solving only for the
/// required columns.
fn inverse_block(
    adm: &AdmittanceMatrix,
    row_start: usize,
    n_rows: usize,
    col_start: usize,
    n_cols: usize,
) -> Result<CMat> {
    let n = adm.dim();
    let a = &adm.y / Complex64::new(adm.y0, 0.0) + CMat::identity(n, n);
    let mut rhs = CMat::zeros(n, n_cols);
    for c in 0..n_cols {
        rhs[(col_start + c, c)] = Complex64::new(1.0, 0.0);
    }
    let x = linalg::solve_checked(&a, &rhs, "Y/Y0 + I")?;
    Ok(x.rows(row_start, n_rows).into_owned())
}

fn check_ports(adm_dim: usize, a: usize, b: usize, what: &str) -> Result<()> {
    if a == 0 || b == 0 || adm_dim != a + b {
        return Err(MilacError::Dimension(format!(
            "{what}: {adm_dim}-port network does not match {a} + {b} ports"
        )));
    }
    Ok(())
}

/// `F = [(Y_F/Y0 + I)^-1]_{N_S + N_T, N_S}`.
pub fn precoder_from_admittance(
    y_f: &AdmittanceMatrix,
    n_streams: usize,
    n_tx: usize,
) -> Result<Precoder> {
    check_ports(y_f.dim(), n_streams, n_tx, "precoder")?;
    Ok(Precoder(inverse_block(y_f, n_streams, n_tx, 0, n_streams)?))
}

/// `F = 1/2 [Theta_F]_{N_S + N_T, N_S}`.
pub fn precoder_from_scattering(
    theta_f: &ScatteringMatrix,
    n_streams: usize,
    n_tx: usize,
) -> Result<Precoder> {
    check_ports(theta_f.0.nrows(), n_streams, n_tx, "precoder")?;
    Ok(Precoder(
        theta_f.0.view((n_streams, 0), (n_tx, n_streams)) * Complex64::new(0.5, 0.0),
    ))
}

/// `G = [(Y_G/Y0 + I)^-1]_{N_R + N_S, N_R}`.
pub fn combiner_from_admittance(
    y_g: &AdmittanceMatrix,
    n_streams: usize,
    n_rx: usize,
) -> Result<Combiner> {
    check_ports(y_g.dim(), n_rx, n_streams, "combiner")?;
    Ok(Combiner(inverse_block(y_g, n_rx, n_streams, 0, n_rx)?))
}

/// `G = 1/2 [Theta_G]_{N_R + N_S, N_R}`.
pub fn combiner_from_scattering(
    theta_g: &ScatteringMatrix,
    n_streams: usize,
    n_rx: usize,
) -> Result<Combiner> {
    check_ports(theta_g.0.nrows(), n_rx, n_streams, "combiner")?;
    Ok(Combiner(
        theta_g.0.view((n_rx, 0), (n_streams, n_rx)) * Complex64::new(0.5, 0.0),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosslessReport {
    /// `||Theta^H Theta - I||_F`
    pub unitarity_residual: f64,
    /// `||Theta - Theta^T||_F`
    pub symmetry_residual: f64,
    pub passed: bool,
}

pub fn check_lossless_reciprocal(theta: &ScatteringMatrix, tol: f64) -> LosslessReport {
    let t = &theta.0;
    let n = t.nrows();
    let unitarity_residual = (t.adjoint() * t - CMat::identity(n, n)).norm();
    let symmetry_residual = (t - t.transpose()).norm();
    LosslessReport {
        unitarity_residual,
        symmetry_residual,
        passed: unitarity_residual <= tol && symmetry_residual <= tol,
    }
}
