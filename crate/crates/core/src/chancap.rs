//! Channel generation, truncated SVD, water-filling, achievable rate and capacity.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{MilacError, Result};
use crate::linalg::{CMat, SortedSvd};

/// Transmit power and noise power, both positive and in the same units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub p_t: f64,
    pub sigma2: f64,
}

impl LinkBudget {
    pub fn new(p_t: f64, sigma2: f64) -> Result<Self> {
        if !(p_t > 0.0 && sigma2 > 0.0 && p_t.is_finite() && sigma2.is_finite()) {
            return Err(MilacError::Domain(format!(
                "link budget needs positive powers, got P_T = {p_t}, sigma^2 = {sigma2}"
            )));
        }
        Ok(Self { p_t, sigma2 })
    }

    /// Unit noise power and `P_T = 10^(snr_db / 10)`.
    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        Self::new(10f64.powf(snr_db / 10.0), 1.0)
    }

    pub fn snr(&self) -> f64 {
        self.p_t / self.sigma2
    }
}

/// Per-stream power fractions, nonnegative and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&x| !(x >= 0.0)) {
            return Err(MilacError::Domain("powers must be nonnegative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MilacError::Domain(format!("powers sum to {total}, expected 1")));
        }
        Ok(Self(p))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// First `N_S` singular triplets of a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// `N_R x N_S`
    pub u_bar: CMat,
    /// Nonincreasing, length `N_S`.
    pub sigma: Vec<f64>,
    /// `N_T x N_S`
    pub v_bar: CMat,
}

impl TruncatedSvd {
    /// Eigenvalues `lambda_s = sigma_s^2` of `H H^H`.
    pub fn lambdas(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s * s).collect()
    }
}

/// Truncated SVD with a deterministic phase convention: every right singular
/// vector has its largest-magnitude entry (first one on ties) real positive,
/// and the left vector is rotated accordingly so that `H v = sigma u`.
pub fn truncated_svd(h: &CMat, n_streams: usize) -> Result<TruncatedSvd> {
    let (n_rx, n_tx) = h.shape();
    if n_streams == 0 || n_streams > n_rx.min(n_tx) {
        return Err(MilacError::Dimension(format!(
            "{n_streams} streams over a {n_rx}x{n_tx} channel"
        )));
    }
    let svd = SortedSvd::new(h.clone())?;
    let mut u_bar = svd.u.columns(0, n_streams).into_owned();
    let mut v_bar = svd.v_t.rows(0, n_streams).adjoint();
    for s in 0..n_streams {
        let mut best = 0;
        for k in 1..n_tx {
            if v_bar[(k, s)].norm() > v_bar[(best, s)].norm() {
                best = k;
            }
        }
        let pivot = v_bar[(best, s)];
        if pivot.norm() > 0.0 {
            let rot = pivot.conj() / pivot.norm();
            for k in 0..n_tx {
                v_bar[(k, s)] *= rot;
            }
            for k in 0..n_rx {
                u_bar[(k, s)] *= rot;
            }
            v_bar[(best, s)] = Complex64::new(v_bar[(best, s)].re, 0.0);
        }
    }
    Ok(TruncatedSvd {
        u_bar,
        sigma: svd.singular_values.iter().take(n_streams).copied().collect(),
        v_bar,
    })
}

/// Channel matrix with its truncated SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: CMat,
    pub svd: TruncatedSvd,
}

impl ChannelRealization {
    pub fn from_matrix(h: CMat, n_streams: usize) -> Result<Self> {
        let svd = truncated_svd(&h, n_streams)?;
        Ok(Self { h, svd })
    }

    /// i.i.d. Rayleigh channel drawn from `seed`.
    pub fn rayleigh(n_rx: usize, n_tx: usize, n_streams: usize, seed: u64) -> Result<Self> {
        Self::from_matrix(rayleigh_channel(n_rx, n_tx, seed)?, n_streams)
    }

    pub fn n_streams(&self) -> usize {
        self.svd.sigma.len()
    }
}

/// Folds `parts` into one 64-bit seed with the SplitMix64 finalizer, so that
/// nearby inputs give unrelated streams.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        state = splitmix64(state ^ p);
    }
    state
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `N_R x N_T` matrix with i.i.d. CN(0, 1) entries (real and imaginary parts
/// each of variance 1/2), filled column by column from a ChaCha8 stream.
pub fn rayleigh_channel(n_rx: usize, n_tx: usize, seed: u64) -> Result<CMat> {
    if n_rx == 0 || n_tx == 0 {
        return Err(MilacError::Dimension("channel dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    Ok(CMat::from_fn(n_rx, n_tx, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re * scale, im * scale)
    }))
}

fn stream_gains(lambda: &[f64], budget: LinkBudget) -> Result<Vec<f64>> {
    if lambda.is_empty() {
        return Err(MilacError::Domain("no streams".into()));
    }
    if let Some(bad) = lambda.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(MilacError::Domain(format!("eigenvalue {bad} is not positive")));
    }
    Ok(lambda
        .iter()
        .map(|l| budget.p_t * l / (4.0 * budget.sigma2))
        .collect())
}

/// Maximizes `sum log2(1 + P_T p_s lambda_s / (4 sigma^2))` over the simplex by
/// the exact active-set method.
pub fn water_filling(lambda: &[f64], budget: LinkBudget) -> Result<PowerAllocation> {
    let gains = stream_gains(lambda, budget)?;
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).expect("finite gains"));

    // Largest support k whose water level clears the k-th inverse gain.
    let mut level = 0.0;
    let mut inv_sum = 0.0;
    for (k, &s) in order.iter().enumerate() {
        let candidate_sum = inv_sum + 1.0 / gains[s];
        let candidate = (1.0 + candidate_sum) / (k + 1) as f64;
        if candidate - 1.0 / gains[s] <= 0.0 {
            break;
        }
        inv_sum = candidate_sum;
        level = candidate;
    }
    let p: Vec<f64> = gains.iter().map(|g| (level - 1.0 / g).max(0.0)).collect();
    Ok(PowerAllocation(p))
}

/// `C = sum log2(1 + P_T p_s lambda_s / (4 sigma^2))`.
pub fn capacity(lambda: &[f64], p: &PowerAllocation, budget: LinkBudget) -> Result<f64> {
    if lambda.len() != p.len() {
        return Err(MilacError::Dimension(format!(
            "{} eigenvalues with {} powers",
            lambda.len(),
            p.len()
        )));
    }
    let gains = stream_gains(lambda, budget)?;
    Ok(gains
        .iter()
        .zip(p.as_slice())
        .map(|(g, p)| (g * p).ln_1p() / std::f64::consts::LN_2)
        .sum())
}

/// Achievable rate with interference treated as noise. A stream whose
/// combiner row vanishes contributes zero.
pub fn achievable_rate(
    g: &CMat,
    h: &CMat,
    f: &CMat,
    p: &PowerAllocation,
    budget: LinkBudget,
) -> Result<f64> {
    let n_s = p.len();
    if g.nrows() != n_s || f.ncols() != n_s || g.ncols() != h.nrows() || h.ncols() != f.nrows() {
        return Err(MilacError::Dimension(format!(
            "G {}x{}, H {}x{}, F {}x{} with {} streams",
            g.nrows(),
            g.ncols(),
            h.nrows(),
            h.ncols(),
            f.nrows(),
            f.ncols(),
            n_s
        )));
    }
    let ghf = g * h * f;
    let p = p.as_slice();
    let mut rate = 0.0;
    for s in 0..n_s {
        let g_norm2 = g.row(s).norm_squared();
        if g_norm2 == 0.0 {
            continue;
        }
        let signal = budget.p_t * p[s] * ghf[(s, s)].norm_sqr();
        let interference: f64 = (0..n_s)
            .filter(|&t| t != s)
            .map(|t| p[t] * ghf[(s, t)].norm_sqr())
            .sum::<f64>()
            * budget.p_t;
        rate += (signal / (interference + g_norm2 * budget.sigma2)).ln_1p();
    }
    Ok(rate / std::f64::consts::LN_2)
}
