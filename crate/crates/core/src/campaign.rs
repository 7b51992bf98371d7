//! Monte Carlo rate campaigns, complexity tables and single-realization
//! verification.
//!
//! A campaign config is a flat TOML file:
//!
//! ```toml
//! n_streams = [4, 8]
//! n_antennas = [16, 32]        # N_T = N_R
//! snr_db = [0.0, 10.0]
//! trials = 100
//! seed = 7
//! architectures = ["stem", "fully"]
//! y0 = 0.02
//! verify_tolerance = 1e-8
//! rate_tolerance = 1e-9
//! output_dir = "out"
//! workers = 4                  # optional; MILAC_WORKERS overrides
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::archgraph::{self, circuit_complexity};
use crate::chancap::{self, derive_seed, ChannelRealization, LinkBudget, PowerAllocation};
use crate::error::{MilacError, Result};
use crate::linalg::{self, CMat, RMat};
use crate::matio;
use crate::netcore::{self, AdmittanceMatrix, DEFAULT_Y0};
use crate::stemopt::{self, Architecture, BlockTrace, Side, VerificationReport};

/// First line of every CSV this module writes.
pub const CSV_VERSION_LINE: &str = "# milac-kit v1";

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "MILAC_WORKERS";

pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub n_streams: Vec<usize>,
    pub n_antennas: Vec<usize>,
    pub snr_db: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_architectures", deserialize_with = "parse_architectures")]
    pub architectures: Vec<Architecture>,
    #[serde(default = "default_y0")]
    pub y0: f64,
    #[serde(default = "default_verify_tolerance")]
    pub verify_tolerance: f64,
    #[serde(default = "default_rate_tolerance")]
    pub rate_tolerance: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}
fn default_architectures() -> Vec<Architecture> {
    vec![Architecture::Stem, Architecture::Fully]
}
fn default_y0() -> f64 {
    DEFAULT_Y0
}
fn default_verify_tolerance() -> f64 {
    1e-8
}
fn default_rate_tolerance() -> f64 {
    1e-9
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("milac-out")
}

fn parse_architectures<'de, D>(d: D) -> std::result::Result<Vec<Architecture>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let names = Vec::<String>::deserialize(d)?;
    let chosen = names
        .iter()
        .map(|n| n.parse::<Architecture>().map_err(serde::de::Error::custom))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok([Architecture::Stem, Architecture::Fully]
        .into_iter()
        .filter(|a| chosen.contains(a))
        .collect())
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| MilacError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MilacError::Config(msg));
        if self.n_streams.is_empty() || self.n_antennas.is_empty() || self.snr_db.is_empty() {
            return bad("n_streams, n_antennas and snr_db must be non-empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.architectures.is_empty() {
            return bad("at least one architecture is required".into());
        }
        if !(self.y0.is_finite() && self.y0 > 0.0) {
            return bad(format!("y0 must be positive, got {}", self.y0));
        }
        for tol in [self.verify_tolerance, self.rate_tolerance] {
            if !(tol.is_finite() && tol > 0.0) {
                return bad(format!("tolerances must be positive, got {tol}"));
            }
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return bad(format!("non-finite SNR {s}"));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        for &ns in &self.n_streams {
            for &n in &self.n_antennas {
                if ns == 0 || n == 0 || ns > n {
                    return bad(format!("infeasible grid point N_S = {ns}, N = {n}"));
                }
            }
        }
        Ok(())
    }

    /// `(N_S, N)` pairs in stream-major order.
    pub fn grid(&self) -> Vec<(usize, usize)> {
        self.n_streams
            .iter()
            .flat_map(|&ns| self.n_antennas.iter().map(move |&n| (ns, n)))
            .collect()
    }
}

/// Worker count from, in order of precedence, `MILAC_WORKERS`, the config,
/// and the available parallelism.
pub fn resolve_workers(configured: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(MilacError::Config(format!("{WORKERS_ENV}='{v}' is not a positive integer"))),
        };
    }
    Ok(configured.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Outcome of one architecture on one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchOutcome {
    pub arch: Architecture,
    /// Rate at each configured SNR.
    pub rates: Vec<f64>,
    /// Worst of the tx and rx verification residuals.
    pub verify_residual: f64,
    pub mask_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub grid_index: usize,
    pub n_streams: usize,
    pub n_antennas: usize,
    pub trial: usize,
    pub seed: u64,
    pub capacities: Vec<f64>,
    pub outcomes: Vec<ArchOutcome>,
    /// Not written to the trial CSV, which must be reproducible.
    pub wall_time: f64,
}

impl TrialRecord {
    pub fn outcome(&self, arch: Architecture) -> Option<&ArchOutcome> {
        self.outcomes.iter().find(|o| o.arch == arch)
    }
}

/// Everything needed to design and evaluate one side pair.
pub struct Designed {
    pub b_tx: RMat,
    pub b_rx: RMat,
    pub tx_report: VerificationReport,
    pub rx_report: VerificationReport,
    pub f: CMat,
    pub g: CMat,
    /// Targets actually realized, after any phase regularization.
    pub v_target: CMat,
    pub u_target: CMat,
    pub tx_trace: Option<BlockTrace>,
    pub rx_trace: Option<BlockTrace>,
}

/// Designs transmitter and receiver networks for `channel` and verifies them
/// against the targets they realize.
pub fn design(channel: &ChannelRealization, arch: Architecture, y0: f64, seed: u64) -> Result<Designed> {
    let svd = &channel.svd;
    let ns = channel.n_streams();
    let (nr, nt) = channel.h.shape();
    let (b_tx, b_rx, v_t, u_t, tx_trace, rx_trace) = match arch {
        Architecture::Stem => {
            let tx = stemopt::optimize_tx_stem_regularized(&svd.v_bar, y0, derive_seed(&[seed, 1]))?;
            let rx = stemopt::optimize_rx_stem_regularized(&svd.u_bar, y0, derive_seed(&[seed, 2]))?;
            (
                tx.solution.assembled,
                rx.solution.assembled,
                tx.target,
                rx.target,
                Some(tx.solution.trace),
                Some(rx.solution.trace),
            )
        }
        Architecture::Fully => {
            let tx = stemopt::optimize_tx_fully(&svd.v_bar, y0)?;
            let rx = stemopt::optimize_rx_fully(&svd.u_bar, y0)?;
            (tx.assembled, rx.assembled, svd.v_bar.clone(), svd.u_bar.clone(), None, None)
        }
    };
    let tx_mask = stemopt::mask_for(Side::Tx, arch, ns, nt)?;
    let rx_mask = stemopt::mask_for(Side::Rx, arch, ns, nr)?;
    let tx_report = stemopt::verify_tx_against(&b_tx, &v_t, y0, &tx_mask)?;
    let rx_report = stemopt::verify_rx_against(&b_rx, &u_t, y0, &rx_mask)?;
    let (f, g) = beamformers(&b_tx, &b_rx, ns, nt, nr, y0)?;
    Ok(Designed {
        b_tx,
        b_rx,
        tx_report,
        rx_report,
        f,
        g,
        v_target: v_t,
        u_target: u_t,
        tx_trace,
        rx_trace,
    })
}

/// Precoder and combiner induced by transmitter and receiver susceptances.
pub fn beamformers(b_tx: &RMat, b_rx: &RMat, ns: usize, nt: usize, nr: usize, y0: f64) -> Result<(CMat, CMat)> {
    let y_f = AdmittanceMatrix::new(linalg::times_j(b_tx), y0)?;
    let y_g = AdmittanceMatrix::new(linalg::times_j(b_rx), y0)?;
    let f = netcore::precoder_from_admittance(&y_f, ns, nt)?.0;
    let g = netcore::combiner_from_admittance(&y_g, ns, nr)?.0;
    Ok((f, g))
}

fn worst_residual(r: &VerificationReport) -> f64 {
    r.scattering_residual
        .max(r.max_case_residual())
        .max(r.symmetry_residual)
}

fn run_trial(cfg: &CampaignConfig, grid_index: usize, ns: usize, n: usize, trial: usize) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = derive_seed(&[cfg.seed, grid_index as u64, trial as u64]);
    let channel = ChannelRealization::rayleigh(n, n, ns, seed)?;
    let lambdas = channel.svd.lambdas();
    let budgets = cfg
        .snr_db
        .iter()
        .map(|&s| LinkBudget::from_snr_db(s))
        .collect::<Result<Vec<_>>>()?;
    let powers = budgets
        .iter()
        .map(|&b| chancap::water_filling(&lambdas, b))
        .collect::<Result<Vec<PowerAllocation>>>()?;
    let capacities = budgets
        .iter()
        .zip(&powers)
        .map(|(&b, p)| chancap::capacity(&lambdas, p, b))
        .collect::<Result<Vec<_>>>()?;

    let mut outcomes = Vec::new();
    for &arch in &cfg.architectures {
        let d = design(&channel, arch, cfg.y0, seed)?;
        let rates = budgets
            .iter()
            .zip(&powers)
            .map(|(&b, p)| chancap::achievable_rate(&d.g, &channel.h, &d.f, p, b))
            .collect::<Result<Vec<_>>>()?;
        outcomes.push(ArchOutcome {
            arch,
            rates,
            verify_residual: worst_residual(&d.tx_report).max(worst_residual(&d.rx_report)),
            mask_ok: d.tx_report.mask_ok && d.rx_report.mask_ok,
        });
    }
    Ok(TrialRecord {
        grid_index,
        n_streams: ns,
        n_antennas: n,
        trial,
        seed,
        capacities,
        outcomes,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Summary statistics of one quantity at one grid point and SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSummary {
    pub n_streams: usize,
    pub n_antennas: usize,
    pub snr_db: f64,
    pub quantity: String,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub records: Vec<TrialRecord>,
    pub summaries: Vec<GridSummary>,
    /// Human-readable descriptions of every failed check.
    pub failures: Vec<String>,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs every trial of `cfg` on `workers` threads. Results do not depend on
/// the worker count.
pub fn run_campaign_with(cfg: &CampaignConfig, workers: usize) -> Result<CampaignReport> {
    cfg.validate()?;
    let units: Vec<(usize, usize, usize, usize)> = cfg
        .grid()
        .into_iter()
        .enumerate()
        .flat_map(|(gi, (ns, n))| (0..cfg.trials).map(move |t| (gi, ns, n, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| MilacError::Config(format!("thread pool: {e}")))?;
    let records = pool.install(|| {
        units
            .par_iter()
            .map(|&(gi, ns, n, t)| run_trial(cfg, gi, ns, n, t))
            .collect::<Result<Vec<_>>>()
    })?;
    let failures = check_records(cfg, &records);
    for f in &failures {
        log::warn!("{f}");
    }
    let summaries = summarize(cfg, &records);
    Ok(CampaignReport {
        records,
        summaries,
        failures,
    })
}

/// [`run_campaign_with`] using [`resolve_workers`], then writes
/// `trials.csv`, `summary.csv` and `timing.csv` into the output directory.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport> {
    let workers = resolve_workers(cfg.workers)?;
    log::info!("running {} grid points x {} trials on {workers} workers", cfg.grid().len(), cfg.trials);
    let report = run_campaign_with(cfg, workers)?;
    write_outputs(cfg, &report, &cfg.output_dir)?;
    Ok(report)
}

pub fn write_outputs(cfg: &CampaignConfig, report: &CampaignReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("trials.csv"), trials_csv(cfg, &report.records))?;
    std::fs::write(dir.join("summary.csv"), summary_csv(&report.summaries))?;
    std::fs::write(dir.join("timing.csv"), timing_csv(&report.records))?;
    Ok(())
}

fn check_records(cfg: &CampaignConfig, records: &[TrialRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for r in records {
        for o in &r.outcomes {
            let tag = format!(
                "N_S={} N={} trial={} arch={}",
                r.n_streams,
                r.n_antennas,
                r.trial,
                o.arch.as_str()
            );
            if !(o.verify_residual <= cfg.verify_tolerance) {
                out.push(format!("{tag}: verification residual {:.3e}", o.verify_residual));
            }
            if !o.mask_ok {
                out.push(format!("{tag}: susceptance outside the architecture mask"));
            }
            for ((rate, cap), snr) in o.rates.iter().zip(&r.capacities).zip(&cfg.snr_db) {
                if !((rate - cap).abs() <= cfg.rate_tolerance * cap) {
                    out.push(format!("{tag} snr={snr}: rate {rate} vs capacity {cap}"));
                }
            }
        }
    }
    out
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn summarize(cfg: &CampaignConfig, records: &[TrialRecord]) -> Vec<GridSummary> {
    let mut by_grid: BTreeMap<usize, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_grid.entry(r.grid_index).or_default().push(r);
    }
    let mut out = Vec::new();
    for rs in by_grid.values() {
        let (ns, n) = (rs[0].n_streams, rs[0].n_antennas);
        for (k, &snr) in cfg.snr_db.iter().enumerate() {
            let mut push = |quantity: String, values: Vec<f64>| {
                let (mean, std) = mean_std(&values);
                out.push(GridSummary {
                    n_streams: ns,
                    n_antennas: n,
                    snr_db: snr,
                    quantity,
                    mean,
                    std,
                    count: values.len(),
                });
            };
            push("capacity".into(), rs.iter().map(|r| r.capacities[k]).collect());
            for &arch in &cfg.architectures {
                let values = rs
                    .iter()
                    .filter_map(|r| r.outcome(arch).map(|o| o.rates[k]))
                    .collect();
                push(format!("rate_{}", arch.as_str()), values);
            }
        }
    }
    out
}

fn rate_cell(r: &TrialRecord, arch: Architecture, k: usize) -> String {
    r.outcome(arch).map(|o| o.rates[k].to_string()).unwrap_or_default()
}

fn residual_cell(r: &TrialRecord, arch: Architecture) -> String {
    r.outcome(arch)
        .map(|o| format!("{:e}", o.verify_residual))
        .unwrap_or_default()
}

/// One row per (grid point, trial, SNR), in grid-then-trial order.
pub fn trials_csv(cfg: &CampaignConfig, records: &[TrialRecord]) -> String {
    let mut s = String::new();
    writeln!(s, "{CSV_VERSION_LINE}").unwrap();
    writeln!(
        s,
        "trial,seed,n_s,n_t,n_r,snr_db,rate_stem,rate_fully,capacity,residual_stem,residual_fully"
    )
    .unwrap();
    for r in records {
        for (k, snr) in cfg.snr_db.iter().enumerate() {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.trial,
                r.seed,
                r.n_streams,
                r.n_antennas,
                r.n_antennas,
                snr,
                rate_cell(r, Architecture::Stem, k),
                rate_cell(r, Architecture::Fully, k),
                r.capacities[k],
                residual_cell(r, Architecture::Stem),
                residual_cell(r, Architecture::Fully),
            )
            .unwrap();
        }
    }
    s
}

pub fn summary_csv(summaries: &[GridSummary]) -> String {
    let mut s = String::new();
    writeln!(s, "{CSV_VERSION_LINE}").unwrap();
    writeln!(s, "n_s,n_t,n_r,snr_db,quantity,mean,std,count").unwrap();
    for g in summaries {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            g.n_streams, g.n_antennas, g.n_antennas, g.snr_db, g.quantity, g.mean, g.std, g.count
        )
        .unwrap();
    }
    s
}

fn timing_csv(records: &[TrialRecord]) -> String {
    let mut s = String::new();
    writeln!(s, "{CSV_VERSION_LINE}").unwrap();
    writeln!(s, "trial,n_s,n_t,n_r,wall_time_s").unwrap();
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{:.6}",
            r.trial, r.n_streams, r.n_antennas, r.n_antennas, r.wall_time
        )
        .unwrap();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexityRow {
    pub n_streams: usize,
    pub n_antennas: usize,
    pub stem: usize,
    pub fully: usize,
}

/// Closed-form stem and fully-connected complexities, each checked against
/// a count over the explicitly built graph.
pub fn complexity_table(n_streams: &[usize], n_antennas: &[usize]) -> Result<Vec<ComplexityRow>> {
    let mut rows = Vec::new();
    for &ns in n_streams {
        for &n in n_antennas {
            if ns == 0 || n == 0 {
                return Err(MilacError::Domain("dimensions must be positive".into()));
            }
            if ns > n {
                continue;
            }
            let stem = archgraph::stem_complexity(ns, n);
            let fully = archgraph::fully_complexity(ns, n);
            let counted_stem = circuit_complexity(&archgraph::tx_stem_graph(ns, n)?).0;
            let counted_fully = circuit_complexity(&archgraph::complete_graph(ns + n)?).0;
            if stem != counted_stem || fully != counted_fully {
                return Err(MilacError::Domain(format!(
                    "complexity mismatch at N_S={ns}, N={n}: stem {stem} vs {counted_stem}, \
                     fully {fully} vs {counted_fully}"
                )));
            }
            rows.push(ComplexityRow {
                n_streams: ns,
                n_antennas: n,
                stem,
                fully,
            });
        }
    }
    Ok(rows)
}

pub fn complexity_csv(rows: &[ComplexityRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{CSV_VERSION_LINE}").unwrap();
    writeln!(s, "n_s,n,stem,fully").unwrap();
    for r in rows {
        writeln!(s, "{},{},{},{}", r.n_streams, r.n_antennas, r.stem, r.fully).unwrap();
    }
    s
}

/// Where the channel of a verification run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    Seed(u64),
    Matrix(CMat),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRequest {
    pub channel: ChannelSource,
    pub n_streams: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub arch: Architecture,
    pub y0: f64,
    pub snr_db: f64,
    /// Candidate transmitter susceptance to check instead of the designed one.
    pub susceptance_tx: Option<RMat>,
    pub susceptance_rx: Option<RMat>,
}

pub struct VerifyOutcome {
    pub designed: Designed,
    pub rate: f64,
    pub capacity: f64,
}

impl VerifyOutcome {
    pub fn passes(&self, tol: f64, rate_tol: f64) -> bool {
        self.designed.tx_report.passes(tol)
            && self.designed.rx_report.passes(tol)
            && (self.rate - self.capacity).abs() <= rate_tol * self.capacity
    }

    pub fn render(&self) -> String {
        let gap = self.capacity - self.rate;
        format!(
            "{{\n  \"tx\": {},\n  \"rx\": {},\n  \"rate\": {},\n  \"capacity\": {},\n  \"gap\": {:e}\n}}\n",
            indent(&self.designed.tx_report.to_json()),
            indent(&self.designed.rx_report.to_json()),
            self.rate,
            self.capacity,
            gap
        )
    }
}

fn indent(json: &str) -> String {
    json.replace('\n', "\n  ")
}

/// Designs both networks for one channel and reports residuals and the
/// rate-versus-capacity gap. Supplied candidate susceptances replace the
/// designed ones and are checked against the same realized targets.
pub fn verify_only(req: &VerifyRequest) -> Result<VerifyOutcome> {
    let (h, seed) = match &req.channel {
        ChannelSource::Seed(s) => (chancap::rayleigh_channel(req.n_rx, req.n_tx, *s)?, *s),
        ChannelSource::Matrix(h) => {
            if h.shape() != (req.n_rx, req.n_tx) {
                return Err(MilacError::Dimension(format!(
                    "channel is {}x{}, dims say {}x{}",
                    h.nrows(),
                    h.ncols(),
                    req.n_rx,
                    req.n_tx
                )));
            }
            (h.clone(), 0)
        }
    };
    let channel = ChannelRealization::from_matrix(h, req.n_streams)?;
    let mut designed = design(&channel, req.arch, req.y0, seed)?;
    if req.susceptance_tx.is_some() || req.susceptance_rx.is_some() {
        let ns = req.n_streams;
        if let Some(b) = &req.susceptance_tx {
            let mask = stemopt::mask_for(Side::Tx, req.arch, ns, req.n_tx)?;
            designed.tx_report = stemopt::verify_tx_against(b, &designed.v_target, req.y0, &mask)?;
            designed.b_tx = b.clone();
            designed.tx_trace = None;
        }
        if let Some(b) = &req.susceptance_rx {
            let mask = stemopt::mask_for(Side::Rx, req.arch, ns, req.n_rx)?;
            designed.rx_report = stemopt::verify_rx_against(b, &designed.u_target, req.y0, &mask)?;
            designed.b_rx = b.clone();
            designed.rx_trace = None;
        }
        let (f, g) = beamformers(&designed.b_tx, &designed.b_rx, ns, req.n_tx, req.n_rx, req.y0)?;
        designed.f = f;
        designed.g = g;
    }
    let budget = LinkBudget::from_snr_db(req.snr_db)?;
    let lambdas = channel.svd.lambdas();
    let p = chancap::water_filling(&lambdas, budget)?;
    let capacity = chancap::capacity(&lambdas, &p, budget)?;
    let rate = chancap::achievable_rate(&designed.g, &channel.h, &designed.f, &p, budget)?;
    Ok(VerifyOutcome {
        designed,
        rate,
        capacity,
    })
}

/// Writes every traced block as `<prefix>_<name>.csv` into `dir`.
pub fn dump_blocks(dir: &Path, prefix: &str, trace: &BlockTrace) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, (name, m)) in trace.steps.iter().enumerate() {
        let path = dir.join(format!("{prefix}_{i:02}_{name}.csv"));
        std::fs::write(path, matio::real_to_csv(m))?;
    }
    Ok(())
}

/// Designs trial 0 of every grid point again and dumps its stem blocks.
pub fn dump_campaign_blocks(cfg: &CampaignConfig, dir: &Path) -> Result<()> {
    for (gi, (ns, n)) in cfg.grid().into_iter().enumerate() {
        let seed = derive_seed(&[cfg.seed, gi as u64, 0]);
        let channel = ChannelRealization::rayleigh(n, n, ns, seed)?;
        let d = design(&channel, Architecture::Stem, cfg.y0, seed)?;
        let prefix = format!("ns{ns}_n{n}_trial0");
        if let Some(t) = &d.tx_trace {
            dump_blocks(dir, &format!("{prefix}_tx"), t)?;
        }
        if let Some(t) = &d.rx_trace {
            dump_blocks(dir, &format!("{prefix}_rx"), t)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> CampaignConfig {
        CampaignConfig::from_toml(
            r#"
            n_streams = [1, 2]
            n_antennas = [4]
            snr_db = [0.0, 10.0]
            trials = 3
            seed = 42
            "#,
        )
        .unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = small_config();
        assert_eq!(cfg.architectures, vec![Architecture::Stem, Architecture::Fully]);
        assert_eq!(cfg.y0, DEFAULT_Y0);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.grid(), vec![(1, 4), (2, 4)]);
        let err = CampaignConfig::from_toml("n_streams=[5]\nn_antennas=[4]\nsnr_db=[0.0]\nseed=1\n");
        assert!(matches!(err, Err(MilacError::Config(_))));
        let err = CampaignConfig::from_toml("n_streams=[1]\nn_antennas=[4]\nsnr_db=[0.0]\nseed=1\nbogus=2\n");
        assert!(matches!(err, Err(MilacError::Config(_))));
        let err = CampaignConfig::from_toml(
            "n_streams=[1]\nn_antennas=[4]\nsnr_db=[0.0]\nseed=1\narchitectures=[\"tree\"]\n",
        );
        assert!(matches!(err, Err(MilacError::Config(_))));
    }

    #[test]
    fn small_campaign_achieves_capacity() {
        let cfg = small_config();
        let report = run_campaign_with(&cfg, 2).unwrap();
        assert!(report.passed(), "{:?}", report.failures);
        assert_eq!(report.records.len(), 6);
        assert_eq!(report.summaries.len(), 2 * 2 * 3);
        let csv = trials_csv(&cfg, &report.records);
        assert!(csv.starts_with("# milac-kit v1\ntrial,seed,"));
        assert_eq!(csv.lines().count(), 2 + 6 * 2);
    }

    #[test]
    fn campaign_is_independent_of_worker_count() {
        let cfg = small_config();
        let serial = run_campaign_with(&cfg, 1).unwrap();
        let parallel = run_campaign_with(&cfg, 4).unwrap();
        assert_eq!(trials_csv(&cfg, &serial.records), trials_csv(&cfg, &parallel.records));
        assert_eq!(summary_csv(&serial.summaries), summary_csv(&parallel.summaries));
    }

    #[test]
    fn complexity_rows_match_known_values() {
        let rows = complexity_table(&[1, 4], &[1, 100]).unwrap();
        assert_eq!(
            rows,
            vec![
                ComplexityRow { n_streams: 1, n_antennas: 1, stem: 3, fully: 3 },
                ComplexityRow { n_streams: 1, n_antennas: 100, stem: 201, fully: 5151 },
                ComplexityRow { n_streams: 4, n_antennas: 100, stem: 804, fully: 5460 },
            ]
        );
    }

    #[test]
    fn verify_only_reports_zero_susceptance_residual() {
        let req = VerifyRequest {
            channel: ChannelSource::Seed(3),
            n_streams: 2,
            n_tx: 4,
            n_rx: 4,
            arch: Architecture::Stem,
            y0: DEFAULT_Y0,
            snr_db: 10.0,
            susceptance_tx: Some(RMat::zeros(6, 6)),
            susceptance_rx: Some(RMat::zeros(6, 6)),
        };
        let out = verify_only(&req).unwrap();
        assert!((out.designed.tx_report.admittance_residual - DEFAULT_Y0 * 2.0).abs() < 1e-15);
        assert_eq!(out.rate, 0.0);
        assert!(!out.passes(1e-8, 1e-9));

        let req = VerifyRequest {
            susceptance_tx: None,
            susceptance_rx: None,
            ..req
        };
        let out = verify_only(&req).unwrap();
        assert!(out.passes(1e-8, 1e-9), "{}", out.render());
    }
}
