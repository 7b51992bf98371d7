use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use milac_core::archgraph::{self, ArchitectureMask};
use milac_core::campaign::{self, CampaignConfig, ChannelSource, VerifyRequest};
use milac_core::matio;
use milac_core::netcore::DEFAULT_Y0;
use milac_core::stemopt::Architecture;
use milac_core::{MilacError, Result};

#[derive(Parser)]
#[command(name = "milac", version, about = "Stem-connected MiLAC design, verification and campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Stem,
    Fully,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Stem => Architecture::Stem,
            ArchArg::Fully => Architecture::Fully,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Tx,
    Rx,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo rate campaign from a TOML config.
    Campaign {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Dump the stem blocks of trial 0 of every grid point as CSV.
        #[arg(long)]
        dump_blocks: Option<PathBuf>,
    },
    /// Print the stem- and fully-connected complexity table as CSV.
    Complexity {
        #[arg(long, value_delimiter = ',', required = true)]
        streams: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        antennas: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Design and verify both networks for one channel realization.
    Verify {
        /// Seed of an i.i.d. Rayleigh channel.
        #[arg(long, conflicts_with = "channel", required_unless_present = "channel")]
        seed: Option<u64>,
        /// Channel matrix file (complex CSV, or `.bin`).
        #[arg(long)]
        channel: Option<PathBuf>,
        /// `N_S,N_T,N_R`
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long, value_enum, default_value = "stem")]
        arch: ArchArg,
        #[arg(long, default_value_t = DEFAULT_Y0)]
        y0: f64,
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1e-9)]
        rate_tol: f64,
        /// Check this transmitter susceptance CSV instead of the designed one.
        #[arg(long)]
        susceptance_tx: Option<PathBuf>,
        #[arg(long)]
        susceptance_rx: Option<PathBuf>,
        /// Write the checked susceptance matrices here as CSV.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        dump_blocks: Option<PathBuf>,
    },
    /// Export a stem-connected graph as an edge list and/or mask CSV.
    Graph {
        #[arg(long, value_enum)]
        side: SideArg,
        #[arg(long)]
        streams: usize,
        #[arg(long)]
        antennas: usize,
        #[arg(long)]
        edge_list: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
    },
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Campaign {
            config,
            output_dir,
            dump_blocks,
        } => {
            let mut cfg = CampaignConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(dir) = &dump_blocks {
                campaign::dump_campaign_blocks(&cfg, dir)?;
            }
            let report = campaign::run_campaign(&cfg)?;
            print!("{}", campaign::summary_csv(&report.summaries));
            for f in &report.failures {
                eprintln!("FAIL {f}");
            }
            eprintln!(
                "{} trials, {} failures, output in {}",
                report.records.len(),
                report.failures.len(),
                cfg.output_dir.display()
            );
            Ok(report.passed())
        }
        Command::Complexity {
            streams,
            antennas,
            out,
        } => {
            let rows = campaign::complexity_table(&streams, &antennas)?;
            write_or_print(out.as_ref(), &campaign::complexity_csv(&rows))?;
            Ok(true)
        }
        Command::Verify {
            seed,
            channel,
            dims,
            arch,
            y0,
            snr_db,
            tol,
            rate_tol,
            susceptance_tx,
            susceptance_rx,
            out_dir,
            dump_blocks,
        } => {
            if dims.len() != 3 {
                return Err(MilacError::Parse(format!(
                    "--dims takes N_S,N_T,N_R, got {} values",
                    dims.len()
                )));
            }
            let channel = match (seed, channel) {
                (Some(s), _) => ChannelSource::Seed(s),
                (None, Some(path)) => ChannelSource::Matrix(matio::read_complex_matrix(&path)?),
                (None, None) => unreachable!("clap requires --seed or --channel"),
            };
            let req = VerifyRequest {
                channel,
                n_streams: dims[0],
                n_tx: dims[1],
                n_rx: dims[2],
                arch: arch.into(),
                y0,
                snr_db,
                susceptance_tx: susceptance_tx.map(|p| matio::read_real_matrix(&p)).transpose()?,
                susceptance_rx: susceptance_rx.map(|p| matio::read_real_matrix(&p)).transpose()?,
            };
            let out = campaign::verify_only(&req)?;
            print!("{}", out.render());
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("susceptance_tx.csv"), matio::real_to_csv(&out.designed.b_tx))?;
                std::fs::write(dir.join("susceptance_rx.csv"), matio::real_to_csv(&out.designed.b_rx))?;
            }
            if let Some(dir) = dump_blocks {
                if let Some(t) = &out.designed.tx_trace {
                    campaign::dump_blocks(&dir, "tx", t)?;
                }
                if let Some(t) = &out.designed.rx_trace {
                    campaign::dump_blocks(&dir, "rx", t)?;
                }
            }
            Ok(out.passes(tol, rate_tol))
        }
        Command::Graph {
            side,
            streams,
            antennas,
            edge_list,
            mask,
        } => {
            let g = match side {
                SideArg::Tx => archgraph::tx_stem_graph(streams, antennas)?,
                SideArg::Rx => archgraph::rx_stem_graph(streams, antennas)?,
            };
            if edge_list.is_none() && mask.is_none() {
                print!("{}", g.to_edge_list());
            }
            if let Some(p) = edge_list {
                std::fs::write(p, g.to_edge_list())?;
            }
            if let Some(p) = mask {
                std::fs::write(p, ArchitectureMask::from_graph(&g).to_csv())?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
