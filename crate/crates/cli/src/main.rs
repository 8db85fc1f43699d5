use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ntnsim_core::calc::{self, RttQuery};
use ntnsim_core::config::{parse_config, PayloadMode, ScenarioConfig};
use ntnsim_core::geometry;
use ntnsim_core::phy::Numerology;
use ntnsim_core::sim::write_csv;
use ntnsim_core::{reproduce_figure, run, run_sweep, FigureId, SweepSpec};

/// Exit status for invalid configuration or usage.
const EXIT_CONFIG: u8 = 1;
/// Exit status for failures while simulating or writing output.
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "ntnsim", version, about = "5G NR non-terrestrial network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print per-flow metrics as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed and NTNSIM_SEED.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Cartesian product of one or more varied keys.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `section.key=v1,v2,...`; repeat for more axes.
        #[arg(long, required = true)]
        vary: Vec<String>,
        /// Worker threads (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce a figure: writes <id>.csv and <id>.dat.
    Figure {
        /// fig2, fig3, fig4 or fig5
        id: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Closed-form link calculators.
    #[command(subcommand)]
    Calc(Calc),
}

#[derive(Subcommand)]
enum Calc {
    /// One-way propagation delay over a distance.
    Delay {
        #[arg(long, value_name = "KM")]
        distance: f64,
    },
    /// Doppler shift on the ground track of a polar pass.
    Doppler {
        #[arg(long, value_name = "KM")]
        altitude: f64,
        #[arg(long, value_name = "GHZ")]
        f_c_ghz: f64,
        #[arg(long, default_value_t = 0.0, value_name = "DEG")]
        elevation: f64,
    },
    /// Circular orbit period.
    Period {
        #[arg(long, value_name = "KM")]
        altitude: f64,
    },
    /// Longest pass above a minimum elevation.
    Visibility {
        #[arg(long, value_name = "KM")]
        altitude: f64,
        #[arg(long, default_value_t = 10.0, value_name = "DEG")]
        min_elevation: f64,
    },
    /// Ground area covered by a nadir-pointing beam.
    Footprint {
        #[arg(long, value_name = "KM")]
        altitude: f64,
        #[arg(long, value_name = "DEG")]
        half_angle: f64,
    },
    /// Guard-period slots covering the worst-case round trip.
    Gp(LinkArgs),
    /// HARQ processes needed to keep one flow saturated.
    HarqN {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long, default_value_t = 4)]
        processing_slots: u32,
    },
}

#[derive(Args)]
struct LinkArgs {
    #[arg(long, value_name = "KM")]
    altitude: f64,
    #[arg(long, default_value = "transparent")]
    payload: String,
    #[arg(long, default_value_t = 0)]
    numerology: u8,
    /// UE elevation.
    #[arg(long, default_value_t = 10.0, value_name = "DEG")]
    elevation: f64,
    #[arg(long, default_value_t = 10.0, value_name = "DEG")]
    gateway_elevation: f64,
}

enum Failure {
    Config(String),
    Runtime(String),
}

type Outcome = Result<(), Failure>;

fn config_err(e: impl ToString) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_err(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("reading {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    if let Some(s) = env_seed()? {
        cfg.sim.seed = s;
    }
    if let Some(s) = seed {
        cfg.sim.seed = s;
    }
    Ok(cfg)
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("NTNSIM_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| config_err(format!("NTNSIM_SEED is not an unsigned integer: `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn emit_csv(reports: &[ntnsim_core::MetricsReport], out: Option<&Path>) -> Outcome {
    match out {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| runtime_err(format!("creating {}: {e}", p.display())))?;
            write_csv(io::BufWriter::new(f), reports).map_err(runtime_err)
        }
        None => write_csv(io::stdout().lock(), reports).map_err(runtime_err),
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Run { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let report = run(&cfg).map_err(runtime_err)?;
            emit_csv(&[report], out.as_deref())
        }
        Command::Sweep { config, vary, jobs, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let mut spec = SweepSpec::new(cfg);
            for v in &vary {
                spec = spec.vary_arg(v).map_err(config_err)?;
            }
            spec.expand().map_err(config_err)?;
            let reports = run_sweep(&spec, jobs).map_err(runtime_err)?;
            emit_csv(&reports, out.as_deref())
        }
        Command::Figure { id, out, jobs } => {
            let id: FigureId = id.parse().map_err(config_err)?;
            if env_seed()?.is_some() {
                eprintln!("note: NTNSIM_SEED does not apply to figure presets");
            }
            let res = reproduce_figure(id, &out, jobs).map_err(runtime_err)?;
            println!("{}", res.csv_path.display());
            println!("{}", res.data_path.display());
            Ok(())
        }
        Command::Calc(c) => calc_cmd(c),
    }
}

fn link_query(a: &LinkArgs) -> Result<(RttQuery, Numerology), Failure> {
    let payload: PayloadMode = a.payload.parse().map_err(|e| config_err(format!("--payload: {e}")))?;
    let numerology = Numerology::new(a.numerology).map_err(config_err)?;
    let q = RttQuery {
        ue_elevation_deg: a.elevation,
        gateway_elevation_deg: a.gateway_elevation,
        ..RttQuery::new(a.altitude, payload)
    };
    Ok((q, numerology))
}

fn calc_cmd(c: Calc) -> Outcome {
    let mut out = io::stdout().lock();
    let line = match c {
        Calc::Delay { distance } => {
            if distance < 0.0 {
                return Err(config_err("--distance must be >= 0"));
            }
            format!("{} s", geometry::propagation_delay(distance))
        }
        Calc::Doppler { altitude, f_c_ghz, elevation } => {
            let hz = calc::pass_doppler_hz(altitude, f_c_ghz * 1e9, elevation).map_err(config_err)?;
            format!("{hz:.1} Hz")
        }
        Calc::Period { altitude } => {
            let s = geometry::orbital_period(altitude).map_err(config_err)?;
            format!("{:.2} min", s / 60.0)
        }
        Calc::Visibility { altitude, min_elevation } => {
            let s = geometry::visibility_window(altitude, min_elevation).map_err(config_err)?;
            format!("{:.2} min", s / 60.0)
        }
        Calc::Footprint { altitude, half_angle } => {
            let a = geometry::footprint_area(altitude, half_angle).map_err(config_err)?;
            format!("{a:.1} km^2")
        }
        Calc::Gp(a) => {
            let (q, mu) = link_query(&a)?;
            let rtt = q.rtt_s().map_err(config_err)?;
            let slots = calc::gp_slots(&q, mu).map_err(config_err)?;
            format!("{slots} slots (rtt {:.3} ms, slot {} ms)", rtt * 1e3, mu.slot_duration_s() * 1e3)
        }
        Calc::HarqN { link, processing_slots } => {
            let (q, mu) = link_query(&link)?;
            let rtt = q.rtt_s().map_err(config_err)?;
            let sat = calc::harq_saturation(&q, mu, processing_slots).map_err(config_err)?;
            format!(
                "{} processes (rtt {:.3} ms + processing {} slots, slot {} ms)",
                sat.n_star,
                rtt * 1e3,
                processing_slots,
                mu.slot_duration_s() * 1e3
            )
        }
    };
    writeln!(out, "{line}").map_err(runtime_err)
}
