//! Figure-reproduction presets and their sweeps.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::config::{parse_config, ScenarioConfig};
use crate::phy::Direction;
use crate::sim::{metrics::to_csv_string, MetricsReport};
use crate::sweep::{run_sweep, SweepError, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

pub const ALL_FIGURES: [FigureId; 4] = [FigureId::Fig2, FigureId::Fig3, FigureId::Fig4, FigureId::Fig5];

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
        })
    }
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ALL_FIGURES
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| format!("unknown figure `{s}`; valid ids: fig2, fig3, fig4, fig5"))
    }
}

impl FigureId {
    pub fn preset_text(self) -> &'static str {
        match self {
            FigureId::Fig2 => include_str!("../presets/fig2.conf"),
            FigureId::Fig3 => include_str!("../presets/fig3.conf"),
            FigureId::Fig4 => include_str!("../presets/fig4.conf"),
            FigureId::Fig5 => include_str!("../presets/fig5.conf"),
        }
    }

    pub fn base_config(self) -> ScenarioConfig {
        parse_config(self.preset_text()).expect("bundled presets are valid")
    }

    pub fn sweep(self) -> SweepSpec {
        let spec = SweepSpec::new(self.base_config());
        match self {
            FigureId::Fig2 => spec
                .vary("ues.placement", ["cell_center", "uniform"])
                .vary("satellite.altitude_km", ["600", "1200", "35786"]),
            FigureId::Fig3 => spec
                .vary("duplex.m_dl", ["1", "8", "80"])
                .vary("duplex.n_gp", ["0", "1", "10", "31", "32", "112"]),
            FigureId::Fig4 => spec
                .vary("satellite.altitude_km", ["600", "1200", "35786"])
                .vary("harq.n", ["8", "16", "32", "64", "off"]),
            FigureId::Fig5 => spec
                .vary("satellite.altitude_km", ["600", "10000", "15000", "20000", "30000"])
                .vary("transport.kind", ["udp", "tcp"]),
        }
    }

    /// Whitespace-separated table with one line per sweep point, columns
    /// matching the figure's axes.
    pub fn data_file(self, reports: &[MetricsReport]) -> String {
        let mut s = String::new();
        let ms = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{:.4}", x * 1e3));
        let header = match self {
            FigureId::Fig2 => "# altitude_km placement cell_throughput_mbps",
            FigureId::Fig3 => "# m_dl n_gp dl_latency_ms ul_latency_ms",
            FigureId::Fig4 => "# altitude_km harq_n cell_throughput_mbps",
            FigureId::Fig5 => "# altitude_km kind throughput_mbps latency_ms",
        };
        s.push_str(header);
        s.push('\n');
        for r in reports {
            let p = &r.params;
            let main = r.flows.first();
            let line = match self {
                FigureId::Fig2 => format!(
                    "{} {} {:.3}",
                    p.altitude_km,
                    p.placement,
                    main.map_or(0.0, |f| f.cell_throughput_bps) / 1e6
                ),
                FigureId::Fig3 => {
                    let lat = |d: Direction| {
                        r.flows.iter().find(|f| f.direction == d).and_then(|f| f.latency).map(|l| l.mean_s)
                    };
                    format!(
                        "{} {} {} {}",
                        p.m_dl.unwrap_or(0),
                        p.n_gp.unwrap_or(0),
                        ms(lat(Direction::Dl)),
                        ms(lat(Direction::Ul))
                    )
                }
                FigureId::Fig4 => format!(
                    "{} {} {:.3}",
                    p.altitude_km,
                    p.harq_n.map_or("off".to_string(), |n| n.to_string()),
                    main.map_or(0.0, |f| f.cell_throughput_bps) / 1e6
                ),
                FigureId::Fig5 => format!(
                    "{} {} {:.3} {}",
                    p.altitude_km,
                    main.map_or("udp", |f| f.kind.as_str()),
                    main.map_or(0.0, |f| f.throughput_bps) / 1e6,
                    ms(main.and_then(|f| f.latency).map(|l| l.mean_s))
                ),
            };
            let _ = writeln!(s, "{line}");
        }
        s
    }
}

#[derive(Debug, Error)]
pub enum FigureError {
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub struct FigureOutput {
    pub reports: Vec<MetricsReport>,
    pub csv_path: PathBuf,
    pub data_path: PathBuf,
}

/// Runs a figure's sweep and writes `<id>.csv` and `<id>.dat` into `out_dir`.
pub fn reproduce_figure(id: FigureId, out_dir: &Path, jobs: usize) -> Result<FigureOutput, FigureError> {
    let reports = run_sweep(&id.sweep(), jobs)?;
    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> FigureError + '_ {
        move |source| FigureError::Io { path: path.to_path_buf(), source }
    }
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let csv_path = out_dir.join(format!("{id}.csv"));
    let data_path = out_dir.join(format!("{id}.dat"));
    std::fs::write(&csv_path, to_csv_string(&reports)).map_err(io(&csv_path))?;
    std::fs::write(&data_path, id.data_file(&reports)).map_err(io(&data_path))?;
    Ok(FigureOutput { reports, csv_path, data_path })
}
