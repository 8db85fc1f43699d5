//! Scenario configuration: a line-based `section.key = value` format.
//!
//! ```text
//! # comment
//! satellite.altitude_km = 600
//! band.name = Ka
//! [rate_table]
//! -6.7 = 0.15
//! 22.7 = 7.4
//! ```
//!
//! Inside a `[rate_table]` block every line whose left-hand side is a number
//! is an `snr_db = efficiency` pair; any other line is parsed as a normal key.
//! Unknown keys are hard errors. Every issue found is reported, each with its
//! line number.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::channel::{BandName, LinkBudgetConfig, RateTable};
use crate::geometry;
use crate::harq::UNLIMITED_RETX;
use crate::phy::Direction;
use crate::transport::{FlowKind, TcpConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid scenario configuration ({} issue(s)):", self.issues.len())?;
        for i in &self.issues {
            writeln!(f, "  {i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadMode {
    Transparent,
    Regenerative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DuplexMode {
    Tdd,
    Fdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    CellCenter,
    Uniform,
}

macro_rules! keyword_enum {
    ($ty:ty { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($variant),)+
                    _ => Err(format!("expected one of: {}", [$($name),+].join(", "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }
    };
}

keyword_enum!(PayloadMode { "transparent" => PayloadMode::Transparent, "regenerative" => PayloadMode::Regenerative });
keyword_enum!(DuplexMode { "tdd" => DuplexMode::Tdd, "fdd" => DuplexMode::Fdd });
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arrivals {
    Periodic,
    Poisson,
}

keyword_enum!(Arrivals { "periodic" => Arrivals::Periodic, "poisson" => Arrivals::Poisson });
keyword_enum!(Placement { "cell_center" => Placement::CellCenter, "uniform" => Placement::Uniform });

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteSection {
    pub altitude_km: f64,
    pub payload: PayloadMode,
    pub gateway_elevation_deg: f64,
    pub inclination_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSection {
    pub name: BandName,
    pub f_c_ghz: f64,
    pub bandwidth_mhz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhySection {
    pub numerology: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuplexSection {
    pub mode: DuplexMode,
    pub m_dl: u32,
    pub n_gp: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaSection {
    pub gnss: bool,
    pub tolerance_slots: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarqSection {
    pub enabled: bool,
    pub n: u32,
    pub max_retx: u32,
    pub processing_slots: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSection {
    pub bler: f64,
    pub margin_db: f64,
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
    pub rate_table: RateTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSection {
    pub kind: FlowKind,
    pub direction: Direction,
    /// Per-UE source rate; 0 disables the main flow.
    pub rate_mbps: f64,
    pub packet_bytes: u32,
    /// Companion constant-rate flow in the opposite direction; 0 disables it.
    pub feedback_kbps: f64,
    pub feedback_bytes: u32,
    /// Packet spacing of every application source, at the same mean rate.
    pub arrivals: Arrivals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcpSection {
    pub rto_ms: f64,
    pub rto_adaptive: bool,
    pub cubic_c: f64,
    pub cubic_beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeSection {
    pub count: u32,
    pub placement: Placement,
    pub half_beamwidth_deg: f64,
    pub center_radius_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSection {
    pub id: String,
    pub duration_s: f64,
    pub seed: u64,
    /// Fixed one-way processing delay added to every delivery.
    pub stack_delay_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub satellite: SatelliteSection,
    pub band: BandSection,
    pub phy: PhySection,
    pub duplex: DuplexSection,
    pub ta: TaSection,
    pub harq: HarqSection,
    pub channel: ChannelSection,
    pub transport: TransportSection,
    pub tcp: TcpSection,
    pub ues: UeSection,
    pub sim: SimSection,
}

pub const REQUIRED_SECTIONS: [&str; 4] = ["satellite", "band", "transport", "sim"];

impl Default for ScenarioConfig {
    fn default() -> Self {
        let band = BandName::S;
        Self {
            satellite: SatelliteSection {
                altitude_km: 600.0,
                payload: PayloadMode::Transparent,
                gateway_elevation_deg: 10.0,
                inclination_deg: 0.0,
            },
            band: BandSection { name: band, f_c_ghz: band.default_carrier_ghz(), bandwidth_mhz: 20.0 },
            phy: PhySection { numerology: band.default_numerology() },
            duplex: DuplexSection { mode: DuplexMode::Fdd, m_dl: 8, n_gp: 0 },
            ta: TaSection { gnss: true, tolerance_slots: 1.0 },
            harq: HarqSection { enabled: true, n: 16, max_retx: 3, processing_slots: 4 },
            channel: {
                let lb = LinkBudgetConfig::default();
                ChannelSection {
                    bler: 0.0,
                    margin_db: lb.atmospheric_margin_db,
                    tx_power_dbm: lb.tx_power_dbm,
                    tx_gain_dbi: lb.tx_gain_dbi,
                    rx_gain_dbi: lb.rx_gain_dbi,
                    noise_figure_db: lb.noise_figure_db,
                    temperature_k: lb.temperature_k,
                    rate_table: RateTable::default(),
                }
            },
            transport: TransportSection {
                kind: FlowKind::Udp,
                direction: Direction::Dl,
                rate_mbps: 10.0,
                packet_bytes: 1500,
                feedback_kbps: 0.0,
                feedback_bytes: 100,
                arrivals: Arrivals::Periodic,
            },
            tcp: {
                let t = TcpConfig::default();
                TcpSection {
                    rto_ms: t.rto_s * 1e3,
                    rto_adaptive: t.rto_adaptive,
                    cubic_c: t.cubic_c,
                    cubic_beta: t.cubic_beta,
                }
            },
            ues: UeSection {
                count: 1,
                placement: Placement::CellCenter,
                half_beamwidth_deg: 5.0,
                center_radius_fraction: 0.01,
            },
            sim: SimSection { id: "scenario".into(), duration_s: 10.0, seed: 1, stack_delay_ms: 0.0 },
        }
    }
}

impl ScenarioConfig {
    pub fn link_budget(&self) -> LinkBudgetConfig {
        LinkBudgetConfig {
            tx_power_dbm: self.channel.tx_power_dbm,
            tx_gain_dbi: self.channel.tx_gain_dbi,
            rx_gain_dbi: self.channel.rx_gain_dbi,
            atmospheric_margin_db: self.channel.margin_db,
            noise_figure_db: self.channel.noise_figure_db,
            temperature_k: self.channel.temperature_k,
        }
    }

    pub fn tcp_config(&self) -> TcpConfig {
        TcpConfig {
            rto_s: self.tcp.rto_ms * 1e-3,
            rto_adaptive: self.tcp.rto_adaptive,
            cubic_c: self.tcp.cubic_c,
            cubic_beta: self.tcp.cubic_beta,
            ..TcpConfig::default()
        }
    }

    /// Sets one `section.key` from its textual value, with range checks.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "satellite.altitude_km" => self.satellite.altitude_km = positive(v)?,
            "satellite.payload" => self.satellite.payload = v.parse()?,
            "satellite.gateway_elevation_deg" => {
                self.satellite.gateway_elevation_deg = in_range(v, 0.0, 90.0)?
            }
            "satellite.inclination_deg" => self.satellite.inclination_deg = in_range(v, 0.0, 180.0)?,
            "band.name" => {
                self.band.name = v.parse::<BandName>().map_err(|e| e.to_string())?;
            }
            "band.f_c_ghz" => self.band.f_c_ghz = positive(v)?,
            "band.bandwidth_mhz" => self.band.bandwidth_mhz = positive(v)?,
            "phy.numerology" => self.phy.numerology = int_in_range(v, 0, 4)? as u8,
            "duplex.mode" => self.duplex.mode = v.parse()?,
            "duplex.m_dl" => self.duplex.m_dl = int_in_range(v, 1, 100_000)? as u32,
            "duplex.n_gp" => self.duplex.n_gp = int_in_range(v, 0, 100_000)? as u32,
            "ta.gnss" => self.ta.gnss = on_off(v)?,
            "ta.tolerance_slots" => self.ta.tolerance_slots = positive(v)?,
            "harq.enabled" => self.harq.enabled = on_off(v)?,
            "harq.n" if v.eq_ignore_ascii_case("off") => self.harq.enabled = false,
            "harq.n" => {
                self.harq.n = int_in_range(v, 1, 100_000)? as u32;
                self.harq.enabled = true;
            }
            "harq.max_retx" => {
                self.harq.max_retx = if matches!(v, "inf" | "unlimited") {
                    UNLIMITED_RETX
                } else {
                    int_in_range(v, 0, i64::from(u32::MAX) - 1)? as u32
                }
            }
            "harq.processing_slots" => self.harq.processing_slots = int_in_range(v, 0, 100_000)? as u32,
            "channel.bler" => {
                let b = number(v)?;
                if !(0.0..1.0).contains(&b) {
                    return Err(format!("must be in [0, 1), got {b}"));
                }
                self.channel.bler = b;
            }
            "channel.margin_db" => self.channel.margin_db = in_range(v, 0.0, f64::MAX)?,
            "channel.tx_power_dbm" => self.channel.tx_power_dbm = number(v)?,
            "channel.tx_gain_dbi" => self.channel.tx_gain_dbi = number(v)?,
            "channel.rx_gain_dbi" => self.channel.rx_gain_dbi = number(v)?,
            "channel.noise_figure_db" => self.channel.noise_figure_db = number(v)?,
            "channel.temperature_k" => self.channel.temperature_k = positive(v)?,
            "transport.kind" => {
                self.transport.kind = match v.to_ascii_lowercase().as_str() {
                    "udp" => FlowKind::Udp,
                    "tcp" => FlowKind::Tcp,
                    _ => return Err("expected one of: udp, tcp".into()),
                }
            }
            "transport.direction" => {
                self.transport.direction = match v.to_ascii_lowercase().as_str() {
                    "dl" => Direction::Dl,
                    "ul" => Direction::Ul,
                    _ => return Err("expected one of: dl, ul".into()),
                }
            }
            "transport.rate_mbps" => self.transport.rate_mbps = in_range(v, 0.0, f64::MAX)?,
            "transport.packet_bytes" => self.transport.packet_bytes = int_in_range(v, 1, 1 << 24)? as u32,
            "transport.feedback_kbps" => self.transport.feedback_kbps = in_range(v, 0.0, f64::MAX)?,
            "transport.feedback_bytes" => self.transport.feedback_bytes = int_in_range(v, 1, 1 << 24)? as u32,
            "transport.arrivals" => self.transport.arrivals = v.parse()?,
            "tcp.rto_ms" => self.tcp.rto_ms = positive(v)?,
            "tcp.rto_adaptive" => self.tcp.rto_adaptive = on_off(v)?,
            "tcp.cubic_c" => self.tcp.cubic_c = positive(v)?,
            "tcp.cubic_beta" => {
                let b = number(v)?;
                if !(b > 0.0 && b < 1.0) {
                    return Err(format!("must be in (0, 1), got {b}"));
                }
                self.tcp.cubic_beta = b;
            }
            "ues.count" => self.ues.count = int_in_range(v, 1, 10_000)? as u32,
            "ues.placement" => self.ues.placement = v.parse()?,
            "ues.half_beamwidth_deg" => self.ues.half_beamwidth_deg = in_range(v, f64::MIN_POSITIVE, 90.0)?,
            "ues.center_radius_fraction" => {
                self.ues.center_radius_fraction = in_range(v, f64::MIN_POSITIVE, 1.0)?
            }
            "sim.id" => {
                if v.is_empty() || v.contains(|c: char| c.is_whitespace() || c == ',') {
                    return Err("must be a non-empty token without spaces or commas".into());
                }
                self.sim.id = v.to_string();
            }
            "sim.duration_s" => self.sim.duration_s = positive(v)?,
            "sim.seed" => self.sim.seed = v.parse::<u64>().map_err(|_| format!("not an unsigned integer: `{v}`"))?,
            "sim.stack_delay_ms" => self.sim.stack_delay_ms = in_range(v, 0.0, f64::MAX)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Checks that span several keys.
    pub fn cross_check(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let (lo, hi) = self.band.name.range_ghz();
        if !(lo..=hi).contains(&self.band.f_c_ghz) {
            out.push((
                "band.f_c_ghz".to_string(),
                format!("{} GHz outside the {} band ({lo}-{hi} GHz)", self.band.f_c_ghz, self.band.name),
            ));
        }
        let limb = geometry::earth_limb_angle_deg(self.satellite.altitude_km);
        if self.ues.half_beamwidth_deg > limb {
            out.push((
                "ues.half_beamwidth_deg".to_string(),
                format!(
                    "{} deg overshoots the Earth limb ({limb:.3} deg) at {} km",
                    self.ues.half_beamwidth_deg, self.satellite.altitude_km
                ),
            ));
        }
        out
    }

    /// Canonical text form; `parse_config(&c.to_text()) == Ok(c)`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let onoff = |b: bool| if b { "on" } else { "off" }.to_string();
        kv("satellite.altitude_km", self.satellite.altitude_km.to_string());
        kv("satellite.payload", self.satellite.payload.to_string());
        kv("satellite.gateway_elevation_deg", self.satellite.gateway_elevation_deg.to_string());
        kv("satellite.inclination_deg", self.satellite.inclination_deg.to_string());
        kv("band.name", self.band.name.to_string());
        kv("band.f_c_ghz", self.band.f_c_ghz.to_string());
        kv("band.bandwidth_mhz", self.band.bandwidth_mhz.to_string());
        kv("phy.numerology", self.phy.numerology.to_string());
        kv("duplex.mode", self.duplex.mode.to_string());
        kv("duplex.m_dl", self.duplex.m_dl.to_string());
        kv("duplex.n_gp", self.duplex.n_gp.to_string());
        kv("ta.gnss", onoff(self.ta.gnss));
        kv("ta.tolerance_slots", self.ta.tolerance_slots.to_string());
        kv("harq.n", self.harq.n.to_string());
        kv("harq.enabled", onoff(self.harq.enabled));
        kv(
            "harq.max_retx",
            if self.harq.max_retx == UNLIMITED_RETX { "inf".into() } else { self.harq.max_retx.to_string() },
        );
        kv("harq.processing_slots", self.harq.processing_slots.to_string());
        kv("channel.bler", self.channel.bler.to_string());
        kv("channel.margin_db", self.channel.margin_db.to_string());
        kv("channel.tx_power_dbm", self.channel.tx_power_dbm.to_string());
        kv("channel.tx_gain_dbi", self.channel.tx_gain_dbi.to_string());
        kv("channel.rx_gain_dbi", self.channel.rx_gain_dbi.to_string());
        kv("channel.noise_figure_db", self.channel.noise_figure_db.to_string());
        kv("channel.temperature_k", self.channel.temperature_k.to_string());
        kv("transport.kind", self.transport.kind.as_str().to_string());
        kv("transport.direction", self.transport.direction.as_str().to_string());
        kv("transport.rate_mbps", self.transport.rate_mbps.to_string());
        kv("transport.packet_bytes", self.transport.packet_bytes.to_string());
        kv("transport.feedback_kbps", self.transport.feedback_kbps.to_string());
        kv("transport.feedback_bytes", self.transport.feedback_bytes.to_string());
        kv("transport.arrivals", self.transport.arrivals.to_string());
        kv("tcp.rto_ms", self.tcp.rto_ms.to_string());
        kv("tcp.rto_adaptive", onoff(self.tcp.rto_adaptive));
        kv("tcp.cubic_c", self.tcp.cubic_c.to_string());
        kv("tcp.cubic_beta", self.tcp.cubic_beta.to_string());
        kv("ues.count", self.ues.count.to_string());
        kv("ues.placement", self.ues.placement.to_string());
        kv("ues.half_beamwidth_deg", self.ues.half_beamwidth_deg.to_string());
        kv("ues.center_radius_fraction", self.ues.center_radius_fraction.to_string());
        kv("sim.id", self.sim.id.clone());
        kv("sim.duration_s", self.sim.duration_s.to_string());
        kv("sim.seed", self.sim.seed.to_string());
        kv("sim.stack_delay_ms", self.sim.stack_delay_ms.to_string());
        s.push_str("[rate_table]\n");
        for (snr, eff) in self.channel.rate_table.entries() {
            let _ = writeln!(s, "{snr} = {eff}");
        }
        s
    }
}

fn number(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("not a finite number: `{v}`")),
    }
}

fn positive(v: &str) -> Result<f64, String> {
    let x = number(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be > 0, got {x}"))
    }
}

fn in_range(v: &str, lo: f64, hi: f64) -> Result<f64, String> {
    let x = number(v)?;
    if (lo..=hi).contains(&x) {
        Ok(x)
    } else {
        Err(format!("out of range [{lo}, {hi}]: {x}"))
    }
}

fn int_in_range(v: &str, lo: i64, hi: i64) -> Result<i64, String> {
    let x = v.parse::<i64>().map_err(|_| format!("not an integer: `{v}`"))?;
    if (lo..=hi).contains(&x) {
        Ok(x)
    } else {
        Err(format!("out of range [{lo}, {hi}]: {x}"))
    }
}

fn on_off(v: &str) -> Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("expected on or off, got `{v}`")),
    }
}

/// Parses and validates a scenario. Defaults fill every key not given.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    let mut issues = Vec::new();
    let mut lines_of: HashMap<String, usize> = HashMap::new();
    let mut sections_seen = std::collections::HashSet::new();
    let mut in_table = false;
    let mut table: Vec<(f64, f64)> = Vec::new();
    let mut table_line = None;
    let mut carrier_given = false;
    let mut numerology_given = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            let name = line[1..line.len() - 1].trim();
            in_table = name == "rate_table";
            if in_table {
                table_line = Some(line_no);
            } else {
                issues.push(ConfigIssue {
                    line: Some(line_no),
                    key: line.to_string(),
                    message: "unknown block (only [rate_table] is allowed)".into(),
                });
            }
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            issues.push(ConfigIssue {
                line: Some(line_no),
                key: line.to_string(),
                message: "expected `section.key = value`".into(),
            });
            continue;
        };
        let (key, value) = (lhs.trim(), rhs.trim());
        if in_table {
            if let Ok(snr) = key.parse::<f64>() {
                match number(value) {
                    Ok(eff) => table.push((snr, eff)),
                    Err(m) => issues.push(ConfigIssue {
                        line: Some(line_no),
                        key: format!("rate_table.{key}"),
                        message: m,
                    }),
                }
                continue;
            }
        }
        if let Some(prev) = lines_of.insert(key.to_string(), line_no) {
            issues.push(ConfigIssue {
                line: Some(line_no),
                key: key.to_string(),
                message: format!("duplicate key (first set on line {prev})"),
            });
            continue;
        }
        if let Some((section, _)) = key.split_once('.') {
            sections_seen.insert(section.to_string());
        }
        carrier_given |= key == "band.f_c_ghz";
        numerology_given |= key == "phy.numerology";
        if let Err(message) = cfg.set(key, value) {
            issues.push(ConfigIssue { line: Some(line_no), key: key.to_string(), message });
        }
    }

    if !carrier_given {
        cfg.band.f_c_ghz = cfg.band.name.default_carrier_ghz();
    }
    if !numerology_given {
        cfg.phy.numerology = cfg.band.name.default_numerology();
    }
    if table_line.is_some() {
        match RateTable::new(table) {
            Ok(t) => cfg.channel.rate_table = t,
            Err(e) => issues.push(ConfigIssue { line: table_line, key: "rate_table".into(), message: e.to_string() }),
        }
    }
    let missing: Vec<&str> =
        REQUIRED_SECTIONS.iter().copied().filter(|s| !sections_seen.contains(*s)).collect();
    if !missing.is_empty() {
        issues.push(ConfigIssue {
            line: None,
            key: "sections".into(),
            message: format!("missing required section(s): {}", missing.join(", ")),
        });
    }
    if issues.is_empty() {
        for (key, message) in cfg.cross_check() {
            issues.push(ConfigIssue { line: lines_of.get(&key).copied(), key, message });
        }
    }
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { issues })
    }
}
