//! Free-space link budget and SNR-to-rate mapping.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Boltzmann constant, J/K.
const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("distance must be positive, got {0} km")]
    NonPositiveDistance(f64),
    #[error("carrier frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("bandwidth must be positive, got {0} Hz")]
    NonPositiveBandwidth(f64),
    #[error("unknown band `{0}` (expected S, L, Ku or Ka)")]
    UnknownBand(String),
    #[error("carrier {f_c_ghz} GHz outside the {band} band ({lo}-{hi} GHz)")]
    CarrierOutsideBand { band: BandName, f_c_ghz: f64, lo: f64, hi: f64 },
    #[error("rate table must be non-empty with increasing SNR and non-decreasing efficiency")]
    BadRateTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandName {
    L,
    S,
    Ku,
    Ka,
}

impl BandName {
    /// Carrier range in GHz.
    pub fn range_ghz(self) -> (f64, f64) {
        match self {
            BandName::L => (1.0, 2.0),
            BandName::S => (2.0, 4.0),
            BandName::Ku => (12.0, 14.0),
            BandName::Ka => (20.0, 30.0),
        }
    }

    /// Preset carrier used when a scenario does not pin one.
    pub fn default_carrier_ghz(self) -> f64 {
        match self {
            BandName::L => 1.5,
            BandName::S => 2.0,
            BandName::Ku => 12.0,
            BandName::Ka => 20.0,
        }
    }

    pub fn default_numerology(self) -> u8 {
        match self {
            BandName::L | BandName::S => 0,
            BandName::Ku => 2,
            BandName::Ka => 3,
        }
    }
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BandName::L => "L",
            BandName::S => "S",
            BandName::Ku => "Ku",
            BandName::Ka => "Ka",
        })
    }
}

impl FromStr for BandName {
    type Err = ChannelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l" => Ok(BandName::L),
            "s" => Ok(BandName::S),
            "ku" => Ok(BandName::Ku),
            "ka" => Ok(BandName::Ka),
            _ => Err(ChannelError::UnknownBand(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub name: BandName,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub numerology_default: u8,
}

impl Band {
    pub fn new(name: BandName, carrier_hz: f64, bandwidth_hz: f64) -> Result<Self, ChannelError> {
        if !(bandwidth_hz > 0.0) {
            return Err(ChannelError::NonPositiveBandwidth(bandwidth_hz));
        }
        let (lo, hi) = name.range_ghz();
        let f_c_ghz = carrier_hz / 1e9;
        if !(lo..=hi).contains(&f_c_ghz) {
            return Err(ChannelError::CarrierOutsideBand { band: name, f_c_ghz, lo, hi });
        }
        Ok(Self { name, carrier_hz, bandwidth_hz, numerology_default: name.default_numerology() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudgetConfig {
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub atmospheric_margin_db: f64,
    pub noise_figure_db: f64,
    pub temperature_k: f64,
}

impl Default for LinkBudgetConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 23.0,
            tx_gain_dbi: 0.0,
            rx_gain_dbi: 0.0,
            atmospheric_margin_db: 0.0,
            noise_figure_db: 5.0,
            temperature_k: 290.0,
        }
    }
}

/// Free-space path loss in dB (distance in km, carrier in Hz).
pub fn fspl(distance_km: f64, carrier_hz: f64) -> Result<f64, ChannelError> {
    if !(distance_km > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance_km));
    }
    if !(carrier_hz > 0.0) {
        return Err(ChannelError::NonPositiveFrequency(carrier_hz));
    }
    Ok(92.45 + 20.0 * distance_km.log10() + 20.0 * (carrier_hz / 1e9).log10())
}

/// Distance at which free-space loss equals `loss_db`.
pub fn fspl_distance_km(loss_db: f64, carrier_hz: f64) -> Result<f64, ChannelError> {
    if !(carrier_hz > 0.0) {
        return Err(ChannelError::NonPositiveFrequency(carrier_hz));
    }
    Ok(10f64.powf((loss_db - 92.45 - 20.0 * (carrier_hz / 1e9).log10()) / 20.0))
}

/// Thermal noise power over `bandwidth_hz`, including the receiver noise
/// figure, dBm.
pub fn noise_power_dbm(cfg: &LinkBudgetConfig, bandwidth_hz: f64) -> f64 {
    10.0 * (BOLTZMANN * cfg.temperature_k * bandwidth_hz).log10() + 30.0 + cfg.noise_figure_db
}

pub fn snr(
    cfg: &LinkBudgetConfig,
    distance_km: f64,
    carrier_hz: f64,
    bandwidth_hz: f64,
) -> Result<f64, ChannelError> {
    if !(bandwidth_hz > 0.0) {
        return Err(ChannelError::NonPositiveBandwidth(bandwidth_hz));
    }
    Ok(cfg.tx_power_dbm + cfg.tx_gain_dbi + cfg.rx_gain_dbi
        - fspl(distance_km, carrier_hz)?
        - cfg.atmospheric_margin_db
        - noise_power_dbm(cfg, bandwidth_hz))
}

/// Step table mapping SNR thresholds (dB) to spectral efficiency (b/s/Hz).
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    entries: Vec<(f64, f64)>,
}

impl RateTable {
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self, ChannelError> {
        let ok = !entries.is_empty()
            && entries.iter().all(|(s, e)| s.is_finite() && e.is_finite() && *e >= 0.0)
            && entries.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1);
        if ok {
            Ok(Self { entries })
        } else {
            Err(ChannelError::BadRateTable)
        }
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    /// Efficiency of the highest entry whose threshold is met; zero below the
    /// first entry.
    pub fn efficiency(&self, snr_db: f64) -> f64 {
        self.entries
            .iter()
            .take_while(|(threshold, _)| snr_db >= *threshold)
            .last()
            .map_or(0.0, |(_, eff)| *eff)
    }
}

impl Default for RateTable {
    /// 15 CQI-style steps from 0.15 to 7.4 b/s/Hz.
    fn default() -> Self {
        Self {
            entries: vec![
                (-6.7, 0.1523),
                (-4.7, 0.3770),
                (-2.3, 0.8770),
                (0.2, 1.4766),
                (2.4, 1.9141),
                (4.3, 2.4063),
                (5.9, 2.7305),
                (8.1, 3.3223),
                (10.3, 3.9023),
                (11.7, 4.5234),
                (14.1, 5.1152),
                (16.3, 5.5547),
                (18.7, 6.2266),
                (21.0, 6.9141),
                (22.7, 7.4063),
            ],
        }
    }
}

pub fn shannon_capacity(snr_db: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + 10f64.powf(snr_db / 10.0)).log2()
}

/// Achievable bit rate: the table's spectral efficiency, never above Shannon.
pub fn snr_to_rate(table: &RateTable, snr_db: f64, bandwidth_hz: f64) -> f64 {
    if snr_db == f64::NEG_INFINITY || snr_db.is_nan() {
        return 0.0;
    }
    let tabled = table.efficiency(snr_db) * bandwidth_hz;
    tabled.min(shannon_capacity(snr_db, bandwidth_hz))
}
