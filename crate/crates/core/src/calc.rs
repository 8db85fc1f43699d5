//! One-shot link calculations exposed by the `calc` subcommands.

use crate::config::{PayloadMode, ScenarioConfig};
use crate::geometry::{self, GeometryError, GroundPosition, Orbit};
use crate::harq::{predict_saturation, Saturation};
use crate::phy::{gp_slots_required, Numerology};
use crate::sim::engine::{rtt_for, CellGeometry};

/// Doppler seen by a UE on the ground track of a polar orbit, with the
/// satellite approaching at `elevation_deg`. At 0 deg this is the pass maximum.
pub fn pass_doppler_hz(altitude_km: f64, carrier_hz: f64, elevation_deg: f64) -> Result<f64, GeometryError> {
    let orbit = Orbit::new(altitude_km, 90.0, 0.0, 0.0)?;
    let sat = geometry::propagate(&orbit, 0.0);
    let under = GroundPosition::sub_point(&sat.position_ecef_km);
    let angle = geometry::central_angle_for_elevation(altitude_km, elevation_deg)?;
    let ue = under.destination(angle * (1.0 - 1e-12), 0.0);
    geometry::doppler_shift(&sat, &ue, carrier_hz)
}

/// Gateway/UE layout used by the dimensioning calculators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RttQuery {
    pub altitude_km: f64,
    pub payload: PayloadMode,
    pub ue_elevation_deg: f64,
    pub gateway_elevation_deg: f64,
}

impl RttQuery {
    pub fn new(altitude_km: f64, payload: PayloadMode) -> Self {
        Self { altitude_km, payload, ue_elevation_deg: 10.0, gateway_elevation_deg: 10.0 }
    }

    /// Round trip between the UE and the gNB. UE and gateway sit on opposite
    /// sides of the sub-satellite point.
    pub fn rtt_s(&self) -> Result<f64, GeometryError> {
        let mut cfg = ScenarioConfig::default();
        cfg.satellite.altitude_km = self.altitude_km;
        cfg.satellite.payload = self.payload;
        cfg.satellite.gateway_elevation_deg = self.gateway_elevation_deg;
        let cell = CellGeometry::new(&cfg)?;
        let angle = geometry::central_angle_for_elevation(self.altitude_km, self.ue_elevation_deg)?;
        let ue = cell.center.destination(angle * (1.0 - 1e-12), 180.0);
        rtt_for(&cfg, &ue, 0.0)
    }
}

pub fn gp_slots(q: &RttQuery, numerology: Numerology) -> Result<u64, GeometryError> {
    Ok(gp_slots_required(q.rtt_s()?, numerology))
}

pub fn harq_saturation(q: &RttQuery, numerology: Numerology, processing_slots: u32) -> Result<Saturation, GeometryError> {
    let processing = f64::from(processing_slots) * numerology.slot_duration_s();
    Ok(predict_saturation(q.rtt_s()?, processing, numerology))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geo_transparent_rtt_and_harq() {
        let q = RttQuery::new(35_786.0, PayloadMode::Transparent);
        let rtt = q.rtt_s().unwrap();
        assert!((0.535..0.545).contains(&rtt), "{rtt}");
        let n = harq_saturation(&q, Numerology::new(0).unwrap(), 4).unwrap().n_star;
        assert!((541..=600).contains(&n), "{n}");
    }

    #[test]
    fn regenerative_zenith_rtt() {
        let q = RttQuery { ue_elevation_deg: 90.0, ..RttQuery::new(600.0, PayloadMode::Regenerative) };
        assert!((q.rtt_s().unwrap() - 4.0028e-3).abs() < 1e-6);
    }

    #[test]
    fn doppler_peaks_at_the_horizon() {
        let low = pass_doppler_hz(600.0, 2e9, 0.0).unwrap();
        let high = pass_doppler_hz(600.0, 2e9, 60.0).unwrap();
        assert!(low > high && high > 0.0, "{low} {high}");
        assert!((low / 48e3 - 1.0).abs() < 0.1, "{low}");
    }
}
