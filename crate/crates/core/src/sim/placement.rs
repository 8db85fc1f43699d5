//! UE placement inside the beam footprint.

use rand::Rng;

use super::rng::rng_stream;
use crate::config::{Placement, ScenarioConfig};
use crate::geometry::{self, GroundPosition, GeometryError, Orbit};

pub fn orbit_for(cfg: &ScenarioConfig) -> Result<Orbit, GeometryError> {
    Orbit::new(cfg.satellite.altitude_km, cfg.satellite.inclination_deg, 0.0, 0.0)
}

/// The beam points at the sub-satellite point at t = 0 and stays fixed on
/// the ground.
pub fn beam_center(cfg: &ScenarioConfig) -> Result<GroundPosition, GeometryError> {
    let orbit = orbit_for(cfg)?;
    Ok(GroundPosition::sub_point(&geometry::propagate(&orbit, 0.0).position_ecef_km))
}

/// Cell radius as a central angle.
pub fn cell_radius_deg(cfg: &ScenarioConfig) -> Result<f64, GeometryError> {
    geometry::beam_edge_central_angle_deg(cfg.satellite.altitude_km, cfg.ues.half_beamwidth_deg)
}

/// Positions for `cfg.ues.count` UEs, drawn from the `placement` stream.
/// `uniform` is area-uniform over the spherical cap; `cell_center` is
/// area-uniform over a small cap of `center_radius_fraction` of the cell radius.
pub fn place_ues(cfg: &ScenarioConfig) -> Result<Vec<GroundPosition>, GeometryError> {
    assert!(cfg.ues.count >= 1, "at least one UE is required");
    let center = beam_center(cfg)?;
    let cell = cell_radius_deg(cfg)?;
    let radius = match cfg.ues.placement {
        Placement::CellCenter => cell * cfg.ues.center_radius_fraction,
        Placement::Uniform => cell,
    };
    let cos_max = radius.to_radians().cos();
    let mut rng = rng_stream(cfg.sim.seed, "placement");
    Ok((0..cfg.ues.count)
        .map(|_| {
            let u: f64 = rng.gen();
            let bearing: f64 = rng.gen::<f64>() * 360.0;
            let angle = (1.0 - u * (1.0 - cos_max)).clamp(-1.0, 1.0).acos().to_degrees();
            center.destination(angle, bearing)
        })
        .collect())
}
