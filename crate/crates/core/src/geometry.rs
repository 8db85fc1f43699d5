//! Circular-orbit mechanics and ground-to-satellite link geometry.
//!
//! Everything here is a pure function of its inputs. The Earth is a sphere of
//! radius [`EARTH_RADIUS_KM`]; orbits are circular. Positions are expressed in
//! an Earth-centred, Earth-fixed frame that coincides with the inertial frame
//! at `t = 0`.

use nalgebra::Vector3;
use thiserror::Error;

/// Mean Earth radius, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Speed of light, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;
/// Speed of light, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = SPEED_OF_LIGHT_M_S / 1000.0;
/// Earth gravitational parameter, km^3/s^2.
pub const EARTH_MU_KM3_S2: f64 = 398_600.441_8;
/// Earth sidereal rotation rate, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;
/// Length of one sidereal day, s.
pub const SIDEREAL_DAY_S: f64 = 86_164.090_5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("altitude must be positive, got {0} km")]
    NonPositiveAltitude(f64),
    #[error("elevation {0} deg outside [0, 90]")]
    ElevationOutOfRange(f64),
    #[error("distance must be non-negative, got {0} km")]
    NegativeDistance(f64),
    #[error("beam half-angle {half_angle_deg} deg outside (0, {limb_deg}] (Earth limb)")]
    BeamOvershootsEarth { half_angle_deg: f64, limb_deg: f64 },
    #[error("satellite below the horizon (elevation {elevation_deg:.3} deg)")]
    BelowHorizon { elevation_deg: f64 },
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Circular orbit described by altitude and the three angles that fix the
/// orbital plane and the satellite's starting point in it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orbit {
    altitude_km: f64,
    inclination_deg: f64,
    raan_deg: f64,
    initial_anomaly_deg: f64,
}

impl Orbit {
    /// Angles are normalized: inclination is clamped into `[0, 180]`, RAAN and
    /// anomaly are wrapped into `[0, 360)`.
    pub fn new(
        altitude_km: f64,
        inclination_deg: f64,
        raan_deg: f64,
        initial_anomaly_deg: f64,
    ) -> Result<Self> {
        if !(altitude_km > 0.0) {
            return Err(GeometryError::NonPositiveAltitude(altitude_km));
        }
        Ok(Self {
            altitude_km,
            inclination_deg: inclination_deg.clamp(0.0, 180.0),
            raan_deg: wrap_360(raan_deg),
            initial_anomaly_deg: wrap_360(initial_anomaly_deg),
        })
    }

    pub fn equatorial(altitude_km: f64) -> Result<Self> {
        Self::new(altitude_km, 0.0, 0.0, 0.0)
    }

    pub fn altitude_km(&self) -> f64 {
        self.altitude_km
    }

    pub fn inclination_deg(&self) -> f64 {
        self.inclination_deg
    }

    pub fn raan_deg(&self) -> f64 {
        self.raan_deg
    }

    pub fn initial_anomaly_deg(&self) -> f64 {
        self.initial_anomaly_deg
    }

    pub fn radius_km(&self) -> f64 {
        EARTH_RADIUS_KM + self.altitude_km
    }

    /// Mean motion, rad/s.
    pub fn mean_motion(&self) -> f64 {
        (EARTH_MU_KM3_S2 / self.radius_km().powi(3)).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        std::f64::consts::TAU / self.mean_motion()
    }
}

fn wrap_360(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Satellite position and velocity at a point in time, in the Earth-fixed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteState {
    pub time_s: f64,
    pub position_ecef_km: Vector3<f64>,
    pub velocity_ecef_km_s: Vector3<f64>,
}

impl SatelliteState {
    /// Velocity with the frame rotation added back, i.e. the inertial velocity
    /// expressed along the Earth-fixed axes. Its norm is the orbital speed.
    pub fn inertial_velocity_km_s(&self) -> Vector3<f64> {
        self.velocity_ecef_km_s + earth_spin().cross(&self.position_ecef_km)
    }
}

fn earth_spin() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, EARTH_ROTATION_RAD_S)
}

/// Point on (or above) the Earth's surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPosition {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub altitude_m: f64,
}

impl GroundPosition {
    pub fn new(latitude_deg: f64, longitude_deg: f64, altitude_m: f64) -> Self {
        let mut lon = (longitude_deg + 180.0).rem_euclid(360.0) - 180.0;
        if lon >= 180.0 {
            lon -= 360.0;
        }
        Self {
            latitude_deg: latitude_deg.clamp(-90.0, 90.0),
            longitude_deg: lon,
            altitude_m: altitude_m.max(0.0),
        }
    }

    pub fn ecef_km(&self) -> Vector3<f64> {
        let r = EARTH_RADIUS_KM + self.altitude_m / 1000.0;
        let (lat, lon) = (self.latitude_deg.to_radians(), self.longitude_deg.to_radians());
        Vector3::new(r * lat.cos() * lon.cos(), r * lat.cos() * lon.sin(), r * lat.sin())
    }

    /// Ground point directly below an Earth-fixed position.
    pub fn sub_point(ecef_km: &Vector3<f64>) -> Self {
        let r = ecef_km.norm();
        let lat = (ecef_km.z / r).asin().to_degrees();
        let lon = ecef_km.y.atan2(ecef_km.x).to_degrees();
        Self::new(lat, lon, 0.0)
    }

    /// Great-circle destination reached by travelling `central_angle_deg` of
    /// Earth-central angle along initial bearing `bearing_deg` (clockwise from
    /// north).
    pub fn destination(&self, central_angle_deg: f64, bearing_deg: f64) -> Self {
        let (lat1, lon1) = (self.latitude_deg.to_radians(), self.longitude_deg.to_radians());
        let (d, brg) = (central_angle_deg.to_radians(), bearing_deg.to_radians());
        let lat2 = (lat1.sin() * d.cos() + lat1.cos() * d.sin() * brg.cos()).asin();
        let lon2 = lon1
            + (brg.sin() * d.sin() * lat1.cos()).atan2(d.cos() - lat1.sin() * lat2.sin());
        Self::new(lat2.to_degrees(), lon2.to_degrees(), self.altitude_m)
    }

    /// Earth-central angle between two ground points, degrees.
    pub fn central_angle_deg(&self, other: &GroundPosition) -> f64 {
        let a = self.ecef_km().normalize();
        let b = other.ecef_km().normalize();
        a.dot(&b).clamp(-1.0, 1.0).acos().to_degrees()
    }
}

fn rot_x(v: Vector3<f64>, a: f64) -> Vector3<f64> {
    let (s, c) = a.sin_cos();
    Vector3::new(v.x, c * v.y - s * v.z, s * v.y + c * v.z)
}

fn rot_z(v: Vector3<f64>, a: f64) -> Vector3<f64> {
    let (s, c) = a.sin_cos();
    Vector3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
}

/// Inertial position and velocity at time `t_s`.
pub fn propagate_inertial(orbit: &Orbit, t_s: f64) -> (Vector3<f64>, Vector3<f64>) {
    let r = orbit.radius_km();
    let n = orbit.mean_motion();
    let u = orbit.initial_anomaly_deg.to_radians() + n * t_s;
    let (su, cu) = u.sin_cos();
    let p = Vector3::new(r * cu, r * su, 0.0);
    let v = Vector3::new(-r * n * su, r * n * cu, 0.0);
    let (inc, raan) = (orbit.inclination_deg.to_radians(), orbit.raan_deg.to_radians());
    (rot_z(rot_x(p, inc), raan), rot_z(rot_x(v, inc), raan))
}

/// State on the circular orbit at `t_s`, mapped into the rotating Earth frame.
pub fn propagate(orbit: &Orbit, t_s: f64) -> SatelliteState {
    debug_assert!(t_s >= 0.0);
    let (p_eci, v_eci) = propagate_inertial(orbit, t_s);
    let theta = EARTH_ROTATION_RAD_S * t_s;
    let p = rot_z(p_eci, -theta);
    let v = rot_z(v_eci, -theta) - earth_spin().cross(&p);
    SatelliteState { time_s: t_s, position_ecef_km: p, velocity_ecef_km_s: v }
}

/// Orbital period of a circular orbit at altitude `h_km`.
pub fn orbital_period(h_km: f64) -> Result<f64> {
    Ok(Orbit::equatorial(h_km)?.period_s())
}

/// Line-of-sight distance from a ground point to a satellite at altitude
/// `h_km` seen at `elevation_deg`.
pub fn slant_range(h_km: f64, elevation_deg: f64) -> Result<f64> {
    if !(h_km > 0.0) {
        return Err(GeometryError::NonPositiveAltitude(h_km));
    }
    if !(0.0..=90.0).contains(&elevation_deg) {
        return Err(GeometryError::ElevationOutOfRange(elevation_deg));
    }
    if elevation_deg == 90.0 {
        return Ok(h_km);
    }
    let e = elevation_deg.to_radians();
    let ratio = (EARTH_RADIUS_KM + h_km) / EARTH_RADIUS_KM;
    Ok(EARTH_RADIUS_KM * ((ratio * ratio - e.cos().powi(2)).sqrt() - e.sin()))
}

/// One-way free-space propagation delay over `distance_km`, seconds.
pub fn propagation_delay(distance_km: f64) -> f64 {
    debug_assert!(distance_km >= 0.0);
    distance_km / SPEED_OF_LIGHT_KM_S
}

/// Elevation of a satellite above the local horizon of `ground`, degrees.
/// Negative when the satellite is below the horizon.
pub fn elevation_deg(sat_ecef_km: &Vector3<f64>, ground: &GroundPosition) -> f64 {
    let g = ground.ecef_km();
    let rho = sat_ecef_km - g;
    (rho.dot(&g.normalize()) / rho.norm()).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Distance from a ground point to the satellite, km.
pub fn range_km(sat_ecef_km: &Vector3<f64>, ground: &GroundPosition) -> f64 {
    (sat_ecef_km - ground.ecef_km()).norm()
}

/// Carrier Doppler seen by a ground-fixed terminal. Positive when the
/// satellite approaches.
pub fn doppler_shift(sat: &SatelliteState, ue: &GroundPosition, carrier_hz: f64) -> Result<f64> {
    let elevation = elevation_deg(&sat.position_ecef_km, ue);
    if elevation < 0.0 {
        return Err(GeometryError::BelowHorizon { elevation_deg: elevation });
    }
    let rho = sat.position_ecef_km - ue.ecef_km();
    let range_rate_km_s = rho.dot(&sat.velocity_ecef_km_s) / rho.norm();
    Ok(-range_rate_km_s * carrier_hz / SPEED_OF_LIGHT_KM_S)
}

/// Earth-central angle between the sub-satellite point and a ground point that
/// sees the satellite at `elevation_deg`, degrees.
pub fn central_angle_for_elevation(h_km: f64, elevation_deg: f64) -> Result<f64> {
    if !(h_km > 0.0) {
        return Err(GeometryError::NonPositiveAltitude(h_km));
    }
    if !(0.0..=90.0).contains(&elevation_deg) {
        return Err(GeometryError::ElevationOutOfRange(elevation_deg));
    }
    let e = elevation_deg.to_radians();
    let nadir = (EARTH_RADIUS_KM * e.cos() / (EARTH_RADIUS_KM + h_km)).asin();
    Ok((std::f64::consts::FRAC_PI_2 - e - nadir).to_degrees().max(0.0))
}

/// Duration of an overhead pass above `min_elevation_deg`, ignoring Earth
/// rotation during the pass.
pub fn visibility_window(h_km: f64, min_elevation_deg: f64) -> Result<f64> {
    if !(0.0..90.0).contains(&min_elevation_deg) {
        return Err(GeometryError::ElevationOutOfRange(min_elevation_deg));
    }
    let lambda_max = central_angle_for_elevation(h_km, min_elevation_deg)?;
    Ok(2.0 * lambda_max / 360.0 * orbital_period(h_km)?)
}

/// Largest nadir half-angle that still intersects the Earth, degrees.
pub fn earth_limb_angle_deg(h_km: f64) -> f64 {
    (EARTH_RADIUS_KM / (EARTH_RADIUS_KM + h_km)).asin().to_degrees()
}

/// Earth-central angle subtended by the edge ray of a nadir-pointing beam.
pub fn beam_edge_central_angle_deg(h_km: f64, nadir_half_angle_deg: f64) -> Result<f64> {
    if !(h_km > 0.0) {
        return Err(GeometryError::NonPositiveAltitude(h_km));
    }
    let limb = earth_limb_angle_deg(h_km);
    if !(nadir_half_angle_deg > 0.0 && nadir_half_angle_deg <= limb) {
        return Err(GeometryError::BeamOvershootsEarth {
            half_angle_deg: nadir_half_angle_deg,
            limb_deg: limb,
        });
    }
    let eta = nadir_half_angle_deg.to_radians();
    let cos_el = (eta.sin() * (EARTH_RADIUS_KM + h_km) / EARTH_RADIUS_KM).min(1.0);
    let el = cos_el.acos();
    Ok((std::f64::consts::FRAC_PI_2 - eta - el).to_degrees().max(0.0))
}

/// Ground area of a nadir-pointing beam's footprint, km^2.
pub fn footprint_area(h_km: f64, nadir_half_angle_deg: f64) -> Result<f64> {
    let lambda = beam_edge_central_angle_deg(h_km, nadir_half_angle_deg)?.to_radians();
    Ok(std::f64::consts::TAU * EARTH_RADIUS_KM.powi(2) * (1.0 - lambda.cos()))
}
