//! Spherical distance and coordinate averaging.

use serde::{Deserialize, Serialize};

/// Mean Earth radius (IUGG), kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// A latitude/longitude pair in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub const fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat) && (-180.0..=180.0).contains(&self.lon)
    }
}

/// Great-circle (haversine) distance in kilometres.
pub fn geodesic_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    if a == b {
        return 0.0;
    }
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Wraps a longitude into `[-180, 180]`, leaving both endpoints untouched.
pub fn normalize_lon(lon: f64) -> f64 {
    let mut lon = lon;
    while lon > 180.0 {
        lon -= 360.0;
    }
    while lon < -180.0 {
        lon += 360.0;
    }
    lon
}

/// Arithmetic mean of a day's coordinates.
///
/// Longitudes are unwrapped relative to the first point before averaging so
/// that a trajectory straddling the antimeridian averages near ±180° rather
/// than near 0°.
///
/// # Panics
///
/// Panics on an empty slice.
pub fn daily_mean_coordinate(points: &[GeoPoint]) -> GeoPoint {
    assert!(!points.is_empty(), "daily mean of an empty day");
    let anchor = points[0].lon;
    let mut lat_sum = 0.0;
    let mut lon_sum = 0.0;
    for p in points {
        lat_sum += p.lat;
        let mut lon = p.lon;
        if lon - anchor > 180.0 {
            lon -= 360.0;
        } else if lon - anchor < -180.0 {
            lon += 360.0;
        }
        lon_sum += lon;
    }
    let n = points.len() as f64;
    GeoPoint::new(lat_sum / n, normalize_lon(lon_sum / n))
}

/// Point reached by travelling `distance_km` from `origin` along the initial
/// `bearing_deg` (clockwise from north) on the sphere.
pub fn destination_point(origin: GeoPoint, bearing_deg: f64, distance_km: f64) -> GeoPoint {
    let delta = distance_km / EARTH_RADIUS_KM;
    let theta = bearing_deg.to_radians();
    let phi1 = origin.lat.to_radians();
    let lambda1 = origin.lon.to_radians();
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lambda2 = lambda1 + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    GeoPoint::new(phi2.to_degrees(), normalize_lon(lambda2.to_degrees()))
}
