//! Spherical coordinates, the rectilinear (gnomonic) projection and the
//! Moore-neighbourhood used to pick transition candidates.
//!
//! All public angles are degrees. Latitude is positive to the north and
//! longitude positive to the east. On the tangent plane `x` points east and
//! `y` points north, both in units of the sphere radius.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A position on the unit sphere.
///
/// Latitude is kept in `[-90, 90]` and longitude in `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereCoord {
    lat: f64,
    lon: f64,
}

impl SphereCoord {
    /// Normalizes a raw pair: longitude wraps modulo 360, latitude clamps
    /// at the poles.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::InvalidCoordinate { lat, lon });
        }
        Ok(Self {
            lat: lat.clamp(-90.0, 90.0),
            lon: wrap_lon(lon),
        })
    }

    pub const fn origin() -> Self {
        Self { lat: 0.0, lon: 0.0 }
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Moves by a latitude/longitude offset and renormalizes.
    pub fn offset(&self, dlat: f64, dlon: f64) -> Self {
        Self {
            lat: (self.lat + dlat).clamp(-90.0, 90.0),
            lon: wrap_lon(self.lon + dlon),
        }
    }

    fn to_radians(self) -> (f64, f64) {
        (self.lat.to_radians(), self.lon.to_radians())
    }
}

impl Default for SphereCoord {
    fn default() -> Self {
        Self::origin()
    }
}

/// Same as [`SphereCoord::new`].
pub fn normalize(lat: f64, lon: f64) -> Result<SphereCoord> {
    SphereCoord::new(lat, lon)
}

fn wrap_lon(lon: f64) -> f64 {
    let wrapped = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if wrapped >= 180.0 {
        wrapped - 360.0
    } else {
        wrapped
    }
}

impl Serialize for SphereCoord {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        [self.lat, self.lon].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SphereCoord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [lat, lon] = <[f64; 2]>::deserialize(deserializer)?;
        SphereCoord::new(lat, lon).map_err(serde::de::Error::custom)
    }
}

/// Latitude/longitude offset between consecutive viewport centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionStep {
    pub dlat: f64,
    pub dlon: f64,
}

impl TransitionStep {
    pub fn new(dlat: f64, dlon: f64) -> Result<Self> {
        if !dlat.is_finite() || !dlon.is_finite() {
            return Err(Error::InvalidStep(dlat, dlon));
        }
        Ok(Self { dlat, dlon })
    }
}

impl Default for TransitionStep {
    fn default() -> Self {
        Self {
            dlat: 24.0,
            dlon: 24.0,
        }
    }
}

/// Angular extent of a viewport.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOfView {
    pub horizontal: f64,
    pub vertical: f64,
}

impl FieldOfView {
    pub fn new(horizontal: f64, vertical: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0 && v < 180.0;
        if !ok(horizontal) || !ok(vertical) {
            return Err(Error::InvalidFieldOfView(horizontal, vertical));
        }
        Ok(Self {
            horizontal,
            vertical,
        })
    }

    pub fn square(degrees: f64) -> Result<Self> {
        Self::new(degrees, degrees)
    }

    /// Half-extent of the tangent plane covered by the viewport.
    pub fn half_extent(&self) -> (f64, f64) {
        (
            (self.horizontal / 2.0).to_radians().tan(),
            (self.vertical / 2.0).to_radians().tan(),
        )
    }
}

impl Default for FieldOfView {
    fn default() -> Self {
        Self {
            horizontal: 110.0,
            vertical: 110.0,
        }
    }
}

/// The eight transition directions, in the order used everywhere a
/// direction index appears.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Unit offset as (latitude sign, longitude sign).
    pub fn unit(self) -> (f64, f64) {
        match self {
            Direction::N => (1.0, 0.0),
            Direction::NE => (1.0, 1.0),
            Direction::E => (0.0, 1.0),
            Direction::SE => (-1.0, 1.0),
            Direction::S => (-1.0, 0.0),
            Direction::SW => (-1.0, -1.0),
            Direction::W => (0.0, -1.0),
            Direction::NW => (1.0, -1.0),
        }
    }

    pub fn opposite(self) -> Self {
        Self::ALL[(self.index() + 4) % 8]
    }
}

/// Candidate centers reachable from `center` in one step, in
/// [`Direction::ALL`] order.
pub fn neighbor_coords(center: SphereCoord, step: TransitionStep) -> [SphereCoord; 8] {
    Direction::ALL.map(|d| {
        let (ulat, ulon) = d.unit();
        center.offset(ulat * step.dlat, ulon * step.dlon)
    })
}

/// A point on the plane tangent to the sphere at a projection center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub x: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Gnomonic projection of `point` onto the plane tangent at `center`.
pub fn gnomonic_forward(center: SphereCoord, point: SphereCoord) -> Result<PlanePoint> {
    let (lat0, lon0) = center.to_radians();
    let (lat, lon) = point.to_radians();
    let dlon = lon - lon0;
    let cos_c = lat0.sin() * lat.sin() + lat0.cos() * lat.cos() * dlon.cos();
    // Points on the horizon project to infinity.
    if cos_c <= 1e-12 {
        return Err(Error::OutsideHemisphere);
    }
    Ok(PlanePoint {
        x: lat.cos() * dlon.sin() / cos_c,
        y: (lat0.cos() * lat.sin() - lat0.sin() * lat.cos() * dlon.cos()) / cos_c,
    })
}

/// Latitude (radians) and longitude offset from the center (radians) of the
/// sphere direction under a tangent-plane point.
///
/// The offset form lets callers shift by the center longitude in whatever
/// units they need without a round trip through degrees.
pub(crate) fn gnomonic_inverse_offset(lat0: f64, plane: PlanePoint) -> (f64, f64) {
    let rho = plane.x.hypot(plane.y);
    if rho == 0.0 {
        return (lat0, 0.0);
    }
    let c = rho.atan();
    let (sin_c, cos_c) = c.sin_cos();
    let (sin0, cos0) = lat0.sin_cos();
    let lat = (cos_c * sin0 + plane.y * sin_c * cos0 / rho)
        .clamp(-1.0, 1.0)
        .asin();
    let dlon = (plane.x * sin_c).atan2(rho * cos0 * cos_c - plane.y * sin0 * sin_c);
    (lat, dlon)
}

/// Inverse gnomonic projection from the plane tangent at `center`.
pub fn gnomonic_inverse(center: SphereCoord, plane: PlanePoint) -> SphereCoord {
    let (lat, dlon) = gnomonic_inverse_offset(center.lat.to_radians(), plane);
    SphereCoord {
        lat: lat.to_degrees().clamp(-90.0, 90.0),
        lon: wrap_lon(center.lon + dlon.to_degrees()),
    }
}

/// Central angle between two points, in degrees.
pub fn great_circle_deg(a: SphereCoord, b: SphereCoord) -> f64 {
    let (lat1, lon1) = a.to_radians();
    let (lat2, lon2) = b.to_radians();
    let sin_dlat = ((lat2 - lat1) / 2.0).sin();
    let sin_dlon = ((lon2 - lon1) / 2.0).sin();
    let h = (sin_dlat * sin_dlat + lat1.cos() * lat2.cos() * sin_dlon * sin_dlon).clamp(0.0, 1.0);
    (2.0 * h.sqrt().atan2((1.0 - h).sqrt())).to_degrees()
}
