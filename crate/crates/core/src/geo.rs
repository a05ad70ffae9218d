//! Planar coordinate frames, flat-earth geodetic conversion and angle helpers.
//!
//! All local positions are expressed in an east/north frame in meters. Yaw is
//! measured counterclockwise from the +x (east) axis, in radians.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Meters per degree used for both latitude and longitude by default.
pub const DEFAULT_METERS_PER_DEGREE: f64 = 111_000.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside (-180, 180]")]
    Longitude(f64),
    #[error("non-finite coordinate component")]
    NonFinite,
    #[error("meters_per_degree must be positive, got {0}")]
    Scale(f64),
}

/// A geodetic coordinate. Altitude is carried along but never estimated or attacked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeoCoord {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub alt_m: f64,
}

impl GeoCoord {
    pub fn new(lat_deg: f64, lon_deg: f64, alt_m: f64) -> Result<Self, GeoError> {
        let c = Self { lat_deg, lon_deg, alt_m };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.lat_deg.is_finite() && self.lon_deg.is_finite() && self.alt_m.is_finite()) {
            return Err(GeoError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&self.lat_deg) {
            return Err(GeoError::Latitude(self.lat_deg));
        }
        if !(self.lon_deg > -180.0 && self.lon_deg <= 180.0) {
            return Err(GeoError::Longitude(self.lon_deg));
        }
        Ok(())
    }
}

/// A point (or displacement) in the local east/north plane, meters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalPos {
    /// East component.
    pub x: f64,
    /// North component.
    pub y: f64,
}

impl LocalPos {
    pub const ORIGIN: LocalPos = LocalPos { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `yaw`.
    pub fn from_heading(yaw: f64) -> Self {
        Self::new(yaw.cos(), yaw.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    /// Bearing of this vector, counterclockwise from east.
    pub fn heading(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for LocalPos {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for LocalPos {
    fn add_assign(&mut self, rhs: Self) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for LocalPos {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for LocalPos {
    fn sub_assign(&mut self, rhs: Self) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for LocalPos {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

impl Neg for LocalPos {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Equal-scale flat-earth frame anchored at `origin`.
///
/// Both axes use the same `meters_per_degree`; no cosine-of-latitude correction
/// is applied, so 0.00001 degree is 1.11 m in either direction at the default
/// scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlatEarthFrame {
    pub origin: GeoCoord,
    pub meters_per_degree: f64,
}

impl Default for FlatEarthFrame {
    fn default() -> Self {
        // PX4 SITL default home position.
        Self {
            origin: GeoCoord { lat_deg: 47.397742, lon_deg: 8.545594, alt_m: 0.0 },
            meters_per_degree: DEFAULT_METERS_PER_DEGREE,
        }
    }
}

impl FlatEarthFrame {
    pub fn new(origin: GeoCoord, meters_per_degree: f64) -> Result<Self, GeoError> {
        let f = Self { origin, meters_per_degree };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        self.origin.validate()?;
        if !(self.meters_per_degree.is_finite() && self.meters_per_degree > 0.0) {
            return Err(GeoError::Scale(self.meters_per_degree));
        }
        Ok(())
    }

    pub fn meters_to_degrees(&self, meters: f64) -> f64 {
        meters / self.meters_per_degree
    }

    pub fn degrees_to_meters(&self, degrees: f64) -> f64 {
        degrees * self.meters_per_degree
    }
}

pub fn geodetic_to_local(c: &GeoCoord, f: &FlatEarthFrame) -> LocalPos {
    LocalPos {
        x: (c.lon_deg - f.origin.lon_deg) * f.meters_per_degree,
        y: (c.lat_deg - f.origin.lat_deg) * f.meters_per_degree,
    }
}

/// Inverse of [`geodetic_to_local`]. Altitude is taken from the frame origin.
pub fn local_to_geodetic(p: LocalPos, f: &FlatEarthFrame) -> GeoCoord {
    GeoCoord {
        lat_deg: f.origin.lat_deg + p.y / f.meters_per_degree,
        lon_deg: f.origin.lon_deg + p.x / f.meters_per_degree,
        alt_m: f.origin.alt_m,
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame() -> FlatEarthFrame {
        FlatEarthFrame::default()
    }

    #[test]
    fn origin_maps_to_zero() {
        let f = frame();
        assert_eq!(geodetic_to_local(&f.origin, &f), LocalPos::ORIGIN);
        assert_eq!(local_to_geodetic(LocalPos::ORIGIN, &f), f.origin);
    }

    #[test]
    fn one_hundred_thousandth_degree_is_1_11_m() {
        let f = frame();
        let mut c = f.origin;
        c.lat_deg += 0.00001;
        let p = geodetic_to_local(&c, &f);
        assert!((p.y - 1.11).abs() < 1e-6, "{}", p.y);
        assert!(p.x.abs() < 1e-12);
    }

    #[test]
    fn fig7_drift_magnitude() {
        let f = frame();
        let mut c = f.origin;
        c.lat_deg += 0.00035;
        let p = geodetic_to_local(&c, &f);
        assert!((p.y - 38.85).abs() < 1e-6, "{}", p.y);
    }

    #[test]
    fn north_step_converts_back_to_degrees() {
        let f = frame();
        let g = local_to_geodetic(LocalPos::new(0.0, 1.11), &f);
        assert!((g.lat_deg - f.origin.lat_deg - 0.00001).abs() < 1e-12);
        assert_eq!(g.lon_deg, f.origin.lon_deg);
    }

    #[test]
    fn invalid_coordinates_rejected() {
        assert_eq!(GeoCoord::new(91.0, 0.0, 0.0), Err(GeoError::Latitude(91.0)));
        assert_eq!(GeoCoord::new(0.0, -180.0, 0.0), Err(GeoError::Longitude(-180.0)));
        assert!(GeoCoord::new(0.0, 180.0, 0.0).is_ok());
        assert_eq!(GeoCoord::new(f64::NAN, 0.0, 0.0), Err(GeoError::NonFinite));
        assert!(FlatEarthFrame::new(frame().origin, 0.0).is_err());
    }

    #[test]
    fn wrap_angle_examples() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert!((wrap_angle(1.5 * PI) + 0.5 * PI).abs() < 1e-12);
        // repeated subtraction oracle
        let mut a = -7.0 * PI;
        while a <= -PI {
            a += TAU;
        }
        assert!((a - PI).abs() < 1e-12);
        assert!((wrap_angle(-7.0 * PI) - a).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
    }

    proptest! {
        #[test]
        fn round_trip_within_a_degree(dlat in -1.0f64..1.0, dlon in -1.0f64..1.0) {
            let f = frame();
            let c = GeoCoord { lat_deg: f.origin.lat_deg + dlat, lon_deg: f.origin.lon_deg + dlon, alt_m: 0.0 };
            let back = local_to_geodetic(geodetic_to_local(&c, &f), &f);
            let p0 = geodetic_to_local(&c, &f);
            let p1 = geodetic_to_local(&back, &f);
            prop_assert!(p0.distance(p1) < 1e-9);
        }

        #[test]
        fn local_round_trip(x in -1e5f64..1e5, y in -1e5f64..1e5) {
            let f = frame();
            let p = LocalPos::new(x, y);
            let q = geodetic_to_local(&local_to_geodetic(p, &f), &f);
            prop_assert!(p.distance(q) < 1e-9);
        }

        #[test]
        fn wrap_is_idempotent_and_congruent(a in -1e4f64..1e4) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
            prop_assert_eq!(wrap_angle(w), w);
            let k = ((a - w) / TAU).round();
            prop_assert!((a - w - k * TAU).abs() < 1e-9);
        }

        #[test]
        fn conversion_is_linear(a in -0.5f64..0.5, b in -0.5f64..0.5, s in -3.0f64..3.0) {
            let f = frame();
            let at = |dlat: f64, dlon: f64| geodetic_to_local(
                &GeoCoord { lat_deg: f.origin.lat_deg + dlat, lon_deg: f.origin.lon_deg + dlon, alt_m: 0.0 }, &f);
            let p = at(a * s, b * s);
            let q = at(a, b) * s;
            prop_assert!(p.distance(q) < 1e-6);
        }
    }
}
