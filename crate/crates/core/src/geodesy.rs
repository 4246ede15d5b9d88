//! Conversions between angular position errors and metric north/east errors
//! on the WGS-84 ellipsoid.

use thiserror::Error;

use crate::scalar::{c, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum GeodesyError {
    #[error("latitude {0} rad outside [-pi/2, pi/2]")]
    InvalidLatitude(f64),
    #[error("latitude {0} rad too close to a pole for a longitude conversion")]
    PolarSingularity(f64),
}

/// Guard band around the poles where longitude errors are undefined.
pub const POLE_GUARD_RAD: f64 = 1e-9;

pub const WGS84_SEMI_MAJOR_M: f64 = 6_378_137.0;
pub const WGS84_ECC_SQ: f64 = 6.694_379_990_14e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid<T> {
    pub semi_major_m: T,
    /// First eccentricity squared.
    pub ecc_sq: T,
}

impl<T: Scalar> Ellipsoid<T> {
    pub fn wgs84() -> Self {
        Self { semi_major_m: c(WGS84_SEMI_MAJOR_M), ecc_sq: c(WGS84_ECC_SQ) }
    }

    /// Meridian radius of curvature `M = a(1-e^2) / (1 - e^2 sin^2 lat)^(3/2)`.
    pub fn meridian_radius(&self, lat_rad: T) -> T {
        let s = lat_rad.sin();
        let w = T::one() - self.ecc_sq * s * s;
        self.semi_major_m * (T::one() - self.ecc_sq) / (w * w.sqrt())
    }

    /// Prime-vertical radius of curvature `N = a / sqrt(1 - e^2 sin^2 lat)`.
    pub fn prime_vertical_radius(&self, lat_rad: T) -> T {
        let s = lat_rad.sin();
        self.semi_major_m / (T::one() - self.ecc_sq * s * s).sqrt()
    }

    /// Radius of the parallel, `N cos lat`.
    pub fn parallel_radius(&self, lat_rad: T) -> T {
        self.prime_vertical_radius(lat_rad) * lat_rad.cos()
    }

    pub fn delta_north(&self, dlat_rad: T, lat_rad: T) -> Result<T, GeodesyError> {
        check_lat(lat_rad)?;
        Ok(dlat_rad * self.meridian_radius(lat_rad))
    }

    pub fn delta_east(&self, dlon_rad: T, lat_rad: T) -> Result<T, GeodesyError> {
        check_lat(lat_rad)?;
        Ok(dlon_rad * self.parallel_radius(lat_rad))
    }

    pub fn delta_lat(&self, dnorth_m: T, lat_rad: T) -> Result<T, GeodesyError> {
        check_lat(lat_rad)?;
        Ok(dnorth_m / self.meridian_radius(lat_rad))
    }

    pub fn delta_lon(&self, deast_m: T, lat_rad: T) -> Result<T, GeodesyError> {
        check_lat(lat_rad)?;
        if lat_rad.abs() >= T::FRAC_PI_2() - c(POLE_GUARD_RAD) {
            return Err(GeodesyError::PolarSingularity(lat_rad.to_f64_lossy()));
        }
        Ok(deast_m / self.parallel_radius(lat_rad))
    }
}

fn check_lat<T: Scalar>(lat_rad: T) -> Result<(), GeodesyError> {
    if lat_rad.is_nan() || lat_rad.abs() > T::FRAC_PI_2() {
        return Err(GeodesyError::InvalidLatitude(lat_rad.to_f64_lossy()));
    }
    Ok(())
}

/// Latitude error (rad) to north-south position error (m).
pub fn delta_north<T: Scalar>(dlat_rad: T, lat_rad: T) -> Result<T, GeodesyError> {
    Ellipsoid::wgs84().delta_north(dlat_rad, lat_rad)
}

/// Longitude error (rad) to east-west position error (m).
pub fn delta_east<T: Scalar>(dlon_rad: T, lat_rad: T) -> Result<T, GeodesyError> {
    Ellipsoid::wgs84().delta_east(dlon_rad, lat_rad)
}

/// North-south position error (m) to latitude error (rad).
pub fn delta_lat<T: Scalar>(dnorth_m: T, lat_rad: T) -> Result<T, GeodesyError> {
    Ellipsoid::wgs84().delta_lat(dnorth_m, lat_rad)
}

/// East-west position error (m) to longitude error (rad).
pub fn delta_lon<T: Scalar>(deast_m: T, lat_rad: T) -> Result<T, GeodesyError> {
    Ellipsoid::wgs84().delta_lon(deast_m, lat_rad)
}
