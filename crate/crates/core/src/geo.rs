//! Geographic coordinates and the sinusoidal input encoding.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A longitude/latitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoordinate {
    pub lon_deg: f64,
    pub lat_deg: f64,
}

impl GeoCoordinate {
    pub fn new(lon_deg: f64, lat_deg: f64) -> Result<Self> {
        let c = Self { lon_deg, lat_deg };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lon_deg.is_finite() || !self.lat_deg.is_finite() {
            return Err(Error::domain(format!(
                "non-finite coordinate (lon {}, lat {})",
                self.lon_deg, self.lat_deg
            )));
        }
        if !(-180.0..=180.0).contains(&self.lon_deg) {
            return Err(Error::domain(format!(
                "longitude {} outside [-180, 180]",
                self.lon_deg
            )));
        }
        if !(-90.0..=90.0).contains(&self.lat_deg) {
            return Err(Error::domain(format!(
                "latitude {} outside [-90, 90]",
                self.lat_deg
            )));
        }
        Ok(())
    }

    /// Great-circle distance in degrees of arc (haversine form).
    pub fn distance_deg(&self, other: &GeoCoordinate) -> f64 {
        let (lat1, lat2) = (self.lat_deg.to_radians(), other.lat_deg.to_radians());
        let dlat = lat2 - lat1;
        let dlon = (other.lon_deg - self.lon_deg).to_radians();
        let a = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
        (2.0 * a.sqrt().min(1.0).asin()).to_degrees()
    }
}

/// Network input features `[sin πx, cos πx, sin πy, cos πy]` where `x` and `y`
/// are longitude and latitude scaled to [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodedLocation(pub [f64; 4]);

impl EncodedLocation {
    pub fn features(&self) -> &[f64; 4] {
        &self.0
    }
}

pub fn encode_location(coord: &GeoCoordinate) -> Result<EncodedLocation> {
    coord.validate()?;
    Ok(encode_unchecked(coord))
}

pub(crate) fn encode_unchecked(coord: &GeoCoordinate) -> EncodedLocation {
    let x = PI * coord.lon_deg / 180.0;
    let y = PI * coord.lat_deg / 90.0;
    EncodedLocation([x.sin(), x.cos(), y.sin(), y.cos()])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64; 4], b: &[f64; 4], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn encodes_reference_points() {
        let e = encode_location(&GeoCoordinate::new(0.0, 0.0).unwrap()).unwrap();
        assert_eq!(e.0, [0.0, 1.0, 0.0, 1.0]);

        let e = encode_location(&GeoCoordinate::new(180.0, 0.0).unwrap()).unwrap();
        assert!(close(&e.0, &[0.0, -1.0, 0.0, 1.0], 1e-9));

        let e = encode_location(&GeoCoordinate::new(90.0, -90.0).unwrap()).unwrap();
        assert!(close(&e.0, &[1.0, 0.0, 0.0, -1.0], 1e-9));
    }

    #[test]
    fn seam_is_continuous() {
        for lat in [-90.0, -33.3, 0.0, 12.5, 90.0] {
            let east = encode_location(&GeoCoordinate::new(180.0, lat).unwrap()).unwrap();
            let west = encode_location(&GeoCoordinate::new(-180.0, lat).unwrap()).unwrap();
            assert!(close(&east.0, &west.0, 1e-12), "lat {lat}");
        }
    }

    #[test]
    fn rejects_bad_coordinates() {
        assert!(GeoCoordinate::new(180.5, 0.0).is_err());
        assert!(GeoCoordinate::new(0.0, -90.01).is_err());
        assert!(GeoCoordinate::new(f64::NAN, 0.0).is_err());
        assert!(GeoCoordinate::new(0.0, f64::INFINITY).is_err());
        let raw = GeoCoordinate {
            lon_deg: 0.0,
            lat_deg: 100.0,
        };
        assert!(matches!(encode_location(&raw), Err(Error::Domain(_))));
    }

    #[test]
    fn distance_matches_known_arcs() {
        let a = GeoCoordinate::new(0.0, 0.0).unwrap();
        let b = GeoCoordinate::new(90.0, 0.0).unwrap();
        let pole = GeoCoordinate::new(45.0, 90.0).unwrap();
        assert!((a.distance_deg(&b) - 90.0).abs() < 1e-9);
        assert!((a.distance_deg(&pole) - 90.0).abs() < 1e-9);
        let w = GeoCoordinate::new(-179.5, 10.0).unwrap();
        let e = GeoCoordinate::new(179.5, 10.0).unwrap();
        assert!(w.distance_deg(&e) < 1.0);
    }

    proptest::proptest! {
        #[test]
        fn components_are_bounded(lon in -180.0f64..=180.0, lat in -90.0f64..=90.0) {
            let e = encode_location(&GeoCoordinate::new(lon, lat).unwrap()).unwrap();
            for v in e.0 {
                proptest::prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}
