//! Points in cylindrical coordinates `(rho, z, phi)` about the cylinder axis.

use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CylPoint {
    pub rho: f64,
    pub z: f64,
    pub phi: f64,
}

impl CylPoint {
    pub fn new(rho: f64, z: f64, phi: f64) -> Self {
        Self { rho, z, phi }
    }

    /// Builds a point from Cartesian coordinates, with `phi` in `[0, 2pi)`.
    pub fn from_cartesian([x, y, z]: [f64; 3]) -> Self {
        let rho = x.hypot(y);
        let phi = if rho == 0.0 { 0.0 } else { y.atan2(x).rem_euclid(TAU) };
        Self { rho, z, phi }
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let (s, c) = self.phi.sin_cos();
        [self.rho * c, self.rho * s, self.z]
    }

    /// Squared Euclidean distance, with `other` shifted axially by `dz`.
    pub fn distance_sq_shifted(&self, other: &CylPoint, dz: f64) -> f64 {
        let planar = self.rho * self.rho + other.rho * other.rho
            - 2.0 * self.rho * other.rho * (self.phi - other.phi).cos();
        let axial = self.z - other.z - dz;
        planar.max(0.0) + axial * axial
    }
}
