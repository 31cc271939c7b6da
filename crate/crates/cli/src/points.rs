//! Observation points: a CSV with `rho_um,z_um,phi_rad` and optionally `t_s`.

use std::io::Read;

use serde::Deserialize;
use vessel_dmc::CylPoint;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct PointRow {
    pub rho_um: f64,
    pub z_um: f64,
    pub phi_rad: f64,
    #[serde(default)]
    pub t_s: Option<f64>,
}

impl PointRow {
    pub fn point(&self) -> CylPoint {
        CylPoint::new(self.rho_um * 1e-6, self.z_um * 1e-6, self.phi_rad)
    }
}

pub fn read_points(reader: impl Read) -> Result<Vec<PointRow>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let rows = rdr
        .deserialize()
        .collect::<Result<Vec<PointRow>, _>>()?;
    if rows.is_empty() {
        return Err(CliError::Validation("points file has no rows".into()));
    }
    Ok(rows)
}

/// Expands rows into `(point, t)` requests: rows carrying `t_s` are used as
/// is, the rest are crossed with `times`.
pub fn requests(rows: &[PointRow], times: Option<&[f64]>) -> Result<Vec<(PointRow, f64)>, CliError> {
    let mut out = Vec::new();
    for row in rows {
        match (row.t_s, times) {
            (Some(t), _) => out.push((*row, t)),
            (None, Some(ts)) if !ts.is_empty() => out.extend(ts.iter().map(|&t| (*row, t))),
            _ => {
                return Err(CliError::Validation(
                    "a point has no t_s column and the config has no [times] block".into(),
                ))
            }
        }
    }
    Ok(out)
}
