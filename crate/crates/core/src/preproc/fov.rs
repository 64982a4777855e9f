use serde::{Deserialize, Serialize};

use crate::net::Apex;
use crate::{Error, Mask, Result};

/// Imaging region of a frame: a rectangle for linear probes, an annular
/// sector ("cone") opening downwards from the apex for curved probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FovGeometry {
    /// Half-open bounds `[row0, row1) x [col0, col1)`.
    Rectangle {
        row0: usize,
        row1: usize,
        col0: usize,
        col1: usize,
    },
    Cone {
        apex: Apex,
        half_angle_deg: f64,
        r_min: f64,
        r_max: f64,
    },
}

impl FovGeometry {
    pub fn full(rows: usize, cols: usize) -> Self {
        FovGeometry::Rectangle {
            row0: 0,
            row1: rows,
            col0: 0,
            col1: cols,
        }
    }

    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        match *self {
            FovGeometry::Rectangle {
                row0,
                row1,
                col0,
                col1,
            } => {
                if row0 >= row1 || col0 >= col1 || row1 > rows || col1 > cols {
                    return Err(Error::config(format!(
                        "rectangle [{row0},{row1})x[{col0},{col1}) invalid for {rows}x{cols}"
                    )));
                }
            }
            FovGeometry::Cone {
                apex,
                half_angle_deg,
                r_min,
                r_max,
            } => {
                if !(half_angle_deg > 0.0 && half_angle_deg < 90.0) {
                    return Err(Error::config(format!(
                        "cone half-angle {half_angle_deg} outside (0, 90)"
                    )));
                }
                if !(r_min >= 0.0 && r_min < r_max) {
                    return Err(Error::config(format!(
                        "cone radii [{r_min}, {r_max}] invalid"
                    )));
                }
                if !apex.row.is_finite() || !apex.col.is_finite() {
                    return Err(Error::config("cone apex must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Point test at pixel `(row, col)`.
    pub fn contains(&self, row: usize, col: usize) -> bool {
        match *self {
            FovGeometry::Rectangle {
                row0,
                row1,
                col0,
                col1,
            } => (row0..row1).contains(&row) && (col0..col1).contains(&col),
            FovGeometry::Cone {
                apex,
                half_angle_deg,
                r_min,
                r_max,
            } => {
                let dy = row as f64 - apex.row;
                let dx = col as f64 - apex.col;
                let r = dy.hypot(dx);
                // angle from straight down, positive towards larger columns
                let theta = dx.atan2(dy).to_degrees();
                r >= r_min && r <= r_max && theta.abs() <= half_angle_deg
            }
        }
    }

    pub fn apex(&self) -> Option<Apex> {
        match *self {
            FovGeometry::Cone { apex, .. } => Some(apex),
            FovGeometry::Rectangle { .. } => None,
        }
    }
}

/// Binary mask of the field of view.
pub fn fov_mask(rows: usize, cols: usize, geom: &FovGeometry) -> Result<Mask> {
    geom.validate(rows, cols)?;
    Ok(Mask::from_fn(rows, cols, |r, c| geom.contains(r, c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone() -> FovGeometry {
        FovGeometry::Cone {
            apex: Apex::new(-10.0, 32.0),
            half_angle_deg: 30.0,
            r_min: 15.0,
            r_max: 70.0,
        }
    }

    #[test]
    fn full_rectangle_is_all_ones() {
        let m = fov_mask(7, 9, &FovGeometry::full(7, 9)).unwrap();
        assert_eq!(m.area(), 63);
    }

    #[test]
    fn cone_membership_by_hand() {
        let g = cone();
        // distance 50 straight below the apex
        assert!(g.contains(40, 32));
        // distance 5 from the apex, below r_min
        let near = FovGeometry::Cone {
            apex: Apex::new(2.0, 32.0),
            half_angle_deg: 30.0,
            r_min: 15.0,
            r_max: 70.0,
        };
        assert!(!near.contains(2, 37));
        assert!(!near.contains(7, 32));
        // outside the angular range
        assert!(!g.contains(10, 60));
    }

    #[test]
    fn degenerate_geometry_rejected() {
        let bad = FovGeometry::Cone {
            apex: Apex::new(0.0, 0.0),
            half_angle_deg: 95.0,
            r_min: 1.0,
            r_max: 2.0,
        };
        assert!(fov_mask(8, 8, &bad).is_err());
        let flat = FovGeometry::Rectangle {
            row0: 3,
            row1: 3,
            col0: 0,
            col1: 8,
        };
        assert!(fov_mask(8, 8, &flat).is_err());
        let radii = FovGeometry::Cone {
            apex: Apex::new(0.0, 0.0),
            half_angle_deg: 30.0,
            r_min: 5.0,
            r_max: 5.0,
        };
        assert!(fov_mask(8, 8, &radii).is_err());
    }
}
