//! Ordered fixed design grids on `[0, 1]`.
//!
//! Points are kept in non-decreasing order with an implicit left endpoint
//! `x_(0) = 0`. The mesh is the largest consecutive gap, the gap from 0 to the
//! first point included. Duplicate points are allowed and produce zero gaps.

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignGrid {
    points: Vec<f64>,
    mesh: f64,
}

impl DesignGrid {
    /// The grid `{k/n : 1 <= k <= n}`.
    pub fn equispaced(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("equispaced design needs n >= 1");
        }
        let points: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
        let mesh = max_gap(&points);
        Ok(Self { points, mesh })
    }

    /// Sorts and validates arbitrary points in `[0, 1]`.
    pub fn from_points(points: impl Into<Vec<f64>>) -> Result<Self> {
        let mut points = points.into();
        if points.is_empty() {
            return invalid("design must contain at least one point");
        }
        if let Some(bad) = points.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return invalid(format!("design point {bad} lies outside [0, 1]"));
        }
        points.sort_by(f64::total_cmp);
        let mesh = max_gap(&points);
        Ok(Self { points, mesh })
    }

    /// Parses `equispaced:<n>` or `file:<path>` (a JSON array of reals).
    pub fn from_descriptor(descriptor: &str) -> Result<Self> {
        match descriptor.split_once(':') {
            Some(("equispaced", n)) => {
                let n: usize = n
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad design size '{n}'")))?;
                Self::equispaced(n)
            }
            Some(("file", path)) => Self::from_json_file(path),
            _ => invalid(format!(
                "design must be 'equispaced:<n>' or 'file:<path>', got '{descriptor}'"
            )),
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `δ_n = max_k (x_(k) − x_(k−1))` with `x_(0) = 0`.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// True when the last point is exactly 1.
    pub fn is_anchored(&self) -> bool {
        self.points.last() == Some(&1.0)
    }

    /// Consecutive gaps `x_(k) − x_(k−1)`, starting from the implicit 0.
    pub fn gaps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.points
            .iter()
            .map(|&p| {
                let g = p - prev;
                prev = p;
                g
            })
            .collect()
    }
}

fn max_gap(sorted: &[f64]) -> f64 {
    let mut prev = 0.0;
    let mut mesh = 0.0_f64;
    for &p in sorted {
        mesh = mesh.max(p - prev);
        prev = p;
    }
    mesh
}

impl Serialize for DesignGrid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.points.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DesignGrid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let points = Vec::<f64>::deserialize(deserializer)?;
        DesignGrid::from_points(points).map_err(serde::de::Error::custom)
    }
}
