//! Node sets in `Cⁿ` and log-density fields living on them.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A flat list of points in `Cⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet {
    dim: usize,
    coords: Vec<Complex64>,
}

impl NodeSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, coords: Vec::new() }
    }

    pub fn from_flat(dim: usize, coords: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: coords.len() });
        }
        Ok(Self { dim, coords })
    }

    /// Node set of one-dimensional points.
    pub fn from_points_1d(points: impl IntoIterator<Item = Complex64>) -> Self {
        Self { dim: 1, coords: points.into_iter().collect() }
    }

    pub fn from_points(dim: usize, points: &[Vec<Complex64>]) -> Result<Self> {
        let mut set = Self::new(dim);
        for p in points {
            set.push(p)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, point: &[Complex64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        self.coords.extend_from_slice(point);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, index: usize) -> &[Complex64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Complex64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Euclidean norm `|z|` of each node.
    pub fn norms(&self) -> Vec<f64> {
        self.iter().map(point_norm).collect()
    }

    /// Keeps the nodes whose norm lies in `[inner, outer]`; returns the kept indices.
    pub fn select_band(&self, inner: f64, outer: f64) -> Vec<usize> {
        self.iter()
            .enumerate()
            .filter(|(_, p)| {
                let r = point_norm(p);
                r >= inner && r <= outer
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> NodeSet {
        let mut out = NodeSet::new(self.dim);
        for &i in indices {
            out.coords.extend_from_slice(self.point(i));
        }
        out
    }
}

pub fn point_norm(p: &[Complex64]) -> f64 {
    p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Log-values of an m-canonical density `κ·Λ^⊗m` on a node set, where
/// `Λ = (√-1)^{n²} dz∧dz̄ = 2ⁿ·Lebesgue`.
#[derive(Clone, Debug)]
pub struct LogDensityField {
    pub twist: u32,
    pub nodes: NodeSet,
    pub log_values: Vec<f64>,
}

impl LogDensityField {
    pub fn new(twist: u32, nodes: NodeSet, log_values: Vec<f64>) -> Result<Self> {
        if nodes.len() != log_values.len() {
            return Err(Error::InvalidField(format!(
                "{} nodes but {} values",
                nodes.len(),
                log_values.len()
            )));
        }
        Ok(Self { twist, nodes, log_values })
    }

    /// The trivial density `κ ≡ 1` at twist 0 (weight of the unweighted kernel).
    pub fn unit(nodes: NodeSet) -> Self {
        let log_values = vec![0.0; nodes.len()];
        Self { twist: 0, nodes, log_values }
    }

    pub fn len(&self) -> usize {
        self.log_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_values.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.log_values.iter().all(|v| v.is_finite())
    }

    /// CSV body with columns `z1_re, z1_im, …, log_value`.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        write_node_csv(&self.nodes, &[("log_value", &self.log_values)], comment)
    }
}

/// Writes a node set together with named value columns.
pub fn write_node_csv(nodes: &NodeSet, columns: &[(&str, &[f64])], comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    let mut header: Vec<String> = Vec::new();
    if nodes.dim() == 1 {
        header.push("node_re".into());
        header.push("node_im".into());
    } else {
        for k in 1..=nodes.dim() {
            header.push(format!("z{k}_re"));
            header.push(format!("z{k}_im"));
        }
    }
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    let _ = writeln!(out, "{}", header.join(","));
    for (i, p) in nodes.iter().enumerate() {
        let mut row: Vec<String> = p
            .iter()
            .flat_map(|z| [format!("{:.17e}", z.re), format!("{:.17e}", z.im)])
            .collect();
        row.extend(columns.iter().map(|(_, v)| format!("{:.17e}", v[i])));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_set_indexing() {
        let set = NodeSet::from_points(
            2,
            &[
                vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)],
                vec![Complex64::new(0.5, 0.5), Complex64::new(0.0, 0.0)],
            ],
        )
        .unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.point(1)[0], Complex64::new(0.5, 0.5));
        assert!((set.norms()[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!(NodeSet::new(2).push(&[Complex64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let nodes = NodeSet::from_points_1d([Complex64::new(0.25, 0.0)]);
        let f = LogDensityField::new(1, nodes, vec![-1.0]).unwrap();
        let csv = f.to_csv(Some("provenance: test"));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# provenance: test");
        assert_eq!(lines[1], "node_re,node_im,log_value");
        assert!(lines[2].starts_with("2.5"));
    }
}
