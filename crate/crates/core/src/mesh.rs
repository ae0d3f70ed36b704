//! Partitions of the parameter interval (0, L).

use std::sync::Arc;

use crate::error::{Error, Result};

/// A partition 0 = x_0 < x_1 < ... < x_N = L of the interval (0, L).
///
/// Cheap to clone (shared node storage); immutable after construction.
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Arc<Vec<f64>>,
}

impl Mesh {
    /// Uniform partition of (0, L) into `n` elements of size L/n.
    pub fn uniform(length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "length must be positive, got {length}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 elements, got {n}"
            )));
        }
        let h = length / n as f64;
        let mut nodes: Vec<f64> = (0..=n).map(|j| j as f64 * h).collect();
        // pin the endpoint to avoid L != x_N by rounding
        nodes[n] = length;
        Ok(Mesh {
            nodes: Arc::new(nodes),
        })
    }

    /// General partition from an ordered node list starting at 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidMesh("need at least 2 elements".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidMesh(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidMesh(
                "nodes must be strictly increasing".into(),
            ));
        }
        Ok(Mesh {
            nodes: Arc::new(nodes),
        })
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Number of elements N.
    pub fn element_count(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Number of nodes N + 1.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Size h_T of element `e` = [x_e, x_{e+1}].
    pub fn element_size(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// Maximal element size h.
    pub fn h_max(&self) -> f64 {
        (0..self.element_count())
            .map(|e| self.element_size(e))
            .fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.element_count())
            .map(|e| self.element_size(e))
            .fold(f64::INFINITY, f64::min)
    }

    /// max h_T / min h_T; exactly 1 for uniform meshes.
    pub fn quasiuniformity(&self) -> f64 {
        self.h_max() / self.h_min()
    }

    /// Element containing x, left-closed: x in [x_e, x_{e+1}) maps to e,
    /// except x = L which maps to the last element.
    pub fn element_of(&self, x: f64) -> Result<usize> {
        let length = self.length();
        if !(0.0..=length).contains(&x) {
            return Err(Error::PointOutOfRange { x, length });
        }
        if x == length {
            return Ok(self.element_count() - 1);
        }
        // binary search for the last node <= x
        let e = match self.nodes.binary_search_by(|n| n.partial_cmp(&x).unwrap()) {
            Ok(j) => j,
            Err(j) => j - 1,
        };
        Ok(e.min(self.element_count() - 1))
    }

    /// Trapezoidal node weights realizing the integral of nodal interpolants:
    /// int I_h\[f\] = sum_j w_j f(x_j); the weights sum to L.
    pub fn node_weights(&self) -> Vec<f64> {
        let n = self.element_count();
        let mut w = vec![0.0; n + 1];
        for e in 0..n {
            let half = 0.5 * self.element_size(e);
            w[e] += half;
            w[e + 1] += half;
        }
        w
    }

    /// Structural equality; cheap pointer check first.
    pub fn same_as(&self, other: &Mesh) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes) || *self.nodes == *other.nodes
    }
}
