//! One-dimensional simplicial partitions.
//!
//! A [`Mesh1D`] stores the node coordinates of a partition of `(a, b)` and the
//! list of interior faces (interior nodes). Boundary nodes are not faces: the
//! no-flux boundary condition is natural in the weak form and contributes no
//! face terms. Faces are points, so every face "integral" is a point
//! evaluation at the face coordinate.

use crate::error::{invalid, Result};

/// An interior face of the partition, shared by a left and a right element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorFace {
    /// Index of the node carrying the face.
    pub node: usize,
    /// Element to the left of the face (`K-`).
    pub left: usize,
    /// Element to the right of the face (`K+`).
    pub right: usize,
    /// Face coordinate.
    pub x: f64,
    /// Face mesh size, the smaller of the two adjacent diameters.
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    faces: Vec<InteriorFace>,
}

impl Mesh1D {
    /// Equispaced partition of `(a, b)` into `n_el` intervals.
    pub fn uniform(n_el: usize, a: f64, b: f64) -> Result<Self> {
        if n_el == 0 {
            return Err(invalid("uniform mesh needs at least one element"));
        }
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(invalid(format!("uniform mesh needs a < b, got ({a}, {b})")));
        }
        let h = (b - a) / n_el as f64;
        let mut nodes: Vec<f64> = (0..=n_el).map(|i| a + i as f64 * h).collect();
        nodes[n_el] = b;
        Self::from_nodes(nodes)
    }

    /// Partition with the given (strictly increasing) node coordinates.
    pub fn graded(nodes: &[f64]) -> Result<Self> {
        Self::from_nodes(nodes.to_vec())
    }

    fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(invalid("a mesh needs at least two nodes"));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return Err(invalid("mesh nodes must be finite"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("mesh nodes must be strictly increasing"));
        }
        let faces = (1..nodes.len() - 1)
            .map(|i| InteriorFace {
                node: i,
                left: i - 1,
                right: i,
                x: nodes[i],
                h: (nodes[i] - nodes[i - 1]).min(nodes[i + 1] - nodes[i]),
            })
            .collect();
        Ok(Self { nodes, faces })
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn faces(&self) -> &[InteriorFace] {
        &self.faces
    }

    /// Interior face carried by `node`, if that node is interior.
    pub fn face_at_node(&self, node: usize) -> Option<&InteriorFace> {
        if node == 0 || node + 1 >= self.nodes.len() {
            None
        } else {
            Some(&self.faces[node - 1])
        }
    }

    /// Left endpoint of element `e`.
    pub fn left(&self, e: usize) -> f64 {
        self.nodes[e]
    }

    /// Diameter `h_K` of element `e`.
    pub fn diameter(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.diameter(e)).fold(0.0, f64::max)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    /// Domain measure `|Ω| = b - a`.
    pub fn measure(&self) -> f64 {
        let (a, b) = self.bounds();
        b - a
    }

    /// Physical coordinate of reference point `xi ∈ [0, 1]` on element `e`.
    pub fn to_physical(&self, e: usize, xi: f64) -> f64 {
        self.nodes[e] + xi * self.diameter(e)
    }

    /// Element containing `x` and the reference coordinate within it.
    ///
    /// Points on an interior node are attributed to the element on the right;
    /// the right domain end belongs to the last element. Points outside the
    /// closed domain yield `None`.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let (a, b) = self.bounds();
        if !(a..=b).contains(&x) {
            return None;
        }
        let n = self.n_elements();
        let e = match self.nodes.binary_search_by(|node| node.total_cmp(&x)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        };
        let xi = ((x - self.nodes[e]) / self.diameter(e)).clamp(0.0, 1.0);
        Some((e, xi))
    }
}
