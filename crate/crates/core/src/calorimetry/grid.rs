use serde::{Deserialize, Serialize};

use crate::economy::{Holdings, MAX_GOODS};
use crate::error::{Error, Result};

/// Rectangular grid of macro-states.
///
/// Axis 0 is money, axes `1..` are the goods. Nodes are numbered row-major,
/// last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroGrid {
    pub axes: Vec<Vec<f64>>,
    /// Index along each axis of the node whose entropy is pinned.
    #[serde(default)]
    pub reference_node: Vec<usize>,
    #[serde(default)]
    pub reference_entropy: f64,
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// A grid edge between nodes that differ by one step along `axis`, oriented
/// from the smaller to the larger axis value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridEdge {
    pub from: usize,
    pub to: usize,
    pub axis: usize,
}

impl MacroGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        let reference_node = vec![0; axes.len()];
        let g = MacroGrid {
            axes,
            reference_node,
            reference_entropy: 0.0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.len() < 2 || self.axes.len() > 1 + MAX_GOODS {
            return Err(Error::Grid(format!(
                "need a money axis and 1..={MAX_GOODS} goods axes, got {} axes",
                self.axes.len()
            )));
        }
        for (k, axis) in self.axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::Grid(format!("axis {k} is empty")));
            }
            if axis.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Grid(format!("axis {k} has non-positive values")));
            }
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Grid(format!("axis {k} is not strictly increasing")));
            }
        }
        let reference = self.reference();
        if reference.len() != self.axes.len() || reference.iter().zip(&self.axes).any(|(i, a)| *i >= a.len()) {
            return Err(Error::Grid(format!(
                "reference node {:?} is not on the grid",
                self.reference_node
            )));
        }
        if !self.reference_entropy.is_finite() {
            return Err(Error::Grid("reference entropy must be finite".into()));
        }
        Ok(())
    }

    /// Reference index tuple; an empty list means the first node.
    fn reference(&self) -> Vec<usize> {
        if self.reference_node.is_empty() {
            vec![0; self.axes.len()]
        } else {
            self.reference_node.clone()
        }
    }

    pub fn n_goods(&self) -> usize {
        self.axes.len() - 1
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn index_of(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (c, axis)| acc * axis.len() + c)
    }

    pub fn coords_of(&self, mut node: usize) -> Vec<usize> {
        let mut coords = vec![0; self.axes.len()];
        for (k, axis) in self.axes.iter().enumerate().rev() {
            coords[k] = node % axis.len();
            node /= axis.len();
        }
        coords
    }

    pub fn reference_index(&self) -> usize {
        self.index_of(&self.reference())
    }

    /// Totals `(M, G1[, G2])` at a node.
    pub fn macro_state(&self, node: usize) -> Holdings {
        let coords = self.coords_of(node);
        let mut h = Holdings::zero();
        for (k, (&c, axis)) in coords.iter().zip(&self.axes).enumerate() {
            h.set(k, axis[c]);
        }
        h
    }

    /// Node one step along `axis` from `node`, if any (`up` picks the direction).
    pub fn neighbour(&self, node: usize, axis: usize, up: bool) -> Option<usize> {
        let mut c = self.coords_of(node);
        if up {
            if c[axis] + 1 >= self.axes[axis].len() {
                return None;
            }
            c[axis] += 1;
        } else {
            if c[axis] == 0 {
                return None;
            }
            c[axis] -= 1;
        }
        Some(self.index_of(&c))
    }

    pub fn edges(&self) -> Vec<GridEdge> {
        let mut out = Vec::new();
        for node in 0..self.node_count() {
            for axis in 0..self.axes.len() {
                if let Some(to) = self.neighbour(node, axis, true) {
                    out.push(GridEdge { from: node, to, axis });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = MacroGrid::new(vec![vec![1000.0], linspace(500.0, 2000.0, 4), linspace(1.0, 3.0, 3)]).unwrap();
        assert_eq!(g.node_count(), 12);
        for n in 0..12 {
            assert_eq!(g.index_of(&g.coords_of(n)), n);
        }
        let h = g.macro_state(g.index_of(&[0, 2, 1]));
        assert_eq!((h.money, h.goods), (1000.0, [1500.0, 2.0]));
        // 4x3 lattice: 3*3 + 4*2 edges
        assert_eq!(g.edges().len(), 17);
    }

    #[test]
    fn single_node_has_no_edges() {
        let g = MacroGrid::new(vec![vec![1.0], vec![1.0]]).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn validation() {
        assert!(MacroGrid::new(vec![vec![1.0], vec![2.0, 1.0]]).is_err());
        assert!(MacroGrid::new(vec![vec![1.0], vec![0.0, 1.0]]).is_err());
        let mut g = MacroGrid::new(vec![vec![1.0], vec![1.0, 2.0]]).unwrap();
        g.reference_node = vec![0, 2];
        assert!(g.validate().is_err());
        assert_eq!(linspace(500.0, 2000.0, 8)[7], 2000.0);
    }
}
