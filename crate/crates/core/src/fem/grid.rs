//! Uniform structured grid on [-1, 1]^n with multilinear (Q1) cells.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
    cells_per_side: usize,
}

impl Grid {
    /// `cells_per_side` must be a power of two so that h = 2 / cells is
    /// exact in binary and dyadic refinements nest.
    pub fn new(n: usize, cells_per_side: usize) -> Result<Self> {
        if n == 0 || n > 3 {
            return Err(Error::Parameter(format!("grid dimension {n} unsupported (1..=3)")));
        }
        if cells_per_side < 2 || !cells_per_side.is_power_of_two() {
            return Err(Error::Parameter(format!(
                "cells_per_side must be a power of two >= 2, got {cells_per_side}"
            )));
        }
        Ok(Grid { n, cells_per_side })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 / self.cells_per_side as f64
    }

    #[inline]
    pub fn nodes_per_side(&self) -> usize {
        self.cells_per_side + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_side().pow(self.n as u32)
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_side.pow(self.n as u32)
    }

    pub fn node_index(&self, coords: &[usize]) -> usize {
        let nps = self.nodes_per_side();
        coords.iter().rev().fold(0, |acc, &c| acc * nps + c)
    }

    pub fn node_coords(&self, mut index: usize) -> Vec<usize> {
        let nps = self.nodes_per_side();
        (0..self.n)
            .map(|_| {
                let c = index % nps;
                index /= nps;
                c
            })
            .collect()
    }

    pub fn node_point(&self, index: usize) -> Vec<f64> {
        let h = self.h();
        self.node_coords(index).iter().map(|&c| -1.0 + c as f64 * h).collect()
    }

    pub fn cell_index(&self, coords: &[usize]) -> usize {
        let cps = self.cells_per_side;
        coords.iter().rev().fold(0, |acc, &c| acc * cps + c)
    }

    pub fn cell_coords(&self, mut index: usize) -> Vec<usize> {
        let cps = self.cells_per_side;
        (0..self.n)
            .map(|_| {
                let c = index % cps;
                index /= cps;
                c
            })
            .collect()
    }

    pub fn cell_center(&self, index: usize) -> Vec<f64> {
        let h = self.h();
        self.cell_coords(index)
            .iter()
            .map(|&c| -1.0 + (c as f64 + 0.5) * h)
            .collect()
    }

    /// Low corner (minimum coordinates) of a cell.
    pub fn cell_origin(&self, index: usize) -> Vec<f64> {
        let h = self.h();
        self.cell_coords(index).iter().map(|&c| -1.0 + c as f64 * h).collect()
    }

    /// Node indices of the 2^n corners, ordered by corner bit pattern
    /// (bit d set = high side along axis d).
    pub fn cell_corner_nodes(&self, index: usize) -> Vec<usize> {
        let coords = self.cell_coords(index);
        let corners = 1usize << self.n;
        (0..corners)
            .map(|mask| {
                let corner: Vec<usize> = coords
                    .iter()
                    .enumerate()
                    .map(|(d, &c)| c + ((mask >> d) & 1))
                    .collect();
                self.node_index(&corner)
            })
            .collect()
    }

    pub fn is_boundary_node(&self, index: usize) -> bool {
        let last = self.cells_per_side;
        self.node_coords(index).iter().any(|&c| c == 0 || c == last)
    }

    /// Cell containing x (clamped to the grid at the domain boundary).
    pub fn cell_containing(&self, x: &[f64]) -> Vec<usize> {
        let h = self.h();
        x.iter()
            .map(|&xi| {
                let c = ((xi + 1.0) / h).floor() as isize;
                c.clamp(0, self.cells_per_side as isize - 1) as usize
            })
            .collect()
    }
}
