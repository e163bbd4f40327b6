use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};

/// Marker for a missing neighbour.
pub const NONE: usize = usize::MAX;

/// Axis-aligned cell grid masked to a domain: a cell is active when its
/// center lies in the closed domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: Domain,
    dim: usize,
    h: f64,
    origin: Point,
    nx: usize,
    ny: usize,
    /// Lattice index `j * nx + i` to active index, or [`NONE`].
    lattice: Vec<usize>,
    cells: Vec<[usize; 2]>,
    next: Vec<[usize; 2]>,
    prev: Vec<[usize; 2]>,
}

impl Grid {
    /// Grid with `n` cells along the longest bounding-box axis.
    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("grid resolution must be positive"));
        }
        let dim = domain.dim();
        let (lo, hi) = domain.bbox();
        let ext = [hi[0] - lo[0], hi[1] - lo[1]];
        let h = ext[0].max(ext[1]) / n as f64;
        let count = |e: f64| ((e / h) - 1e-9).ceil().max(1.0) as usize;
        let nx = count(ext[0]);
        let ny = if dim == 1 { 1 } else { count(ext[1]) };
        // center the lattice on the bounding box
        let origin = [
            lo[0] + 0.5 * (ext[0] - nx as f64 * h),
            if dim == 1 { 0.0 } else { lo[1] + 0.5 * (ext[1] - ny as f64 * h) },
        ];
        let mut lattice = vec![NONE; nx * ny];
        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let c = [origin[0] + (i as f64 + 0.5) * h, origin[1] + (j as f64 + 0.5) * h];
                let c = if dim == 1 { [c[0], 0.0] } else { c };
                if domain.contains(c) {
                    lattice[j * nx + i] = cells.len();
                    cells.push([i, j]);
                }
            }
        }
        if cells.is_empty() {
            return Err(Error::input("grid has no active cells; increase the resolution"));
        }
        let at = |i: isize, j: isize| -> usize {
            if i < 0 || j < 0 || i as usize >= nx || j as usize >= ny {
                NONE
            } else {
                lattice[j as usize * nx + i as usize]
            }
        };
        let mut next = Vec::with_capacity(cells.len());
        let mut prev = Vec::with_capacity(cells.len());
        for &[i, j] in &cells {
            let (i, j) = (i as isize, j as isize);
            next.push([at(i + 1, j), at(i, j + 1)]);
            prev.push([at(i - 1, j), at(i, j - 1)]);
        }
        let grid = Grid {
            domain,
            dim,
            h,
            origin,
            nx,
            ny,
            lattice,
            cells,
            next,
            prev,
        };
        if !grid.is_connected() {
            return Err(Error::input("active cells are not edge-connected at this resolution"));
        }
        Ok(grid)
    }

    fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(c) = queue.pop_front() {
            for nb in self.next[c].iter().chain(self.prev[c].iter()) {
                if *nb != NONE && !seen[*nb] {
                    seen[*nb] = true;
                    count += 1;
                    queue.push_back(*nb);
                }
            }
        }
        count == n
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Number of active cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `h^m`.
    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Total measure of the active cells.
    pub fn active_measure(&self) -> f64 {
        self.len() as f64 * self.cell_measure()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn lattice_index(&self, c: usize) -> [usize; 2] {
        self.cells[c]
    }

    /// Active cell at lattice position, if any.
    pub fn at(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j >= self.ny {
            return None;
        }
        let c = self.lattice[j * self.nx + i];
        (c != NONE).then_some(c)
    }

    pub fn center(&self, c: usize) -> Point {
        let [i, j] = self.cells[c];
        let x = self.origin[0] + (i as f64 + 0.5) * self.h;
        if self.dim == 1 {
            [x, 0.0]
        } else {
            [x, self.origin[1] + (j as f64 + 0.5) * self.h]
        }
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|c| self.center(c)).collect()
    }

    /// Forward neighbour along `axis`, or [`NONE`].
    pub fn next(&self, c: usize, axis: usize) -> usize {
        self.next[c][axis]
    }

    /// Backward neighbour along `axis`, or [`NONE`].
    pub fn prev(&self, c: usize, axis: usize) -> usize {
        self.prev[c][axis]
    }

    /// Active cell containing `p` (nearest lattice cell), if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        let fi = ((p[0] - self.origin[0]) / self.h).floor();
        let fj = if self.dim == 1 {
            0.0
        } else {
            ((p[1] - self.origin[1]) / self.h).floor()
        };
        if fi < 0.0 || fj < 0.0 {
            return None;
        }
        self.at(fi as usize, fj as usize)
    }

    /// Number of directed grid edges between active cells.
    pub fn edge_count(&self) -> usize {
        self.next
            .iter()
            .map(|n| n[..self.dim].iter().filter(|x| **x != NONE).count())
            .sum()
    }

    /// Number of cell faces on the active-set boundary, times `h^{m-1}`.
    pub fn boundary_measure(&self) -> f64 {
        let faces: usize = (0..self.len())
            .map(|c| {
                (0..self.dim)
                    .map(|d| (self.next[c][d] == NONE) as usize + (self.prev[c][d] == NONE) as usize)
                    .sum::<usize>()
            })
            .sum();
        faces as f64 * self.h.powi(self.dim as i32 - 1)
    }
}
