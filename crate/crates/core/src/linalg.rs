//! Assembly and solution of the Newton systems `(I + lambda K^T H K) d = b`,
//! where `K` is the forward-difference gradient and `H` the cell-wise
//! Hessian of the integrand.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::{CscCholesky, CscSymbolicCholesky};
use nalgebra_sparse::pattern::SparsityPattern;
use nalgebra_sparse::CscMatrix;

use crate::discretize::{Grid, NONE};
use crate::error::{Error, Result};

/// Cell counts above this use preconditioned conjugate gradients.
pub const DIRECT_SOLVE_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolver {
    /// Sparse Cholesky, nested-dissection ordered in 2D.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

impl LinearSolver {
    pub fn for_size(n: usize) -> Self {
        if n <= DIRECT_SOLVE_LIMIT {
            LinearSolver::Direct
        } else {
            LinearSolver::ConjugateGradient
        }
    }
}

enum Factor {
    None,
    Numeric(CscCholesky<f64>),
}

/// Symmetric reordering `P A P^T` handed to the factorization.
struct Reordering {
    /// `order[new] = old`.
    order: Vec<usize>,
    /// Value slot in the permuted matrix of each natural slot.
    targets: Vec<usize>,
    pattern: SparsityPattern,
    values: Vec<f64>,
}

/// Nested dissection of the active cells: cells on a lattice line splitting
/// the longer extent go last. The stencil couples cells at most one lattice
/// step apart on each axis, so the line separates the two halves.
pub fn dissection_order(grid: &Grid) -> Vec<usize> {
    const LEAF: usize = 32;
    fn dissect(grid: &Grid, cells: Vec<usize>, out: &mut Vec<usize>) {
        if cells.len() <= LEAF {
            out.extend(cells);
            return;
        }
        let mut lo = [usize::MAX; 2];
        let mut hi = [0; 2];
        for &c in &cells {
            let ij = grid.lattice_index(c);
            for a in 0..2 {
                lo[a] = lo[a].min(ij[a]);
                hi[a] = hi[a].max(ij[a]);
            }
        }
        let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
        if hi[axis] - lo[axis] < 2 {
            out.extend(cells);
            return;
        }
        let mid = (lo[axis] + hi[axis]) / 2;
        let (mut left, mut right, mut sep) = (Vec::new(), Vec::new(), Vec::new());
        for c in cells {
            let k = grid.lattice_index(c)[axis];
            match k.cmp(&mid) {
                std::cmp::Ordering::Less => left.push(c),
                std::cmp::Ordering::Greater => right.push(c),
                std::cmp::Ordering::Equal => sep.push(c),
            }
        }
        dissect(grid, left, out);
        dissect(grid, right, out);
        out.extend(sep);
    }
    let mut out = Vec::with_capacity(grid.len());
    if grid.dim() == 1 {
        out.extend(0..grid.len());
    } else {
        dissect(grid, (0..grid.len()).collect(), &mut out);
    }
    out
}

/// Sorted column pattern of a symmetric matrix whose entries couple the
/// nodes of each local block.
fn block_pattern(n: usize, blocks: impl Iterator<Item = [usize; 3]>) -> (Vec<usize>, Vec<usize>) {
    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); n];
    for loc in blocks {
        for &p in loc.iter().filter(|p| **p != NONE) {
            for &q in loc.iter().filter(|q| **q != NONE) {
                columns[q].push(p);
            }
        }
    }
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    offsets.push(0);
    for col in &mut columns {
        col.sort_unstable();
        col.dedup();
        indices.extend_from_slice(col);
        offsets.push(indices.len());
    }
    (offsets, indices)
}

fn slot_of(offsets: &[usize], indices: &[usize], row: usize, col: usize) -> usize {
    let range = offsets[col]..offsets[col + 1];
    range.start
        + indices[range]
            .binary_search(&row)
            .expect("entry present in pattern")
}

pub struct NewtonSystem {
    matrix: CscMatrix<f64>,
    /// Per cell, value slots of the local `3 x 3` block on `[c, next_x, next_y]`.
    slots: Vec<[usize; 9]>,
    locals: Vec<[usize; 3]>,
    dim: usize,
    solver: LinearSolver,
    factor: Factor,
    reordering: Option<Reordering>,
}

fn local_nodes(grid: &Grid, c: usize) -> [usize; 3] {
    let m = grid.dim();
    [
        c,
        grid.next(c, 0),
        if m > 1 { grid.next(c, 1) } else { NONE },
    ]
}

impl NewtonSystem {
    pub fn new(grid: &Grid, solver: LinearSolver) -> Self {
        let n = grid.len();
        let locals: Vec<[usize; 3]> = (0..n).map(|c| local_nodes(grid, c)).collect();
        let (offsets, indices) = block_pattern(n, locals.iter().copied());
        let slot = |row: usize, col: usize| slot_of(&offsets, &indices, row, col);
        let slots = locals
            .iter()
            .map(|loc| {
                let mut s = [NONE; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        if loc[a] != NONE && loc[b] != NONE {
                            s[a * 3 + b] = slot(loc[a], loc[b]);
                        }
                    }
                }
                s
            })
            .collect();
        let reordering = (solver == LinearSolver::Direct && grid.dim() == 2).then(|| {
            let order = dissection_order(grid);
            let mut inverse = vec![0; n];
            for (new, &old) in order.iter().enumerate() {
                inverse[old] = new;
            }
            let map = |p: usize| if p == NONE { NONE } else { inverse[p] };
            let (p_offsets, p_indices) =
                block_pattern(n, locals.iter().map(|l| [map(l[0]), map(l[1]), map(l[2])]));
            let mut targets = Vec::with_capacity(indices.len());
            for col in 0..n {
                for &row in &indices[offsets[col]..offsets[col + 1]] {
                    targets.push(slot_of(&p_offsets, &p_indices, inverse[row], inverse[col]));
                }
            }
            let nnz = p_indices.len();
            let pattern = SparsityPattern::try_from_offsets_and_indices(n, n, p_offsets, p_indices)
                .expect("sorted, deduplicated pattern");
            Reordering {
                order,
                targets,
                pattern,
                values: vec![0.0; nnz],
            }
        });
        let nnz = indices.len();
        let pattern = SparsityPattern::try_from_offsets_and_indices(n, n, offsets, indices)
            .expect("sorted, deduplicated pattern");
        let matrix = CscMatrix::try_from_pattern_and_values(pattern, vec![0.0; nnz])
            .expect("values match pattern");
        NewtonSystem {
            matrix,
            slots,
            locals,
            dim: grid.dim(),
            solver,
            factor: Factor::None,
            reordering,
        }
    }

    pub fn solver(&self) -> LinearSolver {
        self.solver
    }

    /// Fills `I + lambda K^T H K`; `hessians` holds one row-major `m x m`
    /// block per cell.
    pub fn assemble(&mut self, lambda: f64, h: f64, hessians: &[f64]) {
        let m = self.dim;
        let s = lambda / (h * h);
        let values = self.matrix.values_mut();
        values.iter_mut().for_each(|v| *v = 0.0);
        for (c, (loc, slots)) in self.locals.iter().zip(&self.slots).enumerate() {
            let hc = &hessians[c * m * m..(c + 1) * m * m];
            let mut local = [0.0; 9];
            local[0] = 1.0;
            for a in 0..m {
                if loc[1 + a] == NONE {
                    continue;
                }
                for b in 0..m {
                    if loc[1 + b] == NONE {
                        continue;
                    }
                    let v = s * hc[a * m + b];
                    local[(1 + a) * 3 + 1 + b] += v;
                    local[(1 + a) * 3] -= v;
                    local[1 + b] -= v;
                    local[0] += v;
                }
            }
            for k in 0..9 {
                if slots[k] != NONE {
                    values[slots[k]] += local[k];
                }
            }
        }
    }

    pub fn matrix(&self) -> &CscMatrix<f64> {
        &self.matrix
    }

    /// `y = A x` on the assembled matrix.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let offsets = self.matrix.col_offsets();
        let rows = self.matrix.row_indices();
        let vals = self.matrix.values();
        for j in 0..x.len() {
            let xj = x[j];
            for k in offsets[j]..offsets[j + 1] {
                y[rows[k]] += vals[k] * xj;
            }
        }
    }

    pub fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self.solver {
            LinearSolver::Direct => self.solve_direct(rhs),
            LinearSolver::ConjugateGradient => self.solve_cg(rhs),
        }
    }

    fn solve_direct(&mut self, rhs: &[f64]) -> Result<Vec<f64>> {
        let singular = || Error::Internal("Newton matrix is not positive definite".into());
        let (pattern, values) = match &mut self.reordering {
            Some(re) => {
                for (&t, &v) in re.targets.iter().zip(self.matrix.values()) {
                    re.values[t] = v;
                }
                (&re.pattern, &re.values[..])
            }
            None => (self.matrix.pattern(), self.matrix.values()),
        };
        let factor = std::mem::replace(&mut self.factor, Factor::None);
        let chol = match factor {
            Factor::Numeric(mut chol) => {
                chol.refactor(values).map_err(|_| singular())?;
                chol
            }
            Factor::None => {
                let sym = CscSymbolicCholesky::factor(pattern.clone());
                CscCholesky::factor_numerical(sym, values).map_err(|_| singular())?
            }
        };
        let b = match &self.reordering {
            Some(re) => DMatrix::from_iterator(rhs.len(), 1, re.order.iter().map(|&o| rhs[o])),
            None => DMatrix::from_column_slice(rhs.len(), 1, rhs),
        };
        let y = chol.solve(&b);
        self.factor = Factor::Numeric(chol);
        let mut x = vec![0.0; rhs.len()];
        match &self.reordering {
            Some(re) => {
                for (new, &old) in re.order.iter().enumerate() {
                    x[old] = y[new];
                }
            }
            None => x.copy_from_slice(y.as_slice()),
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(singular());
        }
        Ok(x)
    }

    fn solve_cg(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let mut diag = vec![0.0; n];
        let offsets = self.matrix.col_offsets();
        let rows = self.matrix.row_indices();
        let vals = self.matrix.values();
        for j in 0..n {
            for k in offsets[j]..offsets[j + 1] {
                if rows[k] == j {
                    diag[j] = vals[k];
                }
            }
        }
        if diag.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Internal("Newton matrix has a nonpositive diagonal".into()));
        }
        conjugate_gradient(|x, y| self.apply(x, y), &diag, rhs, 1e-13, 20 * n.max(50))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned CG from a zero initial guess; stops when
/// `|r| <= rel_tol |b|`.
pub fn conjugate_gradient<A: Fn(&[f64], &mut [f64])>(
    apply: A,
    diag: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Internal("conjugate gradients hit a nonpositive curvature".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;

    fn system(solver: LinearSolver) -> (NewtonSystem, Vec<f64>) {
        let grid = Grid::new(Domain::disc([0.0, 0.0], 1.0).unwrap(), 10).unwrap();
        let n = grid.len();
        let mut hess = Vec::with_capacity(4 * n);
        for c in 0..n {
            let t = c as f64 * 0.37;
            let (a, b) = (1.0 + t.sin().abs(), 0.3 * t.cos());
            hess.extend_from_slice(&[a, b, b, 2.0]);
        }
        let mut sys = NewtonSystem::new(&grid, solver);
        sys.assemble(0.2, grid.spacing(), &hess);
        let rhs: Vec<f64> = (0..n).map(|c| (c as f64).cos()).collect();
        (sys, rhs)
    }

    #[test]
    fn direct_and_cg_agree() {
        let (mut d, rhs) = system(LinearSolver::Direct);
        let (mut c, _) = system(LinearSolver::ConjugateGradient);
        let xd = d.solve(&rhs).unwrap();
        let xc = c.solve(&rhs).unwrap();
        let err: f64 = xd.iter().zip(&xc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        let mut ax = vec![0.0; rhs.len()];
        d.apply(&xd, &mut ax);
        let res: f64 = ax.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(res < 1e-10);
        // refactor path
        let x2 = d.solve(&rhs).unwrap();
        assert_eq!(x2, xd);
    }

    #[test]
    fn dissection_order_is_a_permutation() {
        let grid = Grid::new(Domain::disc([0.0, 0.0], 1.0).unwrap(), 40).unwrap();
        let mut order = dissection_order(&grid);
        assert_eq!(order.len(), grid.len());
        order.sort_unstable();
        assert!(order.iter().enumerate().all(|(i, &c)| i == c));
    }

    #[test]
    fn matrix_is_symmetric() {
        let (sys, _) = system(LinearSolver::Direct);
        let dense: DMatrix<f64> = DMatrix::from(sys.matrix());
        assert!((dense.clone() - dense.transpose()).amax() < 1e-14);
    }
}
