//! One-dimensional BV functions made of smooth pieces and explicit jumps,
//! the relaxed energy priced by the recession function, and jump extraction
//! from grid minimizers.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretize::{Grid, GridField};
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::integrand::{ConvexWeight, Density, Integrand};
use crate::quadrature::simpson;
use crate::solver::{continuation_solve, ContinuationSchedule};

/// Heights below this are treated as continuity.
const JUMP_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    /// `sum_k coeffs[k] (x - left)^k` on the piece `[left, right]`.
    Polynomial { coeffs: Vec<f64> },
    /// Linear interpolation of `values` at `start + j * spacing`, extended
    /// by constants outside the node range.
    Sampled {
        start: f64,
        spacing: f64,
        values: Vec<f64>,
    },
}

impl Piece {
    fn eval(&self, left: f64, x: f64) -> f64 {
        match self {
            Piece::Polynomial { coeffs } => {
                let t = x - left;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
            }
            Piece::Sampled {
                start,
                spacing,
                values,
            } => {
                let s = (x - start) / spacing;
                if s <= 0.0 {
                    return values[0];
                }
                let last = values.len() - 1;
                if s >= last as f64 {
                    return values[last];
                }
                let j = (s.floor() as usize).min(last - 1);
                let t = s - j as f64;
                values[j] * (1.0 - t) + values[j + 1] * t
            }
        }
    }

    fn derivative(&self, left: f64, x: f64) -> f64 {
        match self {
            Piece::Polynomial { coeffs } => {
                let t = x - left;
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, c)| acc * t + k as f64 * c)
            }
            Piece::Sampled {
                start,
                spacing,
                values,
            } => {
                let s = (x - start) / spacing;
                let last = values.len() - 1;
                if s < 0.0 || s > last as f64 || last == 0 {
                    return 0.0;
                }
                let j = (s.floor() as usize).min(last - 1);
                (values[j + 1] - values[j]) / spacing
            }
        }
    }

    /// Interior nodes where the piece is not smooth.
    fn kinks(&self, left: f64, right: f64) -> Vec<f64> {
        match self {
            Piece::Polynomial { .. } => Vec::new(),
            Piece::Sampled {
                start,
                spacing,
                values,
            } => (0..values.len())
                .map(|j| start + j as f64 * spacing)
                .filter(|x| *x > left && *x < right)
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Piece::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::input("polynomial piece needs finite coefficients"));
                }
            }
            Piece::Sampled {
                start,
                spacing,
                values,
            } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::input("sampled piece needs finite values"));
                }
                if !(start.is_finite() && *spacing > 0.0 && spacing.is_finite()) {
                    return Err(Error::input("sampled piece needs a positive spacing"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub location: f64,
    pub height: f64,
}

/// A function on `(a, b)` that is smooth on each piece between consecutive
/// breakpoints; jumps are derived from the one-sided limits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BVFunction1D {
    a: f64,
    b: f64,
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
    jumps: Vec<Jump>,
}

#[derive(Deserialize)]
struct RawBV {
    a: f64,
    b: f64,
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

impl<'de> Deserialize<'de> for BVFunction1D {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawBV::deserialize(d)?;
        BVFunction1D::new(raw.a, raw.b, raw.breakpoints, raw.pieces).map_err(serde::de::Error::custom)
    }
}

impl BVFunction1D {
    pub fn new(a: f64, b: f64, breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::input("BV function needs a < b"));
        }
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::input("need exactly one more piece than breakpoints"));
        }
        let mut prev = a;
        for x in &breakpoints {
            if !(*x > prev && *x < b) {
                return Err(Error::input("breakpoints must be increasing inside (a, b)"));
            }
            prev = *x;
        }
        for p in &pieces {
            p.validate()?;
        }
        let mut w = BVFunction1D {
            a,
            b,
            breakpoints,
            pieces,
            jumps: Vec::new(),
        };
        w.jumps = (0..w.breakpoints.len())
            .filter_map(|k| {
                let x = w.breakpoints[k];
                let left = w.pieces[k].eval(w.left(k), x);
                let right = w.pieces[k + 1].eval(w.left(k + 1), x);
                let height = right - left;
                (height.abs() > JUMP_EPS).then_some(Jump { location: x, height })
            })
            .collect();
        Ok(w)
    }

    pub fn piecewise_constant(a: f64, b: f64, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let pieces = values
            .into_iter()
            .map(|v| Piece::Polynomial { coeffs: vec![v] })
            .collect();
        BVFunction1D::new(a, b, breakpoints, pieces)
    }

    /// `low` on `(a, location)`, `high` on `(location, b)`.
    pub fn step(a: f64, b: f64, location: f64, low: f64, high: f64) -> Result<Self> {
        BVFunction1D::piecewise_constant(a, b, vec![location], vec![low, high])
    }

    pub fn polynomial(a: f64, b: f64, coeffs: Vec<f64>) -> Result<Self> {
        BVFunction1D::new(a, b, Vec::new(), vec![Piece::Polynomial { coeffs }])
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    fn left(&self, k: usize) -> f64 {
        if k == 0 {
            self.a
        } else {
            self.breakpoints[k - 1]
        }
    }

    fn right(&self, k: usize) -> f64 {
        if k == self.breakpoints.len() {
            self.b
        } else {
            self.breakpoints[k]
        }
    }

    fn piece_index(&self, x: f64) -> usize {
        self.breakpoints.partition_point(|bp| *bp <= x)
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.piece_index(x);
        self.pieces[k].eval(self.left(k), x)
    }

    /// Density of the absolutely continuous part of `w'`.
    pub fn derivative(&self, x: f64) -> f64 {
        let k = self.piece_index(x);
        self.pieces[k].derivative(self.left(k), x)
    }

    /// Nodes splitting `[a, b]` into intervals where the function is smooth.
    fn natural_nodes(&self) -> Vec<f64> {
        let mut nodes = vec![self.a, self.b];
        nodes.extend_from_slice(&self.breakpoints);
        for k in 0..self.pieces.len() {
            nodes.extend(self.pieces[k].kinks(self.left(k), self.right(k)));
        }
        nodes
    }

    /// Integrates `g(x, piece_k)` over every smooth interval of both functions.
    fn integrate_smooth<F: FnMut(f64, f64, f64, f64) -> f64>(
        &self,
        other: Option<&BVFunction1D>,
        mut g: F,
    ) -> f64 {
        let mut nodes = self.natural_nodes();
        if let Some(o) = other {
            nodes.extend(o.natural_nodes());
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (self.b - self.a));
        let len = self.b - self.a;
        let mut total = 0.0;
        for win in nodes.windows(2) {
            let (l, r) = (win[0], win[1]);
            let mid = 0.5 * (l + r);
            let k = self.piece_index(mid);
            let (lk, pk) = (self.left(k), &self.pieces[k]);
            let other_piece = other.map(|o| {
                let j = o.piece_index(mid);
                (o.left(j), &o.pieces[j])
            });
            let panels = (((r - l) / len * 256.0).ceil() as usize).max(4);
            total += simpson(l, r, panels, |x| {
                let (ov, od) = match other_piece {
                    Some((lj, pj)) => (pj.eval(lj, x), pj.derivative(lj, x)),
                    None => (0.0, 0.0),
                };
                g(pk.eval(lk, x), pk.derivative(lk, x), ov, od)
            });
        }
        total
    }

    /// `int |w'| + sum |heights|`.
    pub fn total_variation(&self) -> f64 {
        self.integrate_smooth(None, |_, d, _, _| d.abs())
            + self.jumps.iter().map(|j| j.height.abs()).sum::<f64>()
    }

    /// Samples at `n` uniformly spaced points including both ends.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let x = self.a + (self.b - self.a) * i as f64 / (n - 1) as f64;
                (x, self.eval(x))
            })
            .collect()
    }

    /// CSV with header `x,value`.
    pub fn write_csv<W: Write>(&self, n: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "value"])?;
        for (x, v) in self.sample(n) {
            w.write_record([format!("{x}"), format!("{v}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("BV function: {e}")))
    }

    /// Cell-center samples on a grid over the same interval.
    pub fn to_grid_field(&self, grid: &Arc<Grid>) -> Result<GridField> {
        let (a, b) = match grid.domain() {
            Domain::Interval { a, b } => (*a, *b),
            _ => return Err(Error::input("BV functions live on intervals")),
        };
        if (a - self.a).abs() > 1e-12 || (b - self.b).abs() > 1e-12 {
            return Err(Error::input("grid interval differs from the BV interval"));
        }
        GridField::from_fn(grid, |p| self.eval(p[0]))
    }

    /// Splits a 1D grid field into jumps and a piecewise linear remainder.
    ///
    /// A cell difference is a jump when it exceeds `10 h max(m, 1)`, where
    /// `m` is the median gradient magnitude over the surrounding 9 cells.
    pub fn from_grid_field(u: &GridField) -> Result<Self> {
        let grid = u.grid();
        let (a, b) = match grid.domain() {
            Domain::Interval { a, b } => (*a, *b),
            _ => return Err(Error::input("jump extraction needs a 1D interval grid")),
        };
        let h = grid.spacing();
        let v = u.values();
        let n = v.len();
        let grads: Vec<f64> = v.windows(2).map(|w| ((w[1] - w[0]) / h).abs()).collect();
        let mut cuts = Vec::new();
        for i in 0..grads.len() {
            let lo = i.saturating_sub(4);
            let hi = (i + 5).min(grads.len());
            let mut window: Vec<f64> = grads[lo..hi].to_vec();
            window.sort_by(f64::total_cmp);
            let median = window[window.len() / 2];
            if grads[i] * h > 10.0 * h * median.max(1.0) {
                cuts.push(i);
            }
        }
        let mut breakpoints = Vec::with_capacity(cuts.len());
        let mut pieces = Vec::with_capacity(cuts.len() + 1);
        let mut first = 0;
        for &i in cuts.iter().chain(std::iter::once(&(n - 1))) {
            pieces.push(Piece::Sampled {
                start: grid.center(first)[0],
                spacing: h,
                values: v[first..=i].to_vec(),
            });
            if i + 1 < n {
                breakpoints.push(0.5 * (grid.center(i)[0] + grid.center(i + 1)[0]));
            }
            first = i + 1;
        }
        BVFunction1D::new(a, b, breakpoints, pieces)
    }
}

fn check_1d(phi: &Integrand) -> Result<()> {
    if phi.dim() == 1 {
        Ok(())
    } else {
        Err(Error::input("BV tools need a one-dimensional integrand"))
    }
}

/// `sum_jumps Phi^inf(sign h) |h|`.
pub fn singular_mass(w: &BVFunction1D, phi: &Integrand) -> Result<f64> {
    check_1d(phi)?;
    let mut total = 0.0;
    for j in w.jumps() {
        let dir = if j.height > 0.0 { 1.0 } else { -1.0 };
        total += phi.recession(&[dir])? * j.height.abs();
    }
    Ok(total)
}

/// `lambda [int Phi(w') + sum Phi^inf(sign h)|h|] + 1/2 int (w - f)^2`.
pub fn relaxed_energy(w: &BVFunction1D, f: &BVFunction1D, phi: &Integrand, lambda: f64) -> Result<f64> {
    check_1d(phi)?;
    if !(lambda > 0.0) {
        return Err(Error::input("lambda must be positive"));
    }
    let (wa, wb) = w.interval();
    let (fa, fb) = f.interval();
    if (wa - fa).abs() > 1e-12 || (wb - fb).abs() > 1e-12 {
        return Err(Error::input("functions live on different intervals"));
    }
    let ac = w.integrate_smooth(Some(f), |_, d, _, _| phi.value(&[d]));
    let fid = w.integrate_smooth(Some(f), |wv, _, fv, _| (wv - fv).powi(2));
    Ok(lambda * (ac + singular_mass(w, phi)?) + 0.5 * fid)
}

/// Gradient part `int Phi(w') + singular mass` of the relaxed functional.
pub fn relaxed_gradient_term(w: &BVFunction1D, phi: &Integrand) -> Result<f64> {
    check_1d(phi)?;
    Ok(w.integrate_smooth(None, |_, d, _, _| phi.value(&[d])) + singular_mass(w, phi)?)
}

/// `int Psi(Phi(w')) + slope(Psi) * singular mass`: the relaxed weighted
/// gradient integral, finite only when `Psi` has linear growth or `w` has no jumps.
pub fn relaxed_weighted_gradient_term(w: &BVFunction1D, phi: &Integrand, psi: &ConvexWeight) -> Result<f64> {
    check_1d(phi)?;
    let ac = w.integrate_smooth(None, |_, d, _, _| psi.eval(phi.value(&[d])));
    let sing = singular_mass(w, phi)?;
    if sing == 0.0 {
        return Ok(ac);
    }
    let slope = psi.recession_slope();
    if slope.is_finite() {
        Ok(ac + slope * sing)
    } else {
        Err(Error::Unsupported(format!(
            "weight {psi} is superlinear, so the jump part is infinite"
        )))
    }
}

/// Approximate relaxed minimizer: continuation on an `n`-cell sampling of
/// `f`, then jump extraction.
pub fn minimize_bv_1d(f: &BVFunction1D, phi: &Integrand, lambda: f64, n: usize) -> Result<BVFunction1D> {
    let (a, b) = f.interval();
    let schedule = ContinuationSchedule::default_for_spacing((b - a) / n as f64);
    minimize_bv_1d_with(f, phi, lambda, n, &schedule)
}

pub fn minimize_bv_1d_with(
    f: &BVFunction1D,
    phi: &Integrand,
    lambda: f64,
    n: usize,
    schedule: &ContinuationSchedule,
) -> Result<BVFunction1D> {
    check_1d(phi)?;
    if n < 64 {
        return Err(Error::input("minimize_bv_1d needs at least 64 cells"));
    }
    let (a, b) = f.interval();
    let grid = Arc::new(Grid::new(Domain::interval(a, b)?, n)?);
    let samples = f.to_grid_field(&grid)?;
    let reports = continuation_solve(&samples, phi, lambda, schedule)?;
    let last = reports.last().expect("schedule has at least one stage");
    BVFunction1D::from_grid_field(&last.solution)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relaxed_energy_of_unit_step() {
        let w = BVFunction1D::step(0.0, 1.0, 0.5, 0.0, 1.0).unwrap();
        let phi = Integrand::euclidean(1).unwrap();
        assert!((relaxed_energy(&w, &w, &phi, 1.0).unwrap() - 1.0).abs() < 1e-14);
        let zero = BVFunction1D::polynomial(0.0, 1.0, vec![0.0]).unwrap();
        assert_eq!(relaxed_energy(&zero, &zero, &phi, 0.3).unwrap(), 0.0);
        let other = BVFunction1D::polynomial(0.0, 2.0, vec![0.0]).unwrap();
        assert!(relaxed_energy(&zero, &other, &phi, 0.3).is_err());
    }

    #[test]
    fn singular_mass_examples() {
        let phi = Integrand::euclidean(1).unwrap();
        let smooth = BVFunction1D::polynomial(0.0, 1.0, vec![0.0, 1.0, -2.0]).unwrap();
        assert_eq!(singular_mass(&smooth, &phi).unwrap(), 0.0);
        let w = BVFunction1D::piecewise_constant(0.0, 1.0, vec![1.0 / 3.0, 2.0 / 3.0], vec![0.0, 1.0, -1.0])
            .unwrap();
        assert_eq!(singular_mass(&w, &phi).unwrap(), 3.0);
        let asym = Integrand::asymmetric(1.0, 2.0).unwrap();
        let w = BVFunction1D::piecewise_constant(0.0, 1.0, vec![0.25, 0.75], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(singular_mass(&w, &asym).unwrap(), 3.0);
    }

    #[test]
    fn continuous_breakpoints_are_not_jumps() {
        let w = BVFunction1D::new(
            0.0,
            1.0,
            vec![0.5],
            vec![
                Piece::Polynomial { coeffs: vec![0.0, 1.0] },
                Piece::Polynomial { coeffs: vec![0.5, -1.0] },
            ],
        )
        .unwrap();
        assert!(w.jumps().is_empty());
        assert!((w.total_variation() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let w = BVFunction1D::new(
            -1.0,
            2.0,
            vec![0.0, 1.0],
            vec![
                Piece::Polynomial { coeffs: vec![1.0, 0.5] },
                Piece::Sampled {
                    start: 0.0,
                    spacing: 0.25,
                    values: vec![0.0, 1.0, 0.5, 0.25, 3.0],
                },
                Piece::Polynomial { coeffs: vec![-2.0] },
            ],
        )
        .unwrap();
        let back = BVFunction1D::from_json(&w.to_json()).unwrap();
        assert_eq!(back, w);
        assert_eq!(w.jumps().len(), 2);
    }

    #[test]
    fn smooth_energy_matches_grid_energy() {
        let phi = Integrand::euclidean(1).unwrap();
        let w = BVFunction1D::polynomial(0.0, 1.0, vec![0.0, 0.0, 1.0]).unwrap();
        let f = BVFunction1D::polynomial(0.0, 1.0, vec![0.2]).unwrap();
        let exact = relaxed_energy(&w, &f, &phi, 0.5).unwrap();
        let mut last = f64::INFINITY;
        for n in [64, 128, 256] {
            let grid = Arc::new(Grid::new(Domain::interval(0.0, 1.0).unwrap(), n).unwrap());
            let e = crate::discretize::energy(
                &w.to_grid_field(&grid).unwrap(),
                &f.to_grid_field(&grid).unwrap(),
                &phi,
                0.5,
            )
            .unwrap();
            let err = (e - exact).abs();
            assert!(err <= 2.0 / n as f64, "n={n} err={err}");
            assert!(err < last);
            last = err;
        }
    }
}
