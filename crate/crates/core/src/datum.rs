//! Named analytic data profiles, e.g. `step(0.5)`, `bump`, `plane(0,1,0.5)`,
//! `rough(7)` or the BV literal `piecewise(v0, x1, v1, x2, v2)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bvtools::BVFunction1D;
use crate::discretize::{Grid, GridField};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::syntax::{parse_call, Call};

#[derive(Debug, Clone, PartialEq)]
pub enum Datum {
    Constant(f64),
    /// `low` for `x < location`, `high` otherwise.
    Step { location: f64, low: f64, high: f64 },
    /// Smooth bump `amplitude * exp(1 - 1/(1 - r^2/R^2))`; center and radius
    /// default to the domain centroid and a third of its diameter.
    Bump {
        center: Option<Point>,
        radius: Option<f64>,
        amplitude: f64,
    },
    /// `c0 + c1 x + c2 y`.
    Plane([f64; 3]),
    /// `sin(k pi x)`.
    Sine(f64),
    /// Seeded `W^{1,1}` profile: square-root cusps plus a Fourier tail.
    Rough(u64),
    /// 1D piecewise constant: `values[0]` up to `breaks[0]`, and so on.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
}

struct RoughTerms {
    cusps: Vec<(Point, f64)>,
    modes: Vec<([f64; 2], f64, f64)>,
}

fn rough_terms(seed: u64) -> RoughTerms {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cusps = (0..3)
        .map(|_| {
            let c = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
            (c, rng.random_range(-0.6..0.6))
        })
        .collect();
    let modes = (1..=8)
        .map(|k| {
            let k = k as f64;
            let dir = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            (
                [k * PI * dir[0], k * PI * dir[1]],
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(-1.0..1.0) / (k * k),
            )
        })
        .collect();
    RoughTerms { cusps, modes }
}

impl Datum {
    pub fn parse(text: &str) -> Result<Self> {
        let Call { name, args } = parse_call(text)?;
        let d = match (name.as_str(), args.as_slice()) {
            ("constant", [c]) => Datum::Constant(*c),
            ("step", []) => Datum::Step {
                location: 0.5,
                low: 0.0,
                high: 1.0,
            },
            ("step", [x]) => Datum::Step {
                location: *x,
                low: 0.0,
                high: 1.0,
            },
            ("step", [x, lo, hi]) => Datum::Step {
                location: *x,
                low: *lo,
                high: *hi,
            },
            ("bump", []) => Datum::Bump {
                center: None,
                radius: None,
                amplitude: 1.0,
            },
            ("bump", [a]) => Datum::Bump {
                center: None,
                radius: None,
                amplitude: *a,
            },
            ("bump", [cx, cy, r, a]) => Datum::Bump {
                center: Some([*cx, *cy]),
                radius: Some(*r),
                amplitude: *a,
            },
            ("plane", []) => Datum::Plane([0.0, 1.0, 0.5]),
            ("plane", [c0, c1, c2]) => Datum::Plane([*c0, *c1, *c2]),
            ("sine", []) => Datum::Sine(2.0),
            ("sine", [k]) => Datum::Sine(*k),
            ("rough", []) => Datum::Rough(0),
            ("rough", [s]) if *s >= 0.0 && s.fract() == 0.0 => Datum::Rough(*s as u64),
            ("piecewise", a) if a.len() % 2 == 1 => {
                let values = a.iter().step_by(2).copied().collect();
                let breaks: Vec<f64> = a.iter().skip(1).step_by(2).copied().collect();
                if breaks.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::input("piecewise breaks must increase"));
                }
                Datum::Piecewise { breaks, values }
            }
            _ => return Err(Error::input(format!("unknown datum `{text}`"))),
        };
        if let Datum::Bump { radius: Some(r), .. } = d {
            if !(r > 0.0) {
                return Err(Error::input("bump radius must be positive"));
            }
        }
        Ok(d)
    }

    pub fn spec_string(&self) -> String {
        match self {
            Datum::Constant(c) => format!("constant({c})"),
            Datum::Step { location, low, high } => format!("step({location},{low},{high})"),
            Datum::Bump {
                center: Some(c),
                radius: Some(r),
                amplitude,
            } => format!("bump({},{},{r},{amplitude})", c[0], c[1]),
            Datum::Bump { amplitude, .. } => format!("bump({amplitude})"),
            Datum::Plane(c) => format!("plane({},{},{})", c[0], c[1], c[2]),
            Datum::Sine(k) => format!("sine({k})"),
            Datum::Rough(s) => format!("rough({s})"),
            Datum::Piecewise { breaks, values } => {
                let mut parts = vec![format!("{}", values[0])];
                for (b, v) in breaks.iter().zip(&values[1..]) {
                    parts.push(format!("{b}"));
                    parts.push(format!("{v}"));
                }
                format!("piecewise({})", parts.join(","))
            }
        }
    }

    /// A pointwise evaluator on `domain`.
    pub fn evaluator(&self, domain: &Domain) -> Box<dyn Fn(Point) -> f64 + Send + Sync> {
        let dim = domain.dim();
        match self.clone() {
            Datum::Constant(c) => Box::new(move |_| c),
            Datum::Step { location, low, high } => {
                Box::new(move |p| if p[0] < location { low } else { high })
            }
            Datum::Bump {
                center,
                radius,
                amplitude,
            } => {
                let c = center.unwrap_or_else(|| domain.centroid());
                let r = radius.unwrap_or_else(|| domain.diameter() / 3.0);
                Box::new(move |p| {
                    let d2 = (p[0] - c[0]).powi(2) + if dim == 2 { (p[1] - c[1]).powi(2) } else { 0.0 };
                    let s = d2 / (r * r);
                    if s < 1.0 {
                        amplitude * (1.0 - 1.0 / (1.0 - s)).exp()
                    } else {
                        0.0
                    }
                })
            }
            Datum::Plane(c) => Box::new(move |p| c[0] + c[1] * p[0] + if dim == 2 { c[2] * p[1] } else { 0.0 }),
            Datum::Sine(k) => Box::new(move |p| (k * PI * p[0]).sin()),
            Datum::Rough(seed) => {
                let terms = rough_terms(seed);
                let (lo, hi) = domain.bbox();
                let scale = [
                    (hi[0] - lo[0]).max(f64::MIN_POSITIVE),
                    if dim == 2 { hi[1] - lo[1] } else { 1.0 },
                ];
                Box::new(move |p| {
                    let q = [(p[0] - lo[0]) / scale[0], if dim == 2 { (p[1] - lo[1]) / scale[1] } else { 0.0 }];
                    let mut v = 0.0;
                    for (c, a) in &terms.cusps {
                        let d2 = (q[0] - c[0]).powi(2) + if dim == 2 { (q[1] - c[1]).powi(2) } else { 0.0 };
                        v += a * d2.sqrt().sqrt();
                    }
                    for (k, phase, a) in &terms.modes {
                        let arg = k[0] * q[0] + if dim == 2 { k[1] * q[1] } else { 0.0 };
                        v += a * (arg + phase).sin();
                    }
                    v
                })
            }
            Datum::Piecewise { breaks, values } => Box::new(move |p| {
                let k = breaks.partition_point(|b| *b <= p[0]);
                values[k]
            }),
        }
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> Result<GridField> {
        let f = self.evaluator(grid.domain());
        GridField::from_fn(grid, f)
    }

    /// Exact BV representation on `(a, b)` for the piecewise data in 1D.
    pub fn to_bv(&self, a: f64, b: f64) -> Result<BVFunction1D> {
        match self {
            Datum::Constant(c) => BVFunction1D::polynomial(a, b, vec![*c]),
            Datum::Step { location, low, high } if *location > a && *location < b => {
                BVFunction1D::step(a, b, *location, *low, *high)
            }
            Datum::Plane(c) => BVFunction1D::polynomial(a, b, vec![c[0] + c[1] * a, c[1]]),
            Datum::Piecewise { breaks, values } => {
                let mut bps = Vec::new();
                let mut vals = vec![values[0]];
                for (x, v) in breaks.iter().zip(&values[1..]) {
                    if *x <= a {
                        vals[0] = *v;
                    } else if *x < b {
                        bps.push(*x);
                        vals.push(*v);
                    }
                }
                BVFunction1D::piecewise_constant(a, b, bps, vals)
            }
            _ => Err(Error::Unsupported(format!(
                "datum `{}` has no exact BV representation",
                self.spec_string()
            ))),
        }
    }
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in [
            "constant(2)",
            "step(0.5,0,1)",
            "bump(0.5,0.5,0.3,1)",
            "plane(0,1,0.5)",
            "rough(3)",
            "piecewise(0,0.25,1,0.5,-1)",
            "sine(3)",
        ] {
            let d = Datum::parse(s).unwrap();
            assert_eq!(Datum::parse(&d.spec_string()).unwrap(), d);
        }
        assert!(Datum::parse("piecewise(0,0.5)").is_err());
        assert!(Datum::parse("wave").is_err());
    }

    #[test]
    fn rough_profile_is_deterministic_and_finite() {
        let dom = Domain::unit_square();
        let f = Datum::Rough(5).evaluator(&dom);
        let g = Datum::Rough(5).evaluator(&dom);
        for i in 0..50 {
            let p = [i as f64 / 49.0, (i * 7 % 50) as f64 / 49.0];
            assert!(f(p).is_finite());
            assert_eq!(f(p), g(p));
        }
    }

    #[test]
    fn bv_literal() {
        let d = Datum::parse("piecewise(0,0.25,1,0.5,-1)").unwrap();
        let w = d.to_bv(0.0, 1.0).unwrap();
        assert_eq!(w.jumps().len(), 2);
        assert_eq!(w.eval(0.3), 1.0);
        assert_eq!(w.eval(0.9), -1.0);
    }
}
