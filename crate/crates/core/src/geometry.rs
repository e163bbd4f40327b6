//! Computational domains in one and two dimensions, affine dilations and the
//! smallest-dilation selector.

use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Error, Result};
use crate::syntax::{parse_call, Call};

pub type Point = [f64; 2];

/// Number of angular samples in support-function sweeps.
pub const SWEEP_DIRECTIONS: usize = 4096;

const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { min: Point, max: Point },
    Disc { center: Point, radius: f64 },
    /// Counterclockwise vertex list.
    Polygon { vertices: Vec<Point> },
    /// `[o, o+s]^2` minus the open upper right quarter `(o+s/2, o+s]^2`.
    LShape { origin: Point, side: f64 },
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dist(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    dot(d, d).sqrt()
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>() * 0.5
}

fn segment_projection(p: Point, a: Point, b: Point) -> Point {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 {
        (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

fn finite(p: &[f64]) -> bool {
    p.iter().all(|x| x.is_finite())
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(finite(&[a, b]) && a < b) {
            return Err(Error::input(format!("invalid interval ({a}, {b})")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn rectangle(min: Point, max: Point) -> Result<Self> {
        if !(finite(&min) && finite(&max) && min[0] < max[0] && min[1] < max[1]) {
            return Err(Error::input("rectangle needs min < max in both axes"));
        }
        Ok(Domain::Rectangle { min, max })
    }

    pub fn unit_square() -> Self {
        Domain::Rectangle {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
        }
    }

    pub fn disc(center: Point, radius: f64) -> Result<Self> {
        if !(finite(&center) && radius.is_finite() && radius > 0.0) {
            return Err(Error::input("disc needs a finite center and positive radius"));
        }
        Ok(Domain::Disc { center, radius })
    }

    /// A simple polygon; clockwise input is reoriented.
    pub fn polygon(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::input("polygon needs at least three vertices"));
        }
        if vertices.iter().any(|v| !finite(v)) {
            return Err(Error::input("polygon vertices must be finite"));
        }
        let area = signed_area(&vertices);
        let scale = vertices
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(1.0);
        if area.abs() <= 1e-14 * scale * scale {
            return Err(Error::input("degenerate polygon (zero area)"));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Domain::Polygon { vertices })
    }

    pub fn l_shape(origin: Point, side: f64) -> Result<Self> {
        if !(finite(&origin) && side.is_finite() && side > 0.0) {
            return Err(Error::input("l_shape needs a positive side"));
        }
        Ok(Domain::LShape { origin, side })
    }

    /// Parses `interval(a,b)`, `rectangle(x0,y0,x1,y1)`, `square`,
    /// `disc(cx,cy,r)`, `triangle`, `polygon(x1,y1,x2,y2,...)` or
    /// `l_shape` / `l_shape(ox,oy,s)`.
    pub fn parse(text: &str) -> Result<Self> {
        let Call { name, args } = parse_call(text)?;
        match (name.as_str(), args.as_slice()) {
            ("interval", [a, b]) => Domain::interval(*a, *b),
            ("interval" | "unit_interval", []) => Domain::interval(0.0, 1.0),
            ("rectangle", [x0, y0, x1, y1]) => Domain::rectangle([*x0, *y0], [*x1, *y1]),
            ("square" | "unit_square", []) => Ok(Domain::unit_square()),
            ("disc", [cx, cy, r]) => Domain::disc([*cx, *cy], *r),
            ("disc", [r]) => Domain::disc([0.0, 0.0], *r),
            ("disc", []) => Domain::disc([0.0, 0.0], 1.0),
            ("triangle", []) => Domain::polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            ("polygon" | "triangle", coords) if coords.len() >= 6 && coords.len() % 2 == 0 => {
                Domain::polygon(coords.chunks(2).map(|c| [c[0], c[1]]).collect())
            }
            ("l_shape", []) => Domain::l_shape([0.0, 0.0], 1.0),
            ("l_shape", [ox, oy, s]) => Domain::l_shape([*ox, *oy], *s),
            _ => Err(Error::input(format!("unknown domain `{text}`"))),
        }
    }

    pub fn spec_string(&self) -> String {
        match self {
            Domain::Interval { a, b } => format!("interval({a},{b})"),
            Domain::Rectangle { min, max } => {
                format!("rectangle({},{},{},{})", min[0], min[1], max[0], max[1])
            }
            Domain::Disc { center, radius } => format!("disc({},{},{radius})", center[0], center[1]),
            Domain::Polygon { vertices } => {
                let coords: Vec<String> = vertices
                    .iter()
                    .flat_map(|v| [format!("{}", v[0]), format!("{}", v[1])])
                    .collect();
                format!("polygon({})", coords.join(","))
            }
            Domain::LShape { origin, side } => format!("l_shape({},{},{side})", origin[0], origin[1]),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// The six corners of the L-shape, counterclockwise.
    fn l_vertices(origin: Point, side: f64) -> Vec<Point> {
        let [x, y] = origin;
        let (s, t) = (side, side * 0.5);
        vec![
            [x, y],
            [x + s, y],
            [x + s, y + t],
            [x + t, y + t],
            [x + t, y + s],
            [x, y + s],
        ]
    }

    /// Polygonal boundary for the piecewise-linear kinds.
    pub fn vertices(&self) -> Option<Vec<Point>> {
        match self {
            Domain::Rectangle { min, max } => Some(vec![
                *min,
                [max[0], min[1]],
                *max,
                [min[0], max[1]],
            ]),
            Domain::Polygon { vertices } => Some(vertices.clone()),
            Domain::LShape { origin, side } => Some(Domain::l_vertices(*origin, *side)),
            _ => None,
        }
    }

    /// Closed-set membership with a small absolute tolerance.
    pub fn contains(&self, p: Point) -> bool {
        self.signed_distance(p) <= GEOM_TOL * self.scale()
    }

    /// Distance to the boundary, negative inside.
    pub fn signed_distance(&self, p: Point) -> f64 {
        match self {
            Domain::Interval { a, b } => (a - p[0]).max(p[0] - b),
            Domain::Disc { center, radius } => dist(p, *center) - radius,
            _ => {
                let v = self.vertices().expect("polygonal domain");
                let n = v.len();
                let d = (0..n)
                    .map(|i| dist(p, segment_projection(p, v[i], v[(i + 1) % n])))
                    .fold(f64::INFINITY, f64::min);
                if winding_inside(&v, p) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// True when `p` lies in the open domain, away from the boundary.
    pub fn is_interior(&self, p: Point) -> bool {
        self.signed_distance(p) < -GEOM_TOL * self.scale()
    }

    fn scale(&self) -> f64 {
        self.diameter().max(1.0)
    }

    /// Lebesgue measure (length in 1D, area in 2D).
    pub fn measure(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Disc { radius, .. } => PI * radius * radius,
            _ => signed_area(&self.vertices().expect("polygonal domain")),
        }
    }

    /// Boundary measure; a 1D interval has two boundary points.
    pub fn perimeter(&self) -> f64 {
        match self {
            Domain::Interval { .. } => 2.0,
            Domain::Disc { radius, .. } => TAU * radius,
            _ => {
                let v = self.vertices().expect("polygonal domain");
                let n = v.len();
                (0..n).map(|i| dist(v[i], v[(i + 1) % n])).sum()
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { a, b } => b - a,
            Domain::Disc { radius, .. } => 2.0 * radius,
            _ => {
                let v = self.vertices().expect("polygonal domain");
                let mut d: f64 = 0.0;
                for i in 0..v.len() {
                    for j in i + 1..v.len() {
                        d = d.max(dist(v[i], v[j]));
                    }
                }
                d
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)`; the y range is `[0, 0]` in 1D.
    pub fn bbox(&self) -> (Point, Point) {
        match self {
            Domain::Interval { a, b } => ([*a, 0.0], [*b, 0.0]),
            Domain::Disc { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            _ => {
                let v = self.vertices().expect("polygonal domain");
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for p in &v {
                    for k in 0..2 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Area centroid (midpoint in 1D); interior for convex domains.
    pub fn centroid(&self) -> Point {
        match self {
            Domain::Interval { a, b } => [0.5 * (a + b), 0.0],
            Domain::Disc { center, .. } => *center,
            _ => {
                let v = self.vertices().expect("polygonal domain");
                let n = v.len();
                let a = signed_area(&v);
                let mut c = [0.0; 2];
                for i in 0..n {
                    let (p, q) = (v[i], v[(i + 1) % n]);
                    let w = cross(p, q);
                    c[0] += (p[0] + q[0]) * w;
                    c[1] += (p[1] + q[1]) * w;
                }
                [c[0] / (6.0 * a), c[1] / (6.0 * a)]
            }
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            Domain::Interval { .. } | Domain::Rectangle { .. } | Domain::Disc { .. } => true,
            Domain::LShape { .. } => false,
            Domain::Polygon { vertices } => {
                let n = vertices.len();
                let scale = self.scale();
                (0..n).all(|i| {
                    let e1 = sub(vertices[(i + 1) % n], vertices[i]);
                    let e2 = sub(vertices[(i + 2) % n], vertices[(i + 1) % n]);
                    cross(e1, e2) >= -GEOM_TOL * scale * scale
                })
            }
        }
    }

    /// Whether the second fundamental form of the boundary is nonnegative
    /// (weakly, at corners).
    pub fn boundary_curvature_sign(&self) -> bool {
        self.is_convex()
    }

    /// Support function `h(theta) = max_{x} x . theta`; in 1D only the first
    /// component of `theta` is used.
    pub fn support(&self, theta: Point) -> f64 {
        match self {
            Domain::Interval { a, b } => (a * theta[0]).max(b * theta[0]),
            Domain::Disc { center, radius } => dot(*center, theta) + radius * dot(theta, theta).sqrt(),
            _ => self
                .vertices()
                .expect("polygonal domain")
                .iter()
                .map(|v| dot(*v, theta))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Closest point of the closed domain.
    pub fn project(&self, p: Point) -> Point {
        if self.contains(p) {
            return p;
        }
        match self {
            Domain::Interval { a, b } => [p[0].clamp(*a, *b), p[1]],
            Domain::Rectangle { min, max } => [p[0].clamp(min[0], max[0]), p[1].clamp(min[1], max[1])],
            Domain::Disc { center, radius } => {
                let d = sub(p, *center);
                let r = dot(d, d).sqrt();
                [center[0] + radius * d[0] / r, center[1] + radius * d[1] / r]
            }
            _ => {
                let v = self.vertices().expect("polygonal domain");
                let n = v.len();
                (0..n)
                    .map(|i| segment_projection(p, v[i], v[(i + 1) % n]))
                    .min_by(|x, y| dist(p, *x).total_cmp(&dist(p, *y)))
                    .expect("nonempty polygon")
            }
        }
    }

    /// Image under `S_mu(x) = x0 + (1 + mu)(x - x0)`.
    pub fn dilate(&self, mu: f64, x0: Point) -> Result<Domain> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::input(format!("dilation factor must be >= 0, got {mu}")));
        }
        if !self.is_interior(x0) {
            return Err(Error::input("dilation center must lie strictly inside the domain"));
        }
        let s = Dilation { center: x0, factor: mu };
        Ok(match self {
            Domain::Interval { a, b } => Domain::Interval {
                a: s.apply([*a, 0.0])[0],
                b: s.apply([*b, 0.0])[0],
            },
            Domain::Rectangle { min, max } => Domain::Rectangle {
                min: s.apply(*min),
                max: s.apply(*max),
            },
            Domain::Disc { center, radius } => Domain::Disc {
                center: s.apply(*center),
                radius: (1.0 + mu) * radius,
            },
            Domain::Polygon { vertices } => Domain::Polygon {
                vertices: vertices.iter().map(|v| s.apply(*v)).collect(),
            },
            Domain::LShape { origin, side } => Domain::LShape {
                origin: s.apply(*origin),
                side: (1.0 + mu) * side,
            },
        })
    }

    /// Directions used for support-function comparisons: a uniform sweep plus
    /// the exact extremal directions of the shape.
    pub fn sweep_directions(&self, x0: Point) -> Vec<Point> {
        if self.dim() == 1 {
            return vec![[1.0, 0.0], [-1.0, 0.0]];
        }
        let mut dirs: Vec<Point> = (0..SWEEP_DIRECTIONS)
            .map(|k| {
                let a = TAU * k as f64 / SWEEP_DIRECTIONS as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        match self {
            Domain::Disc { center, .. } => {
                let d = sub(x0, *center);
                let r = dot(d, d).sqrt();
                if r > 0.0 {
                    dirs.push([d[0] / r, d[1] / r]);
                }
            }
            _ => {
                if let Some(v) = self.vertices() {
                    let n = v.len();
                    for i in 0..n {
                        let e = sub(v[(i + 1) % n], v[i]);
                        let l = dot(e, e).sqrt();
                        dirs.push([e[1] / l, -e[0] / l]);
                    }
                }
            }
        }
        dirs
    }

    /// Smallest `mu` with `Omega + B_delta` contained in `S_mu(Omega)`, by
    /// 60 bisection steps on the support-function containment test.
    pub fn smallest_dilation(&self, delta: f64, x0: Point) -> Result<f64> {
        if !self.is_convex() {
            return Err(Error::Unsupported(
                "smallest dilation requires a convex domain".into(),
            ));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::input("delta must be nonnegative"));
        }
        if !self.is_interior(x0) {
            return Err(Error::input("dilation center must lie strictly inside the domain"));
        }
        if delta == 0.0 {
            return Ok(0.0);
        }
        let dirs = self.sweep_directions(x0);
        let gaps: Vec<(f64, f64)> = dirs
            .iter()
            .map(|t| (self.support(*t), dot(x0, *t)))
            .collect();
        let contained = |mu: f64| {
            gaps.iter()
                .all(|(h, c)| h + delta <= c + (1.0 + mu) * (h - c))
        };
        let mut hi = delta / self.diameter();
        let mut guard = 0;
        while !contained(hi) {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::Internal("dilation bracket did not close".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if contained(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Containment of `Omega + B_delta` in `other`, tested on the support
    /// sweep (exact for convex `other`).
    pub fn offset_contained_in(&self, delta: f64, other: &Domain, x0: Point) -> bool {
        self.sweep_directions(x0)
            .iter()
            .all(|t| self.support(*t) + delta <= other.support(*t) + 1e-14 * self.scale())
    }

    /// Hausdorff distance between two convex domains via support functions.
    pub fn hausdorff_convex(&self, other: &Domain) -> Result<f64> {
        if !(self.is_convex() && other.is_convex()) {
            return Err(Error::Unsupported("hausdorff distance needs convex domains".into()));
        }
        let c = self.centroid();
        let mut dirs = self.sweep_directions(c);
        dirs.extend(other.sweep_directions(c));
        Ok(dirs
            .iter()
            .map(|t| (self.support(*t) - other.support(*t)).abs())
            .fold(0.0, f64::max))
    }
}

fn winding_inside(v: &[Point], p: Point) -> bool {
    let n = v.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec_string())
    }
}

/// `S_mu(x) = x0 + (1 + mu)(x - x0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dilation {
    pub center: Point,
    pub factor: f64,
}

impl Dilation {
    pub fn apply(&self, x: Point) -> Point {
        let s = 1.0 + self.factor;
        [
            self.center[0] + s * (x[0] - self.center[0]),
            self.center[1] + s * (x[1] - self.center[1]),
        ]
    }

    pub fn inverse(&self, y: Point) -> Point {
        let s = 1.0 + self.factor;
        [
            self.center[0] + (y[0] - self.center[0]) / s,
            self.center[1] + (y[1] - self.center[1]) / s,
        ]
    }
}
