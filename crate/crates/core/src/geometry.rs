//! Uniform grid on the unit square, obstacle scenes, signed distance, and a
//! fast-sweeping Eikonal solver.
//!
//! Cells are indexed `(i, j)` with `i` along x and `j` along y. Buffers are
//! row-major with `i` outer and `j` inner.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Stand-in for an infinite value.
pub const LARGE: f64 = 1e9;
/// Anything at or above this is treated as unreachable.
pub const UNREACHABLE: f64 = 1e8;
/// Slowest admissible speed inside obstacles.
pub const V_MIN: f64 = 0.01;
/// Boundary points per shape for primitives without a closed-form distance.
pub const BOUNDARY_SAMPLES: usize = 10_000;

const SWEEP_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

impl From<[usize; 2]> for Cell {
    fn from([i, j]: [usize; 2]) -> Self {
        Self { i, j }
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.i, c.j]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

/// Uniform `m × m` cell grid over `[0,1)²` with spacing `h = 1/m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    m: usize,
    h: f64,
}

impl Grid2D {
    pub fn new(m: usize) -> Result<Self> {
        if m < 8 {
            return Err(Error::GridTooSmall(m));
        }
        Ok(Self { m, h: 1.0 / m as f64 })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c.i * self.m + c.j
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(index / self.m, index % self.m)
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.i < self.m && c.j < self.m
    }

    pub fn check(&self, c: Cell) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::OutOfGrid(c))
        }
    }

    #[inline]
    pub fn center(&self, c: Cell) -> [f64; 2] {
        [(c.i as f64 + 0.5) * self.h, (c.j as f64 + 0.5) * self.h]
    }

    /// Cell containing a point, if the point lies in `[0,1)²`.
    pub fn cell_at(&self, p: [f64; 2]) -> Option<Cell> {
        if !(0.0..1.0).contains(&p[0]) || !(0.0..1.0).contains(&p[1]) {
            return None;
        }
        let i = ((p[0] * self.m as f64) as usize).min(self.m - 1);
        let j = ((p[1] * self.m as f64) as usize).min(self.m - 1);
        Some(Cell::new(i, j))
    }

    /// Cell nearest to a point, clamped into the grid.
    pub fn nearest_cell(&self, p: [f64; 2]) -> Cell {
        let clamp = |v: f64| ((v * self.m as f64).floor().max(0.0) as usize).min(self.m - 1);
        Cell::new(clamp(p[0]), clamp(p[1]))
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(move |k| self.cell(k))
    }

    /// In-grid neighbours at integer offsets `(di, dj)`.
    pub fn offset(&self, c: Cell, di: isize, dj: isize) -> Option<Cell> {
        let i = c.i as isize + di;
        let j = c.j as isize + dj;
        if i < 0 || j < 0 || i >= self.m as isize || j >= self.m as isize {
            None
        } else {
            Some(Cell::new(i as usize, j as usize))
        }
    }
}

/// One real value per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldSize {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(Cell) -> f64) -> Self {
        let values = grid.cells().map(&mut f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, c: Cell) -> f64 {
        self.values[self.grid.index(c)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation between cell centers; points outside the
    /// lattice of centers are clamped onto it.
    pub fn bilinear(&self, p: [f64; 2]) -> f64 {
        let m = self.grid.m;
        let last = (m - 1) as f64;
        let x = (p[0] * m as f64 - 0.5).clamp(0.0, last);
        let y = (p[1] * m as f64 - 0.5).clamp(0.0, last);
        let i0 = (x.floor() as usize).min(m - 2);
        let j0 = (y.floor() as usize).min(m - 2);
        let tx = x - i0 as f64;
        let ty = y - j0 as f64;
        let v = |i: usize, j: usize| self.values[i * m + j];
        let a = v(i0, j0) * (1.0 - ty) + v(i0, j0 + 1) * ty;
        let b = v(i0 + 1, j0) * (1.0 - ty) + v(i0 + 1, j0 + 1) * ty;
        a * (1.0 - tx) + b * tx
    }

    /// Central-difference gradient, one-sided at the grid edges.
    pub fn gradient(&self, c: Cell) -> [f64; 2] {
        let g = &self.grid;
        let axis = |lo: Option<Cell>, hi: Option<Cell>| -> f64 {
            match (lo, hi) {
                (Some(l), Some(u)) => (self.get(u) - self.get(l)) / (2.0 * g.h),
                (None, Some(u)) => (self.get(u) - self.get(c)) / g.h,
                (Some(l), None) => (self.get(c) - self.get(l)) / g.h,
                (None, None) => 0.0,
            }
        };
        [
            axis(g.offset(c, -1, 0), g.offset(c, 1, 0)),
            axis(g.offset(c, 0, -1), g.offset(c, 0, 1)),
        ]
    }
}

fn rotate(v: [f64; 2], angle: f64) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Offset of `p` from `center` expressed in a frame rotated by `angle`.
fn to_local(p: [f64; 2], center: [f64; 2], angle: f64) -> [f64; 2] {
    rotate([p[0] - center[0], p[1] - center[1]], -angle)
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    norm([ap[0] - t * ab[0], ap[1] - t * ab[1]])
}

/// Obstacle primitive. Angles are radians, counter-clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        semi_axes: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
    Rectangle {
        center: [f64; 2],
        half_extents: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
    Diamond {
        center: [f64; 2],
        half_extents: [f64; 2],
        #[serde(default)]
        angle: f64,
    },
}

impl Shape {
    pub fn center(&self) -> [f64; 2] {
        match *self {
            Shape::Circle { center, .. }
            | Shape::Ellipse { center, .. }
            | Shape::Rectangle { center, .. }
            | Shape::Diamond { center, .. } => center,
        }
    }

    /// Half widths of the axis-aligned bounding box.
    pub fn half_bounds(&self) -> [f64; 2] {
        match *self {
            Shape::Circle { radius, .. } => [radius, radius],
            Shape::Ellipse {
                semi_axes: [a, b],
                angle,
                ..
            } => {
                let (s, c) = angle.sin_cos();
                [
                    (a * a * c * c + b * b * s * s).sqrt(),
                    (a * a * s * s + b * b * c * c).sqrt(),
                ]
            }
            Shape::Rectangle {
                half_extents: [a, b],
                angle,
                ..
            } => {
                let (s, c) = angle.sin_cos();
                [a * c.abs() + b * s.abs(), a * s.abs() + b * c.abs()]
            }
            Shape::Diamond {
                half_extents: [a, b],
                angle,
                ..
            } => {
                let (s, c) = angle.sin_cos();
                [(a * c).abs().max((b * s).abs()), (a * s).abs().max((b * c).abs())]
            }
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let dims: Vec<f64> = match *self {
            Shape::Circle { radius, .. } => vec![radius],
            Shape::Ellipse { semi_axes, angle, .. } => vec![semi_axes[0], semi_axes[1], angle.abs() + 1.0],
            Shape::Rectangle {
                half_extents, angle, ..
            }
            | Shape::Diamond {
                half_extents, angle, ..
            } => vec![half_extents[0], half_extents[1], angle.abs() + 1.0],
        };
        if dims.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(format!("shape {self:?} has non-positive or non-finite dimensions"));
        }
        let c = self.center();
        let hb = self.half_bounds();
        let eps = 1e-12;
        if c[0] - hb[0] < -eps || c[1] - hb[1] < -eps || c[0] + hb[0] > 1.0 + eps || c[1] + hb[1] > 1.0 + eps {
            return Err(format!("shape {self:?} extends outside the unit square"));
        }
        Ok(())
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Shape::Circle { center, radius } => norm([p[0] - center[0], p[1] - center[1]]) < radius,
            Shape::Ellipse {
                center,
                semi_axes: [a, b],
                angle,
            } => {
                let q = to_local(p, center, angle);
                (q[0] / a).powi(2) + (q[1] / b).powi(2) < 1.0
            }
            Shape::Rectangle {
                center,
                half_extents: [a, b],
                angle,
            } => {
                let q = to_local(p, center, angle);
                q[0].abs() < a && q[1].abs() < b
            }
            Shape::Diamond {
                center,
                half_extents: [a, b],
                angle,
            } => {
                let q = to_local(p, center, angle);
                q[0].abs() / a + q[1].abs() / b < 1.0
            }
        }
    }

    /// Polygon vertices in world coordinates, for polygonal primitives.
    pub fn vertices(&self) -> Option<Vec<[f64; 2]>> {
        let (center, angle, local) = match *self {
            Shape::Rectangle {
                center,
                half_extents: [a, b],
                angle,
            } => (center, angle, vec![[a, b], [-a, b], [-a, -b], [a, -b]]),
            Shape::Diamond {
                center,
                half_extents: [a, b],
                angle,
            } => (center, angle, vec![[a, 0.0], [0.0, b], [-a, 0.0], [0.0, -b]]),
            _ => return None,
        };
        Some(
            local
                .into_iter()
                .map(|v| {
                    let r = rotate(v, angle);
                    [center[0] + r[0], center[1] + r[1]]
                })
                .collect(),
        )
    }

    /// Evenly spaced points on the boundary (uniform in the ellipse parameter
    /// for ellipses, uniform in arc length otherwise).
    pub fn boundary_points(&self, n: usize) -> Vec<[f64; 2]> {
        match *self {
            Shape::Circle { center, radius } => (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
            Shape::Ellipse {
                center,
                semi_axes: [a, b],
                angle,
            } => (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    let r = rotate([a * t.cos(), b * t.sin()], angle);
                    [center[0] + r[0], center[1] + r[1]]
                })
                .collect(),
            _ => {
                let vs = self.vertices().expect("polygonal shape");
                let edges: Vec<_> = (0..vs.len()).map(|k| (vs[k], vs[(k + 1) % vs.len()])).collect();
                let perimeter: f64 = edges.iter().map(|(a, b)| norm([b[0] - a[0], b[1] - a[1]])).sum();
                (0..n)
                    .map(|k| {
                        let mut s = perimeter * k as f64 / n as f64;
                        for (a, b) in &edges {
                            let len = norm([b[0] - a[0], b[1] - a[1]]);
                            if s <= len {
                                let t = s / len;
                                return [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                            }
                            s -= len;
                        }
                        edges[0].0
                    })
                    .collect()
            }
        }
    }
}

/// Per-shape signed distance evaluator.
enum ShapeSdf<'a> {
    Circle { center: [f64; 2], radius: f64 },
    Polygon { shape: &'a Shape, vertices: Vec<[f64; 2]> },
    Sampled { shape: &'a Shape, points: Vec<[f64; 2]> },
}

impl<'a> ShapeSdf<'a> {
    fn new(shape: &'a Shape) -> Self {
        match *shape {
            Shape::Circle { center, radius } => ShapeSdf::Circle { center, radius },
            Shape::Rectangle { .. } | Shape::Diamond { .. } => ShapeSdf::Polygon {
                shape,
                vertices: shape.vertices().expect("polygonal shape"),
            },
            Shape::Ellipse { .. } => ShapeSdf::Sampled {
                shape,
                points: shape.boundary_points(BOUNDARY_SAMPLES),
            },
        }
    }

    fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            ShapeSdf::Circle { center, radius } => norm([p[0] - center[0], p[1] - center[1]]) - radius,
            ShapeSdf::Polygon { shape, vertices } => {
                let n = vertices.len();
                let d = (0..n)
                    .map(|k| segment_distance(p, vertices[k], vertices[(k + 1) % n]))
                    .fold(f64::INFINITY, f64::min);
                if shape.contains(p) {
                    -d
                } else {
                    d
                }
            }
            ShapeSdf::Sampled { shape, points } => {
                let d = points
                    .iter()
                    .map(|q| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
                    .fold(f64::INFINITY, f64::min)
                    .sqrt();
                if shape.contains(p) {
                    -d
                } else {
                    d
                }
            }
        }
    }
}

/// Obstacle layout plus player speeds and team sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default)]
    pub shapes: Vec<Shape>,
    pub f_p: f64,
    pub f_e: f64,
    #[serde(default = "one")]
    pub k_p: usize,
    #[serde(default = "one")]
    pub k_e: usize,
}

fn one() -> usize {
    1
}

impl Scene {
    pub fn new(shapes: Vec<Shape>, f_p: f64, f_e: f64, k_p: usize, k_e: usize) -> Result<Self> {
        let scene = Self {
            shapes,
            f_p,
            f_e,
            k_p,
            k_e,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.shapes {
            s.validate().map_err(Error::InvalidScene)?;
        }
        if !self.f_p.is_finite() || self.f_p < 0.0 {
            return Err(Error::InvalidScene(format!(
                "f_p must be finite and non-negative, got {}",
                self.f_p
            )));
        }
        if !self.f_e.is_finite() || self.f_e <= 0.0 {
            return Err(Error::InvalidScene(format!(
                "f_e must be finite and positive, got {}",
                self.f_e
            )));
        }
        if self.k_p == 0 || self.k_e == 0 {
            return Err(Error::InvalidScene("team sizes must be at least 1".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scene serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Occluder function: negative inside obstacles, positive outside, with
/// magnitude equal to the distance to the nearest obstacle boundary.
pub fn signed_distance(scene: &Scene, grid: Grid2D) -> ScalarField {
    signed_distance_shapes(&scene.shapes, grid)
}

pub fn signed_distance_shapes(shapes: &[Shape], grid: Grid2D) -> ScalarField {
    if shapes.is_empty() {
        return ScalarField::constant(grid, LARGE);
    }
    let sdfs: Vec<ShapeSdf<'_>> = shapes.iter().map(ShapeSdf::new).collect();
    ScalarField::from_fn(grid, |c| {
        let p = grid.center(c);
        sdfs.iter().map(|s| s.eval(p)).fold(f64::INFINITY, f64::min)
    })
}

/// First-arrival times from `sources` for `|∇T|·speed = 1`, by Gauss–Seidel
/// fast sweeping over the four axis orderings.
pub fn solve_eikonal(speed: &ScalarField, sources: &[Cell]) -> Result<ScalarField> {
    let grid = speed.grid();
    if sources.is_empty() {
        return Err(Error::NoSources);
    }
    for s in sources {
        grid.check(*s)?;
    }
    if let Some((index, &value)) = speed.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveSpeed { index, value });
    }
    let m = grid.m();
    let h = grid.h();
    let sp = speed.values();
    let mut t = vec![LARGE; grid.len()];
    let mut fixed = vec![false; grid.len()];
    for s in sources {
        let k = grid.index(*s);
        t[k] = 0.0;
        fixed[k] = true;
    }

    let update = |t: &mut [f64], i: usize, j: usize| -> f64 {
        let k = i * m + j;
        if fixed[k] {
            return 0.0;
        }
        let a = match (i > 0, i + 1 < m) {
            (true, true) => t[k - m].min(t[k + m]),
            (true, false) => t[k - m],
            (false, true) => t[k + m],
            (false, false) => LARGE,
        };
        let b = match (j > 0, j + 1 < m) {
            (true, true) => t[k - 1].min(t[k + 1]),
            (true, false) => t[k - 1],
            (false, true) => t[k + 1],
            (false, false) => LARGE,
        };
        let lo = a.min(b);
        if lo >= UNREACHABLE {
            return 0.0;
        }
        let step = h / sp[k];
        let cand = if (a - b).abs() >= step {
            lo + step
        } else {
            0.5 * (a + b + (2.0 * step * step - (a - b) * (a - b)).sqrt())
        };
        if cand < t[k] {
            let change = t[k] - cand;
            t[k] = cand;
            if change >= UNREACHABLE {
                LARGE
            } else {
                change
            }
        } else {
            0.0
        }
    };

    for _ in 0..MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for (rev_i, rev_j) in [(false, false), (true, false), (true, true), (false, true)] {
            for ii in 0..m {
                let i = if rev_i { m - 1 - ii } else { ii };
                for jj in 0..m {
                    let j = if rev_j { m - 1 - jj } else { jj };
                    max_change = max_change.max(update(&mut t, i, j));
                }
            }
        }
        if max_change < SWEEP_TOL {
            break;
        }
    }
    ScalarField::new(grid, t)
}

/// Smoothly slowed speed near and inside obstacles.
#[inline]
pub fn regularized_speed_at(raw: f64, phi: f64, eps: f64, v_min: f64) -> f64 {
    if phi > 0.0 {
        raw
    } else if phi >= -2.0 * eps {
        v_min + 0.5 * (raw - v_min) * ((phi * PI / (2.0 * eps)).cos() + 1.0)
    } else {
        v_min
    }
}

pub fn regularize_speed(raw: f64, phi: &ScalarField, eps: f64, v_min: f64) -> ScalarField {
    phi.map(|p| regularized_speed_at(raw, p, eps, v_min))
}

/// Default transition width `16h`.
pub fn default_regularization_width(grid: Grid2D) -> f64 {
    16.0 * grid.h()
}

/// Hard-walled speed: `raw` in free space, `v_min` inside obstacles.
pub fn masked_speed(raw: f64, phi: &ScalarField, v_min: f64) -> ScalarField {
    phi.map(|p| if p > 0.0 { raw } else { v_min })
}
