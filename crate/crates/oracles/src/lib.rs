//! Reference computations for tests: exact ray casting against primitives,
//! brute-force boundary distances, and grid Dijkstra.
//!
//! Nothing here shares code with the solvers it checks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Obstacle primitive in world coordinates.
#[derive(Clone, Debug)]
pub enum Prim {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    Ellipse {
        center: [f64; 2],
        a: f64,
        b: f64,
        angle: f64,
    },
    /// Convex polygon, vertices counter-clockwise.
    Polygon(Vec<[f64; 2]>),
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl Prim {
    pub fn rect(center: [f64; 2], half: [f64; 2], angle: f64) -> Self {
        Self::polygon_from_local(
            center,
            angle,
            &[
                [half[0], half[1]],
                [-half[0], half[1]],
                [-half[0], -half[1]],
                [half[0], -half[1]],
            ],
        )
    }

    pub fn diamond(center: [f64; 2], half: [f64; 2], angle: f64) -> Self {
        Self::polygon_from_local(
            center,
            angle,
            &[[half[0], 0.0], [0.0, half[1]], [-half[0], 0.0], [0.0, -half[1]]],
        )
    }

    fn polygon_from_local(center: [f64; 2], angle: f64, local: &[[f64; 2]]) -> Self {
        let (s, c) = angle.sin_cos();
        Prim::Polygon(
            local
                .iter()
                .map(|v| [center[0] + c * v[0] - s * v[1], center[1] + s * v[0] + c * v[1]])
                .collect(),
        )
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Prim::Circle { center, radius } => dot(sub(p, *center), sub(p, *center)) < radius * radius,
            Prim::Ellipse { .. } => {
                let q = self.ellipse_unit(p);
                dot(q, q) < 1.0
            }
            Prim::Polygon(vs) => (0..vs.len()).all(|k| cross(sub(vs[(k + 1) % vs.len()], vs[k]), sub(p, vs[k])) > 0.0),
        }
    }

    fn ellipse_unit(&self, p: [f64; 2]) -> [f64; 2] {
        match self {
            Prim::Ellipse { center, a, b, angle } => {
                let d = sub(p, *center);
                let (s, c) = angle.sin_cos();
                let local = [c * d[0] + s * d[1], -s * d[0] + c * d[1]];
                [local[0] / a, local[1] / b]
            }
            _ => unreachable!(),
        }
    }

    /// Whether the segment `p → q` passes through the open interior.
    pub fn blocks(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        match self {
            Prim::Circle { center, radius } => point_segment_distance(*center, p, q) < *radius,
            Prim::Ellipse { .. } => {
                let (pu, qu) = (self.ellipse_unit(p), self.ellipse_unit(q));
                point_segment_distance([0.0, 0.0], pu, qu) < 1.0
            }
            Prim::Polygon(vs) => {
                // Cyrus–Beck clipping against the convex polygon.
                let d = sub(q, p);
                let (mut t0, mut t1) = (0.0f64, 1.0f64);
                for k in 0..vs.len() {
                    let a = vs[k];
                    let e = sub(vs[(k + 1) % vs.len()], a);
                    // inward normal for a counter-clockwise polygon
                    let n = [-e[1], e[0]];
                    let num = dot(n, sub(p, a));
                    let den = dot(n, d);
                    if den.abs() < 1e-15 {
                        if num <= 0.0 {
                            return false;
                        }
                    } else {
                        let t = -num / den;
                        if den > 0.0 {
                            t0 = t0.max(t);
                        } else {
                            t1 = t1.min(t);
                        }
                    }
                }
                t1 - t0 > 1e-12
            }
        }
    }

    pub fn boundary_samples(&self, n: usize) -> Vec<[f64; 2]> {
        match self {
            Prim::Circle { center, radius } => (0..n)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / n as f64;
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
            Prim::Ellipse { center, a, b, angle } => {
                let (s, c) = angle.sin_cos();
                (0..n)
                    .map(|k| {
                        let t = std::f64::consts::TAU * k as f64 / n as f64;
                        let (x, y) = (a * t.cos(), b * t.sin());
                        [center[0] + c * x - s * y, center[1] + s * x + c * y]
                    })
                    .collect()
            }
            Prim::Polygon(vs) => {
                let per_edge = n / vs.len();
                let mut out = Vec::with_capacity(n);
                for k in 0..vs.len() {
                    let (a, b) = (vs[k], vs[(k + 1) % vs.len()]);
                    for s in 0..per_edge {
                        let t = s as f64 / per_edge as f64;
                        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    }
                }
                out
            }
        }
    }
}

pub fn point_segment_distance(c: [f64; 2], p: [f64; 2], q: [f64; 2]) -> f64 {
    let d = sub(q, p);
    let len2 = dot(d, d);
    let t = if len2 > 0.0 {
        (dot(sub(c, p), d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let r = sub(c, [p[0] + t * d[0], p[1] + t * d[1]]);
    dot(r, r).sqrt()
}

pub fn inside_any(prims: &[Prim], p: [f64; 2]) -> bool {
    prims.iter().any(|s| s.contains(p))
}

/// Exact line of sight between two points.
pub fn visible(prims: &[Prim], from: [f64; 2], to: [f64; 2]) -> bool {
    !prims.iter().any(|s| s.blocks(from, to))
}

/// Signed distance by brute force over `samples` boundary points per shape.
pub fn brute_signed_distance(prims: &[Prim], p: [f64; 2], samples: usize) -> f64 {
    let d = prims
        .iter()
        .flat_map(|s| s.boundary_samples(samples))
        .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min);
    if inside_any(prims, p) {
        -d
    } else {
        d
    }
}

/// Occlusion labels for an `m × m` grid of cell centers seen from `vantage`:
/// `Some(true)` occluded free cell, `Some(false)` visible free cell, `None`
/// obstacle interior. Row-major, `i` (x) outer.
pub fn occlusion_labels(prims: &[Prim], m: usize, vantage: [f64; 2]) -> Vec<Option<bool>> {
    let h = 1.0 / m as f64;
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let p = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            out.push(if inside_any(prims, p) {
                None
            } else {
                Some(!visible(prims, vantage, p))
            });
        }
    }
    out
}

/// A random obstacle map as primitives plus the equivalent scene JSON.
#[derive(Clone, Debug)]
pub struct RandomScene {
    pub prims: Vec<Prim>,
    pub json: String,
}

/// Seeded map with `count` primitives drawn from circles, ellipses,
/// rectangles and diamonds, centred in `[0.2, 0.8]²`, randomly rotated.
pub fn random_scene(seed: u64, count: usize) -> RandomScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prims = Vec::with_capacity(count);
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let center = [rng.random_range(0.2..0.8), rng.random_range(0.2..0.8)];
        let size = [rng.random_range(0.04..0.15), rng.random_range(0.04..0.15)];
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        match rng.random_range(0..4) {
            0 => {
                prims.push(Prim::Circle {
                    center,
                    radius: size[0],
                });
                shapes.push(serde_json::json!({"kind": "circle", "center": center, "radius": size[0]}));
            }
            1 => {
                prims.push(Prim::Ellipse {
                    center,
                    a: size[0],
                    b: size[1],
                    angle,
                });
                shapes
                    .push(serde_json::json!({"kind": "ellipse", "center": center, "semi_axes": size, "angle": angle}));
            }
            2 => {
                prims.push(Prim::rect(center, size, angle));
                shapes.push(
                    serde_json::json!({"kind": "rectangle", "center": center, "half_extents": size, "angle": angle}),
                );
            }
            _ => {
                prims.push(Prim::diamond(center, size, angle));
                shapes.push(
                    serde_json::json!({"kind": "diamond", "center": center, "half_extents": size, "angle": angle}),
                );
            }
        }
    }
    let json = serde_json::json!({"shapes": shapes, "f_p": 1.0, "f_e": 1.0, "k_p": 1, "k_e": 1}).to_string();
    RandomScene { prims, json }
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then(other.1.cmp(&self.1))
    }
}

/// Dijkstra on the 8-connected cell graph; edge cost is step length over
/// the harmonic mean of the two cell speeds. Cells with `passable == false`
/// are never entered.
pub fn dijkstra8(m: usize, speed: &[f64], passable: &[bool], sources: &[(usize, usize)]) -> Vec<f64> {
    let h = 1.0 / m as f64;
    let mut dist = vec![f64::INFINITY; m * m];
    let mut heap = BinaryHeap::new();
    for &(i, j) in sources {
        dist[i * m + j] = 0.0;
        heap.push(Item(0.0, i * m + j));
    }
    while let Some(Item(d, k)) = heap.pop() {
        if d > dist[k] {
            continue;
        }
        let (i, j) = ((k / m) as isize, (k % m) as isize);
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (ni, nj) = (i + di, j + dj);
                if ni < 0 || nj < 0 || ni >= m as isize || nj >= m as isize {
                    continue;
                }
                let n = ni as usize * m + nj as usize;
                if !passable[n] {
                    continue;
                }
                let len = h * ((di * di + dj * dj) as f64).sqrt();
                let cost = len * 0.5 * (1.0 / speed[k] + 1.0 / speed[n]);
                if d + cost < dist[n] {
                    dist[n] = d + cost;
                    heap.push(Item(dist[n], n));
                }
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_blocking() {
        let sq = Prim::rect([0.5, 0.5], [0.1, 0.1], 0.0);
        assert!(sq.blocks([0.1, 0.5], [0.9, 0.5]));
        assert!(!sq.blocks([0.1, 0.7], [0.9, 0.7]));
        assert!(sq.contains([0.55, 0.45]));
        let d = Prim::diamond([0.5, 0.5], [0.1, 0.1], 0.0);
        assert!(!d.blocks([0.35, 0.65], [0.65, 0.65]));
        assert!(d.blocks([0.5, 0.1], [0.5, 0.9]));
    }

    #[test]
    fn ellipse_blocking() {
        let e = Prim::Ellipse {
            center: [0.5, 0.5],
            a: 0.2,
            b: 0.05,
            angle: 0.0,
        };
        assert!(e.blocks([0.5, 0.1], [0.5, 0.9]));
        assert!(!e.blocks([0.1, 0.6], [0.9, 0.6]));
        let r = Prim::Ellipse {
            center: [0.5, 0.5],
            a: 0.2,
            b: 0.05,
            angle: std::f64::consts::FRAC_PI_2,
        };
        assert!(r.blocks([0.1, 0.6], [0.9, 0.6]));
    }

    #[test]
    fn dijkstra_free_space_axis() {
        let m = 16;
        let d = dijkstra8(m, &vec![1.0; m * m], &vec![true; m * m], &[(0, 0)]);
        assert!((d[5 * m] - 5.0 / 16.0).abs() < 1e-12);
        assert!((d[3 * m + 3] - 3.0 * 2f64.sqrt() / 16.0).abs() < 1e-12);
    }
}
