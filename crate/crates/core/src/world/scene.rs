use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Ray;
use crate::math::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Color {
    Flat([u8; 3]),
    /// Two-color checkerboard with square cells of side `cell` (world units),
    /// laid out in the primitive's local surface coordinates.
    Checker { a: [u8; 3], b: [u8; 3], cell: f64 },
}

impl Color {
    pub fn at(&self, s: f64, t: f64) -> [u8; 3] {
        match *self {
            Color::Flat(c) => c,
            Color::Checker { a, b, cell } => {
                let i = math::floor(s / cell) as i64 + math::floor(t / cell) as i64;
                if i.rem_euclid(2) == 0 {
                    a
                } else {
                    b
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Primitive {
    /// Parallelogram `origin + a·edge_u + b·edge_v`, `a, b ∈ [0, 1]`, visible from both sides.
    Rect {
        origin: Vec3,
        edge_u: Vec3,
        edge_v: Vec3,
        color: Color,
    },
    /// Solid axis-aligned box.
    Box { min: Vec3, max: Vec3, color: Color },
}

impl Primitive {
    /// Axis-aligned rectangle spanning `corner` to `corner + edge_u + edge_v`.
    pub fn rect(origin: Vec3, edge_u: Vec3, edge_v: Vec3, color: Color) -> Self {
        Primitive::Rect {
            origin,
            edge_u,
            edge_v,
            color,
        }
    }

    pub fn aabb(min: Vec3, max: Vec3, color: Color) -> Self {
        Primitive::Box { min, max, color }
    }

    fn bounds(&self) -> (Vec3, Vec3) {
        match *self {
            Primitive::Rect {
                origin,
                edge_u,
                edge_v,
                ..
            } => {
                let corners = [origin, origin + edge_u, origin + edge_v, origin + edge_u + edge_v];
                corners[1..]
                    .iter()
                    .fold((corners[0], corners[0]), |(lo, hi), &c| (lo.min(c), hi.max(c)))
            }
            Primitive::Box { min, max, .. } => (min, max),
        }
    }

    fn validate(&self) -> core::result::Result<(), String> {
        match *self {
            Primitive::Rect { origin, edge_u, edge_v, .. } => {
                if !(origin.is_finite() && edge_u.is_finite() && edge_v.is_finite()) {
                    return Err("non-finite rectangle".into());
                }
                if edge_u.cross(edge_v).norm() < 1e-12 {
                    return Err("rectangle edges are degenerate".into());
                }
            }
            Primitive::Box { min, max, .. } => {
                if !(min.is_finite() && max.is_finite()) {
                    return Err("non-finite box".into());
                }
                if !(max.x > min.x && max.y > min.y && max.z > min.z) {
                    return Err("box extents must be positive".into());
                }
            }
        }
        if let Primitive::Rect { color: Color::Checker { cell, .. }, .. }
        | Primitive::Box { color: Color::Checker { cell, .. }, .. } = *self
        {
            if !(cell > 0.0 && cell.is_finite()) {
                return Err("checker cell must be positive".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneSpec {
    pub seed: u64,
    pub primitives: Vec<Primitive>,
    pub scene_diagonal: f64,
}

/// Nearest ray–scene intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub primitive: u32,
    /// Box face (`0..6`, axis·2 + max side) or 0 for rectangles.
    pub face: u8,
    /// Surface coordinates in world units, both ≥ 0.
    pub s: f64,
    pub u: f64,
}

#[derive(Debug, Clone)]
struct PreparedRect {
    origin: Vec3,
    normal: Vec3,
    // edge / |edge|² for barycentric-style projection
    du: Vec3,
    dv: Vec3,
    len_u: f64,
    len_v: f64,
}

#[derive(Debug, Clone)]
enum Prepared {
    Rect(PreparedRect),
    Box { min: Vec3, max: Vec3 },
}

/// Rays must travel at least this far before they can hit anything.
pub const HIT_EPSILON: f64 = 1e-9;

/// Immutable procedural scene with ray queries.
#[derive(Debug, Clone)]
pub struct Scene {
    spec: SceneSpec,
    prepared: Vec<Prepared>,
    name: String,
}

/// Bounding-box diagonal of a primitive list.
pub fn primitives_diagonal(primitives: &[Primitive]) -> f64 {
    let Some(first) = primitives.first() else {
        return 0.0;
    };
    let (lo, hi) = primitives[1..]
        .iter()
        .fold(first.bounds(), |(lo, hi), p| {
            let (a, b) = p.bounds();
            (lo.min(a), hi.max(b))
        });
    (hi - lo).norm()
}

impl Scene {
    pub fn build(spec: SceneSpec) -> Result<Self> {
        Self::build_named(spec, "custom")
    }

    pub fn build_named(spec: SceneSpec, name: &str) -> Result<Self> {
        if spec.primitives.is_empty() {
            return Err(Error::EmptyScene);
        }
        for (i, p) in spec.primitives.iter().enumerate() {
            p.validate()
                .map_err(|e| Error::InvalidScene(format!("primitive {i}: {e}")))?;
        }
        let diag = primitives_diagonal(&spec.primitives);
        if !((diag - spec.scene_diagonal).abs() <= 1e-6) {
            return Err(Error::InvalidScene(format!(
                "declared diagonal {} differs from bounding-box diagonal {diag}",
                spec.scene_diagonal
            )));
        }
        let prepared = spec
            .primitives
            .iter()
            .map(|p| match *p {
                Primitive::Rect {
                    origin,
                    edge_u,
                    edge_v,
                    ..
                } => Prepared::Rect(PreparedRect {
                    origin,
                    normal: edge_u.cross(edge_v).normalize(),
                    du: edge_u / edge_u.norm_squared(),
                    dv: edge_v / edge_v.norm_squared(),
                    len_u: edge_u.norm(),
                    len_v: edge_v.norm(),
                }),
                Primitive::Box { min, max, .. } => Prepared::Box { min, max },
            })
            .collect();
        Ok(Self {
            spec,
            prepared,
            name: name.into(),
        })
    }

    /// Builds a spec with its diagonal filled in from the primitives.
    pub fn from_primitives(seed: u64, primitives: Vec<Primitive>, name: &str) -> Result<Self> {
        let scene_diagonal = primitives_diagonal(&primitives);
        Self::build_named(
            SceneSpec {
                seed,
                primitives,
                scene_diagonal,
            },
            name,
        )
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn diagonal(&self) -> f64 {
        self.spec.scene_diagonal
    }

    pub fn primitive_count(&self) -> usize {
        self.prepared.len()
    }

    /// Nearest hit with `t > HIT_EPSILON`; ties go to the lower primitive index.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        let mut best_t = f64::INFINITY;
        for (i, p) in self.prepared.iter().enumerate() {
            let hit = match p {
                Prepared::Rect(r) => intersect_rect(r, ray),
                Prepared::Box { min, max } => intersect_box(*min, *max, ray),
            };
            if let Some(mut h) = hit {
                if h.t < best_t {
                    best_t = h.t;
                    h.primitive = i as u32;
                    best = Some(h);
                }
            }
        }
        best
    }

    /// Distance to the first surface along `ray`, infinite on a miss.
    pub fn first_hit_distance(&self, ray: &Ray) -> f64 {
        self.intersect(ray).map_or(f64::INFINITY, |h| h.t)
    }

    pub fn color_of(&self, hit: &Hit) -> [u8; 3] {
        let color = match &self.spec.primitives[hit.primitive as usize] {
            Primitive::Rect { color, .. } | Primitive::Box { color, .. } => color,
        };
        color.at(hit.s, hit.u)
    }
}

#[inline]
fn intersect_rect(r: &PreparedRect, ray: &Ray) -> Option<Hit> {
    let denom = r.normal.dot(ray.direction);
    if math::abs(denom) < 1e-15 {
        return None;
    }
    let t = r.normal.dot(r.origin - ray.origin) / denom;
    if !(t > HIT_EPSILON) {
        return None;
    }
    let q = ray.at(t) - r.origin;
    let a = q.dot(r.du);
    let b = q.dot(r.dv);
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return None;
    }
    Some(Hit {
        t,
        primitive: 0,
        face: 0,
        s: a * r.len_u,
        u: b * r.len_v,
    })
}

#[inline]
fn intersect_box(min: Vec3, max: Vec3, ray: &Ray) -> Option<Hit> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_face = 0u8;
    let mut far_face = 0u8;
    for axis in 0..3 {
        let o = ray.origin[axis];
        let d = ray.direction[axis];
        let (lo, hi) = (min[axis], max[axis]);
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (mut t0, mut t1) = ((lo - o) * inv, (hi - o) * inv);
        let (mut f0, mut f1) = (axis as u8 * 2, axis as u8 * 2 + 1);
        if t0 > t1 {
            core::mem::swap(&mut t0, &mut t1);
            core::mem::swap(&mut f0, &mut f1);
        }
        if t0 > t_near {
            t_near = t0;
            near_face = f0;
        }
        if t1 < t_far {
            t_far = t1;
            far_face = f1;
        }
        if t_near > t_far {
            return None;
        }
    }
    let (t, face) = if t_near > HIT_EPSILON {
        (t_near, near_face)
    } else if t_far > HIT_EPSILON {
        (t_far, far_face)
    } else {
        return None;
    };
    let p = ray.at(t);
    let axis = (face / 2) as usize;
    let (a1, a2) = ((axis + 1) % 3, (axis + 2) % 3);
    Some(Hit {
        t,
        primitive: 0,
        face,
        s: (p[a1] - min[a1]).max(0.0),
        u: (p[a2] - min[a2]).max(0.0),
    })
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic pastel color for primitive `i` of a scene seeded with `seed`.
fn palette(seed: u64, i: usize) -> [u8; 3] {
    let h = splitmix(seed ^ splitmix(i as u64));
    [
        96 + (h & 0x7f) as u8,
        96 + ((h >> 8) & 0x7f) as u8,
        96 + ((h >> 16) & 0x7f) as u8,
    ]
}

fn checker(seed: u64, i: usize) -> Color {
    let a = palette(seed, i);
    Color::Checker {
        a,
        b: [a[0] / 2, a[1] / 2, a[2] / 2],
        cell: 0.5,
    }
}

/// Axis-aligned wall rectangle between two corners that share one coordinate.
fn wall(lo: Vec3, hi: Vec3, color: Color) -> Primitive {
    let d = hi - lo;
    let (u, v) = if d.x == 0.0 {
        (Vec3::new(0.0, d.y, 0.0), Vec3::new(0.0, 0.0, d.z))
    } else if d.y == 0.0 {
        (Vec3::new(d.x, 0.0, 0.0), Vec3::new(0.0, 0.0, d.z))
    } else {
        (Vec3::new(d.x, 0.0, 0.0), Vec3::new(0.0, d.y, 0.0))
    };
    Primitive::rect(lo, u, v, color)
}

/// Named built-in scenes.
pub const PRESETS: [&str; 3] = ["two_rooms", "corridor_loop", "unit_box"];

pub fn preset(name: &str, seed: u64) -> Result<Scene> {
    match name {
        "two_rooms" => two_rooms(seed),
        "corridor_loop" => corridor_loop(seed),
        "unit_box" => Scene::from_primitives(
            seed,
            alloc::vec![Primitive::aabb(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), checker(seed, 0))],
            "unit_box",
        ),
        other => Err(Error::InvalidScene(format!(
            "unknown preset `{other}` (expected one of {PRESETS:?})"
        ))),
    }
}

/// Room A spans `x ∈ [0, 4]`, room B `x ∈ [4, 8]`; both `y ∈ [0, 4]`, `z ∈ [0, 3]`
/// (z up). The shared wall at `x = 4` has a doorway `y ∈ [1.5, 2.5]` up to `z = 2.2`.
pub const TWO_ROOMS_DOOR: (f64, f64, f64) = (1.5, 2.5, 2.2);

/// Thickness of the shared wall, centered on `x = 4`.
pub const TWO_ROOMS_WALL: f64 = 0.1;

/// Two 4×4×3 rooms joined by a 1-wide doorway: six outer wall rectangles,
/// the shared wall as three solid boxes around the doorway, floor and ceiling.
pub fn two_rooms(seed: u64) -> Result<Scene> {
    let (y0, y1, zd) = TWO_ROOMS_DOOR;
    let (xa, xb) = (4.0 - TWO_ROOMS_WALL / 2.0, 4.0 + TWO_ROOMS_WALL / 2.0);
    let mut c = 0usize;
    let mut col = || {
        c += 1;
        Color::Flat(palette(seed, c))
    };
    let v = Vec3::new;
    let prims = alloc::vec![
        // room A outer walls
        wall(v(0.0, 0.0, 0.0), v(0.0, 4.0, 3.0), col()),
        wall(v(0.0, 0.0, 0.0), v(4.0, 0.0, 3.0), col()),
        wall(v(0.0, 4.0, 0.0), v(4.0, 4.0, 3.0), col()),
        // room B outer walls
        wall(v(8.0, 0.0, 0.0), v(8.0, 4.0, 3.0), col()),
        wall(v(4.0, 0.0, 0.0), v(8.0, 0.0, 3.0), col()),
        wall(v(4.0, 4.0, 0.0), v(8.0, 4.0, 3.0), col()),
        // shared wall around the doorway
        Primitive::aabb(v(xa, 0.0, 0.0), v(xb, y0, 3.0), col()),
        Primitive::aabb(v(xa, y1, 0.0), v(xb, 4.0, 3.0), col()),
        Primitive::aabb(v(xa, y0, zd), v(xb, y1, 3.0), col()),
        wall(v(0.0, 0.0, 0.0), v(8.0, 4.0, 0.0), checker(seed, 100)),
        wall(v(0.0, 0.0, 3.0), v(8.0, 4.0, 3.0), Color::Flat(palette(seed, 101))),
    ];
    Scene::from_primitives(seed, prims, "two_rooms")
}

/// Outer walls of the `corridor_loop` preset span `[0, 10] × [0, 8]`; the solid
/// core spans `[2, 8] × [2, 6]`, leaving a 2-wide corridor around it.
pub const CORRIDOR_OUTER: (f64, f64) = (10.0, 8.0);
pub const CORRIDOR_CORE: (f64, f64, f64, f64) = (2.0, 2.0, 8.0, 6.0);

/// Rectangular loop corridor: four outer walls, a solid core box, floor and ceiling.
pub fn corridor_loop(seed: u64) -> Result<Scene> {
    let (w, d) = CORRIDOR_OUTER;
    let (cx0, cy0, cx1, cy1) = CORRIDOR_CORE;
    let h = 3.0;
    let v = Vec3::new;
    let prims = alloc::vec![
        wall(v(0.0, 0.0, 0.0), v(w, 0.0, h), checker(seed, 1)),
        wall(v(w, 0.0, 0.0), v(w, d, h), checker(seed, 2)),
        wall(v(0.0, d, 0.0), v(w, d, h), checker(seed, 3)),
        wall(v(0.0, 0.0, 0.0), v(0.0, d, h), checker(seed, 4)),
        Primitive::aabb(v(cx0, cy0, 0.0), v(cx1, cy1, h), checker(seed, 5)),
        wall(v(0.0, 0.0, 0.0), v(w, d, 0.0), Color::Flat(palette(seed, 6))),
        wall(v(0.0, 0.0, h), v(w, d, h), Color::Flat(palette(seed, 7))),
    ];
    Scene::from_primitives(seed, prims, "corridor_loop")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rooms_layout() {
        let s = two_rooms(0).unwrap();
        assert_eq!(s.primitive_count(), 11);
        assert!((s.diagonal() - libm::sqrt(64.0 + 16.0 + 9.0)).abs() < 1e-12);
    }

    #[test]
    fn unit_box_diagonal() {
        let s = preset("unit_box", 3).unwrap();
        assert!((s.diagonal() - libm::sqrt(3.0)).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_scene() {
        assert_eq!(two_rooms(9).unwrap().spec(), two_rooms(9).unwrap().spec());
        assert_ne!(two_rooms(9).unwrap().spec(), two_rooms(10).unwrap().spec());
    }

    #[test]
    fn spec_validation() {
        let bad = SceneSpec {
            seed: 0,
            primitives: Vec::new(),
            scene_diagonal: 0.0,
        };
        assert_eq!(Scene::build(bad).unwrap_err(), Error::EmptyScene);
        let wrong_diag = SceneSpec {
            seed: 0,
            primitives: alloc::vec![Primitive::aabb(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), Color::Flat([0; 3]))],
            scene_diagonal: 2.0,
        };
        assert!(matches!(Scene::build(wrong_diag), Err(Error::InvalidScene(_))));
        let flat_box = SceneSpec {
            seed: 0,
            primitives: alloc::vec![Primitive::aabb(Vec3::ZERO, Vec3::new(1.0, 0.0, 1.0), Color::Flat([0; 3]))],
            scene_diagonal: libm::sqrt(2.0),
        };
        assert!(matches!(Scene::build(flat_box), Err(Error::InvalidScene(_))));
    }

    #[test]
    fn box_hit_from_outside_and_inside() {
        let s = preset("unit_box", 0).unwrap();
        let outside = Ray {
            origin: Vec3::new(0.5, 0.5, -2.0),
            direction: Vec3::Z,
        };
        let h = s.intersect(&outside).unwrap();
        assert!((h.t - 2.0).abs() < 1e-12);
        assert_eq!(h.face, 4);
        let inside = Ray {
            origin: Vec3::new(0.5, 0.5, 0.5),
            direction: Vec3::Z,
        };
        let h = s.intersect(&inside).unwrap();
        assert!((h.t - 0.5).abs() < 1e-12);
        assert_eq!(h.face, 5);
    }
}
