//! Point octree over surfel centers.
//!
//! Points are addressed by dense `u32` ids assigned in insertion order. The
//! root grows by re-rooting whenever a point lands outside the current bounds.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OctreeConfig {
    pub max_leaf_points: usize,
    pub max_depth: u32,
    /// Half side length of the root cube created around the first point.
    pub initial_half_extent: f64,
}

impl Default for OctreeConfig {
    fn default() -> Self {
        Self {
            max_leaf_points: 32,
            max_depth: 12,
            initial_half_extent: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf(Vec<u32>),
    Branch([u32; 8]),
}

#[derive(Debug, Clone)]
struct Node {
    center: Vec3,
    half: f64,
    depth: u32,
    kind: NodeKind,
}

impl Node {
    fn leaf(center: Vec3, half: f64, depth: u32) -> Self {
        Self {
            center,
            half,
            depth,
            kind: NodeKind::Leaf(Vec::new()),
        }
    }

    #[inline]
    fn contains(&self, p: Vec3) -> bool {
        crate::math::abs(p.x - self.center.x) <= self.half
            && crate::math::abs(p.y - self.center.y) <= self.half
            && crate::math::abs(p.z - self.center.z) <= self.half
    }

    #[inline]
    fn octant(&self, p: Vec3) -> usize {
        (p.x >= self.center.x) as usize
            | (((p.y >= self.center.y) as usize) << 1)
            | (((p.z >= self.center.z) as usize) << 2)
    }

    /// Squared distance from `p` to the node's cube (zero inside). The cube is
    /// inflated by a relative `SLACK` so rounding in child centers never prunes
    /// a point that routing placed inside.
    #[inline]
    fn distance_squared_to(&self, p: Vec3) -> f64 {
        let half = self.half * (1.0 + SLACK);
        let d = |v: f64, c: f64| {
            let e = crate::math::abs(v - c) - half;
            if e > 0.0 {
                e * e
            } else {
                0.0
            }
        };
        d(p.x, self.center.x) + d(p.y, self.center.y) + d(p.z, self.center.z)
    }
}

const SLACK: f64 = 1e-9;

fn octant_offset(octant: usize, quarter: f64) -> Vec3 {
    let s = |bit: usize| if octant & bit != 0 { quarter } else { -quarter };
    Vec3::new(s(1), s(2), s(4))
}

#[derive(Debug, Clone)]
pub struct Octree {
    config: OctreeConfig,
    nodes: Vec<Node>,
    root: Option<u32>,
    points: Vec<Vec3>,
}

impl Octree {
    pub fn new(config: OctreeConfig) -> Self {
        Self {
            config,
            nodes: Vec::new(),
            root: None,
            points: Vec::new(),
        }
    }

    /// Builds a tree holding `points` with ids `0..points.len()`.
    pub fn build(config: OctreeConfig, points: impl IntoIterator<Item = Vec3>) -> Self {
        let mut tree = Self::new(config);
        for p in points {
            tree.push(p);
        }
        tree
    }

    pub fn config(&self) -> &OctreeConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn position(&self, id: u32) -> Vec3 {
        self.points[id as usize]
    }

    /// Inserts a finite point and returns its id.
    pub fn push(&mut self, p: Vec3) -> u32 {
        assert!(p.is_finite(), "octree points must be finite");
        let id = self.points.len() as u32;
        self.points.push(p);
        let root = match self.root {
            Some(r) => r,
            None => {
                self.nodes
                    .push(Node::leaf(p, self.config.initial_half_extent.max(1e-9), 0));
                self.root = Some(0);
                0
            }
        };
        let root = self.grow_to_contain(root, p);
        self.insert_at(root, id);
        id
    }

    fn grow_to_contain(&mut self, mut root: u32, p: Vec3) -> u32 {
        while !self.nodes[root as usize].contains(p) {
            let old = &self.nodes[root as usize];
            let half = old.half;
            let step = |v: f64, c: f64| if v >= c { half } else { -half };
            let center = old.center
                + Vec3::new(
                    step(p.x, old.center.x),
                    step(p.y, old.center.y),
                    step(p.z, old.center.z),
                );
            let mut children = [0u32; 8];
            let new_half = half * 2.0;
            let old_octant = Node::leaf(center, new_half, 0).octant(old.center);
            for (octant, slot) in children.iter_mut().enumerate() {
                let c = center + octant_offset(octant, half);
                if octant == old_octant {
                    *slot = root;
                } else {
                    *slot = self.nodes.len() as u32;
                    self.nodes.push(Node::leaf(c, half, 1));
                }
            }
            self.deepen(root);
            self.nodes.push(Node {
                center,
                half: new_half,
                depth: 0,
                kind: NodeKind::Branch(children),
            });
            root = self.nodes.len() as u32 - 1;
            self.root = Some(root);
        }
        root
    }

    fn deepen(&mut self, node: u32) {
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            let node = &mut self.nodes[n as usize];
            node.depth += 1;
            if let NodeKind::Branch(ch) = &node.kind {
                stack.extend_from_slice(ch);
            }
        }
    }

    fn insert_at(&mut self, root: u32, id: u32) {
        let p = self.points[id as usize];
        let mut n = root;
        while let NodeKind::Branch(ch) = &self.nodes[n as usize].kind {
            n = ch[self.nodes[n as usize].octant(p)];
        }
        let node = &mut self.nodes[n as usize];
        let NodeKind::Leaf(ids) = &mut node.kind else {
            unreachable!()
        };
        ids.push(id);
        if ids.len() > self.config.max_leaf_points && node.depth < self.config.max_depth {
            self.split(n);
        }
    }

    fn split(&mut self, n: u32) {
        let (center, half, depth) = {
            let node = &self.nodes[n as usize];
            (node.center, node.half, node.depth)
        };
        let ids = match core::mem::replace(
            &mut self.nodes[n as usize].kind,
            NodeKind::Branch([0; 8]),
        ) {
            NodeKind::Leaf(ids) => ids,
            NodeKind::Branch(_) => unreachable!(),
        };
        let quarter = half * 0.5;
        let first = self.nodes.len() as u32;
        let mut children = [0u32; 8];
        for (o, slot) in children.iter_mut().enumerate() {
            *slot = first + o as u32;
            self.nodes
                .push(Node::leaf(center + octant_offset(o, quarter), quarter, depth + 1));
        }
        self.nodes[n as usize].kind = NodeKind::Branch(children);
        for id in ids {
            let o = self.nodes[n as usize].octant(self.points[id as usize]);
            if let NodeKind::Leaf(v) = &mut self.nodes[children[o] as usize].kind {
                v.push(id);
            }
        }
    }

    /// Calls `f(id, distance²)` for every point with `|p - center|² <= radius²`.
    /// Visit order is unspecified.
    pub fn for_each_within(&self, center: Vec3, radius: f64, mut f: impl FnMut(u32, f64)) {
        let Some(root) = self.root else { return };
        if !(radius >= 0.0) {
            return;
        }
        let r2 = radius * radius;
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            if node.distance_squared_to(center) > r2 {
                continue;
            }
            match &node.kind {
                NodeKind::Branch(ch) => stack.extend_from_slice(ch),
                NodeKind::Leaf(ids) => {
                    for &id in ids {
                        let d2 = self.points[id as usize].distance_squared(center);
                        if d2 <= r2 {
                            f(id, d2);
                        }
                    }
                }
            }
        }
    }

    /// Ids of all points within `radius` of `center`, ascending.
    pub fn radius_query(&self, center: Vec3, radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_within(center, radius, |id, _| out.push(id));
        out.sort_unstable();
        out
    }

    /// Every stored id, gathered by walking the tree (ascending).
    pub fn collect_ids(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.points.len());
        if let Some(root) = self.root {
            let mut stack = vec![root];
            while let Some(n) = stack.pop() {
                match &self.nodes[n as usize].kind {
                    NodeKind::Branch(ch) => stack.extend_from_slice(ch),
                    NodeKind::Leaf(ids) => out.extend_from_slice(ids),
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Depth of the deepest node.
    pub fn depth(&self) -> u32 {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Checks that every point sits in exactly one leaf whose cube contains it.
    pub fn check_consistency(&self) -> bool {
        let Some(root) = self.root else {
            return self.points.is_empty();
        };
        let mut seen = vec![false; self.points.len()];
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            match &node.kind {
                NodeKind::Branch(ch) => stack.extend_from_slice(ch),
                NodeKind::Leaf(ids) => {
                    for &id in ids {
                        let i = id as usize;
                        if i >= seen.len() || seen[i] || node.distance_squared_to(self.points[i]) > 0.0 {
                            return false;
                        }
                        seen[i] = true;
                    }
                }
            }
        }
        seen.into_iter().all(|b| b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(state: &mut u64) -> f64 {
        *state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn zero_radius_hits_exact_point() {
        let tree = Octree::build(
            OctreeConfig::default(),
            [Vec3::ZERO, Vec3::X, Vec3::new(0.5, 0.5, 0.5)],
        );
        assert_eq!(tree.radius_query(Vec3::X, 0.0), vec![1]);
    }

    #[test]
    fn grows_and_splits() {
        let mut s = 7u64;
        let pts: Vec<Vec3> = (0..2000)
            .map(|_| Vec3::new(lcg(&mut s) * 50.0 - 25.0, lcg(&mut s) * 3.0, lcg(&mut s) * -40.0))
            .collect();
        let tree = Octree::build(OctreeConfig::default(), pts.iter().copied());
        assert!(tree.check_consistency());
        assert!(tree.depth() > 2);
        assert_eq!(tree.collect_ids(), (0..2000).collect::<Vec<u32>>());
        assert_eq!(tree.radius_query(Vec3::ZERO, 1e6).len(), 2000);
    }

    #[test]
    fn duplicate_points_respect_depth_limit() {
        let cfg = OctreeConfig {
            max_leaf_points: 2,
            max_depth: 4,
            initial_half_extent: 1.0,
        };
        let tree = Octree::build(cfg, core::iter::repeat(Vec3::new(0.3, 0.3, 0.3)).take(50));
        assert!(tree.depth() <= 4);
        assert_eq!(tree.radius_query(Vec3::new(0.3, 0.3, 0.3), 0.0).len(), 50);
    }
}
