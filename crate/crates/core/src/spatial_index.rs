//! Circular R-tree over projected interior circles, with a linear overflow
//! list for exterior circles and half-planes.
//!
//! Trees are bulk loaded once with Sort-Tile-Recursive packing and are
//! immutable afterwards. Queries report every stored patch that contains a
//! point or intersects a query patch, using the predicates in
//! [`crate::projection`] at the leaves and rectangle tests on the way down.

use std::ops::ControlFlow;

use crate::projection::{patch_intersects_patch, point_in_patch, HalfPlaneSide, ProjectedPatch};
use crate::scalar::Real;

pub const NODE_CAPACITY: usize = 8;
pub const MIN_FILL: usize = 3;

/// Axis-aligned rectangle on the projection plane (closed).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T> {
    pub min: [T; 2],
    pub max: [T; 2],
}

impl<T: Real> Rect<T> {
    /// Bounding box of a circle, padded by a few ulps so that boundary
    /// rounding never prunes a circle that the exact leaf test accepts.
    pub fn of_circle(center: &[T; 2], radius: T) -> Self {
        let pad = T::lit(8.0) * T::epsilon() * (center[0].abs() + center[1].abs() + radius + T::one());
        Self {
            min: [center[0] - radius - pad, center[1] - radius - pad],
            max: [center[0] + radius + pad, center[1] + radius + pad],
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            min: [self.min[0].min(other.min[0]), self.min[1].min(other.min[1])],
            max: [self.max[0].max(other.max[0]), self.max[1].max(other.max[1])],
        }
    }

    pub fn center(&self) -> [T; 2] {
        [
            (self.min[0] + self.max[0]) * T::half(),
            (self.min[1] + self.max[1]) * T::half(),
        ]
    }

    pub fn contains_point(&self, p: &[T; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    pub fn contains_rect(&self, other: &Self) -> bool {
        self.min[0] <= other.min[0]
            && self.min[1] <= other.min[1]
            && self.max[0] >= other.max[0]
            && self.max[1] >= other.max[1]
    }

    /// Distance from `p` to the nearest point of the rectangle.
    pub fn nearest_distance(&self, p: &[T; 2]) -> T {
        let dx = p[0] - p[0].max(self.min[0]).min(self.max[0]);
        let dy = p[1] - p[1].max(self.min[1]).min(self.max[1]);
        dx.hypot(dy)
    }

    /// Distance from `p` to the farthest corner.
    pub fn farthest_distance(&self, p: &[T; 2]) -> T {
        let dx = (p[0] - self.min[0]).abs().max((p[0] - self.max[0]).abs());
        let dy = (p[1] - self.min[1]).abs().max((p[1] - self.max[1]).abs());
        dx.hypot(dy)
    }

    /// Largest and smallest value of `n . x` over the rectangle.
    fn dot_range(&self, n: &[T; 2]) -> (T, T) {
        let (x0, x1) = (n[0] * self.min[0], n[0] * self.max[0]);
        let (y0, y1) = (n[1] * self.min[1], n[1] * self.max[1]);
        (x0.min(x1) + y0.min(y1), x0.max(x1) + y0.max(y1))
    }

    /// Whether any point of the rectangle may lie in `patch`.
    pub fn meets_patch(&self, patch: &ProjectedPatch<T>) -> bool {
        match *patch {
            ProjectedPatch::InteriorCircle { center, radius } => {
                self.nearest_distance(&center) <= radius
            }
            ProjectedPatch::ExteriorCircle { center, radius } => {
                self.farthest_distance(&center) >= radius
            }
            ProjectedPatch::HalfPlane {
                normal,
                offset,
                side,
            } => {
                let (lo, hi) = self.dot_range(&normal);
                match side {
                    HalfPlaneSide::AtLeast => hi - offset >= T::zero(),
                    HalfPlaneSide::Below => lo - offset < T::zero(),
                }
            }
        }
    }
}

/// A stored interior circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Circle<T> {
    pub center: [T; 2],
    pub radius: T,
}

impl<T: Real> Circle<T> {
    pub fn as_patch(&self) -> ProjectedPatch<T> {
        ProjectedPatch::InteriorCircle {
            center: self.center,
            radius: self.radius,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum NodeKind {
    /// Range into `entries`.
    Leaf { start: usize, end: usize },
    /// Range into `nodes`.
    Inner { start: usize, end: usize },
}

#[derive(Clone, Copy, Debug)]
struct Node<T> {
    mbr: Rect<T>,
    kind: NodeKind,
}

/// Work counters for a single query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub nodes_visited: usize,
    pub leaves_visited: usize,
    pub entries_tested: usize,
    pub overflow_tested: usize,
}

impl std::ops::AddAssign for QueryStats {
    fn add_assign(&mut self, o: Self) {
        self.nodes_visited += o.nodes_visited;
        self.leaves_visited += o.leaves_visited;
        self.entries_tested += o.entries_tested;
        self.overflow_tested += o.overflow_tested;
    }
}

#[derive(Clone, Debug)]
pub struct CircularRTree<T, P> {
    nodes: Vec<Node<T>>,
    root: Option<usize>,
    entries: Vec<(Circle<T>, P)>,
    overflow: Vec<(ProjectedPatch<T>, P)>,
}

impl<T: Real, P> Default for CircularRTree<T, P> {
    fn default() -> Self {
        Self {
            nodes: Vec::new(),
            root: None,
            entries: Vec::new(),
            overflow: Vec::new(),
        }
    }
}

/// Sort-Tile-Recursive grouping of `centers` into runs of at most
/// `NODE_CAPACITY` (and at least `MIN_FILL` when more than one run exists).
fn str_groups<T: Real>(centers: &[[T; 2]]) -> Vec<Vec<usize>> {
    let n = centers.len();
    if n <= NODE_CAPACITY {
        return vec![(0..n).collect()];
    }
    let runs = n.div_ceil(NODE_CAPACITY);
    let slices = (runs as f64).sqrt().ceil() as usize;
    let by = |axis: usize| {
        move |a: &usize, b: &usize| {
            centers[*a][axis]
                .partial_cmp(&centers[*b][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(by(0));

    let mut groups = Vec::with_capacity(runs + slices);
    for slice in even_chunks(&order, slices) {
        let mut slice = slice.to_vec();
        slice.sort_by(by(1));
        let k = slice.len().div_ceil(NODE_CAPACITY);
        groups.extend(even_chunks(&slice, k).into_iter().map(<[usize]>::to_vec));
    }
    groups
}

/// Splits `items` into `k` contiguous chunks whose sizes differ by at most one.
fn even_chunks<U>(items: &[U], k: usize) -> Vec<&[U]> {
    let k = k.clamp(1, items.len().max(1));
    let base = items.len() / k;
    let extra = items.len() % k;
    let mut out = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(&items[at..at + len]);
        at += len;
    }
    out
}

impl<T: Real, P> CircularRTree<T, P> {
    /// Bulk loads the interior circles; `overflow` entries are kept verbatim
    /// and scanned linearly at query time.
    pub fn build(circles: Vec<(Circle<T>, P)>, overflow: Vec<(ProjectedPatch<T>, P)>) -> Self {
        let mut tree = Self {
            overflow,
            ..Self::default()
        };
        if circles.is_empty() {
            return tree;
        }

        let centers: Vec<[T; 2]> = circles.iter().map(|(c, _)| c.center).collect();
        let groups = str_groups(&centers);
        let mut slots: Vec<Option<(Circle<T>, P)>> = circles.into_iter().map(Some).collect();
        let mut level: Vec<Node<T>> = Vec::with_capacity(groups.len());
        for g in groups {
            let start = tree.entries.len();
            let mut mbr: Option<Rect<T>> = None;
            for i in g {
                let (c, p) = slots[i].take().expect("each entry grouped once");
                let r = Rect::of_circle(&c.center, c.radius);
                mbr = Some(mbr.map_or(r, |m| m.union(&r)));
                tree.entries.push((c, p));
            }
            level.push(Node {
                mbr: mbr.expect("non-empty group"),
                kind: NodeKind::Leaf {
                    start,
                    end: tree.entries.len(),
                },
            });
        }

        while level.len() > 1 {
            let centers: Vec<[T; 2]> = level.iter().map(|n| n.mbr.center()).collect();
            let groups = str_groups(&centers);
            let mut parents = Vec::with_capacity(groups.len());
            for g in groups {
                let start = tree.nodes.len();
                let mut mbr = level[g[0]].mbr;
                for &i in &g {
                    mbr = mbr.union(&level[i].mbr);
                    tree.nodes.push(level[i]);
                }
                parents.push(Node {
                    mbr,
                    kind: NodeKind::Inner {
                        start,
                        end: tree.nodes.len(),
                    },
                });
            }
            level = parents;
        }
        tree.root = Some(tree.nodes.len());
        tree.nodes.push(level[0]);
        tree
    }

    /// Builds from arbitrary projected patches, routing interior circles to
    /// the tree and everything else to the overflow list.
    pub fn from_patches(patches: impl IntoIterator<Item = (ProjectedPatch<T>, P)>) -> Self {
        let mut circles = Vec::new();
        let mut overflow = Vec::new();
        for (patch, payload) in patches {
            match patch {
                ProjectedPatch::InteriorCircle { center, radius } => {
                    circles.push((Circle { center, radius }, payload))
                }
                other => overflow.push((other, payload)),
            }
        }
        Self::build(circles, overflow)
    }

    /// Number of stored patches (tree and overflow).
    pub fn len(&self) -> usize {
        self.entries.len() + self.overflow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .count()
    }

    pub fn overflow_len(&self) -> usize {
        self.overflow.len()
    }

    pub fn root_mbr(&self) -> Option<Rect<T>> {
        self.root.map(|r| self.nodes[r].mbr)
    }

    pub fn height(&self) -> usize {
        let mut h = 0;
        let mut at = self.root;
        while let Some(i) = at {
            h += 1;
            at = match self.nodes[i].kind {
                NodeKind::Inner { start, .. } => Some(start),
                NodeKind::Leaf { .. } => None,
            };
        }
        h
    }

    /// Visits every payload whose patch contains `p`; `f` may stop the walk.
    pub fn visit_point<F>(&self, p: &[T; 2], stats: &mut QueryStats, mut f: F) -> ControlFlow<()>
    where
        F: FnMut(&P) -> ControlFlow<()>,
    {
        self.walk(
            stats,
            |mbr| mbr.contains_point(p),
            |c| point_in_patch(p, &c.as_patch()),
            |patch| point_in_patch(p, patch),
            &mut f,
        )
    }

    /// Visits every payload whose patch intersects `q`; `f` may stop the walk.
    pub fn visit_patch<F>(
        &self,
        q: &ProjectedPatch<T>,
        stats: &mut QueryStats,
        mut f: F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&P) -> ControlFlow<()>,
    {
        self.walk(
            stats,
            |mbr| mbr.meets_patch(q),
            |c| patch_intersects_patch(q, &c.as_patch()),
            |patch| patch_intersects_patch(q, patch),
            &mut f,
        )
    }

    fn walk<F>(
        &self,
        stats: &mut QueryStats,
        node_test: impl Fn(&Rect<T>) -> bool,
        leaf_test: impl Fn(&Circle<T>) -> bool,
        overflow_test: impl Fn(&ProjectedPatch<T>) -> bool,
        f: &mut F,
    ) -> ControlFlow<()>
    where
        F: FnMut(&P) -> ControlFlow<()>,
    {
        if let Some(root) = self.root {
            let mut stack = Vec::with_capacity(16);
            stack.push(root);
            while let Some(i) = stack.pop() {
                let node = &self.nodes[i];
                stats.nodes_visited += 1;
                if !node_test(&node.mbr) {
                    continue;
                }
                match node.kind {
                    NodeKind::Inner { start, end } => stack.extend(start..end),
                    NodeKind::Leaf { start, end } => {
                        stats.leaves_visited += 1;
                        for (c, payload) in &self.entries[start..end] {
                            stats.entries_tested += 1;
                            if leaf_test(c) {
                                f(payload)?;
                            }
                        }
                    }
                }
            }
        }
        for (patch, payload) in &self.overflow {
            stats.overflow_tested += 1;
            if overflow_test(patch) {
                f(payload)?;
            }
        }
        ControlFlow::Continue(())
    }

    pub fn any_point(&self, p: &[T; 2], stats: &mut QueryStats) -> bool {
        self.visit_point(p, stats, |_| ControlFlow::Break(())).is_break()
    }

    pub fn any_patch(&self, q: &ProjectedPatch<T>, stats: &mut QueryStats) -> bool {
        self.visit_patch(q, stats, |_| ControlFlow::Break(())).is_break()
    }

    /// Exhaustive structural check: MBR containment at every level, fill
    /// bounds, and every entry reachable exactly once.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let Some(root) = self.root else {
            return if self.entries.is_empty() && self.nodes.is_empty() {
                Ok(())
            } else {
                Err("entries without a root".into())
            };
        };
        let mut seen = vec![0usize; self.entries.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            let (start, end) = match node.kind {
                NodeKind::Leaf { start, end } | NodeKind::Inner { start, end } => (start, end),
            };
            let fill = end - start;
            if fill > NODE_CAPACITY || (i != root && fill < MIN_FILL) || fill == 0 {
                return Err(format!("node {i} has fill {fill}"));
            }
            match node.kind {
                NodeKind::Leaf { .. } => {
                    for (k, (c, _)) in self.entries[start..end].iter().enumerate() {
                        if !node.mbr.contains_rect(&Rect::of_circle(&c.center, c.radius)) {
                            return Err(format!("entry {} escapes leaf {i}", start + k));
                        }
                        seen[start + k] += 1;
                    }
                }
                NodeKind::Inner { .. } => {
                    for child in start..end {
                        if !node.mbr.contains_rect(&self.nodes[child].mbr) {
                            return Err(format!("child {child} escapes node {i}"));
                        }
                        stack.push(child);
                    }
                }
            }
        }
        if let Some(k) = seen.iter().position(|&s| s != 1) {
            return Err(format!("entry {k} reached {} times", seen[k]));
        }
        Ok(())
    }
}

impl<T: Real, P: Clone> CircularRTree<T, P> {
    /// All payloads whose patch contains `p`.
    pub fn query_point(&self, p: &[T; 2]) -> Vec<P> {
        let mut out = Vec::new();
        let _ = self.visit_point(p, &mut QueryStats::default(), |x| {
            out.push(x.clone());
            ControlFlow::Continue(())
        });
        out
    }

    /// All payloads whose patch intersects `q`.
    pub fn query_patch(&self, q: &ProjectedPatch<T>) -> Vec<P> {
        self.query_patch_with_stats(q, &mut QueryStats::default())
    }

    pub fn query_patch_with_stats(&self, q: &ProjectedPatch<T>, stats: &mut QueryStats) -> Vec<P> {
        let mut out = Vec::new();
        let _ = self.visit_patch(q, stats, |x| {
            out.push(x.clone());
            ControlFlow::Continue(())
        });
        out
    }

    pub fn query_point_with_stats(&self, p: &[T; 2], stats: &mut QueryStats) -> Vec<P> {
        let mut out = Vec::new();
        let _ = self.visit_point(p, stats, |x| {
            out.push(x.clone());
            ControlFlow::Continue(())
        });
        out
    }
}
