use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::flowfield::Point2;
use crate::mdp::StateSpace;

/// Minimum signed triangle area, km².
const MIN_AREA: f64 = 1e-12;

/// Barycentric tolerance for point location.
pub(crate) const LOCATE_TOL: f64 = 1e-9;

pub(crate) fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

/// Barycentric coordinates of `p` in triangle `(a, b, c)`.
pub fn barycentric(p: Point2, a: Point2, b: Point2, c: Point2) -> [f64; 3] {
    let area = signed_area(a, b, c);
    let l0 = signed_area(p, b, c) / area;
    let l1 = signed_area(a, p, c) / area;
    [l0, l1, 1.0 - l0 - l1]
}

fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(&Point2::new(a.x + t * dx, a.y + t * dy))
}

/// Conforming P1 triangulation over (a subset of) the state grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    node_to_state: Vec<usize>,
    boundary: Vec<bool>,
    goal_node: usize,
    node_triangles: Vec<Vec<usize>>,
}

impl Mesh {
    /// Validates and orients the triangles counter-clockwise.
    pub fn from_parts(
        nodes: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        node_to_state: Vec<usize>,
        goal_node: usize,
    ) -> Result<Self> {
        let n = nodes.len();
        if node_to_state.len() != n {
            return Err(Error::Mesh("node/state map length mismatch".into()));
        }
        if goal_node >= n {
            return Err(Error::Mesh(format!("goal node {goal_node} out of range")));
        }
        let mut triangles = triangles;
        let mut node_triangles = vec![Vec::new(); n];
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!("triangle {t} references a missing node")));
            }
            let area = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if area.abs() <= MIN_AREA {
                return Err(Error::Mesh(format!("triangle {t} is degenerate (area {area:e})")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
            for &v in tri.iter() {
                node_triangles[v].push(t);
            }
        }
        if let Some(orphan) = node_triangles.iter().position(|ts| ts.is_empty()) {
            return Err(Error::Mesh(format!("node {orphan} belongs to no triangle")));
        }

        let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &triangles {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edge_use.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary = vec![false; n];
        for (&(a, b), &count) in &edge_use {
            if count > 2 {
                return Err(Error::Mesh(format!("edge ({a}, {b}) shared by {count} triangles")));
            }
            if count == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        Ok(Self {
            nodes,
            triangles,
            node_to_state,
            boundary,
            goal_node,
            node_triangles,
        })
    }

    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn node_to_state(&self) -> &[usize] {
        &self.node_to_state
    }

    pub fn goal_node(&self) -> usize {
        self.goal_node
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&v| self.boundary[v]).collect()
    }

    pub fn triangles_of(&self, node: usize) -> &[usize] {
        &self.node_triangles[node]
    }

    pub fn node_of_state(&self, state: usize) -> Option<usize> {
        self.node_to_state.iter().position(|&s| s == state)
    }

    pub fn vertices(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].map(|v| self.nodes[v])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        a.distance(&b).max(b.distance(&c)).max(c.distance(&a))
    }

    pub fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        let [a, b, c] = self.vertices(t);
        barycentric(p, a, b, c)
    }

    /// First triangle containing `p` (brute-force scan).
    pub fn locate(&self, p: Point2) -> Option<(usize, [f64; 3])> {
        (0..self.triangles.len()).find_map(|t| {
            let l = self.barycentric(t, p);
            l.iter().all(|&x| x >= -LOCATE_TOL).then_some((t, l))
        })
    }

    /// Every triangle containing `p`; more than one on shared edges and nodes.
    pub fn containing(&self, p: Point2) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&t| self.barycentric(t, p).iter().all(|&x| x >= -LOCATE_TOL))
            .collect()
    }

    pub fn distance_to_triangle(&self, t: usize, p: Point2) -> f64 {
        if self.barycentric(t, p).iter().all(|&x| x >= 0.0) {
            return 0.0;
        }
        let [a, b, c] = self.vertices(t);
        segment_distance(p, a, b)
            .min(segment_distance(p, b, c))
            .min(segment_distance(p, c, a))
    }

    pub fn nearest_triangle(&self, p: Point2) -> usize {
        (0..self.triangles.len())
            .map(|t| (t, self.distance_to_triangle(t, p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(t, _)| t)
            .expect("mesh has triangles")
    }

    pub fn nearest_node(&self, p: Point2) -> usize {
        self.nodes
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.distance(&p).total_cmp(&b.1.distance(&p)))
            .map(|(v, _)| v)
            .expect("mesh has nodes")
    }

    /// Nodes within `rings` edge hops of `node`, `node` first.
    pub fn patch(&self, node: usize, rings: usize) -> Vec<usize> {
        let mut seen = BTreeSet::from([node]);
        let mut order = vec![node];
        let mut frontier = vec![node];
        for _ in 0..rings {
            let mut next = Vec::new();
            for &v in &frontier {
                for &t in &self.node_triangles[v] {
                    for &w in &self.triangles[t] {
                        if seen.insert(w) {
                            order.push(w);
                            next.push(w);
                        }
                    }
                }
            }
            frontier = next;
        }
        order
    }

    /// True when no node lies strictly inside an edge it is not a vertex of.
    pub fn is_conforming(&self) -> bool {
        for tri in &self.triangles {
            for e in 0..3 {
                let (a, b) = (self.nodes[tri[e]], self.nodes[tri[(e + 1) % 3]]);
                let len = a.distance(&b);
                for (v, p) in self.nodes.iter().enumerate() {
                    if tri.contains(&v) {
                        continue;
                    }
                    let on_line = signed_area(a, b, *p).abs() <= 1e-9 * len * len;
                    let inside = segment_distance(*p, a, b) <= 1e-9 * len
                        && p.distance(&a) > 1e-9 * len
                        && p.distance(&b) > 1e-9 * len;
                    if on_line && inside {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// CSV `node_id,state_id,x_km,y_km,boundary`.
    pub fn write_nodes<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_id", "state_id", "x_km", "y_km", "boundary"])?;
        for (v, p) in self.nodes.iter().enumerate() {
            w.write_record([
                v.to_string(),
                self.node_to_state[v].to_string(),
                p.x.to_string(),
                p.y.to_string(),
                u8::from(self.boundary[v]).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV `tri_id,n0,n1,n2` (counter-clockwise).
    pub fn write_triangles<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tri_id", "n0", "n1", "n2"])?;
        for (t, tri) in self.triangles.iter().enumerate() {
            w.write_record([
                t.to_string(),
                tri[0].to_string(),
                tri[1].to_string(),
                tri[2].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Inserts state `new` into a triangulation whose vertices are state ids.
///
/// Interior points split their triangle in three, points on edges split every
/// triangle sharing that edge, and points outside the cover are joined to
/// every boundary edge they can see.
fn insert_point(tris: &mut Vec<[usize; 3]>, pos: &dyn Fn(usize) -> Point2, new: usize) {
    let p = pos(new);
    let mut out = Vec::with_capacity(tris.len() + 4);
    let mut hit = false;
    for &tri in tris.iter() {
        let [a, b, c] = tri.map(pos);
        let l = barycentric(p, a, b, c);
        if l.iter().any(|&x| x < -LOCATE_TOL) {
            out.push(tri);
            continue;
        }
        hit = true;
        match l.iter().position(|&x| x.abs() <= LOCATE_TOL) {
            // on the edge opposite vertex `k`
            Some(k) => {
                let (v, e0, e1) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
                out.push([v, e0, new]);
                out.push([v, new, e1]);
            }
            None => {
                out.push([tri[0], tri[1], new]);
                out.push([tri[1], tri[2], new]);
                out.push([tri[2], tri[0], new]);
            }
        }
    }
    if !hit {
        let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in tris.iter() {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edge_use.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        for tri in tris.iter() {
            let ccw = signed_area(pos(tri[0]), pos(tri[1]), pos(tri[2])) > 0.0;
            for e in 0..3 {
                let (mut a, mut b) = (tri[e], tri[(e + 1) % 3]);
                if edge_use[&(a.min(b), a.max(b))] != 1 {
                    continue;
                }
                if !ccw {
                    std::mem::swap(&mut a, &mut b);
                }
                // interior lies left of a -> b; visible if p is strictly right
                if signed_area(pos(a), pos(b), p) < -MIN_AREA {
                    out.push([b, a, new]);
                }
            }
        }
    }
    *tris = out;
}

/// Structured triangulation of the state grid.
///
/// `k = 1` keeps every state and splits each cell along its SW–NE diagonal.
/// `k = 2` keeps the checkerboard states with `i + j` even; they form a
/// lattice of diamonds, each split along its horizontal diagonal, with
/// half-diamonds filling the grid boundary. The goal is always a node.
pub fn build_mesh(states: &StateSpace, k: usize) -> Result<Mesh> {
    let (nx, ny) = (states.nx(), states.ny());
    if nx < 2 || ny < 2 {
        return Err(Error::Mesh(format!("cannot triangulate a {nx}x{ny} grid")));
    }
    let id = |i: usize, j: usize| states.index(i, j);
    let mut tris: Vec<[usize; 3]> = Vec::new();
    let mut keep: BTreeSet<usize> = BTreeSet::new();
    match k {
        1 => {
            keep.extend(0..states.len());
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    tris.push([a, b, c]);
                    tris.push([a, c, d]);
                }
            }
        }
        2 => {
            for j in 0..ny {
                for i in 0..nx {
                    if (i + j) % 2 == 0 {
                        keep.insert(id(i, j));
                        continue;
                    }
                    // (i, j) is the center of a diamond of kept states
                    let left = (i > 0).then(|| id(i - 1, j));
                    let right = (i + 1 < nx).then(|| id(i + 1, j));
                    let down = (j > 0).then(|| id(i, j - 1));
                    let up = (j + 1 < ny).then(|| id(i, j + 1));
                    match (left, right) {
                        (Some(l), Some(r)) => {
                            if let Some(d) = down {
                                tris.push([l, d, r]);
                            }
                            if let Some(u) = up {
                                tris.push([l, r, u]);
                            }
                        }
                        (None, Some(r)) => {
                            if let (Some(d), Some(u)) = (down, up) {
                                tris.push([d, r, u]);
                            }
                        }
                        (Some(l), None) => {
                            if let (Some(d), Some(u)) = (down, up) {
                                tris.push([d, u, l]);
                            }
                        }
                        (None, None) => {}
                    }
                }
            }
            if tris.is_empty() {
                return Err(Error::Mesh(format!(
                    "a {nx}x{ny} grid leaves no triangles at k = 2"
                )));
            }
            if keep.insert(states.goal()) {
                insert_point(&mut tris, &|s| states.center(s), states.goal());
            }
        }
        _ => return Err(Error::Mesh(format!("subsample factor must be 1 or 2, got {k}"))),
    }

    let node_to_state: Vec<usize> = keep.into_iter().collect();
    let renumber: HashMap<usize, usize> = node_to_state
        .iter()
        .enumerate()
        .map(|(v, &s)| (s, v))
        .collect();
    let nodes = node_to_state.iter().map(|&s| states.center(s)).collect();
    let triangles = tris.into_iter().map(|t| t.map(|s| renumber[&s])).collect();
    Mesh::from_parts(nodes, triangles, node_to_state, renumber[&states.goal()])
}
