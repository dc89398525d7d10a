//! Static sensor triangulations and the centralized clique-complex oracle.
//!
//! A [`Triangulation`] is a planar Whitney triangulation: its triangles are
//! exactly the 3-cliques of its edge graph, interior vertices have cyclic
//! neighborhoods and boundary vertices have path neighborhoods. Thresholding
//! sensor readings yields a [`SubComplex`], whose per-component counts and
//! Betti numbers are what the distributed protocol has to reproduce.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use crate::error::TopologyError;
use crate::protocol::SensorId;

/// A planar Whitney triangulation with per-vertex cyclic neighbor orders.
#[derive(Clone, Debug)]
pub struct Triangulation {
    coords: Vec<(f64, f64)>,
    grid: Option<Vec<(i32, i32)>>,
    dims: Option<(usize, usize)>,
    orders: Vec<Vec<SensorId>>,
    cyclic: Vec<bool>,
    edges: Vec<(SensorId, SensorId)>,
    triangles: Vec<[SensorId; 3]>,
}

impl Triangulation {
    /// Builds a triangulation from planar vertex coordinates and an edge list.
    ///
    /// Neighbor orders run counterclockwise starting from the east. Boundary
    /// orders are rotated so that they start right after the gap, which makes
    /// them paths whose two ends are not adjacent.
    pub fn from_geometry(
        coords: Vec<(f64, f64)>,
        edge_list: &[(usize, usize)],
    ) -> Result<Self, TopologyError> {
        let n = coords.len();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(u, v) in edge_list {
            if u >= n || v >= n || u == v {
                return Err(TopologyError::InvalidEdge(u, v));
            }
            adj[u].insert(v);
            adj[v].insert(u);
        }

        let mut orders = Vec::with_capacity(n);
        let mut cyclic = Vec::with_capacity(n);
        for v in 0..n {
            let (order, is_cyclic) = angular_order(v, &coords, &adj)?;
            orders.push(order.into_iter().map(SensorId::from).collect());
            cyclic.push(is_cyclic);
        }

        let mut edges = Vec::new();
        for (u, nbrs) in adj.iter().enumerate() {
            for &v in nbrs.range(u + 1..) {
                edges.push((SensorId::from(u), SensorId::from(v)));
            }
        }

        let mut triangles = Vec::new();
        for (u, nbrs) in adj.iter().enumerate() {
            for &v in nbrs.range(u + 1..) {
                for &w in adj[v].range(v + 1..) {
                    if nbrs.contains(&w) {
                        triangles.push([u, v, w].map(SensorId::from));
                    }
                }
            }
        }

        Ok(Self {
            coords,
            grid: None,
            dims: None,
            orders,
            cyclic,
            edges,
            triangles,
        })
    }

    /// Wheel with `spokes` rim vertices: center `0`, rim `1..=spokes`
    /// counterclockwise starting east.
    pub fn wheel(spokes: usize) -> Result<Self, TopologyError> {
        if spokes < 4 {
            return Err(TopologyError::GridTooSmall(spokes, spokes));
        }
        let mut coords = vec![(0.0, 0.0)];
        let mut edges = Vec::new();
        for i in 0..spokes {
            let a = 2.0 * PI * i as f64 / spokes as f64;
            coords.push((a.cos(), a.sin()));
            edges.push((0, i + 1));
            edges.push((i + 1, (i + 1) % spokes + 1));
        }
        Self::from_geometry(coords, &edges)
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = SensorId> + '_ {
        (0..self.len()).map(SensorId::from)
    }

    /// Neighbors of `v` in cyclic (or path) order.
    pub fn neighbors(&self, v: SensorId) -> &[SensorId] {
        &self.orders[v.index()]
    }

    /// True when the neighborhood of `v` is a closed cycle (interior vertex).
    pub fn is_cyclic(&self, v: SensorId) -> bool {
        self.cyclic[v.index()]
    }

    pub fn is_boundary(&self, v: SensorId) -> bool {
        !self.is_cyclic(v)
    }

    pub fn degree(&self, v: SensorId) -> usize {
        self.orders[v.index()].len()
    }

    pub fn are_adjacent(&self, u: SensorId, v: SensorId) -> bool {
        self.orders[u.index()].contains(&v)
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(SensorId, SensorId)] {
        &self.edges
    }

    /// Triangles as sorted vertex triples, sorted.
    pub fn triangles(&self) -> &[[SensorId; 3]] {
        &self.triangles
    }

    pub fn coords(&self, v: SensorId) -> (f64, f64) {
        self.coords[v.index()]
    }

    /// `(row, col)` for grid-built triangulations.
    pub fn grid_position(&self, v: SensorId) -> Option<(i32, i32)> {
        self.grid.as_ref().map(|g| g[v.index()])
    }

    /// `(rows, cols)` for grid-built triangulations.
    pub fn grid_dims(&self) -> Option<(usize, usize)> {
        self.dims
    }

    /// Sensor at `(row, col)` of a grid-built triangulation.
    pub fn at(&self, row: usize, col: usize) -> Option<SensorId> {
        let (rows, cols) = self.dims?;
        (row < rows && col < cols).then(|| SensorId::from(row * cols + col))
    }
}

fn angular_order(
    v: usize,
    coords: &[(f64, f64)],
    adj: &[BTreeSet<usize>],
) -> Result<(Vec<usize>, bool), TopologyError> {
    let (x0, y0) = coords[v];
    let angle = |u: usize| {
        let (x, y) = coords[u];
        let a = (y - y0).atan2(x - x0);
        if a < -1e-9 {
            a + 2.0 * PI
        } else {
            a.max(0.0)
        }
    };
    let mut order: Vec<usize> = adj[v].iter().copied().collect();
    order.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));
    let k = order.len();
    if k <= 1 {
        return Ok((order, false));
    }

    let gaps: Vec<usize> = (0..k)
        .filter(|&i| !adj[order[i]].contains(&order[(i + 1) % k]))
        .collect();
    match gaps.len() {
        0 if k >= 3 => Ok((order, true)),
        0 => {
            // Two mutually adjacent neighbors: open the larger angular gap.
            let span = |i: usize| {
                let d = angle(order[(i + 1) % k]) - angle(order[i]);
                if d <= 0.0 {
                    d + 2.0 * PI
                } else {
                    d
                }
            };
            let cut = if span(0) >= span(1) { 0 } else { 1 };
            order.rotate_left(cut + 1);
            Ok((order, false))
        }
        1 => {
            order.rotate_left(gaps[0] + 1);
            Ok((order, false))
        }
        _ => Err(TopologyError::NotWhitney(v)),
    }
}

/// Builds a hexagonal-grid triangulation: one sensor per hex cell, odd rows
/// shifted right by half a cell, links to the (up to six) adjacent cells.
/// Sensor ids are assigned row-major from zero.
pub fn build_hex_grid(rows: usize, cols: usize) -> Result<Triangulation, TopologyError> {
    if rows < 2 || cols < 2 {
        return Err(TopologyError::GridTooSmall(rows, cols));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut coords = Vec::with_capacity(rows * cols);
    let mut grid = Vec::with_capacity(rows * cols);
    let h = 3f64.sqrt() / 2.0;
    for r in 0..rows {
        for c in 0..cols {
            let shift = if r % 2 == 1 { 0.5 } else { 0.0 };
            coords.push((c as f64 + shift, r as f64 * h));
            grid.push((r as i32, c as i32));
        }
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                // The two cells above: odd rows lean right, even rows lean left.
                let (left, right) = if r % 2 == 1 {
                    (c as i64, c as i64 + 1)
                } else {
                    (c as i64 - 1, c as i64)
                };
                for cc in [left, right] {
                    if cc >= 0 && (cc as usize) < cols {
                        edges.push((id(r, c), id(r + 1, cc as usize)));
                    }
                }
            }
        }
    }
    let mut tri = Triangulation::from_geometry(coords, &edges)?;
    tri.grid = Some(grid);
    tri.dims = Some((rows, cols));
    Ok(tri)
}

/// Vertex, edge and triangle counts of one connected component.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ComponentInfo {
    pub n: u32,
    pub m: u32,
    pub f: u32,
}

impl ComponentInfo {
    pub const fn new(n: u32, m: u32, f: u32) -> Self {
        Self { n, m, f }
    }

    /// First Betti number of this component alone.
    pub fn holes(&self) -> i64 {
        -(self.n as i64) + self.m as i64 - self.f as i64 + 1
    }
}

impl fmt::Display for ComponentInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.n, self.m, self.f)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct BettiPair {
    pub beta0: u32,
    pub beta1: u32,
}

impl BettiPair {
    pub fn euler(&self) -> i64 {
        self.beta0 as i64 - self.beta1 as i64
    }
}

/// The clique complex induced by the active sensors of a triangulation.
#[derive(Clone, Debug)]
pub struct SubComplex<'a> {
    tri: &'a Triangulation,
    active: Vec<bool>,
}

impl<'a> SubComplex<'a> {
    pub fn new(tri: &'a Triangulation, active: Vec<bool>) -> Self {
        assert_eq!(
            tri.len(),
            active.len(),
            "activity vector must cover every sensor"
        );
        Self { tri, active }
    }

    pub fn from_active<I: IntoIterator<Item = SensorId>>(tri: &'a Triangulation, ids: I) -> Self {
        let mut active = vec![false; tri.len()];
        for id in ids {
            active[id.index()] = true;
        }
        Self { tri, active }
    }

    pub fn triangulation(&self) -> &'a Triangulation {
        self.tri
    }

    pub fn is_active(&self, v: SensorId) -> bool {
        self.active[v.index()]
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// `(vertices, edges, triangles)` of the whole subcomplex.
    pub fn simplex_counts(&self) -> (u64, u64, u64) {
        let a = |v: SensorId| self.active[v.index()];
        let k0 = self.active_count() as u64;
        let k1 = self
            .tri
            .edges()
            .iter()
            .filter(|(u, v)| a(*u) && a(*v))
            .count() as u64;
        let k2 = self
            .tri
            .triangles()
            .iter()
            .filter(|t| t.iter().all(|&v| a(v)))
            .count() as u64;
        (k0, k1, k2)
    }
}

/// Marks sensors whose value reaches `theta` as active.
pub fn threshold_subcomplex<'a>(
    tri: &'a Triangulation,
    values: &[f64],
    theta: f64,
) -> Result<SubComplex<'a>, TopologyError> {
    if values.len() != tri.len() {
        return Err(TopologyError::MissingValues {
            expected: tri.len(),
            got: values.len(),
        });
    }
    Ok(SubComplex::new(
        tri,
        values.iter().map(|&v| v >= theta).collect(),
    ))
}

/// Connected components of the active 1-skeleton with exact simplex counts,
/// ordered by their smallest member.
pub fn components_with_counts(sub: &SubComplex<'_>) -> Vec<(Vec<SensorId>, ComponentInfo)> {
    let tri = sub.triangulation();
    let mut label = vec![usize::MAX; tri.len()];
    let mut comps: Vec<(Vec<SensorId>, ComponentInfo)> = Vec::new();
    let mut queue = VecDeque::new();
    for start in tri.vertices() {
        if !sub.is_active(start) || label[start.index()] != usize::MAX {
            continue;
        }
        let c = comps.len();
        let mut members = Vec::new();
        label[start.index()] = c;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            members.push(v);
            for &w in tri.neighbors(v) {
                if sub.is_active(w) && label[w.index()] == usize::MAX {
                    label[w.index()] = c;
                    queue.push_back(w);
                }
            }
        }
        members.sort();
        let n = members.len() as u32;
        comps.push((members, ComponentInfo::new(n, 0, 0)));
    }
    for &(u, v) in tri.edges() {
        if sub.is_active(u) && sub.is_active(v) {
            comps[label[u.index()]].1.m += 1;
        }
    }
    for t in tri.triangles() {
        if t.iter().all(|&v| sub.is_active(v)) {
            comps[label[t[0].index()]].1.f += 1;
        }
    }
    comps
}

/// Betti numbers of the subcomplex: component count and
/// `beta1 = -n + m - f + beta0`.
pub fn betti(sub: &SubComplex<'_>) -> BettiPair {
    let comps = components_with_counts(sub);
    let (n, m, f) = sub.simplex_counts();
    let beta0 = comps.len() as i64;
    let beta1 = -(n as i64) + m as i64 - f as i64 + beta0;
    debug_assert_eq!(beta1, comps.iter().map(|(_, c)| c.holes()).sum::<i64>());
    BettiPair {
        beta0: beta0 as u32,
        beta1: u32::try_from(beta1).expect("planar clique complex has non-negative beta1"),
    }
}

/// Alternating simplex count `k0 - k1 + k2`.
pub fn euler_characteristic(sub: &SubComplex<'_>) -> i64 {
    let (k0, k1, k2) = sub.simplex_counts();
    k0 as i64 - k1 as i64 + k2 as i64
}
