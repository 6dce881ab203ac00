//! Blood network generation and volumetric baking.
//!
//! Nodes are scattered in a box spanning the dermis slab; nodes on the
//! bottom face are path starts (deep capillaries), nodes on the top face
//! are ends (shallow capillaries). Edges come from symmetric k-nearest-
//! neighbor connectivity with Euclidean weights, and each vessel is the
//! minimum-weight path from a start to its cheapest reachable end. The
//! polylines are then baked into a scalar occupancy-style field the
//! renderer reads as extra local blood fraction.

use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BloodConfig {
    /// Box the network lives in (mm, world coordinates), min/max corners.
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
    /// Total node count including face nodes.
    pub node_count: usize,
    /// Start nodes on the bottom face (z = min).
    pub start_count: usize,
    /// End nodes on the top face (z = max).
    pub end_count: usize,
    /// Neighbors per node for graph construction.
    pub knn: usize,
    /// Vessel radius range, um.
    pub radius_um: [f64; 2],
}

impl Default for BloodConfig {
    fn default() -> Self {
        Self {
            bounds_min: [-5.0, -5.0, -3.0],
            bounds_max: [5.0, 5.0, -0.3],
            node_count: 200,
            start_count: 6,
            end_count: 10,
            knn: 8,
            radius_um: [20.0, 60.0],
        }
    }
}

impl BloodConfig {
    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if self.bounds_max[a] <= self.bounds_min[a] {
                return Err(Error::InvalidParam(format!(
                    "blood box degenerate on axis {a}: {:?}..{:?}",
                    self.bounds_min, self.bounds_max
                )));
            }
        }
        if self.node_count < self.start_count + self.end_count {
            return Err(Error::InvalidParam(format!(
                "node_count {} < start {} + end {}",
                self.node_count, self.start_count, self.end_count
            )));
        }
        if self.start_count == 0 || self.end_count == 0 {
            return Err(Error::InvalidParam("need at least one start and one end".into()));
        }
        if self.knn == 0 {
            return Err(Error::InvalidParam("knn must be >= 1".into()));
        }
        if self.radius_um[0] <= 0.0 || self.radius_um[1] < self.radius_um[0] {
            return Err(Error::InvalidParam(format!("bad radius range {:?}", self.radius_um)));
        }
        Ok(())
    }
}

/// One vessel: node ids along the path, their positions, the path cost
/// (sum of edge lengths, mm), and the tube radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselPath {
    pub node_ids: Vec<u32>,
    pub points: Vec<[f64; 3]>,
    pub cost_mm: f64,
    pub radius_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BloodNetwork {
    pub nodes: Vec<[f64; 3]>,
    /// Undirected edges as (a, b, length_mm), a < b.
    pub edges: Vec<(u32, u32, f64)>,
    pub starts: Vec<u32>,
    pub ends: Vec<u32>,
    pub paths: Vec<VesselPath>,
    pub bounds_min: [f64; 3],
    pub bounds_max: [f64; 3],
}

impl BloodNetwork {
    pub fn empty() -> Self {
        Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            starts: Vec::new(),
            ends: Vec::new(),
            paths: Vec::new(),
            bounds_min: [0.0; 3],
            bounds_max: [0.0; 3],
        }
    }

    pub fn adjacency(&self) -> Vec<Vec<(u32, f64)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for &(a, b, w) in &self.edges {
            adj[a as usize].push((b, w));
            adj[b as usize].push((a, w));
        }
        adj
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Symmetric k-NN edges over the node set, deduplicated.
fn knn_edges(nodes: &[[f64; 3]], k: usize) -> Vec<(u32, u32, f64)> {
    let n = nodes.len();
    let mut set = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut near: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist(nodes[i], nodes[j]), j))
            .collect();
        near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(_, j) in near.iter().take(k) {
            set.insert((i.min(j) as u32, i.max(j) as u32));
        }
    }
    set.into_iter()
        .map(|(a, b)| (a, b, dist(nodes[a as usize], nodes[b as usize])))
        .collect()
}

#[derive(PartialEq)]
struct HeapEntry {
    cost: f64,
    node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on cost; ties broken by node id for determinism.
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Nonnegative-weight single-source shortest paths (binary-heap Dijkstra).
/// Returns (dist, prev).
pub fn shortest_paths(adj: &[Vec<(u32, f64)>], source: u32) -> (Vec<f64>, Vec<Option<u32>>) {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[source as usize] = 0.0;
    heap.push(HeapEntry {
        cost: 0.0,
        node: source,
    });
    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if cost > dist[node as usize] {
            continue;
        }
        for &(next, w) in &adj[node as usize] {
            let cand = dist[node as usize] + w;
            if cand < dist[next as usize] {
                dist[next as usize] = cand;
                prev[next as usize] = Some(node);
                heap.push(HeapEntry {
                    cost: cand,
                    node: next,
                });
            }
        }
    }
    (dist, prev)
}

fn reconstruct(prev: &[Option<u32>], start: u32, end: u32) -> Vec<u32> {
    let mut path = vec![end];
    let mut cur = end;
    while cur != start {
        cur = prev[cur as usize].expect("end was reported reachable");
        path.push(cur);
    }
    path.reverse();
    path
}

/// Generate the network: scatter nodes, build the k-NN graph, route one
/// vessel per start to its cheapest end. If some start cannot reach any
/// end, k is doubled (graph rebuilt) up to the full node count before
/// giving up.
pub fn generate_blood_network(config: &BloodConfig, rng: &mut impl Rng) -> Result<BloodNetwork> {
    config.validate()?;
    let lo = config.bounds_min;
    let hi = config.bounds_max;
    let mut nodes = Vec::with_capacity(config.node_count);
    let rand_in = |lo: f64, hi: f64, rng: &mut dyn rand::RngCore| -> f64 {
        if lo == hi {
            lo
        } else {
            rng.gen_range(lo..hi)
        }
    };
    // Starts on the bottom face, ends on the top face, rest interior.
    for _ in 0..config.start_count {
        nodes.push([
            rand_in(lo[0], hi[0], rng),
            rand_in(lo[1], hi[1], rng),
            lo[2],
        ]);
    }
    for _ in 0..config.end_count {
        nodes.push([
            rand_in(lo[0], hi[0], rng),
            rand_in(lo[1], hi[1], rng),
            hi[2],
        ]);
    }
    for _ in 0..config.node_count - config.start_count - config.end_count {
        nodes.push([
            rand_in(lo[0], hi[0], rng),
            rand_in(lo[1], hi[1], rng),
            rand_in(lo[2], hi[2], rng),
        ]);
    }
    let starts: Vec<u32> = (0..config.start_count as u32).collect();
    let ends: Vec<u32> =
        (config.start_count as u32..(config.start_count + config.end_count) as u32).collect();

    let mut k = config.knn.min(nodes.len() - 1);
    loop {
        let edges = knn_edges(&nodes, k);
        let net = BloodNetwork {
            nodes: nodes.clone(),
            edges,
            starts: starts.clone(),
            ends: ends.clone(),
            paths: Vec::new(),
            bounds_min: lo,
            bounds_max: hi,
        };
        let adj = net.adjacency();
        let mut paths = Vec::with_capacity(starts.len());
        let mut all_reachable = true;
        for &s in &starts {
            let (dist, prev) = shortest_paths(&adj, s);
            let best = ends
                .iter()
                .filter(|&&e| dist[e as usize].is_finite())
                .min_by(|&&a, &&b| {
                    dist[a as usize]
                        .partial_cmp(&dist[b as usize])
                        .unwrap()
                        .then(a.cmp(&b))
                });
            match best {
                Some(&e) => {
                    let node_ids = reconstruct(&prev, s, e);
                    let points = node_ids.iter().map(|&i| nodes[i as usize]).collect();
                    paths.push(VesselPath {
                        node_ids,
                        points,
                        cost_mm: dist[e as usize],
                        radius_um: rng.gen_range(config.radius_um[0]..=config.radius_um[1]),
                    });
                }
                None => {
                    all_reachable = false;
                    break;
                }
            }
        }
        if all_reachable {
            return Ok(BloodNetwork { paths, ..net });
        }
        if k >= nodes.len() - 1 {
            return Err(Error::Disconnected(format!(
                "start nodes cannot reach any end even with k = {k}"
            )));
        }
        k = (k * 2).min(nodes.len() - 1);
    }
}

/// Axis-aligned voxelization target for the baked field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub dims: [usize; 3],
    /// World position of the (0,0,0) voxel center, mm.
    pub origin_mm: [f64; 3],
    /// Cubic voxel edge, mm.
    pub spacing_mm: f64,
}

/// Dense scalar field in [0, 1]; trilinear sampling, zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField3 {
    pub spec: FieldSpec,
    pub data: Vec<f32>,
}

impl ScalarField3 {
    #[inline]
    fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        let [nx, ny, _] = self.spec.dims;
        self.data[(z * ny + y) * nx + x] as f64
    }

    /// Trilinear sample at a world point; points outside the grid read 0.
    pub fn sample(&self, p: [f64; 3]) -> f64 {
        let [nx, ny, nz] = self.spec.dims;
        let g = [
            (p[0] - self.spec.origin_mm[0]) / self.spec.spacing_mm,
            (p[1] - self.spec.origin_mm[1]) / self.spec.spacing_mm,
            (p[2] - self.spec.origin_mm[2]) / self.spec.spacing_mm,
        ];
        for (a, &n) in g.iter().zip([nx, ny, nz].iter()) {
            if *a < -0.5 || *a > n as f64 - 0.5 {
                return 0.0;
            }
        }
        let cl = |v: f64, n: usize| v.clamp(0.0, (n - 1) as f64);
        let (gx, gy, gz) = (cl(g[0], nx), cl(g[1], ny), cl(g[2], nz));
        let (x0, y0, z0) = (gx.floor() as usize, gy.floor() as usize, gz.floor() as usize);
        let (x1, y1, z1) = ((x0 + 1).min(nx - 1), (y0 + 1).min(ny - 1), (z0 + 1).min(nz - 1));
        let (fx, fy, fz) = (gx - x0 as f64, gy - y0 as f64, gz - z0 as f64);
        let lerp = |a: f64, b: f64, t: f64| a * (1.0 - t) + b * t;
        let c00 = lerp(self.at(x0, y0, z0), self.at(x1, y0, z0), fx);
        let c10 = lerp(self.at(x0, y1, z0), self.at(x1, y1, z0), fx);
        let c01 = lerp(self.at(x0, y0, z1), self.at(x1, y0, z1), fx);
        let c11 = lerp(self.at(x0, y1, z1), self.at(x1, y1, z1), fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().fold(0.0f32, f32::max) as f64
    }
}

fn point_segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]];
    dist(p, q)
}

/// Bake the vessel polylines into a scalar field: at each voxel center the
/// Gaussian falloffs `exp(-(d/r)^2)` of all segments are summed and clamped
/// to 1. Beyond ~5 falloff radii a segment's contribution is negligible.
pub fn bake_blood_field(
    network: &BloodNetwork,
    spec: &FieldSpec,
    falloff_mm: f64,
) -> Result<ScalarField3> {
    if falloff_mm <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "falloff radius {falloff_mm} must be > 0"
        )));
    }
    let [nx, ny, nz] = spec.dims;
    let mut field = ScalarField3 {
        spec: spec.clone(),
        data: vec![0.0; nx * ny * nz],
    };
    let segments: Vec<([f64; 3], [f64; 3])> = network
        .paths
        .iter()
        .flat_map(|p| p.points.windows(2).map(|w| (w[0], w[1])))
        .collect();
    if segments.is_empty() {
        return Ok(field);
    }
    let inv_r2 = 1.0 / (falloff_mm * falloff_mm);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [
                    spec.origin_mm[0] + x as f64 * spec.spacing_mm,
                    spec.origin_mm[1] + y as f64 * spec.spacing_mm,
                    spec.origin_mm[2] + z as f64 * spec.spacing_mm,
                ];
                let mut sum = 0.0;
                for &(a, b) in &segments {
                    let d = point_segment_distance(p, a, b);
                    sum += (-d * d * inv_r2).exp();
                    if sum >= 1.0 {
                        break;
                    }
                }
                field.data[(z * ny + y) * nx + x] = sum.min(1.0) as f32;
            }
        }
    }
    Ok(field)
}
