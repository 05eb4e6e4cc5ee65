//! Stationary geodesic networks on surfaces.
//!
//! A network is a weighted simple graph embedded by geodesic segments.
//! Stationarity of the associated varifold is the per-vertex balance
//! Σ ω(u,v)·τ_{u,v} = 0 over incident segment tangents. The gauged
//! coordinate space gives each degree-2 vertex one degree of freedom along
//! a slice transverse to the net (killing reparametrization along chains)
//! and every other vertex its full tangent plane. On that space the
//! stationarity residual is the gradient of total mass, and its
//! derivative, the Jacobi operator, is assembled analytically from normal
//! Jacobi fields along the segments and cross-checked against a finite
//! difference Hessian of the mass.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ode::rk4_fixed;
use crate::par::map_indexed;
use crate::surface::vec3::{add, cross, dot, norm, normalize, scale, sub};
use crate::surface::{GeodesicSegment, Surface, SurfaceError};
use crate::TAU;

/// Residual below which an embedding counts as stationary.
const STATIONARY_TOL: f64 = 1e-8;
/// Eigenvalues below this fraction of the spectral radius count as kernel.
const KERNEL_TOL: f64 = 1e-7;
/// Required agreement between analytic and finite-difference assembly.
const ASSEMBLY_MATCH_TOL: f64 = 1e-6;
/// Minimum sampled clearance between segment interiors.
const SEGMENT_CLEARANCE: f64 = 1e-6;
/// Finite-difference step for the Hessian of mass. Large enough that the
/// ~1e-11 noise of the shooting-based distances stays below the assembly
/// match tolerance after the 1/h² amplification; the Richardson
/// extrapolation keeps the truncation at O(h⁴).
const FD_STEP: f64 = 1e-2;
/// RK4 steps for the Jacobi ODE along one segment.
const JACOBI_STEPS: usize = 256;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid graph: {0}")]
    GraphInvalid(String),
    #[error("immersion condition {condition} violated at vertices {vertices:?}")]
    ImmersionViolated { condition: &'static str, vertices: (usize, usize) },
    #[error("segments {e1} and {e2} overlap")]
    SegmentsOverlap { e1: usize, e2: usize },
    #[error("embedding is not stationary (residual {residual:.3e})")]
    NotStationary { residual: f64 },
    #[error("analytic and finite-difference assemblies differ by {diff:.3e}")]
    AssemblyMismatch { diff: f64 },
    #[error("Newton did not converge (residual {residual:.3e})")]
    NewtonNoConverge { residual: f64 },
    #[error("iterate left the embedding class")]
    LeftEmbeddingClass,
    #[error("Q too small: component of length {length:.3} needs Q > {required:.1}")]
    QTooSmall { length: f64, required: f64 },
    #[error(transparent)]
    Surface(#[from] SurfaceError),
}

// ---------------------------------------------------------------------------
// Graphs
// ---------------------------------------------------------------------------

/// Finite undirected weighted simple graph.
#[derive(Clone, Debug)]
pub struct GraphStructure {
    pub n_vertices: usize,
    /// Unordered pairs stored with u < v.
    pub edges: Vec<(usize, usize)>,
    /// Positive integer weight per edge.
    pub weights: Vec<u32>,
}

/// A maximal run of degree-2 vertices, either between two anchors
/// (vertices of degree ≠ 2) or forming a closed all-degree-2 loop.
#[derive(Clone, Debug)]
pub enum Chain {
    Path { anchors: (usize, usize), interior: Vec<usize>, edges: Vec<usize> },
    Loop { vertices: Vec<usize>, edges: Vec<usize> },
}

impl GraphStructure {
    pub fn new(
        n_vertices: usize,
        edges: Vec<(usize, usize)>,
        weights: Vec<u32>,
    ) -> Result<Self, NetError> {
        if weights.len() != edges.len() {
            return Err(NetError::GraphInvalid("weights/edges length mismatch".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let mut norm_edges = Vec::with_capacity(edges.len());
        for &(u, v) in &edges {
            if u == v {
                return Err(NetError::GraphInvalid(format!("loop at vertex {u}")));
            }
            if u >= n_vertices || v >= n_vertices {
                return Err(NetError::GraphInvalid(format!("edge ({u},{v}) out of range")));
            }
            let e = (u.min(v), u.max(v));
            if !seen.insert(e) {
                return Err(NetError::GraphInvalid(format!("duplicate edge {e:?}")));
            }
            norm_edges.push(e);
        }
        if weights.iter().any(|&w| w == 0) {
            return Err(NetError::GraphInvalid("zero weight".into()));
        }
        Ok(GraphStructure { n_vertices, edges: norm_edges, weights })
    }

    /// Cycle on n vertices, unit weights.
    pub fn cycle(n: usize) -> Self {
        let edges = (0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>();
        let weights = vec![1; n];
        GraphStructure::new(n, edges, weights).unwrap()
    }

    pub fn degree(&self, u: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == u || b == u).count()
    }

    pub fn neighbors(&self, u: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == u {
                    Some(b)
                } else if b == u {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    fn edge_index(&self, u: usize, v: usize) -> usize {
        let e = (u.min(v), u.max(v));
        self.edges.iter().position(|&x| x == e).expect("edge exists")
    }

    /// Decompose into maximal chains and all-degree-2 loops.
    pub fn chains(&self) -> Vec<Chain> {
        let mut out = Vec::new();
        let mut visited = vec![false; self.edges.len()];
        let anchors: Vec<usize> =
            (0..self.n_vertices).filter(|&u| self.degree(u) != 2).collect();
        for &a in &anchors {
            for start in self.neighbors(a) {
                let first = self.edge_index(a, start);
                if visited[first] {
                    continue;
                }
                visited[first] = true;
                let mut interior = Vec::new();
                let mut edges = vec![first];
                let (mut prev, mut cur) = (a, start);
                while self.degree(cur) == 2 {
                    interior.push(cur);
                    let next = *self
                        .neighbors(cur)
                        .iter()
                        .find(|&&w| w != prev)
                        .expect("degree-2 vertex has a second neighbor");
                    let e = self.edge_index(cur, next);
                    visited[e] = true;
                    edges.push(e);
                    prev = cur;
                    cur = next;
                }
                out.push(Chain::Path { anchors: (a, cur), interior, edges });
            }
        }
        // remaining edges form all-degree-2 loops
        for e0 in 0..self.edges.len() {
            if visited[e0] {
                continue;
            }
            visited[e0] = true;
            let (base, start) = self.edges[e0];
            let mut vertices = vec![base];
            let mut edges = vec![e0];
            let (mut prev, mut cur) = (base, start);
            while cur != base {
                vertices.push(cur);
                let next = *self
                    .neighbors(cur)
                    .iter()
                    .find(|&&w| w != prev)
                    .expect("loop vertex has a second neighbor");
                let e = self.edge_index(cur, next);
                visited[e] = true;
                edges.push(e);
                prev = cur;
                cur = next;
            }
            out.push(Chain::Loop { vertices, edges });
        }
        out
    }

    /// Every chain has exactly q interior vertices and every loop exactly
    /// q+1 vertices.
    pub fn is_q_subdivided(&self, q: usize) -> bool {
        self.chains().iter().all(|c| match c {
            Chain::Path { interior, .. } => interior.len() == q,
            Chain::Loop { vertices, .. } => vertices.len() == q + 1,
        })
    }
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

/// A graph embedded on a surface, with gauge slices: one transverse
/// direction per degree-2 vertex, a full tangent basis elsewhere.
#[derive(Clone)]
pub struct NetEmbedding {
    pub graph: GraphStructure,
    pub surface: Surface,
    pub positions: Vec<[f64; 3]>,
    /// Slice directions per vertex (unit tangent vectors).
    pub gauge: Vec<Vec<[f64; 3]>>,
}

impl NetEmbedding {
    pub fn new(
        graph: GraphStructure,
        surface: Surface,
        positions: Vec<[f64; 3]>,
    ) -> Result<Self, NetError> {
        assert_eq!(positions.len(), graph.n_vertices);
        let positions: Vec<[f64; 3]> =
            positions.into_iter().map(|p| surface.project(p)).collect();
        let mut gauge = Vec::with_capacity(graph.n_vertices);
        for u in 0..graph.n_vertices {
            if graph.degree(u) == 2 {
                // transverse slice: normal to the net at the vertex
                let v = graph.neighbors(u)[0];
                let seg = surface.geodesic_between(positions[u], positions[v])?;
                let n = normalize(cross(surface.normal(positions[u]), seg.start_tangent));
                gauge.push(vec![n]);
            } else {
                let (e1, e2) = surface.tangent_basis(positions[u]);
                gauge.push(vec![e1, e2]);
            }
        }
        Ok(NetEmbedding { graph, surface, positions, gauge })
    }

    /// Flattened gauge degrees of freedom: (vertex, direction) pairs.
    pub fn dofs(&self) -> Vec<(usize, [f64; 3])> {
        let mut out = Vec::new();
        for (u, dirs) in self.gauge.iter().enumerate() {
            for &d in dirs {
                out.push((u, d));
            }
        }
        out
    }

    /// Positions displaced by the gauged coordinates t (via the
    /// exponential map from the reference positions).
    pub fn positions_at(&self, t: &[f64]) -> Result<Vec<[f64; 3]>, NetError> {
        let dofs = self.dofs();
        assert_eq!(t.len(), dofs.len());
        let mut moves = vec![[0.0f64; 3]; self.graph.n_vertices];
        for (k, &(u, d)) in dofs.iter().enumerate() {
            moves[u] = add(moves[u], scale(d, t[k]));
        }
        let mut out = Vec::with_capacity(self.graph.n_vertices);
        for u in 0..self.graph.n_vertices {
            out.push(self.surface.exp_map(self.positions[u], moves[u])?);
        }
        Ok(out)
    }

    /// Total mass Σ ω·length for arbitrary vertex positions.
    pub fn mass_of(&self, positions: &[[f64; 3]]) -> Result<f64, NetError> {
        let mut m = 0.0;
        for (e, &(u, v)) in self.graph.edges.iter().enumerate() {
            m += self.graph.weights[e] as f64 * self.surface.distance(positions[u], positions[v])?;
        }
        Ok(m)
    }
}

/// The varifold induced by an embedding: weighted geodesic segments.
#[derive(Clone)]
pub struct NetVarifold {
    pub segments: Vec<(GeodesicSegment, u32)>,
    pub total_mass: f64,
    pub singular_vertices: Vec<usize>,
}

/// Build all segments, check the immersion/embedding conditions, and
/// compute the mass.
pub fn net_varifold(embedding: &NetEmbedding) -> Result<NetVarifold, NetError> {
    let g = &embedding.graph;
    let p = &embedding.positions;
    // (I₁) injectivity of the vertex map
    for u in 0..g.n_vertices {
        for v in u + 1..g.n_vertices {
            if norm(sub(p[u], p[v])) < 1e-9 {
                return Err(NetError::ImmersionViolated { condition: "I1", vertices: (u, v) });
            }
        }
    }
    // (I₂) endpoint distances below the injectivity bound, via the solve
    let results: Vec<Result<GeodesicSegment, SurfaceError>> =
        map_indexed(g.edges.len(), |e| {
            let (u, v) = g.edges[e];
            embedding.surface.geodesic_between(p[u], p[v])
        });
    let mut segments = Vec::with_capacity(g.edges.len());
    for (e, r) in results.into_iter().enumerate() {
        let seg = r.map_err(|err| match err {
            SurfaceError::BeyondInjectivityRadius { .. } => NetError::ImmersionViolated {
                condition: "I2",
                vertices: g.edges[e],
            },
            other => NetError::Surface(other),
        })?;
        segments.push((seg, g.weights[e]));
    }
    // (E₂) sampled disjointness of segment interiors
    for e1 in 0..segments.len() {
        for e2 in e1 + 1..segments.len() {
            let (a, b) = g.edges[e1];
            let (c, d) = g.edges[e2];
            let adjacent = a == c || a == d || b == c || b == d;
            let s1 = &segments[e1].0.samples;
            let s2 = &segments[e2].0.samples;
            let mut min = f64::INFINITY;
            let lo1 = if adjacent { 1 } else { 0 };
            let hi1 = if adjacent { s1.len() - 1 } else { s1.len() };
            for i in lo1..hi1 {
                let lo2 = if adjacent { 1 } else { 0 };
                let hi2 = if adjacent { s2.len() - 1 } else { s2.len() };
                for j in lo2..hi2 {
                    min = min.min(norm(sub(s1[i].pos, s2[j].pos)));
                }
            }
            if min < SEGMENT_CLEARANCE {
                return Err(NetError::SegmentsOverlap { e1, e2 });
            }
        }
    }
    let total_mass = segments.iter().map(|(s, w)| *w as f64 * s.length).sum();
    let singular_vertices = (0..g.n_vertices).filter(|&u| g.degree(u) != 2).collect();
    Ok(NetVarifold { segments, total_mass, singular_vertices })
}

// ---------------------------------------------------------------------------
// Stationarity
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct StationarityReport {
    /// −Σ_v ω(u,v)·τ_{u,v} at each vertex (a tangent vector).
    pub per_vertex: Vec<[f64; 3]>,
    pub max_norm: f64,
}

fn per_vertex_residual(
    embedding: &NetEmbedding,
    positions: &[[f64; 3]],
) -> Result<Vec<[f64; 3]>, NetError> {
    let g = &embedding.graph;
    let segs: Vec<Result<GeodesicSegment, SurfaceError>> = map_indexed(g.edges.len(), |e| {
        let (u, v) = g.edges[e];
        embedding.surface.geodesic_between(positions[u], positions[v])
    });
    let mut res = vec![[0.0f64; 3]; g.n_vertices];
    for (e, r) in segs.into_iter().enumerate() {
        let seg = r?;
        let (u, v) = g.edges[e];
        let w = g.weights[e] as f64;
        // τ_{u,v} is the unit tangent at u toward v; at the far endpoint
        // the traversal tangent points away from u, so τ_{v,u} = −end.
        res[u] = sub(res[u], scale(seg.start_tangent, w));
        res[v] = add(res[v], scale(seg.end_tangent, w));
    }
    Ok(res)
}

/// Per-vertex stationarity residual −Σ ω·τ and its max norm.
pub fn stationarity_residual(embedding: &NetEmbedding) -> Result<StationarityReport, NetError> {
    let per_vertex = per_vertex_residual(embedding, &embedding.positions)?;
    let max_norm = per_vertex.iter().map(|r| norm(*r)).fold(0.0, f64::max);
    Ok(StationarityReport { per_vertex, max_norm })
}

/// Residual projected onto the gauge slices: one number per degree of
/// freedom. This is the gradient of mass in gauged coordinates.
pub fn gauged_residual(embedding: &NetEmbedding) -> Result<Vec<f64>, NetError> {
    gauged_residual_at(embedding, &embedding.positions)
}

fn gauged_residual_at(
    embedding: &NetEmbedding,
    positions: &[[f64; 3]],
) -> Result<Vec<f64>, NetError> {
    let res = per_vertex_residual(embedding, positions)?;
    Ok(embedding.dofs().iter().map(|&(u, d)| dot(res[u], d)).collect())
}

// ---------------------------------------------------------------------------
// Newton relaxation
// ---------------------------------------------------------------------------

/// Damped Newton on the gauged residual, followed by chain rebalancing
/// (which slides vertices along the net and preserves the varifold).
pub fn relax_to_stationary(
    embedding: &NetEmbedding,
    max_iter: usize,
    tol: f64,
) -> Result<NetEmbedding, NetError> {
    let mut current = embedding.clone();
    let mut residual =
        gauged_residual(&current)?.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    for _ in 0..max_iter {
        if residual < tol {
            let balanced = rebalance(&current)?;
            net_varifold(&balanced).map_err(|_| NetError::LeftEmbeddingClass)?;
            return Ok(balanced);
        }
        let dofs = current.dofs();
        let n = dofs.len();
        let r0 = gauged_residual(&current)?;
        // finite-difference Jacobian of the gauged residual
        let h = 1e-4;
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let mut tp = vec![0.0; n];
            tp[k] = h;
            let pp = current.positions_at(&tp)?;
            tp[k] = -h;
            let pm = current.positions_at(&tp)?;
            let rp = gauged_residual_at(&current, &pp)?;
            let rm = gauged_residual_at(&current, &pm)?;
            for i in 0..n {
                j[(i, k)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let b = DVector::from_iterator(n, r0.iter().map(|x| -x));
        let svd = j.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&b, 1e-8 * smax)
            .map_err(|_| NetError::NewtonNoConverge { residual })?;
        let mut lam = 1.0;
        loop {
            let t: Vec<f64> = step.iter().map(|s| lam * s).collect();
            let cand = current.positions_at(&t)?;
            let rc = gauged_residual_at(&current, &cand)?
                .iter()
                .fold(0.0f64, |m, r| m.max(r.abs()));
            if rc < residual || lam < 1e-3 {
                current = NetEmbedding::new(
                    current.graph.clone(),
                    current.surface.clone(),
                    cand,
                )?;
                residual = rc;
                break;
            }
            lam *= 0.5;
        }
    }
    if residual < tol {
        let balanced = rebalance(&current)?;
        net_varifold(&balanced).map_err(|_| NetError::LeftEmbeddingClass)?;
        return Ok(balanced);
    }
    Err(NetError::NewtonNoConverge { residual })
}

/// Equidistance the degree-2 vertices of every chain and loop along the
/// current support by arclength.
pub fn rebalance(embedding: &NetEmbedding) -> Result<NetEmbedding, NetError> {
    let g = &embedding.graph;
    let var = net_varifold(embedding)?;
    let mut positions = embedding.positions.clone();
    for chain in g.chains() {
        let (vertices, edges, closed) = match &chain {
            Chain::Path { interior, edges, .. } => (interior.clone(), edges.clone(), false),
            Chain::Loop { vertices, edges } => (vertices[1..].to_vec(), edges.clone(), true),
        };
        if vertices.is_empty() {
            continue;
        }
        let total: f64 = edges.iter().map(|&e| var.segments[e].0.length).sum();
        let n_new = vertices.len();
        let denom = if closed { n_new + 1 } else { n_new + 1 };
        for (i, &u) in vertices.iter().enumerate() {
            let target = total * (i + 1) as f64 / denom as f64;
            // walk the ordered chain segments to the target arclength
            let mut acc = 0.0;
            for &e in &edges {
                let seg = &var.segments[e].0;
                // orient the segment along the chain walk
                let (start, tan) = if chain_edge_forward(g, &chain, e) {
                    (seg.start, seg.start_tangent)
                } else {
                    (seg.end, scale(seg.end_tangent, -1.0))
                };
                if acc + seg.length >= target - 1e-15 {
                    let (pos, _) = embedding.surface.flow(start, tan, target - acc)?;
                    positions[u] = pos;
                    break;
                }
                acc += seg.length;
            }
        }
    }
    NetEmbedding::new(g.clone(), embedding.surface.clone(), positions)
}

/// Whether edge e is traversed start→end when walking the chain in its
/// stored vertex order.
fn chain_edge_forward(g: &GraphStructure, chain: &Chain, e: usize) -> bool {
    let (eu, _ev) = g.edges[e];
    // reconstruct the walk order of the chain's vertices
    let walk: Vec<usize> = match chain {
        Chain::Path { anchors, interior, .. } => {
            let mut w = vec![anchors.0];
            w.extend_from_slice(interior);
            w.push(anchors.1);
            w
        }
        Chain::Loop { vertices, .. } => {
            let mut w = vertices.clone();
            w.push(vertices[0]);
            w
        }
    };
    for pair in walk.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if (a.min(b), a.max(b)) == g.edges[e] {
            return a == eu;
        }
    }
    unreachable!("edge not on its chain");
}

// ---------------------------------------------------------------------------
// Jacobi operator
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct JacobiOperator {
    pub matrix: DMatrix<f64>,
    pub kernel_tol: f64,
}

/// Derivatives (−φ′(0), φ′(ℓ), ψ′(ℓ)) of the fundamental normal Jacobi
/// solutions with φ(0)=1, φ(ℓ)=0 and ψ(0)=0, ψ(ℓ)=1 along a segment.
/// The Jacobi ODE j″ + K(s)j = 0 is integrated jointly with the geodesic.
fn jacobi_edge_block(surface: &Surface, seg: &GeodesicSegment) -> [[f64; 2]; 2] {
    let rhs = |_t: f64, y: &[f64; 10]| -> [f64; 10] {
        let geo: [f64; 6] = y[..6].try_into().unwrap();
        let d = surface.geodesic_rhs(&geo);
        let k = surface.gauss_curvature(surface.project([y[0], y[1], y[2]]));
        [
            d[0], d[1], d[2], d[3], d[4], d[5],
            y[7], -k * y[6], // (j₁, j₁′)
            y[9], -k * y[8], // (j₂, j₂′)
        ]
    };
    let solve = |steps: usize| -> [[f64; 2]; 2] {
        let y0 = [
            seg.start[0], seg.start[1], seg.start[2],
            seg.start_tangent[0], seg.start_tangent[1], seg.start_tangent[2],
            1.0, 0.0, 0.0, 1.0,
        ];
        let y = rk4_fixed(&rhs, 0.0, seg.length, y0, steps);
        let (j1, j1p, j2, j2p) = (y[6], y[7], y[8], y[9]);
        // φ = j₁ + c·j₂ with φ(ℓ) = 0; ψ = j₂ / j₂(ℓ)
        let c = -j1 / j2;
        let phi_p0 = c;
        let phi_pl = j1p + c * j2p;
        let psi_pl = j2p / j2;
        [[-phi_p0, phi_pl], [phi_pl, psi_pl]]
    };
    let fine = solve(JACOBI_STEPS);
    let coarse = solve(JACOBI_STEPS / 2);
    for i in 0..2 {
        for j in 0..2 {
            debug_assert!(
                (fine[i][j] - coarse[i][j]).abs() < 1e-8,
                "Jacobi ODE not converged"
            );
        }
    }
    let _ = coarse;
    fine
}

/// Assemble the Jacobi operator two ways (normal Jacobi fields per edge,
/// and a finite-difference Hessian of mass in gauged coordinates) and
/// require agreement.
pub fn jacobi_operator(embedding: &NetEmbedding) -> Result<JacobiOperator, NetError> {
    let report = stationarity_residual(embedding)?;
    if report.max_norm >= STATIONARY_TOL {
        return Err(NetError::NotStationary { residual: report.max_norm });
    }
    let g = &embedding.graph;
    let dofs = embedding.dofs();
    let n = dofs.len();
    let var = net_varifold(embedding)?;
    // (a) analytic assembly
    let blocks: Vec<[[f64; 2]; 2]> = map_indexed(g.edges.len(), |e| {
        jacobi_edge_block(&embedding.surface, &var.segments[e].0)
    });
    let mut ma = DMatrix::<f64>::zeros(n, n);
    for (e, &(u, v)) in g.edges.iter().enumerate() {
        let seg = &var.segments[e].0;
        let w = g.weights[e] as f64;
        let b = blocks[e];
        // unit normals of the segment at its endpoints (a parallel frame)
        let nu = normalize(cross(embedding.surface.normal(seg.start), seg.start_tangent));
        let nv = normalize(cross(embedding.surface.normal(seg.end), seg.end_tangent));
        // normal components of each dof at the two endpoints
        let coeff: Vec<(usize, f64, f64)> = dofs
            .iter()
            .enumerate()
            .filter_map(|(k, &(vertex, d))| {
                if vertex == u {
                    Some((k, dot(d, nu), 0.0))
                } else if vertex == v {
                    Some((k, 0.0, dot(d, nv)))
                } else {
                    None
                }
            })
            .collect();
        for &(k, au, av) in &coeff {
            for &(l, bu, bv) in &coeff {
                ma[(k, l)] += w
                    * (au * bu * b[0][0] + au * bv * b[0][1] + av * bu * b[1][0]
                        + av * bv * b[1][1]);
            }
        }
    }
    // (b) finite-difference Hessian of mass, Richardson-extrapolated from
    // steps h and h/2 to knock out the O(h²) truncation
    let m0 = embedding.mass_of(&embedding.positions)?;
    let mass_at = |t: &[f64]| -> Result<f64, NetError> {
        embedding.mass_of(&embedding.positions_at(t)?)
    };
    let fd_hessian = |h: f64| -> Result<DMatrix<f64>, NetError> {
        let mut m = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let mut t = vec![0.0; n];
            t[k] = h;
            let mp = mass_at(&t)?;
            t[k] = -h;
            let mm = mass_at(&t)?;
            m[(k, k)] = (mp - 2.0 * m0 + mm) / (h * h);
            for l in k + 1..n {
                let mut t = vec![0.0; n];
                let mut quad = 0.0;
                for (sk, sl, sgn) in [(h, h, 1.0), (-h, -h, 1.0), (h, -h, -1.0), (-h, h, -1.0)] {
                    t[k] = sk;
                    t[l] = sl;
                    quad += sgn * mass_at(&t)?;
                }
                m[(k, l)] = quad / (4.0 * h * h);
                m[(l, k)] = m[(k, l)];
            }
        }
        Ok(m)
    };
    let coarse = fd_hessian(FD_STEP)?;
    let fine = fd_hessian(0.5 * FD_STEP)?;
    let mb = (fine.scale(4.0) - coarse).scale(1.0 / 3.0);
    let diff = (&ma - &mb).amax();
    if diff >= ASSEMBLY_MATCH_TOL {
        return Err(NetError::AssemblyMismatch { diff });
    }
    Ok(JacobiOperator { matrix: ma, kernel_tol: KERNEL_TOL })
}

/// Number of eigenvalues below kernel_tol × spectral radius in magnitude.
pub fn kernel_dimension(op: &JacobiOperator) -> usize {
    let eig = op.matrix.clone().symmetric_eigen();
    let radius = eig.eigenvalues.amax();
    if radius == 0.0 {
        return op.matrix.nrows();
    }
    eig.eigenvalues
        .iter()
        .filter(|l| l.abs() < op.kernel_tol * radius)
        .count()
}

// ---------------------------------------------------------------------------
// Stratification
// ---------------------------------------------------------------------------

/// Rebuild as a Q-subdivided balanced embedding: one vertex per singular
/// point, q equidistant interior vertices per chain, q+1 per loop. The
/// support and mass of the varifold are unchanged.
pub fn stratify(embedding: &NetEmbedding, q: usize) -> Result<NetEmbedding, NetError> {
    let g = &embedding.graph;
    let var = net_varifold(embedding)?;
    let inj = embedding.surface.inj_lower_bound();
    let chains = g.chains();
    for chain in &chains {
        let edges = match chain {
            Chain::Path { edges, .. } => edges,
            Chain::Loop { edges, .. } => edges,
        };
        let len: f64 = edges.iter().map(|&e| var.segments[e].0.length).sum();
        if q as f64 * inj <= len {
            return Err(NetError::QTooSmall { length: len, required: len / inj });
        }
    }
    let anchors: Vec<usize> = (0..g.n_vertices).filter(|&u| g.degree(u) != 2).collect();
    let anchor_new: std::collections::HashMap<usize, usize> =
        anchors.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let mut positions: Vec<[f64; 3]> =
        anchors.iter().map(|&u| embedding.positions[u]).collect();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut weights: Vec<u32> = Vec::new();
    for chain in &chains {
        let (chain_edges, closed, endpoints) = match chain {
            Chain::Path { edges, anchors, .. } => (edges.clone(), false, Some(*anchors)),
            Chain::Loop { edges, .. } => (edges.clone(), true, None),
        };
        let total: f64 = chain_edges.iter().map(|&e| var.segments[e].0.length).sum();
        let w = var.segments[chain_edges[0]].1;
        let n_interior = if closed { q + 1 } else { q };
        // positions at equal arclength along the chain walk
        let mut new_ids = Vec::with_capacity(n_interior);
        for i in 0..n_interior {
            let frac = if closed {
                i as f64 / (q + 1) as f64
            } else {
                (i + 1) as f64 / (q + 1) as f64
            };
            let target = total * frac;
            let mut acc = 0.0;
            let mut placed = None;
            for &e in &chain_edges {
                let seg = &var.segments[e].0;
                let (start, tan) = if chain_edge_forward(g, chain, e) {
                    (seg.start, seg.start_tangent)
                } else {
                    (seg.end, scale(seg.end_tangent, -1.0))
                };
                if acc + seg.length >= target - 1e-12 {
                    placed = Some(embedding.surface.flow(start, tan, target - acc)?.0);
                    break;
                }
                acc += seg.length;
            }
            let pos = placed.expect("target arclength within chain");
            new_ids.push(positions.len());
            positions.push(pos);
        }
        if closed {
            for i in 0..new_ids.len() {
                edges.push((new_ids[i], new_ids[(i + 1) % new_ids.len()]));
                weights.push(w);
            }
        } else {
            let (a0, a1) = endpoints.unwrap();
            let mut walk = vec![anchor_new[&a0]];
            walk.extend(&new_ids);
            walk.push(anchor_new[&a1]);
            for pair in walk.windows(2) {
                edges.push((pair[0], pair[1]));
                weights.push(w);
            }
        }
    }
    let graph = GraphStructure::new(positions.len(), edges, weights)?;
    NetEmbedding::new(graph, embedding.surface.clone(), positions)
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Closed principal cycle in the plane {x_axis = 0}, as a (q+1)-vertex
/// loop with unit weights.
pub fn preset_cycle(surface: &Surface, axis: usize, q: usize) -> Result<NetEmbedding, NetError> {
    assert!(axis < 3);
    let n = q + 1;
    let (j, k) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut positions = Vec::with_capacity(n);
    for i in 0..n {
        let phi = TAU * i as f64 / n as f64;
        let mut p = [0.0f64; 3];
        p[j] = phi.cos();
        p[k] = phi.sin();
        positions.push(surface.project(p));
    }
    NetEmbedding::new(GraphStructure::cycle(n), surface.clone(), positions)
}

/// Equator loop {x₃ = 0}.
pub fn preset_equator(surface: &Surface, q: usize) -> Result<NetEmbedding, NetError> {
    preset_cycle(surface, 2, q)
}

/// Theta-net on the round sphere: three meridians at 120° joining the
/// poles, q interior vertices each.
pub fn preset_theta(q: usize) -> Result<NetEmbedding, NetError> {
    let surface = Surface::RoundSphere;
    let mut positions = vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    let mut edges = Vec::new();
    for m in 0..3 {
        let phi = TAU * m as f64 / 3.0;
        let mut prev = 0usize; // north pole
        for i in 1..=q {
            let theta = std::f64::consts::PI * i as f64 / (q + 1) as f64;
            positions.push([
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ]);
            let id = positions.len() - 1;
            edges.push((prev, id));
            prev = id;
        }
        edges.push((prev, 1)); // south pole
    }
    let weights = vec![1u32; edges.len()];
    let graph = GraphStructure::new(positions.len(), edges, weights)?;
    NetEmbedding::new(graph, surface, positions)
}
