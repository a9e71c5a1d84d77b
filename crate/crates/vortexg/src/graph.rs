//! Calculus on finite connected weighted graphs.
//!
//! A graph carries a positive vertex measure `mu` and symmetric positive
//! edge weights `w`. Integrals are measure-weighted sums,
//! `∫_V u dμ = Σ_x μ(x) u(x)`, the Laplacian is
//! `(Δu)(x) = (1/μ(x)) Σ_{y∼x} w_xy (u(y) − u(x))`, and the gradient form is
//! `Γ(u,v)(x) = (1/(2μ(x))) Σ_{y∼x} w_xy (u(y)−u(x))(v(y)−v(x))`.
//!
//! On a connected graph the Laplacian has a one-dimensional constant kernel,
//! so Poisson problems `Δu = f` are solvable exactly when `∫ f dμ = 0` and
//! have a unique mean-zero solution. [`Graph::solve_poisson`] pins one vertex,
//! factors the reduced SPD system, and corrects the mean afterwards; above
//! [`DIRECT_SOLVE_LIMIT`] vertices it switches to preconditioned conjugate
//! gradient.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::linalg;

/// Vertex count above which linear solves switch from a dense pinned
/// factorization to Jacobi-preconditioned conjugate gradient.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;

/// Relative residual target for iterative linear solves.
const CG_REL_TOL: f64 = 1e-12;

/// Relative convergence tolerance for successive Rayleigh quotients in the
/// inverse power iteration.
const EIGEN_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph must have at least one vertex")]
    Empty,
    #[error("vertex list has {vertices} entries but measure list has {measures}")]
    LengthMismatch { vertices: usize, measures: usize },
    #[error("invalid vertex id {0:?} (ids must be non-empty, without whitespace or '#')")]
    InvalidId(String),
    #[error("duplicate vertex id {0:?}")]
    DuplicateVertex(String),
    #[error("unknown vertex id {0:?}")]
    UnknownVertex(String),
    #[error("measure of vertex {id:?} must be positive, got {value}")]
    NonPositiveMeasure { id: String, value: f64 },
    #[error("weight of edge {a:?}-{b:?} must be positive, got {value}")]
    NonPositiveWeight { a: String, b: String, value: f64 },
    #[error("self-loop at vertex {0:?}")]
    SelfLoop(String),
    #[error("duplicate edge {a:?}-{b:?}")]
    DuplicateEdge { a: String, b: String },
    #[error("graph is disconnected: vertex {unreachable:?} is not reachable from {root:?}")]
    Disconnected { unreachable: String, root: String },
    #[error("source is not mean-zero: |∫f dμ| = {integral:.6e} exceeds tolerance {tolerance:.6e}")]
    IncompatibleSource { integral: f64, tolerance: f64 },
    #[error("p-norm exponent must satisfy p >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("operation requires at least two vertices")]
    TooSmall,
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
}

/// A real-valued function on the vertices of a graph, stored in the graph's
/// vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexField(Vec<f64>);

impl VertexField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self((0..len).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Maximum entry.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Minimum entry.
    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sup norm `max_x |u(x)|`.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Entry-wise `self + c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0.iter().map(|v| v + c).collect())
    }

    /// Entry-wise sum with another field of the same length.
    pub fn plus(&self, other: &VertexField) -> Self {
        assert_eq!(self.len(), other.len(), "field lengths must match");
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Entry-wise difference with another field of the same length.
    pub fn minus(&self, other: &VertexField) -> Self {
        assert_eq!(self.len(), other.len(), "field lengths must match");
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl std::ops::Index<usize> for VertexField {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for VertexField {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

/// A finite connected weighted graph with a positive vertex measure.
///
/// Invariants enforced by [`Graph::build`]: positive measures, positive
/// symmetric weights stored once per unordered pair, no self-loops, no
/// duplicate edges, connectivity.
#[derive(Debug, Clone)]
pub struct Graph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    mu: Vec<f64>,
    /// Edges normalized to `a < b`, in insertion order.
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
    volume: f64,
}

impl Graph {
    /// Validate and build a graph from vertex ids, their measures, and a
    /// weighted edge list given by vertex id.
    pub fn build(
        vertex_ids: Vec<String>,
        measures: Vec<f64>,
        edge_list: Vec<(String, String, f64)>,
    ) -> Result<Self, GraphError> {
        if vertex_ids.is_empty() {
            return Err(GraphError::Empty);
        }
        if vertex_ids.len() != measures.len() {
            return Err(GraphError::LengthMismatch {
                vertices: vertex_ids.len(),
                measures: measures.len(),
            });
        }

        let mut index = HashMap::with_capacity(vertex_ids.len());
        for (i, id) in vertex_ids.iter().enumerate() {
            if id.is_empty() || id.contains(char::is_whitespace) || id.contains('#') {
                return Err(GraphError::InvalidId(id.clone()));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(GraphError::DuplicateVertex(id.clone()));
            }
        }
        for (id, &m) in vertex_ids.iter().zip(&measures) {
            if !(m > 0.0) || !m.is_finite() {
                return Err(GraphError::NonPositiveMeasure {
                    id: id.clone(),
                    value: m,
                });
            }
        }

        let n = vertex_ids.len();
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut seen = HashMap::new();
        let mut adjacency = vec![Vec::new(); n];
        for (a_id, b_id, w) in &edge_list {
            let a = *index
                .get(a_id)
                .ok_or_else(|| GraphError::UnknownVertex(a_id.clone()))?;
            let b = *index
                .get(b_id)
                .ok_or_else(|| GraphError::UnknownVertex(b_id.clone()))?;
            if a == b {
                return Err(GraphError::SelfLoop(a_id.clone()));
            }
            if !( *w > 0.0) || !w.is_finite() {
                return Err(GraphError::NonPositiveWeight {
                    a: a_id.clone(),
                    b: b_id.clone(),
                    value: *w,
                });
            }
            let key = (a.min(b), a.max(b));
            if seen.insert(key, ()).is_some() {
                return Err(GraphError::DuplicateEdge {
                    a: a_id.clone(),
                    b: b_id.clone(),
                });
            }
            edges.push((key.0, key.1, *w));
            adjacency[a].push((b, *w));
            adjacency[b].push((a, *w));
        }
        for neighbors in &mut adjacency {
            neighbors.sort_by_key(|&(y, _)| y);
        }

        // Connectivity by breadth-first search from vertex 0.
        let mut visited = vec![false; n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &adjacency[x] {
                if !visited[y] {
                    visited[y] = true;
                    queue.push_back(y);
                }
            }
        }
        if let Some(i) = visited.iter().position(|v| !v) {
            return Err(GraphError::Disconnected {
                unreachable: vertex_ids[i].clone(),
                root: vertex_ids[0].clone(),
            });
        }

        let volume = measures.iter().sum();
        Ok(Self {
            ids: vertex_ids,
            index,
            mu: measures,
            edges,
            adjacency,
            volume,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn mu(&self, i: usize) -> f64 {
        self.mu[i]
    }

    pub fn measures(&self) -> &[f64] {
        &self.mu
    }

    /// Edges normalized to increasing index pairs, in insertion order.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    /// `Σ_{y∼x} w_xy`, the diagonal of the combinatorial Laplacian matrix.
    pub fn weighted_degree(&self, x: usize) -> f64 {
        self.adjacency[x].iter().map(|&(_, w)| w).sum()
    }

    /// Total measure `|V| = Σ_x μ(x)`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    fn check_field(&self, u: &VertexField) {
        assert_eq!(
            u.len(),
            self.len(),
            "field length must equal the vertex count"
        );
    }

    /// `(Δu)(x) = (1/μ(x)) Σ_{y∼x} w_xy (u(y) − u(x))`.
    pub fn laplacian(&self, u: &VertexField) -> VertexField {
        self.check_field(u);
        VertexField::from_fn(self.len(), |x| {
            let ux = u[x];
            let s: f64 = self.adjacency[x].iter().map(|&(y, w)| w * (u[y] - ux)).sum();
            s / self.mu[x]
        })
    }

    /// `Γ(u,v)(x) = (1/(2μ(x))) Σ_{y∼x} w_xy (u(y)−u(x))(v(y)−v(x))`.
    pub fn gradient_form(&self, u: &VertexField, v: &VertexField) -> VertexField {
        self.check_field(u);
        self.check_field(v);
        VertexField::from_fn(self.len(), |x| {
            let (ux, vx) = (u[x], v[x]);
            let s: f64 = self.adjacency[x]
                .iter()
                .map(|&(y, w)| w * (u[y] - ux) * (v[y] - vx))
                .sum();
            s / (2.0 * self.mu[x])
        })
    }

    /// `∫_V u dμ = Σ_x μ(x) u(x)`.
    pub fn integrate(&self, u: &VertexField) -> f64 {
        self.check_field(u);
        u.iter().zip(&self.mu).map(|(v, m)| v * m).sum()
    }

    /// Measure-weighted mean `∫u dμ / |V|`.
    pub fn mean(&self, u: &VertexField) -> f64 {
        self.integrate(u) / self.volume
    }

    /// `‖u‖_p = (∫ |u|^p dμ)^{1/p}` for `p ≥ 1`.
    pub fn lp_norm(&self, u: &VertexField, p: f64) -> Result<f64, GraphError> {
        if !(p >= 1.0) {
            return Err(GraphError::InvalidExponent(p));
        }
        self.check_field(u);
        let s: f64 = u
            .iter()
            .zip(&self.mu)
            .map(|(v, m)| m * v.abs().powf(p))
            .sum();
        Ok(s.powf(1.0 / p))
    }

    /// `‖u‖_{W^{1,2}} = (∫ (|∇u|² + u²) dμ)^{1/2}` with `|∇u|² = Γ(u,u)`.
    pub fn h1_norm(&self, u: &VertexField) -> f64 {
        let gamma = self.gradient_form(u, u);
        let s: f64 = u
            .iter()
            .zip(gamma.iter())
            .zip(&self.mu)
            .map(|((v, g), m)| m * (g + v * v))
            .sum();
        s.sqrt()
    }

    /// Apply the combinatorial Laplacian matrix `L = D_w − W`, i.e.
    /// `(L u)(x) = Σ_{y∼x} w_xy (u(x) − u(y)) = −μ(x) (Δu)(x)`.
    pub(crate) fn apply_stiffness(&self, u: &[f64], out: &mut [f64]) {
        for x in 0..self.len() {
            let ux = u[x];
            let mut s = 0.0;
            for &(y, w) in &self.adjacency[x] {
                s += w * (ux - u[y]);
            }
            out[x] = s;
        }
    }

    /// Solve `Δu = f` with `∫u dμ = 0` on a connected graph.
    ///
    /// Requires `|∫f dμ| ≤ 1e-10 · ‖f‖_∞ · |V|`; otherwise the system is
    /// inconsistent and [`GraphError::IncompatibleSource`] is returned.
    pub fn solve_poisson(&self, f: &VertexField) -> Result<VertexField, GraphError> {
        PoissonSolver::new(self)?.solve(f)
    }

    /// Smallest nonzero eigenvalue of `−Δ` (self-adjoint in the μ-weighted
    /// inner product) and a corresponding μ-normalized eigenvector.
    ///
    /// Computed by inverse power iteration on the mean-zero subspace; the
    /// iteration stops once successive Rayleigh quotients agree to relative
    /// precision `1e-12`.
    pub fn smallest_positive_eigenpair(&self) -> Result<(f64, VertexField), GraphError> {
        let n = self.len();
        if n < 2 {
            return Err(GraphError::TooSmall);
        }
        let solver = PoissonSolver::new(self)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9_7f4a_7c15);
        let mut x = VertexField::from_fn(n, |_| rng.random_range(-1.0..1.0));
        self.project_mean_zero(&mut x);
        self.normalize_l2(&mut x)?;

        let mut previous = f64::INFINITY;
        for _ in 0..100_000 {
            let minus_x = VertexField::from_fn(n, |i| -x[i]);
            let mut y = solver.solve(&minus_x)?;
            self.project_mean_zero(&mut y);
            self.normalize_l2(&mut y)?;
            // Rayleigh quotient ⟨−Δy, y⟩_μ / ⟨y, y⟩_μ = ∫Γ(y,y)dμ for ‖y‖ = 1.
            let rho = self.integrate(&self.gradient_form(&y, &y));
            if (rho - previous).abs() <= EIGEN_REL_TOL * rho.abs() {
                return Ok((rho, y));
            }
            previous = rho;
            x = y;
        }
        Err(GraphError::LinearSolve(
            "inverse power iteration did not converge".into(),
        ))
    }

    /// The sharp Poincaré constant: the smallest `C` with
    /// `∫u² dμ ≤ C ∫|∇u|² dμ` over mean-zero fields, equal to `1/λ₂`.
    pub fn poincare_constant(&self) -> Result<f64, GraphError> {
        let (lambda2, _) = self.smallest_positive_eigenpair()?;
        Ok(1.0 / lambda2)
    }

    fn project_mean_zero(&self, u: &mut VertexField) {
        let m = self.mean(u);
        for v in &mut u.0 {
            *v -= m;
        }
    }

    fn normalize_l2(&self, u: &mut VertexField) -> Result<(), GraphError> {
        let norm = self.lp_norm(u, 2.0)?;
        if norm == 0.0 {
            return Err(GraphError::LinearSolve(
                "eigenvector iterate collapsed to zero".into(),
            ));
        }
        for v in &mut u.0 {
            *v /= norm;
        }
        Ok(())
    }
}

/// Reusable Poisson solver for a fixed graph. The pinned-vertex
/// factorization (or the CG preconditioner) is prepared once, so repeated
/// right-hand sides — as in the inverse power iteration — amortize setup.
pub struct PoissonSolver<'g> {
    graph: &'g Graph,
    backend: PoissonBackend,
}

enum PoissonBackend {
    /// Single-vertex graph: the only compatible source is zero.
    Trivial,
    /// Dense Cholesky of the stiffness matrix with vertex 0 removed.
    Direct(linalg::SpdSolver),
    /// Jacobi-preconditioned CG on the full singular system.
    Iterative { diag: Vec<f64> },
}

impl<'g> PoissonSolver<'g> {
    pub fn new(graph: &'g Graph) -> Result<Self, GraphError> {
        let n = graph.len();
        let backend = if n == 1 {
            PoissonBackend::Trivial
        } else if n <= DIRECT_SOLVE_LIMIT {
            let m = n - 1;
            let mut a = DMatrix::<f64>::zeros(m, m);
            for x in 1..n {
                a[(x - 1, x - 1)] = graph.weighted_degree(x);
                for &(y, w) in graph.neighbors(x) {
                    if y >= 1 {
                        a[(x - 1, y - 1)] = -w;
                    }
                }
            }
            let solver = linalg::SpdSolver::new(a).ok_or_else(|| {
                GraphError::LinearSolve("pinned Laplacian is not positive definite".into())
            })?;
            PoissonBackend::Direct(solver)
        } else {
            let diag = (0..n).map(|x| graph.weighted_degree(x)).collect();
            PoissonBackend::Iterative { diag }
        };
        Ok(Self { graph, backend })
    }

    /// Solve `Δu = f`, returning the unique mean-zero solution.
    pub fn solve(&self, f: &VertexField) -> Result<VertexField, GraphError> {
        let g = self.graph;
        g.check_field(f);
        let integral = g.integrate(f);
        let tolerance = 1e-10 * f.max_abs() * g.volume();
        if integral.abs() > tolerance {
            return Err(GraphError::IncompatibleSource {
                integral: integral.abs(),
                tolerance,
            });
        }

        let n = g.len();
        // Δu = f  ⇔  L u = −μ∘f with L = D_w − W.
        let b: Vec<f64> = (0..n).map(|x| -g.mu(x) * f[x]).collect();
        let mut u = match &self.backend {
            PoissonBackend::Trivial => vec![0.0],
            PoissonBackend::Direct(solver) => {
                let b_red = DVector::from_iterator(n - 1, b[1..].iter().copied());
                let y = solver.solve(&b_red);
                let mut u = vec![0.0; n];
                u[1..].copy_from_slice(y.as_slice());
                u
            }
            PoissonBackend::Iterative { diag } => {
                // Project the right-hand side onto the range of L (⊥ constants).
                let shift: f64 = b.iter().sum::<f64>() / n as f64;
                let b_proj: Vec<f64> = b.iter().map(|v| v - shift).collect();
                let apply = |v: &[f64]| {
                    let mut out = vec![0.0; n];
                    g.apply_stiffness(v, &mut out);
                    out
                };
                linalg::pcg(apply, diag, &b_proj, CG_REL_TOL, 20 * n + 200)
                    .map_err(GraphError::LinearSolve)?
            }
        };

        let mut field = VertexField::new(std::mem::take(&mut u));
        g.project_mean_zero(&mut field);
        Ok(field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{generate, GenConfig, GraphKind};
    use proptest::prelude::*;

    fn k2() -> Graph {
        Graph::build(
            vec!["a".into(), "b".into()],
            vec![1.0, 1.0],
            vec![("a".into(), "b".into(), 1.0)],
        )
        .unwrap()
    }

    fn triangle() -> Graph {
        Graph::build(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1.0, 2.0, 0.5],
            vec![
                ("a".into(), "b".into(), 1.0),
                ("b".into(), "c".into(), 2.0),
                ("a".into(), "c".into(), 0.25),
            ],
        )
        .unwrap()
    }

    fn random_graph(size: usize, seed: u64) -> Graph {
        let cfg = GenConfig {
            mu_range: Some((0.1, 10.0)),
            weight_range: Some((0.1, 10.0)),
            ..GenConfig::default()
        };
        generate(GraphKind::RandomConnected, size, seed, &cfg).unwrap()
    }

    fn random_field(g: &Graph, seed: u64) -> VertexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        VertexField::from_fn(g.len(), |_| rng.random_range(-3.0..3.0))
    }

    #[test]
    fn builds_smallest_connected_graph() {
        let g = k2();
        assert_eq!(g.len(), 2);
        assert_eq!(g.volume(), 2.0);
        assert_eq!(g.edges(), &[(0, 1, 1.0)]);
    }

    #[test]
    fn rejects_nonpositive_weight() {
        let err = Graph::build(
            vec!["a".into(), "b".into()],
            vec![1.0, 1.0],
            vec![("a".into(), "b".into(), -1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::NonPositiveWeight { .. }));
    }

    #[test]
    fn rejects_nonpositive_measure() {
        let err = Graph::build(
            vec!["a".into(), "b".into()],
            vec![1.0, 0.0],
            vec![("a".into(), "b".into(), 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::NonPositiveMeasure { .. }));
    }

    #[test]
    fn rejects_self_loop_and_duplicate_edge() {
        let err = Graph::build(
            vec!["a".into(), "b".into()],
            vec![1.0, 1.0],
            vec![("a".into(), "a".into(), 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::SelfLoop(_)));

        let err = Graph::build(
            vec!["a".into(), "b".into()],
            vec![1.0, 1.0],
            vec![
                ("a".into(), "b".into(), 1.0),
                ("b".into(), "a".into(), 2.0),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::DuplicateEdge { .. }));
    }

    #[test]
    fn rejects_disconnected() {
        let err = Graph::build(
            vec!["a".into(), "b".into(), "c".into()],
            vec![1.0, 1.0, 1.0],
            vec![("a".into(), "b".into(), 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::Disconnected { .. }));
    }

    #[test]
    fn rejects_unknown_vertex_and_duplicates() {
        let err = Graph::build(
            vec!["a".into(), "b".into()],
            vec![1.0, 1.0],
            vec![("a".into(), "z".into(), 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::UnknownVertex(_)));

        let err = Graph::build(
            vec!["a".into(), "a".into()],
            vec![1.0, 1.0],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::DuplicateVertex(_)));
    }

    #[test]
    fn laplacian_kills_constants() {
        let g = triangle();
        let u = VertexField::constant(3, 4.25);
        let lap = g.laplacian(&u);
        assert_eq!(lap.max_abs(), 0.0);
    }

    #[test]
    fn laplacian_two_path_hand_value() {
        let g = k2();
        let u = VertexField::new(vec![0.0, 1.0]);
        let lap = g.laplacian(&u);
        assert_eq!(lap.as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn laplacian_integral_vanishes_on_triangle() {
        let g = triangle();
        let u = random_field(&g, 7);
        let lap = g.laplacian(&u);
        // Independent oracle: the raw double summation. Each edge contributes
        // w (u(y) − u(x)) to x and the negation to y, so the sum telescopes.
        let mut oracle = 0.0;
        let mut magnitude = 0.0;
        for x in 0..g.len() {
            for &(y, w) in g.neighbors(x) {
                oracle += w * (u[y] - u[x]);
                magnitude += (w * (u[y] - u[x])).abs();
            }
        }
        assert!(oracle.abs() <= 1e-12 * magnitude.max(1.0));
        assert!(g.integrate(&lap).abs() <= 1e-12 * magnitude.max(1.0));
    }

    #[test]
    fn gradient_form_two_path_hand_value() {
        let g = k2();
        let u = VertexField::new(vec![0.0, 1.0]);
        let gamma = g.gradient_form(&u, &u);
        assert_eq!(gamma.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn gradient_form_is_nonnegative_on_diagonal() {
        let g = random_graph(40, 3);
        let u = random_field(&g, 11);
        let gamma = g.gradient_form(&u, &u);
        assert!(gamma.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn integrate_hand_values() {
        let g = Graph::build(
            vec!["a".into(), "b".into()],
            vec![1.0, 2.0],
            vec![("a".into(), "b".into(), 1.0)],
        )
        .unwrap();
        assert_eq!(g.integrate(&VertexField::new(vec![3.0, 4.0])), 11.0);
        assert_eq!(g.integrate(&VertexField::constant(2, 1.0)), g.volume());
    }

    #[test]
    fn norms_hand_values() {
        let g = k2();
        let zero = VertexField::zeros(2);
        assert_eq!(g.lp_norm(&zero, 1.0).unwrap(), 0.0);
        assert_eq!(g.h1_norm(&zero), 0.0);

        let u = VertexField::new(vec![0.0, 1.0]);
        assert!((g.lp_norm(&u, 2.0).unwrap() - 1.0).abs() < 1e-15);
        // Γ(u,u) = (1/2, 1/2) so ∫|∇u|²dμ = 1 and ∫u²dμ = 1.
        assert!((g.h1_norm(&u) - 2.0_f64.sqrt()).abs() < 1e-15);

        assert!(matches!(
            g.lp_norm(&u, 0.5),
            Err(GraphError::InvalidExponent(_))
        ));
    }

    #[test]
    fn poincare_constant_on_k2() {
        let g = k2();
        let (lambda2, vec) = g.smallest_positive_eigenpair().unwrap();
        assert!((lambda2 - 2.0).abs() < 1e-12);
        assert!((g.poincare_constant().unwrap() - 0.5).abs() < 1e-12);
        // Eigenvector residual: −Δv = λ₂ v.
        let lap = g.laplacian(&vec);
        for x in 0..2 {
            assert!((-lap[x] - lambda2 * vec[x]).abs() < 1e-9);
        }
    }

    #[test]
    fn poincare_inequality_on_random_graph() {
        let g = random_graph(60, 17);
        let c = g.poincare_constant().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let mut u = VertexField::from_fn(g.len(), |_| rng.random_range(-1.0..1.0));
            g.project_mean_zero(&mut u);
            let lhs = g.integrate(&VertexField::from_fn(g.len(), |x| u[x] * u[x]));
            let rhs = c * g.integrate(&g.gradient_form(&u, &u));
            assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
        }
    }

    #[test]
    fn poisson_zero_source() {
        let g = triangle();
        let u = g.solve_poisson(&VertexField::zeros(3)).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn poisson_two_path_hand_value() {
        let g = k2();
        let two_pi = 2.0 * std::f64::consts::PI;
        let f = VertexField::new(vec![two_pi, -two_pi]);
        let u = g.solve_poisson(&f).unwrap();
        assert!((u[0] + std::f64::consts::PI).abs() < 1e-12);
        assert!((u[1] - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn poisson_rejects_incompatible_source() {
        let g = k2();
        let err = g
            .solve_poisson(&VertexField::new(vec![1.0, 0.0]))
            .unwrap_err();
        assert!(matches!(err, GraphError::IncompatibleSource { .. }));
    }

    proptest! {
        #[test]
        fn zero_integral_of_laplacian(size in 3usize..80, seed in 0u64..5000) {
            let g = random_graph(size, seed);
            let u = random_field(&g, seed ^ 0xabcd);
            let lap = g.laplacian(&u);
            let scale: f64 = lap.iter().zip(g.measures()).map(|(v, m)| (v * m).abs()).sum();
            prop_assert!(g.integrate(&lap).abs() <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn summation_by_parts(size in 3usize..80, seed in 0u64..5000) {
            let g = random_graph(size, seed);
            let u = random_field(&g, seed ^ 0x1111);
            let v = random_field(&g, seed ^ 0x2222);
            let lhs = g.integrate(&g.gradient_form(&u, &v));
            let lap_u = g.laplacian(&u);
            let rhs = -g.integrate(&VertexField::from_fn(g.len(), |x| v[x] * lap_u[x]));
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn polarization_identity(size in 3usize..40, seed in 0u64..5000) {
            let g = random_graph(size, seed);
            let u = random_field(&g, seed ^ 0x3333);
            let v = random_field(&g, seed ^ 0x4444);
            let sum = u.plus(&v);
            let diff = u.minus(&v);
            let lhs = g.gradient_form(&u, &v);
            let a = g.gradient_form(&sum, &sum);
            let b = g.gradient_form(&diff, &diff);
            for x in 0..g.len() {
                let rhs = 0.25 * (a[x] - b[x]);
                prop_assert!((lhs[x] - rhs).abs() <= 1e-12 * (a[x].abs() + b[x].abs()).max(1.0));
            }
        }

        #[test]
        fn integrate_is_linear(size in 2usize..40, seed in 0u64..5000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let g = random_graph(size, seed);
            let u = random_field(&g, seed ^ 0x5555);
            let v = random_field(&g, seed ^ 0x6666);
            let combo = VertexField::from_fn(g.len(), |x| alpha * u[x] + beta * v[x]);
            let lhs = g.integrate(&combo);
            let rhs = alpha * g.integrate(&u) + beta * g.integrate(&v);
            prop_assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(rhs.abs()).max(1.0));
        }

        #[test]
        fn holder_l2_vs_l1_linf(size in 2usize..40, seed in 0u64..5000) {
            let g = random_graph(size, seed);
            let u = random_field(&g, seed ^ 0x7777);
            let l2 = g.lp_norm(&u, 2.0).unwrap();
            let l1 = g.lp_norm(&u, 1.0).unwrap();
            prop_assert!(l2 * l2 <= l1 * u.max_abs() * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn poisson_is_right_inverse_of_laplacian(size in 2usize..60, seed in 0u64..5000) {
            let g = random_graph(size, seed);
            // Build a compatible source as the Laplacian of a random field.
            let w = random_field(&g, seed ^ 0x8888);
            let f = g.laplacian(&w);
            let u = g.solve_poisson(&f).unwrap();
            let residual = g.laplacian(&u).minus(&f);
            prop_assert!(residual.max_abs() <= 1e-10 * f.max_abs().max(1.0));
            prop_assert!(g.integrate(&u).abs() <= 1e-10 * u.max_abs().max(1.0) * g.volume());
            // Composing the other way reproduces the mean-zero part of w.
            let mut w0 = w.clone();
            g.project_mean_zero(&mut w0);
            let diff = u.minus(&w0);
            prop_assert!(diff.max_abs() <= 1e-9 * w0.max_abs().max(1.0));
        }

        #[test]
        fn poincare_holds_for_mean_zero_fields(size in 2usize..50, seed in 0u64..2000) {
            let g = random_graph(size, seed);
            let c = g.poincare_constant().unwrap();
            let mut u = random_field(&g, seed ^ 0x9999);
            g.project_mean_zero(&mut u);
            let lhs = g.integrate(&VertexField::from_fn(g.len(), |x| u[x] * u[x]));
            let rhs = c * g.integrate(&g.gradient_form(&u, &u));
            prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-12);
        }
    }
}
