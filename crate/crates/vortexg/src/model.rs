//! The non-Abelian multiple vortex system on a weighted graph.
//!
//! The unknowns `(u₁, u₂)` satisfy
//!
//! ```text
//! Δu₁ = −N m_e² + m_e² (e^{u₁/N + (N−1)u₂/N} + (N−1) e^{u₁/N − u₂/N}) + 4π Σ_j δ_{p_j}
//! Δu₂ =           m_g² (e^{u₁/N + (N−1)u₂/N} −       e^{u₁/N − u₂/N}) + 4π Σ_j δ_{p_j}
//! ```
//!
//! with Dirac masses `δ_p` at the vortex vertices. Subtracting a background
//! field `u₀` with `Δu₀ = −4πn/|V| + 4π Σ_j δ_{p_j}` regularizes the system:
//! the shifted unknowns `v_i = u_i − u₀` solve a smooth semilinear system
//! which is the Euler–Lagrange equation of a convex energy functional. This
//! module provides the Dirac sources, the background field, the existence
//! threshold `4πn/(N m_e²) + 4πn(N−1)/(N m_g²)`, residuals, the energy with
//! its gradient and Hessian, the two integral identities satisfied by every
//! solution, the a priori sign/gap bounds, and the equal-coupling scalar
//! reduction `Δv = λ₁(e^{u₀+v} − 1) + 4πn/|V|`.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::graph::{Graph, GraphError, VertexField};

/// `4π`, the quantized flux carried by each vortex.
pub const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Exponent arguments beyond this trip the overflow guard instead of
/// silently producing `inf`. Near-threshold sweeps drive fields toward −∞;
/// a *positive* exponent this large can only mean divergence.
pub const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown vertex id {0:?}")]
    UnknownVertex(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("exponent overflow guard tripped at vertex {vertex:?} (argument {argument:.6e} > 700)")]
    OverflowGuard { vertex: String, argument: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Coupling parameters of the system: the group rank `N ≥ 2` and the two
/// positive squared masses `m_e²`, `m_g²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    group_rank: u32,
    me2: f64,
    mg2: f64,
}

impl ModelParams {
    /// `N = 1` is rejected: the second equation decouples and the gap bound
    /// `N ln(N/(N−1))` is undefined.
    pub fn new(group_rank: u32, me2: f64, mg2: f64) -> Result<Self, ModelError> {
        if group_rank < 2 {
            return Err(ModelError::InvalidParams(format!(
                "group rank must be at least 2, got {group_rank}"
            )));
        }
        if !(me2 > 0.0) || !me2.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "me2 must be positive, got {me2}"
            )));
        }
        if !(mg2 > 0.0) || !mg2.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "mg2 must be positive, got {mg2}"
            )));
        }
        Ok(Self {
            group_rank,
            me2,
            mg2,
        })
    }

    pub fn group_rank(&self) -> u32 {
        self.group_rank
    }

    pub fn me2(&self) -> f64 {
        self.me2
    }

    pub fn mg2(&self) -> f64 {
        self.mg2
    }

    pub(crate) fn rank_f(&self) -> f64 {
        f64::from(self.group_rank)
    }
}

/// Vortex locations with positive integer multiplicities. Repeated vertices
/// are folded together; `n` counts vortices with multiplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VortexSet {
    entries: Vec<(usize, u32)>,
    total: u32,
}

impl VortexSet {
    pub fn empty() -> Self {
        Self {
            entries: Vec::new(),
            total: 0,
        }
    }

    /// Build from `(vertex id, multiplicity)` pairs resolved against `g`.
    pub fn new(g: &Graph, entries: &[(&str, u32)]) -> Result<Self, ModelError> {
        let resolved = entries
            .iter()
            .map(|&(id, mult)| {
                g.index_of(id)
                    .map(|i| (i, mult))
                    .ok_or_else(|| ModelError::UnknownVertex(id.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_indices(g, &resolved)
    }

    /// Build from `(vertex index, multiplicity)` pairs.
    pub fn from_indices(g: &Graph, entries: &[(usize, u32)]) -> Result<Self, ModelError> {
        let mut folded: Vec<(usize, u32)> = Vec::new();
        for &(idx, mult) in entries {
            if idx >= g.len() {
                return Err(ModelError::UnknownVertex(format!("#{idx}")));
            }
            if mult == 0 {
                return Err(ModelError::InvalidParams(format!(
                    "vortex multiplicity at {:?} must be positive",
                    g.id(idx)
                )));
            }
            match folded.iter_mut().find(|(i, _)| *i == idx) {
                Some((_, m)) => *m += mult,
                None => folded.push((idx, mult)),
            }
        }
        let total = folded.iter().map(|&(_, m)| m).sum();
        Ok(Self {
            entries: folded,
            total,
        })
    }

    /// `(vertex index, multiplicity)` pairs in first-appearance order.
    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// Total vortex number `n` counted with multiplicity.
    pub fn vortex_number(&self) -> u32 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// The background field `u₀` solving `Δu₀ = −4πn/|V| + 4π Σ_j δ_{p_j}`,
/// normalized so that `max_V u₀ = 0` (hence `u₀ ≤ 0`).
#[derive(Debug, Clone)]
pub struct BackgroundField {
    u0: VertexField,
    gauge: f64,
    vortex_number: u32,
}

impl BackgroundField {
    pub fn u0(&self) -> &VertexField {
        &self.u0
    }

    /// The additive constant applied to the mean-zero Poisson solution.
    pub fn gauge(&self) -> f64 {
        self.gauge
    }

    pub fn vortex_number(&self) -> u32 {
        self.vortex_number
    }

    /// A copy shifted by the constant `c`. The equation `Δu₀ = …` only
    /// determines `u₀` up to a constant; shifted backgrounds are exactly the
    /// other gauges, and the physical solution `(u₁, u₂)` must not depend on
    /// the choice.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            u0: self.u0.shifted(c),
            gauge: self.gauge + c,
            vortex_number: self.vortex_number,
        }
    }
}

/// The regularized unknowns `(v₁, v₂)` of the shifted system.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub v1: VertexField,
    pub v2: VertexField,
}

impl State {
    pub fn zeros(len: usize) -> Self {
        Self {
            v1: VertexField::zeros(len),
            v2: VertexField::zeros(len),
        }
    }
}

/// The μ-normalized Dirac sum: `d(x) = Σ_j mult_j 1[x = p_j] / μ(x)`, so that
/// `∫ d dμ = n`.
pub fn dirac_field(g: &Graph, vortices: &VortexSet) -> VertexField {
    let mut values = vec![0.0; g.len()];
    for &(idx, mult) in vortices.entries() {
        values[idx] += f64::from(mult) / g.mu(idx);
    }
    VertexField::new(values)
}

/// Right-hand side of the background equation: `−4πn/|V| + 4π Σ_j δ_{p_j}`.
/// Integrates to zero by construction.
pub fn vortex_source(g: &Graph, vortices: &VortexSet) -> VertexField {
    let dirac = dirac_field(g, vortices);
    let shift = -FOUR_PI * f64::from(vortices.vortex_number()) / g.volume();
    VertexField::from_fn(g.len(), |x| shift + FOUR_PI * dirac[x])
}

/// Solve the background equation and fix the gauge `max_V u₀ = 0`.
pub fn background_field(g: &Graph, vortices: &VortexSet) -> Result<BackgroundField, ModelError> {
    let source = vortex_source(g, vortices);
    let mean_zero = g.solve_poisson(&source)?;
    let gauge = -mean_zero.max();
    Ok(BackgroundField {
        u0: mean_zero.shifted(gauge),
        gauge,
        vortex_number: vortices.vortex_number(),
    })
}

/// The existence threshold `4πn/(N m_e²) + 4πn(N−1)/(N m_g²)`. The system
/// has a (unique) solution exactly when `|V|` strictly exceeds it.
pub fn threshold(p: &ModelParams, n: u32) -> f64 {
    let rank = p.rank_f();
    let nv = f64::from(n);
    FOUR_PI * nv / (rank * p.me2()) + FOUR_PI * nv * (rank - 1.0) / (rank * p.mg2())
}

/// Outcome of the volume-vs-threshold comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    /// `|V| > threshold`, strictly; equality is infeasible.
    pub feasible: bool,
    pub threshold: f64,
    pub margin: f64,
}

pub fn check_feasible(g: &Graph, p: &ModelParams, n: u32) -> Feasibility {
    let threshold = threshold(p, n);
    let margin = g.volume() - threshold;
    Feasibility {
        feasible: margin > 0.0,
        threshold,
        margin,
    }
}

/// Exponential terms of the regularized system at a state:
/// `e^{a}` with `a = u₀ + v₁/N + (N−1)v₂/N` and `e^{b}` with
/// `b = (v₁ − v₂)/N`. Fails with [`ModelError::OverflowGuard`] when an
/// exponent argument exceeds [`EXP_GUARD`].
fn exp_terms(
    g: &Graph,
    p: &ModelParams,
    bg: &BackgroundField,
    s: &State,
) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let rank = p.rank_f();
    let u0 = bg.u0();
    let mut ea = Vec::with_capacity(g.len());
    let mut eb = Vec::with_capacity(g.len());
    for x in 0..g.len() {
        let a = u0[x] + (s.v1[x] + (rank - 1.0) * s.v2[x]) / rank;
        let b = (s.v1[x] - s.v2[x]) / rank;
        let worst = a.max(b);
        if worst > EXP_GUARD {
            return Err(ModelError::OverflowGuard {
                vertex: g.id(x).to_string(),
                argument: worst,
            });
        }
        ea.push(a.exp());
        eb.push(b.exp());
    }
    Ok((ea, eb))
}

/// Residual of the regularized system at `(v₁, v₂)`:
///
/// ```text
/// r₁ = Δv₁ − λ₁ (e^{u₀} e^{v₁/N + (N−1)v₂/N} + (N−1) e^{(v₁−v₂)/N} − N) − 4πn/|V|
/// r₂ = Δv₂ − λ₂ (e^{u₀} e^{v₁/N + (N−1)v₂/N} −       e^{(v₁−v₂)/N})     − 4πn/|V|
/// ```
///
/// with `λ₁ = m_e²`, `λ₂ = m_g²`. A solution has `r₁ = r₂ = 0`.
pub fn residual(
    g: &Graph,
    p: &ModelParams,
    bg: &BackgroundField,
    s: &State,
) -> Result<(VertexField, VertexField), ModelError> {
    let (ea, eb) = exp_terms(g, p, bg, s)?;
    let rank = p.rank_f();
    let source = FOUR_PI * f64::from(bg.vortex_number()) / g.volume();
    let lap1 = g.laplacian(&s.v1);
    let lap2 = g.laplacian(&s.v2);
    let r1 = VertexField::from_fn(g.len(), |x| {
        lap1[x] - p.me2() * (ea[x] + (rank - 1.0) * eb[x] - rank) - source
    });
    let r2 = VertexField::from_fn(g.len(), |x| lap2[x] - p.mg2() * (ea[x] - eb[x]) - source);
    Ok((r1, r2))
}

/// The convex energy functional whose stationary points are exactly the
/// solutions of the regularized system:
///
/// ```text
/// J(v₁,v₂) = ∫ { Γ(v₁,v₁)/(2m_e²) + (N−1)Γ(v₂,v₂)/(2m_g²)
///              + N e^{u₀ + v₁/N + (N−1)v₂/N} + N(N−1) e^{(v₁−v₂)/N}
///              − (N − 4πn/(m_e²|V|)) v₁ + (4πn(N−1)/(m_g²|V|)) v₂ } dμ
/// ```
pub fn energy(
    g: &Graph,
    p: &ModelParams,
    bg: &BackgroundField,
    s: &State,
) -> Result<f64, ModelError> {
    let (ea, eb) = exp_terms(g, p, bg, s)?;
    let rank = p.rank_f();
    let nv = f64::from(bg.vortex_number());
    let vol = g.volume();
    let c1 = rank - FOUR_PI * nv / (p.me2() * vol);
    let c2 = FOUR_PI * nv * (rank - 1.0) / (p.mg2() * vol);
    let gamma1 = g.gradient_form(&s.v1, &s.v1);
    let gamma2 = g.gradient_form(&s.v2, &s.v2);
    let mut total = 0.0;
    for x in 0..g.len() {
        let density = gamma1[x] / (2.0 * p.me2())
            + (rank - 1.0) * gamma2[x] / (2.0 * p.mg2())
            + rank * ea[x]
            + rank * (rank - 1.0) * eb[x]
            - c1 * s.v1[x]
            + c2 * s.v2[x];
        total += g.mu(x) * density;
    }
    Ok(total)
}

/// Coordinate gradient of the energy: `∂J/∂v₁(x) = −μ(x) r₁(x)/m_e²` and
/// `∂J/∂v₂(x) = −μ(x)(N−1) r₂(x)/m_g²`, so `∇J = 0` exactly at solutions.
pub fn energy_gradient(
    g: &Graph,
    p: &ModelParams,
    bg: &BackgroundField,
    s: &State,
) -> Result<(VertexField, VertexField), ModelError> {
    let (r1, r2) = residual(g, p, bg, s)?;
    let rank = p.rank_f();
    let g1 = VertexField::from_fn(g.len(), |x| -g.mu(x) * r1[x] / p.me2());
    let g2 = VertexField::from_fn(g.len(), |x| -g.mu(x) * (rank - 1.0) * r2[x] / p.mg2());
    Ok((g1, g2))
}

/// Hessian of the energy as a symmetric operator on pairs of fields:
/// the stiffness part scaled by `1/m_e²` resp. `(N−1)/m_g²`, plus per-vertex
/// blocks `μ(x)[e^a/N (1,N−1)⊗(1,N−1) + (N−1)e^b/N (1,−1)⊗(1,−1)]`.
/// Positive definite for `N ≥ 2`: the two block directions span the plane.
pub struct EnergyHessian<'g> {
    graph: &'g Graph,
    /// `1/m_e²` on the `v₁` stiffness block.
    stiff1: f64,
    /// `(N−1)/m_g²` on the `v₂` stiffness block.
    stiff2: f64,
    /// `μ(x) e^{a(x)} / N` per vertex.
    pa: Vec<f64>,
    /// `μ(x) (N−1) e^{b(x)} / N` per vertex.
    pb: Vec<f64>,
    rank: f64,
}

/// Build the Hessian operator at a state.
pub fn energy_hessian<'g>(
    g: &'g Graph,
    p: &ModelParams,
    bg: &BackgroundField,
    s: &State,
) -> Result<EnergyHessian<'g>, ModelError> {
    let (ea, eb) = exp_terms(g, p, bg, s)?;
    let rank = p.rank_f();
    let pa = (0..g.len()).map(|x| g.mu(x) * ea[x] / rank).collect();
    let pb = (0..g.len())
        .map(|x| g.mu(x) * (rank - 1.0) * eb[x] / rank)
        .collect();
    Ok(EnergyHessian {
        graph: g,
        stiff1: 1.0 / p.me2(),
        stiff2: (rank - 1.0) / p.mg2(),
        pa,
        pb,
        rank,
    })
}

impl EnergyHessian<'_> {
    /// Apply to a direction `(z₁, z₂)`; the result pairs with the coordinate
    /// gradient, i.e. `H z ≈ (∇J(s + h z) − ∇J(s − h z)) / 2h`.
    pub fn apply(&self, z1: &VertexField, z2: &VertexField) -> (VertexField, VertexField) {
        let n = self.graph.len();
        assert_eq!(z1.len(), n, "field length must equal the vertex count");
        assert_eq!(z2.len(), n, "field length must equal the vertex count");
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        self.graph.apply_stiffness(z1.as_slice(), &mut l1);
        self.graph.apply_stiffness(z2.as_slice(), &mut l2);
        let rank = self.rank;
        let out1 = VertexField::from_fn(n, |x| {
            let mix = z1[x] + (rank - 1.0) * z2[x];
            let gap = z1[x] - z2[x];
            self.stiff1 * l1[x] + self.pa[x] * mix + self.pb[x] * gap
        });
        let out2 = VertexField::from_fn(n, |x| {
            let mix = z1[x] + (rank - 1.0) * z2[x];
            let gap = z1[x] - z2[x];
            self.stiff2 * l2[x] + (rank - 1.0) * self.pa[x] * mix - self.pb[x] * gap
        });
        (out1, out2)
    }

    /// Quadratic form `zᵀ H z`.
    pub fn quadratic_form(&self, z1: &VertexField, z2: &VertexField) -> f64 {
        let (h1, h2) = self.apply(z1, z2);
        let mut total = 0.0;
        for x in 0..self.graph.len() {
            total += z1[x] * h1[x] + z2[x] * h2[x];
        }
        total
    }

    /// Diagonal of the coordinate matrix, ordered `[v₁-block, v₂-block]`.
    pub(crate) fn diagonal(&self) -> Vec<f64> {
        let g = self.graph;
        let n = g.len();
        let rank = self.rank;
        let mut diag = Vec::with_capacity(2 * n);
        for x in 0..n {
            diag.push(self.stiff1 * g.weighted_degree(x) + self.pa[x] + self.pb[x]);
        }
        for x in 0..n {
            diag.push(
                self.stiff2 * g.weighted_degree(x)
                    + (rank - 1.0) * (rank - 1.0) * self.pa[x]
                    + self.pb[x],
            );
        }
        diag
    }

    /// Dense `2n × 2n` coordinate matrix, unknowns ordered `[v₁; v₂]`.
    pub(crate) fn assemble_dense(&self) -> DMatrix<f64> {
        let g = self.graph;
        let n = g.len();
        let rank = self.rank;
        let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for x in 0..n {
            a[(x, x)] = self.stiff1 * g.weighted_degree(x) + self.pa[x] + self.pb[x];
            a[(n + x, n + x)] = self.stiff2 * g.weighted_degree(x)
                + (rank - 1.0) * (rank - 1.0) * self.pa[x]
                + self.pb[x];
            let coupling = (rank - 1.0) * self.pa[x] - self.pb[x];
            a[(x, n + x)] = coupling;
            a[(n + x, x)] = coupling;
            for &(y, w) in g.neighbors(x) {
                a[(x, y)] = -self.stiff1 * w;
                a[(n + x, n + y)] = -self.stiff2 * w;
            }
        }
        a
    }
}

/// Deviation from the two integral identities satisfied by every solution:
///
/// ```text
/// N ∫ e^{u₀ + v₁/N + (N−1)v₂/N} dμ = N|V| − 4πn/m_e² − 4πn(N−1)/m_g²
/// N ∫ e^{(v₁−v₂)/N} dμ            = N|V| − 4πn/m_e² + 4πn/m_g²
/// ```
///
/// Both errors are normalized by `N|V|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityErrors {
    pub err1: f64,
    pub err2: f64,
}

pub fn check_identities(
    g: &Graph,
    p: &ModelParams,
    bg: &BackgroundField,
    s: &State,
) -> IdentityErrors {
    let rank = p.rank_f();
    let nv = f64::from(bg.vortex_number());
    let vol = g.volume();
    let u0 = bg.u0();
    let mut int_a = 0.0;
    let mut int_b = 0.0;
    for x in 0..g.len() {
        let a = u0[x] + (s.v1[x] + (rank - 1.0) * s.v2[x]) / rank;
        let b = (s.v1[x] - s.v2[x]) / rank;
        int_a += g.mu(x) * a.exp();
        int_b += g.mu(x) * b.exp();
    }
    let rhs1 = rank * vol - FOUR_PI * nv / p.me2() - FOUR_PI * nv * (rank - 1.0) / p.mg2();
    let rhs2 = rank * vol - FOUR_PI * nv / p.me2() + FOUR_PI * nv / p.mg2();
    IdentityErrors {
        err1: (rank * int_a - rhs1).abs() / (rank * vol),
        err2: (rank * int_b - rhs2).abs() / (rank * vol),
    }
}

/// Pointwise a priori bounds on a claimed solution `(u₁, u₂)` of the
/// original system: `u₁ < 0`, `u₂ < 0`, and `u₁ − u₂ < N ln(N/(N−1))`
/// strictly at every vertex.
///
/// `gap_ok` uses the sharp constant `N ln(N/(N−1))`; the coarser bound
/// `N/(N−1)` that dominates it is reported alongside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsCheck {
    pub sign1_ok: bool,
    pub sign2_ok: bool,
    pub gap_ok: bool,
    pub max_gap: f64,
    /// `N ln(N/(N−1))`, the constant used for `gap_ok`.
    pub gap_bound: f64,
    /// `N/(N−1) ≥ N ln(N/(N−1))`.
    pub gap_bound_coarse: f64,
}

pub fn check_bounds(
    g: &Graph,
    p: &ModelParams,
    u1: &VertexField,
    u2: &VertexField,
) -> BoundsCheck {
    assert_eq!(u1.len(), g.len(), "field length must equal the vertex count");
    assert_eq!(u2.len(), g.len(), "field length must equal the vertex count");
    let rank = p.rank_f();
    let gap_bound = rank * (rank / (rank - 1.0)).ln();
    let max_gap = u1.minus(u2).max();
    BoundsCheck {
        sign1_ok: u1.iter().all(|&v| v < 0.0),
        sign2_ok: u2.iter().all(|&v| v < 0.0),
        gap_ok: max_gap < gap_bound,
        max_gap,
        gap_bound,
        gap_bound_coarse: rank / (rank - 1.0),
    }
}

/// Residual of the equal-coupling scalar reduction
/// `r = Δv − λ₁ (e^{u₀+v} − 1) − 4πn/|V|`.
pub fn scalar_residual(
    g: &Graph,
    lambda1: f64,
    bg: &BackgroundField,
    v: &VertexField,
) -> Result<VertexField, ModelError> {
    if !(lambda1 > 0.0) || !lambda1.is_finite() {
        return Err(ModelError::InvalidParams(format!(
            "lambda1 must be positive, got {lambda1}"
        )));
    }
    let u0 = bg.u0();
    let source = FOUR_PI * f64::from(bg.vortex_number()) / g.volume();
    let lap = g.laplacian(v);
    let mut values = Vec::with_capacity(g.len());
    for x in 0..g.len() {
        let arg = u0[x] + v[x];
        if arg > EXP_GUARD {
            return Err(ModelError::OverflowGuard {
                vertex: g.id(x).to_string(),
                argument: arg,
            });
        }
        values.push(lap[x] - lambda1 * (arg.exp() - 1.0) - source);
    }
    Ok(VertexField::new(values))
}
