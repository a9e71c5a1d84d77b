//! Parameter sweeps toward the existence boundary.
//!
//! Solutions exist for `|V| > 4πn/(Nλ₁) + 4πn(N−1)/(Nλ₂)` and their norms
//! blow up as the couplings approach equality, so a schedule of equal
//! couplings `λ` descending toward `λ* = 4πn/|V|` exhibits the divergence:
//! `min_V u₁` decreases and `max_V (|u₁|+|u₂|)` grows as the margin shrinks.
//! Every point starts from the zero state, so the records are independent of
//! execution order and safe to compute in parallel.

use rayon::prelude::*;

use crate::graph::Graph;
use crate::model::{self, ModelParams, VortexSet, FOUR_PI};
use crate::solver::{self, SolveOptions};

/// A sweep: a vortex configuration, the group rank, an explicit list of
/// `(m_e², m_g²)` points, and the per-point solver options.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub vortices: VortexSet,
    pub group_rank: u32,
    pub points: Vec<(f64, f64)>,
    pub options: SolveOptions,
}

impl SweepPlan {
    /// The equal-coupling boundary value `λ* = 4πn/|V|`.
    pub fn lambda_star(g: &Graph, vortices: &VortexSet) -> f64 {
        FOUR_PI * f64::from(vortices.vortex_number()) / g.volume()
    }

    /// Equal-coupling schedule `λ = factor · λ*` for each factor, in the
    /// given order. Factors at or below 1 produce infeasible points, which
    /// the sweep records without aborting.
    pub fn from_lambda_factors(
        g: &Graph,
        vortices: VortexSet,
        group_rank: u32,
        factors: &[f64],
        options: SolveOptions,
    ) -> Self {
        let star = Self::lambda_star(g, &vortices);
        let points = factors.iter().map(|f| (f * star, f * star)).collect();
        Self {
            vortices,
            group_rank,
            points,
            options,
        }
    }

    /// The default geometric approach to the boundary:
    /// `λ = λ*(1 + 2^{−k})` for `k = 0..=steps`.
    pub fn geometric(
        g: &Graph,
        vortices: VortexSet,
        group_rank: u32,
        steps: u32,
        options: SolveOptions,
    ) -> Self {
        let star = Self::lambda_star(g, &vortices);
        let points = (0..=steps)
            .map(|k| {
                let lambda = star * (1.0 + 0.5_f64.powi(k as i32));
                (lambda, lambda)
            })
            .collect();
        Self {
            vortices,
            group_rank,
            points,
            options,
        }
    }

    /// Explicit `(m_e², m_g²)` pairs.
    pub fn from_pairs(
        vortices: VortexSet,
        group_rank: u32,
        pairs: Vec<(f64, f64)>,
        options: SolveOptions,
    ) -> Self {
        Self {
            vortices,
            group_rank,
            points: pairs,
            options,
        }
    }
}

/// Diagnostics for one sweep point. Solution fields are present exactly when
/// `converged` holds; `error` carries the failure otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub me2: f64,
    pub mg2: f64,
    pub threshold: f64,
    pub margin: f64,
    pub converged: bool,
    pub error: Option<String>,
    pub iterations: Option<usize>,
    pub residual_inf: Option<f64>,
    pub min_u1: Option<f64>,
    pub mean_v1: Option<f64>,
    pub mean_v2: Option<f64>,
    /// `max_V (|u₁| + |u₂|)`, the blow-up monitor.
    pub max_abs_u: Option<f64>,
    pub identity_err1: Option<f64>,
    pub identity_err2: Option<f64>,
}

/// Records in schedule order plus the boundary value they approach.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub lambda_star: f64,
    pub records: Vec<SweepRecord>,
}

/// Run every point of the plan from the zero initial state, in parallel.
/// Per-point failures are recorded, never propagated.
pub fn run_sweep(g: &Graph, plan: &SweepPlan) -> SweepReport {
    let records = plan
        .points
        .par_iter()
        .map(|&(me2, mg2)| run_point(g, plan, me2, mg2))
        .collect();
    SweepReport {
        lambda_star: SweepPlan::lambda_star(g, &plan.vortices),
        records,
    }
}

fn run_point(g: &Graph, plan: &SweepPlan, me2: f64, mg2: f64) -> SweepRecord {
    // Points always start from zero so records stay order-independent.
    let options = SolveOptions {
        init: None,
        ..plan.options.clone()
    };
    let n = plan.vortices.vortex_number();

    let mut record = SweepRecord {
        me2,
        mg2,
        threshold: f64::NAN,
        margin: f64::NAN,
        converged: false,
        error: None,
        iterations: None,
        residual_inf: None,
        min_u1: None,
        mean_v1: None,
        mean_v2: None,
        max_abs_u: None,
        identity_err1: None,
        identity_err2: None,
    };

    let params = match ModelParams::new(plan.group_rank, me2, mg2) {
        Ok(p) => p,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    let feasibility = model::check_feasible(g, &params, n);
    record.threshold = feasibility.threshold;
    record.margin = feasibility.margin;

    match solver::solve_vortex(g, &params, &plan.vortices, &options) {
        Ok(sol) => {
            let max_abs_u = (0..g.len())
                .map(|x| sol.u1[x].abs() + sol.u2[x].abs())
                .fold(0.0, f64::max);
            record.converged = true;
            record.iterations = Some(sol.iterations);
            record.residual_inf = Some(sol.final_residual_inf);
            record.min_u1 = Some(sol.u1.min());
            record.mean_v1 = Some(g.mean(&sol.v1));
            record.mean_v2 = Some(g.mean(&sol.v2));
            record.max_abs_u = Some(max_abs_u);
            record.identity_err1 = Some(sol.verification.identities.err1);
            record.identity_err2 = Some(sol.verification.identities.err2);
        }
        Err(e) => {
            record.error = Some(e.to_string());
        }
    }
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn unit_path(n: usize) -> Graph {
        let ids: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let edges = (0..n - 1)
            .map(|i| (format!("v{i}"), format!("v{}", i + 1), 1.0))
            .collect();
        Graph::build(ids, vec![1.0; n], edges).unwrap()
    }

    fn plan_on(g: &Graph, factors: &[f64]) -> SweepPlan {
        let vx = VortexSet::new(g, &[("v0", 1)]).unwrap();
        SweepPlan::from_lambda_factors(g, vx, 2, factors, SolveOptions::default())
    }

    #[test]
    fn schedule_points_scale_lambda_star() {
        let g = unit_path(4);
        let plan = plan_on(&g, &[1.5, 1.2]);
        let star = SweepPlan::lambda_star(&g, &plan.vortices);
        assert!((star - FOUR_PI / 4.0).abs() < 1e-15);
        assert_eq!(plan.points.len(), 2);
        assert!((plan.points[0].0 - 1.5 * star).abs() < 1e-15);
    }

    #[test]
    fn geometric_schedule_descends_toward_the_boundary() {
        let g = unit_path(4);
        let vx = VortexSet::new(&g, &[("v0", 1)]).unwrap();
        let plan = SweepPlan::geometric(&g, vx, 2, 4, SolveOptions::default());
        let star = SweepPlan::lambda_star(&g, &plan.vortices);
        for window in plan.points.windows(2) {
            assert!(window[1].0 < window[0].0);
            assert!(window[1].0 > star);
        }
    }

    #[test]
    fn blow_up_trend_along_the_schedule() {
        let g = unit_path(4);
        let plan = plan_on(&g, &[1.5, 1.2, 1.05, 1.01]);
        let report = run_sweep(&g, &plan);
        assert!(report.records.iter().all(|r| r.converged));
        for pair in report.records.windows(2) {
            assert!(pair[1].min_u1.unwrap() < pair[0].min_u1.unwrap());
            assert!(pair[1].max_abs_u.unwrap() > pair[0].max_abs_u.unwrap());
        }
    }

    #[test]
    fn boundary_point_is_recorded_and_sweep_continues() {
        let g = unit_path(4);
        let plan = plan_on(&g, &[1.2, 1.0, 1.1]);
        let report = run_sweep(&g, &plan);
        assert_eq!(report.records.len(), 3);
        assert!(report.records[0].converged);
        assert!(!report.records[1].converged);
        assert!(report.records[1]
            .error
            .as_deref()
            .unwrap()
            .contains("infeasible"));
        assert!(report.records[1].margin <= 0.0);
        assert!(report.records[2].converged);
    }

    #[test]
    fn parallel_and_sequential_runs_are_bitwise_identical() {
        let g = unit_path(5);
        let plan = plan_on(&g, &[1.5, 1.25, 1.1, 1.05]);
        let parallel = run_sweep(&g, &plan);
        let again = run_sweep(&g, &plan);
        let sequential: Vec<SweepRecord> = plan
            .points
            .iter()
            .map(|&(me2, mg2)| run_point(&g, &plan, me2, mg2))
            .collect();
        assert_eq!(parallel, again);
        assert_eq!(parallel.records, sequential);
    }
}
