//! Machine-readable result documents.
//!
//! Reports are JSON with every binary64 value printed to 17 significant
//! digits, which re-parses to the identical bit pattern. Vertex-indexed maps
//! keep the graph's first-appearance order.

use indexmap::IndexMap;
use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::graph::{Graph, VertexField};
use crate::model::{Feasibility, ModelParams};
use crate::solver::{ScalarSolution, Solution};
use crate::sweep::SweepReport;

/// A binary64 value serialized with 17 significant digits (round-trip exact).
/// Non-finite values serialize as `null` and read back as NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F64(pub f64);

impl From<f64> for F64 {
    fn from(v: f64) -> Self {
        Self(v)
    }
}

impl Serialize for F64 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = serde_json::value::RawValue::from_string(format!("{:.16e}", self.0))
                .map_err(serde::ser::Error::custom)?;
            raw.serialize(serializer)
        } else {
            serializer.serialize_none()
        }
    }
}

impl<'de> Deserialize<'de> for F64 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Self(
            Option::<f64>::deserialize(deserializer)?.unwrap_or(f64::NAN),
        ))
    }
}

/// Vertex-id → value map in vertex order.
pub type FieldMap = IndexMap<String, F64>;

fn field_map(g: &Graph, u: &VertexField) -> FieldMap {
    g.ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), F64(u[i])))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportParams {
    #[serde(rename = "N")]
    pub group_rank: u32,
    pub me2: F64,
    pub mg2: F64,
    pub n: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportChecks {
    pub sign1_ok: bool,
    pub sign2_ok: bool,
    pub gap_ok: bool,
    pub max_gap: F64,
    pub identity_err1: F64,
    pub identity_err2: F64,
}

/// The full result document for `solve` and `check`. Solution fields are
/// `null` when only feasibility was evaluated, keeping the field set stable.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub params: ReportParams,
    pub volume: F64,
    pub threshold: F64,
    pub margin: F64,
    pub feasible: bool,
    pub converged: bool,
    pub iterations: u64,
    pub residual_inf: Option<F64>,
    pub energy: Option<F64>,
    pub u0: Option<FieldMap>,
    pub u1: Option<FieldMap>,
    pub u2: Option<FieldMap>,
    pub checks: Option<ReportChecks>,
}

impl Report {
    pub fn from_solution(
        g: &Graph,
        p: &ModelParams,
        n: u32,
        u0: &VertexField,
        sol: &Solution,
    ) -> Self {
        let v = sol.verification;
        Self {
            params: ReportParams {
                group_rank: p.group_rank(),
                me2: F64(p.me2()),
                mg2: F64(p.mg2()),
                n,
            },
            volume: F64(g.volume()),
            threshold: F64(v.feasibility.threshold),
            margin: F64(v.feasibility.margin),
            feasible: v.feasibility.feasible,
            converged: true,
            iterations: sol.iterations as u64,
            residual_inf: Some(F64(sol.final_residual_inf)),
            energy: Some(F64(sol.energy_value)),
            u0: Some(field_map(g, u0)),
            u1: Some(field_map(g, &sol.u1)),
            u2: Some(field_map(g, &sol.u2)),
            checks: Some(ReportChecks {
                sign1_ok: v.bounds.sign1_ok,
                sign2_ok: v.bounds.sign2_ok,
                gap_ok: v.bounds.gap_ok,
                max_gap: F64(v.bounds.max_gap),
                identity_err1: F64(v.identities.err1),
                identity_err2: F64(v.identities.err2),
            }),
        }
    }

    pub fn feasibility_only(g: &Graph, p: &ModelParams, n: u32, feas: &Feasibility) -> Self {
        Self {
            params: ReportParams {
                group_rank: p.group_rank(),
                me2: F64(p.me2()),
                mg2: F64(p.mg2()),
                n,
            },
            volume: F64(g.volume()),
            threshold: F64(feas.threshold),
            margin: F64(feas.margin),
            feasible: feas.feasible,
            converged: false,
            iterations: 0,
            residual_inf: None,
            energy: None,
            u0: None,
            u1: None,
            u2: None,
            checks: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Result document for the equal-coupling scalar solver.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScalarReport {
    pub lambda1: F64,
    pub n: u32,
    pub volume: F64,
    pub threshold: F64,
    pub margin: F64,
    pub feasible: bool,
    pub converged: bool,
    pub iterations: u64,
    pub residual_inf: Option<F64>,
    pub u0: Option<FieldMap>,
    pub u: Option<FieldMap>,
}

impl ScalarReport {
    pub fn from_solution(g: &Graph, lambda1: f64, n: u32, u0: &VertexField, sol: &ScalarSolution) -> Self {
        let threshold = crate::model::FOUR_PI * f64::from(n) / lambda1;
        Self {
            lambda1: F64(lambda1),
            n,
            volume: F64(g.volume()),
            threshold: F64(threshold),
            margin: F64(g.volume() - threshold),
            feasible: true,
            converged: true,
            iterations: sol.iterations as u64,
            residual_inf: Some(F64(sol.final_residual_inf)),
            u0: Some(field_map(g, u0)),
            u: Some(field_map(g, &sol.u)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepPointDoc {
    pub me2: F64,
    pub mg2: F64,
    pub threshold: F64,
    pub margin: F64,
    pub converged: bool,
    pub error: Option<String>,
    pub iterations: Option<u64>,
    pub residual_inf: Option<F64>,
    pub min_u1: Option<F64>,
    pub mean_v1: Option<F64>,
    pub mean_v2: Option<F64>,
    pub max_abs_u: Option<F64>,
    pub identity_err1: Option<F64>,
    pub identity_err2: Option<F64>,
}

/// Result document for a sweep: one record per schedule point, in order.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepReportDoc {
    #[serde(rename = "N")]
    pub group_rank: u32,
    pub n: u32,
    pub volume: F64,
    pub lambda_star: F64,
    pub points: Vec<SweepPointDoc>,
}

impl SweepReportDoc {
    pub fn new(g: &Graph, group_rank: u32, n: u32, report: &SweepReport) -> Self {
        let points = report
            .records
            .iter()
            .map(|r| SweepPointDoc {
                me2: F64(r.me2),
                mg2: F64(r.mg2),
                threshold: F64(r.threshold),
                margin: F64(r.margin),
                converged: r.converged,
                error: r.error.clone(),
                iterations: r.iterations.map(|i| i as u64),
                residual_inf: r.residual_inf.map(F64),
                min_u1: r.min_u1.map(F64),
                mean_v1: r.mean_v1.map(F64),
                mean_v2: r.mean_v2.map(F64),
                max_abs_u: r.max_abs_u.map(F64),
                identity_err1: r.identity_err1.map(F64),
                identity_err2: r.identity_err2.map(F64),
            })
            .collect();
        Self {
            group_rank,
            n,
            volume: F64(g.volume()),
            lambda_star: F64(report.lambda_star),
            points,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_serialization_round_trips_bit_exactly() {
        let tricky = [
            0.0,
            -0.0,
            1.0,
            0.1,
            std::f64::consts::PI,
            -2.0 * std::f64::consts::PI,
            1e-300,
            f64::MIN_POSITIVE,
            5e-324,
            1.7976931348623157e308,
            -123.456789e-12,
        ];
        for &x in &tricky {
            let json = serde_json::to_string(&F64(x)).unwrap();
            let back: F64 = serde_json::from_str(&json).unwrap();
            assert_eq!(x.to_bits(), back.0.to_bits(), "value {x:?} via {json}");
        }
    }

    #[test]
    fn non_finite_values_serialize_as_null() {
        assert_eq!(serde_json::to_string(&F64(f64::NAN)).unwrap(), "null");
        assert_eq!(serde_json::to_string(&F64(f64::INFINITY)).unwrap(), "null");
        let back: F64 = serde_json::from_str("null").unwrap();
        assert!(back.0.is_nan());
    }

    #[test]
    fn numbers_carry_seventeen_significant_digits() {
        let json = serde_json::to_string(&F64(std::f64::consts::PI)).unwrap();
        assert_eq!(json, "3.1415926535897931e0");
    }

    #[test]
    fn report_json_round_trip_is_bit_exact() {
        use crate::model::{background_field, ModelParams, VortexSet, FOUR_PI};
        use crate::solver::{solve_vortex, SolveOptions};

        let g = crate::io::parse_graph("vertex a 1\nvertex b 1\nedge a b 1\n").unwrap();
        let p = ModelParams::new(2, FOUR_PI, FOUR_PI).unwrap();
        let vx = VortexSet::new(&g, &[("a", 1)]).unwrap();
        let bg = background_field(&g, &vx).unwrap();
        let sol = solve_vortex(&g, &p, &vx, &SolveOptions::default()).unwrap();
        let report = Report::from_solution(&g, &p, vx.vortex_number(), bg.u0(), &sol);
        let json = report.to_json();
        let back = Report::from_json(&json).unwrap();
        assert_eq!(report, back);
        let u1 = back.u1.as_ref().unwrap();
        assert_eq!(u1["a"].0.to_bits(), sol.u1[0].to_bits());
        assert_eq!(u1["b"].0.to_bits(), sol.u1[1].to_bits());
        // Vertex maps keep first-appearance order.
        let keys: Vec<&str> = u1.keys().map(|s| s.as_str()).collect();
        assert_eq!(keys, vec!["a", "b"]);
    }
}
