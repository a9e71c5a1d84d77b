//! Text formats for graphs and vortex sets, plus deterministic generators.
//!
//! Graph files are line oriented:
//!
//! ```text
//! # comment
//! vertex <id> <mu>
//! edge <id1> <id2> <weight>
//! ```
//!
//! Ids are arbitrary non-whitespace tokens ordered by first appearance;
//! reals accept decimal or scientific notation; `#` starts a comment. Vortex
//! files use `vortex <vertex-id> [multiplicity]` with default multiplicity 1.
//! Parse failures carry the offending line and column.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::model::{ModelError, VortexSet};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid graph kind {0:?} (expected path, cycle, complete, grid, or random-connected)")]
    InvalidKind(String),
    #[error("invalid size {size} for {kind}: {msg}")]
    InvalidSize {
        kind: String,
        size: usize,
        msg: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn parse_error(line: usize, col: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        col,
        msg: msg.into(),
    }
}

/// Split a line into `(column, token)` pairs, columns 1-based in characters.
/// Everything from the first `#` on is a comment.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let code = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None; // (char column, byte offset)
    let mut col = 0;
    for (byte, ch) in code.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some((c, b)) = start.take() {
                out.push((c, &code[b..byte]));
            }
        } else if start.is_none() {
            start = Some((col, byte));
        }
    }
    if let Some((c, b)) = start {
        out.push((c, &code[b..]));
    }
    out
}

fn parse_real(line: usize, col: usize, token: &str, what: &str) -> Result<f64, IoError> {
    token
        .parse::<f64>()
        .map_err(|_| parse_error(line, col, format!("expected a real number for {what}, got {token:?}")))
}

struct RawEdge {
    a: String,
    b: String,
    weight: f64,
    line: usize,
    col_a: usize,
    col_b: usize,
}

/// Parse a graph file. All structural errors are positioned; the only
/// graph-level failure left to [`Graph::build`] is disconnectedness.
pub fn parse_graph(text: &str) -> Result<Graph, IoError> {
    let mut ids: Vec<String> = Vec::new();
    let mut measures: Vec<f64> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut edges: Vec<RawEdge> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokens(raw);
        if toks.is_empty() {
            continue;
        }
        let (dir_col, directive) = toks[0];
        match directive {
            "vertex" => {
                if toks.len() != 3 {
                    return Err(parse_error(
                        line,
                        dir_col,
                        format!("vertex takes <id> <mu>, got {} argument(s)", toks.len() - 1),
                    ));
                }
                let (id_col, id) = toks[1];
                let (mu_col, mu_tok) = toks[2];
                if seen.contains_key(id) {
                    return Err(parse_error(line, id_col, format!("duplicate vertex {id:?}")));
                }
                let mu = parse_real(line, mu_col, mu_tok, "the vertex measure")?;
                if !(mu > 0.0) || !mu.is_finite() {
                    return Err(parse_error(
                        line,
                        mu_col,
                        format!("measure of vertex {id:?} must be positive, got {mu_tok}"),
                    ));
                }
                seen.insert(id.to_string(), ids.len());
                ids.push(id.to_string());
                measures.push(mu);
            }
            "edge" => {
                if toks.len() != 4 {
                    return Err(parse_error(
                        line,
                        dir_col,
                        format!(
                            "edge takes <id1> <id2> <weight>, got {} argument(s)",
                            toks.len() - 1
                        ),
                    ));
                }
                let (col_a, a) = toks[1];
                let (col_b, b) = toks[2];
                let (col_w, w_tok) = toks[3];
                let weight = parse_real(line, col_w, w_tok, "the edge weight")?;
                if a == b {
                    return Err(parse_error(line, col_b, format!("self-loop at vertex {a:?}")));
                }
                if !(weight > 0.0) || !weight.is_finite() {
                    return Err(parse_error(
                        line,
                        col_w,
                        format!("weight of edge {a:?}-{b:?} must be positive, got {w_tok}"),
                    ));
                }
                edges.push(RawEdge {
                    a: a.to_string(),
                    b: b.to_string(),
                    weight,
                    line,
                    col_a,
                    col_b,
                });
            }
            other => {
                return Err(parse_error(
                    line,
                    dir_col,
                    format!("unknown directive {other:?}, expected vertex or edge"),
                ));
            }
        }
    }

    // Edges may reference vertices declared later, so resolve afterwards.
    let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edge_list = Vec::with_capacity(edges.len());
    for e in &edges {
        let ia = *seen
            .get(&e.a)
            .ok_or_else(|| parse_error(e.line, e.col_a, format!("unknown vertex {:?}", e.a)))?;
        let ib = *seen
            .get(&e.b)
            .ok_or_else(|| parse_error(e.line, e.col_b, format!("unknown vertex {:?}", e.b)))?;
        let key = (ia.min(ib), ia.max(ib));
        if let Some(first) = pairs.insert(key, e.line) {
            return Err(parse_error(
                e.line,
                e.col_a,
                format!("duplicate edge {:?}-{:?} (first declared on line {first})", e.a, e.b),
            ));
        }
        edge_list.push((e.a.clone(), e.b.clone(), e.weight));
    }

    Graph::build(ids, measures, edge_list).map_err(IoError::Graph)
}

/// Serialize a graph in the line format accepted by [`parse_graph`]. Floats
/// use the shortest decimal form that parses back to the same value, so the
/// round trip is exact.
pub fn serialize_graph(g: &Graph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} vertices, {} edges", g.len(), g.edges().len());
    for (id, &mu) in g.ids().iter().zip(g.measures()) {
        let _ = writeln!(out, "vertex {id} {mu}");
    }
    for &(a, b, w) in g.edges() {
        let _ = writeln!(out, "edge {} {} {}", g.id(a), g.id(b), w);
    }
    out
}

/// Parse a vortex file against its graph. Repeated vertices fold into a
/// single entry with summed multiplicity.
pub fn parse_vortices(text: &str, g: &Graph) -> Result<VortexSet, IoError> {
    let mut entries: Vec<(usize, u32)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks = tokens(raw);
        if toks.is_empty() {
            continue;
        }
        let (dir_col, directive) = toks[0];
        if directive != "vortex" {
            return Err(parse_error(
                line,
                dir_col,
                format!("unknown directive {directive:?}, expected vortex"),
            ));
        }
        if toks.len() < 2 || toks.len() > 3 {
            return Err(parse_error(
                line,
                dir_col,
                format!(
                    "vortex takes <vertex-id> [multiplicity], got {} argument(s)",
                    toks.len() - 1
                ),
            ));
        }
        let (id_col, id) = toks[1];
        let index = g
            .index_of(id)
            .ok_or_else(|| parse_error(line, id_col, format!("unknown vertex {id:?}")))?;
        let multiplicity = if toks.len() == 3 {
            let (m_col, m_tok) = toks[2];
            let m: u32 = m_tok.parse().map_err(|_| {
                parse_error(line, m_col, format!("expected a positive integer multiplicity, got {m_tok:?}"))
            })?;
            if m == 0 {
                return Err(parse_error(line, m_col, "multiplicity must be at least 1"));
            }
            m
        } else {
            1
        };
        entries.push((index, multiplicity));
    }
    VortexSet::from_indices(g, &entries).map_err(IoError::Model)
}

/// Families of generated graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Path,
    Cycle,
    Complete,
    Grid,
    RandomConnected,
}

impl GraphKind {
    pub fn name(&self) -> &'static str {
        match self {
            GraphKind::Path => "path",
            GraphKind::Cycle => "cycle",
            GraphKind::Complete => "complete",
            GraphKind::Grid => "grid",
            GraphKind::RandomConnected => "random-connected",
        }
    }
}

impl std::str::FromStr for GraphKind {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, IoError> {
        match s {
            "path" => Ok(GraphKind::Path),
            "cycle" => Ok(GraphKind::Cycle),
            "complete" => Ok(GraphKind::Complete),
            "grid" => Ok(GraphKind::Grid),
            "random-connected" => Ok(GraphKind::RandomConnected),
            other => Err(IoError::InvalidKind(other.to_string())),
        }
    }
}

/// Generator options. Measures and weights default to 1; a range switches
/// them to uniform draws from the seeded generator.
#[derive(Debug, Clone, Default)]
pub struct GenConfig {
    pub mu_range: Option<(f64, f64)>,
    pub weight_range: Option<(f64, f64)>,
    /// Extra edges beyond the spanning tree for `random-connected`
    /// (default `size / 2`).
    pub extra_edges: Option<usize>,
}

fn check_range(name: &str, range: Option<(f64, f64)>) -> Result<(), IoError> {
    if let Some((lo, hi)) = range {
        if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
            return Err(IoError::InvalidArgument(format!(
                "{name} range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
            )));
        }
    }
    Ok(())
}

/// Deterministically generate a graph of the given kind and size. The same
/// `(kind, size, seed, config)` always yields the identical graph.
pub fn generate(kind: GraphKind, size: usize, seed: u64, cfg: &GenConfig) -> Result<Graph, IoError> {
    check_range("mu", cfg.mu_range)?;
    check_range("weight", cfg.weight_range)?;
    if size < 2 {
        return Err(IoError::InvalidSize {
            kind: kind.name().into(),
            size,
            msg: "need at least 2 vertices".into(),
        });
    }
    if kind == GraphKind::Cycle && size < 3 {
        return Err(IoError::InvalidSize {
            kind: kind.name().into(),
            size,
            msg: "a cycle needs at least 3 vertices".into(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..size).map(|i| format!("v{i}")).collect();
    let measures: Vec<f64> = (0..size)
        .map(|_| match cfg.mu_range {
            Some((lo, hi)) => rng.random_range(lo..=hi),
            None => 1.0,
        })
        .collect();
    let draw_weight = |rng: &mut ChaCha8Rng| match cfg.weight_range {
        Some((lo, hi)) => rng.random_range(lo..=hi),
        None => 1.0,
    };

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    match kind {
        GraphKind::Path => {
            pairs.extend((0..size - 1).map(|i| (i, i + 1)));
        }
        GraphKind::Cycle => {
            pairs.extend((0..size - 1).map(|i| (i, i + 1)));
            pairs.push((size - 1, 0));
        }
        GraphKind::Complete => {
            for i in 0..size {
                for j in i + 1..size {
                    pairs.push((i, j));
                }
            }
        }
        GraphKind::Grid => {
            let rows = (size as f64).sqrt().floor().max(1.0) as usize;
            let cols = size.div_ceil(rows);
            for k in 0..size {
                let (r, c) = (k / cols, k % cols);
                if c + 1 < cols && k + 1 < size {
                    pairs.push((k, k + 1));
                }
                if r > 0 {
                    pairs.push((k - cols, k));
                }
            }
        }
        GraphKind::RandomConnected => {
            // Spanning tree by random attachment guarantees connectivity,
            // extra edges are rejection-sampled.
            let mut existing = std::collections::HashSet::new();
            for i in 1..size {
                let j = rng.random_range(0..i);
                pairs.push((j, i));
                existing.insert((j, i));
            }
            let extra = cfg.extra_edges.unwrap_or(size / 2);
            let mut added = 0;
            let mut attempts = 0;
            while added < extra && attempts < 20 * extra + 40 {
                attempts += 1;
                let i = rng.random_range(0..size);
                let j = rng.random_range(0..size);
                if i == j {
                    continue;
                }
                let key = (i.min(j), i.max(j));
                if existing.insert(key) {
                    pairs.push(key);
                    added += 1;
                }
            }
        }
    }

    let edges: Vec<(String, String, f64)> = pairs
        .into_iter()
        .map(|(a, b)| (ids[a].clone(), ids[b].clone(), draw_weight(&mut rng)))
        .collect();
    Graph::build(ids, measures, edges).map_err(IoError::Graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const K2: &str = "\
# the smallest connected graph
vertex a 1
vertex b 1
edge a b 1
";

    #[test]
    fn parses_the_two_vertex_example() {
        let g = parse_graph(K2).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.volume(), 2.0);
        assert_eq!(g.edges(), &[(0, 1, 1.0)]);
    }

    #[test]
    fn reports_self_loop_with_position() {
        let err = parse_graph("vertex a 1\nvertex b 1\nedge a a 1\n").unwrap_err();
        match err {
            IoError::Parse { line, col, msg } => {
                assert_eq!(line, 3);
                assert!(col > 1);
                assert!(msg.contains("self-loop"));
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn reports_unknown_vertex_in_edge() {
        let err = parse_graph("vertex a 1\nvertex b 1\nedge a c 1\n").unwrap_err();
        match err {
            IoError::Parse { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("unknown vertex"));
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn reports_bad_numbers_and_directives() {
        assert!(matches!(
            parse_graph("vertex a one\n"),
            Err(IoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_graph("node a 1\n"),
            Err(IoError::Parse { line: 1, col: 1, .. })
        ));
        assert!(matches!(
            parse_graph("vertex a 1\nvertex b 1\nedge a b\n"),
            Err(IoError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse_graph("vertex a 0\n"),
            Err(IoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_graph("vertex a 1\nvertex a 2\n"),
            Err(IoError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_graph("vertex a 1\nvertex b 1\nedge a b 1\nedge b a 2\n"),
            Err(IoError::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn disconnected_graphs_surface_the_graph_error() {
        let err = parse_graph("vertex a 1\nvertex b 1\nvertex c 1\nedge a b 1\n").unwrap_err();
        assert!(matches!(err, IoError::Graph(GraphError::Disconnected { .. })));
    }

    #[test]
    fn edges_may_reference_later_vertices() {
        let g = parse_graph("edge a b 2.5\nvertex a 1\nvertex b 3\n").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.edges()[0].2, 2.5);
    }

    #[test]
    fn parses_scientific_notation() {
        let g = parse_graph("vertex a 1e-3\nvertex b 2.5E2\nedge a b 1.5e1\n").unwrap();
        assert_eq!(g.measures(), &[1e-3, 2.5e2]);
        assert_eq!(g.edges()[0].2, 15.0);
    }

    #[test]
    fn vortex_file_round_trip_and_errors() {
        let g = parse_graph(K2).unwrap();
        let vx = parse_vortices("vortex a\nvortex a 2\nvortex b 1\n", &g).unwrap();
        assert_eq!(vx.vortex_number(), 4);
        assert_eq!(vx.entries(), &[(0, 3), (1, 1)]);

        assert!(matches!(
            parse_vortices("vortex zz\n", &g),
            Err(IoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_vortices("vortex a 0\n", &g),
            Err(IoError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_vortices("vertex a 1\n", &g),
            Err(IoError::Parse { line: 1, col: 1, .. })
        ));
    }

    #[test]
    fn generator_shapes() {
        let cfg = GenConfig::default();
        let path = generate(GraphKind::Path, 2, 0, &cfg).unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path.edges().len(), 1);
        assert_eq!(path.volume(), 2.0);

        let complete = generate(GraphKind::Complete, 3, 0, &cfg).unwrap();
        assert_eq!(complete.volume(), 3.0);
        assert_eq!(complete.edges().len(), 3);

        let cycle = generate(GraphKind::Cycle, 5, 0, &cfg).unwrap();
        assert_eq!(cycle.edges().len(), 5);

        let grid = generate(GraphKind::Grid, 6, 0, &cfg).unwrap();
        assert_eq!(grid.len(), 6);
        // 2×3 grid: 4 horizontal + 3 vertical edges.
        assert_eq!(grid.edges().len(), 7);

        assert!(matches!(
            generate(GraphKind::Path, 1, 0, &cfg),
            Err(IoError::InvalidSize { .. })
        ));
        assert!(matches!(
            generate(GraphKind::Cycle, 2, 0, &cfg),
            Err(IoError::InvalidSize { .. })
        ));
        assert!(matches!("triangle".parse::<GraphKind>(), Err(IoError::InvalidKind(_))));
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let cfg = GenConfig {
            mu_range: Some((0.1, 10.0)),
            weight_range: Some((0.1, 10.0)),
            ..GenConfig::default()
        };
        let a = generate(GraphKind::RandomConnected, 50, 1234, &cfg).unwrap();
        let b = generate(GraphKind::RandomConnected, 50, 1234, &cfg).unwrap();
        assert_eq!(a.ids(), b.ids());
        assert_eq!(a.measures(), b.measures());
        assert_eq!(a.edges(), b.edges());

        let c = generate(GraphKind::RandomConnected, 50, 1235, &cfg).unwrap();
        assert!(a.measures() != c.measures() || a.edges() != c.edges());
    }

    #[test]
    fn rejects_bad_ranges() {
        let cfg = GenConfig {
            mu_range: Some((0.0, 1.0)),
            ..GenConfig::default()
        };
        assert!(matches!(
            generate(GraphKind::Path, 3, 0, &cfg),
            Err(IoError::InvalidArgument(_))
        ));
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(
            kind_idx in 0usize..5,
            size in 2usize..40,
            seed in 0u64..10_000,
            randomize in proptest::bool::ANY,
        ) {
            let kind = [
                GraphKind::Path,
                GraphKind::Cycle,
                GraphKind::Complete,
                GraphKind::Grid,
                GraphKind::RandomConnected,
            ][kind_idx];
            let size = if kind == GraphKind::Cycle { size.max(3) } else { size };
            let cfg = if randomize {
                GenConfig {
                    mu_range: Some((0.1, 10.0)),
                    weight_range: Some((0.1, 10.0)),
                    ..GenConfig::default()
                }
            } else {
                GenConfig::default()
            };
            let g = generate(kind, size, seed, &cfg).unwrap();
            let text = serialize_graph(&g);
            let h = parse_graph(&text).unwrap();
            prop_assert_eq!(g.ids(), h.ids());
            for (a, b) in g.measures().iter().zip(h.measures()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(g.edges().len(), h.edges().len());
            for (ea, eb) in g.edges().iter().zip(h.edges()) {
                prop_assert_eq!((ea.0, ea.1), (eb.0, eb.1));
                prop_assert_eq!(ea.2.to_bits(), eb.2.to_bits());
            }
        }
    }
}
