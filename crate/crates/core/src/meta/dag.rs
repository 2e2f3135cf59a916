use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::scheme::Format;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VertexKind {
    Format,
    /// Dummy vertex joining the two inputs of a combination.
    Combine,
    /// A scheme file brought in from outside the campaign.
    External,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Extend,
    Project,
    CombineIn,
    CombineOut,
    Search,
}

impl EdgeKind {
    fn label(self) -> &'static str {
        match self {
            EdgeKind::Extend => "extend",
            EdgeKind::Project => "project",
            EdgeKind::CombineIn => "combine-in",
            EdgeKind::CombineOut => "combine-out",
            EdgeKind::Search => "search",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub kind: VertexKind,
    pub format: Format,
    /// Lowest rank among the schemes that started the search here.
    pub start_rank: Option<usize>,
    pub best_rank: Option<usize>,
    /// Reference rank this campaign tries to beat.
    pub reference_rank: Option<usize>,
    /// Starting pool came from seeds rather than from other vertices.
    pub seed: bool,
    /// Directory holding the best pool, when pools are stored.
    pub pool_ref: Option<String>,
    /// Source file of an external vertex.
    pub source: Option<String>,
}

impl Vertex {
    pub fn new(kind: VertexKind, format: Format) -> Vertex {
        Vertex {
            kind,
            format,
            start_rank: None,
            best_rank: None,
            reference_rank: None,
            seed: false,
            pool_ref: None,
            source: None,
        }
    }

    /// Best rank strictly below the reference rank.
    pub fn improved(&self) -> bool {
        matches!((self.best_rank, self.reference_rank), (Some(b), Some(r)) if b < r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DagEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

/// Provenance of a campaign: which formats fed which, and the ranks reached.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenealogyDag {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<DagEdge>,
}

impl GenealogyDag {
    pub fn new() -> GenealogyDag {
        GenealogyDag::default()
    }

    pub fn add_vertex(&mut self, v: Vertex) -> usize {
        self.vertices.push(v);
        self.vertices.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize, kind: EdgeKind) {
        self.edges.push(DagEdge { from, to, kind });
    }

    /// The format vertex for `f`, if present.
    pub fn format_vertex(&self, f: Format) -> Option<usize> {
        self.vertices
            .iter()
            .position(|v| v.kind == VertexKind::Format && v.format == f)
    }

    pub fn best_rank(&self, f: Format) -> Option<usize> {
        self.format_vertex(f).and_then(|i| self.vertices[i].best_rank)
    }

    pub fn is_acyclic(&self) -> bool {
        let n = self.vertices.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            indeg[e.to] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = ready.pop() {
            seen += 1;
            for e in self.edges.iter().filter(|e| e.from == v) {
                indeg[e.to] -= 1;
                if indeg[e.to] == 0 {
                    ready.push(e.to);
                }
            }
        }
        seen == n
    }

    /// Every combination vertex has two inputs and one output.
    pub fn combines_well_formed(&self) -> bool {
        (0..self.vertices.len())
            .filter(|&v| self.vertices[v].kind == VertexKind::Combine)
            .all(|v| {
                let ins = self.edges.iter().filter(|e| e.to == v && e.kind == EdgeKind::CombineIn).count();
                let outs = self.edges.iter().filter(|e| e.from == v && e.kind == EdgeKind::CombineOut).count();
                let all = self.edges.iter().filter(|e| e.to == v || e.from == v).count();
                ins == 2 && outs == 1 && all == 3
            })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dag serializes") + "\n"
    }

    pub fn from_json(text: &str) -> crate::Result<GenealogyDag> {
        serde_json::from_str(text).map_err(|e| crate::Error::Parse {
            line: e.line(),
            field: "<dag>".into(),
            message: e.to_string(),
        })
    }

    fn node_id(&self, v: usize) -> String {
        let vx = &self.vertices[v];
        match vx.kind {
            VertexKind::Format => format!("\"{}\"", vx.format.label()),
            VertexKind::Combine => format!("\"+{v}\""),
            VertexKind::External => format!("\"ext{v}\""),
        }
    }

    /// Graphviz rendering. Format vertices are labeled `nmp` with the best
    /// rank as external label. Improvements are boxes, seeded vertices are
    /// filled black, combinations are `+` circles. Output order follows
    /// insertion order.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph genealogy {\n  rankdir=BT;\n  node [shape=ellipse];\n");
        for (v, vx) in self.vertices.iter().enumerate() {
            let id = self.node_id(v);
            let mut attrs = Vec::new();
            match vx.kind {
                VertexKind::Format => {
                    attrs.push(format!("label=\"{}\"", vx.format.label()));
                    if let Some(r) = vx.best_rank {
                        attrs.push(format!("xlabel=\"{r}\""));
                    }
                    if vx.improved() {
                        attrs.push("shape=box".into());
                    }
                    if vx.seed {
                        attrs.push("style=filled".into());
                        attrs.push("fillcolor=black".into());
                        attrs.push("fontcolor=white".into());
                    }
                }
                VertexKind::Combine => {
                    attrs.push("label=\"+\"".into());
                    attrs.push("shape=circle".into());
                }
                VertexKind::External => {
                    attrs.push(format!("label=\"{}\"", vx.format.label()));
                    attrs.push("shape=note".into());
                    attrs.push("style=filled".into());
                    attrs.push("fillcolor=black".into());
                    attrs.push("fontcolor=white".into());
                }
            }
            let _ = writeln!(out, "  {id} [{}];", attrs.join(", "));
        }
        for e in &self.edges {
            let style = match e.kind {
                EdgeKind::Project => ", style=dashed",
                _ => "",
            };
            let _ = writeln!(
                out,
                "  {} -> {} [label=\"{}\"{style}];",
                self.node_id(e.from),
                self.node_id(e.to),
                e.kind.label()
            );
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(n: usize, m: usize, p: usize) -> Format {
        Format::new(n, m, p).unwrap()
    }

    fn sample() -> GenealogyDag {
        let mut d = GenealogyDag::new();
        let a = d.add_vertex(Vertex { seed: true, best_rank: Some(7), ..Vertex::new(VertexKind::Format, f(2, 2, 2)) });
        let b = d.add_vertex(Vertex {
            best_rank: Some(11),
            reference_rank: Some(12),
            ..Vertex::new(VertexKind::Format, f(2, 2, 3))
        });
        let c = d.add_vertex(Vertex::new(VertexKind::Combine, f(2, 2, 5)));
        let e = d.add_vertex(Vertex::new(VertexKind::Format, f(2, 2, 5)));
        d.add_edge(a, b, EdgeKind::Extend);
        d.add_edge(a, c, EdgeKind::CombineIn);
        d.add_edge(b, c, EdgeKind::CombineIn);
        d.add_edge(c, e, EdgeKind::CombineOut);
        d
    }

    #[test]
    fn structure_checks() {
        let d = sample();
        assert!(d.is_acyclic());
        assert!(d.combines_well_formed());
        let mut cyclic = d.clone();
        cyclic.add_edge(3, 0, EdgeKind::Project);
        assert!(!cyclic.is_acyclic());
        let mut bad = d.clone();
        bad.add_edge(1, 2, EdgeKind::CombineIn);
        assert!(!bad.combines_well_formed());
    }

    #[test]
    fn dot_rendering() {
        let dot = sample().to_dot();
        assert!(dot.starts_with("digraph genealogy {"));
        assert!(dot.contains("\"222\" [label=\"222\", xlabel=\"7\", style=filled, fillcolor=black, fontcolor=white];"));
        assert!(dot.contains("\"223\" [label=\"223\", xlabel=\"11\", shape=box];"));
        assert!(dot.contains("\"+2\" [label=\"+\", shape=circle];"));
        assert!(dot.contains("\"+2\" -> \"225\" [label=\"combine-out\"];"));
        assert_eq!(dot, sample().to_dot());
    }

    #[test]
    fn json_round_trip() {
        let d = sample();
        assert_eq!(GenealogyDag::from_json(&d.to_json()).unwrap(), d);
        assert_eq!(d.best_rank(f(2, 2, 3)), Some(11));
        assert_eq!(d.best_rank(f(3, 3, 3)), None);
    }
}
