//! Named consistency models and the strength taxonomy between them.

use std::collections::BTreeSet;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::axioms::{holds_all, Axiom};
use crate::checker::generate::{random_valid_execution, GenConfig};
use crate::execution::Execution;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub name: String,
    pub axioms: Vec<Axiom>,
    pub wait_free_friendly: bool,
    pub convergent: bool,
}

impl ModelSpec {
    /// An ad hoc conjunction, e.g. from a command line.
    pub fn custom(axioms: impl IntoIterator<Item = Axiom>) -> ModelSpec {
        let set: BTreeSet<Axiom> = axioms.into_iter().collect();
        let axioms: Vec<Axiom> = set.into_iter().collect();
        let name = if axioms.is_empty() {
            "none".to_string()
        } else {
            axioms.iter().map(|a| a.tag()).collect::<Vec<_>>().join("+")
        };
        ModelSpec {
            name,
            axioms,
            wait_free_friendly: false,
            convergent: false,
        }
    }

    pub fn with(&self, extra: &[Axiom]) -> ModelSpec {
        let mut m = self.clone();
        for &a in extra {
            if !m.axioms.contains(&a) {
                m.axioms.push(a);
            }
        }
        if !extra.is_empty() {
            m.name = format!(
                "{}+{}",
                self.name,
                extra.iter().map(|a| a.tag()).collect::<Vec<_>>().join("+")
            );
        }
        m
    }

    /// The axioms with conjunction tags expanded.
    pub fn atoms(&self) -> BTreeSet<Axiom> {
        self.axioms
            .iter()
            .flat_map(|a| a.parts().iter().copied())
            .collect()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn spec(name: &str, axioms: &[Axiom], wait_free_friendly: bool, convergent: bool) -> ModelSpec {
    ModelSpec {
        name: name.to_string(),
        axioms: axioms.to_vec(),
        wait_free_friendly,
        convergent,
    }
}

pub fn catalog() -> Vec<ModelSpec> {
    use Axiom::*;
    vec![
        spec("serial", &[ConsSerial], true, false),
        spec("pipelined", &[PropPipe, ConsSerial], true, false),
        spec("causal", &[PropCausal, ConsSerial], true, false),
        spec(
            "convergent_causal",
            &[PropCausal, ConsSerial, ResConv],
            true,
            true,
        ),
        spec("sequential", &[ConsSerial, SerArb], false, true),
        spec("set_sequential", &[ConsSetSeq], false, true),
        spec("replay", &[VisMon, VisLoc, SerArb], true, true),
        spec(
            "pipelined_replay",
            &[VisMon, VisLoc, SerArb, PropPipe],
            true,
            true,
        ),
        spec(
            "causal_replay",
            &[VisMon, VisLoc, SerArb, PropCausal],
            true,
            true,
        ),
        spec("prefix", &[VisMon, SerClo, SerArb], true, true),
        spec(
            "pipelined_prefix",
            &[VisMon, SerClo, SerArb, PropPipe],
            true,
            true,
        ),
        spec(
            "causal_prefix",
            &[VisMon, SerClo, SerArb, PropCausal],
            false,
            true,
        ),
        spec("causality", &[PropCausal], true, false),
        spec("pipelining", &[PropPipe], true, false),
        spec("causal_convergence", &[PropCausal, ResConv], true, true),
    ]
}

pub fn model(name: &str) -> Option<ModelSpec> {
    let key = name.trim().to_ascii_lowercase().replace([' ', '-'], "_");
    catalog()
        .into_iter()
        .chain(axiom_nodes())
        .find(|m| m.name == key)
}

/// Single-axiom nodes of the taxonomy that are not catalog models.
fn axiom_nodes() -> Vec<ModelSpec> {
    use Axiom::*;
    vec![
        spec("monotonic_visibility", &[VisMon], true, false),
        spec("local_visibility", &[VisLoc], true, false),
        spec("closed_past", &[SerClo], true, false),
        spec("arbitration", &[SerArb], true, true),
        spec("convergence", &[ResConv], true, true),
    ]
}

pub fn satisfies(m: &ModelSpec, e: &Execution) -> bool {
    holds_all(&m.axioms, e).unwrap_or(false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Axiom,
    Model,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaxonomyNode {
    pub model: ModelSpec,
    pub kind: NodeKind,
}

/// Edges `(a, b)` mean `a` implies `b`.
#[derive(Clone, Debug)]
pub struct Taxonomy {
    pub nodes: Vec<TaxonomyNode>,
    pub edges: Vec<(String, String)>,
}

const TAXONOMY_MODELS: [&str; 12] = [
    "sequential",
    "convergent_causal",
    "causal",
    "pipelined",
    "serial",
    "causal_replay",
    "pipelined_replay",
    "replay",
    "causal_prefix",
    "pipelined_prefix",
    "prefix",
    "causality",
];

const TAXONOMY_EDGES: [(&str, &str); 30] = [
    ("sequential", "convergent_causal"),
    ("sequential", "causal_replay"),
    ("sequential", "causal_prefix"),
    ("convergent_causal", "causal"),
    ("convergent_causal", "convergence"),
    ("causal", "pipelined"),
    ("causal", "causality"),
    ("pipelined", "serial"),
    ("pipelined", "pipelining"),
    ("causal_replay", "pipelined_replay"),
    ("causal_replay", "causality"),
    ("pipelined_replay", "replay"),
    ("pipelined_replay", "pipelining"),
    ("replay", "monotonic_visibility"),
    ("replay", "local_visibility"),
    ("replay", "arbitration"),
    ("causal_prefix", "pipelined_prefix"),
    ("causal_prefix", "causality"),
    ("pipelined_prefix", "prefix"),
    ("pipelined_prefix", "pipelining"),
    ("prefix", "monotonic_visibility"),
    ("prefix", "closed_past"),
    ("prefix", "arbitration"),
    ("causality", "monotonic_visibility"),
    ("causality", "local_visibility"),
    ("causality", "pipelining"),
    ("serial", "monotonic_visibility"),
    ("serial", "local_visibility"),
    ("serial", "closed_past"),
    ("arbitration", "convergence"),
];

pub fn taxonomy() -> Taxonomy {
    let mut nodes: Vec<TaxonomyNode> = TAXONOMY_MODELS
        .iter()
        .map(|n| TaxonomyNode {
            model: model(n).unwrap(),
            kind: if *n == "causality" {
                NodeKind::Axiom
            } else {
                NodeKind::Model
            },
        })
        .collect();
    for n in [
        "monotonic_visibility",
        "local_visibility",
        "closed_past",
        "pipelining",
        "arbitration",
        "convergence",
    ] {
        nodes.push(TaxonomyNode {
            model: model(n).unwrap(),
            kind: NodeKind::Axiom,
        });
    }
    let edges = TAXONOMY_EDGES
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    Taxonomy { nodes, edges }
}

impl Taxonomy {
    pub fn node(&self, name: &str) -> Option<&TaxonomyNode> {
        self.nodes.iter().find(|n| n.model.name == name)
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.edges.iter().any(|(x, y)| x == a && y == b)
    }

    /// Whether `b` is reachable from `a` along edges.
    pub fn implies(&self, a: &str, b: &str) -> bool {
        let mut stack = vec![a.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if x == b {
                return true;
            }
            if seen.insert(x.clone()) {
                stack.extend(
                    self.edges
                        .iter()
                        .filter(|(s, _)| *s == x)
                        .map(|(_, t)| t.clone()),
                );
            }
        }
        false
    }

    /// Edges not implied by the remaining ones.
    pub fn transitive_reduction(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .filter(|(a, b)| {
                let others = Taxonomy {
                    nodes: vec![],
                    edges: self
                        .edges
                        .iter()
                        .filter(|e| e.0 != *a || e.1 != *b)
                        .cloned()
                        .collect(),
                };
                !others.implies(a, b)
            })
            .cloned()
            .collect()
    }

    /// One node per line, then one `a -> b` line per edge.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let kind = match n.kind {
                NodeKind::Axiom => "axiom",
                NodeKind::Model => "model",
            };
            out.push_str(&format!(
                "node {:?} kind={kind} axioms={} convergent={} wait_free={}\n",
                n.model.name.replace('_', " "),
                n.model
                    .axioms
                    .iter()
                    .map(|a| a.tag())
                    .collect::<Vec<_>>()
                    .join(","),
                n.model.convergent,
                n.model.wait_free_friendly,
            ));
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("{a} -> {b}\n"));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub enum Evidence {
    Confirmed(usize),
    Refuted(Box<Execution>),
    Inconclusive,
}

/// Samples random valid executions and looks for one satisfying `stronger`
/// but not `weaker`. `Confirmed(n)` counts the samples that satisfied `stronger`.
pub fn test_implication(
    stronger: &ModelSpec,
    weaker: &ModelSpec,
    trials: usize,
    seed: u64,
) -> Evidence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = GenConfig::default();
    let mut hits = 0;
    for _ in 0..trials {
        let (e, _) = random_valid_execution(&mut rng, &cfg);
        if satisfies(stronger, &e) {
            hits += 1;
            if !satisfies(weaker, &e) {
                return Evidence::Refuted(Box::new(e));
            }
        }
    }
    if hits == 0 {
        Evidence::Inconclusive
    } else {
        Evidence::Confirmed(hits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_contents() {
        let c = catalog();
        assert_eq!(c.len(), 15);
        let cc = model("convergent causal").unwrap();
        assert_eq!(
            cc.atoms(),
            [
                Axiom::VisCausal,
                Axiom::SerCausal,
                Axiom::ConsSerial,
                Axiom::ResConv
            ]
            .into()
        );
        let cp = model("causal_prefix").unwrap();
        assert!(!cp.wait_free_friendly);
        assert!(!model("causal").unwrap().convergent);
        assert!(model("replay").unwrap().convergent);
    }

    #[test]
    fn taxonomy_shape() {
        let t = taxonomy();
        assert!(t.has_edge("sequential", "convergent_causal"));
        assert!(t.has_edge("causal_prefix", "pipelined_prefix"));
        assert!(!t.implies("replay", "serial"));
        assert!(!t.implies("serial", "replay"));
        assert!(t.implies("sequential", "monotonic_visibility"));
        assert_eq!(t.transitive_reduction().len(), t.edges.len());
        assert!(t.render().contains("\"convergent causal\""));
        for (a, b) in &t.edges {
            assert!(t.node(a).is_some() && t.node(b).is_some(), "{a} -> {b}");
        }
    }

    #[test]
    fn empty_execution_satisfies_everything() {
        let e = Execution::new(
            Default::default(),
            crate::relation::Relation::empty(0),
            vec![],
        )
        .unwrap();
        for m in catalog() {
            assert!(satisfies(&m, &e), "{m}");
        }
    }
}
