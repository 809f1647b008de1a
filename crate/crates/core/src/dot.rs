//! Graphviz export. Nodes follow state order and edges the canonical
//! transition order, so output is stable across runs.

use std::fmt::Write as _;

use crate::automaton::{Automaton, Label};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Renders `a` as a DOT digraph: marked states double-circled, ε-edges dashed,
/// and an invisible start node pointing at the initial state.
pub fn export_dot(a: &Automaton, graph_name: &str) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(graph_name)).unwrap();
    out.push_str("  rankdir=LR;\n");
    out.push_str("  __start [shape=point, label=\"\"];\n");
    for q in a.states() {
        let shape = if a.is_marked(q) { "doublecircle" } else { "circle" };
        writeln!(out, "  n{q} [label={}, shape={shape}];", quote(a.state_name(q))).unwrap();
    }
    writeln!(out, "  __start -> n{};", a.initial()).unwrap();
    for t in a.transitions() {
        match t.label {
            Label::Eps => writeln!(out, "  n{} -> n{} [label=\"ε\", style=dashed];", t.src, t.dst).unwrap(),
            Label::Event(e) => {
                writeln!(out, "  n{} -> n{} [label={}];", t.src, t.dst, quote(a.alphabet().name(e))).unwrap()
            }
        }
    }
    out.push_str("}\n");
    out
}
