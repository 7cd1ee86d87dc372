//! DOT output.
//!
//! Real entities go in one cluster (with one sub-cluster per place),
//! virtual entities in a dashed cluster. Transducers sit between the two,
//! or in their place when they have one. Output depends only on the
//! canonical form of the model.

use std::collections::BTreeSet;
use std::fmt::Write;

use crate::model::{Entity, EntityKind, MobilityRef, Model, Relation, RelationKind, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub show_dashed: bool,
    pub show_transducers: bool,
    pub cluster_places: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions { show_dashed: true, show_transducers: true, cluster_places: true }
    }
}

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

fn node_label(model: &Model, e: &Entity) -> String {
    let mut label = e.id.clone();
    if let Some(c) = e.kind.transducer_channel() {
        let _ = write!(label, " ({c})");
    }
    if let Ok(m) = model.effective_mobility(&e.id) {
        if !m.is_unspecified() {
            label.push(' ');
            label.push_str(m.kind.glyph());
            if let MobilityRef::Entity(r) = &m.reference {
                let _ = write!(label, "{r}");
            }
        }
    }
    if e.stack {
        label.push_str(" [stack]");
    }
    label
}

fn node_line(model: &Model, e: &Entity) -> String {
    let shape = match e.kind {
        EntityKind::User => "shape=ellipse",
        EntityKind::Tool => "shape=box",
        EntityKind::Object => "shape=box, style=rounded",
        EntityKind::InternalModel => "shape=box3d",
        EntityKind::Sensor(_) => "shape=invtrapezium",
        EntityKind::Effector(_) => "shape=trapezium",
        EntityKind::MixedGroup(_) => "shape=box, style=dashed",
    };
    format!("\"{}\" [{shape}, label=\"{}\"];", e.id, esc(&node_label(model, e)))
}

fn edge_label(r: &Relation) -> String {
    let mut label = r.effective_channel.to_string();
    if r.kind == RelationKind::Communication {
        label.push_str(" comm");
    }
    if let Some(a) = &r.annotation {
        let _ = write!(label, " {a}");
    }
    label
}

/// Deterministic DOT text for `model`.
pub fn to_dot(model: &Model, options: &RenderOptions) -> String {
    let model = model.canonical();
    let mut out = format!("digraph \"{}\" {{\n", esc(model.name()));
    out.push_str("  graph [rankdir=LR, compound=true];\n");
    out.push_str("  node [fontname=\"Helvetica\"];\n");

    let mut entities: Vec<&Entity> = model.entities().collect();
    entities.sort_by(|a, b| (a.kind.rank(), &a.id).cmp(&(b.kind.rank(), &b.id)));
    let hidden = |e: &Entity| e.is_transducer() && !options.show_transducers;
    let real_side = |e: &Entity| {
        matches!(e.kind, EntityKind::User)
            || (e.kind.is_artifact() && e.world == World::Real)
            || (e.is_transducer() && options.cluster_places && model.effective_place(&e.id).is_some())
    };

    out.push_str("  subgraph cluster_real {\n    label=\"R\";\n");
    if options.cluster_places {
        for p in model.places() {
            let inside: Vec<&&Entity> = entities
                .iter()
                .filter(|e| real_side(e) && !hidden(e) && model.effective_place(&e.id) == Some(p))
                .collect();
            let _ = writeln!(out, "    subgraph \"cluster_place_{p}\" {{\n      label=\"{p}\";");
            for e in inside {
                let _ = writeln!(out, "      {}", node_line(&model, e));
            }
            out.push_str("    }\n");
        }
    }
    for e in &entities {
        let placed = options.cluster_places && model.effective_place(&e.id).is_some();
        if real_side(e) && !hidden(e) && !placed {
            let _ = writeln!(out, "    {}", node_line(&model, e));
        }
    }
    out.push_str("  }\n");

    out.push_str("  subgraph cluster_virtual {\n    label=\"V\";\n    style=dashed;\n");
    for e in &entities {
        let virtual_side = e.kind == EntityKind::InternalModel || (e.kind.is_artifact() && e.world == World::Virtual);
        if virtual_side {
            let _ = writeln!(out, "    {}", node_line(&model, e));
        }
    }
    out.push_str("  }\n");

    for e in &entities {
        let between = matches!(e.kind, EntityKind::MixedGroup(_)) || (e.is_transducer() && !real_side(e));
        if between && !hidden(e) {
            let _ = writeln!(out, "  {}", node_line(&model, e));
        }
    }
    for m in model.merges() {
        let _ = writeln!(out, "  \"{}\" [shape=circle, label=\"⊕\", width=0.3, fixedsize=true];", m.id);
    }
    for (g, members) in model.groups() {
        for member in members {
            let _ = writeln!(out, "  \"{}\" -> \"{member}\" [style=dotted, arrowhead=none];", g.id);
        }
    }

    let is_transducer = |id: &str| model.entity(id).is_some_and(|e| e.is_transducer());
    for r in model.relations() {
        if !r.salient && !options.show_dashed {
            continue;
        }
        if !options.show_transducers && (is_transducer(&r.from.entity) || is_transducer(&r.to.entity)) {
            continue;
        }
        let style = if r.salient { "" } else { ", style=dashed" };
        let _ =
            writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"{style}];", r.from.entity, r.to.entity, esc(&edge_label(r)));
    }
    for m in model.merges() {
        for input in &m.inputs {
            if options.show_transducers || !is_transducer(&input.entity) {
                let _ = writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"];", input.entity, m.id, m.channel);
            }
        }
        let _ = writeln!(out, "  \"{}\" -> \"{}\" [label=\"{}\"];", m.id, m.output.entity, m.channel);
    }
    if !options.show_transducers {
        for line in collapsed_edges(&model, options) {
            let _ = writeln!(out, "  {line}");
        }
    }
    out.push_str("}\n");
    out
}

/// Edges drawn instead of transducer chains: one bold edge from each
/// non-transducer source to each non-transducer target (or merge node)
/// reached through transducers only.
fn collapsed_edges(model: &Model, options: &RenderOptions) -> BTreeSet<String> {
    let is_transducer = |id: &str| model.entity(id).is_some_and(|e| e.is_transducer());
    let usable = |r: &Relation| r.salient || options.show_dashed;
    let mut lines = BTreeSet::new();
    for start in model.relations().iter().filter(|r| usable(r)) {
        if is_transducer(&start.from.entity) || !is_transducer(&start.to.entity) {
            continue;
        }
        let channel = start.effective_channel;
        // (transducer, every hop so far salient)
        let mut stack = vec![(start.to.entity.as_str(), start.salient)];
        let mut seen = BTreeSet::new();
        while let Some((t, salient)) = stack.pop() {
            if !seen.insert((t, salient)) {
                continue;
            }
            let mut emit = |target: &str, salient: bool| {
                let style = if salient { "bold" } else { "\"bold,dashed\"" };
                lines.insert(format!(
                    "\"{}\" -> \"{target}\" [label=\"{channel} ⇅\", style={style}];",
                    start.from.entity
                ));
            };
            for r in model.relations().iter().filter(|r| r.from.entity == t && usable(r)) {
                let s = salient && r.salient;
                if is_transducer(&r.to.entity) {
                    stack.push((r.to.entity.as_str(), s));
                } else {
                    emit(&r.to.entity, s);
                }
            }
            for m in model.merges() {
                if m.inputs.iter().any(|p| p.entity == t) {
                    emit(&m.id, salient);
                }
            }
        }
    }
    lines
}
