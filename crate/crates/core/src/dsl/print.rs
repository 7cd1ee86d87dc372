use std::fmt::Write;

use crate::model::{BoundaryKind, Entity, EntityKind, MobilityKind, MobilityRef, Model, TaskIntent, World};

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn mobility_word(k: MobilityKind) -> &'static str {
    match k {
        MobilityKind::Mobile => "free",
        MobilityKind::TaskFixed => "fixed",
        MobilityKind::AlwaysFixed => "pinned",
        MobilityKind::Unspecified => "",
    }
}

fn entity_line(e: &Entity) -> String {
    let mut s = String::new();
    match &e.kind {
        EntityKind::MixedGroup(members) => {
            let list: Vec<&str> = members.iter().map(String::as_str).collect();
            return format!("mixed {} {{ {} }}", e.id, list.join(", "));
        }
        EntityKind::Sensor(c) | EntityKind::Effector(c) => {
            let _ = write!(s, "{} {} channel {c}", e.kind.keyword(), e.id);
        }
        kind => {
            let _ = write!(s, "{} {}", kind.keyword(), e.id);
            if kind.is_artifact() {
                s.push_str(if e.world == World::Virtual { " virtual" } else { " real" });
            }
        }
    }
    if let Some(p) = &e.place {
        let _ = write!(s, " @{p}");
    }
    if !e.mobility.is_unspecified() {
        s.push_str(" mobility ");
        if let MobilityRef::Entity(r) = &e.mobility.reference {
            let _ = write!(s, "{r}/");
        }
        s.push_str(mobility_word(e.mobility.kind));
    }
    if e.stack {
        s.push_str(" stack");
    }
    if let Some(outer) = &e.nested_in {
        let _ = write!(s, " in {outer}");
    }
    s
}

/// Canonical `.irvo` text for a model.
///
/// Entities are written in kind order then by id; relations and merge
/// nodes keep model order, so relation ids survive a round trip.
pub fn serialize(model: &Model) -> String {
    let mut out = format!("model {} {{\n", quote(model.name()));
    let intent = match model.intent() {
        TaskIntent::Manipulation => "manipulation",
        TaskIntent::PerceptionOnly => "perception",
    };
    let _ = writeln!(out, "  intent {intent}");
    for p in model.places() {
        let _ = writeln!(out, "  place {p}");
    }
    for b in model.boundaries() {
        let kind = match &b.kind {
            BoundaryKind::Opaque => "opaque".to_string(),
            BoundaryKind::AudioPermeable => "audio".to_string(),
            BoundaryKind::Mirror { viewer } => format!("mirror viewer {viewer}"),
        };
        let _ = writeln!(out, "  boundary {} {} {kind}", b.a, b.b);
    }
    let mut entities: Vec<&Entity> = model.entities().collect();
    entities.sort_by(|a, b| (a.kind.rank(), &a.id).cmp(&(b.kind.rank(), &b.id)));
    for e in entities {
        let _ = writeln!(out, "  {}", entity_line(e));
    }
    for r in model.relations() {
        let _ = write!(out, "  rel {} -> {} {}", r.from, r.to, r.kind.as_str());
        if !r.salient {
            out.push_str(" dashed");
        }
        if let Some(c) = r.channel {
            let _ = write!(out, " channel {c}");
        }
        if let Some(a) = &r.annotation {
            let _ = write!(out, " {}", quote(a));
        }
        out.push('\n');
    }
    for m in model.merges() {
        let inputs: Vec<String> = m.inputs.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "  merge {} {{ {} }} -> {}", m.id, inputs.join(", "), m.output);
    }
    out.push_str("}\n");
    out
}
