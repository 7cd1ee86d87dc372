use std::collections::{BTreeMap, BTreeSet};

use super::{sort_findings, Finding, RuleId, Severity};
use crate::model::{BoundaryKind, Channel, EntityKind, Model, TaskIntent, World};

/// A relation, or one input edge of a merge node (input entity to the
/// merge's output user).
struct Edge<'a> {
    nodes: Vec<String>,
    label: String,
    from: &'a str,
    to: &'a str,
    channel: Channel,
}

fn edges(model: &Model) -> Vec<Edge<'_>> {
    let mut out: Vec<Edge<'_>> = model
        .relations()
        .iter()
        .map(|r| Edge {
            nodes: vec![r.id.clone()],
            label: format!("{} ({} -> {})", r.id, r.from, r.to),
            from: &r.from.entity,
            to: &r.to.entity,
            channel: r.effective_channel,
        })
        .collect();
    for m in model.merges() {
        for input in &m.inputs {
            out.push(Edge {
                nodes: vec![m.id.clone(), input.entity.clone()],
                label: format!("merge {} input {}", m.id, input),
                from: &input.entity,
                to: &m.output.entity,
                channel: m.channel,
            });
        }
    }
    out
}

/// World a relation leaves `id` from (`emitting`) or arrives in.
fn side(model: &Model, id: &str, emitting: bool) -> World {
    let Some(e) = model.entity(id) else { return World::Straddling };
    match e.kind {
        EntityKind::User => World::Real,
        EntityKind::InternalModel => World::Virtual,
        EntityKind::Tool | EntityKind::Object => e.world,
        EntityKind::Sensor(_) if emitting => World::Virtual,
        EntityKind::Sensor(_) => World::Real,
        EntityKind::Effector(_) if emitting => World::Real,
        EntityKind::Effector(_) => World::Virtual,
        EntityKind::MixedGroup(_) => World::Straddling,
    }
}

fn is_transducer(model: &Model, id: &str) -> bool {
    model.entity(id).is_some_and(|e| e.is_transducer())
}

fn finish(mut findings: Vec<Finding>) -> Vec<Finding> {
    sort_findings(&mut findings);
    findings
}

/// S1: users real, internal models virtual, world tags consistent with
/// kinds, and no real entity nested in a virtual one.
pub fn rule_world(model: &Model) -> Vec<Finding> {
    let mut out = Vec::new();
    let err = |msg: String, nodes: Vec<String>| Finding::new(RuleId::S1, Severity::Error, msg, nodes);
    for e in model.entities() {
        let expected = match e.kind {
            EntityKind::User => Some(World::Real),
            EntityKind::InternalModel => Some(World::Virtual),
            EntityKind::Sensor(_) | EntityKind::Effector(_) | EntityKind::MixedGroup(_) => Some(World::Straddling),
            EntityKind::Tool | EntityKind::Object => None,
        };
        match expected {
            Some(w) if w != e.world => out.push(err(
                format!("{} `{}` must be {}, not {}", e.kind.keyword(), e.id, w.as_str(), e.world.as_str()),
                vec![e.id.clone()],
            )),
            None if e.world == World::Straddling => out.push(err(
                format!("{} `{}` must be tagged real or virtual", e.kind.keyword(), e.id),
                vec![e.id.clone()],
            )),
            _ => {}
        }
        if let Some(outer) = &e.nested_in {
            if model.world_of(&e.id) == Ok(World::Real) && model.world_of(outer) == Ok(World::Virtual) {
                out.push(err(
                    format!("real `{}` cannot be nested in virtual `{outer}`", e.id),
                    vec![e.id.clone(), outer.clone()],
                ));
            }
        }
    }
    finish(out)
}

fn crossing_error(model: &Model, e: &Edge<'_>) -> Option<String> {
    if side(model, e.from, true) != World::Real || side(model, e.to, false) != World::Real {
        return None;
    }
    let (p, q) = (model.effective_place(e.from)?, model.effective_place(e.to)?);
    if p == q {
        return None;
    }
    let b = model.boundary_between(p, q)?;
    match &b.kind {
        BoundaryKind::Opaque => Some(format!("{} crosses the opaque boundary between `{p}` and `{q}`", e.label)),
        BoundaryKind::AudioPermeable if e.channel != Channel::A => Some(format!(
            "{} crosses the audio-only boundary between `{p}` and `{q}` on channel {}",
            e.label, e.channel
        )),
        BoundaryKind::Mirror { viewer } => {
            let into_viewer = model.entity(e.to).is_some_and(|t| t.is_user()) && q == viewer;
            if e.channel == Channel::V && into_viewer {
                None
            } else {
                Some(format!(
                    "{} crosses the mirror between `{p}` and `{q}`; only visual perception by users in `{viewer}` may",
                    e.label
                ))
            }
        }
        BoundaryKind::AudioPermeable => None,
    }
}

/// S2, S3 and S4.
pub fn rule_transducers(model: &Model) -> Vec<Finding> {
    let mut out = Vec::new();
    let all = edges(model);

    for e in &all {
        let (emit, recv) = (side(model, e.from, true), side(model, e.to, false));
        if emit != recv && !is_transducer(model, e.from) && !is_transducer(model, e.to) {
            out.push(Finding::new(
                RuleId::S2,
                Severity::Error,
                format!(
                    "{} goes from the {} to the {} world without a transducer",
                    e.label,
                    emit.as_str(),
                    recv.as_str()
                ),
                e.nodes.clone(),
            ));
        }
        if let Some(msg) = crossing_error(model, e) {
            out.push(Finding::new(RuleId::S2, Severity::Error, msg, e.nodes.clone()));
        }
    }

    // S3: blame the transducer crossed the wrong way. An edge between two
    // transducers goes to whichever is already blamed, else to its target.
    let mut blamed: BTreeMap<&str, Vec<&Edge<'_>>> = BTreeMap::new();
    let mut between = Vec::new();
    for e in &all {
        if side(model, e.from, true) == side(model, e.to, false) {
            continue;
        }
        match (is_transducer(model, e.from), is_transducer(model, e.to)) {
            (true, true) => between.push(e),
            (true, false) => blamed.entry(e.from).or_default().push(e),
            (false, true) => blamed.entry(e.to).or_default().push(e),
            (false, false) => {}
        }
    }
    for e in between {
        let target = if blamed.contains_key(e.from) && !blamed.contains_key(e.to) { e.from } else { e.to };
        blamed.entry(target).or_default().push(e);
    }
    for (t, es) in blamed {
        let kind = &model.entity(t).expect("edge endpoints exist").kind;
        let expected = if matches!(kind, EntityKind::Sensor(_)) { "real to virtual" } else { "virtual to real" };
        let mut nodes = vec![t.to_string()];
        let mut labels = Vec::new();
        for e in es {
            nodes.extend(e.nodes.iter().cloned());
            labels.push(e.label.clone());
        }
        out.push(Finding::new(
            RuleId::S3,
            Severity::Error,
            format!("{} `{t}` must be crossed {expected}; wrong way: {}", kind.keyword(), labels.join(", ")),
            nodes,
        ));
    }

    for e in &all {
        for t in [e.from, e.to] {
            let Some(c) = model.entity(t).and_then(|x| x.kind.transducer_channel()) else { continue };
            if c != e.channel {
                let mut nodes = e.nodes.clone();
                nodes.push(t.to_string());
                out.push(Finding::new(
                    RuleId::S4,
                    Severity::Error,
                    format!("{} carries channel {} through `{t}`, which handles {c}", e.label, e.channel),
                    nodes,
                ));
            }
        }
    }
    finish(out)
}

/// S5: every mixed group has at least two tool/object members spanning
/// both worlds.
pub fn rule_mixed_groups(model: &Model) -> Vec<Finding> {
    let mut out = Vec::new();
    for (g, members) in model.groups() {
        let mut worlds = BTreeSet::new();
        let mut problems = Vec::new();
        for m in members {
            match model.entity(m) {
                Some(e) if e.kind.is_artifact() => {
                    worlds.insert(e.world);
                }
                Some(_) => problems.push(format!("`{m}` is not a tool or object")),
                None => problems.push(format!("`{m}` does not exist")),
            }
        }
        if members.len() < 2 {
            problems.push("fewer than two members".into());
        } else if worlds.len() < 2 {
            problems.push("all members are in the same world".into());
        }
        if !problems.is_empty() {
            let mut nodes = vec![g.id.clone()];
            nodes.extend(members.iter().cloned());
            out.push(Finding::new(
                RuleId::S5,
                Severity::Error,
                format!("mixed group `{}` is malformed: {}", g.id, problems.join("; ")),
                nodes,
            ));
        }
    }
    finish(out)
}

/// S6: the virtual world has no places.
pub fn rule_virtual_places(model: &Model) -> Vec<Finding> {
    let out = model
        .entities()
        .filter(|e| model.world_of(&e.id) == Ok(World::Virtual))
        .filter_map(|e| {
            let p = e.place.as_ref()?;
            Some(Finding::new(
                RuleId::S6,
                Severity::Error,
                format!("virtual `{}` cannot be located in place `{p}`", e.id),
                vec![e.id.clone()],
            ))
        })
        .collect();
    finish(out)
}

/// Merge nodes a perception arrives through; `None` for a direct arrival.
type Via = BTreeSet<Option<usize>>;

fn objects(model: &Model) -> impl Iterator<Item = &str> {
    model.entities().filter(|e| e.kind == EntityKind::Object).map(|e| e.id.as_str())
}

/// True when `user` acts on a tool that (through further actions) reaches
/// an object perceived by `user`.
pub(crate) fn has_loop(model: &Model, user: &str, salient_only: bool) -> bool {
    model.acted_tools(user, salient_only).into_iter().any(|tool| {
        model.action_reach(tool, salient_only).into_iter().any(|x| {
            model.entity(x).is_some_and(|e| e.kind == EntityKind::Object)
                && !model.arrivals(x, user, salient_only).is_empty()
        })
    })
}

/// R1: action-perception loop.
pub fn rule_loop(model: &Model) -> Vec<Finding> {
    let mut out = Vec::new();
    let err = |msg: String, nodes: Vec<String>| Finding::new(RuleId::R1, Severity::Error, msg, nodes);
    match model.intent() {
        TaskIntent::Manipulation => {
            for u in model.users() {
                if has_loop(model, &u.id, true) {
                    continue;
                }
                let msg = if has_loop(model, &u.id, false) {
                    format!(
                        "no salient action-perception loop for `{}`; hint: a loop exists only through dashed relations",
                        u.id
                    )
                } else {
                    format!("no action-perception loop for `{}` through a tool and a domain object", u.id)
                };
                out.push(err(msg, vec![u.id.clone()]));
            }
        }
        TaskIntent::PerceptionOnly => {
            for t in model.entities().filter(|e| e.kind == EntityKind::Tool) {
                out.push(err(format!("perception-only model contains tool `{}`", t.id), vec![t.id.clone()]));
            }
            for u in model.users() {
                if !objects(model).any(|o| !model.arrivals(o, &u.id, true).is_empty()) {
                    out.push(err(format!("`{}` perceives no domain object", u.id), vec![u.id.clone()]));
                }
            }
        }
    }
    finish(out)
}

/// R2: every tool a user acts on is perceived back by that user.
pub fn rule_observability(model: &Model) -> Vec<Finding> {
    let mut out = Vec::new();
    for u in model.users() {
        for tool in model.acted_tools(&u.id, false) {
            let nodes = vec![tool.to_string(), u.id.clone()];
            if !model.arrivals(tool, &u.id, true).is_empty() {
                continue;
            }
            if model.arrivals(tool, &u.id, false).is_empty() {
                out.push(Finding::new(
                    RuleId::R2,
                    Severity::Warning,
                    format!("`{}` acts on `{tool}` but cannot perceive it", u.id),
                    nodes,
                ));
            } else {
                out.push(Finding::new(
                    RuleId::R2,
                    Severity::Info,
                    format!("`{}` perceives `{tool}` only through dashed relations", u.id),
                    nodes,
                ));
            }
        }
    }
    finish(out)
}

/// R4: perceptual continuity of mixed groups.
///
/// Every member must be perceived by some user, and members reaching the
/// same user on the same channel must converge through one merge node.
pub fn rule_continuity(model: &Model) -> Vec<Finding> {
    let mut out = Vec::new();
    let users: Vec<&str> = model.users().map(|u| u.id.as_str()).collect();
    if users.is_empty() {
        return out;
    }
    for (g, members) in model.groups() {
        for m in members {
            if !users.iter().any(|u| !model.arrivals(m, u, false).is_empty()) {
                out.push(Finding::new(
                    RuleId::R4,
                    Severity::Warning,
                    format!("member `{m}` of mixed group `{}` is perceived by no user", g.id),
                    vec![g.id.clone(), m.clone()],
                ));
            }
        }
        for u in &users {
            let mut by_channel: BTreeMap<Channel, Vec<(&String, Via)>> = BTreeMap::new();
            for m in members {
                let mut merges: BTreeMap<Channel, Via> = BTreeMap::new();
                for a in model.arrivals(m, u, false) {
                    merges.entry(a.channel).or_default().insert(a.merge);
                }
                for (c, via) in merges {
                    by_channel.entry(c).or_default().push((m, via));
                }
            }
            for (c, reaching) in by_channel {
                if reaching.len() < 2 {
                    continue;
                }
                let shared = model
                    .merges()
                    .iter()
                    .enumerate()
                    .any(|(i, _)| reaching.iter().all(|(_, via)| via.contains(&Some(i))));
                if !shared {
                    let names: Vec<String> = reaching.iter().map(|(m, _)| format!("`{m}`")).collect();
                    let mut nodes = vec![g.id.clone()];
                    nodes.extend(reaching.iter().map(|(m, _)| (*m).clone()));
                    nodes.push(u.to_string());
                    out.push(Finding::new(
                        RuleId::R4,
                        Severity::Warning,
                        format!(
                            "members {} of mixed group `{}` reach `{u}` separately on channel {c}; merge them with one ⊕",
                            names.join(", "),
                            g.id
                        ),
                        nodes,
                    ));
                }
            }
        }
    }
    finish(out)
}

/// R5: with several users, every shared object is perceived by all of them.
/// Applied across all places.
pub fn rule_wysiwis(model: &Model) -> Vec<Finding> {
    let users: Vec<&str> = model.users().map(|u| u.id.as_str()).collect();
    if users.len() < 2 {
        return vec![Finding::new(RuleId::R5, Severity::Info, "single-user model; WYSIWIS not applicable", vec![])];
    }
    let mut units: Vec<(String, Vec<String>)> = Vec::new();
    for (g, members) in model.groups() {
        if members.iter().any(|m| model.entity(m).is_some_and(|e| e.kind == EntityKind::Object)) {
            units.push((g.id.clone(), members.iter().cloned().collect()));
        }
    }
    for o in objects(model) {
        if model.group_of(o).is_none() {
            units.push((o.to_string(), Vec::new()));
        }
    }
    let mut out = Vec::new();
    for (unit, members) in units {
        let blind: Vec<&str> = users.iter().copied().filter(|u| !model.perceives(u, &unit, false)).collect();
        if blind.is_empty() {
            continue;
        }
        let list: Vec<String> = blind.iter().map(|u| format!("`{u}`")).collect();
        let mut nodes = vec![unit.clone()];
        nodes.extend(members);
        nodes.extend(blind.iter().map(|u| u.to_string()));
        out.push(Finding::new(
            RuleId::R5,
            Severity::Warning,
            format!("`{unit}` is not perceived by {} (checked across all places)", list.join(", ")),
            nodes,
        ));
    }
    finish(out)
}
