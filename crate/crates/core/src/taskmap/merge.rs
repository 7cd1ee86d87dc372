use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::build::insertion_order;
use crate::model::{
    BoundaryKind, Channel, Entity, EntityKind, Model, ModelError, Port, RelationKind, RelationSpec, TaskIntent,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MergeError {
    #[error("nothing to merge")]
    Empty,
    #[error("`{0}` has conflicting {1} across models")]
    AttributeConflict(String, String),
    #[error("models declare different task intents")]
    IncompatibleIntent,
    #[error("merged model is invalid: {0}")]
    Model(#[from] ModelError),
}

/// Something worth telling the user about a merge that still succeeded.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct MergeNote {
    pub relation: String,
    pub message: String,
}

impl fmt::Display for MergeNote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.relation, self.message)
    }
}

fn conflict(id: &str, attr: &str) -> MergeError {
    MergeError::AttributeConflict(id.to_string(), attr.to_string())
}

/// `None` joins with anything; two different values conflict.
fn join<T: PartialEq + Clone>(
    a: &mut T,
    b: &T,
    is_unset: impl Fn(&T) -> bool,
    id: &str,
    attr: &str,
) -> Result<(), MergeError> {
    if is_unset(a) {
        *a = b.clone();
        Ok(())
    } else if is_unset(b) || a == b {
        Ok(())
    } else {
        Err(conflict(id, attr))
    }
}

fn join_entity(acc: &mut Entity, e: &Entity) -> Result<(), MergeError> {
    let id = e.id.clone();
    match (&acc.kind, &e.kind) {
        (EntityKind::Sensor(a), EntityKind::Sensor(b)) | (EntityKind::Effector(a), EntityKind::Effector(b))
            if a != b =>
        {
            return Err(conflict(&id, "channel"))
        }
        (a, b) if a != b => return Err(conflict(&id, "kind")),
        _ => {}
    }
    if acc.world != e.world {
        return Err(conflict(&id, "world"));
    }
    join(&mut acc.place, &e.place, Option::is_none, &id, "place")?;
    join(&mut acc.mobility, &e.mobility, |m| m.is_unspecified(), &id, "mobility")?;
    join(&mut acc.nested_in, &e.nested_in, Option::is_none, &id, "nested_in")?;
    acc.stack |= e.stack;
    Ok(())
}

type RelKey = (Port, Port, RelationKind, Channel);

/// Merges models by identifier.
///
/// Same id means same element; attributes must agree, unset attributes
/// take the other side's value. Relations are deduplicated by (from, to,
/// kind, channel); when copies disagree on salience the salient one wins
/// and a note is recorded. The result is in canonical form.
pub fn merge_with_notes(models: &[Model]) -> Result<(Model, Vec<MergeNote>), MergeError> {
    let first = models.first().ok_or(MergeError::Empty)?;
    let intent: TaskIntent = first.intent();
    if models.iter().any(|m| m.intent() != intent) {
        return Err(MergeError::IncompatibleIntent);
    }
    let names: BTreeSet<&str> = models.iter().flat_map(|m| m.name().split('+')).collect();
    let name = names.into_iter().collect::<Vec<_>>().join("+");

    let mut places = BTreeSet::new();
    let mut boundaries: BTreeMap<(String, String), BoundaryKind> = BTreeMap::new();
    let mut entities: BTreeMap<String, Entity> = BTreeMap::new();
    let mut groups: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut merges: BTreeMap<String, (BTreeSet<Port>, Port)> = BTreeMap::new();
    let mut relations: BTreeMap<RelKey, RelationSpec> = BTreeMap::new();
    let mut notes = BTreeSet::new();

    for m in models {
        places.extend(m.places().iter().cloned());
        for b in m.boundaries() {
            let key = (b.a.clone(), b.b.clone());
            match boundaries.get(&key) {
                Some(k) if k != &b.kind => return Err(conflict(&format!("{}/{}", b.a, b.b), "boundary")),
                _ => {
                    boundaries.insert(key, b.kind.clone());
                }
            }
        }
        for e in m.entities() {
            if let EntityKind::MixedGroup(members) = &e.kind {
                groups.entry(e.id.clone()).or_default().extend(members.iter().cloned());
                continue;
            }
            match entities.get_mut(&e.id) {
                Some(acc) => join_entity(acc, e)?,
                None => {
                    entities.insert(e.id.clone(), e.clone());
                }
            }
        }
        for g in m.merges() {
            let entry = merges.entry(g.id.clone()).or_insert_with(|| (BTreeSet::new(), g.output.clone()));
            if entry.1 != g.output {
                return Err(conflict(&g.id, "output"));
            }
            entry.0.extend(g.inputs.iter().cloned());
        }
        for r in m.relations() {
            let key = (r.from.clone(), r.to.clone(), r.kind, r.effective_channel);
            let spec = RelationSpec {
                from: r.from.clone(),
                to: r.to.clone(),
                kind: r.kind,
                salient: r.salient,
                channel: r.channel,
                annotation: r.annotation.clone(),
            };
            match relations.get_mut(&key) {
                None => {
                    relations.insert(key, spec);
                }
                Some(acc) => {
                    if acc.salient != spec.salient {
                        notes.insert(MergeNote {
                            relation: format!("{} -> {} {}", r.from, r.to, r.kind.as_str()),
                            message: "salient in one model and dashed in another; kept salient".into(),
                        });
                        acc.salient = true;
                    }
                    acc.channel = acc.channel.or(spec.channel);
                    acc.annotation = match (acc.annotation.take(), spec.annotation) {
                        (Some(a), Some(b)) => Some(a.min(b)),
                        (a, b) => a.or(b),
                    };
                }
            }
        }
    }
    for id in groups.keys().chain(merges.keys()) {
        if entities.contains_key(id) {
            return Err(conflict(id, "kind"));
        }
    }
    if let Some(id) = merges.keys().find(|id| groups.contains_key(*id)) {
        return Err(conflict(id, "kind"));
    }
    let mut grouped: BTreeMap<&str, &str> = BTreeMap::new();
    for (g, members) in &groups {
        for m in members {
            if grouped.insert(m, g).is_some() {
                return Err(conflict(m, "group"));
            }
        }
    }

    let mut out = Model::new(name);
    out.set_intent(intent);
    for p in places {
        out.add_place(p)?;
    }
    for ((a, b), kind) in boundaries {
        out.add_boundary(a, b, kind)?;
    }
    let list: Vec<&Entity> = entities.values().collect();
    let order = insertion_order(&list).map_err(ModelError::NestingCycle)?;
    for i in order {
        out.add_entity(list[i].clone())?;
    }
    for (g, members) in groups {
        out.compose_mixed(g, members)?;
    }
    for spec in relations.into_values() {
        out.add_relation(spec)?;
    }
    for (id, (inputs, output)) in merges {
        out.add_merge(id, inputs.into_iter().collect(), output)?;
    }
    Ok((out.canonical(), notes.into_iter().collect()))
}

pub fn merge_models(models: &[Model]) -> Result<Model, MergeError> {
    merge_with_notes(models).map(|(m, _)| m)
}

/// Renames entity and merge-node identifiers, then rebuilds the model.
pub fn apply_aliases(model: &Model, aliases: &BTreeMap<String, String>) -> Result<Model, MergeError> {
    let rn = |s: &String| aliases.get(s).cloned().unwrap_or_else(|| s.clone());
    let port = |p: &Port| Port { entity: rn(&p.entity), channel: p.channel };
    let mut out = Model::new(model.name());
    out.set_intent(model.intent());
    for p in model.places() {
        out.add_place(p.clone())?;
    }
    for b in model.boundaries() {
        out.add_boundary(b.a.clone(), b.b.clone(), b.kind.clone())?;
    }
    let renamed: Vec<Entity> = model
        .entities()
        .filter(|e| !matches!(e.kind, EntityKind::MixedGroup(_)))
        .map(|e| {
            let mut e = e.clone();
            e.id = rn(&e.id);
            e.nested_in = e.nested_in.as_ref().map(rn);
            if let crate::model::MobilityRef::Entity(r) = &e.mobility.reference {
                e.mobility.reference = crate::model::MobilityRef::Entity(rn(r));
            }
            e
        })
        .collect();
    let list: Vec<&Entity> = renamed.iter().collect();
    let order = insertion_order(&list).map_err(ModelError::NestingCycle)?;
    for i in order {
        out.add_entity(list[i].clone())?;
    }
    for (g, members) in model.groups() {
        out.compose_mixed(rn(&g.id), members.iter().map(rn))?;
    }
    for r in model.relations() {
        out.add_relation(RelationSpec {
            from: port(&r.from),
            to: port(&r.to),
            kind: r.kind,
            salient: r.salient,
            channel: r.channel,
            annotation: r.annotation.clone(),
        })?;
    }
    for g in model.merges() {
        out.add_merge(rn(&g.id), g.inputs.iter().map(port).collect(), port(&g.output))?;
    }
    Ok(out)
}

/// Reads an alias file: one `old = new` pair per line, `#` comments.
pub fn parse_aliases(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (a, b) = line.split_once('=').ok_or_else(|| format!("line {}: expected `old = new`", n + 1))?;
        let (a, b) = (a.trim(), b.trim());
        if !crate::model::is_identifier(a) || !crate::model::is_identifier(b) {
            return Err(format!("line {}: aliases must be identifiers", n + 1));
        }
        if out.insert(a.to_string(), b.to_string()).is_some() {
            return Err(format!("line {}: `{a}` aliased twice", n + 1));
        }
    }
    Ok(out)
}
