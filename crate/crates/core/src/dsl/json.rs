//! `irvo-json/1`: a lossless JSON projection of a model.

use serde::{Deserialize, Serialize};

use crate::model::build::insertion_order;
use crate::model::{
    BoundaryKind, Channel, Entity, EntityKind, Mobility, MobilityKind, MobilityRef, Model, ModelError, Port,
    RelationKind, RelationSpec, TaskIntent, World,
};

pub const JSON_SCHEMA: &str = "irvo-json/1";

#[derive(Debug, thiserror::Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("unsupported schema `{0}`, expected `{JSON_SCHEMA}`")]
    Schema(String),
    #[error("invalid value: {0}")]
    Value(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Serialize, Deserialize)]
struct JModel {
    name: String,
    intent: String,
    places: Vec<String>,
    boundaries: Vec<JBoundary>,
    entities: Vec<JEntity>,
    relations: Vec<JRelation>,
    merges: Vec<JMerge>,
    schema: String,
}

#[derive(Serialize, Deserialize)]
struct JBoundary {
    a: String,
    b: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    viewer: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct JMobility {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    kind: String,
}

#[derive(Serialize, Deserialize)]
struct JEntity {
    id: String,
    kind: String,
    world: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    place: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mobility: Option<JMobility>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nested_in: Option<String>,
    #[serde(default)]
    stack: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    members: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct JPort {
    entity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct JRelation {
    id: String,
    from: JPort,
    to: JPort,
    kind: String,
    salient: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    channel: Option<String>,
    effective_channel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotation: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct JMerge {
    id: String,
    inputs: Vec<JPort>,
    output: JPort,
    channel: String,
}

fn mobility_name(k: MobilityKind) -> &'static str {
    match k {
        MobilityKind::Mobile => "mobile",
        MobilityKind::TaskFixed => "task_fixed",
        MobilityKind::AlwaysFixed => "always_fixed",
        MobilityKind::Unspecified => "unspecified",
    }
}

fn jport(p: &Port) -> JPort {
    JPort { entity: p.entity.clone(), channel: p.channel.map(|c| c.to_string()) }
}

/// Serializes a model. Entities appear in canonical order (kind, then id).
pub fn to_json(model: &Model) -> String {
    let mut entities: Vec<&Entity> = model.entities().collect();
    entities.sort_by(|a, b| (a.kind.rank(), &a.id).cmp(&(b.kind.rank(), &b.id)));
    let j = JModel {
        name: model.name().to_string(),
        intent: match model.intent() {
            TaskIntent::Manipulation => "manipulation",
            TaskIntent::PerceptionOnly => "perception",
        }
        .into(),
        places: model.places().iter().cloned().collect(),
        boundaries: model
            .boundaries()
            .iter()
            .map(|b| {
                let (kind, viewer) = match &b.kind {
                    BoundaryKind::Opaque => ("opaque", None),
                    BoundaryKind::AudioPermeable => ("audio", None),
                    BoundaryKind::Mirror { viewer } => ("mirror", Some(viewer.clone())),
                };
                JBoundary { a: b.a.clone(), b: b.b.clone(), kind: kind.into(), viewer }
            })
            .collect(),
        entities: entities
            .into_iter()
            .map(|e| JEntity {
                id: e.id.clone(),
                kind: e.kind.keyword().into(),
                world: e.world.as_str().into(),
                channel: e.kind.transducer_channel().map(|c| c.to_string()),
                place: e.place.clone(),
                mobility: (!e.mobility.is_unspecified()).then(|| JMobility {
                    reference: match &e.mobility.reference {
                        MobilityRef::World => None,
                        MobilityRef::Entity(r) => Some(r.clone()),
                    },
                    kind: mobility_name(e.mobility.kind).into(),
                }),
                nested_in: e.nested_in.clone(),
                stack: e.stack,
                members: match &e.kind {
                    EntityKind::MixedGroup(m) => Some(m.iter().cloned().collect()),
                    _ => None,
                },
            })
            .collect(),
        relations: model
            .relations()
            .iter()
            .map(|r| JRelation {
                id: r.id.clone(),
                from: jport(&r.from),
                to: jport(&r.to),
                kind: r.kind.as_str().into(),
                salient: r.salient,
                channel: r.channel.map(|c| c.to_string()),
                effective_channel: r.effective_channel.to_string(),
                annotation: r.annotation.clone(),
            })
            .collect(),
        merges: model
            .merges()
            .iter()
            .map(|m| JMerge {
                id: m.id.clone(),
                inputs: m.inputs.iter().map(jport).collect(),
                output: jport(&m.output),
                channel: m.channel.to_string(),
            })
            .collect(),
        schema: JSON_SCHEMA.into(),
    };
    serde_json::to_string_pretty(&j).expect("model JSON is always serializable")
}

fn bad(what: &str, value: &str) -> JsonError {
    JsonError::Value(format!("{what} `{value}`"))
}

fn channel(s: &str) -> Result<Channel, JsonError> {
    s.parse().map_err(|()| bad("channel", s))
}

fn port(p: JPort) -> Result<Port, JsonError> {
    Ok(Port { entity: p.entity, channel: p.channel.as_deref().map(channel).transpose()? })
}

fn entity(j: &JEntity) -> Result<Entity, JsonError> {
    let world = match j.world.as_str() {
        "real" => World::Real,
        "virtual" => World::Virtual,
        "straddling" => World::Straddling,
        w => return Err(bad("world", w)),
    };
    let chan = || -> Result<Channel, JsonError> {
        channel(j.channel.as_deref().ok_or_else(|| bad("missing channel on", &j.id))?)
    };
    let kind = match j.kind.as_str() {
        "user" => EntityKind::User,
        "tool" => EntityKind::Tool,
        "object" => EntityKind::Object,
        "internal" => EntityKind::InternalModel,
        "sensor" => EntityKind::Sensor(chan()?),
        "effector" => EntityKind::Effector(chan()?),
        k => return Err(bad("entity kind", k)),
    };
    if j.channel.is_some() && !kind.is_transducer() {
        return Err(bad("channel on non-transducer", &j.id));
    }
    let mobility = match &j.mobility {
        None => Mobility::default(),
        Some(m) => {
            let kind = match m.kind.as_str() {
                "mobile" => MobilityKind::Mobile,
                "task_fixed" => MobilityKind::TaskFixed,
                "always_fixed" => MobilityKind::AlwaysFixed,
                "unspecified" => MobilityKind::Unspecified,
                k => return Err(bad("mobility", k)),
            };
            let reference = m.reference.clone().map_or(MobilityRef::World, MobilityRef::Entity);
            Mobility { reference, kind }
        }
    };
    Ok(Entity {
        id: j.id.clone(),
        kind,
        world,
        place: j.place.clone(),
        mobility,
        nested_in: j.nested_in.clone(),
        stack: j.stack,
    })
}

/// Reads `irvo-json/1`, rebuilding the model through the construction
/// operations so every invariant is re-checked.
pub fn from_json(text: &str) -> Result<Model, JsonError> {
    let j: JModel = serde_json::from_str(text)?;
    if j.schema != JSON_SCHEMA {
        return Err(JsonError::Schema(j.schema));
    }
    let mut m = Model::new(j.name);
    m.set_intent(match j.intent.as_str() {
        "manipulation" => TaskIntent::Manipulation,
        "perception" => TaskIntent::PerceptionOnly,
        i => return Err(bad("intent", i)),
    });
    for p in j.places {
        m.add_place(p)?;
    }
    for b in j.boundaries {
        let kind = match (b.kind.as_str(), b.viewer) {
            ("opaque", None) => BoundaryKind::Opaque,
            ("audio", None) => BoundaryKind::AudioPermeable,
            ("mirror", Some(viewer)) => BoundaryKind::Mirror { viewer },
            (k, _) => return Err(bad("boundary", k)),
        };
        m.add_boundary(b.a, b.b, kind)?;
    }
    let (groups, plain): (Vec<&JEntity>, Vec<&JEntity>) = j.entities.iter().partition(|e| e.kind == "mixed");
    let plain: Vec<Entity> = plain.into_iter().map(entity).collect::<Result<_, _>>()?;
    let refs: Vec<&Entity> = plain.iter().collect();
    let order = insertion_order(&refs).map_err(ModelError::NestingCycle)?;
    for i in order {
        m.add_entity(plain[i].clone())?;
    }
    for g in groups {
        let members = g.members.clone().ok_or_else(|| bad("mixed group without members", &g.id))?;
        m.compose_mixed(g.id.clone(), members)?;
    }
    for r in j.relations {
        let kind = match r.kind.as_str() {
            "action" => RelationKind::Action,
            "perception" => RelationKind::Perception,
            "communication" => RelationKind::Communication,
            k => return Err(bad("relation kind", k)),
        };
        let spec = RelationSpec {
            from: port(r.from)?,
            to: port(r.to)?,
            kind,
            salient: r.salient,
            channel: r.channel.as_deref().map(channel).transpose()?,
            annotation: r.annotation,
        };
        let id = m.add_relation(spec)?;
        if id != r.id {
            return Err(bad("relation id", &r.id));
        }
        let stored = channel(&r.effective_channel)?;
        let inferred = m.relations().last().expect("just added").effective_channel;
        if stored != inferred {
            return Err(ModelError::ChannelMismatch(inferred, stored).into());
        }
    }
    for g in j.merges {
        let inputs = g.inputs.into_iter().map(port).collect::<Result<_, _>>()?;
        m.add_merge(g.id.clone(), inputs, port(g.output)?)?;
        let stored = channel(&g.channel)?;
        if m.merges().last().expect("just added").channel != stored {
            return Err(bad("merge channel", &g.channel));
        }
    }
    Ok(m)
}
