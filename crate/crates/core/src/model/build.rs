use std::collections::BTreeSet;

use super::{
    is_identifier, BoundaryKind, Channel, Entity, EntityKind, MergeNode, MobilityKind, MobilityRef, Model, ModelError,
    PlaceBoundary, Port, Relation, RelationKind, World,
};

/// Everything needed to add a relation; the id and effective channel are
/// assigned by [`Model::add_relation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSpec {
    pub from: Port,
    pub to: Port,
    pub kind: RelationKind,
    pub salient: bool,
    pub channel: Option<Channel>,
    pub annotation: Option<String>,
}

impl RelationSpec {
    pub fn new(from: Port, to: Port, kind: RelationKind) -> Self {
        RelationSpec { from, to, kind, salient: true, channel: None, annotation: None }
    }

    pub fn action(from: Port, to: Port) -> Self {
        Self::new(from, to, RelationKind::Action)
    }

    pub fn perception(from: Port, to: Port) -> Self {
        Self::new(from, to, RelationKind::Perception)
    }

    pub fn communication(from: Port, to: Port) -> Self {
        Self::new(from, to, RelationKind::Communication)
    }

    pub fn dashed(mut self) -> Self {
        self.salient = false;
        self
    }

    pub fn channel(mut self, channel: Channel) -> Self {
        self.channel = Some(channel);
        self
    }

    pub fn annotated(mut self, text: impl Into<String>) -> Self {
        self.annotation = Some(text.into());
        self
    }
}

fn ident(id: &str) -> Result<(), ModelError> {
    if is_identifier(id) {
        Ok(())
    } else {
        Err(ModelError::InvalidIdentifier(id.to_string()))
    }
}

impl Model {
    pub fn add_place(&mut self, id: impl Into<String>) -> Result<(), ModelError> {
        let id = id.into();
        ident(&id)?;
        if self.places.contains(&id) {
            return Err(ModelError::DuplicateId(id));
        }
        self.places.insert(id);
        Ok(())
    }

    pub fn add_boundary(
        &mut self,
        a: impl Into<String>,
        b: impl Into<String>,
        kind: BoundaryKind,
    ) -> Result<(), ModelError> {
        let boundary = self.check_boundary(a.into(), b.into(), kind)?;
        let pos = self.boundaries.partition_point(|x| (&x.a, &x.b) < (&boundary.a, &boundary.b));
        self.boundaries.insert(pos, boundary);
        Ok(())
    }

    pub(crate) fn check_boundary(&self, a: String, b: String, kind: BoundaryKind) -> Result<PlaceBoundary, ModelError> {
        for p in [&a, &b] {
            if !self.places.contains(p) {
                return Err(ModelError::UnknownPlace(p.clone()));
            }
        }
        if a == b {
            return Err(ModelError::BoundarySamePlace(a));
        }
        if self.boundary_between(&a, &b).is_some() {
            return Err(ModelError::DuplicateBoundary(a, b));
        }
        if let BoundaryKind::Mirror { viewer } = &kind {
            if viewer != &a && viewer != &b {
                return Err(ModelError::ViewerNotInBoundary { a, b, viewer: viewer.clone() });
            }
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        Ok(PlaceBoundary { a, b, kind })
    }

    /// Adds a user, tool, object, internal model or transducer. Places and
    /// referenced entities must already exist.
    pub fn add_entity(&mut self, entity: Entity) -> Result<String, ModelError> {
        ident(&entity.id)?;
        if self.has_id(&entity.id) {
            return Err(ModelError::DuplicateId(entity.id));
        }
        self.check_entity(&entity)?;
        let id = entity.id.clone();
        self.entities.insert(id.clone(), entity);
        Ok(id)
    }

    /// Checks the invariants local to one entity, against the rest of the model.
    pub(crate) fn check_entity(&self, e: &Entity) -> Result<(), ModelError> {
        match &e.kind {
            EntityKind::User => {
                if e.world != World::Real {
                    return Err(ModelError::UserInVirtualWorld(e.id.clone()));
                }
            }
            EntityKind::InternalModel => {
                if e.world != World::Virtual || e.place.is_some() {
                    return Err(ModelError::ModelInRealWorld(e.id.clone()));
                }
            }
            EntityKind::Tool | EntityKind::Object => {
                if e.world == World::Straddling {
                    return Err(ModelError::MissingWorldTag(e.id.clone()));
                }
            }
            EntityKind::Sensor(_) | EntityKind::Effector(_) => {
                if e.world != World::Straddling {
                    return Err(ModelError::TransducerWorld(e.id.clone()));
                }
            }
            EntityKind::MixedGroup(_) => {
                return Err(ModelError::GroupThroughAddEntity(e.id.clone()));
            }
        }
        if e.stack && !e.kind.is_artifact() {
            return Err(ModelError::StackNotAllowed(e.id.clone()));
        }
        if let Some(p) = &e.place {
            if !self.places.contains(p) {
                return Err(ModelError::UnknownPlace(p.clone()));
            }
        }
        if let Some(outer) = &e.nested_in {
            if outer == &e.id {
                return Err(ModelError::SelfReference(e.id.clone()));
            }
            match self.entities.get(outer) {
                Some(o) if !matches!(o.kind, EntityKind::MixedGroup(_)) => {}
                _ => return Err(ModelError::UnknownEntity(outer.clone())),
            }
        }
        if let MobilityRef::Entity(r) = &e.mobility.reference {
            if e.mobility.kind == MobilityKind::Unspecified {
                return Err(ModelError::InvalidMobility(e.id.clone()));
            }
            if r == &e.id {
                return Err(ModelError::SelfReference(e.id.clone()));
            }
            if !self.entities.contains_key(r) {
                return Err(ModelError::UnknownEntity(r.clone()));
            }
        }
        Ok(())
    }

    /// Creates a mixed group from existing tools and objects spanning both worlds.
    pub fn compose_mixed<I, S>(&mut self, name: impl Into<String>, members: I) -> Result<String, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        ident(&name)?;
        if self.has_id(&name) {
            return Err(ModelError::DuplicateId(name));
        }
        let members: BTreeSet<String> = members.into_iter().map(Into::into).collect();
        self.check_group(&name, &members)?;
        let mut group = Entity::bare(name.clone(), EntityKind::MixedGroup(members), World::Straddling);
        group.mobility = Default::default();
        self.entities.insert(name.clone(), group);
        Ok(name)
    }

    pub(crate) fn check_group(&self, name: &str, members: &BTreeSet<String>) -> Result<(), ModelError> {
        let mut worlds = BTreeSet::new();
        for m in members {
            let e = self.entities.get(m).ok_or_else(|| ModelError::UnknownEntity(m.clone()))?;
            if !e.kind.is_artifact() {
                return Err(ModelError::InvalidGroupMember(m.clone()));
            }
            if let Some(g) = self.group_of(m) {
                if g.id != name {
                    return Err(ModelError::MemberAlreadyGrouped(m.clone(), g.id.clone()));
                }
            }
            worlds.insert(e.world);
        }
        if members.len() < 2 {
            return Err(ModelError::TooFewMembers);
        }
        if worlds.len() < 2 {
            return Err(ModelError::AllSameWorld);
        }
        Ok(())
    }

    fn check_port(&self, port: &Port) -> Result<&Entity, ModelError> {
        let e = self.entities.get(&port.entity).ok_or_else(|| ModelError::UnknownEndpoint(port.entity.clone()))?;
        match (&e.kind, port.channel) {
            (EntityKind::User, None) => Err(ModelError::MissingUserChannel(e.id.clone())),
            (EntityKind::InternalModel, Some(_)) => Err(ModelError::ChannelOnInternalModel(e.id.clone())),
            (EntityKind::MixedGroup(_), _) => Err(ModelError::GroupEndpoint(e.id.clone())),
            _ => Ok(e),
        }
    }

    /// Resolves the effective channel of a relation, checking endpoint kinds.
    ///
    /// Inference order: user port channels, other explicit port channels and
    /// the declared channel (all of which must agree), then the transducer
    /// channel of either endpoint. A transducer whose channel differs from
    /// the resolved one is left for the rule engine to report.
    pub(crate) fn resolve_relation(&self, spec: &RelationSpec) -> Result<Channel, ModelError> {
        let from = self.check_port(&spec.from)?;
        let to = self.check_port(&spec.to)?;
        let (f, t) = (spec.from.entity.clone(), spec.to.entity.clone());
        if from.id == to.id {
            return Err(ModelError::SelfRelation(f));
        }
        match spec.kind {
            RelationKind::Communication if !(from.is_user() && to.is_user()) => {
                return Err(ModelError::CommunicationNotUserToUser(f, t))
            }
            RelationKind::Perception if !to.is_user() => return Err(ModelError::PerceptionNotIntoUser(f, t)),
            RelationKind::Action if to.is_user() => return Err(ModelError::ActionIntoUser(f, t)),
            _ => {}
        }
        let mut strong: Option<Channel> = None;
        let explicit = [
            spec.from.channel.filter(|_| from.is_user()),
            spec.to.channel.filter(|_| to.is_user()),
            spec.from.channel.filter(|_| !from.is_user()),
            spec.to.channel.filter(|_| !to.is_user()),
            spec.channel,
        ];
        for c in explicit.into_iter().flatten() {
            match strong {
                Some(s) if s != c => return Err(ModelError::ChannelMismatch(s, c)),
                _ => strong = Some(c),
            }
        }
        strong
            .or(from.kind.transducer_channel())
            .or(to.kind.transducer_channel())
            .ok_or(ModelError::ChannelUnresolvable(f, t))
    }

    pub fn add_relation(&mut self, spec: RelationSpec) -> Result<String, ModelError> {
        let effective_channel = self.resolve_relation(&spec)?;
        let id = format!("rel#{}", self.relations.len() + 1);
        self.relations.push(Relation {
            id: id.clone(),
            from: spec.from,
            to: spec.to,
            kind: spec.kind,
            salient: spec.salient,
            channel: spec.channel,
            effective_channel,
            annotation: spec.annotation,
        });
        Ok(id)
    }

    pub(crate) fn resolve_merge(&self, inputs: &[Port], output: &Port) -> Result<Channel, ModelError> {
        let out = self.check_port(output)?;
        if !out.is_user() {
            return Err(ModelError::OutputNotUser(output.entity.clone()));
        }
        let channel = output.channel.expect("user ports carry a channel");
        let mut seen = BTreeSet::new();
        for input in inputs {
            let e = self.check_port(input)?;
            if e.id == out.id {
                return Err(ModelError::SelfRelation(e.id.clone()));
            }
            if let Some(c) = input.channel {
                if c != channel {
                    return Err(ModelError::ChannelMismatch(channel, c));
                }
            }
            seen.insert(input);
        }
        if seen.len() < 2 {
            return Err(ModelError::TooFewInputs);
        }
        Ok(channel)
    }

    /// Adds a `⊕` node merging the perception of `inputs` into a user port.
    pub fn add_merge(&mut self, id: impl Into<String>, inputs: Vec<Port>, output: Port) -> Result<String, ModelError> {
        let id = id.into();
        ident(&id)?;
        if self.has_id(&id) {
            return Err(ModelError::DuplicateId(id));
        }
        let channel = self.resolve_merge(&inputs, &output)?;
        self.merges.push(MergeNode { id: id.clone(), inputs, output, channel });
        Ok(id)
    }
}

/// Orders entities so that every entity comes after the ones it nests in or
/// takes its mobility reference from. References outside `entities` are
/// ignored. Returns the identifier closing a cycle on failure.
pub(crate) fn insertion_order(entities: &[&Entity]) -> Result<Vec<usize>, String> {
    use std::collections::BTreeMap;
    let index: BTreeMap<&str, usize> = entities.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
    let deps = |e: &Entity| -> Vec<usize> {
        let mut d = Vec::new();
        if let Some(o) = &e.nested_in {
            d.extend(index.get(o.as_str()));
        }
        if let MobilityRef::Entity(r) = &e.mobility.reference {
            d.extend(index.get(r.as_str()));
        }
        d
    };
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; entities.len()];
    let mut order = Vec::with_capacity(entities.len());
    fn visit(
        i: usize,
        entities: &[&Entity],
        deps: &dyn Fn(&Entity) -> Vec<usize>,
        state: &mut [u8],
        order: &mut Vec<usize>,
    ) -> Result<(), String> {
        match state[i] {
            2 => return Ok(()),
            1 => return Err(entities[i].id.clone()),
            _ => {}
        }
        state[i] = 1;
        for d in deps(entities[i]) {
            visit(d, entities, deps, state, order)?;
        }
        state[i] = 2;
        order.push(i);
        Ok(())
    }
    for i in 0..entities.len() {
        visit(i, entities, &deps, &mut state, &mut order)?;
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Mobility, MobilityKind};

    fn desk() -> Model {
        let mut m = Model::new("m");
        m.add_place("desk1").unwrap();
        m
    }

    #[test]
    fn users_are_real() {
        let mut m = desk();
        assert_eq!(m.add_entity(Entity::user("alice").at("desk1")), Ok("alice".into()));
        let mut bot = Entity::user("bot");
        bot.world = World::Virtual;
        assert_eq!(m.add_entity(bot), Err(ModelError::UserInVirtualWorld("bot".into())));
    }

    #[test]
    fn held_pen_is_relative_to_user() {
        let mut m = desk();
        m.add_entity(Entity::user("alice").at("desk1")).unwrap();
        let pen = Entity::tool("pen", World::Real).with_mobility(Mobility::relative("alice", MobilityKind::Mobile));
        m.add_entity(pen).unwrap();
        assert_eq!(m.effective_mobility("pen").unwrap(), Mobility::relative("alice", MobilityKind::Mobile));
    }

    #[test]
    fn entity_errors() {
        let mut m = desk();
        m.add_entity(Entity::user("alice")).unwrap();
        assert_eq!(m.add_entity(Entity::user("alice")), Err(ModelError::DuplicateId("alice".into())));
        let mut internal = Entity::internal("app");
        internal.world = World::Real;
        assert_eq!(m.add_entity(internal), Err(ModelError::ModelInRealWorld("app".into())));
        assert_eq!(m.add_entity(Entity::internal("app").at("desk1")), Err(ModelError::ModelInRealWorld("app".into())));
        assert_eq!(
            m.add_entity(Entity::tool("pen", World::Real).at("nowhere")),
            Err(ModelError::UnknownPlace("nowhere".into()))
        );
        assert_eq!(
            m.add_entity(Entity::sensor("cam", Channel::V).stacked()),
            Err(ModelError::StackNotAllowed("cam".into()))
        );
        assert_eq!(
            m.add_entity(Entity::tool("pen", World::Real).nested_in("pen")),
            Err(ModelError::SelfReference("pen".into()))
        );
        let mut cam = Entity::sensor("cam", Channel::V);
        cam.world = World::Real;
        assert_eq!(m.add_entity(cam), Err(ModelError::TransducerWorld("cam".into())));
        assert_eq!(
            m.add_entity(Entity::tool("bad id", World::Real)),
            Err(ModelError::InvalidIdentifier("bad id".into()))
        );
    }

    #[test]
    fn relation_kinds_and_channels() {
        let mut m = desk();
        m.add_entity(Entity::user("alice")).unwrap();
        m.add_entity(Entity::tool("pen", World::Real)).unwrap();
        m.add_entity(Entity::object("paper_a", World::Real)).unwrap();
        m.add_entity(Entity::internal("doc_model")).unwrap();
        let r = m.add_relation(RelationSpec::action(Port::on("alice", Channel::KH), Port::new("pen")));
        assert_eq!(r, Ok("rel#1".into()));
        assert_eq!(m.relations()[0].effective_channel, Channel::KH);
        m.add_relation(RelationSpec::perception(Port::new("pen"), Port::on("alice", Channel::V))).unwrap();
        let before = m.clone();
        assert_eq!(
            m.add_relation(RelationSpec::perception(Port::new("paper_a"), Port::new("doc_model"))),
            Err(ModelError::PerceptionNotIntoUser("paper_a".into(), "doc_model".into()))
        );
        assert_eq!(
            m.add_relation(RelationSpec::communication(Port::on("alice", Channel::A), Port::new("pen"))),
            Err(ModelError::CommunicationNotUserToUser("alice".into(), "pen".into()))
        );
        assert_eq!(
            m.add_relation(RelationSpec::action(Port::new("pen"), Port::new("paper_a"))),
            Err(ModelError::ChannelUnresolvable("pen".into(), "paper_a".into()))
        );
        assert_eq!(
            m.add_relation(
                RelationSpec::perception(Port::new("pen"), Port::on("alice", Channel::V)).channel(Channel::A)
            ),
            Err(ModelError::ChannelMismatch(Channel::V, Channel::A))
        );
        assert_eq!(
            m.add_relation(RelationSpec::action(Port::new("ghost"), Port::new("pen"))),
            Err(ModelError::UnknownEndpoint("ghost".into()))
        );
        assert_eq!(
            m.add_relation(RelationSpec::action(Port::new("alice"), Port::new("pen"))),
            Err(ModelError::MissingUserChannel("alice".into()))
        );
        assert_eq!(m, before);
    }

    #[test]
    fn transducer_channel_is_inferred_last() {
        let mut m = desk();
        m.add_entity(Entity::object("doc", World::Virtual)).unwrap();
        m.add_entity(Entity::effector("speaker", Channel::A)).unwrap();
        m.add_relation(RelationSpec::action(Port::new("doc"), Port::new("speaker"))).unwrap();
        m.add_relation(RelationSpec::action(Port::new("doc"), Port::new("speaker")).channel(Channel::V)).unwrap();
        assert_eq!(m.relations()[0].effective_channel, Channel::A);
        assert_eq!(m.relations()[1].effective_channel, Channel::V);
    }

    #[test]
    fn mixed_groups() {
        let mut m = desk();
        m.add_entity(Entity::object("paper_r", World::Real)).unwrap();
        m.add_entity(Entity::object("notes_v", World::Virtual)).unwrap();
        m.add_entity(Entity::object("o2_r", World::Real)).unwrap();
        m.add_entity(Entity::user("alice")).unwrap();
        assert_eq!(m.compose_mixed("pair", ["paper_r", "o2_r"]), Err(ModelError::AllSameWorld));
        assert_eq!(m.compose_mixed("one", ["paper_r"]), Err(ModelError::TooFewMembers));
        assert_eq!(m.compose_mixed("bad", ["paper_r", "alice"]), Err(ModelError::InvalidGroupMember("alice".into())));
        assert_eq!(m.compose_mixed("notebook", ["paper_r", "notes_v"]), Ok("notebook".into()));
        assert_eq!(
            m.compose_mixed("again", ["o2_r", "notes_v"]),
            Err(ModelError::MemberAlreadyGrouped("notes_v".into(), "notebook".into()))
        );
        assert_eq!(m.world_of("notebook"), Ok(World::Straddling));
        assert_eq!(m.group_of("paper_r").map(|g| g.id.as_str()), Some("notebook"));
    }

    #[test]
    fn merge_nodes() {
        let mut m = desk();
        m.add_entity(Entity::user("alice")).unwrap();
        m.add_entity(Entity::object("paper_r", World::Real)).unwrap();
        m.add_entity(Entity::object("audio_v", World::Virtual)).unwrap();
        m.add_entity(Entity::effector("projector", Channel::V)).unwrap();
        let out = Port::on("alice", Channel::V);
        assert_eq!(m.add_merge("m1", vec![Port::new("paper_r"), Port::new("projector")], out.clone()), Ok("m1".into()));
        assert_eq!(
            m.add_merge("m2", vec![Port::new("audio_v")], Port::on("alice", Channel::A)),
            Err(ModelError::TooFewInputs)
        );
        assert_eq!(
            m.add_merge("m3", vec![Port::on("paper_r", Channel::V), Port::on("audio_v", Channel::A)], out),
            Err(ModelError::ChannelMismatch(Channel::V, Channel::A))
        );
        assert_eq!(
            m.add_merge("m4", vec![Port::new("paper_r"), Port::new("audio_v")], Port::new("projector")),
            Err(ModelError::OutputNotUser("projector".into()))
        );
        assert_eq!(
            m.add_merge("paper_r", vec![Port::new("paper_r"), Port::new("audio_v")], Port::on("alice", Channel::V)),
            Err(ModelError::DuplicateId("paper_r".into()))
        );
    }

    #[test]
    fn boundaries() {
        let mut m = desk();
        m.add_place("desk2").unwrap();
        assert_eq!(
            m.add_boundary("desk1", "desk1", BoundaryKind::Opaque),
            Err(ModelError::BoundarySamePlace("desk1".into()))
        );
        assert_eq!(
            m.add_boundary("desk2", "desk1", BoundaryKind::Mirror { viewer: "x".into() }),
            Err(ModelError::ViewerNotInBoundary { a: "desk2".into(), b: "desk1".into(), viewer: "x".into() })
        );
        m.add_boundary("desk2", "desk1", BoundaryKind::AudioPermeable).unwrap();
        assert_eq!(m.boundaries()[0].a, "desk1");
        assert_eq!(
            m.add_boundary("desk1", "desk2", BoundaryKind::Opaque),
            Err(ModelError::DuplicateBoundary("desk1".into(), "desk2".into()))
        );
    }

    #[test]
    fn nested_entities_default_to_task_fixed() {
        let mut m = desk();
        m.add_entity(Entity::tool("mouse", World::Real).at("desk1")).unwrap();
        m.add_entity(Entity::tool("pointer", World::Virtual).nested_in("mouse")).unwrap();
        assert_eq!(m.effective_mobility("pointer").unwrap(), Mobility::relative("mouse", MobilityKind::TaskFixed));
        assert_eq!(m.effective_place("pointer"), Some("desk1"));
    }

    #[test]
    fn insertion_order_follows_references() {
        let a = Entity::tool("a", World::Real).nested_in("b");
        let b = Entity::tool("b", World::Real).with_mobility(Mobility::relative("c", MobilityKind::Mobile));
        let c = Entity::user("c");
        let order = insertion_order(&[&a, &b, &c]).unwrap();
        assert_eq!(order, vec![2, 1, 0]);
        let x = Entity::tool("x", World::Real).nested_in("y");
        let y = Entity::tool("y", World::Real).nested_in("x");
        assert!(insertion_order(&[&x, &y]).is_err());
    }
}
