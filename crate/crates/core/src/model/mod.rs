//! Typed in-memory representation of an IRVO model graph.
//!
//! A [`Model`] is built through its construction operations
//! ([`Model::add_entity`], [`Model::add_relation`], [`Model::compose_mixed`],
//! [`Model::add_merge`], ...). Every operation checks the invariants it can
//! affect and leaves the model untouched when it fails.

pub(crate) mod build;
mod check;
pub mod graph;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

pub use build::RelationSpec;
pub use graph::{Arrival, Hop, PerceptionPath};

/// Sensory channel of a user, a transducer or a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    /// Visual.
    V,
    /// Audio.
    A,
    /// Kinesthetic / haptic.
    KH,
    /// Taste.
    T,
    /// Smell.
    S,
}

impl Channel {
    pub const ALL: [Channel; 5] = [Channel::V, Channel::A, Channel::KH, Channel::T, Channel::S];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::V => "V",
            Channel::A => "A",
            Channel::KH => "KH",
            Channel::T => "T",
            Channel::S => "S",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL.into_iter().find(|c| c.as_str() == s).ok_or(())
    }
}

/// Side of the real/virtual boundary an entity lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum World {
    Real,
    Virtual,
    /// Transducers sit on the boundary. Mixed groups also report this,
    /// since they span both sides.
    Straddling,
}

impl World {
    pub fn as_str(self) -> &'static str {
        match self {
            World::Real => "real",
            World::Virtual => "virtual",
            World::Straddling => "straddling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum TaskIntent {
    #[default]
    Manipulation,
    PerceptionOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryKind {
    Opaque,
    /// Sound crosses, nothing else does. Symmetric.
    AudioPermeable,
    /// Half-silvered mirror: users in `viewer` can see through it.
    Mirror {
        viewer: String,
    },
}

/// Boundary between two places. `a < b` always holds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaceBoundary {
    pub a: String,
    pub b: String,
    pub kind: BoundaryKind,
}

impl PlaceBoundary {
    pub fn separates(&self, p: &str, q: &str) -> bool {
        (self.a == p && self.b == q) || (self.a == q && self.b == p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntityKind {
    User,
    Tool,
    Object,
    InternalModel,
    Sensor(Channel),
    Effector(Channel),
    MixedGroup(BTreeSet<String>),
}

impl EntityKind {
    /// Rank used for canonical ordering: users, tools, objects, internal
    /// models, sensors, effectors, mixed groups.
    pub fn rank(&self) -> u8 {
        match self {
            EntityKind::User => 0,
            EntityKind::Tool => 1,
            EntityKind::Object => 2,
            EntityKind::InternalModel => 3,
            EntityKind::Sensor(_) => 4,
            EntityKind::Effector(_) => 5,
            EntityKind::MixedGroup(_) => 6,
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            EntityKind::User => "user",
            EntityKind::Tool => "tool",
            EntityKind::Object => "object",
            EntityKind::InternalModel => "internal",
            EntityKind::Sensor(_) => "sensor",
            EntityKind::Effector(_) => "effector",
            EntityKind::MixedGroup(_) => "mixed",
        }
    }

    pub fn is_transducer(&self) -> bool {
        matches!(self, EntityKind::Sensor(_) | EntityKind::Effector(_))
    }

    pub fn is_artifact(&self) -> bool {
        matches!(self, EntityKind::Tool | EntityKind::Object)
    }

    pub fn transducer_channel(&self) -> Option<Channel> {
        match self {
            EntityKind::Sensor(c) | EntityKind::Effector(c) => Some(*c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum MobilityKind {
    /// `↔`
    Mobile,
    /// `×`, fixed for the duration of the task.
    TaskFixed,
    /// `⊗`, fixed for every task.
    AlwaysFixed,
    #[default]
    Unspecified,
}

impl MobilityKind {
    pub fn glyph(self) -> &'static str {
        match self {
            MobilityKind::Mobile => "↔",
            MobilityKind::TaskFixed => "×",
            MobilityKind::AlwaysFixed => "⊗",
            MobilityKind::Unspecified => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum MobilityRef {
    #[default]
    World,
    Entity(String),
}

/// Mobility annotation. An `Unspecified` kind always has a `World` reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mobility {
    pub reference: MobilityRef,
    pub kind: MobilityKind,
}

impl Mobility {
    pub fn absolute(kind: MobilityKind) -> Self {
        Mobility { reference: MobilityRef::World, kind }
    }

    pub fn relative(to: impl Into<String>, kind: MobilityKind) -> Self {
        Mobility { reference: MobilityRef::Entity(to.into()), kind }
    }

    pub fn is_unspecified(&self) -> bool {
        self.kind == MobilityKind::Unspecified
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    pub world: World,
    pub place: Option<String>,
    pub mobility: Mobility,
    pub nested_in: Option<String>,
    pub stack: bool,
}

impl Entity {
    fn bare(id: impl Into<String>, kind: EntityKind, world: World) -> Self {
        Entity { id: id.into(), kind, world, place: None, mobility: Mobility::default(), nested_in: None, stack: false }
    }

    pub fn user(id: impl Into<String>) -> Self {
        Self::bare(id, EntityKind::User, World::Real)
    }

    pub fn tool(id: impl Into<String>, world: World) -> Self {
        Self::bare(id, EntityKind::Tool, world)
    }

    pub fn object(id: impl Into<String>, world: World) -> Self {
        Self::bare(id, EntityKind::Object, world)
    }

    pub fn internal(id: impl Into<String>) -> Self {
        Self::bare(id, EntityKind::InternalModel, World::Virtual)
    }

    pub fn sensor(id: impl Into<String>, channel: Channel) -> Self {
        Self::bare(id, EntityKind::Sensor(channel), World::Straddling)
    }

    pub fn effector(id: impl Into<String>, channel: Channel) -> Self {
        Self::bare(id, EntityKind::Effector(channel), World::Straddling)
    }

    pub fn at(mut self, place: impl Into<String>) -> Self {
        self.place = Some(place.into());
        self
    }

    pub fn with_mobility(mut self, mobility: Mobility) -> Self {
        self.mobility = mobility;
        self
    }

    pub fn nested_in(mut self, outer: impl Into<String>) -> Self {
        self.nested_in = Some(outer.into());
        self
    }

    pub fn stacked(mut self) -> Self {
        self.stack = true;
        self
    }

    pub fn is_user(&self) -> bool {
        self.kind == EntityKind::User
    }

    pub fn is_transducer(&self) -> bool {
        self.kind.is_transducer()
    }
}

/// Relation endpoint: an entity plus, for users, the channel used.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Port {
    pub entity: String,
    pub channel: Option<Channel>,
}

impl Port {
    pub fn new(entity: impl Into<String>) -> Self {
        Port { entity: entity.into(), channel: None }
    }

    pub fn on(entity: impl Into<String>, channel: Channel) -> Self {
        Port { entity: entity.into(), channel: Some(channel) }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.channel {
            Some(c) => write!(f, "{}.{}", self.entity, c),
            None => f.write_str(&self.entity),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationKind {
    Action,
    Perception,
    Communication,
}

impl RelationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Action => "action",
            RelationKind::Perception => "perception",
            RelationKind::Communication => "communication",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relation {
    /// `rel#N`, N being the 1-based insertion position.
    pub id: String,
    pub from: Port,
    pub to: Port,
    pub kind: RelationKind,
    /// `false` renders dashed: the relation exists but does not matter for the task.
    pub salient: bool,
    /// Channel written by the author, if any.
    pub channel: Option<Channel>,
    /// Channel after inference.
    pub effective_channel: Channel,
    pub annotation: Option<String>,
}

/// `⊕` node: several perceptions merged into one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MergeNode {
    pub id: String,
    pub inputs: Vec<Port>,
    pub output: Port,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub(crate) name: String,
    pub(crate) intent: TaskIntent,
    pub(crate) places: BTreeSet<String>,
    pub(crate) boundaries: Vec<PlaceBoundary>,
    pub(crate) entities: BTreeMap<String, Entity>,
    pub(crate) relations: Vec<Relation>,
    pub(crate) merges: Vec<MergeNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("identifier `{0}` is already used")]
    DuplicateId(String),
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("user `{0}` must live in the real world")]
    UserInVirtualWorld(String),
    #[error("internal model `{0}` must live in the virtual world, without a place")]
    ModelInRealWorld(String),
    #[error("tool or object `{0}` must be tagged real or virtual")]
    MissingWorldTag(String),
    #[error("transducer `{0}` straddles the real/virtual boundary and takes no world tag")]
    TransducerWorld(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("unknown relation endpoint `{0}`")]
    UnknownEndpoint(String),
    #[error("mixed groups are created with compose_mixed, not add_entity (`{0}`)")]
    GroupThroughAddEntity(String),
    #[error("only tools and objects can be stacked (`{0}`)")]
    StackNotAllowed(String),
    #[error("mobility of `{0}` must name a kind when it names a reference entity")]
    InvalidMobility(String),
    #[error("`{0}` cannot reference itself")]
    SelfReference(String),
    #[error("nesting cycle through `{0}`")]
    NestingCycle(String),
    #[error("boundary must join two different places (`{0}`)")]
    BoundarySamePlace(String),
    #[error("places `{0}` and `{1}` already have a boundary")]
    DuplicateBoundary(String, String),
    #[error("mirror viewer `{viewer}` is neither `{a}` nor `{b}`")]
    ViewerNotInBoundary { a: String, b: String, viewer: String },
    #[error("port on user `{0}` must name a channel")]
    MissingUserChannel(String),
    #[error("port on internal model `{0}` cannot name a channel")]
    ChannelOnInternalModel(String),
    #[error("mixed group `{0}` cannot be a relation endpoint; use its members")]
    GroupEndpoint(String),
    #[error("relation from `{0}` to itself")]
    SelfRelation(String),
    #[error("channel mismatch: {0} vs {1}")]
    ChannelMismatch(Channel, Channel),
    #[error("cannot infer a channel for relation {0} -> {1}; declare one")]
    ChannelUnresolvable(String, String),
    #[error("communication relations join two users ({0} -> {1})")]
    CommunicationNotUserToUser(String, String),
    #[error("perception relations end at a user ({0} -> {1})")]
    PerceptionNotIntoUser(String, String),
    #[error("action relations cannot end at a user ({0} -> {1})")]
    ActionIntoUser(String, String),
    #[error("mixed group needs at least two members")]
    TooFewMembers,
    #[error("mixed group members are all in the same world")]
    AllSameWorld,
    #[error("`{0}` already belongs to mixed group `{1}`")]
    MemberAlreadyGrouped(String, String),
    #[error("`{0}` is not a tool or object and cannot join a mixed group")]
    InvalidGroupMember(String),
    #[error("merge node needs at least two inputs")]
    TooFewInputs,
    #[error("merge output `{0}` is not a user port")]
    OutputNotUser(String),
    #[error("`{0}` is not a tool, object or mixed group")]
    NotAnArtifact(String),
    #[error("`{0}` is not a user")]
    NotAUser(String),
}

/// Identifier syntax shared by entities, places and merge nodes.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Model {
            name: name.into(),
            intent: TaskIntent::default(),
            places: BTreeSet::new(),
            boundaries: Vec::new(),
            entities: BTreeMap::new(),
            relations: Vec::new(),
            merges: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn intent(&self) -> TaskIntent {
        self.intent
    }

    pub fn set_intent(&mut self, intent: TaskIntent) {
        self.intent = intent;
    }

    pub fn places(&self) -> &BTreeSet<String> {
        &self.places
    }

    pub fn boundaries(&self) -> &[PlaceBoundary] {
        &self.boundaries
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, id: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.id == id)
    }

    pub fn merges(&self) -> &[MergeNode] {
        &self.merges
    }

    pub fn merge(&self, id: &str) -> Option<&MergeNode> {
        self.merges.iter().find(|m| m.id == id)
    }

    pub fn users(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values().filter(|e| e.is_user())
    }

    pub fn groups(&self) -> impl Iterator<Item = (&Entity, &BTreeSet<String>)> {
        self.entities.values().filter_map(|e| match &e.kind {
            EntityKind::MixedGroup(members) => Some((e, members)),
            _ => None,
        })
    }

    /// The mixed group `id` belongs to, if any.
    pub fn group_of(&self, id: &str) -> Option<&Entity> {
        self.groups().find(|(_, members)| members.contains(id)).map(|(g, _)| g)
    }

    pub fn world_of(&self, id: &str) -> Result<World, ModelError> {
        let e = self.entity(id).ok_or_else(|| ModelError::UnknownEntity(id.to_string()))?;
        Ok(match e.kind {
            EntityKind::User => World::Real,
            EntityKind::InternalModel => World::Virtual,
            EntityKind::Sensor(_) | EntityKind::Effector(_) | EntityKind::MixedGroup(_) => World::Straddling,
            EntityKind::Tool | EntityKind::Object => e.world,
        })
    }

    /// Mobility after applying the nesting default: a nested entity without
    /// an explicit annotation is task-fixed relative to its container.
    pub fn effective_mobility(&self, id: &str) -> Result<Mobility, ModelError> {
        let e = self.entity(id).ok_or_else(|| ModelError::UnknownEntity(id.to_string()))?;
        Ok(match (&e.nested_in, e.mobility.is_unspecified()) {
            (Some(outer), true) => Mobility::relative(outer.clone(), MobilityKind::TaskFixed),
            _ => e.mobility.clone(),
        })
    }

    /// Place of an entity, inherited from the enclosing entity when nested.
    pub fn effective_place(&self, id: &str) -> Option<&str> {
        let mut cur = self.entity(id)?;
        // nesting is a forest, so the walk terminates
        loop {
            if let Some(p) = &cur.place {
                return Some(p);
            }
            cur = self.entity(cur.nested_in.as_deref()?)?;
        }
    }

    pub fn boundary_between(&self, p: &str, q: &str) -> Option<&PlaceBoundary> {
        self.boundaries.iter().find(|b| b.separates(p, q))
    }

    pub fn has_id(&self, id: &str) -> bool {
        self.entities.contains_key(id) || self.merges.iter().any(|m| m.id == id)
    }

    /// Identifier of the element (entity, relation or merge node), for findings.
    pub fn has_element(&self, id: &str) -> bool {
        self.has_id(id) || self.relation(id).is_some()
    }
}
