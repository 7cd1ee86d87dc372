//! Reachability queries over the relation graph.
//!
//! The graph has one node per entity and one per `⊕` merge node. Relations
//! are edges between entities; a merge node receives one edge from each of
//! its inputs and emits one edge to its output user.

use std::collections::{BTreeSet, VecDeque};

use super::{Channel, EntityKind, Model, ModelError, RelationKind};

/// One edge traversed by a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hop {
    /// Index into [`Model::relations`].
    Relation(usize),
    /// Input `input` of merge node `merge` (indices into [`Model::merges`]).
    MergeInput {
        merge: usize,
        input: usize,
    },
    MergeOutput(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Node<'a> {
    Entity(&'a str),
    Merge(usize),
}

/// A simple directed path from a perceived artifact to a user.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PerceptionPath {
    pub hops: Vec<Hop>,
}

impl PerceptionPath {
    /// True when no relation on the path is dashed.
    pub fn is_salient(&self, model: &Model) -> bool {
        self.hops.iter().all(|h| model.hop_salient(*h))
    }

    /// Channel on which the user receives the perception.
    pub fn arrival_channel(&self, model: &Model) -> Channel {
        model.hop_channel(*self.hops.last().expect("paths are non-empty"))
    }

    /// Identifiers visited, in order: entities, merge nodes, and the user.
    pub fn nodes(&self, model: &Model) -> Vec<String> {
        let mut out = Vec::with_capacity(self.hops.len() + 1);
        for (i, h) in self.hops.iter().enumerate() {
            let (from, to) = model.hop_ends(*h);
            if i == 0 {
                out.push(model.node_name(from));
            }
            out.push(model.node_name(to));
        }
        out
    }
}

/// How a perception reaches a user: on which channel, and through which
/// merge node when the last hop leaves a `⊕`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arrival {
    pub channel: Channel,
    pub merge: Option<usize>,
}

impl Model {
    pub(crate) fn hop_ends(&self, hop: Hop) -> (Node<'_>, Node<'_>) {
        match hop {
            Hop::Relation(i) => {
                let r = &self.relations[i];
                (Node::Entity(&r.from.entity), Node::Entity(&r.to.entity))
            }
            Hop::MergeInput { merge, input } => {
                (Node::Entity(&self.merges[merge].inputs[input].entity), Node::Merge(merge))
            }
            Hop::MergeOutput(m) => (Node::Merge(m), Node::Entity(&self.merges[m].output.entity)),
        }
    }

    pub(crate) fn hop_salient(&self, hop: Hop) -> bool {
        match hop {
            Hop::Relation(i) => self.relations[i].salient,
            _ => true,
        }
    }

    pub(crate) fn hop_channel(&self, hop: Hop) -> Channel {
        match hop {
            Hop::Relation(i) => self.relations[i].effective_channel,
            Hop::MergeInput { merge, .. } | Hop::MergeOutput(merge) => self.merges[merge].channel,
        }
    }

    pub(crate) fn node_name(&self, node: Node<'_>) -> String {
        match node {
            Node::Entity(e) => e.to_string(),
            Node::Merge(m) => self.merges[m].id.clone(),
        }
    }

    /// Outgoing perception-carrying edges: every non-communication relation
    /// plus the merge-node edges.
    pub(crate) fn out_hops<'a>(&'a self, node: Node<'a>) -> Vec<(Hop, Node<'a>)> {
        match node {
            Node::Merge(m) => vec![(Hop::MergeOutput(m), Node::Entity(&self.merges[m].output.entity))],
            Node::Entity(id) => {
                let mut out = Vec::new();
                for (i, r) in self.relations.iter().enumerate() {
                    if r.from.entity == id && r.kind != RelationKind::Communication {
                        out.push((Hop::Relation(i), Node::Entity(r.to.entity.as_str())));
                    }
                }
                for (m, merge) in self.merges.iter().enumerate() {
                    for (k, input) in merge.inputs.iter().enumerate() {
                        if input.entity == id {
                            out.push((Hop::MergeInput { merge: m, input: k }, Node::Merge(m)));
                        }
                    }
                }
                out
            }
        }
    }

    /// Nodes a perception may pass through on its way to a user.
    pub(crate) fn is_relay(&self, node: Node<'_>) -> bool {
        match node {
            Node::Merge(_) => true,
            Node::Entity(id) => self.entity(id).is_some_and(|e| e.is_transducer()),
        }
    }

    fn perception_sources(&self, object: &str, user: &str) -> Result<Vec<&str>, ModelError> {
        let o = self.entity(object).ok_or_else(|| ModelError::UnknownEntity(object.to_string()))?;
        let u = self.entity(user).ok_or_else(|| ModelError::UnknownEntity(user.to_string()))?;
        if !u.is_user() {
            return Err(ModelError::NotAUser(user.to_string()));
        }
        match &o.kind {
            EntityKind::Tool | EntityKind::Object => Ok(vec![o.id.as_str()]),
            EntityKind::MixedGroup(members) => Ok(members.iter().map(String::as_str).collect()),
            _ => Err(ModelError::NotAnArtifact(object.to_string())),
        }
    }

    /// Every simple path carrying a perception of `object` (or of any of its
    /// members, for a mixed group) to `user`, passing only through
    /// transducers and merge nodes.
    pub fn perception_paths(&self, object: &str, user: &str) -> Result<BTreeSet<PerceptionPath>, ModelError> {
        let sources = self.perception_sources(object, user)?;
        let mut found = BTreeSet::new();
        for source in sources {
            let start = Node::Entity(source);
            let mut on_path = vec![start];
            let mut hops = Vec::new();
            self.walk(start, user, &mut on_path, &mut hops, &mut found);
        }
        Ok(found)
    }

    fn walk<'a>(
        &'a self,
        at: Node<'a>,
        user: &str,
        on_path: &mut Vec<Node<'a>>,
        hops: &mut Vec<Hop>,
        found: &mut BTreeSet<PerceptionPath>,
    ) {
        for (hop, next) in self.out_hops(at) {
            if on_path.contains(&next) {
                continue;
            }
            hops.push(hop);
            if next == Node::Entity(user) {
                found.insert(PerceptionPath { hops: hops.clone() });
            } else if self.is_relay(next) {
                on_path.push(next);
                self.walk(next, user, on_path, hops, found);
                on_path.pop();
            }
            hops.pop();
        }
    }

    /// How perceptions of `source` reach `user` (same relay rules as
    /// [`Model::perception_paths`]). With `salient_only`, dashed relations
    /// are not followed.
    pub fn arrivals(&self, source: &str, user: &str, salient_only: bool) -> BTreeSet<Arrival> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([Node::Entity(source)]);
        seen.insert(Node::Entity(source));
        while let Some(at) = queue.pop_front() {
            for (hop, next) in self.out_hops(at) {
                if salient_only && !self.hop_salient(hop) {
                    continue;
                }
                if next == Node::Entity(user) {
                    let merge = match hop {
                        Hop::MergeOutput(m) => Some(m),
                        _ => None,
                    };
                    out.insert(Arrival { channel: self.hop_channel(hop), merge });
                } else if self.is_relay(next) && seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        out
    }

    /// True when some member of `artifact` (or the artifact itself) is
    /// perceived by `user`.
    pub fn perceives(&self, user: &str, artifact: &str, salient_only: bool) -> bool {
        match self.entity(artifact).map(|e| &e.kind) {
            Some(EntityKind::MixedGroup(members)) => {
                members.iter().any(|m| !self.arrivals(m, user, salient_only).is_empty())
            }
            Some(_) => !self.arrivals(artifact, user, salient_only).is_empty(),
            None => false,
        }
    }

    /// Tools a user acts on: reached by action relations leaving the user,
    /// possibly through transducers.
    pub fn acted_tools(&self, user: &str, salient_only: bool) -> BTreeSet<&str> {
        let mut tools = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([user]);
        while let Some(at) = queue.pop_front() {
            for r in &self.relations {
                if r.from.entity != at || r.kind != RelationKind::Action || (salient_only && !r.salient) {
                    continue;
                }
                let to = r.to.entity.as_str();
                match self.entity(to).map(|e| &e.kind) {
                    Some(EntityKind::Tool) => {
                        tools.insert(to);
                    }
                    Some(k) if k.is_transducer() && seen.insert(to) => {
                        queue.push_back(to);
                    }
                    _ => {}
                }
            }
        }
        tools
    }

    /// Entities reachable from `start` by action relations through non-user
    /// entities (`start` excluded unless it lies on a cycle).
    pub fn action_reach(&self, start: &str, salient_only: bool) -> BTreeSet<&str> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(at) = queue.pop_front() {
            for r in &self.relations {
                if r.from.entity != at || r.kind != RelationKind::Action || (salient_only && !r.salient) {
                    continue;
                }
                let to = r.to.entity.as_str();
                if seen.insert(to) {
                    queue.push_back(to);
                }
            }
        }
        seen
    }
}
