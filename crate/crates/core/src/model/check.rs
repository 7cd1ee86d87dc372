use std::collections::BTreeMap;

use super::build::{insertion_order, RelationSpec};
use super::{EntityKind, Model, ModelError, Relation};

impl Model {
    /// Re-checks every model invariant from the stored data.
    ///
    /// Models built through the construction operations always pass; this is
    /// the check applied to anything produced by other means.
    pub fn validate(&self) -> Result<(), Vec<ModelError>> {
        let mut errors = Vec::new();
        let mut scratch = Model::new(self.name.clone());
        scratch.places = self.places.clone();
        for b in &self.boundaries {
            if b.a >= b.b {
                errors.push(ModelError::BoundarySamePlace(b.a.clone()));
                continue;
            }
            match scratch.check_boundary(b.a.clone(), b.b.clone(), b.kind.clone()) {
                Ok(nb) => scratch.boundaries.push(nb),
                Err(e) => errors.push(e),
            }
        }
        for (key, e) in &self.entities {
            if key != &e.id {
                errors.push(ModelError::DuplicateId(e.id.clone()));
            }
        }
        let plain: Vec<_> = self.entities.values().filter(|e| !matches!(e.kind, EntityKind::MixedGroup(_))).collect();
        match insertion_order(&plain) {
            Ok(order) => {
                for i in order {
                    match scratch.check_entity(plain[i]) {
                        Ok(()) => {
                            scratch.entities.insert(plain[i].id.clone(), plain[i].clone());
                        }
                        Err(e) => errors.push(e),
                    }
                }
            }
            Err(id) => {
                errors.push(ModelError::NestingCycle(id));
                for e in &plain {
                    scratch.entities.insert(e.id.clone(), (*e).clone());
                }
                for e in &plain {
                    errors.extend(scratch.check_entity(e).err());
                }
            }
        }
        for (g, members) in self.groups() {
            match scratch.check_group(&g.id, members) {
                Ok(()) => {
                    scratch.entities.insert(g.id.clone(), g.clone());
                }
                Err(e) => errors.push(e),
            }
        }
        for (i, r) in self.relations.iter().enumerate() {
            if r.id != format!("rel#{}", i + 1) {
                errors.push(ModelError::DuplicateId(r.id.clone()));
            }
            match scratch.resolve_relation(&spec_of(r)) {
                Ok(c) if c == r.effective_channel => {}
                Ok(c) => errors.push(ModelError::ChannelMismatch(c, r.effective_channel)),
                Err(e) => errors.push(e),
            }
        }
        for m in &self.merges {
            if scratch.has_id(&m.id) {
                errors.push(ModelError::DuplicateId(m.id.clone()));
            }
            match scratch.resolve_merge(&m.inputs, &m.output) {
                Ok(c) if c == m.channel => scratch.merges.push(m.clone()),
                Ok(c) => errors.push(ModelError::ChannelMismatch(c, m.channel)),
                Err(e) => errors.push(e),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// Order-insensitive normal form: relations sorted and renumbered, merge
    /// nodes sorted by id with sorted inputs.
    pub fn canonical(&self) -> Model {
        let mut m = self.clone();
        m.relations.sort_by(|a, b| relation_key(a).cmp(&relation_key(b)));
        for (i, r) in m.relations.iter_mut().enumerate() {
            r.id = format!("rel#{}", i + 1);
        }
        for merge in &mut m.merges {
            merge.inputs.sort();
            merge.inputs.dedup();
        }
        m.merges.sort_by(|a, b| a.id.cmp(&b.id));
        m
    }

    /// Equality up to relation order and merge-input order.
    pub fn structurally_eq(&self, other: &Model) -> bool {
        self.canonical() == other.canonical()
    }

    /// Relations grouped by source entity, for quick lookup.
    pub fn relations_by_source(&self) -> BTreeMap<&str, Vec<&Relation>> {
        let mut out: BTreeMap<&str, Vec<&Relation>> = BTreeMap::new();
        for r in &self.relations {
            out.entry(r.from.entity.as_str()).or_default().push(r);
        }
        out
    }
}

pub(crate) fn spec_of(r: &Relation) -> RelationSpec {
    RelationSpec {
        from: r.from.clone(),
        to: r.to.clone(),
        kind: r.kind,
        salient: r.salient,
        channel: r.channel,
        annotation: r.annotation.clone(),
    }
}

pub(crate) fn relation_key(r: &Relation) -> impl Ord + '_ {
    (&r.from, &r.to, r.kind, r.effective_channel, r.salient, r.channel, &r.annotation)
}
