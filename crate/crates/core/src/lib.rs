//! IRVO interaction models for collaborative mixed-reality systems.
//!
//! A model describes users, real and virtual tools and objects, the
//! transducers that carry information across the real/virtual boundary,
//! and the relations between them. This crate provides:
//!
//! * [`model`]: the typed model graph and its construction operations,
//! * [`dsl`]: the `.irvo` text format and the `irvo-json/1` projection,
//! * [`validate`]: the structural and ergonomic rule engine,
//! * [`taskmap`]: task-tree linkage, model merging and odd-configuration detection,
//! * [`classify`]: coarse interaction-style classification,
//! * [`render`]: deterministic DOT output.

pub mod classify;
pub mod dsl;
pub mod model;
pub mod render;
pub mod taskmap;
pub mod validate;

pub use model::{
    BoundaryKind, Channel, Entity, EntityKind, MergeNode, Mobility, MobilityKind, MobilityRef, Model, ModelError,
    PlaceBoundary, Port, Relation, RelationKind, RelationSpec, TaskIntent, World,
};
