//! Task trees, model links, model merging and odd-configuration detection.
//!
//! A task tree (`irvo-tree/1`) only contributes its shape; operators are
//! carried as opaque labels. Models are linked to tasks, merged bottom-up
//! into a synthetic root model, and shared links can be factored to the
//! sub-root that owns them.

mod merge;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{EntityKind, Model};

pub use merge::{apply_aliases, merge_models, merge_with_notes, parse_aliases, MergeError, MergeNote};

pub const TREE_SCHEMA: &str = "irvo-tree/1";

/// Where a task's model comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinkRef {
    /// `.irvo` file, relative to the tree file.
    Path(String),
    Inline {
        inline: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskNode {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    #[serde(default)]
    pub children: Vec<TaskNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkRef>,
}

impl TaskNode {
    pub fn leaf(id: impl Into<String>) -> Self {
        let id = id.into();
        TaskNode { name: id.clone(), id, operator: None, children: Vec::new(), link: None }
    }

    pub fn with_children(id: impl Into<String>, children: Vec<TaskNode>) -> Self {
        TaskNode { children, ..TaskNode::leaf(id) }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a TaskNode>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }

    /// This node and all its descendants, pre-order.
    pub fn nodes(&self) -> Vec<&TaskNode> {
        let mut out = Vec::new();
        self.walk(&mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTree {
    pub schema: String,
    pub root: TaskNode,
}

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{0}` conflicts with the link on `{1}` (an ancestor and a descendant cannot both be linked)")]
    ConflictingDescendantLink(String, String),
    #[error("task `{0}` is already linked")]
    AlreadyLinked(String),
    #[error("leaf task `{0}` has no linked model on itself or an ancestor")]
    UncoveredLeaf(String),
    #[error("task id `{0}` appears twice")]
    DuplicateTask(String),
    #[error("malformed task tree: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema `{0}`, expected `{TREE_SCHEMA}`")]
    Schema(String),
    #[error("cannot load model for task `{0}`: {1}")]
    Load(String, String),
    #[error("merging under task `{0}`: {1}")]
    Merge(String, MergeError),
}

impl TaskTree {
    pub fn new(root: TaskNode) -> Result<Self, TaskError> {
        let t = TaskTree { schema: TREE_SCHEMA.into(), root };
        t.check_ids()?;
        Ok(t)
    }

    fn check_ids(&self) -> Result<(), TaskError> {
        let mut seen = BTreeSet::new();
        for n in self.root.nodes() {
            if !seen.insert(n.id.as_str()) {
                return Err(TaskError::DuplicateTask(n.id.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, TaskError> {
        let t: TaskTree = serde_json::from_str(text)?;
        if t.schema != TREE_SCHEMA {
            return Err(TaskError::Schema(t.schema));
        }
        t.check_ids()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trees are always serializable")
    }

    pub fn find(&self, id: &str) -> Option<&TaskNode> {
        self.root.nodes().into_iter().find(|n| n.id == id)
    }

    /// Ids from the root down to `id`, inclusive.
    pub fn ancestry(&self, id: &str) -> Option<Vec<&str>> {
        fn go<'a>(n: &'a TaskNode, id: &str, path: &mut Vec<&'a str>) -> bool {
            path.push(&n.id);
            if n.id == id || n.children.iter().any(|c| go(c, id, path)) {
                return true;
            }
            path.pop();
            false
        }
        let mut path = Vec::new();
        go(&self.root, id, &mut path).then_some(path)
    }

    pub fn leaves(&self) -> Vec<&TaskNode> {
        self.root.nodes().into_iter().filter(|n| n.is_leaf()).collect()
    }

    /// Loads the models named by `link` fields. Paths are resolved against
    /// `base`.
    pub fn resolve_links(&self, base: &Path) -> Result<Links, TaskError> {
        let mut links = Links::default();
        for n in self.root.nodes() {
            let Some(link) = &n.link else { continue };
            let text = match link {
                LinkRef::Inline { inline } => inline.clone(),
                LinkRef::Path(p) => std::fs::read_to_string(base.join(p))
                    .map_err(|e| TaskError::Load(n.id.clone(), format!("{p}: {e}")))?,
            };
            let model = crate::dsl::parse(&text).map_err(|diags| {
                let first = diags.first().map(ToString::to_string).unwrap_or_default();
                TaskError::Load(n.id.clone(), first)
            })?;
            link_task(self, &mut links, &n.id, model)?;
        }
        Ok(links)
    }
}

/// Task id to linked model.
pub type Links = BTreeMap<String, Model>;

/// Links `model` to `task`. A linked task's ancestors and descendants
/// cannot be linked.
pub fn link_task(tree: &TaskTree, links: &mut Links, task: &str, model: Model) -> Result<(), TaskError> {
    let path = tree.ancestry(task).ok_or_else(|| TaskError::UnknownTask(task.to_string()))?;
    if links.contains_key(task) {
        return Err(TaskError::AlreadyLinked(task.to_string()));
    }
    if let Some(a) = path.iter().find(|a| links.contains_key(**a)) {
        return Err(TaskError::ConflictingDescendantLink(task.to_string(), a.to_string()));
    }
    let node = tree.find(task).expect("ancestry found it");
    if let Some(d) = node.nodes().into_iter().skip(1).find(|d| links.contains_key(&d.id)) {
        return Err(TaskError::ConflictingDescendantLink(task.to_string(), d.id.clone()));
    }
    links.insert(task.to_string(), model);
    Ok(())
}

/// Model of every task: linked tasks (and everything below them) get their
/// linked model, other internal tasks the merge of their children.
pub fn synthesize(tree: &TaskTree, links: &Links) -> Result<BTreeMap<String, Model>, TaskError> {
    fn fill(n: &TaskNode, m: &Model, out: &mut BTreeMap<String, Model>) {
        out.insert(n.id.clone(), m.clone());
        for c in &n.children {
            fill(c, m, out);
        }
    }
    fn go(n: &TaskNode, links: &Links, out: &mut BTreeMap<String, Model>) -> Result<Model, TaskError> {
        if let Some(m) = links.get(&n.id) {
            let m = m.canonical();
            fill(n, &m, out);
            return Ok(m);
        }
        if n.is_leaf() {
            return Err(TaskError::UncoveredLeaf(n.id.clone()));
        }
        let children = n.children.iter().map(|c| go(c, links, out)).collect::<Result<Vec<_>, _>>()?;
        let merged = merge_models(&children).map_err(|e| TaskError::Merge(n.id.clone(), e))?;
        out.insert(n.id.clone(), merged.clone());
        Ok(merged)
    }
    let mut out = BTreeMap::new();
    go(&tree.root, links, &mut out)?;
    Ok(out)
}

/// Root model of [`synthesize`].
pub fn synthesize_root(tree: &TaskTree, links: &Links) -> Result<Model, TaskError> {
    synthesize(tree, links).map(|mut all| all.remove(&tree.root.id).expect("root is always synthesized"))
}

/// Moves links up the tree: whenever every child of a task is linked to
/// structurally equal models, the children's links are replaced by one
/// link on the task. Repeats until nothing changes. Root synthesis is
/// unchanged by factoring.
pub fn factor_links(tree: &TaskTree, links: &Links) -> Links {
    let mut links = links.clone();
    loop {
        let mut changed = false;
        for n in tree.root.nodes() {
            if n.is_leaf() || links.contains_key(&n.id) {
                continue;
            }
            let models: Option<Vec<&Model>> = n.children.iter().map(|c| links.get(&c.id)).collect();
            let Some(models) = models else { continue };
            // A model whose self-merge differs from it (duplicate relation
            // keys, unsorted `+` name) would change the synthesized result.
            let stable = merge_models(&[models[0].clone()]).is_ok_and(|m| m == models[0].canonical());
            if stable && models.iter().all(|m| m.structurally_eq(models[0])) {
                let shared = models[0].clone();
                for c in &n.children {
                    links.remove(&c.id);
                }
                links.insert(n.id.clone(), shared);
                changed = true;
            }
        }
        if !changed {
            return links;
        }
    }
}

/// A cluster of artifacts that only one task uses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OddConfiguration {
    pub entities: BTreeSet<String>,
    pub task: String,
}

impl fmt::Display for OddConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list: Vec<&str> = self.entities.iter().map(String::as_str).collect();
        write!(f, "info: isolated interaction cluster {{{}}} used only by task `{}`", list.join(", "), self.task)
    }
}

fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
    let p = parent[x].clone();
    if p == x {
        return p;
    }
    let root = find(parent, &p);
    parent.insert(x.to_string(), root.clone());
    root
}

/// Connected components of `model` over its entities, ignoring users,
/// internal models and mixed-group nodes. Relations, merge inputs and group
/// membership connect entities.
pub fn components(model: &Model) -> Vec<BTreeSet<String>> {
    let keep = |id: &str| {
        model.entity(id).is_some_and(|e| {
            !matches!(e.kind, EntityKind::User | EntityKind::InternalModel | EntityKind::MixedGroup(_))
        })
    };
    let mut parent: BTreeMap<String, String> =
        model.entities().filter(|e| keep(&e.id)).map(|e| (e.id.clone(), e.id.clone())).collect();
    let mut pairs: Vec<(&str, &str)> = Vec::new();
    for r in model.relations() {
        pairs.push((&r.from.entity, &r.to.entity));
    }
    for m in model.merges() {
        for w in m.inputs.windows(2) {
            pairs.push((&w[0].entity, &w[1].entity));
        }
    }
    for (_, members) in model.groups() {
        let v: Vec<&String> = members.iter().collect();
        for w in v.windows(2) {
            pairs.push((w[0], w[1]));
        }
    }
    for (a, b) in pairs {
        if keep(a) && keep(b) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent.insert(hi, lo);
            }
        }
    }
    let mut comps: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let ids: Vec<String> = parent.keys().cloned().collect();
    for id in ids {
        let r = find(&mut parent, &id);
        comps.entry(r).or_default().insert(id);
    }
    comps.into_values().collect()
}

/// Clusters of the root model that hold a tool and an object, are not the
/// only artifact cluster, and appear in exactly one task's model.
pub fn odd_configurations(root: &Model, task_models: &BTreeMap<String, Model>) -> Vec<OddConfiguration> {
    let kind_of = |id: &str| root.entity(id).map(|e| e.kind.clone());
    let artifact_comps: Vec<BTreeSet<String>> = components(root)
        .into_iter()
        .filter(|c| c.iter().any(|id| kind_of(id).is_some_and(|k| k.is_artifact())))
        .collect();
    if artifact_comps.len() < 2 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for comp in artifact_comps {
        let has = |k: EntityKind| comp.iter().any(|id| kind_of(id) == Some(k.clone()));
        if !(has(EntityKind::Tool) && has(EntityKind::Object)) {
            continue;
        }
        let owners: Vec<&String> =
            task_models.iter().filter(|(_, m)| comp.iter().any(|id| m.entity(id).is_some())).map(|(t, _)| t).collect();
        if let [only] = owners[..] {
            out.push(OddConfiguration { entities: comp, task: only.clone() });
        }
    }
    out.sort();
    out
}
