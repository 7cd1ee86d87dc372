//! Coarse interaction-style classification (WIMP, VR, AR, AV, MR) from the
//! tool-object cases a model exhibits.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{EntityKind, Model, RelationKind, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToolObject {
    TrOr,
    TrOv,
    TvOr,
    TvOv,
}

impl ToolObject {
    pub const ALL: [ToolObject; 4] = [ToolObject::TrOr, ToolObject::TrOv, ToolObject::TvOr, ToolObject::TvOv];

    pub fn of(tool: World, object: World) -> ToolObject {
        match (tool == World::Real, object == World::Real) {
            (true, true) => ToolObject::TrOr,
            (true, false) => ToolObject::TrOv,
            (false, true) => ToolObject::TvOr,
            (false, false) => ToolObject::TvOv,
        }
    }

    pub fn real_object(self) -> bool {
        matches!(self, ToolObject::TrOr | ToolObject::TvOr)
    }

    pub fn real_tool(self) -> bool {
        matches!(self, ToolObject::TrOr | ToolObject::TrOv)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InteractionCase {
    pub case: ToolObject,
    /// The tool belongs to a mixed group.
    pub tool_mixed: bool,
    /// The object belongs to a mixed group.
    pub object_mixed: bool,
}

impl fmt::Display for InteractionCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.case)?;
        if self.tool_mixed {
            f.write_str("+tool_mixed")?;
        }
        if self.object_mixed {
            f.write_str("+object_mixed")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StyleLabel {
    WIMP,
    VR,
    AR,
    AV,
    MR,
}

impl fmt::Display for StyleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Transducer identifiers that count as standard desktop devices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceProfile(pub BTreeSet<String>);

impl Default for DeviceProfile {
    fn default() -> Self {
        DeviceProfile(["mouse", "keyboard", "screen"].into_iter().map(String::from).collect())
    }
}

impl DeviceProfile {
    /// One identifier per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> DeviceProfile {
        DeviceProfile(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect(),
        )
    }
}

/// Everything the decision table looks at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassifyInputs {
    pub cases: BTreeSet<InteractionCase>,
    /// Some user perceives a virtual tool or object.
    pub virtual_perception: bool,
    /// The model has a real tool or object.
    pub real_artifacts: bool,
    /// The model has a real object.
    pub real_objects: bool,
    /// Every transducer used by a relation is in the device profile.
    pub standard_devices: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub label: StyleLabel,
    pub cases: Vec<InteractionCase>,
}

/// Tool-object cases: a user acts (possibly through transducers) on a
/// tool, which acts (through transducers or other tools) on an object.
pub fn interaction_cases(model: &Model) -> BTreeSet<InteractionCase> {
    let mut out = BTreeSet::new();
    let mut tools = BTreeSet::new();
    for u in model.users() {
        tools.extend(model.acted_tools(&u.id, false));
    }
    for tool in tools {
        let mut seen = BTreeSet::from([tool]);
        let mut queue = VecDeque::from([tool]);
        while let Some(at) = queue.pop_front() {
            for r in model.relations() {
                if r.from.entity != at || r.kind != RelationKind::Action {
                    continue;
                }
                let to = r.to.entity.as_str();
                let Some(e) = model.entity(to) else { continue };
                match e.kind {
                    EntityKind::Object => {
                        let t = model.entity(tool).expect("acted tools exist");
                        out.insert(InteractionCase {
                            case: ToolObject::of(t.world, e.world),
                            tool_mixed: model.group_of(tool).is_some(),
                            object_mixed: model.group_of(to).is_some(),
                        });
                    }
                    EntityKind::Tool | EntityKind::Sensor(_) | EntityKind::Effector(_) if seen.insert(to) => {
                        queue.push_back(to);
                    }
                    _ => {}
                }
            }
        }
    }
    out
}

pub fn inputs(model: &Model, profile: &DeviceProfile) -> ClassifyInputs {
    let artifacts: Vec<_> = model.entities().filter(|e| e.kind.is_artifact()).collect();
    let virtual_perception = artifacts
        .iter()
        .filter(|a| a.world == World::Virtual)
        .any(|a| model.users().any(|u| model.perceives(&u.id, &a.id, false)));
    let mut used = BTreeSet::new();
    for r in model.relations() {
        used.insert(r.from.entity.as_str());
        used.insert(r.to.entity.as_str());
    }
    for m in model.merges() {
        used.extend(m.inputs.iter().map(|p| p.entity.as_str()));
    }
    let standard_devices = used
        .into_iter()
        .filter(|id| model.entity(id).is_some_and(|e| e.is_transducer()))
        .all(|id| profile.0.contains(id));
    ClassifyInputs {
        cases: interaction_cases(model),
        virtual_perception,
        real_artifacts: artifacts.iter().any(|a| a.world == World::Real),
        real_objects: artifacts.iter().any(|a| a.world == World::Real && a.kind == EntityKind::Object),
        standard_devices,
    }
}

/// Label contributed by one case; `None` for a purely real interaction.
fn case_label(c: &InteractionCase, virtual_perception: bool) -> Option<StyleLabel> {
    use ToolObject::*;
    if c.object_mixed {
        return Some(StyleLabel::AR);
    }
    match c.case {
        TvOr => Some(StyleLabel::AR),
        TrOr if c.tool_mixed || virtual_perception => Some(StyleLabel::AR),
        TrOr => None,
        TrOv => Some(StyleLabel::AV),
        TvOv if c.tool_mixed => Some(StyleLabel::AV),
        TvOv => Some(StyleLabel::VR),
    }
}

/// The decision table.
pub fn decide(i: &ClassifyInputs) -> StyleLabel {
    let labels: BTreeSet<StyleLabel> = i.cases.iter().filter_map(|c| case_label(c, i.virtual_perception)).collect();
    let virtual_family = || {
        if i.standard_devices && !i.real_artifacts {
            StyleLabel::WIMP
        } else {
            StyleLabel::VR
        }
    };
    let (ar, av) = (labels.contains(&StyleLabel::AR), labels.contains(&StyleLabel::AV));
    match (ar, av) {
        (true, true) => StyleLabel::MR,
        (true, false) => StyleLabel::AR,
        (false, true) => StyleLabel::AV,
        (false, false) if labels.contains(&StyleLabel::VR) => virtual_family(),
        _ if i.real_objects => StyleLabel::AR,
        _ => StyleLabel::VR,
    }
}

pub fn classify_with(model: &Model, profile: &DeviceProfile) -> Classification {
    let i = inputs(model, profile);
    Classification { label: decide(&i), cases: i.cases.into_iter().collect() }
}

/// Classifies with the default device profile.
pub fn classify(model: &Model) -> StyleLabel {
    classify_with(model, &DeviceProfile::default()).label
}
