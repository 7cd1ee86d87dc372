//! Shared test helpers: seeded model generators and brute-force oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use irvo::model::{Hop, PerceptionPath};
use irvo::{
    BoundaryKind, Channel, Entity, EntityKind, Mobility, MobilityKind, Model, Port, RelationKind, RelationSpec,
    TaskIntent, World,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus(name: &str) -> String {
    let path = format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn corpus_path(name: &str) -> std::path::PathBuf {
    format!("{}/../../corpus/{name}", env!("CARGO_MANIFEST_DIR")).into()
}

pub fn corpus_model(name: &str) -> Model {
    irvo::dsl::parse(&corpus(name)).unwrap_or_else(|d| panic!("{name}: {d:?}"))
}

pub const CORPUS: [&str; 6] = [
    "doubledesk.irvo",
    "mouse.irvo",
    "audio-notebook.irvo",
    "wimp-editor.irvo",
    "reversed-sensor.irvo",
    "pen-paper.irvo",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const CHANNELS: [Channel; 3] = [Channel::V, Channel::A, Channel::KH];
const ANNOTATIONS: [&str; 4] = ["writes", "say \"hi\"", "a\\b", "line\nbreak"];

fn world(rng: &mut ChaCha8Rng) -> World {
    if rng.gen_bool(0.5) {
        World::Real
    } else {
        World::Virtual
    }
}

/// Random valid model with at most 12 entities (groups included), at most
/// four transducers and two merge nodes. Every construction attempt that
/// fails is skipped, so the model is valid by construction.
pub fn random_model(seed: u64) -> Model {
    let rng = &mut rng(seed);
    let mut m = Model::new(format!("gen{seed}"));
    if rng.gen_bool(0.15) {
        m.set_intent(TaskIntent::PerceptionOnly);
    }
    let places: Vec<String> = (0..rng.gen_range(0..=2)).map(|i| format!("p{i}")).collect();
    for p in &places {
        m.add_place(p).unwrap();
    }
    if places.len() == 2 && rng.gen_bool(0.6) {
        let kind = match rng.gen_range(0..3) {
            0 => BoundaryKind::Opaque,
            1 => BoundaryKind::AudioPermeable,
            _ => BoundaryKind::Mirror { viewer: places[rng.gen_range(0..2)].clone() },
        };
        m.add_boundary("p0", "p1", kind).unwrap();
    }

    let budget = rng.gen_range(2..=12);
    let groups = if budget >= 4 { rng.gen_range(0..=2) } else { 0 };
    let mut ids: Vec<String> = Vec::new();
    let mut transducers = 0;
    for i in 0..(budget - groups) {
        let id = format!("e{i}");
        let mut e = match rng.gen_range(0..10) {
            _ if i == 0 => Entity::user(&id),
            0 | 1 => Entity::user(&id),
            2 | 3 => Entity::tool(&id, world(rng)),
            4..=6 => Entity::object(&id, world(rng)),
            7 if transducers < 4 => Entity::sensor(&id, *CHANNELS.choose(rng).unwrap()),
            8 if transducers < 4 => Entity::effector(&id, *CHANNELS.choose(rng).unwrap()),
            9 => Entity::internal(&id),
            _ => Entity::object(&id, world(rng)),
        };
        if e.is_transducer() {
            transducers += 1;
        }
        if !places.is_empty() && rng.gen_bool(0.5) {
            e = e.at(places.choose(rng).unwrap());
        }
        if rng.gen_bool(0.3) {
            let kind = [MobilityKind::Mobile, MobilityKind::TaskFixed, MobilityKind::AlwaysFixed]
                .choose(rng)
                .copied()
                .unwrap();
            e = match ids.choose(rng) {
                Some(r) if rng.gen_bool(0.5) => e.with_mobility(Mobility::relative(r, kind)),
                _ => e.with_mobility(Mobility::absolute(kind)),
            };
        }
        if rng.gen_bool(0.1) {
            if let Some(outer) = ids.choose(rng) {
                e = e.nested_in(outer);
            }
        }
        if rng.gen_bool(0.1) {
            e = e.stacked();
        }
        let fallback = e.clone();
        if m.add_entity(e).is_err() {
            // Drop the optional attributes and retry as a plain entity.
            let plain =
                Entity { place: None, mobility: Mobility::default(), nested_in: None, stack: false, ..fallback };
            if m.add_entity(plain).is_err() {
                continue;
            }
        }
        ids.push(id);
    }

    let artifacts: Vec<String> = m.entities().filter(|e| e.kind.is_artifact()).map(|e| e.id.clone()).collect();
    for g in 0..groups {
        if artifacts.len() < 2 {
            break;
        }
        let n = rng.gen_range(2..=3);
        let members: Vec<&String> = artifacts.choose_multiple(rng, n).collect();
        let _ = m.compose_mixed(format!("g{g}"), members);
    }

    let plain: Vec<Entity> = m.entities().filter(|e| !matches!(e.kind, EntityKind::MixedGroup(_))).cloned().collect();
    let port = |rng: &mut ChaCha8Rng, e: &Entity| {
        if e.is_user() {
            Port::on(&e.id, *CHANNELS.choose(rng).unwrap())
        } else {
            Port::new(&e.id)
        }
    };
    // Seed some action-perception loops so that both verdicts are common.
    let of_kind = |k: EntityKind| -> Vec<&Entity> { plain.iter().filter(|e| e.kind == k).collect() };
    let (tools, objects) = (of_kind(EntityKind::Tool), of_kind(EntityKind::Object));
    for u in of_kind(EntityKind::User) {
        if tools.is_empty() || objects.is_empty() || rng.gen_bool(0.4) {
            continue;
        }
        let (t, o) = (&tools.choose(rng).unwrap().id, &objects.choose(rng).unwrap().id);
        let _ = m.add_relation(RelationSpec::action(Port::on(&u.id, Channel::KH), Port::new(t)));
        let _ = m.add_relation(RelationSpec::action(Port::new(t), Port::new(o)).channel(Channel::KH));
        let back = RelationSpec::perception(Port::new(o), Port::on(&u.id, Channel::V));
        let _ = m.add_relation(if rng.gen_bool(0.2) { back.dashed() } else { back });
    }
    for _ in 0..rng.gen_range(0..=24) {
        let (Some(a), Some(b)) = (plain.choose(rng), plain.choose(rng)) else { break };
        let kind = match rng.gen_range(0..10) {
            0..=4 => RelationKind::Action,
            5..=8 => RelationKind::Perception,
            _ => RelationKind::Communication,
        };
        let mut spec = RelationSpec::new(port(rng, a), port(rng, b), kind);
        if rng.gen_bool(0.25) {
            spec = spec.dashed();
        }
        if rng.gen_bool(0.2) {
            spec = spec.channel(*CHANNELS.choose(rng).unwrap());
        }
        if rng.gen_bool(0.1) {
            spec = spec.annotated(*ANNOTATIONS.choose(rng).unwrap());
        }
        let _ = m.add_relation(spec);
    }

    let users: Vec<&Entity> = plain.iter().filter(|e| e.is_user()).collect();
    let sources: Vec<&Entity> = plain.iter().filter(|e| !e.is_user() && e.kind != EntityKind::InternalModel).collect();
    for k in 0..rng.gen_range(0..=2) {
        if sources.len() < 2 || users.is_empty() {
            break;
        }
        let n = rng.gen_range(2..=3);
        let inputs: Vec<Port> = sources.choose_multiple(rng, n).map(|e| Port::new(&e.id)).collect();
        let out = users.choose(rng).unwrap();
        let _ = m.add_merge(format!("mg{k}"), inputs, Port::on(&out.id, *CHANNELS.choose(rng).unwrap()));
    }
    m
}

/// Node of the perception graph as the oracles see it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum N {
    E(String),
    M(usize),
}

/// Every hop from `x` directly to `y` that can carry a perception.
fn hops_between(m: &Model, x: &N, y: &N) -> Vec<Hop> {
    let mut out = Vec::new();
    match (x, y) {
        (N::E(a), N::E(b)) => {
            for (i, r) in m.relations().iter().enumerate() {
                if &r.from.entity == a && &r.to.entity == b && r.kind != RelationKind::Communication {
                    out.push(Hop::Relation(i));
                }
            }
        }
        (N::E(a), N::M(k)) => {
            for (input, p) in m.merges()[*k].inputs.iter().enumerate() {
                if &p.entity == a {
                    out.push(Hop::MergeInput { merge: *k, input });
                }
            }
        }
        (N::M(k), N::E(b)) => {
            if &m.merges()[*k].output.entity == b {
                out.push(Hop::MergeOutput(*k));
            }
        }
        (N::M(_), N::M(_)) => {}
    }
    out
}

fn relays(m: &Model) -> Vec<N> {
    let mut r: Vec<N> = m.entities().filter(|e| e.is_transducer()).map(|e| N::E(e.id.clone())).collect();
    r.extend((0..m.merges().len()).map(N::M));
    r
}

/// Brute force: every ordered selection of distinct relays is a candidate
/// route from source to user; each route contributes the product of its
/// per-step hop choices.
pub fn oracle_paths(m: &Model, artifact: &str, user: &str) -> BTreeSet<PerceptionPath> {
    let sources: Vec<String> = match &m.entity(artifact).unwrap().kind {
        EntityKind::MixedGroup(members) => members.iter().cloned().collect(),
        _ => vec![artifact.to_string()],
    };
    let relays = relays(m);
    let mut routes: Vec<Vec<N>> = Vec::new();
    let mut current = Vec::new();
    let mut used = vec![false; relays.len()];
    arrangements(&relays, &mut used, &mut current, &mut routes);

    let mut found = BTreeSet::new();
    for s in &sources {
        for mid in &routes {
            let mut nodes = vec![N::E(s.clone())];
            nodes.extend(mid.iter().cloned());
            nodes.push(N::E(user.to_string()));
            let mut partial: Vec<Vec<Hop>> = vec![Vec::new()];
            for w in nodes.windows(2) {
                let choices = hops_between(m, &w[0], &w[1]);
                partial =
                    partial.iter().flat_map(|p| choices.iter().map(move |h| [p.clone(), vec![*h]].concat())).collect();
                if partial.is_empty() {
                    break;
                }
            }
            found.extend(partial.into_iter().map(|hops| PerceptionPath { hops }));
        }
    }
    found
}

fn arrangements(relays: &[N], used: &mut [bool], current: &mut Vec<N>, out: &mut Vec<Vec<N>>) {
    out.push(current.clone());
    for i in 0..relays.len() {
        if !used[i] {
            used[i] = true;
            current.push(relays[i].clone());
            arrangements(relays, used, current, out);
            current.pop();
            used[i] = false;
        }
    }
}

/// Boolean reachability matrix over entities and merge nodes, closed with
/// Warshall's algorithm where only nodes accepted by `via` may be
/// intermediate.
pub struct Closure {
    pub index: BTreeMap<N, usize>,
    pub reach: Vec<Vec<bool>>,
}

impl Closure {
    pub fn new(m: &Model, edges: &[(N, N)], via: impl Fn(&N) -> bool) -> Closure {
        let mut nodes: Vec<N> = m.entities().map(|e| N::E(e.id.clone())).collect();
        nodes.extend((0..m.merges().len()).map(N::M));
        let index: BTreeMap<N, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let n = nodes.len();
        let mut reach = vec![vec![false; n]; n];
        for (a, b) in edges {
            reach[index[a]][index[b]] = true;
        }
        for k in 0..n {
            if !via(&nodes[k]) {
                continue;
            }
            let row_k = reach[k].clone();
            for row in reach.iter_mut().filter(|row| row[k]) {
                for (cell, via_k) in row.iter_mut().zip(&row_k) {
                    *cell |= *via_k;
                }
            }
        }
        Closure { index, reach }
    }

    pub fn has(&self, a: &str, b: &str) -> bool {
        self.reach[self.index[&N::E(a.into())]][self.index[&N::E(b.into())]]
    }
}

fn kind_of<'a>(m: &'a Model, n: &N) -> Option<&'a EntityKind> {
    match n {
        N::E(id) => m.entity(id).map(|e| &e.kind),
        N::M(_) => None,
    }
}

pub fn perception_closure(m: &Model, salient_only: bool) -> Closure {
    let mut edges = Vec::new();
    for r in m.relations() {
        if r.kind != RelationKind::Communication && (r.salient || !salient_only) {
            edges.push((N::E(r.from.entity.clone()), N::E(r.to.entity.clone())));
        }
    }
    for (k, g) in m.merges().iter().enumerate() {
        for p in &g.inputs {
            edges.push((N::E(p.entity.clone()), N::M(k)));
        }
        edges.push((N::M(k), N::E(g.output.entity.clone())));
    }
    Closure::new(m, &edges, |n| matches!(n, N::M(_)) || kind_of(m, n).is_some_and(EntityKind::is_transducer))
}

fn action_edges(m: &Model) -> Vec<(N, N)> {
    m.relations()
        .iter()
        .filter(|r| r.kind == RelationKind::Action && r.salient)
        .map(|r| (N::E(r.from.entity.clone()), N::E(r.to.entity.clone())))
        .collect()
}

/// Ids R1 must flag: users without a salient loop (manipulation), or
/// tools and non-perceiving users (perception only).
pub fn oracle_r1(m: &Model) -> BTreeSet<String> {
    let ids = |k: EntityKind| -> Vec<String> { m.entities().filter(|e| e.kind == k).map(|e| e.id.clone()).collect() };
    let (users, tools, objects) = (ids(EntityKind::User), ids(EntityKind::Tool), ids(EntityKind::Object));
    let sees = perception_closure(m, true);
    let mut out = BTreeSet::new();
    match m.intent() {
        TaskIntent::Manipulation => {
            let edges = action_edges(m);
            let through_transducers = Closure::new(m, &edges, |n| kind_of(m, n).is_some_and(EntityKind::is_transducer));
            let anywhere = Closure::new(m, &edges, |_| true);
            for u in &users {
                let looped = tools
                    .iter()
                    .filter(|t| through_transducers.has(u, t))
                    .any(|t| objects.iter().any(|o| anywhere.has(t, o) && sees.has(o, u)));
                if !looped {
                    out.insert(u.clone());
                }
            }
        }
        TaskIntent::PerceptionOnly => {
            out.extend(tools.iter().cloned());
            for u in &users {
                if !objects.iter().any(|o| sees.has(o, u)) {
                    out.insert(u.clone());
                }
            }
        }
    }
    out
}

/// Expected R5 node lists: `[unit, members..., blind users...]`.
pub fn oracle_r5(m: &Model) -> Option<BTreeSet<Vec<String>>> {
    let users: Vec<String> = m.users().map(|u| u.id.clone()).collect();
    if users.len() < 2 {
        return None;
    }
    let mut out = BTreeSet::new();
    let mut grouped = BTreeSet::new();
    let mut units: Vec<(String, Vec<String>)> = Vec::new();
    for e in m.entities() {
        if let EntityKind::MixedGroup(members) = &e.kind {
            grouped.extend(members.iter().cloned());
            if members.iter().any(|x| m.entity(x).unwrap().kind == EntityKind::Object) {
                units.push((e.id.clone(), members.iter().cloned().collect()));
            }
        }
    }
    for e in m.entities() {
        if e.kind == EntityKind::Object && !grouped.contains(&e.id) {
            units.push((e.id.clone(), Vec::new()));
        }
    }
    for (unit, members) in units {
        let blind: Vec<String> = users.iter().filter(|u| oracle_paths(m, &unit, u).is_empty()).cloned().collect();
        if !blind.is_empty() {
            out.insert([vec![unit], members, blind].concat());
        }
    }
    Some(out)
}

/// Fixed vocabulary for merge families: an id always denotes the same
/// kind, world and channel, so generated models only differ in optional
/// attributes, groups, relations and merge inputs.
pub fn family_model(rng: &mut ChaCha8Rng, name: &str) -> Model {
    let mut m = Model::new(name);
    m.add_place("p1").unwrap();
    m.add_place("p2").unwrap();
    if rng.gen_bool(0.5) {
        m.add_boundary("p1", "p2", BoundaryKind::Opaque).unwrap();
    }
    let vocab = [
        Entity::user("u1"),
        Entity::user("u2"),
        Entity::tool("t1", World::Real),
        Entity::tool("t2", World::Virtual),
        Entity::object("o1", World::Real),
        Entity::object("o2", World::Virtual),
        Entity::object("o3", World::Real),
        Entity::sensor("s1", Channel::V),
        Entity::effector("e1", Channel::V),
    ];
    let place = |id: &str| if id.ends_with('2') { "p2" } else { "p1" };
    for e in vocab {
        let mut e = e;
        if rng.gen_bool(0.4) {
            let p = place(&e.id);
            e = e.at(p);
        }
        if e.kind.is_artifact() && rng.gen_bool(0.3) {
            e = e.with_mobility(Mobility::absolute(MobilityKind::Mobile));
        }
        if e.id == "t1" && rng.gen_bool(0.3) {
            e = e.stacked();
        }
        m.add_entity(e).unwrap();
    }
    if rng.gen_bool(0.5) {
        m.compose_mixed("g1", ["o1", "o2"]).unwrap();
    }
    let candidates = [
        ("u1", Some(Channel::KH), "t1", RelationKind::Action, None),
        ("u2", Some(Channel::KH), "t1", RelationKind::Action, None),
        ("u1", Some(Channel::KH), "s1", RelationKind::Action, None),
        ("s1", None, "t2", RelationKind::Action, None),
        ("t1", None, "o1", RelationKind::Action, Some(Channel::KH)),
        ("t2", None, "o2", RelationKind::Action, Some(Channel::KH)),
        ("t1", None, "o3", RelationKind::Action, Some(Channel::KH)),
        ("o1", None, "s1", RelationKind::Action, None),
        ("s1", None, "o2", RelationKind::Action, None),
        ("o2", None, "e1", RelationKind::Action, None),
        ("e1", None, "u1", RelationKind::Perception, None),
        ("e1", None, "u2", RelationKind::Perception, None),
        ("o1", None, "u1", RelationKind::Perception, None),
        ("o3", None, "u2", RelationKind::Perception, None),
        ("t1", None, "u1", RelationKind::Perception, None),
        ("u1", Some(Channel::A), "u2", RelationKind::Communication, None),
    ];
    for (from, fc, to, kind, declared) in candidates {
        if !rng.gen_bool(0.5) {
            continue;
        }
        let port = |id: &str, c: Option<Channel>| match (id.starts_with('u'), c) {
            (true, Some(c)) => Port::on(id, c),
            (true, None) => Port::on(id, Channel::V),
            _ => Port::new(id),
        };
        let to_channel = if kind == RelationKind::Communication { fc } else { None };
        let mut spec = RelationSpec::new(port(from, fc), port(to, to_channel), kind);
        if let Some(c) = declared {
            spec = spec.channel(c);
        }
        if rng.gen_bool(0.3) {
            spec = spec.dashed();
        }
        if rng.gen_bool(0.2) {
            spec = spec.annotated(["a", "b"][rng.gen_range(0..2)]);
        }
        m.add_relation(spec).unwrap();
    }
    if rng.gen_bool(0.4) {
        let pool = ["o1", "o3", "e1"];
        let n = rng.gen_range(2..=3);
        let inputs: Vec<Port> = pool.choose_multiple(rng, n).map(|s| Port::new(*s)).collect();
        m.add_merge("mx", inputs, Port::on("u1", Channel::V)).unwrap();
    }
    m
}
