use std::collections::BTreeMap;

use super::lexer::{lex, Tok, Token};
use super::{ParseDiagnostic, Parsed, SourceSpan};
use crate::model::build::insertion_order;
use crate::model::{
    BoundaryKind, Channel, Entity, EntityKind, Mobility, MobilityKind, Model, ModelError, Port, RelationKind,
    RelationSpec, TaskIntent, World,
};

const ITEM_KEYWORDS: [&str; 12] = [
    "place", "boundary", "user", "tool", "object", "internal", "sensor", "effector", "rel", "mixed", "merge", "intent",
];

#[derive(Debug, Clone)]
struct Sp<T> {
    v: T,
    span: SourceSpan,
}

#[derive(Debug, Clone)]
struct AstPort {
    entity: Sp<String>,
    channel: Option<Sp<Channel>>,
}

impl AstPort {
    fn port(&self) -> Port {
        Port { entity: self.entity.v.clone(), channel: self.channel.as_ref().map(|c| c.v) }
    }
}

#[derive(Debug, Clone)]
struct AstEntity {
    span: SourceSpan,
    id: Sp<String>,
    kind: EntityKind,
    world: Option<Sp<World>>,
    place: Option<Sp<String>>,
    mobility: Option<(Option<Sp<String>>, MobilityKind)>,
    stack: bool,
    nested: Option<Sp<String>>,
}

#[derive(Debug, Clone)]
enum Item {
    Place(Sp<String>),
    Boundary {
        span: SourceSpan,
        a: Sp<String>,
        b: Sp<String>,
        kind: BoundaryKind,
        viewer: Option<Sp<String>>,
    },
    Entity(AstEntity),
    Relation {
        span: SourceSpan,
        from: AstPort,
        to: AstPort,
        kind: RelationKind,
        dashed: bool,
        channel: Option<Sp<Channel>>,
        annotation: Option<String>,
    },
    Mixed {
        span: SourceSpan,
        id: Sp<String>,
        members: Vec<Sp<String>>,
    },
    Merge {
        span: SourceSpan,
        id: Sp<String>,
        inputs: Vec<AstPort>,
        output: AstPort,
    },
    Intent(Sp<TaskIntent>),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<ParseDiagnostic>,
    /// Set when the current item had a non-fatal error and must be dropped.
    poisoned: bool,
}

type PResult<T> = Result<T, ()>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn fail<T>(&mut self, expected: &str) -> PResult<T> {
        let t = self.peek().clone();
        self.diags.push(ParseDiagnostic::error(
            t.span,
            "E-SYNTAX",
            format!("expected {expected}, found {}", t.tok.describe()),
        ));
        Err(())
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == w)
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<SourceSpan> {
        if self.is_word(w) {
            Ok(self.bump().span)
        } else {
            self.fail(&format!("`{w}`"))
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if self.peek().tok == tok {
            Ok(self.bump().span)
        } else {
            self.fail(&tok.describe())
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Sp<String>> {
        match self.peek().tok.clone() {
            Tok::Ident(s) => {
                let span = self.bump().span;
                Ok(Sp { v: s, span })
            }
            _ => self.fail(what),
        }
    }

    fn one_of<T: Copy>(&mut self, what: &str, options: &[(&str, T)]) -> PResult<Sp<T>> {
        if let Tok::Ident(s) = &self.peek().tok {
            if let Some((_, v)) = options.iter().find(|(w, _)| w == s) {
                let span = self.bump().span;
                return Ok(Sp { v: *v, span });
            }
        }
        self.fail(what)
    }

    fn channel(&mut self) -> PResult<Sp<Channel>> {
        let name = self.ident("a channel (V, A, KH, T, S)")?;
        match name.v.parse::<Channel>() {
            Ok(c) => Ok(Sp { v: c, span: name.span }),
            Err(()) => {
                self.diags.push(ParseDiagnostic::error(
                    name.span,
                    "E-BAD-CHANNEL",
                    format!("unknown channel `{}`; expected V, A, KH, T or S", name.v),
                ));
                self.poisoned = true;
                Ok(Sp { v: Channel::V, span: name.span })
            }
        }
    }

    fn endpoint(&mut self) -> PResult<AstPort> {
        let entity = self.ident("an entity identifier")?;
        let channel = if self.peek().tok == Tok::Dot {
            self.bump();
            Some(self.channel()?)
        } else {
            None
        };
        Ok(AstPort { entity, channel })
    }

    fn mobility(&mut self) -> PResult<Option<(Option<Sp<String>>, MobilityKind)>> {
        if !self.eat_word("mobility") {
            return Ok(None);
        }
        let reference = if matches!(self.peek().tok, Tok::Ident(_)) && *self.peek_at(1) == Tok::Slash {
            let r = self.ident("an entity identifier")?;
            self.bump();
            Some(r)
        } else {
            None
        };
        let kind = self.one_of(
            "`free`, `fixed` or `pinned`",
            &[
                ("free", MobilityKind::Mobile),
                ("fixed", MobilityKind::TaskFixed),
                ("pinned", MobilityKind::AlwaysFixed),
            ],
        )?;
        Ok(Some((reference, kind.v)))
    }

    fn item(&mut self) -> PResult<Item> {
        let kw = self.ident("an item keyword")?;
        let start = kw.span;
        let item = match kw.v.as_str() {
            "place" => Item::Place(self.ident("a place identifier")?),
            "boundary" => {
                let a = self.ident("a place identifier")?;
                let b = self.ident("a place identifier")?;
                let (kind, viewer) = if self.eat_word("opaque") {
                    (BoundaryKind::Opaque, None)
                } else if self.eat_word("audio") {
                    (BoundaryKind::AudioPermeable, None)
                } else if self.eat_word("mirror") {
                    self.expect_word("viewer")?;
                    let v = self.ident("a place identifier")?;
                    (BoundaryKind::Mirror { viewer: v.v.clone() }, Some(v))
                } else {
                    return self.fail("`opaque`, `audio` or `mirror`");
                };
                Item::Boundary { span: start.to(self.prev_span()), a, b, kind, viewer }
            }
            "user" | "tool" | "object" | "internal" => {
                let kind = match kw.v.as_str() {
                    "user" => EntityKind::User,
                    "tool" => EntityKind::Tool,
                    "object" => EntityKind::Object,
                    _ => EntityKind::InternalModel,
                };
                let id = self.ident("an entity identifier")?;
                let world = if self.is_word("real") || self.is_word("virtual") {
                    Some(self.one_of("a world", &[("real", World::Real), ("virtual", World::Virtual)])?)
                } else {
                    None
                };
                let place = self.place_clause()?;
                let mobility = self.mobility()?;
                let stack = self.eat_word("stack");
                let nested = if self.eat_word("in") { Some(self.ident("an entity identifier")?) } else { None };
                let span = start.to(self.prev_span());
                Item::Entity(AstEntity { span, id, kind, world, place, mobility, stack, nested })
            }
            "sensor" | "effector" => {
                let id = self.ident("an entity identifier")?;
                self.expect_word("channel")?;
                let c = self.channel()?;
                let kind = if kw.v == "sensor" { EntityKind::Sensor(c.v) } else { EntityKind::Effector(c.v) };
                let place = self.place_clause()?;
                let mobility = self.mobility()?;
                let stack = self.eat_word("stack");
                let nested = if self.eat_word("in") { Some(self.ident("an entity identifier")?) } else { None };
                let span = start.to(self.prev_span());
                Item::Entity(AstEntity { span, id, kind, world: None, place, mobility, stack, nested })
            }
            "rel" => {
                let from = self.endpoint()?;
                self.expect(Tok::Arrow)?;
                let to = self.endpoint()?;
                let kind = self.one_of(
                    "`action`, `perception` or `communication`",
                    &[
                        ("action", RelationKind::Action),
                        ("perception", RelationKind::Perception),
                        ("communication", RelationKind::Communication),
                    ],
                )?;
                let dashed = self.eat_word("dashed");
                let channel = if self.eat_word("channel") { Some(self.channel()?) } else { None };
                let annotation = match self.peek().tok.clone() {
                    Tok::Str(s) => {
                        self.bump();
                        Some(s)
                    }
                    _ => None,
                };
                let span = start.to(self.prev_span());
                Item::Relation { span, from, to, kind: kind.v, dashed, channel, annotation }
            }
            "mixed" => {
                let id = self.ident("a group identifier")?;
                self.expect(Tok::LBrace)?;
                let mut members = vec![self.ident("an entity identifier")?];
                while self.peek().tok == Tok::Comma {
                    self.bump();
                    members.push(self.ident("an entity identifier")?);
                }
                self.expect(Tok::RBrace)?;
                Item::Mixed { span: start.to(self.prev_span()), id, members }
            }
            "merge" => {
                let id = self.ident("a merge identifier")?;
                self.expect(Tok::LBrace)?;
                let mut inputs = vec![self.endpoint()?];
                while self.peek().tok == Tok::Comma {
                    self.bump();
                    inputs.push(self.endpoint()?);
                }
                self.expect(Tok::RBrace)?;
                self.expect(Tok::Arrow)?;
                let output = self.endpoint()?;
                Item::Merge { span: start.to(self.prev_span()), id, inputs, output }
            }
            "intent" => Item::Intent(self.one_of(
                "`manipulation` or `perception`",
                &[("manipulation", TaskIntent::Manipulation), ("perception", TaskIntent::PerceptionOnly)],
            )?),
            other => {
                self.diags.push(ParseDiagnostic::error(
                    kw.span,
                    "E-SYNTAX",
                    format!("expected an item keyword, found `{other}`"),
                ));
                return Err(());
            }
        };
        Ok(item)
    }

    fn place_clause(&mut self) -> PResult<Option<Sp<String>>> {
        if self.peek().tok == Tok::At {
            self.bump();
            Ok(Some(self.ident("a place identifier")?))
        } else {
            Ok(None)
        }
    }

    /// Skips to the next item keyword or the closing brace of the model.
    fn recover(&mut self) {
        let mut depth = 0usize;
        loop {
            match &self.peek().tok {
                Tok::Eof => return,
                Tok::RBrace if depth == 0 => return,
                Tok::RBrace => depth -= 1,
                Tok::LBrace => depth += 1,
                Tok::Ident(s) if depth == 0 && ITEM_KEYWORDS.contains(&s.as_str()) => return,
                _ => {}
            }
            self.bump();
        }
    }

    fn model(&mut self) -> PResult<(String, Vec<Item>)> {
        self.expect_word("model")?;
        let name = match self.peek().tok.clone() {
            Tok::Str(s) => {
                self.bump();
                s
            }
            _ => return self.fail("a quoted model name"),
        };
        self.expect(Tok::LBrace)?;
        let mut items = Vec::new();
        loop {
            match &self.peek().tok {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Eof => return self.fail("`}`"),
                _ => {
                    self.poisoned = false;
                    let at = self.pos;
                    match self.item() {
                        Ok(item) if !self.poisoned => items.push(item),
                        Ok(_) => {}
                        Err(()) => {
                            if self.pos == at {
                                self.bump();
                            }
                            self.recover();
                        }
                    }
                }
            }
        }
        if self.peek().tok != Tok::Eof {
            return self.fail("end of input");
        }
        Ok((name, items))
    }
}

fn code_of(e: &ModelError) -> &'static str {
    use ModelError::*;
    match e {
        DuplicateId(_) => "E-DUP-ID",
        InvalidIdentifier(_) => "E-SYNTAX",
        UserInVirtualWorld(_) | ModelInRealWorld(_) | MissingWorldTag(_) | TransducerWorld(_) => "E-WORLD",
        UnknownPlace(_) | UnknownEntity(_) | UnknownEndpoint(_) => "E-UNKNOWN-REF",
        GroupThroughAddEntity(_) | StackNotAllowed(_) | InvalidMobility(_) | SelfReference(_) => "E-ENTITY",
        NestingCycle(_) => "E-CYCLE",
        BoundarySamePlace(_) | DuplicateBoundary(..) | ViewerNotInBoundary { .. } => "E-BOUNDARY",
        MissingUserChannel(_) | ChannelOnInternalModel(_) | ChannelMismatch(..) | ChannelUnresolvable(..) => {
            "E-CHANNEL"
        }
        GroupEndpoint(_)
        | SelfRelation(_)
        | CommunicationNotUserToUser(..)
        | PerceptionNotIntoUser(..)
        | ActionIntoUser(..)
        | NotAnArtifact(_)
        | NotAUser(_) => "E-RELATION",
        TooFewMembers | AllSameWorld | MemberAlreadyGrouped(..) | InvalidGroupMember(_) => "E-MIXED",
        TooFewInputs | OutputNotUser(_) => "E-MERGE",
    }
}

struct Lowering {
    model: Model,
    diags: Vec<ParseDiagnostic>,
}

impl Lowering {
    fn report(&mut self, span: SourceSpan, e: ModelError) {
        self.diags.push(ParseDiagnostic::error(span, code_of(&e), e.to_string()));
    }

    fn entity(&mut self, a: &AstEntity) {
        let world = match (&a.kind, &a.world) {
            (EntityKind::User, None) => World::Real,
            (EntityKind::InternalModel, None) => World::Virtual,
            (EntityKind::Tool | EntityKind::Object, None) => {
                self.diags.push(ParseDiagnostic {
                    span: a.id.span,
                    code: "W-DEFAULT-WORLD".into(),
                    message: format!("`{}` has no world tag; assuming real", a.id.v),
                });
                World::Real
            }
            (EntityKind::InternalModel, Some(w)) => {
                self.diags.push(ParseDiagnostic::error(
                    w.span,
                    "E-WORLD",
                    format!("internal model `{}` takes no world tag; it is always virtual", a.id.v),
                ));
                return;
            }
            (_, Some(w)) => w.v,
            (_, None) => World::Straddling,
        };
        let mobility = match &a.mobility {
            None => Mobility::default(),
            Some((None, k)) => Mobility::absolute(*k),
            Some((Some(r), k)) => Mobility::relative(r.v.clone(), *k),
        };
        let entity = Entity {
            id: a.id.v.clone(),
            kind: a.kind.clone(),
            world,
            place: a.place.as_ref().map(|p| p.v.clone()),
            mobility,
            nested_in: a.nested.as_ref().map(|n| n.v.clone()),
            stack: a.stack,
        };
        if let Err(e) = self.model.add_entity(entity) {
            let span = match &e {
                ModelError::DuplicateId(_) | ModelError::InvalidIdentifier(_) => a.id.span,
                ModelError::UserInVirtualWorld(_) => a.world.as_ref().map_or(a.span, |w| w.span),
                ModelError::UnknownPlace(_) => a.place.as_ref().map_or(a.span, |p| p.span),
                ModelError::UnknownEntity(r) | ModelError::SelfReference(r) => {
                    let nested = a.nested.as_ref().filter(|n| &n.v == r || r == &a.id.v);
                    let mob = a.mobility.as_ref().and_then(|(m, _)| m.as_ref()).filter(|m| &m.v == r || r == &a.id.v);
                    nested.or(mob).map_or(a.span, |s| s.span)
                }
                _ => a.span,
            };
            self.report(span, e);
        }
    }
}

pub(crate) fn parse(text: &str) -> Result<Parsed, Vec<ParseDiagnostic>> {
    let (toks, lex_diags) = lex(text);
    let mut p = Parser { toks, pos: 0, diags: lex_diags, poisoned: false };
    let parsed = p.model();
    let mut diags = p.diags;
    let (name, items) = match parsed {
        Ok(x) => x,
        Err(()) => {
            diags.sort_by_key(|d| d.span);
            return Err(diags);
        }
    };

    let mut low = Lowering { model: Model::new(name), diags: Vec::new() };
    let mut intent_seen: Option<SourceSpan> = None;
    for item in &items {
        match item {
            Item::Intent(i) => {
                if intent_seen.is_some() {
                    low.diags.push(ParseDiagnostic::error(i.span, "E-SYNTAX", "intent declared twice"));
                }
                intent_seen = Some(i.span);
                low.model.set_intent(i.v);
            }
            Item::Place(id) => {
                if let Err(e) = low.model.add_place(id.v.clone()) {
                    low.report(id.span, e);
                }
            }
            _ => {}
        }
    }
    for item in &items {
        if let Item::Boundary { span, a, b, kind, viewer } = item {
            if let Err(e) = low.model.add_boundary(a.v.clone(), b.v.clone(), kind.clone()) {
                let at = match &e {
                    ModelError::UnknownPlace(p) if p == &a.v => a.span,
                    ModelError::UnknownPlace(_) => b.span,
                    ModelError::ViewerNotInBoundary { .. } => viewer.as_ref().map_or(*span, |v| v.span),
                    _ => *span,
                };
                low.report(at, e);
            }
        }
    }

    // entities go in dependency order so forward references are allowed
    let ents: Vec<&AstEntity> = items
        .iter()
        .filter_map(|i| match i {
            Item::Entity(e) => Some(e),
            _ => None,
        })
        .collect();
    let mut first_seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut unique: Vec<&AstEntity> = Vec::new();
    for e in &ents {
        if first_seen.contains_key(e.id.v.as_str()) {
            low.report(e.id.span, ModelError::DuplicateId(e.id.v.clone()));
        } else {
            first_seen.insert(&e.id.v, unique.len());
            unique.push(e);
        }
    }
    let as_entities: Vec<Entity> = unique
        .iter()
        .map(|a| Entity {
            id: a.id.v.clone(),
            kind: a.kind.clone(),
            world: World::Real,
            place: None,
            mobility: match &a.mobility {
                Some((Some(r), k)) => Mobility::relative(r.v.clone(), *k),
                _ => Mobility::default(),
            },
            nested_in: a.nested.as_ref().map(|n| n.v.clone()),
            stack: false,
        })
        .collect();
    let refs: Vec<&Entity> = as_entities.iter().collect();
    match insertion_order(&refs) {
        Ok(order) => {
            for i in order {
                low.entity(unique[i]);
            }
        }
        Err(id) => {
            let at = unique[first_seen[id.as_str()]];
            low.report(at.id.span, ModelError::NestingCycle(id));
        }
    }

    for item in &items {
        match item {
            Item::Mixed { span, id, members } => {
                let names: Vec<String> = members.iter().map(|m| m.v.clone()).collect();
                if let Err(e) = low.model.compose_mixed(id.v.clone(), names) {
                    let at = match &e {
                        ModelError::DuplicateId(_) | ModelError::InvalidIdentifier(_) => id.span,
                        ModelError::UnknownEntity(m)
                        | ModelError::InvalidGroupMember(m)
                        | ModelError::MemberAlreadyGrouped(m, _) => {
                            members.iter().find(|x| &x.v == m).map_or(*span, |x| x.span)
                        }
                        _ => *span,
                    };
                    low.report(at, e);
                }
            }
            Item::Relation { span, from, to, kind, dashed, channel, annotation } => {
                let spec = RelationSpec {
                    from: from.port(),
                    to: to.port(),
                    kind: *kind,
                    salient: !dashed,
                    channel: channel.as_ref().map(|c| c.v),
                    annotation: annotation.clone(),
                };
                if let Err(e) = low.model.add_relation(spec) {
                    let at = match &e {
                        ModelError::UnknownEndpoint(x)
                        | ModelError::MissingUserChannel(x)
                        | ModelError::ChannelOnInternalModel(x)
                        | ModelError::GroupEndpoint(x) => {
                            [from, to].into_iter().find(|p| &p.entity.v == x).map_or(*span, |p| p.entity.span)
                        }
                        ModelError::ChannelMismatch(..) => channel.as_ref().map_or(*span, |c| c.span),
                        _ => *span,
                    };
                    low.report(at, e);
                }
            }
            _ => {}
        }
    }
    for item in &items {
        if let Item::Merge { span, id, inputs, output } = item {
            let ports = inputs.iter().map(AstPort::port).collect();
            if let Err(e) = low.model.add_merge(id.v.clone(), ports, output.port()) {
                let at = match &e {
                    ModelError::DuplicateId(_) | ModelError::InvalidIdentifier(_) => id.span,
                    ModelError::UnknownEndpoint(x)
                    | ModelError::MissingUserChannel(x)
                    | ModelError::ChannelOnInternalModel(x)
                    | ModelError::GroupEndpoint(x)
                    | ModelError::OutputNotUser(x) => inputs
                        .iter()
                        .chain(std::iter::once(output))
                        .find(|p| &p.entity.v == x)
                        .map_or(*span, |p| p.entity.span),
                    _ => *span,
                };
                low.report(at, e);
            }
        }
    }

    diags.extend(low.diags);
    diags.sort_by_key(|d| d.span);
    if diags.iter().any(ParseDiagnostic::is_error) {
        Err(diags)
    } else {
        Ok(Parsed { model: low.model, warnings: diags })
    }
}
