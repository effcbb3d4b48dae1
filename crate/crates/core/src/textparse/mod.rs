//! Template-grammar parser for interaction descriptions.
//!
//! A clause reads `<subject> <action>[ and <action>]* [<prep>] <object>
//! [<relation> <anchor>[ and <anchor>]*]* [<gerund> <anchor>] [with ...]`.
//! Clauses are separated by sentence punctuation, by "while", and by "and"
//! when a new subject follows.

mod lexer;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{default_lexicon, Edge, Node, NodeKind, SceneGraph};
use crate::pla::{default_vocab, ActionMention, Limb, PartGroup, Side};
use lexer::{Tok, TokKind};

pub use lexer::RELATION_WORDS;
pub use template::{generate_corpus, random_interaction, render_description, render_interaction};

/// Node id of the virtual human in a local scene graph.
pub const HUMAN_NODE: &str = "human";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty description")]
    Empty,
    #[error("action \"{word}\" not in vocabulary (at character {offset})")]
    UnknownAction { word: String, offset: usize },
    #[error("unexpected \"{word}\" at character {offset}: expected {expected}")]
    Unexpected { word: String, offset: usize, expected: &'static str },
    #[error("invalid quantity {value}{}", offset.map(|o| format!(" at character {o}")).unwrap_or_default())]
    InvalidQuantity { value: u32, offset: Option<usize> },
}

/// An anchor object class with its relation to the person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorClass {
    pub concept: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<u32>,
    /// Spatial relation word, or the action word for gerund anchors.
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedInteraction {
    pub subject: String,
    pub actions: Vec<ActionMention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_class: Option<String>,
    /// Preposition introducing the object ("on" in "sits on the chair").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_relation: Option<String>,
    /// First spatial relation of the clause.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_relation: Option<String>,
    #[serde(default)]
    pub anchors: Vec<AnchorClass>,
}

impl ParsedInteraction {
    /// Edge label from the person to the object class: the first action,
    /// joined with the preposition when there is one ("sit-on").
    pub fn object_predicate(&self) -> String {
        let a = self.actions.first().map(|m| m.action.as_str()).unwrap_or("");
        match &self.object_relation {
            Some(prep) => format!("{a}-{prep}"),
            None => a.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantifier: Option<u32>,
    /// Instance index assigned by [`quantity_expand`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<u32>,
}

impl Triplet {
    pub fn new(subject: &str, predicate: &str, object: &str, quantifier: Option<u32>) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
            quantifier,
            instance: None,
        }
    }
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
}

fn limb_word(w: &str) -> Option<Limb> {
    match w {
        "hand" | "hands" => Some(Limb::Hand),
        "arm" | "arms" => Some(Limb::Arm),
        "leg" | "legs" | "foot" | "feet" => Some(Limb::Leg),
        _ => None,
    }
}

fn side_word(w: &str) -> Option<Side> {
    match w {
        "left" => Some(Side::Left),
        "right" => Some(Side::Right),
        _ => None,
    }
}

impl<'a> Parser<'a> {
    fn tok(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + k)
    }

    fn word(&self, k: usize) -> Option<&'a str> {
        self.tok(k).filter(|t| t.kind == TokKind::Word).map(|t| t.text.as_str())
    }

    fn offset(&self) -> usize {
        self.tok(0).map(|t| t.offset).unwrap_or_else(|| self.toks.last().map(|t| t.offset + t.text.chars().count()).unwrap_or(0))
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        ParseError::Unexpected {
            word: self.tok(0).map(|t| t.text.clone()).unwrap_or_else(|| "end of text".into()),
            offset: self.offset(),
            expected,
        }
    }

    /// Length of a relation phrase starting at token `k`, with its canonical form.
    fn relation_at(&self, k: usize) -> Option<(usize, &'static str)> {
        lexer::RELATIONS.iter().find_map(|(words, canon)| {
            words.iter().enumerate().all(|(i, w)| self.word(k + i) == Some(*w)).then_some((words.len(), *canon))
        })
    }

    fn subject_at(&self, k: usize) -> bool {
        match self.word(k) {
            Some(w) if lexer::SUBJECT_NOUNS.contains(&w) => true,
            Some(w) if lexer::DETERMINERS.contains(&w) => self.word(k + 1).is_some_and(|n| lexer::SUBJECT_NOUNS.contains(&n)),
            _ => false,
        }
    }

    fn verb_at(&self, k: usize) -> bool {
        match self.word(k) {
            Some(w) if lexer::AUXILIARIES.contains(&w) => self.word(k + 1).is_some_and(|v| lexer::verb_stem(v).is_some()),
            Some(w) => lexer::verb_stem(w).is_some(),
            None => false,
        }
    }

    /// "and" followed by something other than a new subject, a relation or
    /// the end of the text is read as another action.
    fn and_verb_at(&self, k: usize) -> bool {
        self.word(k) == Some("and")
            && self.word(k + 1).is_some()
            && !self.subject_at(k + 1)
            && self.relation_at(k + 1).is_none()
    }

    /// Words that end a noun phrase.
    fn boundary_at(&self, k: usize) -> bool {
        let Some(t) = self.tok(k) else { return true };
        if t.kind != TokKind::Word {
            return true;
        }
        let w = t.text.as_str();
        self.relation_at(k).is_some()
            || lexer::OBJECT_PREPOSITIONS.contains(&w)
            || matches!(w, "and" | "while" | "with")
            || lexer::is_gerund(w)
    }

    fn parse_subject(&mut self) -> Result<String, ParseError> {
        if self.word(0).is_some_and(|w| lexer::DETERMINERS.contains(&w)) {
            self.pos += 1;
        }
        if let Some(w) = self.word(0).filter(|w| lexer::SUBJECT_NOUNS.contains(w)) {
            self.pos += 1;
            return Ok(w.to_string());
        }
        // Unrecognized subject: read up to the verb. If none is found, the
        // last word read is taken as an unknown verb.
        let start = self.pos;
        while self.word(0).is_some() && !self.verb_at(0) && !self.boundary_at(0) {
            self.pos += 1;
        }
        if self.verb_at(0) && self.pos > start {
            let words: Vec<&str> = self.toks[start..self.pos].iter().map(|t| t.text.as_str()).collect();
            return Ok(words.join(" "));
        }
        if self.pos > start + 1 {
            let last = &self.toks[self.pos - 1];
            return Err(ParseError::UnknownAction { word: lexer::guess_lemma(&last.text), offset: last.offset });
        }
        self.pos = start;
        Err(self.unexpected("a subject such as \"a person\""))
    }

    fn parse_verb(&mut self) -> Result<ActionMention, ParseError> {
        if self.word(0).is_some_and(|w| lexer::AUXILIARIES.contains(&w)) {
            self.pos += 1;
        }
        let Some(t) = self.tok(0).filter(|t| t.kind == TokKind::Word) else {
            return Err(self.unexpected("an action"));
        };
        let Some(stem) = lexer::verb_stem(&t.text) else {
            if self.boundary_at(0) || lexer::DETERMINERS.contains(&t.text.as_str()) {
                return Err(self.unexpected("an action"));
            }
            return Err(ParseError::UnknownAction { word: lexer::guess_lemma(&t.text), offset: t.offset });
        };
        self.pos += 1;
        let particle = self
            .word(0)
            .and_then(|p| lexer::PARTICLES.iter().find(|(s, w, _)| *s == stem && *w == p).map(|(_, _, a)| *a));
        let action = match particle {
            Some(a) => {
                self.pos += 1;
                a
            }
            None => stem,
        };
        if !default_vocab().contains(action) {
            return Err(ParseError::UnknownAction { word: action.to_string(), offset: t.offset });
        }
        Ok(ActionMention::new(action))
    }

    /// Optional determiner and quantity, then words up to a boundary. Returns
    /// the normalized concept and quantity.
    fn parse_np(&mut self) -> Result<(String, Option<u32>), ParseError> {
        if self.word(0).is_some_and(|w| lexer::DETERMINERS.contains(&w)) {
            self.pos += 1;
        }
        let mut qty = None;
        if let Some(q) = self.word(0).and_then(lexer::quantity) {
            if q == 0 {
                return Err(ParseError::InvalidQuantity { value: 0, offset: Some(self.offset()) });
            }
            qty = Some(q);
            self.pos += 1;
        }
        let start = self.pos;
        while !self.boundary_at(0) && !(self.pos > start && self.subject_at(0)) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.unexpected("an object class"));
        }
        let words: Vec<&str> = self.toks[start..self.pos].iter().map(|t| t.text.as_str()).collect();
        Ok((normalize_concept(&words), qty))
    }

    /// "the left hand" style limb reference after an action.
    fn limb_phrase(&self, k: usize) -> Option<(usize, Option<Side>, Limb)> {
        let mut i = k;
        if self.word(i).is_some_and(|w| lexer::DETERMINERS.contains(&w)) {
            i += 1;
        }
        let side = self.word(i).and_then(side_word);
        if side.is_some() {
            i += 1;
        }
        let limb = self.word(i).and_then(limb_word)?;
        Some((i + 1 - k, side, limb))
    }

    fn attach_hint(&self, actions: &mut [ActionMention], side: Option<Side>, limb: Limb, offset: usize) -> Result<(), ParseError> {
        let vocab = default_vocab();
        let wanted = match limb {
            Limb::Hand => PartGroup::Hand,
            Limb::Arm => PartGroup::Arm,
            Limb::Leg => PartGroup::Lower,
        };
        let target = actions
            .iter()
            .rposition(|m| vocab.groups(&m.action).contains(&wanted))
            .or_else(|| {
                actions.iter().rposition(|m| {
                    vocab.groups(&m.action).iter().any(|g| matches!(g, PartGroup::Arm | PartGroup::Hand | PartGroup::Lower))
                })
            })
            .ok_or(ParseError::Unexpected { word: "with".into(), offset, expected: "an action that uses this limb" })?;
        actions[target].side = side;
        actions[target].limb = Some(limb);
        Ok(())
    }

    fn parse_clause(&mut self) -> Result<ParsedInteraction, ParseError> {
        let subject = self.parse_subject()?;
        let mut actions = vec![self.parse_verb()?];
        loop {
            if self.word(0) == Some("and") && self.verb_at(1) {
                self.pos += 1;
                actions.push(self.parse_verb()?);
            } else if let Some((n, side, limb)) = self.limb_phrase(0) {
                let offset = self.offset();
                self.pos += n;
                self.attach_hint(&mut actions, side, limb, offset)?;
            } else {
                break;
            }
        }
        let mut p = ParsedInteraction {
            subject,
            actions,
            object_class: None,
            object_relation: None,
            spatial_relation: None,
            anchors: Vec::new(),
        };
        // object phrase
        if self.relation_at(0).is_none() {
            match self.word(0) {
                Some(w) if lexer::OBJECT_PREPOSITIONS.contains(&w) => {
                    self.pos += 1;
                    p.object_relation = Some(w.to_string());
                    let offset = self.offset();
                    let (concept, qty) = self.parse_np()?;
                    if qty.is_some() {
                        return Err(ParseError::Unexpected { word: concept, offset, expected: "a single object" });
                    }
                    p.object_class = Some(concept);
                }
                Some(w) if !self.boundary_at(0) && !(w == "and" || w == "while") && !self.subject_at(0) => {
                    let offset = self.offset();
                    let (concept, qty) = self.parse_np()?;
                    if qty.is_some() {
                        return Err(ParseError::Unexpected { word: concept, offset, expected: "a single object" });
                    }
                    p.object_class = Some(concept);
                }
                _ => {}
            }
        }
        // relations, gerunds and modifiers
        loop {
            if let Some((n, rel)) = self.relation_at(0) {
                self.pos += n;
                p.spatial_relation.get_or_insert_with(|| rel.to_string());
                self.parse_anchor_list(&mut p, rel)?;
            } else if self.word(0) == Some("and") && self.relation_at(1).is_some() {
                self.pos += 1;
            } else if self.word(0).is_some_and(lexer::is_gerund) || self.and_verb_at(0) {
                // "using a cabinet", "and touches the wall": an extra action
                // whose object becomes an anchor related by that action
                if self.word(0) == Some("and") {
                    self.pos += 1;
                }
                let m = self.parse_verb()?;
                let rel = m.action.clone();
                p.actions.push(m);
                if self.word(0).is_some_and(|w| lexer::OBJECT_PREPOSITIONS.contains(&w)) {
                    self.pos += 1;
                    self.parse_anchor_list(&mut p, &rel)?;
                } else if !self.boundary_at(0) && !self.subject_at(0) {
                    self.parse_anchor_list(&mut p, &rel)?;
                }
            } else if self.word(0) == Some("with") {
                let offset = self.offset();
                self.pos += 1;
                self.parse_with(&mut p, offset)?;
            } else {
                break;
            }
        }
        if p.actions.iter().any(|m| default_vocab().part_of(m).is_err()) {
            return Err(self.unexpected("a known action"));
        }
        Ok(p)
    }

    fn parse_anchor_list(&mut self, p: &mut ParsedInteraction, rel: &str) -> Result<(), ParseError> {
        loop {
            let (concept, quantity) = self.parse_np()?;
            p.anchors.push(AnchorClass { concept, quantity, relation: rel.to_string() });
            let more = self.word(0) == Some("and")
                && !self.subject_at(1)
                && !self.verb_at(1)
                && self.relation_at(1).is_none()
                && self.word(1).is_some();
            if !more {
                return Ok(());
            }
            self.pos += 1;
        }
    }

    /// After "with": a limb hint or a head action.
    fn parse_with(&mut self, p: &mut ParsedInteraction, offset: usize) -> Result<(), ParseError> {
        let mut k = 0;
        if self.word(0).is_some_and(|w| lexer::DETERMINERS.contains(&w)) {
            k = 1;
        }
        if self.word(k) == Some("head") {
            if let Some(dir) = self.word(k + 1).filter(|d| matches!(*d, "up" | "down" | "left" | "right")) {
                self.pos += k + 2;
                p.actions.push(ActionMention::new(format!("head {dir}")));
                return Ok(());
            }
        }
        match self.limb_phrase(0) {
            Some((n, side, limb)) => {
                self.pos += n;
                self.attach_hint(&mut p.actions, side, limb, offset)
            }
            None => Err(self.unexpected("a body part such as \"the left hand\"")),
        }
    }
}

/// Longest trailing sub-phrase found in the lexicon, as its canonical
/// concept; otherwise the phrase itself.
fn normalize_concept(words: &[&str]) -> String {
    let lex = default_lexicon();
    for start in 0..words.len() {
        let phrase = words[start..].join(" ");
        if let Some(c) = lex.normalize(&phrase) {
            return c.to_string();
        }
    }
    words.join(" ")
}

/// One parsed interaction per person clause.
pub fn parse_description(text: &str) -> Result<Vec<ParsedInteraction>, ParseError> {
    let toks = lexer::tokenize(text);
    if !toks.iter().any(|t| t.kind == TokKind::Word) {
        return Err(ParseError::Empty);
    }
    let mut p = Parser { toks: &toks, pos: 0 };
    let mut out = Vec::new();
    loop {
        while p.tok(0).is_some_and(|t| t.kind != TokKind::Word) {
            p.pos += 1;
        }
        if p.tok(0).is_none() {
            break;
        }
        out.push(p.parse_clause()?);
        if p.tok(0).is_some_and(|t| t.kind == TokKind::Comma) {
            p.pos += 1;
        }
        match p.tok(0) {
            None => break,
            Some(t) if t.kind == TokKind::Stop => continue,
            Some(t) if t.text == "while" => p.pos += 1,
            Some(t) if t.text == "and" && p.subject_at(1) => p.pos += 1,
            Some(_) => return Err(p.unexpected("the end of the clause")),
        }
        if p.tok(0).is_none() {
            return Err(p.unexpected("another clause"));
        }
    }
    Ok(out)
}

/// Subject–predicate–object triplets of one interaction.
pub fn triplets(p: &ParsedInteraction) -> Vec<Triplet> {
    let mut out = Vec::new();
    if let Some(obj) = &p.object_class {
        out.push(Triplet::new("person", &p.object_predicate(), obj, None));
    }
    for a in &p.anchors {
        out.push(Triplet::new("person", &a.relation, &a.concept, a.quantity));
    }
    out
}

/// Replaces a triplet with quantifier k by k triplets with instance
/// indices 0..k.
pub fn quantity_expand(triplets: &[Triplet]) -> Result<Vec<Triplet>, ParseError> {
    let mut out = Vec::new();
    for t in triplets {
        match t.quantifier {
            None => out.push(t.clone()),
            Some(0) => return Err(ParseError::InvalidQuantity { value: 0, offset: None }),
            Some(k) => {
                for i in 0..k {
                    out.push(Triplet { quantifier: None, instance: Some(i), ..t.clone() });
                }
            }
        }
    }
    Ok(out)
}

fn node_id(concept: &str, instance: Option<u32>, g: &SceneGraph) -> String {
    let base = concept.replace(' ', "_");
    let first = match instance {
        Some(i) => format!("{base}_{i}"),
        None => base.clone(),
    };
    if !g.contains(&first) && first != HUMAN_NODE {
        return first;
    }
    (1..).map(|n| format!("{first}_{n}")).find(|id| !g.contains(id)).expect("unbounded suffixes")
}

/// Local scene graph: the virtual human, one node per object instance and a
/// predicate edge from the human to each.
pub fn build_local_graph(p: &ParsedInteraction) -> Result<SceneGraph, ParseError> {
    let mut g = SceneGraph::new();
    g.nodes.push(Node::new(HUMAN_NODE, NodeKind::VirtualHuman, "person"));
    for t in quantity_expand(&triplets(p))? {
        let id = node_id(&t.object, t.instance, &g);
        let kind = if t.object == "floor" { NodeKind::Floor } else { NodeKind::Object };
        g.nodes.push(Node::new(&id, kind, &t.object));
        g.edges.push(Edge::new(HUMAN_NODE, &t.predicate, &id));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(text: &str) -> ParsedInteraction {
        let mut v = parse_description(text).unwrap();
        assert_eq!(v.len(), 1, "{text}");
        v.remove(0)
    }

    fn actions(p: &ParsedInteraction) -> Vec<&str> {
        p.actions.iter().map(|m| m.action.as_str()).collect()
    }

    #[test]
    fn sit_near_table() {
        let p = one("a person sits on the chair near the table");
        assert_eq!(actions(&p), vec!["sit"]);
        assert_eq!(p.object_class.as_deref(), Some("chair"));
        assert_eq!(p.object_relation.as_deref(), Some("on"));
        assert_eq!(p.spatial_relation.as_deref(), Some("near"));
        assert_eq!(p.anchors, vec![AnchorClass { concept: "table".into(), quantity: None, relation: "near".into() }]);
    }

    #[test]
    fn gerund_adds_action_and_anchor() {
        let p = one("a person crouches on the floor using a cabinet");
        assert_eq!(actions(&p), vec!["crouch", "use"]);
        assert_eq!(p.object_class.as_deref(), Some("floor"));
        assert_eq!(p.anchors[0].concept, "cabinet");
        assert_eq!(p.anchors[0].relation, "use");
    }

    #[test]
    fn unknown_action_reported() {
        let e = parse_description("the purple elephant flies").unwrap_err();
        assert_eq!(e, ParseError::UnknownAction { word: "fly".into(), offset: 20 });
        let e = parse_description("a person jumps on the bed").unwrap_err();
        assert!(matches!(e, ParseError::UnknownAction { word, offset: 9 } if word == "jump"));
        assert!(matches!(parse_description("a person turns"), Err(ParseError::UnknownAction { .. })));
    }

    #[test]
    fn stray_words_are_errors() {
        let e = parse_description("a person sits on the chair quickly on").unwrap_err();
        assert!(matches!(e, ParseError::Unexpected { .. }), "{e:?}");
        assert!(matches!(parse_description("  . "), Err(ParseError::Empty)));
    }

    #[test]
    fn multi_action_and_multi_person() {
        let p = one("a man sits down on the sofa and touches the wall");
        assert_eq!(actions(&p), vec!["sit down", "touch"]);
        assert_eq!(p.anchors[0].relation, "touch");
        let e = parse_description("a man sits on the sofa and smiles").unwrap_err();
        assert!(matches!(e, ParseError::UnknownAction { word, .. } if word == "smile"));
        let v = parse_description("a person sits and types at the desk while another person stands by the window").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(actions(&v[0]), vec!["sit", "type"]);
        assert_eq!(v[0].object_class.as_deref(), Some("desk"));
        assert_eq!(v[1].spatial_relation.as_deref(), Some("by"));
        let v = parse_description("A woman lies on the bed. Someone walks to the door.").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].object_relation.as_deref(), Some("to"));
    }

    #[test]
    fn side_hints_and_head_actions() {
        let p = one("a person stands and touches the table with the left hand");
        assert_eq!(p.actions[1].side, Some(Side::Left));
        assert_eq!(p.actions[1].limb, Some(Limb::Hand));
        assert_eq!(p.actions[0].side, None);
        let p = one("a person raises the right leg");
        assert_eq!(p.actions[0].limb, Some(Limb::Leg));
        assert_eq!(p.object_class, None);
        let p = one("a person sits on the bench with the head down");
        assert_eq!(actions(&p), vec!["sit", "head down"]);
    }

    #[test]
    fn quantities_and_relations() {
        let p = one("someone stands in front of three plants and two chairs");
        assert_eq!(p.spatial_relation.as_deref(), Some("in front of"));
        assert_eq!(p.anchors.len(), 2);
        assert_eq!(p.anchors[0].quantity, Some(3));
        assert_eq!(p.anchors[0].concept, "plant");
        assert_eq!(p.anchors[1].concept, "chair");
        let p = one("a person walks to the left of the couch and behind the coffee table");
        assert_eq!(p.object_class, None);
        assert_eq!(p.anchors[0].relation, "left of");
        assert_eq!(p.anchors[0].concept, "sofa");
        assert_eq!(p.anchors[1].concept, "coffee table");
        assert!(matches!(
            parse_description("a person stands near zero plants"),
            Err(ParseError::InvalidQuantity { value: 0, .. })
        ));
    }

    #[test]
    fn local_graph_structure() {
        let g = build_local_graph(&one("a person sits on the chair near the table")).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert!(g.has_edge(HUMAN_NODE, "sit-on", "chair"));
        assert!(g.has_edge(HUMAN_NODE, "near", "table"));
        let g = build_local_graph(&one("a person stands by the window")).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert!(g.has_edge(HUMAN_NODE, "by", "window"));
        let g = build_local_graph(&one("a person stands near two plants")).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert!(g.has_edge(HUMAN_NODE, "near", "plant_0") && g.has_edge(HUMAN_NODE, "near", "plant_1"));
        assert_eq!(g.human_count(), 1);
    }

    #[test]
    fn quantity_expansion() {
        let t = Triplet::new("person", "near", "plant", Some(3));
        let e = quantity_expand(std::slice::from_ref(&t)).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e.iter().filter_map(|t| t.instance).collect::<Vec<_>>(), vec![0, 1, 2]);
        let plain = Triplet::new("person", "near", "plant", None);
        assert_eq!(quantity_expand(std::slice::from_ref(&plain)).unwrap(), vec![plain]);
        let zero = Triplet::new("person", "near", "plant", Some(0));
        assert!(quantity_expand(&[zero]).is_err());
    }
}
