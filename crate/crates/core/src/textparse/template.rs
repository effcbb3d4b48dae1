//! Random descriptions in the template grammar, with their expected parse.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lexer::{self, NUMBER_WORDS, PARTICLES, RELATION_WORDS};
use super::{AnchorClass, ParsedInteraction};
use crate::graphs::default_lexicon;
use crate::pla::{default_vocab, ActionMention, Limb, PartGroup, Side};

const SUBJECTS: [&str; 6] = ["person", "man", "woman", "someone", "boy", "girl"];
const SEATS: [&str; 7] = ["chair", "armchair", "office chair", "sofa", "bench", "stool", "bed"];
const GERUNDS: [&str; 6] = ["touch", "use", "hold", "type", "write", "open"];

fn concepts() -> Vec<&'static str> {
    default_lexicon()
        .concepts()
        .iter()
        .map(|c| c.name.as_str())
        .filter(|n| !matches!(*n, "floor" | "person"))
        .collect()
}

fn article(word: &str) -> &'static str {
    if word.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

fn plural(concept: &str) -> String {
    default_lexicon()
        .concepts()
        .iter()
        .find(|c| c.name == concept)
        .and_then(|c| c.lemmas.first().cloned())
        .unwrap_or_else(|| concept.to_string())
}

/// Surface form of an action in the third person ("sits down").
fn verb_phrase(action: &str) -> String {
    if let Some((stem, p, _)) = PARTICLES.iter().find(|(_, _, a)| *a == action) {
        return format!("{} {p}", lexer::third_person(stem));
    }
    if action == "supported" {
        return "is supported".into();
    }
    lexer::third_person(action).to_string()
}

/// Random interaction the renderer can express. Verbs come first, then an
/// optional gerund action and an optional head action.
pub fn random_interaction(rng: &mut impl Rng) -> ParsedInteraction {
    let vocab = default_vocab();
    let verbs: Vec<&str> = vocab
        .actions()
        .iter()
        .map(String::as_str)
        .filter(|a| !a.starts_with("head ") && (a.contains(' ') || lexer::third_person(a) != ""))
        .collect();
    let concepts = concepts();
    let n_verbs = if rng.random_bool(0.3) { 2 } else { 1 };
    let mut actions: Vec<ActionMention> = Vec::new();
    while actions.len() < n_verbs {
        let a = *verbs.choose(rng).expect("non-empty vocabulary");
        if !actions.iter().any(|m| m.action == a) {
            actions.push(ActionMention::new(a));
        }
    }
    let first = actions[0].action.clone();
    let (object_class, object_relation) = if !rng.random_bool(0.75) {
        (None, None)
    } else if first.starts_with("sit") || first.starts_with("lie") {
        (Some(SEATS.choose(rng).unwrap().to_string()), Some("on".to_string()))
    } else if rng.random_bool(0.2) {
        (Some("floor".to_string()), Some("on".to_string()))
    } else {
        let prep = ["at", "on", "against", "to", "in"].choose(rng).unwrap().to_string();
        let prep = rng.random_bool(0.7).then_some(prep);
        (Some(concepts.choose(rng).unwrap().to_string()), prep)
    };
    let mut anchors = Vec::new();
    let mut spatial_relation = None;
    for _ in 0..rng.random_range(0..=2) {
        let rel = *RELATION_WORDS.choose(rng).unwrap();
        spatial_relation.get_or_insert_with(|| rel.to_string());
        for _ in 0..rng.random_range(1..=2) {
            let quantity = rng.random_bool(0.4).then(|| rng.random_range(1..=4));
            anchors.push(AnchorClass { concept: concepts.choose(rng).unwrap().to_string(), quantity, relation: rel.into() });
        }
    }
    if rng.random_bool(0.2) {
        let g = *GERUNDS.choose(rng).unwrap();
        if !actions.iter().any(|m| m.action == g) {
            actions.push(ActionMention::new(g));
            anchors.push(AnchorClass { concept: concepts.choose(rng).unwrap().to_string(), quantity: None, relation: g.into() });
        }
    }
    if rng.random_bool(0.15) {
        let dir = ["up", "down", "left", "right"].choose(rng).unwrap();
        actions.push(ActionMention::new(format!("head {dir}")));
    }
    if rng.random_bool(0.3) {
        let limb = *[Limb::Hand, Limb::Arm, Limb::Leg].choose(rng).unwrap();
        let group = match limb {
            Limb::Hand => PartGroup::Hand,
            Limb::Arm => PartGroup::Arm,
            Limb::Leg => PartGroup::Lower,
        };
        if let Some(i) = actions.iter().rposition(|m| vocab.groups(&m.action).contains(&group)) {
            actions[i].side = Some(if rng.random_bool(0.5) { Side::Left } else { Side::Right });
            actions[i].limb = Some(limb);
        }
    }
    ParsedInteraction {
        subject: SUBJECTS.choose(rng).unwrap().to_string(),
        actions,
        object_class,
        object_relation,
        spatial_relation,
        anchors,
    }
}

fn noun_phrase(concept: &str, quantity: Option<u32>, rng: &mut impl Rng) -> String {
    match quantity {
        None if rng.random_bool(0.5) => format!("the {concept}"),
        None => format!("{} {concept}", article(concept)),
        Some(k) => {
            let number = match NUMBER_WORDS.iter().find(|(_, n)| *n == k) {
                Some((w, _)) if rng.random_bool(0.7) => w.to_string(),
                _ => k.to_string(),
            };
            let noun = if k == 1 { concept.to_string() } else { plural(concept) };
            format!("{number} {noun}")
        }
    }
}

fn relation_phrase(rel: &str, rng: &mut impl Rng) -> String {
    match rel {
        "left of" | "right of" if rng.random_bool(0.5) => format!("to the {rel}"),
        _ => rel.to_string(),
    }
}

/// Renders one clause. `lead` starts a description, otherwise the subject
/// may read "another person".
pub fn render_interaction(p: &ParsedInteraction, lead: bool, rng: &mut impl Rng) -> String {
    let gerund = |a: &str| p.anchors.iter().any(|x| x.relation == a);
    let gerund_action = |r: &str| p.actions.iter().any(|m| m.action == r);
    let mut words = Vec::new();
    let subject = if !lead && p.subject == "person" && rng.random_bool(0.5) {
        "another person".to_string()
    } else if p.subject == "someone" {
        "someone".to_string()
    } else {
        format!("{} {}", ["a", "the"].choose(rng).unwrap(), p.subject)
    };
    words.push(subject);
    let verbs: Vec<&ActionMention> =
        p.actions.iter().filter(|m| !m.action.starts_with("head ") && !gerund(&m.action)).collect();
    for (i, m) in verbs.iter().enumerate() {
        if i > 0 {
            words.push("and".into());
        }
        words.push(verb_phrase(&m.action));
    }
    if let Some(obj) = &p.object_class {
        if let Some(prep) = &p.object_relation {
            words.push(prep.clone());
        }
        words.push(noun_phrase(obj, None, rng));
    }
    let mut last_rel: Option<&str> = None;
    for a in p.anchors.iter().filter(|a| !gerund_action(&a.relation)) {
        if last_rel == Some(a.relation.as_str()) {
            words.push("and".into());
        } else {
            if last_rel.is_some() && rng.random_bool(0.5) {
                words.push("and".into());
            }
            words.push(relation_phrase(&a.relation, rng));
            last_rel = Some(&a.relation);
        }
        words.push(noun_phrase(&a.concept, a.quantity, rng));
    }
    for m in p.actions.iter().filter(|m| gerund(&m.action)) {
        words.push(lexer::participle(&m.action).to_string());
        for (i, a) in p.anchors.iter().filter(|a| a.relation == m.action).enumerate() {
            if i > 0 {
                words.push("and".into());
            }
            words.push(noun_phrase(&a.concept, a.quantity, rng));
        }
    }
    for m in p.actions.iter().filter(|m| m.action.starts_with("head ")) {
        words.push(format!("with {} {}", ["the", "his", "her"].choose(rng).unwrap(), m.action));
    }
    for m in &p.actions {
        if let Some(limb) = m.limb {
            let side = match m.side {
                Some(Side::Left) => "left ",
                Some(Side::Right) => "right ",
                None => "",
            };
            let limb = match limb {
                Limb::Hand => "hand",
                Limb::Arm => "arm",
                Limb::Leg => ["leg", "foot"].choose(rng).unwrap(),
            };
            words.push(format!("with the {side}{limb}"));
        }
    }
    words.join(" ")
}

/// Joins clauses with sentence breaks, "while" or "and".
pub fn render_description(ps: &[ParsedInteraction], rng: &mut impl Rng) -> String {
    let mut out = String::new();
    for (i, p) in ps.iter().enumerate() {
        let clause = render_interaction(p, i == 0, rng);
        if i == 0 {
            out.push_str(&capitalize(&clause));
            continue;
        }
        match rng.random_range(0..3) {
            0 => {
                out.push_str(". ");
                out.push_str(&capitalize(&clause));
            }
            1 => {
                out.push_str(" while ");
                out.push_str(&clause);
            }
            _ => {
                out.push_str(", and ");
                out.push_str(&clause);
            }
        }
    }
    out.push('.');
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// `n` random descriptions of one to three people with their expected parses.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<(String, Vec<ParsedInteraction>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let people = *[1, 1, 1, 2, 2, 3].choose(&mut rng).unwrap();
            let ps: Vec<ParsedInteraction> = (0..people).map(|_| random_interaction(&mut rng)).collect();
            (render_description(&ps, &mut rng), ps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textparse::parse_description;

    #[test]
    fn corpus_round_trips() {
        for (text, expected) in generate_corpus(500, 7) {
            let parsed = parse_description(&text).unwrap_or_else(|e| panic!("{text}: {e}"));
            assert_eq!(parsed, expected, "{text}");
        }
    }

    #[test]
    fn plurals_normalize_back() {
        for c in concepts() {
            assert_eq!(default_lexicon().normalize(&plural(c)), Some(c), "{c}");
        }
    }
}
