//! Word-level tokenizer with character offsets, and the closed word tables
//! used by the grammar.

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokKind {
    Word,
    /// Sentence terminator: `.`, `!`, `?`, `;`.
    Stop,
    Comma,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Tok {
    pub text: String,
    /// Character offset of the first character.
    pub offset: usize,
    pub kind: TokKind,
}

pub(crate) fn tokenize(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut start = 0;
    let flush = |cur: &mut String, start: usize, out: &mut Vec<Tok>| {
        if !cur.is_empty() {
            out.push(Tok { text: std::mem::take(cur), offset: start, kind: TokKind::Word });
        }
    };
    for (i, ch) in text.chars().enumerate() {
        if ch.is_alphanumeric() || ch == '\'' || ch == '-' {
            if cur.is_empty() {
                start = i;
            }
            cur.extend(ch.to_lowercase());
            continue;
        }
        flush(&mut cur, start, &mut out);
        match ch {
            '.' | '!' | '?' | ';' => out.push(Tok { text: ch.to_string(), offset: i, kind: TokKind::Stop }),
            ',' => out.push(Tok { text: ch.to_string(), offset: i, kind: TokKind::Comma }),
            _ => {}
        }
    }
    flush(&mut cur, start, &mut out);
    out
}

pub(crate) const DETERMINERS: [&str; 9] = ["a", "an", "the", "another", "this", "that", "his", "her", "their"];
pub(crate) const SUBJECT_NOUNS: [&str; 8] = ["person", "man", "woman", "someone", "somebody", "boy", "girl", "human"];
pub(crate) const AUXILIARIES: [&str; 2] = ["is", "are"];
pub(crate) const OBJECT_PREPOSITIONS: [&str; 9] = ["on", "in", "at", "onto", "into", "against", "over", "to", "from"];

/// Relation phrases (surface words → canonical relation), longest first.
pub(crate) const RELATIONS: [(&[&str], &str); 15] = [
    (&["to", "the", "left", "of"], "left of"),
    (&["to", "the", "right", "of"], "right of"),
    (&["in", "front", "of"], "in front of"),
    (&["close", "to"], "close to"),
    (&["next", "to"], "next to"),
    (&["left", "of"], "left of"),
    (&["right", "of"], "right of"),
    (&["near"], "near"),
    (&["beside"], "beside"),
    (&["by"], "by"),
    (&["behind"], "behind"),
    (&["above"], "above"),
    (&["under"], "under"),
    (&["below"], "below"),
    (&["facing"], "facing"),
];

/// Canonical relations, for generators.
pub const RELATION_WORDS: [&str; 13] = [
    "near", "close to", "next to", "beside", "by", "in front of", "behind", "left of", "right of", "above", "under",
    "below", "facing",
];

pub(crate) const NUMBER_WORDS: [(&str, u32); 11] = [
    ("zero", 0),
    ("one", 1),
    ("two", 2),
    ("three", 3),
    ("four", 4),
    ("five", 5),
    ("six", 6),
    ("seven", 7),
    ("eight", 8),
    ("nine", 9),
    ("ten", 10),
];

pub(crate) fn quantity(word: &str) -> Option<u32> {
    NUMBER_WORDS
        .iter()
        .find(|(w, _)| *w == word)
        .map(|(_, n)| *n)
        .or_else(|| word.parse::<u32>().ok())
}

/// Verb stem → inflected forms. The stem is the action word except for
/// "straighten" (action "straight") and "turn" (needs "around").
pub(crate) const VERBS: [(&str, &[&str]); 23] = [
    ("sit", &["sit", "sits", "sitting", "sat"]),
    ("lean", &["lean", "leans", "leaning", "leaned", "leant"]),
    ("lie", &["lie", "lies", "lying", "lay", "lain"]),
    ("stretch", &["stretch", "stretches", "stretching", "stretched"]),
    ("bend", &["bend", "bends", "bending", "bent"]),
    ("straight", &["straighten", "straightens", "straightening", "straightened"]),
    ("supported", &["supported"]),
    ("raise", &["raise", "raises", "raising", "raised"]),
    ("put", &["put", "puts", "putting"]),
    ("touch", &["touch", "touches", "touching", "touched"]),
    ("use", &["use", "uses", "using", "used"]),
    ("hold", &["hold", "holds", "holding", "held"]),
    ("support", &["support", "supports", "supporting"]),
    ("type", &["type", "types", "typing", "typed"]),
    ("write", &["write", "writes", "writing", "wrote", "written"]),
    ("open", &["open", "opens", "opening", "opened"]),
    ("stand", &["stand", "stands", "standing", "stood"]),
    ("step", &["step", "steps", "stepping", "stepped"]),
    ("walk", &["walk", "walks", "walking", "walked"]),
    ("run", &["run", "runs", "running", "ran"]),
    ("move", &["move", "moves", "moving", "moved"]),
    ("crouch", &["crouch", "crouches", "crouching", "crouched"]),
    ("turn", &["turn", "turns", "turning", "turned"]),
];

/// Particles that combine with a stem into a multi-word action.
pub(crate) const PARTICLES: [(&str, &str, &str); 7] = [
    ("sit", "down", "sit down"),
    ("lie", "down", "lie down"),
    ("stand", "up", "stand up"),
    ("step", "up", "step up"),
    ("step", "down", "step down"),
    ("step", "back", "step back"),
    ("turn", "around", "turn around"),
];

pub(crate) fn verb_stem(word: &str) -> Option<&'static str> {
    VERBS.iter().find(|(_, forms)| forms.contains(&word)).map(|(s, _)| *s)
}

pub(crate) fn is_gerund(word: &str) -> bool {
    word.ends_with("ing") && verb_stem(word).is_some()
}

/// Rough lemma of a word outside the verb table, used in error reports.
pub(crate) fn guess_lemma(word: &str) -> String {
    if let Some(s) = word.strip_suffix("ies") {
        return format!("{s}y");
    }
    for suf in ["ches", "shes", "sses", "xes"] {
        if word.ends_with(suf) {
            return word[..word.len() - 2].to_string();
        }
    }
    if let Some(s) = word.strip_suffix("ing") {
        return s.to_string();
    }
    if let Some(s) = word.strip_suffix("ed") {
        return s.to_string();
    }
    if word.len() > 2 && !word.ends_with("ss") {
        if let Some(s) = word.strip_suffix('s') {
            return s.to_string();
        }
    }
    word.to_string()
}

/// Third-person singular form of a verb stem.
pub(crate) fn third_person(stem: &str) -> &'static str {
    VERBS
        .iter()
        .find(|(s, _)| *s == stem)
        .and_then(|(_, forms)| forms.iter().find(|f| f.ends_with('s') && **f != "supported").or(forms.first()))
        .copied()
        .unwrap_or("")
}

/// Present participle of a verb stem.
pub(crate) fn participle(stem: &str) -> &'static str {
    VERBS
        .iter()
        .find(|(s, _)| *s == stem)
        .and_then(|(_, forms)| forms.iter().find(|f| f.ends_with("ing")).or(forms.first()))
        .copied()
        .unwrap_or("")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_characters() {
        let toks = tokenize("Ä person sits, then.");
        assert_eq!(toks[0].text, "ä");
        assert_eq!(toks[1].offset, 2);
        assert_eq!(toks[3].kind, TokKind::Comma);
        assert_eq!(toks[5].kind, TokKind::Stop);
    }

    #[test]
    fn lemma_guessing() {
        assert_eq!(guess_lemma("flies"), "fly");
        assert_eq!(guess_lemma("jumps"), "jump");
        assert_eq!(guess_lemma("catches"), "catch");
    }

    #[test]
    fn inflections() {
        assert_eq!(third_person("crouch"), "crouches");
        assert_eq!(third_person("supported"), "supported");
        assert_eq!(participle("lie"), "lying");
        assert_eq!(verb_stem("sat"), Some("sit"));
    }
}
