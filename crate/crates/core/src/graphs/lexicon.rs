//! Concept lexicon: synonyms, inflected forms and hypernyms of indoor
//! object categories.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::Deserialize;

use super::GraphError;

static DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.toml");

#[derive(Debug, Clone, Deserialize)]
pub struct Concept {
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    #[serde(default)]
    pub lemmas: Vec<String>,
    #[serde(default)]
    pub hypernyms: Vec<String>,
}

impl Concept {
    /// Every surface form naming this concept.
    fn forms(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.name).chain(&self.synonyms).chain(&self.lemmas)
    }
}

#[derive(Debug, Deserialize)]
struct RawLexicon {
    format: u32,
    concepts: Vec<Concept>,
}

#[derive(Debug, Clone)]
pub struct ConceptLexicon {
    concepts: Vec<Concept>,
    /// Surface form → concept index.
    surface: HashMap<String, usize>,
}

impl ConceptLexicon {
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let raw: RawLexicon = toml::from_str(text).map_err(|e| GraphError::Lexicon(e.to_string()))?;
        if raw.format != 1 {
            return Err(GraphError::Lexicon(format!("unsupported format {}", raw.format)));
        }
        let mut surface: HashMap<String, usize> = HashMap::new();
        for (i, c) in raw.concepts.iter().enumerate() {
            if surface.get(&c.name).is_some_and(|&j| raw.concepts[j].name == c.name) {
                return Err(GraphError::Lexicon(format!("concept '{}' listed twice", c.name)));
            }
            // canonical names win over synonyms of other concepts
            surface.insert(c.name.clone(), i);
        }
        for (i, c) in raw.concepts.iter().enumerate() {
            for f in c.forms() {
                surface.entry(f.clone()).or_insert(i);
            }
        }
        Ok(Self { concepts: raw.concepts, surface })
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    fn lookup(&self, word: &str) -> Option<&Concept> {
        self.surface.get(word).map(|&i| &self.concepts[i])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.surface.contains_key(word)
    }

    /// Canonical concept name for a surface form ("couches" → "sofa").
    pub fn normalize(&self, word: &str) -> Option<&str> {
        self.lookup(word).map(|c| c.name.as_str())
    }

    /// 1-based semantic label of a concept.
    pub fn label_of(&self, word: &str) -> Option<u32> {
        self.surface.get(word).map(|&i| i as u32 + 1)
    }

    /// Index of the canonical concept, used for one-hot category features.
    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.surface.get(word).copied()
    }

    /// Whether concept `a` can stand for concept `b`: identical names, shared
    /// synonyms or lemmas (symmetric), or `b` is a hypernym of `a` (directed).
    /// Words outside the lexicon only match themselves.
    pub fn concepts_match(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        let (Some(ca), Some(cb)) = (self.lookup(a), self.lookup(b)) else {
            return false;
        };
        if ca.name == cb.name {
            return true;
        }
        let forms_b: HashSet<&String> = cb.forms().collect();
        if ca.forms().any(|f| forms_b.contains(f)) {
            return true;
        }
        ca.hypernyms.iter().any(|h| forms_b.contains(h))
    }
}

pub fn default_lexicon() -> &'static ConceptLexicon {
    static LEX: OnceLock<ConceptLexicon> = OnceLock::new();
    LEX.get_or_init(|| ConceptLexicon::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypernymy_is_directed() {
        let lex = default_lexicon();
        assert!(lex.concepts_match("armchair", "chair"));
        assert!(!lex.concepts_match("chair", "armchair"));
    }

    #[test]
    fn reflexive_and_disjoint() {
        let lex = default_lexicon();
        assert!(lex.concepts_match("chair", "chair"));
        assert!(!lex.concepts_match("chair", "table"));
        // sharing a hypernym is not enough
        assert!(!lex.concepts_match("sofa", "bed"));
        assert!(lex.concepts_match("zeppelin", "zeppelin"));
        assert!(!lex.concepts_match("zeppelin", "chair"));
    }

    #[test]
    fn synonyms_are_symmetric() {
        let lex = default_lexicon();
        assert!(lex.concepts_match("couch", "sofa"));
        assert!(lex.concepts_match("sofa", "couch"));
        assert_eq!(lex.normalize("couches"), Some("sofa"));
        assert_eq!(lex.normalize("plants"), Some("plant"));
        assert_eq!(lex.normalize("shelves"), Some("shelf"));
    }

    #[test]
    fn labels_are_positions() {
        let lex = default_lexicon();
        assert_eq!(lex.label_of("floor"), Some(1));
        assert_eq!(lex.label_of("couch"), lex.label_of("sofa"));
        assert!(lex.len() >= 60);
    }
}
