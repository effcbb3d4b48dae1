//! Part-level actions: vocabulary, action-to-part mapping, action tokens and
//! the attention mask that ties action tokens to the parts they govern.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Graph, Mat, NodeId};
use crate::body::BodyPart;
use crate::nn::{self, Bound, ParamStore};

pub const ACTION_FEATURE_DIM: usize = 64;

static DEFAULT_VOCAB: &str = include_str!("../../data/actions.toml");

#[derive(Debug, Error)]
pub enum PlaError {
    #[error("unknown action '{0}'")]
    UnknownAction(String),
    #[error("empty action list")]
    EmptyActions,
    #[error("action vocabulary: {0}")]
    Vocabulary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Limb named alongside an action ("with the left hand").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limb {
    Hand,
    Arm,
    Leg,
}

/// Row of the part/action table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartGroup {
    Head,
    Torso,
    Arm,
    Hand,
    Lower,
}

impl PartGroup {
    fn parts(self, side: Option<Side>) -> Vec<BodyPart> {
        let pick = |l, r| match side {
            Some(Side::Left) => vec![l],
            Some(Side::Right) => vec![r],
            None => vec![l, r],
        };
        match self {
            PartGroup::Head => vec![BodyPart::Head],
            PartGroup::Torso => vec![BodyPart::Torso],
            PartGroup::Arm => pick(BodyPart::LeftArm, BodyPart::RightArm),
            PartGroup::Hand => pick(BodyPart::LeftHand, BodyPart::RightHand),
            PartGroup::Lower => pick(BodyPart::LeftLower, BodyPart::RightLower),
        }
    }

    fn matches(self, limb: Limb) -> bool {
        matches!(
            (self, limb),
            (PartGroup::Arm, Limb::Arm) | (PartGroup::Hand, Limb::Hand) | (PartGroup::Lower, Limb::Leg)
        )
    }
}

/// An action as it appears in a description, with optional side and limb
/// qualifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionMention {
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limb: Option<Limb>,
}

impl ActionMention {
    pub fn new(action: impl Into<String>) -> Self {
        Self { action: action.into(), side: None, limb: None }
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = Some(side);
        self
    }

    pub fn with_limb(mut self, limb: Limb) -> Self {
        self.limb = Some(limb);
        self
    }
}

#[derive(Debug, Deserialize)]
struct RawVocab {
    format: u32,
    rows: Vec<RawRow>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    part: PartGroup,
    sided: bool,
    actions: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ActionVocab {
    /// Distinct actions in first-appearance order; the index is the one-hot slot.
    actions: Vec<String>,
    rows: Vec<(PartGroup, Vec<String>)>,
}

impl ActionVocab {
    pub fn parse(text: &str) -> Result<Self, PlaError> {
        let raw: RawVocab = toml::from_str(text).map_err(|e| PlaError::Vocabulary(e.to_string()))?;
        if raw.format != 1 {
            return Err(PlaError::Vocabulary(format!("unsupported format {}", raw.format)));
        }
        let mut actions: Vec<String> = Vec::new();
        let mut rows = Vec::new();
        for row in raw.rows {
            let sided = matches!(row.part, PartGroup::Arm | PartGroup::Hand | PartGroup::Lower);
            if sided != row.sided {
                return Err(PlaError::Vocabulary(format!("row {:?} has the wrong `sided` flag", row.part)));
            }
            for a in &row.actions {
                if !actions.contains(a) {
                    actions.push(a.clone());
                }
            }
            rows.push((row.part, row.actions));
        }
        Ok(Self { actions, rows })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn index_of(&self, action: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == action)
    }

    pub fn contains(&self, action: &str) -> bool {
        self.index_of(action).is_some()
    }

    /// Rows of the table that list `action`.
    pub fn groups(&self, action: &str) -> Vec<PartGroup> {
        self.rows.iter().filter(|(_, acts)| acts.iter().any(|a| a == action)).map(|(g, _)| *g).collect()
    }

    /// Body parts governed by the mention. A limb hint narrows ambiguous
    /// actions to its row; a side hint picks one side of sided rows. Without
    /// a side, arm and hand rows default to the right side and the lower row
    /// governs both legs.
    pub fn part_of(&self, m: &ActionMention) -> Result<Vec<BodyPart>, PlaError> {
        let mut groups = self.groups(&m.action);
        if groups.is_empty() {
            return Err(PlaError::UnknownAction(m.action.clone()));
        }
        if let Some(limb) = m.limb {
            if groups.iter().any(|g| g.matches(limb)) {
                groups.retain(|g| g.matches(limb));
            }
        }
        let mut parts = BTreeSet::new();
        for g in groups {
            let side = match (g, m.side) {
                (_, Some(s)) => Some(s),
                (PartGroup::Arm | PartGroup::Hand, None) => Some(Side::Right),
                _ => None,
            };
            parts.extend(g.parts(side));
        }
        Ok(parts.into_iter().collect())
    }
}

pub fn default_vocab() -> &'static ActionVocab {
    static VOCAB: OnceLock<ActionVocab> = OnceLock::new();
    VOCAB.get_or_init(|| ActionVocab::parse(DEFAULT_VOCAB).expect("bundled action vocabulary is valid"))
}

/// One (action, part) pair. `scope` lists every part the action governs,
/// which is what the token may attend to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionToken {
    pub action: usize,
    pub part: BodyPart,
    pub scope: Vec<BodyPart>,
}

pub fn action_tokens(vocab: &ActionVocab, mentions: &[ActionMention]) -> Result<Vec<ActionToken>, PlaError> {
    let mut out: Vec<ActionToken> = Vec::new();
    for m in mentions {
        let action = vocab.index_of(&m.action).ok_or_else(|| PlaError::UnknownAction(m.action.clone()))?;
        let scope = vocab.part_of(m)?;
        for &part in &scope {
            if !out.iter().any(|t| t.action == action && t.part == part) {
                out.push(ActionToken { action, part, scope: scope.clone() });
            }
        }
    }
    Ok(out)
}

/// One-hot action ⊕ one-hot part, one row per token.
pub fn token_features(vocab: &ActionVocab, tokens: &[ActionToken]) -> Mat {
    let n = vocab.len();
    let mut m = Mat::zeros((tokens.len(), n + BodyPart::ALL.len()));
    for (i, t) in tokens.iter().enumerate() {
        m[[i, t.action]] = 1.0;
        m[[i, n + t.part.index()]] = 1.0;
    }
    m
}

/// `allowed[i][j]` is true when action token `i` may attend to part token
/// `parts[j]`.
pub fn attention_mask(tokens: &[ActionToken], parts: &[BodyPart]) -> Result<Array2<bool>, PlaError> {
    if tokens.is_empty() {
        return Err(PlaError::EmptyActions);
    }
    Ok(Array2::from_shape_fn((tokens.len(), parts.len()), |(i, j)| tokens[i].scope.contains(&parts[j])))
}

pub fn init_action_encoder(store: &mut ParamStore, prefix: &str, vocab: &ActionVocab, rng: &mut impl Rng) {
    let d_in = vocab.len() + BodyPart::ALL.len();
    nn::init_mlp2(store, &format!("{prefix}.mlp"), d_in, ACTION_FEATURE_DIM, ACTION_FEATURE_DIM, rng);
}

/// Per-token two-layer feed-forward network, mean-pooled to a 1×64 feature.
pub fn encode_actions(
    g: &mut Graph,
    p: &Bound,
    prefix: &str,
    vocab: &ActionVocab,
    tokens: &[ActionToken],
) -> Result<NodeId, PlaError> {
    if tokens.is_empty() {
        return Err(PlaError::EmptyActions);
    }
    let x = g.constant(token_features(vocab, tokens));
    let h = nn::mlp2(g, p, &format!("{prefix}.mlp"), x);
    Ok(g.mean_rows(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parts(a: &str) -> Vec<BodyPart> {
        default_vocab().part_of(&ActionMention::new(a)).unwrap()
    }

    #[test]
    fn table_rows_map_to_parts() {
        use BodyPart::*;
        assert_eq!(parts("head down"), vec![Head]);
        assert_eq!(parts("sit"), vec![Torso]);
        assert_eq!(parts("lie down"), vec![Torso]);
        assert_eq!(parts("stretch"), vec![RightArm]);
        assert_eq!(parts("touch"), vec![RightHand]);
        assert_eq!(parts("walk"), vec![LeftLower, RightLower]);
        assert_eq!(parts("turn around"), vec![LeftLower, RightLower]);
    }

    #[test]
    fn ambiguous_actions_cover_every_row() {
        use BodyPart::*;
        assert_eq!(parts("supported"), vec![RightArm, RightHand]);
        assert_eq!(parts("raise"), vec![RightArm, LeftLower, RightLower]);
    }

    #[test]
    fn hints_disambiguate() {
        use BodyPart::*;
        let v = default_vocab();
        let m = ActionMention::new("raise").with_side(Side::Left).with_limb(Limb::Leg);
        assert_eq!(v.part_of(&m).unwrap(), vec![LeftLower]);
        let m = ActionMention::new("touch").with_side(Side::Left);
        assert_eq!(v.part_of(&m).unwrap(), vec![LeftHand]);
        let m = ActionMention::new("put").with_limb(Limb::Arm);
        assert_eq!(v.part_of(&m).unwrap(), vec![RightArm]);
    }

    #[test]
    fn unknown_action_is_an_error() {
        assert!(matches!(default_vocab().part_of(&ActionMention::new("juggle")), Err(PlaError::UnknownAction(_))));
    }

    #[test]
    fn tokens_pair_actions_with_parts() {
        let v = default_vocab();
        let toks = action_tokens(v, &[ActionMention::new("sit"), ActionMention::new("touch").with_side(Side::Left)]).unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].part, BodyPart::Torso);
        assert_eq!(toks[1].part, BodyPart::LeftHand);
        let f = token_features(v, &toks);
        assert_eq!(f.row(0).sum(), 2.0);
        let mask = attention_mask(&toks, &BodyPart::ALL).unwrap();
        assert_eq!(mask.row(0).iter().filter(|x| **x).count(), 1);
        assert_eq!(mask.row(1).iter().filter(|x| **x).count(), 1);
        assert!(mask[[1, BodyPart::LeftHand.index()]]);
        assert!(matches!(attention_mask(&[], &BodyPart::ALL), Err(PlaError::EmptyActions)));
    }

    #[test]
    fn crouch_mask_allows_only_legs() {
        let toks = action_tokens(default_vocab(), &[ActionMention::new("crouch")]).unwrap();
        let mask = attention_mask(&toks, &BodyPart::ALL).unwrap();
        for row in mask.rows() {
            for (j, part) in BodyPart::ALL.iter().enumerate() {
                let leg = matches!(part, BodyPart::LeftLower | BodyPart::RightLower);
                assert_eq!(row[j], leg);
            }
        }
    }

    #[test]
    fn encoder_output_shape() {
        let v = default_vocab();
        let mut store = ParamStore::new();
        init_action_encoder(&mut store, "act", v, &mut ChaCha8Rng::seed_from_u64(0));
        let mut g = Graph::new();
        let p = store.bind(&mut g, false);
        let toks = action_tokens(v, &[ActionMention::new("walk")]).unwrap();
        let f = encode_actions(&mut g, &p, "act", v, &toks).unwrap();
        assert_eq!(g.shape(f), (1, ACTION_FEATURE_DIM));
        assert!(encode_actions(&mut g, &p, "act", v, &[]).is_err());
    }

    #[test]
    fn encoder_is_order_invariant_and_discriminative() {
        let v = default_vocab();
        let mut store = ParamStore::new();
        init_action_encoder(&mut store, "act", v, &mut ChaCha8Rng::seed_from_u64(4));
        let run = |ms: &[ActionMention]| {
            let mut g = Graph::new();
            let p = store.bind(&mut g, false);
            let toks = action_tokens(v, ms).unwrap();
            let f = encode_actions(&mut g, &p, "act", v, &toks).unwrap();
            g.value(f).clone()
        };
        let a = run(&[ActionMention::new("sit"), ActionMention::new("touch")]);
        let b = run(&[ActionMention::new("touch"), ActionMention::new("sit")]);
        assert!((&a - &b).iter().all(|d| d.abs() < 1e-12));
        let sit = run(&[ActionMention::new("sit")]);
        let lie = run(&[ActionMention::new("lie")]);
        assert!((&sit - &lie).iter().any(|d| d.abs() > 1e-6));
    }
}
