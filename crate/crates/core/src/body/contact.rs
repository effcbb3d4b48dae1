//! Action-driven contact labels over the template vertices.

use serde::{Deserialize, Serialize};

use super::{default_template, BodyError, BodyPart};
use crate::pla::{default_vocab, ActionMention, PlaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactRegion {
    Seat,
    LeftSole,
    RightSole,
    Back,
    LeftPalm,
    RightPalm,
    LeftForearm,
    RightForearm,
}

impl ContactRegion {
    pub fn name(self) -> &'static str {
        match self {
            ContactRegion::Seat => "seat",
            ContactRegion::LeftSole => "left_sole",
            ContactRegion::RightSole => "right_sole",
            ContactRegion::Back => "back",
            ContactRegion::LeftPalm => "left_palm",
            ContactRegion::RightPalm => "right_palm",
            ContactRegion::LeftForearm => "left_forearm",
            ContactRegion::RightForearm => "right_forearm",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactLabels {
    pub labels: Vec<bool>,
    pub tags: Vec<Option<ContactRegion>>,
}

impl ContactLabels {
    pub fn empty(n: usize) -> Self {
        Self { labels: vec![false; n], tags: vec![None; n] }
    }

    pub fn count(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i]).collect()
    }

    fn mark(&mut self, region: ContactRegion) {
        for &v in default_template().region(region.name()) {
            self.labels[v] = true;
            self.tags[v].get_or_insert(region);
        }
    }
}

const LOCOMOTION: [&str; 11] =
    ["stand", "stand up", "step", "step up", "step down", "step back", "walk", "run", "move", "crouch", "turn around"];
const HAND_USE: [&str; 7] = ["touch", "use", "hold", "support", "type", "write", "open"];

fn regions_for(m: &ActionMention) -> Result<Vec<ContactRegion>, BodyError> {
    let parts = default_vocab().part_of(m).map_err(|e| match e {
        PlaError::UnknownAction(a) => BodyError::UnknownAction(a),
        other => BodyError::Template(other.to_string()),
    })?;
    let a = m.action.as_str();
    let mut out = Vec::new();
    let has = |p: BodyPart| parts.contains(&p);
    if a == "sit" || a == "sit down" {
        out.push(ContactRegion::Seat);
    } else if a == "lie" || a == "lie down" {
        out.push(ContactRegion::Back);
    } else if LOCOMOTION.contains(&a) {
        if has(BodyPart::LeftLower) {
            out.push(ContactRegion::LeftSole);
        }
        if has(BodyPart::RightLower) {
            out.push(ContactRegion::RightSole);
        }
    } else if HAND_USE.contains(&a) {
        if has(BodyPart::LeftHand) {
            out.push(ContactRegion::LeftPalm);
        }
        if has(BodyPart::RightHand) {
            out.push(ContactRegion::RightPalm);
        }
    } else if a == "supported" {
        if has(BodyPart::LeftArm) || has(BodyPart::LeftHand) {
            out.extend([ContactRegion::LeftForearm, ContactRegion::LeftPalm]);
        }
        if has(BodyPart::RightArm) || has(BodyPart::RightHand) {
            out.extend([ContactRegion::RightForearm, ContactRegion::RightPalm]);
        }
    }
    Ok(out)
}

/// Contact vertices implied by the actions. Actions without a supporting
/// surface (lean, head movements, arm gestures) add nothing.
pub fn assign_contact_labels(actions: &[ActionMention]) -> Result<ContactLabels, BodyError> {
    let mut labels = ContactLabels::empty(default_template().vertex_count);
    for m in actions {
        for r in regions_for(m)? {
            labels.mark(r);
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{body_mesh, BodyParams};
    use crate::pla::Side;

    fn labels(actions: &[&str]) -> ContactLabels {
        let ms: Vec<_> = actions.iter().map(|a| ActionMention::new(*a)).collect();
        assign_contact_labels(&ms).unwrap()
    }

    #[test]
    fn sitting_labels_seat_only() {
        let l = labels(&["sit"]);
        assert!(l.count() > 0);
        assert!(l.tags.iter().flatten().all(|t| *t == ContactRegion::Seat));
        assert_eq!(l, labels(&["sit down"]));
    }

    #[test]
    fn standing_labels_both_soles() {
        let l = labels(&["stand"]);
        let tags: std::collections::HashSet<_> = l.tags.iter().flatten().copied().collect();
        assert_eq!(tags, [ContactRegion::LeftSole, ContactRegion::RightSole].into_iter().collect());
    }

    #[test]
    fn rest_soles_are_lowest_vertices() {
        let mesh = body_mesh(&BodyParams::rest()).unwrap();
        let l = labels(&["stand"]);
        let min_z = mesh.vertices.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
        for i in l.indices() {
            assert!((mesh.vertices[i].z - min_z).abs() < 1e-9);
        }
    }

    #[test]
    fn sided_hand_contact() {
        let m = ActionMention::new("touch").with_side(Side::Left);
        let l = assign_contact_labels(&[m]).unwrap();
        assert!(l.tags.iter().flatten().all(|t| *t == ContactRegion::LeftPalm));
        assert!(l.count() > 0);
    }

    #[test]
    fn gestures_have_no_contact() {
        assert_eq!(labels(&["lean", "head down", "stretch"]).count(), 0);
    }

    #[test]
    fn labels_are_deterministic_and_unknown_fails() {
        assert_eq!(labels(&["lie", "touch"]), labels(&["lie", "touch"]));
        assert!(matches!(
            assign_contact_labels(&[ActionMention::new("fly")]),
            Err(BodyError::UnknownAction(_))
        ));
    }
}
