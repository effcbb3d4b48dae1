//! Procedural training data: furnished rooms, rule-posed bodies placed
//! against one object, and a description of the placement in the template
//! grammar. Every sample is checked before it is emitted.
//!
//! Furniture fronts face −y in the object frame; the body template faces +y,
//! so a sitter is yawed by π relative to the seat.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{contact_score, non_collision_score};
use super::relations::{grounded, relation_checks};
use super::PipelineError;
use crate::body::{assign_contact_labels, body_mesh, default_template, matrix_to_rot6d, BodyMesh, BodyParams, ContactLabels, HAND_DIM};
use crate::generator::TrainingSample;
use crate::geom::{Mat3, Vec3};
use crate::graphs::{default_lexicon, match_and_insert_human, Binding, SceneGraph};
use crate::pla::ActionMention;
use crate::scene::{
    build_scene, global_scene_graph, pair_relations, scene_to_document, FloorExtent, GsgThresholds, PrimitiveSpec, Scene,
    SceneObject, REL_BEHIND, REL_FRONT, REL_LEFT, REL_NEAR, REL_RIGHT,
};
use crate::textparse::{build_local_graph, parse_description, render_description, AnchorClass, ParsedInteraction};

/// Height (m) left between a settled support region and its surface.
const SETTLE_GAP: f64 = 0.001;
/// The seat region must end within this distance (m) of the seat.
const SEAT_TOLERANCE: f64 = 0.01;
const SUBJECTS: [&str; 6] = ["person", "man", "woman", "someone", "boy", "girl"];
const NEAR_WORDS: [&str; 5] = ["near", "close to", "next to", "beside", "by"];
const HALF_FLOOR: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseKind {
    Sit,
    Lie,
    Stand,
    Crouch,
}

impl PoseKind {
    pub const ALL: [PoseKind; 4] = [PoseKind::Sit, PoseKind::Lie, PoseKind::Stand, PoseKind::Crouch];

    fn verbs(self) -> &'static [&'static str] {
        match self {
            PoseKind::Sit => &["sit", "sit down"],
            PoseKind::Lie => &["lie", "lie down"],
            PoseKind::Stand => &["stand", "stand up"],
            PoseKind::Crouch => &["crouch"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneTemplate {
    Office,
    Dining,
    Living,
    Bedroom,
    Kitchen,
    Study,
    Hallway,
    Lounge,
    Workshop,
    Reading,
}

impl SceneTemplate {
    pub const ALL: [SceneTemplate; 10] = [
        SceneTemplate::Office,
        SceneTemplate::Dining,
        SceneTemplate::Living,
        SceneTemplate::Bedroom,
        SceneTemplate::Kitchen,
        SceneTemplate::Study,
        SceneTemplate::Hallway,
        SceneTemplate::Lounge,
        SceneTemplate::Workshop,
        SceneTemplate::Reading,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub samples: usize,
    /// Size of the held-out split the CLI writes next to the training set.
    pub eval_samples: usize,
    pub templates: Vec<SceneTemplate>,
    pub poses: Vec<PoseKind>,
    /// Placement attempts per sample before it is skipped.
    pub retries: usize,
    /// Bound (rad) of the uniform noise on head, arm and spine joints.
    pub jitter: f64,
    pub contact_eps: f64,
    pub min_contact: f64,
    pub min_non_collision: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            eval_samples: 200,
            templates: SceneTemplate::ALL.to_vec(),
            poses: PoseKind::ALL.to_vec(),
            retries: 20,
            jitter: 0.15,
            contact_eps: 0.02,
            min_contact: 0.9,
            min_non_collision: 0.99,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<(), PipelineError> {
        if self.templates.is_empty() || self.poses.is_empty() {
            return Err(PipelineError::Config("synthesis needs at least one template and one pose".into()));
        }
        if self.retries == 0 {
            return Err(PipelineError::Config("retries must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub template: SceneTemplate,
    pub pose: PoseKind,
    /// Object the body was placed against.
    pub target: String,
    pub scene: Arc<Scene>,
    pub text: String,
    pub params: BodyParams,
}

impl SynthSample {
    pub fn training(&self) -> TrainingSample {
        TrainingSample { scene: self.scene.clone(), text: self.text.clone(), params: self.params.clone() }
    }
}

/// Where a person can sit, in the object frame: pelvis at (x, y) with
/// |x| ≤ x_half, facing −y.
#[derive(Debug, Clone, Copy)]
struct Seat {
    x_half: f64,
    y: f64,
}

/// Where a person can lie on the back: head along `head` (object frame),
/// pelvis inside the given ranges.
#[derive(Debug, Clone, Copy)]
struct Berth {
    head: [f64; 2],
    x: (f64, f64),
    y: (f64, f64),
}

struct Kit {
    category: &'static str,
    specs: Vec<PrimitiveSpec>,
    seat: Option<Seat>,
    berths: Vec<Berth>,
}

impl Kit {
    fn plain(category: &'static str, specs: Vec<PrimitiveSpec>) -> Self {
        Self { category, specs, seat: None, berths: Vec::new() }
    }
}

struct Furniture {
    object: SceneObject,
    seat: Option<Seat>,
    berths: Vec<Berth>,
}

/// Distance from a backrest's front face to the pelvis joint of a sitter:
/// spine radius plus clearance.
const BACK_CLEARANCE: f64 = 0.135;
/// Distance from the rear edge of a backless seat to the pelvis joint.
const REAR_CLEARANCE: f64 = 0.09;
/// Pelvis-to-knee reach of a sitter plus shin clearance past the front edge.
const KNEE_REACH: f64 = 0.42 - 0.07;

fn block(category: &'static str, w: f64, d: f64, h: f64, z0: f64) -> Kit {
    Kit::plain(category, vec![PrimitiveSpec::cuboid([0.0, 0.0, z0 + h / 2.0], [w, d, h])])
}

fn column(category: &'static str, r: f64, h: f64, z0: f64) -> Kit {
    Kit::plain(category, vec![PrimitiveSpec::cylinder([0.0, 0.0, z0 + h / 2.0], r, h)])
}

/// Top slab on four legs, so legs fit underneath.
fn table(category: &'static str, w: f64, d: f64, h: f64) -> Kit {
    let top = 0.04;
    let mut specs = vec![PrimitiveSpec::cuboid([0.0, 0.0, h - top / 2.0], [w, d, top])];
    for (sx, sy) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
        let (x, y) = (sx * (w / 2.0 - 0.04), sy * (d / 2.0 - 0.04));
        specs.push(PrimitiveSpec::cuboid([x, y, (h - top) / 2.0], [0.05, 0.05, h - top]));
    }
    Kit::plain(category, specs)
}

fn backed_seat(category: &'static str, w: f64, d: f64, seat_h: f64, back_t: f64, back_h: f64, x_half: f64) -> Kit {
    let back_y = d / 2.0 - back_t / 2.0;
    let specs = vec![
        PrimitiveSpec::cuboid([0.0, 0.0, seat_h / 2.0], [w, d, seat_h]),
        PrimitiveSpec::cuboid([0.0, back_y, seat_h + back_h / 2.0], [w, back_t, back_h]),
    ];
    let seat = Seat { x_half, y: d / 2.0 - back_t - BACK_CLEARANCE };
    Kit { category, specs, seat: Some(seat), berths: Vec::new() }
}

fn backless_seat(category: &'static str, w: f64, d: f64, h: f64, x_half: f64) -> Kit {
    let mut k = block(category, w, d, h, 0.0);
    // deep seats pull the sitter forward so the shins clear the front edge
    k.seat = Some(Seat { x_half, y: (d / 2.0 - REAR_CLEARANCE).min(KNEE_REACH - d / 2.0) });
    k
}

fn chair(rng: &mut impl Rng) -> Kit {
    let w = rng.random_range(0.45..0.5);
    backed_seat("chair", w, w, rng.random_range(0.43..0.48), 0.05, 0.4, 0.02)
}

fn office_chair(rng: &mut impl Rng) -> Kit {
    backed_seat("office chair", 0.5, 0.5, rng.random_range(0.45..0.5), 0.06, 0.45, 0.02)
}

fn armchair(rng: &mut impl Rng) -> Kit {
    let seat_h = rng.random_range(0.42..0.45);
    let mut k = backed_seat("armchair", 0.8, 0.6, seat_h, 0.14, 0.4, 0.03);
    for sx in [-1.0, 1.0] {
        k.specs.push(PrimitiveSpec::cuboid([sx * 0.34, 0.0, seat_h + 0.075], [0.12, 0.6, 0.15]));
    }
    k
}

fn sofa() -> Kit {
    let mut k = backed_seat("sofa", 2.0, 0.65, 0.42, 0.15, 0.45, 0.5);
    // lying across the seat, pressed a little toward the front edge
    let y = (-0.14, -0.11);
    k.berths = vec![
        Berth { head: [1.0, 0.0], x: (-0.05, 0.18), y },
        Berth { head: [-1.0, 0.0], x: (-0.18, 0.05), y },
    ];
    k
}

fn bed() -> Kit {
    let (w, l, h) = (1.6, 2.1, 0.5);
    let specs = vec![
        PrimitiveSpec::cuboid([0.0, 0.0, h / 2.0], [w, l, h]),
        PrimitiveSpec::cuboid([0.0, l / 2.0 - 0.025, 0.5], [w, 0.05, 1.0]),
    ];
    Kit {
        category: "bed",
        specs,
        seat: Some(Seat { x_half: 0.5, y: -l / 2.0 + 0.3 }),
        berths: vec![Berth { head: [0.0, 1.0], x: (-0.3, 0.3), y: (-0.08, 0.13) }],
    }
}

struct Layout {
    furniture: Vec<Furniture>,
    counts: std::collections::HashMap<&'static str, usize>,
}

impl Layout {
    fn new() -> Self {
        Self { furniture: Vec::new(), counts: Default::default() }
    }

    /// Adds `kit` at (x, y) with yaw, each jittered a little.
    fn add(&mut self, kit: Kit, x: f64, y: f64, yaw: f64, rng: &mut impl Rng) -> Result<(), PipelineError> {
        let k = self.counts.entry(kit.category).or_insert(0);
        let id = format!("{}_{k}", kit.category.replace(' ', "_"));
        *k += 1;
        let pos = [x + rng.random_range(-0.05..0.05), y + rng.random_range(-0.05..0.05), 0.0];
        let yaw = yaw + rng.random_range(-0.08..0.08);
        let object = SceneObject::new(id, kit.category, pos, [0.0, 0.0, yaw], kit.specs, None)?;
        self.furniture.push(Furniture { object, seat: kit.seat, berths: kit.berths });
        Ok(())
    }
}

fn furnish(template: SceneTemplate, rng: &mut impl Rng) -> Result<Vec<Furniture>, PipelineError> {
    let mut l = Layout::new();
    match template {
        SceneTemplate::Office => {
            l.add(table("desk", 1.2, 0.6, 0.75), 0.0, 0.9, 0.0, rng)?;
            l.add(office_chair(rng), 0.0, 0.25, PI, rng)?;
            l.add(block("monitor", 0.55, 0.05, 0.35, 0.75), 0.0, 1.05, 0.0, rng)?;
            l.add(column("plant", 0.2, 0.8, 0.0), 1.4, 1.1, 0.0, rng)?;
            l.add(block("cabinet", 0.5, 0.5, 0.7, 0.0), -1.4, 1.0, 0.0, rng)?;
        }
        SceneTemplate::Dining => {
            l.add(table("dining table", 1.4, 0.8, 0.75), 0.0, 0.0, 0.0, rng)?;
            l.add(chair(rng), -0.35, -0.8, PI, rng)?;
            l.add(chair(rng), 0.35, 0.8, 0.0, rng)?;
            l.add(column("plant", 0.2, 0.8, 0.0), -1.7, 1.3, 0.0, rng)?;
        }
        SceneTemplate::Living => {
            l.add(sofa(), 0.0, 1.1, 0.0, rng)?;
            l.add(table("coffee table", 1.0, 0.5, 0.4), 0.0, 0.1, 0.0, rng)?;
            l.add(column("floor lamp", 0.15, 1.6, 0.0), 1.6, 1.3, 0.0, rng)?;
            l.add(block("cabinet", 1.2, 0.4, 0.5, 0.0), 0.0, -1.9, 0.0, rng)?;
            l.add(block("television", 1.0, 0.08, 0.6, 0.5), 0.0, -1.9, 0.0, rng)?;
        }
        SceneTemplate::Bedroom => {
            l.add(bed(), 0.0, 0.9, 0.0, rng)?;
            l.add(block("nightstand", 0.45, 0.4, 0.55, 0.0), 1.15, 1.7, 0.0, rng)?;
            l.add(column("lamp", 0.1, 0.35, 0.55), 1.15, 1.7, 0.0, rng)?;
            l.add(block("wardrobe", 1.0, 0.6, 2.0, 0.0), -1.9, -1.3, FRAC_PI_2, rng)?;
        }
        SceneTemplate::Kitchen => {
            l.add(block("kitchen counter", 2.0, 0.6, 0.9, 0.0), 0.0, 1.7, 0.0, rng)?;
            for x in [-0.5, 0.5] {
                let h = rng.random_range(0.6..0.68);
                l.add(backless_seat("stool", 0.42, 0.42, h, 0.02), x, 0.7, PI, rng)?;
            }
            l.add(block("cabinet", 0.8, 0.5, 0.9, 0.0), -1.9, 0.3, FRAC_PI_2, rng)?;
        }
        SceneTemplate::Study => {
            l.add(block("bookshelf", 1.0, 0.35, 1.8, 0.0), 0.0, 2.1, 0.0, rng)?;
            l.add(armchair(rng), 0.1, 0.6, 0.3, rng)?;
            l.add(table("side table", 0.5, 0.5, 0.55), 1.1, 0.8, 0.0, rng)?;
            l.add(column("floor lamp", 0.15, 1.6, 0.0), -1.0, 0.9, 0.0, rng)?;
        }
        SceneTemplate::Hallway => {
            l.add(backless_seat("bench", 1.4, 0.4, 0.45, 0.4), 0.0, 1.2, 0.0, rng)?;
            l.add(column("plant", 0.2, 0.8, 0.0), 1.4, 1.3, 0.0, rng)?;
            l.add(block("door", 0.9, 0.05, 2.0, 0.0), -1.5, 2.38, 0.0, rng)?;
            l.add(block("shelf", 0.8, 0.3, 1.2, 0.0), 1.6, -1.0, 0.0, rng)?;
        }
        SceneTemplate::Lounge => {
            l.add(armchair(rng), -0.8, 0.5, -0.35, rng)?;
            l.add(armchair(rng), 0.8, 0.5, 0.35, rng)?;
            l.add(backless_seat("ottoman", 0.6, 0.6, 0.4, 0.1), 0.0, -0.5, 0.0, rng)?;
            l.add(block("cabinet", 1.2, 0.4, 0.5, 0.0), 0.0, -2.0, 0.0, rng)?;
            l.add(block("television", 1.0, 0.08, 0.6, 0.5), 0.0, -2.0, 0.0, rng)?;
        }
        SceneTemplate::Workshop => {
            l.add(table("table", 1.6, 0.8, 0.9), 0.0, 0.9, 0.0, rng)?;
            l.add(backless_seat("stool", 0.42, 0.42, rng.random_range(0.6..0.68), 0.02), -0.5, 0.1, PI, rng)?;
            l.add(block("box", 0.5, 0.4, 0.4, 0.0), 1.5, -0.3, 0.0, rng)?;
            l.add(block("cabinet", 0.8, 0.5, 1.0, 0.0), -1.7, 1.0, 0.0, rng)?;
        }
        SceneTemplate::Reading => {
            l.add(armchair(rng), 0.0, 0.0, FRAC_PI_2, rng)?;
            l.add(column("floor lamp", 0.15, 1.6, 0.0), 0.9, 0.7, 0.0, rng)?;
            l.add(block("bookshelf", 1.0, 0.35, 1.8, 0.0), -1.3, 1.9, 0.0, rng)?;
            l.add(block("window", 1.2, 0.05, 1.2, 0.9), 0.3, 2.38, 0.0, rng)?;
            l.add(table("side table", 0.5, 0.5, 0.55), 0.2, -1.0, 0.0, rng)?;
        }
    }
    Ok(l.furniture)
}

fn joint(name: &str) -> usize {
    default_template().joint_index(name).expect("template joint")
}

/// Lowers both arms by `angle` (rad) from the horizontal rest position.
fn lower_arms(p: &mut BodyParams, angle: f64) {
    p.set_joint_rotation(joint("left_shoulder"), [0.0, -angle, 0.0]);
    p.set_joint_rotation(joint("right_shoulder"), [0.0, angle, 0.0]);
}

/// Canonical body pose of `kind` at the origin with an upright root.
pub fn pose_template(kind: PoseKind) -> BodyParams {
    let mut p = BodyParams::rest();
    match kind {
        PoseKind::Sit => {
            // knees open a little past 90° so the shins clear the seat front
            for side in ["left", "right"] {
                p.set_joint_rotation(joint(&format!("{side}_hip")), [FRAC_PI_2, 0.0, 0.0]);
                p.set_joint_rotation(joint(&format!("{side}_knee")), [-1.35, 0.0, 0.0]);
                p.set_joint_rotation(joint(&format!("{side}_ankle")), [1.35 - FRAC_PI_2, 0.0, 0.0]);
            }
            lower_arms(&mut p, 0.55);
        }
        PoseKind::Lie => lower_arms(&mut p, 1.5),
        PoseKind::Stand => lower_arms(&mut p, 1.35),
        PoseKind::Crouch => {
            for side in ["left", "right"] {
                p.set_joint_rotation(joint(&format!("{side}_hip")), [2.0, 0.0, 0.0]);
                p.set_joint_rotation(joint(&format!("{side}_knee")), [-2.2, 0.0, 0.0]);
                p.set_joint_rotation(joint(&format!("{side}_ankle")), [0.2, 0.0, 0.0]);
            }
            p.set_joint_rotation(joint("spine1"), [0.45, 0.0, 0.0]);
            lower_arms(&mut p, 0.9);
        }
    }
    p
}

/// Bounded noise on head, arms and spine plus the hand articulation.
fn jitter_pose(p: &mut BodyParams, kind: PoseKind, j: f64, rng: &mut impl Rng) {
    let mut bump = |name: &str, scale: f64, rng: &mut ChaCha8Rng| {
        let i = joint(name);
        for k in 0..3 {
            p.pose[3 * i + k] += scale * rng.random_range(-j..=j);
        }
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.random());
    // a lying head rests on the surface, so it barely moves
    let head = if kind == PoseKind::Lie { 0.2 } else { 1.0 };
    for name in ["neck", "head"] {
        bump(name, head, &mut local);
    }
    let arm = if kind == PoseKind::Lie { 0.4 } else { 1.0 };
    for side in ["left", "right"] {
        bump(&format!("{side}_collar"), 0.5 * arm, &mut local);
        bump(&format!("{side}_shoulder"), arm, &mut local);
        bump(&format!("{side}_elbow"), arm, &mut local);
        bump(&format!("{side}_wrist"), arm, &mut local);
    }
    if matches!(kind, PoseKind::Stand | PoseKind::Crouch) {
        bump("spine1", 0.3, &mut local);
        bump("spine2", 0.3, &mut local);
    }
    for h in 0..HAND_DIM {
        p.hand[h] = local.random_range(-0.3..0.3);
    }
}

fn set_orientation(p: &mut BodyParams, rot: &Mat3) {
    p.r = matrix_to_rot6d(rot);
}

/// Orientation with the head along `head` (unit, horizontal) and the face up.
fn lying(head: Vec3) -> Mat3 {
    let up = Vec3::new(0.0, 0.0, 1.0);
    Mat3::from_cols(up.cross(&head), up, head)
}

/// Lowers (or raises) the body until the lowest support vertex sits
/// [`SETTLE_GAP`] above the surface described by `sdf`. Sphere tracing:
/// each step moves by the smallest distance, which never overshoots.
fn settle(p: &mut BodyParams, support: &[usize], sdf: impl Fn(&Vec3) -> f64) -> Result<BodyMesh, PipelineError> {
    for _ in 0..100 {
        let mesh = body_mesh(p)?;
        let d = support.iter().map(|&i| sdf(&mesh.vertices[i])).fold(f64::INFINITY, f64::min);
        if d.abs() < 1e-6 {
            break;
        }
        p.t[2] -= d;
    }
    p.t[2] += SETTLE_GAP;
    Ok(body_mesh(p)?)
}

fn yaw_towards(from: Vec3, to: Vec3) -> f64 {
    (-(to.x - from.x)).atan2(to.y - from.y)
}

struct Placement {
    params: BodyParams,
    mesh: BodyMesh,
    parsed: ParsedInteraction,
}

fn clause(kind: PoseKind, object: Option<&str>, anchors: Vec<AnchorClass>, rng: &mut impl Rng) -> ParsedInteraction {
    let verb = *kind.verbs().choose(rng).expect("verbs");
    ParsedInteraction {
        subject: SUBJECTS.choose(rng).expect("subjects").to_string(),
        actions: vec![ActionMention::new(verb)],
        object_class: object.map(str::to_string),
        object_relation: object.map(|_| "on".to_string()),
        spatial_relation: anchors.first().map(|a| a.relation.clone()),
        anchors,
    }
}

fn surface_words(rel: &str) -> Vec<&'static str> {
    match rel {
        REL_NEAR => NEAR_WORDS.to_vec(),
        REL_LEFT => vec![REL_LEFT],
        REL_RIGHT => vec![REL_RIGHT],
        REL_FRONT => vec![REL_FRONT],
        REL_BEHIND => vec![REL_BEHIND],
        _ => Vec::new(),
    }
}

/// An extra object the seated or lying person can be described against:
/// the relation must hold both from the body and from the seat in the scene
/// graph, so the matcher can find it.
fn seat_anchor(
    body: &BodyMesh,
    target: &SceneObject,
    scene: &Scene,
    gsg: &SceneGraph,
    rng: &mut impl Rng,
) -> Option<AnchorClass> {
    let th = GsgThresholds::default();
    let body_box = crate::geom::Aabb::from_points(&body.vertices);
    let mut options = Vec::new();
    for o in scene.objects.iter().filter(|o| o.id != target.id) {
        let from_body = pair_relations(&body_box, &o.aabb(), &th);
        for rel in gsg.relations(&target.id, &o.id) {
            if from_body.contains(&rel) {
                for w in surface_words(rel) {
                    options.push((o.category.clone(), w));
                }
            }
        }
    }
    let (concept, rel) = options.choose(rng)?.clone();
    Some(AnchorClass { concept, quantity: None, relation: rel.to_string() })
}

fn place_on(kind: PoseKind, f: &Furniture, scene: &Scene, gsg: &SceneGraph, labels: &ContactLabels, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Option<Placement>, PipelineError> {
    let o = &f.object;
    let frame = Mat3::rot_z(o.yaw());
    let origin = Vec3::from_array(o.position);
    let mut p = pose_template(kind);
    jitter_pose(&mut p, kind, cfg.jitter, rng);
    let local = match kind {
        PoseKind::Sit => {
            let Some(seat) = f.seat else { return Ok(None) };
            let yaw = o.yaw() + PI + rng.random_range(-0.08..0.08);
            set_orientation(&mut p, &Mat3::rot_z(yaw));
            Vec3::new(rng.random_range(-seat.x_half..=seat.x_half), seat.y + rng.random_range(-0.01..0.01), 0.0)
        }
        PoseKind::Lie => {
            let Some(b) = f.berths.choose(rng) else { return Ok(None) };
            let head = frame.mul_vec(&Vec3::new(b.head[0], b.head[1], 0.0));
            set_orientation(&mut p, &lying(head));
            Vec3::new(rng.random_range(b.x.0..=b.x.1), rng.random_range(b.y.0..=b.y.1), 0.0)
        }
        _ => return Ok(None),
    };
    let world = origin + frame.mul_vec(&local);
    p.t = [world.x, world.y, o.aabb().max[2] + 1.0];
    let support = labels.indices();
    let mesh = settle(&mut p, &support, |v| o.sdf(v))?;
    if kind == PoseKind::Sit && support.iter().any(|&i| o.sdf(&mesh.vertices[i]).abs() > SEAT_TOLERANCE) {
        let worst = support.iter().map(|&i| o.sdf(&mesh.vertices[i]).abs()).fold(0.0, f64::max);
        log::debug!("{kind:?} on {}: support region up to {worst:.3} m off the surface", o.id);
        return Ok(None);
    }
    let anchor = if rng.random_bool(0.5) { seat_anchor(&mesh, o, scene, gsg, rng) } else { None };
    let parsed = clause(kind, Some(&o.category), anchor.into_iter().collect(), rng);
    Ok(Some(Placement { params: p, mesh, parsed }))
}

/// Stands or crouches beside `o`, facing it, in a relation that the text
/// will name.
fn place_beside(kind: PoseKind, o: &SceneObject, labels: &ContactLabels, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Option<Placement>, PipelineError> {
    let th = GsgThresholds::default();
    let rel = *[REL_NEAR, REL_NEAR, REL_FRONT, REL_BEHIND, REL_LEFT, REL_RIGHT, "facing"].choose(rng).expect("relations");
    let dir = match rel {
        REL_FRONT => Vec3::new(0.0, -1.0, 0.0),
        REL_BEHIND => Vec3::new(0.0, 1.0, 0.0),
        REL_LEFT => Vec3::new(-1.0, 0.0, 0.0),
        REL_RIGHT => Vec3::new(1.0, 0.0, 0.0),
        // the object's own front, or a random side of it
        _ => {
            let k = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0..4) as f64 };
            Mat3::rot_z(o.yaw() + k * FRAC_PI_2).mul_vec(&Vec3::new(0.0, -1.0, 0.0))
        }
    };
    let bbox = o.aabb();
    let c = bbox.center();
    let half = (bbox.max[0] - bbox.min[0]) / 2.0 * dir.x.abs() + (bbox.max[1] - bbox.min[1]) / 2.0 * dir.y.abs();
    let side = Vec3::new(-dir.y, dir.x, 0.0).scale(rng.random_range(-0.1..0.1));
    let mut p = pose_template(kind);
    jitter_pose(&mut p, kind, cfg.jitter, rng);
    let gap = rng.random_range(0.08..0.35);
    let mut at = Vec3::new(c.x, c.y, 0.0) + dir.scale(half + gap + 0.25) + side;
    let face = yaw_towards(at, c) + rng.random_range(-0.15..0.15);
    set_orientation(&mut p, &Mat3::rot_z(face));
    let support = labels.indices();
    // two passes: measure the body's footprint, then fix the gap
    for _ in 0..2 {
        p.t = [at.x, at.y, 1.5];
        let mesh = settle(&mut p, &support, |v| v.z)?;
        let actual = crate::geom::Aabb::from_points(&mesh.vertices).gap(&bbox);
        at = at + dir.scale(gap - actual);
    }
    p.t = [at.x, at.y, p.t[2]];
    let mesh = body_mesh(&p)?;
    let body_box = crate::geom::Aabb::from_points(&mesh.vertices);
    // "facing" is judged from the orientation later, with the other checks
    if rel != "facing" && !pair_relations(&body_box, &bbox, &th).contains(&rel) {
        log::debug!("{kind:?} {rel} {}: relation missed", o.id);
        return Ok(None);
    }
    let word = if rel == REL_NEAR { *NEAR_WORDS.choose(rng).expect("words") } else { rel };
    let anchor = AnchorClass { concept: o.category.clone(), quantity: None, relation: word.to_string() };
    let parsed = clause(kind, None, vec![anchor], rng);
    Ok(Some(Placement { params: p, mesh, parsed }))
}

/// Emission checks: inside the floor, plausible contact and collision,
/// text round-trip, binding to the target and every relation holding.
fn check(pl: &Placement, scene: &Scene, gsg: &SceneGraph, target: &str, labels: &ContactLabels, cfg: &SynthConfig, text: &str) -> Result<bool, PipelineError> {
    let f = scene.floor;
    if pl.mesh.vertices.iter().any(|v| v.x < f.min[0] || v.x > f.max[0] || v.y < f.min[1] || v.y > f.max[1]) {
        log::debug!("{text}: body leaves the floor");
        return Ok(false);
    }
    let mesh = pl.mesh.clone().with_contact(labels.clone());
    let (free, touching) = (non_collision_score(&mesh, scene), contact_score(&mesh, scene, cfg.contact_eps)?);
    if free < cfg.min_non_collision || touching < cfg.min_contact {
        log::debug!("{text}: non-collision {free:.3}, contact {touching:.3}");
        return Ok(false);
    }
    match parse_description(text) {
        Ok(people) if people.len() == 1 && people[0] == pl.parsed => {}
        _ => {
            log::debug!("{text}: does not parse back");
            return Ok(false);
        }
    }
    let lsg = build_local_graph(&pl.parsed)?;
    let Ok((graph, binding)) = match_and_insert_human(gsg, &lsg, default_lexicon()) else {
        log::debug!("{text}: no binding");
        return Ok(false);
    };
    if !binds(&binding, target) {
        log::debug!("{text}: bound elsewhere than {target}");
        return Ok(false);
    }
    let checks = relation_checks(&mesh, &pl.params, scene, &graph, &binding, &GsgThresholds::default());
    let ok = grounded(&pl.parsed, &checks) && checks.iter().all(|c| c.holds);
    if !ok {
        log::debug!("{text}: relations {checks:?}");
    }
    Ok(ok)
}

fn binds(binding: &Binding, target: &str) -> bool {
    binding.primary.as_deref() == Some(target) || (binding.primary.is_none() && binding.anchors.iter().any(|(id, _)| id == target))
}

fn synth_one(template: SceneTemplate, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Option<SynthSample>, PipelineError> {
    for _ in 0..cfg.retries {
        let furniture = furnish(template, rng)?;
        let objects: Vec<SceneObject> = furniture.iter().map(|f| f.object.clone()).collect();
        let scene = Scene::new(objects, FloorExtent { min: [-HALF_FLOOR; 2], max: [HALF_FLOOR; 2] })?;
        let feasible: Vec<PoseKind> = cfg
            .poses
            .iter()
            .copied()
            .filter(|k| match k {
                PoseKind::Sit => furniture.iter().any(|f| f.seat.is_some()),
                PoseKind::Lie => furniture.iter().any(|f| !f.berths.is_empty()),
                _ => true,
            })
            .collect();
        let Some(&kind) = feasible.choose(rng) else { continue };
        let candidates: Vec<&Furniture> = furniture
            .iter()
            .filter(|f| match kind {
                PoseKind::Sit => f.seat.is_some(),
                PoseKind::Lie => !f.berths.is_empty(),
                _ => true,
            })
            .collect();
        let f = *candidates.choose(rng).expect("feasible pose has a target");
        let gsg = global_scene_graph(&scene, &GsgThresholds::default());
        let labels = assign_contact_labels(&[ActionMention::new(kind.verbs()[0])])?;
        let placed = match kind {
            PoseKind::Sit | PoseKind::Lie => place_on(kind, f, &scene, &gsg, &labels, cfg, rng)?,
            PoseKind::Stand | PoseKind::Crouch => place_beside(kind, &f.object, &labels, cfg, rng)?,
        };
        let Some(pl) = placed else { continue };
        let text = render_description(std::slice::from_ref(&pl.parsed), rng);
        if check(&pl, &scene, &gsg, &f.object.id, &labels, cfg, &text)? {
            return Ok(Some(SynthSample {
                template,
                pose: kind,
                target: f.object.id.clone(),
                scene: Arc::new(scene),
                text,
                params: pl.params,
            }));
        }
    }
    Ok(None)
}

/// `cfg.samples` checked samples, cycling through the templates.
/// Deterministic in `seed`; sample `i` draws from its own stream, so
/// skipping one does not disturb the others.
pub fn synth_dataset(cfg: &SynthConfig, seed: u64) -> Result<Vec<SynthSample>, PipelineError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.samples);
    let mut skipped = 0usize;
    let mut i = 0u64;
    while out.len() < cfg.samples {
        let template = cfg.templates[i as usize % cfg.templates.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i);
        i += 1;
        match synth_one(template, cfg, &mut rng)? {
            Some(s) => out.push(s),
            None => {
                skipped += 1;
                log::warn!("sample {} ({template:?}) skipped after {} attempts", i - 1, cfg.retries);
                if skipped > cfg.samples.max(10) {
                    return Err(PipelineError::Dataset(format!("{skipped} samples failed placement")));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct Record {
    template: SceneTemplate,
    pose: PoseKind,
    target: String,
    text: String,
    params: BodyParams,
    scene: String,
}

/// One JSON object per line, each with its scene document inlined.
pub fn write_dataset(samples: &[SynthSample], mut w: impl Write) -> Result<(), PipelineError> {
    for s in samples {
        let r = Record {
            template: s.template,
            pose: s.pose,
            target: s.target.clone(),
            text: s.text.clone(),
            params: s.params.clone(),
            scene: scene_to_document(&s.scene),
        };
        let line = serde_json::to_string(&r).map_err(|e| PipelineError::Dataset(e.to_string()))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn read_dataset(r: impl BufRead) -> Result<Vec<SynthSample>, PipelineError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| PipelineError::Dataset(format!("line {}: {e}", n + 1)))?;
        out.push(SynthSample {
            template: rec.template,
            pose: rec.pose,
            target: rec.target,
            scene: Arc::new(build_scene(&rec.scene)?),
            text: rec.text,
            params: rec.params,
        });
    }
    Ok(out)
}
