//! End-to-end orchestration: one person from text to a refined body, the
//! sequential multi-person loop, evaluation metrics and the synthetic
//! training data.

mod config;
mod metrics;
mod relations;
mod synth;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body::{assign_contact_labels, body_mesh, BodyError, BodyMesh, BodyParams, NUM_SHAPE};
use crate::generator::{ground_interaction, Generator, GeneratorError};
use crate::graphs::{update_graph, Binding, GraphError, GraphEvent, HumanPlacement, NodeKind, SceneGraph};
use crate::optimize::{CurveRow, LossTerms, LossWeights, OptimizeError, Problem};
use crate::scene::{global_scene_graph, Scene, SceneError};
use crate::textparse::{parse_description, ParseError, ParsedInteraction};

pub use config::{PipelineConfig, RunConfig, TUNED_WEIGHTS};
pub use metrics::{contact_fraction, contact_score, diversity, kmeans, non_collision_fraction, non_collision_score, Diversity};
pub use relations::{relation_checks, relation_holds, RelationCheck};
pub use synth::{
    pose_template, read_dataset, synth_dataset, write_dataset, PoseKind, SceneTemplate, SynthConfig, SynthSample,
};

/// Where in the flow a failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    Match,
    Generate,
    Optimize,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Parse => "parse",
            Stage::Match => "match",
            Stage::Generate => "generate",
            Stage::Optimize => "optimize",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("parse stage: {0}")]
    Parse(#[from] ParseError),
    #[error("match stage: {0}")]
    Match(#[from] GraphError),
    #[error("generate stage: {0}")]
    Generate(GeneratorError),
    #[error("optimize stage: {0}")]
    Optimize(#[from] OptimizeError),
    #[error("description mentions {0} people, expected exactly one")]
    NotSinglePerson(usize),
    #[error("metric undefined: {0}")]
    Metric(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            PipelineError::Parse(_) | PipelineError::NotSinglePerson(_) => Some(Stage::Parse),
            PipelineError::Match(_) => Some(Stage::Match),
            PipelineError::Generate(_) => Some(Stage::Generate),
            PipelineError::Optimize(_) => Some(Stage::Optimize),
            _ => None,
        }
    }
}

impl From<GeneratorError> for PipelineError {
    /// Grounding failures are sorted into the stage that raised them.
    fn from(e: GeneratorError) -> Self {
        match e {
            GeneratorError::Parse(p) => PipelineError::Parse(p),
            GeneratorError::Graph(g) => PipelineError::Match(g),
            other => PipelineError::Generate(other),
        }
    }
}

/// One person's result.
#[derive(Debug, Clone)]
pub struct Interaction {
    /// Position of the person in the description.
    pub person: usize,
    pub parsed: ParsedInteraction,
    /// Scene graph the person was matched against, with the virtual human.
    pub graph: SceneGraph,
    pub binding: Binding,
    /// Body drawn from the generator, before refinement.
    pub sampled: BodyParams,
    pub params: BodyParams,
    /// Refined body with the action's contact labels.
    pub mesh: BodyMesh,
    pub initial: LossTerms,
    pub losses: LossTerms,
    pub total: f64,
    pub relations: Vec<RelationCheck>,
    /// Primary contact and the nearest anchor of the parsed spatial relation hold.
    pub grounded: bool,
    pub accepted: bool,
    /// Object node removed from the scene graph after a rejection.
    pub pruned: Option<String>,
    pub curve: Vec<CurveRow>,
}

/// Serializable summary of an [`Interaction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub person: usize,
    pub parsed: ParsedInteraction,
    pub binding: Binding,
    pub params: BodyParams,
    pub initial: LossTerms,
    pub losses: LossTerms,
    pub total: f64,
    pub relations: Vec<RelationCheck>,
    pub grounded: bool,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruned: Option<String>,
}

impl Interaction {
    pub fn record(&self) -> InteractionRecord {
        InteractionRecord {
            person: self.person,
            parsed: self.parsed.clone(),
            binding: self.binding.clone(),
            params: self.params.clone(),
            initial: self.initial,
            losses: self.losses,
            total: self.total,
            relations: self.relations.clone(),
            grounded: self.grounded,
            accepted: self.accepted,
            pruned: self.pruned.clone(),
        }
    }
}

/// Seed of the `i`-th person; the first person uses `seed` itself.
pub fn person_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Grounds, samples and refines one person against `gsg`, avoiding `others`.
fn realize(
    gen: &Generator,
    scene: &Scene,
    gsg: &SceneGraph,
    parsed: &ParsedInteraction,
    person: usize,
    others: &[BodyMesh],
    seed: u64,
    weights: &LossWeights,
    config: &PipelineConfig,
) -> Result<Interaction, PipelineError> {
    let grounding = ground_interaction(scene, gsg, parsed, &gen.config, seed)?;
    let sampled = gen
        .sample_grounded(&grounding, 1, seed, &[1.0; NUM_SHAPE])
        .map_err(PipelineError::Generate)?
        .pop()
        .ok_or_else(|| PipelineError::Generate(GeneratorError::Dimension("no sample drawn".into())))?;
    let contact = assign_contact_labels(&parsed.actions).map_err(|e| PipelineError::Generate(e.into()))?;
    let mut oc = config.optimize;
    oc.weights = *weights;
    oc.seed = oc.seed.wrapping_add(seed);
    let problem = Problem::new(scene, others, contact.clone(), sampled.clone(), oc)?;
    let result = problem.run()?;
    let mesh = body_mesh(&result.params).map_err(OptimizeError::from)?.with_contact(contact);
    let total = result.total(weights);
    let relations = relation_checks(&mesh, &result.params, scene, &grounding.graph, &grounding.binding, &config.gsg);
    let grounded = relations::grounded(parsed, &relations);
    let accepted = total <= config.accept_threshold && grounded;
    Ok(Interaction {
        person,
        parsed: parsed.clone(),
        graph: grounding.graph,
        binding: grounding.binding,
        sampled,
        params: result.params,
        mesh,
        initial: result.initial,
        losses: result.terms,
        total,
        relations,
        grounded,
        accepted,
        pruned: None,
        curve: result.curve,
    })
}

/// Text to one refined body: parse, match, sample once, label contacts,
/// refine, then judge the result against the acceptance threshold and the
/// parsed relations.
pub fn generate_interaction(
    gen: &Generator,
    scene: &Scene,
    text: &str,
    seed: u64,
    weights: &LossWeights,
    config: &PipelineConfig,
) -> Result<Interaction, PipelineError> {
    weights.validate()?;
    let people = parse_description(text)?;
    if people.len() != 1 {
        return Err(PipelineError::NotSinglePerson(people.len()));
    }
    let gsg = global_scene_graph(scene, &config.gsg);
    realize(gen, scene, &gsg, &people[0], 0, &[], person_seed(seed, 0), weights, config)
}

/// Everything the multi-person loop produced.
#[derive(Debug, Clone)]
pub struct MhsiOutcome {
    pub interactions: Vec<Interaction>,
    /// People that failed before a body existed, by position.
    pub errors: Vec<(usize, String, Option<Stage>)>,
    /// Scene graph each person was matched against, in order.
    pub snapshots: Vec<SceneGraph>,
    pub graph: SceneGraph,
}

impl MhsiOutcome {
    pub fn accepted(&self) -> impl Iterator<Item = &Interaction> {
        self.interactions.iter().filter(|i| i.accepted)
    }
}

/// Object node to prune when `binding` was rejected: the primary object,
/// else the first bound anchor; the floor is never pruned.
fn prune_target(binding: &Binding, gsg: &SceneGraph) -> Option<String> {
    let candidates = binding.primary.iter().chain(binding.anchors.iter().map(|(id, _)| id));
    candidates
        .filter(|id| gsg.node(id).is_some_and(|n| n.kind == NodeKind::Object))
        .next()
        .cloned()
}

/// Places the people of `text` one after another in parse order. Each is
/// matched against the graph as updated by the people before it and refined
/// against the bodies accepted so far. Accepted people join the graph as
/// human nodes; a rejected person's bound object is pruned from it.
pub fn run_mhsi(
    gen: &Generator,
    scene: &Scene,
    text: &str,
    seed: u64,
    weights: &LossWeights,
    config: &PipelineConfig,
) -> Result<MhsiOutcome, PipelineError> {
    weights.validate()?;
    let people = parse_description(text)?;
    if people.is_empty() {
        return Err(ParseError::Empty.into());
    }
    let mut gsg = global_scene_graph(scene, &config.gsg);
    let mut out = MhsiOutcome { interactions: Vec::new(), errors: Vec::new(), snapshots: Vec::new(), graph: gsg.clone() };
    let mut placed: Vec<BodyMesh> = Vec::new();
    for (i, parsed) in people.iter().enumerate() {
        out.snapshots.push(gsg.clone());
        match realize(gen, scene, &gsg, parsed, i, &placed, person_seed(seed, i), weights, config) {
            Ok(mut it) => {
                if it.accepted {
                    let placement = HumanPlacement { vertices: it.mesh.vertices.clone(), contact: it.mesh.contact.labels.clone() };
                    gsg = update_graph(&gsg, &GraphEvent::Accept(placement), scene, &config.gsg)?;
                    placed.push(it.mesh.clone());
                } else if let Some(id) = prune_target(&it.binding, &gsg) {
                    gsg = update_graph(&gsg, &GraphEvent::Reject(id.clone()), scene, &config.gsg)?;
                    it.pruned = Some(id);
                }
                log::info!(
                    "person {i}: total {:.4} grounded {} -> {}",
                    it.total,
                    it.grounded,
                    if it.accepted { "accepted" } else { "rejected" }
                );
                out.interactions.push(it);
            }
            Err(e) => {
                log::warn!("person {i}: {e}");
                out.errors.push((i, e.to_string(), e.stage()));
            }
        }
    }
    out.graph = gsg;
    Ok(out)
}

/// Deepest penetration (m, positive inside) of `a`'s vertices into `b`'s capsules.
pub fn penetration_depth(a: &BodyMesh, b: &BodyMesh) -> f64 {
    a.vertices.iter().map(|v| -b.capsule_sdf(v)).fold(0.0, f64::max)
}
