//! Transformer conditional VAE over body parameters.
//!
//! The condition is the concatenation of a scene feature (point-set encoder
//! over the cloud in the anchor frame), a scene-graph feature and an action
//! feature. The encoder sees the body's vertices plus the condition; the
//! decoder sees a shape-conditioned body token, one token per body part, the
//! part-level action tokens and a (z ⊕ condition) token, with action tokens
//! and part tokens masked to each other's scope.

mod checkpoint;
mod frame;
mod scene_encoder;
mod train;

use std::io;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Graph, Mat, NodeId};
use crate::body::{BodyError, BodyParams, BodyPart, FREE_DIM, NUM_SHAPE};
use crate::graphs::{
    default_lexicon, match_and_insert_human, Binding, ConceptLexicon, GraphEncoder, GraphError, SceneGraph,
};
use crate::nn::{self, Bound, ParamStore};
use crate::pla::{self, action_tokens, default_vocab, ActionToken, PlaError, ACTION_FEATURE_DIM};
use crate::scene::{global_scene_graph, sample_scene_points, GsgThresholds, Scene, SceneError};
use crate::textparse::{build_local_graph, parse_description, ParseError, ParsedInteraction};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use frame::AnchorFrame;
pub use scene_encoder::{ball_query, farthest_point_sample, Grouping, SceneEncoderConfig};
pub use train::{
    reconstruction_error,
    loss_and_gradients, prepare_sample, sample_loss, train, train_prepared, vertex_loss, write_log_csv, KlSchedule,
    LossBreakdown, PreparedSample, TrainConfig, TrainLogRow, TrainingSample,
};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("point cloud has {got} points, at least {min} required")]
    TooFewPoints { got: usize, min: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Pla(#[from] PlaError),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("non-finite loss at step {step}: {detail}")]
    NonFinite { step: usize, detail: String },
    #[error("empty training set")]
    EmptyDataset,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub width: usize,
    pub heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub ffn: usize,
    pub latent: usize,
    /// Points sampled from the scene for the scene feature.
    pub cloud_points: usize,
    pub scene: SceneEncoderConfig,
    pub graph: GraphEncoder,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            width: 256,
            heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            ffn: 512,
            latent: 32,
            cloud_points: 512,
            scene: SceneEncoderConfig::default(),
            graph: GraphEncoder::default(),
        }
    }
}

impl GeneratorConfig {
    /// Small model for gradient checks and quick tests.
    pub fn tiny() -> Self {
        Self {
            width: 16,
            heads: 2,
            encoder_layers: 1,
            decoder_layers: 1,
            ffn: 16,
            latent: 4,
            cloud_points: 48,
            scene: SceneEncoderConfig {
                min_points: 32,
                centers1: 8,
                k1: 4,
                radius1: 1.0,
                hidden1: 8,
                out1: 8,
                centers2: 4,
                k2: 4,
                radius2: 2.0,
                hidden2: 8,
                out2: 16,
            },
            graph: GraphEncoder { dim: 8, rounds: 2 },
        }
    }

    pub fn condition_dim(&self) -> usize {
        self.scene.out2 + self.graph.dim + ACTION_FEATURE_DIM
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.heads == 0 || self.width % self.heads != 0 {
            return Err(GeneratorError::Dimension(format!("width {} not divisible by {} heads", self.width, self.heads)));
        }
        if self.latent == 0 || self.cloud_points < self.scene.min_points {
            return Err(GeneratorError::Dimension("latent size must be positive and the cloud must meet the point minimum".into()));
        }
        Ok(())
    }
}

/// Scene, graph and action features.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEmbedding {
    pub f_s: Vec<f64>,
    pub f_sg: Vec<f64>,
    pub f_a: Vec<f64>,
}

impl ConditionEmbedding {
    /// f_ce = f_s ⊕ f_sg ⊕ f_a.
    pub fn joint(&self) -> Vec<f64> {
        self.f_s.iter().chain(&self.f_sg).chain(&self.f_a).copied().collect()
    }
}

/// Concatenates the three features after checking their lengths.
pub fn build_condition(f_s: &[f64], f_sg: &[f64], f_a: &[f64], cfg: &GeneratorConfig) -> Result<Vec<f64>, GeneratorError> {
    let want = [(f_s.len(), cfg.scene.out2, "scene"), (f_sg.len(), cfg.graph.dim, "graph"), (f_a.len(), ACTION_FEATURE_DIM, "action")];
    for (got, expected, what) in want {
        if got != expected {
            return Err(GeneratorError::Dimension(format!("{what} feature has length {got}, expected {expected}")));
        }
    }
    Ok(ConditionEmbedding { f_s: f_s.to_vec(), f_sg: f_sg.to_vec(), f_a: f_a.to_vec() }.joint())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorParams {
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

/// z = mu + exp(logvar / 2) ⊙ noise.
pub fn reparameterize(post: &PosteriorParams, noise: &[f64]) -> Vec<f64> {
    post.mu.iter().zip(&post.logvar).zip(noise).map(|((m, lv), e)| m + (lv / 2.0).exp() * e).collect()
}

/// Everything the network needs to know about one person's situation.
#[derive(Debug, Clone)]
pub struct ConditionInputs {
    pub grouping: Grouping,
    pub graph: SceneGraph,
    pub tokens: Vec<ActionToken>,
}

/// A description grounded in a scene: the matched graph, the binding, the
/// placement frame and the network inputs.
#[derive(Debug, Clone)]
pub struct Grounding {
    pub interaction: ParsedInteraction,
    pub graph: SceneGraph,
    pub binding: Binding,
    pub frame: AnchorFrame,
    pub inputs: ConditionInputs,
}

/// Grounds one parsed interaction against `gsg` (which may already hold
/// placed humans). The scene cloud is sampled with `cloud_seed`.
pub fn ground_interaction(
    scene: &Scene,
    gsg: &SceneGraph,
    interaction: &ParsedInteraction,
    cfg: &GeneratorConfig,
    cloud_seed: u64,
) -> Result<Grounding, GeneratorError> {
    let lex = default_lexicon();
    let lsg = build_local_graph(interaction)?;
    let (graph, binding) = match_and_insert_human(gsg, &lsg, lex)?;
    let frame = AnchorFrame::from_binding(scene, &graph, &binding);
    let cloud = frame.cloud_to_local(&sample_scene_points(scene, cfg.cloud_points, cloud_seed)?);
    let grouping = cfg.scene.group(&cloud, lex)?;
    let tokens = action_tokens(default_vocab(), &interaction.actions)?;
    if tokens.is_empty() {
        return Err(PlaError::EmptyActions.into());
    }
    Ok(Grounding {
        interaction: interaction.clone(),
        graph: graph.clone(),
        binding,
        frame,
        inputs: ConditionInputs { grouping, graph, tokens },
    })
}

/// Sequence layout of the decoder: body token, part tokens, action tokens,
/// then the latent/condition token.
fn decoder_mask(tokens: &[ActionToken]) -> Result<Array2<bool>, PlaError> {
    let parts = BodyPart::ALL;
    let allowed = pla::attention_mask(tokens, &parts)?;
    let k = tokens.len();
    let n = 1 + parts.len() + k + 1;
    let first_action = 1 + parts.len();
    let is_part = |i: usize| (1..first_action).contains(&i);
    let is_action = |i: usize| (first_action..first_action + k).contains(&i);
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        if is_action(i) && is_part(j) {
            allowed[[i - first_action, j - 1]]
        } else if is_part(i) && is_action(j) {
            allowed[[j - first_action, i - 1]]
        } else if is_action(i) && is_action(j) {
            i == j
        } else {
            true
        }
    }))
}

pub struct Generator {
    pub config: GeneratorConfig,
    pub store: ParamStore,
}

impl Generator {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self, GeneratorError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let lex = default_lexicon();
        let vocab = default_vocab();
        let w = config.width;
        let c = config.condition_dim();
        config.scene.init(&mut store, "scene", lex, &mut rng);
        config.graph.init(&mut store, "graph", lex, &mut rng);
        pla::init_action_encoder(&mut store, "action", vocab, &mut rng);
        let vertex_dim = 3 * crate::body::default_template().vertex_count;
        store.init_linear("enc.mesh", vertex_dim, w, &mut rng);
        store.init_linear("enc.cond", c, w, &mut rng);
        for l in 0..config.encoder_layers {
            nn::init_transformer_layer(&mut store, &format!("enc.l{l}"), w, config.ffn, &mut rng);
        }
        store.init_linear("enc.head", w, 2 * config.latent, &mut rng);
        store.init_linear("dec.body", NUM_SHAPE, w, &mut rng);
        store.init_normal("dec.parts", BodyPart::ALL.len(), w, 0.02, &mut rng);
        store.init_linear("dec.action", vocab.len() + BodyPart::ALL.len(), w, &mut rng);
        store.init_linear("dec.cond", config.latent + c, w, &mut rng);
        for l in 0..config.decoder_layers {
            nn::init_transformer_layer(&mut store, &format!("dec.l{l}"), w, config.ffn, &mut rng);
        }
        store.init_linear("dec.head", (1 + BodyPart::ALL.len()) * w, FREE_DIM, &mut rng);
        // start near the rest pose with an upright root
        let head = store.get_mut("dec.head.w").expect("just created");
        head.mapv_inplace(|v| v * 0.1);
        let bias = store.get_mut("dec.head.b").expect("just created");
        bias[[0, 3]] = 1.0;
        bias[[0, 7]] = 1.0;
        bias[[0, 2]] = 0.9;
        Ok(Self { config, store })
    }

    fn lexicon(&self) -> &'static ConceptLexicon {
        default_lexicon()
    }

    /// 1×condition_dim node.
    pub fn condition_node(&self, g: &mut Graph, p: &Bound, inputs: &ConditionInputs) -> Result<NodeId, GeneratorError> {
        let f_s = self.config.scene.forward(g, p, "scene", &inputs.grouping);
        let f_sg = self.config.graph.forward(g, p, "graph", &inputs.graph, self.lexicon())?;
        let f_a = pla::encode_actions(g, p, "action", default_vocab(), &inputs.tokens)?;
        Ok(g.concat_cols(&[f_s, f_sg, f_a]))
    }

    /// (mu, logvar) nodes, each 1×latent.
    pub fn posterior_nodes(&self, g: &mut Graph, p: &Bound, vertices: &Mat, cond: NodeId) -> (NodeId, NodeId) {
        let v = g.constant(vertices.clone());
        let mesh = nn::linear(g, p, "enc.mesh", v);
        let c = nn::linear(g, p, "enc.cond", cond);
        let mut x = g.concat_rows(&[mesh, c]);
        for l in 0..self.config.encoder_layers {
            x = nn::transformer_layer(g, p, &format!("enc.l{l}"), x, self.config.heads, None);
        }
        let pooled = g.mean_rows(x);
        let out = nn::linear(g, p, "enc.head", pooled);
        let d = self.config.latent;
        (g.cols(out, 0, d), g.cols(out, d, 2 * d))
    }

    /// 1×FREE_DIM node holding (t, r, p, h) in the anchor frame.
    pub fn decode_node(
        &self,
        g: &mut Graph,
        p: &Bound,
        z: NodeId,
        cond: NodeId,
        beta: &[f64; NUM_SHAPE],
        tokens: &[ActionToken],
    ) -> Result<NodeId, GeneratorError> {
        let mask = decoder_mask(tokens)?;
        let b = g.constant(Mat::from_shape_vec((1, NUM_SHAPE), beta.to_vec()).expect("shape"));
        let body = nn::linear(g, p, "dec.body", b);
        let feats = g.constant(pla::token_features(default_vocab(), tokens));
        let actions = nn::linear(g, p, "dec.action", feats);
        let zc = g.concat_cols(&[z, cond]);
        let zc = nn::linear(g, p, "dec.cond", zc);
        let mut x = g.concat_rows(&[body, p.get("dec.parts"), actions, zc]);
        for l in 0..self.config.decoder_layers {
            x = nn::transformer_layer(g, p, &format!("dec.l{l}"), x, self.config.heads, Some(&mask));
        }
        let n_out = 1 + BodyPart::ALL.len();
        let head_in = g.rows(x, 0, n_out);
        let head_in = g.reshape(head_in, 1, n_out * self.config.width);
        Ok(nn::linear(g, p, "dec.head", head_in))
    }

    pub fn encode_scene(&self, cloud: &crate::scene::LabeledPointCloud) -> Result<Vec<f64>, GeneratorError> {
        let grouping = self.config.scene.group(cloud, self.lexicon())?;
        let mut g = Graph::new();
        let p = self.store.bind(&mut g, false);
        let out = self.config.scene.forward(&mut g, &p, "scene", &grouping);
        Ok(g.value(out).iter().copied().collect())
    }

    pub fn encode_graph(&self, sg: &SceneGraph) -> Result<Vec<f64>, GeneratorError> {
        Ok(self.config.graph.encode(&self.store, "graph", sg, self.lexicon())?)
    }

    pub fn encode_actions(&self, tokens: &[ActionToken]) -> Result<Vec<f64>, GeneratorError> {
        let mut g = Graph::new();
        let p = self.store.bind(&mut g, false);
        let out = pla::encode_actions(&mut g, &p, "action", default_vocab(), tokens)?;
        Ok(g.value(out).iter().copied().collect())
    }

    pub fn condition(&self, inputs: &ConditionInputs) -> Result<ConditionEmbedding, GeneratorError> {
        let mut g = Graph::new();
        let p = self.store.bind(&mut g, false);
        let f_s = self.config.scene.forward(&mut g, &p, "scene", &inputs.grouping);
        let f_sg = self.config.graph.forward(&mut g, &p, "graph", &inputs.graph, self.lexicon())?;
        let f_a = pla::encode_actions(&mut g, &p, "action", default_vocab(), &inputs.tokens)?;
        let v = |id| g.value(id).iter().copied().collect::<Vec<f64>>();
        Ok(ConditionEmbedding { f_s: v(f_s), f_sg: v(f_sg), f_a: v(f_a) })
    }

    fn check_condition(&self, f_ce: &[f64]) -> Result<(), GeneratorError> {
        let want = self.config.condition_dim();
        if f_ce.len() != want {
            return Err(GeneratorError::Dimension(format!("condition has length {}, expected {want}", f_ce.len())));
        }
        Ok(())
    }

    /// Posterior of the body (given in the anchor frame) under condition `f_ce`.
    pub fn encode_posterior(&self, local: &BodyParams, f_ce: &[f64]) -> Result<PosteriorParams, GeneratorError> {
        self.check_condition(f_ce)?;
        let verts = vertex_row(local)?;
        let mut g = Graph::new();
        let p = self.store.bind(&mut g, false);
        let cond = g.constant(row(f_ce));
        let (mu, lv) = self.posterior_nodes(&mut g, &p, &verts, cond);
        Ok(PosteriorParams { mu: g.value(mu).iter().copied().collect(), logvar: g.value(lv).iter().copied().collect() })
    }

    /// Body parameters in the anchor frame; β is passed through.
    pub fn decode(
        &self,
        z: &[f64],
        f_ce: &[f64],
        beta: &[f64; NUM_SHAPE],
        tokens: &[ActionToken],
    ) -> Result<BodyParams, GeneratorError> {
        self.check_condition(f_ce)?;
        if z.len() != self.config.latent {
            return Err(GeneratorError::Dimension(format!("latent has length {}, expected {}", z.len(), self.config.latent)));
        }
        let mut g = Graph::new();
        let p = self.store.bind(&mut g, false);
        let zn = g.constant(row(z));
        let cond = g.constant(row(f_ce));
        let out = self.decode_node(&mut g, &p, zn, cond, beta, tokens)?;
        let free: Vec<f64> = g.value(out).iter().copied().collect();
        let mut params = BodyParams::rest().with_free(&free);
        params.beta = *beta;
        Ok(params)
    }

    /// Draws `n` bodies for a grounded interaction, returned in world
    /// coordinates. Latent codes come from the standard normal seeded by `seed`.
    pub fn sample_grounded(
        &self,
        grounding: &Grounding,
        n: usize,
        seed: u64,
        beta: &[f64; NUM_SHAPE],
    ) -> Result<Vec<BodyParams>, GeneratorError> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let f_ce = self.condition(&grounding.inputs)?.joint();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let z: Vec<f64> = (0..self.config.latent).map(|_| rng.sample(StandardNormal)).collect();
            let local = self.decode(&z, &f_ce, beta, &grounding.inputs.tokens)?;
            out.push(grounding.frame.params_to_world(&local)?);
        }
        Ok(out)
    }

    /// Parses `text`, grounds its first person in `scene` and draws `n`
    /// bodies of unit shape.
    pub fn sample(&self, scene: &Scene, text: &str, n: usize, seed: u64) -> Result<Vec<(BodyParams, Binding)>, GeneratorError> {
        let people = parse_description(text)?;
        let first = people.first().ok_or(ParseError::Empty)?;
        let gsg = global_scene_graph(scene, &GsgThresholds::default());
        let grounding = ground_interaction(scene, &gsg, first, &self.config, seed)?;
        let bodies = self.sample_grounded(&grounding, n, seed, &[1.0; NUM_SHAPE])?;
        Ok(bodies.into_iter().map(|b| (b, grounding.binding.clone())).collect())
    }
}

pub(crate) fn row(v: &[f64]) -> Mat {
    Mat::from_shape_vec((1, v.len()), v.to_vec()).expect("row shape")
}

/// Vertices of `params` flattened into one row.
pub(crate) fn vertex_row(params: &BodyParams) -> Result<Mat, GeneratorError> {
    let mesh = crate::body::body_mesh(params)?;
    Ok(row(&mesh.vertices.iter().flat_map(|v| [v.x, v.y, v.z]).collect::<Vec<_>>()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pla::ActionMention;

    fn tokens(actions: &[&str]) -> Vec<ActionToken> {
        let m: Vec<ActionMention> = actions.iter().map(|a| ActionMention::new(*a)).collect();
        action_tokens(default_vocab(), &m).unwrap()
    }

    #[test]
    fn condition_concatenation() {
        let cfg = GeneratorConfig::default();
        let f = build_condition(&[0.0; 256], &[0.0; 128], &[0.0; 64], &cfg).unwrap();
        assert_eq!(f.len(), 448);
        assert!(f.iter().all(|v| *v == 0.0));
        assert!(build_condition(&[0.0; 128], &[0.0; 256], &[0.0; 64], &cfg).is_err());
    }

    #[test]
    fn reparameterization_cases() {
        let post = PosteriorParams { mu: vec![0.5, -1.0], logvar: vec![0.3, -2.0] };
        assert_eq!(reparameterize(&post, &[0.0, 0.0]), post.mu);
        let unit = PosteriorParams { mu: vec![0.5, -1.0], logvar: vec![0.0, 0.0] };
        assert_eq!(reparameterize(&unit, &[0.25, 2.0]), vec![0.75, 1.0]);
    }

    #[test]
    fn decode_shapes_and_determinism() {
        let gen = Generator::new(GeneratorConfig::tiny(), 1).unwrap();
        let f_ce = vec![0.1; gen.config.condition_dim()];
        let toks = tokens(&["sit", "touch"]);
        let beta = [1.1; NUM_SHAPE];
        let a = gen.decode(&[0.2, -0.1, 0.0, 0.3], &f_ce, &beta, &toks).unwrap();
        assert_eq!((a.t.len(), a.r.len(), a.beta.len(), a.pose.len(), a.hand.len()), (3, 6, 10, 63, 4));
        assert_eq!(a.beta, beta);
        let b = gen.decode(&[0.2, -0.1, 0.0, 0.3], &f_ce, &beta, &toks).unwrap();
        assert_eq!(a, b);
        assert!(gen.decode(&[0.0; 3], &f_ce, &beta, &toks).is_err());
    }

    #[test]
    fn posterior_shapes_and_sensitivity() {
        let gen = Generator::new(GeneratorConfig::tiny(), 2).unwrap();
        let f_ce = vec![0.0; gen.config.condition_dim()];
        let a = gen.encode_posterior(&BodyParams::rest(), &f_ce).unwrap();
        assert_eq!((a.mu.len(), a.logvar.len()), (4, 4));
        assert_eq!(a, gen.encode_posterior(&BodyParams::rest(), &f_ce).unwrap());
        let mut bent = BodyParams::rest();
        bent.set_joint_rotation(4, [1.0, 0.0, 0.0]);
        let b = gen.encode_posterior(&bent, &f_ce).unwrap();
        assert_ne!(a.mu, b.mu);
    }

    #[test]
    fn decoder_mask_follows_action_scope() {
        let toks = tokens(&["crouch", "use"]);
        let m = decoder_mask(&toks).unwrap();
        let first_action = 1 + BodyPart::ALL.len();
        for (i, t) in toks.iter().enumerate() {
            for part in BodyPart::ALL {
                let allowed = t.scope.contains(&part);
                assert_eq!(m[[first_action + i, 1 + part.index()]], allowed);
                assert_eq!(m[[1 + part.index(), first_action + i]], allowed);
            }
        }
        assert!(m.row(0).iter().all(|v| *v));
    }
}
