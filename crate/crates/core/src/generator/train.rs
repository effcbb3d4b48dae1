//! Training objective and loop: parameter and vertex reconstruction plus an
//! annealed KL term, optimized with Adam.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ground_interaction, row, vertex_row, ConditionInputs, Generator, GeneratorConfig, GeneratorError};
use crate::autodiff::{Graph, Mat, NodeId, ScalarTape};
use crate::body::{body_vertices_generic, BodyParams, FREE_DIM, NUM_SHAPE, POSE_DIM};
use crate::geom::Vec3;
use crate::nn::{Adam, Bound};
use crate::scene::{global_scene_graph, GsgThresholds, Scene};
use crate::textparse::{parse_description, ParseError};

/// A scene, a one-person description and the body that realizes it.
#[derive(Debug, Clone)]
pub struct TrainingSample {
    pub scene: Arc<Scene>,
    pub text: String,
    pub params: BodyParams,
}

/// Network inputs and anchor-frame targets of one sample.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub inputs: ConditionInputs,
    pub beta: [f64; NUM_SHAPE],
    pub target: Vec<f64>,
    pub target_vertices: Vec<Vec3>,
    vertex_row: Mat,
}

pub fn prepare_sample(s: &TrainingSample, cfg: &GeneratorConfig, cloud_seed: u64) -> Result<PreparedSample, GeneratorError> {
    let people = parse_description(&s.text)?;
    let first = people.first().ok_or(ParseError::Empty)?;
    let gsg = global_scene_graph(&s.scene, &GsgThresholds::default());
    let grounding = ground_interaction(&s.scene, &gsg, first, cfg, cloud_seed)?;
    let local = grounding.frame.params_to_local(&s.params)?;
    let vrow = vertex_row(&local)?;
    let target_vertices = vrow.as_slice().expect("contiguous").chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    Ok(PreparedSample {
        inputs: grounding.inputs,
        beta: local.beta,
        target: local.free_vector(),
        target_vertices,
        vertex_row: vrow,
    })
}

/// Mean vertex distance between the target and its reconstruction through
/// the posterior mean (z = mu).
pub fn reconstruction_error(gen: &Generator, s: &PreparedSample) -> Result<f64, GeneratorError> {
    let mut g = Graph::new();
    let p = gen.store.bind(&mut g, false);
    let cond = gen.condition_node(&mut g, &p, &s.inputs)?;
    let (mu, _) = gen.posterior_nodes(&mut g, &p, &s.vertex_row, cond);
    let out = gen.decode_node(&mut g, &p, mu, cond, &s.beta, &s.inputs.tokens)?;
    let free: Vec<f64> = g.value(out).iter().copied().collect();
    let verts = body_vertices_generic(&s.beta, &free[0..3], &free[3..9], &free[9..9 + POSE_DIM])?;
    let n = verts.len() as f64;
    Ok(verts.iter().zip(&s.target_vertices).map(|(v, t)| v.distance(t)).sum::<f64>() / n)
}

/// Linear KL warm-up from 0 to `max` over the first `warmup` fraction of steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlSchedule {
    pub max: f64,
    pub warmup: f64,
}

impl Default for KlSchedule {
    fn default() -> Self {
        Self { max: 0.1, warmup: 0.2 }
    }
}

impl KlSchedule {
    pub fn weight(&self, step: usize, total: usize) -> f64 {
        let ramp = self.warmup * total as f64;
        if ramp <= 0.0 {
            return self.max;
        }
        self.max * (step as f64 / ramp).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// The learning rate follows a cosine from `lr` down to `lr * lr_final`.
    pub lr_final: f64,
    pub kl: KlSchedule,
    pub param_weight: f64,
    pub vertex_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 8, batch: 16, lr: 3e-4, lr_final: 0.01, kl: KlSchedule::default(), param_weight: 1.0, vertex_weight: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub param: f64,
    pub vertex: f64,
    pub kl: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: usize,
    /// Weighted parameter plus vertex reconstruction.
    pub recon: f64,
    pub kl: f64,
    pub kl_weight: f64,
    pub total: f64,
}

/// Mean squared vertex distance and its gradient with respect to the free
/// vector (hand entries get zero).
pub fn vertex_loss(free: &[f64], beta: &[f64; NUM_SHAPE], target: &[Vec3]) -> Result<(f64, Vec<f64>), GeneratorError> {
    let tape = ScalarTape::new();
    let x = tape.inputs(&free[..9 + POSE_DIM]);
    let verts = body_vertices_generic(beta, &x[0..3], &x[3..9], &x[9..])?;
    let mut acc = crate::autodiff::Var::constant(0.0);
    for (v, t) in verts.iter().zip(target) {
        acc += (*v - Vec3::lift(*t)).norm_squared();
    }
    let loss = acc * crate::autodiff::Var::constant(1.0 / target.len() as f64);
    let mut grad = tape.gradient(loss, &x);
    grad.resize(FREE_DIM, 0.0);
    Ok((loss.value(), grad))
}

/// Builds one sample's loss in `g`. `noise` is the reparameterization draw.
pub fn sample_loss(
    gen: &Generator,
    g: &mut Graph,
    p: &Bound,
    s: &PreparedSample,
    noise: &[f64],
    kl_weight: f64,
    tc: &TrainConfig,
) -> Result<(NodeId, LossBreakdown), GeneratorError> {
    let cond = gen.condition_node(g, p, &s.inputs)?;
    let (mu, logvar) = gen.posterior_nodes(g, p, &s.vertex_row, cond);
    let half = g.scale(logvar, 0.5);
    let std = g.exp(half);
    let eps = g.constant(row(noise));
    let spread = g.mul(std, eps);
    let z = g.add(mu, spread);
    let out = gen.decode_node(g, p, z, cond, &s.beta, &s.inputs.tokens)?;

    let target = g.constant(row(&s.target));
    let diff = g.sub(out, target);
    let sq = g.mul(diff, diff);
    let sse = g.sum(sq);
    let param = g.scale(sse, 1.0 / FREE_DIM as f64);

    let free: Vec<f64> = g.value(out).iter().copied().collect();
    let (vl, vgrad) = vertex_loss(&free, &s.beta, &s.target_vertices)?;
    let vertex = g.external(out, vl, row(&vgrad));

    let mu2 = g.mul(mu, mu);
    let var = g.exp(logvar);
    let a = g.add(mu2, var);
    let b = g.sub(a, logvar);
    let ones = g.constant(Mat::from_elem((1, gen.config.latent), -1.0));
    let c = g.add(b, ones);
    let kl_sum = g.sum(c);
    let kl = g.scale(kl_sum, 0.5);

    let wp = g.scale(param, tc.param_weight);
    let wv = g.scale(vertex, tc.vertex_weight);
    let wk = g.scale(kl, kl_weight);
    let recon = g.add(wp, wv);
    let total = g.add(recon, wk);
    // host-side KL with expm1, which stays non-negative where the graph's
    // rounding might not
    let kl_value = 0.5
        * g.value(mu)
            .iter()
            .zip(g.value(logvar).iter())
            .map(|(m, lv)| m * m + (lv.exp_m1() - lv))
            .sum::<f64>();
    let br = LossBreakdown { param: g.scalar(param), vertex: vl, kl: kl_value, total: g.scalar(total) };
    Ok((total, br))
}

/// Loss of one sample with fixed noise, and its gradient for every block.
pub fn loss_and_gradients(
    gen: &Generator,
    s: &PreparedSample,
    noise: &[f64],
    kl_weight: f64,
    tc: &TrainConfig,
) -> Result<(LossBreakdown, BTreeMap<String, Mat>), GeneratorError> {
    let mut g = Graph::new();
    let p = gen.store.bind(&mut g, true);
    let (total, br) = sample_loss(gen, &mut g, &p, s, noise, kl_weight, tc)?;
    let mut grads = g.backward(total);
    Ok((br, p.collect_grads(&gen.store, &mut grads)))
}

/// Trains `gen` in place. Every step's averaged losses go to `on_step` and
/// into the returned log.
pub fn train(
    gen: &mut Generator,
    data: &[TrainingSample],
    tc: &TrainConfig,
    mut on_step: impl FnMut(&TrainLogRow),
) -> Result<Vec<TrainLogRow>, GeneratorError> {
    if data.is_empty() {
        return Err(GeneratorError::EmptyDataset);
    }
    let prepared = data
        .iter()
        .enumerate()
        .map(|(i, s)| prepare_sample(s, &gen.config, tc.seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    train_prepared(gen, &prepared, tc, &mut on_step)
}

pub fn train_prepared(
    gen: &mut Generator,
    prepared: &[PreparedSample],
    tc: &TrainConfig,
    on_step: &mut impl FnMut(&TrainLogRow),
) -> Result<Vec<TrainLogRow>, GeneratorError> {
    if prepared.is_empty() {
        return Err(GeneratorError::EmptyDataset);
    }
    let batch = tc.batch.max(1);
    let per_epoch = prepared.len().div_ceil(batch);
    let total_steps = per_epoch * tc.epochs;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut adam = Adam::new(tc.lr);
    let mut log = Vec::with_capacity(total_steps);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut step = 0;
    for _ in 0..tc.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let kl_weight = tc.kl.weight(step, total_steps);
            let progress = step as f64 / total_steps.max(1) as f64;
            let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
            adam.lr = tc.lr * (tc.lr_final + (1.0 - tc.lr_final) * cosine);
            let mut g = Graph::new();
            let p = gen.store.bind(&mut g, true);
            let mut nodes = Vec::with_capacity(chunk.len());
            let mut sum = LossBreakdown::default();
            for &i in chunk {
                let noise: Vec<f64> = (0..gen.config.latent).map(|_| rng.sample(StandardNormal)).collect();
                let (node, br) = sample_loss(gen, &mut g, &p, &prepared[i], &noise, kl_weight, tc)?;
                if !br.total.is_finite() {
                    return Err(GeneratorError::NonFinite {
                        step,
                        detail: format!(
                            "sample {i}: param {} vertex {} kl {} (kl weight {kl_weight})",
                            br.param, br.vertex, br.kl
                        ),
                    });
                }
                nodes.push(node);
                sum.param += br.param;
                sum.vertex += br.vertex;
                sum.kl += br.kl;
                sum.total += br.total;
            }
            let stacked = g.concat_cols(&nodes);
            let batch_sum = g.sum(stacked);
            let mean = g.scale(batch_sum, 1.0 / chunk.len() as f64);
            let mut grads = g.backward(mean);
            let grads = p.collect_grads(&gen.store, &mut grads);
            adam.step(&mut gen.store, &grads);
            let n = chunk.len() as f64;
            let row = TrainLogRow {
                step,
                recon: (tc.param_weight * sum.param + tc.vertex_weight * sum.vertex) / n,
                kl: sum.kl / n,
                kl_weight,
                total: sum.total / n,
            };
            on_step(&row);
            log.push(row);
            step += 1;
        }
    }
    Ok(log)
}

/// Training curve as CSV with a header row.
pub fn write_log_csv(rows: &[TrainLogRow], path: &Path) -> Result<(), GeneratorError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| GeneratorError::Io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| GeneratorError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{FloorExtent, PrimitiveSpec, SceneObject};

    pub(crate) fn chair_sample() -> TrainingSample {
        let chair = SceneObject::new(
            "chair_0",
            "chair",
            [0.5, 0.3, 0.0],
            [0.0, 0.0, 0.4],
            vec![
                PrimitiveSpec::cuboid([0.0, 0.0, 0.225], [0.45, 0.45, 0.45]),
                PrimitiveSpec::cuboid([0.0, 0.2, 0.65], [0.45, 0.05, 0.4]),
            ],
            None,
        )
        .unwrap();
        let table = SceneObject::new(
            "table_0",
            "table",
            [0.5, -0.5, 0.0],
            [0.0; 3],
            vec![PrimitiveSpec::cuboid([0.0, 0.0, 0.375], [0.8, 0.6, 0.75])],
            None,
        )
        .unwrap();
        let scene = Scene::new(vec![chair, table], FloorExtent { min: [-2.0; 2], max: [2.0; 2] }).unwrap();
        let mut params = BodyParams::rest();
        params.t = [0.5, 0.3, 0.9];
        params.set_joint_rotation(1, [-1.4, 0.0, 0.0]);
        params.set_joint_rotation(2, [-1.4, 0.0, 0.0]);
        TrainingSample { scene: Arc::new(scene), text: "a person sits on the chair near the table".into(), params }
    }

    #[test]
    fn vertex_loss_gradient_matches_differences() {
        let s = chair_sample();
        let target = crate::body::body_mesh(&s.params).unwrap().vertices;
        let mut free = s.params.free_vector();
        free[0] += 0.05;
        free[12] += 0.2;
        let (_, grad) = vertex_loss(&free, &s.params.beta, &target).unwrap();
        for i in [0, 2, 4, 12, 40] {
            let h = 1e-6;
            let mut a = free.clone();
            a[i] += h;
            let mut b = free.clone();
            b[i] -= h;
            let fd = (vertex_loss(&a, &s.params.beta, &target).unwrap().0 - vertex_loss(&b, &s.params.beta, &target).unwrap().0) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn kl_schedule_ramps() {
        let k = KlSchedule::default();
        assert_eq!(k.weight(0, 100), 0.0);
        assert!((k.weight(10, 100) - 0.05).abs() < 1e-12);
        assert_eq!(k.weight(90, 100), 0.1);
    }

    #[test]
    fn first_step_is_reproducible() {
        let cfg = GeneratorConfig::tiny();
        let s = vec![chair_sample()];
        let tc = TrainConfig { epochs: 1, batch: 1, ..TrainConfig::default() };
        let mut a = Generator::new(cfg, 5).unwrap();
        let mut b = Generator::new(cfg, 5).unwrap();
        let la = train(&mut a, &s, &tc, |_| {}).unwrap();
        let lb = train(&mut b, &s, &tc, |_| {}).unwrap();
        assert_eq!(la[0].total.to_bits(), lb[0].total.to_bits());
        assert!(la.iter().all(|r| r.kl >= 0.0));
    }
}
