//! Fixtures and finite-difference helpers shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use hsigen::body::{assign_contact_labels, body_mesh, BodyParams};
use hsigen::generator::{
    loss_and_gradients, prepare_sample, Generator, GeneratorConfig, TrainConfig, TrainingSample,
};
use hsigen::optimize::{body_ibs, OptimizeConfig, Problem, Term};
use hsigen::pla::ActionMention;
use hsigen::scene::{FloorExtent, PrimitiveSpec, Scene, SceneObject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn chair(id: &str, x: f64, y: f64, yaw: f64) -> SceneObject {
    SceneObject::new(
        id,
        "chair",
        [x, y, 0.0],
        [0.0, 0.0, yaw],
        vec![PrimitiveSpec::cuboid([0.0, 0.0, 0.225], [0.45, 0.45, 0.45]), PrimitiveSpec::cuboid([0.0, 0.2, 0.65], [0.45, 0.05, 0.4])],
        None,
    )
    .unwrap()
}

pub fn table(id: &str, x: f64, y: f64) -> SceneObject {
    SceneObject::new(id, "table", [x, y, 0.0], [0.0; 3], vec![PrimitiveSpec::cuboid([0.0, 0.0, 0.375], [0.8, 0.6, 0.75])], None)
        .unwrap()
}

pub fn room(objects: Vec<SceneObject>) -> Scene {
    Scene::new(objects, FloorExtent { min: [-2.5, -2.5], max: [2.5, 2.5] }).unwrap()
}

pub fn chair_table_scene() -> Scene {
    room(vec![chair("chair_0", 0.5, 0.3, 0.4), table("table_0", 0.5, -0.5)])
}

/// A seated pose on `chair_0` of [`chair_table_scene`].
pub fn seated_params() -> BodyParams {
    let mut p = BodyParams::rest();
    p.t = [0.5, 0.3, 0.9];
    p.set_joint_rotation(1, [-1.4, 0.0, 0.0]);
    p.set_joint_rotation(2, [-1.4, 0.0, 0.0]);
    p
}

pub fn chair_sample() -> TrainingSample {
    TrainingSample {
        scene: Arc::new(chair_table_scene()),
        text: "a person sits on the chair near the table".into(),
        params: seated_params(),
    }
}

/// Central differences of `f` at `x`.
pub fn fd_gradient(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let up = f(&y);
            y[i] = x[i] - h;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// ‖a − b‖ / max(‖a‖, ‖b‖); zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Worst relative error per refinement term over `configs` random bodies
/// that touch, penetrate and overlap things, plus how many configurations
/// had a non-zero gradient for that term.
pub fn optimize_gradient_errors(configs: usize, seed: u64) -> Vec<(Term, f64, usize)> {
    let scene = room(vec![
        SceneObject::new("box_0", "box", [0.0, 0.0, 0.5], [0.0; 3], vec![PrimitiveSpec::cuboid([0.0; 3], [1.0; 3])], None).unwrap(),
    ]);
    let contact = assign_contact_labels(&[
        ActionMention::new("stand"),
        ActionMention::new("touch"),
        ActionMention::new("lie"),
    ])
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(Term, f64, usize)> = Term::ALL.iter().map(|t| (*t, 0.0, 0)).collect();
    for _ in 0..configs {
        let mut p = BodyParams::rest();
        p.t = [rng.random_range(0.35..0.75), rng.random_range(-0.3..0.3), rng.random_range(0.85..1.0)];
        for j in 0..p.pose.len() {
            p.pose[j] = rng.random_range(-0.3..0.3);
        }
        let mut other = BodyParams::rest();
        other.t = [p.t[0] + rng.random_range(0.1..0.3), p.t[1], 0.9];
        let others = vec![body_mesh(&other).unwrap()];
        let mut init = p.clone();
        init.t[2] += 0.05;
        let problem = Problem::new(&scene, &others, contact.clone(), init, OptimizeConfig::default()).unwrap();
        let ibs = body_ibs(&problem.mesh(&p).unwrap(), &scene, &Default::default(), 7).unwrap();
        // evaluate a little away from the pose the IBS was built for
        let mut free = p.free_vector();
        for v in free.iter_mut() {
            *v += rng.random_range(-0.01..0.01);
        }
        for (term, worst, active) in out.iter_mut() {
            let (_, _, analytic) = problem.gradient(&free, Some(&ibs), Some(*term)).unwrap();
            let numeric = fd_gradient(|x| problem.gradient(x, Some(&ibs), Some(*term)).unwrap().1, &free, 1e-6);
            if analytic.iter().any(|g| *g != 0.0) {
                *active += 1;
            }
            *worst = worst.max(relative_error(&analytic, &numeric));
        }
    }
    out
}

/// Worst relative error of the training-loss gradient over `configs`
/// (model seed, noise, KL weight) draws on the tiny model; every block is
/// probed at a few random entries. Returns (worst error, entries checked).
pub fn training_gradient_error(configs: usize) -> (f64, usize) {
    let cfg = GeneratorConfig::tiny();
    let tc = TrainConfig::default();
    let sample = prepare_sample(&chair_sample(), &cfg, 0).unwrap();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for c in 0..configs {
        let mut gen = Generator::new(cfg, c as u64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + c as u64);
        let noise: Vec<f64> = (0..cfg.latent).map(|_| rng.sample(StandardNormal)).collect();
        let kl_weight = rng.random_range(0.0..0.2);
        let (_, grads) = loss_and_gradients(&gen, &sample, &noise, kl_weight, &tc).unwrap();
        let names: Vec<String> = grads.keys().cloned().collect();
        for name in names {
            let (rows, cols) = grads[&name].dim();
            for _ in 0..2 {
                let (r, k) = (rng.random_range(0..rows), rng.random_range(0..cols));
                let analytic = grads[&name][[r, k]];
                let h = 1e-5;
                let orig = gen.store.get(&name).unwrap()[[r, k]];
                let eval = |v: f64, gen: &mut Generator| {
                    gen.store.get_mut(&name).unwrap()[[r, k]] = v;
                    loss_and_gradients(gen, &sample, &noise, kl_weight, &tc).unwrap().0.total
                };
                let numeric = (eval(orig + h, &mut gen) - eval(orig - h, &mut gen)) / (2.0 * h);
                gen.store.get_mut(&name).unwrap()[[r, k]] = orig;
                // below 1e-6 the central difference is dominated by round-off
                // (about 1e-11 at this step), e.g. key biases, whose true
                // gradient is zero under softmax shift invariance
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(err);
                checked += 1;
            }
        }
    }
    (worst, checked)
}
