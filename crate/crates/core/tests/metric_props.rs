mod common;

use hsigen::body::BodyParams;
use hsigen::geom::Vec3;
use hsigen::pipeline::{contact_fraction, diversity, non_collision_fraction};
use hsigen::scene::{PrimitiveSpec, Scene, SceneObject};
use proptest::prelude::*;

fn scene() -> Scene {
    let table = SceneObject::new("box_0", "box", [0.0, 0.0, 0.4], [0.0, 0.0, 0.3], vec![PrimitiveSpec::cuboid([0.0; 3], [0.8, 0.6, 0.8])], None)
        .unwrap();
    common::room(vec![table])
}

fn points() -> impl Strategy<Value = Vec<(Vec3, bool)>> {
    prop::collection::vec(((-1.5..1.5f64, -1.5..1.5f64, -0.2..1.2f64), any::<bool>()), 1..60)
        .prop_map(|v| v.into_iter().map(|((x, y, z), l)| (Vec3::new(x, y, z), l)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_ignore_vertex_order(pts in points(), seed in any::<u64>()) {
        let s = scene();
        let (v, l): (Vec<Vec3>, Vec<bool>) = pts.iter().cloned().unzip();
        let mut shuffled = pts.clone();
        use rand::{seq::SliceRandom, SeedableRng};
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (w, m): (Vec<Vec3>, Vec<bool>) = shuffled.into_iter().unzip();
        match (contact_fraction(&v, &l, &s, 0.02), contact_fraction(&w, &m, &s, 0.02)) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&a));
            }
            // nothing labeled is an error either way
            (Err(_), Err(_)) => prop_assert!(!l.contains(&true)),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
        let (a, b) = (non_collision_fraction(&v, &s), non_collision_fraction(&w, &s));
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn entropy_is_bounded(offsets in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -0.5..0.5f64), 2..40), k in 1usize..6, seed in 0u64..100) {
        let samples: Vec<BodyParams> = offsets.iter().map(|&(x, y, r)| {
            let mut p = BodyParams::rest();
            p.t = [x, y, 0.9];
            p.pose[3] = r;
            p
        }).collect();
        let k = k.min(samples.len());
        let d = diversity(&samples, k, seed).unwrap();
        prop_assert!(d.entropy >= -1e-12 && d.entropy <= (k as f64).log2() + 1e-12, "entropy {} for k {}", d.entropy, k);
        prop_assert!(d.cluster_size >= 0.0);
    }
}
