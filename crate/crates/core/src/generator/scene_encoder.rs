//! Two-level hierarchical point-set encoder for the scene feature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GeneratorError;
use crate::autodiff::{Graph, Mat, NodeId};
use crate::geom::Vec3;
use crate::graphs::ConceptLexicon;
use crate::nn::{self, Bound, ParamStore};
use crate::scene::LabeledPointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneEncoderConfig {
    pub min_points: usize,
    pub centers1: usize,
    pub k1: usize,
    pub radius1: f64,
    pub hidden1: usize,
    pub out1: usize,
    pub centers2: usize,
    pub k2: usize,
    pub radius2: f64,
    pub hidden2: usize,
    /// Length of the scene feature.
    pub out2: usize,
}

impl Default for SceneEncoderConfig {
    fn default() -> Self {
        Self {
            min_points: 256,
            centers1: 32,
            k1: 16,
            radius1: 0.6,
            hidden1: 64,
            out1: 128,
            centers2: 8,
            k2: 8,
            radius2: 1.5,
            hidden2: 128,
            out2: 256,
        }
    }
}

/// Farthest-point subsampling. Starts from the point farthest from the
/// centroid so the result does not depend on input order.
pub fn farthest_point_sample(points: &[Vec3], m: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut c = Vec3::zero();
    for p in points {
        c = c + *p;
    }
    let c = c.scale(1.0 / n as f64);
    let key = |i: usize, d: f64| (d, points[i].x, points[i].y, points[i].z);
    let better = |a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)| a.partial_cmp(&b) == Some(std::cmp::Ordering::Greater);
    let mut first = 0;
    for i in 1..n {
        if better(key(i, points[i].distance(&c)), key(first, points[first].distance(&c))) {
            first = i;
        }
    }
    let mut chosen = vec![first];
    let mut dist: Vec<f64> = points.iter().map(|p| p.distance(&points[first])).collect();
    while chosen.len() < m.min(n) {
        let mut next = 0;
        for i in 1..n {
            if better(key(i, dist[i]), key(next, dist[next])) {
                next = i;
            }
        }
        chosen.push(next);
        for i in 0..n {
            dist[i] = dist[i].min(points[i].distance(&points[next]));
        }
    }
    chosen
}

/// Up to `k` nearest points within `radius` of `center` (the nearest point
/// always counts), padded by repeating the nearest one.
pub fn ball_query(points: &[Vec3], center: &Vec3, radius: f64, k: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (p.distance(center), i)).collect();
    order.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| {
            let (pa, pb) = (&points[a.1], &points[b.1]);
            (pa.x, pa.y, pa.z).partial_cmp(&(pb.x, pb.y, pb.z)).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut out: Vec<usize> = order.iter().take(k).filter(|(d, _)| *d <= radius).map(|(_, i)| *i).collect();
    if out.is_empty() {
        out.push(order[0].1);
    }
    while out.len() < k {
        out.push(out[0]);
    }
    out
}

/// Neighborhood structure of one cloud. Depends only on geometry, so it is
/// computed once per cloud and reused across training steps.
#[derive(Debug, Clone)]
pub struct Grouping {
    /// Per-point input features: xyz then semantic one-hot.
    features: Mat,
    idx1: Vec<usize>,
    rel1: Mat,
    idx2: Vec<usize>,
    rel2: Mat,
}

impl SceneEncoderConfig {
    pub fn feature_dim(lex: &ConceptLexicon) -> usize {
        3 + lex.len() + 1
    }

    pub fn group(&self, cloud: &LabeledPointCloud, lex: &ConceptLexicon) -> Result<Grouping, GeneratorError> {
        let n = cloud.points.len();
        if n < self.min_points {
            return Err(GeneratorError::TooFewPoints { got: n, min: self.min_points });
        }
        let d = Self::feature_dim(lex);
        let mut features = Mat::zeros((n, d));
        for (i, (p, &label)) in cloud.points.iter().zip(&cloud.semantics).enumerate() {
            features[[i, 0]] = p.x;
            features[[i, 1]] = p.y;
            features[[i, 2]] = p.z;
            let slot = if (label as usize) <= lex.len() { label as usize } else { 0 };
            features[[i, 3 + slot]] = 1.0;
        }
        let c1 = farthest_point_sample(&cloud.points, self.centers1);
        let centers1: Vec<Vec3> = c1.iter().map(|&i| cloud.points[i]).collect();
        let (idx1, rel1) = neighborhoods(&cloud.points, &centers1, self.radius1, self.k1);
        let c2 = farthest_point_sample(&centers1, self.centers2);
        let centers2: Vec<Vec3> = c2.iter().map(|&i| centers1[i]).collect();
        let (idx2, rel2) = neighborhoods(&centers1, &centers2, self.radius2, self.k2);
        Ok(Grouping { features, idx1, rel1, idx2, rel2 })
    }

    pub fn init(&self, store: &mut ParamStore, prefix: &str, lex: &ConceptLexicon, rng: &mut impl Rng) {
        let d = Self::feature_dim(lex);
        nn::init_mlp2(store, &format!("{prefix}.sa1"), 3 + d, self.hidden1, self.out1, rng);
        nn::init_mlp2(store, &format!("{prefix}.sa2"), 3 + self.out1, self.hidden2, self.out2, rng);
    }

    /// 1×out2 scene feature.
    pub fn forward(&self, g: &mut Graph, p: &Bound, prefix: &str, grouping: &Grouping) -> NodeId {
        let x = g.constant(grouping.features.clone());
        let gathered = g.gather(x, &grouping.idx1);
        let rel = g.constant(grouping.rel1.clone());
        let input = g.concat_cols(&[rel, gathered]);
        let h = nn::mlp2(g, p, &format!("{prefix}.sa1"), input);
        let h = g.gelu(h);
        let h1 = g.group_max(h, self.k1);
        let gathered = g.gather(h1, &grouping.idx2);
        let rel = g.constant(grouping.rel2.clone());
        let input = g.concat_cols(&[rel, gathered]);
        let h = nn::mlp2(g, p, &format!("{prefix}.sa2"), input);
        let h2 = g.group_max(h, self.k2);
        let groups = g.shape(h2).0;
        g.group_max(h2, groups)
    }
}

fn neighborhoods(points: &[Vec3], centers: &[Vec3], radius: f64, k: usize) -> (Vec<usize>, Mat) {
    let mut idx = Vec::with_capacity(centers.len() * k);
    let mut rel = Mat::zeros((centers.len() * k, 3));
    for (ci, c) in centers.iter().enumerate() {
        for (j, i) in ball_query(points, c, radius, k).into_iter().enumerate() {
            let d = points[i] - *c;
            rel.row_mut(ci * k + j).assign(&ndarray::arr1(&[d.x, d.y, d.z]));
            idx.push(i);
        }
    }
    (idx, rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::default_lexicon;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> LabeledPointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = LabeledPointCloud::default();
        for _ in 0..n {
            c.points.push(Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..1.0)));
            c.semantics.push(rng.random_range(1..10));
            c.source_object.push("x".into());
        }
        c
    }

    fn encode(cfg: &SceneEncoderConfig, store: &ParamStore, c: &LabeledPointCloud) -> Vec<f64> {
        let grouping = cfg.group(c, default_lexicon()).unwrap();
        let mut g = Graph::new();
        let p = store.bind(&mut g, false);
        let out = cfg.forward(&mut g, &p, "scene", &grouping);
        g.value(out).iter().copied().collect()
    }

    #[test]
    fn shape_and_permutation_invariance() {
        let cfg = SceneEncoderConfig::default();
        let mut store = ParamStore::new();
        cfg.init(&mut store, "scene", default_lexicon(), &mut ChaCha8Rng::seed_from_u64(1));
        let c = cloud(400, 2);
        let a = encode(&cfg, &store, &c);
        assert_eq!(a.len(), 256);
        let mut perm: Vec<usize> = (0..c.points.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
        let shuffled = LabeledPointCloud {
            points: perm.iter().map(|&i| c.points[i]).collect(),
            semantics: perm.iter().map(|&i| c.semantics[i]).collect(),
            source_object: perm.iter().map(|&i| c.source_object[i].clone()).collect(),
        };
        let b = encode(&cfg, &store, &shuffled);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_points() {
        let cfg = SceneEncoderConfig::default();
        assert!(matches!(
            cfg.group(&cloud(10, 1), default_lexicon()),
            Err(GeneratorError::TooFewPoints { got: 10, min: 256 })
        ));
    }

    #[test]
    fn fps_spreads_points() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let s = farthest_point_sample(&pts, 3);
        let mut xs: Vec<f64> = s.iter().map(|&i| pts[i].x).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs[0], 0.0);
        assert_eq!(xs[2], 9.0);
        assert!((xs[1] - 4.5).abs() <= 0.5);
    }
}
