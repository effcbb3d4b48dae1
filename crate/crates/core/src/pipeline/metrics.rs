//! Physical plausibility and diversity scores.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::body::{BodyMesh, BodyParams, POSE_DIM};
use crate::geom::Vec3;
use crate::scene::Scene;

const KMEANS_ITERATIONS: usize = 50;

/// Share of the labeled vertices lying within `eps` of a scene surface.
pub fn contact_fraction(vertices: &[Vec3], labels: &[bool], scene: &Scene, eps: f64) -> Result<f64, PipelineError> {
    if vertices.len() != labels.len() {
        return Err(PipelineError::Metric(format!("{} vertices but {} labels", vertices.len(), labels.len())));
    }
    let labeled: Vec<&Vec3> = vertices.iter().zip(labels).filter(|(_, l)| **l).map(|(v, _)| v).collect();
    if labeled.is_empty() {
        return Err(PipelineError::Metric("contact score needs at least one labeled vertex".into()));
    }
    let hits = labeled.iter().filter(|v| scene.sdf(**v).abs() <= eps).count();
    Ok(hits as f64 / labeled.len() as f64)
}

pub fn contact_score(mesh: &BodyMesh, scene: &Scene, eps: f64) -> Result<f64, PipelineError> {
    contact_fraction(&mesh.vertices, &mesh.contact.labels, scene, eps)
}

/// Share of vertices with a non-negative scene distance; 1 for no vertices.
pub fn non_collision_fraction(vertices: &[Vec3], scene: &Scene) -> f64 {
    if vertices.is_empty() {
        return 1.0;
    }
    vertices.iter().filter(|v| scene.sdf(*v) >= 0.0).count() as f64 / vertices.len() as f64
}

pub fn non_collision_score(mesh: &BodyMesh, scene: &Scene) -> f64 {
    non_collision_fraction(&mesh.vertices, scene)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    /// Entropy of the cluster-size histogram, in bits.
    pub entropy: f64,
    /// Mean distance from a sample to its cluster center.
    pub cluster_size: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = dist2(c, x);
        if d < best.1 {
            best = (k, d);
        }
    }
    best.0
}

/// Lloyd's algorithm for `iterations` rounds after k-means++ seeding from
/// `seed`. Returns the centers and each point's cluster. An emptied cluster
/// keeps its previous center.
pub fn kmeans(points: &[Vec<f64>], k: usize, iterations: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<usize>), PipelineError> {
    if k == 0 || points.len() < k {
        return Err(PipelineError::Metric(format!("{} samples cannot form {k} clusters", points.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    while centers.len() < k {
        let d: Vec<f64> = points.iter().map(|p| dist2(&centers[nearest(&centers, p)], p)).collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random_range(0.0..total);
            d.iter().position(|w| {
                u -= w;
                u < 0.0
            })
            .unwrap_or(points.len() - 1)
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[next].clone());
    }
    let dim = points[0].len();
    let mut assign = vec![0; points.len()];
    for _ in 0..iterations {
        for (a, p) in assign.iter_mut().zip(points) {
            *a = nearest(&centers, p);
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (a, p) in assign.iter().zip(points) {
            counts[*a] += 1;
            for (s, x) in sums[*a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    for (a, p) in assign.iter_mut().zip(points) {
        *a = nearest(&centers, p);
    }
    Ok((centers, assign))
}

/// K-means over the flattened (t, r, pose) vectors, seeded with `seed`.
pub fn diversity(samples: &[BodyParams], k: usize, seed: u64) -> Result<Diversity, PipelineError> {
    let feats: Vec<Vec<f64>> = samples.iter().map(|s| s.free_vector()[..9 + POSE_DIM].to_vec()).collect();
    let (centers, assign) = kmeans(&feats, k, KMEANS_ITERATIONS, seed)?;
    let n = feats.len() as f64;
    let mut counts = vec![0usize; k];
    for a in &assign {
        counts[*a] += 1;
    }
    let entropy = counts
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0);
    let cluster_size = feats.iter().zip(&assign).map(|(f, a)| dist2(f, &centers[*a]).sqrt()).sum::<f64>() / n;
    Ok(Diversity { entropy, cluster_size })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{FloorExtent, PrimitiveSpec, SceneObject};

    fn box_room() -> Scene {
        let b = SceneObject::new("box_0", "box", [0.0, 0.0, 0.5], [0.0; 3], vec![PrimitiveSpec::cuboid([0.0; 3], [1.0; 3])], None)
            .unwrap();
        Scene::new(vec![b], FloorExtent { min: [-3.0, -3.0], max: [3.0, 3.0] }).unwrap()
    }

    #[test]
    fn half_of_six_labeled_vertices_touch() {
        let scene = box_room();
        // three on the box top, three well above it, two unlabeled far away
        let mut v: Vec<Vec3> = (0..3).map(|i| Vec3::new(0.1 * i as f64, 0.0, 1.005)).collect();
        v.extend((0..3).map(|i| Vec3::new(0.1 * i as f64, 0.0, 1.3)));
        v.extend([Vec3::new(2.0, 2.0, 1.0), Vec3::new(-2.0, 2.0, 1.0)]);
        let labels = [true, true, true, true, true, true, false, false];
        assert!((contact_fraction(&v, &labels, &scene, 0.02).unwrap() - 0.5).abs() < 1e-12);
        assert!(contact_fraction(&v, &[false; 8], &scene, 0.02).is_err());
    }

    #[test]
    fn one_of_a_hundred_inside() {
        let scene = box_room();
        let mut v: Vec<Vec3> = (0..99).map(|i| Vec3::new(-2.0 + 0.01 * i as f64, 2.0, 0.5)).collect();
        v.push(Vec3::new(0.0, 0.0, 0.5));
        assert!((non_collision_fraction(&v, &scene) - 0.99).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_form_one_tight_cluster() {
        let d = diversity(&vec![BodyParams::rest(); 10], 1, 0).unwrap();
        assert_eq!(d.entropy, 0.0);
        assert_eq!(d.cluster_size, 0.0);
        assert!(diversity(&vec![BodyParams::rest(); 3], 4, 0).is_err());
    }

    #[test]
    fn four_even_clusters_give_two_bits() {
        let mut samples = Vec::new();
        for c in 0..4 {
            for i in 0..25 {
                let mut p = BodyParams::rest();
                p.t = [10.0 * c as f64, 0.01 * i as f64, 0.0];
                samples.push(p);
            }
        }
        let d = diversity(&samples, 4, 3).unwrap();
        assert!((d.entropy - 2.0).abs() < 1e-6, "{}", d.entropy);
        assert!(d.cluster_size < 0.1);
    }
}
