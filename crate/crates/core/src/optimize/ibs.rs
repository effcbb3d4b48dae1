//! Interaction bisector surface: points (approximately) equidistant from a
//! body point set and a scene point set, found by rejection sampling.

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::OptimizeError;
use crate::body::BodyMesh;
use crate::geom::{Aabb, Vec3};
use crate::scene::{sample_scene_points_with, SampleOptions, Scene};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IbsConfig {
    pub candidates: usize,
    /// Relative equidistance tolerance, see [`is_equidistant`].
    pub tol: f64,
    /// Dilation of the joint bounding box that candidates are drawn from.
    pub margin: f64,
    /// Scene samples drawn around the body per computation.
    pub scene_points: usize,
    /// Only scene surfaces within this distance of the body box are sampled.
    pub scene_radius: f64,
}

impl Default for IbsConfig {
    fn default() -> Self {
        Self { candidates: 20_000, tol: 0.02, margin: 0.05, scene_points: 4000, scene_radius: 0.3 }
    }
}

/// `|d_body - d_scene|` within `tol` of the mean of the two distances.
pub fn is_equidistant(d_body: f64, d_scene: f64, tol: f64) -> bool {
    (d_body - d_scene).abs() <= tol * (0.5 * (d_body + d_scene) + EPS)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IbsPointSet {
    pub points: Vec<Vec3>,
    pub d_body: Vec<f64>,
    pub d_scene: Vec<f64>,
    /// Index of the nearest body point.
    pub nearest_body: Vec<usize>,
    /// Position of that body point when the set was computed.
    pub body_anchor: Vec<Vec3>,
    /// Nearest scene point.
    pub nearest_scene: Vec<Vec3>,
    pub penetration: Vec<bool>,
    pub contact: Vec<bool>,
}

impl IbsPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether point `i` belongs to the penalized subset (penetrating, or
    /// nearest to a contact-labeled body vertex).
    pub fn selected(&self, i: usize) -> bool {
        self.penetration[i] || self.contact[i]
    }

    /// Sets the flags from per-body-point penetration and contact masks.
    pub fn set_flags(&mut self, penetrating: &[bool], contact: &[bool]) {
        self.penetration = self.nearest_body.iter().map(|&b| penetrating[b]).collect();
        self.contact = self.nearest_body.iter().map(|&b| contact[b]).collect();
    }
}

/// Exact nearest-neighbor lookup over a fixed point set.
pub struct NearestIndex {
    tree: ImmutableKdTree<f64, 3>,
    points: Vec<Vec3>,
}

impl NearestIndex {
    pub fn new(points: &[Vec3]) -> Result<Self, OptimizeError> {
        if points.is_empty() {
            return Err(OptimizeError::Precondition("empty point set".into()));
        }
        let raw: Vec<[f64; 3]> = points.iter().map(|p| p.to_array()).collect();
        let tree = ImmutableKdTree::new_from_slice(&raw).map_err(|e| OptimizeError::Precondition(format!("{e:?}")))?;
        Ok(Self { tree, points: points.to_vec() })
    }

    /// Index of and distance to the nearest point.
    pub fn nearest(&self, p: &Vec3) -> (usize, f64) {
        let r = self.tree.query(&p.to_array()).nearest_one::<SquaredEuclidean<f64>>().execute();
        let i = r.item as usize;
        (i, self.points[i].distance(p))
    }

    pub fn point(&self, i: usize) -> Vec3 {
        self.points[i]
    }
}

fn identical(a: &[Vec3], b: &[Vec3]) -> bool {
    let key = |p: &Vec3| (p.x.to_bits(), p.y.to_bits(), p.z.to_bits());
    let mut ka: Vec<_> = a.iter().map(key).collect();
    let mut kb: Vec<_> = b.iter().map(key).collect();
    ka.sort_unstable();
    ka.dedup();
    kb.sort_unstable();
    kb.dedup();
    ka == kb
}

/// Samples `n` candidates uniformly in the joint bounding box (dilated by
/// `margin`) and keeps the equidistant ones. Flags are left unset (false).
pub fn compute_ibs(
    body: &[Vec3],
    scene: &[Vec3],
    n: usize,
    tol: f64,
    margin: f64,
    seed: u64,
) -> Result<IbsPointSet, OptimizeError> {
    if body.is_empty() || scene.is_empty() {
        return Err(OptimizeError::Precondition("IBS needs two non-empty point sets".into()));
    }
    if identical(body, scene) {
        return Err(OptimizeError::Precondition("IBS of identical point sets is undefined".into()));
    }
    let body_index = NearestIndex::new(body)?;
    let scene_index = NearestIndex::new(scene)?;
    let bbox = Aabb::from_points(body).union(&Aabb::from_points(scene)).dilate(margin);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = IbsPointSet::default();
    let range = |lo: f64, hi: f64, rng: &mut ChaCha8Rng| if hi > lo { rng.random_range(lo..hi) } else { lo };
    for _ in 0..n {
        let p = Vec3::new(
            range(bbox.min[0], bbox.max[0], &mut rng),
            range(bbox.min[1], bbox.max[1], &mut rng),
            range(bbox.min[2], bbox.max[2], &mut rng),
        );
        let (bi, db) = body_index.nearest(&p);
        let (si, ds) = scene_index.nearest(&p);
        if !is_equidistant(db, ds, tol) {
            continue;
        }
        out.points.push(p);
        out.d_body.push(db);
        out.d_scene.push(ds);
        out.nearest_body.push(bi);
        out.body_anchor.push(body[bi]);
        out.nearest_scene.push(scene_index.point(si));
        out.penetration.push(false);
        out.contact.push(false);
    }
    if out.is_empty() {
        log::warn!("IBS sampling kept none of {n} candidates");
    }
    Ok(out)
}

/// Scene surface samples around `region`: the floor below it plus every
/// object whose box comes within `radius`.
pub fn scene_points_near(scene: &Scene, region: &Aabb, cfg: &IbsConfig, seed: u64) -> Result<Vec<Vec3>, OptimizeError> {
    let zone = region.dilate(cfg.scene_radius);
    let near: Vec<_> = scene.objects.iter().filter(|o| o.aabb().gap(&zone) <= 0.0).cloned().collect();
    let local = Scene::new(near, scene.floor)?;
    let opts = SampleOptions {
        include_floor: true,
        floor_window: Some(([zone.min[0], zone.min[1]], [zone.max[0], zone.max[1]])),
    };
    let cloud = sample_scene_points_with(&local, cfg.scene_points, seed, &opts)?;
    let mut pts: Vec<Vec3> = cloud.points.into_iter().filter(|p| zone.distance_to_point(p) <= 0.0).collect();
    if pts.is_empty() {
        // nothing nearby: the floor point under the body still bounds it
        let c = region.center();
        pts.push(Vec3::new(c.x, c.y, 0.0));
    }
    Ok(pts)
}

/// IBS between a posed body and the scene around it, flagged for the
/// penetration / contact-correspondence subset.
pub fn body_ibs(mesh: &BodyMesh, scene: &Scene, cfg: &IbsConfig, seed: u64) -> Result<IbsPointSet, OptimizeError> {
    let region = Aabb::from_points(&mesh.vertices);
    let scene_pts = scene_points_near(scene, &region, cfg, seed)?;
    let mut ibs = compute_ibs(&mesh.vertices, &scene_pts, cfg.candidates, cfg.tol, cfg.margin, seed)?;
    let penetrating: Vec<bool> = mesh.vertices.iter().map(|v| scene.sdf(v) < 0.0).collect();
    ibs.set_flags(&penetrating, &mesh.contact.labels);
    Ok(ibs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_bisector() {
        let ibs = compute_ibs(&[Vec3::new(-1.0, 0.0, 0.0)], &[Vec3::new(1.0, 0.0, 0.0)], 20_000, 0.02, 0.1, 4).unwrap();
        assert!(!ibs.is_empty());
        for p in &ibs.points {
            assert!(p.x.abs() <= 0.02, "{p:?}");
        }
    }

    #[test]
    fn identical_sets_rejected() {
        let a = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let b = [a[1], a[0]];
        assert!(matches!(compute_ibs(&a, &b, 10, 0.02, 0.1, 0), Err(OptimizeError::Precondition(_))));
        assert!(compute_ibs(&[], &a, 10, 0.02, 0.1, 0).is_err());
    }

    #[test]
    fn nearest_index_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec3> =
            (0..300).map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random())).collect();
        let idx = NearestIndex::new(&pts).unwrap();
        for _ in 0..200 {
            let q = Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-0.5..1.5));
            let brute = pts.iter().map(|p| p.distance(&q)).fold(f64::INFINITY, f64::min);
            assert!((idx.nearest(&q).1 - brute).abs() < 1e-12);
        }
    }
}
