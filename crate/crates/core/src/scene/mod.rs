//! Primitive-composed indoor scenes: analytic signed distances, surface
//! sampling and a rule-based global scene graph.
//!
//! Frame: +z up, floor at z = 0, +x to the right and −y toward the front.

mod document;
mod gsg;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Aabb, Mat3, Real, Vec3};
use crate::graphs::default_lexicon;

pub use document::{build_scene, scene_to_document};
pub use gsg::{global_scene_graph, GsgThresholds, REL_ABOVE, REL_BEHIND, REL_FRONT, REL_LEFT, REL_NEAR, REL_ON, REL_RIGHT};
pub(crate) use gsg::pair_relations;

/// Node id and source id reserved for the floor.
pub const FLOOR_ID: &str = "floor";
/// Points whose scene distance is below this are inside some other solid.
const BURIED_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("malformed scene document: {0}")]
    Malformed(String),
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("object '{0}' lies outside the floor extent")]
    OutsideFloor(String),
    #[error("invalid primitive in '{0}': {1}")]
    InvalidPrimitive(String, String),
    #[error("category '{0}' is not in the lexicon; give a semantic_label")]
    UnknownCategory(String),
    #[error("scene has no objects")]
    Empty,
    #[error("sample count must be at least 1")]
    InvalidCount,
    #[error("no exposed surface to sample")]
    NoSurface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Box,
    Cylinder,
    Sphere,
}

/// Primitive as declared: pose relative to the owning object, and
/// dimensions (box: full extents; cylinder: radius, height along local z;
/// sphere: radius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub shape: ShapeKind,
    #[serde(default)]
    pub position: [f64; 3],
    /// Roll, pitch, yaw in radians.
    #[serde(default)]
    pub rotation: [f64; 3],
    pub dimensions: Vec<f64>,
}

impl PrimitiveSpec {
    pub fn cuboid(position: [f64; 3], extents: [f64; 3]) -> Self {
        Self { shape: ShapeKind::Box, position, rotation: [0.0; 3], dimensions: extents.to_vec() }
    }

    pub fn cylinder(position: [f64; 3], radius: f64, height: f64) -> Self {
        Self { shape: ShapeKind::Cylinder, position, rotation: [0.0; 3], dimensions: vec![radius, height] }
    }

    pub fn sphere(position: [f64; 3], radius: f64) -> Self {
        Self { shape: ShapeKind::Sphere, position, rotation: [0.0; 3], dimensions: vec![radius] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Shape {
    Cuboid { half: Vec3 },
    Cylinder { radius: f64, half_height: f64 },
    Sphere { radius: f64 },
}

/// Primitive placed in the world.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    shape: Shape,
    rot: Mat3,
    center: Vec3,
}

impl Primitive {
    fn from_spec(spec: &PrimitiveSpec, obj_rot: &Mat3, obj_pos: &Vec3, owner: &str) -> Result<Self, SceneError> {
        let bad = |m: &str| SceneError::InvalidPrimitive(owner.to_string(), m.to_string());
        let d = &spec.dimensions;
        if d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(bad("dimensions must be positive"));
        }
        let shape = match (spec.shape, d.len()) {
            (ShapeKind::Box, 3) => Shape::Cuboid { half: Vec3::new(d[0] / 2.0, d[1] / 2.0, d[2] / 2.0) },
            (ShapeKind::Cylinder, 2) => Shape::Cylinder { radius: d[0], half_height: d[1] / 2.0 },
            (ShapeKind::Sphere, 1) => Shape::Sphere { radius: d[0] },
            _ => return Err(bad("wrong number of dimensions for shape")),
        };
        if spec.position.iter().chain(&spec.rotation).any(|v| !v.is_finite()) {
            return Err(bad("non-finite pose"));
        }
        let local_rot = Mat3::from_euler(spec.rotation);
        let rot = obj_rot.mul_mat(&local_rot);
        if !rot.is_rotation(1e-9) {
            return Err(bad("pose is not rigid"));
        }
        let center = *obj_pos + obj_rot.mul_vec(&Vec3::from_array(spec.position));
        Ok(Self { shape, rot, center })
    }

    fn to_local<T: Real>(&self, p: &Vec3<T>) -> Vec3<T> {
        Mat3::lift(&self.rot.transpose()).mul_vec(&(*p - Vec3::lift(self.center)))
    }

    pub fn sdf<T: Real>(&self, p: &Vec3<T>) -> T {
        let q = self.to_local(p);
        match self.shape {
            Shape::Cuboid { half } => {
                let d = Vec3::new(q.x.abs() - T::cst(half.x), q.y.abs() - T::cst(half.y), q.z.abs() - T::cst(half.z));
                let outside = d.map(|v| v.max(T::zero())).norm();
                outside + d.max_elem().min(T::zero())
            }
            Shape::Cylinder { radius, half_height } => {
                let radial = (q.x * q.x + q.y * q.y).sqrt() - T::cst(radius);
                let axial = q.z.abs() - T::cst(half_height);
                let ro = radial.max(T::zero());
                let ao = axial.max(T::zero());
                (ro * ro + ao * ao).sqrt() + radial.max(axial).min(T::zero())
            }
            Shape::Sphere { radius } => q.norm() - T::cst(radius),
        }
    }

    /// Exact point-in-solid test, independent of the distance function.
    pub fn contains(&self, p: &Vec3) -> bool {
        let q = self.to_local(p);
        match self.shape {
            Shape::Cuboid { half } => q.x.abs() < half.x && q.y.abs() < half.y && q.z.abs() < half.z,
            Shape::Cylinder { radius, half_height } => q.x * q.x + q.y * q.y < radius * radius && q.z.abs() < half_height,
            Shape::Sphere { radius } => q.norm_squared() < radius * radius,
        }
    }

    pub fn area(&self) -> f64 {
        match self.shape {
            Shape::Cuboid { half } => 8.0 * (half.x * half.y + half.y * half.z + half.x * half.z),
            Shape::Cylinder { radius, half_height } => {
                2.0 * std::f64::consts::PI * radius * (2.0 * half_height) + 2.0 * std::f64::consts::PI * radius * radius
            }
            Shape::Sphere { radius } => 4.0 * std::f64::consts::PI * radius * radius,
        }
    }

    pub fn aabb(&self) -> Aabb {
        let ext = match self.shape {
            Shape::Cuboid { half } => half,
            Shape::Cylinder { radius, half_height } => Vec3::new(radius, radius, half_height),
            Shape::Sphere { radius } => {
                return Aabb::from_points(&[self.center]).dilate(radius);
            }
        };
        let mut b = Aabb::empty();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let local = Vec3::new(sx * ext.x, sy * ext.y, sz * ext.z);
                    b.grow(&(self.center + self.rot.mul_vec(&local)));
                }
            }
        }
        b
    }

    /// Uniform point on the surface.
    pub fn sample_surface(&self, rng: &mut impl Rng) -> Vec3 {
        use std::f64::consts::PI;
        let local = match self.shape {
            Shape::Cuboid { half } => {
                let faces = [half.y * half.z, half.x * half.z, half.x * half.y];
                let total: f64 = faces.iter().sum();
                let mut pick = rng.random_range(0.0..total);
                let mut axis = 2;
                for (i, a) in faces.iter().enumerate() {
                    if pick < *a {
                        axis = i;
                        break;
                    }
                    pick -= a;
                }
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let mut c = [
                    rng.random_range(-half.x..=half.x),
                    rng.random_range(-half.y..=half.y),
                    rng.random_range(-half.z..=half.z),
                ];
                c[axis] = sign * half.to_array()[axis];
                Vec3::from_array(c)
            }
            Shape::Cylinder { radius, half_height } => {
                let side = 2.0 * radius * (2.0 * half_height);
                let caps = radius * radius;
                let theta = rng.random_range(0.0..2.0 * PI);
                if rng.random_range(0.0..side + caps) < side {
                    Vec3::new(radius * theta.cos(), radius * theta.sin(), rng.random_range(-half_height..=half_height))
                } else {
                    let r = radius * rng.random::<f64>().sqrt();
                    let z = if rng.random_bool(0.5) { half_height } else { -half_height };
                    Vec3::new(r * theta.cos(), r * theta.sin(), z)
                }
            }
            Shape::Sphere { radius } => loop {
                let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let n = v.norm();
                if n > 1e-3 && n <= 1.0 {
                    break v.scale(radius / n);
                }
            },
        };
        self.center + self.rot.mul_vec(&local)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub id: String,
    pub category: String,
    pub semantic_label: u32,
    /// Object pose: position and roll/pitch/yaw.
    pub position: [f64; 3],
    pub rotation: [f64; 3],
    pub specs: Vec<PrimitiveSpec>,
    primitives: Vec<Primitive>,
    aabb: Aabb,
}

impl SceneObject {
    /// Places the primitives; the semantic label defaults to the lexicon
    /// label of `category`.
    pub fn new(
        id: impl Into<String>,
        category: impl Into<String>,
        position: [f64; 3],
        rotation: [f64; 3],
        specs: Vec<PrimitiveSpec>,
        semantic_label: Option<u32>,
    ) -> Result<Self, SceneError> {
        let id = id.into();
        let category = category.into();
        if specs.is_empty() {
            return Err(SceneError::InvalidPrimitive(id, "object has no primitives".into()));
        }
        let semantic_label = match semantic_label {
            Some(l) => l,
            None => default_lexicon().label_of(&category).ok_or_else(|| SceneError::UnknownCategory(category.clone()))?,
        };
        let rot = Mat3::from_euler(rotation);
        let pos = Vec3::from_array(position);
        let primitives = specs
            .iter()
            .map(|s| Primitive::from_spec(s, &rot, &pos, &id))
            .collect::<Result<Vec<_>, _>>()?;
        let aabb = primitives.iter().fold(Aabb::empty(), |b, p| b.union(&p.aabb()));
        Ok(Self { id, category, semantic_label, position, rotation, specs, primitives, aabb })
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn aabb(&self) -> Aabb {
        self.aabb
    }

    pub fn centroid(&self) -> Vec3 {
        self.aabb.center()
    }

    pub fn sdf<T: Real>(&self, p: &Vec3<T>) -> T {
        let mut it = self.primitives.iter().map(|prim| prim.sdf(p));
        let first = it.next().expect("objects have primitives");
        it.fold(first, |a, b| a.min(b))
    }

    pub fn area(&self) -> f64 {
        self.primitives.iter().map(Primitive::area).sum()
    }

    /// Yaw of the object pose.
    pub fn yaw(&self) -> f64 {
        Mat3::from_euler(self.rotation).to_euler()[2]
    }
}

/// Axis-aligned floor rectangle at z = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorExtent {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl FloorExtent {
    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }

    pub fn aabb(&self) -> Aabb {
        Aabb { min: [self.min[0], self.min[1], 0.0], max: [self.max[0], self.max[1], 0.0] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub floor: FloorExtent,
}

impl Scene {
    /// Validates ids, floor containment and rigid poses.
    pub fn new(objects: Vec<SceneObject>, floor: FloorExtent) -> Result<Self, SceneError> {
        if !(floor.max[0] > floor.min[0] && floor.max[1] > floor.min[1]) {
            return Err(SceneError::Malformed("floor extent is empty".into()));
        }
        let mut ids = HashSet::new();
        for o in &objects {
            if o.id == FLOOR_ID {
                return Err(SceneError::Malformed(format!("object id '{FLOOR_ID}' is reserved")));
            }
            if !ids.insert(o.id.as_str()) {
                return Err(SceneError::DuplicateId(o.id.clone()));
            }
            let b = o.aabb();
            let eps = 1e-9;
            if b.min[0] < floor.min[0] - eps
                || b.min[1] < floor.min[1] - eps
                || b.max[0] > floor.max[0] + eps
                || b.max[1] > floor.max[1] + eps
            {
                return Err(SceneError::OutsideFloor(o.id.clone()));
            }
        }
        Ok(Self { objects, floor })
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    /// Union distance over every primitive and the floor half-space z ≤ 0.
    pub fn sdf<T: Real>(&self, p: &Vec3<T>) -> T {
        self.objects.iter().fold(p.z, |d, o| d.min(o.sdf(p)))
    }

    /// Distance to the objects only, ignoring the floor.
    pub fn objects_sdf<T: Real>(&self, p: &Vec3<T>) -> Option<T> {
        let mut it = self.objects.iter().map(|o| o.sdf(p));
        let first = it.next()?;
        Some(it.fold(first, |a, b| a.min(b)))
    }

    /// Id of the closest solid (object id or [`FLOOR_ID`]) and its distance.
    pub fn closest(&self, p: &Vec3) -> (&str, f64) {
        let mut best = (FLOOR_ID, p.z);
        for o in &self.objects {
            let d = o.sdf(p);
            if d < best.1 {
                best = (o.id.as_str(), d);
            }
        }
        best
    }

    /// Semantic label at the closest solid.
    pub fn label_of(&self, source: &str) -> u32 {
        match self.object(source) {
            Some(o) => o.semantic_label,
            None => default_lexicon().label_of(FLOOR_ID).unwrap_or(0),
        }
    }

    pub fn aabb(&self) -> Aabb {
        self.objects.iter().fold(self.floor.aabb(), |b, o| b.union(&o.aabb()))
    }

    /// Exact inside test against the solids, including the floor half-space.
    pub fn contains(&self, p: &Vec3) -> bool {
        p.z < 0.0 || self.objects.iter().any(|o| o.primitives.iter().any(|prim| prim.contains(p)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledPointCloud {
    pub points: Vec<Vec3>,
    pub semantics: Vec<u32>,
    pub source_object: Vec<String>,
}

impl LabeledPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SampleOptions {
    /// Also sample the floor (area-weighted like any other surface).
    pub include_floor: bool,
    /// Restrict floor samples to this xy window, clipped to the floor extent.
    pub floor_window: Option<([f64; 2], [f64; 2])>,
}

/// `n` area-weighted samples on exposed object surfaces; deterministic in
/// `seed`.
pub fn sample_scene_points(scene: &Scene, n: usize, seed: u64) -> Result<LabeledPointCloud, SceneError> {
    sample_scene_points_with(scene, n, seed, &SampleOptions::default())
}

pub fn sample_scene_points_with(
    scene: &Scene,
    n: usize,
    seed: u64,
    opts: &SampleOptions,
) -> Result<LabeledPointCloud, SceneError> {
    if n < 1 {
        return Err(SceneError::InvalidCount);
    }
    // candidate surfaces: (object index or None for floor, primitive, area)
    let mut surfaces: Vec<(Option<usize>, usize, f64)> = Vec::new();
    for (oi, o) in scene.objects.iter().enumerate() {
        for (pi, p) in o.primitives.iter().enumerate() {
            surfaces.push((Some(oi), pi, p.area()));
        }
    }
    let (fmin, fmax) = match opts.floor_window {
        Some((lo, hi)) => (
            [lo[0].max(scene.floor.min[0]), lo[1].max(scene.floor.min[1])],
            [hi[0].min(scene.floor.max[0]), hi[1].min(scene.floor.max[1])],
        ),
        None => (scene.floor.min, scene.floor.max),
    };
    let floor_area = (fmax[0] - fmin[0]).max(0.0) * (fmax[1] - fmin[1]).max(0.0);
    if opts.include_floor && floor_area > 0.0 {
        surfaces.push((None, 0, floor_area));
    }
    if surfaces.is_empty() {
        return Err(SceneError::Empty);
    }
    let total: f64 = surfaces.iter().map(|s| s.2).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = LabeledPointCloud::default();
    let max_attempts = 1000 * n;
    let mut attempts = 0;
    while cloud.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(SceneError::NoSurface);
        }
        let mut pick = rng.random_range(0.0..total);
        let mut chosen = surfaces[surfaces.len() - 1];
        for s in &surfaces {
            if pick < s.2 {
                chosen = *s;
                break;
            }
            pick -= s.2;
        }
        let (p, source) = match chosen.0 {
            Some(oi) => {
                let o = &scene.objects[oi];
                (o.primitives[chosen.1].sample_surface(&mut rng), o.id.as_str())
            }
            None => (
                Vec3::new(rng.random_range(fmin[0]..=fmax[0]), rng.random_range(fmin[1]..=fmax[1]), 0.0),
                FLOOR_ID,
            ),
        };
        if scene.sdf(&p) < -BURIED_TOL {
            continue;
        }
        cloud.semantics.push(scene.label_of(source));
        cloud.source_object.push(source.to_string());
        cloud.points.push(p);
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_box_scene() -> Scene {
        let obj = SceneObject::new("box_0", "box", [0.0; 3], [0.0; 3], vec![PrimitiveSpec::cuboid([0.0; 3], [1.0; 3])], None)
            .unwrap();
        Scene::new(vec![obj], FloorExtent { min: [-3.0, -3.0], max: [3.0, 3.0] }).unwrap()
    }

    #[test]
    fn analytic_box_distances() {
        let s = unit_box_scene();
        assert!((s.sdf(&Vec3::new(0.0, 0.0, 2.0)) - 1.5).abs() < 1e-12);
        assert!((s.sdf(&Vec3::new(0.0, 0.0, 0.0)) + 0.5).abs() < 1e-12);
        assert!(s.sdf(&Vec3::new(0.5, 0.0, 0.0)).abs() < 1e-9);
        // corner region: Euclidean distance to the corner
        let d = s.objects[0].sdf(&Vec3::new(1.5, 1.5, 1.5));
        assert!((d - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rotated_cylinder_and_sphere() {
        let cyl = SceneObject::new(
            "c",
            "lamp",
            [1.0, 0.0, 0.5],
            [0.0, 0.0, 0.7],
            vec![PrimitiveSpec { rotation: [std::f64::consts::FRAC_PI_2, 0.0, 0.0], ..PrimitiveSpec::cylinder([0.0; 3], 0.2, 1.0) }],
            None,
        )
        .unwrap();
        // axis now horizontal; a point on the axis 0.1 past the cap
        let axis = Mat3::from_euler([0.0, 0.0, 0.7]).mul_vec(&Vec3::new(0.0, 1.0, 0.0));
        let p = Vec3::new(1.0, 0.0, 0.5) + axis.scale(0.6);
        assert!((cyl.sdf(&p) - 0.1).abs() < 1e-12);
        let sph = SceneObject::new("s", "box", [0.0, 0.0, 1.0], [0.0; 3], vec![PrimitiveSpec::sphere([0.0; 3], 0.3)], None).unwrap();
        assert!((sph.sdf(&Vec3::new(0.0, 0.0, 2.0)) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let r = SceneObject::new("b", "box", [0.0; 3], [0.0; 3], vec![PrimitiveSpec::cuboid([0.0; 3], [1.0, 0.0, 1.0])], None);
        assert!(matches!(r, Err(SceneError::InvalidPrimitive(..))));
        let r = SceneObject::new("b", "gizmo", [0.0; 3], [0.0; 3], vec![PrimitiveSpec::sphere([0.0; 3], 1.0)], None);
        assert!(matches!(r, Err(SceneError::UnknownCategory(_))));
    }

    #[test]
    fn object_must_fit_on_floor() {
        let obj = SceneObject::new("b", "box", [2.8, 0.0, 0.5], [0.0; 3], vec![PrimitiveSpec::cuboid([0.0; 3], [1.0; 3])], None).unwrap();
        let r = Scene::new(vec![obj], FloorExtent { min: [-3.0, -3.0], max: [3.0, 3.0] });
        assert!(matches!(r, Err(SceneError::OutsideFloor(_))));
    }

    #[test]
    fn samples_lie_on_surface_and_are_reproducible() {
        let s = unit_box_scene();
        let a = sample_scene_points(&s, 1024, 11).unwrap();
        assert_eq!(a.len(), 1024);
        assert!(a.points.iter().all(|p| s.sdf(p).abs() <= 1e-6));
        // the buried lower half of the box is never sampled
        assert!(a.points.iter().all(|p| p.z >= -1e-9));
        let b = sample_scene_points(&s, 1024, 11).unwrap();
        assert_eq!(a, b);
        assert!(matches!(sample_scene_points(&s, 0, 1), Err(SceneError::InvalidCount)));
    }

    #[test]
    fn floor_samples_are_optional() {
        let s = unit_box_scene();
        let opts = SampleOptions { include_floor: true, floor_window: Some(([-1.0, -1.0], [1.0, 1.0])) };
        let c = sample_scene_points_with(&s, 500, 2, &opts).unwrap();
        let floor: Vec<_> = c.points.iter().zip(&c.source_object).filter(|(_, s)| s.as_str() == FLOOR_ID).collect();
        assert!(!floor.is_empty());
        assert!(floor.iter().all(|(p, _)| p.z == 0.0 && p.x.abs() <= 1.0 && p.y.abs() <= 1.0));
        // floor covered by the box is not exposed
        assert!(floor.iter().all(|(p, _)| p.x.abs() >= 0.5 || p.y.abs() >= 0.5));
    }
}
