//! Articulated capsule body: parameters, kinematics, mesh and contact labels.
//!
//! The body keeps the parameter interface of a full parametric model
//! (translation, continuous 6-d orientation, shape, 21×3 axis-angle pose and
//! a hand placeholder) over a 642-vertex mesh made of per-bone capsules.

mod contact;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Mat3, Real, Vec3};

pub use contact::{assign_contact_labels, ContactLabels, ContactRegion};
pub use template::{default_template, BodyTemplate, CapsuleSpec, NUM_JOINTS, NUM_SHAPE, RING_SEGMENTS};

pub const POSE_DIM: usize = NUM_JOINTS * 3;
pub const HAND_DIM: usize = 4;
/// Length of the optimizable vector (t, r, p, h).
pub const FREE_DIM: usize = 3 + 6 + POSE_DIM + HAND_DIM;

pub const SHAPE_MIN: f64 = 0.5;
pub const SHAPE_MAX: f64 = 1.5;

#[derive(Debug, Error)]
pub enum BodyError {
    #[error("body template: {0}")]
    Template(String),
    #[error("degenerate 6-d rotation: columns are zero or parallel")]
    DegenerateRotation,
    #[error("invalid body parameters: {0}")]
    InvalidParams(String),
    #[error("unknown action '{0}'")]
    UnknownAction(String),
}

/// Coarse body parts used for labels and part-level actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyPart {
    Head,
    Torso,
    LeftArm,
    RightArm,
    LeftHand,
    RightHand,
    LeftLower,
    RightLower,
}

impl BodyPart {
    pub const ALL: [BodyPart; 8] = [
        BodyPart::Head,
        BodyPart::Torso,
        BodyPart::LeftArm,
        BodyPart::RightArm,
        BodyPart::LeftHand,
        BodyPart::RightHand,
        BodyPart::LeftLower,
        BodyPart::RightLower,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BodyPart::Head => "head",
            BodyPart::Torso => "torso",
            BodyPart::LeftArm => "left_arm",
            BodyPart::RightArm => "right_arm",
            BodyPart::LeftHand => "left_hand",
            BodyPart::RightHand => "right_hand",
            BodyPart::LeftLower => "left_lower",
            BodyPart::RightLower => "right_lower",
        }
    }
}

/// Parameters (t, r, β, p, h). `pose` holds 21 axis-angle triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub t: [f64; 3],
    pub r: [f64; 6],
    pub beta: [f64; NUM_SHAPE],
    pub pose: Vec<f64>,
    pub hand: [f64; HAND_DIM],
}

impl Default for BodyParams {
    fn default() -> Self {
        Self::rest()
    }
}

impl BodyParams {
    /// Identity orientation, unit shape, zero pose at the origin.
    pub fn rest() -> Self {
        Self {
            t: [0.0; 3],
            r: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            beta: [1.0; NUM_SHAPE],
            pose: vec![0.0; POSE_DIM],
            hand: [0.0; HAND_DIM],
        }
    }

    pub fn validate(&self) -> Result<(), BodyError> {
        if self.pose.len() != POSE_DIM {
            return Err(BodyError::InvalidParams(format!("pose has {} values, expected {POSE_DIM}", self.pose.len())));
        }
        if let Some(b) = self.beta.iter().find(|b| !(SHAPE_MIN..=SHAPE_MAX).contains(*b)) {
            return Err(BodyError::InvalidParams(format!("shape value {b} outside [{SHAPE_MIN}, {SHAPE_MAX}]")));
        }
        let all = self.t.iter().chain(&self.r).chain(&self.pose).chain(&self.hand);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(BodyError::InvalidParams("non-finite value".into()));
        }
        Ok(())
    }

    /// Concatenation (t, r, p, h); shape is excluded.
    pub fn free_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(FREE_DIM);
        v.extend_from_slice(&self.t);
        v.extend_from_slice(&self.r);
        v.extend_from_slice(&self.pose);
        v.extend_from_slice(&self.hand);
        v
    }

    pub fn with_free(&self, free: &[f64]) -> Self {
        assert_eq!(free.len(), FREE_DIM, "free vector length");
        let mut p = self.clone();
        p.t.copy_from_slice(&free[0..3]);
        p.r.copy_from_slice(&free[3..9]);
        p.pose.copy_from_slice(&free[9..9 + POSE_DIM]);
        p.hand.copy_from_slice(&free[9 + POSE_DIM..]);
        p
    }

    pub fn orientation(&self) -> Result<Mat3, BodyError> {
        rot6d_to_matrix(&self.r)
    }

    pub fn joint_rotation(&self, joint: usize) -> Vec3 {
        Vec3::new(self.pose[3 * joint], self.pose[3 * joint + 1], self.pose[3 * joint + 2])
    }

    pub fn set_joint_rotation(&mut self, joint: usize, aa: [f64; 3]) {
        self.pose[3 * joint..3 * joint + 3].copy_from_slice(&aa);
    }
}

/// Gram–Schmidt on the two 3-columns of `r`, third column by cross product.
pub fn rot6d_to_matrix_generic<T: Real>(r: &[T]) -> Result<Mat3<T>, BodyError> {
    let a1 = Vec3::new(r[0], r[1], r[2]);
    let a2 = Vec3::new(r[3], r[4], r[5]);
    let n1 = a1.norm();
    if n1.val() < 1e-12 {
        return Err(BodyError::DegenerateRotation);
    }
    let b1 = a1.scale(T::one() / n1);
    let perp = a2 - b1.scale(b1.dot(&a2));
    let n2 = perp.norm();
    if n2.val() < 1e-9 * a2.norm().val().max(1e-3) {
        return Err(BodyError::DegenerateRotation);
    }
    let b2 = perp.scale(T::one() / n2);
    let b3 = b1.cross(&b2);
    Ok(Mat3::from_cols(b1, b2, b3))
}

pub fn rot6d_to_matrix(r: &[f64; 6]) -> Result<Mat3, BodyError> {
    rot6d_to_matrix_generic(r)
}

/// First two columns of a rotation matrix.
pub fn matrix_to_rot6d(m: &Mat3) -> [f64; 6] {
    [m.m[0][0], m.m[1][0], m.m[2][0], m.m[0][1], m.m[1][1], m.m[2][1]]
}

#[derive(Debug, Clone, Copy)]
pub struct JointTransform<T = f64> {
    pub rot: Mat3<T>,
    pub pos: Vec3<T>,
}

/// World transforms of all joints plus any joint-limit violations
/// (joint, axis). Violations are reported, never clamped.
#[derive(Debug, Clone)]
pub struct Kinematics<T = f64> {
    pub joints: Vec<JointTransform<T>>,
    pub limit_violations: Vec<(usize, usize)>,
}

pub fn scaled_offset(tmpl: &BodyTemplate, beta: &[f64; NUM_SHAPE], joint: usize) -> Vec3 {
    let j = &tmpl.joints[joint];
    j.offset.scale(template::shape_factor(beta, &j.scale))
}

pub fn forward_kinematics_generic<T: Real>(
    tmpl: &BodyTemplate,
    beta: &[f64; NUM_SHAPE],
    t: &[T],
    r: &[T],
    pose: &[T],
) -> Result<Kinematics<T>, BodyError> {
    let root_orient = rot6d_to_matrix_generic(r)?;
    let mut joints: Vec<JointTransform<T>> = Vec::with_capacity(tmpl.joints.len());
    let mut limit_violations = Vec::new();
    for (i, j) in tmpl.joints.iter().enumerate() {
        let aa = Vec3::new(pose[3 * i], pose[3 * i + 1], pose[3 * i + 2]);
        for axis in 0..3 {
            let v = aa[axis].val();
            if v < j.limits[axis][0] || v > j.limits[axis][1] {
                limit_violations.push((i, axis));
            }
        }
        let local = Mat3::from_axis_angle(&aa);
        let tf = match j.parent {
            None => JointTransform {
                rot: root_orient.mul_mat(&local),
                pos: Vec3::new(t[0], t[1], t[2]),
            },
            Some(p) => {
                let parent = joints[p];
                let off = Vec3::lift(scaled_offset(tmpl, beta, i));
                JointTransform {
                    rot: parent.rot.mul_mat(&local),
                    pos: parent.pos + parent.rot.mul_vec(&off),
                }
            }
        };
        joints.push(tf);
    }
    Ok(Kinematics { joints, limit_violations })
}

pub fn forward_kinematics(params: &BodyParams) -> Result<Kinematics, BodyError> {
    params.validate()?;
    forward_kinematics_generic(default_template(), &params.beta, &params.t, &params.r, &params.pose)
}

/// Capsule geometry (segment endpoints and radius) in the owner joint frame.
pub fn local_capsule(cap: &CapsuleSpec, beta: &[f64; NUM_SHAPE]) -> (Vec3, Vec3, f64) {
    let a = cap.start.rest.scale(template::shape_factor(beta, &cap.start.scale));
    let b = cap.end.rest.scale(template::shape_factor(beta, &cap.end.scale));
    let r = cap.radius * template::girth_factor(beta, &cap.radius_scale);
    (a, b, r)
}

/// Vertices of every capsule in its owner joint frame, in mesh order.
pub fn local_vertices(tmpl: &BodyTemplate, beta: &[f64; NUM_SHAPE]) -> Vec<(usize, Vec3)> {
    let mut out = Vec::with_capacity(tmpl.vertex_count);
    for cap in &tmpl.capsules {
        let (a, b, r) = local_capsule(cap, beta);
        let (u, w) = template::ring_frame(&(cap.end.rest - cap.start.rest));
        let axis = b - a;
        let dir = axis.scale(1.0 / axis.norm());
        out.push((cap.owner, a - dir.scale(r)));
        for frac in template::ring_fractions(cap.rings) {
            let center = a + axis.scale(frac);
            for k in 0..RING_SEGMENTS {
                let (s, c) = template::segment_angle(k).sin_cos();
                out.push((cap.owner, center + (u.scale(c) + w.scale(s)).scale(r)));
            }
        }
        out.push((cap.owner, b + dir.scale(r)));
    }
    out
}

pub fn posed_vertices<T: Real>(local: &[(usize, Vec3)], kin: &Kinematics<T>) -> Vec<Vec3<T>> {
    local
        .iter()
        .map(|(owner, v)| {
            let tf = &kin.joints[*owner];
            tf.pos + tf.rot.mul_vec(&Vec3::lift(*v))
        })
        .collect()
}

/// World-space capsule: segment `a`–`b` with radius.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn sdf<T: Real>(&self, p: &Vec3<T>) -> T {
        let a = Vec3::<T>::lift(self.a);
        let ab = self.b - self.a;
        let len_sq = ab.norm_squared();
        let ap = *p - a;
        let h = if len_sq > 0.0 {
            (ap.dot(&Vec3::lift(ab)) / T::cst(len_sq)).max(T::zero()).min(T::one())
        } else {
            T::zero()
        };
        (ap - Vec3::lift(ab).scale(h)).norm() - T::cst(self.radius)
    }
}

#[derive(Debug, Clone)]
pub struct BodyMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub contact: ContactLabels,
    pub parts: Vec<BodyPart>,
    pub capsules: Vec<Capsule>,
}

impl BodyMesh {
    pub fn contact_vertices(&self) -> impl Iterator<Item = &Vec3> {
        self.vertices.iter().zip(&self.contact.labels).filter(|(_, c)| **c).map(|(v, _)| v)
    }

    pub fn with_contact(mut self, contact: ContactLabels) -> Self {
        self.contact = contact;
        self
    }

    /// Minimum signed distance from `p` to this body's capsules.
    pub fn capsule_sdf<T: Real>(&self, p: &Vec3<T>) -> T {
        let mut best: Option<T> = None;
        for c in &self.capsules {
            let d = c.sdf(p);
            best = Some(match best {
                None => d,
                Some(b) => b.min(d),
            });
        }
        best.unwrap_or(T::cst(f64::INFINITY))
    }
}

pub fn world_capsules(tmpl: &BodyTemplate, beta: &[f64; NUM_SHAPE], kin: &Kinematics) -> Vec<Capsule> {
    tmpl.capsules
        .iter()
        .map(|cap| {
            let (a, b, r) = local_capsule(cap, beta);
            let tf = &kin.joints[cap.owner];
            Capsule {
                a: tf.pos + tf.rot.mul_vec(&a),
                b: tf.pos + tf.rot.mul_vec(&b),
                radius: r,
            }
        })
        .collect()
}

/// Mesh for `params` with empty contact labels.
pub fn body_mesh(params: &BodyParams) -> Result<BodyMesh, BodyError> {
    let tmpl = default_template();
    let kin = forward_kinematics(params)?;
    let local = local_vertices(tmpl, &params.beta);
    Ok(BodyMesh {
        vertices: posed_vertices(&local, &kin),
        faces: tmpl.faces.clone(),
        contact: ContactLabels::empty(tmpl.vertex_count),
        parts: tmpl.part_labels(),
        capsules: world_capsules(tmpl, &params.beta, &kin),
    })
}

/// Vertex positions as a differentiable function of (t, r, p).
pub fn body_vertices_generic<T: Real>(beta: &[f64; NUM_SHAPE], t: &[T], r: &[T], pose: &[T]) -> Result<Vec<Vec3<T>>, BodyError> {
    let tmpl = default_template();
    let kin = forward_kinematics_generic(tmpl, beta, t, r, pose)?;
    Ok(posed_vertices(&local_vertices(tmpl, beta), &kin))
}

/// ASCII OBJ with one `# va <index> <part> <contact>` comment per vertex.
pub fn write_obj(mesh: &BodyMesh, out: &mut impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "# articulated capsule body, {} vertices", mesh.vertices.len())?;
    writeln!(out, "# per-vertex annotation: va <vertex> <part> <contact region or ->")?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        let tag = mesh.contact.tags[i].map(|r| r.name()).unwrap_or("-");
        writeln!(out, "# va {} {} {}", i + 1, mesh.parts[i].name(), tag)?;
        writeln!(out, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z)?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ScalarTape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        Mat3::from_axis_angle(&axis.scale(angle / axis.norm()))
    }

    #[test]
    fn rot6d_identity() {
        let m = rot6d_to_matrix(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(m.max_abs_diff(&Mat3::identity()) < 1e-15);
    }

    #[test]
    fn rot6d_recovers_random_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let r = random_rotation(&mut rng);
            let back = rot6d_to_matrix(&matrix_to_rot6d(&r)).unwrap();
            assert!(back.max_abs_diff(&r) < 1e-9);
            assert!(back.is_rotation(1e-12));
        }
    }

    #[test]
    fn rot6d_degenerate_inputs() {
        assert!(matches!(rot6d_to_matrix(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]), Err(BodyError::DegenerateRotation)));
        assert!(matches!(rot6d_to_matrix(&[0.0; 6]), Err(BodyError::DegenerateRotation)));
        assert!(matches!(rot6d_to_matrix(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]), Err(BodyError::DegenerateRotation)));
    }

    #[test]
    fn rot6d_round_trip_orthonormalizes() {
        let r = [2.0, 0.1, -0.3, 0.5, 1.7, 0.2];
        let m = rot6d_to_matrix(&r).unwrap();
        let again = rot6d_to_matrix(&matrix_to_rot6d(&m)).unwrap();
        assert!(again.max_abs_diff(&m) < 1e-12);
        let b1 = Vec3::new(2.0, 0.1, -0.3);
        let b1 = b1.scale(1.0 / b1.norm());
        assert!((m.col(0) - b1).norm() < 1e-12);
    }

    #[test]
    fn rest_pose_matches_offset_table() {
        let kin = forward_kinematics(&BodyParams::rest()).unwrap();
        let tmpl = default_template();
        for (i, j) in tmpl.joints.iter().enumerate() {
            let mut expect = Vec3::zero();
            let mut cur = Some(i);
            while let Some(c) = cur {
                expect = expect + tmpl.joints[c].offset;
                cur = tmpl.joints[c].parent;
            }
            assert!((kin.joints[i].pos - expect).norm() < 1e-12, "joint {}", j.name);
        }
        assert!(kin.limit_violations.is_empty());
    }

    #[test]
    fn translation_shifts_every_joint() {
        let base = forward_kinematics(&BodyParams::rest()).unwrap();
        let mut p = BodyParams::rest();
        p.t = [1.0, 2.0, 3.0];
        let moved = forward_kinematics(&p).unwrap();
        for (a, b) in base.joints.iter().zip(&moved.joints) {
            assert!((b.pos - a.pos - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn leg_length_channel_scales_hip_to_ankle() {
        let tmpl = default_template();
        let (hip, ankle) = (tmpl.joint_index("left_hip").unwrap(), tmpl.joint_index("left_ankle").unwrap());
        let measure = |leg: f64| {
            let mut p = BodyParams::rest();
            p.beta[1] = leg;
            p.set_joint_rotation(hip, [0.4, 0.1, 0.0]);
            let k = forward_kinematics(&p).unwrap();
            (k.joints[ankle].pos - k.joints[hip].pos).norm()
        };
        assert!((measure(1.2) / measure(0.6) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fk_matches_recursive_oracle() {
        fn world(tmpl: &BodyTemplate, p: &BodyParams, j: usize) -> (Mat3, Vec3) {
            let local = Mat3::from_axis_angle(&p.joint_rotation(j));
            match tmpl.joints[j].parent {
                None => (rot6d_to_matrix(&p.r).unwrap().mul_mat(&local), Vec3::from_array(p.t)),
                Some(par) => {
                    let (r, x) = world(tmpl, p, par);
                    (r.mul_mat(&local), x + r.mul_vec(&scaled_offset(tmpl, &p.beta, j)))
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tmpl = default_template();
        for _ in 0..10 {
            let mut p = BodyParams::rest();
            p.t = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0)];
            p.r = matrix_to_rot6d(&random_rotation(&mut rng));
            p.beta.iter_mut().for_each(|b| *b = rng.random_range(0.7..1.3));
            p.pose.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
            let kin = forward_kinematics(&p).unwrap();
            for j in 0..NUM_JOINTS {
                let (r, x) = world(tmpl, &p, j);
                assert!((kin.joints[j].pos - x).norm() < 1e-12);
                assert!(kin.joints[j].rot.max_abs_diff(&r) < 1e-12);
            }
        }
    }

    #[test]
    fn limit_violation_is_reported_not_fatal() {
        let mut p = BodyParams::rest();
        let knee = default_template().joint_index("left_knee").unwrap();
        p.set_joint_rotation(knee, [1.0, 0.0, 0.0]);
        let kin = forward_kinematics(&p).unwrap();
        assert_eq!(kin.limit_violations, vec![(knee, 0)]);
    }

    #[test]
    fn mesh_has_fixed_vertex_count() {
        let mut p = BodyParams::rest();
        assert_eq!(body_mesh(&p).unwrap().vertices.len(), 642);
        p.beta = [1.3; NUM_SHAPE];
        p.pose.iter_mut().enumerate().for_each(|(i, v)| *v = 0.01 * i as f64);
        let m = body_mesh(&p).unwrap();
        assert_eq!(m.vertices.len(), 642);
        assert_eq!(m.parts.len(), 642);
        assert!(m.faces.iter().all(|f| f.iter().all(|&i| (i as usize) < 642)));
    }

    #[test]
    fn rest_mesh_is_bilaterally_symmetric() {
        let m = body_mesh(&BodyParams::rest()).unwrap();
        for v in &m.vertices {
            let mirrored = Vec3::new(-v.x, v.y, v.z);
            let best = m.vertices.iter().map(|w| (*w - mirrored).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "vertex {v:?} has no mirror image");
        }
    }

    #[test]
    fn part_histogram_matches_template() {
        let m = body_mesh(&BodyParams::rest()).unwrap();
        let count = |p: BodyPart| m.parts.iter().filter(|x| **x == p).count();
        // head capsule: 6 rings; torso: pelvis 4 + spine 6 + chest 8 + neck 2 rings
        assert_eq!(count(BodyPart::Head), 6 * 8 + 2);
        assert_eq!(count(BodyPart::Torso), 20 * 8 + 4 * 2);
        assert_eq!(count(BodyPart::LeftArm), 8 * 8 + 2 * 2);
        assert_eq!(count(BodyPart::LeftHand), 3 * 8 + 2);
        assert_eq!(count(BodyPart::LeftLower), 14 * 8 + 3 * 2);
        assert_eq!(count(BodyPart::LeftLower), count(BodyPart::RightLower));
    }

    #[test]
    fn generic_vertices_match_and_differentiate() {
        let mut p = BodyParams::rest();
        p.pose.iter_mut().enumerate().for_each(|(i, v)| *v = 0.02 * ((i % 7) as f64 - 3.0));
        let mesh = body_mesh(&p).unwrap();
        let tape = ScalarTape::new();
        let free = tape.inputs(&p.free_vector());
        let verts = body_vertices_generic(&p.beta, &free[0..3], &free[3..9], &free[9..72]).unwrap();
        for (a, b) in verts.iter().zip(&mesh.vertices) {
            assert!((a.val() - *b).norm() < 1e-12);
        }
        // d(vertex)/dt is the identity for every vertex
        let g = tape.gradient(verts[100].y, &free[0..3]);
        assert_eq!(g, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn obj_export_lists_every_vertex() {
        let m = body_mesh(&BodyParams::rest()).unwrap();
        let mut buf = Vec::new();
        write_obj(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 642);
        assert_eq!(text.lines().filter(|l| l.starts_with("# va ")).count(), 642);
    }
}
