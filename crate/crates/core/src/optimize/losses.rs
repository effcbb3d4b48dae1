//! Refinement loss terms. Each has a plain form on meshes and a generic form
//! on posed vertices so the optimizer can differentiate it on the tape.

use serde::{Deserialize, Serialize};

use super::ibs::IbsPointSet;
use crate::body::{BodyMesh, BodyParams, HAND_DIM, POSE_DIM};
use crate::geom::{Real, Vec3};
use crate::scene::Scene;

/// Per-group weights inside the regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegWeights {
    pub t: f64,
    pub r: f64,
    pub pose: f64,
    pub hand: f64,
}

impl Default for RegWeights {
    fn default() -> Self {
        Self { t: 0.1, r: 1.0, pose: 1.0, hand: 1.0 }
    }
}

impl RegWeights {
    pub fn unit() -> Self {
        Self { t: 1.0, r: 1.0, pose: 1.0, hand: 1.0 }
    }

    /// Weight of each entry of the free vector.
    pub fn per_entry(&self) -> Vec<f64> {
        let mut w = vec![self.t; 3];
        w.extend([self.r; 6]);
        w.extend([self.pose; POSE_DIM]);
        w.extend([self.hand; HAND_DIM]);
        w
    }
}

fn sq_pos<T: Real>(x: T) -> T {
    if x.val() > 0.0 {
        x * x
    } else {
        T::zero()
    }
}

/// Mean of max(sdf, 0)² over the contact vertices; 0 without any.
pub fn contact_term<T: Real>(verts: &[Vec3<T>], contact: &[usize], scene: &Scene) -> T {
    if contact.is_empty() {
        return T::zero();
    }
    let mut acc = T::zero();
    for &i in contact {
        acc += sq_pos(scene.sdf(&verts[i]));
    }
    acc / T::cst(contact.len() as f64)
}

/// Mean of max(-sdf, 0)² over all vertices.
pub fn collision_term<T: Real>(verts: &[Vec3<T>], scene: &Scene) -> T {
    if verts.is_empty() {
        return T::zero();
    }
    let mut acc = T::zero();
    for v in verts {
        // cheap untaped test first: outside vertices contribute nothing
        if scene.sdf(&v.val()) >= 0.0 {
            continue;
        }
        acc += sq_pos(-scene.sdf(v));
    }
    acc / T::cst(verts.len() as f64)
}

/// Sum of scene distances over the selected IBS points. Point set and
/// correspondences are frozen; each selected point follows its body vertex
/// at half speed (how a bisector point moves when one side moves), so the
/// value equals the stored distances at the pose the set was computed for.
pub fn ibs_term<T: Real>(ibs: &IbsPointSet, verts: &[Vec3<T>]) -> T {
    let mut acc = T::zero();
    for i in 0..ibs.len() {
        if !ibs.selected(i) {
            continue;
        }
        let shift = (verts[ibs.nearest_body[i]] - Vec3::lift(ibs.body_anchor[i])).scale(T::cst(0.5));
        let p = Vec3::lift(ibs.points[i] - ibs.nearest_scene[i]) + shift;
        acc += p.norm();
    }
    acc
}

/// Weighted squared deviation of the free vector from `init` (β excluded).
pub fn reg_term<T: Real>(free: &[T], init: &[f64], weights: &[f64]) -> T {
    let mut acc = T::zero();
    for ((x, x0), w) in free.iter().zip(init).zip(weights) {
        let d = *x - T::cst(*x0);
        acc += T::cst(*w) * d * d;
    }
    acc
}

/// Sum over vertices of max(-sdf, 0)² against the union of the other
/// bodies' capsules.
pub fn hh_term<T: Real>(verts: &[Vec3<T>], others: &[BodyMesh]) -> T {
    let mut acc = T::zero();
    if others.is_empty() {
        return acc;
    }
    let union = |p: &Vec3<T>| others.iter().map(|o| o.capsule_sdf(p)).fold(T::cst(f64::INFINITY), |a, b| a.min(b));
    for v in verts {
        let plain = v.val();
        if others.iter().all(|o| o.capsule_sdf(&plain) >= 0.0) {
            continue;
        }
        acc += sq_pos(-union(v));
    }
    acc
}

pub fn loss_contact(mesh: &BodyMesh, scene: &Scene) -> f64 {
    contact_term(&mesh.vertices, &mesh.contact.indices(), scene)
}

pub fn loss_collision(mesh: &BodyMesh, scene: &Scene) -> f64 {
    collision_term(&mesh.vertices, scene)
}

/// Sum of `d_scene` over the penetrating or contact-corresponding points.
pub fn loss_ibs(ibs: &IbsPointSet) -> f64 {
    (0..ibs.len()).filter(|&i| ibs.selected(i)).map(|i| ibs.d_scene[i]).sum()
}

pub fn loss_reg(params: &BodyParams, init: &BodyParams, weights: &RegWeights) -> f64 {
    reg_term(&params.free_vector(), &init.free_vector(), &weights.per_entry())
}

pub fn loss_hh(mesh: &BodyMesh, others: &[BodyMesh]) -> f64 {
    hh_term(&mesh.vertices, others)
}
