//! Placement frame attached to the bound objects. The decoder works in this
//! frame so that it never sees absolute scene coordinates.

use serde::{Deserialize, Serialize};

use crate::body::{matrix_to_rot6d, rot6d_to_matrix, BodyError, BodyParams};
use crate::geom::{Mat3, Vec3};
use crate::graphs::{Binding, SceneGraph};
use crate::scene::{LabeledPointCloud, Scene};

/// Floor-level origin under the bound region, and a yaw about +z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorFrame {
    pub origin: [f64; 3],
    pub yaw: f64,
}

impl AnchorFrame {
    /// The primary object when it is not the floor; otherwise the mean
    /// centroid of the bound anchors; otherwise the middle of the floor.
    pub fn from_binding(scene: &Scene, sg: &SceneGraph, binding: &Binding) -> Self {
        let object = |id: &str| sg.node(id).and_then(|n| n.object.as_deref()).and_then(|o| scene.object(o));
        if let Some(o) = binding.primary.as_deref().and_then(object) {
            let c = o.centroid();
            return Self { origin: [c.x, c.y, 0.0], yaw: o.yaw() };
        }
        let anchors: Vec<_> = binding.anchors.iter().filter_map(|(id, _)| object(id)).collect();
        if let Some(first) = anchors.first() {
            let n = anchors.len() as f64;
            let (x, y) = anchors.iter().fold((0.0, 0.0), |(x, y), o| (x + o.centroid().x, y + o.centroid().y));
            return Self { origin: [x / n, y / n, 0.0], yaw: first.yaw() };
        }
        let f = scene.floor;
        Self { origin: [(f.min[0] + f.max[0]) / 2.0, (f.min[1] + f.max[1]) / 2.0, 0.0], yaw: 0.0 }
    }

    fn rotation(&self) -> Mat3 {
        Mat3::rot_z(self.yaw)
    }

    pub fn point_to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation().mul_vec(p) + Vec3::from_array(self.origin)
    }

    pub fn point_to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation().transpose().mul_vec(&(*p - Vec3::from_array(self.origin)))
    }

    fn map(&self, p: &BodyParams, rot: &Mat3, t: Vec3) -> Result<BodyParams, BodyError> {
        let mut out = p.clone();
        out.t = t.to_array();
        out.r = matrix_to_rot6d(&rot.mul_mat(&rot6d_to_matrix(&p.r)?));
        Ok(out)
    }

    pub fn params_to_world(&self, p: &BodyParams) -> Result<BodyParams, BodyError> {
        self.map(p, &self.rotation(), self.point_to_world(&Vec3::from_array(p.t)))
    }

    pub fn params_to_local(&self, p: &BodyParams) -> Result<BodyParams, BodyError> {
        self.map(p, &self.rotation().transpose(), self.point_to_local(&Vec3::from_array(p.t)))
    }

    pub fn cloud_to_local(&self, cloud: &LabeledPointCloud) -> LabeledPointCloud {
        LabeledPointCloud {
            points: cloud.points.iter().map(|p| self.point_to_local(p)).collect(),
            semantics: cloud.semantics.clone(),
            source_object: cloud.source_object.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::body_mesh;

    #[test]
    fn world_mesh_is_rigid_image_of_local_mesh() {
        let frame = AnchorFrame { origin: [1.5, -0.7, 0.0], yaw: 0.8 };
        let mut local = BodyParams::rest();
        local.t = [0.2, 0.1, 0.9];
        local.set_joint_rotation(0, [0.1, 0.2, -0.3]);
        local.set_joint_rotation(5, [0.4, 0.0, 0.1]);
        let world = frame.params_to_world(&local).unwrap();
        let a = body_mesh(&local).unwrap();
        let b = body_mesh(&world).unwrap();
        for (u, v) in a.vertices.iter().zip(&b.vertices) {
            assert!(frame.point_to_world(u).distance(v) < 1e-12);
        }
        let back = frame.params_to_local(&world).unwrap();
        for (x, y) in back.free_vector().iter().zip(local.free_vector()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
