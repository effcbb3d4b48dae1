//! Rest-pose template: joint tree, capsule layout and contact regions.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::Deserialize;

use super::{BodyError, BodyPart};
use crate::geom::Vec3;

pub const NUM_JOINTS: usize = 21;
pub const NUM_SHAPE: usize = 10;
/// Segments around each capsule ring.
pub const RING_SEGMENTS: usize = 8;

const SHAPE_OVERALL: usize = 0;
const SHAPE_GIRTH: usize = 6;

static DEFAULT_TEMPLATE: &str = include_str!("../../data/body_template.toml");

#[derive(Debug, Deserialize)]
struct RawTemplate {
    format: u32,
    joints: Vec<RawJoint>,
    capsules: Vec<RawCapsule>,
    regions: Vec<RawRegion>,
}

#[derive(Debug, Deserialize)]
struct RawJoint {
    name: String,
    parent: Option<String>,
    offset: [f64; 3],
    #[serde(default)]
    scale: Vec<usize>,
    limits: [[f64; 2]; 3],
}

#[derive(Debug, Deserialize)]
struct RawCapsule {
    name: String,
    owner: String,
    start: Option<[f64; 3]>,
    start_joint: Option<String>,
    end: Option<[f64; 3]>,
    to: Option<String>,
    #[serde(default)]
    scale: Vec<usize>,
    radius: f64,
    #[serde(default)]
    radius_scale: Vec<usize>,
    rings: usize,
    part: BodyPart,
}

#[derive(Debug, Deserialize)]
struct RawRegion {
    name: String,
    lines: Vec<RawLine>,
}

#[derive(Debug, Deserialize)]
struct RawLine {
    capsule: String,
    direction: [f64; 3],
    #[serde(default = "one")]
    ring_max: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: Vec3,
    pub scale: Vec<usize>,
    pub limits: [[f64; 2]; 3],
}

/// Endpoint of a capsule segment in its owner's frame, with the shape
/// channels that scale it.
#[derive(Debug, Clone)]
pub struct Endpoint {
    pub rest: Vec3,
    pub scale: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CapsuleSpec {
    pub name: String,
    pub owner: usize,
    pub start: Endpoint,
    pub end: Endpoint,
    pub radius: f64,
    pub radius_scale: Vec<usize>,
    pub rings: usize,
    pub part: BodyPart,
    /// Index of this capsule's first vertex in the mesh.
    pub first_vertex: usize,
}

impl CapsuleSpec {
    pub fn vertex_count(&self) -> usize {
        self.rings * RING_SEGMENTS + 2
    }
}

#[derive(Debug, Clone)]
pub struct BodyTemplate {
    pub joints: Vec<Joint>,
    pub capsules: Vec<CapsuleSpec>,
    /// Contact region name → sorted vertex indices.
    pub regions: HashMap<String, Vec<usize>>,
    pub vertex_count: usize,
    pub faces: Vec<[u32; 3]>,
}

/// Product of the overall channel and the listed channels.
pub fn shape_factor(beta: &[f64; NUM_SHAPE], channels: &[usize]) -> f64 {
    channels.iter().fold(beta[SHAPE_OVERALL], |acc, &c| acc * beta[c])
}

pub fn girth_factor(beta: &[f64; NUM_SHAPE], channels: &[usize]) -> f64 {
    shape_factor(beta, channels) * beta[SHAPE_GIRTH]
}

/// Orthonormal pair perpendicular to `axis`: `u` is +y made perpendicular,
/// or +z when the axis is along y.
pub fn ring_frame(axis: &Vec3) -> (Vec3, Vec3) {
    let a = axis.scale(1.0 / axis.norm());
    let pick = if a.y.abs() > 0.9 { Vec3::new(0.0, 0.0, 1.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let u = pick - a.scale(a.dot(&pick));
    let u = u.scale(1.0 / u.norm());
    let w = a.cross(&u);
    (u, w)
}

/// Normalized ring positions along a capsule segment.
pub fn ring_fractions(rings: usize) -> Vec<f64> {
    if rings == 1 {
        vec![0.5]
    } else {
        (0..rings).map(|i| i as f64 / (rings - 1) as f64).collect()
    }
}

pub fn segment_angle(k: usize) -> f64 {
    2.0 * std::f64::consts::PI * k as f64 / RING_SEGMENTS as f64
}

impl BodyTemplate {
    pub fn parse(text: &str) -> Result<Self, BodyError> {
        let raw: RawTemplate = toml::from_str(text).map_err(|e| BodyError::Template(e.to_string()))?;
        if raw.format != 1 {
            return Err(BodyError::Template(format!("unsupported template format {}", raw.format)));
        }
        let index: HashMap<&str, usize> = raw.joints.iter().enumerate().map(|(i, j)| (j.name.as_str(), i)).collect();
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| BodyError::Template(format!("unknown joint '{name}'")))
        };
        let mut joints = Vec::with_capacity(raw.joints.len());
        for (i, j) in raw.joints.iter().enumerate() {
            let parent = j.parent.as_deref().map(lookup).transpose()?;
            if let Some(p) = parent {
                if p >= i {
                    return Err(BodyError::Template(format!("joint '{}' listed before its parent", j.name)));
                }
            }
            joints.push(Joint {
                name: j.name.clone(),
                parent,
                offset: Vec3::from_array(j.offset),
                scale: j.scale.clone(),
                limits: j.limits,
            });
        }
        if joints.len() != NUM_JOINTS {
            return Err(BodyError::Template(format!("expected {NUM_JOINTS} joints, found {}", joints.len())));
        }
        let endpoint = |joint: Option<&String>, explicit: Option<[f64; 3]>, scale: &[usize]| -> Result<Endpoint, BodyError> {
            match (joint, explicit) {
                (Some(name), _) => {
                    let j = &joints[lookup(name)?];
                    Ok(Endpoint { rest: j.offset, scale: j.scale.clone() })
                }
                (None, Some(p)) => Ok(Endpoint { rest: Vec3::from_array(p), scale: scale.to_vec() }),
                (None, None) => Ok(Endpoint { rest: Vec3::zero(), scale: vec![] }),
            }
        };
        let mut capsules = Vec::new();
        let mut first_vertex = 0;
        for c in &raw.capsules {
            let spec = CapsuleSpec {
                name: c.name.clone(),
                owner: lookup(&c.owner)?,
                start: endpoint(c.start_joint.as_ref(), c.start, &c.scale)?,
                end: endpoint(c.to.as_ref(), c.end, &c.scale)?,
                radius: c.radius,
                radius_scale: c.radius_scale.clone(),
                rings: c.rings,
                part: c.part,
                first_vertex,
            };
            if (spec.end.rest - spec.start.rest).norm() <= 0.0 || spec.rings == 0 {
                return Err(BodyError::Template(format!("capsule '{}' is degenerate", c.name)));
            }
            first_vertex += spec.vertex_count();
            capsules.push(spec);
        }
        let vertex_count = first_vertex;
        let mut regions = HashMap::new();
        for r in &raw.regions {
            let mut verts = Vec::new();
            for line in &r.lines {
                let cap = capsules
                    .iter()
                    .find(|c| c.name == line.capsule)
                    .ok_or_else(|| BodyError::Template(format!("region '{}' names unknown capsule", r.name)))?;
                let dir = Vec3::from_array(line.direction);
                let axis = cap.end.rest - cap.start.rest;
                let (u, w) = ring_frame(&axis);
                let seg = (0..RING_SEGMENTS)
                    .find(|&k| {
                        let (s, c) = segment_angle(k).sin_cos();
                        (u.scale(c) + w.scale(s) - dir).norm() < 1e-9
                    })
                    .ok_or_else(|| BodyError::Template(format!("region '{}': direction not on a ring segment", r.name)))?;
                for (ring, frac) in ring_fractions(cap.rings).iter().enumerate() {
                    if *frac <= line.ring_max + 1e-12 {
                        verts.push(cap.first_vertex + 1 + ring * RING_SEGMENTS + seg);
                    }
                }
            }
            verts.sort_unstable();
            verts.dedup();
            regions.insert(r.name.clone(), verts);
        }
        let faces = build_faces(&capsules);
        Ok(Self { joints, capsules, regions, vertex_count, faces })
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn region(&self, name: &str) -> &[usize] {
        self.regions.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Vertex ids owned by each part, in mesh order.
    pub fn part_labels(&self) -> Vec<BodyPart> {
        let mut out = Vec::with_capacity(self.vertex_count);
        for c in &self.capsules {
            out.extend(std::iter::repeat_n(c.part, c.vertex_count()));
        }
        out
    }
}

fn build_faces(capsules: &[CapsuleSpec]) -> Vec<[u32; 3]> {
    let n = RING_SEGMENTS;
    let mut faces = Vec::new();
    for c in capsules {
        let base = c.first_vertex;
        let pole_a = base;
        let pole_b = base + 1 + c.rings * n;
        let ring = |r: usize, k: usize| (base + 1 + r * n + k % n) as u32;
        for k in 0..n {
            faces.push([pole_a as u32, ring(0, k + 1), ring(0, k)]);
        }
        for r in 0..c.rings.saturating_sub(1) {
            for k in 0..n {
                faces.push([ring(r, k), ring(r, k + 1), ring(r + 1, k + 1)]);
                faces.push([ring(r, k), ring(r + 1, k + 1), ring(r + 1, k)]);
            }
        }
        let last = c.rings - 1;
        for k in 0..n {
            faces.push([pole_b as u32, ring(last, k), ring(last, k + 1)]);
        }
    }
    faces
}

pub fn default_template() -> &'static BodyTemplate {
    static TEMPLATE: OnceLock<BodyTemplate> = OnceLock::new();
    TEMPLATE.get_or_init(|| BodyTemplate::parse(DEFAULT_TEMPLATE).expect("bundled body template is valid"))
}
