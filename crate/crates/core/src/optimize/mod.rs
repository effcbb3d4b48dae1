//! Scene-aware refinement of a generated body: contact, collision, IBS,
//! regularization and human-human terms minimized by momentum descent.

mod ibs;
mod losses;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{ScalarTape, Var};
use crate::body::{
    assign_contact_labels, body_mesh, body_vertices_generic, BodyError, BodyMesh, BodyParams, ContactLabels, FREE_DIM,
    POSE_DIM,
};
use crate::geom::Real;
use crate::scene::{Scene, SceneError};
use crate::pla::ActionMention;

pub use ibs::{body_ibs, compute_ibs, is_equidistant, scene_points_near, IbsConfig, IbsPointSet, NearestIndex};
pub use losses::{
    collision_term, contact_term, hh_term, ibs_term, loss_collision, loss_contact, loss_hh, loss_ibs, loss_reg, reg_term,
    RegWeights,
};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
    #[error("non-finite loss or gradient at step {step}; state: {state}")]
    NonFinite { step: usize, state: String },
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub contact: f64,
    pub collision: f64,
    pub ibs: f64,
    pub reg: f64,
    pub hh: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { contact: 1.0, collision: 5.0, ibs: 1.0, reg: 0.1, hh: 5.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        for (name, w) in
            [("contact", self.contact), ("collision", self.collision), ("ibs", self.ibs), ("reg", self.reg), ("hh", self.hh)]
        {
            if !w.is_finite() || w < 0.0 {
                return Err(OptimizeError::InvalidWeights(format!("{name} = {w}")));
            }
        }
        Ok(())
    }
}

/// Unweighted values of the five terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub contact: f64,
    pub collision: f64,
    pub ibs: f64,
    pub reg: f64,
    pub hh: f64,
}

impl LossTerms {
    pub fn total(&self, w: &LossWeights) -> f64 {
        w.contact * self.contact + w.collision * self.collision + w.ibs * self.ibs + w.reg * self.reg + w.hh * self.hh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Contact,
    Collision,
    Ibs,
    Reg,
    Hh,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::Contact, Term::Collision, Term::Ibs, Term::Reg, Term::Hh];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub weights: LossWeights,
    pub reg: RegWeights,
    pub steps: usize,
    pub lr: f64,
    pub momentum: f64,
    /// Cap on the update norm per step (applied to the velocity).
    pub max_step: f64,
    /// The IBS point set is recomputed every this many steps.
    pub ibs_every: usize,
    pub ibs: IbsConfig,
    pub seed: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            reg: RegWeights::default(),
            steps: 300,
            lr: 0.01,
            momentum: 0.9,
            max_step: 0.005,
            ibs_every: 10,
            ibs: IbsConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub contact: f64,
    pub collision: f64,
    pub ibs: f64,
    pub reg: f64,
    pub hh: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub params: BodyParams,
    pub initial: LossTerms,
    /// Terms of `params`, with the IBS recomputed for it.
    pub terms: LossTerms,
    /// False when nothing beat the input, in which case `params` is the input.
    pub improved: bool,
    pub curve: Vec<CurveRow>,
}

impl OptimizeResult {
    pub fn total(&self, w: &LossWeights) -> f64 {
        self.terms.total(w)
    }
}

/// One refinement problem: a scene, the bodies already placed, the contact
/// labels and the starting parameters.
pub struct Problem<'a> {
    pub scene: &'a Scene,
    pub others: &'a [BodyMesh],
    pub contact: ContactLabels,
    pub init: BodyParams,
    pub config: OptimizeConfig,
    contact_idx: Vec<usize>,
    reg_weights: Vec<f64>,
    init_free: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(
        scene: &'a Scene,
        others: &'a [BodyMesh],
        contact: ContactLabels,
        init: BodyParams,
        config: OptimizeConfig,
    ) -> Result<Self, OptimizeError> {
        config.weights.validate()?;
        init.validate()?;
        let n = crate::body::default_template().vertex_count;
        if contact.labels.len() != n {
            return Err(OptimizeError::Precondition(format!("{} contact labels for {n} vertices", contact.labels.len())));
        }
        Ok(Self {
            scene,
            others,
            contact_idx: contact.indices(),
            contact,
            reg_weights: config.reg.per_entry(),
            init_free: init.free_vector(),
            init,
            config,
        })
    }

    pub fn mesh(&self, params: &BodyParams) -> Result<BodyMesh, OptimizeError> {
        Ok(body_mesh(params)?.with_contact(self.contact.clone()))
    }

    /// IBS of the body at `params`; `None` when the IBS term is switched off.
    pub fn ibs_at(&self, params: &BodyParams) -> Result<Option<IbsPointSet>, OptimizeError> {
        if self.config.weights.ibs == 0.0 {
            return Ok(None);
        }
        let mesh = self.mesh(params)?;
        Ok(Some(body_ibs(&mesh, self.scene, &self.config.ibs, self.config.seed)?))
    }

    fn terms_generic<T: Real>(&self, free: &[T], ibs: Option<&IbsPointSet>) -> Result<[T; 5], OptimizeError> {
        let beta = &self.init.beta;
        let verts = body_vertices_generic(beta, &free[0..3], &free[3..9], &free[9..9 + POSE_DIM])?;
        Ok([
            contact_term(&verts, &self.contact_idx, self.scene),
            collision_term(&verts, self.scene),
            ibs.map_or(T::zero(), |s| ibs_term(s, &verts)),
            reg_term(free, &self.init_free, &self.reg_weights),
            hh_term(&verts, self.others),
        ])
    }

    fn params(&self, free: &[f64]) -> BodyParams {
        self.init.with_free(free)
    }

    /// Term values at `params` with a given IBS set.
    pub fn terms(&self, params: &BodyParams, ibs: Option<&IbsPointSet>) -> Result<LossTerms, OptimizeError> {
        let [contact, collision, ibs, reg, hh] = self.terms_generic(&params.free_vector(), ibs)?;
        Ok(LossTerms { contact, collision, ibs, reg, hh })
    }

    /// Term values with the IBS recomputed at `params`.
    pub fn evaluate(&self, params: &BodyParams) -> Result<LossTerms, OptimizeError> {
        let ibs = self.ibs_at(params)?;
        self.terms(params, ibs.as_ref())
    }

    /// Value and free-vector gradient of one term, or of the weighted total
    /// when `term` is `None`.
    pub fn gradient(
        &self,
        free: &[f64],
        ibs: Option<&IbsPointSet>,
        term: Option<Term>,
    ) -> Result<(LossTerms, f64, Vec<f64>), OptimizeError> {
        if free.len() != FREE_DIM {
            return Err(OptimizeError::Precondition(format!("free vector has length {}", free.len())));
        }
        let tape = ScalarTape::new();
        let x = tape.inputs(free);
        let t = self.terms_generic(&x, ibs)?;
        let w = &self.config.weights;
        let out = match term {
            Some(Term::Contact) => t[0],
            Some(Term::Collision) => t[1],
            Some(Term::Ibs) => t[2],
            Some(Term::Reg) => t[3],
            Some(Term::Hh) => t[4],
            None => {
                let c = Var::constant;
                t[0] * c(w.contact) + t[1] * c(w.collision) + t[2] * c(w.ibs) + t[3] * c(w.reg) + t[4] * c(w.hh)
            }
        };
        let grad = tape.gradient(out, &x);
        let terms = LossTerms {
            contact: t[0].value(),
            collision: t[1].value(),
            ibs: t[2].value(),
            reg: t[3].value(),
            hh: t[4].value(),
        };
        Ok((terms, out.value(), grad))
    }

    /// Momentum descent on (t, r, p, h). Candidates are compared on their
    /// total with a freshly computed IBS, so the result is never worse than
    /// the input by that measure.
    pub fn run(&self) -> Result<OptimizeResult, OptimizeError> {
        let cfg = &self.config;
        let w = &cfg.weights;
        let mut x = self.init_free.clone();
        let mut velocity = vec![0.0; FREE_DIM];
        let mut ibs = self.ibs_at(&self.init)?;
        let initial = self.terms(&self.init, ibs.as_ref())?;
        let mut best = (initial.total(w), x.clone(), initial);
        let mut curve = Vec::with_capacity(cfg.steps + 1);
        let every = cfg.ibs_every.max(1);
        for step in 0..=cfg.steps {
            let refresh = step > 0 && (step % every == 0 || step == cfg.steps);
            if refresh {
                ibs = self.ibs_at(&self.params(&x))?;
            }
            let (terms, total, grad) = self.gradient(&x, ibs.as_ref(), None)?;
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(OptimizeError::NonFinite {
                    step,
                    state: format!("terms {terms:?}; free {x:?}; gradient {grad:?}"),
                });
            }
            if refresh && total < best.0 {
                best = (total, x.clone(), terms);
            }
            curve.push(CurveRow {
                step,
                contact: terms.contact,
                collision: terms.collision,
                ibs: terms.ibs,
                reg: terms.reg,
                hh: terms.hh,
                total,
            });
            if step == cfg.steps {
                break;
            }
            for (v, g) in velocity.iter_mut().zip(&grad) {
                *v = cfg.momentum * *v + g;
            }
            // cosine decay lets the non-smooth terms settle instead of ringing
            let lr = cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / cfg.steps as f64).cos());
            // clip the velocity itself so stored momentum cannot outrun the cap
            let norm = cfg.lr * velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > cfg.max_step {
                let scale = cfg.max_step / norm;
                velocity.iter_mut().for_each(|v| *v *= scale);
            }
            for (xi, v) in x.iter_mut().zip(&velocity) {
                *xi -= lr * v;
            }
        }
        let improved = best.0 < initial.total(w);
        let (params, terms) = if improved { (self.params(&best.1), best.2) } else { (self.init.clone(), initial) };
        Ok(OptimizeResult { params, initial, terms, improved, curve })
    }
}

/// Refines `init` in `scene` against the already placed `others`, with
/// contact labels derived from `actions`.
pub fn optimize(
    init: &BodyParams,
    scene: &Scene,
    others: &[BodyMesh],
    actions: &[ActionMention],
    config: &OptimizeConfig,
) -> Result<OptimizeResult, OptimizeError> {
    let contact = assign_contact_labels(actions)?;
    Problem::new(scene, others, contact, init.clone(), *config)?.run()
}

/// Loss curve as CSV with a header row.
pub fn write_curve_csv(rows: &[CurveRow], path: &Path) -> Result<(), OptimizeError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| OptimizeError::Io(e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| OptimizeError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
