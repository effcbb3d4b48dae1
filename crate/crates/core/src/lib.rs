//! Text-conditioned generation of human–scene interactions.

pub mod autodiff;
pub mod body;
pub mod geom;
pub mod nn;
pub mod pla;
pub mod graphs;
pub mod scene;
pub mod textparse;
pub mod generator;
pub mod optimize;
pub mod pipeline;
