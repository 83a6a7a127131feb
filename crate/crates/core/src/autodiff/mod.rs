//! Minimal reverse-mode automatic differentiation with second-derivative
//! support, multilayer perceptrons, and Adam — enough to train WGAN-GP
//! generator/critic pairs at the sizes used here.

mod adam;
mod net;
mod tape;

pub use adam::AdamState;
pub use net::{
    grad_penalty, grad_penalty_param_grad, Activation, ForwardPass, GpWorkspace, MlpNet,
    Workspace, Wrt,
};
pub use tape::{Tape, Var};
