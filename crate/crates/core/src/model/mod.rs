//! The dual-branch network: six categorical embeddings, a three-level
//! hierarchy of prior nets, a label-driven posterior net and a prediction
//! head shared by both branches.
//!
//! ```text
//! C   = [e_user | e_service | e_service_as | e_user_as | e_service_city | e_user_city]
//! P1  = prior(C)         Z = [Z1 | C]    x1, x2, x3 = head layers    ŷ1 = out(x3)
//! P2  = prior(x1)        P3 = prior(x2)
//! Pr  = posterior(y)     ŷ2 = head([Zr | C])           (training only)
//! ```

mod checkpoint;
mod net;
mod spec;

pub use checkpoint::{load_params, save_params, CHECKPOINT_MAGIC};
pub use net::{Batch, ForwardOptions, ForwardTrace, Mode, PdsNet, PosteriorOutput, LEVELS};
pub use spec::{Ablation, Architecture, ModelSpec};
