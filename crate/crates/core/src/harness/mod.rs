//! File formats, manifests, prompts, the evaluation runner and training-pair
//! emission.

pub mod config;
pub mod eval;
pub mod io;
pub mod manifest;
pub mod pairs;
pub mod prompt;

pub use config::RunConfig;
pub use eval::{run_eval, EvalKind, EvalReport};
pub use io::load_depth_gt;
pub use manifest::{Manifest, Record, Task};
pub use pairs::{emit_training_pairs, PairManifest, StyleMix};
pub use prompt::{render_prompt, PromptStyle, PromptTemplate};
