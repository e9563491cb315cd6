//! Grasp synthesis for fuzzy-depth scenes.
//!
//! RGB-D cameras return unreliable depth on specular, transparent, and dark
//! surfaces — exactly the objects a soft gripper is good at picking up. This
//! crate deals with that end to end:
//!
//! 1. **Depth conditioning** ([`preprocess`]): temporal blending, an
//!    edge-aware spatial filter that ignores invalid pixels, and
//!    inpainting of the holes that remain.
//! 2. **A fully-convolutional grasp network** ([`net`], built on the
//!    from-scratch operator engine in [`tensor`]): from a 4-channel RGB-D
//!    crop it predicts five 300×300 maps — grasp quality, the grasp angle as
//!    (sin 2θ, cos 2θ), gripper opening width, and object height. The height
//!    head is the load-bearing extra: it lets the planner place the gripper
//!    without trusting the (fuzzy) depth at the grasp point.
//! 3. **Grasp extraction and planning** ([`extract`], [`plan`]): smooth the
//!    quality map, take its maxima, decode angle/width/height, lift the
//!    pixel to a world pose, and gate between two primitives — a pinch for
//!    flat objects and a normal approach whose descent depth is capped by
//!    both predicted and measured height.
//! 4. **A synthetic scene simulator** ([`sim`]): renders RGB-D scenes of
//!    boxes, cylinders, and disks with material-dependent depth corruption
//!    (noise, speckle dropout, transparent mis-readings), auto-labels
//!    grasps, and scores executed grasps with a geometric oracle that knows
//!    the true scene. Training data, evaluation, and the input-ablation
//!    study ([`run`]) are all built on it.
//!
//! The `examples/` directory has one runnable program per stage; the `fsg`
//! binary wraps the same entry points as subcommands (`gen-data`, `train`,
//! `infer`, `eval`).

pub mod camera;
pub mod dataset;
pub mod error;
pub mod extract;
pub mod frame;
pub mod maps;
pub mod net;
pub mod plan;
pub mod preprocess;
pub mod run;
pub mod sim;
pub mod tensor;

pub use error::{FsgError, FsgResult};
