//! Implicit-Euler stepping: Newton on the incremental potential, fixed-DOF
//! handling, manipulator kinematics and the per-step tape.

mod linalg;
mod manipulator;
mod newton;
pub(crate) mod scene;
mod sim;

pub use linalg::{fix_dofs, solve_spd, solve_symmetric, SparseSystem};
pub use manipulator::{clamp_action, left_jacobian, ActionLimits, Attachment, ClampMode, Manipulator, ManipulatorKind, Pose};
pub use newton::{newton_solve, EvalLevel, Evaluation, IncrementalPotential, NewtonParams, NewtonReport, Potential};
pub use scene::{Body, BodyKind, ParamId, Scene, SceneBuilder, SceneEnergy};
pub use sim::{Simulation, StepRecord, StepResult};

