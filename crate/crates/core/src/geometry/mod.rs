//! Meshes, rest configuration, lumped mass and the simulation state.

mod mass;
mod obj;
pub mod prim;
mod shell;
mod state;
mod tet;

pub use mass::{lumped_mass, shell_vertex_masses, tet_vertex_masses, MassSource};
pub use obj::{read_obj, write_obj};
pub use shell::{build_shell, build_shell_mapped, GridSpec, TriShellMesh};
pub use state::{DofMap, ObjectRange, SceneState};
pub use tet::{build_block, TetMesh};
