//! Procedural scenes, ground-truth rendering and visibility oracles.

mod oracle;
mod render;
mod scene;

pub use oracle::{
    coverage, relevance_oracle, sample_id, sample_pitch, sees, visibility_oracle, VisibleSet, DEFAULT_GRID,
    SAMPLES_PER_DIAGONAL,
};
pub use render::{gaussian, perturb_depth, render, unprojection_error, NoiseParams, RenderOutput};
pub use scene::{
    corridor_loop, preset, primitives_diagonal, two_rooms, Color, Hit, Primitive, Scene, SceneSpec,
    CORRIDOR_CORE, CORRIDOR_OUTER, HIT_EPSILON, PRESETS, TWO_ROOMS_DOOR, TWO_ROOMS_WALL,
};
