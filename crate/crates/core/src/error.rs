use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty pose set")]
    EmptyPoseSet,
    #[error("antipodal rotation set")]
    AntipodalRotationSet,
    #[error("degenerate normal")]
    DegenerateNormal,
    #[error("invalid geometry input: {0}")]
    InvalidGeometry(&'static str),
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("pointmap/view count mismatch: {views} views, {pointmaps} point maps")]
    CountMismatch { views: usize, pointmaps: usize },
    #[error("frame index collision: {0}")]
    FrameCollision(u32),
    #[error("view {frame}: {reason}")]
    InvalidView { frame: u32, reason: String },
    #[error("invalid memory snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("empty primitive list")]
    EmptyScene,
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("blind target")]
    BlindTarget,
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("episode log does not match scene/trajectory: {0}")]
    LogMismatch(String),
}

impl Error {
    pub fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
