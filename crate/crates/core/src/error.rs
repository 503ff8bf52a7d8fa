use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("voxel coordinate {value} out of range [0, 2^21)")]
    CoordinateOutOfRange { value: i64 },
    #[error("map dimension {0} is not a power of two >= 8")]
    BadMapDimension(u32),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("no collision-free path found within budget")]
    PlanningFailed,
    #[error("start position is in collision")]
    StartInCollision,
}
