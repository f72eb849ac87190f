//! Mask post-processing: component cleanup, skeleton thinning and extraction
//! of the clockwise-ordered liver/gallbladder boundary.

mod boundary;
mod components;
mod skeleton;

pub use boundary::{
    clockwise_angle, extract_boundary, order_clockwise, BoundaryPolyline, MIN_RUN_PX,
};
pub use components::{components8, largest_component, DEFAULT_MIN_AREA_PX};
pub use skeleton::{is_simple, skeletonize, thin, SkeletonPolyline};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("largest component has {area} px, below the {min_area} px minimum")]
    MaskTooSmall { area: usize, min_area: usize },
    #[error("no gallbladder pixel borders liver or liver bed")]
    EmptyBoundary,
    #[error("input masks do not share dimensions")]
    DimensionMismatch,
}
