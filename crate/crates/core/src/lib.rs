//! Vectorization of grayscale glyph images into compact quadratic Bézier outlines.
//!
//! A glyph is modelled as a union of *dual parts*, each the difference of a
//! positive and a negative closed quadratic path. The pipeline fits such a
//! glyph directly to an image through a differentiable, pre-filtered occupancy
//! field (warmed up with an unsigned-distance loss), extracts the exact boolean
//! contour, and refines that contour against the image while simplifying it.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which is what the pipeline and CLI use.

pub mod boolops;
pub mod diff;
pub mod field;
pub mod fit;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod refine;
mod scalar;

pub use scalar::Scalar;

use thiserror::Error;

pub type Point = geom::Point<f64>;
pub type QuadBezier = geom::QuadBezier<f64>;
pub type ClosedPath = geom::ClosedPath<f64>;
pub type DualPart = geom::DualPart<f64>;
pub type DualPartGlyph = geom::DualPartGlyph<f64>;
pub type Segment = boolops::Segment<f64>;
pub type Loop = boolops::Loop<f64>;
pub type Contour = boolops::Contour<f64>;
pub type ParamVector = diff::ParamVector<f64>;
pub type PreFilter = field::PreFilter<f64>;
pub type SampleGrid = field::SampleGrid<f64>;

pub use field::GrayImage;
pub use fit::{FitConfig, FitTrace};
pub use metrics::CommandCount;
pub use refine::RefineConfig;

/// Any failure raised by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geom(#[from] geom::GeomError),
    #[error(transparent)]
    Field(#[from] field::FieldError),
    #[error(transparent)]
    Bool(#[from] boolops::BoolError),
    #[error(transparent)]
    Fit(#[from] fit::FitError),
    #[error(transparent)]
    Refine(#[from] refine::RefineError),
    #[error(transparent)]
    Io(#[from] io::IoError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
