//! Dataset similarity from PCA-projected feature vectors.
//!
//! Two datasets, a primary `P` and a secondary `S`, are jointly centered and
//! projected onto their top principal components. The sum of distances from
//! one secondary image to every primary image is that image's distance from
//! `P`; the mean over all secondary images is the distance between the
//! datasets. The remaining modules relate those distances to segmentation
//! quality (ODS F-score), split sorted images into parts, and pick few-shot
//! adaptation images by scaled distance.

pub mod analysis;
pub mod distance;
pub mod embedding_io;
pub mod performance;
pub mod projection;
pub mod synth;

pub use analysis::{ScaledSeries, SplitOptions, SplitReport};
pub use distance::{DatasetScore, DistanceReport, DistanceSummary, DistanceTable};
pub use embedding_io::{read_fvec, write_fvec, FeatureMatrix};
pub use performance::{OdsResult, PixelGrid};
pub use projection::{project_pair, ProjectionResult, DEFAULT_COMPONENTS};
pub use synth::{generate, SynthKind, SynthSpec};
