pub mod cutoff;
pub mod hyperbolic;
pub mod laplacian;
pub mod measure;
pub mod metric;
pub mod validation;
pub mod warp;
pub mod weight;

pub use cutoff::{smooth_step, smooth_step_d1, smooth_step_d2, DiagonalCutoff, EndCutoff, Window};
pub use hyperbolic::hyperbolic_distance;
pub use laplacian::{laplacian_symbols, LaplacianSymbols, Which};
pub use measure::MeasureTag;
pub use metric::{MetricModel, MetricTensor};
pub use validation::{verify_warp_conditions, ValidationReport};
pub use warp::{WarpFunction, WarpKind};
pub use weight::{verify_temperate, TemperateFit, TemperateWeight, WeightKind};
