//! Hand-differentiated numerical kernels on single-image H×W×C tensors.

pub mod activation;
pub mod conv;
pub mod curve;
pub mod fac;
pub(crate) mod gemm;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod resample;
pub mod tensor;

pub use conv::{conv2d_bwd, conv2d_fwd, ConvGrads, ConvSpec, Padding};
pub use curve::{curve_nlu_bwd, curve_nlu_fwd, CurveParams};
pub use fac::{fac_bwd, fac_fwd, FilterBank};
pub use gradcheck::{finite_diff_check, GradFixture, GradReport};
pub use params::{Grads, Initializer, Param, ParamId, ParamStore};
pub use tensor::Tensor;
