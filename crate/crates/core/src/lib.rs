//! Flexible low-bit quantization.
//!
//! Models a family of 8-bit and 6-bit number systems (INT and minifloat
//! with configurable exponent/mantissa split), the error each one induces
//! on a tensor, a per-layer format search driven by that error, and a
//! bit-accurate model of a datapath that multiplies such operands.
//!
//! ```
//! use flexquant::{calibrate_minmax, error_breakdown, NumberSystem, Tensor};
//!
//! let t = Tensor::from_vec(vec![0.5, -1.25, 3.0, 0.01]).unwrap();
//! let cfg = calibrate_minmax(&t, "e3m4".parse::<NumberSystem>().unwrap());
//! let err = error_breakdown(&t, &cfg);
//! assert_eq!(err.clip, 0.0);
//! assert!(err.round <= err.resolution_bound);
//! ```

pub mod cli;
pub mod codec;
pub mod datapath;
pub mod error;
pub mod error_model;
pub mod formats;
pub mod quantizer;
pub mod search;
pub mod synthetic;
pub mod tensor;
pub mod tensorio;

pub use codec::{fp_decode, fp_encode, fp_quantize_value, int_dequantize, int_quantize, Code};
pub use error::{
    CodecError, DatapathError, FormatError, QuantError, SearchError, TensorError, TensorIoError,
};
pub use error_model::{error_breakdown, mse, resolution_bound, ErrorBreakdown};
pub use formats::{builtin_formats, CodeClass, FpFormatSpec, NumberSystem, SpecialPolicy};
pub use quantizer::{
    calibrate_minmax, quantize_tensor, quantize_values, resolution_profile, QuantConfig,
    QuantizedTensor, ResolutionProfile,
};
pub use search::{
    run_search, select_layer_formats, select_tensor_format, Criterion, FormatReport, Layer,
    LayerSelection, MixPolicy, SearchSpace,
};
pub use tensor::Tensor;
pub use tensorio::{read_tensor, write_tensor};
