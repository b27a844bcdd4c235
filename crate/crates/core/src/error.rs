use std::path::PathBuf;

use thiserror::Error;

use crate::formats::{CodeClass, SpecialPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("unsupported bit width {0}, expected 6 or 8")]
    UnsupportedBitWidth(u8),
    #[error("unsupported minifloat layout E{exponent_bits}M{mantissa_bits}")]
    UnsupportedLayout {
        exponent_bits: u8,
        mantissa_bits: u8,
    },
    #[error("policy {policy:?} is not defined for E{exponent_bits}M{mantissa_bits}")]
    UnsupportedPolicy {
        exponent_bits: u8,
        mantissa_bits: u8,
        policy: SpecialPolicy,
    },
    #[error("unsupported integer width {0}, expected 4, 6 or 8")]
    UnsupportedIntWidth(u8),
    #[error("unknown format name {0:?}")]
    UnknownName(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("cannot encode non-finite value {0}")]
    NonFinite(f64),
    #[error("code {bits:#04x} of {format} is not a finite value ({class:?})")]
    ReservedCode {
        bits: u8,
        format: String,
        class: CodeClass,
    },
    #[error("code {bits:#04x} does not fit in {width} bits")]
    CodeTooWide { bits: u8, width: u8 },
    #[error("quantization step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("integer code {q} outside [-{bound}, {bound}]")]
    IntOutOfRange { q: i32, bound: i32 },
    #[error("expected a {expected} code, got {actual}")]
    FormatMismatch {
        expected: &'static str,
        actual: String,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape {shape:?} holds {expected} elements but {actual} values were given")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        actual: usize,
    },
    #[error("shape {0:?} has a zero dimension")]
    ZeroDim(Vec<usize>),
    #[error("element {index} is not finite ({value})")]
    NonFinite { index: usize, value: f32 },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("expected a rank-{expected} tensor, got shape {shape:?}")]
    Rank { expected: usize, shape: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantError {
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("no candidate formats to search")]
    EmptyCandidates,
    #[error("no layers to search")]
    NoLayers,
    #[error("layer {layer}: weight inner dim {weight_in} != activation inner dim {input_in}")]
    InnerDimMismatch {
        layer: usize,
        weight_in: usize,
        input_in: usize,
    },
    #[error("policy {policy} admits no {bits}-bit candidates")]
    EmptyPolicy { policy: String, bits: u8 },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Quant(#[from] QuantError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatapathError {
    #[error("operand lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{len} INT8 products may overflow the 32-bit accumulator")]
    AccumulatorOverflow { len: usize },
    #[error("INT x FP dot products are not supported; requantize one operand")]
    UnsupportedMixedOperands,
    #[error("unsupported operand format {0:?}")]
    UnsupportedSourceFormat(String),
    #[error("operand {index} is not a finite value")]
    NonFiniteOperand { index: usize },
    #[error("operand {index} is outside the symmetric INT8 range")]
    IntRange { index: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Error)]
pub enum TensorIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {found:?} at offset 0")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {0} at offset 4")]
    UnsupportedVersion(u16),
    #[error("unsupported dtype {0} at offset 6")]
    UnsupportedDtype(u8),
    #[error("zero-rank tensor at offset 7")]
    ZeroRank,
    #[error("dimension {index} is zero at offset {offset}")]
    ZeroDim { index: usize, offset: usize },
    #[error("truncated at offset {offset}: need {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("{extra} trailing bytes after payload at offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("non-finite value at offset {offset}")]
    NonFinite { offset: usize },
    #[error("tensor rank {0} cannot be written (must be 1..=255)")]
    UnwritableRank(usize),
    #[error("dimension {0} exceeds u32")]
    DimTooLarge(usize),
}
