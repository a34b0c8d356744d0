//! Numerical laboratory for Gabor frames generated by rational windows.
//!
//! The crate builds near-critical-density universal shift sets, computes the
//! symbol functions of the associated frame criterion, assembles the banded
//! criterion operator section by section, verifies its determinant
//! factorizations against independent oracles, and estimates frame bounds at
//! desk scale.

pub mod framecheck;
pub mod lambda;
pub mod numerics;
pub mod operator;
pub mod symbols;
pub mod windows;

pub use framecheck::{
    frame_bounds_estimate, frame_bounds_estimate_periodic, FrameConfig, FrameEstimate,
    TestFunction,
};
pub use lambda::{build_universal, PeriodicSet, UniversalSet};
pub use numerics::{C64, ComplexMatrix};
pub use operator::{build_segments, erase_row, segment_det, vandermonde_det, Segment};
pub use symbols::{
    general_symbol_family, simple_symbol_family, top_symbol_closed_form, ExpPolynomial,
    SymbolFamily,
};
pub use windows::{
    class_test, eval_window, fourier_transform, validate, GeneralWindow, MembershipReport,
    PoleTerm, SimpleWindow, Window,
};
