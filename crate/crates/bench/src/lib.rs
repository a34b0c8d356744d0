//! Shared fixtures for the benchmark targets.

use gaborlab_core::windows::{validate, RawPoleTerm, Window, TWO_PI};

pub fn raw(a: (f64, f64), w: (f64, f64), j: u32) -> RawPoleTerm {
    RawPoleTerm {
        a: [a.0, a.1],
        w: [w.0, w.1],
        j,
    }
}

/// Simple window with e^{2πw} = 2, 3, 4, ...
pub fn geometric_simple(n: usize) -> Window {
    let spec: Vec<RawPoleTerm> = (0..n)
        .map(|k| raw((1.0, 0.0), (((k + 2) as f64).ln() / TWO_PI, 0.0), 1))
        .collect();
    validate(&spec).unwrap()
}

/// General window of total degree 6 with mixed multiplicities.
pub fn mixed_general() -> Window {
    validate(&[
        raw((1.0, 0.0), (0.2, 0.0), 1),
        raw((0.7, 0.4), (0.45, 0.15), 2),
        raw((1.2, -0.3), (0.8, -0.1), 3),
    ])
    .unwrap()
}
