//! Rational window functions: validation, class membership, evaluation.
//!
//! A window is a finite sum of pole terms a/(t - iw)^j with w off the
//! imaginary axis. Windows where every multiplicity is 1 get the stronger
//! `SimpleWindow` type; everything downstream that needs the Vandermonde
//! machinery requires it.

use crate::numerics::C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for pole-parameter distinctness and Re w != 0.
pub const PARAM_TOL: f64 = 1e-12;
/// Reject |2π Re w| beyond this: e^{2πw} powers must stay inside f64 range.
pub const OVERFLOW_GUARD: f64 = 40.0;

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Error)]
pub enum WindowError {
    #[error("window specification is empty")]
    EmptySpec,
    #[error("duplicate pole parameter: {0}")]
    DuplicatePole(String),
    #[error("pole parameter {0} is purely imaginary (|Re w| <= 1e-12)")]
    ImaginaryPoleParameter(C64),
    #[error("zero amplitude on pole term {0}")]
    ZeroAmplitude(usize),
    #[error("multiplicity must be >= 1 on pole term {0}")]
    NonpositiveMultiplicity(usize),
    #[error("overflow risk: |2π Re w| = {0:.3} exceeds {OVERFLOW_GUARD}")]
    OverflowRisk(f64),
    #[error("fourier transform unsupported for this window: {0}")]
    UnsupportedWindow(String),
    #[error("invalid scan parameters: {0}")]
    InvalidScan(String),
}

/// One pole term a/(t - iw)^j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleTerm {
    pub a: C64,
    pub w: C64,
    pub j: u32,
}

impl PoleTerm {
    /// e^{2πw}, the variable the symbol coefficients live in.
    pub fn u(&self) -> C64 {
        (self.w * TWO_PI).exp()
    }
}

/// Raw pole data as it appears in window specification JSON:
/// complex numbers are `[re, im]` pairs, `j` defaults to 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RawPoleTerm {
    pub a: [f64; 2],
    pub w: [f64; 2],
    #[serde(default = "default_multiplicity")]
    pub j: u32,
}

fn default_multiplicity() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowSpecDoc {
    pub terms: Vec<RawPoleTerm>,
}

/// Rational window with simple poles only.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleWindow {
    terms: Vec<PoleTerm>,
}

/// Rational window with arbitrary multiplicities, sorted ascending in j.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralWindow {
    terms: Vec<PoleTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Window {
    Simple(SimpleWindow),
    General(GeneralWindow),
}

impl SimpleWindow {
    pub fn n(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[PoleTerm] {
        &self.terms
    }

    pub fn to_general(&self) -> GeneralWindow {
        GeneralWindow {
            terms: self.terms.clone(),
        }
    }

    /// Construct directly from terms that are already known-simple.
    pub fn from_terms(terms: Vec<PoleTerm>) -> Result<Self, WindowError> {
        let raw: Vec<RawPoleTerm> = terms
            .iter()
            .map(|t| RawPoleTerm {
                a: [t.a.re, t.a.im],
                w: [t.w.re, t.w.im],
                j: t.j,
            })
            .collect();
        match validate(&raw)? {
            Window::Simple(w) => Ok(w),
            Window::General(_) => Err(WindowError::UnsupportedWindow(
                "multiplicities > 1 are not simple".into(),
            )),
        }
    }
}

impl GeneralWindow {
    /// Total degree M = Σ j_k.
    pub fn m(&self) -> usize {
        self.terms.iter().map(|t| t.j as usize).sum()
    }

    /// Number of distinct pole parameters.
    pub fn n(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[PoleTerm] {
        &self.terms
    }
}

impl Window {
    pub fn terms(&self) -> &[PoleTerm] {
        match self {
            Window::Simple(w) => w.terms(),
            Window::General(w) => w.terms(),
        }
    }

    pub fn degree(&self) -> usize {
        self.terms().iter().map(|t| t.j as usize).sum()
    }

    pub fn as_general(&self) -> GeneralWindow {
        match self {
            Window::Simple(w) => w.to_general(),
            Window::General(w) => w.clone(),
        }
    }
}

/// Validate raw pole data and classify the window.
///
/// Simple windows additionally require the values e^{2πw_k} to be pairwise
/// distinct; a collision (w differing by an integer multiple of i) breaks the
/// Vandermonde factors downstream, so it is reported as a duplicate pole.
pub fn validate(spec: &[RawPoleTerm]) -> Result<Window, WindowError> {
    if spec.is_empty() {
        return Err(WindowError::EmptySpec);
    }
    let mut terms = Vec::with_capacity(spec.len());
    for (i, raw) in spec.iter().enumerate() {
        let a = C64::new(raw.a[0], raw.a[1]);
        let w = C64::new(raw.w[0], raw.w[1]);
        if raw.j == 0 {
            return Err(WindowError::NonpositiveMultiplicity(i));
        }
        if a.norm() == 0.0 {
            return Err(WindowError::ZeroAmplitude(i));
        }
        if w.re.abs() <= PARAM_TOL {
            return Err(WindowError::ImaginaryPoleParameter(w));
        }
        if (TWO_PI * w.re).abs() > OVERFLOW_GUARD {
            return Err(WindowError::OverflowRisk((TWO_PI * w.re).abs()));
        }
        terms.push(PoleTerm { a, w, j: raw.j });
    }
    for i in 0..terms.len() {
        for k in i + 1..terms.len() {
            if (terms[i].w - terms[k].w).norm() <= PARAM_TOL {
                return Err(WindowError::DuplicatePole(format!(
                    "w[{i}] = {} and w[{k}] = {}",
                    terms[i].w, terms[k].w
                )));
            }
        }
    }
    let simple = terms.iter().all(|t| t.j == 1);
    if simple {
        for i in 0..terms.len() {
            for k in i + 1..terms.len() {
                if (terms[i].u() - terms[k].u()).norm() <= PARAM_TOL {
                    return Err(WindowError::DuplicatePole(format!(
                        "e^(2πw) collides for terms {i} and {k}"
                    )));
                }
            }
        }
        Ok(Window::Simple(SimpleWindow { terms }))
    } else {
        // multiplicities ascend; ties keep input order
        terms.sort_by_key(|t| t.j);
        Ok(Window::General(GeneralWindow { terms }))
    }
}

pub fn parse_spec_json(text: &str) -> Result<Window, WindowError> {
    let doc: WindowSpecDoc = serde_json::from_str(text)
        .map_err(|e| WindowError::InvalidScan(format!("bad window spec JSON: {e}")))?;
    validate(&doc.terms)
}

/// Evaluate Σ a_k/(t - iw_k)^{j_k} at real t.
pub fn eval_terms(terms: &[PoleTerm], t: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    terms
        .iter()
        .map(|term| {
            let base = C64::new(t, 0.0) - i * term.w;
            term.a / base.powi(term.j as i32)
        })
        .sum()
}

pub fn eval_window(window: &Window, t: f64) -> C64 {
    eval_terms(window.terms(), t)
}

/// Membership scan result for the class test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipReport {
    pub member: bool,
    pub witness: Option<f64>,
    pub min_modulus: f64,
}

/// The class test function Φ(t) = Σ a_k e^{2πw_k t} (2πi)^{j_k-1}/(j_k-1)! t^{j_k-1}.
fn test_fn(terms: &[PoleTerm], t: f64) -> C64 {
    let two_pi_i = C64::new(0.0, TWO_PI);
    terms
        .iter()
        .map(|term| {
            let p = term.j - 1;
            let coef = two_pi_i.powu(p) / factorial(p);
            term.a * (term.w * (TWO_PI * t)).exp() * coef * t.powi(p as i32)
        })
        .sum()
}

fn test_fn_derivative(terms: &[PoleTerm], t: f64) -> C64 {
    let two_pi_i = C64::new(0.0, TWO_PI);
    terms
        .iter()
        .map(|term| {
            let p = term.j - 1;
            let coef = two_pi_i.powu(p) / factorial(p);
            let poly = term.w * TWO_PI * t.powi(p as i32)
                + if p > 0 {
                    C64::new(p as f64 * t.powi(p as i32 - 1), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
            term.a * (term.w * (TWO_PI * t)).exp() * coef * poly
        })
        .sum()
}

/// Term-magnitude envelope for Φ; the dip detector works on |Φ|/envelope so
/// the overall exponential decay toward -∞ cannot masquerade as a zero.
fn envelope(terms: &[PoleTerm], t: f64) -> f64 {
    terms
        .iter()
        .map(|term| {
            let p = term.j - 1;
            let coef = TWO_PI.powi(p as i32) / factorial(p);
            term.a.norm() * (TWO_PI * term.w.re * t).exp() * coef * t.abs().powi(p as i32)
        })
        .sum()
}

fn factorial(n: u32) -> f64 {
    (1..=n as u64).map(|k| k as f64).product::<f64>().max(1.0)
}

const WITNESS_ATOL: f64 = 1e-12;
const DIP_RATIO: f64 = 1e-9;

fn ratio(terms: &[PoleTerm], t: f64) -> f64 {
    let e = envelope(terms, t);
    if e == 0.0 {
        return 1.0;
    }
    test_fn(terms, t).norm() / e
}

/// Ternary search for the minimum of the normalized modulus on [lo, hi].
fn refine_minimum(terms: &[PoleTerm], mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let third = (hi - lo) / 3.0;
        let a = lo + third;
        let b = hi - third;
        if ratio(terms, a) <= ratio(terms, b) {
            hi = b;
        } else {
            lo = a;
        }
        if hi - lo < 1e-18 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Check that beyond -s_edge a single term dominates the sum, so Φ cannot
/// vanish there. Returns false when dominance cannot be certified.
fn dominance_covers(terms: &[PoleTerm], s_edge: f64) -> bool {
    if terms.len() == 1 {
        return true;
    }
    let mut dom = 0usize;
    for (i, t) in terms.iter().enumerate() {
        if t.w.re < terms[dom].w.re {
            dom = i;
        }
    }
    let d = &terms[dom];
    let pd = (d.j - 1) as i32;
    let cd = d.a.norm() * TWO_PI.powi(pd) / factorial(d.j - 1);
    let mut others = 0.0;
    for (i, t) in terms.iter().enumerate() {
        if i == dom {
            continue;
        }
        let gap = t.w.re - d.w.re;
        if gap <= 1e-9 {
            return false; // tied decay rates: cannot certify dominance
        }
        let p = (t.j - 1) as i32;
        // ratio of |term|/|dominant| at t = -s, must be decreasing for s >= s_edge
        if p > pd && s_edge <= (p - pd) as f64 / (TWO_PI * gap) {
            return false;
        }
        let ck = t.a.norm() * TWO_PI.powi(p) / factorial(t.j - 1);
        others += (ck / cd) * (-TWO_PI * gap * s_edge).exp() * s_edge.powi(p - pd);
    }
    others < 0.5
}

/// Scan (-T_max, 0) for zeros of the class-test function.
///
/// Zeros are detected as dips of |Φ| relative to the term envelope and then
/// sharpened by ternary search; a witness must drive |Φ| below the absolute
/// tolerance 1e-12. When the asymptotically dominant term cannot be certified
/// to control the tail beyond the scan, the scan range is extended a few
/// times. The test stays a semi-decision: `min_modulus` reports how close the
/// scan came to a zero.
pub fn class_test(window: &Window, t_max: f64, steps: usize) -> Result<MembershipReport, WindowError> {
    if t_max <= 0.0 {
        return Err(WindowError::InvalidScan("T_max must be > 0".into()));
    }
    if steps < 100 {
        return Err(WindowError::InvalidScan("need at least 100 scan steps".into()));
    }
    let terms = window.terms();
    let mut min_modulus = f64::INFINITY;
    let mut witness: Option<f64> = None;

    let mut scan_hi = 0.0_f64; // scanning (-scan_lo, -scan_hi)
    let mut scan_lo = t_max;
    for _round in 0..5 {
        let h = (scan_lo - scan_hi) / steps as f64;
        let grid: Vec<f64> = (0..steps)
            .map(|i| -scan_lo + (i as f64 + 0.5) * h)
            .collect();
        let ratios: Vec<f64> = grid.iter().map(|&t| ratio(terms, t)).collect();
        for (&t, _) in grid.iter().zip(&ratios) {
            min_modulus = min_modulus.min(test_fn(terms, t).norm());
        }
        for i in 0..steps {
            let left = if i > 0 { ratios[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < steps {
                ratios[i + 1]
            } else {
                f64::INFINITY
            };
            let local_max = ratios[i].max(left.min(1.0)).max(right.min(1.0)).max(1e-300);
            let is_local_min = ratios[i] <= left && ratios[i] <= right;
            if !(is_local_min && ratios[i] < 0.9 * local_max.min(1.0)) {
                continue;
            }
            let lo = if i > 0 { grid[i - 1] } else { grid[i] - h };
            let hi = if i + 1 < steps {
                grid[i + 1]
            } else {
                (grid[i] + h).min(-1e-300)
            };
            let t_star = refine_minimum(terms, lo, hi);
            let phi = test_fn(terms, t_star);
            let env = envelope(terms, t_star).max(1.0);
            if t_star < 0.0 && phi.norm() < WITNESS_ATOL * env && ratio(terms, t_star) < DIP_RATIO {
                // a zero sitting exactly on the boundary t = 0 (or the
                // analytic continuation's zero off the open half-line) is
                // not a witness: locate the zero by one least-squares
                // Newton step and require it strictly interior
                let dphi = test_fn_derivative(terms, t_star);
                let interior = if dphi.norm() > 1e-9 * env {
                    let t_zero = t_star - (phi * dphi.conj()).re / dphi.norm_sqr();
                    t_zero < -1e-9
                } else {
                    t_star < -1e-6
                };
                if interior {
                    witness = Some(t_star);
                }
            }
        }
        if witness.is_some() || dominance_covers(terms, scan_lo) {
            break;
        }
        scan_hi = scan_lo;
        scan_lo *= 2.0;
    }

    Ok(MembershipReport {
        member: witness.is_none(),
        witness,
        min_modulus,
    })
}

/// Fourier transform of a simple-pole window under the half-line hypothesis
/// (all w_k real and positive): 2πi Σ a_k e^{-2πw_k τ} for τ > 0, 0 for τ < 0.
pub fn fourier_transform(window: &Window, tau: f64) -> Result<C64, WindowError> {
    let simple = match window {
        Window::Simple(w) => w,
        Window::General(_) => {
            return Err(WindowError::UnsupportedWindow(
                "transform is implemented for simple poles only".into(),
            ))
        }
    };
    for term in simple.terms() {
        if term.w.im.abs() > PARAM_TOL || term.w.re <= 0.0 {
            return Err(WindowError::UnsupportedWindow(format!(
                "pole parameter {} is not real and positive",
                term.w
            )));
        }
    }
    if tau < 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let weight = if tau == 0.0 { 0.5 } else { 1.0 };
    let sum: C64 = simple
        .terms()
        .iter()
        .map(|term| term.a * (-TWO_PI * term.w.re * tau).exp())
        .sum();
    Ok(C64::new(0.0, TWO_PI) * sum * weight)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_or_best, QuadratureCfg};

    fn raw(a: (f64, f64), w: (f64, f64), j: u32) -> RawPoleTerm {
        RawPoleTerm {
            a: [a.0, a.1],
            w: [w.0, w.1],
            j,
        }
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn validate_single_cauchy_kernel() {
        let w = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1)]).unwrap();
        match w {
            Window::Simple(s) => assert_eq!(s.n(), 1),
            _ => panic!("expected simple window"),
        }
    }

    #[test]
    fn validate_rejects_imaginary_pole() {
        let err = validate(&[raw((1.0, 0.0), (0.0, 1.0), 1)]).unwrap_err();
        assert!(matches!(err, WindowError::ImaginaryPoleParameter(_)));
    }

    #[test]
    fn validate_sorts_multiplicities_ascending() {
        let w = validate(&[raw((1.0, 0.0), (1.0, 0.0), 2), raw((2.0, 0.0), (2.0, 0.0), 1)])
            .unwrap();
        match w {
            Window::General(g) => {
                assert_eq!(g.m(), 3);
                assert_eq!(g.n(), 2);
                assert_eq!(g.terms()[0].j, 1);
                assert_eq!(g.terms()[1].j, 2);
            }
            _ => panic!("expected general window"),
        }
    }

    #[test]
    fn validate_rejects_duplicates_zero_amp_bad_mult() {
        assert!(matches!(
            validate(&[raw((1.0, 0.0), (1.0, 0.0), 1), raw((1.0, 0.0), (1.0, 0.0), 1)]),
            Err(WindowError::DuplicatePole(_))
        ));
        assert!(matches!(
            validate(&[raw((0.0, 0.0), (1.0, 0.0), 1)]),
            Err(WindowError::ZeroAmplitude(_))
        ));
        assert!(matches!(
            validate(&[raw((1.0, 0.0), (1.0, 0.0), 0)]),
            Err(WindowError::NonpositiveMultiplicity(_))
        ));
        assert!(matches!(validate(&[]), Err(WindowError::EmptySpec)));
        assert!(matches!(
            validate(&[raw((1.0, 0.0), (7.0, 0.0), 1)]),
            Err(WindowError::OverflowRisk(_))
        ));
        // distinct w but identical e^{2πw}: w2 = w1 + i
        assert!(matches!(
            validate(&[raw((1.0, 0.0), (1.0, 0.0), 1), raw((1.0, 0.0), (1.0, 1.0), 1)]),
            Err(WindowError::DuplicatePole(_))
        ));
    }

    #[test]
    fn eval_examples() {
        let w = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1)]).unwrap();
        // 1/(0 - i) = i
        assert!((eval_window(&w, 0.0) - c(0.0, 1.0)).norm() < 1e-15);

        let w2 = validate(&[raw((1.0, 0.0), (1.0, 0.0), 2)]).unwrap();
        assert!((eval_window(&w2, 0.0) - c(-1.0, 0.0)).norm() < 1e-15);

        let w3 = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1), raw((-1.0, 0.0), (2.0, 0.0), 1)])
            .unwrap();
        let expect = c(1.0, 0.0) / c(1.0, -1.0) - c(1.0, 0.0) / c(1.0, -2.0);
        assert!((eval_window(&w3, 1.0) - expect).norm() < 1e-15);
    }

    #[test]
    fn no_real_singularity_for_valid_windows() {
        let w = validate(&[raw((1.0, 0.0), (0.5, 3.0), 2), raw((0.3, 0.2), (-0.7, -1.0), 1)])
            .unwrap();
        for i in 0..2000 {
            let t = -10.0 + i as f64 * 0.01;
            assert!(eval_window(&w, t).norm().is_finite());
        }
    }

    #[test]
    fn class_test_single_exponential_is_member() {
        let w = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1)]).unwrap();
        let rep = class_test(&w, 50.0, 2000).unwrap();
        assert!(rep.member);
        assert!(rep.witness.is_none());
    }

    #[test]
    fn class_test_finds_closed_form_witness() {
        // Φ(t) = e^{2πt} - e^π e^{4πt} vanishes exactly at t = -1/2.
        let a2 = -(std::f64::consts::PI).exp();
        let w = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1), raw((a2, 0.0), (2.0, 0.0), 1)])
            .unwrap();
        let rep = class_test(&w, 50.0, 4000).unwrap();
        assert!(!rep.member);
        let witness = rep.witness.expect("witness expected");
        assert!((witness - (-0.5)).abs() < 1e-6, "witness = {witness}");
    }

    #[test]
    fn class_test_monotone_two_term_is_member() {
        // Φ(t) = 2^t - 3^t = 2^t (1 - (3/2)^t) != 0 for t < 0.
        let w1 = 2.0_f64.ln() / TWO_PI;
        let w2 = 3.0_f64.ln() / TWO_PI;
        let w = validate(&[raw((1.0, 0.0), (w1, 0.0), 1), raw((-1.0, 0.0), (w2, 0.0), 1)])
            .unwrap();
        let rep = class_test(&w, 50.0, 4000).unwrap();
        assert!(rep.member, "min modulus {}", rep.min_modulus);
        assert!(rep.min_modulus > 0.0);
    }

    #[test]
    fn class_test_scan_stability() {
        let a2 = -(std::f64::consts::PI).exp();
        let w = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1), raw((a2, 0.0), (2.0, 0.0), 1)])
            .unwrap();
        let rep1 = class_test(&w, 50.0, 1000).unwrap();
        let rep2 = class_test(&w, 50.0, 2000).unwrap();
        let rep3 = class_test(&w, 50.0, 4000).unwrap();
        assert!(!rep1.member && !rep2.member && !rep3.member);
    }

    #[test]
    fn class_test_general_reduces_to_simple_for_j_one() {
        let w1 = 2.0_f64.ln() / TWO_PI;
        let w2 = 3.0_f64.ln() / TWO_PI;
        let terms = [raw((1.0, 0.0), (w1, 0.0), 1), raw((-1.0, 0.0), (w2, 0.0), 1)];
        let simple = validate(&terms).unwrap();
        for i in 1..50 {
            let t = -i as f64 * 0.37;
            let phi = test_fn(simple.terms(), t);
            // hand-built Definition 1.1 test function
            let direct: C64 = simple
                .terms()
                .iter()
                .map(|term| term.a * (term.w * (TWO_PI * t)).exp())
                .sum();
            assert!((phi - direct).norm() <= 1e-15 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn fourier_transform_matches_quadrature_oracle() {
        let w = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1)]).unwrap();
        let closed = fourier_transform(&w, 1.0).unwrap();
        let expect = c(0.0, TWO_PI) * (-TWO_PI).exp();
        assert!((closed - expect).norm() < 1e-14);

        // independent quadrature of ∫ g(t) e^{2πitτ} dt over [-1e4, 1e4]
        let cfg = QuadratureCfg {
            rel_tol: 1e-7,
            max_nodes: 1 << 21,
            ..QuadratureCfg::default()
        };
        let quad = integrate_or_best(
            |t| eval_window(&w, t) * C64::new(0.0, TWO_PI * t).exp(),
            -1e4,
            1e4,
            cfg,
        );
        assert!(
            (quad - closed).norm() / closed.norm() < 1e-2,
            "quad={quad} closed={closed}"
        );
    }

    #[test]
    fn fourier_transform_two_terms_and_negative_tau() {
        let w = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1), raw((1.0, 0.0), (2.0, 0.0), 1)])
            .unwrap();
        let closed = fourier_transform(&w, 0.5).unwrap();
        let pi = std::f64::consts::PI;
        let expect = c(0.0, TWO_PI) * ((-pi).exp() + (-2.0 * pi).exp());
        assert!((closed - expect).norm() < 1e-14);

        assert_eq!(fourier_transform(&w, -1.0).unwrap(), c(0.0, 0.0));

        let cfg = QuadratureCfg {
            rel_tol: 1e-7,
            max_nodes: 1 << 21,
            ..QuadratureCfg::default()
        };
        let quad = integrate_or_best(
            |t| eval_window(&w, t) * C64::new(0.0, TWO_PI * 0.5 * t).exp(),
            -1e4,
            1e4,
            cfg,
        );
        assert!((quad - closed).norm() / closed.norm() < 1e-2);
    }

    #[test]
    fn fourier_transform_linearity() {
        let w12 = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1), raw((2.0, 0.0), (2.0, 0.0), 1)])
            .unwrap();
        let w1 = validate(&[raw((1.0, 0.0), (1.0, 0.0), 1)]).unwrap();
        let w2 = validate(&[raw((2.0, 0.0), (2.0, 0.0), 1)]).unwrap();
        for tau in [0.1, 0.7, 2.3] {
            let lhs = fourier_transform(&w12, tau).unwrap();
            let rhs = fourier_transform(&w1, tau).unwrap() + fourier_transform(&w2, tau).unwrap();
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }

    #[test]
    fn fourier_transform_rejects_unsupported() {
        let w = validate(&[raw((1.0, 0.0), (-1.0, 0.0), 1)]).unwrap();
        assert!(matches!(
            fourier_transform(&w, 1.0),
            Err(WindowError::UnsupportedWindow(_))
        ));
    }

    #[test]
    fn spec_json_roundtrip() {
        let text = r#"{"terms":[{"a":[1.0,0.0],"w":[1.0,0.0]},{"a":[0.5,-0.5],"w":[2.0,0.3],"j":2}]}"#;
        let w = parse_spec_json(text).unwrap();
        assert_eq!(w.degree(), 3);
    }
}
