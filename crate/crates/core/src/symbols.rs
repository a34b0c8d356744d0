//! Symbol functions of the frame criterion.
//!
//! For simple poles the symbols m_l are exponential sums built from
//! elementary-symmetric coefficients A_{k,l}; for higher multiplicities the
//! pipeline goes through the q-polynomial expansion of the derivative trick:
//! coefficient tables a_{l,d} (per pole), A_{k,s} (cofactor products) and
//! their convolution B_{s,l}, ending in exponential polynomials with t-powers.

use crate::numerics::C64;
use crate::windows::{GeneralWindow, SimpleWindow, TWO_PI};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Degree guard: coefficient tables grow combinatorially past this.
pub const MAX_DEGREE: usize = 12;
/// Largest finite support accepted by the trick evaluators.
pub const MAX_SUPPORT: usize = 32;

#[derive(Debug, Error)]
pub enum SymbolsError {
    #[error("degree {0} exceeds the desk-scale guard {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("support {0} exceeds {MAX_SUPPORT}")]
    SupportTooLarge(usize),
    #[error("denominator failed to cancel (remainder norm {0:.3e}); this indicates a bug")]
    NoncancellingDenominator(f64),
    #[error("evaluation point within 1e-8 of a pole: {0}")]
    PoleHit(String),
}

fn two_pi_i() -> C64 {
    C64::new(0.0, TWO_PI)
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n as u64).map(|k| k as f64).product::<f64>().max(1.0)
}

pub(crate) fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

// ---------------------------------------------------------------------------
// polynomials in q = e^{2πiz}
// ---------------------------------------------------------------------------

/// Polynomial in q with complex coefficients, trailing exact zeros trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct QPolynomial {
    coeffs: Vec<C64>,
}

impl QPolynomial {
    pub fn zero() -> Self {
        QPolynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        QPolynomial { coeffs: vec![c] }.trimmed()
    }

    pub fn from_coeffs(coeffs: Vec<C64>) -> Self {
        QPolynomial { coeffs }.trimmed()
    }

    fn trimmed(mut self) -> Self {
        while self
            .coeffs
            .last()
            .is_some_and(|c| *c == C64::new(0.0, 0.0))
        {
            self.coeffs.pop();
        }
        self
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, d: usize) -> C64 {
        self.coeffs.get(d).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &QPolynomial) -> QPolynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        QPolynomial { coeffs: out }.trimmed()
    }

    pub fn scale(&self, s: C64) -> QPolynomial {
        QPolynomial {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
        .trimmed()
    }

    pub fn mul(&self, other: &QPolynomial) -> QPolynomial {
        if self.is_zero() || other.is_zero() {
            return QPolynomial::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        QPolynomial { coeffs: out }.trimmed()
    }

    /// Multiply by q^k.
    pub fn shift(&self, k: usize) -> QPolynomial {
        if self.is_zero() {
            return QPolynomial::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); k];
        out.extend_from_slice(&self.coeffs);
        QPolynomial { coeffs: out }
    }

    pub fn pow(&self, e: usize) -> QPolynomial {
        let mut acc = QPolynomial::constant(C64::new(1.0, 0.0));
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// The operator d/dz = 2πi q d/dq.
    pub fn dz(&self) -> QPolynomial {
        QPolynomial {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(d, c)| c * two_pi_i() * d as f64)
                .collect(),
        }
        .trimmed()
    }

    pub fn eval(&self, q: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * q + c;
        }
        acc
    }

    /// Exact polynomial division; the remainder must vanish up to roundoff.
    pub fn exact_div(&self, den: &QPolynomial) -> Result<QPolynomial, SymbolsError> {
        assert!(!den.is_zero(), "division by zero polynomial");
        if self.is_zero() {
            return Ok(QPolynomial::zero());
        }
        let dden = den.coeffs.len() - 1;
        if self.coeffs.len() - 1 < dden {
            let rem: f64 = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
            return Err(SymbolsError::NoncancellingDenominator(rem));
        }
        let mut rem = self.coeffs.clone();
        let mut quot = vec![C64::new(0.0, 0.0); rem.len() - dden];
        let lead = *den.coeffs.last().unwrap();
        for i in (dden..rem.len()).rev() {
            let f = rem[i] / lead;
            quot[i - dden] = f;
            for (j, dc) in den.coeffs.iter().enumerate() {
                rem[i - dden + j] -= f * dc;
            }
        }
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
        let rem_norm = rem.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if rem_norm > 1e-9 * scale {
            return Err(SymbolsError::NoncancellingDenominator(rem_norm));
        }
        Ok(QPolynomial { coeffs: quot }.trimmed())
    }
}

/// Rational function of q with polynomial numerator and denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct QRational {
    pub num: QPolynomial,
    pub den: QPolynomial,
}

impl QRational {
    pub fn eval(&self, q: C64) -> Result<C64, SymbolsError> {
        let d = self.den.eval(q);
        if d.norm() <= 1e-8 {
            return Err(SymbolsError::PoleHit(format!("|den({q})| = {:.3e}", d.norm())));
        }
        Ok(self.num.eval(q) / d)
    }
}

fn one_minus_q() -> QPolynomial {
    QPolynomial::from_coeffs(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])
}

fn q_minus_one() -> QPolynomial {
    QPolynomial::from_coeffs(vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)])
}

/// Numerators n_l of f_l = n_l/(1-q)^{l+1}, built by the exact recurrence
/// n_{l+1} = (d/dz n_l)(1-q) + (l+1)·2πi·q·n_l with n_0 = 1.
fn f_numerators(l_max: usize) -> Vec<QPolynomial> {
    let mut out = Vec::with_capacity(l_max + 1);
    out.push(QPolynomial::constant(C64::new(1.0, 0.0)));
    for l in 0..l_max {
        let prev = &out[l];
        let next = prev
            .dz()
            .mul(&one_minus_q())
            .add(&prev.shift(1).scale(two_pi_i() * (l + 1) as f64));
        out.push(next);
    }
    out
}

/// f_l(z) = (1/(1-e^{2πiz}))^{(l)} as a rational function of q = e^{2πiz}.
pub fn q_derivative_chain(l: usize) -> Result<QRational, SymbolsError> {
    if l > MAX_DEGREE {
        return Err(SymbolsError::DegreeTooLarge(l));
    }
    let nums = f_numerators(l);
    Ok(QRational {
        num: nums[l].clone(),
        den: one_minus_q().pow(l + 1),
    })
}

// ---------------------------------------------------------------------------
// the trick table a_{l,d}
// ---------------------------------------------------------------------------

/// Coefficients a_{l,d} expanding (1-e^{2πiz})^j Σ c_n/(z-n)^j at z = t-iw
/// into Σ a_{l,d} h^{(l)}(t-iw) e^{2πitd}.
#[derive(Debug, Clone)]
pub struct TrickTable {
    pub mult: u32,
    pub w: C64,
    a: Vec<Vec<C64>>,
}

impl TrickTable {
    pub fn a(&self, l: usize, d: usize) -> C64 {
        self.a[l][d]
    }

    pub fn table(&self) -> &[Vec<C64>] {
        &self.a
    }
}

/// Expand the derivative-trick identity for multiplicity `mult` at pole
/// parameter `w`. Every denominator (1-q)^{j+1} must cancel against the
/// (q-1)^{mult-1} prefactor; a residue signals a bug, not bad input.
pub fn trick_table(mult: u32, w: C64) -> Result<TrickTable, SymbolsError> {
    if mult < 1 {
        return Err(SymbolsError::DegreeTooLarge(0));
    }
    let k = mult as usize;
    if k > MAX_DEGREE {
        return Err(SymbolsError::DegreeTooLarge(k));
    }
    let nums = f_numerators(k.saturating_sub(1));
    let mut c_polys = vec![QPolynomial::zero(); k];
    let fact = factorial(mult - 1);
    // leading term: h^{(k-1)} (q-1)^{k-1}/(k-1)!
    c_polys[k - 1] = q_minus_one().pow(k - 1).scale(C64::new(1.0 / fact, 0.0));
    // second sum: q (q-1)^{k-1}/(k-1)! Σ_{l'} (2πi)^{k-1-l'} C(k-1,l') Σ_{j} C(l',j) h^{(l'-j)} f_j
    if k >= 2 {
        let lead = q_minus_one().pow(k - 1).shift(1);
        for lp in 0..=k - 2 {
            for jj in 0..=lp {
                let quot = lead
                    .mul(&nums[jj])
                    .exact_div(&one_minus_q().pow(jj + 1))?;
                let scale = two_pi_i().powu((k - 1 - lp) as u32)
                    * (binom(mult - 1, lp as u32) * binom(lp as u32, jj as u32) / fact);
                c_polys[lp - jj] = c_polys[lp - jj].add(&quot.scale(scale));
            }
        }
    }
    let u = (w * TWO_PI).exp();
    let mut a = vec![vec![C64::new(0.0, 0.0); k]; k];
    for (l, poly) in c_polys.iter().enumerate() {
        if let Some(deg) = poly.degree() {
            assert!(deg < k, "trick expansion degree overflow");
        }
        let mut updow = C64::new(1.0, 0.0);
        for (d, slot) in a[l].iter_mut().enumerate() {
            *slot = poly.coeff(d) * updow;
            updow *= u;
        }
    }
    Ok(TrickTable { mult, w, a })
}

// ---------------------------------------------------------------------------
// exponential polynomials and symbol families
// ---------------------------------------------------------------------------

/// One term c · e^{2πwt} · t^p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub c: C64,
    pub w: C64,
    pub p: u32,
}

/// Finite sum of exponential-polynomial terms; terms with the same exact
/// (w, p) key are merged, exact-zero coefficients dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpPolynomial {
    terms: Vec<ExpTerm>,
}

impl ExpPolynomial {
    pub fn from_terms(terms: impl IntoIterator<Item = ExpTerm>) -> Self {
        let mut map: BTreeMap<(u64, u64, u32), C64> = BTreeMap::new();
        for t in terms {
            *map.entry((t.w.re.to_bits(), t.w.im.to_bits(), t.p))
                .or_insert(C64::new(0.0, 0.0)) += t.c;
        }
        let terms = map
            .into_iter()
            .filter(|(_, c)| *c != C64::new(0.0, 0.0))
            .map(|((wre, wim, p), c)| ExpTerm {
                c,
                w: C64::new(f64::from_bits(wre), f64::from_bits(wim)),
                p,
            })
            .collect();
        ExpPolynomial { terms }
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn eval(&self, t: f64) -> C64 {
        self.terms
            .iter()
            .map(|term| term.c * (term.w * (TWO_PI * t)).exp() * t.powi(term.p as i32))
            .sum()
    }

    pub fn max_abs_on(&self, lo: f64, hi: f64, samples: usize) -> f64 {
        (0..=samples)
            .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
            .map(|t| self.eval(t).norm())
            .fold(0.0, f64::max)
    }
}

/// Intermediate coefficient tables kept alongside the symbols.
#[derive(Debug, Clone)]
pub enum FamilyTables {
    Simple {
        /// a[k][l] = A_{k,l}
        a: Vec<Vec<C64>>,
    },
    General {
        /// a_ks[k][s] = A_{k,s}
        a_ks: Vec<Vec<C64>>,
        /// b[k][s][l] = B^{(k)}_{s,l}
        b: Vec<Vec<Vec<C64>>>,
        tricks: Vec<TrickTable>,
    },
}

/// The family m_0..m_{M-1} with its intermediate tables.
#[derive(Debug, Clone)]
pub struct SymbolFamily {
    pub m: Vec<ExpPolynomial>,
    pub tables: FamilyTables,
}

impl SymbolFamily {
    /// Number of symbols M.
    pub fn degree(&self) -> usize {
        self.m.len()
    }

    pub fn eval(&self, s: usize, t: f64) -> C64 {
        self.m[s].eval(t)
    }

    /// Suprema of |m_s| sampled on [0,1]; these bound the operator entries.
    pub fn sup_bounds(&self) -> Vec<f64> {
        self.m.iter().map(|p| p.max_abs_on(0.0, 1.0, 1000)).collect()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct TermDump {
            c: [f64; 2],
            w: [f64; 2],
            p: u32,
        }
        #[derive(Serialize)]
        struct FamilyDump {
            degree: usize,
            m: Vec<Vec<TermDump>>,
        }
        let dump = FamilyDump {
            degree: self.degree(),
            m: self
                .m
                .iter()
                .map(|poly| {
                    poly.terms()
                        .iter()
                        .map(|t| TermDump {
                            c: [t.c.re, t.c.im],
                            w: [t.w.re, t.w.im],
                            p: t.p,
                        })
                        .collect()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dump).expect("family serializes")
    }
}

/// Deserializable mirror of the JSON emitted by [`SymbolFamily::to_json`].
#[derive(Debug, Deserialize)]
pub struct FamilyJson {
    pub degree: usize,
    pub m: Vec<Vec<FamilyJsonTerm>>,
}

#[derive(Debug, Deserialize)]
pub struct FamilyJsonTerm {
    pub c: [f64; 2],
    pub w: [f64; 2],
    pub p: u32,
}

/// Symbols for a simple-pole window: A_{k,l} is the l-th coefficient of
/// Π_{j≠k}(1 - e^{2πw_j} q), and m_l(t) = Σ_k a_k A_{k,l} e^{2πw_k t}.
pub fn simple_symbol_family(window: &SimpleWindow) -> Result<SymbolFamily, SymbolsError> {
    let n = window.n();
    if n > MAX_DEGREE {
        return Err(SymbolsError::DegreeTooLarge(n));
    }
    let terms = window.terms();
    let mut a = Vec::with_capacity(n);
    for k in 0..n {
        let mut poly = QPolynomial::constant(C64::new(1.0, 0.0));
        for (j, term) in terms.iter().enumerate() {
            if j != k {
                poly = poly.mul(&QPolynomial::from_coeffs(vec![
                    C64::new(1.0, 0.0),
                    -term.u(),
                ]));
            }
        }
        a.push((0..n).map(|l| poly.coeff(l)).collect::<Vec<_>>());
    }
    let m = (0..n)
        .map(|l| {
            ExpPolynomial::from_terms(terms.iter().enumerate().map(|(k, term)| ExpTerm {
                c: term.a * a[k][l],
                w: term.w,
                p: 0,
            }))
        })
        .collect();
    Ok(SymbolFamily {
        m,
        tables: FamilyTables::Simple { a },
    })
}

/// Symbols for a general window via the trick-table pipeline.
pub fn general_symbol_family(window: &GeneralWindow) -> Result<SymbolFamily, SymbolsError> {
    let m_total = window.m();
    if m_total > MAX_DEGREE {
        return Err(SymbolsError::DegreeTooLarge(m_total));
    }
    let terms = window.terms();
    let n = terms.len();

    let mut a_ks: Vec<Vec<C64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut poly = QPolynomial::constant(C64::new(1.0, 0.0));
        for (l, term) in terms.iter().enumerate() {
            if l != k {
                let factor = QPolynomial::from_coeffs(vec![C64::new(1.0, 0.0), -term.u()]);
                poly = poly.mul(&factor.pow(term.j as usize));
            }
        }
        let width = m_total - terms[k].j as usize;
        a_ks.push((0..=width).map(|s| poly.coeff(s)).collect());
    }

    let tricks: Vec<TrickTable> = terms
        .iter()
        .map(|term| trick_table(term.j, term.w))
        .collect::<Result<_, _>>()?;

    // B^{(k)}_{s,l} = Σ_{d+s'=s} a_{l,d} A_{k,s'}
    let mut b: Vec<Vec<Vec<C64>>> = Vec::with_capacity(n);
    for k in 0..n {
        let jk = terms[k].j as usize;
        let mut bk = vec![vec![C64::new(0.0, 0.0); jk]; m_total];
        for (s, row) in bk.iter_mut().enumerate() {
            for (l, slot) in row.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for d in 0..jk.min(s + 1) {
                    let sp = s - d;
                    if sp < a_ks[k].len() {
                        acc += tricks[k].a(l, d) * a_ks[k][sp];
                    }
                }
                *slot = acc;
            }
        }
        b.push(bk);
    }

    let m = (0..m_total)
        .map(|s| {
            let b = &b;
            ExpPolynomial::from_terms(terms.iter().enumerate().flat_map(move |(k, term)| {
                let jk = term.j as usize;
                (0..jk).map(move |l| ExpTerm {
                    c: term.a * b[k][s][l] * two_pi_i().powu(l as u32),
                    w: term.w,
                    p: l as u32,
                })
            }))
        })
        .collect();

    Ok(SymbolFamily {
        m,
        tables: FamilyTables::General { a_ks, b, tricks },
    })
}

/// Closed form of the top symbol m_{M-1}.
///
/// Derived from the top coefficients of the pipeline: group k contributes
/// a_k (-1)^{M-j_k} e^{2πΣ_{l≠k} w_l j_l} e^{2πw_k(j_k-1)} (2πi)^{j_k-1}/(j_k-1)!
/// · e^{2πw_k t} (t-1)^{j_k-1}; for simple windows this is the familiar
/// (-1)^{N-1} e^{2πΣw} Σ a_k e^{2π(t-1)w_k}.
pub fn top_symbol_closed_form(window: &GeneralWindow) -> ExpPolynomial {
    let m_total = window.m();
    let terms = window.terms();
    let mut out = Vec::new();
    for (k, term) in terms.iter().enumerate() {
        let jk = term.j;
        let others: C64 = terms
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != k)
            .map(|(_, t)| t.w * (t.j as f64))
            .sum();
        let sign = if (m_total - jk as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        let prefactor = term.a
            * sign
            * (others * TWO_PI).exp()
            * (term.w * (TWO_PI * (jk as f64 - 1.0))).exp()
            * two_pi_i().powu(jk - 1)
            / factorial(jk - 1);
        for r in 0..jk {
            let binomial_sign = if (jk - 1 - r) % 2 == 0 { 1.0 } else { -1.0 };
            out.push(ExpTerm {
                c: prefactor * binom(jk - 1, r) * binomial_sign,
                w: term.w,
                p: r,
            });
        }
    }
    ExpPolynomial::from_terms(out)
}

/// Minimum of |m_{M-1}| over [0, 1-eps1]: dense grid plus local refinement.
pub fn top_symbol_min(family: &SymbolFamily, eps1: f64) -> f64 {
    assert!(eps1 > 0.0 && eps1 < 0.5, "eps1 must lie in (0, 1/2)");
    let top = family.m.last().expect("family is nonempty");
    let hi = 1.0 - eps1;
    let n = 10_000usize;
    let h = hi / n as f64;
    let vals: Vec<f64> = (0..=n).map(|i| top.eval(i as f64 * h).norm()).collect();
    let mut best = f64::INFINITY;
    for i in 0..=n {
        let left = if i > 0 { vals[i - 1] } else { f64::INFINITY };
        let right = if i < n { vals[i + 1] } else { f64::INFINITY };
        best = best.min(vals[i]);
        if vals[i] <= left && vals[i] <= right {
            let mut lo = (i as f64 - 1.0).max(0.0) * h;
            let mut up = ((i + 1) as f64 * h).min(hi);
            for _ in 0..120 {
                let third = (up - lo) / 3.0;
                if top.eval(lo + third).norm() <= top.eval(up - third).norm() {
                    up -= third;
                } else {
                    lo += third;
                }
            }
            best = best.min(top.eval(0.5 * (lo + up)).norm());
        }
    }
    best
}

// ---------------------------------------------------------------------------
// trick identity evaluators
// ---------------------------------------------------------------------------

fn check_support(c: &[(i64, C64)], z: C64) -> Result<(), SymbolsError> {
    if c.len() > MAX_SUPPORT {
        return Err(SymbolsError::SupportTooLarge(c.len()));
    }
    for &(n, _) in c {
        if (z - C64::new(n as f64, 0.0)).norm() < 1e-8 {
            return Err(SymbolsError::PoleHit(format!("z = {z} near integer {n}")));
        }
    }
    Ok(())
}

/// Left side: (1-e^{2πiz})^k Σ c_n/(z-n)^k computed directly.
pub fn trick_lhs(k: u32, c: &[(i64, C64)], z: C64) -> Result<C64, SymbolsError> {
    if k < 1 || k as usize > MAX_DEGREE {
        return Err(SymbolsError::DegreeTooLarge(k as usize));
    }
    check_support(c, z)?;
    let e = (C64::new(0.0, TWO_PI) * z).exp();
    let sum: C64 = c
        .iter()
        .map(|&(n, cn)| cn / (z - C64::new(n as f64, 0.0)).powi(k as i32))
        .sum();
    Ok((C64::new(1.0, 0.0) - e).powu(k) * sum)
}

/// Derivatives of h(z) = (1-e^{2πiz}) Σ c_n/(z-n) by the exact product rule.
fn h_derivative(l: u32, c: &[(i64, C64)], z: C64) -> C64 {
    let e = (C64::new(0.0, TWO_PI) * z).exp();
    let one = C64::new(1.0, 0.0);
    let v_derivative = |r: u32| -> C64 {
        let sgn = if r.is_multiple_of(2) { 1.0 } else { -1.0 };
        c.iter()
            .map(|&(n, cn)| cn / (z - C64::new(n as f64, 0.0)).powi(r as i32 + 1))
            .sum::<C64>()
            * sgn
            * factorial(r)
    };
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..=l {
        let u_r = if r == 0 { one - e } else { -two_pi_i().powu(r) * e };
        acc += u_r * v_derivative(l - r) * binom(l, r);
    }
    acc
}

/// Right side of the derivative-trick identity, assembled from exact
/// derivatives of h and the rational chain f_j.
pub fn trick_rhs(k: u32, c: &[(i64, C64)], z: C64) -> Result<C64, SymbolsError> {
    if k < 1 || k as usize > MAX_DEGREE {
        return Err(SymbolsError::DegreeTooLarge(k as usize));
    }
    check_support(c, z)?;
    let e = (C64::new(0.0, TWO_PI) * z).exp();
    let one = C64::new(1.0, 0.0);
    if (one - e).norm() <= 1e-8 && k >= 2 {
        return Err(SymbolsError::PoleHit(format!(
            "1-e^(2πiz) = {:.3e} too small",
            (one - e).norm()
        )));
    }
    let fact = factorial(k - 1);
    let lead = (e - one).powu(k - 1) / fact;
    let mut rhs = h_derivative(k - 1, c, z) * lead;
    if k >= 2 {
        let mut inner = C64::new(0.0, 0.0);
        for l in 0..=k - 2 {
            let mut hsum = C64::new(0.0, 0.0);
            for j in 0..=l {
                let fj = q_derivative_chain(j as usize)?.eval(e)?;
                hsum += h_derivative(l - j, c, z) * fj * binom(l, j);
            }
            inner += two_pi_i().powu(k - l - 1) * binom(k - 1, l) * hsum;
        }
        rhs += e * lead * inner;
    }
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windows::{validate, RawPoleTerm, Window};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    fn simple(spec: &[RawPoleTerm]) -> SimpleWindow {
        match validate(spec).unwrap() {
            Window::Simple(s) => s,
            _ => panic!("expected simple window"),
        }
    }

    fn general(spec: &[RawPoleTerm]) -> GeneralWindow {
        validate(spec).unwrap().as_general()
    }

    #[test]
    fn derivative_chain_frozen_low_orders() {
        let f0 = q_derivative_chain(0).unwrap();
        assert_eq!(f0.num.coeffs(), &[c(1.0, 0.0)]);
        assert_eq!(f0.den.coeffs(), &[c(1.0, 0.0), c(-1.0, 0.0)]);

        // f_1 = 2πi q / (1-q)^2
        let f1 = q_derivative_chain(1).unwrap();
        assert_eq!(f1.num.coeffs().len(), 2);
        assert!((f1.num.coeff(1) - two_pi_i()).norm() < 1e-15);
        assert_eq!(f1.den.degree(), Some(2));

        // f_2 = (2πi)^2 (q + q^2) / (1-q)^3
        let f2 = q_derivative_chain(2).unwrap();
        let w2 = two_pi_i() * two_pi_i();
        assert!((f2.num.coeff(1) - w2).norm() < 1e-12);
        assert!((f2.num.coeff(2) - w2).norm() < 1e-12);
        assert_eq!(f2.den.degree(), Some(3));
    }

    #[test]
    fn derivative_chain_denominator_degree() {
        for l in 0..=8 {
            let f = q_derivative_chain(l).unwrap();
            assert_eq!(f.den.degree(), Some(l + 1));
        }
    }

    #[test]
    fn trick_table_j1_is_identity() {
        let t = trick_table(1, c(0.3, 0.1)).unwrap();
        assert!((t.a(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn trick_table_j2_frozen() {
        let w = c(0.25, -0.1);
        let u = (w * TWO_PI).exp();
        let t = trick_table(2, w).unwrap();
        assert!((t.a(1, 0) - c(-1.0, 0.0)).norm() < 1e-12);
        assert!((t.a(1, 1) - u).norm() < 1e-12);
        assert!(t.a(0, 0).norm() < 1e-12);
        assert!((t.a(0, 1) - (-two_pi_i() * u)).norm() < 1e-12);
    }

    #[test]
    fn trick_table_top_column_closed_form() {
        let w = c(0.2, 0.4);
        let u = (w * TWO_PI).exp();
        for j in 1..=6u32 {
            let t = trick_table(j, w).unwrap();
            for l in 0..j {
                let sign = if (j - 1 - l) % 2 == 0 { 1.0 } else { -1.0 };
                let expect = u.powu(j - 1) * sign * two_pi_i().powu(j - 1 - l)
                    * binom(j - 1, l)
                    / factorial(j - 1);
                let got = t.a(l as usize, (j - 1) as usize);
                assert!(
                    (got - expect).norm() <= 1e-10 * expect.norm().max(1.0),
                    "j={j} l={l}: got {got}, expected {expect}"
                );
            }
        }
    }

    #[test]
    fn simple_family_single_pole() {
        let win = simple(&[raw((1.0, 0.0), (1.0, 0.0), 1)]);
        let fam = simple_symbol_family(&win).unwrap();
        assert_eq!(fam.degree(), 1);
        // m_0(t) = e^{2πt}
        assert!((fam.eval(0, 0.5) - c((std::f64::consts::PI).exp(), 0.0)).norm() < 1e-12);
        match &fam.tables {
            FamilyTables::Simple { a } => assert!((a[0][0] - c(1.0, 0.0)).norm() < 1e-15),
            _ => panic!(),
        }
    }

    #[test]
    fn simple_family_two_routes_to_minus_twelve() {
        // a = (1,1), e^{2πw} = (2,3)
        let w1 = 2.0_f64.ln() / TWO_PI;
        let w2 = 3.0_f64.ln() / TWO_PI;
        let win = simple(&[raw((1.0, 0.0), (w1, 0.0), 1), raw((1.0, 0.0), (w2, 0.0), 1)]);
        let fam = simple_symbol_family(&win).unwrap();
        match &fam.tables {
            FamilyTables::Simple { a } => {
                assert!((a[0][1] - c(-3.0, 0.0)).norm() < 1e-12);
                assert!((a[1][1] - c(-2.0, 0.0)).norm() < 1e-12);
            }
            _ => panic!(),
        }
        let via_pipeline = fam.eval(1, 1.0);
        assert!((via_pipeline - c(-12.0, 0.0)).norm() < 1e-10, "{via_pipeline}");
        let closed = top_symbol_closed_form(&win.to_general());
        assert!((closed.eval(1.0) - c(-12.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn top_symbol_reduces_for_single_cauchy() {
        let win = general(&[raw((1.0, 0.0), (1.0, 0.0), 1)]);
        let closed = top_symbol_closed_form(&win);
        for t in [0.0, 0.3, 0.9] {
            let expect = (c(1.0, 0.0) * TWO_PI * t).exp();
            assert!((closed.eval(t) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn general_family_reduces_to_simple() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            let spec: Vec<RawPoleTerm> = (0..n)
                .map(|i| {
                    raw(
                        (rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0)),
                        (
                            rng.gen_range(0.1..0.8) + i as f64 * 0.9,
                            rng.gen_range(-0.3..0.3),
                        ),
                        1,
                    )
                })
                .collect();
            let sw = simple(&spec);
            let fam_s = simple_symbol_family(&sw).unwrap();
            let fam_g = general_symbol_family(&sw.to_general()).unwrap();
            assert_eq!(fam_s.degree(), fam_g.degree());
            for s in 0..fam_s.degree() {
                let ts = fam_s.m[s].terms();
                let tg = fam_g.m[s].terms();
                assert_eq!(ts.len(), tg.len());
                for (a, b) in ts.iter().zip(tg.iter()) {
                    assert_eq!(a.p, b.p);
                    assert!((a.w - b.w).norm() < 1e-15);
                    assert!((a.c - b.c).norm() <= 1e-12 * a.c.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn double_pole_top_symbol_matches_closed_form() {
        // N=1, j=2, a=1: the pipeline must reproduce the closed form on a grid
        let win = general(&[raw((1.0, 0.0), (0.4, 0.15), 2)]);
        let fam = general_symbol_family(&win).unwrap();
        let closed = top_symbol_closed_form(&win);
        for i in 1..10 {
            let t = i as f64 / 10.0;
            let lhs = fam.eval(1, t);
            let rhs = closed.eval(t);
            assert!(
                (lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1.0),
                "t={t}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn top_coefficient_of_cofactor_product() {
        // A_{k, M-j_k} = (-1)^{M-j_k} e^{2π Σ_{l≠k} w_l j_l}
        let win = general(&[raw((1.0, 0.0), (0.3, 0.0), 1), raw((2.0, 0.5), (0.7, 0.2), 2)]);
        let fam = general_symbol_family(&win).unwrap();
        let m_total = win.m();
        match &fam.tables {
            FamilyTables::General { a_ks, .. } => {
                for (k, term) in win.terms().iter().enumerate() {
                    let top = m_total - term.j as usize;
                    let others: C64 = win
                        .terms()
                        .iter()
                        .enumerate()
                        .filter(|(l, _)| *l != k)
                        .map(|(_, t)| t.w * (t.j as f64))
                        .sum();
                    let sign = if top.is_multiple_of(2) { 1.0 } else { -1.0 };
                    let expect = (others * TWO_PI).exp() * sign;
                    assert!(
                        (a_ks[k][top] - expect).norm() <= 1e-10 * expect.norm(),
                        "k={k}"
                    );
                }
            }
            _ => panic!(),
        }
    }

    #[test]
    fn pipeline_equals_closed_form_random_general() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..20 {
            let n = rng.gen_range(1..=3);
            let spec: Vec<RawPoleTerm> = (0..n)
                .map(|i| {
                    raw(
                        (rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5)),
                        (
                            rng.gen_range(0.15..0.6) + i as f64 * 0.8,
                            rng.gen_range(-0.25..0.25),
                        ),
                        rng.gen_range(1..=2),
                    )
                })
                .collect();
            let win = general(&spec);
            if win.m() > 6 {
                continue;
            }
            let fam = general_symbol_family(&win).unwrap();
            let closed = top_symbol_closed_form(&win);
            let top = win.m() - 1;
            let scale = closed.max_abs_on(0.0, 1.0, 99).max(1e-30);
            for i in 1..=99 {
                let t = i as f64 / 100.0;
                let lhs = fam.eval(top, t);
                let rhs = closed.eval(t);
                assert!(
                    (lhs - rhs).norm() <= 1e-10 * scale,
                    "t={t}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn simple_top_symbol_two_formulas_agree_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let n = rng.gen_range(1..=4);
            let spec: Vec<RawPoleTerm> = (0..n)
                .map(|i| {
                    raw(
                        (rng.gen_range(0.5..1.5), rng.gen_range(-0.5..0.5)),
                        (rng.gen_range(0.1..0.7), rng.gen_range(-0.3..0.3) + i as f64),
                        1,
                    )
                })
                .collect();
            let win = simple(&spec);
            let fam = simple_symbol_family(&win).unwrap();
            let closed = top_symbol_closed_form(&win.to_general());
            for i in 0..=20 {
                let t = i as f64 / 20.0;
                let lhs = fam.eval(n - 1, t);
                let rhs = closed.eval(t);
                assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
            }
        }
    }

    #[test]
    fn symbol_sup_bounds_are_finite() {
        let win = general(&[raw((1.0, 0.0), (0.3, 0.0), 1), raw((0.8, 0.3), (0.55, 0.2), 2)]);
        let fam = general_symbol_family(&win).unwrap();
        for b in fam.sup_bounds() {
            assert!(b.is_finite() && b > 0.0);
        }
    }

    #[test]
    fn top_symbol_min_monotone_exponentials() {
        let up = simple(&[raw((1.0, 0.0), (1.0, 0.0), 1)]);
        let fam = simple_symbol_family(&up).unwrap();
        let got = top_symbol_min(&fam, 0.1);
        assert!((got - 1.0).abs() < 1e-9, "min of e^{{2πt}} on [0, 0.9] is 1");

        let down = simple(&[raw((1.0, 0.0), (-1.0, 0.0), 1)]);
        let fam = simple_symbol_family(&down).unwrap();
        let got = top_symbol_min(&fam, 0.1);
        let expect = (-TWO_PI * 0.9).exp();
        assert!((got - expect).abs() < 1e-9 * expect.max(1.0));
    }

    #[test]
    fn top_symbol_min_detects_transplanted_witness() {
        // witness at t = -1/2 for Φ transplants to m_{N-1}(1/2) = 0
        let a2 = -(std::f64::consts::PI).exp();
        let win = simple(&[raw((1.0, 0.0), (1.0, 0.0), 1), raw((a2, 0.0), (2.0, 0.0), 1)]);
        let fam = simple_symbol_family(&win).unwrap();
        let got = top_symbol_min(&fam, 0.1);
        assert!(got < 1e-6, "near-zero expected, got {got}");
    }

    #[test]
    fn trick_identity_k1_is_h() {
        let cs = [(0i64, c(1.0, -0.5)), (2, c(0.3, 0.2))];
        let z = c(0.7, 0.4);
        let lhs = trick_lhs(1, &cs, z).unwrap();
        let rhs = trick_rhs(1, &cs, z).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn trick_identity_k2_frozen_point() {
        let cs = [(0i64, c(1.0, 0.0))];
        let z = c(0.0, 1.0);
        let lhs = trick_lhs(2, &cs, z).unwrap();
        let expect = {
            let q = (-TWO_PI).exp();
            c(-(1.0 - q) * (1.0 - q), 0.0)
        };
        assert!((lhs - expect).norm() < 1e-12, "lhs={lhs} expect={expect}");
        let rhs = trick_rhs(2, &cs, z).unwrap();
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm());
    }

    #[test]
    fn trick_identity_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 1..=6u32 {
            let mut worst = 0.0_f64;
            for _ in 0..60 {
                let support: Vec<(i64, C64)> = (0..8)
                    .map(|i| {
                        (
                            i as i64 - 3,
                            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        )
                    })
                    .collect();
                let z = c(rng.gen_range(-3.0..3.0), rng.gen_range(0.2..2.0));
                let lhs = trick_lhs(k, &support, z).unwrap();
                let rhs = trick_rhs(k, &support, z).unwrap();
                let denom = lhs.norm().max(rhs.norm()).max(1e-12);
                worst = worst.max((lhs - rhs).norm() / denom);
            }
            assert!(worst < 1e-8, "k={k}: worst relative deviation {worst:.3e}");
        }
    }

    #[test]
    fn trick_guards() {
        let cs = [(0i64, c(1.0, 0.0))];
        assert!(matches!(
            trick_lhs(2, &cs, c(0.0, 0.0)),
            Err(SymbolsError::PoleHit(_))
        ));
        let big: Vec<(i64, C64)> = (0..40).map(|i| (i as i64, c(1.0, 0.0))).collect();
        assert!(matches!(
            trick_lhs(2, &big, c(0.5, 1.0)),
            Err(SymbolsError::SupportTooLarge(_))
        ));
    }

    #[test]
    fn exp_polynomial_merges_exact_keys() {
        let p = ExpPolynomial::from_terms([
            ExpTerm {
                c: c(1.0, 0.0),
                w: c(0.5, 0.0),
                p: 1,
            },
            ExpTerm {
                c: c(2.0, 0.0),
                w: c(0.5, 0.0),
                p: 1,
            },
            ExpTerm {
                c: c(-3.0, 0.0),
                w: c(0.5, 0.0),
                p: 2,
            },
        ]);
        assert_eq!(p.terms().len(), 2);
    }
}
