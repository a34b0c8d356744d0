//! Dense complex linear algebra and quadrature kernels.
//!
//! The matrices produced elsewhere in this crate are small (segment matrices
//! top out around 64 rows), so the kernels here are textbook partial-pivot LU
//! and power/inverse iteration. Keeping them local keeps the oracle chain
//! auditable: the determinant and singular-value checks never route through
//! an external library.

use num::complex::Complex64;
use thiserror::Error;

/// Shorthand used across the crate.
pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("iteration did not converge: relative change {rel_change:.3e} after {iterations} iterations")]
    NoConvergence { rel_change: f64, iterations: usize },
    #[error("quadrature tolerance not met: relative change {rel_change:.3e} at {nodes} nodes (best estimate {best})")]
    ToleranceNotMet {
        best: C64,
        rel_change: f64,
        nodes: usize,
    },
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            entries: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == ncols), "ragged rows");
        ComplexMatrix {
            rows: nrows,
            cols: ncols,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::new(1.0, 0.0));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy with row `r` deleted.
    pub fn row_removed(&self, r: usize) -> ComplexMatrix {
        assert!(r < self.rows);
        let mut entries = Vec::with_capacity((self.rows - 1) * self.cols);
        for i in 0..self.rows {
            if i != r {
                entries.extend_from_slice(self.row(i));
            }
        }
        ComplexMatrix {
            rows: self.rows - 1,
            cols: self.cols,
            entries,
        }
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Gram matrix Aᴴ·A (Hermitian positive semidefinite, cols × cols).
    pub fn herm_gram(&self) -> ComplexMatrix {
        let n = self.cols;
        let mut g = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..self.rows {
                    acc += self.get(r, i).conj() * self.get(r, j);
                }
                g.set(i, j, acc);
                if i != j {
                    g.set(j, i, acc.conj());
                }
            }
        }
        g
    }

    pub fn col_norm(&self, c: usize) -> f64 {
        (0..self.rows)
            .map(|r| self.get(r, c).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(a, x)| a * x)
                    .sum::<C64>()
            })
            .collect()
    }
}

/// Determinant by partial-pivot LU. Singular matrices yield ≈0.
pub fn det_lu(m: &ComplexMatrix) -> C64 {
    assert_eq!(m.rows(), m.cols(), "determinant needs a square matrix");
    let n = m.rows();
    assert!(n <= 64, "determinant kernel is sized for desk-scale matrices");
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let mut a = m.clone();
    let mut det = C64::new(1.0, 0.0);
    for k in 0..n {
        let mut piv = k;
        let mut best = a.get(k, k).norm();
        for r in k + 1..n {
            let cand = a.get(r, k).norm();
            if cand > best {
                best = cand;
                piv = r;
            }
        }
        if best == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != k {
            for c in 0..n {
                let tmp = a.get(k, c);
                a.set(k, c, a.get(piv, c));
                a.set(piv, c, tmp);
            }
            det = -det;
        }
        let pivot = a.get(k, k);
        det *= pivot;
        for r in k + 1..n {
            let factor = a.get(r, k) / pivot;
            if factor == C64::new(0.0, 0.0) {
                continue;
            }
            for c in k..n {
                let v = a.get(r, c) - factor * a.get(k, c);
                a.set(r, c, v);
            }
        }
    }
    det
}

/// LU factorization of a square matrix with partial pivoting.
/// Returns None when a pivot collapses relative to the matrix scale.
struct Lu {
    n: usize,
    lu: ComplexMatrix,
    perm: Vec<usize>,
}

fn lu_factor(m: &ComplexMatrix, singular_tol: f64) -> Option<Lu> {
    let n = m.rows();
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut piv = k;
        let mut best = a.get(k, k).norm();
        for r in k + 1..n {
            let cand = a.get(r, k).norm();
            if cand > best {
                best = cand;
                piv = r;
            }
        }
        if best <= singular_tol {
            return None;
        }
        if piv != k {
            perm.swap(k, piv);
            for c in 0..n {
                let tmp = a.get(k, c);
                a.set(k, c, a.get(piv, c));
                a.set(piv, c, tmp);
            }
        }
        let pivot = a.get(k, k);
        for r in k + 1..n {
            let factor = a.get(r, k) / pivot;
            a.set(r, k, factor);
            for c in k + 1..n {
                let v = a.get(r, c) - factor * a.get(k, c);
                a.set(r, c, v);
            }
        }
    }
    Some(Lu { n, lu: a, perm })
}

impl Lu {
    fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                let v = x[i] - self.lu.get(i, j) * x[j];
                x[i] = v;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let v = x[i] - self.lu.get(i, j) * x[j];
                x[i] = v;
            }
            x[i] /= self.lu.get(i, i);
        }
        x
    }
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Deterministic seed vector; a fixed xorshift-style hash per component so
/// repeated runs are bit-identical.
fn seed_vector(n: usize) -> Vec<C64> {
    let mut v = Vec::with_capacity(n);
    for j in 0..n {
        let mut x = (j as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        x ^= x >> 30;
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x ^= x >> 27;
        let re = 0.5 + (x % 1024) as f64 / 2048.0;
        let im = 0.25 + ((x >> 10) % 1024) as f64 / 4096.0;
        v.push(C64::new(re, im));
    }
    let s = norm2(&v);
    v.iter_mut().for_each(|x| *x /= s);
    v
}

const ITER_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 10_000;

/// Rayleigh-quotient power iteration for the largest eigenvalue of a
/// Hermitian PSD matrix. Returns the eigenvalue.
///
/// After the 1e-10 stopping rule fires, a short polish phase keeps iterating
/// while the Rayleigh quotient still moves; the quotient converges twice as
/// fast as the vector, so this lands near machine accuracy cheaply.
fn power_iteration(g: &ComplexMatrix) -> Result<f64, NumericsError> {
    let mut v = seed_vector(g.rows());
    let mut prev = f64::NAN;
    let mut rel = f64::INFINITY;
    let mut polish = 0;
    for it in 0..MAX_ITERS {
        let w = g.matvec(&v);
        let lam: f64 = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>();
        let wn = norm2(&w);
        if wn == 0.0 {
            return Ok(0.0);
        }
        v = w.iter().map(|x| x / wn).collect();
        if it > 0 {
            rel = (lam - prev).abs() / lam.abs().max(f64::MIN_POSITIVE);
            if rel <= ITER_TOL {
                polish += 1;
                if rel <= 1e-15 || polish >= 40 {
                    return Ok(lam.max(0.0));
                }
            }
        }
        prev = lam;
    }
    if rel <= ITER_TOL {
        return Ok(prev.max(0.0));
    }
    Err(NumericsError::NoConvergence {
        rel_change: rel,
        iterations: MAX_ITERS,
    })
}

/// Inverse iteration for the smallest eigenvalue of a Hermitian PSD matrix.
/// A singular factorization short-circuits to exactly zero.
fn smallest_eig(g: &ComplexMatrix, scale: f64) -> Result<f64, NumericsError> {
    let singular_tol = scale * 1e-14;
    let lu = match lu_factor(g, singular_tol) {
        Some(lu) => lu,
        None => return Ok(0.0),
    };
    let mut v = seed_vector(g.rows());
    let mut prev = f64::NAN;
    let mut rel = f64::INFINITY;
    let mut polish = 0;
    for it in 0..MAX_ITERS {
        let w = lu.solve(&v);
        let mu: f64 = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>();
        let wn = norm2(&w);
        if !wn.is_finite() || mu.abs() > 1e280 {
            // solve blew up: numerically singular
            return Ok(0.0);
        }
        v = w.iter().map(|x| x / wn).collect();
        if it > 0 {
            rel = (mu - prev).abs() / mu.abs().max(f64::MIN_POSITIVE);
            if rel <= ITER_TOL {
                polish += 1;
                if rel <= 1e-15 || polish >= 40 {
                    let gv = g.matvec(&v);
                    let lam: f64 = v
                        .iter()
                        .zip(&gv)
                        .map(|(a, b)| (a.conj() * b).re)
                        .sum::<f64>();
                    return Ok(lam.max(0.0));
                }
            }
        }
        prev = mu;
    }
    Err(NumericsError::NoConvergence {
        rel_change: rel,
        iterations: MAX_ITERS,
    })
}

/// Extremal singular values (σ_min, σ_max) of a tall matrix.
///
/// σ_max comes from power iteration on AᴴA, σ_min from inverse iteration on
/// the same Gram matrix; a structurally singular Gram matrix (for example a
/// zero column) yields σ_min = 0 exactly.
pub fn svd_extremes(m: &ComplexMatrix) -> Result<(f64, f64), NumericsError> {
    assert!(
        m.rows() >= m.cols() && m.cols() >= 1,
        "svd_extremes expects rows >= cols >= 1"
    );
    let g = m.herm_gram();
    let scale = (0..g.rows())
        .map(|i| g.get(i, i).re)
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Ok((0.0, 0.0));
    }
    let lam_max = power_iteration(&g)?;
    let lam_min = smallest_eig(&g, scale)?;
    Ok((lam_min.sqrt(), lam_max.sqrt()))
}

/// Quadrature configuration for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureCfg {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub min_nodes: usize,
    pub max_nodes: usize,
}

impl Default for QuadratureCfg {
    fn default() -> Self {
        QuadratureCfg {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            min_nodes: 64,
            max_nodes: 1 << 20,
        }
    }
}

fn midpoint_sum<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64, n: usize) -> C64 {
    let h = (b - a) / n as f64;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        acc += f(a + (i as f64 + 0.5) * h);
    }
    acc * h
}

/// Composite midpoint rule with a Richardson error check at each doubling.
pub fn integrate<F: Fn(f64) -> C64>(
    f: F,
    a: f64,
    b: f64,
    cfg: QuadratureCfg,
) -> Result<C64, NumericsError> {
    assert!(a < b, "integrate expects a < b");
    let mut n = cfg.min_nodes.max(2);
    let mut prev = midpoint_sum(&f, a, b, n);
    loop {
        n *= 2;
        let cur = midpoint_sum(&f, a, b, n);
        // midpoint error drops by 4 per doubling, so the gap/3 bounds it
        let err = (cur - prev).norm() / 3.0;
        if err <= cfg.rel_tol * cur.norm() + cfg.abs_tol {
            return Ok(cur);
        }
        if n >= cfg.max_nodes {
            return Err(NumericsError::ToleranceNotMet {
                best: cur,
                rel_change: err / cur.norm().max(f64::MIN_POSITIVE),
                nodes: n,
            });
        }
        prev = cur;
    }
}

/// Like [`integrate`] but returns the best estimate when the node cap is hit.
pub fn integrate_or_best<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, cfg: QuadratureCfg) -> C64 {
    match integrate(f, a, b, cfg) {
        Ok(v) => v,
        Err(NumericsError::ToleranceNotMet { best, .. }) => best,
        Err(_) => unreachable!("integrate only fails with ToleranceNotMet"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Brute-force determinant by permutation expansion (n ≤ 4 in tests).
    fn det_permutation(m: &ComplexMatrix) -> C64 {
        fn go(m: &ComplexMatrix, used: &mut Vec<bool>, row: usize, sign: f64) -> C64 {
            let n = m.rows();
            if row == n {
                return C64::new(sign, 0.0);
            }
            let mut acc = C64::new(0.0, 0.0);
            for col in 0..n {
                if used[col] {
                    continue;
                }
                used[col] = true;
                let swaps = used[..col].iter().filter(|&&u| u).count();
                let s = if (col - swaps) % 2 == 0 { sign } else { -sign };
                acc += m.get(row, col) * go(m, used, row + 1, s);
                used[col] = false;
            }
            acc
        }
        let mut used = vec![false; m.rows()];
        go(m, &mut used, 0, 1.0)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(rows, cols);
        for r in 0..rows {
            for cidx in 0..cols {
                m.set(
                    r,
                    cidx,
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                );
            }
        }
        m
    }

    #[test]
    fn det_identity_is_one() {
        let m = ComplexMatrix::identity(3);
        assert!((det_lu(&m) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn det_swap_is_minus_one() {
        let m = ComplexMatrix::from_rows(vec![
            vec![c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0)],
        ]);
        assert!((det_lu(&m) - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn det_matches_permutation_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 4, 4);
            let lu = det_lu(&m);
            let brute = det_permutation(&m);
            let denom = brute.norm().max(1e-30);
            assert!(
                (lu - brute).norm() / denom < 1e-12,
                "lu={lu} brute={brute}"
            );
        }
    }

    #[test]
    fn svd_diagonal() {
        let big = (2.0 * std::f64::consts::PI).exp();
        let m = ComplexMatrix::from_rows(vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(big, 0.0)],
        ]);
        let (lo, hi) = svd_extremes(&m).unwrap();
        assert!((lo - 1.0).abs() < 1e-10);
        assert!((hi - big).abs() / big < 1e-10);
    }

    #[test]
    fn svd_single_column() {
        let m = ComplexMatrix::from_rows(vec![vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]]);
        let (lo, hi) = svd_extremes(&m).unwrap();
        let rt2 = 2.0_f64.sqrt();
        assert!((lo - rt2).abs() < 1e-12);
        assert!((hi - rt2).abs() < 1e-12);
    }

    #[test]
    fn svd_zero_column_is_exactly_zero() {
        let mut m = ComplexMatrix::zeros(3, 2);
        m.set(0, 0, c(2.0, 1.0));
        m.set(1, 0, c(-1.0, 0.5));
        m.set(2, 0, c(0.3, 0.0));
        let (lo, _hi) = svd_extremes(&m).unwrap();
        assert_eq!(lo, 0.0);
    }

    /// Closed-form singular values of a 2x2 via eigenvalues of AᴴA; the small
    /// one comes from det/λ_max, which stays accurate near singularity.
    fn svd2_closed(m: &ComplexMatrix) -> (f64, f64) {
        let g = m.herm_gram();
        let tr = g.get(0, 0).re + g.get(1, 1).re;
        let det = (g.get(0, 0) * g.get(1, 1) - g.get(0, 1) * g.get(1, 0)).re;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let hi = tr / 2.0 + disc;
        let lo = if hi > 0.0 { (det / hi).max(0.0) } else { 0.0 };
        (lo.sqrt(), hi.sqrt())
    }

    #[test]
    fn svd_matches_2x2_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 2, 2);
            let (lo, hi) = svd_extremes(&m).unwrap();
            let (clo, chi) = svd2_closed(&m);
            assert!((hi - chi).abs() <= 1e-12 * chi.max(1.0), "hi={hi} chi={chi}");
            assert!((lo - clo).abs() <= 1e-10 * chi.max(1.0), "lo={lo} clo={clo}");
        }
    }

    #[test]
    fn integrate_constant() {
        let v = integrate(|_| c(1.0, 0.0), 0.0, 1.0, QuadratureCfg::default()).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn integrate_full_period_oscillation() {
        let w = 2.0 * std::f64::consts::PI;
        let v = integrate(
            |t| C64::new(0.0, w * t).exp(),
            0.0,
            1.0,
            QuadratureCfg::default(),
        )
        .unwrap();
        assert!(v.norm() < 1e-10);
    }

    #[test]
    fn integrate_lorentzian_to_pi() {
        // tails beyond ±10^4 carry ~2e-4 of the mass
        let cfg = QuadratureCfg {
            rel_tol: 1e-7,
            ..QuadratureCfg::default()
        };
        let v = integrate_or_best(|t| c(1.0 / (1.0 + t * t), 0.0), -1e4, 1e4, cfg);
        assert!((v.re - std::f64::consts::PI).abs() < 2.5e-4);
        assert!(v.im.abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn det_is_multiplicative(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=8);
            let a = random_matrix(&mut rng, n, n);
            let b = random_matrix(&mut rng, n, n);
            let lhs = det_lu(&a.matmul(&b));
            let rhs = det_lu(&a) * det_lu(&b);
            let scale = rhs.norm().max(1e-12);
            prop_assert!((lhs - rhs).norm() / scale < 1e-10);
        }

        #[test]
        fn svd_unimodular_scaling_invariance(seed in 0u64..10_000, phase in 0.0f64..std::f64::consts::TAU) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.gen_range(2..=6);
            let cols = rng.gen_range(1..=rows);
            let m = random_matrix(&mut rng, rows, cols);
            let (lo, hi) = svd_extremes(&m).unwrap();
            let z = C64::new(0.0, phase).exp();
            let mut scaled = m.clone();
            for r in 0..rows {
                for col in 0..cols {
                    scaled.set(r, col, m.get(r, col) * z);
                }
            }
            let (lo2, hi2) = svd_extremes(&scaled).unwrap();
            prop_assert!((lo - lo2).abs() <= 1e-12 * hi.max(1.0));
            prop_assert!((hi - hi2).abs() <= 1e-12 * hi.max(1.0));
        }

        #[test]
        fn sigma_min_shrinks_when_rows_removed(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.gen_range(3..=7);
            let cols = rng.gen_range(1..rows);
            let m = random_matrix(&mut rng, rows, cols);
            let (lo, _) = svd_extremes(&m).unwrap();
            let r = rng.gen_range(0..rows);
            let sub = m.row_removed(r);
            if sub.rows() >= sub.cols() {
                let (lo_sub, _) = svd_extremes(&sub).unwrap();
                prop_assert!(lo_sub <= lo + 1e-12);
            }
        }
    }
}
