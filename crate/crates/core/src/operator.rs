//! Assembly and analysis of the frame criterion operator.
//!
//! For a fixed ξ each point λ of the shift set owns one row: the row argument
//! t solves t + λ = ξ + b with t in (0,1), and the row carries the symbol
//! values m_s(t) at columns b..b+M-1. Runs of rows sharing b are doubling
//! blocks; a block plus the single rows up to the next block forms a segment,
//! and whole segments are where the determinant bounds live.
//!
//! The construction is periodic but its banded shape exists only where no
//! tail point has crossed ξ partially: for ξ strictly between the smallest
//! and largest tail fractional parts some columns receive two rows and others
//! none, and segment assembly reports a structure violation instead of
//! silently producing a singular matrix.

use crate::lambda::UniversalSet;
use crate::numerics::{det_lu, C64, ComplexMatrix};
use crate::symbols::{simple_symbol_family, SymbolFamily, SymbolsError};
use crate::windows::{GeneralWindow, PoleTerm, SimpleWindow, WindowError, PARAM_TOL, TWO_PI};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("xi = {0} collides with a fractional part (measure-zero degenerate set)")]
    DegenerateXi(f64),
    #[error("operator structure violated: {0}")]
    StructureViolation(String),
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("configuration mismatch: {0}")]
    ConfigError(String),
    #[error("near-degenerate node pair: {0}")]
    NearDegenerate(String),
    #[error("finite-difference poles coalesced: {0}")]
    CoalescedPoles(String),
    #[error("invalid parameter: {0}")]
    BadParameters(String),
    #[error(transparent)]
    Symbols(#[from] SymbolsError),
    #[error(transparent)]
    Window(#[from] WindowError),
}

const XI_TOL: f64 = 1e-9;

fn frac(x: f64) -> f64 {
    x.rem_euclid(1.0)
}

/// One operator row: the point that produced it, its column offset b and its
/// argument t, tied together by t + λ = ξ + b.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RowSpec {
    pub lambda_index: i64,
    pub lambda: f64,
    pub b: i64,
    pub t: f64,
}

/// Column offset and argument for a single point; errors when ξ collides
/// with the fractional part of λ (where t would hit {0,1}).
pub fn row_spec(xi: f64, lambda: f64) -> Result<(i64, f64), OperatorError> {
    let fr = frac(lambda);
    let d = (xi - fr).rem_euclid(1.0);
    if d < XI_TOL || 1.0 - d < XI_TOL {
        return Err(OperatorError::DegenerateXi(xi));
    }
    let floor = lambda.floor() as i64;
    if fr <= xi {
        Ok((floor, xi - fr))
    } else {
        Ok((floor + 1, xi - fr + 1.0))
    }
}

fn make_row(xi: f64, lambda_index: i64, lambda: f64) -> Result<RowSpec, OperatorError> {
    let (b, t) = row_spec(xi, lambda)?;
    Ok(RowSpec {
        lambda_index,
        lambda,
        b,
        t,
    })
}

/// A maximal run of rows sharing one column offset.
#[derive(Debug, Clone)]
pub struct Block {
    pub b: i64,
    pub rows: Vec<RowSpec>,
}

/// Group λ-sorted rows into doubling blocks and verify each group against
/// the two-sided fractional-part characterization: rows with frac > ξ carry
/// integer part b-1 and come first, rows with frac <= ξ carry integer part b,
/// and fractional parts increase within each side.
pub fn detect_blocks(rows: &[RowSpec], xi: f64) -> Result<Vec<Block>, OperatorError> {
    for pair in rows.windows(2) {
        if pair[0].lambda > pair[1].lambda {
            return Err(OperatorError::BadParameters(
                "rows must be sorted by lambda".into(),
            ));
        }
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let mut j = i + 1;
        while j < rows.len() && rows[j].b == rows[i].b {
            j += 1;
        }
        if j - i >= 2 {
            let group = &rows[i..j];
            let b = group[0].b;
            let split = group.iter().position(|r| frac(r.lambda) <= xi).unwrap_or(group.len());
            for (idx, r) in group.iter().enumerate() {
                let fr = frac(r.lambda);
                let floor = r.lambda.floor() as i64;
                let ok = if idx < split {
                    fr > xi && floor == b - 1
                } else {
                    fr <= xi && floor == b
                };
                if !ok {
                    return Err(OperatorError::StructureViolation(format!(
                        "row at lambda {} breaks the doubling pattern at b = {b}",
                        r.lambda
                    )));
                }
            }
            for side in [&group[..split], &group[split..]] {
                for pair in side.windows(2) {
                    if frac(pair[0].lambda) >= frac(pair[1].lambda) {
                        return Err(OperatorError::StructureViolation(
                            "fractional parts must increase within a block side".into(),
                        ));
                    }
                }
            }
            out.push(Block {
                b,
                rows: group.to_vec(),
            });
        }
        i = j;
    }
    Ok(out)
}

/// One block-plus-tail piece of the operator.
#[derive(Debug, Clone)]
pub struct Segment {
    pub xi: f64,
    /// Symbol count M (row width).
    pub m: usize,
    /// First column of the segment.
    pub col_offset: i64,
    /// Rows in λ order (after erasure, minus the erased one).
    pub rows: Vec<RowSpec>,
    /// Range of `rows` holding the cluster points.
    pub cluster: std::ops::Range<usize>,
    pub matrix: ComplexMatrix,
    pub erased: Option<RowSpec>,
}

impl Segment {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.cols()
    }

    /// Rows of the leading doubling block (sharing the first column offset).
    pub fn leading_block(&self) -> Vec<&RowSpec> {
        self.rows.iter().filter(|r| r.b == self.col_offset).collect()
    }

    /// Cluster rows (the M+1 points at j/(M+1) before erasure).
    pub fn cluster_rows(&self) -> &[RowSpec] {
        &self.rows[self.cluster.clone()]
    }

    /// Cluster arguments sorted descending: the reordered view whose
    /// arguments must march down in exact steps of 1/(M+1).
    pub fn reordered_arguments(&self) -> Vec<f64> {
        let mut args: Vec<f64> = self.cluster_rows().iter().map(|r| r.t).collect();
        if let Some(er) = &self.erased {
            args.push(er.t);
        }
        args.sort_by(|a, b| b.partial_cmp(a).unwrap());
        args
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            xi: f64,
            m: usize,
            col_offset: i64,
            rows: &'a [RowSpec],
            erased: &'a Option<RowSpec>,
            matrix: Vec<Vec<[f64; 2]>>,
        }
        let matrix = (0..self.matrix.rows())
            .map(|r| {
                (0..self.matrix.cols())
                    .map(|c| {
                        let v = self.matrix.get(r, c);
                        [v.re, v.im]
                    })
                    .collect()
            })
            .collect();
        serde_json::to_string_pretty(&Dump {
            xi: self.xi,
            m: self.m,
            col_offset: self.col_offset,
            rows: &self.rows,
            erased: &self.erased,
            matrix,
        })
        .expect("segment serializes")
    }
}

fn assemble_matrix(
    rows: &[RowSpec],
    family: &SymbolFamily,
    col_offset: i64,
    width: usize,
) -> ComplexMatrix {
    let m = family.degree();
    let mut out = ComplexMatrix::zeros(rows.len(), width);
    for (r, row) in rows.iter().enumerate() {
        for s in 0..m {
            let col = (row.b - col_offset) as usize + s;
            out.set(r, col, family.eval(s, row.t));
        }
    }
    out
}

/// Build whole segments for `periods` consecutive periods.
///
/// Segment p holds the cluster of period p, the preceding tail point when it
/// doubles onto the cluster's first column, and every tail point of period p
/// whose column stays left of the next cluster. The result must have exactly
/// M+N₁+1 rows covering the N₁+1 column offsets of the period; anything else
/// means ξ sits where the construction's banded structure degenerates.
pub fn build_segments(
    xi: f64,
    set: &UniversalSet,
    family: &SymbolFamily,
    periods: usize,
) -> Result<Vec<Segment>, OperatorError> {
    let m = family.degree();
    if m != set.n {
        return Err(OperatorError::ConfigError(format!(
            "symbol family degree {m} does not match the set's class parameter N = {}",
            set.n
        )));
    }
    if periods < 1 {
        return Err(OperatorError::BadParameters("periods must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&xi) || xi <= 0.0 {
        return Err(OperatorError::BadParameters(format!(
            "xi = {xi} must lie in (0,1)"
        )));
    }
    let n1 = set.n1;
    let cnt = set.count() as i64;
    let mut segments = Vec::with_capacity(periods);
    for p in 0..periods as i64 {
        let base = p * cnt;
        let mut rows = Vec::with_capacity(m + n1 + 1);
        let c0 = {
            let r = make_row(xi, base, set.lambda_at(base))?;
            r.b
        };
        // previous period's last tail point, when it doubles onto column c0
        let borrowed = make_row(xi, base - 1, set.lambda_at(base - 1))?;
        let mut cluster_start = 0;
        if borrowed.b == c0 {
            rows.push(borrowed);
            cluster_start = 1;
        }
        for k in 0..=m as i64 {
            rows.push(make_row(xi, base + k, set.lambda_at(base + k))?);
        }
        let cluster = cluster_start..cluster_start + m + 1;
        for j in 1..=n1 as i64 {
            let row = make_row(xi, base + m as i64 + j, set.lambda_at(base + m as i64 + j))?;
            if row.b <= c0 + n1 as i64 {
                rows.push(row);
            }
        }
        if rows.len() != m + n1 + 1 {
            return Err(OperatorError::StructureViolation(format!(
                "segment at period {p} has {} rows, expected {} (xi = {xi} lies in the \
                 construction's unstructured band)",
                rows.len(),
                m + n1 + 1
            )));
        }
        let mut offsets: Vec<i64> = rows.iter().map(|r| r.b - c0).collect();
        offsets.sort_unstable();
        offsets.dedup();
        let expected: Vec<i64> = (0..=n1 as i64).collect();
        if offsets != expected {
            return Err(OperatorError::StructureViolation(format!(
                "segment at period {p} covers offsets {offsets:?}, expected 0..={n1} \
                 (xi = {xi} lies in the construction's unstructured band)"
            )));
        }
        let width = m + n1;
        let matrix = assemble_matrix(&rows, family, c0, width);
        segments.push(Segment {
            xi,
            m,
            col_offset: c0,
            rows,
            cluster,
            matrix,
            erased: None,
        });
    }
    Ok(segments)
}

/// Erase one row from the segment's leading doubling group so the segment
/// becomes square.
///
/// With j = ⌊ξ(M+1)⌋: for j != 0 the erased row is the one with the smallest
/// argument (the last row of the descending-argument view), for j = 0 the one
/// with the largest. Candidates that would leave a column uncovered are
/// skipped, which settles the tie between the borrowed tail row and the
/// cluster row sharing its argument.
pub fn erase_row(segment: &Segment, xi: f64, family: &SymbolFamily) -> Result<Segment, OperatorError> {
    if segment.erased.is_some() {
        return Err(OperatorError::InvalidBlock("row already erased".into()));
    }
    let m = segment.m;
    if segment.cluster.len() != m + 1 {
        return Err(OperatorError::InvalidBlock(format!(
            "cluster has {} rows, expected {}",
            segment.cluster.len(),
            m + 1
        )));
    }
    let j = (xi * (m as f64 + 1.0)).floor() as i64;
    // candidate rows: the leading group (borrowed tail row plus cluster)
    let mut candidates: Vec<usize> = (0..segment.cluster.end).collect();
    candidates.sort_by(|&a, &b| {
        let ta = segment.rows[a].t;
        let tb = segment.rows[b].t;
        if j == 0 {
            tb.partial_cmp(&ta).unwrap()
        } else {
            ta.partial_cmp(&tb).unwrap()
        }
    });
    let n1 = segment.matrix.cols() - m;
    for &cand in &candidates {
        let mut offsets: Vec<i64> = segment
            .rows
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != cand)
            .map(|(_, r)| r.b - segment.col_offset)
            .collect();
        offsets.sort_unstable();
        offsets.dedup();
        if offsets == (0..=n1 as i64).collect::<Vec<_>>() {
            let mut rows = segment.rows.clone();
            let erased = rows.remove(cand);
            let cluster = if cand < segment.cluster.start {
                segment.cluster.start - 1..segment.cluster.end - 1
            } else {
                segment.cluster.start..segment.cluster.end - 1
            };
            let matrix = assemble_matrix(&rows, family, segment.col_offset, segment.matrix.cols());
            return Ok(Segment {
                xi: segment.xi,
                m,
                col_offset: segment.col_offset,
                rows,
                cluster,
                matrix,
                erased: Some(erased),
            });
        }
    }
    Err(OperatorError::InvalidBlock(
        "no erasable row keeps all columns covered".into(),
    ))
}

/// Two determinant routes for a square banded section: a full LU pass, and
/// the structural factorization that peels rows owning the rightmost column
/// alone (Laplace expansion along that column, one factor per peeled row).
///
/// `first_cols[r]` is the first structural column of row r; each row spans
/// `m` columns. Returns (det, block_det, tail_product) with
/// det = block_det · tail_product up to roundoff.
fn banded_det_factorization(matrix: &ComplexMatrix, first_cols: &[usize], m: usize) -> (C64, C64, C64) {
    let n = matrix.rows();
    assert_eq!(n, matrix.cols(), "factorization requires a square section");
    assert_eq!(n, first_cols.len());
    let det = det_lu(matrix);

    let mut alive: Vec<usize> = (0..n).collect();
    let mut width = n;
    let mut tail_product = C64::new(1.0, 0.0);
    let mut sign = 1.0;
    loop {
        let rightmost = width - 1;
        let owners: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&r| {
                let first = first_cols[r];
                first <= rightmost && rightmost <= first + m - 1
            })
            .collect();
        if owners.len() != 1 || width == 1 {
            break;
        }
        let owner = owners[0];
        let pos = alive.iter().position(|&r| r == owner).unwrap();
        // Laplace sign for expanding along the last column
        if (pos + width - 1) % 2 == 1 {
            sign = -sign;
        }
        tail_product *= matrix.get(owner, rightmost);
        alive.retain(|&r| r != owner);
        width -= 1;
    }
    let mut lead = ComplexMatrix::zeros(alive.len(), width);
    for (ri, &r) in alive.iter().enumerate() {
        for c in 0..width {
            lead.set(ri, c, matrix.get(r, c));
        }
    }
    let block_det = det_lu(&lead) * sign;
    (det, block_det, tail_product)
}

/// Determinant of a square (erased) segment, twice: LU and the banded
/// factorization whose tail factors are the m_{M-1} entries of the marching
/// rows. The two routes agreeing is the testable identity.
pub fn segment_det(segment: &Segment) -> (C64, C64, C64) {
    let first_cols: Vec<usize> = segment
        .rows
        .iter()
        .map(|r| (r.b - segment.col_offset) as usize)
        .collect();
    banded_det_factorization(&segment.matrix, &first_cols, segment.m)
}

/// Re-run the determinant factorization on a previously dumped segment,
/// using nothing but the dump. Returns the relative gap between the LU
/// determinant and the factored product.
pub fn verify_segment_dump(json: &str) -> Result<f64, OperatorError> {
    #[derive(serde::Deserialize)]
    struct RowDump {
        #[allow(dead_code)]
        lambda_index: i64,
        #[allow(dead_code)]
        lambda: f64,
        b: i64,
        #[allow(dead_code)]
        t: f64,
    }
    #[derive(serde::Deserialize)]
    struct Dump {
        m: usize,
        col_offset: i64,
        rows: Vec<RowDump>,
        matrix: Vec<Vec<[f64; 2]>>,
    }
    let dump: Dump = serde_json::from_str(json)
        .map_err(|e| OperatorError::BadParameters(format!("bad segment dump: {e}")))?;
    let nrows = dump.matrix.len();
    let ncols = dump.matrix.first().map_or(0, Vec::len);
    if nrows != ncols || nrows != dump.rows.len() {
        return Err(OperatorError::BadParameters(
            "segment dump is not a square (erased) section".into(),
        ));
    }
    let mut matrix = ComplexMatrix::zeros(nrows, ncols);
    for (r, row) in dump.matrix.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            matrix.set(r, c, C64::new(v[0], v[1]));
        }
    }
    let first_cols: Vec<usize> = dump
        .rows
        .iter()
        .map(|r| (r.b - dump.col_offset) as usize)
        .collect();
    let (det, block_det, tail) = banded_det_factorization(&matrix, &first_cols, dump.m);
    if det.norm() == 0.0 {
        return Err(OperatorError::BadParameters(
            "dumped segment is singular".into(),
        ));
    }
    Ok((block_det * tail - det).norm() / det.norm())
}

/// The N×N matrix of Lemma-type arguments ξ - j/α and the two determinant
/// routes: assembled LU versus the product formula.
#[derive(Debug, Clone)]
pub struct VandermondeInstance {
    pub xi: f64,
    pub alpha: f64,
    pub matrix: ComplexMatrix,
}

pub fn vandermonde_instance(
    window: &SimpleWindow,
    xi: f64,
    alpha: f64,
) -> Result<VandermondeInstance, OperatorError> {
    let n = window.n();
    if alpha <= n as f64 {
        return Err(OperatorError::BadParameters(format!(
            "alpha = {alpha} must exceed N = {n}"
        )));
    }
    if xi <= (n as f64 - 1.0) / alpha {
        return Err(OperatorError::BadParameters(format!(
            "xi = {xi} must exceed (N-1)/alpha = {}",
            (n as f64 - 1.0) / alpha
        )));
    }
    let family = simple_symbol_family(window)?;
    let mut matrix = ComplexMatrix::zeros(n, n);
    for row in 0..n {
        let t = xi - row as f64 / alpha;
        for l in 0..n {
            matrix.set(row, l, family.eval(l, t));
        }
    }
    Ok(VandermondeInstance { xi, alpha, matrix })
}

/// |det B| two ways: the modulus-product formula (amplitude factors times the
/// two node Vandermonde products over unordered pairs) and the LU determinant
/// of the assembled matrix.
pub fn vandermonde_det(
    window: &SimpleWindow,
    xi: f64,
    alpha: f64,
) -> Result<(f64, C64), OperatorError> {
    let inst = vandermonde_instance(window, xi, alpha)?;
    let terms = window.terms();
    let n = terms.len();
    let y: Vec<C64> = terms
        .iter()
        .map(|t| (-t.w * TWO_PI / alpha).exp())
        .collect();
    let u: Vec<C64> = terms.iter().map(PoleTerm::u).collect();
    for i in 0..n {
        for k in i + 1..n {
            if (y[i] - y[k]).norm() < 1e-12 {
                return Err(OperatorError::NearDegenerate(format!(
                    "e^(-2πw/α) collide for poles {i} and {k}"
                )));
            }
        }
    }
    let mut formula = 1.0;
    for t in terms {
        formula *= t.a.norm() * (TWO_PI * xi * t.w.re).exp();
    }
    for i in 0..n {
        for k in i + 1..n {
            formula *= (y[i] - y[k]).norm();
            formula *= (u[i] - u[k]).norm();
        }
    }
    let direct = det_lu(&inst.matrix);
    Ok((formula, direct))
}

/// Replace each pole of order j by j simple poles at w, w-iε₁, ..,
/// w-i(j-1)ε₁ with forward-difference weights, so the window converges to
/// the original as ε₁ → 0. Amplitudes scale as ε₁^{-(j-1)}.
pub fn fd_window(window: &GeneralWindow, eps1: f64) -> Result<SimpleWindow, OperatorError> {
    if eps1 <= 0.0 {
        return Err(OperatorError::BadParameters("eps1 must be > 0".into()));
    }
    let mut terms = Vec::new();
    for term in window.terms() {
        let j = term.j;
        let denom = crate::symbols::factorial(j - 1) * eps1.powi(j as i32 - 1);
        for l in 0..j {
            let sign = if (j - 1 - l) % 2 == 0 { 1.0 } else { -1.0 };
            let amp = term.a * sign * crate::symbols::binom(j - 1, l) / denom;
            let w = term.w - C64::new(0.0, 1.0) * (l as f64 * eps1);
            terms.push(PoleTerm { a: amp, w, j: 1 });
        }
    }
    for i in 0..terms.len() {
        for k in i + 1..terms.len() {
            if (terms[i].w - terms[k].w).norm() <= PARAM_TOL {
                return Err(OperatorError::CoalescedPoles(format!(
                    "shifted parameters {} and {} coincide",
                    terms[i].w, terms[k].w
                )));
            }
        }
    }
    SimpleWindow::from_terms(terms).map_err(|e| match e {
        WindowError::DuplicatePole(msg) => OperatorError::CoalescedPoles(msg),
        other => OperatorError::Window(other),
    })
}
