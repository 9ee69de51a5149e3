//! Dense small-n linear algebra for complete flags in R^n.
//!
//! A flag is stored as an invertible n x n matrix whose first i columns span
//! the i-dimensional subspace F^(i).  On top of that this module provides the
//! projective invariants of transverse flag tuples (wedge determinants, cross
//! ratios, triple ratios), the normalization maps of transverse pairs, the
//! eruption and shearing endomorphisms
//!
//!   A^{i,j,k}_{F,G,H}: eigenvalue (n-i)/n on F^(i), -i/n on G^(j) + H^(k),
//!   A^{i,n-i}_{F,G}:   eigenvalue (n-i)/n on F^(i), -i/n on G^(n-i),
//!
//! the trace form tr(XY) on sl(n), and the reconstruction of a transverse
//! triple from prescribed positive triple ratios.
//!
//! Everything is double precision; supported dimensions are 2 <= n <= 8.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Dense real matrix used throughout.
pub type Mat = DMatrix<f64>;
/// Dense real vector.
pub type Vect = DVector<f64>;

/// Default relative tolerance for transversality / invertibility checks.
pub const TRANSVERSALITY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FlagError {
    #[error("matrix of size {0}x{1} is not square or outside 2..=8")]
    BadDimension(usize, usize),
    #[error("basis matrix is numerically singular (|det| = {0:.3e})")]
    Singular(f64),
    #[error("flag tuple is not transverse for dims {0:?}")]
    NotTransverse(Vec<usize>),
    #[error("index arguments {0:?} are invalid for n = {1}")]
    BadIndices(Vec<usize>, usize),
    #[error("line is not generic with respect to the flag pair")]
    NotGeneric,
    #[error("matrix has non-real or repeated-modulus eigenvalues")]
    BadSpectrum,
    #[error("triple-ratio reconstruction residual {0:.3e} above tolerance")]
    ReconstructionFailed(f64),
}

/// A complete flag in R^n: column l of `basis` extends F^(l-1) to F^(l).
///
/// The basis is canonicalized on construction: columns are orthonormalized
/// by Gram-Schmidt (which preserves every subspace F^(i) and keeps the
/// numerics well conditioned no matter how degenerate a representative was
/// handed in) and the first entry of significant magnitude of each column
/// is made positive, so equal flags compare equal entrywise.
#[derive(Debug, Clone, PartialEq)]
pub struct Flag {
    basis: Mat,
}

impl Flag {
    pub fn new(basis: Mat) -> Result<Flag, FlagError> {
        let (r, c) = basis.shape();
        if r != c || !(2..=8).contains(&r) {
            return Err(FlagError::BadDimension(r, c));
        }
        let mut basis = basis;
        canonicalize_columns(&mut basis)?;
        Ok(Flag { basis })
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    /// The ascending standard coordinate flag e_1 < e_2 < ... < e_n.
    pub fn standard(n: usize) -> Flag {
        Flag::new(Mat::identity(n, n)).expect("identity basis")
    }

    /// The descending coordinate flag e_n < e_{n-1} < ... < e_1.
    pub fn reversed_standard(n: usize) -> Flag {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(n - 1 - i, i)] = 1.0;
        }
        Flag::new(m).expect("antidiagonal basis")
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn col(&self, l: usize) -> Vect {
        self.basis.column(l).into_owned()
    }

    /// Image flag g.F (columns transformed, re-canonicalized).
    pub fn transform(&self, g: &Mat) -> Result<Flag, FlagError> {
        Flag::new(g * &self.basis)
    }

    /// Entry-wise comparison of canonicalized bases.
    pub fn approx_eq(&self, other: &Flag, tol: f64) -> bool {
        self.n() == other.n() && (&self.basis - &other.basis).amax() < tol
    }

    /// Subspace-wise equality: F^(i) = G^(i) for every i, regardless of the
    /// basis representatives.
    pub fn subspace_eq(&self, other: &Flag, tol: f64) -> bool {
        let n = self.n();
        if other.n() != n {
            return false;
        }
        for i in 1..n {
            // rank of [F_{1..i} | G_{1..i}] must stay i.
            let mut m = Mat::zeros(n, 2 * i);
            for c in 0..i {
                m.set_column(c, &self.basis.column(c));
                m.set_column(i + c, &other.basis.column(c));
            }
            let sv = m.svd(false, false).singular_values;
            if sv.iter().skip(i).any(|&s| s > tol) {
                return false;
            }
        }
        true
    }
}

fn canonicalize_columns(m: &mut Mat) -> Result<(), FlagError> {
    let n = m.nrows();
    for c in 0..n {
        let scale = m.column(c).norm();
        if scale < 1e-300 {
            return Err(FlagError::Singular(0.0));
        }
        // Modified Gram-Schmidt with one re-orthogonalization pass.
        for _ in 0..2 {
            for prev in 0..c {
                let d = m.column(prev).dot(&m.column(c));
                let adj = m.column(prev) * d;
                let mut col = m.column_mut(c);
                col -= adj;
            }
        }
        let rem = m.column(c).norm();
        if rem <= TRANSVERSALITY_TOL * scale {
            return Err(FlagError::Singular(rem / scale));
        }
        let mut col = m.column_mut(c);
        col /= rem;
        // Orient by the first entry that is clearly nonzero.
        let lead = (0..n).find(|&r| col[r].abs() > 1e-6).unwrap_or(0);
        if col[lead] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(())
}

/// Determinant of the concatenated leading columns of a tuple of flags.
///
/// `parts` lists (flag, how many leading columns); the column counts must sum
/// to n.  This is the bracket F^(i) ^ G^(j) ^ ... of the chosen bases.
pub fn wedge(parts: &[(&Flag, usize)]) -> Result<f64, FlagError> {
    let n = parts[0].0.n();
    let total: usize = parts.iter().map(|p| p.1).sum();
    if total != n {
        return Err(FlagError::BadIndices(
            parts.iter().map(|p| p.1).collect(),
            n,
        ));
    }
    let mut m = Mat::zeros(n, n);
    let mut c = 0;
    for (f, k) in parts {
        if f.n() != n {
            return Err(FlagError::BadDimension(f.n(), n));
        }
        for l in 0..*k {
            m.set_column(c, &f.basis.column(l));
            c += 1;
        }
    }
    Ok(m.determinant())
}

/// Three-flag wedge F^(i) ^ G^(j) ^ H^(k) with i + j + k = n.
pub fn wedge3(f: &Flag, i: usize, g: &Flag, j: usize, h: &Flag, k: usize) -> Result<f64, FlagError> {
    wedge(&[(f, i), (g, j), (h, k)])
}

/// Whether F_1^(d_1) + ... + F_k^(d_k) = R^n, judged against `tol`.
///
/// Columns are unit norm after canonicalization, so the determinant itself is
/// the tested volume.  Returns false (instead of erroring) near degeneracy.
pub fn is_transverse_with_tol(flags: &[&Flag], dims: &[usize], tol: f64) -> bool {
    if flags.len() != dims.len() {
        return false;
    }
    let parts: Vec<(&Flag, usize)> = flags.iter().copied().zip(dims.iter().copied()).collect();
    match wedge(&parts) {
        Ok(d) => d.abs() > tol,
        Err(_) => false,
    }
}

/// Transversality of a tuple for every splitting of n among the members.
pub fn is_transverse(flags: &[&Flag], dims: &[usize]) -> bool {
    is_transverse_with_tol(flags, dims, TRANSVERSALITY_TOL)
}

/// Full pairwise-and-total transversality of a tuple: every composition of n
/// into nonnegative parts indexed by the tuple must span.
pub fn is_transverse_tuple(flags: &[&Flag]) -> bool {
    let n = flags[0].n();
    let k = flags.len();
    let mut dims = vec![0usize; k];
    fn rec(flags: &[&Flag], dims: &mut Vec<usize>, pos: usize, left: usize) -> bool {
        if pos == dims.len() - 1 {
            dims[pos] = left;
            return is_transverse(flags, dims);
        }
        for d in 0..=left {
            dims[pos] = d;
            if !rec(flags, dims, pos + 1, left - d) {
                return false;
            }
        }
        true
    }
    rec(flags, &mut dims, 0, n)
}

/// Triple ratio T_{i,j,k}(F,G,H) of a transverse triple, i,j,k >= 1,
/// i + j + k = n:
///
///   T = (F^{i+1} G^{j}   H^{k-1}) (F^{i-1} G^{j+1} H^{k})   (F^{i}   G^{j-1} H^{k+1})
///     / (F^{i+1} G^{j-1} H^{k})   (F^{i}   G^{j+1} H^{k-1}) (F^{i-1} G^{j}   H^{k+1})
pub fn triple_ratio(
    f: &Flag,
    g: &Flag,
    h: &Flag,
    i: usize,
    j: usize,
    k: usize,
) -> Result<f64, FlagError> {
    let n = f.n();
    if i < 1 || j < 1 || k < 1 || i + j + k != n {
        return Err(FlagError::BadIndices(vec![i, j, k], n));
    }
    let num = wedge3(f, i + 1, g, j, h, k - 1)?
        * wedge3(f, i - 1, g, j + 1, h, k)?
        * wedge3(f, i, g, j - 1, h, k + 1)?;
    let den = wedge3(f, i + 1, g, j - 1, h, k)?
        * wedge3(f, i, g, j + 1, h, k - 1)?
        * wedge3(f, i - 1, g, j, h, k + 1)?;
    if den.abs() < 1e-300 {
        return Err(FlagError::NotTransverse(vec![i, j, k]));
    }
    Ok(num / den)
}

/// Cross ratio C_i(E,F,G,H) of a quadruple with (E,F,H), (E,G,H) transverse:
///
///   C_i = (E^{i} H^{n-i-1} G^{1}) (E^{i-1} H^{n-i} F^{1})
///       / (E^{i} H^{n-i-1} F^{1}) (E^{i-1} H^{n-i} G^{1})
pub fn cross_ratio(
    e: &Flag,
    f: &Flag,
    g: &Flag,
    h: &Flag,
    i: usize,
) -> Result<f64, FlagError> {
    let n = e.n();
    if i < 1 || i > n - 1 {
        return Err(FlagError::BadIndices(vec![i], n));
    }
    let num = wedge(&[(e, i), (h, n - i - 1), (g, 1)])? * wedge(&[(e, i - 1), (h, n - i), (f, 1)])?;
    let den = wedge(&[(e, i), (h, n - i - 1), (f, 1)])? * wedge(&[(e, i - 1), (h, n - i), (g, 1)])?;
    if den.abs() < 1e-300 {
        return Err(FlagError::NotTransverse(vec![i]));
    }
    Ok(num / den)
}

/// A projective class of invertible matrices: representatives are compared up
/// to a nonzero scalar.
#[derive(Debug, Clone)]
pub struct ProjClass {
    rep: Mat,
}

impl ProjClass {
    pub fn new(m: Mat) -> ProjClass {
        let mut rep = m;
        let norm = rep.norm();
        rep /= norm;
        // Fix the scalar sign by the first significant entry.
        let n = rep.nrows();
        'outer: for c in 0..n {
            for r in 0..n {
                if rep[(r, c)].abs() > 1e-6 {
                    if rep[(r, c)] < 0.0 {
                        rep.neg_mut();
                    }
                    break 'outer;
                }
            }
        }
        ProjClass { rep }
    }

    pub fn representative(&self) -> &Mat {
        &self.rep
    }

    pub fn approx_eq(&self, other: &ProjClass, tol: f64) -> bool {
        (&self.rep - &other.rep).amax() < tol
    }
}

/// Basis adapted to a transverse pair: column l spans F^(l) /\ G^(n-l+1).
pub fn adapted_basis(f: &Flag, g: &Flag) -> Result<Mat, FlagError> {
    let n = f.n();
    // Coordinates of F's basis in G's frame: v = F_{1..l} x lies in G^(n-l+1)
    // exactly when the last l-1 G-coordinates of v vanish.
    let g_inv = g.basis.clone().lu();
    let coords = g_inv.solve(&f.basis).ok_or(FlagError::Singular(0.0))?;
    let mut out = Mat::zeros(n, n);
    for l in 1..=n {
        let x = if l == 1 {
            Vect::from_element(1, 1.0)
        } else {
            // Null vector of the (l-1) x l system given by rows n-l+1..n-1
            // (0-indexed) of `coords` restricted to the first l columns.
            let mut a = Mat::zeros(l, l);
            for r in 0..l - 1 {
                for c in 0..l {
                    a[(r, c)] = coords[(n - l + 1 + r, c)];
                }
            }
            let svd = a.svd(false, true);
            let vt = svd.v_t.as_ref().expect("svd v_t");
            let sing = &svd.singular_values;
            if sing[l - 2] < 1e-9 * sing[0].max(1e-300) {
                // rank of the (l-1)-row system dropped: pair not transverse
                return Err(FlagError::NotTransverse(vec![l, n - l + 1]));
            }
            vt.row(l - 1).transpose()
        };
        let mut v = Vect::zeros(n);
        for c in 0..l {
            v += f.basis.column(c) * x[c];
        }
        let norm = v.norm();
        if norm < 1e-10 {
            return Err(FlagError::NotTransverse(vec![l, n - l + 1]));
        }
        out.set_column(l - 1, &(v / norm));
    }
    Ok(out)
}

/// Unique projective transformation with g.F = F', g.G = G', g.p = p'
/// for lines p, p' generic with respect to the pairs (Remark on
/// normalization of transverse pairs plus a generic line).
pub fn normalize_triple(
    f: &Flag,
    g: &Flag,
    p: &Vect,
    f2: &Flag,
    g2: &Flag,
    p2: &Vect,
) -> Result<ProjClass, FlagError> {
    let b1 = scaled_adapted_basis(f, g, p)?;
    let b2 = scaled_adapted_basis(f2, g2, p2)?;
    let m = &b2 * b1.try_inverse().ok_or(FlagError::Singular(0.0))?;
    Ok(ProjClass::new(m))
}

/// Adapted basis of (F,G) rescaled so the generic line p is the sum of the
/// basis vectors.  Unique up to one global scalar.
fn scaled_adapted_basis(f: &Flag, g: &Flag, p: &Vect) -> Result<Mat, FlagError> {
    let n = f.n();
    let b = adapted_basis(f, g)?;
    let coeffs = b
        .clone()
        .lu()
        .solve(p)
        .ok_or(FlagError::Singular(0.0))?;
    let scale = p.norm();
    let mut out = b;
    for l in 0..n {
        if coeffs[l].abs() < 1e-10 * scale {
            return Err(FlagError::NotGeneric);
        }
        let col = out.column(l) * coeffs[l];
        out.set_column(l, &col);
    }
    Ok(out)
}

/// Unique unipotent projective transformation with u.F = F and u.G = G'.
///
/// In a basis adapted to F the result is unit upper triangular.
pub fn unipotent_fixing(f: &Flag, g: &Flag, g2: &Flag) -> Result<Mat, FlagError> {
    let n = f.n();
    let b = adapted_basis(f, g)?;
    let b2 = adapted_basis(f, g2)?;
    // Rescale column l of b2 so it agrees with column l of b modulo F^(l-1):
    // compare leading coordinates in the frame of F.
    let f_inv = f
        .basis
        .clone()
        .lu();
    let x = f_inv.solve(&b).ok_or(FlagError::Singular(0.0))?;
    let x2 = f_inv.solve(&b2).ok_or(FlagError::Singular(0.0))?;
    let mut b2s = b2;
    for l in 0..n {
        let lead = x[(l, l)];
        let lead2 = x2[(l, l)];
        if lead2.abs() < 1e-12 {
            return Err(FlagError::NotTransverse(vec![l + 1]));
        }
        let col = b2s.column(l) * (lead / lead2);
        b2s.set_column(l, &col);
    }
    let u = &b2s * b.try_inverse().ok_or(FlagError::Singular(0.0))?;
    Ok(u)
}

/// Eruption endomorphism A^{i,j,k}_{F,G,H}: scales F^(i) by (n-i)/n and
/// G^(j) + H^(k) by -i/n.  Zero-index conventions:
/// i = 0 gives the zero endomorphism, j = 0 delegates to the shearing
/// endomorphism of (F,H), k = 0 to the shearing endomorphism of (F,G).
pub fn eruption_endo(
    f: &Flag,
    g: &Flag,
    h: &Flag,
    i: usize,
    j: usize,
    k: usize,
) -> Result<Mat, FlagError> {
    let n = f.n();
    if i + j + k != n {
        return Err(FlagError::BadIndices(vec![i, j, k], n));
    }
    if i == 0 {
        return Ok(Mat::zeros(n, n));
    }
    if j == 0 {
        return shearing_endo(f, h, i);
    }
    if k == 0 {
        return shearing_endo(f, g, i);
    }
    let mut b = Mat::zeros(n, n);
    for c in 0..i {
        b.set_column(c, &f.basis.column(c));
    }
    for c in 0..j {
        b.set_column(i + c, &g.basis.column(c));
    }
    for c in 0..k {
        b.set_column(i + j + c, &h.basis.column(c));
    }
    two_eigenvalue(b, i, n)
}

/// Shearing endomorphism A^{i,n-i}_{F,G}: scales F^(i) by (n-i)/n and
/// G^(n-i) by -i/n.
pub fn shearing_endo(f: &Flag, g: &Flag, i: usize) -> Result<Mat, FlagError> {
    let n = f.n();
    if i < 1 || i > n - 1 {
        return Err(FlagError::BadIndices(vec![i], n));
    }
    let mut b = Mat::zeros(n, n);
    for c in 0..i {
        b.set_column(c, &f.basis.column(c));
    }
    for c in 0..(n - i) {
        b.set_column(i + c, &g.basis.column(c));
    }
    two_eigenvalue(b, i, n)
}

fn two_eigenvalue(b: Mat, i: usize, n: usize) -> Result<Mat, FlagError> {
    let scale: f64 = b.column_iter().map(|c| c.norm()).product();
    if b.determinant().abs() <= TRANSVERSALITY_TOL * scale {
        return Err(FlagError::NotTransverse(vec![i, n - i]));
    }
    let mut d = Mat::zeros(n, n);
    let hi = (n - i) as f64 / n as f64;
    let lo = -(i as f64) / n as f64;
    for c in 0..n {
        d[(c, c)] = if c < i { hi } else { lo };
    }
    let b_inv = b.clone().try_inverse().ok_or(FlagError::Singular(0.0))?;
    Ok(&b * d * b_inv)
}

/// Trace form B(X,Y) = tr(XY) on endomorphisms.
pub fn trace_form(x: &Mat, y: &Mat) -> f64 {
    (x * y).trace()
}

/// All triples (i,j,k) with i,j,k >= 1 and i + j + k = n, lexicographic.
pub fn positive_index_triples(n: usize) -> Vec<(usize, usize, usize)> {
    let mut v = Vec::new();
    for i in 1..n {
        for j in 1..n {
            if i + j < n {
                v.push((i, j, n - i - j));
            }
        }
    }
    v
}

/// Sorted real eigen-decomposition of a matrix with n distinct real
/// eigenvalues.  Returns (eigenvalue, unit eigenvector) in ascending order of
/// eigenvalue; errors out on complex or repeated spectra.
pub fn sorted_real_eigen(m: &Mat) -> Result<Vec<(f64, Vect)>, FlagError> {
    let n = m.nrows();
    let eigs = m.clone().complex_eigenvalues();
    let scale = m.amax().max(1.0);
    let mut vals: Vec<f64> = Vec::with_capacity(n);
    for e in eigs.iter() {
        if e.im.abs() > 1e-7 * scale {
            return Err(FlagError::BadSpectrum);
        }
        vals.push(e.re);
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for w in vals.windows(2) {
        if (w[1] - w[0]).abs() < 1e-9 * scale {
            return Err(FlagError::BadSpectrum);
        }
    }
    let mut out = Vec::with_capacity(n);
    for &lambda in &vals {
        let shifted = m - Mat::identity(n, n) * lambda;
        let svd = shifted.svd(true, true);
        let vt = svd.v_t.as_ref().expect("svd v_t");
        let mut v = vt.row(vt.nrows() - 1).transpose();
        // Two rounds of shifted inverse iteration with Rayleigh updates push
        // the eigenpair to working precision; the raw SVD null vector can
        // carry ~1e-10 of error for ill-scaled loxodromic products.
        let mut lam = lambda;
        for _ in 0..2 {
            let delta = 1e-9 * scale.max(lam.abs());
            let shifted = m - Mat::identity(n, n) * (lam + delta);
            if let Some(w) = shifted.lu().solve(&v) {
                let norm = w.norm();
                if norm.is_finite() && norm > 0.0 {
                    v = w / norm;
                }
            }
            let mv = m * &v;
            lam = mv.dot(&v) / v.dot(&v);
        }
        out.push((lam, v));
    }
    Ok(out)
}

/// Reconstruct a transverse triple with the prescribed positive triple
/// ratios.  F and G are pinned to the standard ascending and descending
/// coordinate flags and H^(1) to the all-ones line, which removes the whole
/// PGL(n) gauge; the remaining unknowns are solved by Newton continuation in
/// log coordinates.
///
/// `targets` maps every (i,j,k) from [`positive_index_triples`] to a positive
/// value.  For n = 2 the target set is empty and a fixed transverse triple is
/// returned.
pub fn flags_from_triple_ratios(
    n: usize,
    targets: &std::collections::BTreeMap<(usize, usize, usize), f64>,
) -> Result<(Flag, Flag, Flag), FlagError> {
    let f = Flag::standard(n);
    let g = Flag::reversed_standard(n);
    let triples = positive_index_triples(n);
    for t in &triples {
        match targets.get(t) {
            Some(v) if *v > 0.0 => {}
            _ => return Err(FlagError::BadIndices(vec![t.0, t.1, t.2], n)),
        }
    }
    if n == 2 {
        let h = Flag::new(Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]))?;
        return Ok((f, g, h));
    }

    // Start at the Veronese triple normalized to (F, G, ones), whose triple
    // ratios are all 1, and walk the targets multiplicatively.
    let h0 = veronese_unit_triple_h(n)?;
    let log_t: Vec<f64> = triples.iter().map(|t| targets[t].ln()).collect();
    let max_log = log_t.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let steps = (max_log / 0.8).ceil().max(1.0) as usize;

    let mut cols = h_unknowns(&h0, n);
    for s in 1..=steps {
        let frac = s as f64 / steps as f64;
        let goal: Vec<f64> = log_t.iter().map(|l| l * frac).collect();
        cols = newton_solve_triple(n, &triples, &goal, cols)?;
    }
    let h = h_from_unknowns(&cols, n)?;
    // Verify against an independent evaluation of the ratios.
    let mut worst = 0.0f64;
    for (idx, t) in triples.iter().enumerate() {
        let got = triple_ratio(&f, &g, &h, t.0, t.1, t.2)?;
        let rel = (got.ln() - log_t[idx]).abs();
        worst = worst.max(rel);
    }
    if worst > 1e-8 {
        return Err(FlagError::ReconstructionFailed(worst));
    }
    Ok((f, g, h))
}

/// Osculating flag of the moment curve s -> (1, s, s^2, ...) at parameter s:
/// columns are the derivatives of the curve.
pub fn moment_osculating_flag(n: usize, s: f64) -> Result<Flag, FlagError> {
    let mut m = Mat::zeros(n, n);
    for d in 0..n {
        // d-th derivative of (s^0, ..., s^{n-1}).
        for r in 0..n {
            if r >= d {
                let mut c = 1.0;
                for q in 0..d {
                    c *= (r - q) as f64;
                }
                m[(r, d)] = c * s.powi((r - d) as i32);
            }
        }
    }
    Flag::new(m)
}

fn veronese_unit_triple_h(n: usize) -> Result<Flag, FlagError> {
    // Flags of the moment curve at 0, infinity, 1; the curve at infinity
    // osculates the reversed standard flag.
    let fv = moment_osculating_flag(n, 0.0)?; // = standard flag
    let hv = moment_osculating_flag(n, 1.0)?;
    let mut rev = Mat::zeros(n, n);
    for i in 0..n {
        rev[(n - 1 - i, i)] = 1.0;
    }
    let gv = Flag::new(rev)?;
    // Normalize (F_v, G_v, H_v^(1)) to (standard, reversed, ones).
    let ones = Vect::from_element(n, 1.0);
    let g = normalize_triple(&fv, &gv, &hv.col(0), &Flag::standard(n), &Flag::reversed_standard(n), &ones)?;
    hv.transform(g.representative())
}

fn h_unknowns(h: &Flag, n: usize) -> Vec<f64> {
    // Unknowns are the entries of columns 2..=n-1 of an H-basis whose first
    // column is fixed to the all-ones vector and whose later columns are kept
    // orthonormal to the earlier ones.
    let mut cols = Vec::with_capacity(n * (n - 2));
    let mut basis: Vec<Vect> = vec![Vect::from_element(n, 1.0).normalize()];
    for c in 1..n - 1 {
        let mut v = h.col(c);
        for b in &basis {
            let d = b.dot(&v);
            v -= b * d;
        }
        v = v.normalize();
        basis.push(v.clone());
        cols.extend(v.iter().copied());
    }
    cols
}

/// Right-null direction of a matrix with more columns than rank: the input is
/// padded to a square matrix with zero rows so the full SVD exposes it.
fn null_direction(a: &Mat) -> Vect {
    let c = a.ncols();
    let mut sq = Mat::zeros(c, c);
    for r in 0..a.nrows().min(c) {
        for cc in 0..c {
            sq[(r, cc)] = a[(r, cc)];
        }
    }
    let svd = sq.svd(false, true);
    let vt = svd.v_t.as_ref().expect("svd v_t");
    vt.row(c - 1).transpose()
}

fn h_from_unknowns(cols: &[f64], n: usize) -> Result<Flag, FlagError> {
    let mut m = Mat::zeros(n, n);
    m.set_column(0, &Vect::from_element(n, 1.0));
    for c in 1..n - 1 {
        let v = Vect::from_iterator(n, cols[(c - 1) * n..c * n].iter().copied());
        m.set_column(c, &v);
    }
    // Complete with the direction least represented so far.
    let partial = m.columns(0, n - 1).transpose().into_owned();
    m.set_column(n - 1, &null_direction(&partial));
    Flag::new(m)
}

fn triple_residual(n: usize, triples: &[(usize, usize, usize)], goal: &[f64], cols: &[f64]) -> Result<Vec<f64>, FlagError> {
    let f = Flag::standard(n);
    let g = Flag::reversed_standard(n);
    let h = h_from_unknowns(cols, n)?;
    let mut res = Vec::with_capacity(cols.len());
    for (idx, t) in triples.iter().enumerate() {
        let r = triple_ratio(&f, &g, &h, t.0, t.1, t.2)?;
        if r <= 0.0 {
            return Err(FlagError::ReconstructionFailed(f64::INFINITY));
        }
        res.push(r.ln() - goal[idx]);
    }
    // Frame conditions: later columns stay orthonormal to all earlier ones.
    let ones = Vect::from_element(n, 1.0).normalize();
    let mut frame: Vec<Vect> = vec![ones];
    for c in 1..n - 1 {
        let v = Vect::from_iterator(n, cols[(c - 1) * n..c * n].iter().copied());
        for b in &frame {
            res.push(b.dot(&v));
        }
        res.push(v.norm_squared() - 1.0);
        frame.push(v);
    }
    Ok(res)
}

fn newton_solve_triple(
    n: usize,
    triples: &[(usize, usize, usize)],
    goal: &[f64],
    start: Vec<f64>,
) -> Result<Vec<f64>, FlagError> {
    let dim = start.len();
    let mut x = start;
    for _ in 0..60 {
        let r = triple_residual(n, triples, goal, &x)?;
        let norm = r.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if norm < 1e-12 {
            break;
        }
        // Finite-difference Jacobian; the system is square by construction.
        let mut jac = Mat::zeros(dim, dim);
        let eps = 1e-7;
        for c in 0..dim {
            let mut xp = x.clone();
            xp[c] += eps;
            let rp = triple_residual(n, triples, goal, &xp)?;
            for rr in 0..dim {
                jac[(rr, c)] = (rp[rr] - r[rr]) / eps;
            }
        }
        let rhs = Vect::from_iterator(dim, r.iter().map(|v| -v));
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(FlagError::ReconstructionFailed(norm))?;
        let mut damp = 1.0;
        loop {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + damp * s).collect();
            match triple_residual(n, triples, goal, &cand) {
                Ok(rc) => {
                    let cn = rc.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                    if cn < norm || damp < 0.05 {
                        x = cand;
                        break;
                    }
                }
                Err(_) => {}
            }
            damp *= 0.5;
            if damp < 1e-3 {
                return Err(FlagError::ReconstructionFailed(norm));
            }
        }
    }
    let r = triple_residual(n, triples, goal, &x)?;
    let norm = r.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if norm > 1e-9 {
        return Err(FlagError::ReconstructionFailed(norm));
    }
    Ok(x)
}
