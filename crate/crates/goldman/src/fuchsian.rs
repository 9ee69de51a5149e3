//! Hyperbolic realization of the triangulation complex.
//!
//! A Fenchel-Nielsen point (one length and twist per gluing curve) is turned
//! into a discrete faithful PSL(2,R) representation of the surface group by
//! building each pair of pants as an index-two subgroup of a three-mirror
//! reflection group and gluing along a spanning tree of the pants graph,
//! with stable letters for the remaining gluings.  Composition with the
//! principal (symmetric power) embedding gives the Fuchsian points of the
//! PSL(n,R)-Hitchin component; flags at ideal vertices are eigenflags of
//! loxodromic elements.
//!
//! Geometry lives in the Klein model, where geodesics are straight chords
//! and every incidence test is planar linear algebra.  Metric quantities
//! (base points of ideal triangles, perpendicular feet, midpoints) are
//! computed on the hyperboloid, which the Klein disk projectivizes; the
//! group acts through the symmetric square SL(2,R) -> SO(2,1).
//!
//! The algebraic intersection number between a 1-simplex and an oriented
//! barrier assigns +-1 to interior crossings (left to right of the barrier
//! counts +1), +-1/2 to endpoints lying on a barrier, and +-1/3 to
//! endpoints at the source of a non-edge barrier, following the sector
//! rules around the source.

use crate::flagkit::{self, Flag, FlagError, Mat, Vect};
use crate::surface::{
    EdgeInst, EdgeRep, Gen, IdealVertex, PantsGraph, Slot, TriInst, TriangulationComplex,
    VertexResolver, Word,
};
use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuchsianError {
    #[error("lengths must be positive, got {0}")]
    BadLength(f64),
    #[error("Fenchel-Nielsen data has {0} curves, pants graph needs {1}")]
    CurveCountMismatch(usize, usize),
    #[error("pants group construction failed: {0}")]
    PantsConstruction(String),
    #[error("flag extraction failed: {0}")]
    Flag(#[from] FlagError),
    #[error("walk crossed a closed edge or exceeded its cap")]
    WalkEscaped,
    #[error("endpoint orientation is numerically ambiguous on segment {0}")]
    AmbiguousEndpoint(String),
}

/// Fenchel-Nielsen coordinates: hyperbolic length and twist per gluing curve,
/// indexed like the pants graph's gluing list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FenchelNielsen {
    pub curves: Vec<CurveFN>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveFN {
    pub length: f64,
    pub twist: f64,
}

impl FenchelNielsen {
    pub fn validate(&self, graph: &PantsGraph) -> Result<(), FuchsianError> {
        if self.curves.len() != graph.num_curves() {
            return Err(FuchsianError::CurveCountMismatch(
                self.curves.len(),
                graph.num_curves(),
            ));
        }
        for c in &self.curves {
            if !(c.length > 0.0) || !c.length.is_finite() || !c.twist.is_finite() {
                return Err(FuchsianError::BadLength(c.length));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// 2x2 building blocks
// ---------------------------------------------------------------------------

fn mat2(a: f64, b: f64, c: f64, d: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[a, b, c, d])
}

fn det_normalize(m: &Mat) -> Mat {
    let d = m.determinant();
    assert!(d > 0.0, "matrix must have positive determinant, got {d}");
    m / d.sqrt()
}

/// Attracting and repelling unit eigenvectors of a hyperbolic 2x2 matrix.
fn fixed_vectors(m: &Mat) -> Result<(Vect, Vect), FuchsianError> {
    let eig = flagkit::sorted_real_eigen(m).map_err(FlagError::from)?;
    if eig.len() != 2 {
        return Err(FuchsianError::PantsConstruction("not 2x2".into()));
    }
    // Hyperbolic in PSL(2,R): eigenvalues l, 1/l with |l| > 1 attracting.
    let (l0, v0) = (&eig[0].0, eig[0].1.clone());
    let (l1, v1) = (&eig[1].0, eig[1].1.clone());
    if (l0.abs() - l1.abs()).abs() < 1e-12 {
        return Err(FuchsianError::PantsConstruction("parabolic or elliptic".into()));
    }
    if l1.abs() > l0.abs() {
        Ok((v1, v0))
    } else {
        Ok((v0, v1))
    }
}

/// Circle coordinate of a projective point (x : y) on the ideal boundary:
/// the double-angle embedding phi = atan2(2xy, x^2 - y^2), injective on RP^1
/// and orientation preserving.
pub fn boundary_angle(v: &Vect) -> f64 {
    let (x, y) = (v[0], v[1]);
    (2.0 * x * y).atan2(x * x - y * y)
}

/// Unit circle point of a boundary angle in the Klein disk.
pub fn circle_point(angle: f64) -> Vector2<f64> {
    Vector2::new(angle.cos(), angle.sin())
}

/// Translation length of a hyperbolic element (2 log of spectral radius,
/// after normalizing the determinant).
pub fn translation_length(m: &Mat) -> Result<f64, FuchsianError> {
    let eig = flagkit::sorted_real_eigen(m).map_err(FlagError::from)?;
    let l = eig.last().unwrap().0.abs().max(eig[0].0.abs());
    Ok(2.0 * (l / m.determinant().abs().sqrt().max(1e-300)).ln().abs())
}

// ---------------------------------------------------------------------------
// Pants groups from three mirrors
// ---------------------------------------------------------------------------

/// Boundary holonomies (A, B, C) of a hyperbolic pair of pants with boundary
/// lengths (l_a, l_b, l_c): A B C = id in PSL(2,R), |tr X| = 2 cosh(l/2),
/// axes pairwise disjoint, and the pants lies to the right of each boundary
/// oriented by its holonomy.
///
/// Construction: reflections R1, R2, R3 across three pairwise disjoint
/// geodesics at pairwise distances l_a/2, l_b/2, l_c/2 (the right-angled
/// hexagon configuration, which exists for every positive triple); then
/// (R1 R2, R2 R3, R3 R1) multiplies to the identity and has the prescribed
/// translation lengths.
pub fn pants_group(l_a: f64, l_b: f64, l_c: f64) -> Result<(Mat, Mat, Mat), FuchsianError> {
    for l in [l_a, l_b, l_c] {
        if !(l > 0.0) || !l.is_finite() {
            return Err(FuchsianError::BadLength(l));
        }
    }
    // Mirrors in the upper half plane: m1 = unit semicircle, m2 = semicircle
    // of radius R = e^{l_a/2} about 0, m3 a semicircle in the annulus between
    // them on the positive axis, pinned by its inversive distances to m1
    // (cosh l_c/2, unnested) and to m2 (cosh l_b/2, nested).
    let r_big = (l_a / 2.0).exp();
    let r3 = (r_big * r_big - 1.0)
        / (2.0 * (r_big * (l_b / 2.0).cosh() + (l_c / 2.0).cosh()));
    let u = 1.0 + 2.0 * r3 * (l_c / 2.0).cosh();
    let c3 = (u + r3 * r3).sqrt();
    debug_assert!(c3 - r3 > 1.0 && c3 + r3 < r_big, "mirror escapes the annulus");
    let m1 = mat2(0.0, 1.0, 1.0, 0.0);
    let m2 = mat2(0.0, r_big * r_big, 1.0, 0.0);
    let m3 = mat2(c3, r3 * r3 - c3 * c3, 1.0, -c3);
    let a = det_normalize(&(&m1 * &m2));
    let b = det_normalize(&(&m2 * &m3));
    let c = det_normalize(&(&m3 * &m1));
    // Two orientation candidates with the same boundary lengths:
    // (A,B,C) and (A^{-1}, B^{-1}, A^{-1} C^{-1} A).
    let inv = |m: &Mat| m.clone().try_inverse().unwrap();
    let cand1 = (a.clone(), b.clone(), c.clone());
    let cand2 = (inv(&a), inv(&b), &inv(&a) * &inv(&c) * &a);
    for (ca, cb, cc) in [cand1, cand2] {
        if pants_on_the_right(&ca, &cb, &cc)? {
            return Ok((ca, cb, cc));
        }
    }
    Err(FuchsianError::PantsConstruction(
        "no orientation candidate puts the pants on the right".into(),
    ))
}

/// Tests the side convention: the interior of the ideal triangle spanned by
/// the repelling fixed points must lie to the right of each boundary axis
/// oriented repelling -> attracting.
fn pants_on_the_right(a: &Mat, b: &Mat, c: &Mat) -> Result<bool, FuchsianError> {
    let mut minus = Vec::new();
    let mut plus = Vec::new();
    for m in [a, b, c] {
        let (att, rep) = fixed_vectors(m)?;
        minus.push(boundary_angle(&rep));
        plus.push(boundary_angle(&att));
    }
    let corners: Vec<Vector2<f64>> = minus.iter().map(|&t| circle_point(t)).collect();
    let interior = (corners[0] + corners[1] + corners[2]) / 3.0;
    for i in 0..3 {
        let from = circle_point(minus[i]);
        let to = circle_point(plus[i]);
        // right of the oriented chord = negative cross product side
        let cross = (to.x - from.x) * (interior.y - from.y) - (to.y - from.y) * (interior.x - from.x);
        if cross >= 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Principal embedding
// ---------------------------------------------------------------------------

/// Symmetric-power action of a 2x2 matrix on degree-(n-1) forms in two
/// variables, written in the monomial basis X^{n-1-i} Y^i.  Multiplicative
/// and determinant-preserving for det = 1.
pub fn principal_embed(m: &Mat, n: usize) -> Mat {
    let (a, c) = (m[(0, 0)], m[(1, 0)]);
    let (b, d) = (m[(0, 1)], m[(1, 1)]);
    let deg = n - 1;
    let mut out = Mat::zeros(n, n);
    // column j: coefficients of (aX + cY)^{deg-j} (bX + dY)^j
    for j in 0..n {
        let p1 = binomial_expand(a, c, deg - j);
        let p2 = binomial_expand(b, d, j);
        let prod = poly_mul(&p1, &p2);
        for (i, coeff) in prod.iter().enumerate() {
            out[(i, j)] = *coeff;
        }
    }
    out
}

/// Coefficients of (p X + q Y)^k in the basis X^{k-i} Y^i.
fn binomial_expand(p: f64, q: f64, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    for i in 0..=k {
        out[i] = binom(k, i) * p.powi((k - i) as i32) * q.powi(i as i32);
    }
    out
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Osculating flag of the Veronese curve at the projective point (x : y),
/// in the monomial basis: column m spans the m-th derivative direction
/// v^{n-1-m} w^m where v = (x, y) and w completes it.
pub fn veronese_flag(n: usize, x: f64, y: f64) -> Result<Flag, FlagError> {
    let (wx, wy) = (-y, x);
    let mut basis = Mat::zeros(n, n);
    for m in 0..n {
        let p1 = binomial_expand(x, y, n - 1 - m);
        let p2 = binomial_expand(wx, wy, m);
        let col = poly_mul(&p1, &p2);
        for (i, v) in col.iter().enumerate() {
            basis[(i, m)] = *v;
        }
    }
    Flag::new(basis)
}

/// Attracting and repelling flags of a matrix with n real eigenvalues of
/// pairwise distinct moduli: the attracting flag's F^(i) is spanned by the
/// eigenvectors of the i largest moduli.
pub fn eigenflag(m: &Mat) -> Result<(Flag, Flag), FuchsianError> {
    let n = m.nrows();
    let mut eig = flagkit::sorted_real_eigen(m).map_err(FlagError::from)?;
    eig.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
    for w in eig.windows(2) {
        if (w[1].0.abs() - w[0].0.abs()).abs() < 1e-10 * w[1].0.abs().max(1.0) {
            return Err(FuchsianError::PantsConstruction("repeated eigenvalue modulus".into()));
        }
    }
    let mut asc = Mat::zeros(n, n);
    let mut desc = Mat::zeros(n, n);
    for (i, (_, v)) in eig.iter().enumerate() {
        asc.set_column(i, v);
        desc.set_column(n - 1 - i, v);
    }
    Ok((
        Flag::new(desc).map_err(FuchsianError::Flag)?,
        Flag::new(asc).map_err(FuchsianError::Flag)?,
    ))
}

// ---------------------------------------------------------------------------
// Representations
// ---------------------------------------------------------------------------

/// A homomorphism from the surface-group word algebra to SL(n,R), assembled
/// from Fenchel-Nielsen data through the principal embedding.  For n = 2
/// this is the Fuchsian uniformization itself.
pub struct HitchinRep {
    pub n: usize,
    gens2: HashMap<Gen, Mat>,
    cache2: Mutex<HashMap<Word, Mat>>,
    cache_n: Mutex<HashMap<Word, Mat>>,
    flag_cache: Mutex<HashMap<IdealVertex, Flag>>,
    angle_cache: Mutex<HashMap<IdealVertex, f64>>,
    so21_cache: Mutex<HashMap<Word, Matrix3<f64>>>,
}

impl HitchinRep {
    /// Evaluate a word in PSL(2,R) (the underlying Fuchsian group).
    pub fn eval2(&self, w: &Word) -> Mat {
        if let Some(m) = self.cache2.lock().unwrap().get(w) {
            return m.clone();
        }
        let mut m = Mat::identity(2, 2);
        for &(g, e) in w.letters() {
            let base = self.gens2.get(&g).expect("generator matrix").clone();
            let base = if e < 0 { base.try_inverse().unwrap() } else { base };
            for _ in 0..e.unsigned_abs() {
                m = &m * &base;
            }
        }
        self.cache2.lock().unwrap().insert(w.clone(), m.clone());
        m
    }

    /// Evaluate a word in SL(n,R) through the principal embedding.
    pub fn eval(&self, w: &Word) -> Mat {
        if self.n == 2 {
            return self.eval2(w);
        }
        if let Some(m) = self.cache_n.lock().unwrap().get(w) {
            return m.clone();
        }
        let m = principal_embed(&self.eval2(w), self.n);
        self.cache_n.lock().unwrap().insert(w.clone(), m.clone());
        m
    }

    /// Adjoint action on sl(n): rho(w) X rho(w)^{-1}.
    pub fn adjoint(&self, w: &Word, x: &Mat) -> Mat {
        let g = self.eval(w);
        let gi = g.clone().try_inverse().expect("group element invertible");
        &g * x * gi
    }

    /// Boundary point of an ideal vertex as a projective vector in R^2.
    pub fn boundary_vector(&self, v: &IdealVertex) -> Vect {
        let peri = crate::surface::slot_word(v.base.pants, v.base.slot);
        let m = self.eval2(&peri);
        let (att, rep) = fixed_vectors(&m).expect("loxodromic peripheral");
        let fix = if v.base.attracting { att } else { rep };
        let moved = self.eval2(&v.word) * fix;
        moved.normalize()
    }

    /// Circle coordinate of an ideal vertex.
    pub fn angle(&self, v: &IdealVertex) -> f64 {
        if let Some(a) = self.angle_cache.lock().unwrap().get(v) {
            return *a;
        }
        let a = boundary_angle(&self.boundary_vector(v));
        self.angle_cache.lock().unwrap().insert(v.clone(), a);
        a
    }

    /// Frenet flag at an ideal vertex: rho(word) applied to the eigenflag of
    /// the base peripheral.
    pub fn flag_at(&self, v: &IdealVertex) -> Result<Flag, FuchsianError> {
        if let Some(f) = self.flag_cache.lock().unwrap().get(v) {
            return Ok(f.clone());
        }
        let peri = crate::surface::slot_word(v.base.pants, v.base.slot);
        let m = self.eval(&peri);
        let (att, rep) = eigenflag(&m)?;
        let base_flag = if v.base.attracting { att } else { rep };
        let f = if v.word.is_identity() {
            base_flag
        } else {
            base_flag.transform(&self.eval(&v.word)).map_err(FuchsianError::Flag)?
        };
        self.flag_cache.lock().unwrap().insert(v.clone(), f.clone());
        Ok(f)
    }

    /// The SO(2,1) matrix of a word, acting on hyperboloid coordinates.
    pub fn so21(&self, w: &Word) -> Matrix3<f64> {
        if let Some(m) = self.so21_cache.lock().unwrap().get(w) {
            return *m;
        }
        let m = so21_of(&self.eval2(w));
        self.so21_cache.lock().unwrap().insert(w.clone(), m);
        m
    }

    /// Homomorphism residual on a relator word (should be the identity in
    /// PSL(2,R)).
    pub fn relator_residual(&self, w: &Word) -> f64 {
        let m = self.eval2(w);
        let id = Mat::identity(2, 2);
        (&m - &id).amax().min((&m + &id).amax())
    }
}

impl VertexResolver for HitchinRep {
    fn point_eq(&self, a: &IdealVertex, b: &IdealVertex) -> bool {
        let (pa, pb) = (circle_point(self.angle(a)), circle_point(self.angle(b)));
        (pa - pb).norm() < 1e-6
    }
}

/// Symmetric-square image of a 2x2 matrix in the hyperboloid basis
/// (X, Y, T) with quadratic form X^2 + Y^2 - T^2.
pub fn so21_of(m2: &Mat) -> Matrix3<f64> {
    let e = principal_embed(m2, 3);
    // Basis change between monomial coefficients (c0, c1, c2) of
    // c0 X^2 + c1 XY + c2 Y^2 and (X, Y, T) = (c0 - c2, c1, c0 + c2).
    let p = Matrix3::new(
        0.5, 0.0, 0.5, //
        0.0, 1.0, 0.0, //
        -0.5, 0.0, 0.5,
    );
    let p_inv = Matrix3::new(
        1.0, 0.0, -1.0, //
        0.0, 1.0, 0.0, //
        1.0, 0.0, 1.0,
    );
    let em = Matrix3::from_fn(|r, c| e[(r, c)]);
    p_inv * em * p
}

/// Builds the Fuchsian (n = 2) representation from Fenchel-Nielsen data and
/// then composes with the principal embedding into SL(n,R).
pub fn assemble_fuchsian(
    tc: &TriangulationComplex,
    fn_data: &FenchelNielsen,
    n: usize,
) -> Result<HitchinRep, FuchsianError> {
    fn_data.validate(&tc.graph)?;
    let graph = &tc.graph;
    let np = graph.num_pants();

    // Boundary lengths per pants slot.
    let mut slot_len = vec![[0.0f64; 3]; np];
    for (ci, g) in graph.gluings.iter().enumerate() {
        slot_len[g.pants_a][g.slot_a.index()] = fn_data.curves[ci].length;
        slot_len[g.pants_b][g.slot_b.index()] = fn_data.curves[ci].length;
    }

    // Standard pants groups.
    let mut std_pants = Vec::with_capacity(np);
    for p in 0..np {
        std_pants.push(pants_group(slot_len[p][0], slot_len[p][1], slot_len[p][2])?);
    }
    let slot_mat = |p: usize, s: Slot, pants: &[(Mat, Mat, Mat)]| -> Mat {
        match s {
            Slot::A => pants[p].0.clone(),
            Slot::B => pants[p].1.clone(),
            Slot::C => pants[p].2.clone(),
        }
    };

    // Position the pants along the spanning tree.  conj[p] conjugates the
    // standard pants group of p into its global position.
    let mut conj: Vec<Option<Mat>> = vec![None; np];
    conj[0] = Some(Mat::identity(2, 2));
    let order = bfs_order(tc);
    for &p in &order[1..] {
        let (parent, ci) = tc.tree_parent[p].expect("tree parent");
        let g = &graph.gluings[ci];
        let (par_slot, child_slot, parent_is_side0) = if g.pants_a == parent && conj[g.pants_a].is_some() && p == g.pants_b {
            (g.slot_a, g.slot_b, true)
        } else {
            (g.slot_b, g.slot_a, false)
        };
        let parent_glob = {
            let gp = conj[parent].as_ref().unwrap();
            let m = slot_mat(parent, par_slot, &std_pants);
            gp * m * gp.clone().try_inverse().unwrap()
        };
        let child_std = slot_mat(p, child_slot, &std_pants);
        // Twist sign convention: positive twist slides along the side-0
        // peripheral's direction.
        let theta = if parent_is_side0 { fn_data.curves[ci].twist } else { -fn_data.curves[ci].twist };
        conj[p] = Some(gluing_map(&parent_glob, &child_std, theta)?);
    }

    // Generator matrices.
    let mut gens2 = HashMap::new();
    for p in 0..np {
        let gp = conj[p].as_ref().unwrap();
        let gi = gp.clone().try_inverse().unwrap();
        gens2.insert(Gen::PantsA(p), gp * &std_pants[p].0 * &gi);
        gens2.insert(Gen::PantsB(p), gp * &std_pants[p].1 * &gi);
    }

    // Stable letters for the cycle-closing gluings.
    let glob_slot = |p: usize, s: Slot| -> Mat {
        let gp = conj[p].as_ref().unwrap();
        gp * slot_mat(p, s, &std_pants) * gp.clone().try_inverse().unwrap()
    };
    for (t_idx, &ci) in tc.stable_letters.iter().enumerate() {
        let g = &graph.gluings[ci];
        let eta_a = glob_slot(g.pants_a, g.slot_a);
        let eta_b = glob_slot(g.pants_b, g.slot_b);
        let t = gluing_map(&eta_a, &eta_b, fn_data.curves[ci].twist)?;
        gens2.insert(Gen::Stable(t_idx), t);
    }

    let rep = HitchinRep {
        n,
        gens2,
        cache2: Mutex::new(HashMap::new()),
        cache_n: Mutex::new(HashMap::new()),
        flag_cache: Mutex::new(HashMap::new()),
        angle_cache: Mutex::new(HashMap::new()),
        so21_cache: Mutex::new(HashMap::new()),
    };
    // Assembly consistency: all gluing relators evaluate to the identity.
    for rel in tc.relators() {
        let res = rep.relator_residual(&rel);
        if res > 1e-8 {
            return Err(FuchsianError::PantsConstruction(format!(
                "relator residual {res:.3e} on {rel}"
            )));
        }
    }
    Ok(rep)
}

fn bfs_order(tc: &TriangulationComplex) -> Vec<usize> {
    let np = tc.graph.num_pants();
    let mut order = vec![0usize];
    let mut placed = vec![false; np];
    placed[0] = true;
    while order.len() < np {
        let before = order.len();
        for p in 0..np {
            if !placed[p] {
                if let Some((parent, _)) = tc.tree_parent[p] {
                    if placed[parent] {
                        placed[p] = true;
                        order.push(p);
                    }
                }
            }
        }
        assert!(order.len() > before, "spanning tree disconnected");
    }
    order
}

/// The element g with g eta2 g^{-1} = eta1^{-1}, twisted by theta along the
/// axis of eta1: g = S1 diag(e^{theta/2}, e^{-theta/2}) J S2^{-1}, where S_i
/// maps the coordinate axes to (attracting, repelling) of eta_i and
/// J = [[0,1],[-1,0]] swaps them.
fn gluing_map(eta1: &Mat, eta2: &Mat, theta: f64) -> Result<Mat, FuchsianError> {
    let s1 = axis_frame(eta1)?;
    let s2 = axis_frame(eta2)?;
    let tw = mat2((theta / 2.0).exp(), 0.0, 0.0, (-theta / 2.0).exp());
    let j = mat2(0.0, 1.0, -1.0, 0.0);
    Ok(&s1 * tw * j * s2.try_inverse().unwrap())
}

/// SL(2,R) frame with first column the attracting and second the repelling
/// eigenvector of a hyperbolic element.
fn axis_frame(m: &Mat) -> Result<Mat, FuchsianError> {
    let (att, rep) = fixed_vectors(m)?;
    let mut s = Mat::zeros(2, 2);
    s.set_column(0, &att);
    s.set_column(1, &rep);
    let d = s.determinant();
    if d < 0.0 {
        let col = -s.column(1);
        s.set_column(1, &col);
    }
    Ok(det_normalize(&s))
}

// ---------------------------------------------------------------------------
// Hyperboloid / Klein geometry
// ---------------------------------------------------------------------------

/// A point of the hyperboloid X^2 + Y^2 - T^2 = -1, T > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HPoint(pub Vector3<f64>);

impl HPoint {
    pub fn klein(&self) -> Vector2<f64> {
        Vector2::new(self.0.x / self.0.z, self.0.y / self.0.z)
    }

    pub fn from_raw(v: Vector3<f64>) -> HPoint {
        let q = minkowski(&v, &v);
        assert!(q < 0.0, "not timelike: {q}");
        let s = (-q).sqrt();
        let v = v / s;
        HPoint(if v.z > 0.0 { v } else { -v })
    }
}

pub fn minkowski(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.x * b.x + a.y * b.y - a.z * b.z
}

/// Lightlike vector of a boundary angle.
pub fn light_vector(angle: f64) -> Vector3<f64> {
    Vector3::new(angle.cos(), angle.sin(), 1.0)
}

/// Unit spacelike normal of the geodesic joining two boundary angles.
pub fn geodesic_normal(a1: f64, a2: f64) -> Vector3<f64> {
    let u = light_vector(a1);
    let v = light_vector(a2);
    // Lorentz cross product: Minkowski-orthogonal to both.
    let e = u.cross(&v);
    let n = Vector3::new(e.x, e.y, -e.z);
    let q = minkowski(&n, &n);
    assert!(q > 0.0, "degenerate geodesic");
    n / q.sqrt()
}

/// Incenter of an ideal triangle given by three boundary angles: the point
/// equidistant from the three sides.
pub fn ideal_incenter(a: f64, b: f64, c: f64) -> HPoint {
    // Sides: (a,b), (b,c), (c,a); orient each normal toward the opposite
    // vertex so the equidistance has consistent signs.
    let mut ns = [
        geodesic_normal(a, b),
        geodesic_normal(b, c),
        geodesic_normal(c, a),
    ];
    let opp = [light_vector(c), light_vector(a), light_vector(b)];
    for i in 0..3 {
        if minkowski(&ns[i], &opp[i]) < 0.0 {
            ns[i] = -ns[i];
        }
    }
    // p with <p, n1 - n2> = 0 and <p, n2 - n3> = 0.
    let j = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
    let w1 = j * (ns[0] - ns[1]);
    let w2 = j * (ns[1] - ns[2]);
    let p = w1.cross(&w2);
    HPoint::from_raw(p)
}

/// Foot of the perpendicular from a point to a geodesic (unit normal n).
pub fn foot_on_geodesic(p: &HPoint, n: &Vector3<f64>) -> HPoint {
    let coeff = minkowski(&p.0, n);
    HPoint::from_raw(p.0 - n * coeff)
}

/// Hyperbolic midpoint of two hyperboloid points.
pub fn hyper_midpoint(p: &HPoint, q: &HPoint) -> HPoint {
    HPoint::from_raw(p.0 + q.0)
}

/// Side of the oriented Klein chord from angle `from` to angle `to`:
/// positive = left, negative = right.
pub fn chord_side(from: f64, to: f64, p: &Vector2<f64>) -> f64 {
    let a = circle_point(from);
    let b = circle_point(to);
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Intersection parameter of segment [p, q] with the chord between two
/// angles, or None if they do not cross in the open segment.
pub fn segment_chord_intersection(
    p: &Vector2<f64>,
    q: &Vector2<f64>,
    a1: f64,
    a2: f64,
) -> Option<f64> {
    let a = circle_point(a1);
    let b = circle_point(a2);
    segment_segment_intersection(p, q, &a, &b)
}

/// Intersection parameter along [p, q] with segment [a, b], open at the
/// ends of [p, q].
pub fn segment_segment_intersection(
    p: &Vector2<f64>,
    q: &Vector2<f64>,
    a: &Vector2<f64>,
    b: &Vector2<f64>,
) -> Option<f64> {
    let r = q - p;
    let s = b - a;
    let denom = r.x * s.y - r.y * s.x;
    if denom.abs() < 1e-14 {
        return None;
    }
    let ap = a - p;
    let t = (ap.x * s.y - ap.y * s.x) / denom;
    let u = (ap.x * r.y - ap.y * r.x) / denom;
    if t > 1e-12 && t < 1.0 - 1e-12 && u > -1e-12 && u < 1.0 + 1e-12 {
        Some(t)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Realization of the barrier system
// ---------------------------------------------------------------------------

/// A realized triangle: corner angles (ccw order of the rep's vertex list),
/// corner points on the circle, and the interior base point of its barriers.
#[derive(Debug, Clone)]
pub struct RealizedTri {
    pub angles: [f64; 3],
    pub corners: [Vector2<f64>; 3],
    pub base: HPoint,
}

impl RealizedTri {
    pub fn base_klein(&self) -> Vector2<f64> {
        self.base.klein()
    }

    /// Second ideal endpoint of the full geodesic through the base point and
    /// corner i; the barrier ray is oriented from that backward point toward
    /// the corner.
    pub fn barrier_back_angle(&self, i: usize) -> f64 {
        let v = self.corners[i];
        let p = self.base_klein();
        // Intersect the line p + t (p - v), t > 0 with the unit circle.
        let d = p - v;
        let (a, b, c) = (d.dot(&d), 2.0 * p.dot(&d), p.dot(&p) - 1.0);
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        let t = (-b + disc) / (2.0 * a);
        let w = p + d * t;
        w.y.atan2(w.x)
    }
}

/// Bridge realization across the canonical lift of a curve: the segment
/// joining the q-points of the two entry edges, its crossing point with the
/// closed edge, and the auxiliary point between q_e and gamma q_e.
#[derive(Debug, Clone)]
pub struct RealizedBridge {
    /// q-point on side 0's entry edge (an endpoint of the bridge segment).
    pub q1: Vector2<f64>,
    /// q-point on side 1's entry edge (the other endpoint).
    pub q2: Vector2<f64>,
    /// Intersection of the bridge segment with the closed edge chord.
    pub q_e: HPoint,
    /// Point of the closed edge between q_e and gamma q_e (their hyperbolic
    /// midpoint along the axis).
    pub q_e_prime: HPoint,
    /// Forward primitive of r(e): attracting fixed point is the forward
    /// endpoint of the oriented closed edge.
    pub gamma_forward: Word,
}

/// Klein-model realization of all barriers, bridges and auxiliary points of
/// a triangulation complex under a chosen Fuchsian metric.  All derived
/// points are computed once per orbit representative and transported
/// equivariantly.
pub struct Realization<'a> {
    pub tc: &'a TriangulationComplex,
    pub geo: &'a HitchinRep,
    tri_cache: Mutex<HashMap<TriInst, RealizedTri>>,
    q_cache: Mutex<HashMap<EdgeInst, HPoint>>,
    bridge_cache: Mutex<HashMap<usize, RealizedBridge>>,
}

impl<'a> Realization<'a> {
    // Only the PSL(2,R) base of `geo` is read: realization geometry lives on
    // the Fuchsian uniformization.
    pub fn new(tc: &'a TriangulationComplex, geo: &'a HitchinRep) -> Realization<'a> {
        Realization {
            tc,
            geo,
            tri_cache: Mutex::new(HashMap::new()),
            q_cache: Mutex::new(HashMap::new()),
            bridge_cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn angle(&self, v: &IdealVertex) -> f64 {
        self.geo.angle(v)
    }

    /// Realize a triangle instance; the base point is computed for the orbit
    /// representative and translated, so equivariance is exact.
    pub fn tri(&self, t: &TriInst) -> RealizedTri {
        if let Some(r) = self.tri_cache.lock().unwrap().get(t) {
            return r.clone();
        }
        let base = if t.word.is_identity() {
            let vs = self.tc.rep_vertices(t.rep);
            let angs = [self.angle(&vs[0]), self.angle(&vs[1]), self.angle(&vs[2])];
            ideal_incenter(angs[0], angs[1], angs[2])
        } else {
            let rep_tri = TriInst { word: Word::identity(), rep: t.rep };
            let base_rep = self.tri(&rep_tri).base;
            HPoint::from_raw(self.geo.so21(&t.word) * base_rep.0)
        };
        let vs = self.tc.tri_vertices(t);
        let angles = [self.angle(&vs[0]), self.angle(&vs[1]), self.angle(&vs[2])];
        let corners = angles.map(circle_point);
        let out = RealizedTri { angles, corners, base };
        self.tri_cache.lock().unwrap().insert(t.clone(), out.clone());
        out
    }

    /// The marked point q_e of an isolated edge: foot of the perpendicular
    /// from the base point of the adjacent unprimed triangle representative,
    /// transported equivariantly.
    pub fn q_point(&self, e: &EdgeInst) -> HPoint {
        if let Some(q) = self.q_cache.lock().unwrap().get(e) {
            return *q;
        }
        let q = match e.rep {
            EdgeRep::Isolated { pants, kind } => {
                if e.word.is_identity() {
                    let t = TriInst {
                        word: Word::identity(),
                        rep: crate::surface::TriRep { pants, primed: false },
                    };
                    let rt = self.tri(&t);
                    let (u, v) = self.tc.edge_ends(e);
                    let n = geodesic_normal(self.angle(&u), self.angle(&v));
                    foot_on_geodesic(&rt.base, &n)
                } else {
                    let rep_edge = EdgeInst { word: Word::identity(), rep: e.rep };
                    let q_rep = self.q_point(&rep_edge);
                    HPoint::from_raw(self.geo.so21(&e.word) * q_rep.0)
                }
            }
            EdgeRep::Closed { .. } => panic!("q-points live on isolated edges"),
        };
        self.q_cache.lock().unwrap().insert(e.clone(), q);
        q
    }

    /// Realize the canonical bridge of a curve.
    pub fn bridge(&self, curve: usize) -> RealizedBridge {
        if let Some(b) = self.bridge_cache.lock().unwrap().get(&curve) {
            return b.clone();
        }
        let s0 = self.tc.bridge_side(curve, 0);
        let s1 = self.tc.bridge_side(curve, 1);
        let e0 = self.tc.tri_edges(&s0.tri)[s0.entry_edge_idx].clone();
        let e1 = self.tc.tri_edges(&s1.tri)[s1.entry_edge_idx].clone();
        let q1 = self.q_point(&e0).klein();
        let q2 = self.q_point(&e1).klein();
        let (em, ep) = self.tc.closed_edge_ends(curve);
        let (am, ap) = (self.angle(&em), self.angle(&ep));
        let t = segment_chord_intersection(&q1, &q2, am, ap)
            .expect("bridge segment crosses its closed edge");
        let k = q1 + (q2 - q1) * t;
        let q_e = klein_to_hyperboloid(&k);
        // gamma translates toward the forward endpoint of r(e).
        let cd = &self.tc.curves[curve];
        let gamma_forward = if cd.forward { cd.eta.clone() } else { cd.eta.inverse() };
        let moved = HPoint::from_raw(self.geo.so21(&gamma_forward) * q_e.0);
        let q_e_prime = hyper_midpoint(&q_e, &moved);
        let out = RealizedBridge { q1, q2, q_e, q_e_prime, gamma_forward };
        self.bridge_cache.lock().unwrap().insert(curve, out.clone());
        out
    }

    /// Oriented endpoints (backward, forward) of r(e) as circle angles.
    pub fn closed_edge_angles(&self, curve: usize) -> (f64, f64) {
        let (u, v) = self.tc.closed_edge_oriented(curve);
        (self.angle(&u), self.angle(&v))
    }

    /// Oriented endpoint angles of r(b) for an edge instance.
    pub fn oriented_edge_angles(&self, e: &EdgeInst) -> (f64, f64) {
        let (u, v) = self.tc.oriented_edge_ends(e);
        (self.angle(&u), self.angle(&v))
    }
}

pub fn klein_to_hyperboloid(k: &Vector2<f64>) -> HPoint {
    let r2 = k.dot(k);
    assert!(r2 < 1.0, "point outside the Klein disk");
    let s = 1.0 / (1.0 - r2).sqrt();
    HPoint(Vector3::new(k.x * s, k.y * s, s))
}

// ---------------------------------------------------------------------------
// Algebraic intersection numbers by walking fragmented triangles
// ---------------------------------------------------------------------------

/// What sits at an endpoint of a 1-simplex, declared by the caller (the
/// decomposition machinery always knows).
#[derive(Debug, Clone, PartialEq)]
pub enum EndpointKind {
    /// Interior of a fragmented triangle.
    Interior,
    /// Interior point of the realized edge (isolated edges only here;
    /// closed-edge endpoints never enter type C walks).
    OnEdge(EdgeInst),
    /// The source (interior base point) of the non-edge barriers of a
    /// triangle.
    AtSource(TriInst),
}

/// A geodesic 1-simplex for intersection counting: a Klein segment tagged
/// with the triangle containing its start and endpoint semantics.
#[derive(Debug, Clone)]
pub struct Simplex1 {
    pub a: Vector2<f64>,
    pub b: Vector2<f64>,
    pub start_tri: TriInst,
    pub a_kind: EndpointKind,
    pub b_kind: EndpointKind,
}

/// An oriented barrier reference: an edge of the triangulation or a
/// non-edge barrier (triangle, corner index).
#[derive(Debug, Clone, PartialEq)]
pub enum BarrierRef {
    Edge(EdgeInst),
    NonEdge(TriInst, usize),
}

/// Accumulated algebraic intersection numbers of one 1-simplex against every
/// barrier it meets.
#[derive(Debug, Clone, Default)]
pub struct Crossings {
    pub entries: Vec<(BarrierRef, f64)>,
}

impl Crossings {
    fn add(&mut self, r: BarrierRef, w: f64) {
        if w == 0.0 {
            return;
        }
        for (br, acc) in self.entries.iter_mut() {
            if *br == r {
                *acc += w;
                return;
            }
        }
        self.entries.push((r, w));
    }

    pub fn get(&self, r: &BarrierRef) -> f64 {
        self.entries
            .iter()
            .find(|(br, _)| br == r)
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    }
}

const WALK_CAP: usize = 64;

/// Walks a type C 1-simplex through the fragmented triangles and returns the
/// complete list of barriers with nonzero algebraic intersection number.
///
/// Interior transversal crossings contribute +-1 (left-to-right of the
/// oriented barrier is +1), endpoints on a barrier +-1/2, endpoints at a
/// barrier source +-1/3 by the sector rules.  The walk fails if it meets a
/// closed edge (such simplices are not type C) or exceeds its cap.
pub fn enumerate_crossings(
    real: &Realization,
    seg: &Simplex1,
) -> Result<Crossings, FuchsianError> {
    // Pull the whole configuration back by the start triangle's word: the
    // algebraic intersection numbers are Moebius invariant, and walking near
    // the identity translates keeps the Klein coordinates well conditioned
    // (far translates compress exponentially against the boundary circle).
    if !seg.start_tri.word.is_identity() {
        let w0 = seg.start_tri.word.clone();
        let g = real.geo.so21(&w0.inverse());
        let pull_point = |p: &Vector2<f64>| HPoint::from_raw(g * klein_to_hyperboloid(p).0).klein();
        let pull_kind = |k: &EndpointKind| match k {
            EndpointKind::Interior => EndpointKind::Interior,
            EndpointKind::OnEdge(e) => EndpointKind::OnEdge(EdgeInst {
                word: w0.inverse().mul(&e.word),
                rep: e.rep,
            }),
            EndpointKind::AtSource(t) => EndpointKind::AtSource(TriInst {
                word: w0.inverse().mul(&t.word),
                rep: t.rep,
            }),
        };
        let pulled = Simplex1 {
            a: pull_point(&seg.a),
            b: pull_point(&seg.b),
            start_tri: TriInst { word: Word::identity(), rep: seg.start_tri.rep },
            a_kind: pull_kind(&seg.a_kind),
            b_kind: pull_kind(&seg.b_kind),
        };
        let inner = enumerate_crossings(real, &pulled)?;
        let mut out = Crossings::default();
        for (br, w) in inner.entries {
            let pushed = match br {
                BarrierRef::Edge(e) => BarrierRef::Edge(EdgeInst {
                    word: w0.mul(&e.word),
                    rep: e.rep,
                }),
                BarrierRef::NonEdge(t, c) => BarrierRef::NonEdge(
                    TriInst { word: w0.mul(&t.word), rep: t.rep },
                    c,
                ),
            };
            out.add(pushed, w);
        }
        return Ok(out);
    }
    let mut out = Crossings::default();
    let dir = seg.b - seg.a;
    if dir.norm() < 1e-14 {
        return Ok(out);
    }
    let mut cur = seg.start_tri.clone();
    let mut t0 = 0.0f64;

    // Endpoint contributions at the start.
    match &seg.a_kind {
        EndpointKind::Interior => {}
        EndpointKind::OnEdge(e) => {
            let (a1, a2) = real.oriented_edge_angles(e);
            let just_in = seg.a + dir * 1e-9;
            let side = chord_side(a1, a2, &just_in);
            if side.abs() < 1e-13 {
                return Err(FuchsianError::AmbiguousEndpoint(format!("{e:?}")));
            }
            // first interval right of the barrier at its backward endpoint: +1/2
            out.add(BarrierRef::Edge(e.clone()), if side < 0.0 { 0.5 } else { -0.5 });
        }
        EndpointKind::AtSource(t) => {
            let rt = real.tri(t);
            let j = sector_of(&rt, &dir);
            out.add(BarrierRef::NonEdge(t.clone(), (j + 2) % 3), 1.0 / 3.0);
            out.add(BarrierRef::NonEdge(t.clone(), (j + 1) % 3), -1.0 / 3.0);
        }
    }

    for _ in 0..WALK_CAP {
        let rt = real.tri(&cur);
        // Exit through one of the three edge chords, if any.  Endpoints sit
        // exactly on chords of their triangles, so crossings within a 1e-7
        // parameter margin of an endpoint are endpoint artifacts, never real
        // crossings (the canonical decompositions keep genuine crossings
        // well inside).
        const MARGIN: f64 = 1e-7;
        let mut exit: Option<(usize, f64)> = None;
        for i in 0..3 {
            if let Some(t) =
                segment_segment_intersection(&seg.a, &seg.b, &rt.corners[i], &rt.corners[(i + 1) % 3])
            {
                if t > t0 + MARGIN && t < 1.0 - MARGIN && exit.map_or(true, |(_, te)| t < te) {
                    exit = Some((i, t));
                }
            }
        }
        let t_end = exit.map_or(1.0, |(_, t)| t);
        // Barrier crossings inside this triangle between t0 and t_end.  A
        // non-edge barrier is the ray from the source toward its ideal
        // endpoint, and the geodesic containing it carries that orientation.
        let base = rt.base_klein();
        for i in 0..3 {
            if let Some(t) = segment_segment_intersection(&seg.a, &seg.b, &base, &rt.corners[i]) {
                if t > t0 + MARGIN && t < t_end - MARGIN {
                    let back = rt.barrier_back_angle(i);
                    let before = seg.a + dir * (t - 1e-9);
                    let side = chord_side(back, rt.angles[i], &before);
                    out.add(
                        BarrierRef::NonEdge(cur.clone(), i),
                        if side > 0.0 { 1.0 } else { -1.0 },
                    );
                }
            }
        }
        match exit {
            None => {
                // b lies in this triangle; apply end contributions.
                match &seg.b_kind {
                    EndpointKind::Interior => {}
                    EndpointKind::OnEdge(e) => {
                        let (a1, a2) = real.oriented_edge_angles(e);
                        let just_in = seg.b - dir * 1e-9;
                        let side = chord_side(a1, a2, &just_in);
                        if side.abs() < 1e-13 {
                            return Err(FuchsianError::AmbiguousEndpoint(format!("{e:?}")));
                        }
                        // last interval left of the barrier at its forward endpoint: +1/2
                        out.add(BarrierRef::Edge(e.clone()), if side > 0.0 { 0.5 } else { -0.5 });
                    }
                    EndpointKind::AtSource(t) => {
                        let rtb = real.tri(t);
                        let j = sector_of(&rtb, &(-dir));
                        out.add(BarrierRef::NonEdge(t.clone(), (j + 1) % 3), 1.0 / 3.0);
                        out.add(BarrierRef::NonEdge(t.clone(), (j + 2) % 3), -1.0 / 3.0);
                    }
                }
                return Ok(out);
            }
            Some((i, t)) => {
                let edge = real.tc.tri_edges(&cur)[i].clone();
                if matches!(edge.rep, EdgeRep::Closed { .. }) {
                    return Err(FuchsianError::WalkEscaped);
                }
                // Transversal crossing of the edge.
                let (a1, a2) = real.oriented_edge_angles(&edge);
                let before = seg.a + dir * (t - 1e-9);
                let side = chord_side(a1, a2, &before);
                out.add(BarrierRef::Edge(edge), if side > 0.0 { 1.0 } else { -1.0 });
                let (next, _) = real.tc.neighbor(&cur, i);
                cur = next;
                t0 = t;
            }
        }
    }
    Err(FuchsianError::WalkEscaped)
}

/// A point inside the fragmented triangle of `tri` bounded by the barrier
/// rays toward corners i and i+1: the base point nudged toward both corners
/// by a fraction of the local triangle scale.  Safe for arbitrarily small
/// (far-translated) triangles.
pub fn point_in_fragment(real: &Realization, tri: &TriInst, edge_idx: usize) -> Vector2<f64> {
    let rt = real.tri(tri);
    let base = rt.base_klein();
    // local scale: distance from the base point to the nearest edge chord
    let mut scale = f64::MAX;
    for i in 0..3 {
        let a = rt.corners[i];
        let b = rt.corners[(i + 1) % 3];
        let d = (b - a).normalize();
        let off = base - a;
        let dist = (off - d * off.dot(&d)).norm();
        scale = scale.min(dist);
    }
    let into = |i: usize| (rt.corners[i] - base).normalize() * (0.45 * scale);
    base + (into(edge_idx) + into((edge_idx + 1) % 3)) * 0.5
}

/// Sector index j such that a direction out of the barrier source lies in
/// U_j (the component of the complement of the three barriers whose closure
/// contains barriers j-1 and j+1).
fn sector_of(rt: &RealizedTri, dir: &Vector2<f64>) -> usize {
    let base = rt.base_klein();
    let ray = |i: usize| {
        let d = rt.corners[i] - base;
        d.y.atan2(d.x)
    };
    let angs = [ray(0), ray(1), ray(2)];
    let th = dir.y.atan2(dir.x);
    let full = 2.0 * std::f64::consts::PI;
    // Position of th going ccw from each ray.
    for j in 0..3 {
        // Sector between rays b_{j+1} and b_{j+2} (ccw) is U_j.
        let from = angs[(j + 1) % 3];
        let to = angs[(j + 2) % 3];
        let width = (to - from).rem_euclid(full);
        let off = (th - from).rem_euclid(full);
        if off > 1e-12 && off < width - 1e-12 {
            return j;
        }
    }
    panic!("direction lies on a barrier ray");
}

/// Algebraic intersection number of one 1-simplex with one oriented barrier.
pub fn crossing_weight(
    real: &Realization,
    seg: &Simplex1,
    barrier: &BarrierRef,
) -> Result<f64, FuchsianError> {
    Ok(enumerate_crossings(real, seg)?.get(barrier))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::slot_word;

    fn fn_data(lengths: &[f64], twists: &[f64]) -> FenchelNielsen {
        FenchelNielsen {
            curves: lengths
                .iter()
                .zip(twists)
                .map(|(&length, &twist)| CurveFN { length, twist })
                .collect(),
        }
    }

    pub fn default_fn() -> FenchelNielsen {
        fn_data(&[1.1, 0.9, 1.3], &[0.3, -0.4, 0.25])
    }

    #[test]
    fn pants_group_lengths_and_product() {
        for (la, lb, lc) in [(1.0, 1.0, 1.0), (0.6, 1.4, 2.2), (2.0, 0.5, 1.1)] {
            let (a, b, c) = pants_group(la, lb, lc).unwrap();
            let prod = &a * &b * &c;
            let id = Mat::identity(2, 2);
            let res = (&prod - &id).amax().min((&prod + &id).amax());
            assert!(res < 1e-10, "A B C = id fails: {res}");
            for (m, l) in [(&a, la), (&b, lb), (&c, lc)] {
                assert!((m.trace().abs() - 2.0 * (l / 2.0).cosh()).abs() < 1e-10);
                assert!((translation_length(m).unwrap() - l).abs() < 1e-9);
            }
            // Axes pairwise disjoint: endpoint pairs must not interleave.
            let ends = |m: &Mat| {
                let (att, rep) = fixed_vectors(m).unwrap();
                (boundary_angle(&rep), boundary_angle(&att))
            };
            let pairs = [ends(&a), ends(&b), ends(&c)];
            for i in 0..3 {
                for j in i + 1..3 {
                    let (x1, y1) = pairs[i];
                    let (x2, y2) = pairs[j];
                    assert!(!angles_interleave(x1, y1, x2, y2), "axes {i},{j} cross");
                }
            }
        }
    }

    fn angles_interleave(a1: f64, a2: f64, b1: f64, b2: f64) -> bool {
        // true if exactly one of b1, b2 lies on the ccw arc from a1 to a2
        let on_arc = |t: f64| {
            let full = 2.0 * std::f64::consts::PI;
            let rel = |x: f64| (x - a1).rem_euclid(full);
            rel(t) < rel(a2)
        };
        on_arc(b1) != on_arc(b2)
    }

    #[test]
    fn symmetric_pants_symmetric_traces() {
        let (a, b, c) = pants_group(1.3, 1.3, 1.3).unwrap();
        assert!((a.trace().abs() - b.trace().abs()).abs() < 1e-10);
        assert!((b.trace().abs() - c.trace().abs()).abs() < 1e-10);
    }

    #[test]
    fn principal_embed_properties() {
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let mut rng = StdRng::seed_from_u64(5);
        for n in 2..=6usize {
            assert!((principal_embed(&Mat::identity(2, 2), n) - Mat::identity(n, n)).amax() < 1e-12);
            let lam: f64 = 1.7;
            let d = principal_embed(&mat2(lam, 0.0, 0.0, 1.0 / lam), n);
            for i in 0..n {
                let want = lam.powi((n - 1) as i32 - 2 * i as i32);
                assert!((d[(i, i)] - want).abs() < 1e-10);
            }
            for _ in 0..20 {
                let m1 = random_sl2(&mut rng);
                let m2 = random_sl2(&mut rng);
                let lhs = principal_embed(&(&m1 * &m2), n);
                let rhs = principal_embed(&m1, n) * principal_embed(&m2, n);
                assert!((lhs - rhs).amax() < 1e-9 * 10.0, "multiplicativity n={n}");
            }
        }
    }

    fn random_sl2(rng: &mut rand::rngs::StdRng) -> Mat {
        use rand::Rng;
        loop {
            let m = mat2(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let d = m.determinant();
            if d.abs() > 0.05 {
                return &m / d.abs().sqrt() * d.signum();
            }
        }
    }

    #[test]
    fn eigenflag_basics() {
        let m = Mat::from_diagonal(&Vect::from_vec(vec![3.0, 2.0, 1.0]));
        let (att, rep) = eigenflag(&m).unwrap();
        assert!(att.approx_eq(&Flag::standard(3), 1e-12));
        assert!(rep.approx_eq(&Flag::reversed_standard(3), 1e-12));
        let (att_i, rep_i) = eigenflag(&m.try_inverse().unwrap()).unwrap();
        assert!(att_i.approx_eq(&rep, 1e-12));
        assert!(rep_i.approx_eq(&att, 1e-12));
    }

    #[test]
    fn eigenflag_of_embedding_is_veronese_osculating() {
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let mut rng = StdRng::seed_from_u64(11);
        for n in 2..=5usize {
            for _ in 0..10 {
                let m = loop {
                    let m = random_sl2(&mut rng);
                    if m.trace().abs() > 2.05 {
                        break m;
                    }
                };
                let (att2, _) = fixed_vectors(&m).unwrap();
                let big = principal_embed(&m, n);
                let (att, _) = eigenflag(&big).unwrap();
                let vf = veronese_flag(n, att2[0], att2[1]).unwrap();
                assert!(att.subspace_eq(&vf, 1e-6), "n={n}");
            }
        }
    }

    #[test]
    fn assembled_rep_is_consistent() {
        for graph in [PantsGraph::genus2_chain(), PantsGraph::genus2_separating()] {
            let tc = TriangulationComplex::build(graph).unwrap();
            let fnd = default_fn();
            let rep = assemble_fuchsian(&tc, &fnd, 2).unwrap();
            for rel in tc.relators() {
                assert!(rep.relator_residual(&rel) < 1e-9);
            }
            // Peripheral lengths match the prescribed curve lengths.
            for (ci, cd) in tc.curves.iter().enumerate() {
                for side in &cd.sides {
                    let m = rep.eval2(&slot_word(side.pants, side.slot));
                    let l = translation_length(&m).unwrap();
                    assert!(
                        (l - fnd.curves[ci].length).abs() < 1e-9,
                        "curve {ci}: {l} vs {}",
                        fnd.curves[ci].length
                    );
                }
            }
        }
    }

    #[test]
    fn twists_preserve_lengths() {
        let tc = TriangulationComplex::build(PantsGraph::genus2_chain()).unwrap();
        let l = [1.1, 0.9, 1.3];
        let r1 = assemble_fuchsian(&tc, &fn_data(&l, &[0.0, 0.0, 0.0]), 2).unwrap();
        let r2 = assemble_fuchsian(&tc, &fn_data(&l, &[0.7, -1.1, 0.2]), 2).unwrap();
        for (ci, cd) in tc.curves.iter().enumerate() {
            for rep in [&r1, &r2] {
                let m = rep.eval2(&slot_word(cd.sides[0].pants, cd.sides[0].slot));
                assert!((translation_length(&m).unwrap() - l[ci]).abs() < 1e-9);
            }
        }
        // and the representations differ
        let w = Word::gen(Gen::Stable(0));
        assert!((r1.eval2(&w) - r2.eval2(&w)).amax() > 1e-3);
    }

    #[test]
    fn so21_matches_boundary_action() {
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let mut rng = StdRng::seed_from_u64(17);
        use rand::Rng;
        for _ in 0..20 {
            let m = random_sl2(&mut rng);
            let g = so21_of(&m);
            // boundary: lightlike vectors map projectively
            let v = Vect::from_vec(vec![rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0)]).normalize();
            let ang = boundary_angle(&v);
            let lv = light_vector(ang);
            let moved = g * lv;
            let want = boundary_angle(&(&m * &v));
            let got = moved.y.atan2(moved.x);
            let d = (circle_point(got) - circle_point(want)).norm();
            assert!(d < 1e-9, "boundary action mismatch: {d}");
            // interior: preserves the form
            let p = HPoint::from_raw(Vector3::new(0.3, -0.2, 1.2));
            let q = g * p.0;
            assert!((minkowski(&q, &q) + 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn incenter_and_foot_are_equivariant() {
        use rand::rngs::StdRng;
        use rand::SeedableRng;
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..10 {
            let m = loop {
                let m = random_sl2(&mut rng);
                if m.trace().abs() > 2.05 {
                    break m;
                }
            };
            let g = so21_of(&m);
            let (a, b, c) = (0.3, 2.0, 4.4);
            let inc = ideal_incenter(a, b, c);
            let im = |ang: f64| {
                let lv = g * light_vector(ang);
                lv.y.atan2(lv.x)
            };
            let inc2 = ideal_incenter(im(a), im(b), im(c));
            let moved = HPoint::from_raw(g * inc.0);
            assert!((inc2.0 - moved.0).norm() < 1e-8);
            // foot of perpendicular is equivariant too
            let nrm = geodesic_normal(a, b);
            let foot = foot_on_geodesic(&inc, &nrm);
            let nrm2 = geodesic_normal(im(a), im(b));
            let foot2 = foot_on_geodesic(&inc2, &nrm2);
            let moved_foot = HPoint::from_raw(g * foot.0);
            assert!((foot2.0 - moved_foot.0).norm() < 1e-8);
            // the foot lies on the chord in the Klein picture
            let k = foot.klein();
            let side = chord_side(a, b, &k);
            assert!(side.abs() < 1e-9);
        }
    }

    #[test]
    fn incenter_inside_triangle() {
        let inc = ideal_incenter(0.0, 2.0, 4.0).klein();
        assert!(inc.norm() < 1.0);
        // inside: same side of each chord as the opposite vertex
        for (a, b, opp) in [(0.0, 2.0, 4.0), (2.0, 4.0, 0.0), (4.0, 0.0, 2.0)] {
            let s1 = chord_side(a, b, &inc);
            let s2 = chord_side(a, b, &circle_point(opp));
            assert!(s1 * s2 > 0.0);
        }
    }

    #[test]
    fn triangle_reps_are_ccw_and_fixed_points_interleave() {
        for graph in [PantsGraph::genus2_chain(), PantsGraph::genus2_separating()] {
            let tc = TriangulationComplex::build(graph).unwrap();
            let rep = assemble_fuchsian(&tc, &default_fn(), 2).unwrap();
            for t in tc.triangle_reps() {
                let inst = TriInst { word: Word::identity(), rep: t };
                let vs = tc.tri_vertices(&inst);
                let pts: Vec<_> = vs.iter().map(|v| circle_point(rep.angle(v))).collect();
                let cross = (pts[1] - pts[0]).x * (pts[2] - pts[0]).y
                    - (pts[1] - pts[0]).y * (pts[2] - pts[0]).x;
                assert!(cross > 0.0, "vertex list of {t:?} is not ccw");
            }
            // Per pants, the fixed-point pattern of Figure-9 type: the ideal
            // triangle (a-, b-, c-) is disjoint from each axis.
            for p in 0..tc.graph.num_pants() {
                for s in Slot::ALL {
                    let w = slot_word(p, s);
                    let m = rep.eval2(&w);
                    let (att, repel) = fixed_vectors(&m).unwrap();
                    let (ap, am) = (boundary_angle(&att), boundary_angle(&repel));
                    // the two fixed points are adjacent among the six: no
                    // other repelling fixed point separates them
                    for s2 in Slot::ALL {
                        if s2 != s {
                            let v = IdealVertex::base(p, s2, false);
                            let x = rep.angle(&v);
                            assert!(
                                !super::tests::angles_interleave(am, ap, x, x + 1e-9),
                                "axis of {s:?} separates {s2:?}-"
                            );
                        }
                    }
                    let _ = (ap, am);
                }
            }
        }
    }

    #[test]
    fn spiral_sequences_close_with_two_triangles() {
        for graph in [PantsGraph::genus2_chain(), PantsGraph::genus2_separating()] {
            let tc = TriangulationComplex::build(graph).unwrap();
            let rep = assemble_fuchsian(&tc, &default_fn(), 2).unwrap();
            for curve in 0..tc.num_closed_orbits() {
                for m in 0..2 {
                    let side = tc.bridge_side(curve, m);
                    let spiral = tc.spiral_sequence(curve, m, &side.gamma, &rep).unwrap();
                    assert_eq!(spiral.count(), 2, "curve {curve} side {m}");
                    assert_eq!(spiral.edges.len(), 2);
                    assert_eq!(spiral.fan_vertices.len(), 3);
                    // every shared edge contains p
                    for e in &spiral.edges {
                        let (u, v) = tc.edge_ends(e);
                        assert!(rep.point_eq(&u, &side.p) || rep.point_eq(&v, &side.p));
                    }
                    // T_{m,c} = {p, z_{c-1}, z_c}
                    for (c, t) in spiral.tris.iter().enumerate() {
                        let vs = tc.tri_vertices(t);
                        for want in [&spiral.p, &spiral.fan_vertices[c], &spiral.fan_vertices[c + 1]] {
                            assert!(vs.iter().any(|v| rep.point_eq(v, want)));
                        }
                    }
                    // walking toward gamma^{-1} also closes (reverse spiral)
                    let rev = tc.spiral_sequence(curve, m, &side.gamma.inverse(), &rep).unwrap();
                    assert_eq!(rev.count(), 2);
                }
            }
        }
    }

    #[test]
    fn realization_points_are_equivariant_and_incident() {
        let tc = TriangulationComplex::build(PantsGraph::genus2_chain()).unwrap();
        let rep = assemble_fuchsian(&tc, &default_fn(), 2).unwrap();
        let real = Realization::new(&tc, &rep);
        let w = Word::gen(Gen::PantsA(0)).mul(&Word::gen_pow(Gen::PantsB(1), -1));
        for e_rep in tc.isolated_reps() {
            let e0 = EdgeInst { word: Word::identity(), rep: e_rep };
            let e1 = EdgeInst { word: w.clone(), rep: e_rep };
            let q0 = real.q_point(&e0);
            let q1 = real.q_point(&e1);
            let moved = HPoint::from_raw(rep.so21(&w) * q0.0);
            assert!((moved.0 - q1.0).norm() < 1e-8, "q-point equivariance");
            // q lies on the chord of its edge
            let (u, v) = tc.edge_ends(&e0);
            assert!(chord_side(rep.angle(&u), rep.angle(&v), &q0.klein()).abs() < 1e-10);
        }
        for t_rep in tc.triangle_reps() {
            let t0 = TriInst { word: Word::identity(), rep: t_rep };
            let t1 = TriInst { word: w.clone(), rep: t_rep };
            let b0 = real.tri(&t0).base;
            let b1 = real.tri(&t1).base;
            let moved = HPoint::from_raw(rep.so21(&w) * b0.0);
            assert!((moved.0 - b1.0).norm() < 1e-8, "base point equivariance");
        }
        // bridges cross their closed edge exactly once, between the ends
        for curve in 0..tc.num_closed_orbits() {
            let b = real.bridge(curve);
            let (em, ep) = tc.closed_edge_ends(curve);
            let (am, ap) = (rep.angle(&em), rep.angle(&ep));
            let s1 = chord_side(am, ap, &b.q1);
            let s2 = chord_side(am, ap, &b.q2);
            assert!(s1 * s2 < 0.0, "bridge endpoints on opposite sides");
            assert!(chord_side(am, ap, &b.q_e.klein()).abs() < 1e-10);
            assert!(chord_side(am, ap, &b.q_e_prime.klein()).abs() < 1e-10);
        }
    }

    #[test]
    fn crossing_weights_basic_rules() {
        let tc = TriangulationComplex::build(PantsGraph::genus2_chain()).unwrap();
        let rep = assemble_fuchsian(&tc, &default_fn(), 2).unwrap();
        let real = Realization::new(&tc, &rep);
        let t0 = TriInst {
            word: Word::identity(),
            rep: crate::surface::TriRep { pants: 0, primed: false },
        };
        let rt = real.tri(&t0);
        let base = rt.base_klein();
        // A short segment inside one fragment crosses nothing.
        let dir0 = (rt.corners[0] - base).normalize() * 0.02;
        let mid01 = ((rt.corners[0] + rt.corners[1]) * 0.5 - base).normalize() * 0.01;
        let seg = Simplex1 {
            a: base + dir0 * 0.5 + mid01,
            b: base + dir0 * 0.9 + mid01,
            start_tri: t0.clone(),
            a_kind: EndpointKind::Interior,
            b_kind: EndpointKind::Interior,
        };
        let c = enumerate_crossings(&real, &seg).unwrap();
        assert!(c.entries.is_empty(), "disjoint segment: {:?}", c.entries);
        // A segment between two sectors crosses exactly one barrier with
        // weight +-1, and reversing it flips the sign.
        let into = |i: usize| (rt.corners[i] - base).normalize() * 0.05;
        let p_u2 = base + (into(0) + into(1)) * 0.5; // sector between rays 0,1 = U_2
        let p_u0 = base + (into(1) + into(2)) * 0.5; // U_0
        let seg = Simplex1 {
            a: p_u2,
            b: p_u0,
            start_tri: t0.clone(),
            a_kind: EndpointKind::Interior,
            b_kind: EndpointKind::Interior,
        };
        let fwd = enumerate_crossings(&real, &seg).unwrap();
        assert_eq!(fwd.entries.len(), 1);
        let (br, wgt) = fwd.entries[0].clone();
        assert_eq!(br, BarrierRef::NonEdge(t0.clone(), 1));
        assert!((wgt.abs() - 1.0).abs() < 1e-12);
        let seg_rev = Simplex1 {
            a: p_u0,
            b: p_u2,
            start_tri: t0.clone(),
            a_kind: EndpointKind::Interior,
            b_kind: EndpointKind::Interior,
        };
        let bwd = enumerate_crossings(&real, &seg_rev).unwrap();
        assert!((bwd.get(&br) + wgt).abs() < 1e-12, "reversal antisymmetry");
        // Legs from the source into a sector pick up the +-1/3 rule.
        let leg = Simplex1 {
            a: base,
            b: p_u2,
            start_tri: t0.clone(),
            a_kind: EndpointKind::AtSource(t0.clone()),
            b_kind: EndpointKind::Interior,
        };
        let c = enumerate_crossings(&real, &leg).unwrap();
        assert!((c.get(&BarrierRef::NonEdge(t0.clone(), 1)) - 1.0 / 3.0).abs() < 1e-12);
        assert!((c.get(&BarrierRef::NonEdge(t0.clone(), 0)) + 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.get(&BarrierRef::NonEdge(t0.clone(), 2)), 0.0);
    }

    #[test]
    fn source_loop_weights_are_equal_on_all_barriers() {
        // A loop around the barrier source meets the three barriers with one
        // common weight (+1 or -1); the cocycle value then vanishes because
        // the three barrier labels of a triangle sum to zero.
        let tc = TriangulationComplex::build(PantsGraph::genus2_separating()).unwrap();
        let rep = assemble_fuchsian(&tc, &default_fn(), 2).unwrap();
        let real = Realization::new(&tc, &rep);
        let t0 = TriInst {
            word: Word::identity(),
            rep: crate::surface::TriRep { pants: 1, primed: true },
        };
        let rt = real.tri(&t0);
        let base = rt.base_klein();
        let into = |i: usize| (rt.corners[i] - base).normalize() * 0.04;
        let pts = [
            base + (into(0) + into(1)) * 0.5,
            base + (into(1) + into(2)) * 0.5,
            base + (into(2) + into(0)) * 0.5,
        ];
        let mut total: HashMap<usize, f64> = HashMap::new();
        for k in 0..3 {
            let seg = Simplex1 {
                a: pts[k],
                b: pts[(k + 1) % 3],
                start_tri: t0.clone(),
                a_kind: EndpointKind::Interior,
                b_kind: EndpointKind::Interior,
            };
            for (br, w) in enumerate_crossings(&real, &seg).unwrap().entries {
                if let BarrierRef::NonEdge(_, i) = br {
                    *total.entry(i).or_insert(0.0) += w;
                }
            }
        }
        let w0 = total.get(&0).copied().unwrap_or(0.0);
        assert!((w0.abs() - 1.0).abs() < 1e-12, "loop winds once: {w0}");
        for i in 1..3 {
            let wi = total.get(&i).copied().unwrap_or(0.0);
            assert!((wi - w0).abs() < 1e-12, "barrier {i}: {wi} vs {w0}");
        }
        // Legs ending at the source also close up: going around through the
        // source accumulates thirds that sum to the same common weight.
        let t1 = TriInst {
            word: Word::identity(),
            rep: crate::surface::TriRep { pants: 0, primed: false },
        };
        let rt1 = real.tri(&t1);
        let base1 = rt1.base_klein();
        let into1 = |i: usize| (rt1.corners[i] - base1).normalize() * 0.04;
        let u2 = base1 + (into1(0) + into1(1)) * 0.5;
        let u0 = base1 + (into1(1) + into1(2)) * 0.5;
        let mut total = HashMap::new();
        let legs = [
            Simplex1 {
                a: u2,
                b: base1,
                start_tri: t1.clone(),
                a_kind: EndpointKind::Interior,
                b_kind: EndpointKind::AtSource(t1.clone()),
            },
            Simplex1 {
                a: base1,
                b: u0,
                start_tri: t1.clone(),
                a_kind: EndpointKind::AtSource(t1.clone()),
                b_kind: EndpointKind::Interior,
            },
            Simplex1 {
                a: u0,
                b: u2,
                start_tri: t1.clone(),
                a_kind: EndpointKind::Interior,
                b_kind: EndpointKind::Interior,
            },
        ];
        for seg in legs {
            for (br, w) in enumerate_crossings(&real, &seg).unwrap().entries {
                if let BarrierRef::NonEdge(_, i) = br {
                    *total.entry(i).or_insert(0.0) += w;
                }
            }
        }
        let w0 = total.get(&0).copied().unwrap_or(0.0);
        for i in 1..3 {
            let wi = total.get(&i).copied().unwrap_or(0.0);
            assert!((wi - w0).abs() < 1e-12, "source loop barrier {i}: {wi} vs {w0}");
        }
    }
}
