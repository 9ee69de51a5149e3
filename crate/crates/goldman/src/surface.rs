//! Combinatorics of a pants-adapted ideal triangulation on a closed surface
//! of genus g >= 2, described entirely in terms of orbit representatives and
//! group words.
//!
//! A pants decomposition with 2g-2 pairs of pants and 3g-3 gluing curves
//! induces, per pair of pants P with peripherals a, b, c (a b c = id, P to
//! the right of each oriented boundary):
//!
//! * closed edges: the axes {a-, a+}, {b-, b+}, {c-, c+}, one orbit per curve;
//! * isolated edges: {a-, b-}, {b-, c-}, {c-, a-};
//! * two triangle orbits: T_P = {a-, b-, c-} and T'_P = {a-, c-, c^{-1} b-};
//! * non-edge barriers: (vertex, triangle) pairs, three per triangle orbit.
//!
//! Counts: 4g-4 triangle orbits, 6g-6 isolated edge orbits, 3g-3 closed edge
//! orbits (9g-9 edge orbits in total), 12g-12 non-edge barrier orbits.
//!
//! Group elements are reduced words over the generators {a_P, b_P} per pants
//! plus one stable letter per gluing that closes a cycle of the pants graph.
//! Words are never rewritten with the surface-group relations; whenever an
//! equality of boundary points has to be decided, a [`VertexResolver`]
//! (realized by the hyperbolic layer) is consulted.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurfaceError {
    #[error("pants graph is invalid: {0}")]
    BadGraph(String),
    #[error("spiral walk around a closed edge did not close (cap {0})")]
    SpiralDiverged(usize),
}

// ---------------------------------------------------------------------------
// Pants graphs
// ---------------------------------------------------------------------------

/// One of the three boundary slots of a pair of pants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    A,
    B,
    C,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::A, Slot::B, Slot::C];
    pub fn index(self) -> usize {
        match self {
            Slot::A => 0,
            Slot::B => 1,
            Slot::C => 2,
        }
    }
}

/// A gluing identifies two boundary slots; `a` and `b` may belong to the
/// same pair of pants (a handle).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gluing {
    pub pants_a: usize,
    pub slot_a: Slot,
    pub pants_b: usize,
    pub slot_b: Slot,
}

/// A pants decomposition of a closed genus-g surface: 2g-2 pairs of pants
/// and 3g-3 gluings covering every boundary slot exactly once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PantsGraph {
    pub genus: usize,
    pub gluings: Vec<Gluing>,
}

impl PantsGraph {
    pub fn num_pants(&self) -> usize {
        2 * self.genus - 2
    }

    pub fn num_curves(&self) -> usize {
        3 * self.genus - 3
    }

    pub fn validate(&self) -> Result<(), SurfaceError> {
        if self.genus < 2 {
            return Err(SurfaceError::BadGraph("genus must be at least 2".into()));
        }
        if self.gluings.len() != self.num_curves() {
            return Err(SurfaceError::BadGraph(format!(
                "expected {} gluings, found {}",
                self.num_curves(),
                self.gluings.len()
            )));
        }
        let np = self.num_pants();
        let mut seen = vec![false; 3 * np];
        for g in &self.gluings {
            for (p, s) in [(g.pants_a, g.slot_a), (g.pants_b, g.slot_b)] {
                if p >= np {
                    return Err(SurfaceError::BadGraph(format!("pants index {p} out of range")));
                }
                let idx = 3 * p + s.index();
                if seen[idx] {
                    return Err(SurfaceError::BadGraph(format!(
                        "slot {s:?} of pants {p} glued twice"
                    )));
                }
                seen[idx] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(SurfaceError::BadGraph("unglued boundary slot".into()));
        }
        // Connectivity over the pants graph.
        let mut root: Vec<usize> = (0..np).collect();
        fn find(root: &mut Vec<usize>, mut i: usize) -> usize {
            while root[i] != i {
                root[i] = root[root[i]];
                i = root[i];
            }
            i
        }
        for g in &self.gluings {
            let (ra, rb) = (find(&mut root, g.pants_a), find(&mut root, g.pants_b));
            root[ra] = rb;
        }
        let r0 = find(&mut root, 0);
        for p in 1..np {
            if find(&mut root, p) != r0 {
                return Err(SurfaceError::BadGraph("pants graph is disconnected".into()));
            }
        }
        Ok(())
    }

    /// Genus-2 decomposition along three non-separating curves joining the
    /// same two pairs of pants ("theta" graph).
    pub fn genus2_chain() -> PantsGraph {
        PantsGraph {
            genus: 2,
            gluings: vec![
                Gluing { pants_a: 0, slot_a: Slot::A, pants_b: 1, slot_b: Slot::A },
                Gluing { pants_a: 0, slot_a: Slot::B, pants_b: 1, slot_b: Slot::B },
                Gluing { pants_a: 0, slot_a: Slot::C, pants_b: 1, slot_b: Slot::C },
            ],
        }
    }

    /// Genus-2 decomposition with one separating curve and a handle on each
    /// side ("dumbbell" graph); exercises self-glued pants.
    pub fn genus2_separating() -> PantsGraph {
        PantsGraph {
            genus: 2,
            gluings: vec![
                Gluing { pants_a: 0, slot_a: Slot::A, pants_b: 1, slot_b: Slot::A },
                Gluing { pants_a: 0, slot_a: Slot::B, pants_b: 0, slot_b: Slot::C },
                Gluing { pants_a: 1, slot_a: Slot::B, pants_b: 1, slot_b: Slot::C },
            ],
        }
    }
}

// ---------------------------------------------------------------------------
// Words over the chosen generating set
// ---------------------------------------------------------------------------

/// Generators: a_P and b_P per pair of pants, plus one stable letter per
/// gluing that closes a cycle of the pants graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gen {
    PantsA(usize),
    PantsB(usize),
    Stable(usize),
}

/// A freely reduced word; the identity is the empty word.  Products are only
/// reduced freely, never with surface-group relations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Word(Vec<(Gen, i32)>);

impl Word {
    pub fn identity() -> Word {
        Word(Vec::new())
    }

    pub fn gen(g: Gen) -> Word {
        Word(vec![(g, 1)])
    }

    pub fn gen_pow(g: Gen, e: i32) -> Word {
        if e == 0 {
            Word::identity()
        } else {
            Word(vec![(g, e)])
        }
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[(Gen, i32)] {
        &self.0
    }

    pub fn mul(&self, other: &Word) -> Word {
        let mut out = self.0.clone();
        for &(g, e) in &other.0 {
            push_reduced(&mut out, g, e);
        }
        Word(out)
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&(g, e)| (g, -e)).collect())
    }

    /// by . self . by^{-1}
    pub fn conjugate(&self, by: &Word) -> Word {
        by.mul(self).mul(&by.inverse())
    }

    pub fn pow(&self, e: i32) -> Word {
        let mut out = Word::identity();
        let base = if e >= 0 { self.clone() } else { self.inverse() };
        for _ in 0..e.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }
}

fn push_reduced(word: &mut Vec<(Gen, i32)>, g: Gen, e: i32) {
    if e == 0 {
        return;
    }
    if let Some(last) = word.last_mut() {
        if last.0 == g {
            last.1 += e;
            if last.1 == 0 {
                word.pop();
            }
            return;
        }
    }
    word.push((g, e));
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (g, e) in &self.0 {
            let name = match g {
                Gen::PantsA(p) => format!("a{p}"),
                Gen::PantsB(p) => format!("b{p}"),
                Gen::Stable(c) => format!("t{c}"),
            };
            if *e == 1 {
                write!(f, "{name}.")?;
            } else {
                write!(f, "{name}^{e}.")?;
            }
        }
        Ok(())
    }
}

/// Peripheral word of a boundary slot: a, b, or c = (ab)^{-1} = b^{-1}a^{-1}.
pub fn slot_word(pants: usize, slot: Slot) -> Word {
    match slot {
        Slot::A => Word::gen(Gen::PantsA(pants)),
        Slot::B => Word::gen(Gen::PantsB(pants)),
        Slot::C => {
            Word::gen_pow(Gen::PantsB(pants), -1).mul(&Word::gen_pow(Gen::PantsA(pants), -1))
        }
    }
}

// ---------------------------------------------------------------------------
// Ideal vertices, triangles, edges
// ---------------------------------------------------------------------------

/// A fixed point symbol: the attracting (+) or repelling (-) fixed point of
/// the peripheral element of a boundary slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasePoint {
    pub pants: usize,
    pub slot: Slot,
    pub attracting: bool,
}

/// A point of the boundary circle: `word` applied to a base fixed point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IdealVertex {
    pub word: Word,
    pub base: BasePoint,
}

impl IdealVertex {
    pub fn base(pants: usize, slot: Slot, attracting: bool) -> IdealVertex {
        IdealVertex {
            word: Word::identity(),
            base: BasePoint { pants, slot, attracting },
        }
    }

    pub fn translate(&self, by: &Word) -> IdealVertex {
        IdealVertex { word: by.mul(&self.word), base: self.base }
    }
}

/// Triangle orbit representative: T_P (unprimed) or T'_P (primed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriRep {
    pub pants: usize,
    pub primed: bool,
}

/// Isolated edge orbit kinds within a pair of pants, ordered as they appear
/// around T_P: AB joins a- to b-, BC joins b- to c-, CA joins c- to a-.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IsoKind {
    AB,
    BC,
    CA,
}

impl IsoKind {
    pub const ALL: [IsoKind; 3] = [IsoKind::AB, IsoKind::BC, IsoKind::CA];
    pub fn index(self) -> usize {
        match self {
            IsoKind::AB => 0,
            IsoKind::BC => 1,
            IsoKind::CA => 2,
        }
    }
}

/// Edge orbit representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeRep {
    Isolated { pants: usize, kind: IsoKind },
    Closed { curve: usize },
}

/// A concrete triangle in the universal cover: `word` applied to `rep`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriInst {
    pub word: Word,
    pub rep: TriRep,
}

/// A concrete edge: `word` applied to `rep`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeInst {
    pub word: Word,
    pub rep: EdgeRep,
}

/// Decides equality of ideal boundary points.  Implemented by the hyperbolic
/// realization; words alone cannot decide it because the surface group has
/// relations the word algebra does not rewrite.
pub trait VertexResolver {
    fn point_eq(&self, a: &IdealVertex, b: &IdealVertex) -> bool;
}

// ---------------------------------------------------------------------------
// The triangulation complex
// ---------------------------------------------------------------------------

/// One side of a gluing curve: the pair of pants on that side, the boundary
/// slot, and the word aligning that pants' standard triangle with the
/// canonical lift of the curve.
#[derive(Debug, Clone)]
pub struct CurveSide {
    pub pants: usize,
    pub slot: Slot,
    pub aligner: Word,
}

/// Per-curve data: the peripheral of side 0 whose axis is the canonical
/// lift, both sides, and the orientation flag for r(e).
#[derive(Debug, Clone)]
pub struct CurveData {
    pub eta: Word,
    pub sides: [CurveSide; 2],
    /// If true, r(e) runs from eta- to eta+ (the default).
    pub forward: bool,
}

/// The pants-adapted triangulation complex: orbit representatives for
/// triangles, edges and barriers, gluing-curve data, and the adjacency
/// tables that drive all walking.
#[derive(Debug, Clone)]
pub struct TriangulationComplex {
    pub graph: PantsGraph,
    pub curves: Vec<CurveData>,
    /// Gluing indices that received a stable letter (cycle-closing gluings);
    /// position in this list is the stable-letter index.
    pub stable_letters: Vec<usize>,
    /// Spanning-tree parent relation used to position the pants groups:
    /// parent[p] = (parent pants, gluing index) for every non-root pants.
    pub tree_parent: Vec<Option<(usize, usize)>>,
}

impl TriangulationComplex {
    /// Builds the complex: picks a spanning tree of the pants graph (fixing
    /// the inclusions pi_1(P) < Gamma), assigns stable letters to the other
    /// gluings, and records per-curve side data.
    pub fn build(graph: PantsGraph) -> Result<TriangulationComplex, SurfaceError> {
        graph.validate()?;
        let np = graph.num_pants();
        let mut tree_parent: Vec<Option<(usize, usize)>> = vec![None; np];
        let mut visited = vec![false; np];
        let mut queue = std::collections::VecDeque::new();
        visited[0] = true;
        queue.push_back(0usize);
        let mut tree_gluing = vec![false; graph.gluings.len()];
        while let Some(p) = queue.pop_front() {
            for (ci, g) in graph.gluings.iter().enumerate() {
                for (here, there) in [
                    ((g.pants_a, g.slot_a), (g.pants_b, g.slot_b)),
                    ((g.pants_b, g.slot_b), (g.pants_a, g.slot_a)),
                ] {
                    if here.0 == p && !visited[there.0] {
                        visited[there.0] = true;
                        tree_parent[there.0] = Some((p, ci));
                        tree_gluing[ci] = true;
                        queue.push_back(there.0);
                    }
                }
            }
        }
        let stable_letters: Vec<usize> =
            (0..graph.gluings.len()).filter(|&c| !tree_gluing[c]).collect();
        let mut curves = Vec::with_capacity(graph.gluings.len());
        for (ci, g) in graph.gluings.iter().enumerate() {
            let eta = slot_word(g.pants_a, g.slot_a);
            let aligner_b = if tree_gluing[ci] {
                Word::identity()
            } else {
                let t_idx = stable_letters.iter().position(|&c| c == ci).unwrap();
                Word::gen(Gen::Stable(t_idx))
            };
            curves.push(CurveData {
                eta,
                sides: [
                    CurveSide { pants: g.pants_a, slot: g.slot_a, aligner: Word::identity() },
                    CurveSide { pants: g.pants_b, slot: g.slot_b, aligner: aligner_b },
                ],
                forward: true,
            });
        }
        Ok(TriangulationComplex { graph, curves, stable_letters, tree_parent })
    }

    /// Flips the orientation r(e) of one curve; the default runs from eta-
    /// to eta+.
    pub fn flip_orientation(&mut self, curve: usize) {
        self.curves[curve].forward = !self.curves[curve].forward;
    }

    pub fn num_triangle_orbits(&self) -> usize {
        2 * self.graph.num_pants()
    }

    pub fn num_isolated_orbits(&self) -> usize {
        3 * self.graph.num_pants()
    }

    pub fn num_closed_orbits(&self) -> usize {
        self.curves.len()
    }

    pub fn num_edge_orbits(&self) -> usize {
        self.num_isolated_orbits() + self.num_closed_orbits()
    }

    pub fn num_barrier_orbits(&self) -> usize {
        3 * self.num_triangle_orbits()
    }

    pub fn triangle_reps(&self) -> Vec<TriRep> {
        let mut v = Vec::new();
        for p in 0..self.graph.num_pants() {
            v.push(TriRep { pants: p, primed: false });
            v.push(TriRep { pants: p, primed: true });
        }
        v
    }

    pub fn isolated_reps(&self) -> Vec<EdgeRep> {
        let mut v = Vec::new();
        for p in 0..self.graph.num_pants() {
            for kind in IsoKind::ALL {
                v.push(EdgeRep::Isolated { pants: p, kind });
            }
        }
        v
    }

    /// Counterclockwise vertex list of a triangle orbit representative:
    /// T_P = (a-, b-, c-), T'_P = (a-, c-, c^{-1} b-).  Position i of T'_P
    /// pairs with position perm(i) of T_P: 0<->0, 1<->2, 2<->1.
    pub fn rep_vertices(&self, rep: TriRep) -> [IdealVertex; 3] {
        let p = rep.pants;
        let a = IdealVertex::base(p, Slot::A, false);
        let b = IdealVertex::base(p, Slot::B, false);
        let c = IdealVertex::base(p, Slot::C, false);
        if !rep.primed {
            [a, b, c]
        } else {
            let gamma_inv = slot_word(p, Slot::C).inverse();
            [
                a,
                c,
                IdealVertex {
                    word: gamma_inv,
                    base: BasePoint { pants: p, slot: Slot::B, attracting: false },
                },
            ]
        }
    }

    pub fn tri_vertices(&self, t: &TriInst) -> [IdealVertex; 3] {
        let vs = self.rep_vertices(t.rep);
        [
            vs[0].translate(&t.word),
            vs[1].translate(&t.word),
            vs[2].translate(&t.word),
        ]
    }

    /// Edges of a triangle orbit representative; entry i joins ccw vertices
    /// i and i+1 (mod 3).
    pub fn rep_edges(&self, rep: TriRep) -> [EdgeInst; 3] {
        let p = rep.pants;
        let iso = |kind: IsoKind, word: Word| EdgeInst {
            word,
            rep: EdgeRep::Isolated { pants: p, kind },
        };
        if !rep.primed {
            [
                iso(IsoKind::AB, Word::identity()),
                iso(IsoKind::BC, Word::identity()),
                iso(IsoKind::CA, Word::identity()),
            ]
        } else {
            // (a-, c-) is CA; (c-, c^{-1}b-) = c^{-1}.BC; (c^{-1}b- = a.b-, a-) = a.AB.
            [
                iso(IsoKind::CA, Word::identity()),
                iso(IsoKind::BC, slot_word(p, Slot::C).inverse()),
                iso(IsoKind::AB, slot_word(p, Slot::A)),
            ]
        }
    }

    pub fn tri_edges(&self, t: &TriInst) -> [EdgeInst; 3] {
        let es = self.rep_edges(t.rep);
        es.map(|e| EdgeInst { word: t.word.mul(&e.word), rep: e.rep })
    }

    /// The two triangles adjacent to an isolated edge orbit representative,
    /// each as (translate word u, triangle rep R, edge index i): the orbit
    /// representative equals u . (edge i of R).
    pub fn isolated_adjacency(&self, pants: usize, kind: IsoKind) -> [(Word, TriRep, usize); 2] {
        let t = TriRep { pants, primed: false };
        let tp = TriRep { pants, primed: true };
        match kind {
            // AB = a^{-1} . (edge 2 of T'_P)
            IsoKind::AB => [
                (Word::identity(), t, 0),
                (slot_word(pants, Slot::A).inverse(), tp, 2),
            ],
            // BC = c . (edge 1 of T'_P)
            IsoKind::BC => [
                (Word::identity(), t, 1),
                (slot_word(pants, Slot::C), tp, 1),
            ],
            IsoKind::CA => [(Word::identity(), t, 2), (Word::identity(), tp, 0)],
        }
    }

    /// Triangle adjacent to `t` across its edge with index `edge_idx`, and
    /// the index of the shared edge in the neighbor's edge list.
    pub fn neighbor(&self, t: &TriInst, edge_idx: usize) -> (TriInst, usize) {
        let edge = &self.tri_edges(t)[edge_idx];
        let (pants, kind) = match edge.rep {
            EdgeRep::Isolated { pants, kind } => (pants, kind),
            EdgeRep::Closed { .. } => panic!("cannot walk across a closed edge"),
        };
        let adj = self.isolated_adjacency(pants, kind);
        let ours = adj
            .iter()
            .position(|(_, r, i)| *r == t.rep && *i == edge_idx)
            .expect("edge adjacency table inconsistent");
        let (u, r, i) = &adj[1 - ours];
        // The entry states: orbit rep edge = u . (edge i of R at identity),
        // so the triangle containing edge.word . rep on that side is
        // (edge.word . u, R).
        let w_prime = edge.word.mul(u);
        (TriInst { word: w_prime, rep: *r }, *i)
    }

    /// Bridge data on side m (0 or 1) of the canonical lift of a curve.
    pub fn bridge_side(&self, curve: usize, m: usize) -> BridgeSide {
        let cd = &self.curves[curve];
        let side = &cd.sides[m];
        let tri = TriInst {
            word: side.aligner.clone(),
            rep: TriRep { pants: side.pants, primed: false },
        };
        let p = IdealVertex {
            word: side.aligner.clone(),
            base: BasePoint { pants: side.pants, slot: side.slot, attracting: false },
        };
        let q = IdealVertex {
            word: side.aligner.clone(),
            base: BasePoint { pants: side.pants, slot: side.slot, attracting: true },
        };
        // gamma_m has attracting fixed point q_m and repelling p_m.
        let gamma = slot_word(side.pants, side.slot).conjugate(&side.aligner);
        let pv = side.slot.index();
        // The bridge enters the fragmented triangle bounded by the edge from
        // vertex pv+2 to pv (the edge of T_P facing the closed-edge axis).
        BridgeSide { tri, p, q, gamma, p_vertex: pv, entry_edge_idx: (pv + 2) % 3 }
    }

    pub fn closed_edge(&self, curve: usize) -> EdgeInst {
        EdgeInst { word: Word::identity(), rep: EdgeRep::Closed { curve } }
    }

    /// Endpoints (eta-, eta+) of the canonical lift of a curve.
    pub fn closed_edge_ends(&self, curve: usize) -> (IdealVertex, IdealVertex) {
        let s = &self.curves[curve].sides[0];
        (
            IdealVertex::base(s.pants, s.slot, false),
            IdealVertex::base(s.pants, s.slot, true),
        )
    }

    /// Oriented pair r(e) of the canonical lift, honoring the orientation
    /// knob.
    pub fn closed_edge_oriented(&self, curve: usize) -> (IdealVertex, IdealVertex) {
        let (minus, plus) = self.closed_edge_ends(curve);
        if self.curves[curve].forward {
            (minus, plus)
        } else {
            (plus, minus)
        }
    }

    /// Walks the fan of triangles around p_m, from the bridge triangle on
    /// side m to its `target_gamma`-translate.  Returns the triangles
    /// T_{m,1..C}, the shared edges e_{m,1..C}, and the fan vertices
    /// z_{m,0..C} with T_{m,c} = {p, z_{m,c-1}, z_{m,c}}.
    pub fn spiral_sequence(
        &self,
        curve: usize,
        m: usize,
        target_gamma: &Word,
        resolver: &impl VertexResolver,
    ) -> Result<SpiralData, SurfaceError> {
        let side = self.bridge_side(curve, m);
        let start = side.tri.clone();
        let target = TriInst { word: target_gamma.mul(&start.word), rep: start.rep };
        let target_verts = self.tri_vertices(&target);
        let cap = 16 + 10 * (target_gamma.letters().len() + 4);
        // The two edges of the start triangle at p are p_vertex and
        // p_vertex + 2 (mod 3); try both directions, the wrong one leaves
        // the fan or reaches the gamma-inverse translate.
        'dir: for first_exit in [side.p_vertex, (side.p_vertex + 2) % 3] {
            let mut tris = vec![start.clone()];
            let mut edges: Vec<EdgeInst> = Vec::new();
            let mut cur = start.clone();
            let mut exit = first_exit;
            for _ in 0..cap {
                let exit_edge = self.tri_edges(&cur)[exit].clone();
                let (next, in_idx) = self.neighbor(&cur, exit);
                let nverts = self.tri_vertices(&next);
                let mut next_pv = None;
                for (vi, v) in nverts.iter().enumerate() {
                    if resolver.point_eq(v, &side.p) {
                        next_pv = Some(vi);
                        break;
                    }
                }
                let next_pv = match next_pv {
                    Some(v) => v,
                    None => continue 'dir,
                };
                edges.push(exit_edge);
                let closed = (0..3).all(|i| resolver.point_eq(&nverts[i], &target_verts[i]));
                if closed {
                    let mut zs = Vec::with_capacity(edges.len() + 1);
                    let first_verts = self.tri_vertices(&tris[0]);
                    let e0_ends = self.edge_ends(&edges[0]);
                    for (vi, v) in first_verts.iter().enumerate() {
                        if vi != side.p_vertex
                            && !resolver.point_eq(v, &e0_ends.0)
                            && !resolver.point_eq(v, &e0_ends.1)
                        {
                            zs.push(v.clone());
                        }
                    }
                    for e in &edges {
                        let (u, v) = self.edge_ends(e);
                        let z = if resolver.point_eq(&u, &side.p) { v } else { u };
                        zs.push(z);
                    }
                    return Ok(SpiralData {
                        tris,
                        edges,
                        fan_vertices: zs,
                        p: side.p.clone(),
                    });
                }
                // Exit the next triangle across its other p-edge.
                let e_at_p = [next_pv, (next_pv + 2) % 3];
                exit = if in_idx == e_at_p[0] { e_at_p[1] } else { e_at_p[0] };
                cur = next;
                tris.push(cur.clone());
            }
        }
        Err(SurfaceError::SpiralDiverged(cap))
    }

    /// Oriented endpoints r(e) of an edge instance.  Isolated edges carry
    /// the fixed orientations (b- -> a-), (c- -> b-), (a- -> c-) within each
    /// pair of pants; closed edges honor the per-curve orientation knob.
    pub fn oriented_edge_ends(&self, e: &EdgeInst) -> (IdealVertex, IdealVertex) {
        match e.rep {
            EdgeRep::Isolated { pants, kind } => {
                let (from, to) = match kind {
                    IsoKind::AB => (Slot::B, Slot::A),
                    IsoKind::BC => (Slot::C, Slot::B),
                    IsoKind::CA => (Slot::A, Slot::C),
                };
                (
                    IdealVertex::base(pants, from, false).translate(&e.word),
                    IdealVertex::base(pants, to, false).translate(&e.word),
                )
            }
            EdgeRep::Closed { curve } => {
                let (u, v) = self.closed_edge_oriented(curve);
                (u.translate(&e.word), v.translate(&e.word))
            }
        }
    }

    /// Endpoints of an edge instance, as ideal vertices (in the rep's
    /// canonical order, translated).
    pub fn edge_ends(&self, e: &EdgeInst) -> (IdealVertex, IdealVertex) {
        match e.rep {
            EdgeRep::Isolated { pants, kind } => {
                let (s1, s2) = match kind {
                    IsoKind::AB => (Slot::A, Slot::B),
                    IsoKind::BC => (Slot::B, Slot::C),
                    IsoKind::CA => (Slot::C, Slot::A),
                };
                (
                    IdealVertex::base(pants, s1, false).translate(&e.word),
                    IdealVertex::base(pants, s2, false).translate(&e.word),
                )
            }
            EdgeRep::Closed { curve } => {
                let (a, b) = self.closed_edge_ends(curve);
                (a.translate(&e.word), b.translate(&e.word))
            }
        }
    }

    /// Relators whose evaluation must be the identity in any representation
    /// assembled for this complex: one per gluing curve.
    pub fn relators(&self) -> Vec<Word> {
        let mut rels = Vec::new();
        for (ci, cd) in self.curves.iter().enumerate() {
            let wa = slot_word(cd.sides[0].pants, cd.sides[0].slot);
            let wb = slot_word(cd.sides[1].pants, cd.sides[1].slot);
            if self.stable_letters.contains(&ci) {
                let t = &cd.sides[1].aligner;
                // t wb t^{-1} wa = 1
                rels.push(t.mul(&wb).mul(&t.inverse()).mul(&wa));
            } else {
                // wb = wa^{-1} exactly (tree gluing)
                rels.push(wb.mul(&wa));
            }
        }
        rels
    }
}

/// One side of a bridge across a closed edge.
#[derive(Debug, Clone)]
pub struct BridgeSide {
    pub tri: TriInst,
    /// Vertex of the bridge triangle on the curve axis.
    pub p: IdealVertex,
    /// The other end of the axis.
    pub q: IdealVertex,
    /// Primitive element with attracting fixed point q and repelling p.
    pub gamma: Word,
    /// Index of p in the triangle's ccw vertex list.
    pub p_vertex: usize,
    /// Edge of the bridge triangle entered by the bridge segment (the edge
    /// from p to the next ccw vertex).
    pub entry_edge_idx: usize,
}

/// Result of a spiral walk around the vertex p of a closed edge.
#[derive(Debug, Clone)]
pub struct SpiralData {
    /// Triangles T_{m,1}, ..., T_{m,C}; the successor of the last is the
    /// target translate of the first.
    pub tris: Vec<TriInst>,
    /// Shared edges e_{m,1}, ..., e_{m,C}; all contain p.
    pub edges: Vec<EdgeInst>,
    /// z_{m,0}, ..., z_{m,C}: T_{m,c} = {p, z_{m,c-1}, z_{m,c}}.
    pub fan_vertices: Vec<IdealVertex>,
    pub p: IdealVertex,
}

impl SpiralData {
    pub fn count(&self) -> usize {
        self.tris.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_algebra_basics() {
        let a = Word::gen(Gen::PantsA(0));
        let b = Word::gen(Gen::PantsB(0));
        let w = a.mul(&b).mul(&b.inverse()).mul(&a.inverse());
        assert!(w.is_identity());
        let c = a.mul(&b);
        assert_eq!(c.conjugate(&Word::identity()), c);
        // Reduction is idempotent: rebuilding from letters changes nothing.
        let mut rebuilt = Word::identity();
        for &(g, e) in c.letters() {
            rebuilt = rebuilt.mul(&Word::gen_pow(g, e));
        }
        assert_eq!(rebuilt, c);
        assert_eq!(a.pow(3).mul(&a.pow(-3)), Word::identity());
    }

    #[test]
    fn graph_validation_and_counts() {
        for g in [PantsGraph::genus2_chain(), PantsGraph::genus2_separating()] {
            g.validate().unwrap();
            let tc = TriangulationComplex::build(g).unwrap();
            assert_eq!(tc.num_triangle_orbits(), 4);
            assert_eq!(tc.num_isolated_orbits(), 6);
            assert_eq!(tc.num_closed_orbits(), 3);
            assert_eq!(tc.num_edge_orbits(), 9);
            assert_eq!(tc.num_barrier_orbits(), 12);
        }
        let g3 = PantsGraph {
            genus: 3,
            gluings: vec![
                Gluing { pants_a: 0, slot_a: Slot::A, pants_b: 1, slot_b: Slot::A },
                Gluing { pants_a: 0, slot_a: Slot::B, pants_b: 1, slot_b: Slot::B },
                Gluing { pants_a: 0, slot_a: Slot::C, pants_b: 2, slot_b: Slot::A },
                Gluing { pants_a: 1, slot_a: Slot::C, pants_b: 3, slot_b: Slot::A },
                Gluing { pants_a: 2, slot_a: Slot::B, pants_b: 3, slot_b: Slot::B },
                Gluing { pants_a: 2, slot_a: Slot::C, pants_b: 3, slot_b: Slot::C },
            ],
        };
        g3.validate().unwrap();
        let tc = TriangulationComplex::build(g3).unwrap();
        assert_eq!(tc.num_triangle_orbits(), 8);
        assert_eq!(tc.num_isolated_orbits(), 12);
        assert_eq!(tc.num_closed_orbits(), 6);
        assert_eq!(tc.num_edge_orbits(), 18);
    }

    #[test]
    fn bad_graphs_rejected() {
        let mut g = PantsGraph::genus2_chain();
        g.gluings[2].pants_b = 0;
        g.gluings[2].slot_b = Slot::A; // slot A of pants 0 glued twice
        assert!(g.validate().is_err());
        let g = PantsGraph { genus: 2, gluings: vec![] };
        assert!(g.validate().is_err());
    }

    /// Word-level equality of boundary points that also recognizes
    /// translates by powers of the base's own peripheral (which fix it).
    fn loose_eq(u: &IdealVertex, v: &IdealVertex) -> bool {
        if u.base != v.base {
            return false;
        }
        let peri = slot_word(u.base.pants, u.base.slot);
        (-3..=3).any(|j| u.word == v.word.mul(&peri.pow(j)))
    }

    #[test]
    fn triangle_edges_bound_their_vertices() {
        let tc = TriangulationComplex::build(PantsGraph::genus2_chain()).unwrap();
        for rep in tc.triangle_reps() {
            let t = TriInst { word: Word::identity(), rep };
            let vs = tc.tri_vertices(&t);
            let es = tc.tri_edges(&t);
            for i in 0..3 {
                let (u, v) = tc.edge_ends(&es[i]);
                let want = [vs[i].clone(), vs[(i + 1) % 3].clone()];
                assert!(
                    (loose_eq(&u, &want[0]) && loose_eq(&v, &want[1]))
                        || (loose_eq(&u, &want[1]) && loose_eq(&v, &want[0])),
                    "rep {rep:?} edge {i}: got {u:?}, {v:?}"
                );
            }
        }
    }

    #[test]
    fn isolated_adjacency_covers_all_sides() {
        let tc = TriangulationComplex::build(PantsGraph::genus2_separating()).unwrap();
        // Every (triangle rep, edge index) pair appears exactly once across
        // the adjacency tables of a pants' three isolated edges.
        for p in 0..tc.graph.num_pants() {
            let mut seen = std::collections::HashSet::new();
            for kind in IsoKind::ALL {
                for (_, r, i) in tc.isolated_adjacency(p, kind) {
                    assert!(seen.insert((r, i)), "duplicate side ({r:?},{i})");
                }
            }
            assert_eq!(seen.len(), 6);
        }
    }

    #[test]
    fn neighbor_is_involutive() {
        let tc = TriangulationComplex::build(PantsGraph::genus2_chain()).unwrap();
        for rep in tc.triangle_reps() {
            let t = TriInst { word: Word::gen(Gen::PantsA(0)), rep };
            for e in 0..3 {
                let (n, i) = tc.neighbor(&t, e);
                let (back, j) = tc.neighbor(&n, i);
                assert_eq!(back, t);
                assert_eq!(j, e);
            }
        }
    }
}
