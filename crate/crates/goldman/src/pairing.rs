//! The Goldman symplectic pairing through the cup product on a finite
//! triangulation.
//!
//! The surface is triangulated by two triangles inside each pair of pants
//! (the q-point triangles of T_P and T'_P) and four triangles per half
//! cylinder around each gluing curve, 28(g-1) in total.  Labelling cocycles
//! are evaluated on the oriented edges by decomposing each edge into
//! elementary pieces:
//!
//! * type A: a segment inside a closed edge; its value counts the bridge
//!   translates it crosses (half weights at endpoints on a bridge) times
//!   the diagonal correction K0;
//! * type B: half of a bridge, from an endpoint to the crossing with the
//!   closed edge; its value is +-K1 plus a half-weighted closed edge label;
//! * type C: a segment avoiding closed edges; its value is the finite
//!   weighted sum of barrier labels along the walk.
//!
//! With mu evaluated on the lifts e_{delta,1}, e_{delta,2} chosen by a
//! global vertex enumeration, the pairing is
//!
//!   omega(L1, L2) = sum over triangles sgn(delta)
//!                   tr( mu_1(e_{delta,1}) mu_2(e_{delta,2}) ).
//!
//! The vertex enumeration puts interior vertices first (per pants in the
//! order q_bc < q_ab < q_ca) and then, per curve, the bridge vertex before
//! the auxiliary one; sgn(delta) is +1 when the enumeration goes clockwise
//! around the triangle.

use crate::flagkit::Mat;
use crate::fuchsian::{
    self, EndpointKind, HitchinRep, Realization, Simplex1,
};
use crate::labelling::{
    self, Evaluator, Labelling, LabellingError, SpecialKind,
};
use crate::surface::{EdgeInst, EdgeRep, IsoKind, Slot, TriInst, TriangulationComplex, Word};
use nalgebra::Vector2;
use std::collections::HashMap;
use std::sync::Mutex;

type V2 = Vector2<f64>;

/// One elementary piece of a decomposed triangulation edge.
#[derive(Debug, Clone)]
pub enum Piece {
    /// Finite barrier-crossing segment.
    C(Simplex1),
    /// Bridge half on the given side of a curve, translated by a power of
    /// the curve primitive; runs from the bridge endpoint to the closed
    /// edge when `toward_edge`.
    B {
        curve: usize,
        side: usize,
        translate: Word,
        toward_edge: bool,
    },
    /// Segment inside the closed edge from position `pa` to `pb`, in units
    /// of the forward primitive (integers are bridge crossings).
    A { curve: usize, pa: f64, pb: f64 },
}

/// An oriented edge lift of the finite triangulation with its canonical
/// decomposition into elementary pieces.
#[derive(Debug, Clone)]
pub struct Lift {
    pub a: V2,
    pub b: V2,
    pub pieces: Vec<Piece>,
}

/// Where a triangle of the finite triangulation lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TTriKind {
    Internal { pants: usize, primed: bool },
    Cylinder { curve: usize, side: usize, pos: usize },
}

/// A triangle of the finite triangulation: global vertex ids, Klein corners
/// of the chosen lift, the cup-product sign, and its three boundary edges
/// as (lift index, sign) against the stored lift orientation.  e1 runs from
/// the lowest to the middle vertex, e2 from middle to highest, e3 from
/// lowest to highest.
#[derive(Debug, Clone)]
pub struct TTri {
    pub kind: TTriKind,
    pub verts: [usize; 3],
    pub corners: [V2; 3],
    pub sgn: f64,
    pub e1: (usize, f64),
    pub e2: (usize, f64),
    pub e3: (usize, f64),
    /// Common gauge word for the edge values of this triangle: cocycle
    /// values are computed Ad(gauge^{-1})-conjugated, which keeps the
    /// matrices O(1) on far-translated cylinder sides.  Traces of products
    /// are gauge invariant, so the pairing is unchanged.
    pub gauge: Word,
}

/// Named lifts of one half-cylinder, indexing into the lift table.
#[derive(Debug, Clone)]
pub struct CylinderLifts {
    pub h1: usize,
    pub h2: usize,
    pub h3: usize,
    pub h4: usize,
    pub h5: usize,
    pub k1: usize,
    pub k2: usize,
    pub k3: usize,
    pub k4: usize,
    /// True when this side's pants meets the curve along its c-boundary
    /// (the four-term reduced formula applies there).
    pub gamma_pattern: bool,
    /// Gauge of this side (the side's aligner word).
    pub gauge: Word,
}

/// The realized finite triangulation.
pub struct FiniteTriangulation<'a> {
    pub tc: &'a TriangulationComplex,
    pub real: &'a Realization<'a>,
    pub lifts: Vec<Lift>,
    pub triangles: Vec<TTri>,
    pub cylinders: Vec<[CylinderLifts; 2]>,
    pub num_vertices: usize,
}

impl<'a> FiniteTriangulation<'a> {
    pub fn counts(&self) -> (usize, usize, usize) {
        // vertices, quotient edges, triangles
        let g = self.tc.graph.genus;
        (self.num_vertices, 42 * (g - 1), self.triangles.len())
    }
}

/// Global enumeration of interior vertices: per pants, q_ca < q_ab < q_bc.
/// This order makes the bridge vertex precede the auxiliary fan vertex on
/// the a- and b-boundary cylinders and follow it on the c-boundary ones,
/// which is what the two- and four-term cylinder reductions assume.
fn interior_vertex_id(_tc: &TriangulationComplex, rep: EdgeRep) -> usize {
    match rep {
        EdgeRep::Isolated { pants, kind } => {
            let pos = match kind {
                IsoKind::CA => 0,
                IsoKind::AB => 1,
                IsoKind::BC => 2,
            };
            3 * pants + pos
        }
        EdgeRep::Closed { .. } => panic!("not an interior vertex"),
    }
}

/// Builds the finite triangulation over a realization.
pub fn build_finite_triangulation<'a>(
    real: &'a Realization<'a>,
) -> Result<FiniteTriangulation<'a>, LabellingError> {
    let tc = real.tc;
    let np = tc.graph.num_pants();
    let base_curve = 3 * np;
    let q_id = |curve: usize| base_curve + 2 * curve;
    let qp_id = |curve: usize| base_curve + 2 * curve + 1;
    let num_vertices = base_curve + 2 * tc.num_closed_orbits();

    let mut lifts: Vec<Lift> = Vec::new();
    let mut triangles: Vec<TTri> = Vec::new();
    let mut add_lift = |l: Lift, lifts: &mut Vec<Lift>| -> usize {
        lifts.push(l);
        lifts.len() - 1
    };

    // --- interior triangles -------------------------------------------------
    for pants in 0..np {
        for primed in [false, true] {
            let t = TriInst {
                word: Word::identity(),
                rep: crate::surface::TriRep { pants, primed },
            };
            let edges = tc.tri_edges(&t);
            let qs: Vec<V2> = edges.iter().map(|e| real.q_point(e).klein()).collect();
            let ids: Vec<usize> = edges.iter().map(|e| interior_vertex_id(tc, e.rep)).collect();
            // edge lifts of the q-triangle: sides i joins q of edge i and i+1
            let mut side_lift = [0usize; 3];
            for i in 0..3 {
                let seg = Simplex1 {
                    a: qs[i],
                    b: qs[(i + 1) % 3],
                    start_tri: t.clone(),
                    a_kind: EndpointKind::OnEdge(edges[i].clone()),
                    b_kind: EndpointKind::OnEdge(edges[(i + 1) % 3].clone()),
                };
                side_lift[i] = add_lift(
                    Lift { a: qs[i], b: qs[(i + 1) % 3], pieces: vec![Piece::C(seg)] },
                    &mut lifts,
                );
            }
            let verts = [ids[0], ids[1], ids[2]];
            let corners = [qs[0], qs[1], qs[2]];
            triangles.push(assemble_tri(
                TTriKind::Internal { pants, primed },
                verts,
                corners,
                &[(side_lift[0], (0, 1)), (side_lift[1], (1, 2)), (side_lift[2], (2, 0))],
            ));
        }
    }

    // --- cylinders -----------------------------------------------------------
    let mut cylinders = Vec::with_capacity(tc.num_closed_orbits());
    for curve in 0..tc.num_closed_orbits() {
        let bridge = real.bridge(curve);
        let gamma = bridge.gamma_forward.clone();
        let g3 = real.geo.so21(&gamma);
        let q_e = bridge.q_e.klein();
        let q_ep = bridge.q_e_prime.klein();
        let gq_e = fuchsian::HPoint::from_raw(g3 * bridge.q_e.0).klein();
        // shared closed-edge lifts
        let k1_lift = add_lift(
            Lift { a: q_e, b: q_ep, pieces: vec![Piece::A { curve, pa: 0.0, pb: 0.5 }] },
            &mut lifts,
        );
        let k4_lift = add_lift(
            Lift { a: gq_e, b: q_ep, pieces: vec![Piece::A { curve, pa: 1.0, pb: 0.5 }] },
            &mut lifts,
        );
        let mut sides_data = Vec::with_capacity(2);
        for m in 0..2 {
            let side = tc.bridge_side(curve, m);
            let entry = tc.tri_edges(&side.tri)[side.entry_edge_idx].clone();
            let spiral = labelling::spiral_for(tc, real.geo, curve, m)?;
            // walk toward the forward primitive
            let fwd = tc
                .spiral_sequence(curve, m, &gamma, real.geo)
                .map_err(LabellingError::Surface)?;
            let entry_q = real.q_point(&entry);
            let f1_q = real.q_point(&fwd.edges[0]);
            let entry_is_first = (entry_q.0 - f1_q.0).norm() < 1e-8;
            // chain: q(entry) -> q(x) -> gamma q(entry); the two pieces lie
            // in consecutive fan triangles.
            let (x_edge, tri_first, tri_second) = if entry_is_first {
                // fan: [T_m] -entry-> [T'] -f2-> [gamma T_m]
                (
                    fwd.edges[1].clone(),
                    fwd.tris[1].clone(),
                    TriInst { word: gamma.mul(&side.tri.word), rep: side.tri.rep },
                )
            } else {
                // fan: [T_m] -f1-> [T'] -gamma entry-> [gamma T_m]
                (fwd.edges[0].clone(), fwd.tris[0].clone(), fwd.tris[1].clone())
            };
            let a_pt = entry_q.klein();
            let b_pt = real.q_point(&x_edge).klein();
            let ga_pt = fuchsian::HPoint::from_raw(g3 * entry_q.0).klein();
            let a_vert = interior_vertex_id(tc, entry.rep);
            let b_vert = interior_vertex_id(tc, x_edge.rep);
            let gentry = EdgeInst { word: gamma.mul(&entry.word), rep: entry.rep };

            // --- lifts of this half cylinder ---
            let h1 = add_lift(
                Lift {
                    a: a_pt,
                    b: q_e,
                    pieces: vec![Piece::B { curve, side: m, translate: Word::identity(), toward_edge: true }],
                },
                &mut lifts,
            );
            let h5 = add_lift(
                Lift {
                    a: ga_pt,
                    b: gq_e,
                    pieces: vec![Piece::B { curve, side: m, translate: gamma.clone(), toward_edge: true }],
                },
                &mut lifts,
            );
            // h2 = F1: from A to Q' via the bridge and the closed edge
            let h2 = add_lift(
                Lift {
                    a: a_pt,
                    b: q_ep,
                    pieces: vec![
                        Piece::B { curve, side: m, translate: Word::identity(), toward_edge: true },
                        Piece::A { curve, pa: 0.0, pb: 0.5 },
                    ],
                },
                &mut lifts,
            );
            // h3 = F2: from B through A's bridge
            let h3 = add_lift(
                Lift {
                    a: b_pt,
                    b: q_ep,
                    pieces: vec![
                        Piece::C(Simplex1 {
                            a: b_pt,
                            b: a_pt,
                            start_tri: tri_first.clone(),
                            a_kind: EndpointKind::OnEdge(x_edge.clone()),
                            b_kind: EndpointKind::OnEdge(entry.clone()),
                        }),
                        Piece::B { curve, side: m, translate: Word::identity(), toward_edge: true },
                        Piece::A { curve, pa: 0.0, pb: 0.5 },
                    ],
                },
                &mut lifts,
            );
            // h4 = F3: from gamma A through the translated bridge
            let h4 = add_lift(
                Lift {
                    a: ga_pt,
                    b: q_ep,
                    pieces: vec![
                        Piece::B { curve, side: m, translate: gamma.clone(), toward_edge: true },
                        Piece::A { curve, pa: 1.0, pb: 0.5 },
                    ],
                },
                &mut lifts,
            );
            let k2 = add_lift(
                Lift {
                    a: a_pt,
                    b: b_pt,
                    pieces: vec![Piece::C(Simplex1 {
                        a: a_pt,
                        b: b_pt,
                        start_tri: tri_first.clone(),
                        a_kind: EndpointKind::OnEdge(entry.clone()),
                        b_kind: EndpointKind::OnEdge(x_edge.clone()),
                    })],
                },
                &mut lifts,
            );
            let k3 = add_lift(
                Lift {
                    a: ga_pt,
                    b: b_pt,
                    pieces: vec![Piece::C(Simplex1 {
                        a: ga_pt,
                        b: b_pt,
                        start_tri: tri_second.clone(),
                        a_kind: EndpointKind::OnEdge(gentry.clone()),
                        b_kind: EndpointKind::OnEdge(x_edge.clone()),
                    })],
                },
                &mut lifts,
            );
            let gamma_pattern = tc.curves[curve].sides[m].slot == Slot::C;
            let gauge = tc.curves[curve].sides[m].aligner.clone();
            let cl = CylinderLifts {
                h1, h2, h3, h4, h5,
                k1: k1_lift, k2, k3, k4: k4_lift,
                gamma_pattern,
                gauge: gauge.clone(),
            };
            sides_data.push(cl.clone());

            // --- the four triangles ---
            let by_pair: Vec<(usize, V2, V2)> = vec![
                (h1, a_pt, q_e),
                (h2, a_pt, q_ep),
                (h3, b_pt, q_ep),
                (h4, ga_pt, q_ep),
                (h5, ga_pt, gq_e),
                (k1_lift, q_e, q_ep),
                (k2, a_pt, b_pt),
                (k3, ga_pt, b_pt),
                (k4_lift, gq_e, q_ep),
            ];
            let find = |u: V2, v: V2| -> (usize, f64) {
                for (idx, a, b) in &by_pair {
                    if (u - a).norm() < 1e-9 && (v - b).norm() < 1e-9 {
                        return (*idx, 1.0);
                    }
                    if (u - b).norm() < 1e-9 && (v - a).norm() < 1e-9 {
                        return (*idx, -1.0);
                    }
                }
                panic!("no lift for the requested cylinder edge");
            };
            let tris_spec: [(usize, [usize; 3], [V2; 3]); 4] = [
                (0, [q_id(curve), a_vert, qp_id(curve)], [q_e, a_pt, q_ep]),
                (1, [a_vert, b_vert, qp_id(curve)], [a_pt, b_pt, q_ep]),
                (2, [b_vert, a_vert, qp_id(curve)], [b_pt, ga_pt, q_ep]),
                (3, [a_vert, q_id(curve), qp_id(curve)], [ga_pt, gq_e, q_ep]),
            ];
            for (pos, ids, corners) in tris_spec {
                // pair up the ordered sides by sorting the global ids; ties
                // cannot occur because the three ids are pairwise distinct.
                let mut order = [0usize, 1, 2];
                order.sort_by_key(|&i| ids[i]);
                let (lo, mid, hi) = (order[0], order[1], order[2]);
                let e1 = find(corners[lo], corners[mid]);
                let e2 = find(corners[mid], corners[hi]);
                let e3 = find(corners[lo], corners[hi]);
                let sgn = sgn_of(&[corners[lo], corners[mid], corners[hi]]);
                triangles.push(TTri {
                    kind: TTriKind::Cylinder { curve, side: m, pos },
                    verts: [ids[lo], ids[mid], ids[hi]],
                    corners,
                    sgn,
                    e1,
                    e2,
                    e3,
                    gauge: gauge.clone(),
                });
            }
            let _ = spiral;
        }
        cylinders.push([sides_data[0].clone(), sides_data[1].clone()]);
    }

    Ok(FiniteTriangulation {
        tc,
        real,
        lifts,
        triangles,
        cylinders,
        num_vertices,
    })
}

/// Cup-product sign: +1 when the enumeration-increasing corner list runs
/// clockwise in the Klein disk.
fn sgn_of(corners: &[V2; 3]) -> f64 {
    let cross = (corners[1] - corners[0]).x * (corners[2] - corners[0]).y
        - (corners[1] - corners[0]).y * (corners[2] - corners[0]).x;
    if cross < 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn assemble_tri(
    kind: TTriKind,
    verts: [usize; 3],
    corners: [V2; 3],
    side_lifts: &[(usize, (usize, usize)); 3],
) -> TTri {
    let mut order = [0usize, 1, 2];
    order.sort_by_key(|&i| verts[i]);
    let (lo, mid, hi) = (order[0], order[1], order[2]);
    let pick = |u: usize, v: usize| -> (usize, f64) {
        for (lift, (a, b)) in side_lifts {
            if (*a, *b) == (u, v) {
                return (*lift, 1.0);
            }
            if (*a, *b) == (v, u) {
                return (*lift, -1.0);
            }
        }
        panic!("triangle side not among its lifts");
    };
    TTri {
        kind,
        verts: [verts[lo], verts[mid], verts[hi]],
        corners: [corners[lo], corners[mid], corners[hi]],
        sgn: sgn_of(&[corners[lo], corners[mid], corners[hi]]),
        e1: pick(lo, mid),
        e2: pick(mid, hi),
        e3: pick(lo, hi),
        gauge: Word::identity(),
    }
}

// ---------------------------------------------------------------------------
// Cocycle evaluation
// ---------------------------------------------------------------------------

/// Evaluates one labelling cocycle on the lifts of a finite triangulation,
/// with the K0/K1 corrections of its closed edges memoized.
pub struct CocycleEvaluator<'a> {
    pub ft: &'a FiniteTriangulation<'a>,
    pub ev: Evaluator<'a>,
    k0: Mutex<HashMap<(usize, Word), Mat>>,
    k1: Mutex<HashMap<(usize, usize, Word), Mat>>,
    memo: Mutex<HashMap<(usize, Word), Mat>>,
}

impl<'a> CocycleEvaluator<'a> {
    pub fn new(
        ft: &'a FiniteTriangulation<'a>,
        alg: &'a HitchinRep,
        lab: &'a Labelling,
    ) -> CocycleEvaluator<'a> {
        CocycleEvaluator {
            ft,
            ev: Evaluator::new(ft.tc, alg, lab),
            k0: Mutex::new(HashMap::new()),
            k1: Mutex::new(HashMap::new()),
            memo: Mutex::new(HashMap::new()),
        }
    }

    fn n(&self) -> usize {
        self.ev.lab.n
    }

    /// K0 of the oriented closed edge r(e), in the given gauge.
    pub fn k0(&self, curve: usize, gauge: &Word) -> Result<Mat, LabellingError> {
        let key = (curve, gauge.clone());
        if let Some(m) = self.k0.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let out =
            labelling::k0_gauged(self.ft.tc, self.ev.alg, self.ft.real, self.ev.lab, curve, gauge)?;
        self.k0.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// K1 of the oriented bridge leaving side m, in the given gauge.
    pub fn k1(&self, curve: usize, side: usize, gauge: &Word) -> Result<Mat, LabellingError> {
        let key = (curve, side, gauge.clone());
        if let Some(m) = self.k1.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let out = labelling::k1_gauged(
            self.ft.tc,
            self.ev.alg,
            self.ft.real,
            self.ev.lab,
            curve,
            side,
            gauge,
        )?;
        self.k1.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// Value on a type A piece: net bridge-crossing weight times K0.
    pub fn mu_type_a(&self, curve: usize, pa: f64, pb: f64, gauge: &Word) -> Result<Mat, LabellingError> {
        let mut weight = 0.0;
        let (lo, hi) = (pa.min(pb), pa.max(pb));
        let dir = if pb >= pa { 1.0 } else { -1.0 };
        // interior integer crossings
        let mut k = lo.floor() as i64;
        while (k as f64) <= hi {
            let kf = k as f64;
            if kf > lo + 1e-12 && kf < hi - 1e-12 {
                weight += 1.0;
            }
            k += 1;
        }
        for endpoint in [pa, pb] {
            if (endpoint - endpoint.round()).abs() < 1e-12 {
                weight += 0.5;
            }
        }
        Ok(self.k0(curve, gauge)? * (weight * dir))
    }

    /// Value on a type B piece (a bridge half).
    pub fn mu_type_b(
        &self,
        curve: usize,
        side: usize,
        translate: &Word,
        toward_edge: bool,
        gauge: &Word,
    ) -> Result<Mat, LabellingError> {
        let k1 = self.k1(curve, side, gauge)?;
        // pulled translate: gauge^{-1} translate gauge
        let pulled_translate = translate.conjugate(&gauge.inverse());
        let k1 = if pulled_translate.is_identity() {
            k1
        } else {
            self.ev.alg.adjoint(&pulled_translate, &k1)
        };
        let e_inst = EdgeInst { word: gauge.inverse(), rep: EdgeRep::Closed { curve } };
        let l_e = self.ev.edge(&e_inst)?;
        let side_is_right = side == labelling::paper_side_one(self.ft.tc, curve);
        // endpoint on the closed edge: the half weight is -1/2 approaching
        // from the right of r(e), +1/2 from the left; leaving reverses it.
        let half = match (toward_edge, side_is_right) {
            (true, true) => -0.5,
            (true, false) => 0.5,
            (false, true) => 0.5,
            (false, false) => -0.5,
        };
        let k_term = if toward_edge { k1 } else { -k1 };
        Ok(k_term + l_e * half)
    }

    /// Value on a type C piece, with barrier labels read at gauge-pulled
    /// instances.
    pub fn mu_type_c(&self, seg: &Simplex1, gauge: &Word) -> Result<Mat, LabellingError> {
        let crossings = fuchsian::enumerate_crossings(self.ft.real, seg)?;
        let n = self.n();
        let ginv = gauge.inverse();
        let mut out = Mat::zeros(n, n);
        for (br, w) in &crossings.entries {
            let pulled = match br {
                fuchsian::BarrierRef::Edge(e) => fuchsian::BarrierRef::Edge(EdgeInst {
                    word: ginv.mul(&e.word),
                    rep: e.rep,
                }),
                fuchsian::BarrierRef::NonEdge(t, c) => fuchsian::BarrierRef::NonEdge(
                    crate::surface::TriInst { word: ginv.mul(&t.word), rep: t.rep },
                    *c,
                ),
            };
            out += self.ev.barrier(&pulled)? * *w;
        }
        Ok(out)
    }

    /// Value on an oriented lift of the finite triangulation, in a gauge.
    pub fn mu_lift(&self, lift: usize, gauge: &Word) -> Result<Mat, LabellingError> {
        let key = (lift, gauge.clone());
        if let Some(m) = self.memo.lock().unwrap().get(&key) {
            return Ok(m.clone());
        }
        let n = self.n();
        let mut out = Mat::zeros(n, n);
        for piece in &self.ft.lifts[lift].pieces {
            out += match piece {
                Piece::C(seg) => self.mu_type_c(seg, gauge)?,
                Piece::B { curve, side, translate, toward_edge } => {
                    self.mu_type_b(*curve, *side, translate, *toward_edge, gauge)?
                }
                Piece::A { curve, pa, pb } => self.mu_type_a(*curve, *pa, *pb, gauge)?,
            };
        }
        self.memo.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }

    pub fn mu_signed(&self, (lift, sign): (usize, f64), gauge: &Word) -> Result<Mat, LabellingError> {
        Ok(self.mu_lift(lift, gauge)? * sign)
    }

    /// Boundary sum of a triangle of the finite triangulation: zero for a
    /// cocycle.
    pub fn boundary_residual(&self, tri: &TTri) -> Result<f64, LabellingError> {
        let total = self.mu_signed(tri.e1, &tri.gauge)?
            + self.mu_signed(tri.e2, &tri.gauge)?
            - self.mu_signed(tri.e3, &tri.gauge)?;
        Ok(total.amax())
    }
}

// ---------------------------------------------------------------------------
// The Goldman pairing
// ---------------------------------------------------------------------------

/// omega([mu_1], [mu_2]) by the simplicial cup product.
pub fn goldman_pairing(
    ev1: &CocycleEvaluator,
    ev2: &CocycleEvaluator,
) -> Result<f64, LabellingError> {
    let mut total = 0.0;
    for tri in &ev1.ft.triangles {
        let m1 = ev1.mu_signed(tri.e1, &tri.gauge)?;
        let m2 = ev2.mu_signed(tri.e2, &tri.gauge)?;
        total += tri.sgn * (m1 * m2).trace();
    }
    Ok(total)
}

/// The cylinder part of the pairing restricted to one half cylinder,
/// computed from the reduced two-term (a/b boundaries) or four-term (c
/// boundary) formulas.
pub fn reduced_cylinder_pairing(
    ev1: &CocycleEvaluator,
    ev2: &CocycleEvaluator,
    curve: usize,
    side: usize,
) -> Result<f64, LabellingError> {
    let cl = &ev1.ft.cylinders[curve][side];
    let g = &cl.gauge;
    let h1 = ev1.mu_lift(cl.h1, g)?;
    let k4 = ev2.mu_lift(cl.k4, g)?;
    let k1 = ev2.mu_lift(cl.k1, g)?;
    let k23 = ev1.mu_lift(cl.k2, g)? - ev1.mu_lift(cl.k3, g)?;
    let h3 = ev2.mu_lift(cl.h3, g)?;
    let mut total = (h1 * (k4 - k1)).trace() + (k23 * h3).trace();
    if cl.gamma_pattern {
        let k3a = ev1.mu_lift(cl.k3, g)?;
        let k3b = ev2.mu_lift(cl.k3, g)?;
        let k2a = ev1.mu_lift(cl.k2, g)?;
        let k2b = ev2.mu_lift(cl.k2, g)?;
        total += (k2a * k2b).trace() - (k3a * k3b).trace();
    }
    Ok(total)
}

/// Direct sum over the four triangles of one half cylinder.
pub fn direct_cylinder_pairing(
    ev1: &CocycleEvaluator,
    ev2: &CocycleEvaluator,
    curve: usize,
    side: usize,
) -> Result<f64, LabellingError> {
    let mut total = 0.0;
    for tri in &ev1.ft.triangles {
        if tri.kind == (TTriKind::Cylinder { curve, side, pos: 0 })
            || tri.kind == (TTriKind::Cylinder { curve, side, pos: 1 })
            || tri.kind == (TTriKind::Cylinder { curve, side, pos: 2 })
            || tri.kind == (TTriKind::Cylinder { curve, side, pos: 3 })
        {
            let m1 = ev1.mu_signed(tri.e1, &tri.gauge)?;
            let m2 = ev2.mu_signed(tri.e2, &tri.gauge)?;
            total += tri.sgn * (m1 * m2).trace();
        }
    }
    Ok(total)
}

/// The internal part of the pairing (the two q-triangles of every pants).
pub fn internal_pairing(
    ev1: &CocycleEvaluator,
    ev2: &CocycleEvaluator,
) -> Result<f64, LabellingError> {
    let mut total = 0.0;
    for tri in &ev1.ft.triangles {
        if matches!(tri.kind, TTriKind::Internal { .. }) {
            let m1 = ev1.mu_signed(tri.e1, &tri.gauge)?;
            let m2 = ev2.mu_signed(tri.e2, &tri.gauge)?;
            total += tri.sgn * (m1 * m2).trace();
        }
    }
    Ok(total)
}

/// The full pairing matrix of a labelling family.
pub struct PairingMatrix {
    pub labels: Vec<String>,
    pub matrix: Mat,
}

pub fn pairing_matrix(
    ft: &FiniteTriangulation,
    alg: &HitchinRep,
    family: &[(SpecialKind, Labelling)],
) -> Result<PairingMatrix, LabellingError> {
    let evs: Vec<CocycleEvaluator> = family
        .iter()
        .map(|(_, lab)| CocycleEvaluator::new(ft, alg, lab))
        .collect();
    let dim = family.len();
    let mut matrix = Mat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            matrix[(i, j)] = goldman_pairing(&evs[i], &evs[j])?;
        }
    }
    Ok(PairingMatrix {
        labels: family.iter().map(|(k, _)| k.label()).collect(),
        matrix,
    })
}

/// The expected pairing pattern of the special family: omega(E, H) = -1 and
/// omega(S, Y) = +1 on matching indices, zero elsewhere, skew overall.
pub fn expected_special_pattern(family: &[(SpecialKind, Labelling)]) -> Mat {
    let dim = family.len();
    let mut out = Mat::zeros(dim, dim);
    for (i, (ki, _)) in family.iter().enumerate() {
        for (j, (kj, _)) in family.iter().enumerate() {
            let v = match (ki, kj) {
                (
                    SpecialKind::Eruption { pants: p1, i: a1, j: b1, k: c1 },
                    SpecialKind::Hexagon { pants: p2, i: a2, j: b2, k: c2 },
                ) if p1 == p2 && (a1, b1, c1) == (a2, b2, c2) => -1.0,
                (
                    SpecialKind::Hexagon { pants: p1, i: a1, j: b1, k: c1 },
                    SpecialKind::Eruption { pants: p2, i: a2, j: b2, k: c2 },
                ) if p1 == p2 && (a1, b1, c1) == (a2, b2, c2) => 1.0,
                (SpecialKind::Twist { curve: c1, i: i1 }, SpecialKind::Length { curve: c2, i: i2 })
                    if c1 == c2 && i1 == i2 =>
                {
                    1.0
                }
                (SpecialKind::Length { curve: c1, i: i1 }, SpecialKind::Twist { curve: c2, i: i2 })
                    if c1 == c2 && i1 == i2 =>
                {
                    -1.0
                }
                _ => 0.0,
            };
            out[(i, j)] = v;
        }
    }
    out
}

/// Verifies that a pairing matrix realizes the standard symplectic pattern
/// of the special family; returns the largest entrywise deviation.
pub fn symplectic_basis_deviation(pm: &PairingMatrix, expected: &Mat) -> f64 {
    (&pm.matrix - expected).amax()
}
