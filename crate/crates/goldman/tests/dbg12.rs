#[test]
fn dbg_ez_cylinder() {
    use goldman::surface::*;
    use goldman::fuchsian::*;
    use goldman::labelling::*;
    use goldman::pairing::*;
    let tc = TriangulationComplex::build(PantsGraph::genus2_chain()).unwrap();
    let fnd = FenchelNielsen { curves: vec![
        CurveFN { length: 1.1, twist: 0.3 },
        CurveFN { length: 0.9, twist: -0.4 },
        CurveFN { length: 1.3, twist: 0.25 },
    ]};
    let rep = assemble_fuchsian(&tc, &fnd, 3).unwrap();
    let real = Realization::new(&tc, &rep);
    let ft = build_finite_triangulation(&real).unwrap();
    let e = eruption_labelling(&tc, 3, 0, Slot::A, (1,1,1));
    let z = lozenge_labelling(&tc, 3, 0, 1);
    let ev_e = CocycleEvaluator::new(&ft, &rep, &e);
    let ev_z = CocycleEvaluator::new(&ft, &rep, &z);
    for c in 0..3 { for m in 0..2 {
        let d = direct_cylinder_pairing(&ev_e, &ev_z, c, m).unwrap();
        let r = reduced_cylinder_pairing(&ev_e, &ev_z, c, m).unwrap();
        if d.abs() > 1e-9 || r.abs() > 1e-9 {
            println!("curve {c} side {m}: direct {d:+.4} reduced {r:+.4}");
        }
    }}
    // nilpotency diagnostics on curve 0 side 0
    let cl = &ft.cylinders[0][0];
    let g = &cl.gauge;
    let sd = side_decomposition(&tc, &rep, &real, &e, 0, 0).unwrap();
    let finv = sd.frame.clone().try_inverse().unwrap();
    for (nm, idx) in [("h1", cl.h1), ("k2", cl.k2), ("k3", cl.k3), ("k1", cl.k1), ("k4", cl.k4), ("h3", cl.h3)] {
        let me = ev_e.mu_lift(idx, g).unwrap();
        let mz = ev_z.mu_lift(idx, g).unwrap();
        let de = &finv * &me * &sd.frame;
        let dz = &finv * &mz * &sd.frame;
        println!("{nm}: E diag [{:+.3} {:+.3} {:+.3}]  Z diag [{:+.3} {:+.3} {:+.3}]",
            de[(0,0)], de[(1,1)], de[(2,2)], dz[(0,0)], dz[(1,1)], dz[(2,2)]);
    }
}
