#[test]
fn dbg_lift_norms() {
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
    let n = 4;
    let rep = assemble_fuchsian(&tc, &fnd, n).unwrap();
    let real = Realization::new(&tc, &rep);
    let ft = build_finite_triangulation(&real).unwrap();
    let y = length_labelling(&tc, n, 1, 2);
    let ev = CocycleEvaluator::new(&ft, &rep, &y);
    let mut worst = (0.0, "".to_string());
    for (ci, cyl) in ft.cylinders.iter().enumerate() {
        for (m, cl) in cyl.iter().enumerate() {
            for (nm, idx) in [("h1", cl.h1), ("h2", cl.h2), ("h3", cl.h3), ("h4", cl.h4), ("h5", cl.h5),
                              ("k1", cl.k1), ("k2", cl.k2), ("k3", cl.k3), ("k4", cl.k4)] {
                let v = ev.mu_lift(idx, &cl.gauge).unwrap().amax();
                if v > worst.0 { worst = (v, format!("c{ci} m{m} {nm}")); }
            }
        }
    }
    println!("worst lift norm: {:.3e} at {}", worst.0, worst.1);
    // norms of K1 per side and gauge
    for c in 0..3 { for m in 0..2 {
        let g = &ft.cylinders[c][m].gauge;
        let k1 = ev.k1(c, m, g).unwrap();
        println!("K1 c{c} m{m}: {:.3e}", k1.amax());
    }}
}
