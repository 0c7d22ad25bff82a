use std::collections::BTreeMap;
use std::f64::consts::PI;
use tapestry_core::driver::Driver;
use tapestry_core::flesh::Simulation;
use tapestry_core::thorns::{flesh_for_parameters, wave_energy, WAVE_GROUP};

fn start(text: &str) -> Simulation {
    let mut sim = Simulation::from_text(flesh_for_parameters(text).unwrap(), text).unwrap();
    sim.resume().unwrap();
    sim
}

/// Owned values of `phi` and `pi` on level 0, keyed by global index.
fn gather(d: &dyn Driver) -> BTreeMap<[i64; 3], [u64; 2]> {
    let gi = d.layout().group_index(WAVE_GROUP).unwrap();
    let mut out = BTreeMap::new();
    for p in d.patches().into_iter().filter(|p| p.level == 0) {
        let s = &p.storage[gi].levels[0];
        for q in p.owned.points() {
            let o = p.ext.offset(q);
            assert!(out.insert(q, [s[0][o].to_bits(), s[1][o].to_bits()]).is_none());
        }
    }
    out
}

fn plane(n: usize, extra: &str) -> String {
    format!(
        "grid::points = {n}\n\
         wave::initial_data = plane\n\
         wave::wavenumber = 1,1,0\n\
         flesh::max_iterations = 1000000\n\
         {extra}"
    )
}

/// Largest deviation of `phi` from `sin(2 pi (x + y) - omega t)`.
fn plane_error(sim: &Simulation) -> f64 {
    let d = sim.driver();
    let gi = d.layout().group_index(WAVE_GROUP).unwrap();
    let omega = 2.0 * PI * 2f64.sqrt();
    let t = sim.time();
    let mut err: f64 = 0.0;
    for p in d.patches() {
        for q in p.owned.points() {
            let x = d.domain().coord(0, q);
            let exact = (2.0 * PI * (x[0] + x[1]) - omega * t).sin();
            err = err.max((p.storage[gi].levels[0][0][p.ext.offset(q)] - exact).abs());
        }
    }
    err
}

#[test]
fn plane_wave_converges_at_fourth_order() {
    let mut errors = Vec::new();
    for (n, steps) in [(32, 24), (64, 48)] {
        let mut sim = start(&plane(n, "driver::nranks = 4\n"));
        for _ in 0..steps {
            sim.step().unwrap();
        }
        errors.push((sim.time(), plane_error(&sim)));
    }
    let (t0, e0) = errors[0];
    let (t1, e1) = errors[1];
    assert!((t0 - t1).abs() < 1e-12, "{t0} vs {t1}");
    assert!(t0 > 0.1);
    let order = (e0 / e1).log2();
    eprintln!("errors {e0:e} / {e1:e}: order {order:.3}");
    assert!(order >= 3.8, "measured order {order}");
}

#[test]
fn plane_wave_energy_is_conserved_without_dissipation() {
    let text = "grid::points = 64,8,8\n\
                grid::upper = 1,0.125,0.125\n\
                wave::initial_data = plane\n\
                wave::wavenumber = 1,0,0\n\
                wave::epsilon = 0\n\
                flesh::max_iterations = 100\n";
    let mut sim = start(text);
    let e0 = wave_energy(sim.driver(), 1.0).unwrap();
    assert!(e0 > 0.0);
    sim.run().unwrap();
    let e1 = wave_energy(sim.driver(), 1.0).unwrap();
    assert!(((e1 - e0) / e0).abs() < 1e-8, "{e0} -> {e1}");

    let doubled = start(&text.replace("wave::epsilon = 0\n", "wave::epsilon = 0\nwave::amplitude = 2\n"));
    let e2 = wave_energy(doubled.driver(), 1.0).unwrap();
    assert!((e2 / e0 - 4.0).abs() < 1e-12, "{}", e2 / e0);
}

#[test]
fn mirror_symmetric_data_stays_symmetric() {
    // a gaussian centred in a box of 21 points is symmetric under x -> -x about the centre
    let text = "grid::points = 21\n\
                grid::lower = -1,-1,-1\n\
                grid::upper = 1,1,1\n\
                grid::boundary = outer-copy\n\
                wave::initial_data = gaussian\n\
                wave::sigma = 0.25\n\
                wave::centre = 0,0,0\n\
                driver::nranks = 3\n\
                flesh::max_iterations = 20\n";
    let mut sim = start(text);
    sim.run().unwrap();
    let g = gather(sim.driver());
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (q, v) in &g {
        let m = g[&[20 - q[0], q[1], q[2]]];
        for c in 0..2 {
            let (a, b) = (f64::from_bits(v[c]), f64::from_bits(m[c]));
            worst = worst.max((a - b).abs());
            scale = scale.max(a.abs());
        }
    }
    assert!(scale > 0.0);
    assert!(worst <= 1e-13 * scale, "asymmetry {worst:e}");
}

#[test]
fn unigrid_and_single_level_amr_evolve_identical_data() {
    let mut reference = None;
    for ranks in [1, 2, 4, 8] {
        let mut owned = Vec::new();
        for driver in ["unigrid", "amr"] {
            let mut sim = start(&plane(24, &format!("driver::name = {driver}\ndriver::nranks = {ranks}\namr::nlevels = 1\n")));
            for _ in 0..64 {
                sim.step().unwrap();
            }
            assert_eq!(sim.driver().name(), driver);
            assert_eq!(sim.driver().nranks(), ranks);
            owned.push(gather(sim.driver()));
        }
        assert_eq!(owned[0].len(), 24 * 24 * 24);
        assert!(owned[0] == owned[1], "unigrid and amr differ on {ranks} ranks");
        // the decomposition does not change a single bit either
        match &reference {
            None => reference = Some(owned.swap_remove(0)),
            Some(r) => assert!(*r == owned[0], "{ranks} ranks differ from 1 rank"),
        }
    }
}
