use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use tapestry_core::driver::amr::{Amr, AmrSettings, BufferSpec, CentreOfInterest, InterpSpec};
use tapestry_core::driver::{Driver, DriverError, Execution};
use tapestry_core::flesh::{Simulation, VariableGroup};
use tapestry_core::grid::{Boundary, DomainSpec, Index3};
use tapestry_core::thorns::{flesh_for_parameters, WAVE_GROUP};

/// Coarse grid of 45 points on [-1, 1]; the half-widths 11, 5 and 2 are the
/// smallest that nest four levels with the default buffer and a radius-3
/// prolongation stencil.
const N: usize = 45;
const WIDTHS: [f64; 3] = [11.0, 5.0, 2.0];

fn domain() -> DomainSpec {
    DomainSpec::cube(N, -1.0, 2.0 / (N - 1) as f64, Boundary::OuterCopy, 3)
}

fn four_levels(nranks: usize, centre: [f64; 3]) -> Amr {
    four_levels_with(nranks, centre, &WIDTHS)
}

fn four_levels_with(nranks: usize, centre: [f64; 3], widths: &[f64]) -> Amr {
    let settings = AmrSettings {
        nlevels: 4,
        centres: vec![CentreOfInterest::new(centre, widths)],
        interp: InterpSpec::default(),
        buffer: BufferSpec::default(),
    };
    let mut amr = Amr::new(domain(), nranks, Execution::Sequential, settings).unwrap();
    amr.allocate(&[VariableGroup::new("t::g", &["u", "v"], 3, 3)]).unwrap();
    amr
}

/// Fill every point of every level and time level with `f` (variable `v`
/// holds `2 f`).
fn fill(amr: &mut Amr, f: &dyn Fn([f64; 3]) -> f64) {
    let d = amr.domain().clone();
    for p in amr.patches_mut() {
        let (level, ext) = (p.level, p.ext);
        for tl in &mut p.storage[0].levels {
            for q in ext.points() {
                let x = f(d.coord(level, q));
                tl[0][ext.offset(q)] = x;
                tl[1][ext.offset(q)] = 2.0 * x;
            }
        }
    }
}

/// A random polynomial of total degree `degree` in three variables.
struct Poly {
    terms: Vec<([i32; 3], f64)>,
}

impl Poly {
    fn random(degree: i32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        for i in 0..=degree {
            for j in 0..=degree - i {
                for k in 0..=degree - i - j {
                    terms.push(([i, j, k], rng.gen_range(-1.0..1.0)));
                }
            }
        }
        Self { terms }
    }

    fn eval(&self, x: [f64; 3]) -> f64 {
        self.terms.iter().map(|(e, c)| c * x[0].powi(e[0]) * x[1].powi(e[1]) * x[2].powi(e[2])).sum()
    }

    /// Bound on |p| over [-1, 1]^3.
    fn scale(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.abs()).sum()
    }
}

/// `(target, [u, v])` for the prolongation targets of every patch of `l`.
fn prolonged(amr: &mut Amr, l: usize) -> Vec<(Index3, [f64; 2])> {
    let jobs: Vec<(usize, Vec<Index3>)> = amr
        .level_patches(l)
        .iter()
        .zip(amr.prolong_targets(l))
        .map(|(p, t)| (p.rank, t.clone()))
        .collect();
    let mut out = Vec::new();
    for (rank, targets) in jobs {
        let v = amr.prolong_values(l, 0, 0.0, &targets, rank).unwrap();
        out.extend(targets.iter().enumerate().map(|(i, q)| (*q, [v[0][i], v[1][i]])));
    }
    out
}

fn coincident(q: Index3) -> bool {
    q.iter().all(|c| c.rem_euclid(2) == 0)
}

#[test]
fn hierarchy_boxes_follow_the_half_widths() {
    let d = DomainSpec::cube(65, -32.0, 1.0, Boundary::OuterCopy, 3);
    let settings = AmrSettings {
        nlevels: 3,
        centres: vec![CentreOfInterest::new([0.0; 3], &[16.0, 8.0, 4.0])],
        interp: InterpSpec::default(),
        buffer: BufferSpec::none(),
    };
    let amr = Amr::new(d.clone(), 1, Execution::Sequential, settings).unwrap();
    let boxes = amr.hierarchy().boxes();
    assert_eq!(boxes.len(), 3);
    assert_eq!(boxes[0], vec![d.index_box()]);
    for (l, half) in [(1usize, 8.0), (2, 4.0)] {
        assert_eq!(boxes[l].len(), 1);
        let b = boxes[l][0];
        let lo = d.coord(l, b.lo);
        let hi = d.coord(l, [b.hi[0] - 1, b.hi[1] - 1, b.hi[2] - 1]);
        assert_eq!(lo, [-half; 3], "level {l}");
        assert_eq!(hi, [half; 3], "level {l}");
    }
    amr.hierarchy().check_nesting().unwrap();
}

#[test]
fn overlapping_centres_refine_their_union() {
    let d = DomainSpec::cube(65, -32.0, 1.0, Boundary::OuterCopy, 3);
    let settings = AmrSettings {
        nlevels: 2,
        centres: vec![CentreOfInterest::new([-3.0, 0.0, 0.0], &[6.0]), CentreOfInterest::new([3.0, 0.0, 0.0], &[6.0])],
        interp: InterpSpec::default(),
        buffer: BufferSpec::none(),
    };
    let amr = Amr::new(d.clone(), 2, Execution::Sequential, settings).unwrap();
    let region = &amr.hierarchy().levels[1];
    // each point refined by either centre is covered exactly once
    let mut expected = 0;
    for x in -18..=18i64 {
        for y in -12..=12i64 {
            for z in -12..=12i64 {
                let q = [x + 64, y + 64, z + 64];
                let inside = (x + 6).abs() <= 12 || (x - 6).abs() <= 12;
                assert_eq!(region.contains(q), inside, "{q:?}");
                expected += inside as usize;
            }
        }
    }
    assert_eq!(region.volume(), expected);
}

#[test]
fn nesting_violations_name_the_level() {
    let settings = AmrSettings {
        nlevels: 3,
        centres: vec![CentreOfInterest::new([0.0; 3], &[11.0, 10.0])],
        interp: InterpSpec::default(),
        buffer: BufferSpec::default(),
    };
    match Amr::new(domain(), 1, Execution::Sequential, settings) {
        Err(e @ DriverError::Nesting { level: 2, .. }) => assert!(e.to_string().contains("level 2"), "{e}"),
        Err(e) => panic!("wrong error {e}"),
        Ok(_) => panic!("a level-2 box this wide cannot nest"),
    }
}

#[test]
fn prolongation_reproduces_quintics_on_every_level() {
    let f = Poly::random(5, 11);
    let mut amr = four_levels(3, [0.0; 3]);
    fill(&mut amr, &|x| f.eval(x));
    let d = amr.domain().clone();
    for l in 1..4 {
        let vals = prolonged(&mut amr, l);
        assert!(vals.len() > 1000, "level {l}: {} targets", vals.len());
        let mut copies = 0;
        for (q, [u, v]) in vals {
            let exact = f.eval(d.coord(l, q));
            assert!((u - exact).abs() <= 1e-10 * f.scale(), "level {l} {q:?}: {u} vs {exact}");
            assert!((v - 2.0 * exact).abs() <= 2e-10 * f.scale());
            if coincident(q) {
                // the coarse value itself, not an approximation of it
                let c = [q[0] / 2, q[1] / 2, q[2] / 2];
                assert_eq!(u.to_bits(), f.eval(d.coord(l - 1, c)).to_bits(), "level {l} {q:?}");
                copies += 1;
            }
        }
        assert!(copies > 0);
    }
}

#[test]
fn prolongation_is_not_exact_beyond_its_order() {
    let mut amr = four_levels(1, [0.0; 3]);
    fill(&mut amr, &|x| x[0].powi(6) + x[1].powi(3));
    let d = amr.domain().clone();
    let worst = prolonged(&mut amr, 1)
        .into_iter()
        .map(|(q, [u, _])| {
            let x = d.coord(1, q);
            (u - x[0].powi(6) - x[1].powi(3)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst > 1e-12, "{worst:e}");
}

#[test]
fn constant_data_stay_constant_through_prolongation_and_restriction() {
    let mut amr = four_levels(2, [0.0; 3]);
    fill(&mut amr, &|_| 0.3);
    for l in 1..4 {
        for (q, [u, v]) in prolonged(&mut amr, l) {
            assert!((u - 0.3).abs() < 1e-15 && (v - 0.6).abs() < 1e-15, "level {l} {q:?}: {u}");
        }
    }
    for l in (1..4).rev() {
        amr.restrict_level(l, 0).unwrap();
    }
    for p in amr.patches() {
        for q in p.owned.points() {
            assert_eq!(p.storage[0].levels[0][0][p.ext.offset(q)], 0.3);
        }
    }
}

#[test]
fn restriction_injects_the_fine_data_inside_the_refined_region_only() {
    let f = Poly::random(3, 5);
    let mut amr = four_levels(3, [0.0; 3]);
    fill(&mut amr, &|x| f.eval(x));
    let d = amr.domain().clone();
    // garbage on level 2, the true field on level 3
    for p in amr.patches_mut().into_iter().filter(|p| p.level == 2) {
        let ext = p.ext;
        for q in ext.points() {
            p.storage[0].levels[0][0][ext.offset(q)] = 1e3 + q[0] as f64;
        }
    }
    amr.restrict_level(3, 0).unwrap();
    let region = amr.hierarchy().levels[3].clone();
    let (mut injected, mut kept) = (0, 0);
    for p in amr.patches().into_iter().filter(|p| p.level == 2) {
        for q in p.owned.points() {
            let u = p.storage[0].levels[0][0][p.ext.offset(q)];
            if region.contains([2 * q[0], 2 * q[1], 2 * q[2]]) {
                assert_eq!(u.to_bits(), f.eval(d.coord(3, [2 * q[0], 2 * q[1], 2 * q[2]])).to_bits(), "{q:?}");
                injected += 1;
            } else {
                assert_eq!(u, 1e3 + q[0] as f64, "{q:?} is outside the refined region");
                kept += 1;
            }
        }
    }
    assert!(injected > 0 && kept > 0);
}

#[test]
fn prolongation_then_restriction_is_the_identity_at_coincident_points() {
    let f = Poly::random(4, 9);
    let mut amr = four_levels(2, [0.0; 3]);
    fill(&mut amr, &|x| f.eval(x));
    let before: Vec<Vec<u64>> = amr
        .patches()
        .into_iter()
        .filter(|p| p.level == 1)
        .map(|p| p.owned.points().map(|q| p.storage[0].levels[0][0][p.ext.offset(q)].to_bits()).collect())
        .collect();
    amr.prolong_level(2, 0, 0.0).unwrap();
    amr.restrict_level(2, 0).unwrap();
    let after: Vec<Vec<u64>> = amr
        .patches()
        .into_iter()
        .filter(|p| p.level == 1)
        .map(|p| p.owned.points().map(|q| p.storage[0].levels[0][0][p.ext.offset(q)].to_bits()).collect())
        .collect();
    assert_eq!(before, after);
}

fn owned_bits(amr: &Amr) -> BTreeMap<(usize, Index3), u64> {
    let mut m = BTreeMap::new();
    for p in amr.patches() {
        for q in p.owned.points() {
            m.insert((p.level, q), p.storage[0].levels[0][0][p.ext.offset(q)].to_bits());
        }
    }
    m
}

#[test]
fn regridding_with_unchanged_centres_changes_nothing() {
    let f = Poly::random(5, 3);
    let mut amr = four_levels(3, [0.0; 3]);
    fill(&mut amr, &|x| f.eval(x));
    let before = owned_bits(&amr);
    let boxes = amr.hierarchy().boxes();
    let centres = amr.settings().centres.clone();
    amr.regrid(&centres).unwrap();
    assert_eq!(amr.hierarchy().boxes(), boxes);
    assert!(owned_bits(&amr) == before);
}

#[test]
fn regridding_to_a_shifted_centre_fills_new_points_exactly() {
    let f = Poly::random(5, 4);
    // narrower than the default so the shifted hierarchy still nests
    let widths = [10.0, 4.0, 1.0];
    let mut amr = four_levels_with(2, [0.0; 3], &widths);
    fill(&mut amr, &|x| f.eval(x));
    let before = owned_bits(&amr);
    let h = amr.domain().spacing[0];
    amr.regrid(&[CentreOfInterest::new([h, -h, 0.0], &widths)]).unwrap();
    let d = amr.domain().clone();
    let (mut kept, mut fresh) = (0, 0);
    for ((level, q), bits) in owned_bits(&amr) {
        let u = f64::from_bits(bits);
        match before.get(&(level, q)) {
            Some(old) => {
                assert_eq!(bits, *old, "level {level} {q:?}");
                kept += 1;
            }
            None => {
                let exact = f.eval(d.coord(level, q));
                assert!((u - exact).abs() <= 1e-10 * f.scale(), "level {level} {q:?}: {u} vs {exact}");
                fresh += 1;
            }
        }
    }
    assert!(kept > 0 && fresh > 0, "{kept} kept, {fresh} new");
}

fn start(text: &str) -> Simulation {
    let mut sim = Simulation::from_text(flesh_for_parameters(text).unwrap(), text).unwrap();
    sim.resume().unwrap();
    sim
}

fn gaussian(points: usize, extra: &str) -> String {
    format!(
        "grid::points = {points}\n\
         grid::lower = -1,-1,-1\n\
         grid::upper = 1,1,1\n\
         grid::boundary = outer-copy\n\
         wave::initial_data = gaussian\n\
         wave::sigma = 0.2\n\
         wave::centre = 0.05,0,0\n\
         flesh::max_iterations = 1000000\n\
         {extra}"
    )
}

#[test]
fn each_level_takes_twice_the_steps_of_the_next_coarser() {
    let text = gaussian(
        N,
        "driver::name = amr\ndriver::nranks = 2\namr::nlevels = 4\namr::centres = 0,0,0:11,5,2\n",
    );
    let mut sim = start(&text);
    assert_eq!(sim.driver().level_steps(), [0, 0, 0, 0]);
    sim.step().unwrap();
    assert_eq!(sim.driver().level_steps(), [1, 2, 4, 8]);
    let t = sim.time();
    for l in 0..4 {
        assert!((sim.driver().level_times(l)[0] - t).abs() < 1e-15, "level {l} ends at the coarse time");
    }
    sim.step().unwrap();
    assert_eq!(sim.driver().level_steps(), [2, 4, 8, 16]);
}

/// Largest difference on the owned level-1 points between a two-level run
/// and a run refined everywhere, whose level 0 coincides with level 1.
fn two_level_error(coarse: usize, half_width: f64, coarse_steps: usize) -> f64 {
    let fine = 2 * coarse - 1;
    let mut amr = start(&gaussian(
        coarse,
        &format!("driver::name = amr\ndriver::nranks = 2\namr::nlevels = 2\namr::centres = 0,0,0:{half_width}\n"),
    ));
    let mut uni = start(&gaussian(fine, "driver::nranks = 2\n"));
    for _ in 0..coarse_steps {
        amr.step().unwrap();
    }
    for _ in 0..2 * coarse_steps {
        uni.step().unwrap();
    }
    assert!((amr.time() - uni.time()).abs() < 1e-14);
    let gi = uni.driver().layout().group_index(WAVE_GROUP).unwrap();
    let mut reference = BTreeMap::new();
    for p in uni.driver().patches() {
        for q in p.owned.points() {
            reference.insert(q, p.storage[gi].levels[0][0][p.ext.offset(q)]);
        }
    }
    let region = match amr.driver().as_any().downcast_ref::<Amr>() {
        Some(a) => a.hierarchy().levels[1].clone(),
        None => panic!("not an amr driver"),
    };
    let mut err: f64 = 0.0;
    for p in amr.driver().patches().into_iter().filter(|p| p.level == 1) {
        for q in p.owned.points().filter(|q| region.contains(*q)) {
            err = err.max((p.storage[gi].levels[0][0][p.ext.offset(q)] - reference[&q]).abs());
        }
    }
    err
}

#[test]
fn two_level_runs_converge_to_the_refined_run_at_fourth_order() {
    let e0 = two_level_error(33, 5.0, 4);
    let e1 = two_level_error(65, 10.0, 8);
    let order = (e0 / e1).log2();
    eprintln!("two-level vs refined: {e0:e} / {e1:e}, order {order:.2}");
    assert!(order >= 3.5, "order {order}");
}
