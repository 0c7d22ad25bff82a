use proptest::prelude::*;
use std::collections::{BTreeSet, HashMap};
use tapestry_core::flesh::{resolve_schedule, Bin, FleshError, Manifest, ParamValue, ParameterSpec, ScheduleItem, Simulation};
use tapestry_core::thorns::flesh_for_parameters;

fn item(name: &str, bin: Bin) -> ScheduleItem {
    ScheduleItem::level(name, bin, |_| Ok(()))
}

/// Items `n0..n{k}` with the edges `(a, b)` ("a runs before b"), each
/// declared either on `a` as `before` or on `b` as `after`.
fn items(n: usize, edges: &[(usize, usize, bool)]) -> Vec<ScheduleItem> {
    let mut v: Vec<ScheduleItem> = (0..n).map(|i| item(&format!("n{i}"), Bin::Evol)).collect();
    for &(a, b, on_first) in edges {
        if on_first {
            v[a] = v[a].clone().before(&format!("n{b}"));
        } else {
            v[b] = v[b].clone().after(&format!("n{a}"));
        }
    }
    // a neighbour in another bin that everything refers to is ignored
    v.push(item("elsewhere", Bin::Analysis).before("n0"));
    if n > 1 {
        v[1] = v[1].clone().after("elsewhere");
    }
    v
}

/// Random DAG: edges only go from lower to higher rank of a random permutation.
fn dag() -> impl Strategy<Value = (usize, Vec<(usize, usize, bool)>)> {
    (1usize..25).prop_flat_map(|n| {
        let perm = Just((0..n).collect::<Vec<_>>()).prop_shuffle();
        let edges = prop::collection::vec((0..n, 0..n, any::<bool>()), 0..3 * n);
        (Just(n), perm, edges).prop_map(|(n, perm, edges)| {
            let edges = edges
                .into_iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, f)| if a < b { (perm[a], perm[b], f) } else { (perm[b], perm[a], f) })
                .collect();
            (n, edges)
        })
    })
}

proptest! {
    #[test]
    fn resolved_schedules_respect_every_declared_edge((n, edges) in dag()) {
        let v = items(n, &edges);
        let order: Vec<String> = resolve_schedule(&v, Bin::Evol).unwrap().iter().map(|i| i.name.clone()).collect();
        prop_assert_eq!(order.len(), n);
        let pos: HashMap<&str, usize> = order.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        prop_assert_eq!(pos.len(), n);
        for (a, b, _) in &edges {
            prop_assert!(pos[format!("n{a}").as_str()] < pos[format!("n{b}").as_str()], "n{} must precede n{}", a, b);
        }
        // deterministic
        let again: Vec<String> = resolve_schedule(&v, Bin::Evol).unwrap().iter().map(|i| i.name.clone()).collect();
        prop_assert_eq!(order, again);
    }

    #[test]
    fn a_closing_edge_is_reported_as_a_real_cycle((n, mut edges) in dag(), pick in any::<prop::sample::Index>()) {
        prop_assume!(!edges.is_empty());
        // close a path a -> b by adding b -> a
        let (a, b, _) = edges[pick.index(edges.len())];
        edges.push((b, a, true));
        let v = items(n, &edges);
        let declared: BTreeSet<(String, String)> = edges.iter().map(|(a, b, _)| (format!("n{a}"), format!("n{b}"))).collect();
        match resolve_schedule(&v, Bin::Evol) {
            Err(FleshError::Cycle { bin, members }) => {
                prop_assert_eq!(bin, Bin::Evol);
                prop_assert!(members.len() >= 2);
                for (i, m) in members.iter().enumerate() {
                    let next = &members[(i + 1) % members.len()];
                    prop_assert!(declared.contains(&(m.clone(), next.clone())), "{} -> {} is not an edge", m, next);
                }
            }
            other => prop_assert!(false, "expected a cycle, got {:?}", other.map(|o| o.len())),
        }
    }
}

fn wave(extra: &str) -> String {
    format!(
        "grid::points = 10\n\
         wave::initial_data = gaussian\n\
         flesh::max_iterations = 20\n\
         {extra}"
    )
}

fn start(text: &str) -> Simulation {
    let mut sim = Simulation::from_text(flesh_for_parameters(text).unwrap(), text).unwrap();
    sim.resume().unwrap();
    sim
}

fn outputs(sim: &Simulation) -> Vec<u64> {
    sim.events().iter().filter(|e| e.kind == "output").map(|e| e.iteration).collect()
}

#[test]
fn steering_the_output_frequency_takes_effect_at_the_requested_iteration() {
    let mut sim = start(&wave("io::out_every = 1\n"));
    for _ in 0..5 {
        sim.step().unwrap();
    }
    sim.set_parameter("io::out_every", ParamValue::Int(5), 11).unwrap();
    assert_eq!(sim.pending_changes(), 1);
    sim.run().unwrap();
    assert_eq!(sim.iteration(), 20);
    let mut want: Vec<u64> = (0..=10).collect();
    want.extend([15, 20]);
    assert_eq!(outputs(&sim), want);
    assert_eq!(sim.steering_log_text(), "11 io::out_every 1 5\n");
    assert_eq!(sim.pending_changes(), 0);
}

#[test]
fn a_change_for_a_past_iteration_applies_at_the_next_boundary() {
    let mut sim = start(&wave("io::out_every = 2\n"));
    for _ in 0..6 {
        sim.step().unwrap();
    }
    sim.set_parameter("io::out_every", ParamValue::Int(3), 2).unwrap();
    sim.step().unwrap();
    assert_eq!(sim.steering_log()[0].iteration, 7);
    assert_eq!(sim.params().int("io::out_every").unwrap(), 3);
}

#[test]
fn the_last_of_two_writes_wins_and_both_are_logged() {
    let mut sim = start(&wave(""));
    sim.set_parameter("mol::cfl", ParamValue::Real(0.2), 1).unwrap();
    sim.set_parameter("mol::cfl", ParamValue::Real(0.125), 1).unwrap();
    sim.step().unwrap();
    assert_eq!(sim.params().real("mol::cfl").unwrap(), 0.125);
    let log: Vec<(u64, &str, &str)> = sim.steering_log().iter().map(|c| (c.iteration, c.old.as_str(), c.new.as_str())).collect();
    assert_eq!(log, [(1, "0.25", "0.2"), (1, "0.2", "0.125")]);
}

#[test]
fn steering_refuses_fixed_unknown_and_out_of_range_parameters() {
    let mut sim = start(&wave(""));
    assert!(matches!(sim.set_parameter("grid::points", ParamValue::Int(12), 1), Err(FleshError::NotSteerable(_))));
    assert!(matches!(sim.set_parameter("no::such", ParamValue::Int(1), 1), Err(FleshError::UnknownParameter(_))));
    assert!(matches!(sim.set_parameter("mol::cfl", ParamValue::Real(7.0), 1), Err(FleshError::BadValue { .. })));
    assert!(sim.set_parameter_text("io::out_every", "often", 1).is_err());
    // integers are accepted where reals are expected
    let ack = sim.set_parameter("mol::cfl", ParamValue::Int(1), 1).unwrap();
    assert_eq!(ack.value, ParamValue::Real(1.0));
    assert_eq!(sim.pending_changes(), 1);
}

#[test]
fn two_thorns_cannot_claim_the_same_parameter() {
    let mut flesh = flesh_for_parameters("").unwrap();
    let err = flesh.register_thorn(Manifest::new("mine").param(ParameterSpec::real("mol::cfl", 0.5))).unwrap_err();
    match &err {
        FleshError::Duplicate { name, first, second, .. } => {
            assert_eq!(name, "mol::cfl");
            assert_eq!((first.as_str(), second.as_str()), ("mol", "mine"));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn added_thorn_items_run_in_schedule_order_every_iteration() {
    let text = wave("flesh::max_iterations = 3\n");
    let mut flesh = flesh_for_parameters(&text).unwrap();
    let record = |name: &'static str| move |ctx: &mut tapestry_core::flesh::LevelContext<'_>| -> Result<(), String> {
        ctx.record("probe", name);
        Ok(())
    };
    flesh
        .register_thorn(
            Manifest::new("probe")
                .item(ScheduleItem::level("probe::c", Bin::Analysis, record("c")).after("probe::b"))
                .item(ScheduleItem::level("probe::a", Bin::Analysis, record("a")))
                .item(ScheduleItem::level("probe::b", Bin::Analysis, record("b")).after("probe::a").before("probe::z"))
                .item(ScheduleItem::level("probe::z", Bin::Analysis, record("z"))),
        )
        .unwrap();
    let mut sim = Simulation::from_text(flesh, &text).unwrap();
    sim.resume().unwrap();
    sim.run().unwrap();
    let order = sim.schedule_order(Bin::Analysis);
    let probes: Vec<&str> = order.iter().copied().filter(|n| n.starts_with("probe::")).collect();
    let pos = |n: &str| probes.iter().position(|p| *p == n).unwrap();
    assert!(pos("probe::a") < pos("probe::b") && pos("probe::b") < pos("probe::c") && pos("probe::b") < pos("probe::z"));
    for it in 0..=3u64 {
        let seen: Vec<String> = sim
            .events()
            .iter()
            .filter(|e| e.kind == "probe" && e.iteration == it)
            .map(|e| format!("probe::{}", e.detail))
            .collect();
        assert_eq!(seen, probes, "iteration {it}");
    }
}

#[test]
fn the_wave_schedule_is_a_valid_order_of_its_declared_edges() {
    let sim = start(&wave(""));
    for bin in Bin::ALL {
        let order = sim.schedule_order(bin);
        let pos: HashMap<&str, usize> = order.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        for it in sim.flesh().items().iter().filter(|i| i.bin == bin) {
            for a in it.after.iter().filter(|a| pos.contains_key(a.as_str())) {
                assert!(pos[a.as_str()] < pos[it.name.as_str()], "{bin}: {a} before {}", it.name);
            }
            for b in it.before.iter().filter(|b| pos.contains_key(b.as_str())) {
                assert!(pos[it.name.as_str()] < pos[b.as_str()], "{bin}: {} before {b}", it.name);
            }
        }
    }
}
