use ogre_core::domain::{abstract_reach, InvariantDomain, LawVector};
use ogre_core::empire::*;
use ogre_core::fixtures::{example_program, EXAMPLE_DOMAIN};
use ogre_core::logic::parse_formula;
use ogre_core::petri::{co_related, explore, PetriProgram, DEFAULT_MARKING_LIMIT};
use ogre_core::solver::{SmtSession, SolverConfig};

fn session() -> Option<SmtSession> {
    let s = SmtSession::start(SolverConfig::resolve(None, None)).ok();
    if s.is_none() {
        eprintln!("solver unavailable; skipping");
    }
    s
}

fn terr(p: &PetriProgram, regions: &[&[&str]]) -> Territory {
    Territory::new(
        regions
            .iter()
            .map(|r| Region::new(r.iter().map(|n| p.place(n).unwrap()).collect()))
            .collect(),
    )
}

fn law(p: &PetriProgram, d: &InvariantDomain, a: &str, b: &str) -> LawVector {
    let ix = |k: usize, s: &str| {
        let f = parse_formula(s, &p.decls).unwrap();
        d.components[k].formulas().iter().position(|g| *g == f).unwrap()
    };
    d.vector(vec![ix(0, a), ix(1, b)])
}

#[test]
fn territory_operations() {
    let p = example_program();
    let g = explore(&p, DEFAULT_MARKING_LIMIT).unwrap();
    let co = co_related(&p, &g);
    let t = |n| p.transition(n).unwrap();
    let tau = terr(&p, &[&["p2", "p3"], &["p5", "p6"]]);
    let expected: Vec<_> = [["p2", "p5"], ["p2", "p6"], ["p3", "p5"], ["p3", "p6"]]
        .iter()
        .map(|m| p.marking(m).unwrap())
        .collect();
    assert_eq!(treaty(&tau), expected);
    assert_eq!(treaty(&terr(&p, &[&["p0"]])), vec![p.marking(&["p0"]).unwrap()]);
    assert_eq!(
        treaty(&terr(&p, &[&["p1"], &["p5", "p6"]])),
        vec![p.marking(&["p1", "p5"]).unwrap(), p.marking(&["p1", "p6"]).unwrap()]
    );

    assert!(enabled_in_territory(&p, &terr(&p, &[&["p4"], &["p7"]]), t("te2")));
    assert!(!enabled_in_territory(&p, &terr(&p, &[&["p4"], &["p5", "p6"]]), t("te2")));
    assert!(enabled_in_territory(&p, &terr(&p, &[&["p0"]]), t("t0")));

    assert_eq!(bystanders(&p, t("t1"), &terr(&p, &[&["p1"], &["p5", "p6"]])), terr(&p, &[&["p5", "p6"]]).regions());
    assert!(bystanders(&p, t("t0"), &terr(&p, &[&["p0"]])).is_empty());
    assert!(bystanders(&p, t("te2"), &terr(&p, &[&["p4"], &["p7"]])).is_empty());

    assert_eq!(replaced(&p, t("t0"), &terr(&p, &[&["p0"]])).unwrap(), terr(&p, &[&["p1"], &["p5"]]));
    assert_eq!(
        replaced(&p, t("t1"), &terr(&p, &[&["p1"], &["p5", "p6"]])).unwrap(),
        terr(&p, &[&["p2"], &["p5", "p6"]])
    );
    assert_eq!(replaced(&p, t("te2"), &terr(&p, &[&["p4"], &["p7"]])).unwrap(), terr(&p, &[&["e2"]]));

    let t15 = terr(&p, &[&["p1"], &["p5"]]);
    assert!(extendable(&p, &t15, t("t5"), &co));
    assert!(!extendable(&p, &terr(&p, &[&["p0"]]), t("t0"), &co));
    let q2 = terr(&p, &[&["p2", "p3"], &["p5", "p6"]]);
    assert!(extendable(&p, &q2, t("t3"), &co));
    assert_eq!(extended(&p, t("t3"), &q2, &co).unwrap(), q2);
    assert_eq!(extended(&p, t("t5"), &t15, &co).unwrap(), terr(&p, &[&["p1"], &["p5", "p6"]]));
    assert_eq!(
        extended(&p, t("t2"), &terr(&p, &[&["p2"], &["p5", "p6"]]), &co).unwrap(),
        q2
    );
}

#[test]
fn saturated_successors() {
    let Some(mut s) = session() else { return };
    let p = example_program();
    let d = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).unwrap();
    let r = saturated_successor(&p, &d, &law(&p, &d, "true", "(> x 0)"), &[], terr(&p, &[&["p1"], &["p5"]]), &mut s).unwrap();
    assert_eq!(r, terr(&p, &[&["p1"], &["p5", "p6"]]));
    let rb = terr(&p, &[&["p5", "p6"]]).regions().to_vec();
    let r = saturated_successor(&p, &d, &law(&p, &d, "(<= y x)", "(> x 0)"), &rb, terr(&p, &[&["p2"], &["p5", "p6"]]), &mut s).unwrap();
    assert_eq!(r, terr(&p, &[&["p2", "p3"], &["p5", "p6"]]));
    // When the required bystanders cover every candidate's pre-region, nothing changes.
    let start = terr(&p, &[&["p2"], &["p5"]]);
    let all = start.regions().to_vec();
    let r = saturated_successor(&p, &d, &law(&p, &d, "(<= y x)", "(> x 0)"), &all, start.clone(), &mut s).unwrap();
    assert_eq!(r, start);
}

#[test]
fn saturated_empire_matches_expected_machine() {
    let Some(mut s) = session() else { return };
    let p = example_program();
    let d = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).unwrap();
    let e = build_saturated_empire(&p, &d, &mut s).unwrap();
    let expected: Vec<(Territory, LawVector)> = vec![
        (terr(&p, &[&["p0"]]), law(&p, &d, "true", "true")),
        (terr(&p, &[&["p1"], &["p5", "p6"]]), law(&p, &d, "true", "(> x 0)")),
        (terr(&p, &[&["p2", "p3"], &["p5", "p6"]]), law(&p, &d, "(<= y x)", "(> x 0)")),
        (terr(&p, &[&["p1"], &["p7"]]), law(&p, &d, "true", "(> x 1)")),
        (terr(&p, &[&["p4"], &["p5", "p6"]]), law(&p, &d, "(< y x)", "(> x 1)")),
        (terr(&p, &[&["p2", "p3"], &["p7"]]), law(&p, &d, "(<= y x)", "(> x 1)")),
        (terr(&p, &[&["p4"], &["p7"]]), law(&p, &d, "(< y x)", "(> x 2)")),
    ];
    let got: Vec<(Territory, LawVector)> = e.states.iter().map(|s| (s.territory.clone(), s.law.clone())).collect();
    assert_eq!(got, expected);
    let mut edges: Vec<(usize, String, usize)> = e
        .edges
        .iter()
        .map(|(&(a, t), &b)| (a, p.trans(t).name.clone(), b))
        .collect();
    edges.sort();
    let mut want: Vec<(usize, String, usize)> = [
        (0, "t0", 1),
        (1, "t1", 2),
        (1, "t5", 1),
        (1, "t6", 1),
        (1, "t7", 3),
        (2, "t2", 2),
        (2, "t3", 2),
        (2, "t4", 4),
        (2, "t5", 2),
        (2, "t6", 2),
        (2, "t7", 5),
        (3, "t1", 5),
        (4, "t5", 4),
        (4, "t6", 4),
        (4, "t7", 6),
        (5, "t2", 5),
        (5, "t3", 5),
        (5, "t4", 6),
    ]
    .iter()
    .map(|(a, t, b)| (*a, t.to_string(), *b))
    .collect();
    want.sort();
    assert_eq!(edges, want);
    assert!(e.diagnostics.is_empty(), "{:?}", e.diagnostics);
    let rep = check_empire_valid(&p, &d, &e, &mut s).unwrap();
    assert!(rep.valid(), "{rep:?}");
    // Round trip through JSON.
    let raw = e.to_raw(&p, &d);
    let back = Empire::from_raw(&raw, &p, &d).unwrap();
    assert_eq!(back.states, e.states);
    assert_eq!(back.edges, e.edges);
}

#[test]
fn naive_empire_matches_abstract_reach() {
    let Some(mut s) = session() else { return };
    let p = example_program();
    let d = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).unwrap();
    let e = build_naive_empire(&p, &d, &mut s).unwrap();
    assert_eq!(e.states[0].territory, terr(&p, &[&["p0"]]));
    assert_eq!(e.states[0].law, d.top());
    let x0 = law(&p, &d, "true", "(> x 0)");
    assert!(e.state_of(&EmpireState { territory: terr(&p, &[&["p1"], &["p5"]]), law: x0.clone() }).is_some());
    assert!(e.state_of(&EmpireState { territory: terr(&p, &[&["p1"], &["p6"]]), law: x0 }).is_some());
    // Oracle: naive states are exactly the non-bottom abstract configurations.
    let reach = abstract_reach(&p, &d, &mut s).unwrap();
    let oracle = reach.configs.iter().filter(|(_, l)| !l.is_bottom()).count();
    assert_eq!(e.len(), oracle);
    assert!(check_empire_valid(&p, &d, &e, &mut s).unwrap().valid());
}

#[test]
fn mutated_empires_are_rejected() {
    let Some(mut s) = session() else { return };
    let p = example_program();
    let d = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).unwrap();
    let e = build_saturated_empire(&p, &d, &mut s).unwrap();
    let mut cut = e.clone();
    cut.edges.remove(&(2, p.transition("t4").unwrap()));
    let rep = check_empire_valid(&p, &d, &cut, &mut s).unwrap();
    assert!(rep.violated(EmpireCondition::InductiveLaw));
    let mut bad_init = e.clone();
    bad_init.states[0].law = law(&p, &d, "true", "(> x 0)");
    assert!(check_empire_valid(&p, &d, &bad_init, &mut s).unwrap().violated(EmpireCondition::InitialLaw));
}
