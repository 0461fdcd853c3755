use ogre_core::annotation::*;
use ogre_core::domain::InvariantDomain;
use ogre_core::empire::{build_saturated_empire, Empire};
use ogre_core::fixtures::{example_program, EXAMPLE_DOMAIN};
use ogre_core::focus::compute_focus;
use ogre_core::logic::{eval_bool, Term, Value};
use ogre_core::petri::{co_marked, explore, PetriProgram, DEFAULT_MARKING_LIMIT};
use ogre_core::solver::{SmtSession, SolverConfig};
use ogre_core::validator::*;

fn session() -> Option<SmtSession> {
    let s = SmtSession::start(SolverConfig::resolve(None, None)).ok();
    if s.is_none() {
        eprintln!("solver unavailable; skipping");
    }
    s
}

fn config() -> SolverConfig {
    SolverConfig::resolve(None, None)
}

fn setup(s: &mut SmtSession) -> (PetriProgram, InvariantDomain, Empire) {
    let p = example_program();
    let d = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).unwrap();
    let e = build_saturated_empire(&p, &d, s).unwrap();
    (p, d, e)
}

fn failed(r: &Report) -> Vec<String> {
    r.failed().map(|v| v.name.clone()).collect()
}

#[test]
fn vc_counts_follow_the_net() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let og = imperial_og(&p, &d, &e, ImperialOptions::default()).unwrap();
    let co = co_marked(&p, &explore(&p, DEFAULT_MARKING_LIMIT).unwrap());
    let vcs = generate_vcs(&p, &og, &co).unwrap();
    let count = |k| vcs.iter().filter(|v| v.kind == k).count();
    assert_eq!(count(VcKind::Initial), 1);
    assert_eq!(count(VcKind::Inductive), 10);
    assert_eq!(count(VcKind::InterferenceFree), co.pairs().len());
    assert_eq!(count(VcKind::Safe), 2);
    assert_eq!(vcs.len(), 13 + co.pairs().len());
    assert!(vcs.iter().any(|v| v.name() == "vc_interference_free_p5@t1"));
}

#[test]
fn generated_annotations_are_valid() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let f = compute_focus(&p, &d, &e, &mut s).unwrap();
    let anns = [
        imperial_og(&p, &d, &e, ImperialOptions::default()).unwrap(),
        imperial_og(&p, &d, &e, ImperialOptions { share_ghost_values: false }).unwrap(),
        focused_og(&p, &d, &e, &f, ImperialOptions::default(), &mut s).unwrap(),
        naive_og(&p, &d, &mut s).unwrap(),
    ];
    for og in &anns {
        let r = validate(&p, og, Mode::Smt, &config(), 1).unwrap();
        assert_eq!(r.verdict, Verdict::Valid, "{:?}", failed(&r));
        assert!(r.vcs.iter().all(|v| v.result == VcResult::Unsat));
    }
    let r = validate(&p, &anns[0], Mode::Oracle { bound: DEFAULT_ORACLE_BOUND }, &config(), 1).unwrap();
    assert_eq!(r.verdict, Verdict::BoundedValid);
}

#[test]
fn weakened_p4_fails_on_te2() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let mut og = imperial_og(&p, &d, &e, ImperialOptions::default()).unwrap();
    og.omega[p.place("p4").unwrap().0] = Term::tt();
    let r = validate(&p, &og, Mode::Smt, &config(), 1).unwrap();
    assert_eq!(r.verdict, Verdict::Invalid);
    assert!(failed(&r).contains(&"vc_inductive_te2".to_string()));

    let vcs = generate_vcs_for(&p, &og).unwrap();
    let te2 = vcs.iter().find(|v| v.name() == "vc_inductive_te2").unwrap();
    match discharge_oracle(te2, &p, &og, DEFAULT_ORACLE_BOUND) {
        VcResult::Sat { model } => {
            assert_eq!(model["x"], Value::Int(2));
            assert!(eval_bool(&te2.formula(), &model).unwrap());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn top_error_annotation_breaks_safety() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let mut og = imperial_og(&p, &d, &e, ImperialOptions::default()).unwrap();
    og.omega[p.place("e2").unwrap().0] = Term::tt();
    let r = validate(&p, &og, Mode::Smt, &config(), 1).unwrap();
    assert!(failed(&r).contains(&"vc_safe_e2".to_string()));
}

#[test]
fn top_annotation_without_error_places_is_valid() {
    if session().is_none() {
        return;
    }
    let mut p = example_program();
    p.errors.clear();
    let og = OgAnnotation {
        ghosts: vec![],
        rho: Default::default(),
        omega: vec![Term::tt(); p.places.len()],
        gamma: vec![Default::default(); p.transitions.len()],
    };
    let r = validate(&p, &og, Mode::Smt, &config(), 1).unwrap();
    assert_eq!(r.verdict, Verdict::Valid);
    assert!(r.vcs.iter().all(|v| v.kind != VcKind::Safe));
}

#[test]
fn parallel_discharge_is_deterministic() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let mut og = imperial_og(&p, &d, &e, ImperialOptions::default()).unwrap();
    og.omega[p.place("p2").unwrap().0] = Term::tt();
    let one = validate(&p, &og, Mode::Smt, &config(), 1).unwrap();
    let three = validate(&p, &og, Mode::Smt, &config(), 3).unwrap();
    let strip = |r: &Report| r.vcs.iter().map(|v| (v.name.clone(), matches!(v.result, VcResult::Sat { .. }))).collect::<Vec<_>>();
    assert_eq!(strip(&one), strip(&three));
    assert_eq!(one.verdict, three.verdict);
}

#[test]
fn oracle_witnesses_agree_with_smt() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let mut og = imperial_og(&p, &d, &e, ImperialOptions::default()).unwrap();
    let t4 = p.transition("t4").unwrap().0;
    og.gamma[t4].clear();
    let vcs = generate_vcs_for(&p, &og).unwrap();
    let mut refuted = 0;
    for vc in &vcs {
        if let VcResult::Sat { model } = discharge_oracle(vc, &p, &og, 3) {
            refuted += 1;
            assert!(eval_bool(&vc.formula(), &model).unwrap());
            assert!(matches!(discharge_smt(vc, &mut s), VcResult::Sat { .. }), "{}", vc.name());
        }
    }
    assert!(refuted > 0);
}

#[test]
fn missing_solver_is_unknown_never_valid() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let og = imperial_og(&p, &d, &e, ImperialOptions::default()).unwrap();
    let broken = SolverConfig::resolve(Some("/nonexistent/solver -in"), None);
    let r = validate(&p, &og, Mode::Smt, &broken, 2).unwrap();
    assert_eq!(r.verdict, Verdict::Unknown);
    let r = validate(&p, &og, Mode::Both { bound: 2 }, &broken, 1).unwrap();
    assert_eq!(r.verdict, Verdict::Unknown);
}

#[test]
fn dumped_scripts_end_in_check_sat() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let og = imperial_og(&p, &d, &e, ImperialOptions::default()).unwrap();
    let vcs = generate_vcs_for(&p, &og).unwrap();
    let dir = tempfile::tempdir().unwrap();
    dump_vcs(&vcs, dir.path()).unwrap();
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), vcs.len());
    let text = std::fs::read_to_string(dir.path().join("vc_inductive_t1.smt2")).unwrap();
    assert!(text.trim_end().ends_with("(check-sat)"));
    assert!(text.contains("(set-logic QF_LIA)"));
}

#[test]
fn undeclared_symbols_are_rejected() {
    let p = example_program();
    let og = OgAnnotation {
        ghosts: vec![],
        rho: Default::default(),
        omega: vec![Term::var("h", ogre_core::logic::Sort::Bool); p.places.len()],
        gamma: vec![Default::default(); p.transitions.len()],
    };
    assert!(matches!(generate_vcs_for(&p, &og), Err(ValidatorError::Undeclared(n)) if n == "h"));
}
