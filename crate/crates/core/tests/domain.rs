use std::collections::BTreeMap;

use ogre_core::domain::*;
use ogre_core::fixtures::{example_program, EXAMPLE_DOMAIN};
use ogre_core::logic::{parse_formula, Term};
use ogre_core::petri::PetriProgram;
use ogre_core::solver::{SmtSession, SolverConfig};

fn session() -> Option<SmtSession> {
    let s = SmtSession::start(SolverConfig::resolve(None, None)).ok();
    if s.is_none() {
        eprintln!("solver unavailable; skipping");
    }
    s
}

fn index_of(c: &DomainComponent, p: &PetriProgram, text: &str) -> usize {
    let f = parse_formula(text, &p.decls).unwrap();
    c.formulas().iter().position(|g| *g == f).unwrap()
}

#[test]
fn product_posts() {
    let Some(mut s) = session() else { return };
    let p = example_program();
    let d = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).unwrap();
    let a1 = &d.components[0];
    let a2 = &d.components[1];
    let t = |n| p.transition(n).unwrap();
    let x0 = index_of(a2, &p, "(> x 0)");
    assert_eq!(a2.post(&p, x0, t("t4"), &mut s, 1).unwrap(), index_of(a2, &p, "(> x 1)"));
    let yx = index_of(a1, &p, "(<= y x)");
    assert_eq!(a1.post(&p, yx, t("t7"), &mut s, 0).unwrap(), yx);
    // Without the table entry the strongest post would be y<x.
    assert_eq!(a1.post(&p, yx, t("t4"), &mut s, 0).unwrap(), index_of(a1, &p, "(< y x)"));
    assert_eq!(d.post(&p, &LawVector::Bottom, t("t0"), &mut s).unwrap(), LawVector::Bottom);
    let ylt = index_of(a1, &p, "(< y x)");
    let law = d.vector(vec![ylt, index_of(a2, &p, "(> x 1)")]);
    assert_eq!(d.post(&p, &law, t("te1"), &mut s).unwrap(), LawVector::Bottom);
}

#[test]
fn certification_and_safety() {
    let Some(mut s) = session() else { return };
    let p = example_program();
    let d = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).unwrap();
    let rep = certify_domain(&p, &d, &mut s);
    assert!(rep.certified(), "{rep:?}");
    let reach = abstract_reach(&p, &d, &mut s).unwrap();
    assert!(is_safe(&p, &reach).safe);
    let law = |a: &str, b: &str| {
        d.vector(vec![index_of(&d.components[0], &p, a), index_of(&d.components[1], &p, b)])
    };
    assert!(reach.contains(&p.initial, &d.top()));
    assert!(reach.contains(&p.marking(&["p1", "p5"]).unwrap(), &law("true", "(> x 0)")));
    assert!(reach.contains(&p.marking(&["p4", "p7"]).unwrap(), &law("(< y x)", "(> x 2)")));

    // A bad table entry is caught with the expected witness.
    let mut raw = d.to_raw(&p);
    raw.components[1].post.table.push(TableEntryJson {
        from: 1,
        transition: "t4".into(),
        to: 3,
    });
    let bad = InvariantDomain::from_raw(&raw, &p).unwrap();
    let rep = certify_domain(&p, &bad, &mut s);
    assert_eq!(rep.violations.len(), 1);
    assert_eq!(rep.violations[0].witness_pre["x"].as_int(), Some(1));
}

#[test]
fn weak_domains_are_unsafe() {
    let Some(mut s) = session() else { return };
    let p = example_program();
    let trivial = InvariantDomain::new(vec![DomainComponent::with_formulas(
        vec![Term::tt(), Term::ff()],
        PostMode::Table,
        BTreeMap::new(),
        0,
    )
    .unwrap()])
    .unwrap();
    assert!(certify_domain(&p, &trivial, &mut s).certified());
    let reach = abstract_reach(&p, &trivial, &mut s).unwrap();
    let rep = is_safe(&p, &reach);
    assert!(!rep.safe);
    assert!(rep.offending.contains(&(p.marking(&["e2"]).unwrap(), trivial.top())));

    let full = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).unwrap();
    let a2_only = InvariantDomain::new(vec![full.components[1].clone()]).unwrap();
    let reach = abstract_reach(&p, &a2_only, &mut s).unwrap();
    let rep = is_safe(&p, &reach);
    assert!(!rep.safe);
    let e1 = p.place("e1").unwrap();
    assert!(rep.offending.iter().any(|(m, _)| m.contains(e1)));
}

#[test]
fn predicate_abstraction() {
    let Some(mut s) = session() else { return };
    let p = example_program();
    let f = |t: &str| parse_formula(t, &p.decls).unwrap();
    let c = predicate_abstraction_domain(vec![f("(> x 0)"), f("(> x 1)"), f("(> x 2)")]).unwrap();
    let t = |n| p.transition(n).unwrap();
    assert_eq!(c.post(&p, 0b001, t("t4"), &mut s, 0).unwrap(), 0b011);
    assert_eq!(c.post(&p, 0, t("t0"), &mut s, 0).unwrap(), 0b001);
    assert_eq!(c.post(&p, 0b100, t("te2"), &mut s, 0).unwrap(), c.bottom());
    assert_eq!(c.formula(0), Term::tt());
    assert_eq!(c.formula(c.bottom()), Term::ff());
    let d = InvariantDomain::new(vec![c]).unwrap();
    abstract_reach(&p, &d, &mut s).unwrap();
    assert!(certify_domain(&p, &d, &mut s).certified());
}

#[test]
fn json_errors() {
    let p = example_program();
    let missing = r#"{"components":[{"formulas":["true","(> x 0)"],"post":{"mode":"strongest"}}]}"#;
    assert!(matches!(InvariantDomain::from_json(missing, &p), Err(DomainError::MissingLiterals(0))));
    let unknown = r#"{"components":[{"formulas":["true","false"],"post":{"mode":"table","table":[{"from":0,"transition":"tz","to":1}]}}]}"#;
    assert!(matches!(InvariantDomain::from_json(unknown, &p), Err(DomainError::UnknownTransition { .. })));
    assert!(matches!(
        InvariantDomain::from_json(r#"{"components":[]}"#, &p),
        Err(DomainError::Empty)
    ));
}
