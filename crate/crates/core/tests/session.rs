use mfmes_core::{by_name, Budget, RunConfig, Session};

#[test]
fn drive_a_session_by_hand() {
    let objective = by_name("styblinski-tang", 0).unwrap();
    let mut cfg = RunConfig::new(3, Budget::Iterations(4));
    cfg.n_candidates = 200;
    cfg.hyperopt_budget = 30;
    let mut session = Session::new(objective.as_ref(), cfg).unwrap();
    let n0 = session.data().len();
    for _ in 0..4 {
        let d = session.decide(&[]).unwrap();
        assert!(d.result.m < objective.n_fidelities());
        assert!(d.result.value.is_finite());
        let y = objective.evaluate(&d.result.x, d.result.m).unwrap();
        session.observe(d.result.x, d.result.m, y).unwrap();
    }
    assert_eq!(session.data().len(), n0 + 4);
    assert_eq!(session.decisions(), 4);
    let x = session.recommend().unwrap();
    assert_eq!(x.len(), objective.dim());
    assert!(x.iter().zip(objective.bounds()).all(|(v, (lo, hi))| lo <= v && v <= hi));
}

#[test]
fn pending_queries_steer_the_next_decision() {
    let objective = by_name("gp-synthetic", 4).unwrap();
    let mut cfg = RunConfig::new(5, Budget::Iterations(2));
    cfg.n_candidates = 300;
    let mut session = Session::new(objective.as_ref(), cfg).unwrap();
    let first = session.decide(&[]).unwrap().result;
    let second = session.decide(&[(first.x.clone(), first.m)]).unwrap().result;
    assert!(second.x != first.x || second.m != first.m);
}
