mod common;

use percept_mc::modelcheck::{prob_reach, prob_reach_bounded, SolverMode};

#[test]
fn suite_is_well_formed() {
    let suite = common::suite();
    assert!(suite.len() >= 20);
    for c in &suite {
        let m = c.dtmc();
        let t = c.target_expr();
        assert!(m.num_states() <= 1000, "{}", c.name);
        let r = prob_reach(&m, &t, SolverMode::Exact).unwrap();
        let exact = r.exact_at_initial().unwrap().clone();
        if let Some(e) = &c.expected {
            assert_eq!(&exact, e, "{}", c.name);
        }
        // simulation truncates runs at ten steps per state; the suite keeps that harmless
        let steps = 10 * m.num_states() as u64;
        let b = prob_reach_bounded(&m, &t, steps, SolverMode::Float).unwrap();
        assert!((r.at_initial() - b.at_initial()).abs() < 1e-5, "{}: {} vs {}", c.name, r.at_initial(), b.at_initial());
        eprintln!(
            "{:16} states={:4} acyclic={} value={:.6}",
            c.name,
            m.num_states(),
            common::is_acyclic(&m),
            r.at_initial()
        );
    }
}
