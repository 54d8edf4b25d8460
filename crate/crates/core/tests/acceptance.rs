//! One line per acceptance criterion. Exits non-zero when a criterion fails
//! for a reason other than the documented unreachable bound on abort
//! probability.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num::{One, Zero};
use percept_mc::abstraction::{build_abstraction, build_guarded_abstraction, estimate_beta, PerceptionAbstraction};
use percept_mc::casestudy::{self, CaseData, ModelKind, ScenarioConfig, SweepSpec};
use percept_mc::confidence::{synthesize_interval, synthesize_levels, CiOptions, ConfidenceQuery, QueryRow};
use percept_mc::guard::GuardConfig;
use percept_mc::lang::ast::{Assignment, Expr};
use percept_mc::lang::{emit_abstraction_commands, expand, parse_model, render_model, EmitOptions, WeightStyle};
use percept_mc::modelcheck::{check, prob_reach, SolverMode};
use percept_mc::parametric::{param_reach, parameterize, ElimOptions};
use percept_mc::poly::RationalFunction;
use percept_mc::ratio::{self, Rational};
use percept_mc::sim::{enumerate_paths, monte_carlo};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    /// Failures that count against the build.
    failures: Vec<String>,
    /// Failures against a bound this instance cannot meet.
    gaps: Vec<String>,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            failures: Vec::new(),
            gaps: Vec::new(),
            detail: String::new(),
        }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn run(index: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if elapsed > budget {
        o.failures.push(format!("took {elapsed:.1?}, budget {budget:?}"));
    }
    let pass = o.failures.is_empty() && o.gaps.is_empty();
    let mut notes: Vec<String> = o.failures.iter().chain(&o.gaps).cloned().collect();
    if !o.detail.is_empty() {
        notes.insert(0, o.detail.clone());
    }
    println!(
        "[{}] {index}. {name} ({:.2} s){}{}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        if notes.is_empty() { "" } else { ": " },
        notes.join("; ")
    );
    o.failures.is_empty()
}

fn matches_published(a: &PerceptionAbstraction, row: &str, published: &[(&str, &str)]) -> Result<(), String> {
    let k = a.space().index_of(row).ok_or(format!("no row {row}"))?;
    for (col, text) in published {
        let c = a.space().index_of(col).ok_or(format!("no column {col}"))?;
        let digits = text.split_once('.').map(|(_, d)| d.len()).unwrap_or(0).min(3);
        let got = ratio::round_half_even(&a.prob(k, c), digits);
        if ratio::parse_decimal(&got) != ratio::parse_decimal(text) {
            return Err(format!("row {row} column {col}: {got} vs published {text}"));
        }
    }
    Ok(())
}

fn abstraction_fidelity() -> Outcome {
    let mut o = Outcome::new();
    let data = CaseData::bundled();
    let he = build_abstraction(&data.he).unwrap();
    let cte = build_abstraction(&data.cte).unwrap();
    let he_g = build_guarded_abstraction(&data.he_guarded).unwrap();
    let cte_g = build_guarded_abstraction(&data.cte_guarded).unwrap();
    let checks = [
        (&he, "0", vec![("0", "0.675"), ("1", "0.304"), ("2", "0.021")]),
        (&he, "1", vec![("0", "0.043"), ("1", "0.957"), ("2", "0.0")]),
        (&he, "2", vec![("0", "0.377"), ("1", "0.107"), ("2", "0.516")]),
        (&cte, "0", vec![("3", "0.0"), ("1", "0.01"), ("0", "0.842"), ("2", "0.148"), ("4", "0.0")]),
        (&he_g, "0", vec![("1", "0.25"), ("0", "0.727"), ("2", "0.023")]),
        (&cte_g, "0", vec![("3", "0.0"), ("1", "0.01"), ("0", "0.909"), ("2", "0.081"), ("4", "0.0")]),
    ];
    let mut n = 0;
    for (a, row, published) in &checks {
        n += published.len();
        if let Err(e) = matches_published(a, row, published) {
            o.failures.push(e);
        }
    }
    let beta = estimate_beta(11108, 9125).unwrap().beta_f64();
    o.expect((beta - 0.821).abs() <= 0.0005, || format!("beta {beta}"));
    o.detail = format!("{n} published entries, beta = {beta:.5}");
    o
}

fn oracle_equivalence() -> Outcome {
    let mut o = Outcome::new();
    let suite = common::suite();
    let mut enumerated = 0;
    for (i, c) in suite.iter().enumerate() {
        let m = c.dtmc();
        let t = c.target_expr();
        let r = prob_reach(&m, &t, SolverMode::Exact).unwrap();
        let exact = r.exact_at_initial().unwrap().clone();
        if common::is_acyclic(&m) {
            enumerated += 1;
            match enumerate_paths(&m, &t, common::longest_path(&m)) {
                Ok(v) => o.expect(v == exact, || format!("{}: enumeration {v} vs {exact}", c.name)),
                Err(e) => o.failures.push(format!("{}: {e}", c.name)),
            }
        }
        let est = monte_carlo(&m, &t, 1_000_000, 1000 + i as u64).unwrap();
        let v = ratio::to_f64(&exact);
        o.expect(est.agrees_with(v, 4.0), || {
            format!("{}: simulation {} +- {} vs {v}", c.name, est.mean, est.stderr)
        });
    }
    o.detail = format!("{} models, {enumerated} enumerated, 10^6 runs each", suite.len());
    o
}

fn random_valuation(pm: &percept_mc::parametric::ParamDtmc, rng: &mut ChaCha8Rng) -> Vec<Rational> {
    let mut point = vec![Rational::zero(); pm.params().len()];
    for row in pm.param_rows() {
        let w: Vec<u64> = (0..=row.params.len()).map(|_| rng.random_range(1..=1000)).collect();
        let total: u64 = w.iter().sum();
        for (j, &p) in row.params.iter().enumerate() {
            point[p as usize] = ratio::frac(w[j], total);
        }
    }
    point
}

fn parametric_consistency() -> Outcome {
    let mut o = Outcome::new();
    let suite = common::suite();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut evaluations = 0;
    for c in &suite {
        let m = c.dtmc();
        let t = c.target_expr();
        let pm = c.param(&m);
        let rf = match param_reach(&pm, &t, ElimOptions::default()) {
            Ok(rf) => rf,
            Err(e) => {
                o.failures.push(format!("{}: {e}", c.name));
                continue;
            }
        };
        for _ in 0..200 {
            let point = random_valuation(&pm, &mut rng);
            let inst = pm.instantiate(&point).unwrap();
            let want = prob_reach(&inst, &t, SolverMode::Exact).unwrap().exact_at_initial().unwrap().clone();
            let got = rf.eval(&point).unwrap();
            evaluations += 1;
            if got != want {
                o.failures.push(format!("{}: {got} vs {want}", c.name));
                break;
            }
        }
    }
    o.detail = format!("{} models, {evaluations} valuations", suite.len());
    o
}

fn two_row_query(a: (u64, u64), b: (u64, u64), delta: f64) -> ConfidenceQuery {
    let x = RationalFunction::var(0);
    let y = RationalFunction::var(1);
    ConfidenceQuery {
        delta,
        rf: &x + &(&x.one_minus() * &y),
        rows: vec![
            QueryRow {
                name: "x".into(),
                params: vec![0],
                counts: vec![a.0, a.1],
            },
            QueryRow {
                name: "y".into(),
                params: vec![1],
                counts: vec![b.0, b.1],
            },
        ],
        num_params: 2,
    }
}

fn confidence_properties() -> Outcome {
    let mut o = Outcome::new();
    let levels = [0.95, 0.96, 0.97, 0.98, 0.99];
    let opts = CiOptions::default();

    // containment and nesting, on synthetic queries and on the case study
    let mut queries: Vec<(String, ConfidenceQuery)> = vec![
        ("x+(1-x)y".into(), two_row_query((30, 70), (50, 50), 0.05)),
        ("x+(1-x)y skewed".into(), two_row_query((2, 998), (999, 1), 0.05)),
    ];
    let spec = SweepSpec::new(3, 3, true);
    for (kind, n) in [(ModelKind::M1, 2), (ModelKind::M1, 3), (ModelKind::M2, 2)] {
        for cell in casestudy::confidence_cells(&spec, kind, &[n]).unwrap() {
            let m = expand(&cell.ast, &cell.bindings).unwrap();
            let pm = parameterize(&m, &cell.rows, true).unwrap();
            let rf = param_reach(&pm, &cell.target, ElimOptions::default()).unwrap();
            let name = format!("{} N={n} property {}", kind.name(), cell.property_index);
            queries.push((name, ConfidenceQuery::from_param(&pm, rf, 0.05)));
        }
    }
    for (name, q) in &queries {
        let point = q.rf.eval_f64(&q.point_estimate());
        let res = synthesize_levels(q, &levels, opts).unwrap();
        for r in &res {
            o.expect(r.contains(point), || format!("{name} at {}: {point} outside [{}, {}]", r.confidence, r.low, r.high));
        }
        for w in res.windows(2) {
            o.expect(w[1].low <= w[0].low && w[0].high <= w[1].high, || {
                format!("{name}: {} not nested in {}", w[0].confidence, w[1].confidence)
            });
        }
    }

    // width under x100 more observations
    let mut ratios = Vec::new();
    for (a, b) in [((30, 70), (50, 50)), ((20, 80), (60, 40))] {
        let w1 = synthesize_interval(&two_row_query(a, b, 0.05), opts).unwrap().width();
        let w100 = synthesize_interval(&two_row_query((a.0 * 100, a.1 * 100), (b.0 * 100, b.1 * 100), 0.05), opts)
            .unwrap()
            .width();
        ratios.push(w1 / w100);
    }
    for r in &ratios {
        o.expect((8.0..=12.0).contains(r), || format!("width ratio {r:.2}"));
    }

    // coverage over simulated datasets
    let (px, py, n) = (0.3, 0.5, 500u64);
    let truth = px + (1.0 - px) * py;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 1000;
    let mut covered = 0;
    for _ in 0..trials {
        let cx = (0..n).filter(|_| rng.random::<f64>() < px).count() as u64;
        let cy = (0..n).filter(|_| rng.random::<f64>() < py).count() as u64;
        let r = synthesize_interval(&two_row_query((cx, n - cx), (cy, n - cy), 0.05), opts).unwrap();
        covered += r.contains(truth) as usize;
    }
    let coverage = covered as f64 / trials as f64;
    o.expect(coverage >= 0.93, || format!("coverage {coverage}"));
    o.detail = format!(
        "{} queries x {} levels, width ratios {:.2}/{:.2}, coverage {coverage:.3}",
        queries.len(),
        levels.len(),
        ratios[0],
        ratios[1]
    );
    o
}

fn case_study() -> Outcome {
    let mut o = Outcome::new();
    let spec = SweepSpec::new(30, 3, true);
    let start = Instant::now();
    let rows = casestudy::run_sweep(&spec).unwrap();
    let sweep_time = start.elapsed();
    o.expect(sweep_time < Duration::from_secs(60), || format!("sweep took {sweep_time:.1?}"));
    o.expect(rows.len() == 150, || format!("{} sweep rows", rows.len()));
    let series = |model: ModelKind, prop: usize| -> Vec<Rational> {
        rows.iter()
            .filter(|r| r.model == model && r.property == prop)
            .map(|r| r.exact.clone().expect("exact value"))
            .collect()
    };
    for p in [1, 2] {
        let m1 = series(ModelKind::M1, p);
        let m2 = series(ModelKind::M2, p);
        o.expect(m1.windows(2).all(|w| w[0] <= w[1]), || format!("m1 property {p} decreases in N"));
        for (i, (a, b)) in m1.iter().zip(&m2).enumerate() {
            o.expect(b <= a, || format!("m2 > m1 for property {p} at N={}", i + 1));
        }
    }
    let p3 = series(ModelKind::M2, 3);
    o.expect(p3.iter().all(|v| v > &Rational::zero()), || "property 3 not positive".into());
    let worst = p3.iter().map(ratio::to_f64).fold(0.0, f64::max);
    let over: Vec<usize> = (0..p3.len()).filter(|&i| ratio::to_f64(&p3[i]) >= 1e-3).map(|i| i + 1).collect();
    if !over.is_empty() {
        o.gaps.push(format!(
            "property 3 >= 1e-3 for {} of 30 horizons (max {worst:.4}; one-round abort alone is (1-beta)^3 = {:.4})",
            over.len(),
            (1983.0f64 / 11108.0).powi(3)
        ));
    }
    let id_cte = casestudy::identity_abstraction(&casestudy::CTE_LABELS);
    let id_he = casestudy::identity_abstraction(&casestudy::HE_LABELS);
    for n in 1..=30 {
        let m = expand(&casestudy::build_m1(&ScenarioConfig::new(n), &id_cte, &id_he).unwrap(), &BTreeMap::new()).unwrap();
        for p in [casestudy::property_1(), casestudy::property_2()] {
            let r = check(&m, &p, SolverMode::Exact).unwrap();
            o.expect(r.exact_at_initial().unwrap().is_zero(), || format!("identity abstraction unsafe at N={n}"));
        }
    }
    let last = |m, p| ratio::to_f64(series(m, p).last().unwrap());
    o.detail = format!(
        "sweep {:.1} s; N=30: m1 {:.4}/{:.4}, m2 {:.4}/{:.4}/{:.4}",
        sweep_time.as_secs_f64(),
        last(ModelKind::M1, 1),
        last(ModelKind::M1, 2),
        last(ModelKind::M2, 1),
        last(ModelKind::M2, 2),
        last(ModelKind::M2, 3)
    );
    o
}

fn guard_noop() -> Outcome {
    let mut o = Outcome::new();
    let (c, h) = CaseData::bundled().unguarded().unwrap();
    let g = GuardConfig::new(Rational::one(), 3);
    for n in [1, 5, 10] {
        let cfg = ScenarioConfig::new(n);
        let m1 = expand(&casestudy::build_m1(&cfg, &c, &h).unwrap(), &BTreeMap::new()).unwrap();
        let m2 = expand(&casestudy::build_m2(&cfg, &c, &h, &g).unwrap(), &BTreeMap::new()).unwrap();
        for (i, p) in [casestudy::property_1(), casestudy::property_2()].iter().enumerate() {
            let a = check(&m1, p, SolverMode::Exact).unwrap().exact_at_initial().cloned().unwrap();
            let b = check(&m2, p, SolverMode::Exact).unwrap().exact_at_initial().cloned().unwrap();
            o.expect(a == b, || format!("N={n} property {}: {a} vs {b}", i + 1));
        }
    }
    o.detail = "N in {1,5,10}, properties 1 and 2".into();
    o
}

/// A chain that picks a true state uniformly, then estimates it.
fn estimation_model(a: &PerceptionAbstraction, style: WeightStyle) -> percept_mc::lang::ast::ModelAst {
    let space = a.space();
    let values: Vec<i64> = (0..space.len()).map(|k| space.value_of(k)).collect();
    let (lo, hi) = (values.iter().min().unwrap(), values.iter().max().unwrap());
    let k = values.len();
    let pick: Vec<String> = values.iter().map(|v| format!("1/{k}:(s'={v})&(p'=1)")).collect();
    let mut ast = parse_model(&format!(
        "dtmc module est p:[0..2] init 0; s:[{lo}..{hi}] init {lo}; e:[{lo}..{hi}] init {lo};
         [] p=0 -> {};
         [] p=2 -> true; endmodule",
        pick.join(" + ")
    ))
    .unwrap();
    let opts = EmitOptions {
        guard_extra: Some(Expr::eq("p", 1)),
        extra_assignments: vec![Assignment {
            var: "p".into(),
            value: Expr::Int(2),
        }],
        style,
    };
    let emitted = emit_abstraction_commands(a, "s", "e", &opts);
    ast.commands.splice(1..1, emitted);
    ast
}

fn parser_round_trip() -> Outcome {
    let mut o = Outcome::new();
    let data = CaseData::bundled();
    let abstractions = [
        ("cte", build_abstraction(&data.cte).unwrap()),
        ("he", build_abstraction(&data.he).unwrap()),
        ("cte guarded", build_guarded_abstraction(&data.cte_guarded).unwrap()),
        ("he guarded", build_guarded_abstraction(&data.he_guarded).unwrap()),
    ];
    let mut transitions = 0;
    for (name, a) in &abstractions {
        let ast = estimation_model(a, WeightStyle::Fraction);
        let reparsed = parse_model(&render_model(&ast)).unwrap();
        o.expect(reparsed == ast, || format!("{name}: AST differs after re-parsing"));
        let direct = expand(&ast, &BTreeMap::new()).unwrap();
        let again = expand(&reparsed, &BTreeMap::new()).unwrap();
        o.expect(direct.rows() == again.rows(), || format!("{name}: transitions differ"));
        let (si, ei) = (again.var_index("s").unwrap(), again.var_index("e").unwrap());
        let pi = again.var_index("p").unwrap();
        for st in 0..again.num_states() {
            let v = again.state(st);
            if v[pi] != 1 {
                continue;
            }
            let k = a.space().index_of_value(v[si]).unwrap();
            for (t, p) in again.row(st) {
                let c = a.space().index_of_value(again.state(*t)[ei]).unwrap();
                transitions += 1;
                o.expect(*p == a.prob(k, c), || format!("{name}: row {k} column {c}"));
            }
        }
    }
    o.detail = format!("4 abstractions, {transitions} estimate transitions");
    o
}

fn main() {
    let mut ok = true;
    ok &= run(1, "abstraction fidelity", Duration::from_secs(1), abstraction_fidelity);
    ok &= run(2, "model-checker oracle equivalence", Duration::from_secs(120), oracle_equivalence);
    ok &= run(3, "parametric consistency", Duration::from_secs(300), parametric_consistency);
    ok &= run(4, "confidence-interval properties", Duration::from_secs(600), confidence_properties);
    ok &= run(5, "case-study qualitative reproduction", Duration::from_secs(120), case_study);
    ok &= run(6, "guard no-op equivalence", Duration::from_secs(60), guard_noop);
    ok &= run(7, "parser round-trip", Duration::from_secs(60), parser_round_trip);
    if !ok {
        std::process::exit(1);
    }
}
