//! Shared test models.

#![allow(dead_code)]

use std::collections::BTreeMap;

use percept_mc::casestudy::{self, CaseData, ScenarioConfig};
use percept_mc::dtmc::Dtmc;
use percept_mc::guard::{weave_guard, GuardConfig};
use percept_mc::lang::ast::{Expr, ModelAst};
use percept_mc::lang::{expand, parse_bindings, parse_expr, parse_model, render_model};
use percept_mc::parametric::{detect_rows, parameterize, parameterize_branching, ParamDtmc};
use percept_mc::ratio::{frac, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub name: String,
    pub source: String,
    pub bindings: Vec<String>,
    pub target: String,
    /// Closed-form value where one is known.
    pub expected: Option<Rational>,
}

impl Case {
    fn new(name: &str, source: &str, target: &str, expected: Option<Rational>) -> Self {
        Case {
            name: name.into(),
            source: source.into(),
            bindings: Vec::new(),
            target: target.into(),
            expected,
        }
    }

    fn with_bindings(mut self, b: &[&str]) -> Self {
        self.bindings = b.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn ast(&self) -> ModelAst {
        parse_model(&self.source).unwrap_or_else(|e| panic!("{}: {e}", self.name))
    }

    pub fn dtmc(&self) -> Dtmc {
        expand(&self.ast(), &parse_bindings(&self.bindings).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", self.name))
    }

    pub fn target_expr(&self) -> Expr {
        parse_expr(&self.target).unwrap()
    }

    /// Estimated rows read from the model when it has any, otherwise one
    /// row per branching state.
    pub fn param(&self, m: &Dtmc) -> ParamDtmc {
        let rows = detect_rows(&self.ast());
        if rows.is_empty() {
            parameterize_branching(m)
        } else {
            parameterize(m, &rows, true).unwrap()
        }
    }
}

pub fn is_acyclic(m: &Dtmc) -> bool {
    // absorbing self-loops are allowed
    let n = m.num_states();
    let mut indeg = vec![0usize; n];
    let succ: Vec<Vec<usize>> = (0..n)
        .map(|s| m.row(s).iter().map(|(t, _)| *t).filter(|&t| t != s).collect())
        .collect();
    for s in 0..n {
        if m.row(s).iter().any(|(t, _)| *t == s) && m.row(s).len() > 1 {
            return false;
        }
        for &t in &succ[s] {
            indeg[t] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&s| indeg[s] == 0).collect();
    let mut seen = 0;
    while let Some(s) = stack.pop() {
        seen += 1;
        for &t in &succ[s] {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                stack.push(t);
            }
        }
    }
    seen == n
}

/// Length of the longest path in an acyclic chain, ignoring self-loops.
pub fn longest_path(m: &Dtmc) -> u64 {
    fn go(m: &Dtmc, s: usize, memo: &mut Vec<Option<u64>>) -> u64 {
        if let Some(v) = memo[s] {
            return v;
        }
        let v = m
            .row(s)
            .iter()
            .filter(|(t, _)| *t != s)
            .map(|(t, _)| 1 + go(m, *t, memo))
            .max()
            .unwrap_or(0);
        memo[s] = Some(v);
        v
    }
    go(m, m.initial(), &mut vec![None; m.num_states()])
}

fn random_model(seed: u64, n: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = format!("dtmc\nmodule r\n  s : [0..{}] init 0;\n", n + 1);
    for s in 0..n {
        let mut ws = vec![(n, rng.random_range(1..4u64)), (n + 1, rng.random_range(1..4u64))];
        for _ in 0..2 {
            ws.push((rng.random_range(0..n), rng.random_range(1..6u64)));
        }
        let total: u64 = ws.iter().map(|w| w.1).sum();
        let ups: Vec<String> = ws.iter().map(|(t, w)| format!("{w}/{total}: (s'={t})")).collect();
        out.push_str(&format!("  [] s={s} -> {};\n", ups.join(" + ")));
    }
    out.push_str(&format!("  [] s>={n} -> true;\nendmodule\n"));
    out
}

fn case_study(n: u32, guarded: bool) -> String {
    let data = CaseData::bundled();
    let cfg = ScenarioConfig::new(n);
    let ast = if guarded {
        let (c, h) = data.guarded().unwrap();
        casestudy::build_m2(&cfg, &c, &h, &casestudy::default_guard(3)).unwrap()
    } else {
        let (c, h) = data.unguarded().unwrap();
        casestudy::build_m1(&cfg, &c, &h).unwrap()
    };
    render_model(&ast)
}

fn guard_gadget() -> String {
    let base = parse_model(
        "dtmc
const int N = 4;
module g
  t : [0..N] init 0;
  pc : [0..1] init 0;
  x : [0..1] init 0;
  [] pc=0 & t<N -> (pc'=1);
  [] pc=1 -> 1/3: (x'=1) & (pc'=0) & (t'=t+1) + 2/3: (x'=0) & (pc'=0) & (t'=t+1);
  [] t=N -> true;
endmodule",
    )
    .unwrap();
    let mut g = GuardConfig::new(frac(3, 4), 2);
    g.estimate_vars = vec!["x".into()];
    render_model(&weave_guard(&base, &g).unwrap())
}

/// Two dozen chains, acyclic and cyclic, from two to a few hundred states.
pub fn suite() -> Vec<Case> {
    let mut v = vec![
        Case::new(
            "branch",
            "dtmc module m s:[0..2] init 0; [] s=0 -> 0.2:(s'=1) + 0.8:(s'=2); [] s>0 -> true; endmodule",
            "s=1",
            Some(frac(1, 5)),
        ),
        Case::new(
            "two_step",
            "dtmc module m s:[0..3] init 0;
             [] s=0 -> 0.3:(s'=3) + 0.7:(s'=1);
             [] s=1 -> 0.5:(s'=3) + 0.5:(s'=2);
             [] s>=2 -> true; endmodule",
            "s=3",
            Some(frac(13, 20)),
        ),
        Case::new(
            "geometric",
            "dtmc module m s:[0..1] init 0; [] s=0 -> 0.5:(s'=1) + 0.5:(s'=0); [] s=1 -> true; endmodule",
            "s=1",
            Some(frac(1, 1)),
        ),
        Case::new(
            "cyclic_pair",
            "dtmc module m s:[0..4] init 0;
             [] s=0 -> 1/2:(s'=1) + 1/2:(s'=2);
             [] s=1 -> 1/2:(s'=0) + 1/4:(s'=3) + 1/4:(s'=4);
             [] s=2 -> 1/2:(s'=3) + 1/2:(s'=4);
             [] s>=3 -> true; endmodule",
            "s=3",
            Some(frac(1, 2)),
        ),
        Case::new(
            "gambler",
            "dtmc const double p = 2/5; const int K = 6;
             module m s:[0..K] init 3;
             [] s>0 & s<K -> p:(s'=s+1) + 1-p:(s'=s-1);
             [] s=0 | s=K -> true; endmodule",
            "s=K",
            Some(frac(8, 35)),
        ),
        Case::new(
            "knuth_yao",
            "dtmc module die s:[0..7] init 0; d:[0..6] init 0;
             [] s=0 -> 0.5:(s'=1) + 0.5:(s'=2);
             [] s=1 -> 0.5:(s'=3) + 0.5:(s'=4);
             [] s=2 -> 0.5:(s'=5) + 0.5:(s'=6);
             [] s=3 -> 0.5:(s'=1) + 0.5:(s'=7)&(d'=1);
             [] s=4 -> 0.5:(s'=7)&(d'=2) + 0.5:(s'=7)&(d'=3);
             [] s=5 -> 0.5:(s'=7)&(d'=4) + 0.5:(s'=7)&(d'=5);
             [] s=6 -> 0.5:(s'=2) + 0.5:(s'=7)&(d'=6);
             [] s=7 -> true; endmodule",
            "s=7 & d=6",
            Some(frac(1, 6)),
        ),
        Case::new(
            "coins",
            "dtmc module c i:[0..8] init 0; h:[0..8] init 0;
             [] i<8 -> 0.5:(i'=i+1)&(h'=h+1) + 0.5:(i'=i+1);
             [] i=8 -> true; endmodule",
            "i=8 & h>=6",
            Some(frac(37, 256)),
        ),
        Case::new(
            "retries",
            "dtmc module r s:[0..2] init 0; k:[0..4] init 0;
             [] s=0 & k<4 -> 9/10:(s'=1) + 1/10:(k'=k+1);
             [] s=0 & k=4 -> (s'=2);
             [] s>0 -> true; endmodule",
            "s=2",
            Some(frac(1, 10000)),
        ),
        Case::new(
            "birth_death",
            "dtmc module b s:[0..6] init 1;
             [] s=0 -> 0.5:(s'=1) + 0.5:(s'=6);
             [] s>0 & s<5 -> 0.4:(s'=s+1) + 0.6:(s'=s-1);
             [] s>=5 -> true; endmodule",
            "s=5",
            None,
        ),
        Case::new(
            "two_loops",
            "dtmc module t s:[0..5] init 0;
             [] s=0 -> 1/3:(s'=1) + 1/3:(s'=0) + 1/3:(s'=2);
             [] s=1 -> 1/2:(s'=0) + 1/2:(s'=2);
             [] s=2 -> 1/4:(s'=3) + 1/4:(s'=4) + 1/2:(s'=5);
             [] s=3 -> 1/2:(s'=2) + 1/2:(s'=4);
             [] s>=4 -> true; endmodule",
            "s=4",
            None,
        ),
        Case::new(
            "unreachable",
            "dtmc module u s:[0..3] init 0; [] s=0 -> 0.5:(s'=1) + 0.5:(s'=2); [] s>0 -> true; endmodule",
            "s=3",
            Some(frac(0, 1)),
        ),
        Case::new(
            "initial_target",
            "dtmc module u s:[0..2] init 0; [] s=0 -> 0.5:(s'=1) + 0.5:(s'=2); [] s>0 -> true; endmodule",
            "s=0",
            Some(frac(1, 1)),
        ),
        Case::new(
            "deadlock",
            "dtmc module d s:[0..2] init 0; [] s=0 -> 0.5:(s'=1) + 0.5:(s'=2); endmodule",
            "s=1",
            Some(frac(1, 2)),
        ),
        Case::new(
            "hops",
            "dtmc module h h:[0..6] init 0; d:[0..1] init 0;
             [] h<6 & d=0 -> 3/4:(h'=h+1) + 1/4:(d'=1);
             [] h=6 | d=1 -> true; endmodule",
            "d=1 & h>=2",
            None,
        ),
        Case::new(
            "symmetric_coin",
            "dtmc module l s:[0..2] init 0; [] s=0 -> 1/2:(s'=0) + 1/4:(s'=1) + 1/4:(s'=2); [] s>0 -> true; endmodule",
            "s=1",
            Some(frac(1, 2)),
        ),
        Case::new(
            "queue",
            "dtmc module q q:[0..4] init 0; off:[0..1] init 0;
             [] off=0 & q<4 -> 1/10:(off'=1) + 3/10:(q'=q+1) + 6/10:(q'=max(q-1,0));
             [] off=1 | q=4 -> true; endmodule",
            "q=4",
            None,
        ),
        Case::new(
            "dice_sum",
            "dtmc module d p:[0..2] init 0; a:[0..6] init 0; b:[0..6] init 0;
             [] p=0 -> 1/6:(a'=1)&(p'=1) + 1/6:(a'=2)&(p'=1) + 1/6:(a'=3)&(p'=1) + 1/6:(a'=4)&(p'=1) + 1/6:(a'=5)&(p'=1) + 1/6:(a'=6)&(p'=1);
             [] p=1 -> 1/6:(b'=1)&(p'=2) + 1/6:(b'=2)&(p'=2) + 1/6:(b'=3)&(p'=2) + 1/6:(b'=4)&(p'=2) + 1/6:(b'=5)&(p'=2) + 1/6:(b'=6)&(p'=2);
             [] p=2 -> true; endmodule",
            "p=2 & a+b=7",
            Some(frac(1, 6)),
        ),
        Case::new("guard_gadget", &guard_gadget(), "v=0 & i=2", None),
        Case::new("random_8", &random_model(11, 8), "s=8", None),
        Case::new("random_6", &random_model(23, 6), "s=7", None),
        Case::new("m1_n2", &case_study(2, false), "he=-1", None),
        Case::new("m2_n2", &case_study(2, true), "he=-1", None),
        Case::new("m1_n4", &case_study(4, false), "cte=-1", None),
        Case::new("m2_n3", &case_study(3, true), "cte=-1 | he=-1", None),
    ];
    v.push(
        Case::new(
            "chain_bound",
            "dtmc const int N; module c s:[0..N] init 0;
             [] s<N-1 -> 1/5:(s'=N) + 4/5:(s'=s+1);
             [] s>=N-1 -> true; endmodule",
            "s=N",
            Some(Rational::from_integer(1.into()) - frac(4, 5).pow(4)),
        )
        .with_bindings(&["N=5"]),
    );
    v
}

pub fn by_name(name: &str) -> Case {
    suite().into_iter().find(|c| c.name == name).unwrap()
}

pub fn bindings_of(c: &Case) -> BTreeMap<String, percept_mc::lang::Value> {
    parse_bindings(&c.bindings).unwrap()
}
