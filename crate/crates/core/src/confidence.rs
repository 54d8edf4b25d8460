//! Confidence intervals for a reachability probability given as a rational
//! function of estimated transition probabilities.
//!
//! Each parameter row gets simultaneous multinomial intervals (Goodman), the
//! error budget is split evenly over the rows, and the function is minimised
//! and maximised over the resulting region by multi-start coordinate descent.
//! The extremes are heuristic: the reported interval may be slightly narrower
//! than the true range of the function over the region.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::lang::ast::{Expr, ModelAst};
use crate::lang::Value;
use crate::parametric::{param_reach, parameterize, ElimOptions, EliminationOrder, EstimatedRow, ParamDtmc, ParamError};
use crate::poly::{Poly, RationalFunction};
use crate::ratio;

const STARTS: usize = 16;
const TOLERANCE: f64 = 1e-9;
const MAX_SWEEPS: usize = 200;
const GRID_POINTS: usize = 25;
const GRID_MAX_FREE: usize = 3;
const LOG_SPACE_BELOW: f64 = 1e-5;
const SEED: u64 = 0x00c0_ffee;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CiError {
    #[error("row has no observations")]
    EmptyRow,
    #[error("level {0} is not in (0,1)")]
    BadLevel(f64),
    #[error("row `{0}` admits no probability distribution within its intervals")]
    InfeasibleRegion(String),
    #[error("parameter {0} of the function is not covered by any row")]
    UncoveredParameter(u32),
    #[error("interval synthesis exceeded its time budget")]
    Timeout,
}

/// Goodman simultaneous intervals for multinomial proportions at the given
/// joint confidence level.
pub fn row_intervals(counts: &[u64], level: f64) -> Result<Vec<(f64, f64)>, CiError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CiError::BadLevel(level));
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(CiError::EmptyRow);
    }
    let k = counts.len().max(1) as f64;
    let c = ChiSquared::new(1.0).unwrap().inverse_cdf(1.0 - (1.0 - level) / k);
    let n = n as f64;
    Ok(counts
        .iter()
        .map(|&nk| {
            let nk = nk as f64;
            let centre = c + 2.0 * nk;
            let spread = (c * (c + 4.0 * nk * (n - nk) / n)).sqrt();
            let denom = 2.0 * (n + c);
            (
                ((centre - spread) / denom).clamp(0.0, 1.0),
                ((centre + spread) / denom).clamp(0.0, 1.0),
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRow {
    pub name: String,
    /// Explicit parameters; the row's last outcome is `1 - sum`.
    pub params: Vec<u32>,
    /// One count per explicit parameter, then the implicit last outcome.
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct ConfidenceQuery {
    pub delta: f64,
    pub rf: RationalFunction,
    pub rows: Vec<QueryRow>,
    pub num_params: usize,
}

impl ConfidenceQuery {
    pub fn from_param(pm: &ParamDtmc, rf: RationalFunction, delta: f64) -> Self {
        let rows = pm
            .param_rows()
            .iter()
            .map(|r| QueryRow {
                name: r.name.clone(),
                params: r.params.clone(),
                counts: r.counts.clone(),
            })
            .collect();
        ConfidenceQuery {
            delta,
            rf,
            rows,
            num_params: pm.params().len(),
        }
    }

    /// Rows with at least one parameter occurring in the function.
    fn active_rows(&self) -> Vec<usize> {
        let vars = self.rf.variables();
        (0..self.rows.len())
            .filter(|&r| self.rows[r].params.iter().any(|p| vars.binary_search(p).is_ok()))
            .collect()
    }

    pub fn point_estimate(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.num_params];
        for r in &self.rows {
            let n: u64 = r.counts.iter().sum();
            for (j, &p) in r.params.iter().enumerate() {
                x[p as usize] = if n == 0 { 0.0 } else { r.counts[j] as f64 / n as f64 };
            }
        }
        x
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub sweeps: usize,
    pub evaluations: usize,
    pub starts: usize,
    pub grid_points: usize,
    pub rows_used: usize,
    pub log_space: bool,
    /// Extremes over the projected box corners alone; they differ from the
    /// reported extremes when the function peaks inside the region.
    pub corner_low: f64,
    pub corner_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalResult {
    pub low: f64,
    pub high: f64,
    pub point: f64,
    pub confidence: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl IntervalResult {
    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CiOptions {
    pub deadline: Option<Instant>,
}

/// Box constraints of one row in full outcome coordinates.
#[derive(Debug, Clone)]
struct RowBox {
    params: Vec<u32>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl RowBox {
    fn q(&self, x: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = self.params.iter().map(|&p| x[p as usize]).collect();
        q.push(1.0 - q.iter().sum::<f64>());
        q
    }

    fn store(&self, x: &mut [f64], q: &[f64]) {
        for (j, &p) in self.params.iter().enumerate() {
            x[p as usize] = q[j];
        }
    }

    /// Nearest point of the row's feasible set to `y`: clamp(y - lambda) with
    /// lambda chosen so the outcomes sum to one.
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let at = |lambda: f64| -> f64 {
            y.iter()
                .enumerate()
                .map(|(j, v)| (v - lambda).clamp(self.lo[j], self.hi[j]))
                .sum()
        };
        let (mut a, mut b) = (-2.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if at(mid) > 1.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let lambda = 0.5 * (a + b);
        let mut q: Vec<f64> = y
            .iter()
            .enumerate()
            .map(|(j, v)| (v - lambda).clamp(self.lo[j], self.hi[j]))
            .collect();
        // absorb the bisection residue in a coordinate with slack
        let gap = 1.0 - q.iter().sum::<f64>();
        if gap != 0.0 {
            if let Some(j) = (0..q.len()).find(|&j| q[j] + gap >= self.lo[j] && q[j] + gap <= self.hi[j]) {
                q[j] += gap;
            }
        }
        q
    }

    fn hull(&mut self, other: &RowBox) {
        for j in 0..self.lo.len() {
            self.lo[j] = self.lo[j].min(other.lo[j]);
            self.hi[j] = self.hi[j].max(other.hi[j]);
        }
    }
}

/// Floating-point evaluator with the monomials flattened.
struct Evaluator {
    num: Vec<(f64, Vec<(usize, i32)>)>,
    den: Vec<(f64, Vec<(usize, i32)>)>,
}

fn flatten(p: &Poly) -> Vec<(f64, Vec<(usize, i32)>)> {
    p.terms()
        .map(|(m, c)| {
            (
                num::ToPrimitive::to_f64(c).unwrap_or(f64::NAN),
                m.iter().map(|&(v, e)| (v as usize, e as i32)).collect(),
            )
        })
        .collect()
}

impl Evaluator {
    fn new(f: &RationalFunction) -> Self {
        Evaluator {
            num: flatten(f.numerator()),
            den: flatten(f.denominator()),
        }
    }

    fn poly(terms: &[(f64, Vec<(usize, i32)>)], x: &[f64]) -> f64 {
        terms
            .iter()
            .map(|(c, m)| m.iter().fold(*c, |acc, &(v, e)| acc * x[v].powi(e)))
            .sum()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        Self::poly(&self.num, x) / Self::poly(&self.den, x)
    }
}

struct Search<'a> {
    eval: &'a Evaluator,
    rows: &'a [RowBox],
    /// +1 to minimise, -1 to maximise.
    sign: f64,
    log_space: bool,
    evaluations: usize,
    deadline: Option<Instant>,
}

impl Search<'_> {
    fn objective(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = self.eval.eval(x);
        let v = if self.log_space { v.max(f64::MIN_POSITIVE).ln() } else { v };
        self.sign * v
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() > d)
    }

    /// Best mass transfer `t` from outcome `from` to outcome `to` of row `r`.
    fn line_search(&mut self, x: &mut Vec<f64>, r: usize, to: usize, from: usize, current: f64) -> f64 {
        let row = &self.rows[r];
        let q = row.q(x);
        let lo_t = (row.lo[to] - q[to]).max(q[from] - row.hi[from]);
        let hi_t = (row.hi[to] - q[to]).min(q[from] - row.lo[from]);
        if hi_t - lo_t <= 1e-15 {
            return current;
        }
        let mut trial = x.clone();
        let mut at = |s: &mut Self, t: f64| -> f64 {
            let mut qq = q.clone();
            qq[to] += t;
            qq[from] -= t;
            s.rows[r].store(&mut trial, &qq);
            s.objective(&trial)
        };
        const SAMPLES: usize = 9;
        let mut best_t = 0.0;
        let mut best = current;
        let mut best_i = None;
        for i in 0..SAMPLES {
            let t = lo_t + (hi_t - lo_t) * i as f64 / (SAMPLES - 1) as f64;
            let v = at(self, t);
            if v < best {
                best = v;
                best_t = t;
                best_i = Some(i);
            }
        }
        // golden-section refinement around the best sample
        let step = (hi_t - lo_t) / (SAMPLES - 1) as f64;
        let centre = best_i.map_or(0.0, |i| lo_t + step * i as f64);
        let (mut a, mut b) = ((centre - step).max(lo_t), (centre + step).min(hi_t));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let mut fc = at(self, c);
        let mut fd = at(self, d);
        for _ in 0..60 {
            if b - a < 1e-13 {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = at(self, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = at(self, d);
            }
        }
        for (t, v) in [(c, fc), (d, fd)] {
            if v < best {
                best = v;
                best_t = t;
            }
        }
        if best < current {
            let mut qq = q;
            qq[to] += best_t;
            qq[from] -= best_t;
            self.rows[r].store(x, &qq);
            best
        } else {
            current
        }
    }

    fn descend(&mut self, x: &mut Vec<f64>, active: &[usize]) -> Result<(f64, usize), CiError> {
        let mut value = self.objective(x);
        let mut sweeps = 0;
        for _ in 0..MAX_SWEEPS {
            sweeps += 1;
            let before = value;
            for &r in active {
                let k = self.rows[r].lo.len();
                for to in 0..k {
                    for from in 0..k {
                        if to != from {
                            value = self.line_search(x, r, to, from, value);
                        }
                    }
                }
                if self.timed_out() {
                    return Err(CiError::Timeout);
                }
            }
            if before - value <= TOLERANCE * before.abs().max(1.0) {
                break;
            }
        }
        Ok((value, sweeps))
    }
}

fn boxes(q: &ConfidenceQuery, active: &[usize]) -> Result<Vec<RowBox>, CiError> {
    let r = active.len().max(1) as f64;
    let level = 1.0 - q.delta / r;
    q.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let iv = if active.contains(&i) {
                row_intervals(&row.counts, level)?
            } else {
                // inactive rows stay at their point estimate
                let n: u64 = row.counts.iter().sum::<u64>().max(1);
                row.counts.iter().map(|&c| (c as f64 / n as f64, c as f64 / n as f64)).collect()
            };
            let b = RowBox {
                params: row.params.clone(),
                lo: iv.iter().map(|v| v.0).collect(),
                hi: iv.iter().map(|v| v.1).collect(),
            };
            let (slo, shi): (f64, f64) = (b.lo.iter().sum(), b.hi.iter().sum());
            if slo > 1.0 + 1e-12 || shi < 1.0 - 1e-12 {
                return Err(CiError::InfeasibleRegion(row.name.clone()));
            }
            Ok(b)
        })
        .collect()
}

fn check_coverage(q: &ConfidenceQuery) -> Result<(), CiError> {
    let covered: Vec<u32> = q.rows.iter().flat_map(|r| r.params.iter().copied()).collect();
    for v in q.rf.variables() {
        if !covered.contains(&v) {
            return Err(CiError::UncoveredParameter(v));
        }
    }
    Ok(())
}

fn starts(rows: &[RowBox], active: &[usize], point: &[f64], rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, usize) {
    let project_all = |y: &mut Vec<f64>, raw: &dyn Fn(usize, &RowBox, &mut ChaCha8Rng) -> Vec<f64>, rng: &mut ChaCha8Rng| {
        for &r in active {
            let q = rows[r].project(&raw(r, &rows[r], rng));
            rows[r].store(y, &q);
        }
    };
    let mut out = Vec::with_capacity(STARTS);
    let mut x0 = point.to_vec();
    project_all(&mut x0, &|_, b, _| b.q(point), rng);
    out.push(x0);
    // box corners: each outcome at its low or high end, then projected
    let corners = (STARTS - 1) / 2;
    for _ in 0..corners {
        let mut x = point.to_vec();
        project_all(
            &mut x,
            &|_, b, rng| (0..b.lo.len()).map(|j| if rng.random::<bool>() { b.hi[j] } else { b.lo[j] }).collect(),
            rng,
        );
        out.push(x);
    }
    // Latin hypercube over each outcome's interval
    let lhs = STARTS - 1 - corners;
    let strata: Vec<Vec<Vec<usize>>> = rows
        .iter()
        .map(|b| {
            (0..b.lo.len())
                .map(|_| {
                    let mut perm: Vec<usize> = (0..lhs).collect();
                    for i in (1..perm.len()).rev() {
                        let j = rng.random_range(0..=i);
                        perm.swap(i, j);
                    }
                    perm
                })
                .collect()
        })
        .collect();
    for s in 0..lhs {
        let mut x = point.to_vec();
        for &r in active {
            let b = &rows[r];
            let raw: Vec<f64> = (0..b.lo.len())
                .map(|j| {
                    let cell = strata[r][j][s] as f64 + rng.random::<f64>();
                    b.lo[j] + (b.hi[j] - b.lo[j]) * cell / lhs as f64
                })
                .collect();
            let q = b.project(&raw);
            b.store(&mut x, &q);
        }
        out.push(x);
    }
    (out, 1 + corners)
}

/// Evaluates every feasible point of a regular grid over the explicit
/// parameters of the active rows.
fn grid_extremes(eval: &Evaluator, rows: &[RowBox], active: &[usize], point: &[f64]) -> (Vec<(f64, Vec<f64>)>, usize) {
    let axes: Vec<(usize, usize)> = active
        .iter()
        .flat_map(|&r| (0..rows[r].params.len()).map(move |j| (r, j)))
        .collect();
    let mut found = Vec::new();
    let mut count = 0;
    let total = GRID_POINTS.pow(axes.len() as u32);
    let mut x = point.to_vec();
    for idx in 0..total {
        let mut rem = idx;
        for &(r, j) in &axes {
            let i = rem % GRID_POINTS;
            rem /= GRID_POINTS;
            let b = &rows[r];
            x[b.params[j] as usize] = b.lo[j] + (b.hi[j] - b.lo[j]) * i as f64 / (GRID_POINTS - 1) as f64;
        }
        let feasible = active.iter().all(|&r| {
            let b = &rows[r];
            let last = b.q(&x)[b.lo.len() - 1];
            last >= b.lo[b.lo.len() - 1] - 1e-12 && last <= b.hi[b.lo.len() - 1] + 1e-12
        });
        if feasible {
            count += 1;
            found.push((eval.eval(&x), x.clone()));
        }
    }
    (found, count)
}

struct Region {
    rows: Vec<RowBox>,
    active: Vec<usize>,
}

fn optimise(
    q: &ConfidenceQuery,
    region: &Region,
    warm: &[Vec<f64>],
    confidence: f64,
    opts: CiOptions,
) -> Result<IntervalResult, CiError> {
    let eval = Evaluator::new(&q.rf);
    let point_x = q.point_estimate();
    let point = eval.eval(&point_x);
    let mut diag = Diagnostics {
        rows_used: region.active.len(),
        ..Default::default()
    };
    if region.active.is_empty() {
        return Ok(IntervalResult {
            low: point,
            high: point,
            point,
            confidence,
            argmin: point_x.clone(),
            argmax: point_x,
            diagnostics: Diagnostics {
                corner_low: point,
                corner_high: point,
                ..diag
            },
        });
    }
    let log_space = point < LOG_SPACE_BELOW && point > 0.0;
    diag.log_space = log_space;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut initial, corner_count) = starts(&region.rows, &region.active, &point_x, &mut rng);
    diag.corner_low = f64::INFINITY;
    diag.corner_high = f64::NEG_INFINITY;
    for x in &initial[1..corner_count] {
        let v = eval.eval(x);
        diag.corner_low = diag.corner_low.min(v);
        diag.corner_high = diag.corner_high.max(v);
    }
    let free: usize = region.active.iter().map(|&r| region.rows[r].params.len()).sum();
    let mut best_low = (point, point_x.clone());
    let mut best_high = (point, point_x.clone());
    if free <= GRID_MAX_FREE {
        let (pts, count) = grid_extremes(&eval, &region.rows, &region.active, &point_x);
        diag.grid_points = count;
        diag.evaluations += count;
        // the best grid points also seed the descent
        if let Some(p) = pts.iter().min_by(|a, b| a.0.total_cmp(&b.0)) {
            initial.push(p.1.clone());
        }
        if let Some(p) = pts.iter().max_by(|a, b| a.0.total_cmp(&b.0)) {
            initial.push(p.1.clone());
        }
    }
    initial.extend(warm.iter().cloned());
    diag.starts = initial.len();
    for sign in [1.0, -1.0] {
        let mut search = Search {
            eval: &eval,
            rows: &region.rows,
            sign,
            log_space,
            evaluations: 0,
            deadline: opts.deadline,
        };
        for start in &initial {
            let mut x = start.clone();
            let (_, sweeps) = search.descend(&mut x, &region.active)?;
            diag.sweeps += sweeps;
            let v = eval.eval(&x);
            if sign > 0.0 && v < best_low.0 {
                best_low = (v, x);
            } else if sign < 0.0 && v > best_high.0 {
                best_high = (v, x);
            }
        }
        diag.evaluations += search.evaluations;
    }
    Ok(IntervalResult {
        low: best_low.0.clamp(0.0, 1.0),
        high: best_high.0.clamp(0.0, 1.0),
        point,
        confidence,
        argmin: best_low.1,
        argmax: best_high.1,
        diagnostics: diag,
    })
}

fn region(q: &ConfidenceQuery) -> Result<Region, CiError> {
    check_coverage(q)?;
    let active = q.active_rows();
    Ok(Region {
        rows: boxes(q, &active)?,
        active,
    })
}

/// A `(1 - delta)` confidence interval for the value of `q.rf`.
pub fn synthesize_interval(q: &ConfidenceQuery, opts: CiOptions) -> Result<IntervalResult, CiError> {
    if !(q.delta > 0.0 && q.delta < 1.0) {
        return Err(CiError::BadLevel(1.0 - q.delta));
    }
    optimise(q, &region(q)?, &[], 1.0 - q.delta, opts)
}

/// Intervals at several confidence levels. Levels are processed in
/// increasing order; each region includes the previous one and the previous
/// extremal points seed the next search, so the intervals are nested.
/// Results are returned in the order of `levels`.
pub fn synthesize_levels(
    base: &ConfidenceQuery,
    levels: &[f64],
    opts: CiOptions,
) -> Result<Vec<IntervalResult>, CiError> {
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]));
    let mut out: Vec<Option<IntervalResult>> = vec![None; levels.len()];
    let mut prev: Option<(Region, IntervalResult)> = None;
    for i in order {
        let level = levels[i];
        if !(level > 0.0 && level < 1.0) {
            return Err(CiError::BadLevel(level));
        }
        let q = ConfidenceQuery {
            delta: 1.0 - level,
            ..base.clone()
        };
        let mut reg = region(&q)?;
        let mut warm = Vec::new();
        if let Some((p, r)) = &prev {
            for (b, pb) in reg.rows.iter_mut().zip(&p.rows) {
                b.hull(pb);
            }
            warm.push(r.argmin.clone());
            warm.push(r.argmax.clone());
        }
        let mut res = optimise(&q, &reg, &warm, level, opts)?;
        if let Some((_, r)) = &prev {
            // the warm starts are feasible here, so this only guards rounding
            res.low = res.low.min(r.low);
            res.high = res.high.max(r.high);
        }
        out[i] = Some(res.clone());
        prev = Some((reg, res));
    }
    Ok(out.into_iter().map(|r| r.unwrap()).collect())
}

/// Exact value of the function at the empirical frequencies.
pub fn exact_point(pm: &ParamDtmc, rf: &RationalFunction) -> Option<f64> {
    rf.eval(&pm.point_estimate()).ok().map(|r| ratio::to_f64(&r))
}

/// Tag written in the `method` column of sweep output.
pub const METHOD: &str = "goodman-bonferroni-multistart";

/// One (property, N) cell of a confidence sweep.
#[derive(Debug, Clone)]
pub struct CiCell {
    pub property_index: usize,
    pub n: Option<u32>,
    pub ast: ModelAst,
    pub bindings: BTreeMap<String, Value>,
    pub rows: Vec<EstimatedRow>,
    pub target: Expr,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub levels: Vec<f64>,
    pub prune_zero: bool,
    pub order: EliminationOrder,
    pub timeout: Duration,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            levels: vec![0.95, 0.96, 0.97, 0.98, 0.99],
            prune_zero: true,
            order: EliminationOrder::default(),
            timeout: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub property_index: usize,
    #[serde(rename = "N")]
    pub n: Option<u32>,
    pub confidence: f64,
    pub low: Option<f64>,
    pub point: Option<f64>,
    pub high: Option<f64>,
    pub method: &'static str,
    pub wall_ms: f64,
    pub status: String,
}

#[derive(Debug, Error)]
enum CellError {
    #[error(transparent)]
    Expand(#[from] crate::lang::ExpandError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Ci(#[from] CiError),
}

impl CellError {
    fn is_timeout(&self) -> bool {
        matches!(self, CellError::Param(ParamError::Timeout) | CellError::Ci(CiError::Timeout))
    }

    fn name(&self) -> String {
        match self {
            CellError::Expand(e) => crate::error_name(e),
            CellError::Param(e) => crate::error_name(e),
            CellError::Ci(e) => crate::error_name(e),
        }
    }
}

fn run_cell(cell: &CiCell, opts: &SweepOptions, deadline: Instant) -> Result<(f64, Vec<IntervalResult>), CellError> {
    let m = crate::lang::expand(&cell.ast, &cell.bindings)?;
    let pm = parameterize(&m, &cell.rows, opts.prune_zero)?;
    let rf = param_reach(
        &pm,
        &cell.target,
        ElimOptions {
            order: opts.order,
            deadline: Some(deadline),
        },
    )?;
    let point = exact_point(&pm, &rf).ok_or(ParamError::DivideByZero)?;
    let q = ConfidenceQuery::from_param(&pm, rf, 0.05);
    let res = synthesize_levels(&q, &opts.levels, CiOptions { deadline: Some(deadline) })?;
    Ok((point, res))
}

/// Runs every cell (in parallel) and returns one row per (cell, level),
/// ordered by property, N and level. Failures and timeouts become rows with
/// empty values and the reason in `status`.
pub fn confidence_sweep(cells: &[CiCell], opts: &SweepOptions) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = cells
        .par_iter()
        .flat_map_iter(|cell| {
            let start = Instant::now();
            let outcome = run_cell(cell, opts, start + opts.timeout);
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let row = |level: f64| SweepRow {
                property_index: cell.property_index,
                n: cell.n,
                confidence: level,
                low: None,
                point: None,
                high: None,
                method: METHOD,
                wall_ms,
                status: String::new(),
            };
            let out: Vec<SweepRow> = match outcome {
                Ok((point, results)) => results
                    .into_iter()
                    .zip(&opts.levels)
                    .map(|(r, &level)| SweepRow {
                        low: Some(r.low),
                        point: Some(point),
                        high: Some(r.high),
                        status: "OK".into(),
                        ..row(level)
                    })
                    .collect(),
                Err(e) => {
                    let status = if e.is_timeout() {
                        "TIMEOUT".to_string()
                    } else {
                        log::warn!("cell N={:?} property {}: {e}", cell.n, cell.property_index);
                        format!("ERROR({})", e.name())
                    };
                    opts.levels
                        .iter()
                        .map(|&level| SweepRow {
                            status: status.clone(),
                            ..row(level)
                        })
                        .collect()
                }
            };
            out
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.property_index, a.n)
            .cmp(&(b.property_index, b.n))
            .then(a.confidence.total_cmp(&b.confidence))
    });
    rows
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["property_index", "N", "confidence", "low", "point", "high", "method", "wall_ms", "status"])
        .unwrap();
    for r in rows {
        w.write_record([
            r.property_index.to_string(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.confidence.to_string(),
            opt(r.low),
            opt(r.point),
            opt(r.high),
            r.method.to_string(),
            format!("{:.3}", r.wall_ms),
            r.status.clone(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
