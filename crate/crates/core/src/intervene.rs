//! Intervention regimes, Monte Carlo simulation under them, and average
//! causal effect (ACE) computation.
//!
//! An intervention replaces the structural equation of its target at one
//! time index; every innovation draw is shared with the observational run,
//! so trajectories agree bit for bit before the intervention.
//!
//! Random numbers are counter based: the draws at time `t` of replication
//! `r` come from a generator seeded by `(seed, r, t, purpose)`, which makes
//! every result independent of the number of worker threads.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeSet};
use crate::var::{self, predictor_coeffs, predictor_weights, SubprocessAR, TimeSeriesData, VarModel};

pub const DEFAULT_BURN_IN: usize = 200;
pub const DEFAULT_FLOOR: f64 = 1e-9;

const TAG_INNOVATION: u64 = 0x1;
const TAG_STRATEGY: u64 = 0x2;

/// Replication count, master seed and discarded warm-up length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MonteCarlo {
    pub reps: usize,
    pub seed: u64,
    pub burn_in: usize,
}

impl MonteCarlo {
    pub fn new(reps: usize, seed: u64) -> Self {
        MonteCarlo { reps, seed, burn_in: DEFAULT_BURN_IN }
    }

    pub fn burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }
}

/// How the intervened component is generated.
///
/// Conditional maps look at `X_C(t-1), …, X_C(t-window)`; coefficient
/// `coeffs[(lag - 1) * C.len() + i]` multiplies `X_{C[i]}(t - lag)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Strategy {
    Idle,
    Atomic {
        x: f64,
    },
    Conditional {
        #[serde(rename = "C")]
        c: Vec<NodeId>,
        window: usize,
        coeffs: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
    #[serde(rename = "random")]
    RandomShift {
        #[serde(rename = "C", default)]
        c: Vec<NodeId>,
        #[serde(default = "one")]
        window: usize,
        #[serde(default)]
        coeffs: Vec<f64>,
        #[serde(default)]
        intercept: f64,
        stddev: f64,
    },
}

fn one() -> usize {
    1
}

impl Strategy {
    pub fn atomic(x: f64) -> Self {
        Strategy::Atomic { x }
    }

    pub fn conditioning_set(&self) -> &[NodeId] {
        match self {
            Strategy::Conditional { c, .. } | Strategy::RandomShift { c, .. } => c,
            _ => &[],
        }
    }

    fn validate(&self, labels: &[NodeId]) -> Result<()> {
        let (c, window, coeffs) = match self {
            Strategy::Idle => return Ok(()),
            Strategy::Atomic { x } if x.is_finite() => return Ok(()),
            Strategy::Atomic { .. } => return Err(Error::invalid("atomic value must be finite")),
            Strategy::Conditional { c, window, coeffs, .. } => (c, *window, coeffs),
            Strategy::RandomShift { c, window, coeffs, stddev, .. } => {
                if !(stddev.is_finite() && *stddev >= 0.0) {
                    return Err(Error::invalid("stddev must be finite and non-negative"));
                }
                (c, *window, coeffs)
            }
        };
        if window < 1 {
            return Err(Error::invalid("strategy window must be at least 1"));
        }
        if c.iter().collect::<BTreeSet<_>>().len() != c.len() {
            return Err(Error::invalid("conditioning set has repeated labels"));
        }
        if let Some(x) = c.iter().find(|x| !labels.contains(x)) {
            return Err(Error::UnknownNode(x.to_string()));
        }
        if coeffs.len() != window * c.len() {
            return Err(Error::invalid(format!(
                "expected {} coefficients (window {window} x {} components), got {}",
                window * c.len(),
                c.len(),
                coeffs.len()
            )));
        }
        Ok(())
    }

    /// Mean of the strategy value given the past; `None` for Idle.
    /// `past(i, lag)` returns `X_{C[i]}(t - lag)`.
    fn mean_value(&self, past: impl Fn(usize, usize) -> f64) -> Option<f64> {
        match self {
            Strategy::Idle => None,
            Strategy::Atomic { x } => Some(*x),
            Strategy::Conditional { c, window, coeffs, intercept }
            | Strategy::RandomShift { c, window, coeffs, intercept, .. } => {
                let mut v = *intercept;
                for lag in 1..=*window {
                    for i in 0..c.len() {
                        v += coeffs[(lag - 1) * c.len() + i] * past(i, lag);
                    }
                }
                Some(v)
            }
        }
    }
}

/// `σ_a(t) = strategy` for `a = target` at window offset `time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionSpec {
    pub target: NodeId,
    pub time: usize,
    pub strategy: Strategy,
}

impl InterventionSpec {
    pub fn new(target: impl Into<NodeId>, time: usize, strategy: Strategy) -> Self {
        InterventionSpec { target: target.into(), time, strategy }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AceMethod {
    AnalyticBackDoor,
    AnalyticFrontDoor,
    PlugIn,
    MonteCarloOracle,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditioning_set: Option<Vec<NodeId>>,
    pub flags: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AceResult {
    pub value: f64,
    pub stderr: f64,
    pub method: AceMethod,
    pub b: NodeId,
    pub h: usize,
    pub diagnostics: Diagnostics,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, rep: u64, t: u64, tag: u64) -> ChaCha8Rng {
    let key = splitmix(splitmix(splitmix(splitmix(seed) ^ rep) ^ t) ^ tag);
    ChaCha8Rng::seed_from_u64(key)
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Mean and standard error by Welford's method, in input order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let n = values.len();
    if n < 2 {
        return (mean, 0.0);
    }
    (mean, (m2 / (n - 1) as f64 / n as f64).sqrt())
}

struct Plan<'a> {
    target: usize,
    time: usize,
    strategy: &'a Strategy,
    cond: Vec<usize>,
    index: u64,
}

fn plan<'a>(labels: &[NodeId], specs: &'a [InterventionSpec]) -> Result<Vec<Plan<'a>>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(specs.len());
    for (k, s) in specs.iter().enumerate() {
        let target = labels.iter().position(|l| *l == s.target).ok_or_else(|| Error::UnknownNode(s.target.to_string()))?;
        if !seen.insert((target, s.time)) {
            return Err(Error::invalid(format!("two interventions on `{}` at time {}", s.target, s.time)));
        }
        s.strategy.validate(labels)?;
        let cond = s
            .strategy
            .conditioning_set()
            .iter()
            .map(|c| labels.iter().position(|l| l == c).expect("validated"))
            .collect();
        out.push(Plan { target, time: s.time, strategy: &s.strategy, cond, index: k as u64 });
    }
    Ok(out)
}

/// Evaluates the strategy at absolute index `t` of trajectory `x`, whose rows are times.
fn strategy_value(p: &Plan, x: &DMatrix<f64>, t: usize, seed: u64, rep: u64) -> Option<f64> {
    let past = |i: usize, lag: usize| if t >= lag { x[(t - lag, p.cond[i])] } else { 0.0 };
    let mean = p.strategy.mean_value(past)?;
    match p.strategy {
        Strategy::RandomShift { stddev, .. } if *stddev > 0.0 => {
            let mut rng = stream(seed, rep, t as u64, TAG_STRATEGY ^ (p.index << 8));
            Some(mean + stddev * rng.sample::<f64, _>(StandardNormal))
        }
        _ => Some(mean),
    }
}

/// One trajectory of `burn_in + len` time points (rows) under the given
/// interventions, whose times are offsets after the burn-in. Pre-sample
/// values are zero.
pub fn simulate_trajectory(
    m: &VarModel,
    specs: &[InterventionSpec],
    seed: u64,
    rep: u64,
    burn_in: usize,
    len: usize,
) -> Result<DMatrix<f64>> {
    var::check_stationary(m)?;
    let plans = plan(m.labels(), specs)?;
    if let Some(p) = plans.iter().find(|p| p.time >= len) {
        return Err(Error::invalid(format!("intervention time {} is outside a window of {len}", p.time)));
    }
    Ok(run_var(m.coefs(), &var::gaussian_factor(m.sigma()), &plans, seed, rep, burn_in, len))
}

fn run_var(
    coefs: &[DMatrix<f64>],
    factor: &DMatrix<f64>,
    plans: &[Plan],
    seed: u64,
    rep: u64,
    burn_in: usize,
    len: usize,
) -> DMatrix<f64> {
    let d = factor.nrows();
    let total = burn_in + len;
    let mut x = DMatrix::zeros(total, d);
    for t in 0..total {
        let mut rng = stream(seed, rep, t as u64, TAG_INNOVATION);
        let mut row = factor * normals(&mut rng, d);
        for (j, a) in coefs.iter().enumerate() {
            if t > j {
                let prev = x.row(t - j - 1).transpose();
                row += a * prev;
            }
        }
        for p in plans.iter().filter(|p| p.time + burn_in == t) {
            if let Some(v) = strategy_value(p, &x, t, seed, rep) {
                row[p.target] = v;
            }
        }
        x.set_row(t, &row.transpose());
    }
    x
}

/// Observational sample of length `t_len` after discarding `burn_in` points.
pub fn simulate_observational(m: &VarModel, t_len: usize, seed: u64, burn_in: usize) -> Result<TimeSeriesData> {
    if t_len < 1 {
        return Err(Error::invalid("series length must be at least 1"));
    }
    let x = simulate_trajectory(m, &[], seed, 0, burn_in, t_len)?;
    TimeSeriesData::new(m.labels().to_vec(), x.rows(burn_in, t_len).into_owned())
}

/// Monte Carlo mean of `X_b(t0 + h)` under the interventions, where `t0` is
/// the earliest intervention time.
pub fn simulate_interventional(
    m: &VarModel,
    specs: &[InterventionSpec],
    b: &NodeId,
    h: usize,
    mc: &MonteCarlo,
) -> Result<AceResult> {
    var::check_stationary(m)?;
    if mc.reps < 2 {
        return Err(Error::invalid("need at least 2 replications"));
    }
    if specs.is_empty() {
        return Err(Error::invalid("need at least one intervention spec"));
    }
    let bi = m.label_index(b)?;
    let plans = plan(m.labels(), specs)?;
    let t0 = specs.iter().map(|s| s.time).min().expect("non-empty");
    let outcome = t0 + h;
    let len = specs.iter().map(|s| s.time).max().expect("non-empty").max(outcome) + 1;
    let factor = var::gaussian_factor(m.sigma());
    let values: Vec<f64> = (0..mc.reps as u64)
        .into_par_iter()
        .map(|rep| run_var(m.coefs(), &factor, &plans, mc.seed, rep, mc.burn_in, len)[(mc.burn_in + outcome, bi)])
        .collect();
    let (value, stderr) = mean_stderr(&values);
    let mut diagnostics = Diagnostics {
        reps: Some(mc.reps),
        seed: Some(mc.seed),
        burn_in: Some(mc.burn_in),
        ..Default::default()
    };
    if let Some(late) = specs.iter().find(|s| s.time > outcome) {
        diagnostics.warnings.push(format!("intervention at time {} is after the outcome time {outcome}", late.time));
    }
    Ok(AceResult { value, stderr, method: AceMethod::MonteCarloOracle, b: b.clone(), h, diagnostics })
}

fn representation_warnings(s: &SubprocessAR, h: usize, d: &mut Diagnostics) {
    d.tail_norm = Some(s.tail_norm);
    if !s.tail_ok() {
        d.warnings.push(format!("tail norm {:.3e} exceeds {:.0e}", s.tail_norm, var::TAIL_NORM_LIMIT));
    }
    if h > s.lag {
        d.warnings.push(format!("horizon {h} exceeds truncation lag {}", s.lag));
    }
}

/// `Φ^(h)_{ba}(1) · x*`. Admissibility of the subprocess is the caller's responsibility.
pub fn ace_backdoor_analytic(s: &SubprocessAR, a: &NodeId, b: &NodeId, h: usize, xstar: f64) -> Result<AceResult> {
    let pc = predictor_coeffs(s, h)?;
    let value = pc.phi_h1[(s.index_of(b)?, s.index_of(a)?)] * xstar;
    let mut diagnostics = Diagnostics { conditioning_set: Some(s.labels.clone()), ..Default::default() };
    representation_warnings(s, h, &mut diagnostics);
    Ok(AceResult { value, stderr: 0.0, method: AceMethod::AnalyticBackDoor, b: b.clone(), h, diagnostics })
}

/// Chain composition `Σ_{j<h} Σ_{c∈C} Φ^(h-j)_{bc}(1) Φ^(j)_{ca}(1) · x*` through the mediators `C`.
pub fn ace_frontdoor_analytic(
    s: &SubprocessAR,
    a: &NodeId,
    b: &NodeId,
    c: &NodeSet,
    h: usize,
    xstar: f64,
) -> Result<AceResult> {
    if h < 1 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if c.is_empty() {
        return Err(Error::invalid("mediator set must be non-empty"));
    }
    if c.contains(a) || c.contains(b) {
        return Err(Error::invalid("mediators must exclude a and b"));
    }
    let (ai, bi) = (s.index_of(a)?, s.index_of(b)?);
    let ci = c.iter().map(|x| s.index_of(x)).collect::<Result<Vec<_>>>()?;
    let mut diagnostics = Diagnostics { conditioning_set: Some(s.labels.clone()), ..Default::default() };
    representation_warnings(s, h, &mut diagnostics);
    if h == 1 {
        diagnostics.warnings.push("no mediated effect at horizon 1".into());
    }
    if h > 2 {
        diagnostics.flags.push("chain-case formula".into());
    }
    let steps = (1..h).map(|k| predictor_coeffs(s, k).map(|p| p.phi_h1)).collect::<Result<Vec<_>>>()?;
    let mut value = 0.0;
    for j in 1..h {
        for &m in &ci {
            value += steps[h - j - 1][(bi, m)] * steps[j - 1][(m, ai)];
        }
    }
    Ok(AceResult { value: value * xstar, stderr: 0.0, method: AceMethod::AnalyticFrontDoor, b: b.clone(), h, diagnostics })
}

/// Nested-expectation plug-in: observational trajectories of the
/// subprocess, the strategy's mean value substituted for `X_a(t)`, and the
/// `h`-step linear predictor applied to the modified past.
pub fn ace_plugin(
    s: &SubprocessAR,
    a: &NodeId,
    b: &NodeId,
    h: usize,
    strategy: &Strategy,
    mc: &MonteCarlo,
) -> Result<AceResult> {
    if mc.reps < 2 {
        return Err(Error::invalid("need at least 2 replications"));
    }
    let (ai, bi) = (s.index_of(a)?, s.index_of(b)?);
    if let Some(x) = strategy.conditioning_set().iter().find(|x| !s.labels.contains(x)) {
        return Err(Error::invalid(format!("conditioning component `{x}` is not in the subprocess")));
    }
    let weights = predictor_weights(s, h)?;
    let wrow: Vec<DVector<f64>> = weights.iter().map(|w| w.row(bi).transpose()).collect();
    let spec = [InterventionSpec::new(a.clone(), 0, strategy.clone())];
    let plans = plan(&s.labels, &spec)?;
    let factor = var::gaussian_factor(&s.sigma_tilde);
    let lag = s.lag;
    let values: Vec<f64> = (0..mc.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut x = run_var(&s.phi, &factor, &[], mc.seed, rep, mc.burn_in + lag, 1);
            let t = x.nrows() - 1;
            if let Some(v) = plans[0].strategy.mean_value(|i, l| x[(t - l, plans[0].cond[i])]) {
                x[(t, ai)] = v;
            }
            wrow.iter().enumerate().map(|(j, w)| w.dot(&x.row(t - j).transpose())).sum()
        })
        .collect();
    let (value, stderr) = mean_stderr(&values);
    let mut diagnostics = Diagnostics {
        reps: Some(mc.reps),
        seed: Some(mc.seed),
        burn_in: Some(mc.burn_in),
        conditioning_set: Some(s.labels.clone()),
        ..Default::default()
    };
    representation_warnings(s, h, &mut diagnostics);
    Ok(AceResult { value, stderr, method: AceMethod::PlugIn, b: b.clone(), h, diagnostics })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub pass: bool,
    pub difference: f64,
    pub z: f64,
    pub k: f64,
    pub floor: f64,
    pub analytic: AceResult,
    pub oracle: AceResult,
}

/// Passes iff `|analytic - oracle| <= k * max(oracle.stderr, floor)`.
pub fn compare(analytic: &AceResult, oracle: &AceResult, k: f64, floor: f64) -> Result<Comparison> {
    if analytic.h != oracle.h || analytic.b != oracle.b {
        return Err(Error::invalid(format!(
            "results are for different outcomes: ({}, h={}) vs ({}, h={})",
            analytic.b, analytic.h, oracle.b, oracle.h
        )));
    }
    let difference = analytic.value - oracle.value;
    let scale = oracle.stderr.max(floor);
    Ok(Comparison {
        pass: difference.abs() <= k * scale,
        difference,
        z: difference / scale,
        k,
        floor,
        analytic: analytic.clone(),
        oracle: oracle.clone(),
    })
}
