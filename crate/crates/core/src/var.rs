//! Linear Gaussian vector autoregressions.
//!
//! Conventions: `coefs[j][(b, a)]` is the weight of `X_a(t - j - 1)` in the
//! equation of `X_b(t)`, and autocovariances are `Γ(k) = E[X(t + k) X(t)']`,
//! so `Γ(-k) = Γ(k)'`.
//!
//! Autoregressive representations of subprocesses are computed analytically:
//! autocovariances of the full model come from the companion-form discrete
//! Lyapunov equation, and the subprocess coefficients solve the block
//! Toeplitz Yule-Walker system truncated at lag `L`.

use std::collections::BTreeMap;

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MixedGraph, Node, NodeId, NodeSet};

/// Models with spectral radius at or above `1 - STATIONARITY_MARGIN` are rejected.
pub const STATIONARITY_MARGIN: f64 = 1e-8;
pub const DEFAULT_ZERO_TOL: f64 = 1e-7;
/// Largest tail residual for which a subprocess representation is used
/// without a warning.
pub const TAIL_NORM_LIMIT: f64 = 1e-6;
const TAIL_LAGS: usize = 5;

pub fn default_truncation(p: usize) -> usize {
    30.max(5 * p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarModel {
    labels: Vec<NodeId>,
    coefs: Vec<DMatrix<f64>>,
    sigma: DMatrix<f64>,
    observed: Vec<bool>,
}

impl VarModel {
    pub fn new(
        labels: Vec<NodeId>,
        coefs: Vec<DMatrix<f64>>,
        sigma: DMatrix<f64>,
        observed: Vec<bool>,
    ) -> Result<Self> {
        let d = labels.len();
        if d == 0 {
            return Err(Error::invalid("model needs at least one component"));
        }
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != d || labels.iter().any(|l| l.as_str().is_empty()) {
            return Err(Error::invalid("labels must be unique and non-empty"));
        }
        if coefs.is_empty() {
            return Err(Error::invalid("lag order must be at least 1"));
        }
        for (j, a) in coefs.iter().enumerate() {
            if a.shape() != (d, d) {
                return Err(Error::invalid(format!("A[{j}] has shape {:?}, expected ({d}, {d})", a.shape())));
            }
        }
        if sigma.shape() != (d, d) {
            return Err(Error::invalid(format!("Sigma has shape {:?}, expected ({d}, {d})", sigma.shape())));
        }
        if observed.len() != d {
            return Err(Error::invalid("observed mask length differs from label count"));
        }
        if coefs.iter().chain(std::iter::once(&sigma)).any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(Error::invalid("model contains non-finite entries"));
        }
        let scale = sigma.amax().max(1.0);
        if (&sigma - sigma.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("Sigma is not symmetric"));
        }
        if sigma.clone().cholesky().is_none() {
            return Err(Error::invalid("Sigma is not positive definite"));
        }
        Ok(VarModel { labels, coefs, sigma, observed })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn lag_order(&self) -> usize {
        self.coefs.len()
    }

    pub fn labels(&self) -> &[NodeId] {
        &self.labels
    }

    pub fn coefs(&self) -> &[DMatrix<f64>] {
        &self.coefs
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn observed(&self) -> &[bool] {
        &self.observed
    }

    pub fn label_index(&self, id: &NodeId) -> Result<usize> {
        self.labels.iter().position(|l| l == id).ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// The `dp x dp` companion matrix of the lag polynomial.
    pub fn companion(&self) -> DMatrix<f64> {
        companion_of(&self.coefs)
    }
}

pub(crate) fn companion_of(coefs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = coefs.len();
    let d = coefs[0].nrows();
    let mut f = DMatrix::zeros(d * p, d * p);
    for (j, a) in coefs.iter().enumerate() {
        f.view_mut((0, j * d), (d, d)).copy_from(a);
    }
    for i in 0..d * (p - 1) {
        f[(d + i, i)] = 1.0;
    }
    f
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::invalid(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VarDoc {
    labels: Vec<NodeId>,
    p: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "Sigma")]
    sigma: Vec<Vec<f64>>,
    #[serde(default)]
    observed: Option<Vec<bool>>,
}

pub fn parse_var(text: &str) -> Result<VarModel> {
    let doc: VarDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("line {} column {}", e.line(), e.column()),
        reason: e.to_string(),
    })?;
    if doc.a.len() != doc.p {
        return Err(Error::invalid(format!("p = {} but {} coefficient matrices given", doc.p, doc.a.len())));
    }
    let coefs = doc
        .a
        .iter()
        .enumerate()
        .map(|(j, m)| matrix_from_rows(m, &format!("A[{j}]")))
        .collect::<Result<Vec<_>>>()?;
    let sigma = matrix_from_rows(&doc.sigma, "Sigma")?;
    let observed = doc.observed.unwrap_or_else(|| vec![true; doc.labels.len()]);
    VarModel::new(doc.labels, coefs, sigma, observed)
}

pub fn serialize_var(m: &VarModel) -> String {
    let doc = VarDoc {
        labels: m.labels.clone(),
        p: m.lag_order(),
        a: m.coefs.iter().map(rows_of).collect(),
        sigma: rows_of(&m.sigma),
        observed: Some(m.observed.clone()),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("model serializes");
    s.push('\n');
    s
}

pub fn spectral_radius(f: &DMatrix<f64>) -> f64 {
    if f.nrows() == 0 {
        return 0.0;
    }
    // The shifted QR iteration can stall, e.g. on nilpotent shift matrices.
    for m in [f.clone(), f.transpose()] {
        if let Some(schur) = Schur::try_new(m, f64::EPSILON, 10_000) {
            return schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
    }
    gelfand_radius(f)
}

/// `lim ||F^k||^(1/k)` evaluated at `k = 2^40` by repeated squaring with rescaling.
fn gelfand_radius(f: &DMatrix<f64>) -> f64 {
    let mut m = f.clone();
    let mut log_norm = 0.0;
    let mut k = 1.0;
    for _ in 0..40 {
        let n = m.norm();
        if n == 0.0 {
            return 0.0;
        }
        m /= n;
        log_norm += n.ln();
        m = &m * &m;
        log_norm *= 2.0;
        k *= 2.0;
    }
    let n = m.norm();
    if n == 0.0 {
        return 0.0;
    }
    ((log_norm + n.ln()) / k).exp()
}

/// Spectral radius of the companion matrix; errors when the model is not
/// (numerically) stationary.
pub fn check_stationary(m: &VarModel) -> Result<f64> {
    let radius = spectral_radius(&m.companion());
    if !radius.is_finite() || radius >= 1.0 - STATIONARITY_MARGIN {
        return Err(Error::NonStationary { radius });
    }
    Ok(radius)
}

/// Solves `P = F P F' + Q` by the doubling iteration.
pub(crate) fn discrete_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut p = q.clone();
    let mut a = f.clone();
    for _ in 0..200 {
        let step = &a * &p * a.transpose();
        p += &step;
        a = &a * &a;
        if step.amax() <= f64::EPSILON * p.amax().max(f64::MIN_POSITIVE) {
            return Ok((&p + p.transpose()) * 0.5);
        }
        if !p.iter().all(|x| x.is_finite()) {
            break;
        }
    }
    Err(Error::Numerical("Lyapunov doubling iteration did not converge".into()))
}

/// `Γ(0), …, Γ(maxlag)` of a stationary model.
pub fn autocovariance(m: &VarModel, maxlag: usize) -> Result<Vec<DMatrix<f64>>> {
    check_stationary(m)?;
    let (d, p) = (m.dim(), m.lag_order());
    let f = m.companion();
    let mut q = DMatrix::zeros(d * p, d * p);
    q.view_mut((0, 0), (d, d)).copy_from(&m.sigma);
    let big = discrete_lyapunov(&f, &q)?;
    // Block (0, j) of the state covariance is E[X(t) X(t-j)'] = Γ(j).
    let mut gamma: Vec<DMatrix<f64>> = (0..p.min(maxlag + 1))
        .map(|j| big.view((0, j * d), (d, d)).into_owned())
        .collect();
    for k in gamma.len()..=maxlag {
        let mut g = DMatrix::zeros(d, d);
        for (j, a) in m.coefs.iter().enumerate() {
            g += a * lagged(&gamma, k as isize - j as isize - 1);
        }
        gamma.push(g);
    }
    Ok(gamma)
}

/// `Γ(k)` for possibly negative `k`.
fn lagged(gamma: &[DMatrix<f64>], k: isize) -> DMatrix<f64> {
    if k >= 0 {
        gamma[k as usize].clone()
    } else {
        gamma[(-k) as usize].transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientEntry {
    pub lag: usize,
    pub row: NodeId,
    pub col: NodeId,
    pub value: f64,
}

/// Autoregressive representation of a subprocess, truncated at `lag`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubprocessAR {
    pub labels: Vec<NodeId>,
    pub lag: usize,
    pub phi: Vec<DMatrix<f64>>,
    pub sigma_tilde: DMatrix<f64>,
    /// Largest Frobenius norm of the Yule-Walker residual at lags `L+1..L+5`.
    pub tail_norm: f64,
    pub zero_tol: f64,
    /// Coefficients with magnitude at or above `zero_tol`; the rest are
    /// reported as structural zeros.
    pub support: Vec<CoefficientEntry>,
    pub structural_zeros: usize,
}

impl SubprocessAR {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn index_of(&self, id: &NodeId) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == id)
            .ok_or_else(|| Error::invalid(format!("`{id}` is not part of the subprocess")))
    }

    /// Coefficient of `X_col(t - lag)` in the equation of `X_row(t)`; zero beyond the truncation lag.
    pub fn coefficient(&self, row: &str, col: &str, lag: usize) -> Result<f64> {
        let (r, c) = (self.index_of(&row.into())?, self.index_of(&col.into())?);
        if lag == 0 {
            return Err(Error::invalid("lags start at 1"));
        }
        Ok(self.phi.get(lag - 1).map_or(0.0, |m| m[(r, c)]))
    }

    pub fn tail_ok(&self) -> bool {
        self.tail_norm < TAIL_NORM_LIMIT
    }

    /// Builds a representation directly from coefficients, e.g. for a
    /// full process whose structural form is already known.
    pub fn from_parts(labels: Vec<NodeId>, phi: Vec<DMatrix<f64>>, sigma_tilde: DMatrix<f64>) -> Result<Self> {
        let k = labels.len();
        if phi.is_empty() || phi.iter().any(|m| m.shape() != (k, k)) || sigma_tilde.shape() != (k, k) {
            return Err(Error::invalid("inconsistent subprocess dimensions"));
        }
        let lag = phi.len();
        let mut s = SubprocessAR {
            labels,
            lag,
            phi,
            sigma_tilde,
            tail_norm: 0.0,
            zero_tol: DEFAULT_ZERO_TOL,
            support: Vec::new(),
            structural_zeros: 0,
        };
        s.classify_support();
        Ok(s)
    }

    fn classify_support(&mut self) {
        self.support.clear();
        self.structural_zeros = 0;
        for (j, m) in self.phi.iter().enumerate() {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    if m[(r, c)].abs() >= self.zero_tol {
                        self.support.push(CoefficientEntry {
                            lag: j + 1,
                            row: self.labels[r].clone(),
                            col: self.labels[c].clone(),
                            value: m[(r, c)],
                        });
                    } else {
                        self.structural_zeros += 1;
                    }
                }
            }
        }
    }
}

#[derive(Serialize)]
struct SubprocessDoc<'a> {
    labels: &'a [NodeId],
    #[serde(rename = "L")]
    lag: usize,
    #[serde(rename = "Phi")]
    phi: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "SigmaTilde")]
    sigma_tilde: Vec<Vec<f64>>,
    tail_norm: f64,
    tail_ok: bool,
    zero_tol: f64,
    structural_zeros: usize,
    support: &'a [CoefficientEntry],
}

impl Serialize for SubprocessAR {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SubprocessDoc {
            labels: &self.labels,
            lag: self.lag,
            phi: self.phi.iter().map(rows_of).collect(),
            sigma_tilde: rows_of(&self.sigma_tilde),
            tail_norm: self.tail_norm,
            tail_ok: self.tail_ok(),
            zero_tol: self.zero_tol,
            structural_zeros: self.structural_zeros,
            support: &self.support,
        }
        .serialize(serializer)
    }
}

fn sub_block(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

/// Solves the truncated multivariate Yule-Walker equations of the
/// subprocess `S`. Labels keep the model's component order.
pub fn subprocess_ar(m: &VarModel, s: &NodeSet, lag: usize, zero_tol: f64) -> Result<SubprocessAR> {
    if s.is_empty() {
        return Err(Error::invalid("subprocess needs at least one component"));
    }
    for id in s {
        m.label_index(id)?;
    }
    if lag < m.lag_order() {
        return Err(Error::invalid(format!("truncation lag {lag} is below the model order {}", m.lag_order())));
    }
    let idx: Vec<usize> = (0..m.dim()).filter(|&i| s.contains(&m.labels[i])).collect();
    let labels: Vec<NodeId> = idx.iter().map(|&i| m.labels[i].clone()).collect();
    let k = idx.len();
    let gamma: Vec<DMatrix<f64>> = autocovariance(m, lag + TAIL_LAGS)?.iter().map(|g| sub_block(g, &idx)).collect();

    // [Φ(1) … Φ(L)] R = [Γ(1) … Γ(L)], with block (j, m) of R equal to Γ(m - j).
    let n = lag * k;
    let mut r = DMatrix::zeros(n, n);
    for j in 0..lag {
        for mm in 0..lag {
            r.view_mut((j * k, mm * k), (k, k)).copy_from(&lagged(&gamma, mm as isize - j as isize));
        }
    }
    let r = (&r + r.transpose()) * 0.5;
    let mut rhs = DMatrix::zeros(n, k);
    for mm in 0..lag {
        rhs.view_mut((mm * k, 0), (k, k)).copy_from(&gamma[mm + 1].transpose());
    }
    let chol = r.clone().cholesky().ok_or_else(|| Error::Singular {
        reason: "block Toeplitz autocovariance matrix is not positive definite".into(),
        condition: condition_estimate(&r),
    })?;
    let stacked_t = chol.solve(&rhs);
    let phi: Vec<DMatrix<f64>> = (0..lag).map(|j| stacked_t.view((j * k, 0), (k, k)).transpose()).collect();

    let mut sigma_tilde = gamma[0].clone();
    for (j, ph) in phi.iter().enumerate() {
        sigma_tilde -= ph * gamma[j + 1].transpose();
    }
    let sigma_tilde = (&sigma_tilde + sigma_tilde.transpose()) * 0.5;

    let tail_norm = (lag + 1..=lag + TAIL_LAGS)
        .map(|mm| {
            let mut res = gamma[mm].clone();
            for (j, ph) in phi.iter().enumerate() {
                res -= ph * lagged(&gamma, mm as isize - j as isize - 1);
            }
            res.norm()
        })
        .fold(0.0, f64::max);

    let mut out = SubprocessAR {
        labels,
        lag,
        phi,
        sigma_tilde,
        tail_norm,
        zero_tol,
        support: Vec::new(),
        structural_zeros: 0,
    };
    out.classify_support();
    Ok(out)
}

fn condition_estimate(r: &DMatrix<f64>) -> f64 {
    let ev = r.clone().symmetric_eigenvalues();
    let max = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let min = ev.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorCoeffs {
    pub h: usize,
    pub labels: Vec<NodeId>,
    /// Entry `(b, a)` is the weight of `X_a(t)` in the best linear
    /// predictor of `X_b(t + h)`.
    pub phi_h1: DMatrix<f64>,
    /// Set when `h` exceeds the truncation lag, so `Φ(h)` was taken as zero.
    pub beyond_truncation: bool,
}

impl PredictorCoeffs {
    pub fn get(&self, b: &NodeId, a: &NodeId) -> Result<f64> {
        let pos = |id: &NodeId| {
            self.labels.iter().position(|l| l == id).ok_or_else(|| Error::invalid(format!("`{id}` not in subprocess")))
        };
        Ok(self.phi_h1[(pos(b)?, pos(a)?)])
    }
}

impl Serialize for PredictorCoeffs {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc<'a> {
            h: usize,
            labels: &'a [NodeId],
            #[serde(rename = "Phi_h1")]
            phi_h1: Vec<Vec<f64>>,
            beyond_truncation: bool,
        }
        Doc { h: self.h, labels: &self.labels, phi_h1: rows_of(&self.phi_h1), beyond_truncation: self.beyond_truncation }
            .serialize(serializer)
    }
}

/// Lag-one weight of the `h`-step predictor, by the recursion
/// `Φ^(h)(1) = Σ_{j<h} Φ(j) Φ^(h-j)(1) + Φ(h)`.
pub fn predictor_coeffs(s: &SubprocessAR, h: usize) -> Result<PredictorCoeffs> {
    if h < 1 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let k = s.dim();
    let phi = |j: usize| -> DMatrix<f64> { s.phi.get(j - 1).cloned().unwrap_or_else(|| DMatrix::zeros(k, k)) };
    let mut memo: Vec<DMatrix<f64>> = Vec::with_capacity(h);
    for step in 1..=h {
        let mut acc = phi(step);
        for j in 1..step {
            acc += phi(j) * &memo[step - j - 1];
        }
        memo.push(acc);
    }
    Ok(PredictorCoeffs {
        h,
        labels: s.labels.clone(),
        phi_h1: memo.pop().expect("h >= 1"),
        beyond_truncation: h > s.lag,
    })
}

/// All weights `Φ^(h)(1..=L)` of the `h`-step predictor: the first block
/// row of the companion matrix raised to the `h`-th power.
pub fn predictor_weights(s: &SubprocessAR, h: usize) -> Result<Vec<DMatrix<f64>>> {
    if h < 1 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let k = s.dim();
    let f = companion_of(&s.phi);
    let mut row = f.rows(0, k).into_owned();
    for _ in 1..h {
        row = &row * &f;
    }
    Ok((0..s.lag).map(|j| row.view((0, j * k), (k, k)).into_owned()).collect())
}

/// Mixed graph read off the coefficients: `a -> b` when some lag weight of
/// `X_a` in the equation of `X_b` exceeds `tol`, `a --- b` when the
/// innovation covariance does.
pub fn path_diagram(m: &VarModel, tol: f64) -> MixedGraph {
    let d = m.dim();
    let nodes = m
        .labels
        .iter()
        .zip(&m.observed)
        .map(|(id, &observed)| Node { id: id.clone(), observed })
        .collect();
    let mut directed = Vec::new();
    let mut dashed = Vec::new();
    for b in 0..d {
        for a in 0..d {
            if a == b {
                continue;
            }
            if m.coefs.iter().map(|c| c[(b, a)].abs()).fold(0.0, f64::max) > tol {
                directed.push((m.labels[a].clone(), m.labels[b].clone()));
            }
            if a < b && m.sigma[(a, b)].abs() > tol {
                dashed.push((m.labels[a].clone(), m.labels[b].clone()));
            }
        }
    }
    MixedGraph::new(nodes, directed, dashed).expect("labels are unique and edges are between distinct nodes")
}

fn subset_indices(s: &SubprocessAR, set: &NodeSet) -> Result<Vec<usize>> {
    set.iter()
        .map(|id| s.index_of(id).map_err(|_| Error::invalid(format!("`{id}` is not part of the subprocess"))))
        .collect()
}

fn disjoint_in(s: &SubprocessAR, a: &NodeSet, b: &NodeSet) -> Result<(Vec<usize>, Vec<usize>)> {
    if let Some(x) = a.intersection(b).next() {
        return Err(Error::invalid(format!("sets must be disjoint; `{x}` is in both")));
    }
    Ok((subset_indices(s, a)?, subset_indices(s, b)?))
}

/// True iff every lag weight of `X_A` in the equations of `X_B` is at most `tol`.
pub fn granger_noncausal_numeric(s: &SubprocessAR, a: &NodeSet, b: &NodeSet, tol: f64) -> Result<bool> {
    let (ai, bi) = disjoint_in(s, a, b)?;
    Ok(s.phi.iter().all(|m| bi.iter().all(|&r| ai.iter().all(|&c| m[(r, c)].abs() <= tol))))
}

/// True iff the innovation covariance between `A` and `B` is at most `tol`.
pub fn contemp_independent_numeric(s: &SubprocessAR, a: &NodeSet, b: &NodeSet, tol: f64) -> Result<bool> {
    let (ai, bi) = disjoint_in(s, a, b)?;
    Ok(ai.iter().all(|&r| bi.iter().all(|&c| s.sigma_tilde[(r, c)].abs() <= tol)))
}

/// Observed multivariate series, one row per time point.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesData {
    pub labels: Vec<NodeId>,
    pub values: DMatrix<f64>,
}

impl TimeSeriesData {
    pub fn new(labels: Vec<NodeId>, values: DMatrix<f64>) -> Result<Self> {
        if labels.len() != values.ncols() {
            return Err(Error::invalid("label count differs from column count"));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("data contains non-finite values"));
        }
        Ok(TimeSeriesData { labels, values })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn column(&self, id: &str) -> Option<Vec<f64>> {
        let j = self.labels.iter().position(|l| l.as_str() == id)?;
        Some(self.values.column(j).iter().copied().collect())
    }

    pub fn select(&self, s: &NodeSet) -> Result<TimeSeriesData> {
        let idx: Vec<usize> = (0..self.labels.len()).filter(|&j| s.contains(&self.labels[j])).collect();
        if idx.len() != s.len() {
            return Err(Error::invalid("selected columns are not all present"));
        }
        let values = DMatrix::from_fn(self.len(), idx.len(), |t, j| self.values[(t, idx[j])]);
        TimeSeriesData::new(idx.iter().map(|&j| self.labels[j].clone()).collect(), values)
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let labels: Vec<NodeId> = rdr
            .headers()
            .map_err(|e| Error::Parse { location: "header".into(), reason: e.to_string() })?
            .iter()
            .map(NodeId::from)
            .collect();
        let mut flat = Vec::new();
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { location: format!("row {}", i + 1), reason: e.to_string() })?;
            if rec.len() != labels.len() {
                return Err(Error::Parse { location: format!("row {}", i + 1), reason: "wrong field count".into() });
            }
            for (j, field) in rec.iter().enumerate() {
                let x: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    location: format!("row {} column {}", i + 1, j + 1),
                    reason: format!("not a number: `{field}`"),
                })?;
                flat.push(x);
            }
            rows += 1;
        }
        TimeSeriesData::new(labels.clone(), DMatrix::from_row_slice(rows, labels.len(), &flat))
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(self.labels.iter().map(NodeId::as_str)).map_err(io)?;
        for t in 0..self.len() {
            w.write_record(self.values.row(t).iter().map(|x| format!("{x:?}"))).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Equation-by-equation least squares on `p` lagged values (no intercept).
pub fn ols_fit(data: &TimeSeriesData, p: usize) -> Result<VarModel> {
    let d = data.labels.len();
    let t_len = data.len();
    if p < 1 {
        return Err(Error::invalid("lag order must be at least 1"));
    }
    if t_len <= 10 * d * p {
        return Err(Error::invalid(format!("need more than {} observations, got {t_len}", 10 * d * p)));
    }
    let n = t_len - p;
    let z = DMatrix::from_fn(n, d * p, |i, col| {
        let (j, a) = (col / d, col % d);
        data.values[(i + p - j - 1, a)]
    });
    let y = data.values.rows(p, n).into_owned();
    let qr = z.clone().qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    let tol = rmax * (n.max(d * p) as f64) * f64::EPSILON;
    if rmax == 0.0 || r.diagonal().iter().any(|x| x.abs() <= tol) {
        return Err(Error::Singular {
            reason: "lagged regressor matrix is rank deficient".into(),
            condition: f64::INFINITY,
        });
    }
    let qty = qr.q().transpose() * &y;
    let b = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let coefs: Vec<DMatrix<f64>> = (0..p).map(|j| b.rows(j * d, d).transpose()).collect();
    let resid = &y - &z * &b;
    let sigma = resid.transpose() * &resid / n as f64;
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    VarModel::new(data.labels.clone(), coefs, sigma, vec![true; d])
}

/// Square-root factor `L` with `L L' = m`. Lower-triangular Cholesky when
/// `m` is positive definite, symmetric eigen square root otherwise.
pub(crate) fn gaussian_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = m.clone().cholesky() {
        return c.l();
    }
    let eig = m.clone().symmetric_eigen();
    let sqrt = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|x| x.max(0.0).sqrt()));
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
}

/// Per-label summary used in reports.
pub fn label_map<T: Clone>(labels: &[NodeId], values: &[T]) -> BTreeMap<String, T> {
    labels.iter().zip(values).map(|(l, v)| (l.to_string(), v.clone())).collect()
}
