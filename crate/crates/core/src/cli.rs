//! Command-line front end. Every run prints one JSON document carrying a
//! `manifest` with the command, arguments, input hashes, seeds and
//! tolerances.
//!
//! Exit codes: 0 when the query was answered (including negative answers),
//! 1 for input errors, 2 for numerical failures.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::criteria::{self, AdmissibleSetRequest, Criterion};
use crate::error::{Error, Result};
use crate::graph::{self, MixedGraph, NodeId, NodeSet};
use crate::intervene::{self, InterventionSpec, MonteCarlo, Strategy};
use crate::separation;
use crate::var::{self, VarModel};

#[derive(Parser, Debug)]
#[command(name = "tscausal", version, about = "Causal effect identification and estimation for time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Queries on mixed graphs
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Vector autoregression numerics
    #[command(subcommand)]
    Var(VarCmd),
    /// Average causal effects
    #[command(subcommand)]
    Ace(AceCmd),
}

#[derive(Args, Debug)]
struct GraphFile {
    /// Mixed graph JSON file
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args, Debug)]
struct VarFile {
    /// VAR model JSON file
    #[arg(long)]
    var: PathBuf,
}

#[derive(Args, Debug)]
struct SetPair {
    /// Comma-separated source labels
    #[arg(long)]
    a: String,
    /// Comma-separated target labels
    #[arg(long)]
    b: String,
}

#[derive(Args, Debug)]
struct Pair {
    #[arg(long)]
    a: String,
    #[arg(long)]
    b: String,
}

#[derive(Subcommand, Debug)]
enum GraphCmd {
    /// Ancestors of a node set
    Ancestors {
        #[command(flatten)]
        graph: GraphFile,
        #[arg(long)]
        s: String,
    },
    /// m-separation of two node sets given a third
    Msep {
        #[command(flatten)]
        graph: GraphFile,
        #[command(flatten)]
        sets: SetPair,
        #[arg(long, default_value = "")]
        given: String,
    },
    /// Graphical Granger non-causality of A for B given C
    Granger {
        #[command(flatten)]
        graph: GraphFile,
        #[command(flatten)]
        sets: SetPair,
        #[arg(long, default_value = "")]
        c: String,
    },
    /// Non-causality of A for B at every horizon given C
    NoncausalInf {
        #[command(flatten)]
        graph: GraphFile,
        #[command(flatten)]
        sets: SetPair,
        #[arg(long, default_value = "")]
        c: String,
    },
    /// Back-door admissibility of S for the effect of a on b
    Backdoor {
        #[command(flatten)]
        graph: GraphFile,
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        s: String,
    },
    /// Front-door admissibility of S for the effect of a on b
    Frontdoor {
        #[command(flatten)]
        graph: GraphFile,
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        s: String,
    },
    /// Inclusion-minimal admissible sets
    FindSet {
        #[command(flatten)]
        graph: GraphFile,
        #[command(flatten)]
        pair: Pair,
        #[arg(long, value_enum, default_value_t = CriterionArg::Backdoor)]
        criterion: CriterionArg,
        /// Nodes that may not be used; defaults to the latent nodes
        #[arg(long)]
        forbid: Option<String>,
        /// Nodes every set must contain besides a and b
        #[arg(long, default_value = "")]
        include: String,
        #[arg(long)]
        max_size: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CriterionArg {
    Backdoor,
    Frontdoor,
}

#[derive(Subcommand, Debug)]
enum VarCmd {
    /// Spectral radius of the companion matrix
    Stationary {
        #[command(flatten)]
        var: VarFile,
    },
    /// Autoregressive representation of a subprocess
    Subar {
        #[command(flatten)]
        var: VarFile,
        #[arg(long)]
        s: String,
        #[arg(long)]
        lag: Option<usize>,
        /// Magnitude below which coefficients count as structural zeros
        #[arg(long, default_value_t = var::DEFAULT_ZERO_TOL)]
        tol: f64,
    },
    /// h-step predictor coefficients of a subprocess
    Predictor {
        #[command(flatten)]
        var: VarFile,
        #[arg(long)]
        s: String,
        #[arg(long)]
        h: usize,
        #[arg(long)]
        lag: Option<usize>,
    },
    /// Mixed graph implied by the model's nonzero pattern
    Diagram {
        #[command(flatten)]
        var: VarFile,
        #[arg(long, default_value_t = var::DEFAULT_ZERO_TOL)]
        tol: f64,
    },
    /// Simulate an observational series to CSV
    Simulate {
        #[command(flatten)]
        var: VarFile,
        /// Number of time points written
        #[arg(long, default_value_t = 1000)]
        len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = intervene::DEFAULT_BURN_IN)]
        burn_in: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Least-squares VAR(p) fit of CSV data
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        p: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Backdoor,
    Frontdoor,
}

#[derive(Args, Debug)]
struct EffectArgs {
    #[command(flatten)]
    var: VarFile,
    #[command(flatten)]
    pair: Pair,
    /// Horizon
    #[arg(long)]
    h: usize,
    /// Atomic intervention value
    #[arg(long, default_value_t = 1.0)]
    x: f64,
}

#[derive(Args, Debug)]
struct AnalyticArgs {
    /// Observed subprocess used for adjustment
    #[arg(long)]
    s: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Backdoor)]
    method: MethodArg,
    /// Mediators for the front-door formula
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    lag: Option<usize>,
}

#[derive(Args, Debug)]
struct McArgs {
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = intervene::DEFAULT_BURN_IN)]
    burn_in: usize,
}

impl McArgs {
    fn config(&self) -> MonteCarlo {
        MonteCarlo::new(self.reps, self.seed).burn_in(self.burn_in)
    }
}

#[derive(Subcommand, Debug)]
enum AceCmd {
    /// Closed-form effect from a subprocess representation
    Analytic {
        #[command(flatten)]
        effect: EffectArgs,
        #[command(flatten)]
        adj: AnalyticArgs,
    },
    /// Nested-expectation plug-in estimate
    Plugin {
        #[command(flatten)]
        effect: EffectArgs,
        #[arg(long)]
        s: String,
        #[arg(long)]
        lag: Option<usize>,
        /// Strategy JSON file; an atomic intervention at --x otherwise
        #[arg(long)]
        strategy: Option<PathBuf>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Interventional Monte Carlo on the structural model
    Oracle {
        #[command(flatten)]
        effect: EffectArgs,
        /// JSON list of intervention specs; replaces the atomic intervention on a
        #[arg(long)]
        specs: Option<PathBuf>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Analytic effect checked against the oracle
    Compare {
        #[command(flatten)]
        effect: EffectArgs,
        #[command(flatten)]
        adj: AnalyticArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Pass threshold in oracle standard errors
        #[arg(long, default_value_t = 3.0)]
        k: f64,
        /// Smallest standard error used in the threshold
        #[arg(long, default_value_t = intervene::DEFAULT_FLOOR)]
        floor: f64,
    },
}

#[derive(Serialize, Debug, Clone)]
struct InputFile {
    path: String,
    sha256: String,
}

#[derive(Serialize, Debug, Default)]
struct Manifest {
    command: String,
    args: Vec<String>,
    inputs: BTreeMap<String, InputFile>,
    seeds: BTreeMap<String, u64>,
    tolerances: BTreeMap<String, f64>,
    version: String,
}

impl Manifest {
    fn read(&mut self, key: &str, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.insert(
            key.into(),
            InputFile { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) },
        );
        String::from_utf8(bytes).map_err(|_| Error::invalid(format!("{} is not UTF-8", path.display())))
    }

    fn graph(&mut self, f: &GraphFile) -> Result<MixedGraph> {
        graph::parse_graph(&self.read("graph", &f.graph)?)
    }

    fn var(&mut self, f: &VarFile) -> Result<VarModel> {
        var::parse_var(&self.read("var", &f.var)?)
    }

    fn mc(&mut self, mc: &McArgs) -> MonteCarlo {
        self.seeds.insert("seed".into(), mc.seed);
        mc.config()
    }
}

fn set(list: &str) -> NodeSet {
    graph::node_set(list.split(',').map(str::trim).filter(|s| !s.is_empty()))
}

fn node(label: &str) -> NodeId {
    NodeId::from(label.trim())
}

fn with_fields(result: impl Serialize) -> Result<Value> {
    let v = serde_json::to_value(result).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(match v {
        Value::Object(_) => v,
        other => json!({ "result": other }),
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

fn subprocess(m: &VarModel, s: &str, lag: Option<usize>, man: &mut Manifest) -> Result<var::SubprocessAR> {
    let lag = lag.unwrap_or_else(|| var::default_truncation(m.lag_order()));
    man.tolerances.insert("zero_tol".into(), var::DEFAULT_ZERO_TOL);
    var::subprocess_ar(m, &set(s), lag, var::DEFAULT_ZERO_TOL)
}

fn analytic(
    m: &VarModel,
    effect: &EffectArgs,
    adj: &AnalyticArgs,
    man: &mut Manifest,
) -> Result<(intervene::AceResult, criteria::CriterionReport)> {
    let sub = subprocess(m, &adj.s, adj.lag, man)?;
    let (a, b) = (node(&effect.pair.a), node(&effect.pair.b));
    let diagram = var::path_diagram(m, var::DEFAULT_ZERO_TOL);
    let s = set(&adj.s);
    Ok(match adj.method {
        MethodArg::Backdoor => (
            intervene::ace_backdoor_analytic(&sub, &a, &b, effect.h, effect.x)?,
            criteria::backdoor_admissible(&diagram, &a, &b, &s)?,
        ),
        MethodArg::Frontdoor => {
            let c = adj.c.as_deref().ok_or_else(|| Error::invalid("front-door method needs --c"))?;
            (
                intervene::ace_frontdoor_analytic(&sub, &a, &b, &set(c), effect.h, effect.x)?,
                criteria::frontdoor_admissible(&diagram, &a, &b, &s)?,
            )
        }
    })
}

fn oracle_specs(effect: &EffectArgs, specs: &Option<PathBuf>, man: &mut Manifest) -> Result<Vec<InterventionSpec>> {
    match specs {
        Some(path) => {
            let text = man.read("specs", path)?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                location: format!("line {} column {}", e.line(), e.column()),
                reason: e.to_string(),
            })
        }
        None => Ok(vec![InterventionSpec::new(node(&effect.pair.a), 0, Strategy::atomic(effect.x))]),
    }
}

fn dispatch(cmd: &Command, man: &mut Manifest) -> Result<Value> {
    match cmd {
        Command::Graph(g) => graph_cmd(g, man),
        Command::Var(v) => var_cmd(v, man),
        Command::Ace(a) => ace_cmd(a, man),
    }
}

fn graph_cmd(cmd: &GraphCmd, man: &mut Manifest) -> Result<Value> {
    match cmd {
        GraphCmd::Ancestors { graph, s } => {
            let g = man.graph(graph)?;
            Ok(json!({ "ancestors": graph::ancestors(&g, &set(s))? }))
        }
        GraphCmd::Msep { graph, sets, given } => {
            let g = man.graph(graph)?;
            let v = separation::m_connection(&g, &set(&sets.a), &set(&sets.b), &set(given))?;
            Ok(json!({ "separated": !v.connected, "witness": v.witness }))
        }
        GraphCmd::Granger { graph, sets, c } => {
            let g = man.graph(graph)?;
            with_fields(criteria::granger_noncausal(&g, &set(&sets.a), &set(&sets.b), &set(c))?)
        }
        GraphCmd::NoncausalInf { graph, sets, c } => {
            let g = man.graph(graph)?;
            with_fields(criteria::noncausal_all_horizons(&g, &set(&sets.a), &set(&sets.b), &set(c))?)
        }
        GraphCmd::Backdoor { graph, pair, s } => {
            let g = man.graph(graph)?;
            with_fields(criteria::backdoor_admissible(&g, &node(&pair.a), &node(&pair.b), &set(s))?)
        }
        GraphCmd::Frontdoor { graph, pair, s } => {
            let g = man.graph(graph)?;
            with_fields(criteria::frontdoor_admissible(&g, &node(&pair.a), &node(&pair.b), &set(s))?)
        }
        GraphCmd::FindSet { graph, pair, criterion, forbid, include, max_size } => {
            let g = man.graph(graph)?;
            let criterion = match criterion {
                CriterionArg::Backdoor => Criterion::BackDoor,
                CriterionArg::Frontdoor => Criterion::FrontDoor,
            };
            let mut req = AdmissibleSetRequest::new(&g, node(&pair.a), node(&pair.b), criterion);
            if let Some(f) = forbid {
                req = req.forbidden(set(f));
            }
            if let Some(k) = max_size {
                req = req.max_size(*k);
            }
            req.must_include.extend(set(include));
            let sets = criteria::find_admissible_sets(&g, &req)?;
            Ok(json!({ "criterion": criterion, "forbidden": req.forbidden, "sets": sets }))
        }
    }
}

fn var_cmd(cmd: &VarCmd, man: &mut Manifest) -> Result<Value> {
    match cmd {
        VarCmd::Stationary { var } => {
            let m = man.var(var)?;
            man.tolerances.insert("stationarity_margin".into(), var::STATIONARITY_MARGIN);
            let radius = var::spectral_radius(&m.companion());
            let stationary = radius < 1.0 - var::STATIONARITY_MARGIN;
            Ok(json!({ "stationary": stationary, "spectral_radius": radius }))
        }
        VarCmd::Subar { var, s, lag, tol } => {
            let m = man.var(var)?;
            let lag = lag.unwrap_or_else(|| var::default_truncation(m.lag_order()));
            man.tolerances.insert("zero_tol".into(), *tol);
            with_fields(var::subprocess_ar(&m, &set(s), lag, *tol)?)
        }
        VarCmd::Predictor { var, s, h, lag } => {
            let m = man.var(var)?;
            let sub = subprocess(&m, s, *lag, man)?;
            let pc = var::predictor_coeffs(&sub, *h)?;
            Ok(merge(with_fields(pc)?, json!({ "tail_norm": sub.tail_norm, "tail_ok": sub.tail_ok() })))
        }
        VarCmd::Diagram { var, tol } => {
            let m = man.var(var)?;
            man.tolerances.insert("zero_tol".into(), *tol);
            let text = graph::serialize_graph(&var::path_diagram(&m, *tol));
            Ok(json!({ "graph": serde_json::from_str::<Value>(&text).expect("graph serializes to JSON") }))
        }
        VarCmd::Simulate { var, len, seed, burn_in, out } => {
            let m = man.var(var)?;
            man.seeds.insert("seed".into(), *seed);
            let data = intervene::simulate_observational(&m, *len, *seed, *burn_in)?;
            let mut buf = Vec::new();
            data.write_csv(&mut buf)?;
            std::fs::write(out, &buf)?;
            Ok(json!({
                "out": out.display().to_string(),
                "sha256": hex::encode(Sha256::digest(&buf)),
                "rows": data.len(),
                "columns": data.labels,
                "burn_in": burn_in,
            }))
        }
        VarCmd::Fit { data, p } => {
            let text = man.read("data", data)?;
            let d = var::TimeSeriesData::read_csv(text.as_bytes())?;
            let m = var::ols_fit(&d, *p)?;
            let model: Value = serde_json::from_str(&var::serialize_var(&m)).expect("model serializes to JSON");
            Ok(json!({ "model": model, "observations": d.len() }))
        }
    }
}

fn ace_cmd(cmd: &AceCmd, man: &mut Manifest) -> Result<Value> {
    match cmd {
        AceCmd::Analytic { effect, adj } => {
            let m = man.var(&effect.var)?;
            let (r, adm) = analytic(&m, effect, adj, man)?;
            Ok(merge(with_fields(r)?, json!({ "admissible_in_path_diagram": adm.holds })))
        }
        AceCmd::Plugin { effect, s, lag, strategy, mc } => {
            let m = man.var(&effect.var)?;
            let mc = man.mc(mc);
            let sub = subprocess(&m, s, *lag, man)?;
            let strategy = match strategy {
                Some(path) => serde_json::from_str(&man.read("strategy", path)?).map_err(|e| Error::Parse {
                    location: format!("line {} column {}", e.line(), e.column()),
                    reason: e.to_string(),
                })?,
                None => Strategy::atomic(effect.x),
            };
            let (a, b) = (node(&effect.pair.a), node(&effect.pair.b));
            with_fields(intervene::ace_plugin(&sub, &a, &b, effect.h, &strategy, &mc)?)
        }
        AceCmd::Oracle { effect, specs, mc } => {
            let m = man.var(&effect.var)?;
            let mc = man.mc(mc);
            let specs = oracle_specs(effect, specs, man)?;
            let r = intervene::simulate_interventional(&m, &specs, &node(&effect.pair.b), effect.h, &mc)?;
            Ok(merge(with_fields(r)?, json!({ "specs": specs })))
        }
        AceCmd::Compare { effect, adj, mc, k, floor } => {
            let m = man.var(&effect.var)?;
            let mc = man.mc(mc);
            man.tolerances.insert("k".into(), *k);
            man.tolerances.insert("floor".into(), *floor);
            let (r, adm) = analytic(&m, effect, adj, man)?;
            let specs = oracle_specs(effect, &None, man)?;
            let o = intervene::simulate_interventional(&m, &specs, &node(&effect.pair.b), effect.h, &mc)?;
            let c = intervene::compare(&r, &o, *k, *floor)?;
            Ok(merge(with_fields(c)?, json!({ "admissible_in_path_diagram": adm.holds })))
        }
    }
}

fn command_name(args: &[String]) -> String {
    args.iter().skip(1).take_while(|a| !a.starts_with('-')).take(2).cloned().collect::<Vec<_>>().join(" ")
}

fn print_json(out: &mut dyn Write, v: &Value) {
    let mut text = serde_json::to_string_pretty(v).expect("JSON value serializes");
    text.push('\n');
    let _ = out.write_all(text.as_bytes());
}

/// Runs the tool on `args` (including the program name) and returns the exit code.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut man = Manifest {
        command: command_name(args),
        args: args.iter().skip(1).cloned().collect(),
        version: env!("CARGO_PKG_VERSION").into(),
        ..Default::default()
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = write!(err, "{}", e.render());
            let diag = json!({
                "error": { "kind": "usage", "message": e.kind().to_string() },
                "manifest": man,
            });
            print_json(out, &diag);
            return 1;
        }
    };
    match dispatch(&cli.command, &mut man) {
        Ok(v) => {
            print_json(out, &merge(v, json!({ "manifest": man })));
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            print_json(out, &json!({ "error": { "kind": e.kind(), "message": e.to_string() }, "manifest": man }));
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}
