//! Command-line surface over the `bayesnet` library.
//!
//! Every command writes a plain-text report to standard output, or a JSON
//! document with `--json`. Probabilities are printed with 4 decimals and
//! scores as natural logs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bayesnet::dirichlet::{bde_priors, dirichlet_update, BdePriorInputs};
use bayesnet::equivalence::{enumerate_equivalence_class, independence_equivalent, CausalReading};
use bayesnet::incomplete::{best_run, em_fit_restarts, gibbs_posterior, EmMode, EmOptions, InitPolicy};
use bayesnet::inference::{query, Evidence};
use bayesnet::io::{
    export_dot, infer_csv_schema, load_counts_file, load_network, network_to_json, parse_csv, save_network, Network,
};
use bayesnet::scoring::{log_posterior_score, Constraints, ScoreReport, StructurePrior};
use bayesnet::search::{
    enumerate_dags, greedy_search, model_average_predict, posterior_weights, simulated_annealing, AnnealingSchedule,
    AnnealingStart, ScoreCache, ScoredModel, SearchOutcome,
};
use bayesnet::{count_sufficient_stats, DataSet, Error, NetworkStructure, ParameterSet, VariableSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "bayesnet", version, about = "Learn and query discrete Bayesian networks")]
pub struct Cli {
    /// Emit a JSON document instead of the text report.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bayesian score of one or more structures, with posteriors over them.
    Score(ScoreArgs),
    /// Posterior Dirichlet parameters for a structure from complete data.
    LearnParams(LearnParamsArgs),
    /// Search for high-scoring structures.
    LearnStructure(LearnStructureArgs),
    /// EM parameter estimates from incomplete data.
    Em(EmArgs),
    /// Gibbs-sampling posterior means from incomplete data.
    Gibbs(GibbsArgs),
    /// Conditional probabilities given evidence.
    Infer(InferArgs),
    /// Model-averaged predictive probability of a complete case.
    Average(AverageArgs),
    /// Equivalence class, compelled arcs, or an equivalence test.
    Equiv(EquivArgs),
    /// Graphviz DOT for a network structure.
    ExportDot(ExportDotArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV data file (header row of variable names).
    #[arg(long, conflicts_with = "counts")]
    pub data: Option<PathBuf>,
    /// Counts table file.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Marker for a missing CSV value.
    #[arg(long, default_value = "?")]
    pub missing: String,
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Equivalent sample size of the BDe prior.
    #[arg(long, default_value_t = 1.0)]
    pub ess: f64,
    /// Prior network with CPTs; defaults to independent uniform variables.
    #[arg(long)]
    pub prior_net: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StructurePriorArgs {
    /// Per-arc prior probability (arcs must follow the variable order).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Variables that may not have parents (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub forbid_parents: Vec<String>,
    /// Variables that may not have children (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub require_leaf: Vec<String>,
    #[arg(long)]
    pub max_parents: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Structure to score; repeat to compare several.
    #[arg(long, required = true)]
    pub network: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub structure_prior: StructurePriorArgs,
}

#[derive(Debug, Args)]
pub struct LearnParamsArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    /// Write the network with posterior-mean CPTs here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Greedy,
    Anneal,
    Exhaustive,
}

#[derive(Debug, Args)]
pub struct LearnStructureArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub structure_prior: StructurePriorArgs,
    #[arg(long, value_enum, default_value_t = Method::Greedy)]
    pub method: Method,
    /// Starting structure; defaults to the empty graph.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Random restarts after the first greedy climb.
    #[arg(long, default_value_t = 0)]
    pub restarts: usize,
    /// Random changes applied at each restart.
    #[arg(long, default_value_t = 3)]
    pub perturb: usize,
    #[arg(long, required = true)]
    pub seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub temperature: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 50)]
    pub accepts: usize,
    #[arg(long, default_value_t = 0.9)]
    pub decay: f64,
    #[arg(long, default_value_t = 100)]
    pub max_decays: usize,
    /// Structures listed by `--method exhaustive`.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    /// Write the best structure here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ml,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Uniform,
    Prior,
    Random,
}

#[derive(Debug, Args)]
pub struct EmArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Ml)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = InitArg::Prior)]
    pub init: InitArg,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, required = true)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GibbsArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[arg(long, default_value_t = 20_000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1_000)]
    pub burn_in: usize,
    #[arg(long, required = true)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Network with CPTs.
    #[arg(long)]
    pub network: PathBuf,
    /// Findings as `Var=state,Var=state`.
    #[arg(long, value_delimiter = ',')]
    pub evidence: Vec<String>,
    /// Query variables (joint table); defaults to each unobserved variable.
    #[arg(long, value_delimiter = ',')]
    pub target: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    #[arg(long, required = true)]
    pub network: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub structure_prior: StructurePriorArgs,
    /// The case to predict, as `Var=state,...` covering every variable.
    #[arg(long, value_delimiter = ',', required = true)]
    pub case: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EquivArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Test equivalence against this structure instead.
    #[arg(long)]
    pub other: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportDotArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Text and JSON forms of a command's result.
pub struct Report {
    pub text: String,
    pub json: Value,
}

pub fn run(cli: &Cli) -> Result<String, Error> {
    let report = match &cli.command {
        Command::Score(a) => score(a)?,
        Command::LearnParams(a) => learn_params(a)?,
        Command::LearnStructure(a) => learn_structure(a)?,
        Command::Em(a) => em(a)?,
        Command::Gibbs(a) => gibbs(a)?,
        Command::Infer(a) => infer(a)?,
        Command::Average(a) => average(a)?,
        Command::Equiv(a) => equiv(a)?,
        Command::ExportDot(a) => export(a)?,
    };
    Ok(if cli.json {
        let mut s = serde_json::to_string_pretty(&report.json).expect("reports serialize");
        s.push('\n');
        s
    } else {
        report.text
    })
}

fn p4(x: f64) -> String {
    format!("{x:.4}")
}

fn arc_names(s: &NetworkStructure) -> Vec<String> {
    s.arcs()
        .into_iter()
        .map(|(p, c)| format!("{} -> {}", s.variable(p).name(), s.variable(c).name()))
        .collect()
}

fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_data(args: &DataArgs, variables: Option<&[VariableSpec]>) -> Result<DataSet, Error> {
    match (&args.data, &args.counts) {
        (_, Some(path)) => {
            let table = load_counts_file(path)?;
            if let Some(vars) = variables {
                if vars != table.variables.as_slice() {
                    return Err(Error::SchemaMismatch(
                        "counts table variables differ from the network's (names, order and states must agree)".into(),
                    ));
                }
            }
            table.to_dataset()
        }
        (Some(path), None) => {
            let text = read_text(path)?;
            match variables {
                Some(vars) => parse_csv(&text, vars, &args.missing),
                None => parse_csv(&text, &infer_csv_schema(&text, &args.missing)?, &args.missing),
            }
        }
        (None, None) => Err(Error::InvalidParameters("one of --data or --counts is required".into())),
    }
}

fn bde_inputs(args: &PriorArgs, variables: &[VariableSpec]) -> Result<BdePriorInputs, Error> {
    match &args.prior_net {
        None => BdePriorInputs::uniform(args.ess, variables.to_vec()),
        Some(path) => {
            let net = load_network(path)?;
            if net.structure.variables() != variables {
                return Err(Error::VariableSetMismatch);
            }
            let params = net
                .params
                .ok_or_else(|| Error::InvalidParameters(format!("{} has no CPTs", path.display())))?;
            BdePriorInputs::new(args.ess, net.structure, params)
        }
    }
}

fn structure_prior(args: &StructurePriorArgs, variables: &[VariableSpec]) -> Result<StructurePrior, Error> {
    let forbid: Vec<&str> = args.forbid_parents.iter().map(String::as_str).collect();
    let leaf: Vec<&str> = args.require_leaf.iter().map(String::as_str).collect();
    let mut c = Constraints::from_names(variables, &forbid, &leaf)?;
    if let Some(k) = args.max_parents {
        c = c.with_max_parents(k);
    }
    let base = match args.kappa {
        Some(k) => StructurePrior::per_arc(k, (0..variables.len()).collect())?,
        None => StructurePrior::uniform(),
    };
    Ok(base.with_constraints(c))
}

fn parse_pairs(items: &[String]) -> Result<Vec<(&str, &str)>, Error> {
    items
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.split_once('=')
                .map(|(a, b)| (a.trim(), b.trim()))
                .ok_or_else(|| Error::InvalidParameters(format!("`{s}` is not of the form Var=state")))
        })
        .collect()
}

fn family_lines(text: &mut String, s: &NetworkStructure, r: &ScoreReport) {
    for i in 0..s.len() {
        let parents: Vec<&str> = s.parents(i).iter().map(|&p| s.variable(p).name()).collect();
        let _ = writeln!(
            text,
            "    {:<12} | {:<28} ln p(D_i|S) = {:.4}  ln prior = {:.4}",
            s.variable(i).name(),
            if parents.is_empty() { "-".to_string() } else { parents.join(", ") },
            r.family_marginals[i],
            r.family_priors[i]
        );
    }
}

fn report_json(s: &NetworkStructure, r: &ScoreReport) -> Value {
    json!({
        "arcs": s.arcs().into_iter().map(|(p, c)| [s.variable(p).name(), s.variable(c).name()]).collect::<Vec<_>>(),
        "ln_prior": r.log_prior,
        "ln_marginal_likelihood": r.log_marginal,
        "ln_score": r.total,
        "families": (0..s.len()).map(|i| json!({
            "variable": s.variable(i).name(),
            "parents": s.parents(i).iter().map(|&p| s.variable(p).name()).collect::<Vec<_>>(),
            "ln_marginal_likelihood": r.family_marginals[i],
            "ln_prior": r.family_priors[i],
        })).collect::<Vec<_>>(),
    })
}

fn score_one(
    s: &NetworkStructure,
    inputs: &BdePriorInputs,
    prior: &StructurePrior,
    data: &DataSet,
) -> Result<ScoreReport, Error> {
    let priors = bde_priors(inputs, s)?;
    let counts = count_sufficient_stats(s, data)?;
    log_posterior_score(s, prior, &priors, &counts)
}

fn score(a: &ScoreArgs) -> Result<Report, Error> {
    let nets = a.network.iter().map(load_network).collect::<Result<Vec<_>, _>>()?;
    let vars = nets[0].structure.variables().to_vec();
    let data = load_data(&a.data, Some(&vars))?;
    let inputs = bde_inputs(&a.prior, &vars)?;
    let prior = structure_prior(&a.structure_prior, &vars)?;
    let reports = nets
        .iter()
        .map(|n| score_one(&n.structure, &inputs, &prior, &data))
        .collect::<Result<Vec<_>, _>>()?;
    let weights = posterior_weights(&reports.iter().map(|r| r.total).collect::<Vec<_>>())?;

    let mut text = format!("cases: {}  equivalent sample size: {}\n", data.len(), a.prior.ess);
    let mut items = Vec::new();
    for (((path, net), r), w) in a.network.iter().zip(&nets).zip(&reports).zip(&weights) {
        let _ = writeln!(text, "network {}", path.display());
        let _ = writeln!(text, "  arcs: {}", arc_names(&net.structure).join(", "));
        let _ = writeln!(
            text,
            "  ln p(D|S) = {:.4}  ln p(S) = {:.4}  ln score = {:.4}",
            r.log_marginal, r.log_prior, r.total
        );
        family_lines(&mut text, &net.structure, r);
        let mut v = report_json(&net.structure, r);
        v["network"] = json!(path.display().to_string());
        v["posterior"] = json!(w);
        items.push(v);
    }
    if nets.len() > 1 {
        text.push_str("posterior over the listed structures:\n");
        for (path, w) in a.network.iter().zip(&weights) {
            let _ = writeln!(text, "  p(S|D) = {}  {}", p4(*w), path.display());
        }
    }
    Ok(Report { text, json: json!({ "cases": data.len(), "networks": items }) })
}

fn cpt_text(text: &mut String, s: &NetworkStructure, p: &ParameterSet) {
    for i in 0..s.len() {
        let v = s.variable(i);
        let parents: Vec<&str> = s.parents(i).iter().map(|&q| s.variable(q).name()).collect();
        let _ = writeln!(text, "{} | {}  states: {}", v.name(), if parents.is_empty() { "-".into() } else { parents.join(", ") }, v.states().join(", "));
        for j in 0..s.num_configs(i) {
            let cfg: Vec<String> = s
                .config_states(i, j)
                .iter()
                .zip(s.parents(i))
                .map(|(&k, &q)| format!("{}={}", s.variable(q).name(), s.variable(q).states()[k]))
                .collect();
            let row: Vec<String> = p.row(i, j).iter().map(|x| p4(*x)).collect();
            let _ = writeln!(text, "  [{}] {}", if cfg.is_empty() { "-".into() } else { cfg.join(", ") }, row.join(" "));
        }
    }
}

fn learn_params(a: &LearnParamsArgs) -> Result<Report, Error> {
    let net = load_network(&a.network)?;
    let s = &net.structure;
    let data = load_data(&a.data, Some(s.variables()))?;
    let inputs = bde_inputs(&a.prior, s.variables())?;
    let priors = bde_priors(&inputs, s)?;
    let counts = count_sufficient_stats(s, &data)?;
    let posterior = dirichlet_update(&priors, &counts)?;
    let mean = posterior.mean();
    let mut text = format!("posterior-mean parameters from {} cases\n", data.len());
    cpt_text(&mut text, s, &mean);
    let learned = Network { structure: s.clone(), params: Some(mean.clone()) };
    if let Some(out) = &a.output {
        save_network(&learned, out)?;
        let _ = writeln!(text, "wrote {}", out.display());
    }
    Ok(Report {
        text,
        json: json!({
            "cases": data.len(),
            "posterior_alpha": posterior.tables(),
            "network": serde_json::from_str::<Value>(&network_to_json(&learned)).expect("valid JSON"),
        }),
    })
}

fn search_text(text: &mut String, out: &SearchOutcome) {
    let _ = writeln!(text, "best structure (ln score {:.4}):", out.report.total);
    let _ = writeln!(text, "  arcs: {}", arc_names(&out.best).join(", "));
    family_lines(text, &out.best, &out.report);
    let _ = writeln!(
        text,
        "changes applied: {}  winning restart: {}  distinct families scored: {}",
        out.trace.len(),
        out.winning_restart,
        out.family_evaluations
    );
    let _ = writeln!(text, "seed: {}  rng: {}", out.seed, out.rng_algorithm);
}

fn learn_structure(a: &LearnStructureArgs) -> Result<Report, Error> {
    let init_net = a.init.as_ref().map(load_network).transpose()?;
    let data = load_data(&a.data, init_net.as_ref().map(|n| n.structure.variables()))?;
    let vars = data.variables().to_vec();
    let inputs = bde_inputs(&a.prior, &vars)?;
    let prior = structure_prior(&a.structure_prior, &vars)?;
    let init = match init_net {
        Some(n) => n.structure,
        None => NetworkStructure::empty(vars.clone())?,
    };
    let mut text = format!("cases: {}  method: {:?}\n", data.len(), a.method).to_lowercase();
    let (best, json) = match a.method {
        Method::Greedy | Method::Anneal => {
            let out = if a.method == Method::Greedy {
                greedy_search(&data, &inputs, &prior, &init, a.restarts, a.perturb, a.seed)?
            } else {
                let schedule = AnnealingSchedule {
                    initial_temperature: a.temperature,
                    trials_per_temperature: a.trials,
                    max_accepted_per_temperature: a.accepts,
                    decay: a.decay,
                    max_decays: a.max_decays,
                };
                let start = if a.init.is_some() { AnnealingStart::From(init.clone()) } else { AnnealingStart::EmptyGraph };
                simulated_annealing(&data, &inputs, &prior, &schedule, &start, a.seed)?
            };
            search_text(&mut text, &out);
            let mut v = report_json(&out.best, &out.report);
            v["seed"] = json!(out.seed);
            v["rng"] = json!(out.rng_algorithm);
            v["trace"] = json!(out
                .trace
                .iter()
                .map(|t| json!({"iteration": t.iteration, "restart": t.restart, "kind": t.kind, "change": t.change.describe(&out.initial), "delta": t.delta}))
                .collect::<Vec<_>>());
            (out.best, v)
        }
        Method::Exhaustive => {
            let space = enumerate_dags(&vars, &prior.constraints)?;
            let mut cache = ScoreCache::new(&data, &inputs, &prior, &init)?;
            let mut scored = Vec::with_capacity(space.len());
            for s in space {
                cache.reset(&s)?;
                scored.push((cache.total(), s));
            }
            scored.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.arcs().cmp(&y.1.arcs())));
            let weights = posterior_weights(&scored.iter().map(|x| x.0).collect::<Vec<_>>())?;
            let _ = writeln!(text, "structures scored: {}", scored.len());
            let mut top = Vec::new();
            for (rank, ((total, s), w)) in scored.iter().zip(&weights).take(a.top.max(1)).enumerate() {
                let r = cache.report(s)?;
                let _ = writeln!(text, "#{}  ln score = {:.4}  p(S|D) = {}", rank + 1, total, p4(*w));
                let _ = writeln!(text, "  arcs: {}", arc_names(s).join(", "));
                family_lines(&mut text, s, &r);
                let mut v = report_json(s, &r);
                v["posterior"] = json!(w);
                top.push(v);
            }
            (scored[0].1.clone(), json!({ "structures": scored.len(), "top": top }))
        }
    };
    if let Some(out) = &a.output {
        save_network(&Network { structure: best, params: None }, out)?;
        let _ = writeln!(text, "wrote {}", out.display());
    }
    Ok(Report { text, json })
}

fn em(a: &EmArgs) -> Result<Report, Error> {
    let net = load_network(&a.network)?;
    let s = &net.structure;
    let data = load_data(&a.data, Some(s.variables()))?;
    let priors = bde_priors(&bde_inputs(&a.prior, s.variables())?, s)?;
    let opts = EmOptions {
        mode: match a.mode {
            ModeArg::Ml => EmMode::MaximumLikelihood,
            ModeArg::Map => EmMode::MaximumAPosteriori,
        },
        init: match a.init {
            InitArg::Uniform => InitPolicy::Uniform,
            InitArg::Prior => InitPolicy::PriorMean,
            InitArg::Random => InitPolicy::RandomSimplex,
        },
        tolerance: a.tol,
        max_iterations: a.max_iter,
        seed: a.seed,
    };
    let runs = em_fit_restarts(s, &priors, &data, &opts, a.restarts)?;
    let best = &runs[best_run(&runs).expect("at least one run")];
    let mut text = format!(
        "cases: {}  missing entries: {}  mode: {:?}\n",
        data.len(),
        data.missing_count(),
        best.mode
    );
    for (r, run) in runs.iter().enumerate() {
        let _ = writeln!(
            text,
            "run {r}: objective {:.4} after {} iterations{}",
            run.objective(),
            run.iterations,
            if run.converged { "" } else { " (not converged)" }
        );
    }
    let _ = writeln!(text, "best objective: {:.4}", best.objective());
    cpt_text(&mut text, s, &best.params);
    let learned = Network { structure: s.clone(), params: Some(best.params.clone()) };
    if let Some(out) = &a.output {
        save_network(&learned, out)?;
        let _ = writeln!(text, "wrote {}", out.display());
    }
    Ok(Report {
        text,
        json: json!({
            "runs": runs,
            "best_objective": best.objective(),
            "parameters": best.params.tables(),
        }),
    })
}

fn gibbs(a: &GibbsArgs) -> Result<Report, Error> {
    let net = load_network(&a.network)?;
    let s = &net.structure;
    let data = load_data(&a.data, Some(s.variables()))?;
    let priors = bde_priors(&bde_inputs(&a.prior, s.variables())?, s)?;
    let g = gibbs_posterior(s, &priors, &data, a.iterations, a.burn_in, a.seed)?;
    let mut text = format!(
        "cases: {}  missing entries: {}  sweeps: {}  burn-in: {}  seed: {}\n",
        data.len(),
        data.missing_count(),
        g.iterations,
        g.burn_in,
        g.seed
    );
    for i in 0..s.len() {
        for j in 0..s.num_configs(i) {
            let cells: Vec<String> = g.mean[i][j]
                .iter()
                .zip(&g.std_error[i][j])
                .map(|(m, e)| format!("{} (se {})", p4(*m), p4(*e)))
                .collect();
            let _ = writeln!(text, "{} config {}: {}", s.variable(i).name(), j, cells.join("  "));
        }
    }
    Ok(Report { text, json: serde_json::to_value(&g).expect("summary serializes") })
}

fn infer(a: &InferArgs) -> Result<Report, Error> {
    let net = load_network(&a.network)?;
    let s = &net.structure;
    let params = net
        .params
        .as_ref()
        .ok_or_else(|| Error::InvalidParameters(format!("{} has no CPTs", a.network.display())))?;
    let pairs = parse_pairs(&a.evidence)?;
    let evidence = Evidence::from_labels(s, &pairs)?;
    let groups: Vec<Vec<usize>> = if a.target.is_empty() {
        (0..s.len()).filter(|&i| evidence.get(i).is_none()).map(|i| vec![i]).collect()
    } else {
        vec![a
            .target
            .iter()
            .map(|t| s.index_of(t).ok_or_else(|| Error::UnknownVariable(t.clone())))
            .collect::<Result<_, _>>()?]
    };
    let mut text = String::new();
    let mut tables = Vec::new();
    for targets in groups {
        let r = query(s, params, &targets, &evidence)?;
        let names: Vec<&str> = targets.iter().map(|&t| s.variable(t).name()).collect();
        let _ = writeln!(text, "p({} | evidence), p(evidence) = {:.6e}", names.join(", "), r.evidence_probability);
        let mut rows = Vec::new();
        let cards: Vec<usize> = targets.iter().map(|&t| s.cardinality(t)).collect();
        let mut idx = 0;
        bayesnet::params::for_each_assignment(&cards, |st| {
            let label: Vec<String> = targets
                .iter()
                .zip(st)
                .map(|(&t, &k)| format!("{}={}", s.variable(t).name(), s.variable(t).states()[k]))
                .collect();
            let p = r.probabilities[idx];
            let _ = writeln!(text, "  {:<40} {}", label.join(", "), p4(p));
            rows.push(json!({ "assignment": label, "probability": p }));
            idx += 1;
        });
        tables.push(json!({ "targets": names, "evidence_probability": r.evidence_probability, "table": rows }));
    }
    Ok(Report { text, json: json!({ "queries": tables }) })
}

fn average(a: &AverageArgs) -> Result<Report, Error> {
    let nets = a.network.iter().map(load_network).collect::<Result<Vec<_>, _>>()?;
    let vars = nets[0].structure.variables().to_vec();
    let data = load_data(&a.data, Some(&vars))?;
    let inputs = bde_inputs(&a.prior, &vars)?;
    let prior = structure_prior(&a.structure_prior, &vars)?;
    let models = nets
        .iter()
        .map(|n| ScoredModel::fit(&n.structure, &inputs, &prior, &data))
        .collect::<Result<Vec<_>, _>>()?;
    let case = nets[0].structure.assignment_from_labels(&parse_pairs(&a.case)?)?;
    let p = model_average_predict(&models, &case)?;
    let weights = posterior_weights(&models.iter().map(|m| m.log_score).collect::<Vec<_>>())?;
    let mut text = String::new();
    let mut items = Vec::new();
    for ((path, m), w) in a.network.iter().zip(&models).zip(&weights) {
        let single = bayesnet::network_predictive(&m.structure, &m.posterior, &case)?;
        let _ = writeln!(
            text,
            "{}: ln score {:.4}  p(S|D) = {}  p(case|D,S) = {}",
            path.display(),
            m.log_score,
            p4(*w),
            p4(single)
        );
        items.push(json!({"network": path.display().to_string(), "ln_score": m.log_score, "posterior": w, "predictive": single}));
    }
    let _ = writeln!(text, "model-averaged p(case|D) = {}  (ln {:.4})", p4(p), p.ln());
    Ok(Report { text, json: json!({ "models": items, "predictive": p }) })
}

fn equiv(a: &EquivArgs) -> Result<Report, Error> {
    let net = load_network(&a.network)?;
    let s = &net.structure;
    if let Some(other) = &a.other {
        let o = load_network(other)?;
        let eq = independence_equivalent(s, &o.structure)?;
        let text = format!("{}\n", if eq { "equivalent" } else { "not equivalent" });
        return Ok(Report { text, json: json!({ "equivalent": eq }) });
    }
    let class = enumerate_equivalence_class(s)?;
    let reading = CausalReading::of(s)?;
    let mut text = format!("equivalence class size: {}\n", class.len());
    for (n, m) in class.iter().enumerate() {
        let _ = writeln!(text, "  member {}: {}", n + 1, arc_names(m).join(", "));
    }
    let fmt = |v: &[(String, String)]| v.iter().map(|(a, b)| format!("{a} -> {b}")).collect::<Vec<_>>();
    let _ = writeln!(text, "compelled: {}", fmt(&reading.compelled).join(", "));
    let _ = writeln!(text, "reversible: {}", fmt(&reading.reversible).join(", "));
    let _ = writeln!(text, "note: {}", CausalReading::CAVEAT);
    Ok(Report {
        text,
        json: json!({
            "class_size": class.len(),
            "members": class.iter().map(arc_names).collect::<Vec<_>>(),
            "compelled": fmt(&reading.compelled),
            "reversible": fmt(&reading.reversible),
            "caveat": CausalReading::CAVEAT,
        }),
    })
}

fn export(a: &ExportDotArgs) -> Result<Report, Error> {
    let net = load_network(&a.network)?;
    let dot = export_dot(&net.structure);
    if let Some(out) = &a.output {
        std::fs::write(out, &dot).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
        return Ok(Report { text: format!("wrote {}\n", out.display()), json: json!({ "output": out.display().to_string() }) });
    }
    Ok(Report { text: dot.clone(), json: json!({ "dot": dot }) })
}
