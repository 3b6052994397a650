use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use anyhow::{bail, Context, Result};
use minimax_core::canonical::{format_float, to_canonical_string};
use minimax_core::certify::{
    classify_point, maxmin_gap, search_global_minimax, verify, CertifyConfig, ClassifyConfig, Label,
    StationarityReport, VerifyOptions, ALL_CONDITIONS,
};
use minimax_core::gan::{
    certify_gan_point, convergence_experiment, read_instance, solve_gda, write_convergence_csv, write_instance,
    ConvergenceConfig, GanConfig, GanSaaInstance, GdaConfig,
};
use minimax_core::grid::GridSpec;
use minimax_core::{build_example, ExampleId, MinMaxProblem, Point, PolyhedralSet};
use serde_json::{json, Value};

use crate::{Command, OutputArgs, ProblemArgs};

/// Stopping tolerance of the solver behind `gan-certify --solve`; it must sit
/// below the KKT acceptance tolerance.
const CERTIFY_SOLVE_TOL: f64 = 1e-9;

pub fn run(command: Command) -> Result<bool> {
    match command {
        Command::Verify { problem, point, order, nonsmooth, delta_ladder, scheme, seed, output } => {
            run_verify(&problem, &point, order, nonsmooth, delta_ladder.as_deref(), scheme.as_deref(), seed, &output)
        }
        Command::Classify { problem, point, grid, delta_ladder, scheme, seed, output } => {
            run_classify(&problem, &point, grid, delta_ladder.as_deref(), scheme.as_deref(), seed, &output)
        }
        Command::Search { problem, grid, output } => run_search(&problem, grid, &output),
        Command::Gap { problem, point, delta, grid, output } => run_gap(&problem, point.as_deref(), delta, grid, &output),
        Command::GanBuild { params, seed, n, out, json } => run_gan_build(params.as_deref(), seed, n, &out, json),
        Command::GanCertify { instance, point, solve, seed, output } => {
            run_gan_certify(&instance, point.as_deref(), solve, seed, &output)
        }
        Command::GanConverge { seed, n_list, trials, n_ref, out } => {
            run_gan_converge(seed, &n_list, trials, n_ref, out.as_deref())
        }
        Command::Examples { json } => run_examples(json),
    }
}

fn parse_json(s: Option<&str>, what: &str) -> Result<Option<Value>> {
    s.map(|s| serde_json::from_str(s).with_context(|| format!("{what} is not valid JSON"))).transpose()
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| anyhow::anyhow!("{what}: cannot parse `{t}`")))
        .collect()
}

fn parse_box(s: &str, dim: usize) -> Result<PolyhedralSet> {
    let v: Vec<f64> = parse_list(s, "box bounds")?;
    if v.len() != 2 {
        bail!("box bounds must be `lo,hi`");
    }
    Ok(PolyhedralSet::cube(dim, v[0], v[1])?)
}

struct Loaded {
    problem: MinMaxProblem,
    params: Value,
}

fn load_problem(args: &ProblemArgs) -> Result<Loaded> {
    let id: ExampleId = args.problem.parse()?;
    let params = parse_json(args.params.as_deref(), "--params")?;
    let mut problem = build_example(id, params.as_ref())?;
    if args.x_set.is_some() || args.y_set.is_some() {
        let x = match &args.x_set {
            Some(s) => parse_box(s, problem.n())?,
            None => problem.x_set().clone(),
        };
        let y = match &args.y_set {
            Some(s) => parse_box(s, problem.m())?,
            None => problem.y_set().clone(),
        };
        problem = problem.with_sets(x, y)?;
    }
    Ok(Loaded { problem, params: params.unwrap_or(Value::Null) })
}

fn problem_json(args: &ProblemArgs, loaded: &Loaded) -> Value {
    json!({
        "id": args.problem,
        "params": loaded.params,
        "smoothness": loaded.problem.smoothness().as_str(),
        "x_set": describe_set(loaded.problem.x_set()),
        "y_set": describe_set(loaded.problem.y_set()),
    })
}

fn describe_set(set: &PolyhedralSet) -> String {
    match set.box_bounds() {
        Some((lo, hi)) if lo.windows(2).all(|w| w[0] == w[1]) && hi.windows(2).all(|w| w[0] == w[1]) => {
            format!("[{}, {}]^{}", lo[0], hi[0], set.dim())
        }
        Some(_) => format!("box in R^{}", set.dim()),
        None => format!("{} halfspaces in R^{}", set.num_rows(), set.dim()),
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn say(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn emit(output: &OutputArgs, report: &Value, summary: &str) -> Result<()> {
    let text = to_canonical_string(report);
    if let Some(path) = &output.out {
        std::fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
    }
    if output.json {
        say(&format!("{text}\n"))?;
    } else {
        say(summary)?;
    }
    Ok(())
}

fn condition_summary(report: &StationarityReport) -> String {
    let mut s = String::new();
    for id in ALL_CONDITIONS {
        let Some(outcome) = report.outcome(id) else { continue };
        let status = serde_json::to_value(outcome).ok().and_then(|v| v["status"].as_str().map(String::from));
        let residual = report.residuals.get(id).map(|r| format!("  residual {}", format_float(*r))).unwrap_or_default();
        s.push_str(&format!("{id:<10} {}{residual}\n", status.unwrap_or_default()));
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn run_verify(
    args: &ProblemArgs,
    point: &str,
    order: u8,
    nonsmooth: bool,
    delta_ladder: Option<&str>,
    scheme: Option<&str>,
    seed: u64,
    output: &OutputArgs,
) -> Result<bool> {
    let loaded = load_problem(args)?;
    let problem = &loaded.problem;
    let point = Point::parse(point, problem.n(), problem.m())?;
    let mut config = CertifyConfig { seed, ..CertifyConfig::default() };
    if let Some(s) = scheme {
        config.scheme = serde_json::from_str(s).context("--scheme")?;
    }
    if let Some(l) = delta_ladder {
        config.delta_list = parse_list(l, "--delta-ladder")?;
    }
    let options = VerifyOptions { order, nonsmooth: nonsmooth || !problem.smoothness().is_c1(), assume_smooth: false };
    let report = verify(problem, &point, &options, &config)?;
    let passed = report.all_evaluated_pass();
    let doc = json!({
        "verb": "verify",
        "problem": problem_json(args, &loaded),
        "options": options,
        "config": config,
        "report": report,
        "passed": passed,
    });
    emit(output, &doc, &format!("point {point}\n{}", condition_summary(&report)))?;
    Ok(passed)
}

fn run_classify(
    args: &ProblemArgs,
    point: &str,
    grid: Option<usize>,
    delta_ladder: Option<&str>,
    scheme: Option<&str>,
    seed: u64,
    output: &OutputArgs,
) -> Result<bool> {
    let loaded = load_problem(args)?;
    let problem = &loaded.problem;
    let point = Point::parse(point, problem.n(), problem.m())?;
    let mut config = ClassifyConfig::default();
    config.certify.seed = seed;
    if let Some(n) = grid {
        config.grid = GridSpec::with_nodes(n);
    }
    if let Some(l) = delta_ladder {
        config.ladder = parse_list(l, "--delta-ladder")?;
    }
    if let Some(s) = scheme {
        config.certify.scheme = serde_json::from_str(s).context("--scheme")?;
    }
    let result = classify_point(problem, &point, &config)?;
    let labels: Vec<&str> = result.labels.iter().map(|l| l.as_str()).collect();
    let ok = result.labels.iter().any(|l| *l != Label::None);
    let doc = json!({
        "verb": "classify",
        "problem": problem_json(args, &loaded),
        "config": config,
        "classification": result,
    });
    let mut summary = format!("point {point}\nlabels {}\n", labels.join(", "));
    if let Some(fit) = result.tau_fit {
        summary.push_str(&format!("tau(delta) = {} * delta^{}\n", format_float(fit.c), fit.p));
    }
    for d in &result.diagnostics {
        summary.push_str(&format!("note: {d}\n"));
    }
    emit(output, &doc, &summary)?;
    Ok(ok)
}

fn run_search(args: &ProblemArgs, grid: Option<usize>, output: &OutputArgs) -> Result<bool> {
    let loaded = load_problem(args)?;
    let mut config = ClassifyConfig::default();
    if let Some(n) = grid {
        config.grid = GridSpec::with_nodes(n);
    }
    let found = search_global_minimax(&loaded.problem, &config)?;
    let values: Vec<f64> = found.iter().map(|p| loaded.problem.eval_point(p)).collect();
    let doc = json!({
        "verb": "search",
        "problem": problem_json(args, &loaded),
        "grid": config.grid,
        "candidates": found,
        "values": values,
    });
    let summary: String = found.iter().zip(&values).map(|(p, v)| format!("{p}  f = {}\n", format_float(*v))).collect();
    emit(output, &doc, &summary)?;
    Ok(!found.is_empty())
}

fn run_gap(args: &ProblemArgs, point: Option<&str>, delta: f64, grid: usize, output: &OutputArgs) -> Result<bool> {
    let loaded = load_problem(args)?;
    let problem = &loaded.problem;
    let center = match point {
        Some(s) => Point::parse(s, problem.n(), problem.m())?,
        None => Point::new(vec![0.0; problem.n()], vec![0.0; problem.m()]),
    };
    let width = GridSpec::default().refine_width;
    let gap = maxmin_gap(problem, &center, delta, grid, width)?;
    let doc = json!({
        "verb": "gap",
        "problem": problem_json(args, &loaded),
        "center": center,
        "delta": delta,
        "grid_nodes": grid,
        "refine_width": width,
        "gap": gap,
    });
    emit(output, &doc, &format!("max-min minus min-max = {}\n", format_float(gap)))?;
    Ok(true)
}

fn run_gan_build(params: Option<&str>, seed: u64, n: usize, out: &std::path::Path, json_out: bool) -> Result<bool> {
    let config: GanConfig = match params {
        Some(s) => serde_json::from_str(s).context("--params is not a valid GAN configuration")?,
        None => GanConfig::desk(seed, n),
    };
    let inst = GanSaaInstance::build(&config)?;
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    write_instance(&inst, &mut w)?;
    w.flush()?;
    let doc = json!({
        "verb": "gan-build",
        "config": config,
        "n": inst.n(),
        "m": inst.m(),
        "sample_seed": inst.samples.seed,
        "kink_certificate": inst.kink_certificate(&inst.x_ref)?,
    });
    if json_out {
        say(&format!("{}\n", to_canonical_string(&doc)))?;
    } else {
        say(&format!("wrote {} samples (n = {}, m = {}) to {}\n", inst.samples.count, inst.n(), inst.m(), out.display()))?;
    }
    Ok(true)
}

fn run_gan_certify(
    path: &std::path::Path,
    point: Option<&str>,
    solve: bool,
    seed: u64,
    output: &OutputArgs,
) -> Result<bool> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let inst = read_instance(BufReader::new(file))?;
    let (point, solver) = if solve {
        let gda = GdaConfig { tol: CERTIFY_SOLVE_TOL, ..GdaConfig::default() };
        let start = Point::new(inst.x_ref.clone(), vec![0.0; inst.m()]);
        let outcome = solve_gda(&inst, &start, &gda);
        (outcome.point.clone(), Some(json!({"config": gda, "outcome": outcome})))
    } else {
        match point {
            Some(s) => (Point::parse(s, inst.n(), inst.m())?, None),
            None => bail!("gan-certify needs --point or --solve"),
        }
    };
    let config = CertifyConfig { seed, ..CertifyConfig::default() };
    let report = certify_gan_point(&inst, &point, &config)?;
    let passed = report.all_evaluated_pass();
    let doc = json!({
        "verb": "gan-certify",
        "instance": {"config": inst.config, "sample_seed": inst.samples.seed},
        "solver": solver,
        "config": config,
        "report": report,
        "passed": passed,
    });
    emit(output, &doc, &condition_summary(&report))?;
    Ok(passed)
}

fn run_gan_converge(seed: u64, n_list: &str, trials: usize, n_ref: usize, out: Option<&std::path::Path>) -> Result<bool> {
    let mut config = ConvergenceConfig::desk(seed);
    config.n_list = parse_list(n_list, "--n-list")?;
    config.trials = trials;
    config.n_ref = n_ref;
    let rows = convergence_experiment(&config)?;
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_convergence_csv(&rows, &mut w)?;
            w.flush()?;
        }
        None => {
            let mut buf = Vec::new();
            write_convergence_csv(&rows, &mut buf)?;
            say(&String::from_utf8(buf)?)?;
        }
    }
    Ok(true)
}

fn run_examples(json_out: bool) -> Result<bool> {
    let mut entries = Vec::new();
    let mut text = String::new();
    for id in ExampleId::ALL {
        let params = (id == ExampleId::GanSaa).then(|| json!({"s": 4, "s1": 2, "s2": 2, "seed": 0}));
        let problem = build_example(id, params.as_ref())?;
        let (x, y) = (describe_set(problem.x_set()), describe_set(problem.y_set()));
        text.push_str(&format!("{id}  {}  X = {x}  Y = {y}\n", problem.smoothness().as_str()));
        for f in id.facts() {
            text.push_str(&format!("    {f}\n"));
        }
        entries.push(json!({
            "id": id.as_str(),
            "smoothness": problem.smoothness().as_str(),
            "x_set": x,
            "y_set": y,
            "facts": id.facts(),
        }));
    }
    if json_out {
        say(&format!("{}\n", to_canonical_string(&Value::Array(entries))))?;
    } else {
        say(&text)?;
    }
    Ok(true)
}
