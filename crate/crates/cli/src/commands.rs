use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use learncut::bnc::{run_bnc, BncConfig};
use learncut::dataset::{generate_labeled, load_split, split_seeds, write_instance, Manifest, Split};
use learncut::env::{Mode, RolloutConfig};
use learncut::es::{train, EsConfig};
use learncut::eval::{evaluate, mean, std_dev, SelectorSpec};
use learncut::heuristics::HeuristicKind;
use learncut::instances::{Family, GeneratorSpec};
use learncut::interpret::score_rollout;
use learncut::lp::IpInstance;
use learncut::par::{configure_threads, map_indexed, Execution};
use learncut::policy::{Architecture, Decode, PolicyParams};
use learncut::rng::derive_seed;

use crate::output::{percentile_rows, RunDir};
use crate::{
    ArchName, BncArgs, Cli, Command, DecodeName, EvalArgs, FamilyArgs, FamilyName, GenerateArgs,
    InterpretArgs, ModeName, SourceArgs, SplitName, TrainArgs,
};

#[derive(Serialize)]
struct RunConfig<'a> {
    version: &'static str,
    #[serde(flatten)]
    cli: &'a Cli,
}

struct Ctx {
    run: RunDir,
    seed: u64,
    exec: Execution,
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let exec = match cli.global.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(1) => Execution::Sequential,
        Some(t) => {
            configure_threads(t);
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    let run = RunDir::create(&cli.global.out)?;
    let config = RunConfig {
        version: env!("CARGO_PKG_VERSION"),
        cli,
    };
    let cfg_path = run.write_json("config.json", &config)?;
    eprintln!("{}", serde_json::to_string(&config)?);
    eprintln!("config written to {}", cfg_path.display());
    let ctx = Ctx {
        run,
        seed: cli.global.seed,
        exec,
    };
    match &cli.command {
        Command::Generate(a) => generate(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
        Command::Bnc(a) => bnc_cmd(&ctx, a),
        Command::Interpret(a) => interpret_cmd(&ctx, a),
    }
}

fn family(a: &FamilyArgs) -> Family {
    match a.family {
        FamilyName::Packing => Family::Packing { n: a.n, m: a.m },
        FamilyName::BinaryPacking => Family::BinaryPacking { n: a.n, m: a.m },
        FamilyName::Planning => Family::Planning {
            horizon: a.horizon_periods,
        },
        FamilyName::Maxcut => Family::MaxCut {
            vertices: a.vertices,
            edges: a.edges,
        },
        FamilyName::Knapsack => Family::Knapsack { n: a.n },
    }
}

fn split(s: SplitName) -> Split {
    match s {
        SplitName::Train => Split::Train,
        SplitName::Test => Split::Test,
    }
}

fn mode(m: ModeName) -> Mode {
    match m {
        ModeName::Train => Mode::Train,
        ModeName::Test => Mode::Test,
    }
}

fn generate_split(fam: Family, seeds: &[u64], label_nodes: Option<usize>, exec: Execution) -> Result<Vec<IpInstance>> {
    fam.validate()?;
    map_indexed(seeds.len(), exec, |i| {
        let spec = GeneratorSpec::new(fam, seeds[i]);
        match label_nodes {
            Some(limit) => generate_labeled(&spec, limit),
            None => spec.generate(),
        }
    })
    .into_iter()
    .collect::<Result<_, _>>()
    .map_err(Into::into)
}

fn load_source(ctx: &Ctx, src: &SourceArgs, default_split: Split, default_count: usize) -> Result<Vec<IpInstance>> {
    let sp = src.split.map(split).unwrap_or(default_split);
    let insts = match &src.manifest {
        Some(path) => {
            if src.count.is_some() {
                bail!("--count conflicts with --manifest");
            }
            load_split(path, sp)?
        }
        None => {
            let seeds = split_seeds(ctx.seed, sp, src.count.unwrap_or(default_count));
            generate_split(family(&src.family), &seeds, Some(src.label_nodes), ctx.exec)?
        }
    };
    if insts.is_empty() {
        bail!("no instances selected");
    }
    Ok(insts)
}

fn parse_selector(name: &str, decode: Decode) -> Result<Option<SelectorSpec>> {
    if name == "none" {
        return Ok(None);
    }
    if let Ok(kind) = name.parse::<HeuristicKind>() {
        return Ok(Some(SelectorSpec::Heuristic(kind)));
    }
    let path = Path::new(name);
    if !path.is_file() {
        bail!("unknown selector {name:?}: not a heuristic name or weights file");
    }
    let params = PolicyParams::load(path).with_context(|| format!("loading {name}"))?;
    Ok(Some(SelectorSpec::Policy { params, decode }))
}

fn require_selector(name: &str, decode: Decode) -> Result<SelectorSpec> {
    parse_selector(name, decode)?.with_context(|| format!("selector {name:?} is not valid here"))
}

fn generate(ctx: &Ctx, a: &GenerateArgs) -> Result<()> {
    let fam = family(&a.family);
    let n_train = a.train.unwrap_or(a.count * 3 / 5);
    if n_train > a.count {
        bail!("--train {n_train} exceeds --count {}", a.count);
    }
    let label = (!a.no_label).then_some(a.label_nodes);
    let mut manifest = Manifest {
        family: Some(fam),
        train: Vec::new(),
        test: Vec::new(),
    };
    for (sp, count, dir) in [(Split::Train, n_train, "train"), (Split::Test, a.count - n_train, "test")] {
        let insts = generate_split(fam, &split_seeds(ctx.seed, sp, count), label, ctx.exec)?;
        let sub = ctx.run.path(dir);
        fs::create_dir_all(&sub)?;
        for inst in &insts {
            let rel = format!("{dir}/{}.json", inst.name);
            write_instance(&ctx.run.path(&rel), inst)?;
            match sp {
                Split::Train => manifest.train.push(rel),
                Split::Test => manifest.test.push(rel),
            }
        }
    }
    let p = ctx.run.path("manifest.json");
    manifest.save(&p)?;
    println!(
        "wrote {} train + {} test instances, manifest {}",
        manifest.train.len(),
        manifest.test.len(),
        p.display()
    );
    Ok(())
}

fn train_cmd(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let insts = load_source(ctx, &a.source, Split::Train, 30)?;
    let fam = match &a.source.manifest {
        Some(p) => Manifest::load(p)?.family.unwrap_or(family(&a.source.family)),
        None => family(&a.source.family),
    };
    let mut cfg = EsConfig::for_family(&fam);
    cfg.master_seed = ctx.seed;
    cfg.execution = ctx.exec;
    if let Some(v) = a.perturbations {
        cfg.num_perturbations = v;
    }
    if let Some(v) = a.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.trajectories {
        cfg.trajectories_per_instance = v;
    }
    if let Some(v) = a.iterations {
        cfg.num_iterations = v;
    }
    if let Some(v) = a.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = a.gamma {
        cfg.gamma = v;
    }
    ctx.run.write_json("es_config.json", &cfg)?;

    let init = match &a.init {
        Some(p) => PolicyParams::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => {
            let arch = match a.arch {
                ArchName::Attention => Architecture::AttentionOnly {
                    num_vars: insts[0].num_vars(),
                },
                ArchName::Lstm => Architecture::LstmAttention {
                    lstm_hidden: a.lstm_hidden,
                },
            };
            PolicyParams::init(arch, a.hidden_units, a.embed_dim, derive_seed(ctx.seed, &[u64::MAX]))
        }
    };
    let ckpt_dir = ctx.run.path("checkpoints");
    if a.checkpoint_every.is_some() {
        fs::create_dir_all(&ckpt_dir)?;
    }
    let mut ckpt_err = None;
    let (params, log) = train(init, &insts, &cfg, |rec, p| {
        eprintln!("iter {:>4}  mean_return {:.6}", rec.iteration, rec.mean_return);
        if let Some(k) = a.checkpoint_every.filter(|&k| k > 0) {
            if (rec.iteration + 1) % k == 0 && ckpt_err.is_none() {
                let path = ckpt_dir.join(format!("iter_{:05}.json", rec.iteration + 1));
                ckpt_err = p.save(&path).err();
            }
        }
    })?;
    if let Some(e) = ckpt_err {
        return Err(e).context("writing checkpoint");
    }
    let weights = a.weights.clone().unwrap_or_else(|| ctx.run.path("policy.json"));
    params.save(&weights)?;
    let log_path = ctx.run.path("train_log.csv");
    fs::write(&log_path, log.to_csv())?;
    println!("weights {}, log {}", weights.display(), log_path.display());
    Ok(())
}

fn decode(d: DecodeName) -> Decode {
    match d {
        DecodeName::Greedy => Decode::Greedy,
        DecodeName::Sample => Decode::Sample,
    }
}

#[derive(Serialize)]
struct EvalRow<'a> {
    instance: &'a str,
    selector: &'a str,
    cuts: usize,
    termination: &'static str,
    igc: Option<f64>,
    trace_len: usize,
    initial_objective: f64,
    final_objective: f64,
    known_ip_optimum: Option<f64>,
}

#[derive(Serialize)]
struct EvalSummary {
    selector: String,
    instances: usize,
    mean_cuts: f64,
    std_cuts: f64,
    mean_igc: Option<f64>,
    std_igc: Option<f64>,
    terminations: BTreeMap<&'static str, usize>,
}

fn eval_cmd(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let insts = load_source(ctx, &a.source, Split::Test, 20)?;
    let spec = require_selector(&a.selector, decode(a.decode))?;
    let label = spec.label();
    let cfg = RolloutConfig {
        horizon: a.horizon,
        gamma: a.gamma,
        stopping_window: a.window,
        stopping_threshold: a.threshold,
        mode: mode(a.mode),
        ..RolloutConfig::default()
    };
    let results = evaluate(&spec, &insts, &cfg, ctx.seed, ctx.exec)?;
    let rows: Vec<EvalRow> = insts
        .iter()
        .zip(&results)
        .map(|(inst, r)| EvalRow {
            instance: &inst.name,
            selector: &label,
            cuts: r.cuts_added,
            termination: r.termination.as_str(),
            igc: r.igc,
            trace_len: r.objective_trace.len(),
            initial_objective: r.initial_objective(),
            final_objective: r.final_objective(),
            known_ip_optimum: inst.known_ip_optimum,
        })
        .collect();
    ctx.run.write_csv("eval.csv", &rows)?;
    let igcs: Vec<f64> = results.iter().filter_map(|r| r.igc).collect();
    ctx.run.write_csv("igc_percentiles.csv", &percentile_rows(&igcs))?;
    let cuts: Vec<f64> = results.iter().map(|r| r.cuts_added as f64).collect();
    let mut terminations = BTreeMap::new();
    for r in &results {
        *terminations.entry(r.termination.as_str()).or_insert(0) += 1;
    }
    let summary = EvalSummary {
        selector: label,
        instances: insts.len(),
        mean_cuts: mean(&cuts),
        std_cuts: std_dev(&cuts),
        mean_igc: (!igcs.is_empty()).then(|| mean(&igcs)),
        std_igc: (!igcs.is_empty()).then(|| std_dev(&igcs)),
        terminations,
    };
    ctx.run.write_json("summary.json", &summary)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

#[derive(Serialize)]
struct BncRow<'a> {
    instance: &'a str,
    selector: &'a str,
    nodes_expanded: usize,
    nodes_to_target: Option<usize>,
    final_igc: Option<f64>,
    termination: String,
    best_value: Option<f64>,
    cuts_added: usize,
    lp_failures: usize,
}

#[derive(Serialize)]
struct BncSummary {
    selector: String,
    instances: usize,
    reached_target: Option<f64>,
    mean_final_igc: f64,
    mean_nodes: f64,
}

fn bnc_cmd(ctx: &Ctx, a: &BncArgs) -> Result<()> {
    let insts = load_source(ctx, &a.source, Split::Test, 20)?;
    let spec = parse_selector(&a.selector, Decode::Greedy)?;
    if let Some(s) = &spec {
        for inst in &insts {
            s.check(inst)?;
        }
    }
    let label = spec.as_ref().map_or("none".to_string(), SelectorSpec::label);
    let cfg = BncConfig {
        node_budget: (a.budget > 0).then_some(a.budget),
        cuts_per_node: if spec.is_some() { a.ncuts } else { 0 },
        termination_threshold: a.gap_threshold,
        igc_target: a.igc_target,
        ..BncConfig::default()
    };
    // Never consulted when no cuts are requested.
    let fallback = SelectorSpec::Heuristic(HeuristicKind::Lexicographic);
    let chosen = spec.as_ref().unwrap_or(&fallback);
    let results = map_indexed(insts.len(), ctx.exec, |i| {
        let mut sel = chosen.build(derive_seed(ctx.seed, &[i as u64]));
        run_bnc(&insts[i], &mut *sel, &cfg).with_context(|| format!("instance {}", insts[i].name))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rows: Vec<BncRow> = insts
        .iter()
        .zip(&results)
        .map(|(inst, r)| BncRow {
            instance: &inst.name,
            selector: &label,
            nodes_expanded: r.nodes_expanded,
            nodes_to_target: r.nodes_to_target,
            final_igc: r.final_igc(),
            termination: format!("{:?}", r.termination),
            best_value: r.best_value,
            cuts_added: r.cuts_added,
            lp_failures: r.lp_failures,
        })
        .collect();
    ctx.run.write_csv("bnc.csv", &rows)?;
    let nodes: Vec<f64> = results
        .iter()
        .map(|r| r.nodes_to_target.map_or(f64::INFINITY, |n| n as f64))
        .collect();
    ctx.run.write_csv("nodes_percentiles.csv", &percentile_rows(&nodes))?;
    let finals: Vec<f64> = results.iter().filter_map(|r| r.final_igc()).collect();
    let summary = BncSummary {
        selector: label,
        instances: insts.len(),
        reached_target: a.igc_target.map(|_| {
            results.iter().filter(|r| r.nodes_to_target.is_some()).count() as f64 / insts.len() as f64
        }),
        mean_final_igc: mean(&finals),
        mean_nodes: mean(&results.iter().map(|r| r.nodes_expanded as f64).collect::<Vec<_>>()),
    };
    ctx.run.write_json("summary.json", &summary)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

#[derive(Serialize)]
struct InterpretRow {
    selector: String,
    criterion: u8,
    mean_fraction: f64,
    rollouts_scored: usize,
}

#[derive(Serialize)]
struct CutsRow<'a> {
    selector: &'a str,
    instance: &'a str,
    cuts: usize,
    termination: &'static str,
    criterion1: Option<f64>,
    criterion2: Option<f64>,
    criterion3: Option<f64>,
}

fn interpret_cmd(ctx: &Ctx, a: &InterpretArgs) -> Result<()> {
    let insts = load_source(ctx, &a.source, Split::Test, 20)?;
    let cfg = RolloutConfig {
        mode: mode(a.mode),
        ..RolloutConfig::test(a.horizon)
    };
    let mut summary = Vec::new();
    let mut per_cut = Vec::new();
    let specs = a
        .selectors
        .iter()
        .map(|s| require_selector(s, Decode::Greedy))
        .collect::<Result<Vec<_>>>()?;
    for spec in &specs {
        for inst in &insts {
            spec.check(inst)?;
        }
        let label = spec.label();
        let reports = map_indexed(insts.len(), ctx.exec, |i| {
            let mut sel = spec.build(derive_seed(ctx.seed, &[i as u64]));
            score_rollout(&insts[i], &mut *sel, &cfg)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
        let scored: Vec<[f64; 3]> = reports.iter().filter_map(|r| r.fractions).collect();
        for k in 0..3 {
            summary.push(InterpretRow {
                selector: label.clone(),
                criterion: k as u8 + 1,
                mean_fraction: mean(&scored.iter().map(|f| f[k]).collect::<Vec<_>>()),
                rollouts_scored: scored.len(),
            });
        }
        for (inst, r) in insts.iter().zip(&reports) {
            per_cut.push((label.clone(), inst.name.clone(), r.cuts, r.termination.as_str(), r.fractions));
        }
    }
    ctx.run.write_csv("interpret_summary.csv", &summary)?;
    let rows: Vec<CutsRow> = per_cut
        .iter()
        .map(|(s, i, cuts, t, f)| CutsRow {
            selector: s,
            instance: i,
            cuts: *cuts,
            termination: t,
            criterion1: f.map(|f| f[0]),
            criterion2: f.map(|f| f[1]),
            criterion3: f.map(|f| f[2]),
        })
        .collect();
    ctx.run.write_csv("interpret_cuts.csv", &rows)?;
    for r in &summary {
        println!("{} criterion {} mean {:.4}", r.selector, r.criterion, r.mean_fraction);
    }
    Ok(())
}
