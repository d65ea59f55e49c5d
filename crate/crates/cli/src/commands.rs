use crate::{
    ArdArgs, CampaignArgs, Cli, Command, ControlArgs, EvaluateArgs, IngestArgs, MethodArg, ServeArgs, SweepArgs,
    SynthArgs, SynthKind, TrainArgs,
};
use anyhow::{bail, Context, Result};
use dispute_core::arch_ga::history_csv;
use dispute_core::control::{campaign_csv, control_campaign, control_case, ControlConfig, Strategy, StrategySummary};
use dispute_core::data::{
    balanced_split, case_from_values, dataset_to_csv, parse_dataset, synth_generate, Dataset, SynthConfig, SynthProvenance,
    Variable, VariableSchema,
};
use dispute_core::eval::{auc_from_scores, confusion, omission_csv, omission_study, roc, roc_csv, scenario_csv, scenario_sweep, true_rates};
use dispute_core::model::ModelArtifact;
use dispute_core::pipeline::{train_detailed, TrainMethod, TrainRecipe};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub fn run(cli: Cli) -> Result<()> {
    set_threads(cli.threads)?;
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Ard(a) => ard(a),
        Command::Sweep(a) => sweep(a),
        Command::Control(a) => control(a),
        Command::Campaign(a) => campaign(a),
        Command::Serve(a) => serve(a),
    }
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> Result<()> {
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: usize) -> Result<()> {
    Ok(())
}

pub fn parse_strategy(s: &str) -> Result<Strategy, String> {
    Strategy::parse(s).ok_or_else(|| {
        format!(
            "expected multi or one of {}",
            Variable::CONTROLLABLE.map(|v| v.name()).join(", ")
        )
    })
}

#[derive(Debug, Clone)]
pub struct Strategies(pub Vec<Strategy>);

pub fn parse_strategies(s: &str) -> Result<Strategies, String> {
    if s == "all" {
        return Ok(Strategies(Strategy::all()));
    }
    parse_strategy(s).map(|st| Strategies(vec![st]))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write(path, &s)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&read(path)?, &VariableSchema::standard()).with_context(|| format!("loading {}", path.display()))
}

fn load_model(path: &Path) -> Result<ModelArtifact> {
    ModelArtifact::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn describe(ds: &Dataset) -> String {
    let (d, p) = ds.class_counts();
    format!("{} records ({d} disputes, {p} peace)", ds.len())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    println!("{}: {}", a.data.display(), describe(&ds));
    if let Some(out) = &a.out {
        write(out, &dataset_to_csv(&ds))?;
    }
    if let (Some(n), Some(seed), Some(train_out), Some(test_out)) = (a.per_class, a.seed, &a.train_out, &a.test_out) {
        let split = balanced_split(&ds, n, seed)?;
        if let Some(w) = &split.warning {
            eprintln!("warning: {w}");
        }
        write(train_out, &dataset_to_csv(&split.train))?;
        write(test_out, &dataset_to_csv(&split.test))?;
        println!("train: {}", describe(&split.train));
        println!("test: {}", describe(&split.test));
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = match a.kind {
        SynthKind::Separable => SynthConfig::separable(a.count),
        SynthKind::Noise => SynthConfig::noise(a.count),
        SynthKind::Informative => {
            let vars = a
                .informative
                .iter()
                .map(|s| Variable::parse(s).with_context(|| format!("unknown variable {s:?}")))
                .collect::<Result<Vec<_>>>()?;
            SynthConfig::informative(a.count, &vars, a.strength)
        }
    };
    let ds = synth_generate(&config, a.seed)?;
    write(&a.out, &dataset_to_csv(&ds))?;
    if let Some(p) = &a.provenance {
        write_json(
            p,
            &SynthProvenance {
                generator: "synth".into(),
                seed: a.seed,
                config,
            },
        )?;
    }
    println!("{}: {}", a.out.display(), describe(&ds));
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let mut recipe: TrainRecipe = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainRecipe::default(),
    };
    recipe.method = match a.method {
        MethodArg::Evidence => TrainMethod::Evidence,
        MethodArg::Hmc => TrainMethod::Hmc,
        MethodArg::Ard => TrainMethod::Ard,
    };
    recipe.seed = a.seed;
    if let Some(h) = a.hidden {
        recipe.hidden = h;
    }
    if a.ga && recipe.ga.is_none() {
        recipe.ga = Some(Default::default());
    }
    if let Some(c) = a.chains {
        recipe.chains = c;
    }
    if let Some(n) = a.samples {
        recipe.hmc.n_samples = n;
    }
    let columns: Vec<usize> = (0..dispute_core::data::NUM_VARIABLES).collect();
    let outcome = train_detailed(&ds, &columns, &recipe)?;
    write(&a.out, &outcome.model.to_json())?;
    if let (Some(path), Some(ga)) = (&a.ga_history, &outcome.ga) {
        write(path, &history_csv(&ga.history))?;
    }
    let m = &outcome.model;
    println!(
        "{}: {} with {} hidden units",
        a.out.display(),
        m.kind.name(),
        m.architecture.hidden
    );
    if let Some(rate) = m.acceptance_rate {
        println!("acceptance rate {rate:.3}");
    }
    for note in &m.notes {
        println!("note: {note}");
    }
    Ok(())
}

#[derive(Serialize)]
struct Metrics {
    n_records: usize,
    auc: f64,
    confusion: dispute_core::eval::ConfusionMatrix,
    true_dispute_rate: f64,
    true_peace_rate: f64,
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let scores = model.scores(&ds.records);
    let labels = ds.labels();
    let cm = confusion(&scores, &labels, a.threshold)?;
    let (tdr, tpr) = true_rates(&cm)?;
    let metrics = Metrics {
        n_records: ds.len(),
        auc: auc_from_scores(&scores, &labels)?,
        confusion: cm,
        true_dispute_rate: tdr,
        true_peace_rate: tpr,
    };
    println!(
        "AUC {:.4}; disputes {:.1}% correct, peace {:.1}% correct",
        metrics.auc,
        100.0 * tdr,
        100.0 * tpr
    );
    if let Some(p) = &a.out {
        write_json(p, &metrics)?;
    }
    if let Some(p) = &a.roc {
        write(p, &roc_csv(&roc(&scores, &labels, a.n_thresholds)?))?;
    }
    if let (Some(out), Some(train_path), Some(seed)) = (&a.omission, &a.train, a.seed) {
        let train = load_dataset(train_path)?;
        let recipe = TrainRecipe {
            seed,
            ..model.recipe.clone()
        };
        let rows = omission_study(&train, &ds, &recipe);
        for r in &rows {
            if let Some(e) = &r.error {
                eprintln!("warning: omitting {}: {e}", r.label());
            }
        }
        write(out, &omission_csv(&rows))?;
    }
    Ok(())
}

fn ard(a: ArdArgs) -> Result<()> {
    let model = match (&a.model, &a.data, a.seed) {
        (Some(p), _, _) => load_model(p)?,
        (None, Some(data), Some(seed)) => {
            let ds = load_dataset(data)?;
            let recipe = TrainRecipe {
                method: TrainMethod::Ard,
                hidden: a.hidden.unwrap_or(TrainRecipe::default().hidden),
                seed,
                ..TrainRecipe::default()
            };
            let m = train_detailed(&ds, &(0..dispute_core::data::NUM_VARIABLES).collect::<Vec<_>>(), &recipe)?.model;
            if let Some(out) = &a.model_out {
                write(out, &m.to_json())?;
            }
            m
        }
        _ => bail!("give --model or --data with --seed"),
    };
    let Some(result) = &model.ard else {
        bail!("relevance unavailable for this model kind ({}); train with --method ard", model.kind.name());
    };
    let mut csv = String::from("variable,alpha,relevance\n");
    for &i in &result.ranking {
        let name = &model.schema[model.input_columns[i]];
        csv.push_str(&format!("{name},{},{}\n", result.input_alphas[i], result.relevance[i]));
        println!("{name:>12} {:.6}", result.relevance[i]);
    }
    write(&a.out, &csv)
}

fn sweep(a: SweepArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let rows = scenario_sweep(&model, &model.scaling, &VariableSchema::standard());
    write(&a.out, &scenario_csv(&rows))?;
    if let Some(p) = &a.json {
        write_json(p, &rows)?;
    }
    let conflicts = rows.iter().filter(|r| r.verdict == dispute_core::eval::Verdict::Conflict).count();
    println!("{} scenarios, {conflicts} predicted conflicts", rows.len());
    Ok(())
}

fn control_config(path: Option<&PathBuf>, seed: u64) -> Result<ControlConfig> {
    let mut cfg: ControlConfig = match path {
        Some(p) => read_json(p)?,
        None => ControlConfig::default(),
    };
    cfg.sa.seed = seed;
    cfg.validate()?;
    Ok(cfg)
}

fn control(a: ControlArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let values: BTreeMap<String, f64> = read_json(&a.case)?;
    let case = case_from_values(&VariableSchema::standard(), &values).map_err(|errors| {
        let lines: Vec<String> = errors.iter().map(|e| format!("{}: {}", e.field, e.message)).collect();
        anyhow::anyhow!("case fails schema validation: {}", lines.join("; "))
    })?;
    let cfg = control_config(a.config.as_ref(), a.seed)?;
    let plan = control_case(&model, &model.scaling, &VariableSchema::standard(), &case, a.strategy, &cfg)?;
    println!(
        "{}: probability {:.4} -> {:.4}{}",
        a.strategy.label(),
        plan.probability_before(),
        plan.probability_after(),
        if plan.success() { ", averted" } else { "" }
    );
    write_json(&a.out, &plan)
}

/// `report.csv` becomes `report.<strategy>.csv`.
fn per_strategy_path(path: &Path, strategy: Strategy) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("campaign");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}.{}.{ext}", strategy.label()),
        None => format!("{stem}.{}", strategy.label()),
    };
    path.with_file_name(name)
}

fn campaign(a: CampaignArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = load_dataset(&a.data)?;
    let cfg = control_config(a.config.as_ref(), a.seed)?;
    let strategies = &a.strategy.0;
    let mut reports = Vec::with_capacity(strategies.len());
    for &s in strategies {
        let report = control_campaign(&model, &model.scaling, &ds.schema, &ds, s, &cfg)?;
        println!(
            "{:>10}: {}/{} predicted conflicts averted ({:.1}%)",
            s.label(),
            report.n_averted,
            report.n_acted_on,
            100.0 * report.averted_fraction
        );
        if let Some(p) = &a.csv {
            let path = if strategies.len() == 1 { p.clone() } else { per_strategy_path(p, s) };
            write(&path, &campaign_csv(&report, s))?;
        }
        reports.push(report);
    }
    if let Some(p) = &a.summary {
        let summary: Vec<StrategySummary> = reports.iter().map(StrategySummary::from).collect();
        write_json(p, &summary)?;
    }
    match reports.as_slice() {
        [one] => write_json(&a.out, one),
        many => write_json(&a.out, many),
    }
}

fn serve(a: ServeArgs) -> Result<()> {
    let config = dispute_service::ServiceConfig {
        listen: a.listen,
        artifact_dir: a.artifacts,
        workers: a.workers,
        static_dir: a.static_dir,
    };
    tokio::runtime::Runtime::new()?.block_on(dispute_service::serve(config))?;
    Ok(())
}
