use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use gravity::numeric::fmt12;
use gravity::train::{EpochRecord, InductiveReport};
use gravity::{
    all_pairs_paths, force_kernel, generate_sbm, group_force, load_graph, membership, predict_graph, tie_matrix_exact,
    tie_metrics, train_with, Error, Graph, Result, SbmConfig, Tensor, TieModel, TieModelConfig, TrainConfig,
    TrainedModel,
};
use gravity::io::{edges_to_string, features_to_string, labels_to_string, matrix_csv};

use crate::manifest::RunManifest;
use crate::{
    FitArgs, GenSbmArgs, GraphArgs, InspectArgs, PredictArgs, TieEvalArgs, TieFitArgs, TieOracleArgs,
};

const EDGES: &str = "edges.tsv";
const FEATURES: &str = "features.csv";
const LABELS: &str = "labels.csv";

fn graph_files(args: &GraphArgs) -> Result<(PathBuf, PathBuf, Option<PathBuf>)> {
    match (&args.graph, &args.edges, &args.features) {
        (Some(dir), _, _) => {
            let labels = dir.join(LABELS);
            Ok((dir.join(EDGES), dir.join(FEATURES), labels.exists().then_some(labels)))
        }
        (None, Some(e), Some(f)) => Ok((e.clone(), f.clone(), args.labels.clone())),
        _ => Err(Error::Invalid("give either --graph DIR or --edges and --features".into())),
    }
}

fn load(args: &GraphArgs, m: &mut RunManifest) -> Result<Graph> {
    let (e, f, l) = graph_files(args)?;
    let g = load_graph(&e, &f, l.as_deref())?;
    m.input(&e)?;
    m.input(&f)?;
    if let Some(l) = &l {
        m.input(l)?;
    }
    Ok(g)
}

fn load_dir(dir: &Path, m: &mut RunManifest) -> Result<Graph> {
    let args = GraphArgs {
        graph: Some(dir.to_path_buf()),
        edges: None,
        features: None,
        labels: None,
    };
    load(&args, m)
}

/// Rounds every float in `v` to 12 significant digits.
fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            json!(fmt12(x).parse::<f64>().expect("fmt12 output parses"))
        }
        Value::Array(xs) => Value::Array(xs.into_iter().map(rounded).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn json_text(v: &impl Serialize) -> String {
    let v = rounded(serde_json::to_value(v).expect("plain data serialises"));
    serde_json::to_string_pretty(&v).expect("value serialises") + "\n"
}

fn embedding_csv(g: &Graph, y: &Tensor) -> String {
    let mut s = String::from("vertex,label");
    for c in 0..y.cols() {
        let _ = write!(s, ",y_{c}");
    }
    s.push('\n');
    for v in 0..y.rows() {
        let label = g.label(v).map(|l| l.to_string()).unwrap_or_default();
        let _ = write!(s, "{v},{label}");
        for &x in y.row(v) {
            let _ = write!(s, ",{}", fmt12(x));
        }
        s.push('\n');
    }
    s
}

fn history_csv(h: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,enc_loss,disc_loss,total,val_acc\n");
    for r in h {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.epoch,
            fmt12(r.enc_loss),
            fmt12(r.disc_loss),
            fmt12(r.total),
            fmt12(r.val_acc)
        );
    }
    s
}

pub fn tie_oracle(a: TieOracleArgs) -> Result<()> {
    let mut m = RunManifest::start("tie-oracle", &a, a.seed);
    let g = load(&a.graph, &mut m)?;
    let paths = all_pairs_paths(&g, a.hops)?;
    let ties = tie_matrix_exact(&g, &paths);
    m.output(&a.out, "ties.csv", &matrix_csv(ties.values()))?;
    m.finish(&a.out)
}

#[derive(Serialize)]
struct NamedMetrics {
    graph: PathBuf,
    n_vertices: usize,
    #[serde(flatten)]
    metrics: gravity::TieMetrics,
}

fn zero_shot(model: &TieModel, dirs: &[PathBuf], m: &mut RunManifest) -> Result<Vec<NamedMetrics>> {
    dirs.iter()
        .map(|dir| {
            let g = load_dir(dir, m)?;
            let paths = all_pairs_paths(&g, model.hops())?;
            let truth = tie_matrix_exact(&g, &paths);
            let pred = model.predict_matrix(&g, &paths)?;
            Ok(NamedMetrics {
                graph: dir.clone(),
                n_vertices: g.n_vertices(),
                metrics: tie_metrics(&pred, &truth)?,
            })
        })
        .collect()
}

pub fn tie_fit(a: TieFitArgs) -> Result<()> {
    let mut m = RunManifest::start("tie-fit", &a, a.seed);
    let g = load(&a.graph, &mut m)?;
    let paths = all_pairs_paths(&g, a.hops)?;
    let truth = tie_matrix_exact(&g, &paths);
    let cfg = TieModelConfig {
        hidden: a.hidden,
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
    };
    let model = TieModel::train(&g, &truth, &paths, &cfg)?;
    let in_domain = tie_metrics(&model.predict_matrix(&g, &paths)?, &truth)?;
    let evals = zero_shot(&model, &a.eval, &mut m)?;
    m.output(&a.out, "tie_model.json", &model.to_json())?;
    let report = json!({ "in_domain": in_domain, "zero_shot": evals });
    m.output(&a.out, "metrics.json", &json_text(&report))?;
    m.finish(&a.out)
}

pub fn tie_eval(a: TieEvalArgs) -> Result<()> {
    let mut m = RunManifest::start("tie-eval", &a, a.seed);
    let text = std::fs::read_to_string(&a.model).map_err(|e| Error::Io {
        path: a.model.clone(),
        source: e,
    })?;
    m.input(&a.model)?;
    let model = TieModel::from_json(&text)?;
    let evals = zero_shot(&model, &a.eval, &mut m)?;
    m.output(&a.out, "metrics.json", &json_text(&json!({ "zero_shot": evals })))?;
    m.finish(&a.out)
}

fn fit_config(a: &FitArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_file(p)?,
        None => TrainConfig::default(),
    };
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("--set expects key=value, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn fit(a: FitArgs) -> Result<()> {
    let cfg = fit_config(&a)?;
    if a.snapshot_every == Some(0) {
        return Err(Error::Invalid("--snapshot-every must be at least 1".into()));
    }
    let mut m = RunManifest::start("fit", &json!({ "args": &a, "config": &cfg }), cfg.seed);
    if let Some(p) = &a.config {
        m.input(p)?;
    }
    let g = load(&a.graph, &mut m)?;

    let mut history = Vec::new();
    let mut snapshot_err = None;
    let snap_dir = a.out.join("snapshots");
    let mut snapshots = Vec::new();
    let result = train_with(&g, &cfg, |rec, y| {
        history.push(rec.clone());
        if let Some(every) = a.snapshot_every {
            if rec.epoch % every == 0 && snapshot_err.is_none() {
                let name = format!("epoch_{:04}.csv", rec.epoch);
                match gravity::io::write_text(&snap_dir.join(&name), &embedding_csv(&g, y)) {
                    Ok(()) => snapshots.push(snap_dir.join(name)),
                    Err(e) => snapshot_err = Some(e),
                }
            }
        }
    });
    if let Some(e) = snapshot_err {
        return Err(e);
    }
    let model = match result {
        Ok(model) => model,
        Err(e @ Error::Diverged { .. }) => {
            m.output(&a.out, "history.csv", &history_csv(&history))?;
            m.finish(&a.out)?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    for p in snapshots {
        m.record(p);
    }

    let preds = predict_graph(&model, &g)?;
    let k = model.n_classes;
    let score = |vs: &[usize]| InductiveReport::score(g.labels(), &preds, vs, k, model.best_epoch).map(|r| r.accuracy);
    let metrics = json!({
        "best_epoch": model.best_epoch,
        "epochs_run": model.history.len(),
        "best_val_acc": model.best_val_acc(),
        "train_acc": score(&model.split.train)?,
        "val_acc": score(&model.split.val)?,
        "test_acc": if model.split.test.is_empty() { Value::Null } else { json!(score(&model.split.test)?) },
    });
    let emb = model.embed(&g)?;
    m.output_bytes(&a.out, "model.grva", &model.to_bytes())?;
    m.output(&a.out, "history.csv", &history_csv(&model.history))?;
    m.output(&a.out, "embedding.csv", &embedding_csv(&g, &emb))?;
    m.output(&a.out, "config.txt", &cfg.to_kv_string())?;
    m.output(&a.out, "split.json", &json_text(&model.split))?;
    m.output(&a.out, "metrics.json", &json_text(&metrics))?;
    m.finish(&a.out)
}

fn load_model(path: &Path, m: &mut RunManifest) -> Result<TrainedModel> {
    let model = TrainedModel::load(path)?;
    m.input(path)?;
    Ok(model)
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let mut m = RunManifest::start("predict", &a, a.seed);
    let model = load_model(&a.model, &mut m)?;
    let g = load(&a.graph, &mut m)?;
    let preds = predict_graph(&model, &g)?;

    let mut csv = String::from("vertex,predicted");
    for c in 0..model.n_classes {
        let _ = write!(csv, ",prob_{c}");
    }
    csv.push('\n');
    for (v, p) in preds.iter().enumerate() {
        let _ = write!(csv, "{v},{}", p.class);
        for &x in &p.probs {
            let _ = write!(csv, ",{}", fmt12(x));
        }
        csv.push('\n');
    }
    m.output(&a.out, "predictions.csv", &csv)?;

    if g.is_labeled() {
        let all: Vec<usize> = (0..g.n_vertices()).collect();
        let report = InductiveReport::score(g.labels(), &preds, &all, model.n_classes, model.best_epoch)?;
        let mut metrics = json!({ "all": report });
        if g.digest() == model.train_digest && !model.split.test.is_empty() {
            let test =
                InductiveReport::score(g.labels(), &preds, &model.split.test, model.n_classes, model.best_epoch)?;
            metrics["test"] = serde_json::to_value(test).expect("report serialises");
        }
        m.output(&a.out, "metrics.json", &json_text(&metrics))?;
    } else {
        eprintln!("note: graph has no labels, metrics omitted");
    }
    m.finish(&a.out)
}

pub fn inspect(a: InspectArgs) -> Result<()> {
    let mut m = RunManifest::start("inspect", &a, a.seed);
    let model = load_model(&a.model, &mut m)?;
    let g = load(&a.graph, &mut m)?;
    let paths = all_pairs_paths(&g, model.config.hops)?;
    let ties = model.ties_for(&g, &paths)?;
    let emb = model.embed(&g)?;
    let kernel = force_kernel(&emb, &ties, &paths, model.config.lambda)?;
    m.output(&a.out, "embedding.csv", &embedding_csv(&g, &emb))?;
    m.output(&a.out, "ties.csv", &matrix_csv(ties.values()))?;
    m.output(&a.out, "kernel.csv", &matrix_csv(&kernel.values))?;
    if g.is_labeled() {
        let mem = membership(g.labels(), g.n_classes())?;
        let gf = group_force(&kernel, &mem)?;
        m.output(&a.out, "group_force.csv", &matrix_csv(&gf.values))?;
    } else {
        eprintln!("note: graph has no labels, group force omitted");
    }
    m.finish(&a.out)
}

pub fn gen_sbm(a: GenSbmArgs) -> Result<()> {
    let mut m = RunManifest::start("gen-sbm", &a, a.seed);
    let g = generate_sbm(&SbmConfig {
        blocks: a.blocks,
        per_block: a.per_block,
        p_in: a.p_in,
        p_out: a.p_out,
        feature_dim: a.feature_dim,
        feature_shift: a.feature_shift,
        seed: a.seed,
    })?;
    m.output(&a.out, EDGES, &edges_to_string(&g))?;
    m.output(&a.out, FEATURES, &features_to_string(g.features()))?;
    m.output(&a.out, LABELS, &labels_to_string(&g))?;
    m.finish(&a.out)
}
