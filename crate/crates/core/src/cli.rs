//! Command-line front end: `gen-data`, `train`, `eval`, `predict`, `ablate`
//! and `attention`.
//!
//! Settings resolve in three layers: built-in defaults, a flat key-value
//! config file (`--config` or `$PROMPTRAJ_CONFIG`), then flags.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

use crate::attnviz::{self, RowSelection};
use crate::coretypes::io::read_corpus;
use crate::coretypes::{keypoint_layout, CueKind, Scene};
use crate::datagen::{generate, ScenarioSpec};
use crate::error::{Error, Result};
use crate::masking::EvalPattern;
use crate::metrics::MetricReport;
use crate::model::{Model, ModelConfig, Variant};
use crate::plot::trajectory_svg;
use crate::training::{check_subset, evaluate, train, train_to_dir, TrainConfig};

pub const CONFIG_ENV: &str = "PROMPTRAJ_CONFIG";

#[derive(Parser, Debug)]
#[command(name = "promptraj", version, about = "Multi-cue trajectory prediction toolkit")]
pub struct Cli {
    /// Flat key-value config file; flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic corpus (train/val/test JSON-lines).
    GenData(GenDataArgs),
    /// Train a model and write its checkpoint and run log.
    Train(TrainArgs),
    /// Evaluate a checkpoint, optionally under cue subsets and perturbations.
    Eval(EvalArgs),
    /// Write predicted trajectories and SVG overlays.
    Predict(PredictArgs),
    /// Train and compare the four architecture variants.
    Ablate(AblateArgs),
    /// Export temporal and spatial attention maps.
    Attention(AttentionArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// constant-velocity, turn-with-preview, social-avoidance or mixed.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub val: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub keypoints: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub preview: Option<usize>,
    #[arg(long)]
    pub agents_min: Option<usize>,
    #[arg(long)]
    pub agents_max: Option<usize>,
    #[arg(long)]
    pub turn_jitter: Option<usize>,
    /// Comma separated cue menu, e.g. `T,P3d,B2d`.
    #[arg(long)]
    pub cues: Option<String>,
    #[arg(long)]
    pub random_heading: bool,
}

#[derive(Args, Debug, Default)]
pub struct ModelFlags {
    /// CMT-ST, MLP-ST, ST-CMT or CMT.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub cmt_layers: Option<usize>,
    #[arg(long)]
    pub cmt_heads: Option<usize>,
    #[arg(long)]
    pub st_layers: Option<usize>,
    #[arg(long)]
    pub st_heads: Option<usize>,
    /// absolute or offset.
    #[arg(long)]
    pub target: Option<String>,
    /// binary or per-slot.
    #[arg(long)]
    pub identity: Option<String>,
    #[arg(long)]
    pub max_agents: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// generic or specific.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Cue subset for the specific protocol.
    #[arg(long)]
    pub cues: Option<String>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub modality_rate: Option<f64>,
    #[arg(long)]
    pub meta_rate: Option<f64>,
    #[arg(long)]
    pub validate_every: Option<usize>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Corpus directory with train.jsonl and val.jsonl.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Args, Debug)]
pub struct DataFlags {
    /// Corpus directory or a single .jsonl file.
    #[arg(long)]
    pub data: PathBuf,
    /// Split used when --data is a directory.
    #[arg(long, default_value = "test")]
    pub split: String,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataFlags,
    /// Cue subset, e.g. `T,P3d`; defaults to every cue in the corpus.
    #[arg(long)]
    pub cues: Option<String>,
    /// Per-cue keep fractions, e.g. `T=0.5,P3d=0.1`.
    #[arg(long)]
    pub keep_fraction: Option<String>,
    /// Gaussian noise on pose values, in scene units.
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// random-limb, right-leg or frame-drop:P.
    #[arg(long)]
    pub occlusion: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report.csv and report.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub cues: Option<String>,
    /// Number of scenes to render.
    #[arg(long, default_value_t = 20)]
    pub limit: usize,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Corpus directory with train.jsonl and test.jsonl.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optimizer steps per variant.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[command(flatten)]
    pub model: ModelFlags,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Args, Debug)]
pub struct AttentionArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataFlags,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub limit: usize,
    /// Aggregate every token row instead of the query rows only.
    #[arg(long)]
    pub all_rows: bool,
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 for invalid input, 2 for runtime failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let file = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::GenData(a) => gen_data(a, &file),
        Command::Train(a) => train_cmd(a, &file),
        Command::Eval(a) => eval_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Ablate(a) => ablate_cmd(a, &file),
        Command::Attention(a) => attention_cmd(a),
    }
}

fn load_config(path: Option<&Path>) -> Result<Table> {
    let Some(path) = path else { return Ok(Table::new()) };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let table: Table = text
        .parse()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let known = known_keys();
    if let Some(bad) = table.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(Error::Config(format!("{}: unknown key `{bad}`", path.display())));
    }
    Ok(table)
}

fn table_keys<T: Serialize>(value: &T, out: &mut Vec<String>) {
    let t = Table::try_from(value).expect("config serializes to a table");
    for (k, v) in t {
        match v {
            Value::Table(inner) => out.extend(inner.keys().cloned()),
            _ => out.push(k),
        }
    }
}

fn known_keys() -> Vec<&'static str> {
    let mut keys = Vec::new();
    table_keys(&ScenarioSpec::default(), &mut keys);
    table_keys(&ModelConfig::default(), &mut keys);
    table_keys(&TrainConfig::default(), &mut keys);
    keys.push("max_steps".into());
    keys.sort();
    keys.dedup();
    keys.into_iter().map(|k| &*Box::leak(k.into_boxed_str())).collect()
}

/// Overlays `file` and then `flags` onto `base`. Keys that `base` does not
/// know are skipped, so one file can serve several commands. Keys of nested
/// tables (the mask policy) are written into that table.
fn resolve<T: Serialize + DeserializeOwned>(base: &T, optional: &[&str], file: &Table, flags: &Table) -> Result<T> {
    let mut t = Table::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
    for layer in [file, flags] {
        for (k, v) in layer {
            if t.contains_key(k) && !t[k].is_table() || optional.contains(&k.as_str()) {
                t.insert(k.clone(), v.clone());
                continue;
            }
            let nested = t.iter_mut().find_map(|(_, v)| v.as_table_mut().filter(|i| i.contains_key(k)));
            if let Some(inner) = nested {
                inner.insert(k.clone(), v.clone());
            }
        }
    }
    Value::Table(t)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

fn put<T: Serialize>(t: &mut Table, key: &str, v: Option<T>) -> Result<()> {
    if let Some(v) = v {
        let value = Value::try_from(v).map_err(|e| Error::Config(e.to_string()))?;
        t.insert(key.to_string(), value);
    }
    Ok(())
}

fn cue_list(text: Option<&str>) -> Result<Option<Vec<CueKind>>> {
    text.map(CueKind::parse_list).transpose()
}

fn parsed<T: std::str::FromStr<Err = Error>>(text: Option<&str>) -> Result<Option<T>> {
    text.map(str::parse).transpose()
}

fn model_flags(f: &ModelFlags) -> Result<Table> {
    let mut t = Table::new();
    put(&mut t, "variant", parsed::<Variant>(f.variant.as_deref())?)?;
    put(&mut t, "width", f.width)?;
    put(&mut t, "cmt_layers", f.cmt_layers)?;
    put(&mut t, "cmt_heads", f.cmt_heads)?;
    put(&mut t, "st_layers", f.st_layers)?;
    put(&mut t, "st_heads", f.st_heads)?;
    put(&mut t, "target", f.target.clone())?;
    put(&mut t, "identity", f.identity.clone())?;
    put(&mut t, "max_agents", f.max_agents)?;
    Ok(t)
}

fn train_flags(f: &TrainFlags) -> Result<Table> {
    let mut t = Table::new();
    put(&mut t, "epochs", f.epochs)?;
    put(&mut t, "lr", f.lr)?;
    put(&mut t, "batch_size", f.batch_size)?;
    put(&mut t, "seed", f.seed)?;
    put(&mut t, "protocol", f.protocol.clone())?;
    put(&mut t, "cues", cue_list(f.cues.as_deref())?)?;
    put(&mut t, "max_steps", f.max_steps)?;
    put(&mut t, "modality_rate", f.modality_rate)?;
    put(&mut t, "meta_rate", f.meta_rate)?;
    put(&mut t, "validate_every", f.validate_every)?;
    Ok(t)
}

/// Model configuration for a corpus: window sizes and keypoint count come from the data.
fn model_config(flags: &ModelFlags, file: &Table, data: &[Scene]) -> Result<ModelConfig> {
    let mut cfg: ModelConfig = resolve(&ModelConfig::default(), &[], file, &model_flags(flags)?)?;
    let first = data.first().ok_or_else(|| Error::Config("corpus is empty".into()))?;
    cfg.t_obs = data.iter().map(|s| s.t_obs).max().unwrap_or(first.t_obs);
    cfg.horizon = first.horizon;
    if let Some(k) = data.iter().find_map(Scene::keypoints) {
        cfg.keypoints = k;
    }
    cfg.max_agents = cfg.max_agents.max(data.iter().map(|s| s.agents.len()).max().unwrap_or(1));
    cfg.check()?;
    Ok(cfg)
}

fn train_config(flags: &TrainFlags, file: &Table) -> Result<TrainConfig> {
    let cfg: TrainConfig = resolve(&TrainConfig::default(), &["max_steps"], file, &train_flags(flags)?)?;
    cfg.check()?;
    Ok(cfg)
}

fn read_split(dir: &Path, split: &str) -> Result<Vec<Scene>> {
    read_corpus(&dir.join(format!("{split}.jsonl")))
}

fn read_data(flags: &DataFlags) -> Result<Vec<Scene>> {
    let scenes = if flags.data.is_dir() {
        read_split(&flags.data, &flags.split)?
    } else {
        read_corpus(&flags.data)?
    };
    if scenes.is_empty() {
        return Err(Error::Config(format!("{}: no scenes", flags.data.display())));
    }
    Ok(scenes)
}

fn write(path: &Path, text: &str) -> Result<()> {
    attnviz::write_text(path, text)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn gen_data(a: &GenDataArgs, file: &Table) -> Result<()> {
    let mut flags = Table::new();
    put(&mut flags, "kind", parsed::<crate::datagen::ScenarioMix>(a.scenario.as_deref())?)?;
    put(&mut flags, "seed", a.seed)?;
    put(&mut flags, "train", a.train)?;
    put(&mut flags, "val", a.val)?;
    put(&mut flags, "test", a.test)?;
    put(&mut flags, "keypoints", a.keypoints)?;
    put(&mut flags, "noise", a.noise)?;
    put(&mut flags, "preview", a.preview)?;
    put(&mut flags, "agents_min", a.agents_min)?;
    put(&mut flags, "agents_max", a.agents_max)?;
    put(&mut flags, "turn_jitter", a.turn_jitter)?;
    put(&mut flags, "cues", cue_list(a.cues.as_deref())?)?;
    put(&mut flags, "random_heading", a.random_heading.then_some(true))?;
    let spec: ScenarioSpec = resolve(&ScenarioSpec::default(), &[], file, &flags)?;
    let corpus = generate(&spec)?;
    corpus.write_dir(&a.out, &spec)?;
    println!(
        "wrote {} train, {} val, {} test scenes to {}",
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len(),
        a.out.display()
    );
    Ok(())
}

fn train_cmd(a: &TrainArgs, file: &Table) -> Result<()> {
    let train_set = read_split(&a.data, "train")?;
    let val = match read_split(&a.data, "val") {
        Ok(v) => v,
        Err(Error::Io { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    let mcfg = model_config(&a.model, file, &train_set)?;
    let tcfg = train_config(&a.train, file)?;
    let mut model = Model::new(mcfg)?;
    let log = train_to_dir(&mut model, &train_set, &val, &tcfg, &a.out)?;
    println!(
        "trained {} epochs; best epoch {:?}; final loss {:.5}; checkpoint in {}",
        log.epochs.len(),
        log.best_epoch,
        log.final_loss().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

fn eval_patterns(a: &EvalArgs) -> Result<Vec<EvalPattern>> {
    let mut out = Vec::new();
    if let Some(k) = &a.keep_fraction {
        out.push(EvalPattern::keep_fraction(k)?);
    }
    if let Some(o) = &a.occlusion {
        let p: EvalPattern = o.parse()?;
        if matches!(p, EvalPattern::KeepFraction(_) | EvalPattern::GaussianNoise(_)) {
            return Err(Error::Config(format!("`{o}` is not an occlusion pattern")));
        }
        out.push(p);
    }
    if let Some(s) = a.noise_std {
        let p = EvalPattern::GaussianNoise(s);
        p.check()?;
        out.push(p);
    }
    Ok(out)
}

fn subset_or_all(text: Option<&str>, scenes: &[Scene]) -> Result<Vec<CueKind>> {
    let subset = match cue_list(text)? {
        Some(s) => s,
        None => {
            let mut all: Vec<CueKind> = scenes.iter().flat_map(Scene::cue_kinds).collect();
            all.sort();
            all.dedup();
            all
        }
    };
    if !subset.contains(&CueKind::Trajectory) {
        return Err(Error::Config("cue subset must include T".into()));
    }
    check_subset(scenes, &subset)?;
    Ok(subset)
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let scenes = read_data(&a.data)?;
    let subset = subset_or_all(a.cues.as_deref(), &scenes)?;
    let patterns = eval_patterns(a)?;
    let report = evaluate(&model, &scenes, &subset, &patterns, a.seed)?;
    let reference = (!patterns.is_empty())
        .then(|| evaluate(&model, &scenes, &subset, &[], a.seed))
        .transpose()?;
    let cue_text: Vec<&str> = subset.iter().map(|c| c.as_str()).collect();
    let label = format!("cues {}", cue_text.join(","));
    print!("{}", report.summary_table(&label, reference.as_ref()));
    if let Some(out) = &a.out {
        create_dir(out)?;
        write(&out.join("report.csv"), &report.to_csv())?;
        let doc = serde_json::json!({
            "model": a.model,
            "data": a.data.data,
            "cues": cue_text,
            "patterns": patterns.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "seed": a.seed,
            "ade": report.ade,
            "fde": report.fde,
            "aswaee": report.aswaee,
            "reference": reference.as_ref().map(|r| serde_json::json!({"ade": r.ade, "fde": r.fde, "aswaee": r.aswaee})),
            "degradation_pct": reference.as_ref().map(|r| report.degradation(r)),
        });
        let text = serde_json::to_string_pretty(&doc).expect("report serializes");
        write(&out.join("report.json"), &text)?;
    }
    Ok(())
}

fn predict_cmd(a: &PredictArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let scenes = read_data(&a.data)?;
    let subset = subset_or_all(a.cues.as_deref(), &scenes)?;
    let svg_dir = a.out.join("svg");
    create_dir(&svg_dir)?;
    let mut lines = String::new();
    for scene in scenes.iter().take(a.limit) {
        let view = crate::masking::restrict_cues(scene, &subset)?;
        let pred = model.predict(&view)?;
        let row = serde_json::json!({"id": scene.id, "positions": pred.positions});
        lines.push_str(&row.to_string());
        lines.push('\n');
        let name: String = scene.id.chars().map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' }).collect();
        write(&svg_dir.join(format!("{name}.svg")), &trajectory_svg(scene, Some(&pred)))?;
    }
    write(&a.out.join("predictions.jsonl"), &lines)?;
    println!("wrote {} predictions to {}", scenes.len().min(a.limit), a.out.display());
    Ok(())
}

/// One row of the ablation table.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub final_loss: f64,
    pub report: MetricReport,
}

/// Trains every variant for `steps` optimizer steps and evaluates it on `test`.
pub fn ablate(
    base: &ModelConfig,
    cfg: &TrainConfig,
    steps: usize,
    train_set: &[Scene],
    test: &[Scene],
) -> Result<Vec<AblationRow>> {
    let per_epoch = train_set.len().div_ceil(cfg.batch_size).max(1);
    let tcfg = TrainConfig {
        epochs: steps.div_ceil(per_epoch).max(1),
        max_steps: Some(steps),
        ..cfg.clone()
    };
    let subset = CueKind::ALL.to_vec();
    Variant::ALL
        .iter()
        .map(|&variant| {
            let mut model = Model::new(ModelConfig { variant, ..base.clone() })?;
            let log = train(&mut model, train_set, &[], &tcfg)?;
            let final_loss = log.final_loss().unwrap_or(f64::NAN);
            if !final_loss.is_finite() {
                return Err(Error::NonFiniteLoss { loss: final_loss, epoch: log.epochs.len(), batch: 0, lr: tcfg.lr });
            }
            let report = evaluate(&model, test, &subset, &[], cfg.seed)?;
            Ok(AblationRow { variant, final_loss, report })
        })
        .collect()
}

pub fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = format!("{:<8} {:>10} {:>8} {:>8} {:>8}\n", "variant", "train_loss", "ADE", "FDE", "ASWAEE");
    for r in rows {
        s.push_str(&format!(
            "{:<8} {:>10.4} {:>8.4} {:>8.4} {:>8.4}\n",
            r.variant.name(),
            r.final_loss,
            r.report.ade,
            r.report.fde,
            r.report.aswaee
        ));
    }
    s
}

fn ablate_cmd(a: &AblateArgs, file: &Table) -> Result<()> {
    let train_set = read_split(&a.data, "train")?;
    let test = read_split(&a.data, "test")?;
    let mcfg = model_config(&a.model, file, &train_set)?;
    let tcfg = train_config(&a.train, file)?;
    let rows = ablate(&mcfg, &tcfg, a.steps, &train_set, &test)?;
    let table = ablation_table(&rows);
    print!("{table}");
    create_dir(&a.out)?;
    let mut csv = String::from("variant,train_loss,ade,fde,aswaee\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.variant.name(),
            r.final_loss,
            r.report.ade,
            r.report.fde,
            r.report.aswaee
        ));
    }
    write(&a.out.join("ablation.csv"), &csv)?;
    write(&a.out.join("ablation.txt"), &table)?;
    write(&a.out.join("model.toml"), &mcfg.to_toml())?;
    write(&a.out.join("train.toml"), &tcfg.to_toml())
}

fn attention_cmd(a: &AttentionArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let scenes = read_data(&a.data)?;
    let rows = if a.all_rows { RowSelection::AllTokens } else { RowSelection::Queries };
    let layout = keypoint_layout(model.config.keypoints)?;
    let mut temporal = Vec::new();
    let mut spatial = Vec::new();
    for scene in scenes.iter().take(a.limit) {
        let (_, capture) = model.forward(scene)?;
        let capture = capture.ok_or_else(|| {
            Error::Contract(format!("variant {} has no cross-modality attention", model.config.variant))
        })?;
        temporal.push((scene.id.clone(), attnviz::temporal_map_with(&capture, rows)?));
        if let Some(m) = attnviz::spatial_map_with(&capture, layout, rows)? {
            spatial.push((scene.id.clone(), m));
        }
    }
    create_dir(&a.out)?;
    let export = |name: &str, title: &str, cols: Vec<String>, mut maps: Vec<(String, Vec<f64>)>| -> Result<()> {
        let values: Vec<Vec<f64>> = maps.iter().map(|(_, m)| m.clone()).collect();
        if let Some(mean) = attnviz::mean_map(&values) {
            println!("{title} (mean over {} scenes): {}", maps.len(), fmt_map(&mean));
            maps.push(("mean".into(), mean));
        }
        write(&a.out.join(format!("{name}.csv")), &attnviz::matrix_csv(&cols, &maps))?;
        let summary: Vec<(String, Vec<f64>)> = maps.iter().rev().take(1).cloned().collect();
        write(&a.out.join(format!("{name}.svg")), &attnviz::heatmap_svg(title, &cols, &summary))?;
        write(&a.out.join(format!("{name}_scenes.svg")), &attnviz::heatmap_svg(title, &cols, &maps))
    };
    let tcols = (0..model.config.t_obs).map(|t| format!("t{t}")).collect();
    export("temporal", "temporal attention", tcols, temporal)?;
    if !spatial.is_empty() {
        let kcols = layout.keypoints.iter().map(|k| k.label.to_string()).collect();
        export("spatial", "spatial attention", kcols, spatial)?;
    } else {
        println!("no pose tokens in the selected scenes; spatial map skipped");
    }
    Ok(())
}

fn fmt_map(m: &[f64]) -> String {
    m.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")
}
