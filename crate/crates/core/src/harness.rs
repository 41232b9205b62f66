//! Command implementations behind the `noughts` binary: flat `key=value`
//! configuration, training, evaluation, the glyph study and terminal play.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::drl::{curve_csv, evaluate, train_policy, AgentConfig, Algorithm, EvalReport, Policy, TrainError};
use crate::env::DialogueKit;
use crate::game::{render_board, CellId, Player, Variant};
use crate::nn::NnError;
use crate::perception::{
    generate_glyphs, glyph_study, write_dataset, ClassifierConfig, ClassifierError, GlyphDatasetSpec, GlyphStudyReport,
    ObserverConfig,
};
use crate::play::{HumanGame, PlayError, PlayStatus};
use crate::seed;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl HarnessError {
    /// Process exit code: 2 for usage errors, 3 for data and model errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Data(_) => 3,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for HarnessError {
            fn from(e: $t) -> Self {
                HarnessError::Data(e.to_string())
            }
        })*
    };
}

data_error!(io::Error, NnError, TrainError, ClassifierError, PlayError, serde_json::Error);

/// Every tunable parameter, settable as `key=value`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub variant: Variant,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub agent: AgentConfig,
    /// Evaluation games.
    pub games: u64,
    pub glyphs: GlyphDatasetSpec,
    pub classifier: ClassifierConfig,
    pub observer: ObserverConfig,
    pub pause_ms: u64,
    pub model: Option<PathBuf>,
    pub port: u16,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: Variant::Standard,
            seed: 0,
            output_dir: PathBuf::from("runs"),
            agent: AgentConfig::default(),
            games: 3000,
            glyphs: GlyphDatasetSpec::default(),
            classifier: ClassifierConfig::default(),
            observer: ObserverConfig::default(),
            pause_ms: 0,
            model: None,
            port: 8080,
        }
    }
}

/// Keys and their meaning, in `--help` order.
pub const CONFIG_KEYS: &[(&str, &str)] = &[
    ("algorithm", "dqn_original | dqn_variant | competitive_no_temporal | competitive_temporal"),
    ("variant", "standard | ultimate"),
    ("seed", "root seed for every random stream"),
    ("output_dir", "directory for models, curves, reports"),
    ("model", "model file for evaluate, play and serve"),
    ("port", "HTTP port for serve"),
    ("learning_steps", "training steps"),
    ("max_games", "training stops after this many games"),
    ("gamma", "discount factor"),
    ("burn_in", "steps before learning starts"),
    ("batch_size", "experiences per update"),
    ("min_epsilon", "final exploration rate"),
    ("epsilon_decay_fraction", "share of the steps over which epsilon decays"),
    ("hidden_width", "units in each hidden layer"),
    ("target_reset", "steps between target network copies"),
    ("learning_rate", "SGD step size"),
    ("grad_clip", "global gradient-norm clip"),
    ("replay_capacity", "replay memory size"),
    ("curve_every", "steps between learning-curve rows"),
    ("games", "evaluation games"),
    ("glyphs.clean", "clean glyph images"),
    ("glyphs.noisy", "noisy glyph images"),
    ("classifier.lr", "classifier learning rate"),
    ("classifier.max_epochs", "classifier epoch limit"),
    ("perception.noise_level", "board rendering disturbance, 0 = clean"),
    ("perception.occluded_frames", "hand-occluded frames per user move"),
    ("perception.stable_frames", "stable frames offered per user move"),
    ("perception.sensor_sigma", "camera noise standard deviation"),
    ("perception.tau", "occlusion threshold, auto = 0.04 x sqrt(pixels)"),
    ("perception.pause_ms", "pause between frames (recorded only)"),
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .parse()
        .map_err(|_| HarnessError::Usage(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let v = value.trim();
        let a = &mut self.agent;
        match key.trim() {
            "algorithm" => {
                a.algorithm = v
                    .parse::<Algorithm>()
                    .map_err(|e| HarnessError::Usage(format!("algorithm: {e}")))?
            }
            "variant" => self.variant = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "model" => self.model = Some(PathBuf::from(v)),
            "port" => self.port = parse(key, v)?,
            "learning_steps" | "steps" => a.learning_steps = parse(key, v)?,
            "max_games" => a.max_games = parse(key, v)?,
            "gamma" => a.gamma = parse(key, v)?,
            "burn_in" => a.burn_in = parse(key, v)?,
            "batch_size" => a.batch_size = parse(key, v)?,
            "min_epsilon" => a.min_epsilon = parse(key, v)?,
            "epsilon_decay_fraction" => a.epsilon_decay_fraction = parse(key, v)?,
            "hidden_width" => a.hidden_width = parse(key, v)?,
            "target_reset" => a.target_reset = parse(key, v)?,
            "learning_rate" => a.learning_rate = parse(key, v)?,
            "grad_clip" => a.grad_clip = parse(key, v)?,
            "replay_capacity" => a.replay_capacity = parse(key, v)?,
            "curve_every" => a.curve_every = parse(key, v)?,
            "games" => self.games = parse(key, v)?,
            "glyphs.clean" => self.glyphs.clean = parse(key, v)?,
            "glyphs.noisy" => self.glyphs.noisy = parse(key, v)?,
            "classifier.lr" => self.classifier.lr = parse(key, v)?,
            "classifier.max_epochs" => self.classifier.max_epochs = parse(key, v)?,
            "perception.noise_level" => self.observer.noise_level = parse(key, v)?,
            "perception.occluded_frames" => self.observer.occluded_frames = parse(key, v)?,
            "perception.stable_frames" => self.observer.stable_frames = parse(key, v)?,
            "perception.sensor_sigma" => self.observer.sensor_sigma = parse(key, v)?,
            "perception.tau" => self.observer.tau = if v == "auto" { None } else { Some(parse(key, v)?) },
            "perception.pause_ms" => self.pause_ms = parse(key, v)?,
            other => return Err(HarnessError::Usage(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Usage(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Defaults, then the `--config` file if any, then the `key=value`
    /// arguments in order.
    pub fn from_args<S: AsRef<str>>(args: &[S]) -> Result<Self, HarnessError> {
        let mut config = RunConfig::default();
        let mut pairs = Vec::new();
        let mut it = args.iter().map(AsRef::as_ref);
        while let Some(a) = it.next() {
            if a == "--config" {
                let path = it.next().ok_or_else(|| HarnessError::Usage("--config needs a file".into()))?;
                let text = fs::read_to_string(path)
                    .map_err(|e| HarnessError::Usage(format!("cannot read config {path}: {e}")))?;
                config.apply_text(&text)?;
            } else if let Some(path) = a.strip_prefix("--config=") {
                let text = fs::read_to_string(path)
                    .map_err(|e| HarnessError::Usage(format!("cannot read config {path}: {e}")))?;
                config.apply_text(&text)?;
            } else {
                let (k, v) = a
                    .split_once('=')
                    .ok_or_else(|| HarnessError::Usage(format!("expected key=value, found {a:?}")))?;
                pairs.push((k, v));
            }
        }
        for (k, v) in pairs {
            config.set(k, v)?;
        }
        config.sync_seeds();
        Ok(config)
    }

    /// Propagates the root seed to the components.
    pub fn sync_seeds(&mut self) {
        self.agent.seed = self.seed;
        self.glyphs.seed = self.seed;
        self.classifier.seed = self.seed;
    }

    /// Current values of every key.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let a = &self.agent;
        let o = &self.observer;
        let values: Vec<(&str, String)> = vec![
            ("algorithm", a.algorithm.name().into()),
            ("variant", self.variant.name().into()),
            ("seed", self.seed.to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("model", self.model.as_ref().map_or(String::new(), |p| p.display().to_string())),
            ("port", self.port.to_string()),
            ("learning_steps", a.learning_steps.to_string()),
            ("max_games", a.max_games.to_string()),
            ("gamma", a.gamma.to_string()),
            ("burn_in", a.burn_in.to_string()),
            ("batch_size", a.batch_size.to_string()),
            ("min_epsilon", a.min_epsilon.to_string()),
            ("epsilon_decay_fraction", a.epsilon_decay_fraction.to_string()),
            ("hidden_width", a.hidden_width.to_string()),
            ("target_reset", a.target_reset.to_string()),
            ("learning_rate", a.learning_rate.to_string()),
            ("grad_clip", a.grad_clip.to_string()),
            ("replay_capacity", a.replay_capacity.to_string()),
            ("curve_every", a.curve_every.to_string()),
            ("games", self.games.to_string()),
            ("glyphs.clean", self.glyphs.clean.to_string()),
            ("glyphs.noisy", self.glyphs.noisy.to_string()),
            ("classifier.lr", self.classifier.lr.to_string()),
            ("classifier.max_epochs", self.classifier.max_epochs.to_string()),
            ("perception.noise_level", o.noise_level.to_string()),
            ("perception.occluded_frames", o.occluded_frames.to_string()),
            ("perception.stable_frames", o.stable_frames.to_string()),
            ("perception.sensor_sigma", o.sensor_sigma.to_string()),
            ("perception.tau", o.tau.map_or("auto".into(), |t| t.to_string())),
            ("perception.pause_ms", self.pause_ms.to_string()),
        ];
        values.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Key listing with defaults for `--help`.
    pub fn help() -> String {
        let defaults = RunConfig::default().to_pairs();
        let mut s = String::new();
        for (k, what) in CONFIG_KEYS {
            let d = &defaults[*k];
            let _ = writeln!(s, "  {k:<28} {what} [default: {}]", if d.is_empty() { "none" } else { d });
        }
        s
    }

    fn model_path(&self) -> Result<&Path, HarnessError> {
        self.model
            .as_deref()
            .ok_or_else(|| HarnessError::Usage("model=<path> is required".into()))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    command: &'a str,
    crate_version: &'a str,
    config: BTreeMap<String, String>,
    /// SHA-256 of each written file.
    files: BTreeMap<String, String>,
    /// SHA-256 over the sorted file hashes.
    content_hash: String,
    #[serde(flatten)]
    extra: serde_json::Value,
}

/// Writes `files` into `dir` plus `run.json` describing them.
fn write_run(
    dir: &Path,
    command: &str,
    config: &RunConfig,
    files: &[(&str, Vec<u8>)],
    extra: serde_json::Value,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let mut hashes = BTreeMap::new();
    for (name, bytes) in files {
        fs::write(dir.join(name), bytes)?;
        hashes.insert(name.to_string(), sha256_hex(bytes));
    }
    let joined: String = hashes.iter().map(|(k, v)| format!("{k}:{v}\n")).collect();
    let meta = RunMetadata {
        command,
        crate_version: env!("CARGO_PKG_VERSION"),
        config: config.to_pairs(),
        files: hashes,
        content_hash: sha256_hex(joined.as_bytes()),
        extra,
    };
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model: PathBuf,
    pub curve_rows: usize,
    pub steps: u64,
    pub games: u64,
    pub seconds: f64,
}

/// Trains the configured agent and writes `model.ncx`, `features.manifest`,
/// `curve.csv` and `run.json` to the output directory.
pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary, HarnessError> {
    config.agent.validate().map_err(|e| HarnessError::Usage(e.to_string()))?;
    let start = Instant::now();
    let kit = DialogueKit::builtin(config.variant);
    let (policy, out) = train_policy(&config.agent, kit)?;
    let seconds = start.elapsed().as_secs_f64();

    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let model = dir.join("model.ncx");
    policy.save(&model)?;
    let model_bytes = fs::read(&model)?;
    let files = [
        ("model.ncx", model_bytes),
        ("features.manifest", policy.featurizer.index().to_manifest().into_bytes()),
        ("curve.csv", curve_csv(&out.curve).into_bytes()),
    ];
    let extra = serde_json::json!({ "steps": out.steps, "games": out.games, "seconds": seconds });
    write_run(dir, "train", config, &files, extra)?;
    Ok(TrainSummary {
        model,
        curve_rows: out.curve.len(),
        steps: out.steps,
        games: out.games,
        seconds,
    })
}

/// Loads a saved policy for the variant recorded in the model.
pub fn load_policy(path: &Path) -> Result<Policy, HarnessError> {
    let variant = Policy::saved_variant(path)?;
    Ok(Policy::load(path, DialogueKit::builtin(variant))?)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalRow {
    pub model: String,
    pub algorithm: String,
    pub variant: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

/// Evaluates each model over `config.games` greedy games. Every model sees
/// the same simulated-user streams.
pub fn cmd_evaluate(config: &RunConfig, models: &[PathBuf]) -> Result<Vec<EvalRow>, HarnessError> {
    if models.is_empty() {
        return Err(HarnessError::Usage("no model given".into()));
    }
    if config.games == 0 {
        return Err(HarnessError::Usage("games must be positive".into()));
    }
    let eval_seed = seed::derive(config.seed, "eval");
    models
        .iter()
        .map(|path| {
            let policy = load_policy(path)?;
            let report = evaluate(&policy, config.games, eval_seed)?;
            Ok(EvalRow {
                model: path.display().to_string(),
                algorithm: policy.algorithm.name().to_string(),
                variant: policy.variant().name().to_string(),
                report,
            })
        })
        .collect()
}

pub fn eval_table(rows: &[EvalRow]) -> String {
    let mut s = format!(
        "{:<26} {:<9} {:>8} {:>8} {:>8} {:>6} {:>6} {:>6} {:>6}\n",
        "agent", "variant", "reward", "success", "length", "win", "draw", "loss", "games"
    );
    for r in rows {
        let e = &r.report;
        let _ = writeln!(
            s,
            "{:<26} {:<9} {:>8.4} {:>8.4} {:>8.2} {:>6.3} {:>6.3} {:>6.3} {:>6}",
            r.algorithm, r.variant, e.avg_reward, e.task_success, e.avg_dialogue_length, e.win_rate, e.draw_rate, e.loss_rate, e.games
        );
    }
    s
}

/// Generates the glyph sets, runs the study and writes the images and
/// `glyph_study.json` to the output directory.
pub fn cmd_glyph_study(config: &RunConfig) -> Result<GlyphStudyReport, HarnessError> {
    let dataset = generate_glyphs(&config.glyphs);
    let report = glyph_study(&dataset, &config.classifier)?;
    let dir = &config.output_dir;
    write_dataset(&dir.join("glyphs"), &dataset)?;
    let json = serde_json::to_vec_pretty(&report)?;
    let extra = serde_json::json!({ "loo_accuracy": report.loo_clean.accuracy() });
    write_run(dir, "glyph-study", config, &[("glyph_study.json", json)], extra)?;
    Ok(report)
}

pub fn glyph_study_text(r: &GlyphStudyReport) -> String {
    let mut s = format!("leave-one-out on the clean set\n{}\n\n", r.loo_clean);
    match (&r.clean_to_noisy, &r.noisy_to_clean) {
        (Some(cn), Some(nc)) => {
            let _ = write!(s, "trained on clean, tested on noisy\n{cn}\n\ntrained on noisy, tested on clean\n{nc}\n");
        }
        _ => s.push_str("cross-noise transfer: absent (no noisy images)\n"),
    }
    let _ = writeln!(s, "{:.1} s", r.seconds);
    s
}

fn describe_turn(game: &HumanGame) -> String {
    let state = game.state().game();
    let mut s = render_board(state);
    if game.variant() == Variant::Ultimate {
        match state.active_subgrid() {
            Some(g) => {
                let _ = writeln!(s, "play in subgrid {} (row {}, column {})", g + 1, g / 3 + 1, g % 3 + 1);
            }
            None => s.push_str("play in any open subgrid\n"),
        }
    }
    s
}

/// Terminal game against a saved agent. Moves are read from `input` by
/// cell name or index; bad entries are re-prompted. The transcript is
/// written to `transcript.jsonl` in the output directory.
pub fn cmd_play(
    config: &RunConfig,
    human: Player,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<PlayStatus, HarnessError> {
    let policy = Arc::new(load_policy(config.model_path()?)?);
    let mut game = HumanGame::new(policy, human, true)?;
    let mut shown = 0;
    let mut line = String::new();
    loop {
        for e in &game.transcript()[shown..] {
            if !e.text.is_empty() || e.actor == crate::play::Actor::Agent {
                writeln!(output, "{:?}: {} [{}]", e.actor, e.text, e.act)?;
            }
        }
        shown = game.transcript().len();
        if !game.awaiting_human_move() {
            break;
        }
        write!(output, "{}you are {}; your move: ", describe_turn(&game), human.symbol())?;
        output.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(HarnessError::Data("input ended before the game finished".into()));
        }
        let cell = match CellId::parse(game.variant(), &line) {
            Ok(c) => c,
            Err(e) => {
                writeln!(output, "{e}; try again")?;
                continue;
            }
        };
        match game.human_move(cell) {
            Ok(_) => {}
            Err(PlayError::Illegal(c)) => writeln!(output, "{c} is not a legal move; try again")?,
            Err(e) => return Err(e.into()),
        }
    }
    write!(output, "{}", render_board(game.state().game()))?;
    writeln!(output, "result for the agent: {:?}", game.status())?;
    fs::create_dir_all(&config.output_dir)?;
    let mut log = String::new();
    for e in game.transcript() {
        log.push_str(&serde_json::to_string(e)?);
        log.push('\n');
    }
    fs::write(config.output_dir.join("transcript.jsonl"), log)?;
    Ok(game.status())
}
