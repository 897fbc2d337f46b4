//! One function per subcommand. Each reads and validates all of its inputs,
//! computes every output in memory, and only then writes files, each one
//! through a temporary file and a rename.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lidal::baselines::{run_baseline, BaselineInputs, Strategy};
use lidal::correspondence::{build_indices, find_all_correspondences};
use lidal::harness::{
    ExternalPredictor, MockPredictorParams, PredictorSource, ProtocolConfig, ProtocolOutcome, ProtocolSetup,
    ProtocolStrategy, SyntheticSceneSpec,
};
use lidal::metrics::{self, ConfusionMatrix, PseudoAccuracy};
use lidal::regions::{decode_sidecar, encode_sidecar, RegionTable, SIDECAR_FILE};
use lidal::registration::register_sequence;
use lidal::scene::io::{
    self, decode_features, decode_labels, decode_mask, encode_labels, encode_mask, encode_scores, frame_stem,
    load_all_probabilities, load_sequence, read_file, write_atomic,
};
use lidal::scene::{ClassId, DatasetState, FrameSequence, RegionKey};
use lidal::selection::{self, RegionScores, SelectionRecord};
use lidal::uncertainty::{score_regions, score_sequence};
use lidal::{Error, Result};

use crate::config::RunConfig;

pub const STATE_FILE: &str = "state.txt";
pub const EFFECTIVE_CONFIG: &str = "config.effective.txt";
pub const PSEUDO_DIR: &str = "pseudo";
pub const ANNOTATION_DIR: &str = "annotations";

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Files queued for writing once every check has passed.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.0.push((path, bytes.into()));
    }

    fn commit(self) -> Result<()> {
        for (path, bytes) in &self.0 {
            write_atomic(path, bytes)?;
        }
        Ok(())
    }
}

pub fn score_path(work: &Path, frame: usize) -> PathBuf {
    work.join("scores").join(format!("{}.score", frame_stem(frame)))
}

pub fn sidecar_path(work: &Path) -> PathBuf {
    work.join("regions").join(SIDECAR_FILE)
}

/// `.label` and mask paths of one frame in a per-frame label layer.
pub fn layer_paths(dir: &Path, frame: usize) -> (PathBuf, PathBuf) {
    let stem = frame_stem(frame);
    (dir.join(format!("{stem}.label")), dir.join(format!("{stem}.mask")))
}

fn echo_config(out: &mut Outputs, dir: &Path, cfg: &RunConfig) {
    out.add(dir.join(EFFECTIVE_CONFIG), cfg.to_text());
}

// ---------------------------------------------------------------- divide

pub fn divide(cfg: &RunConfig) -> Result<()> {
    let root = cfg.require_path("root")?;
    let work = cfg.work_dir()?;
    let seq = load_sequence(&root, &cfg.engine)?;
    let world = register_sequence(&seq);
    let table = RegionTable::divide(&world, &cfg.engine)?;
    let mut out = Outputs::default();
    for (f, fr) in table.frames.iter().enumerate() {
        out.add(io::region_path(&work, f), io::encode_regions(&fr.ids, fr.regions.len()));
    }
    out.add(sidecar_path(&work), encode_sidecar(&table, None));
    echo_config(&mut out, &work, cfg);
    log::info!("divided {} frames into {} regions each", table.frames.len(), cfg.engine.regions_per_frame);
    out.commit()
}

// ---------------------------------------------------------------- score

struct Context {
    root: PathBuf,
    work: PathBuf,
    sequence: FrameSequence,
    table: RegionTable,
}

fn context(cfg: &RunConfig) -> Result<Context> {
    let root = cfg.require_path("root")?;
    let work = cfg.work_dir()?;
    let sequence = load_sequence(&root, &cfg.engine)?;
    let world = register_sequence(&sequence);
    let table = RegionTable::read_region_files(&work, &world)?;
    Ok(Context {
        root,
        work,
        sequence,
        table,
    })
}

pub fn score(cfg: &RunConfig) -> Result<()> {
    let ctx = context(cfg)?;
    let world = register_sequence(&ctx.sequence);
    let fields = load_all_probabilities(&ctx.root, &ctx.sequence, &cfg.engine)?;
    let indices = build_indices(&world);
    let maps = find_all_correspondences(&world, &indices, &cfg.engine);
    let scores = score_sequence(&fields, &maps)?;
    let regions = score_regions(&scores, &ctx.table)?;
    let mut out = Outputs::default();
    for (f, s) in scores.iter().enumerate() {
        out.add(score_path(&ctx.work, f), encode_scores(&s.fd, &s.fe));
    }
    out.add(sidecar_path(&ctx.work), encode_sidecar(&ctx.table, Some(&regions)));
    echo_config(&mut out, &ctx.work, cfg);
    log::info!("scored {} points in {} regions", ctx.sequence.total_points(), regions.len());
    out.commit()
}

/// Region scores from the sidecar, checked against the region table.
fn read_scores(ctx: &Context) -> Result<RegionScores> {
    let path = sidecar_path(&ctx.work);
    let text = String::from_utf8(read_file(&path)?)
        .map_err(|_| Error::Validation(format!("{}: not valid UTF-8", path.display())))?;
    let rows = decode_sidecar(&path, &text)?;
    let mut scores = RegionScores::new();
    for row in rows {
        let Some(info) = ctx.table.get(row.key) else {
            return Err(Error::Structure(format!(
                "{}: region {} is not in the region files",
                path.display(),
                row.key
            )));
        };
        if info.len() != row.count {
            return Err(Error::Structure(format!(
                "{}: region {} lists {} points but its region file has {}",
                path.display(),
                row.key,
                row.count,
                info.len()
            )));
        }
        if let Some(s) = row.scores {
            scores.insert(row.key, s);
        }
    }
    if let Some(key) = ctx.table.keys().find(|k| !scores.contains_key(k)) {
        return Err(Error::Structure(format!(
            "{}: region {key} has no scores; run `score` first",
            path.display()
        )));
    }
    Ok(scores)
}

// ---------------------------------------------------------------- state

fn state_dir(cfg: &RunConfig) -> Result<PathBuf> {
    match cfg.path("state") {
        Some(p) => Ok(p),
        None => Ok(cfg.work_dir()?.join("state")),
    }
}

/// One frame of a label layer; a missing pair of files reads as empty.
fn read_layer(dir: &Path, frame: usize, points: usize) -> Result<(Vec<ClassId>, Vec<bool>)> {
    let (label_path, mask_path) = layer_paths(dir, frame);
    if !label_path.exists() && !mask_path.exists() {
        return Ok((vec![0; points], vec![false; points]));
    }
    let labels = decode_labels(&label_path, &read_file(&label_path)?)?;
    let mask = decode_mask(&mask_path, &read_file(&mask_path)?)?;
    for (path, n) in [(&label_path, labels.len()), (&mask_path, mask.len())] {
        if n != points {
            return Err(Error::Structure(format!(
                "{}: {n} entries for a frame of {points} points",
                path.display()
            )));
        }
    }
    Ok((labels, mask))
}

/// Reads the state of `dir`. Pseudo-labels are taken from the pseudo layer
/// through `table` when given; without a table only their count is checked.
fn read_state(dir: &Path, table: Option<&RegionTable>) -> Result<Option<DatasetState>> {
    let path = dir.join(STATE_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = String::from_utf8(read_file(&path)?)
        .map_err(|_| Error::Validation(format!("{}: not valid UTF-8", path.display())))?;
    let layer_dir = dir.join(PSEUDO_DIR);
    let mut layers: HashMap<u32, (Vec<ClassId>, Vec<bool>)> = HashMap::new();
    let state = DatasetState::from_text(&path, &text, |key, size| {
        let Some(table) = table else {
            return Ok(vec![0; size]);
        };
        let info = table.get(key).ok_or_else(|| {
            Error::Structure(format!("{}: region {key} is not in the region files", path.display()))
        })?;
        if !layers.contains_key(&key.frame) {
            let points = table.frames[key.frame as usize].ids.len();
            layers.insert(key.frame, read_layer(&layer_dir, key.frame as usize, points)?);
        }
        let (labels, mask) = &layers[&key.frame];
        if info.members.iter().any(|&m| !mask[m as usize]) {
            return Err(Error::Structure(format!(
                "{}: pseudo region {key} is not fully covered by the mask",
                layer_dir.display()
            )));
        }
        Ok(info.members.iter().map(|&m| labels[m as usize]).collect())
    })?;
    if let Some(table) = table {
        let sizes: BTreeMap<RegionKey, usize> = state.regions().map(|(k, n)| (*k, *n)).collect();
        if sizes != table.sizes() {
            return Err(Error::Structure(format!(
                "{}: region list disagrees with the region files",
                path.display()
            )));
        }
    }
    state
        .audit()
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    Ok(Some(state))
}

/// Queues `state.txt` and a full rewrite of the pseudo layer.
fn queue_state(out: &mut Outputs, dir: &Path, state: &DatasetState, table: &RegionTable) {
    out.add(dir.join(STATE_FILE), state.to_text());
    let mut layers: Vec<(Vec<ClassId>, Vec<bool>)> = table
        .frames
        .iter()
        .map(|fr| (vec![0; fr.ids.len()], vec![false; fr.ids.len()]))
        .collect();
    for (key, labels) in state.pseudo() {
        let (l, m) = &mut layers[key.frame as usize];
        for (&p, &c) in table.region(*key).members.iter().zip(labels) {
            l[p as usize] = c;
            m[p as usize] = true;
        }
    }
    for (f, (labels, mask)) in layers.iter().enumerate() {
        let (lp, mp) = layer_paths(&dir.join(PSEUDO_DIR), f);
        out.add(lp, encode_labels(labels));
        out.add(mp, encode_mask(mask));
    }
}

/// Merges annotated regions into the annotation layer.
fn queue_annotations(
    out: &mut Outputs,
    dir: &Path,
    table: &RegionTable,
    annotations: &BTreeMap<RegionKey, Vec<ClassId>>,
) -> Result<()> {
    let layer_dir = dir.join(ANNOTATION_DIR);
    let mut frames: BTreeMap<u32, Vec<(RegionKey, &Vec<ClassId>)>> = BTreeMap::new();
    for (key, labels) in annotations {
        frames.entry(key.frame).or_default().push((*key, labels));
    }
    for (f, regions) in frames {
        let points = table.frames[f as usize].ids.len();
        let (mut labels, mut mask) = read_layer(&layer_dir, f as usize, points)?;
        for (key, values) in regions {
            for (&p, &c) in table.region(key).members.iter().zip(values) {
                labels[p as usize] = c;
                mask[p as usize] = true;
            }
        }
        let (lp, mp) = layer_paths(&layer_dir, f as usize);
        out.add(lp, encode_labels(&labels));
        out.add(mp, encode_mask(&mask));
    }
    Ok(())
}

/// Loads the state, or draws the initial labeled set when none exists yet.
fn load_or_init(
    ctx: &Context,
    dir: &Path,
    cfg: &RunConfig,
    oracle: bool,
    out: &mut Outputs,
) -> Result<DatasetState> {
    if let Some(state) = read_state(dir, Some(&ctx.table))? {
        return Ok(state);
    }
    let state = DatasetState::init(ctx.table.sizes(), &cfg.engine, cfg.engine.seed)?;
    log::info!(
        "initialized {} with {:.4} of points labeled",
        dir.join(STATE_FILE).display(),
        state.labeled_fraction()
    );
    if oracle {
        let initial = state
            .labeled()
            .iter()
            .map(|&k| Ok((k, metrics::region_labels(&ctx.sequence, &ctx.table, k)?)))
            .collect::<Result<BTreeMap<_, _>>>()
            .map_err(|e| {
                Error::Validation(format!("{e}; supply labels/ or pass --no-oracle"))
            })?;
        queue_annotations(out, dir, &ctx.table, &initial)?;
    }
    Ok(state)
}

/// Applies a selection to the state, reading ground truth unless `oracle` is off.
fn annotate(
    ctx: &Context,
    dir: &Path,
    record: &SelectionRecord,
    state: &mut DatasetState,
    oracle: bool,
    out: &mut Outputs,
) -> Result<()> {
    if oracle {
        let labels = selection::simulate_annotation(record, &ctx.sequence, &ctx.table, state)?;
        queue_annotations(out, dir, &ctx.table, &labels)
    } else {
        selection::apply_annotation(record, state);
        Ok(())
    }
}

fn round(cfg: &RunConfig) -> Result<usize> {
    cfg.number("round", 1)
}

// ---------------------------------------------------------------- selection

pub fn select_active(cfg: &RunConfig, oracle: bool) -> Result<()> {
    let ctx = context(cfg)?;
    let scores = read_scores(&ctx)?;
    let dir = state_dir(cfg)?;
    let round = round(cfg)?;
    let mut out = Outputs::default();
    let mut state = load_or_init(&ctx, &dir, cfg, oracle, &mut out)?;
    let record = selection::select_active(&state, &scores, &ctx.table, &cfg.engine, round)?;
    annotate(&ctx, &dir, &record, &mut state, oracle, &mut out)?;
    state.audit()?;
    out.add(dir.join(format!("active_round_{round}.txt")), record.to_text());
    queue_state(&mut out, &dir, &state, &ctx.table);
    echo_config(&mut out, &ctx.work, cfg);
    log::info!(
        "round {round}: {} regions selected, labeled fraction {:.4}",
        record.picks.len(),
        state.labeled_fraction()
    );
    if record.shortfall {
        log::warn!("round {round}: candidates ran out before the budget was reached");
    }
    out.commit()
}

pub fn accuracy_text(acc: &PseudoAccuracy) -> String {
    let fmt = |t: &metrics::Tally| t.accuracy().map_or("nan".to_string(), |a| a.to_string());
    let mut text = format!("overall {} {} {}\n", acc.overall.correct, acc.overall.total, fmt(&acc.overall));
    for (band, t) in &acc.bands {
        let _ = writeln!(text, "band {band} {} {} {}", t.correct, t.total, fmt(t));
    }
    text
}

pub fn select_pseudo(cfg: &RunConfig) -> Result<()> {
    let ctx = context(cfg)?;
    let scores = read_scores(&ctx)?;
    let dir = state_dir(cfg)?;
    let round = round(cfg)?;
    let mut state = read_state(&dir, Some(&ctx.table))?.ok_or_else(|| {
        Error::Config(format!(
            "{} does not exist; run select-active first",
            dir.join(STATE_FILE).display()
        ))
    })?;
    let fields = load_all_probabilities(&ctx.root, &ctx.sequence, &cfg.engine)?;
    let (record, labels) = selection::select_pseudo(&state, &scores, &ctx.table, &fields, &cfg.engine, round)?;
    let mut out = Outputs::default();
    if ctx.sequence.has_labels() {
        let truth = |key| metrics::region_labels(&ctx.sequence, &ctx.table, key);
        let acc = metrics::pseudo_accuracy(&record, &labels, truth)?;
        out.add(dir.join(format!("pseudo_accuracy_round_{round}.txt")), accuracy_text(&acc));
    }
    selection::apply_pseudo(&mut state, labels, cfg.engine.pseudo_strategy)?;
    state.audit()?;
    out.add(dir.join(format!("pseudo_round_{round}.txt")), record.to_text());
    queue_state(&mut out, &dir, &state, &ctx.table);
    echo_config(&mut out, &ctx.work, cfg);
    log::info!("round {round}: {} regions pseudo-labeled", record.picks.len());
    out.commit()
}

/// Per-round seed of the random baselines.
pub fn baseline_seed(seed: u64, round: usize) -> u64 {
    seed ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn baseline(cfg: &RunConfig, oracle: bool) -> Result<()> {
    let strategy: Strategy = cfg
        .get("strategy")
        .ok_or_else(|| Error::Config("missing required setting 'strategy' (use --strategy)".into()))?
        .parse()?;
    let ctx = context(cfg)?;
    let dir = state_dir(cfg)?;
    let round = round(cfg)?;
    let fields = match strategy {
        Strategy::SegmentEntropy | Strategy::Margin | Strategy::Confidence | Strategy::Entropy => {
            Some(load_all_probabilities(&ctx.root, &ctx.sequence, &cfg.engine)?)
        }
        _ => None,
    };
    let features = match strategy {
        Strategy::Coreset => {
            let path = cfg.require_path("features")?;
            Some(decode_features(&path, &read_file(&path)?)?)
        }
        _ => None,
    };
    let mut out = Outputs::default();
    let mut state = load_or_init(&ctx, &dir, cfg, oracle, &mut out)?;
    let inputs = BaselineInputs {
        fields: fields.as_deref(),
        table: Some(&ctx.table),
        features: features.as_ref(),
    };
    let seed = baseline_seed(cfg.engine.seed, round);
    let record = run_baseline(strategy, &state, inputs, &cfg.engine, seed, round)?;
    annotate(&ctx, &dir, &record, &mut state, oracle, &mut out)?;
    state.audit()?;
    out.add(dir.join(format!("{}_round_{round}.txt", strategy.name())), record.to_text());
    queue_state(&mut out, &dir, &state, &ctx.table);
    echo_config(&mut out, &ctx.work, cfg);
    log::info!("{strategy} round {round}: {} regions selected", record.picks.len());
    out.commit()
}

// ---------------------------------------------------------------- miou

fn label_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "label"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn miou(cfg: &RunConfig) -> Result<()> {
    let pred_dir = cfg.require_path("pred")?;
    let gt_dir = cfg.require_path("gt")?;
    let out_dir = cfg.require_path("out")?;
    let ignore = match cfg.get("ignore").unwrap_or("0") {
        "none" => None,
        v => Some(
            v.parse::<ClassId>()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for key 'ignore'")))?,
        ),
    };
    let gt_files = label_files(&gt_dir)?;
    if gt_files.is_empty() {
        return Err(Error::Structure(format!("no .label files in {}", gt_dir.display())));
    }
    let mut cm = ConfusionMatrix::new(cfg.engine.class_count, ignore);
    for gt_path in &gt_files {
        let pred_path = pred_dir.join(gt_path.file_name().unwrap_or_default());
        let gt = decode_labels(gt_path, &read_file(gt_path)?)?;
        let pred = decode_labels(&pred_path, &read_file(&pred_path)?)?;
        cm.accumulate(&gt, &pred).map_err(|e| {
            Error::Validation(format!("{} vs {}: {e}", pred_path.display(), gt_path.display()))
        })?;
    }
    let report = cm.miou();
    let mut out = Outputs::default();
    out.add(out_dir.join("miou.txt"), report.to_text());
    out.add(out_dir.join("miou.csv"), report.to_csv());
    echo_config(&mut out, &out_dir, cfg);
    out.commit()
}

// ---------------------------------------------------------------- simulate

pub const DEFAULT_STRATEGIES: &str = "lidal,rand_re,none";

/// The harness configuration described by `cfg`.
pub fn protocol_config(cfg: &RunConfig, out_dir: &Path) -> Result<ProtocolConfig> {
    let engine = cfg.engine.clone();
    let frames = cfg.number("frames", 5)?;
    let points = cfg.number("points", 2000)?;
    let scene = SyntheticSceneSpec::random_layout(frames, points, engine.class_count, engine.seed);
    let predictor = match cfg.path("predictor") {
        Some(command) => PredictorSource::External(ExternalPredictor {
            command,
            train_root: out_dir.join("scene"),
            validation_root: out_dir.join("validation"),
        }),
        None => {
            let d = MockPredictorParams::default();
            PredictorSource::Mock(MockPredictorParams {
                alpha: cfg.number("alpha", d.alpha)?,
                beta: cfg.number("beta", d.beta)?,
                gamma: cfg.number("gamma", d.gamma)?,
                sigma: cfg.number("sigma", d.sigma)?,
                patch_size: cfg.number("patch_size", d.patch_size)?,
                runs: engine.augmented_runs,
                seed: engine.seed,
            })
        }
    };
    let config = ProtocolConfig {
        engine,
        scene,
        predictor,
    };
    config.validate()?;
    Ok(config)
}

pub fn summary_text(outcomes: &[ProtocolOutcome]) -> String {
    let mut text = String::from("strategy");
    let rounds = outcomes.first().map_or(0, |o| o.curve.len());
    for r in 0..rounds {
        let _ = write!(text, " round_{r}");
    }
    text.push('\n');
    for o in outcomes {
        text.push_str(&o.strategy.name());
        for v in &o.curve {
            let _ = write!(text, " {v}");
        }
        text.push('\n');
    }
    text
}

pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let out_dir = cfg.require_path("out")?;
    let strategies = cfg
        .get("strategy")
        .unwrap_or(DEFAULT_STRATEGIES)
        .split(',')
        .map(|s| s.trim().parse::<ProtocolStrategy>())
        .collect::<Result<Vec<_>>>()?;
    let config = protocol_config(cfg, &out_dir)?;
    let setup = ProtocolSetup::prepare(&config)?;
    setup.scene.write(&out_dir.join("scene"))?;
    setup.validation.write(&out_dir.join("validation"))?;
    setup.table.write_region_files(&out_dir.join("scene"))?;
    setup.write_training_dumps(&out_dir.join("scene"), &setup.initial_state()?)?;
    let outcomes = strategies
        .iter()
        .map(|s| setup.run(*s))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::default();
    for o in &outcomes {
        let dir = out_dir.join(o.strategy.name());
        out.add(dir.join("curve.txt"), o.curve_text());
        out.add(dir.join("records.txt"), o.records_text());
        let mut acc = String::new();
        for r in &o.rounds {
            if let Some(p) = &r.pseudo {
                let _ = writeln!(acc, "round {} prediction_accuracy {}", r.round, r.prediction_accuracy);
                acc.push_str(&accuracy_text(&p.accuracy));
            }
        }
        if !acc.is_empty() {
            out.add(dir.join("pseudo_accuracy.txt"), acc);
        }
    }
    out.add(out_dir.join("summary.txt"), summary_text(&outcomes));
    echo_config(&mut out, &out_dir, cfg);
    out.commit()
}

// ---------------------------------------------------------------- audit

pub fn audit(cfg: &RunConfig) -> Result<()> {
    let dir = state_dir(cfg)?;
    let table = match cfg.path("root") {
        Some(root) => {
            let seq = load_sequence(&root, &cfg.engine)?;
            let world = register_sequence(&seq);
            Some(RegionTable::read_region_files(&cfg.work_dir()?, &world)?)
        }
        None => None,
    };
    let state = read_state(&dir, table.as_ref())?.ok_or_else(|| {
        Error::Io {
            path: dir.join(STATE_FILE),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        }
    })?;
    if table.is_none() {
        check_pseudo_masks(&dir, &state)?;
    }
    log::info!(
        "{}: {} regions, {} labeled, {} pseudo; consistent",
        dir.join(STATE_FILE).display(),
        state.regions().count(),
        state.labeled().len(),
        state.pseudo().len()
    );
    Ok(())
}

/// Without region files, checks that each frame's pseudo mask covers exactly
/// as many points as its pseudo regions.
fn check_pseudo_masks(dir: &Path, state: &DatasetState) -> Result<()> {
    let mut expected: BTreeMap<u32, usize> = BTreeMap::new();
    for key in state.pseudo().keys() {
        *expected.entry(key.frame).or_default() += state.region_size(*key);
    }
    for frame in state.frames() {
        let (_, mask_path) = layer_paths(&dir.join(PSEUDO_DIR), frame as usize);
        let want = expected.get(&frame).copied().unwrap_or(0);
        let got = if mask_path.exists() {
            decode_mask(&mask_path, &read_file(&mask_path)?)?
                .iter()
                .filter(|&&m| m)
                .count()
        } else {
            0
        };
        if got != want {
            return Err(Error::Validation(format!(
                "{}: mask covers {got} points but frame {frame} has {want} pseudo-labeled points",
                mask_path.display()
            )));
        }
    }
    Ok(())
}
