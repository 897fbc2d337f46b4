//! The multi-round closed loop: predict, score, select, annotate, and
//! evaluate on a held-out scene.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::predictor::{self, MockPredictorParams};
use super::scene::{generate_scene, Scene, SyntheticSceneSpec};
use crate::baselines::{run_baseline, BaselineInputs, Strategy};
use crate::config::{EngineConfig, SelectionOrder};
use crate::correspondence::{build_indices, find_all_correspondences, CorrespondenceMap};
use crate::error::{Error, Result};
use crate::metrics::{self, ConfusionMatrix, PseudoAccuracy};
use crate::regions::RegionTable;
use crate::registration::register_sequence;
use crate::scene::io::{load_all_probabilities, write_atomic};
use crate::scene::{DatasetState, ProbabilityField};
use crate::selection::{self, RegionScores, SelectionRecord};
use crate::uncertainty::{score_regions, score_sequence, FrameScores};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolStrategy {
    Lidal(SelectionOrder),
    /// No labels beyond the initial set.
    NoActive,
    Baseline(Strategy),
}

impl ProtocolStrategy {
    pub fn name(&self) -> String {
        match self {
            ProtocolStrategy::Lidal(SelectionOrder::DivergenceThenEntropy) => "lidal".into(),
            ProtocolStrategy::Lidal(SelectionOrder::EntropyThenDivergence) => "lidal_fe_fd".into(),
            ProtocolStrategy::NoActive => "none".into(),
            ProtocolStrategy::Baseline(s) => s.name().into(),
        }
    }
}

impl fmt::Display for ProtocolStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ProtocolStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lidal" | "lidal_fd_fe" => Ok(ProtocolStrategy::Lidal(SelectionOrder::DivergenceThenEntropy)),
            "lidal_fe_fd" => Ok(ProtocolStrategy::Lidal(SelectionOrder::EntropyThenDivergence)),
            "none" => Ok(ProtocolStrategy::NoActive),
            other => other.parse().map(ProtocolStrategy::Baseline).map_err(|_| {
                Error::Config(format!(
                    "unknown strategy '{other}' (expected lidal, lidal_fe_fd, none, rand_fr, rand_re, segent, mar, conf, ent or cset)"
                ))
            }),
        }
    }
}

/// A predictor run as a separate process: invoked once per run index as
/// `command <root> <labeled-list-file> <out-probs-dir> <run-index>`, it must
/// leave one `NNNNNN.prob` file per frame in the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalPredictor {
    pub command: PathBuf,
    pub train_root: PathBuf,
    pub validation_root: PathBuf,
}

impl ExternalPredictor {
    fn predict(&self, root: &Path, scene: &Scene, state: &DatasetState, config: &EngineConfig) -> Result<Vec<ProbabilityField>> {
        let list = root.join("labeled.txt");
        write_atomic(&list, predictor::labeled_list(state).as_bytes())?;
        let probs = root.join("probs");
        if probs.exists() {
            fs::remove_dir_all(&probs).map_err(|e| Error::io(&probs, e))?;
        }
        for run in 0..config.augmented_runs {
            let out = probs.join(format!("run_{run}"));
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let status = Command::new(&self.command)
                .arg(root)
                .arg(&list)
                .arg(&out)
                .arg(run.to_string())
                .status()
                .map_err(|e| Error::io(&self.command, e))?;
            if !status.success() {
                return Err(Error::Validation(format!(
                    "predictor {} failed for run {run} with {status}",
                    self.command.display()
                )));
            }
        }
        load_all_probabilities(root, &scene.sequence, config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorSource {
    Mock(MockPredictorParams),
    External(ExternalPredictor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// `seed` is the master seed of the whole run.
    pub engine: EngineConfig,
    pub scene: SyntheticSceneSpec,
    pub predictor: PredictorSource,
}

impl ProtocolConfig {
    /// Desk-scale defaults: 5 frames of 2000 points, 6 classes, 4 rounds of
    /// 10% each after a 10% initial draw, a 3% pseudo-label target and 40
    /// regions per frame, so that one region is about 0.5% of all points.
    pub fn desk(seed: u64) -> Self {
        let engine = EngineConfig {
            class_count: 6,
            x_init: 0.1,
            x_active: 0.1,
            rounds: 4,
            pseudo_target: 0.03,
            regions_per_frame: 40,
            seed,
            ..EngineConfig::default()
        };
        ProtocolConfig {
            engine,
            scene: SyntheticSceneSpec::desk(seed),
            predictor: PredictorSource::Mock(MockPredictorParams::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        self.scene.validate()?;
        if self.scene.class_count != self.engine.class_count {
            return Err(Error::Config(format!(
                "scene has {} classes but the engine is configured for {}",
                self.scene.class_count, self.engine.class_count
            )));
        }
        if let PredictorSource::Mock(p) = &self.predictor {
            p.validate()?;
            if p.runs != self.engine.augmented_runs {
                return Err(Error::Config(format!(
                    "predictor emits {} runs but the engine expects {}",
                    p.runs, self.engine.augmented_runs
                )));
            }
        }
        Ok(())
    }
}

/// Sub-seeds drawn from the master seed in a fixed order, so every strategy
/// sees the same scenes, division, initial set and predictor noise.
#[derive(Debug, Clone)]
struct Seeds {
    division: u64,
    init: u64,
    train_predictor: u64,
    validation_scene: u64,
    validation_predictor: u64,
    baseline: Vec<u64>,
}

impl Seeds {
    fn draw(master: u64, rounds: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        Seeds {
            division: rng.random(),
            init: rng.random(),
            train_predictor: rng.random(),
            validation_scene: rng.random(),
            validation_predictor: rng.random(),
            baseline: (0..rounds).map(|_| rng.random()).collect(),
        }
    }
}

/// Everything that does not depend on the strategy: scenes, regions and
/// correspondences.
#[derive(Debug, Clone)]
pub struct ProtocolSetup {
    pub config: ProtocolConfig,
    pub scene: Scene,
    pub validation: Scene,
    pub table: RegionTable,
    pub maps: Vec<CorrespondenceMap>,
    seeds: Seeds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoRound {
    pub record: SelectionRecord,
    pub accuracy: PseudoAccuracy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    /// Validation mIoU after this round's labels are in.
    pub miou: f64,
    pub labeled_fraction: f64,
    pub pseudo_fraction: f64,
    /// Arg-max accuracy of the predictions this round selected from.
    pub prediction_accuracy: f64,
    pub active: SelectionRecord,
    pub pseudo: Option<PseudoRound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub strategy: ProtocolStrategy,
    /// Validation mIoU after the initial draw and after each round.
    pub curve: Vec<f64>,
    pub initial_labeled_fraction: f64,
    pub rounds: Vec<RoundReport>,
}

impl ProtocolOutcome {
    /// `round miou labeled_fraction pseudo_fraction`, round 0 being the
    /// initial set.
    pub fn curve_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "0 {} {} 0", self.curve[0], self.initial_labeled_fraction);
        for r in &self.rounds {
            let _ = writeln!(out, "{} {} {} {}", r.round, r.miou, r.labeled_fraction, r.pseudo_fraction);
        }
        out
    }

    /// Every selection line of every round.
    pub fn records_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rounds {
            out.push_str(&r.active.to_text());
            if let Some(p) = &r.pseudo {
                out.push_str(&p.record.to_text());
            }
        }
        out
    }
}

fn accuracy(fields: &[ProbabilityField], scene: &Scene) -> f64 {
    let (mut correct, mut total) = (0usize, 0usize);
    for (f, field) in fields.iter().enumerate() {
        for (p, &gt) in scene.labels(f).iter().enumerate() {
            correct += usize::from(field.argmax(p) == gt);
            total += 1;
        }
    }
    correct as f64 / total.max(1) as f64
}

impl ProtocolSetup {
    pub fn prepare(config: &ProtocolConfig) -> Result<Self> {
        config.validate()?;
        let seeds = Seeds::draw(config.engine.seed, config.engine.rounds);
        let scene = generate_scene(&config.scene)?;
        let validation = generate_scene(&config.scene.with_seed(seeds.validation_scene))?;
        let world = register_sequence(&scene.sequence);
        let division = EngineConfig {
            seed: seeds.division,
            ..config.engine.clone()
        };
        let table = RegionTable::divide(&world, &division)?;
        let indices = build_indices(&world);
        let maps = find_all_correspondences(&world, &indices, &config.engine);
        Ok(ProtocolSetup {
            config: config.clone(),
            scene,
            validation,
            table,
            maps,
            seeds,
        })
    }

    fn predict(&self, validation: bool, state: &DatasetState) -> Result<Vec<ProbabilityField>> {
        let (scene, seed) = if validation {
            (&self.validation, self.seeds.validation_predictor)
        } else {
            (&self.scene, self.seeds.train_predictor)
        };
        match &self.config.predictor {
            PredictorSource::Mock(params) => {
                let params = MockPredictorParams { seed, ..*params };
                let coverage = predictor::class_coverage(&self.scene, &self.table, state);
                let dumps = predictor::mock_predict(scene, &params, &coverage);
                predictor::average_dumps(&dumps, scene.spec.class_count)
            }
            PredictorSource::External(ext) => {
                let root = if validation { &ext.validation_root } else { &ext.train_root };
                ext.predict(root, scene, state, &self.config.engine)
            }
        }
    }

    /// Predictions for the training scene under the given labeled state.
    pub fn predict_training(&self, state: &DatasetState) -> Result<Vec<ProbabilityField>> {
        self.predict(false, state)
    }

    /// Writes the mock predictor's per-run dumps for the training scene
    /// under `root/probs`. External predictors write their own.
    pub fn write_training_dumps(&self, root: &Path, state: &DatasetState) -> Result<()> {
        if let PredictorSource::Mock(params) = &self.config.predictor {
            let params = MockPredictorParams {
                seed: self.seeds.train_predictor,
                ..*params
            };
            let coverage = predictor::class_coverage(&self.scene, &self.table, state);
            let dumps = predictor::mock_predict(&self.scene, &params, &coverage);
            predictor::write_dumps(root, &dumps, self.scene.spec.class_count)?;
        }
        Ok(())
    }

    pub fn evaluate(&self, state: &DatasetState) -> Result<f64> {
        let fields = self.predict(true, state)?;
        let mut cm = ConfusionMatrix::new(self.config.engine.class_count, None);
        for (f, field) in fields.iter().enumerate() {
            cm.accumulate(self.validation.labels(f), &field.predicted_labels())?;
        }
        Ok(cm.miou().miou.unwrap_or(0.0))
    }

    pub fn initial_state(&self) -> Result<DatasetState> {
        DatasetState::init(self.table.sizes(), &self.config.engine, self.seeds.init)
    }

    pub fn point_scores(&self, fields: &[ProbabilityField]) -> Result<Vec<FrameScores>> {
        score_sequence(fields, &self.maps)
    }

    pub fn region_scores(&self, fields: &[ProbabilityField]) -> Result<RegionScores> {
        score_regions(&self.point_scores(fields)?, &self.table)
    }

    pub fn run(&self, strategy: ProtocolStrategy) -> Result<ProtocolOutcome> {
        let engine = &self.config.engine;
        let mut state = self.initial_state()?;
        let initial_labeled_fraction = state.labeled_fraction();
        let mut curve = vec![self.evaluate(&state)?];
        let mut rounds = Vec::with_capacity(engine.rounds);
        let truth = |key| metrics::region_labels(&self.scene.sequence, &self.table, key);
        for round in 1..=engine.rounds {
            let fields = self.predict_training(&state)?;
            let prediction_accuracy = accuracy(&fields, &self.scene);
            let (active, pseudo) = match strategy {
                ProtocolStrategy::Lidal(order) => {
                    let cfg = EngineConfig { order, ..engine.clone() };
                    let scores = self.region_scores(&fields)?;
                    let active = selection::select_active(&state, &scores, &self.table, &cfg, round)?;
                    selection::simulate_annotation(&active, &self.scene.sequence, &self.table, &mut state)?;
                    let (record, labels) =
                        selection::select_pseudo(&state, &scores, &self.table, &fields, &cfg, round)?;
                    let accuracy = metrics::pseudo_accuracy(&record, &labels, truth)?;
                    selection::apply_pseudo(&mut state, labels, cfg.pseudo_strategy)?;
                    (active, Some(PseudoRound { record, accuracy }))
                }
                ProtocolStrategy::NoActive => (
                    SelectionRecord::empty(selection::PickKind::Active, round, state.points_total()),
                    None,
                ),
                ProtocolStrategy::Baseline(b) => {
                    let features = (b == Strategy::Coreset).then(|| predictor::mock_features(&self.scene, &fields));
                    let inputs = BaselineInputs {
                        fields: Some(&fields),
                        table: Some(&self.table),
                        features: features.as_ref(),
                    };
                    let active = run_baseline(b, &state, inputs, engine, self.seeds.baseline[round - 1], round)?;
                    selection::simulate_annotation(&active, &self.scene.sequence, &self.table, &mut state)?;
                    (active, None)
                }
            };
            state.audit()?;
            let miou = self.evaluate(&state)?;
            curve.push(miou);
            log::info!("{strategy} round {round}: miou {miou:.4}, labeled {:.4}", state.labeled_fraction());
            rounds.push(RoundReport {
                round,
                miou,
                labeled_fraction: state.labeled_fraction(),
                pseudo_fraction: state.points_pseudo() as f64 / state.points_total() as f64,
                prediction_accuracy,
                active,
                pseudo,
            });
        }
        Ok(ProtocolOutcome {
            strategy,
            curve,
            initial_labeled_fraction,
            rounds,
        })
    }
}

pub fn run_protocol(config: &ProtocolConfig, strategy: ProtocolStrategy) -> Result<ProtocolOutcome> {
    ProtocolSetup::prepare(config)?.run(strategy)
}
