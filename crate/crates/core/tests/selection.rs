mod common;

use std::collections::BTreeMap;

use lidal::regions::{FrameRegions, RegionInfo, RegionTable};
use lidal::scene::{DatasetState, Frame, FrameSequence, Pose, ProbabilityField, RegionKey};
use lidal::selection::*;
use lidal::EngineConfig;

/// Two frames of two single-point regions; (0,0) and (1,0) overlap.
fn toy() -> (RegionTable, DatasetState) {
    let centers = [[[0.0, 0.0, 0.0], [50.0, 0.0, 0.0]], [[1.0, 0.0, 0.0], [100.0, 0.0, 0.0]]];
    let table = RegionTable {
        frames: centers
            .iter()
            .enumerate()
            .map(|(f, cs)| FrameRegions {
                frame_id: f as u32,
                ids: vec![0, 1],
                regions: cs
                    .iter()
                    .enumerate()
                    .map(|(r, c)| RegionInfo {
                        members: vec![r as u32],
                        center: *c,
                    })
                    .collect(),
            })
            .collect(),
    };
    let state = DatasetState::new(table.sizes()).unwrap();
    (table, state)
}

fn k(f: u32, r: u32) -> RegionKey {
    RegionKey::new(f, r)
}

fn toy_scores() -> RegionScores {
    [
        (k(0, 0), (0.9, 0.5)),
        (k(0, 1), (0.1, 0.3)),
        (k(1, 0), (0.8, 0.7)),
        (k(1, 1), (0.2, 0.1)),
    ]
    .into()
}

#[test]
fn toy_active_pick() {
    let (table, state) = toy();
    let cfg = EngineConfig {
        x_active: 0.25,
        ..EngineConfig::default()
    };
    let rec = select_active(&state, &toy_scores(), &table, &cfg, 1).unwrap();
    assert_eq!(rec.picks.len(), 1);
    assert_eq!(rec.picks[0].region, k(1, 0));
    assert_eq!(rec.picks[0].anchor, k(0, 0));
    assert_eq!(rec.picks[0].corresponding, vec![k(0, 0), k(1, 0)]);
    assert_eq!(rec.picks[0].cum_fraction, 0.25);
}

#[test]
fn single_region_pool_is_selected() {
    let (table, mut state) = toy();
    for key in [k(0, 0), k(0, 1), k(1, 1)] {
        state.label(key);
    }
    let rec = select_active(&state, &toy_scores(), &table, &EngineConfig::default(), 0).unwrap();
    assert_eq!(rec.regions(), vec![k(1, 0)]);
}

#[test]
fn identical_scores_follow_key_order() {
    let (table, state) = toy();
    let scores: RegionScores = table.keys().map(|key| (key, (0.5, 0.5))).collect();
    let cfg = EngineConfig {
        pseudo_target: 1.0,
        ..EngineConfig::default()
    };
    let fields: Vec<ProbabilityField> = (0..2)
        .map(|f| ProbabilityField::from_rows(f, 2, vec![0.6, 0.4, 0.3, 0.7]).unwrap())
        .collect();
    let (rec, labels) = select_pseudo(&state, &scores, &table, &fields, &cfg, 0).unwrap();
    assert_eq!(rec.regions(), vec![k(0, 0), k(0, 1), k(1, 1)]);
    assert_eq!(labels[&k(0, 1)], vec![1]);
    assert!(rec.shortfall);
}

#[test]
fn previous_pseudo_set_is_excluded() {
    let (table, mut state) = toy();
    let all: BTreeMap<_, _> = table.keys().map(|key| (key, vec![0])).collect();
    state.replace_pseudo(all).unwrap();
    let fields: Vec<ProbabilityField> = (0..2)
        .map(|f| ProbabilityField::from_rows(f, 2, vec![0.6, 0.4, 0.3, 0.7]).unwrap())
        .collect();
    let (rec, labels) =
        select_pseudo(&state, &toy_scores(), &table, &fields, &EngineConfig::default(), 1).unwrap();
    assert!(rec.picks.is_empty());
    assert!(labels.is_empty());
    assert!(rec.shortfall);
}

#[test]
fn missing_score_is_an_error() {
    let (table, state) = toy();
    let mut scores = toy_scores();
    scores.remove(&k(1, 1));
    assert!(select_active(&state, &scores, &table, &EngineConfig::default(), 0).is_err());
}

#[test]
fn annotation_requires_labels() {
    let (table, mut state) = toy();
    let seq = FrameSequence::new(
        vec![Frame::new(0, vec![[0.0; 3]; 2]), Frame::new(1, vec![[0.0; 3]; 2])],
        vec![Pose::IDENTITY; 2],
    )
    .unwrap();
    let empty = SelectionRecord::empty(PickKind::Active, 0, 4);
    assert!(simulate_annotation(&empty, &seq, &table, &mut state).unwrap().is_empty());
    let rec = select_active(&state, &toy_scores(), &table, &EngineConfig::default(), 0).unwrap();
    assert!(simulate_annotation(&rec, &seq, &table, &mut state).is_err());
}

#[test]
fn record_text_round_trip() {
    let (table, state) = toy();
    let cfg = EngineConfig {
        x_active: 1.0,
        ..EngineConfig::default()
    };
    let rec = select_active(&state, &toy_scores(), &table, &cfg, 3).unwrap();
    let lines = parse_record_lines(&rec.to_text()).unwrap();
    assert_eq!(lines.len(), rec.picks.len());
    for (l, p) in lines.iter().zip(&rec.picks) {
        assert_eq!(l.region, p.region);
        assert_eq!((l.fd, l.fe), p.scores);
        assert_eq!(l.cum_fraction, p.cum_fraction);
        assert_eq!(l.round, 3);
    }
}

mod oracles {
    use std::collections::{BTreeMap, BTreeSet};

    use crate::common::*;
    use lidal::config::{PseudoStrategy, SelectionOrder};
    use lidal::scene::RegionKey;
    use lidal::selection::*;
    use proptest::prelude::*;

    fn assert_same(record: &SelectionRecord, oracle: &(Vec<OraclePick>, bool)) -> Result<(), TestCaseError> {
        prop_assert_eq!(record.shortfall, oracle.1);
        prop_assert_eq!(record.picks.len(), oracle.0.len());
        for (p, o) in record.picks.iter().zip(&oracle.0) {
            prop_assert_eq!(p.region, o.region);
            prop_assert_eq!(p.anchor, o.anchor);
            prop_assert_eq!(&p.corresponding, &o.set);
            prop_assert_eq!(p.cum_points, o.cum_points);
        }
        Ok(())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn active_selection_matches_greedy_oracle(seed in any::<u64>()) {
            let inst = random_instance(&mut rng(seed), 50);
            let rec = select_active(&inst.state, &inst.scores, &inst.table, &inst.config, 2).unwrap();
            let pool: Vec<RegionKey> = inst.state.not_labeled().into_iter().collect();
            assert_same(&rec, &greedy_oracle(&inst, pool, inst.config.x_active, true, inst.config.order))?;
            for p in &rec.picks {
                prop_assert!(!inst.state.labeled().contains(&p.region));
            }
        }

        #[test]
        fn pseudo_selection_matches_greedy_oracle(seed in any::<u64>()) {
            let inst = random_instance(&mut rng(seed), 50);
            let (rec, labels) =
                select_pseudo(&inst.state, &inst.scores, &inst.table, &inst.fields, &inst.config, 2).unwrap();
            let pool = pseudo_pool_oracle(&inst.state, inst.config.pseudo_strategy);
            let expected: BTreeSet<RegionKey> = pool.iter().copied().collect();
            prop_assert_eq!(pseudo_pool(&inst.state, inst.config.pseudo_strategy), expected);
            assert_same(&rec, &greedy_oracle(&inst, pool, inst.config.pseudo_target, false, inst.config.order))?;
            let picked: BTreeSet<RegionKey> = rec.regions().into_iter().collect();
            let labeled: BTreeSet<RegionKey> = labels.keys().copied().collect();
            prop_assert_eq!(picked, labeled);
        }

        #[test]
        fn applying_picks_keeps_state_consistent(seed in any::<u64>()) {
            let inst = random_instance(&mut rng(seed), 50);
            let mut state = inst.state.clone();
            let active = select_active(&state, &inst.scores, &inst.table, &inst.config, 1).unwrap();
            apply_annotation(&active, &mut state);
            state.audit().unwrap();
            let before: BTreeMap<_, _> = state.pseudo().clone();
            let (_, labels) = select_pseudo(&state, &inst.scores, &inst.table, &inst.fields, &inst.config, 1).unwrap();
            apply_pseudo(&mut state, labels.clone(), inst.config.pseudo_strategy).unwrap();
            state.audit().unwrap();
            for key in labels.keys() {
                prop_assert!(state.pseudo().contains_key(key));
            }
            if inst.config.pseudo_strategy == PseudoStrategy::Accumulate {
                for key in before.keys() {
                    prop_assert!(state.pseudo().contains_key(key));
                }
            } else {
                prop_assert_eq!(state.pseudo().len(), labels.len());
            }
        }

        #[test]
        fn cumulative_fraction_rises_and_stops_at_target(seed in any::<u64>()) {
            let inst = random_instance(&mut rng(seed), 50);
            let rec = select_active(&inst.state, &inst.scores, &inst.table, &inst.config, 0).unwrap();
            let total = inst.state.points_total() as f64;
            for w in rec.picks.windows(2) {
                prop_assert!(w[1].cum_points > w[0].cum_points);
            }
            for (i, p) in rec.picks.iter().enumerate() {
                prop_assert_eq!(p.cum_fraction, p.cum_points as f64 / total);
                if i + 1 < rec.picks.len() {
                    prop_assert!(p.cum_fraction < inst.config.x_active);
                }
            }
            if !rec.shortfall {
                prop_assert!(rec.picks.last().unwrap().cum_fraction >= inst.config.x_active);
            }
        }
    }

    #[test]
    fn orders_swap_anchor_and_winner_scores() {
        for seed in 0..50 {
            let mut inst = random_instance(&mut rng(seed), 30);
            inst.config.order = SelectionOrder::EntropyThenDivergence;
            let swapped = inst.scores.iter().map(|(k, &(fd, fe))| (*k, (fe, fd))).collect();
            let a = select_active(&inst.state, &inst.scores, &inst.table, &inst.config, 0).unwrap();
            inst.config.order = SelectionOrder::DivergenceThenEntropy;
            let b = select_active(&inst.state, &swapped, &inst.table, &inst.config, 0).unwrap();
            assert_eq!(a.regions(), b.regions());
        }
    }
}
