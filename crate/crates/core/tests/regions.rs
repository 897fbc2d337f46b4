mod common;

mod kmeans {
    use lidal::regions::kmeans::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blob(center: [f64; 3], n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| {
                [
                    center[0] + rng.random_range(-1.0..1.0),
                    center[1] + rng.random_range(-1.0..1.0),
                    center[2] + rng.random_range(-1.0..1.0),
                ]
            })
            .collect()
    }

    #[test]
    fn separated_blobs_become_regions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = blob([0.0; 3], 20, &mut rng);
        pts.extend(blob([50.0, 0.0, 0.0], 20, &mut rng));
        let c = constrained_kmeans(&pts, 2, 19, 21, 3).unwrap();
        assert!(c.labels[..20].iter().all(|&l| l == c.labels[0]));
        assert!(c.labels[20..].iter().all(|&l| l == c.labels[20]));
        assert_ne!(c.labels[0], c.labels[20]);
        assert!(c.converged);
    }

    #[test]
    fn sizes_respect_band_and_objective_never_rises() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<[f64; 3]> = (0..300)
            .map(|_| [rng.random_range(0.0..30.0), rng.random_range(0.0..30.0), 0.0])
            .collect();
        let c = constrained_kmeans(&pts, 7, 40, 46, 9).unwrap();
        let mut sizes = [0usize; 7];
        c.labels.iter().for_each(|&l| sizes[l as usize] += 1);
        assert!(sizes.iter().all(|&s| (40..=46).contains(&s)), "{sizes:?}");
        for w in c.objective_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", c.objective_history);
        }
    }

    #[test]
    fn duplicate_points_seed_without_panicking() {
        let pts = vec![[1.0, 1.0, 1.0]; 10];
        let c = constrained_kmeans(&pts, 2, 5, 5, 0).unwrap();
        assert_eq!(c.labels.iter().filter(|&&l| l == 0).count(), 5);
    }
}

mod assignment {
    use lidal::regions::assignment::*;
    use lidal::Error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Enumerates all k^n labelings of a tiny instance.
    fn brute_force(costs: &[f64], k: usize, lower: usize, upper: usize) -> f64 {
        let n = costs.len() / k;
        let mut best = f64::INFINITY;
        let mut labels = vec![0usize; n];
        loop {
            let mut sizes = vec![0usize; k];
            labels.iter().for_each(|&a| sizes[a] += 1);
            if sizes.iter().all(|&s| s >= lower && s <= upper) {
                let c: f64 = labels.iter().enumerate().map(|(q, &a)| costs[q * k + a]).sum();
                best = best.min(c);
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                labels[i] += 1;
                if labels[i] < k {
                    break;
                }
                labels[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn matches_enumeration_on_tiny_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..60 {
            let k = 2 + trial % 2;
            let n = 5 + trial % 4;
            let costs: Vec<f64> = (0..n * k).map(|_| rng.random_range(0.0..10.0)).collect();
            let lower = n / k - usize::from(trial % 3 == 0 && n / k > 0);
            let upper = n.div_ceil(k) + trial % 2;
            let got = constrained_assignment(&costs, k, lower, upper).unwrap();
            let mut sizes = vec![0usize; k];
            got.labels.iter().for_each(|&a| sizes[a as usize] += 1);
            assert!(sizes.iter().all(|&s| s >= lower && s <= upper), "{sizes:?}");
            let want = brute_force(&costs, k, lower, upper);
            assert!((got.cost - want).abs() < 1e-9, "trial {trial}: {} vs {want}", got.cost);
        }
    }

    #[test]
    fn unconstrained_reduces_to_nearest_cluster() {
        let costs = vec![1.0, 5.0, 4.0, 2.0, 0.5, 9.0, 7.0, 0.1];
        let got = constrained_assignment(&costs, 2, 0, 4).unwrap();
        assert_eq!(got.labels, vec![0, 1, 0, 1]);
    }

    #[test]
    fn lower_bound_forces_expensive_moves() {
        // Every point prefers cluster 0, but cluster 1 needs two members.
        let costs = vec![0.0, 10.0, 0.0, 3.0, 0.0, 1.0, 0.0, 20.0];
        let got = constrained_assignment(&costs, 2, 2, 2).unwrap();
        assert_eq!(got.labels, vec![0, 1, 1, 0]);
        assert_eq!(got.cost, 4.0);
    }

    #[test]
    fn infeasible_band_is_a_config_error() {
        let costs = vec![0.0; 10];
        assert!(matches!(
            constrained_assignment(&costs, 2, 3, 4),
            Err(Error::Config(_))
        ));
    }
}

mod table {
    use std::collections::{BTreeMap, BTreeSet};
    use std::path::Path;

    use lidal::regions::*;
    use lidal::registration::WorldFrame;
    use lidal::scene::RegionKey;
    use lidal::EngineConfig;

    fn table_with_centers(centers: &[Vec<[f64; 3]>]) -> RegionTable {
        RegionTable {
            frames: centers
                .iter()
                .enumerate()
                .map(|(f, cs)| FrameRegions {
                    frame_id: f as u32,
                    ids: (0..cs.len() as u32).collect(),
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
        }
    }

    #[test]
    fn singleton_pool() {
        let t = table_with_centers(&[vec![[0.0; 3]]]);
        let a = RegionKey::new(0, 0);
        let s = corresponding_set(a, &t, &[a].into(), &EngineConfig::default());
        assert_eq!(s, [a].into());
    }

    #[test]
    fn radius_threshold() {
        let t = table_with_centers(&[vec![[0.0; 3]], vec![[6.0, 0.0, 0.0], [4.0, 3.0, 0.0]]]);
        let pool: BTreeSet<_> = t.keys().collect();
        let s = corresponding_set(RegionKey::new(0, 0), &t, &pool, &EngineConfig::default());
        assert_eq!(s, [RegionKey::new(0, 0), RegionKey::new(1, 1)].into());
    }

    #[test]
    fn window_limits_frames() {
        let centers: Vec<Vec<[f64; 3]>> = (0..6).map(|_| vec![[0.0; 3]]).collect();
        let t = table_with_centers(&centers);
        let pool: BTreeSet<_> = t.keys().collect();
        let cfg = EngineConfig {
            neighbor_window: 2,
            ..EngineConfig::default()
        };
        let s = corresponding_set(RegionKey::new(3, 0), &t, &pool, &cfg);
        let frames: Vec<u32> = s.iter().map(|k| k.frame).collect();
        assert_eq!(frames, vec![2, 3, 4]);
    }

    #[test]
    fn frame_regions_reject_empty_region() {
        let f = WorldFrame {
            frame_id: 0,
            points: vec![[0.0; 3]; 3],
        };
        assert!(FrameRegions::new(&f, vec![0, 0, 0], 2).is_err());
        let fr = FrameRegions::new(&f, vec![0, 1, 0], 2).unwrap();
        assert_eq!(fr.regions[0].members, vec![0, 2]);
    }

    #[test]
    fn sidecar_round_trip() {
        let t = table_with_centers(&[vec![[0.5, -1.25, 3.0], [1e-3, 2.0, 0.0]]]);
        let scores: BTreeMap<_, _> = [(RegionKey::new(0, 1), (0.25, 0.75))].into();
        let text = encode_sidecar(&t, Some(&scores));
        let rows = decode_sidecar(Path::new("c"), &text).unwrap();
        assert_eq!(rows[0].scores, None);
        assert_eq!(rows[1].scores, Some((0.25, 0.75)));
        assert_eq!(rows[0].center, [0.5, -1.25, 3.0]);
    }
}

mod oracles {
    use std::collections::BTreeSet;

    use crate::common::*;
    use lidal::regions::assignment::{constrained_assignment, improve_assignment};
    use lidal::regions::kmeans::{assignment_costs, centroids_of};
    use lidal::regions::{corresponding_set, divide_frame, frame_seed, RegionTable};
    use lidal::registration::WorldFrame;
    use lidal::scene::RegionKey;
    use lidal::EngineConfig;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    /// A random labeling with every cluster size inside the band.
    fn feasible_start(rng: &mut ChaCha8Rng, n: usize, k: usize, lower: usize, upper: usize) -> Vec<u32> {
        let mut sizes = vec![lower; k];
        let mut left = n - lower * k;
        while left > 0 {
            let a = rng.random_range(0..k);
            if sizes[a] < upper {
                sizes[a] += 1;
                left -= 1;
            }
        }
        let mut labels: Vec<u32> = sizes
            .iter()
            .enumerate()
            .flat_map(|(a, &s)| std::iter::repeat_n(a as u32, s))
            .collect();
        labels.shuffle(rng);
        labels
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
        (0..n)
            .map(|_| [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), rng.random_range(-2.0..2.0)])
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn cycle_cancelling_reaches_enumerated_optimum(seed in any::<u64>(), k in 2usize..4, n in 4usize..9) {
            let mut rng = rng(seed);
            let costs: Vec<f64> = (0..n * k).map(|_| f64::from(rng.random_range(0..20u8)) / 2.0).collect();
            let lower = n / k - usize::from(rng.random_bool(0.5) && n / k > 0);
            let upper = n.div_ceil(k) + usize::from(rng.random_bool(0.5));
            let start = feasible_start(&mut rng, n, k, lower, upper);
            let got = improve_assignment(&costs, k, lower, upper, start).unwrap();
            let want = enumerate_assignment(&costs, k, lower, upper);
            prop_assert!((got.cost - want).abs() < 1e-9, "{} vs {}", got.cost, want);
        }

        #[test]
        fn engine_matches_min_cost_flow(seed in any::<u64>(), k in 2usize..8, per in 3usize..15) {
            let mut rng = rng(seed);
            let n = k * per + rng.random_range(0..k);
            let costs = assignment_costs(&random_points(&mut rng, n), &random_points(&mut rng, k));
            let band = EngineConfig { regions_per_frame: k, size_band: rng.random_range(0.0..0.3), ..EngineConfig::default() };
            let (lower, upper) = band.size_bounds(n);
            let got = constrained_assignment(&costs, k, lower, upper).unwrap();
            let (_, want) = min_cost_assignment(&costs, k, lower, upper);
            prop_assert!((got.cost - want).abs() <= 1e-9 * want.max(1.0));
            let start = feasible_start(&mut rng, n, k, lower, upper);
            let improved = improve_assignment(&costs, k, lower, upper, start).unwrap();
            prop_assert!((improved.cost - want).abs() <= 1e-9 * want.max(1.0));
        }

        #[test]
        fn division_respects_band_and_is_deterministic(seed in any::<u64>(), k in 1usize..12, n in 30usize..300) {
            let mut rng = rng(seed);
            let frame = WorldFrame { frame_id: 3, points: random_points(&mut rng, n) };
            let config = EngineConfig { regions_per_frame: k, seed, ..EngineConfig::default() };
            let (lower, upper) = config.size_bounds(n);
            let a = divide_frame(&frame, &config, frame_seed(seed, 3)).unwrap();
            let b = divide_frame(&frame, &config, frame_seed(seed, 3)).unwrap();
            prop_assert_eq!(&a.labels, &b.labels);
            let mut sizes = vec![0usize; k];
            a.labels.iter().for_each(|&l| sizes[l as usize] += 1);
            prop_assert!(sizes.iter().all(|s| (lower..=upper).contains(s)), "{:?}", sizes);
            prop_assert!(a.objective_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        }

        #[test]
        fn corresponding_set_matches_definition(seed in any::<u64>()) {
            let inst = random_instance(&mut rng(seed), 40);
            let pool: BTreeSet<RegionKey> = inst.state.not_labeled();
            let radius_sq = inst.config.overlap_radius * inst.config.overlap_radius;
            for anchor in inst.table.keys() {
                let got = corresponding_set(anchor, &inst.table, &pool, &inst.config);
                let frames = inst.table.frames.len();
                let window = window_oracle(anchor.frame as usize, frames, inst.config.neighbor_window);
                let c = inst.table.region(anchor).center;
                let mut want: BTreeSet<RegionKey> = pool
                    .iter()
                    .filter(|k| k.frame == anchor.frame || window.contains(&(k.frame as usize)))
                    .filter(|k| {
                        let d = inst.table.region(**k).center;
                        (0..3).map(|i| (d[i] - c[i]) * (d[i] - c[i])).sum::<f64>() <= radius_sq
                    })
                    .copied()
                    .collect();
                want.insert(anchor);
                prop_assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn centroids_are_member_means() {
        let pts = vec![[0.0, 0.0, 0.0], [2.0, 4.0, 6.0], [10.0, 10.0, 10.0], [-1.0, 0.0, 1.0]];
        let c = centroids_of(&pts, &[0, 0, 1, 1], 2);
        assert_eq!(c, vec![[1.0, 2.0, 3.0], [4.5, 5.0, 5.5]]);
    }

    #[test]
    fn region_files_round_trip() {
        let mut rng = rng(41);
        let frames: Vec<WorldFrame> = (0..3)
            .map(|f| WorldFrame { frame_id: f, points: random_points(&mut rng, 120) })
            .collect();
        let config = EngineConfig { regions_per_frame: 6, ..EngineConfig::default() };
        let table = RegionTable::divide(&frames, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        table.write_region_files(dir.path()).unwrap();
        let back = RegionTable::read_region_files(dir.path(), &frames).unwrap();
        assert_eq!(back, table);
    }
}
