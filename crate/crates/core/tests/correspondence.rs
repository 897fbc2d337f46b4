mod common;

mod kdtree {
    use lidal::correspondence::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_scan(points: &[[f64; 3]], q: &[f64; 3]) -> Neighbor {
        let mut best = Neighbor {
            index: u32::MAX,
            distance_sq: f64::INFINITY,
        };
        for (i, p) in points.iter().enumerate() {
            let d = distance_sq(q, p);
            if d < best.distance_sq {
                best = Neighbor {
                    index: i as u32,
                    distance_sq: d,
                };
            }
        }
        best
    }

    #[test]
    fn single_point() {
        let idx = SpatialIndex::build(vec![[1.0, 2.0, 3.0]]);
        let n = idx.nearest(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((n.index, n.distance_sq), (0, 0.0));
    }

    #[test]
    fn empty_index_has_no_neighbor() {
        assert!(SpatialIndex::build(vec![]).nearest(&[0.0; 3]).is_none());
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<[f64; 3]> = (0..1000)
            .map(|_| [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-2.0..2.0)])
            .collect();
        let idx = SpatialIndex::build(pts.clone());
        for _ in 0..100 {
            let q = [rng.random_range(-12.0..12.0), rng.random_range(-12.0..12.0), rng.random_range(-3.0..3.0)];
            assert_eq!(idx.nearest(&q).unwrap(), linear_scan(&pts, &q));
        }
    }

    #[test]
    fn duplicates_resolve_to_lowest_index() {
        let mut pts = vec![[5.0, 5.0, 5.0]; 40];
        pts.extend((0..60).map(|i| [i as f64, 0.0, 0.0]));
        pts.push([1.0, 1.0, 1.0]);
        pts.push([1.0, 1.0, 1.0]);
        let idx = SpatialIndex::build(pts);
        assert_eq!(idx.nearest(&[5.0, 5.0, 5.0]).unwrap().index, 0);
        assert_eq!(idx.nearest(&[1.0, 1.0, 1.0]).unwrap().index, 100);
    }

    #[test]
    fn grid_ties_match_linear_scan() {
        let pts: Vec<[f64; 3]> = (0..8)
            .flat_map(|x| (0..8).flat_map(move |y| (0..4).map(move |z| [x as f64, y as f64, z as f64])))
            .collect();
        let idx = SpatialIndex::build(pts.clone());
        for x in 0..15 {
            for y in 0..15 {
                let q = [x as f64 * 0.5, y as f64 * 0.5, 1.5];
                assert_eq!(idx.nearest(&q).unwrap(), linear_scan(&pts, &q));
            }
        }
    }
}

mod maps {
    use std::path::Path;

    use lidal::correspondence::*;
    use lidal::registration::WorldFrame;
    use lidal::EngineConfig;

    fn frame(id: u32, points: Vec<[f64; 3]>) -> WorldFrame {
        WorldFrame {
            frame_id: id,
            points,
        }
    }

    fn spaced(offset: f64) -> Vec<[f64; 3]> {
        (0..20).map(|i| [i as f64 * 1.5 + offset, 0.0, 0.0]).collect()
    }

    #[test]
    fn window_is_split_and_truncated() {
        assert_eq!(neighbor_window(5, 20, 4), vec![3, 4, 6, 7]);
        assert_eq!(neighbor_window(0, 20, 4), vec![1, 2]);
        assert_eq!(neighbor_window(19, 20, 4), vec![17, 18]);
        assert_eq!(neighbor_window(5, 20, 3), vec![4, 6, 7]);
        assert_eq!(neighbor_window(0, 1, 24), Vec::<usize>::new());
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(in_window(i, j, 5), neighbor_window(i, 20, 5).contains(&j));
            }
        }
    }

    #[test]
    fn identical_frames_match_twins() {
        let frames = vec![frame(0, spaced(0.0)), frame(1, spaced(0.0))];
        let idx = build_indices(&frames);
        let map = find_correspondences(0, &frames, &idx, &EngineConfig::default());
        for p in 0..map.len() {
            assert_eq!(map.matches(p), &[Match { frame: 1, point: p as u32 }]);
        }
    }

    #[test]
    fn shift_beyond_threshold_gives_no_matches() {
        let frames = vec![frame(0, spaced(0.0)), frame(1, spaced(0.2))];
        let idx = build_indices(&frames);
        let map = find_correspondences(0, &frames, &idx, &EngineConfig::default());
        assert_eq!(map.total_matches(), 0);
    }

    #[test]
    fn cache_round_trip() {
        let frames = vec![frame(0, spaced(0.0)), frame(1, spaced(0.05)), frame(2, spaced(0.0))];
        let idx = build_indices(&frames);
        let map = find_correspondences(1, &frames, &idx, &EngineConfig::default());
        let bytes = map.encode();
        let back = CorrespondenceMap::decode(Path::new("c"), &bytes, 1, map.window.clone()).unwrap();
        assert_eq!(back, map);
        assert_eq!(back.encode(), bytes);
    }
}

mod oracles {
    use crate::common::*;
    use lidal::correspondence::*;
    use lidal::registration::register_sequence;
    use lidal::EngineConfig;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn window_matches_definition(frames in 1usize..40, w in 1usize..30) {
            for i in 0..frames {
                prop_assert_eq!(neighbor_window(i, frames, w), window_oracle(i, frames, w));
            }
        }

        #[test]
        fn maps_match_all_pairs_search(seed in any::<u64>(), frames in 1usize..5, w in 1usize..5, t in 0.02f64..0.3) {
            let mut rng = rng(seed);
            let world = register_sequence(&random_sequence(&mut rng, frames, 300));
            let config = EngineConfig { neighbor_window: w, correspondence_threshold: t, ..EngineConfig::default() };
            let maps = find_all_correspondences(&world, &build_indices(&world), &config);
            prop_assert_eq!(maps.len(), world.len());
            for (i, map) in maps.iter().enumerate() {
                let want = brute_correspondences(&world, i, w, t);
                prop_assert_eq!(map.len(), want.len());
                for (p, pairs) in want.iter().enumerate() {
                    let got: Vec<(u32, u32)> = map.matches(p).iter().map(|m| (m.frame, m.point)).collect();
                    prop_assert_eq!(&got, pairs);
                }
            }
        }
    }
}
