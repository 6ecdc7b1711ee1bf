mod support;

use std::collections::BTreeSet;

use gridscope_core::{resolve_cell, sd_1d, split_diffuse, GridShape, PointCloud};
use proptest::prelude::*;
use support::{nested_rank_cells, random_cloud, shape_for, tied_cloud};

fn assert_bijective(cells: &std::collections::BTreeMap<String, Vec<usize>>, shape: &GridShape) {
    let got: BTreeSet<&Vec<usize>> = cells.values().collect();
    let all = shape.cells();
    assert_eq!(got.len(), all.len());
    assert!(all.iter().all(|c| got.contains(c)));
}

#[test]
fn matches_nested_rank_oracle() {
    for dims in 1..=3 {
        for n in [4, 16, 64, 256] {
            for seed in 0..20 {
                let cloud = random_cloud(n, dims, seed);
                let shape = shape_for(n, dims);
                let a = split_diffuse(&cloud, &shape).unwrap();
                assert_eq!(*a.cells(), nested_rank_cells(&cloud, shape.sides()), "n={n} dims={dims} seed={seed}");
            }
        }
    }
}

#[test]
fn oracle_agrees_on_odd_shapes_and_ties() {
    for (sides, seed) in [(vec![3, 5], 1), (vec![7], 2), (vec![2, 3, 4], 3), (vec![1, 6], 4), (vec![5, 1, 3], 5)] {
        let shape = GridShape::new(sides.clone()).unwrap();
        let cloud = tied_cloud(shape.volume(), sides.len(), 3, seed);
        let a = split_diffuse(&cloud, &shape).unwrap();
        assert_eq!(*a.cells(), nested_rank_cells(&cloud, &sides), "{sides:?}");
        assert_bijective(a.cells(), &shape);
        assert!(a.sidedness_violations().is_empty());
    }
}

#[test]
fn sixty_four_points_fill_eight_by_eight() {
    let cloud = random_cloud(64, 2, 64);
    let shape: GridShape = "8x8".parse().unwrap();
    let a = split_diffuse(&cloud, &shape).unwrap();
    assert_bijective(a.cells(), &shape);
    assert!(a.paths().values().all(|p| p.len() == 6));
}

#[test]
fn power_of_two_paths_interleave_bits() {
    let cloud = random_cloud(256, 2, 9);
    let a = split_diffuse(&cloud, &GridShape::square_pow2(4)).unwrap();
    for (id, path) in a.paths() {
        let bits = |parity: usize| {
            path.as_str()
                .chars()
                .enumerate()
                .filter(|(i, _)| i % 2 == parity)
                .fold(0, |acc, (_, c)| acc * 2 + usize::from(c == 'R'))
        };
        assert_eq!(a.cell(id).unwrap(), &[bits(0), bits(1)]);
    }
}

#[test]
fn lattice_inputs_stay_put() {
    for side in [2usize, 4, 8, 16] {
        for (sx, sy) in [(1.0, 1.0), (0.01, 3.0), (250.0, 0.5)] {
            let cloud = PointCloud::from_pairs((0..side * side).map(|i| {
                let (x, y) = (i % side, i / side);
                (format!("c{x}_{y}"), vec![x as f64 * sx - 7.0, y as f64 * sy + 2.0])
            }))
            .unwrap();
            let a = split_diffuse(&cloud, &GridShape::new(vec![side, side]).unwrap()).unwrap();
            for p in cloud.points() {
                let want = [((p.coords[0] + 7.0) / sx).round() as usize, ((p.coords[1] - 2.0) / sy).round() as usize];
                assert_eq!(a.cell(&p.id).unwrap(), &want);
            }
        }
    }
}

#[test]
fn one_dimensional_paths_agree_with_ranks() {
    let cloud = tied_cloud(37, 1, 5, 77);
    let a = split_diffuse(&cloud, &GridShape::new(vec![37]).unwrap()).unwrap();
    let values: Vec<(String, f64)> = cloud.points().iter().map(|p| (p.id.clone(), p.coords[0])).collect();
    let ranks = sd_1d(&values).unwrap();
    for (id, r) in ranks {
        assert_eq!(a.cell(&id).unwrap(), &[r]);
    }
}

fn arb_cloud() -> impl Strategy<Value = (PointCloud, GridShape)> {
    (1usize..=3, 1usize..=40).prop_flat_map(|(dims, n)| {
        let shape = GridShape::balanced(n, dims).unwrap();
        let coord = prop_oneof![(-5i32..5).prop_map(f64::from), -1e3f64..1e3];
        proptest::collection::vec(proptest::collection::vec(coord, dims), n).prop_map(move |rows| {
            let cloud = PointCloud::from_pairs(rows.into_iter().enumerate().map(|(i, c)| (format!("q{i}"), c))).unwrap();
            (cloud, shape.clone())
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn always_a_bijection((cloud, shape) in arb_cloud()) {
        let a = split_diffuse(&cloud, &shape).unwrap();
        assert_bijective(a.cells(), &shape);
        prop_assert!(a.validate().is_ok());
    }

    #[test]
    fn every_split_keeps_its_sides((cloud, shape) in arb_cloud()) {
        let a = split_diffuse(&cloud, &shape).unwrap();
        prop_assert_eq!(a.sidedness_violations(), vec![]);
    }

    #[test]
    fn paths_resolve_to_cells((cloud, shape) in arb_cloud()) {
        let a = split_diffuse(&cloud, &shape).unwrap();
        for (id, path) in a.paths() {
            prop_assert_eq!(&resolve_cell(path, &shape).unwrap(), &a.cells()[id]);
        }
    }

    #[test]
    fn input_order_is_irrelevant((cloud, shape) in arb_cloud(), rot in 0usize..40) {
        let mut pts = cloud.clone().into_points();
        let k = rot % pts.len();
        pts.rotate_left(k);
        pts.reverse();
        let shuffled = PointCloud::new(cloud.dims(), pts).unwrap();
        prop_assert_eq!(split_diffuse(&cloud, &shape).unwrap(), split_diffuse(&shuffled, &shape).unwrap());
    }

    #[test]
    fn agrees_with_oracle((cloud, shape) in arb_cloud()) {
        let a = split_diffuse(&cloud, &shape).unwrap();
        prop_assert_eq!(a.cells().clone(), nested_rank_cells(&cloud, shape.sides()));
    }

    #[test]
    fn sd_1d_is_the_stable_rank(values in proptest::collection::vec(-3i32..3, 1..60)) {
        let pairs: Vec<(String, f64)> = values.iter().enumerate().map(|(i, v)| (format!("v{i:03}"), f64::from(*v))).collect();
        let ranks = sd_1d(&pairs).unwrap();
        // Stable sort by value of the id-ordered list.
        let mut idx: Vec<usize> = (0..pairs.len()).collect();
        idx.sort_by(|&i, &j| pairs[i].1.partial_cmp(&pairs[j].1).unwrap());
        for (r, i) in idx.into_iter().enumerate() {
            prop_assert_eq!(ranks[&pairs[i].0], r);
        }
        let cloud = PointCloud::from_pairs(pairs.iter().map(|(id, v)| (id.clone(), vec![*v]))).unwrap();
        let a = split_diffuse(&cloud, &GridShape::new(vec![pairs.len()]).unwrap()).unwrap();
        for (id, r) in &ranks {
            prop_assert_eq!(a.cell(id).unwrap(), &[*r][..]);
        }
    }
}
