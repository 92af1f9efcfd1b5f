use poco::geometry::{knn_brute, KdTree, Point3, PointCloud};
use poco::io::{format_obj, format_xyz, parse_obj, parse_xyz};
use poco::metrics::{chamfer_l1, fscore, iou_occupancy};
use poco::tta::plan_subsamples;
use poco::Mesh;
use proptest::prelude::*;

fn points(max: usize) -> impl Strategy<Value = Vec<Point3<f64>>> {
    prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64), 1..max)
        .prop_map(|v| v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kdtree_matches_brute_force(pts in points(200), q in (-12.0..12.0f64, -12.0..12.0f64, -12.0..12.0f64), k in 1usize..20) {
        let q = Point3::new(q.0, q.1, q.2);
        let tree = KdTree::from_points(pts.clone()).unwrap();
        prop_assert_eq!(tree.knn(q, k), knn_brute(&pts, q, k));
    }

    #[test]
    fn subsample_plans_are_balanced(n in 1usize..120, frac in 0.05..1.0f64, views in 1usize..6, seed in 0u64..1000) {
        let size = ((n as f64 * frac).ceil() as usize).clamp(1, n);
        let plan = plan_subsamples(n, size, views, seed).unwrap();
        let mut counts = vec![0usize; n];
        for s in &plan.subsamples {
            prop_assert_eq!(s.len(), size);
            prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
            for &i in s {
                counts[i] += 1;
            }
        }
        prop_assert_eq!(&counts, &plan.counts);
        let min = *counts.iter().min().unwrap();
        let max = *counts.iter().max().unwrap();
        prop_assert!(min >= views && max - min <= 1);
    }

    #[test]
    fn chamfer_is_symmetric_and_zero_on_itself(a in points(60), b in points(60)) {
        prop_assert_eq!(chamfer_l1(&a, &a).unwrap(), 0.0);
        let ab = chamfer_l1(&a, &b).unwrap();
        let ba = chamfer_l1(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        prop_assert_eq!(fscore(&a, &a, 1e-9).unwrap(), 1.0);
    }

    #[test]
    fn iou_is_bounded_and_symmetric(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..100)) {
        let (p, g): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let a = iou_occupancy(&p, &g).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a, iou_occupancy(&g, &p).unwrap());
    }

    #[test]
    fn xyz_round_trip_is_exact(pts in points(50)) {
        let cloud = PointCloud::new(pts).unwrap();
        let back: PointCloud<f64> = parse_xyz(&format_xyz(&cloud), "p").unwrap();
        prop_assert_eq!(back.points(), cloud.points());
    }

    #[test]
    fn obj_round_trip_is_exact(pts in points(30), tris in prop::collection::vec((0usize..1000, 0usize..1000, 0usize..1000), 0..40)) {
        let n = pts.len();
        let triangles = tris.into_iter().map(|(a, b, c)| [a % n, b % n, c % n]).collect();
        let mesh = Mesh::new(pts, triangles).unwrap();
        let back: Mesh = parse_obj(&format_obj(&mesh), "p").unwrap();
        prop_assert_eq!(back, mesh);
    }
}
