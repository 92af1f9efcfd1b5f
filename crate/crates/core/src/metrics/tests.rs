use super::*;
use crate::mesher::{mc_dense, GridSpec, MeshingOptions};
use crate::geometry::Aabb;

fn random_points(n: usize, seed: u64) -> Vec<Point3<f64>> {
    let mut rng = seeded_rng(seed);
    (0..n)
        .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
        .collect()
}

fn random_cloud(n: usize, seed: u64) -> PointCloud<f64> {
    let points = random_points(n, seed);
    let normals = random_points(n, seed + 100)
        .into_iter()
        .map(|p| (p - Point3::splat(0.5)).normalized())
        .collect();
    PointCloud::with_normals(points, normals).unwrap()
}

fn oracle_chamfer(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    let side = |x: &[Point3<f64>], y: &[Point3<f64>]| {
        let mut s = 0.0;
        for p in x {
            let mut best = f64::INFINITY;
            for q in y {
                let d = (p.x - q.x).abs() + (p.y - q.y).abs() + (p.z - q.z).abs();
                best = best.min(d);
            }
            s += best;
        }
        s / x.len() as f64
    };
    0.5 * side(a, b) + 0.5 * side(b, a)
}

fn closest(p: Point3<f64>, y: &[Point3<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, q) in y.iter().enumerate() {
        let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2)).sqrt();
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn oracle_nc(a: &PointCloud<f64>, b: &PointCloud<f64>, signed: bool) -> f64 {
    let side = |x: &PointCloud<f64>, y: &PointCloud<f64>| {
        let mut s = 0.0;
        for (p, n) in x.points().iter().zip(x.normals().unwrap()) {
            let (j, _) = closest(*p, y.points());
            let m = y.normals().unwrap()[j];
            let c = n.x * m.x + n.y * m.y + n.z * m.z;
            s += if signed { c } else { c.abs() };
        }
        s / x.len() as f64
    };
    0.5 * side(a, b) + 0.5 * side(b, a)
}

fn oracle_fscore(a: &[Point3<f64>], b: &[Point3<f64>], t: f64) -> f64 {
    let frac = |x: &[Point3<f64>], y: &[Point3<f64>]| {
        x.iter().filter(|&&p| closest(p, y).1 < t).count() as f64 / x.len() as f64
    };
    let (r, p) = (frac(a, b), frac(b, a));
    if r + p == 0.0 {
        0.0
    } else {
        2.0 * r * p / (r + p)
    }
}

#[test]
fn chamfer_examples() {
    let p = random_points(50, 1);
    assert_eq!(chamfer_l1(&p, &p).unwrap(), 0.0);
    let one = chamfer_l1(&[Point3::zero()], &[Point3::new(1.0, 0.0, 0.0)]).unwrap();
    assert_eq!(one, 1.0);
    assert!(chamfer_l1::<f64>(&[], &p).is_err());
}

#[test]
fn metrics_match_double_loop_oracles() {
    for seed in 0..4 {
        let a = random_cloud(200, seed);
        let b = random_cloud(230, seed + 10);
        let cd = chamfer_l1(a.points(), b.points()).unwrap();
        assert!((cd - oracle_chamfer(a.points(), b.points())).abs() < 1e-12);
        for (mode, signed) in [(NormalMode::Absolute, false), (NormalMode::Signed, true)] {
            let nc = normal_consistency(&a, &b, mode).unwrap();
            assert!((nc - oracle_nc(&a, &b, signed)).abs() < 1e-12);
        }
        for t in [0.01, 0.05, 0.1] {
            let fs = fscore(a.points(), b.points(), t).unwrap();
            assert!((fs - oracle_fscore(a.points(), b.points(), t)).abs() < 1e-12);
        }
    }
}

#[test]
fn normal_examples() {
    let a = random_cloud(40, 3);
    assert!((normal_consistency(&a, &a, NormalMode::Absolute).unwrap() - 1.0).abs() < 1e-12);
    let p = vec![Point3::zero()];
    let x = PointCloud::with_normals(p.clone(), vec![Point3::new(1.0, 0.0, 0.0)]).unwrap();
    let y = PointCloud::with_normals(p, vec![Point3::new(0.0, 1.0, 0.0)]).unwrap();
    assert_eq!(normal_consistency(&x, &y, NormalMode::Absolute).unwrap(), 0.0);
    let flipped = a.map_points(|p| p).unwrap();
    let neg = PointCloud::with_normals(
        flipped.points().to_vec(),
        a.normals().unwrap().iter().map(|&n| -n).collect(),
    )
    .unwrap();
    assert!((normal_consistency(&a, &neg, NormalMode::Absolute).unwrap() - 1.0).abs() < 1e-12);
    assert!((normal_consistency(&a, &neg, NormalMode::Signed).unwrap() + 1.0).abs() < 1e-12);
    assert!(normal_consistency(&a.without_normals(), &a, NormalMode::Absolute).is_err());
}

#[test]
fn fscore_examples_and_monotonicity() {
    let a = random_points(100, 5);
    assert_eq!(fscore(&a, &a, 0.01).unwrap(), 1.0);
    let far: Vec<_> = a.iter().map(|&p| p + Point3::splat(10.0)).collect();
    assert_eq!(fscore(&a, &far, 0.01).unwrap(), 0.0);
    assert!(fscore(&a, &a, 0.0).is_err());
    let b = random_points(120, 6);
    let mut prev = 0.0;
    for i in 1..40 {
        let fs = fscore(&a, &b, i as f64 * 0.005).unwrap();
        assert!(fs >= prev);
        prev = fs;
    }
}

#[test]
fn symmetric_and_rigid_invariant() {
    let a = random_cloud(150, 7);
    let b = random_cloud(170, 8);
    let sym = |x: f64, y: f64| assert!((x - y).abs() < 1e-12, "{x} {y}");
    sym(
        chamfer_l1(a.points(), b.points()).unwrap(),
        chamfer_l1(b.points(), a.points()).unwrap(),
    );
    sym(
        normal_consistency(&a, &b, NormalMode::Absolute).unwrap(),
        normal_consistency(&b, &a, NormalMode::Absolute).unwrap(),
    );
    sym(
        fscore(a.points(), b.points(), 0.05).unwrap(),
        fscore(b.points(), a.points(), 0.05).unwrap(),
    );

    // Quarter turn about z plus a translation keeps L1 distances too.
    let t = Point3::new(0.3, -2.0, 5.0);
    let rot = |p: Point3<f64>| Point3::new(-p.y, p.x, p.z);
    let move_cloud = |c: &PointCloud<f64>| {
        PointCloud::with_normals(
            c.points().iter().map(|&p| rot(p) + t).collect(),
            c.normals().unwrap().iter().map(|&n| rot(n)).collect(),
        )
        .unwrap()
    };
    let (ma, mb) = (move_cloud(&a), move_cloud(&b));
    let close = |x: f64, y: f64| assert!((x - y).abs() < 1e-9);
    close(
        chamfer_l1(a.points(), b.points()).unwrap(),
        chamfer_l1(ma.points(), mb.points()).unwrap(),
    );
    close(
        normal_consistency(&a, &b, NormalMode::Absolute).unwrap(),
        normal_consistency(&ma, &mb, NormalMode::Absolute).unwrap(),
    );
    close(
        fscore(a.points(), b.points(), 0.05).unwrap(),
        fscore(ma.points(), mb.points(), 0.05).unwrap(),
    );
}

#[test]
fn iou_examples() {
    let l = [true, false, true, true];
    assert_eq!(iou_occupancy(&l, &l).unwrap(), 1.0);
    assert_eq!(iou_occupancy(&[false; 5], &[false; 5]).unwrap(), 1.0);
    let gt = [true, false, true, false];
    assert_eq!(iou_occupancy(&[true; 4], &gt).unwrap(), 0.5);
    assert!(iou_occupancy(&[true], &[true, false]).is_err());

    let mut rng = seeded_rng(2);
    let pred: Vec<bool> = (0..500).map(|_| rng.random()).collect();
    let gt: Vec<bool> = (0..500).map(|_| rng.random()).collect();
    let tp = (0..500).filter(|&i| pred[i] && gt[i]).count();
    let fp = (0..500).filter(|&i| pred[i] && !gt[i]).count();
    let fn_ = (0..500).filter(|&i| !pred[i] && gt[i]).count();
    let want = tp as f64 / (tp + fp + fn_) as f64;
    assert_eq!(iou_occupancy(&pred, &gt).unwrap(), want);
}

fn sphere_mesh(res: usize) -> Mesh<f64> {
    let grid = GridSpec::fit(&Aabb::new(Point3::splat(-1.0), Point3::splat(1.0)), res).unwrap();
    mc_dense(&AnalyticField::unit_sphere(), &grid, &MeshingOptions::default())
        .unwrap()
        .mesh
}

#[test]
fn containment_of_cube_and_sphere() {
    // Axis-aligned unit cube; several rays pass through shared edges.
    let v: Vec<Point3<f64>> = (0..8)
        .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let tris = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    let cube = Mesh::new(v, tris).unwrap();
    let inside = MeshContainment::new(&cube);
    assert!(inside.contains(Point3::splat(0.5)));
    assert!(inside.contains(Point3::new(0.5, 0.5, 0.1)));
    assert!(inside.contains(Point3::new(0.25, 0.25, 0.9)));
    assert!(!inside.contains(Point3::new(0.5, 0.5, 1.5)));
    assert!(!inside.contains(Point3::new(0.5, 0.5, -0.5)));
    assert!(!inside.contains(Point3::new(1.5, 0.5, 0.5)));

    let sphere = AnalyticField::<f64>::unit_sphere();
    let mesh = sphere_mesh(32);
    let inside = MeshContainment::new(&mesh);
    let mut rng = seeded_rng(4);
    let mut wrong = 0;
    for _ in 0..2000 {
        let q: Point3<f64> = Point3::new(
            rng.random_range(-0.7..0.7),
            rng.random_range(-0.7..0.7),
            rng.random_range(-0.7..0.7),
        );
        if (q.norm() - 0.5).abs() > 0.01 && inside.contains(q) != sphere.contains(q) {
            wrong += 1;
        }
    }
    assert_eq!(wrong, 0);
    assert!(!MeshContainment::new(&Mesh::<f64>::empty()).contains(Point3::zero()));
}

#[test]
fn evaluate_mesh_against_itself_and_analytic() {
    let mesh = sphere_mesh(64);
    let opts = EvalOptions {
        surface_samples: 20_000,
        volume_samples: 20_000,
        seed: 3,
        fscore_threshold: 0.02,
        normal_mode: NormalMode::Absolute,
    };
    // Random samples leave gaps a few times the mean spacing (≈0.0125 here).
    let self_opts = EvalOptions {
        fscore_threshold: 0.05,
        ..opts
    };
    let own =
        evaluate_reconstruction(&mesh, &GroundTruth::Mesh(mesh.clone()), &self_opts).unwrap();
    assert!(own.normal_consistency > 0.99, "{own}");
    assert_eq!(own.fscore, 1.0);
    assert_eq!(own.iou, 1.0);
    assert!(own.chamfer_x100 < 1.0);
    assert!(!own.open_prediction);

    let report = evaluate_reconstruction(
        &mesh,
        &GroundTruth::Analytic(AnalyticField::unit_sphere()),
        &opts,
    )
    .unwrap();
    assert!(report.iou > 0.99, "{report}");
    assert!(report.fscore > 0.99);
    assert!(report.key_values().contains("iou="));
}
