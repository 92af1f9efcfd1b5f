mod common;

use common::{oracle_latents, oracle_occupancy, tiny_config};
use poco::geometry::{Point3, PointCloud};
use poco::model::{make_training_batch, train, AnalyticField, PocoConfig, PocoModel, TrainOptions};
use poco::numerics::{finite_diff_check, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cloud(n: usize, seed: u64) -> PointCloud<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                )
            })
            .collect(),
    )
    .unwrap()
}

fn random_queries(n: usize, seed: u64) -> Vec<Point3<f64>> {
    random_cloud(n, seed).points().to_vec()
}

/// Randomizes biases too, so the oracle exercises every parameter.
fn randomized(cfg: PocoConfig, seed: u64) -> PocoModel<f64> {
    let mut m = PocoModel::new(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for p in m.params_mut().iter_mut() {
        if p.name.ends_with(".b") {
            for v in p.value.data_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
    }
    m
}

#[test]
fn occupancy_matches_straight_line_oracle() {
    let cfg = PocoConfig {
        latent_size: 4,
        neighbors: 5,
        heads: 2,
        encoder_layers: 2,
        encoder_neighbors: 4,
        hidden: 6,
        use_normals: false,
        centered: true,
    };
    let model = randomized(cfg, 11);
    let cloud = random_cloud(20, 1);
    let field = model.encode(&cloud).unwrap();
    let oracle_z = oracle_latents(&model, &cloud);
    for (i, z) in oracle_z.iter().enumerate() {
        for (c, &v) in z.iter().enumerate() {
            assert!((field.latents().get(i, c) - v).abs() < 1e-12);
        }
    }
    for q in random_queries(50, 2) {
        let got = model.occupancy(&field, q).unwrap();
        let want = oracle_occupancy(&model, &cloud, &oracle_z, q);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn oracle_with_normals() {
    let cfg = PocoConfig {
        use_normals: true,
        ..tiny_config()
    };
    let model = randomized(cfg, 5);
    let cloud = AnalyticField::<f64>::unit_sphere()
        .sample_surface(24, 9)
        .unwrap();
    let field = model.encode(&cloud).unwrap();
    let z = oracle_latents(&model, &cloud);
    for q in random_queries(10, 4) {
        let got = model.occupancy(&field, q).unwrap();
        assert!((got - oracle_occupancy(&model, &cloud, &z, q)).abs() < 1e-10);
    }
}

#[test]
fn batch_equals_scalar_loop() {
    let cfg = PocoConfig {
        neighbors: 8,
        heads: 4,
        ..tiny_config()
    };
    let model = randomized(cfg, 3);
    let field = model.encode(&random_cloud(64, 7)).unwrap();
    let queries = random_queries(1000, 8);
    let batch = model.occupancy_batch(&field, &queries).unwrap();
    for (q, b) in queries.iter().zip(&batch) {
        assert_eq!(model.occupancy(&field, *q).unwrap(), *b);
    }
    let mut rev = queries.clone();
    rev.reverse();
    let mut back = model.occupancy_batch(&field, &rev).unwrap();
    back.reverse();
    assert_eq!(back, batch);
}

#[test]
fn permutation_equivariance() {
    let model = randomized(tiny_config(), 21);
    let cloud = random_cloud(30, 5);
    let mut perm: Vec<usize> = (0..30).collect();
    perm.reverse();
    perm.swap(3, 17);
    let permuted = cloud.subset(&perm).unwrap();
    let a = model.encode(&cloud).unwrap();
    let b = model.encode(&permuted).unwrap();
    for (new, &old) in perm.iter().enumerate() {
        for c in 0..4 {
            assert!((a.latents().get(old, c) - b.latents().get(new, c)).abs() < 1e-12);
        }
    }
    for q in random_queries(40, 6) {
        let (pa, pb) = (
            model.occupancy(&a, q).unwrap(),
            model.occupancy(&b, q).unwrap(),
        );
        assert!((pa - pb).abs() < 1e-10);
    }
}

#[test]
fn translation_invariance_with_centering() {
    let model = randomized(tiny_config(), 8);
    let cloud = random_cloud(30, 9);
    let t = Point3::new(3.25, -1.5, 0.75);
    let moved = cloud.map_points(|p| p + t).unwrap();
    let a = model.encode(&cloud).unwrap();
    let b = model.encode(&moved).unwrap();
    assert!(a.latents().max_abs_diff(b.latents()) < 1e-12);
    for q in random_queries(40, 10) {
        let d = (model.occupancy(&a, q).unwrap() - model.occupancy(&b, q + t).unwrap()).abs();
        assert!(d < 1e-8);
    }

    // Without centering, absolute coordinates leak into the first layer.
    let mut raw = model.clone();
    raw.set_centered(false);
    let a = raw.encode(&cloud).unwrap();
    let b = raw.encode(&moved).unwrap();
    assert!(a.latents().max_abs_diff(b.latents()) > 1e-6);
}

#[test]
fn end_to_end_gradient_check() {
    let cfg = tiny_config();
    let mut model = randomized(cfg, 4);
    let batch =
        make_training_batch(&AnalyticField::unit_sphere(), 16, 12, 0.02, 3).unwrap();
    model.params_mut().zero_grad();
    model.loss_and_grad(&batch).unwrap();
    let mut params = model.params().clone();
    let report = finite_diff_check(&mut params, |p| model.batch_loss(p, &batch).unwrap(), 1e-5);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
    assert_eq!(report.checked, model.params().scalar_count());
}

#[test]
fn gradient_check_with_normals_and_two_layers() {
    let cfg = PocoConfig {
        encoder_layers: 2,
        use_normals: true,
        ..tiny_config()
    };
    let mut model = randomized(cfg, 14);
    let batch = make_training_batch(&AnalyticField::unit_torus(), 20, 10, 0.01, 5).unwrap();
    model.params_mut().zero_grad();
    model.loss_and_grad(&batch).unwrap();
    let mut params = model.params().clone();
    let report = finite_diff_check(&mut params, |p| model.batch_loss(p, &batch).unwrap(), 1e-5);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn training_batch_properties() {
    let sphere = AnalyticField::<f64>::unit_sphere();
    let b = make_training_batch(&sphere, 100, 300, 0.0, 1).unwrap();
    for p in b.cloud.points() {
        assert!((p.norm() - 0.5).abs() < 1e-9);
    }
    for (q, &l) in b.queries.iter().zip(&b.labels) {
        assert_eq!(l == 1, q.norm() <= 0.5);
        assert!(q.x.abs() <= 0.55 && q.y.abs() <= 0.55 && q.z.abs() <= 0.55);
    }
    assert_eq!(b, make_training_batch(&sphere, 100, 300, 0.0, 1).unwrap());
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let mut model = PocoModel::<f64>::new(tiny_config(), 2).unwrap();
    let before = model.clone();
    let opts = TrainOptions {
        steps: 1,
        batch_points: 32,
        batch_queries: 16,
        lr: 0.0,
        noise_sigma: 0.0,
        seed: 1,
    };
    train(&mut model, &AnalyticField::unit_sphere(), &opts).unwrap();
    for (a, b) in model.params().iter().zip(before.params().iter()) {
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn training_reduces_loss_and_is_reproducible() {
    let cfg = PocoConfig {
        latent_size: 16,
        neighbors: 16,
        heads: 8,
        encoder_layers: 2,
        encoder_neighbors: 8,
        hidden: 16,
        use_normals: false,
        centered: true,
    };
    let opts = TrainOptions {
        steps: 2000,
        batch_points: 512,
        batch_queries: 200,
        lr: 1e-3,
        noise_sigma: 0.02,
        seed: 7,
    };
    let run = || {
        let mut model = PocoModel::<f64>::new(cfg, 1).unwrap();
        let log = train(&mut model, &AnalyticField::unit_sphere(), &opts).unwrap();
        (model, log)
    };
    let (model, log) = run();
    let head: f64 = log.losses[..50].iter().sum::<f64>() / 50.0;
    let tail: f64 = log.losses[log.losses.len() - 50..].iter().sum::<f64>() / 50.0;
    assert!(log.losses.iter().all(|l| l.is_finite()));
    assert!(tail < head, "loss {head} -> {tail}");

    let (model2, log2) = run();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&log.losses), bits(&log2.losses));
    assert_eq!(model, model2);
}

#[test]
fn model_occupancy_rejects_mismatched_field() {
    let model = PocoModel::<f64>::new(tiny_config(), 0).unwrap();
    let cloud = random_cloud(8, 0);
    let field = poco::model::LatentField::new(cloud, Matrix::zeros(8, 3)).unwrap();
    assert!(model.occupancy(&field, Point3::zero()).is_err());
}
