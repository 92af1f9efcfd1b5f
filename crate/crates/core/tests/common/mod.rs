//! Test-only oracles, written independently of the library's code paths.
#![allow(dead_code)]

use poco::geometry::{knn_brute, Point3, PointCloud};
use poco::model::{PocoConfig, PocoModel};
use poco::numerics::Matrix;

fn mat_vec(w: &Matrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|r| (0..w.cols()).map(|c| w.get(r, c) * x[c]).sum())
        .collect()
}

fn param<'a>(model: &'a PocoModel<f64>, name: &str) -> &'a Matrix<f64> {
    &model
        .params()
        .iter()
        .find(|p| p.name == name)
        .unwrap_or_else(|| panic!("no parameter {name}"))
        .value
}

/// Latents by explicit per-pair message evaluation.
pub fn oracle_latents(model: &PocoModel<f64>, cloud: &PointCloud<f64>) -> Vec<Vec<f64>> {
    let cfg = model.config();
    let n = cloud.len();
    let c = if cfg.centered {
        let mut s = Point3::zero();
        for &p in cloud.points() {
            s = s + p;
        }
        s / n as f64
    } else {
        Point3::zero()
    };
    let pos: Vec<Point3<f64>> = cloud.points().iter().map(|&p| p - c).collect();
    let mut feats: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut f = pos[i].to_array().to_vec();
            if cfg.use_normals {
                f.extend(cloud.normals().unwrap()[i].to_array());
            }
            f
        })
        .collect();
    for l in 0..cfg.encoder_layers {
        let wm = param(model, &format!("encoder.{l}.message.w"));
        let bm = param(model, &format!("encoder.{l}.message.b"));
        let wr = param(model, &format!("encoder.{l}.residual.w"));
        let mut next = Vec::with_capacity(n);
        for i in 0..n {
            let nbrs = knn_brute(&pos, pos[i], cfg.encoder_neighbors);
            let mut agg = vec![f64::NEG_INFINITY; cfg.hidden];
            for nb in nbrs {
                let j = nb.index;
                let mut x = feats[j].clone();
                x.extend((pos[j] - pos[i]).to_array());
                let m = mat_vec(wm, &x);
                for h in 0..cfg.hidden {
                    agg[h] = agg[h].max(m[h] + bm.get(h, 0));
                }
            }
            let res = mat_vec(wr, &feats[i]);
            next.push(
                (0..cfg.hidden)
                    .map(|h| (agg[h] + res[h]).max(0.0))
                    .collect::<Vec<_>>(),
            );
        }
        feats = next;
    }
    let wo = param(model, "encoder.out.w");
    let bo = param(model, "encoder.out.b");
    feats
        .iter()
        .map(|f| {
            mat_vec(wo, f)
                .iter()
                .enumerate()
                .map(|(r, v)| v + bo.get(r, 0))
                .collect()
        })
        .collect()
}

/// Full occupancy by straight-line recomputation.
pub fn oracle_occupancy(
    model: &PocoModel<f64>,
    cloud: &PointCloud<f64>,
    latents: &[Vec<f64>],
    q: Point3<f64>,
) -> f64 {
    let cfg = model.config();
    let nbrs = knn_brute(cloud.points(), q, cfg.neighbors);
    let layer = |x: &[f64], i: usize, act: bool| -> Vec<f64> {
        let w = param(model, &format!("relative.{i}.w"));
        let b = param(model, &format!("relative.{i}.b"));
        mat_vec(w, x)
            .iter()
            .enumerate()
            .map(|(r, v)| {
                let y = v + b.get(r, 0);
                if act {
                    y.max(0.0)
                } else {
                    y
                }
            })
            .collect()
    };
    let zrel: Vec<Vec<f64>> = nbrs
        .iter()
        .map(|nb| {
            let mut x = latents[nb.index].clone();
            x.extend((q - cloud.points()[nb.index]).to_array());
            layer(&layer(&layer(&x, 1, true), 2, true), 3, false)
        })
        .collect();
    let att = param(model, "attention.w");
    let k = zrel.len();
    let mut s = vec![0.0; k];
    for head in 0..cfg.heads {
        let logits: Vec<f64> = zrel
            .iter()
            .map(|z| (0..z.len()).map(|c| att.get(head, c) * z[c]).sum())
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let tot: f64 = e.iter().sum();
        for p in 0..k {
            s[p] += e[p] / tot / cfg.heads as f64;
        }
    }
    let n = cfg.latent_size;
    let zq: Vec<f64> = (0..n)
        .map(|c| (0..k).map(|p| s[p] * zrel[p][c]).sum())
        .collect();
    let dw = param(model, "decoder.w");
    let db = param(model, "decoder.b");
    let l: Vec<f64> = mat_vec(dw, &zq)
        .iter()
        .enumerate()
        .map(|(r, v)| v + db.get(r, 0))
        .collect();
    1.0 / (1.0 + (l[0] - l[1]).exp())
}

pub fn tiny_config() -> PocoConfig {
    PocoConfig {
        latent_size: 4,
        neighbors: 4,
        heads: 2,
        encoder_layers: 1,
        encoder_neighbors: 4,
        hidden: 8,
        use_normals: false,
        centered: true,
    }
}

/// Breadth-first closure of the directed kNN graph (`i → kNN(i)`).
pub fn knn_closure(points: &[Point3<f64>], start: usize, k: usize, hops: usize) -> Vec<usize> {
    let mut seen = vec![false; points.len()];
    seen[start] = true;
    let mut frontier = vec![start];
    for _ in 0..hops {
        let mut next = Vec::new();
        for &i in &frontier {
            for nb in knn_brute(points, points[i], k) {
                if !seen[nb.index] {
                    seen[nb.index] = true;
                    next.push(nb.index);
                }
            }
        }
        frontier = next;
    }
    (0..points.len()).filter(|&i| seen[i]).collect()
}
