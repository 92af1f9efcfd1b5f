use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use poco::geometry::{add_gaussian_noise, rescale_to_reference, Mesh, PointCloud};
use poco::io::{load_model, read_obj, read_xyz, save_model, write_obj, write_xyz, RunConfig};
use poco::mesher::{mc_dense, mc_regro, GridSpec};
use poco::metrics::{evaluate_reconstruction, EvalOptions, GroundTruth, NormalMode};
use poco::model::{train_with_progress, AnalyticField, LatentField, PocoModel};
use poco::probe::receptive_field_probe;
use poco::tta::{encode_chunked, encode_with_tta, plan_chunks, plan_subsamples};

/// Occupancy-field surface reconstruction from point clouds.
#[derive(Parser)]
#[command(name = "poco", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on noisy samples of an analytic shape.
    Train(TrainArgs),
    /// Mesh the surface of a point cloud with a trained model.
    Reconstruct(ReconstructArgs),
    /// Compare a predicted mesh with a reference.
    Eval(EvalArgs),
    /// Write noisy surface samples of an analytic shape as XYZ.
    Sample(SampleArgs),
    /// List the input points that influence one point's latent vector.
    Probe(ProbeArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_parser = ["sphere", "box", "torus"])]
    shape: String,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Standard deviation of the input noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Input points per training batch.
    #[arg(long)]
    points: Option<usize>,
    /// Query points per training batch.
    #[arg(long)]
    queries: Option<usize>,
    /// `key = value` settings file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Cells along the longest side of the padded input box.
    #[arg(long, conflicts_with = "grid_step")]
    grid_res: Option<usize>,
    #[arg(long)]
    grid_step: Option<f64>,
    /// Minimum number of encodings per point.
    #[arg(long)]
    tta: Option<usize>,
    /// Points per TTA subsample; defaults to the whole cloud for one view and
    /// half of it otherwise.
    #[arg(long)]
    subsample_size: Option<usize>,
    /// Encode clouds larger than this in overlapping kNN chunks.
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Rescale the input to this mean nearest-neighbor distance before
    /// encoding; the mesh is mapped back to the input frame.
    #[arg(long)]
    rescale_nn: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Evaluate every grid corner instead of growing from the input points.
    #[arg(long)]
    dense: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, conflicts_with = "gt_shape", required_unless_present = "gt_shape")]
    gt_mesh: Option<PathBuf>,
    #[arg(long, value_parser = ["sphere", "box", "torus"])]
    gt_shape: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    fs_threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Signed instead of absolute normal consistency.
    #[arg(long)]
    signed_normals: bool,
    /// Also print `key=value` lines.
    #[arg(long)]
    key_value: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_parser = ["sphere", "box", "torus"])]
    shape: String,
    #[arg(long, default_value_t = 3000)]
    count: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep the exact surface normals as three extra columns.
    #[arg(long)]
    normals: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    index: usize,
    #[arg(long, default_value_t = poco::probe::DEFAULT_PROBE_THRESHOLD)]
    threshold: f64,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn base_config(path: &Option<PathBuf>) -> AnyResult<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn override_with<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run_train(args: TrainArgs) -> AnyResult<()> {
    let mut cfg = base_config(&args.config)?;
    override_with(&mut cfg.steps, args.steps);
    override_with(&mut cfg.seed, args.seed);
    override_with(&mut cfg.noise_sigma, args.noise);
    override_with(&mut cfg.train_points, args.points);
    override_with(&mut cfg.train_queries, args.queries);
    cfg.validate()?;

    let field = AnalyticField::<f64>::by_name(&args.shape)?;
    let mut model = PocoModel::<f64>::new(cfg.model_config(), cfg.seed)?;
    let opts = cfg.train_options();
    let start = Instant::now();
    let report_every = (opts.steps / 20).max(1);
    let log = train_with_progress(&mut model, &field, &opts, |step, loss| {
        if (step + 1) % report_every == 0 || step + 1 == opts.steps {
            eprintln!("step {:>6}/{}  loss {loss:.5}", step + 1, opts.steps);
        }
    })?;
    save_model(&model, &args.out)?;
    eprintln!(
        "trained {} steps in {:.1?}; final loss {:.5}; wrote {}",
        log.losses.len(),
        start.elapsed(),
        log.losses.last().copied().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}

fn encode(
    model: &PocoModel<f64>,
    cloud: &PointCloud<f64>,
    cfg: &RunConfig,
) -> AnyResult<LatentField<f64>> {
    let n = cloud.len();
    if let Some(chunk) = cfg.chunk_size.filter(|&c| n > c) {
        let plan = plan_chunks(cloud, chunk, cfg.chunk_views, cfg.seed)?;
        eprintln!("encoding {n} points in {} chunks", plan.chunks.len());
        return Ok(encode_chunked(model, cloud, &plan)?);
    }
    if !cfg.tta {
        return Ok(model.encode(cloud)?);
    }
    let size = cfg.subsample_size.unwrap_or(if cfg.tta_views == 1 {
        n
    } else {
        n.div_ceil(2)
    });
    let plan = plan_subsamples(n, size.min(n), cfg.tta_views, cfg.seed)?;
    eprintln!(
        "encoding {n} points over {} subsamples of {}",
        plan.subsamples.len(),
        size.min(n)
    );
    Ok(encode_with_tta(model, cloud, &plan)?)
}

fn run_reconstruct(args: ReconstructArgs) -> AnyResult<()> {
    let mut cfg = base_config(&args.config)?;
    if let Some(r) = args.grid_res {
        cfg.grid_res = r;
        cfg.grid_step = None;
    }
    if args.grid_step.is_some() {
        cfg.grid_step = args.grid_step;
    }
    if let Some(v) = args.tta {
        cfg.tta = true;
        cfg.tta_views = v;
    }
    if args.subsample_size.is_some() {
        cfg.subsample_size = args.subsample_size;
    }
    if args.chunk_size.is_some() {
        cfg.chunk_size = args.chunk_size;
    }
    if args.rescale_nn.is_some() {
        cfg.rescale_nn = args.rescale_nn;
    }
    override_with(&mut cfg.threshold, args.threshold);
    override_with(&mut cfg.seed, args.seed);
    cfg.dense_mesher |= args.dense;
    cfg.validate()?;

    let start = Instant::now();
    let model: PocoModel<f64> = load_model(&args.model)?;
    let input: PointCloud<f64> = read_xyz(&args.input)?;
    let cloud = if model.config().use_normals {
        if !input.has_normals() {
            return Err("the model expects normals but the input has none".into());
        }
        input
    } else {
        input.without_normals()
    };

    let (cloud, back) = match cfg.rescale_nn {
        Some(d) => {
            let c = cloud.centroid();
            let (scaled, s) = rescale_to_reference(&cloud, d)?;
            (scaled, Some((c, s)))
        }
        None => (cloud, None),
    };

    let latents = encode(&model, &cloud, &cfg)?;
    let field = model.field(&latents)?;
    let bounds = cloud.aabb().inflated(0.05);
    let grid = match cfg.grid_step {
        Some(step) => GridSpec::with_step(&bounds, step * back.map_or(1.0, |(_, s)| s))?,
        None => GridSpec::fit(&bounds, cfg.grid_res)?,
    };
    let opts = cfg.meshing_options();
    let out = if cfg.dense_mesher {
        mc_dense(&field, &grid, &opts)?
    } else {
        mc_regro(&field, &grid, &cloud, &opts)?
    };
    let mesh: Mesh<f64> = match back {
        Some((c, s)) => out.mesh.map_vertices(|v| c + (v - c) / s),
        None => out.mesh,
    };
    write_obj(&mesh, &args.out)?;
    eprintln!(
        "grid {:?}, {} occupancy evaluations, {} vertices, {} triangles in {:.1?}; wrote {}",
        grid.dims,
        out.stats.total_evaluations(),
        mesh.vertices.len(),
        mesh.triangles.len(),
        start.elapsed(),
        args.out.display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> AnyResult<()> {
    let mut cfg = base_config(&args.config)?;
    override_with(&mut cfg.eval_samples, args.samples);
    override_with(&mut cfg.fscore_threshold, args.fs_threshold);
    override_with(&mut cfg.seed, args.seed);
    cfg.validate()?;

    let pred: Mesh<f64> = read_obj(&args.pred)?;
    let gt = match (&args.gt_mesh, &args.gt_shape) {
        (Some(path), _) => GroundTruth::Mesh(read_obj(path)?),
        (None, Some(name)) => GroundTruth::Analytic(AnalyticField::by_name(name)?),
        (None, None) => unreachable!("clap requires one reference"),
    };
    let report = evaluate_reconstruction(
        &pred,
        &gt,
        &EvalOptions {
            surface_samples: cfg.eval_samples,
            volume_samples: cfg.eval_samples,
            seed: cfg.seed,
            fscore_threshold: cfg.fscore_threshold,
            normal_mode: if args.signed_normals {
                NormalMode::Signed
            } else {
                NormalMode::Absolute
            },
        },
    )?;
    println!("{report}");
    if args.key_value {
        print!("{}", report.key_values());
    }
    Ok(())
}

fn run_sample(args: SampleArgs) -> AnyResult<()> {
    let field = AnalyticField::<f64>::by_name(&args.shape)?;
    let exact = field.sample_surface(args.count, args.seed)?;
    let cloud = if args.normals {
        exact
    } else {
        exact.without_normals()
    };
    write_xyz(&add_gaussian_noise(&cloud, args.noise, args.seed.wrapping_add(1)), &args.out)?;
    Ok(())
}

fn run_probe(args: ProbeArgs) -> AnyResult<()> {
    let model: PocoModel<f64> = load_model(&args.model)?;
    let cloud: PointCloud<f64> = read_xyz(&args.input)?;
    let cloud = if model.config().use_normals {
        cloud
    } else {
        cloud.without_normals()
    };
    let indices = receptive_field_probe(&model, &cloud, args.index, args.threshold)?;
    for i in indices {
        println!("{i}");
    }
    Ok(())
}

fn configure_threads() -> AnyResult<()> {
    if let Ok(raw) = std::env::var("POCO_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| format!("POCO_THREADS must be a positive integer, got {raw:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Train(a) => run_train(a),
        Command::Reconstruct(a) => run_reconstruct(a),
        Command::Eval(a) => run_eval(a),
        Command::Sample(a) => run_sample(a),
        Command::Probe(a) => run_probe(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
