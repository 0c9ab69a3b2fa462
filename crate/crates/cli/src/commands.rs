use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sinco::codec::{decompress, write_segmenter, CompressedContainer};
use sinco::imageio::{load_image, load_mask, read_pgm, save_image, save_image_16, synth_phantom, ImagePlane, MaskPlane};
use sinco::metrics::EvalReport;
use sinco::nets::{SegNet, SegNetConfig};
use sinco::training::{train_segmenter, SegDataset, TrainConfig};

use crate::args::*;
use crate::error::{read_input, write_output, CliError, Result};
use crate::manifest::RunManifest;
use crate::pipeline::{compress_image, load_pairs, load_segmenter, score, ArmSpec};

/// Environment variable capping the number of parallel sweep arms.
pub const THREADS_ENV: &str = "SINCO_THREADS";

pub fn run(command: &Command) -> Result<RunManifest> {
    match command {
        Command::TrainSeg(a) => cmd_train_seg(a),
        Command::Compress(a) => cmd_compress(a),
        Command::Decompress(a) => cmd_decompress(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Rerun(a) => cmd_rerun(a),
    }
}

pub fn cmd_train_seg(a: &TrainSegArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let ds = match (&a.data_dir, a.synthetic) {
        (Some(dir), None) => SegDataset::new(load_pairs(dir)?.into_iter().map(|(_, x, s)| (x, s)).collect())?,
        (None, Some(n)) => SegDataset::synthetic(n, a.seed, a.size, a.size)?,
        _ => return Err(CliError::Usage("give exactly one of --data-dir or --synthetic".into())),
    };
    let cfg = SegNetConfig {
        levels: a.levels,
        base_channels: a.base_channels,
    };
    let train = TrainConfig {
        lr: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        ..TrainConfig::segmenter()
    };
    log::info!("training segmenter on {} pairs", ds.len());
    let (g, trace) = train_segmenter(&ds, SegNet::init(cfg, a.seed)?, &train)?;
    write_output(&a.out, &write_segmenter(&g.freeze())?)?;

    let mut m = RunManifest::new(Command::TrainSeg(a.clone()), a.seed);
    m.outputs.push(a.out.clone());
    if let Some(path) = &a.trace {
        write_output(path, trace.to_csv().as_bytes())?;
        m.outputs.push(path.clone());
    }
    m.param_count = Some(cfg.param_count());
    m.final_loss = trace.last().copied();
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    m.write_beside(&a.out)?;
    Ok(m)
}

fn compress_spec(a: &CompressArgs) -> ArmSpec {
    ArmSpec {
        arch: a.arch.clone(),
        frequencies: a.frequencies,
        omega0: a.omega0,
        bpp: a.bpp,
        lambda: a.lambda,
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
    }
}

pub fn cmd_compress(a: &CompressArgs) -> Result<RunManifest> {
    let start = Instant::now();
    if a.lambda > 0.0 && (a.mask.is_none() || a.seg.is_none()) {
        return Err(CliError::Usage("--lambda > 0 requires --mask and --seg".into()));
    }
    let x = load_image(&a.input)?;
    let mask = a.mask.as_deref().map(load_mask).transpose()?;
    let seg = a.seg.as_deref().map(load_segmenter).transpose()?;
    let out = a.out.clone().unwrap_or_else(|| a.input.with_extension("sinco"));

    let arm = compress_image(&x, mask.as_ref(), seg.as_ref(), &compress_spec(a))?;
    let bpp = arm.container.bpp()?;
    if bpp > a.bpp {
        return Err(CliError::Internal(format!("achieved {bpp} bpp exceeds the requested {}", a.bpp)));
    }
    write_output(&out, &arm.container.to_bytes())?;

    let mut m = RunManifest::new(Command::Compress(a.clone()), a.seed);
    m.outputs.push(out.clone());
    if let Some(path) = &a.trace {
        write_output(path, arm.trace.to_csv().as_bytes())?;
        m.outputs.push(path.clone());
    }
    m.arch = Some(arm.model.arch().name().to_string());
    m.net = Some(*arm.model.config());
    m.param_count = Some(arm.container.weight_count());
    m.achieved_bpp = Some(bpp);
    m.final_loss = arm.trace.last().copied();
    let prior = mask.as_ref().zip(seg.as_ref());
    m.metrics = score(&x, &arm.reconstruction, prior, bpp).ok();
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    m.write_beside(&out)?;
    Ok(m)
}

pub fn read_container(path: &Path) -> Result<CompressedContainer> {
    Ok(CompressedContainer::from_bytes(&read_input(path)?)?)
}

pub fn cmd_decompress(a: &DecompressArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let c = read_container(&a.input)?;
    let xhat = decompress(&c)?;
    save_image(&xhat, &a.out)?;
    let mut m = RunManifest::new(Command::Decompress(a.clone()), 0);
    m.outputs.push(a.out.clone());
    if let Some(path) = &a.out16 {
        save_image_16(&xhat, path)?;
        m.outputs.push(path.clone());
    }
    let model = c.model()?;
    m.arch = Some(model.arch().name().to_string());
    m.net = Some(*model.config());
    m.param_count = Some(c.weight_count());
    m.achieved_bpp = Some(c.bpp()?);
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    m.write_beside(&a.out)?;
    Ok(m)
}

/// Reconstruction and its bpp: the container's payload rate, or the PGM sample depth.
fn load_reconstruction(path: &Path) -> Result<(ImagePlane, f64)> {
    if path.extension().and_then(|e| e.to_str()) == Some("sinco") {
        let c = read_container(path)?;
        return Ok((decompress(&c)?, c.bpp()?));
    }
    let pgm = read_pgm(&read_input(path)?)?;
    let bits = if pgm.maxval > 255 { 16.0 } else { 8.0 };
    Ok((load_image(path)?, bits))
}

#[derive(serde::Serialize)]
struct NamedReport<'a> {
    image: &'a str,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn named_line(image: &str, report: &EvalReport) -> String {
    serde_json::to_string(&NamedReport { image, report }).expect("report serializes")
}

fn evaluate_one(
    original: &Path,
    compressed: &Path,
    mask: Option<&Path>,
    seg: Option<&SegNet>,
) -> Result<EvalReport> {
    let x = load_image(original)?;
    let (xhat, bpp) = load_reconstruction(compressed)?;
    let mask = mask.map(load_mask).transpose()?;
    score(&x, &xhat, mask.as_ref().zip(seg), bpp)
}

fn batch_members(a: &EvaluateArgs, dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf, Option<PathBuf>)>> {
    let cdir = a.compressed_dir.as_ref().expect("clap requires it");
    let mut stems: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("pgm"))
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
        .collect();
    stems.sort();
    // In an img_K/mask_K dataset directory the masks are not originals.
    let all = stems.clone();
    stems.retain(|s| {
        s.strip_prefix("mask_")
            .map_or(true, |k| all.binary_search(&format!("img_{k}")).is_err())
    });
    if stems.is_empty() {
        return Err(CliError::Usage(format!("{}: no .pgm images", dir.display())));
    }
    stems
        .into_iter()
        .map(|stem| {
            let sinco = cdir.join(format!("{stem}.sinco"));
            let pgm = cdir.join(format!("{stem}.pgm"));
            let compressed = if sinco.exists() {
                sinco
            } else if pgm.exists() {
                pgm
            } else {
                return Err(CliError::Data(format!("no reconstruction for {stem} in {}", cdir.display())));
            };
            let mask = a.mask_dir.as_ref().map(|md| {
                let named = stem
                    .strip_prefix("img_")
                    .map(|k| md.join(format!("mask_{k}.pgm")))
                    .filter(|p| p.exists());
                named.unwrap_or_else(|| md.join(format!("{stem}.pgm")))
            });
            Ok((stem.clone(), dir.join(format!("{stem}.pgm")), compressed, mask))
        })
        .collect()
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let seg = a.seg.as_deref().map(load_segmenter).transpose()?;
    let has_mask = a.mask.is_some() || a.mask_dir.is_some();
    if has_mask != seg.is_some() {
        return Err(CliError::Usage("Dice needs both a mask and --seg".into()));
    }
    let mut lines = String::new();
    let mut m = RunManifest::new(Command::Evaluate(a.clone()), 0);
    match &a.original_dir {
        None => {
            let (orig, comp) = match (&a.original, &a.compressed) {
                (Some(o), Some(c)) => (o, c),
                _ => return Err(CliError::Usage("give --original and --compressed".into())),
            };
            let r = evaluate_one(orig, comp, a.mask.as_deref(), seg.as_ref())?;
            lines.push_str(&r.to_json_line());
            lines.push('\n');
            m.achieved_bpp = Some(r.bpp);
            m.metrics = Some(r);
        }
        Some(dir) => {
            let mut reports = Vec::new();
            for (stem, orig, comp, mask) in batch_members(a, dir)? {
                let r = evaluate_one(&orig, &comp, mask.as_deref(), seg.as_ref())?;
                let _ = writeln!(lines, "{}", named_line(&stem, &r));
                reports.push(r);
            }
            let mean = EvalReport::mean(&reports).expect("at least one image");
            let _ = writeln!(lines, "{}", named_line("mean", &mean));
            m.achieved_bpp = Some(mean.bpp);
            m.metrics = Some(mean);
        }
    }
    match &a.out {
        Some(path) => {
            write_output(path, lines.as_bytes())?;
            m.outputs.push(path.clone());
            m.wall_clock_seconds = start.elapsed().as_secs_f64();
            m.write_beside(path)?;
        }
        None => {
            print!("{lines}");
            m.wall_clock_seconds = start.elapsed().as_secs_f64();
        }
    }
    Ok(m)
}

/// One row of the sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub image: String,
    pub lambda: f64,
    pub depth: usize,
    pub width: usize,
    pub param_count: usize,
    pub report: EvalReport,
    /// PSNR of the quantized reconstruction against the unquantized render.
    pub quantization_psnr_db: f64,
    pub total: f64,
    pub compress: f64,
    pub regularize: Option<f64>,
}

pub const SWEEP_HEADER: &str =
    "image,lambda,arch,depth,width,param_count,bpp,psnr_db,ssim,dice,quant_psnr_db,total,compress,regularize";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sweep_csv(arch: &str, rows: &[SweepRow], lambdas: &[f64]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    let line = |out: &mut String, r: &SweepRow| {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.image,
            r.lambda,
            arch,
            r.depth,
            r.width,
            r.param_count,
            r.report.bpp,
            r.report.psnr_db,
            r.report.ssim,
            fmt_opt(r.report.dice),
            r.quantization_psnr_db,
            r.total,
            r.compress,
            fmt_opt(r.regularize)
        );
    };
    for r in rows {
        line(&mut out, r);
    }
    for &lambda in lambdas {
        let arm: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda == lambda).collect();
        if arm.is_empty() {
            continue;
        }
        let n = arm.len() as f64;
        let mean = |f: &dyn Fn(&SweepRow) -> f64| arm.iter().map(|r| f(r)).sum::<f64>() / n;
        let reports: Vec<EvalReport> = arm.iter().map(|r| r.report).collect();
        let regs: Option<Vec<f64>> = arm.iter().map(|r| r.regularize).collect();
        let row = SweepRow {
            image: "mean".into(),
            lambda,
            depth: arm[0].depth,
            width: arm[0].width,
            param_count: arm[0].param_count,
            report: EvalReport::mean(&reports).expect("non-empty arm"),
            quantization_psnr_db: mean(&|r| r.quantization_psnr_db),
            total: mean(&|r| r.total),
            compress: mean(&|r| r.compress),
            regularize: regs.map(|v| v.iter().sum::<f64>() / n),
        };
        line(&mut out, &row);
    }
    out
}

/// Thread pool for sweep arms, capped by `SINCO_THREADS` when set.
pub fn sweep_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Runs every (image, λ) arm and returns rows in image-major, λ-minor order.
pub fn run_sweep(
    images: &[(String, ImagePlane, MaskPlane)],
    segmenter: &SegNet,
    lambdas: &[f64],
    base: &ArmSpec,
    containers: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    let arms: Vec<(usize, f64)> = (0..images.len())
        .flat_map(|i| lambdas.iter().map(move |&l| (i, l)))
        .collect();
    let pool = sweep_pool()?;
    pool.install(|| {
        arms.par_iter()
            .map(|&(i, lambda)| {
                let (name, x, s) = &images[i];
                let spec = ArmSpec {
                    lambda,
                    ..base.clone()
                };
                let arm = compress_image(x, Some(s), Some(segmenter), &spec)?;
                let bpp = arm.container.bpp()?;
                if let Some(dir) = containers {
                    write_output(&dir.join(format!("{name}_lambda{lambda}.sinco")), &arm.container.to_bytes())?;
                }
                let report = score(x, &arm.reconstruction, Some((s, segmenter)), bpp)?;
                let last = arm.trace.last().copied().expect("training logs its last epoch");
                log::info!("{name} λ={lambda}: {}", report.to_json_line());
                Ok(SweepRow {
                    image: name.clone(),
                    lambda,
                    depth: arm.model.config().depth,
                    width: arm.model.config().width,
                    param_count: arm.container.weight_count(),
                    report,
                    quantization_psnr_db: sinco::metrics::psnr(&arm.full_precision, &arm.reconstruction, 1.0)?,
                    total: last.total,
                    compress: last.compress,
                    regularize: last.regularize,
                })
            })
            .collect()
    })
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<RunManifest> {
    let start = Instant::now();
    if a.lambdas.is_empty() || a.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(CliError::Usage("--lambdas must be non-negative numbers".into()));
    }
    let images: Vec<(String, ImagePlane, MaskPlane)> = match (&a.input, &a.data_dir, a.synthetic) {
        (Some(input), None, None) => {
            let mask = a
                .mask
                .as_ref()
                .ok_or_else(|| CliError::Usage("--input needs --mask".into()))?;
            let name = input.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
            vec![(name, load_image(input)?, load_mask(mask)?)]
        }
        (None, Some(dir), None) => load_pairs(dir)?,
        (None, None, Some(n)) => (0..n)
            .map(|i| {
                let seed = a.seed.wrapping_add(1000 + i as u64);
                let (x, s) = synth_phantom(seed, a.size, a.size)?;
                Ok((format!("phantom_{i}"), x, s))
            })
            .collect::<Result<_>>()?,
        _ => return Err(CliError::Usage("give one of --input, --data-dir or --synthetic".into())),
    };
    let segmenter = load_segmenter(&a.seg)?;
    if let Some(dir) = &a.containers {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let base = ArmSpec {
        arch: a.arch.clone(),
        frequencies: a.frequencies,
        omega0: a.omega0,
        bpp: a.bpp,
        lambda: 0.0,
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
    };
    let rows = run_sweep(&images, &segmenter, &a.lambdas, &base, a.containers.as_deref())?;
    write_output(&a.out, sweep_csv(&a.arch, &rows, &a.lambdas).as_bytes())?;

    let mut m = RunManifest::new(Command::Sweep(a.clone()), a.seed);
    m.outputs.push(a.out.clone());
    m.arch = Some(a.arch.clone());
    m.param_count = rows.first().map(|r| r.param_count);
    m.achieved_bpp = rows.first().map(|r| r.report.bpp);
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    m.write_beside(&a.out)?;
    Ok(m)
}

pub fn cmd_rerun(a: &RerunArgs) -> Result<RunManifest> {
    let m = RunManifest::read(&a.manifest)?;
    if matches!(m.command, Command::Rerun(_)) {
        return Err(CliError::Data("manifest records a rerun".into()));
    }
    run(&m.command)
}
