use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use gprank_core::imaging::{gen_synthetic_dataset, SyntheticDatasetConfig};
use gprank_core::joint::{gradient_check, train_joint, JointConfig, TrainingLog};
use gprank_core::pipeline::{
    contact_sheet, evaluate, load_model, load_training_set, save_model, write_atomic, DatasetManifest,
    SheetLayout,
};
use gprank_core::{extract_features, enhance, ParamVector, RasterImage, TraversalConfig};

#[derive(Parser)]
#[command(name = "gprank", version, about = "Joint GP regression and ranking for photo enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 60)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 48)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model on every entry of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Box bound of the ranking dual.
        #[arg(long = "C", default_value_t = JointConfig::default().c)]
        c: f64,
        #[arg(long, default_value_t = 20)]
        cycles: usize,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Recorded in the log; training itself has no random component.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print predicted parameter means and standard deviations.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
    },
    /// Render and rank enhancement candidates for one image.
    Enhance {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Regression metrics of a model on a manifest.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Where to write the JSON report; defaults to `<model>.eval.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Finite-difference check of the objective gradient.
    GradCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::GenData { out, n, p, size, seed } => {
            let cfg = SyntheticDatasetConfig {
                n_images: n,
                image_size: size,
                p,
                seed,
                ..Default::default()
            };
            let manifest = gen_synthetic_dataset(&cfg, &out)?;
            println!(
                "wrote {} entries (p = {}) to {}",
                manifest.len(),
                manifest.p(),
                out.join(DatasetManifest::DEFAULT_NAME).display()
            );
        }
        Command::Train { manifest, out, c, cycles, tol, seed } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let (set, _) = load_training_set(&manifest)?;
            let cfg = JointConfig {
                c,
                max_cycles: cycles,
                tol,
                ..Default::default()
            };
            let (model, log) = train_joint(&set, &cfg)?;
            save_model(&model, &out)?;
            let log_path = with_suffix(&out, "log.json");
            write_atomic(&log_path, render_log(&log, seed).as_bytes())?;
            println!("initial Z {:.6}", log.z_initial);
            for c in &log.cycles {
                println!(
                    "cycle {:2}  Z {:.6}  dZ {:+.3e}  sweeps {}  scg {}",
                    c.cycle, c.z_after_h, c.delta_z, c.dual_sweeps, c.scg_iterations
                );
            }
            println!(
                "{} after {} cycles; model {} log {}",
                if log.converged { "converged" } else { "stopped" },
                log.cycles.len(),
                out.display(),
                log_path.display()
            );
        }
        Command::Predict { model, image } => {
            let model = load_model(&model)?;
            let img = RasterImage::load_png(&image)?;
            let (m, s) = model.predict_params(extract_features(&img).as_slice())?;
            let fmt = |v: ParamVector| v.to_array().map(|x| format!("{x:.6}")).join(" ");
            println!("m {}", fmt(m));
            println!("s {}", fmt(s));
        }
        Command::Enhance { model, image, out, count } => enhance_cmd(&model, &image, &out, count)?,
        Command::Evaluate { model, manifest, report } => {
            let m = load_model(&model)?;
            let manifest = DatasetManifest::load(&manifest)?;
            let r = evaluate(&m, &manifest)?;
            let json = serde_json::to_string_pretty(&r)?;
            let path = report.unwrap_or_else(|| with_suffix(&model, "eval.json"));
            write_atomic(&path, json.as_bytes())?;
            println!("n_test {}", r.n_test);
            for (j, name) in ParamVector::NAMES.iter().enumerate() {
                let r_txt = r.pearson[j].map_or("null".to_string(), |v| format!("{v:.4}"));
                println!("{name:<10} rmse {:.6}  pearson {r_txt}", r.rmse[j]);
            }
            println!("report {}", path.display());
        }
        Command::GradCheck { seed } => {
            let report = gradient_check(seed, 5)?;
            for inst in &report.instances {
                println!(
                    "instance seed {}: max relative error {:.3e} {}",
                    inst.seed,
                    inst.max_rel_error,
                    if inst.passed() { "ok" } else { "FAIL" }
                );
            }
            if !report.passed() {
                println!("gradient check failed");
                return Ok(ExitCode::from(1));
            }
            println!("gradient check passed");
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// `model.json` + `log.json` -> `model.log.json`.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

#[derive(Serialize)]
struct LogCycle {
    cycle: usize,
    z_after_alpha: f64,
    z_after_h: f64,
    delta_z: f64,
    dual_sweeps: usize,
    kkt_violation: f64,
    scg_iterations: usize,
}

fn render_log(log: &TrainingLog, seed: u64) -> String {
    let cycles: Vec<LogCycle> = log
        .cycles
        .iter()
        .map(|c| LogCycle {
            cycle: c.cycle,
            z_after_alpha: c.z_after_alpha,
            z_after_h: c.z_after_h,
            delta_z: c.delta_z,
            dual_sweeps: c.dual_sweeps,
            kkt_violation: c.kkt_violation,
            scg_iterations: c.scg_iterations,
        })
        .collect();
    serde_json::to_string_pretty(&serde_json::json!({
        "seed": seed,
        "z_initial": log.z_initial,
        "converged": log.converged,
        "cycles": cycles,
    }))
    .expect("log serializes")
}

#[derive(Serialize)]
struct CandidateRecord {
    rank: usize,
    file: String,
    quality: f64,
    target: ParamVector,
    measured: ParamVector,
    clipped: bool,
}

#[derive(Serialize)]
struct EnhanceRecord {
    image: PathBuf,
    original: ParamVector,
    predicted_mean: ParamVector,
    predicted_std: ParamVector,
    mu: f64,
    duplicates_removed: usize,
    zero_stride: bool,
    candidates: Vec<CandidateRecord>,
    failures: Vec<(ParamVector, String)>,
}

fn enhance_cmd(model: &Path, image: &Path, out: &Path, count: Option<usize>) -> Result<()> {
    let model = load_model(model)?;
    let img = RasterImage::load_png(image)?;
    let mut cfg: TraversalConfig = model.traversal.clone();
    if let Some(c) = count {
        if c == 0 {
            bail!("--count must be at least 1");
        }
        cfg.count = c;
    }
    let result = enhance(&model, &img, &cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut candidates = Vec::with_capacity(result.ranked.len());
    let mut index = String::from("# tile rank file q saturation brightness contrast\n");
    let layout = SheetLayout::default();
    for (i, c) in result.ranked.iter().enumerate() {
        let file = format!("rank_{:03}.png", i + 1);
        c.image.save_png(&out.join(&file))?;
        let (x, y) = layout.origin(i);
        let [s, b, k] = c.measured.to_array();
        index.push_str(&format!(
            "{x},{y} {} {file} {:.6e} {s:.4} {b:.4} {k:.4}\n",
            i + 1,
            c.quality
        ));
        candidates.push(CandidateRecord {
            rank: i + 1,
            file,
            quality: c.quality,
            target: c.target,
            measured: c.measured,
            clipped: c.clipped,
        });
    }
    let tiles: Vec<&RasterImage> = result.ranked.iter().map(|c| &c.image).collect();
    if let Some(sheet) = contact_sheet(&tiles, layout) {
        sheet.save_png(&out.join("contact_sheet.png"))?;
    }
    write_atomic(&out.join("contact_sheet.txt"), index.as_bytes())?;

    let record = EnhanceRecord {
        image: image.to_path_buf(),
        original: result.original,
        predicted_mean: result.predicted_mean,
        predicted_std: result.predicted_std,
        mu: result.grid.mu,
        duplicates_removed: result.grid.duplicates_removed,
        zero_stride: result.grid.zero_stride,
        candidates,
        failures: result.failures,
    };
    write_atomic(&out.join("results.json"), serde_json::to_string_pretty(&record)?.as_bytes())?;
    println!(
        "{} candidates ranked ({} failed, {} duplicates removed); best q {:.6e} -> {}",
        record.candidates.len(),
        record.failures.len(),
        record.duplicates_removed,
        record.candidates[0].quality,
        out.join("rank_001.png").display()
    );
    Ok(())
}
