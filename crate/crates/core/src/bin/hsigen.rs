use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use hsigen::body::{assign_contact_labels, body_mesh, write_obj, BodyParams};
use hsigen::generator::{load_checkpoint, save_checkpoint, train, write_log_csv, Generator};
use hsigen::optimize::CurveRow;
use hsigen::pipeline::{
    contact_score, diversity, generate_interaction, non_collision_score, read_dataset, run_mhsi, synth_dataset,
    write_dataset, Interaction, InteractionRecord, PipelineError, RunConfig, SynthConfig,
};
use hsigen::pla::default_vocab;
use hsigen::scene::{build_scene, Scene};

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "hsigen", version, about = "Text-driven placement of people in 3D scenes")]
struct Cli {
    /// Run configuration (TOML); defaults apply to anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic training and held-out sets as JSON lines.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a generator on a JSON-lines dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        /// Per-step loss CSV.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Place one person described by `--text` in a scene.
    Generate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Place several people one after another.
    Mhsi {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate every held-out prompt and score the results.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only the first N samples.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write the body of a manifest entry, or of a bare parameter file, as OBJ.
    ExportMesh {
        /// A `generate` manifest or a body-parameter JSON file.
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the part-level action vocabulary.
    Actions,
}

#[derive(Serialize)]
struct MetricsRow {
    person: usize,
    text: String,
    accepted: bool,
    grounded: bool,
    initial_total: f64,
    total: f64,
    contact: f64,
    non_collision: f64,
}

#[derive(Serialize)]
struct CurveCsvRow {
    person: usize,
    #[serde(flatten)]
    row: CurveRow,
}

#[derive(Serialize)]
struct Manifest<'a> {
    text: &'a str,
    seed: u64,
    interactions: Vec<InteractionRecord>,
    errors: Vec<ManifestError>,
}

#[derive(Serialize)]
struct ManifestError {
    person: usize,
    stage: Option<String>,
    message: String,
}

fn load_scene(path: &Path) -> Result<Scene> {
    Ok(build_scene(&fs::read_to_string(path)?)?)
}

fn load_generator(path: &Path) -> Result<Generator> {
    Ok(load_checkpoint(BufReader::new(File::open(path)?))?)
}

fn metrics_row(it: &Interaction, scene: &Scene, eps: f64, text: &str, weights: &hsigen::optimize::LossWeights) -> MetricsRow {
    MetricsRow {
        person: it.person,
        text: text.to_string(),
        accepted: it.accepted,
        grounded: it.grounded,
        initial_total: it.initial.total(weights),
        total: it.total,
        // a body with no contact labels scores as NaN rather than failing the run
        contact: contact_score(&it.mesh, scene, eps).unwrap_or(f64::NAN),
        non_collision: non_collision_score(&it.mesh, scene),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_mesh(it: &Interaction, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_obj(&it.mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Meshes, manifest, metrics and loss curves of a generation run.
fn write_outputs(out: &Path, text: &str, seed: u64, its: &[Interaction], errors: Vec<ManifestError>, scene: &Scene, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(out)?;
    let weights = &cfg.pipeline.optimize.weights;
    for it in its {
        write_mesh(it, &out.join(format!("person_{}.obj", it.person)))?;
    }
    let manifest = Manifest { text, seed, interactions: its.iter().map(Interaction::record).collect(), errors };
    serde_json::to_writer_pretty(BufWriter::new(File::create(out.join("manifest.json"))?), &manifest)?;
    write_csv(&out.join("metrics.csv"), its.iter().map(|it| metrics_row(it, scene, cfg.pipeline.contact_eps, text, weights)))?;
    write_csv(
        &out.join("loss_curve.csv"),
        its.iter().flat_map(|it| it.curve.iter().map(|r| CurveCsvRow { person: it.person, row: *r })),
    )?;
    for it in its {
        log::info!(
            "person {}: total {:.4} -> {:.4}, {}",
            it.person,
            it.initial.total(weights),
            it.total,
            if it.accepted { "accepted" } else { "rejected" }
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::parse("")?,
    };
    match cli.command {
        Command::SynthData { out, seed } => {
            fs::create_dir_all(&out)?;
            let train_set = synth_dataset(&cfg.synth, seed)?;
            let held_out = SynthConfig { samples: cfg.synth.eval_samples, ..cfg.synth.clone() };
            // a different seed gives every held-out sample its own stream
            let eval_set = synth_dataset(&held_out, seed.wrapping_add(1) ^ 0x5EED)?;
            write_dataset(&train_set, BufWriter::new(File::create(out.join("train.jsonl"))?))?;
            write_dataset(&eval_set, BufWriter::new(File::create(out.join("eval.jsonl"))?))?;
            log::info!("wrote {} training and {} held-out samples to {}", train_set.len(), eval_set.len(), out.display());
        }
        Command::Train { data, out, log: log_path, seed } => {
            let samples = read_dataset(BufReader::new(File::open(&data)?))?;
            let training: Vec<_> = samples.iter().map(|s| s.training()).collect();
            let mut gen = Generator::new(cfg.generator, seed)?;
            let rows = train(&mut gen, &training, &cfg.train, |r| {
                if r.step % 50 == 0 {
                    log::info!("step {}: recon {:.4} kl {:.4} total {:.4}", r.step, r.recon, r.kl, r.total);
                }
            })?;
            save_checkpoint(&gen, BufWriter::new(File::create(&out)?))?;
            if let Some(p) = log_path {
                write_log_csv(&rows, &p)?;
            }
            log::info!("trained {} steps on {} samples, checkpoint {}", rows.len(), training.len(), out.display());
        }
        Command::Generate { scene, text, seed, checkpoint, out } => {
            let (scene, gen) = (load_scene(&scene)?, load_generator(&checkpoint)?);
            let it = generate_interaction(&gen, &scene, &text, seed, &cfg.pipeline.optimize.weights, &cfg.pipeline)?;
            write_outputs(&out, &text, seed, std::slice::from_ref(&it), Vec::new(), &scene, &cfg)?;
        }
        Command::Mhsi { scene, text, seed, checkpoint, out } => {
            let (scene, gen) = (load_scene(&scene)?, load_generator(&checkpoint)?);
            let outcome = run_mhsi(&gen, &scene, &text, seed, &cfg.pipeline.optimize.weights, &cfg.pipeline)?;
            let errors = outcome
                .errors
                .iter()
                .map(|(person, message, stage)| ManifestError { person: *person, stage: stage.map(|s| s.to_string()), message: message.clone() })
                .collect();
            write_outputs(&out, &text, seed, &outcome.interactions, errors, &scene, &cfg)?;
        }
        Command::Evaluate { checkpoint, data, out, limit, seed } => {
            let gen = load_generator(&checkpoint)?;
            let mut samples = read_dataset(BufReader::new(File::open(&data)?))?;
            samples.truncate(limit.unwrap_or(usize::MAX));
            fs::create_dir_all(&out)?;
            let weights = &cfg.pipeline.optimize.weights;
            let mut rows = Vec::new();
            let mut bodies = Vec::new();
            for (i, s) in samples.iter().enumerate() {
                match generate_interaction(&gen, &s.scene, &s.text, seed.wrapping_add(i as u64), weights, &cfg.pipeline) {
                    Ok(it) => {
                        let mut row = metrics_row(&it, &s.scene, cfg.pipeline.contact_eps, &s.text, weights);
                        row.person = i;
                        rows.push(row);
                        bodies.push(it.params);
                    }
                    Err(e) => log::warn!("sample {i} ({}): {e}", s.text),
                }
            }
            if rows.is_empty() {
                return Err(PipelineError::Metric("no sample could be generated".into()).into());
            }
            let n = rows.len() as f64;
            let mean = |f: fn(&MetricsRow) -> f64| rows.iter().map(f).filter(|v| v.is_finite()).sum::<f64>() / n;
            let (contact, non_collision) = (mean(|r| r.contact), mean(|r| r.non_collision));
            let increases = rows.iter().filter(|r| r.total > r.initial_total).count();
            let div = diversity(&bodies, cfg.diversity_k.min(bodies.len()), seed)?;
            write_csv(&out.join("metrics.csv"), &rows)?;
            let mut summary = csv::Writer::from_path(out.join("summary.csv"))?;
            summary.write_record(["samples", "contact", "non_collision", "entropy", "cluster_size", "loss_increases"])?;
            summary.write_record([
                rows.len().to_string(),
                format!("{contact:.6}"),
                format!("{non_collision:.6}"),
                format!("{:.6}", div.entropy),
                format!("{:.6}", div.cluster_size),
                increases.to_string(),
            ])?;
            summary.flush()?;
            println!(
                "{} samples: contact {contact:.4}, non-collision {non_collision:.4}, entropy {:.4} bits, cluster size {:.4}, loss increases {increases}",
                rows.len(),
                div.entropy,
                div.cluster_size
            );
        }
        Command::ExportMesh { params, out } => {
            let text = fs::read_to_string(&params)?;
            let mesh = match serde_json::from_str::<BodyParams>(&text) {
                Ok(p) => body_mesh(&p)?,
                Err(_) => {
                    let value: serde_json::Value = serde_json::from_str(&text)?;
                    // a manifest holds a list; an interaction record stands alone
                    let record = value.get("interactions").and_then(|v| v.get(0)).cloned().unwrap_or(value);
                    let record: InteractionRecord = serde_json::from_value(record)?;
                    body_mesh(&record.params)?.with_contact(assign_contact_labels(&record.parsed.actions)?)
                }
            };
            let mut w = BufWriter::new(File::create(&out)?);
            write_obj(&mesh, &mut w)?;
            w.flush()?;
        }
        Command::Actions => {
            let vocab = default_vocab();
            for a in vocab.actions() {
                let groups: Vec<String> = vocab.groups(a).iter().map(|g| format!("{g:?}").to_lowercase()).collect();
                println!("{a}\t{}", groups.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
