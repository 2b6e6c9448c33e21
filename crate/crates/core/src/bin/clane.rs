//! `clane` command line: synthetic data, ingestion, feature extraction,
//! incremental learning runs, op-count benchmarks and table dumps.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use clane::agg_norm::{InvSqrtLut, Normalizer};
use clane::baselines::{read_features, write_features, FeatureSet, Sample};
use clane::clp::{read_store, PrototypeStore};
use clane::event_ingest::{
    bin_to_frames, bin_to_frames_range, encode_binary_v1, encode_csv, parse_events, read_frames, write_frames,
    EventStream, FrameSequence,
};
use clane::harness::{
    count_ops, format_bench_table, format_table, group_by_class, parse_window, records, run_grid, summarize,
    synth_events, synth_features, to_feature_set, write_bench_csv, write_jsonl, write_summary_csv, BenchRow, Config,
    Extractor, HarnessError, LearnerKind, Manifest, ManifestEntry, Result, Shots,
};
use clane::snn::{fuse_network, quantize_network, read_weights, write_weights, WeightFile};

#[derive(Parser)]
#[command(
    name = "clane",
    version,
    about = "Event-camera spiking feature extractor and continual-learning harness"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set protocol.shots=5`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Features,
    Events,
}

#[derive(Clone, Copy, ValueEnum)]
enum EventEncoding {
    Evt1,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic feature file or event-clip dataset.
    Synth {
        #[arg(value_enum)]
        kind: SynthKind,
        /// Output feature file (features) or directory (events).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "evt1")]
        encoding: EventEncoding,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Bin event files into frame caches.
    Ingest {
        /// Manifest of event files.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for frame caches and their manifest.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run clips (events or frame caches) through the extractor.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Output feature file.
        #[arg(long)]
        out: PathBuf,
        /// Float reference rates instead of fixed-point features.
        #[arg(long)]
        float: bool,
    },
    /// Class-incremental runs over a feature file.
    Learn {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated learner names, or `all`.
        #[arg(long)]
        learner: Option<String>,
        /// Shots per class, or `full`.
        #[arg(long)]
        shots: Option<Shots>,
        /// First run seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of seeds.
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Op counts of one clip binned at several windows.
    Bench {
        /// Comma-separated windows such as `40ms,10ms,2ms`.
        #[arg(long, default_value = "40ms,10ms,2ms")]
        windows: String,
        /// Event file; the first synthetic clip when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Prototype store scored by the head.
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the inverse square root lookup table.
    LutDump {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fuse batch norm and quantize a float weight file.
    ConvertWeights {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Synth {
            kind,
            out,
            encoding,
            seed,
        } => synth(&mut cfg, kind, &out, encoding, seed),
        Command::Ingest { manifest, out_dir } => ingest(&cfg, &manifest, &out_dir),
        Command::Extract { manifest, out, float } => extract(&cfg, &manifest, &out, float),
        Command::Learn {
            features,
            out_dir,
            learner,
            shots,
            seed,
            seeds,
        } => {
            if let Some(list) = learner {
                cfg.protocol.learners = parse_learners(&list)?;
            }
            if let Some(s) = shots {
                cfg.protocol.shots = s;
            }
            if let Some(s) = seed {
                cfg.protocol.seed = s;
            }
            if let Some(n) = seeds {
                cfg.protocol.seeds = n;
            }
            cfg.validate()?;
            learn(&cfg, &features, &out_dir)
        }
        Command::Bench {
            windows,
            input,
            store,
            out_dir,
        } => bench(&cfg, &windows, input.as_deref(), store.as_deref(), out_dir.as_deref()),
        Command::LutDump { out } => {
            let dump = InvSqrtLut::new(cfg.norm.lut_bits)?.dump();
            emit(out.as_deref(), dump.as_bytes())
        }
        Command::ConvertWeights { input, out } => convert_weights(&input, &out),
    }
}

fn parse_learners(list: &str) -> Result<Vec<LearnerKind>> {
    if list == "all" {
        return Ok(LearnerKind::ALL.to_vec());
    }
    list.split(',').map(|s| s.trim().parse()).collect()
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| HarnessError::file(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::file(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| HarnessError::file(path, e))?,
    ))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

/// Write to `path`, or stdout when `None`.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn synth(cfg: &mut Config, kind: SynthKind, out: &Path, encoding: EventEncoding, seed: Option<u64>) -> Result<()> {
    match kind {
        SynthKind::Features => {
            if let Some(s) = seed {
                cfg.synth.features.seed = s;
            }
            let set = to_feature_set(&synth_features(&cfg.synth.features)?)?;
            let mut w = create(out)?;
            write_features(&set, &mut w)?;
            w.flush()?;
            println!(
                "wrote {} samples of dimension {} to {}",
                set.samples.len(),
                set.dim,
                out.display()
            );
        }
        SynthKind::Events => {
            if let Some(s) = seed {
                cfg.synth.events.seed = s;
            }
            let clips = synth_events(&cfg.synth.events, &cfg.ingest.binning)?;
            fs::create_dir_all(out).map_err(|e| HarnessError::file(out, e))?;
            let mut manifest = Manifest::default();
            let mut counts = std::collections::BTreeMap::<u32, usize>::new();
            for clip in &clips {
                let n = counts.entry(clip.label).or_default();
                let (name, bytes) = match encoding {
                    EventEncoding::Evt1 => (
                        format!("c{:02}_{:03}.evt", clip.label, n),
                        encode_binary_v1(&clip.stream),
                    ),
                    EventEncoding::Csv => (
                        format!("c{:02}_{:03}.csv", clip.label, n),
                        encode_csv(&clip.stream).into_bytes(),
                    ),
                };
                *n += 1;
                write_file(&out.join(&name), &bytes)?;
                manifest.entries.push(ManifestEntry {
                    class: clip.label,
                    path: name.into(),
                });
            }
            write_file(&out.join("manifest.tsv"), manifest.to_text().as_bytes())?;
            println!("wrote {} clips to {}", clips.len(), out.display());
        }
    }
    Ok(())
}

fn load_events(cfg: &Config, path: &Path) -> Result<EventStream> {
    let bytes = read_file(path)?;
    Ok(parse_events(&bytes, cfg.ingest.format_of(&bytes))?)
}

/// Frame cache or event file, told apart by the cache's first line.
fn load_frames(cfg: &Config, path: &Path) -> Result<FrameSequence> {
    let bytes = read_file(path)?;
    if bytes.starts_with(b"# clane frames") {
        return Ok(read_frames(BufReader::new(bytes.as_slice()))?);
    }
    let stream = parse_events(&bytes, cfg.ingest.format_of(&bytes))?;
    Ok(bin_to_frames(&stream, &cfg.ingest.binning)?)
}

fn load_manifest(path: &Path) -> Result<Manifest> {
    let m = Manifest::load(path)?;
    if m.entries.is_empty() {
        return Err(HarnessError::MissingData(format!("{} lists no clips", path.display())));
    }
    Ok(m)
}

fn ingest(cfg: &Config, manifest: &Path, out_dir: &Path) -> Result<()> {
    let m = load_manifest(manifest)?;
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::file(out_dir, e))?;
    let outputs: Vec<ManifestEntry> = m
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let frames = bin_to_frames(&load_events(cfg, &e.path)?, &cfg.ingest.binning)?;
            let name = format!("clip_{i:05}.frames");
            let mut w = create(&out_dir.join(&name))?;
            write_frames(&frames, &mut w)?;
            w.flush()?;
            Ok(ManifestEntry {
                class: e.class,
                path: name.into(),
            })
        })
        .collect::<Result<_>>()?;
    let out = Manifest { entries: outputs };
    write_file(&out_dir.join("manifest.tsv"), out.to_text().as_bytes())?;
    println!("binned {} clips into {}", out.entries.len(), out_dir.display());
    Ok(())
}

fn load_extractor(cfg: &Config) -> Result<Extractor> {
    let e = &cfg.extractor;
    match &e.weights {
        Some(path) => {
            let bytes = read_file(path)?;
            Extractor::from_weight_file(read_weights(bytes.as_slice())?, e.binary_input)
        }
        None => Extractor::synthetic(&e.geometry, &e.synthetic, e.seed, e.binary_input),
    }
}

fn extract(cfg: &Config, manifest: &Path, out: &Path, float: bool) -> Result<()> {
    let m = load_manifest(manifest)?;
    let extractor = load_extractor(cfg)?;
    let samples: Vec<Sample> = m
        .entries
        .par_iter()
        .map(|e| {
            let frames = load_frames(cfg, &e.path)?;
            let features = if float {
                extractor.float_rates(&frames)?
            } else {
                extractor.features(&frames)?.to_f64()
            };
            Ok(Sample {
                label: e.class,
                features,
            })
        })
        .collect::<Result<_>>()?;
    let silent = samples.iter().filter(|s| s.features.iter().all(|&v| v == 0.0)).count();
    let set = FeatureSet::new(extractor.feature_dim(), samples)?;
    let mut w = create(out)?;
    write_features(&set, &mut w)?;
    w.flush()?;
    println!(
        "extracted {} feature vectors of dimension {} ({} without feature spikes) to {}",
        set.samples.len(),
        set.dim,
        silent,
        out.display()
    );
    Ok(())
}

fn learn(cfg: &Config, features: &Path, out_dir: &Path) -> Result<()> {
    let bytes = read_file(features)?;
    let set = read_features(bytes.as_slice())?;
    if set.samples.is_empty() {
        return Err(HarnessError::MissingData(format!(
            "{} holds no samples",
            features.display()
        )));
    }
    let data = group_by_class(&set);
    let runs = run_grid(cfg, &data)?;
    let summaries = summarize(&runs);
    fs::create_dir_all(out_dir).map_err(|e| HarnessError::file(out_dir, e))?;
    let mut w = create(&out_dir.join("runs.jsonl"))?;
    write_jsonl(&mut w, &records(cfg, &runs))?;
    w.flush()?;
    let mut w = create(&out_dir.join("summary.csv"))?;
    write_summary_csv(&mut w, &summaries)?;
    w.flush()?;
    let table = format_table(&summaries);
    write_file(&out_dir.join("table.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

fn bench(
    cfg: &Config,
    windows: &str,
    input: Option<&Path>,
    store: Option<&Path>,
    out_dir: Option<&Path>,
) -> Result<()> {
    let windows: Vec<u64> = windows.split(',').map(parse_window).collect::<Result<_>>()?;
    let longest = *windows.iter().max().expect("split yields one item");
    let binning = cfg.ingest.binning;
    let (stream, t_start, t_end) = match input {
        Some(path) => {
            let stream = load_events(cfg, path)?;
            let (first, last) = match (stream.events().first(), stream.events().last()) {
                (Some(f), Some(l)) => (f.t, l.t),
                _ => (0, 0),
            };
            // whole multiples of the longest window keep frame counts in ratio
            let start = first - first % longest;
            let end = start + (last - start) / longest * longest + longest;
            (stream, start, end)
        }
        None => {
            let clip = synth_events(&cfg.synth.events, &binning)?
                .into_iter()
                .next()
                .ok_or_else(|| HarnessError::Config("synthetic event spec yields no clips".into()))?;
            (clip.stream, clip.t_start, clip.t_end)
        }
    };
    let extractor = load_extractor(cfg)?;
    let normalizer = Normalizer::new(cfg.norm)?;
    let store: Option<PrototypeStore> = match store {
        Some(p) => Some(read_store(read_file(p)?.as_slice(), cfg.learner.clp)?),
        None => None,
    };
    let rows: Vec<BenchRow> = windows
        .par_iter()
        .map(|&w| {
            let frames = bin_to_frames_range(&stream, &binning.with_window_us(w), t_start, t_end)?;
            Ok(BenchRow {
                window_us: w,
                ops: count_ops(&frames, &extractor, &normalizer, store.as_ref())?,
            })
        })
        .collect::<Result<_>>()?;
    let table = format_bench_table(&rows);
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| HarnessError::file(dir, e))?;
        let mut w = create(&dir.join("bench.jsonl"))?;
        write_jsonl(&mut w, &rows)?;
        w.flush()?;
        let mut w = create(&dir.join("bench.csv"))?;
        write_bench_csv(&mut w, &rows)?;
        w.flush()?;
        write_file(&dir.join("bench.txt"), table.as_bytes())?;
    }
    print!("{table}");
    Ok(())
}

fn convert_weights(input: &Path, out: &Path) -> Result<()> {
    let file = read_weights(read_file(input)?.as_slice())?;
    let net = match file {
        WeightFile::Float(net) => net,
        WeightFile::Quantized(_) => {
            return Err(HarnessError::Config(format!(
                "{} is already quantized",
                input.display()
            )))
        }
    };
    let quantized = quantize_network(&fuse_network(&net)?, 8)?;
    let mut w = create(out)?;
    write_weights(&WeightFile::Quantized(quantized), &mut w)?;
    w.flush()?;
    println!("wrote quantized weights to {}", out.display());
    Ok(())
}
