//! Command-line front end: dataset generators, the point-cloud transforms,
//! clustering/embedding analysis, image segmentation, and a timing bench,
//! wired into reproducible runs with file artifacts.
//!
//! Every run writes a `run.json` with the full effective configuration;
//! re-running with `--config run.json` reproduces the CSV artifacts
//! byte-for-byte. Each subcommand prints a JSON summary to standard
//! output. Exit codes: 0 success, 2 usage error, 1 runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use gt_core::analysis::{classical_mds, cut_dendrogram, single_linkage};
use gt_core::datasets;
use gt_core::gt::{gt_iterate, GTConfig, Variant};
use gt_core::image::{read_pnm, segment, write_segmented, SegConfig};
use gt_core::measure::{
    read_cloud_csv, read_distance_csv, write_cloud_csv, write_distance_csv, KernelSpec,
    Profile, WeightedCloud,
};
use gt_core::ot::{mean_shift_step, wt_iterate};
use gt_core::svg::{emit_svg, SvgPlot};

#[derive(Parser)]
#[command(
    name = "gt",
    version,
    about = "Point-cloud re-metrization toolkit: iterative Gaussian-summary transform, \
             mean-shift and optimal-transport baselines, and experiment pipelines"
)]
struct Cli {
    /// Worker thread count (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a named dataset (tjunction, dumbbell, spiral, concentric,
    /// noisy-circle, grid-line) as CSV with labels and JSON sidecars.
    Gen {
        /// Dataset name.
        name: Option<String>,
        /// Output CSV path (default: <name>.csv).
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        /// RNG seed for the randomized datasets.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the iterative transform on a point cloud.
    Gt {
        #[arg(short = 'i', long)]
        input: Option<PathBuf>,
        /// Output path prefix (default: input stem + ".out").
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
        /// full | v1 | v2 | v3 | v4
        #[arg(long)]
        variant: Option<String>,
        /// trunc | smooth
        #[arg(long)]
        kernel: Option<String>,
        /// Covariance cross-term eigenvalue count (default exact).
        #[arg(long)]
        top_k: Option<usize>,
        /// Write one points+weights CSV per iteration.
        #[arg(long)]
        emit_csv: bool,
        /// Write one distance-matrix CSV per iteration.
        #[arg(long)]
        emit_dist: bool,
        /// Write a scatter SVG of the final cloud.
        #[arg(long)]
        emit_svg: bool,
    },
    /// Iterated mean shift on a point cloud.
    Ms {
        #[arg(short = 'i', long)]
        input: Option<PathBuf>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Optimal-transport distance-update transform.
    Wt {
        #[arg(short = 'i', long)]
        input: Option<PathBuf>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        /// Ground-cost exponent (1 or 2).
        #[arg(long)]
        p: Option<u32>,
        #[arg(long)]
        iters: Option<usize>,
        /// Freeze localization supports at the initial metric.
        #[arg(long)]
        frozen: bool,
        /// Size guard: refuse clouds larger than this.
        #[arg(long)]
        cap: Option<usize>,
        /// Write one distance-matrix CSV per step.
        #[arg(long)]
        emit_dist: bool,
    },
    /// Single-linkage clustering of a distance-matrix CSV.
    Cluster {
        #[arg(short = 'i', long)]
        input: Option<PathBuf>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        /// Number of clusters to cut the dendrogram into.
        #[arg(long)]
        k: Option<usize>,
        /// Write a dendrogram SVG.
        #[arg(long)]
        emit_svg: bool,
    },
    /// Classical multidimensional scaling of a distance-matrix CSV.
    Mds {
        #[arg(short = 'i', long)]
        input: Option<PathBuf>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long)]
        dims: Option<usize>,
        /// Write a scatter SVG of the embedding.
        #[arg(long)]
        emit_svg: bool,
    },
    /// Segment a PGM/PPM image with the transformed spatial filter.
    Segment {
        #[arg(short = 'i', long)]
        input: Option<PathBuf>,
        /// Output PPM path (default: input stem + ".seg.ppm").
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long)]
        eps_s: Option<f64>,
        #[arg(long)]
        eps_r: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Boost word embeddings with context covariances and score
    /// word-similarity benchmarks.
    Embed {
        /// Embedding table (word v1 .. vm per line).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Plain-text corpus for context covariances.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Benchmark TSV/CSV files (word1, word2, score); repeatable.
        #[arg(long)]
        benchmark: Vec<PathBuf>,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Context window half-width in tokens.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        min_count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Wall-time comparison of methods over cloud sizes (median of >= 3
    /// repetitions after one warm-up).
    Bench {
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // A second init (e.g. in tests) fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let conf = match cli.config.as_deref().map(load_config).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.cmd, &conf) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type DynError = Box<dyn std::error::Error>;

fn load_config(path: &Path) -> Result<Map<String, Value>, DynError> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    match v {
        Value::Object(m) => Ok(m),
        _ => Err("config file must hold a JSON object".into()),
    }
}

/// Precedence helper: explicit flag, then config entry, then default.
struct Conf<'a>(&'a Map<String, Value>);

impl Conf<'_> {
    fn f64(&self, key: &str, flag: Option<f64>, default: Option<f64>) -> Result<f64, DynError> {
        flag.or_else(|| self.0.get(key).and_then(Value::as_f64))
            .or(default)
            .ok_or_else(|| format!("missing required parameter --{}", key.replace('_', "-")).into())
    }

    fn usize(&self, key: &str, flag: Option<usize>, default: usize) -> usize {
        flag.or_else(|| self.0.get(key).and_then(Value::as_u64).map(|v| v as usize))
            .unwrap_or(default)
    }

    fn u64(&self, key: &str, flag: Option<u64>, default: u64) -> u64 {
        flag.or_else(|| self.0.get(key).and_then(Value::as_u64)).unwrap_or(default)
    }

    fn string(&self, key: &str, flag: Option<String>, default: &str) -> String {
        flag.or_else(|| self.0.get(key).and_then(Value::as_str).map(String::from))
            .unwrap_or_else(|| default.to_string())
    }

    fn flag(&self, key: &str, flag: bool) -> bool {
        flag || self.0.get(key).and_then(Value::as_bool).unwrap_or(false)
    }

    fn path(&self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, DynError> {
        flag.or_else(|| self.0.get(key).and_then(Value::as_str).map(PathBuf::from))
            .ok_or_else(|| format!("missing required parameter --{}", key.replace('_', "-")).into())
    }

    fn path_opt(&self, key: &str, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| self.0.get(key).and_then(Value::as_str).map(PathBuf::from))
    }
}

/// Writes the effective configuration next to the primary output so the
/// run can be replayed with `--config`.
fn write_run_json(primary_output: &Path, effective: &Value) -> Result<PathBuf, DynError> {
    let path = primary_output.with_extension("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(effective)?)?;
    Ok(path)
}

fn parse_kernel(name: &str, eps: f64) -> Result<KernelSpec, DynError> {
    match name {
        "trunc" => Ok(KernelSpec::Truncation { eps }),
        "smooth" => Ok(KernelSpec::Smooth { eps, profile: Profile::Gaussian }),
        other => Err(format!("unknown kernel {other:?} (trunc|smooth)").into()),
    }
}

fn dispatch(cmd: Cmd, conf: &Map<String, Value>) -> Result<Value, DynError> {
    let c = Conf(conf);
    match cmd {
        Cmd::Gen { name, output, seed } => {
            let name = name
                .or_else(|| conf.get("name").and_then(Value::as_str).map(String::from))
                .ok_or("missing dataset name")?;
            let seed = c.u64("seed", seed, 7);
            let data = match name.as_str() {
                "tjunction" => datasets::gen_tjunction(),
                "dumbbell" => datasets::gen_dumbbell(1.0, 1.0),
                "spiral" => datasets::gen_spiral(seed),
                "concentric" => datasets::gen_concentric(seed),
                "noisy-circle" => datasets::gen_noisy_circle(seed),
                "grid-line" => datasets::gen_grid_line(),
                other => return Err(format!("unknown dataset {other:?}").into()),
            };
            let out = c
                .path_opt("output", output)
                .unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
            data.write(&out)?;
            let effective = json!({
                "subcommand": "gen", "name": name, "seed": seed,
                "output": out.to_string_lossy(),
            });
            let run = write_run_json(&out, &effective)?;
            Ok(json!({
                "dataset": serde_json::from_str::<Value>(&data.metadata_json())?,
                "output": out.to_string_lossy(),
                "run_json": run.to_string_lossy(),
            }))
        }

        Cmd::Gt {
            input,
            output,
            eps,
            lambda,
            iters,
            variant,
            kernel,
            top_k,
            emit_csv,
            emit_dist,
            emit_svg,
        } => {
            let input = c.path("input", input)?;
            let output = c
                .path_opt("output", output)
                .unwrap_or_else(|| input.with_extension("out"));
            let eps = c.f64("eps", eps, None)?;
            let lambda = c.f64("lambda", lambda, Some(1.0))?;
            let iters = c.usize("iters", iters, 1);
            let variant_name = c.string("variant", variant, "full");
            let kernel_name = c.string("kernel", kernel, "trunc");
            let top_k = top_k.or_else(|| {
                conf.get("top_k").and_then(Value::as_u64).map(|v| v as usize)
            });
            let emit_csv = c.flag("emit_csv", emit_csv);
            let emit_dist = c.flag("emit_dist", emit_dist);
            let emit_svg = c.flag("emit_svg", emit_svg);

            let variant: Variant = variant_name.parse()?;
            let cloud = read_cloud_csv(&input)?;
            let cfg = GTConfig::new(eps, lambda, iters, variant)?
                .with_kernel(parse_kernel(&kernel_name, eps)?)
                .with_top_k(top_k);
            let (trajectory, fin) = gt_iterate(&cloud, &cfg)?;

            let mut artifacts = Vec::new();
            let final_csv = output.with_extension("final.csv");
            write_cloud_csv(&final_csv, &fin.cloud, true)?;
            artifacts.push(final_csv.clone());
            let final_dist = output.with_extension("dist.csv");
            write_distance_csv(&final_dist, &fin.dist)?;
            artifacts.push(final_dist);
            for state in &trajectory {
                if emit_csv {
                    let p = output.with_extension(format!("iter{}.csv", state.iteration));
                    write_cloud_csv(&p, &state.cloud, true)?;
                    artifacts.push(p);
                }
                if emit_dist {
                    let p = output.with_extension(format!("iter{}.dist.csv", state.iteration));
                    write_distance_csv(&p, &state.dist)?;
                    artifacts.push(p);
                }
            }
            if emit_svg {
                let p = output.with_extension("svg");
                emit_svg_scatter(fin.cloud.points(), None, &p)?;
                artifacts.push(p);
            }

            let effective = json!({
                "subcommand": "gt",
                "input": input.to_string_lossy(),
                "output": output.to_string_lossy(),
                "eps": eps, "lambda": lambda, "iters": iters,
                "variant": variant_name, "kernel": kernel_name,
                "top_k": top_k,
                "emit_csv": emit_csv, "emit_dist": emit_dist, "emit_svg": emit_svg,
            });
            let run = write_run_json(&output, &effective)?;
            Ok(json!({
                "n_in": cloud.len(),
                "n_out": fin.cloud.len(),
                "iterations": iters,
                "eps": eps, "lambda": lambda, "variant": variant_name,
                "iteration_seconds": trajectory
                    .iter()
                    .map(|s| s.elapsed.as_secs_f64())
                    .collect::<Vec<_>>(),
                "artifacts": paths_json(&artifacts),
                "run_json": run.to_string_lossy(),
            }))
        }

        Cmd::Ms { input, output, eps, iters } => {
            let input = c.path("input", input)?;
            let output = c
                .path_opt("output", output)
                .unwrap_or_else(|| input.with_extension("ms.csv"));
            let eps = c.f64("eps", eps, None)?;
            let iters = c.usize("iters", iters, 1);
            let mut cloud = read_cloud_csv(&input)?;
            for _ in 0..iters {
                cloud = mean_shift_step(&cloud, eps)?;
            }
            write_cloud_csv(&output, &cloud, true)?;
            let effective = json!({
                "subcommand": "ms",
                "input": input.to_string_lossy(),
                "output": output.to_string_lossy(),
                "eps": eps, "iters": iters,
            });
            let run = write_run_json(&output, &effective)?;
            Ok(json!({
                "n": cloud.len(), "eps": eps, "iters": iters,
                "output": output.to_string_lossy(),
                "run_json": run.to_string_lossy(),
            }))
        }

        Cmd::Wt { input, output, eps, p, iters, frozen, cap, emit_dist } => {
            let input = c.path("input", input)?;
            let output = c
                .path_opt("output", output)
                .unwrap_or_else(|| input.with_extension("wt"));
            let eps = c.f64("eps", eps, None)?;
            let p = p
                .or_else(|| conf.get("p").and_then(Value::as_u64).map(|v| v as u32))
                .unwrap_or(2);
            let iters = c.usize("iters", iters, 1);
            let frozen = c.flag("frozen", frozen);
            let cap = c.usize("cap", cap, 2000);
            let cloud = read_cloud_csv(&input)?;
            let trajectory = wt_iterate(&cloud, eps, p, iters, cap, frozen)?;

            let mut artifacts = Vec::new();
            let final_dist = output.with_extension("dist.csv");
            write_distance_csv(&final_dist, trajectory.last().unwrap())?;
            artifacts.push(final_dist);
            if emit_dist {
                for (k, d) in trajectory.iter().enumerate() {
                    let p = output.with_extension(format!("iter{k}.dist.csv"));
                    write_distance_csv(&p, d)?;
                    artifacts.push(p);
                }
            }
            let effective = json!({
                "subcommand": "wt",
                "input": input.to_string_lossy(),
                "output": output.to_string_lossy(),
                "eps": eps, "p": p, "iters": iters,
                "frozen": frozen, "cap": cap, "emit_dist": emit_dist,
            });
            let run = write_run_json(&output, &effective)?;
            Ok(json!({
                "n": cloud.len(), "eps": eps, "p": p, "iters": iters,
                "artifacts": paths_json(&artifacts),
                "run_json": run.to_string_lossy(),
            }))
        }

        Cmd::Cluster { input, output, k, emit_svg } => {
            let input = c.path("input", input)?;
            let output = c
                .path_opt("output", output)
                .unwrap_or_else(|| input.with_extension("labels.csv"));
            let k = c.usize("k", k, 2);
            let d = read_distance_csv(&input)?;
            let dend = single_linkage(&d);
            let labels = cut_dendrogram(&dend, k);
            let mut text = String::from("label\n");
            for l in &labels {
                text.push_str(&format!("{l}\n"));
            }
            std::fs::write(&output, text)?;
            if c.flag("emit_svg", emit_svg) {
                gt_core::svg::emit_svg(&SvgPlot::Dendrogram(&dend), &output.with_extension("svg"))?;
            }
            let mut sizes = vec![0usize; k];
            for &l in &labels {
                sizes[l] += 1;
            }
            let effective = json!({
                "subcommand": "cluster",
                "input": input.to_string_lossy(),
                "output": output.to_string_lossy(),
                "k": k, "emit_svg": c.flag("emit_svg", emit_svg),
            });
            let run = write_run_json(&output, &effective)?;
            Ok(json!({
                "n": labels.len(), "k": k, "cluster_sizes": sizes,
                "output": output.to_string_lossy(),
                "run_json": run.to_string_lossy(),
            }))
        }

        Cmd::Mds { input, output, dims, emit_svg } => {
            let input = c.path("input", input)?;
            let output = c
                .path_opt("output", output)
                .unwrap_or_else(|| input.with_extension("mds.csv"));
            let dims = c.usize("dims", dims, 2);
            let d = read_distance_csv(&input)?;
            let coords = classical_mds(&d, dims)?;
            let cloud = WeightedCloud::uniform(coords.clone())?;
            write_cloud_csv(&output, &cloud, false)?;
            if c.flag("emit_svg", emit_svg) {
                let plot = if dims >= 3 {
                    SvgPlot::Mds3dProjection { points: &coords, labels: None }
                } else {
                    SvgPlot::Scatter { points: &coords, labels: None }
                };
                gt_core::svg::emit_svg(&plot, &output.with_extension("svg"))?;
            }
            let effective = json!({
                "subcommand": "mds",
                "input": input.to_string_lossy(),
                "output": output.to_string_lossy(),
                "dims": dims, "emit_svg": c.flag("emit_svg", emit_svg),
            });
            let run = write_run_json(&output, &effective)?;
            Ok(json!({
                "n": coords.len(), "dims": dims,
                "output": output.to_string_lossy(),
                "run_json": run.to_string_lossy(),
            }))
        }

        Cmd::Segment { input, output, eps_s, eps_r, lambda, max_iter } => {
            let input = c.path("input", input)?;
            let output = c
                .path_opt("output", output)
                .unwrap_or_else(|| input.with_extension("seg.ppm"));
            let eps_s = c.f64("eps_s", eps_s, Some(6.0))?;
            let eps_r = c.f64("eps_r", eps_r, Some(6.0))?;
            let lambda = c.f64("lambda", lambda, Some(5.0))?;
            let max_iter = c.usize("max_iter", max_iter, 50);
            let grid = read_pnm(&input)?;
            let mut cfg = SegConfig::new(eps_s, eps_r, lambda)?;
            cfg.max_iter = max_iter;
            let seg = segment(&grid, &cfg)?;
            write_segmented(&grid, &seg.labels, &output)?;
            let labels_path = output.with_extension("labels.csv");
            let mut text = String::from("label\n");
            for l in &seg.labels {
                text.push_str(&format!("{l}\n"));
            }
            std::fs::write(&labels_path, text)?;
            let effective = json!({
                "subcommand": "segment",
                "input": input.to_string_lossy(),
                "output": output.to_string_lossy(),
                "eps_s": eps_s, "eps_r": eps_r,
                "lambda": lambda, "max_iter": max_iter,
            });
            let run = write_run_json(&output, &effective)?;
            Ok(json!({
                "width": grid.width, "height": grid.height,
                "clusters": seg.cluster_count,
                "output": output.to_string_lossy(),
                "labels": labels_path.to_string_lossy(),
                "run_json": run.to_string_lossy(),
            }))
        }

        Cmd::Embed {
            embeddings,
            corpus,
            benchmark,
            output,
            lambda,
            window,
            min_count,
            seed,
        } => {
            let embeddings = c.path("embeddings", embeddings)?;
            let corpus_path = c.path("corpus", corpus)?;
            let benchmarks: Vec<PathBuf> = if benchmark.is_empty() {
                match conf.get("benchmark") {
                    Some(Value::Array(a)) => a
                        .iter()
                        .filter_map(Value::as_str)
                        .map(PathBuf::from)
                        .collect(),
                    Some(Value::String(s)) => vec![PathBuf::from(s)],
                    _ => Vec::new(),
                }
            } else {
                benchmark
            };
            if benchmarks.is_empty() {
                return Err("at least one --benchmark file is required".into());
            }
            let output = c
                .path_opt("output", output)
                .unwrap_or_else(|| PathBuf::from("embed-report.json"));
            let lambda = c.f64("lambda", lambda, Some(1.0))?;
            let window = c.usize("window", window, 5);
            let min_count = c.usize("min_count", min_count, 5);
            let seed = c.u64("seed", seed, 42);

            let table = gt_core::embed::load_embeddings(&embeddings)?;
            let text = std::fs::read_to_string(&corpus_path)?;
            let tokens = gt_core::embed::tokenize(&text);
            let corpus = gt_core::embed::preprocess_corpus(&tokens, min_count, 1e-5, seed);
            let covs = gt_core::embed::build_context_covs(&corpus, window, &table);

            let mut reports = Vec::new();
            for path in &benchmarks {
                let pairs = gt_core::embed::load_benchmark(path)?;
                let (rho_base, covered, skipped) =
                    gt_core::embed::evaluate_benchmark(&pairs, |a, b| {
                        gt_core::embed::gt_word_similarity(a, b, &covs, 0.0, &table)
                    })?;
                let (rho_gt, _, _) = gt_core::embed::evaluate_benchmark(&pairs, |a, b| {
                    gt_core::embed::gt_word_similarity(a, b, &covs, lambda, &table)
                })?;
                reports.push(json!({
                    "dataset": path.file_stem().unwrap_or_default().to_string_lossy(),
                    "rho_baseline": rho_base,
                    "rho_gt": rho_gt,
                    "delta": rho_gt - rho_base,
                    "covered": covered,
                    "skipped": skipped,
                    "lambda": lambda,
                    "window": window,
                }));
            }
            let report = Value::Array(reports);
            std::fs::write(&output, serde_json::to_string_pretty(&report)?)?;
            let effective = json!({
                "subcommand": "embed",
                "embeddings": embeddings.to_string_lossy(),
                "corpus": corpus_path.to_string_lossy(),
                "benchmark": benchmarks
                    .iter()
                    .map(|p| p.to_string_lossy().into_owned())
                    .collect::<Vec<_>>(),
                "output": output.to_string_lossy(),
                "lambda": lambda, "window": window,
                "min_count": min_count, "seed": seed,
            });
            let run = write_run_json(&output, &effective)?;
            Ok(json!({
                "vocabulary": table.len(),
                "corpus_tokens": corpus.len(),
                "report": report,
                "output": output.to_string_lossy(),
                "run_json": run.to_string_lossy(),
            }))
        }

        Cmd::Bench { output } => bench(conf, c.path_opt("output", output)),
    }
}

fn paths_json(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.to_string_lossy().into_owned()).collect()
}

fn emit_svg_scatter(points: &[Vec<f64>], labels: Option<&[usize]>, path: &Path) -> Result<(), DynError> {
    emit_svg(&SvgPlot::Scatter { points, labels }, path)?;
    Ok(())
}

/// Timing comparison. Config keys: `sizes` (cloud sizes), `methods`
/// (gt:full|gt:v1|gt:v2|gt:v3|gt:v4|ms|wt:1|wt:2), `reps` (>= 3), `eps`,
/// `lambda`, `iters`, `dim`, `seed`. Clouds are uniform in [0,1]^dim.
fn bench(conf: &Map<String, Value>, output: Option<PathBuf>) -> Result<Value, DynError> {
    use rand::{Rng, SeedableRng};

    let c = Conf(conf);
    let reps = c.usize("reps", None, 5);
    if reps < 3 {
        return Err(format!("bench needs >= 3 repetitions, got {reps}").into());
    }
    let sizes: Vec<usize> = match conf.get("sizes") {
        Some(Value::Array(a)) => a
            .iter()
            .filter_map(Value::as_u64)
            .map(|v| v as usize)
            .collect(),
        _ => vec![100],
    };
    let methods: Vec<String> = match conf.get("methods") {
        Some(Value::Array(a)) => a
            .iter()
            .filter_map(Value::as_str)
            .map(String::from)
            .collect(),
        _ => vec!["gt:full".into(), "gt:v1".into(), "gt:v2".into(), "gt:v4".into()],
    };
    let eps = c.f64("eps", None, Some(0.3))?;
    let lambda = c.f64("lambda", None, Some(1.0))?;
    let iters = c.usize("iters", None, 1);
    let dim = c.usize("dim", None, 2);
    let seed = c.u64("seed", None, 7);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut medians: std::collections::HashMap<(String, usize), f64> =
        std::collections::HashMap::new();
    for &n in &sizes {
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let cloud = WeightedCloud::uniform(points)?;
        let cloud = &cloud;
        for method in &methods {
            let run: Box<dyn Fn() -> Result<(), DynError> + '_> = match method.as_str() {
                "ms" => Box::new(|| {
                    let mut c = cloud.clone();
                    for _ in 0..iters {
                        c = mean_shift_step(&c, eps)?;
                    }
                    Ok(())
                }),
                m if m.starts_with("gt:") => {
                    let variant: Variant = m[3..].parse()?;
                    let cfg = GTConfig::new(eps, lambda, iters, variant)?;
                    Box::new(move || {
                        gt_iterate(cloud, &cfg)?;
                        Ok(())
                    })
                }
                m if m.starts_with("wt:") => {
                    let p: u32 = m[3..].parse()?;
                    Box::new(move || {
                        wt_iterate(cloud, eps, p, iters, n, false)?;
                        Ok(())
                    })
                }
                other => return Err(format!("unknown bench method {other:?}").into()),
            };
            run()?; // warm-up
            let mut times = Vec::with_capacity(reps);
            for _ in 0..reps {
                let t0 = std::time::Instant::now();
                run()?;
                times.push(t0.elapsed().as_secs_f64());
            }
            times.sort_by(f64::total_cmp);
            let median = times[times.len() / 2];
            medians.insert((method.clone(), n), median);
            rows.push(json!({
                "method": method, "n": n, "dim": dim,
                "eps": eps, "lambda": lambda, "iters": iters,
                "reps": reps, "median_secs": median,
            }));
        }
    }

    // Ordinal claims, reported per size when the methods are present.
    let mut orderings = Vec::new();
    for &n in &sizes {
        let get = |m: &str| medians.get(&(m.to_string(), n)).copied();
        if let (Some(f), Some(v1), Some(v2), Some(v4)) =
            (get("gt:full"), get("gt:v1"), get("gt:v2"), get("gt:v4"))
        {
            orderings.push(json!({
                "n": n,
                "claim": "v4 <= v2 <= v1 <= full",
                "holds": v4 <= v2 && v2 <= v1 && v1 <= f,
            }));
        }
        for p in ["wt:1", "wt:2"] {
            if let (Some(g), Some(w)) = (get("gt:full"), get(p)) {
                orderings.push(json!({
                    "n": n,
                    "claim": format!("gt:full faster than {p}"),
                    "holds": g < w,
                }));
            }
        }
    }

    let report = json!({ "rows": rows, "orderings": orderings });
    if let Some(out) = &output {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
        let effective = json!({
            "subcommand": "bench", "reps": reps, "sizes": sizes,
            "methods": methods, "eps": eps, "lambda": lambda,
            "iters": iters, "dim": dim, "seed": seed,
            "output": out.to_string_lossy(),
        });
        write_run_json(out, &effective)?;
    }
    Ok(report)
}
