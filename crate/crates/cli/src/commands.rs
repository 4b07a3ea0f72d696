use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use edpmoe::io::{read_dataset, read_table_path, write_dataset, ColumnRoles};
use edpmoe::prediction::{PredictSettings, Predictor};
use edpmoe::sampler::{run_with, PosteriorDraws};
use edpmoe::summary::{psm_x_given, psm_y, vi_point_estimate, SummaryOptions};
use edpmoe::synthetic::{generate, DampedCosineConfig};
use edpmoe::{Dataset, NestedPartition};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const OUTPUT_ROOT_ENV: &str = "EDPMOE_OUTPUT_ROOT";
const MANIFEST: &str = "manifest.json";

/// Cross-references the artifacts of one fit.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub input_names: Vec<String>,
    pub n: usize,
    pub chains: Vec<ChainEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChainEntry {
    pub dir: String,
    pub seed: u64,
    pub retained: usize,
    pub draws: String,
    pub trace: Option<String>,
    pub k_trace: String,
    pub move_stats: String,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        CliError::Config(format!("cannot create {}: {e}", path.display()))
    })?))
}

// ------------------------------------------------------------------ simulate

pub struct SimulateArgs {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub truth: Option<PathBuf>,
}

#[derive(Serialize)]
struct Truth<'a> {
    seed: u64,
    config: &'a DampedCosineConfig,
    labels: &'a [usize],
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    if a.n == 0 || a.d == 0 {
        return Err(CliError::Config("--n and --d must be positive".into()));
    }
    let cfg = DampedCosineConfig::new(a.n, a.d, a.seed);
    let sim = generate(&cfg)?;
    let mut w = create(&a.out)?;
    write_dataset(&mut w, &sim.data)?;
    w.flush()?;
    let truth_path = a.truth.clone().unwrap_or_else(|| a.out.with_extension("truth.json"));
    let mut t = create(&truth_path)?;
    serde_json::to_writer_pretty(&mut t, &Truth { seed: a.seed, config: &cfg, labels: &sim.labels })?;
    t.write_all(b"\n")?;
    t.flush()?;
    log::info!("wrote {} and {}", a.out.display(), truth_path.display());
    Ok(())
}

// ----------------------------------------------------------------------- fit

fn load_dataset(cfg: &RunConfig) -> Result<(Dataset, Vec<String>), CliError> {
    let roles = cfg.column_roles();
    let table = read_table_path(&cfg.data.path, &roles)?;
    let data = read_dataset(&cfg.data.path, &roles, cfg.data.output_kind.clone(), cfg.data.input_spec.clone())
        .map_err(|e| CliError::Config(format!("data ({}): {e}", cfg.data.path.display())))?;
    Ok((data, table.input_names))
}

/// Output directory: explicit setting, else `$EDPMOE_OUTPUT_ROOT/<name>`,
/// else `runs/<name>`.
pub fn output_dir(cfg: &RunConfig, name: &str) -> PathBuf {
    if let Some(d) = &cfg.output_dir {
        return d.clone();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(name)
}

pub fn fit(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let (data, input_names) = load_dataset(cfg)?;
    let priors = cfg.priors(data.dim())?;
    priors.validate(&data).map_err(|e| CliError::Config(format!("priors: {e}")))?;
    fs::create_dir_all(out)?;

    let chains = cfg.sampler.chains;
    let results: Vec<Result<ChainEntry, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|c| {
                let (data, priors) = (&data, &priors);
                scope.spawn(move || run_chain(cfg, data, priors, out, c))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    });
    let entries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        input_names,
        n: data.len(),
        chains: entries,
    };
    let mut w = create(&out.join(MANIFEST))?;
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    log::info!("fit written to {}", out.display());
    Ok(())
}

fn run_chain(
    cfg: &RunConfig,
    data: &Dataset,
    priors: &edpmoe::PriorConfig,
    out: &Path,
    c: usize,
) -> Result<ChainEntry, CliError> {
    let settings = cfg.run_settings(c);
    let dir = format!("chain-{}", c + 1);
    let cdir = out.join(&dir);
    fs::create_dir_all(&cdir)?;
    let trace_name = cfg.summary.traces.then(|| format!("{dir}/trace.jsonl"));
    let mut trace_file = match &trace_name {
        Some(t) => Some(create(&out.join(t))?),
        None => None,
    };
    let draws = run_with(data, priors, &settings, None, trace_file.as_mut().map(|w| w as &mut dyn Write))?;
    if let Some(mut w) = trace_file {
        w.flush()?;
    }

    let draws_name = format!("{dir}/draws.json");
    let mut w = create(&out.join(&draws_name))?;
    serde_json::to_writer(&mut w, &draws)?;
    w.flush()?;

    let k_name = format!("{dir}/k_trace.csv");
    let mut k = csv::Writer::from_writer(create(&out.join(&k_name))?);
    k.write_record(["iteration", "k", "kj", "alpha_theta"])?;
    for (it, s) in draws.iterations.iter().zip(&draws.states) {
        let kj: Vec<String> = s.partition.counts().x_sizes.iter().map(|v| v.len().to_string()).collect();
        k.write_record([it.to_string(), s.partition.k().to_string(), kj.join(";"), s.conc.alpha_theta.to_string()])?;
    }
    k.flush()?;

    let stats_name = format!("{dir}/move_stats.json");
    let mut w = create(&out.join(&stats_name))?;
    serde_json::to_writer_pretty(&mut w, &draws.move_stats)?;
    w.write_all(b"\n")?;
    w.flush()?;

    Ok(ChainEntry {
        dir,
        seed: settings.seed,
        retained: draws.len(),
        draws: draws_name,
        trace: trace_name,
        k_trace: k_name,
        move_stats: stats_name,
    })
}

// -------------------------------------------------------------- shared reads

pub struct LoadedRun {
    pub manifest: Manifest,
    pub data: Dataset,
    pub draws: PosteriorDraws,
}

pub fn load_run(run: &Path) -> Result<LoadedRun, CliError> {
    let mpath = run.join(MANIFEST);
    let f = File::open(&mpath)
        .map_err(|e| CliError::Config(format!("run manifest {}: {e}", mpath.display())))?;
    let manifest: Manifest = serde_json::from_reader(std::io::BufReader::new(f))?;
    let (data, _) = load_dataset(&manifest.config)?;
    let mut chains = Vec::with_capacity(manifest.chains.len());
    for c in &manifest.chains {
        let p = run.join(&c.draws);
        let f = File::open(&p).map_err(|e| CliError::Config(format!("draws file {}: {e}", p.display())))?;
        chains.push(serde_json::from_reader::<_, PosteriorDraws>(std::io::BufReader::new(f))?);
    }
    let draws = PosteriorDraws::pool(chains)?;
    Ok(LoadedRun { manifest, data, draws })
}

// ------------------------------------------------------------------- predict

pub struct PredictArgs {
    pub run: PathBuf,
    pub test: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub thin: Option<usize>,
    pub level: Option<f64>,
    pub mc_samples: Option<usize>,
    pub seed: Option<u64>,
    pub regions: bool,
}

pub fn predict(a: &PredictArgs) -> Result<PathBuf, CliError> {
    let LoadedRun { manifest, data, draws } = load_run(&a.run)?;
    let pc = &manifest.config.prediction;
    let d = data.dim();
    let xs: Vec<Vec<f64>> = match (&a.test, &pc.test, &pc.grid) {
        (Some(t), _, _) | (None, Some(t), _) => {
            if !t.exists() {
                return Err(CliError::Config(format!("test file {} does not exist", t.display())));
            }
            if fs::metadata(t)?.len() == 0 {
                Vec::new()
            } else {
            let roles = ColumnRoles { inputs: Some(manifest.input_names.clone()), output: manifest.config.data.output.clone() };
            let table = read_table_path(t, &roles).map_err(|e| CliError::Config(format!("test file: {e}")))?;
            if let Some(bad) = table.inputs.iter().find(|r| r.len() != d) {
                return Err(CliError::Config(format!("test inputs have {} columns, training has {d}", bad.len())));
            }
            table.inputs
            }
        }
        (None, None, Some(g)) => {
            if g.dim >= d {
                return Err(CliError::Config(format!("prediction.grid.dim {} out of range for {d} inputs", g.dim)));
            }
            let means = data.input_means();
            (0..g.points)
                .map(|i| {
                    let t = if g.points == 1 { 0.0 } else { i as f64 / (g.points - 1) as f64 };
                    let mut x = means.clone();
                    x[g.dim] = g.from + t * (g.to - g.from);
                    x
                })
                .collect()
        }
        (None, None, None) => {
            return Err(CliError::Config("no test inputs: pass --test or set prediction.test or prediction.grid".into()))
        }
    };
    for x in &xs {
        for (v, f) in x.iter().zip(&data.input_spec) {
            f.check_value(*v).map_err(|e| CliError::Config(format!("test inputs: {e}")))?;
        }
    }

    let thin = a.thin.unwrap_or(pc.thin).max(1);
    let sub = PosteriorDraws { states: draws.states.iter().step_by(thin).cloned().collect(), ..draws };
    let settings = PredictSettings {
        mc_samples: a.mc_samples.unwrap_or(sub.priors.mc_samples),
        completions: pc.completions,
        seed: a.seed.unwrap_or(pc.seed),
        level: a.level.unwrap_or(pc.level),
        grid: pc.grid_points,
    };
    if !(settings.level > 0.0 && settings.level < 1.0) {
        return Err(CliError::Config(format!("--level ({}) must lie in (0, 1)", settings.level)));
    }
    let preds = if xs.is_empty() { Vec::new() } else { Predictor::new(&data, &sub, settings)?.predict(&xs)? };

    let out = a.out.clone().unwrap_or_else(|| a.run.join("predictions.csv"));
    let mut w = csv::Writer::from_writer(create(&out)?);
    let mut header: Vec<String> = ["index", "point", "lower", "upper"].iter().map(|s| s.to_string()).collect();
    if a.regions {
        header.push("region".into());
    }
    if let Some(levels) = data.output_kind.levels() {
        header.extend((0..=levels).map(|l| format!("p{l}")));
    }
    w.write_record(&header)?;
    for (i, p) in preds.iter().enumerate() {
        let mut rec = vec![i.to_string(), p.point.to_string(), p.lower.to_string(), p.upper.to_string()];
        if a.regions {
            let r: Vec<String> = p.region.iter().map(|(lo, hi)| format!("{lo}:{hi}")).collect();
            rec.push(r.join(";"));
        }
        if let Some(probs) = &p.probs {
            rec.extend(probs.iter().map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    log::info!("wrote {} predictions to {}", preds.len(), out.display());
    Ok(out)
}

// ----------------------------------------------------------------- summarise

pub struct SummariseArgs {
    pub run: PathBuf,
    pub out: Option<PathBuf>,
    pub refine: Option<bool>,
}

pub fn summarise(a: &SummariseArgs) -> Result<PathBuf, CliError> {
    let LoadedRun { manifest, draws, .. } = load_run(&a.run)?;
    let sc = &manifest.config.summary;
    let out = a.out.clone().unwrap_or_else(|| a.run.join("summary"));
    fs::create_dir_all(&out)?;
    let parts: Vec<NestedPartition> = draws.states.iter().map(|s| s.partition.clone()).collect();
    let opts = SummaryOptions { refine: a.refine.unwrap_or(sc.refine), ..SummaryOptions::default() };
    let est = vi_point_estimate(&parts, &opts)?;

    if sc.psm {
        let mut w = create(&out.join("psm_y.csv"))?;
        psm_y(&parts)?.write_csv(&mut w)?;
        w.flush()?;
        let mut w = create(&out.join("psm_x.csv"))?;
        psm_x_given(&parts, &est.zy)?.write_csv(&mut w)?;
        w.flush()?;
    }
    if sc.vi {
        let seeds: Vec<String> = manifest.chains.iter().map(|c| c.seed.to_string()).collect();
        let mut w = create(&out.join("vi_estimate.csv"))?;
        writeln!(w, "# seeds={} chains={} draws={}", seeds.join(";"), manifest.chains.len(), parts.len())?;
        writeln!(
            w,
            "# k={} kj={:?} expected_vi={} ball_size={}",
            est.k(),
            est.kj(),
            est.expected_vi,
            est.ball_size
        )?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["index", "zy", "zx"])?;
        for (i, (y, x)) in est.zy.iter().zip(&est.zx).enumerate() {
            c.write_record([i.to_string(), y.to_string(), x.to_string()])?;
        }
        c.flush()?;
    }
    log::info!("VI estimate: {} y-clusters with x-cluster counts {:?}", est.k(), est.kj());
    Ok(out)
}
