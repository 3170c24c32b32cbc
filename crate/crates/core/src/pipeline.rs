//! Command orchestration: run, resume, diagnose, voxelise and subsample,
//! and every file they write.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    in_acceptance_band, kept_rows, parameter_reports, posterior_samples, residual_summary, slice_export,
    summary_row, voxel_posterior, write_slice_csv, ParameterReport, SummaryRow, GELMAN_RUBIN_THRESHOLD,
    IACT_CUTOFF,
};
use crate::error::{Error, Result};
use crate::io::config::{LoadedConfig, RunConfig};
use crate::io::sensors::{read_mt_rows, read_potential_csv, write_rows};
use crate::io::subsample::subsample;
use crate::model::Inversion;
use crate::sampler::checkpoint::Checkpoint;
use crate::sampler::store::SampleStore;
use crate::sampler::{RunState, Sampler, Snapshot};

pub const RUN_META_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const RUN_META_FILE: &str = "run.json";
pub const ADAPTATION_FILE: &str = "adaptation.csv";
pub const SAMPLES_DIR: &str = "samples";
pub const DIAGNOSTICS_DIR: &str = "diagnostics";
pub const REPORT_FILE: &str = "report.json";

/// Command-line adjustments applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

/// Loads a config, applies overrides, then validates and hashes it.
pub fn load(path: &Path, ov: &Overrides) -> Result<LoadedConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(s) = ov.seed {
        config.sampler.seed = s;
    }
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(o) = &ov.output {
        config.outputs.directory = std::path::absolute(o).map_err(|e| Error::io(o, e))?;
    }
    LoadedConfig::assemble(config, base_dir)
}

/// Per-process CPU time across all threads, seconds.
pub fn process_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackMeta {
    pub betas: Vec<f64>,
    pub eta: Vec<f64>,
    pub acceptance: Vec<f64>,
    pub nan_rejects: Vec<u64>,
    /// Between ladder neighbours `k` and `k + 1`.
    pub swap_rates: Vec<Option<f64>>,
    pub swap_attempts: Vec<u64>,
}

/// Run metadata written next to the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub iterations: u64,
    pub iterations_completed: u64,
    pub complete: bool,
    /// Invocations of `run` or `resume` that produced this state.
    pub segments: u32,
    pub threads: usize,
    pub wall_seconds: f64,
    pub cpu_seconds: f64,
    pub cpu_hours: f64,
    pub stacks: Vec<StackMeta>,
    /// Adapted step sizes and ladders over the run.
    pub history: Vec<Snapshot>,
}

impl RunMeta {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn stack_meta(state: &RunState) -> Vec<StackMeta> {
    state
        .stacks
        .iter()
        .map(|s| StackMeta {
            betas: s.ladder.betas().to_vec(),
            eta: s.chains.iter().map(|c| c.proposal.eta).collect(),
            acceptance: s.chains.iter().map(|c| c.proposal.acceptance_fraction()).collect(),
            nan_rejects: s.chains.iter().map(|c| c.proposal.nan_rejects).collect(),
            swap_rates: (0..s.ladder.len().saturating_sub(1)).map(|k| s.ladder.swap_rate(k)).collect(),
            swap_attempts: s.ladder.attempts().to_vec(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptationRow {
    pub iteration: u64,
    pub stack: usize,
    pub chain: usize,
    pub beta: f64,
    pub eta: f64,
    pub acceptance: f64,
}

fn adaptation_rows(history: &[Snapshot]) -> Vec<AdaptationRow> {
    let mut out = Vec::new();
    for h in history {
        for (s, betas) in h.betas.iter().enumerate() {
            for (k, &beta) in betas.iter().enumerate() {
                out.push(AdaptationRow {
                    iteration: h.iteration,
                    stack: s,
                    chain: k,
                    beta,
                    eta: h.eta[s][k],
                    acceptance: h.acceptance[s][k],
                });
            }
        }
    }
    out
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Outcome of `run` or `resume`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    pub meta: RunMeta,
}

/// Starts a fresh run, stopping after `stop_after` iterations if given.
pub fn run(cfg: &LoadedConfig, stop_after: Option<u64>) -> Result<RunOutcome> {
    let inv = cfg.inversion()?;
    let sampler = Sampler::new(&inv, cfg.config.sampler.clone())?;
    let clock = (Instant::now(), process_cpu_seconds());
    let state = sampler.init()?;
    drive(cfg, &inv, &sampler, state, stop_after, clock, (0.0, 0.0, 0))
}

/// Continues from the checkpoint in the output directory.
pub fn resume(cfg: &LoadedConfig, stop_after: Option<u64>) -> Result<RunOutcome> {
    let out = cfg.output_dir();
    let ck = Checkpoint::load_matching(&out.join(CHECKPOINT_FILE), &cfg.hash)?;
    let inv = cfg.inversion()?;
    let sampler = Sampler::new(&inv, cfg.config.sampler.clone())?;
    sampler.check_state(&ck.state)?;
    if ck.state.iteration >= cfg.config.sampler.iterations {
        return Err(Error::Checkpoint("the checkpointed run is already complete".into()));
    }
    let prior = match RunMeta::read(&out.join(RUN_META_FILE)) {
        Ok(m) if m.config_hash == cfg.hash => (m.wall_seconds, m.cpu_seconds, m.segments),
        _ => (0.0, 0.0, 0),
    };
    let clock = (Instant::now(), process_cpu_seconds());
    drive(cfg, &inv, &sampler, ck.state, stop_after, clock, prior)
}

fn drive(
    cfg: &LoadedConfig,
    inv: &Inversion,
    sampler: &Sampler<'_, Inversion>,
    mut state: RunState,
    stop_after: Option<u64>,
    (wall0, cpu0): (Instant, f64),
    (prior_wall, prior_cpu, prior_segments): (f64, f64, u32),
) -> Result<RunOutcome> {
    let out = cfg.output_dir();
    create_dir(&out)?;
    let ck_path = out.join(CHECKPOINT_FILE);
    let total = cfg.config.sampler.iterations;
    let until = stop_after.unwrap_or(total).min(total);
    let hash = cfg.hash.clone();
    sampler.advance(&mut state, until, &mut |s| {
        Checkpoint {
            config_hash: hash.clone(),
            state: s.clone(),
        }
        .save(&ck_path)
    })?;
    let complete = state.iteration >= total;
    // also on completion, so a later resume sees a finished run
    Checkpoint {
        config_hash: cfg.hash.clone(),
        state: state.clone(),
    }
    .save(&ck_path)?;
    let names = inv.world().layout().names(inv.world().spec());
    SampleStore::from_state(&state, &names)?.write(&out.join(SAMPLES_DIR))?;
    write_rows(&out.join(ADAPTATION_FILE), &adaptation_rows(&state.history))?;
    let wall = prior_wall + wall0.elapsed().as_secs_f64();
    let cpu = prior_cpu + (process_cpu_seconds() - cpu0).max(0.0);
    let meta = RunMeta {
        format_version: RUN_META_VERSION,
        config_hash: cfg.hash.clone(),
        seed: cfg.config.sampler.seed,
        iterations: total,
        iterations_completed: state.iteration,
        complete,
        segments: prior_segments + 1,
        threads: rayon::current_num_threads(),
        wall_seconds: wall,
        cpu_seconds: cpu,
        cpu_hours: cpu / 3600.0,
        stacks: stack_meta(&state),
        history: state.history.clone(),
    };
    write_json(&out.join(RUN_META_FILE), &meta)?;
    Ok(RunOutcome { output_dir: out, meta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub label: String,
    pub unit: String,
    pub sigma: f64,
    pub n: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub n_samples: usize,
    pub target_layer: Option<String>,
    pub below_depth_m: f64,
    /// Entropy over all layers, bits.
    pub mean_entropy_below: f64,
    /// Binary target-layer entropy, bits.
    pub mean_target_entropy_below: Option<f64>,
    pub slice_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceFlag {
    pub stack: usize,
    pub chain: usize,
    pub beta: f64,
    pub acceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub config_hash: String,
    pub iterations: u64,
    pub thinning: u64,
    pub burn_in_fraction: f64,
    /// Recorded rows kept per stack, `[start, end)`.
    pub rows_kept: [usize; 2],
    pub n_stacks: usize,
    /// IACT sums stop before the first autocorrelation below this value.
    pub iact_cutoff: f64,
    pub gelman_rubin_threshold: f64,
    pub summary: SummaryRow,
    /// Parameters at or above the Gelman-Rubin threshold.
    pub unconverged: Vec<String>,
    /// Chains outside the acceptance band at the end of the run.
    pub acceptance_out_of_band: Vec<AcceptanceFlag>,
    pub parameters: Vec<ParameterReport>,
    pub residuals: Vec<ResidualReport>,
    pub entropy: EntropyReport,
    pub trace_files: Vec<String>,
}

fn depth_tag(d: f64) -> String {
    format!("{d}").replace('.', "p")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub x_m: f64,
    pub y_m: f64,
    pub data: f64,
    pub mean_prediction: f64,
    pub residual: f64,
}

fn write_trace(path: &Path, store: &SampleStore, stack: usize) -> Result<()> {
    let err = |e| crate::diagnostics::entropy::csv_error(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(store.sidecar.columns.iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(err)?;
    let thin = store.sidecar.thinning;
    for r in 0..store.n_rows(stack) {
        let mut rec = vec![((r as u64 + 1) * thin).to_string()];
        rec.extend(store.row(stack, r).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Post-hoc diagnostics of a finished (or stopped) run.
pub fn diagnose(cfg: &LoadedConfig) -> Result<Report> {
    let out = cfg.output_dir();
    let meta = RunMeta::read(&out.join(RUN_META_FILE))?;
    if meta.config_hash != cfg.hash {
        return Err(Error::InvalidInput(format!(
            "run was made with configuration {}, not {}",
            meta.config_hash, cfg.hash
        )));
    }
    let store = SampleStore::read(&out.join(SAMPLES_DIR))?;
    let o = &cfg.config.outputs;
    let rows = kept_rows(&store, o.burn_in_fraction)?;
    let dir = out.join(DIAGNOSTICS_DIR);
    create_dir(&dir)?;

    let parameters = parameter_reports(&store, rows.clone());
    let unconverged = parameters
        .iter()
        .filter(|p| p.gelman_rubin.is_some_and(|r| !(r < GELMAN_RUBIN_THRESHOLD)))
        .map(|p| p.name.clone())
        .collect();
    let samples = posterior_samples(&store, rows.clone(), o.max_posterior_samples);
    let inv = cfg.inversion()?;

    let res = if inv.sensors().is_empty() {
        None
    } else {
        Some(residual_summary(&inv, &samples)?)
    };
    let mut residuals = Vec::new();
    for g in res.iter().flat_map(|r| &r.groups) {
        let file = format!("residuals_{}.csv", g.label);
        let table: Vec<ResidualRow> = (0..g.data.len())
            .map(|i| ResidualRow {
                x_m: g.xy[i][0],
                y_m: g.xy[i][1],
                data: g.data[i],
                mean_prediction: g.mean_prediction[i],
                residual: g.residuals[i],
            })
            .collect();
        write_rows(&dir.join(&file), &table)?;
        residuals.push(ResidualReport {
            label: g.label.clone(),
            unit: g.unit.clone(),
            sigma: g.sigma,
            n: g.data.len(),
            file,
        });
    }

    let target = cfg.config.target_layer_index();
    let ent = voxel_posterior(inv.world(), &samples, target, o.entropy_below_m)?;
    let mut slice_files = Vec::new();
    for &d in &o.slice_depths_m {
        let mut grids: Vec<(&str, &[f64])> = vec![("entropy", &ent.entropy)];
        if let (Some(p), Some(h)) = (&ent.target_probability, &ent.target_entropy) {
            grids.push(("target_probability", p));
            grids.push(("target_entropy", h));
        }
        for (name, grid) in grids {
            let file = format!("slice_{}m_{name}.csv", depth_tag(d));
            write_slice_csv(&dir.join(&file), &slice_export(&ent.geometry, grid, d)?)?;
            slice_files.push(file);
        }
    }

    let mut trace_files = Vec::new();
    for s in 0..store.n_stacks() {
        let file = format!("trace_stack_{s}.csv");
        write_trace(&dir.join(&file), &store, s)?;
        trace_files.push(file);
    }

    let acceptance_out_of_band = meta
        .stacks
        .iter()
        .enumerate()
        .flat_map(|(s, m)| {
            m.acceptance.iter().enumerate().filter_map(move |(k, &a)| {
                (!in_acceptance_band(a)).then_some(AcceptanceFlag {
                    stack: s,
                    chain: k,
                    beta: m.betas[k],
                    acceptance: a,
                })
            })
        })
        .collect();

    let summary = summary_row(&parameters, res.as_ref(), Some(&ent), meta.iterations_completed, meta.cpu_hours)?;
    let report = Report {
        format_version: REPORT_VERSION,
        config_hash: cfg.hash.clone(),
        iterations: meta.iterations_completed,
        thinning: store.sidecar.thinning,
        burn_in_fraction: o.burn_in_fraction,
        rows_kept: [rows.start, rows.end],
        n_stacks: store.n_stacks(),
        iact_cutoff: IACT_CUTOFF,
        gelman_rubin_threshold: GELMAN_RUBIN_THRESHOLD,
        summary,
        unconverged,
        acceptance_out_of_band,
        parameters,
        residuals,
        entropy: EntropyReport {
            n_samples: ent.n_samples,
            target_layer: o.target_layer.clone(),
            below_depth_m: ent.below_depth,
            mean_entropy_below: ent.mean_entropy_below,
            mean_target_entropy_below: ent.mean_target_entropy_below,
            slice_files,
        },
        trace_files,
    };
    write_json(&dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<Report> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Which recorded world to voxelise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorldChoice {
    /// Recorded row of a stack's untempered chain.
    Sample { stack: usize, row: usize },
    PriorMean,
}

/// Voxel CSV of one world: cell centres, 1-based layer index and one
/// column per property role.
pub fn voxelise(cfg: &LoadedConfig, choice: WorldChoice, path: &Path) -> Result<usize> {
    let theta: Vec<f64> = match choice {
        WorldChoice::PriorMean => cfg.prior.mean().to_vec(),
        WorldChoice::Sample { stack, row } => {
            let store = SampleStore::read(&cfg.output_dir().join(SAMPLES_DIR))?;
            if stack >= store.n_stacks() || row >= store.n_rows(stack) {
                return Err(Error::InvalidInput(format!(
                    "no sample {row} in stack {stack} (stacks: {}, rows: {})",
                    store.n_stacks(),
                    (0..store.n_stacks()).map(|s| store.n_rows(s)).min().unwrap_or(0)
                )));
            }
            store.params(stack, row).to_vec()
        }
    };
    let model = cfg.world.voxelise_flat(&theta)?;
    let g = model.geometry;
    let err = |e| crate::diagnostics::entropy::csv_error(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header: Vec<String> = ["x_m", "y_m", "z_m", "layer"].iter().map(|s| s.to_string()).collect();
    header.extend(model.properties.keys().map(|r| r.name().to_string()));
    w.write_record(&header).map_err(err)?;
    let nz = g.dims[2];
    for v in 0..g.n_voxels() {
        let [x, y] = g.column_center(v / nz);
        let mut rec = vec![
            x.to_string(),
            y.to_string(),
            g.z_center(v % nz).to_string(),
            (model.occupancy[v] as usize + 1).to_string(),
        ];
        rec.extend(model.properties.values().map(|p| p[v].to_string()));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(g.n_voxels())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Gravity,
    Magnetic,
    Mt,
}

/// Writes a seeded random subset of `count` rows of a sensor file.
pub fn subsample_file(input: &Path, kind: DataKind, count: usize, seed: u64, output: &Path) -> Result<usize> {
    match kind {
        DataKind::Gravity | DataKind::Magnetic => {
            let rows = read_potential_csv(input)?;
            write_rows(output, &subsample(&rows, count, seed)?)?;
        }
        DataKind::Mt => {
            let rows = read_mt_rows(input)?;
            write_rows(output, &subsample(&rows, count, seed)?)?;
        }
    }
    Ok(count)
}
