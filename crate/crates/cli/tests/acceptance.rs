//! Acceptance criteria, one pass/fail line each.
//!
//! cargo test --release -p layermc-cli --test acceptance
//!
//! `ACCEPTANCE_ONLY=2,5` runs a subset.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use layermc::diagnostics::{gelman_rubin, gelman_rubin_ratio, iact, kept_rows, posterior_samples, voxel_posterior};
use layermc::forward::mt::apparent;
use layermc::forward::prism::{potential_hessian, vertical_attraction};
use layermc::forward::{layered_impedance, InducingField};
use layermc::likelihood::{log_likelihood_sensor, NoiseHyper, SensorData};
use layermc::model::Target;
use layermc::pipeline::{self, Overrides, SAMPLES_DIR};
use layermc::prior::{uniform_offdiag, GaussianPrior};
use layermc::proposal::{ProposalKind, ProposalState};
use layermc::sampler::store::SampleStore;
use layermc::sampler::{stream_rng, swap_step, ChainState, Exchange, Ladder, Sampler, SamplerConfig, Walker};
use layermc::synthetic::{Survey, PERTURBED, TRUTH};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

type Outcome = Result<(bool, String), String>;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

struct Flat(GaussianPrior);

impl Target for Flat {
    fn prior(&self) -> &GaussianPrior {
        &self.0
    }
    fn log_likelihood(&self, _: &[f64]) -> f64 {
        -1.5
    }
}

fn pcn_prior_preservation() -> Outcome {
    let blocks: Vec<(Vec<f64>, _)> = (0..8)
        .map(|b| {
            let m = (0..8).map(|i| b as f64 - 3.0 + 0.1 * i as f64).collect();
            (m, uniform_offdiag(8, 0.5 + 0.25 * b as f64, 0.3))
        })
        .collect();
    let target = Flat(GaussianPrior::new(blocks).map_err(err)?);
    let cfg = SamplerConfig {
        iterations: 100_000,
        n_stacks: 1,
        n_temps: 1,
        thinning: 1,
        proposal: ProposalKind::Pcn,
        eta0: 0.3,
        swap_interval: None,
        seed: 11,
        ..Default::default()
    };
    let state = Sampler::new(&target, cfg).map_err(err)?.run().map_err(err)?;
    let acc = state.stacks[0].chains[0].proposal.acceptance_fraction();
    let width = state.row_width();
    let rows = &state.stacks[0].samples;
    let prior = target.prior();
    let (mut worst_z, mut worst_var) = (0.0f64, 0.0f64);
    for j in 0..prior.dim() {
        let x: Vec<f64> = rows.iter().skip(j).step_by(width).copied().collect();
        let batch_means: Vec<f64> = x.chunks(1000).map(mean).collect();
        let se = (variance(&batch_means) / batch_means.len() as f64).sqrt();
        worst_z = worst_z.max((mean(&x) - prior.mean()[j]).abs() / se);
        let target_var = prior.marginal_std()[j].powi(2);
        worst_var = worst_var.max((variance(&x) / target_var - 1.0).abs());
    }
    Ok((
        acc == 1.0 && worst_z < 4.0 && worst_var < 0.05,
        format!("acceptance {acc}, max |mean error|/SE {worst_z:.2} (< 4), max variance error {worst_var:.4} (< 0.05)"),
    ))
}

/// `ln ∫ N(r; 0, s) IG(s; alpha, beta) ds` with `s = e^u`, integrated in
/// unit-width pieces so every piece is smooth on the quadrature scale.
fn scale_mixture_ln_density(r: f64, alpha: f64, beta: f64) -> f64 {
    let ln_norm = alpha * beta.ln() - ln_gamma(alpha) - 0.5 * (2.0 * std::f64::consts::PI).ln();
    // log integrand at its maximum, used as an offset against underflow
    let ln_f = |u: f64| -0.5 * u - 0.5 * r * r * (-u).exp() - alpha * u - beta * (-u).exp();
    let peak = (beta + 0.5 * r * r) / (alpha + 0.5);
    let shift = ln_f(peak.ln());
    let centre = peak.ln();
    let mut total = 0.0;
    for k in -60..60 {
        let a = centre + k as f64 * 0.5;
        total += quadrature::integrate(|u| (ln_f(u) - shift).exp(), a, a + 0.5, 1e-16).integral;
    }
    ln_norm + shift + total.ln()
}

fn likelihood_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for (alpha, beta) in [(5.0, 0.5), (1.25, 1.0), (0.5, 0.05)] {
        let hyper = NoiseHyper::new(alpha, beta).map_err(err)?;
        for i in 0..=100 {
            let r = -5.0 + 0.1 * i as f64;
            let data = SensorData::with_scale(vec![0.0], vec![1.0]).map_err(err)?;
            let closed = log_likelihood_sensor(&[r], &data, &hyper).map_err(err)?;
            worst = worst.max((closed - scale_mixture_ln_density(r, alpha, beta)).abs());
        }
    }
    Ok((worst < 1e-6, format!("max |closed form - quadrature| {worst:.2e} (< 1e-6) over 303 points")))
}

fn ln_normal(x: f64, m: f64, s: f64) -> f64 {
    -0.5 * ((x - m) / s).powi(2) - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Likelihood that turns the N(0, 2^2) prior into an equal mixture of
/// N(-3, 0.5^2) and N(3, 0.5^2).
struct Bimodal(GaussianPrior);

impl Target for Bimodal {
    fn prior(&self) -> &GaussianPrior {
        &self.0
    }
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        let x = theta[0];
        let (a, b) = (ln_normal(x, -3.0, 0.5), ln_normal(x, 3.0, 0.5));
        let hi = a.max(b);
        let mix = hi + ((a - hi).exp() + (b - hi).exp()).ln() + 0.5f64.ln();
        mix - ln_normal(x, 0.0, 2.0)
    }
}

fn bimodal_weights() -> Outcome {
    let target = Bimodal(GaussianPrior::independent(&[0.0], &[2.0]).map_err(err)?);
    let cfg = SamplerConfig {
        iterations: 200_000,
        n_stacks: 4,
        n_temps: 8,
        proposal: ProposalKind::Pcn,
        thinning: 10,
        seed: 3,
        ..Default::default()
    };
    let sampler = Sampler::new(&target, cfg).map_err(err)?;
    let state = sampler.run().map_err(err)?;
    let w = state.row_width();
    let pos: Vec<f64> = state
        .stacks
        .iter()
        .flat_map(|s| s.samples.iter().step_by(w).map(|&x| (x > 0.0) as u8 as f64))
        .collect();
    let pt_weight = mean(&pos);

    let whiten = sampler.whiten().clone();
    let proposal = ProposalState::new(ProposalKind::Igrw, 0.1, 1, 10.0, 0.0).map_err(err)?;
    let mut chain = ChainState::from_prior(&target, &whiten, proposal, stream_rng(5, 0));
    chain.walker = Walker::at(&target, &whiten, whiten.whiten(&[3.0]));
    let mut positive = 0u64;
    let n = 200_000u64;
    for _ in 0..n {
        chain.step(&target, &whiten, 1.0).map_err(err)?;
        let x = whiten.unwhiten(&chain.walker.z)[0];
        positive += (x > 0.0) as u64;
    }
    let single_weight = positive as f64 / n as f64;
    let (pt_err, single_err) = ((pt_weight - 0.5).abs(), (single_weight - 0.5).abs());
    Ok((
        pt_err <= 0.05 && single_err > 0.2,
        format!(
            "tempered weight {pt_weight:.3} (|w - 0.5| {pt_err:.3} <= 0.05), single-chain weight {single_weight:.3} (error {single_err:.3} > 0.2)"
        ),
    ))
}

const TOY_PRIOR: [f64; 5] = [0.1, 0.3, 0.2, 0.25, 0.15];
const TOY_LL: [f64; 5] = [0.0, -2.0, 1.5, -1.0, 0.5];

#[derive(Debug, Clone, Copy)]
struct Discrete(usize);

impl Exchange for Discrete {
    fn log_likelihood(&self) -> f64 {
        TOY_LL[self.0]
    }
}

fn tempered_pmf(beta: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..5).map(|i| TOY_PRIOR[i] * (beta * TOY_LL[i]).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

fn draw(pmf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pmf.len() - 1
}

/// Total variation between the untempered chain's histogram and the exact
/// posterior. `full` adds a Metropolis move per chain before each swap
/// round; otherwise only the hottest chain moves, by exact tempered draws.
fn toy_ladder_tv(full: bool, seed: u64) -> Result<f64, String> {
    let betas = vec![1.0, 0.6, 0.3, 0.1];
    let mut ladder = Ladder::from_betas(betas.clone()).map_err(err)?;
    let hot = tempered_pmf(*betas.last().unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = vec![Discrete(0); betas.len()];
    let n = 100_000;
    let mut counts = [0u64; 5];
    for _ in 0..n {
        if full {
            for (k, s) in states.iter_mut().enumerate() {
                let j = (s.0 + rng.random_range(1..5)) % 5;
                let log_r = (TOY_PRIOR[j] / TOY_PRIOR[s.0]).ln() + betas[k] * (TOY_LL[j] - TOY_LL[s.0]);
                if rng.random::<f64>().ln() < log_r {
                    s.0 = j;
                }
            }
        } else {
            states.last_mut().unwrap().0 = draw(&hot, &mut rng);
        }
        swap_step(&mut ladder, &mut states, &mut rng);
        counts[states[0].0] += 1;
    }
    let exact = tempered_pmf(1.0);
    Ok(0.5 * (0..5).map(|i| (counts[i] as f64 / n as f64 - exact[i]).abs()).sum::<f64>())
}

fn swap_rule() -> Outcome {
    let swap_only = toy_ladder_tv(false, 21)?;
    let full = toy_ladder_tv(true, 22)?;
    Ok((
        swap_only < 0.02 && full < 0.02,
        format!("TV swap-only {swap_only:.4}, with local moves {full:.4} (< 0.02, 1e5 samples)"),
    ))
}

type Prism = [[f64; 2]; 3];

fn midpoint<F: Fn([f64; 3]) -> f64>(p: &Prism, n: usize, f: F) -> f64 {
    let h = [0, 1, 2].map(|a| (p[a][1] - p[a][0]) / n as f64);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let q = [
                    p[0][0] + (i as f64 + 0.5) * h[0],
                    p[1][0] + (j as f64 + 0.5) * h[1],
                    p[2][0] + (k as f64 + 0.5) * h[2],
                ];
                total += f(q);
            }
        }
    }
    total * h[0] * h[1] * h[2]
}

fn forward_oracles() -> Outcome {
    let prism: Prism = [[0.0, 100.0], [0.0, 100.0], [0.0, 100.0]];
    let observers = [[50.0, 50.0, -100.0], [250.0, 50.0, 10.0], [-100.0, -100.0, -100.0], [50.0, 50.0, 200.0]];
    let mut gravity = 0.0f64;
    for o in observers {
        let closed = vertical_attraction(o, &prism);
        let quad = midpoint(&prism, 64, |q| {
            let d = [q[0] - o[0], q[1] - o[1], q[2] - o[2]];
            d[2] / (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).powf(1.5)
        });
        gravity = gravity.max(((closed - quad) / quad).abs());
    }

    // TMI of a 100 m cube against a point dipole of equal moment
    let field = InducingField {
        magnitude_nt: 50_000.0,
        inclination_deg: 60.0,
        declination_deg: 10.0,
    };
    let f = field.direction();
    let (chi, a): (f64, f64) = (0.01, 100.0);
    let cube: Prism = [[-a / 2.0, a / 2.0], [-a / 2.0, a / 2.0], [0.0, a]];
    let mut magnetic = 0.0f64;
    for dir in [[0.0f64, 0.0, -1.0], [0.6, -0.8, -0.05], [-0.7, 0.1, -0.7], [0.2, 0.7, -0.68]] {
        let norm = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        let u = dir.map(|v| v / norm);
        let r = 10.0 * a;
        let obs = [r * u[0], r * u[1], a / 2.0 + r * u[2]];
        let h = potential_hessian(obs, &cube).ok_or("singular magnetic kernel")?;
        let mut q = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                q += f[i] * h[i][j] * f[j];
            }
        }
        let closed = chi * field.magnitude_nt / (4.0 * std::f64::consts::PI) * q;
        let c = f[0] * u[0] + f[1] * u[1] + f[2] * u[2];
        let dipole = chi * field.magnitude_nt * a.powi(3) / (4.0 * std::f64::consts::PI * r.powi(3)) * (3.0 * c * c - 1.0);
        magnetic = magnetic.max(((closed - dipole) / dipole).abs());
    }

    let mut half_space = 0.0f64;
    for rho in [1.0, 100.0, 1e4] {
        for freq in [1e-3, 1.0, 1e3] {
            let p = apparent(layered_impedance(&[], &[rho], freq).map_err(err)?, freq);
            half_space = half_space.max(((p.app_res - rho) / rho).abs()).max(((p.phase_deg - 45.0) / 45.0).abs());
        }
    }

    let thickness = [120.0, 300.0, 80.0, 500.0, 250.0, 750.0];
    let resistivity = [30.0, 300.0, 5.0, 1000.0, 50.0, 10.0, 200.0];
    let splits = [60, 150, 40, 250, 125, 375];
    let mut fine_h = Vec::new();
    let mut fine_rho = Vec::new();
    for ((&h, &rho), &n) in thickness.iter().zip(&resistivity).zip(&splits) {
        fine_h.extend(std::iter::repeat_n(h / n as f64, n));
        fine_rho.extend(std::iter::repeat_n(rho, n));
    }
    fine_rho.push(*resistivity.last().unwrap());
    let mut layered = 0.0f64;
    for e in -3..=3 {
        let freq = 10f64.powi(e);
        let coarse = apparent(layered_impedance(&thickness, &resistivity, freq).map_err(err)?, freq);
        let fine = apparent(layered_impedance(&fine_h, &fine_rho, freq).map_err(err)?, freq);
        layered = layered
            .max(((coarse.app_res - fine.app_res) / fine.app_res).abs())
            .max(((coarse.phase_deg - fine.phase_deg) / fine.phase_deg).abs());
    }
    Ok((
        gravity < 1e-3 && magnetic < 5e-3 && half_space < 1e-8 && layered < 1e-6,
        format!(
            "gravity vs quadrature {gravity:.1e} (< 1e-3), magnetic vs dipole {magnetic:.1e} (< 5e-3), half-space {half_space:.1e} (< 1e-8), 6-layer vs 1000 sublayers {layered:.1e} (< 1e-6)"
        ),
    ))
}

fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation = (1.0 - phi * phi).sqrt();
    let mut x = rng.sample::<f64, _>(StandardNormal);
    (0..n)
        .map(|_| {
            x = phi * x + innovation * rng.sample::<f64, _>(StandardNormal);
            x
        })
        .collect()
}

fn diagnostics_oracles() -> Outcome {
    let mut worst_iact = 0.0f64;
    for (phi, seed) in [(0.5, 31), (0.9, 32)] {
        let tau = iact(&ar1(phi, 1_000_000, seed)).map_err(err)?.tau;
        let exact = (1.0 + phi) / (1.0 - phi);
        worst_iact = worst_iact.max(((tau - exact) / exact).abs());
    }
    let iid: Vec<Vec<f64>> = (0..4).map(|s| ar1(0.0, 10_000, 40 + s)).collect();
    let refs: Vec<&[f64]> = iid.iter().map(Vec::as_slice).collect();
    let r_iid = gelman_rubin(&refs).map_err(err)?;
    let shifted: Vec<Vec<f64>> = iid
        .iter()
        .enumerate()
        .map(|(s, c)| c.iter().map(|v| v + 3.0 * s as f64).collect())
        .collect();
    let refs: Vec<&[f64]> = shifted.iter().map(Vec::as_slice).collect();
    let r_apart = gelman_rubin(&refs).map_err(err)?;
    let hand = gelman_rubin_ratio(2.0, 2.0, 4, 100);
    let hand_ok = (hand - 1.0025).abs() <= 4.0 * f64::EPSILON;
    Ok((
        worst_iact < 0.1 && (0.999..=1.01).contains(&r_iid) && r_apart > 1.1 && hand_ok,
        format!(
            "AR(1) IACT error {worst_iact:.3} (< 0.1), R iid {r_iid:.4}, R separated {r_apart:.1}, hand value {hand}"
        ),
    ))
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let survey = Survey {
        iterations: 200_000,
        checkpoint_interval: None,
        ..Default::default()
    };
    let path = survey.write(dir.path()).map_err(err)?;
    let cfg = pipeline::load(&path, &Overrides::default()).map_err(err)?;
    let outcome = pipeline::run(&cfg, None).map_err(err)?;
    let report = pipeline::diagnose(&cfg).map_err(err)?;
    let store = SampleStore::read(&cfg.output_dir().join(SAMPLES_DIR)).map_err(err)?;
    let rows = kept_rows(&store, cfg.config.outputs.burn_in_fraction).map_err(err)?;
    let all = posterior_samples(&store, rows, None);

    let contrast: Vec<f64> = all.iter().map(|t| t[6] - t[5]).collect();
    let true_contrast = TRUTH[6] - TRUTH[5];
    let contrast_z = (mean(&contrast) - true_contrast).abs() / variance(&contrast).sqrt();
    let depth: Vec<f64> = all.iter().map(|t| t[PERTURBED]).collect();
    let depth_z = (mean(&depth) - TRUTH[PERTURBED]).abs() / variance(&depth).sqrt();
    let worst_r = report
        .parameters
        .iter()
        .map(|p| p.gelman_rubin.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);

    // boundary cells of the true world against cells far from any boundary
    let world = cfg.world.clone();
    let truth = world.voxelise_flat(&TRUTH).map_err(err)?;
    let samples = posterior_samples(&store, kept_rows(&store, 0.5).map_err(err)?, Some(1000));
    let post = voxel_posterior(&world, &samples, Some(1), 0.0).map_err(err)?;
    let h = post.target_entropy.as_ref().ok_or("no target entropy")?;
    let nz = truth.geometry.dims[2];
    let occ = |v: usize| truth.occupancy[v];
    let (mut near, mut far) = (Vec::new(), Vec::new());
    for v in 0..truth.geometry.n_voxels() {
        let iz = v % nz;
        let window = |w: usize| (iz.saturating_sub(w)..=(iz + w).min(nz - 1)).all(|k| occ(v - iz + k) == occ(v));
        if !window(1) {
            near.push(h[v]);
        } else if window(8) {
            far.push(h[v]);
        }
    }
    let (h_near, h_far) = (mean(&near), mean(&far));
    let wall = outcome.meta.wall_seconds;
    Ok((
        contrast_z < 2.0 && depth_z < 2.0 && worst_r < 1.1 && h_near > h_far,
        format!(
            "contrast {:.4} vs {true_contrast:.2} ({contrast_z:.2} sd), perturbed depth {:.0} vs {} m ({depth_z:.2} sd), max R {worst_r:.3} (< 1.1), entropy near boundary {h_near:.3} > far {h_far:.3} bits, sampling {wall:.0} s",
            mean(&contrast),
            mean(&depth),
            TRUTH[PERTURBED],
        ),
    ))
}

fn cli_run(config: &Path, output: &Path, threads: usize) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_layermc"))
        .args(["--threads", &threads.to_string(), "run", "--config"])
        .arg(config)
        .arg("--output")
        .arg(output)
        .output()
        .map_err(err)?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(())
}

fn store_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<_> = std::fs::read_dir(dir.join(SAMPLES_DIR))
        .map_err(err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    files.sort();
    files
        .into_iter()
        .map(|p| Ok((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).map_err(err)?)))
        .collect()
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let survey = Survey {
        iterations: 2000,
        n_stacks: 2,
        n_temps: 4,
        thinning: 5,
        checkpoint_interval: Some(500),
        ..Default::default()
    };
    let config = survey.write(dir.path()).map_err(err)?;
    let mut stores = Vec::new();
    for (i, threads) in [1, 4, 8, 1, 4, 8].into_iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        cli_run(&config, &out, threads)?;
        stores.push(store_bytes(&out)?);
    }
    let identical = stores.windows(2).all(|w| w[0] == w[1]);
    let bytes: usize = stores[0].iter().map(|(_, b)| b.len()).sum();
    Ok((
        identical,
        format!("6 runs at 1, 4 and 8 threads, {} files and {bytes} bytes each, identical: {identical}", stores[0].len()),
    ))
}

struct Criterion {
    number: u32,
    name: &'static str,
    budget_s: f64,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { number: 1, name: "pCN preserves the prior", budget_s: 60.0, check: pcn_prior_preservation },
        Criterion { number: 2, name: "likelihood equals the scale-mixture integral", budget_s: 10.0, check: likelihood_oracle },
        Criterion { number: 3, name: "tempering recovers bimodal weights", budget_s: 120.0, check: bimodal_weights },
        Criterion { number: 4, name: "swap rule targets the tempered posteriors", budget_s: 30.0, check: swap_rule },
        Criterion { number: 5, name: "forward models match independent oracles", budget_s: 60.0, check: forward_oracles },
        Criterion { number: 6, name: "IACT and Gelman-Rubin oracles", budget_s: 60.0, check: diagnostics_oracles },
        Criterion { number: 7, name: "synthetic two-layer recovery", budget_s: 600.0, check: end_to_end },
        Criterion { number: 8, name: "outputs independent of thread count", budget_s: 120.0, check: determinism },
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.as_ref().is_none_or(|o| o.contains(&c.number))) {
        let start = Instant::now();
        let result = (c.check)();
        let secs = start.elapsed().as_secs_f64();
        let in_time = secs < c.budget_s;
        let (pass, detail) = match result {
            Ok((ok, d)) => (ok && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !pass as u32;
        println!(
            "criterion {} {}: {} ({detail}; {secs:.1} s of {:.0} s)",
            c.number,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            c.budget_s
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
