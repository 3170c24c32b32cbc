//! Post-hoc diagnostics over recorded sample stores.

pub mod autocorr;
pub mod convergence;
pub mod entropy;
pub mod residuals;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::store::SampleStore;

pub use autocorr::{acf, iact, Iact, IACT_CUTOFF};
pub use convergence::{
    acceptance_fraction, gelman_rubin, gelman_rubin_ratio, in_acceptance_band, ChainStats, ACCEPTANCE_BAND,
    GELMAN_RUBIN_THRESHOLD,
};
pub use entropy::{entropy_bits, read_slice_csv, slice_export, voxel_posterior, write_slice_csv, EntropyMap, SliceRow};
pub use residuals::{residual_summary, ResidualGroup, ResidualSummary};

/// Rows kept per stack after discarding the burn-in fraction, truncated to
/// a common length.
pub fn kept_rows(store: &SampleStore, burn_in_fraction: f64) -> Result<std::ops::Range<usize>> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidInput(format!(
            "burn-in fraction must lie in [0, 1), got {burn_in_fraction}"
        )));
    }
    let n = (0..store.n_stacks()).map(|s| store.n_rows(s)).min().unwrap_or(0);
    let start = (burn_in_fraction * n as f64).floor() as usize;
    if n - start < 2 {
        return Err(Error::InvalidInput("fewer than two samples after burn-in".into()));
    }
    Ok(start..n)
}

/// Post-burn-in parameter vectors of every stack, in stack then row order,
/// thinned to at most `max` vectors.
pub fn posterior_samples(store: &SampleStore, rows: std::ops::Range<usize>, max: Option<usize>) -> Vec<&[f64]> {
    let all: Vec<&[f64]> = (0..store.n_stacks())
        .flat_map(|s| rows.clone().map(move |r| store.params(s, r)))
        .collect();
    match max {
        Some(m) if m > 0 && all.len() > m => {
            let step = all.len().div_ceil(m);
            all.into_iter().step_by(step).collect()
        }
        _ => all,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterReport {
    pub name: String,
    pub unit: String,
    pub posterior_mean: f64,
    pub posterior_std: f64,
    /// Across stacks; `None` with one stack or a constant parameter.
    pub gelman_rubin: Option<f64>,
    /// Per stack, in iterations (recorded-sample IACT times thinning).
    pub iact_iterations: Vec<f64>,
    pub mean_iact_iterations: Option<f64>,
}

pub fn parameter_reports(store: &SampleStore, rows: std::ops::Range<usize>) -> Vec<ParameterReport> {
    let thin = store.sidecar.thinning as f64;
    (0..store.n_params())
        .map(|col| {
            let chains: Vec<Vec<f64>> = (0..store.n_stacks())
                .map(|s| store.column(s, col)[rows.clone()].to_vec())
                .collect();
            let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
            let pooled: Vec<f64> = chains.concat();
            let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
            let std = autocorr::sample_variance(&pooled).sqrt();
            let gelman_rubin = if refs.len() >= 2 { gelman_rubin(&refs).ok() } else { None };
            let iact_iterations: Vec<f64> = refs
                .iter()
                .filter_map(|c| iact(c).ok().map(|t| t.tau * thin))
                .collect();
            let mean_iact_iterations = (!iact_iterations.is_empty())
                .then(|| iact_iterations.iter().sum::<f64>() / iact_iterations.len() as f64);
            let c = &store.sidecar.columns[col];
            ParameterReport {
                name: c.name.clone(),
                unit: c.unit.clone(),
                posterior_mean: mean,
                posterior_std: std,
                gelman_rubin,
                iact_iterations,
                mean_iact_iterations,
            }
        })
        .collect()
}

/// Summary row in the layout of the paper's run table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub tau_min: f64,
    pub tau_med: f64,
    pub tau_max: f64,
    /// Residual standard deviation per sensor group.
    pub sigma: BTreeMap<String, f64>,
    /// Mean target-layer (binary) entropy below the configured depth, bits.
    pub mean_entropy: Option<f64>,
    /// Mean entropy over all layers below the configured depth, bits.
    pub mean_layer_entropy: Option<f64>,
    /// Iterations per chain.
    pub n: u64,
    pub cpu_hours: f64,
    /// `cpu_hours * tau_max / n`.
    pub cpu_hours_per_tau: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn summary_row(
    params: &[ParameterReport],
    residuals: Option<&ResidualSummary>,
    entropy: Option<&EntropyMap>,
    iterations: u64,
    cpu_hours: f64,
) -> Result<SummaryRow> {
    let mut taus: Vec<f64> = params.iter().filter_map(|p| p.mean_iact_iterations).collect();
    if taus.is_empty() {
        return Err(Error::DegenerateSeries("no parameter has a defined IACT".into()));
    }
    taus.sort_by(f64::total_cmp);
    let tau_max = *taus.last().unwrap();
    Ok(SummaryRow {
        tau_min: taus[0],
        tau_med: median(&taus),
        tau_max,
        sigma: residuals
            .map(|r| r.groups.iter().map(|g| (g.label.clone(), g.sigma)).collect())
            .unwrap_or_default(),
        mean_entropy: entropy.and_then(|e| e.mean_target_entropy_below),
        mean_layer_entropy: entropy.map(|e| e.mean_entropy_below),
        n: iterations,
        cpu_hours,
        cpu_hours_per_tau: cpu_hours * tau_max / iterations.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::store::{Column, Sidecar};

    fn store(cols: usize, rows: usize) -> SampleStore {
        let data = (0..2)
            .map(|s| {
                (0..rows * cols)
                    .map(|i| ((i * 7919 + s * 104_729) % 1000) as f64 / 1000.0)
                    .collect()
            })
            .collect();
        SampleStore {
            sidecar: Sidecar {
                format_version: 1,
                dtype: "f64le".into(),
                layout: "row-major".into(),
                n_params: cols,
                columns: (0..cols)
                    .map(|i| Column {
                        name: format!("p{i}"),
                        unit: "m".into(),
                    })
                    .collect(),
                files: vec!["a".into(), "b".into()],
                n_rows: vec![rows, rows],
                thinning: 10,
                iterations: rows as u64 * 10,
            },
            data,
        }
    }

    #[test]
    fn burn_in_and_thinning() {
        let s = store(2, 100);
        assert_eq!(kept_rows(&s, 0.25).unwrap(), 25..100);
        assert!(kept_rows(&s, 1.0).is_err());
        assert_eq!(posterior_samples(&s, 25..100, None).len(), 150);
        assert_eq!(posterior_samples(&s, 25..100, Some(50)).len(), 50);
    }

    #[test]
    fn summary_columns() {
        let s = store(3, 400);
        let reports = parameter_reports(&s, 0..400);
        assert_eq!(reports.len(), 3);
        for r in &reports {
            assert_eq!(r.iact_iterations.len(), 2);
            assert!(r.gelman_rubin.is_some());
        }
        let row = summary_row(&reports, None, None, 4000, 2.0).unwrap();
        assert!(row.tau_min <= row.tau_med && row.tau_med <= row.tau_max);
        assert!((row.cpu_hours_per_tau - 2.0 * row.tau_max / 4000.0).abs() < 1e-15);
    }
}
