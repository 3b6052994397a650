use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::{first_order_residual, reference_parameters, solve_gda, GanConfig, GanSaaInstance, GdaConfig};
use crate::canonical::format_float;
use crate::error::{Error, Result};
use crate::problem::Point;
use crate::seeds::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceConfig {
    /// Shape, boxes and sampling law; `n_samples` is ignored.
    pub base: GanConfig,
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub trials: usize,
    pub gda: GdaConfig,
}

impl ConvergenceConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            base: GanConfig::desk(seed, 256),
            n_list: vec![16, 64, 256, 1024],
            n_ref: 16384,
            trials: 20,
            gda: GdaConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Median over converged trials of the reference residual.
    pub median_residual: f64,
    /// Nearest-rank 90th percentile of the same.
    pub p90_residual: f64,
    pub nonconverged: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    match k {
        0 => f64::NAN,
        _ if k % 2 == 1 => sorted[k / 2],
        _ => 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]),
    }
}

fn p90(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (0.9 * sorted.len() as f64).ceil() as usize;
    sorted[rank.max(1) - 1]
}

/// For each `N`, solves `trials` independently sampled SAA problems with
/// projected GDA from a common start and measures the first-order residual of
/// each solution against a large-`N_ref` reference instance.
pub fn convergence_experiment(config: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    if config.n_list.is_empty() || config.n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("N list must be nonempty and increasing".into()));
    }
    if config.trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let shape = config.base.shape()?;
    let seed = config.base.seed;
    let x_start = reference_parameters(&shape, derive_seed(&[seed, 0]), config.base.x_box);
    let start = Point::new(x_start.clone(), vec![0.0; shape.m()]);
    let ref_cfg = GanConfig { n_samples: config.n_ref, ..config.base.clone() };
    let reference = GanSaaInstance::with_reference(&ref_cfg, x_start.clone(), derive_seed(&[seed, 2, config.n_ref as u64]))?;

    config
        .n_list
        .iter()
        .map(|&n| {
            let outcomes: Vec<Result<Option<f64>>> = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let inst = if n == config.n_ref {
                        reference.clone()
                    } else {
                        let cfg = GanConfig { n_samples: n, ..config.base.clone() };
                        GanSaaInstance::with_reference(&cfg, x_start.clone(), derive_seed(&[seed, 3, n as u64, trial as u64]))?
                    };
                    let out = solve_gda(&inst, &start, &config.gda);
                    Ok(out.converged.then(|| first_order_residual(&reference, &out.point)))
                })
                .collect();
            let mut residuals = Vec::new();
            let mut nonconverged = 0;
            for o in outcomes {
                match o? {
                    Some(r) => residuals.push(r),
                    None => nonconverged += 1,
                }
            }
            residuals.sort_by(f64::total_cmp);
            Ok(ConvergenceRow {
                n,
                median_residual: median(&residuals),
                p90_residual: p90(&residuals),
                nonconverged,
            })
        })
        .collect()
}

/// CSV with header `N,median_residual,p90_residual,nonconverged`.
pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut out: W) -> Result<()> {
    writeln!(out, "N,median_residual,p90_residual,nonconverged")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.n, format_float(r.median_residual), format_float(r.p90_residual), r.nonconverged)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistics() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(p90(&v), 18.0);
        assert_eq!(p90(&[5.0]), 5.0);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn csv_format() {
        let rows = [ConvergenceRow { n: 16, median_residual: 0.5, p90_residual: 1.0, nonconverged: 0 }];
        let mut buf = Vec::new();
        write_convergence_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "N,median_residual,p90_residual,nonconverged\n16,5.000000000000e-01,1.000000000000e+00,0\n"
        );
    }

    #[test]
    fn rejects_bad_ladders() {
        let mut c = ConvergenceConfig::desk(1);
        c.n_list = vec![64, 16];
        assert!(convergence_experiment(&c).is_err());
    }
}
