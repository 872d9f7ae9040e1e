//! Gaussianity of the acceptance exponent in stationarity: moments against
//! `N(-ell^2, 2 ell^2)`, the KS trend across truncations, and the
//! density-bound inequality between KS and Wasserstein distances.

use hilbert_rwm_core::diagnostics::{ks_wass_bound_check, q_moment_test};
use hilbert_rwm_core::kernel::QRecorder;
use hilbert_rwm_core::scalar::Real;
use hilbert_rwm_core::stream::{derive_rng, StreamRole};

use crate::error::Result;
use crate::output::{fmt_f64, write_csv, RunDir};
use crate::runner::run_indexed;

use super::{build_sampler, init_kind_label, Ctx, ExperimentResult};

pub(super) fn run(ctx: &Ctx, stage: &RunDir) -> Result<ExperimentResult> {
    let config = ctx.config;
    let ells = config.resolve_ells()?;
    let samples = config.inner_mc;

    let mut cells = Vec::new();
    for &ell in &ells {
        for &n in &config.n_grid {
            cells.push((n, ell));
        }
    }

    struct CellOut {
        mean: f64,
        variance: f64,
        ks: f64,
        bound_ks: f64,
        bound_w1: f64,
        bound_ok: bool,
    }
    let outs: Vec<Result<CellOut>> = run_indexed(cells.len(), ctx.threads, |idx| {
        let (n, ell) = cells[idx];
        let sampler = build_sampler(config, ell, n)?;
        let mut init_rng =
            derive_rng(config.master_seed, idx as u64, StreamRole::ChainInit);
        let (init, _) = sampler.stationary_init(&mut init_rng, None)?;
        let mut chain_rng = derive_rng(config.master_seed, idx as u64, StreamRole::Chain);
        let mut recorder = QRecorder::default();
        sampler.run(init, samples, &mut chain_rng, &mut recorder);
        let report = q_moment_test(&recorder.qs, ell)?;

        // reference draws from the limit law for the two-sample inequality
        let mut ref_rng =
            derive_rng(config.master_seed, idx as u64, StreamRole::Diffusion);
        let sd = (2.0 * ell * ell).sqrt();
        let reference: Vec<f64> = (0..recorder.qs.len())
            .map(|_| -ell * ell + sd * f64::standard_normal(&mut ref_rng))
            .collect();
        let density_bound = 1.0 / (4.0 * core::f64::consts::PI * ell * ell).sqrt();
        let dist = ks_wass_bound_check(&recorder.qs, &reference, density_bound)?;

        Ok(CellOut {
            mean: report.mean,
            variance: report.variance,
            ks: report.ks_to_limit,
            bound_ks: dist.ks,
            bound_w1: dist.wasserstein1,
            bound_ok: dist.bound_ok,
        })
    });

    let mut rows = Vec::new();
    let mut breaches = Vec::new();
    let mut summary = Vec::new();
    let mut ks_by_cell = Vec::new();
    for (idx, out) in outs.into_iter().enumerate() {
        let out = out?;
        let (n, ell) = cells[idx];
        let ell2 = ell * ell;
        rows.push(vec![
            n.to_string(),
            fmt_f64(ell),
            samples.to_string(),
            fmt_f64(out.mean),
            fmt_f64(-ell2),
            fmt_f64(out.variance),
            fmt_f64(2.0 * ell2),
            fmt_f64(out.ks),
            fmt_f64(out.bound_ks),
            fmt_f64(out.bound_w1),
            out.bound_ok.to_string(),
        ]);
        summary.push(format!(
            "q N={n:5} ell={ell:<7.4}: mean {:+.4} (want {:+.4}), var {:.4} (want {:.4}), \
             KS {:.5}",
            out.mean,
            -ell2,
            out.variance,
            2.0 * ell2,
            out.ks
        ));
        if (out.mean + ell2).abs() > ctx.cal.q_distribution.mean_band_frac * ell2 {
            breaches.push(format!(
                "q mean at N={n}, ell={ell}: {:.4} outside {:+.4} +- {:.4}",
                out.mean,
                -ell2,
                ctx.cal.q_distribution.mean_band_frac * ell2
            ));
        }
        if (out.variance - 2.0 * ell2).abs()
            > ctx.cal.q_distribution.variance_band_frac * 2.0 * ell2
        {
            breaches.push(format!(
                "q variance at N={n}, ell={ell}: {:.4} outside {:.4} +- {:.4}",
                out.variance,
                2.0 * ell2,
                ctx.cal.q_distribution.variance_band_frac * 2.0 * ell2
            ));
        }
        if !out.bound_ok {
            breaches.push(format!(
                "KS/Wasserstein density-bound inequality failed at N={n}, ell={ell} \
                 (ks {:.5}, w1 {:.5})",
                out.bound_ks, out.bound_w1
            ));
        }
        ks_by_cell.push((n, ell, out.ks));
    }

    for &ell in &ells {
        let mut trend: Vec<(usize, f64)> = ks_by_cell
            .iter()
            .filter(|(_, e, _)| *e == ell)
            .map(|&(n, _, ks)| (n, ks))
            .collect();
        trend.sort_by_key(|&(n, _)| n);
        for pair in trend.windows(2) {
            if pair[1].1 >= pair[0].1 {
                breaches.push(format!(
                    "q KS not decreasing at ell={ell}: N={} gives {:.5}, N={} gives {:.5}",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                ));
            }
        }
    }

    write_csv(
        &stage.file("q_distribution.csv"),
        &[
            "N",
            "ell",
            "n_samples",
            "mean",
            "mean_theory",
            "variance",
            "variance_theory",
            "ks",
            "two_sample_ks",
            "wasserstein1",
            "bound_ok",
        ],
        &rows,
    )?;

    Ok(ExperimentResult {
        breaches,
        summary,
        resolved_ell: ells,
        replica_streams: (0..cells.len() as u64).collect(),
        init_kind: init_kind_label(config),
    })
}
