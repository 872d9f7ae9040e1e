//! One-step drift and diffusion against the limiting coefficients, pooled
//! over stationary probe points, with the residual trend across truncations.

use hilbert_rwm_core::diagnostics::{
    estimate_one_step_diffusion, estimate_one_step_drift, DriftEstimator,
};
use hilbert_rwm_core::stream::{derive_rng, StreamRole};

use crate::error::Result;
use crate::output::{fmt_f64, write_csv, RunDir};
use crate::runner::run_indexed;

use super::{build_sampler, init_kind_label, probes_for, Ctx, ExperimentResult};

pub(super) fn run(ctx: &Ctx, stage: &RunDir) -> Result<ExperimentResult> {
    let config = ctx.config;
    let ells = config.resolve_ells()?;
    let probes = ctx.cal.drift.probes;
    let inner = config.inner_mc;
    let estimator = if config.potential.quad_coeff(1).is_some() {
        DriftEstimator::Conditional
    } else {
        DriftEstimator::PairSampling
    };

    let mut drift_rows = Vec::new();
    let mut diff_rows = Vec::new();
    let mut breaches = Vec::new();
    let mut summary = Vec::new();
    let mut streams = Vec::new();

    for &ell in &ells {
        let mut residual_by_n = Vec::new();
        for &n in &config.n_grid {
            let sampler = build_sampler(config, ell, n)?;
            let cell = ((n as u64) << 32) | (ell.to_bits() >> 40);

            // per-probe contributions, pooled afterwards
            struct ProbeOut {
                resid_sq: f64,
                noise_sq: f64,
                theory_sq: f64,
            }
            let per_probe: Vec<Result<ProbeOut>> =
                run_indexed(probes, ctx.threads, |p| {
                    let stream = cell ^ p as u64;
                    let mut probe_rng =
                        derive_rng(config.master_seed, stream, StreamRole::Probe);
                    let (state, _) = sampler.stationary_init(&mut probe_rng, None)?;
                    let mut inner_rng =
                        derive_rng(config.master_seed, stream, StreamRole::InnerMc);
                    let rep = estimate_one_step_drift(
                        &state.x,
                        &sampler,
                        inner,
                        estimator,
                        &mut inner_rng,
                    )?;
                    let raw = rep.residual_norm_s.powi(2);
                    let deb = rep.residual_norm_s_debiased.powi(2);
                    Ok(ProbeOut {
                        resid_sq: deb,
                        noise_sq: raw - deb,
                        theory_sq: rep.theory_norm_s.powi(2),
                    })
                });
            let mut resid_sq = 0.0;
            let mut noise_sq = 0.0;
            let mut theory_sq = 0.0;
            for out in per_probe {
                let out = out?;
                resid_sq += out.resid_sq;
                noise_sq += out.noise_sq;
                theory_sq += out.theory_sq;
            }
            let relative = (resid_sq / theory_sq).sqrt();
            let raw_relative = ((resid_sq + noise_sq) / theory_sq).sqrt();
            residual_by_n.push((n, relative));
            drift_rows.push(vec![
                n.to_string(),
                fmt_f64(ell),
                fmt_f64(relative),
                fmt_f64(raw_relative),
                fmt_f64(theory_sq.sqrt()),
                probes.to_string(),
                inner.to_string(),
                format!("{estimator:?}"),
            ]);
            summary.push(format!(
                "drift N={n:5} ell={ell:<7.4}: relative residual {relative:.4} ({estimator:?})"
            ));
            if relative > ctx.cal.drift.relative_residual_max {
                breaches.push(format!(
                    "drift residual at N={n}, ell={ell}: {relative:.4} > {}",
                    ctx.cal.drift.relative_residual_max
                ));
            }
            streams.push(cell);

            // diffusion probes at an independent stationary point
            let (modes, pairs) = probes_for(n);
            let mut probe_rng =
                derive_rng(config.master_seed, cell ^ 0xD1FF, StreamRole::Probe);
            let (state, _) = sampler.stationary_init(&mut probe_rng, None)?;
            let mut inner_rng =
                derive_rng(config.master_seed, cell ^ 0xD1FF, StreamRole::InnerMc);
            let rep = estimate_one_step_diffusion(
                &state.x,
                &sampler,
                ctx.cal.diffusion.inner_mc,
                &modes,
                &pairs,
                &mut inner_rng,
            )?;
            for probe in rep.diagonal.iter().chain(rep.off_diagonal.iter()) {
                diff_rows.push(vec![
                    n.to_string(),
                    fmt_f64(ell),
                    probe.i.to_string(),
                    probe.j.to_string(),
                    fmt_f64(probe.estimate),
                    fmt_f64(probe.theory),
                    fmt_f64(probe.standard_error),
                ]);
                if probe.i == probe.j {
                    let ratio = probe.estimate / probe.theory;
                    if (ratio - 1.0).abs() > ctx.cal.diffusion.diag_ratio_band {
                        breaches.push(format!(
                            "diffusion diagonal ({},{}) at N={n}: ratio {ratio:.4} outside \
                             1 +- {}",
                            probe.i, probe.j, ctx.cal.diffusion.diag_ratio_band
                        ));
                    }
                } else {
                    let limit =
                        ctx.cal.diffusion.offdiag_se_multiplier * probe.standard_error;
                    if probe.estimate.abs() > limit {
                        breaches.push(format!(
                            "diffusion off-diagonal ({},{}) at N={n}: {:.5} exceeds {:.5}",
                            probe.i, probe.j, probe.estimate, limit
                        ));
                    }
                }
            }
        }

        residual_by_n.sort_by_key(|&(n, _)| n);
        for pair in residual_by_n.windows(2) {
            if pair[1].1 >= pair[0].1 {
                breaches.push(format!(
                    "drift residual not decreasing at ell={ell}: N={} gives {:.4}, \
                     N={} gives {:.4}",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                ));
            }
        }
    }

    drift_rows.sort_by(|a, b| {
        a[0].parse::<usize>()
            .unwrap()
            .cmp(&b[0].parse::<usize>().unwrap())
    });
    write_csv(
        &stage.file("drift_residual_vs_n.csv"),
        &[
            "N",
            "ell",
            "relative_residual",
            "relative_residual_raw",
            "theory_norm_s",
            "probes",
            "inner_mc",
            "estimator",
        ],
        &drift_rows,
    )?;
    write_csv(
        &stage.file("diffusion_probes.csv"),
        &["N", "ell", "i", "j", "estimate", "theory", "se"],
        &diff_rows,
    )?;

    Ok(ExperimentResult {
        breaches,
        summary,
        resolved_ell: ells,
        replica_streams: streams,
        init_kind: init_kind_label(config),
    })
}
