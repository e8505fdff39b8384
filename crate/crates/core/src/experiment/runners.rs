//! One function per subcommand. Each returns the rows of its CSV and the
//! checks that go into the summary.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::output::{cell, Report};
use crate::band::{lemma_estimate_check, lipschitz_estimates, ProbeMethod};
use crate::error::{Error, Result};
use crate::field::{covariance_check_pairs, DisorderSpec, FieldBundle, MemoryBudget};
use crate::free_energy::{oracle_agreement, quenched_free_energy, superadditivity_defect, Budgets, SingleSpec};
use crate::interpolation::{
    derivative_fd_check, endpoint_check, phi_curve, phi_prime_ibp, replica_scan, u_plus_audit, PairedComparison,
};
use crate::mixture::Mixture;
use crate::rng::{self, derive_seed};
use crate::sphere::{band_fraction_limit, band_measure, default_band, poincare_check, uniform_sphere};
use crate::stats::{combined_stderr, MeanEstimate};

fn budgets(config: &ExperimentConfig, memory: MemoryBudget) -> Budgets {
    let mut b = Budgets::new(config.n_disorder, config.n_inner);
    b.memory = memory;
    b
}

fn spec(config: &ExperimentConfig, n: usize, m: usize, memory: MemoryBudget) -> Result<DisorderSpec> {
    let mut s = DisorderSpec::new(n, m, config.mixture()?, Some(config.c));
    s.budget = memory;
    Ok(s)
}

pub(super) fn covariance(config: &ExperimentConfig, seed: u64) -> Result<Report> {
    let sec = &config.covariance_check;
    let mix = config.mixture()?;
    let mut report = Report::new(&["n", "pair", "overlap", "empirical", "theory", "stderr", "z"]);
    for &n in &config.n {
        let mut s = rng::child(seed, "pairs", n as u64);
        let radius = (n as f64).sqrt();
        let mut pairs = Vec::with_capacity(sec.n_pairs);
        // the first pair is (σ, σ), so theory is N ξ(1)
        let first = uniform_sphere(n, radius, &mut s)?.into_coords();
        pairs.push((first.clone(), first));
        while pairs.len() < sec.n_pairs {
            pairs.push((
                uniform_sphere(n, radius, &mut s)?.into_coords(),
                uniform_sphere(n, radius, &mut s)?.into_coords(),
            ));
        }
        let checks = covariance_check_pairs(n, &mix, &pairs, sec.n_draws, derive_seed(seed, "draws", n as u64))?;
        let mut worst: f64 = 0.0;
        for (i, (c, (a, b))) in checks.iter().zip(&pairs).enumerate() {
            let r = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n as f64;
            worst = worst.max(c.z_score().abs());
            report.row(vec![
                cell(n),
                cell(i),
                cell(r),
                cell(c.empirical),
                cell(c.theory),
                cell(c.stderr),
                cell(c.z_score()),
            ]);
        }
        report.check(
            format!("covariance N={n}"),
            worst <= sec.max_z,
            format!("max |z| = {worst:.3} over {} pairs", pairs.len()),
        );
    }
    Ok(report)
}

pub(super) fn coarea(config: &ExperimentConfig) -> Result<Report> {
    let sec = &config.coarea_check;
    let a_values = if sec.a_values.is_empty() {
        vec![config.a]
    } else {
        sec.a_values.clone()
    };
    let mut report = Report::new(&[
        "n",
        "m",
        "a",
        "lo",
        "hi",
        "exact",
        "coarea_numeric",
        "relative_gap",
        "limit",
    ]);
    let mut worst: f64 = 0.0;
    for &n in &config.n {
        for &m in &config.m {
            for &a in &a_values {
                let (lo, hi) = default_band(n, m, a);
                let b = band_measure(n, m, lo, hi)?;
                worst = worst.max(b.relative_gap());
                report.row(vec![
                    cell(n),
                    cell(m),
                    cell(a),
                    cell(lo),
                    cell(hi),
                    cell(b.exact),
                    cell(b.coarea_numeric),
                    cell(b.relative_gap()),
                    cell(band_fraction_limit(m, a)),
                ]);
            }
        }
    }
    report.check(
        "band measure",
        worst <= sec.tolerance,
        format!("max relative gap {worst:.3e}"),
    );
    Ok(report)
}

pub(super) fn poincare(config: &ExperimentConfig, seed: u64) -> Result<Report> {
    let sec = &config.poincare_check;
    let mut report = Report::new(&["n", "m", "k", "ks_statistic", "threshold", "passes"]);
    for &n in &sec.n_values {
        let p = poincare_check(n, sec.m, sec.k, derive_seed(seed, "n", n as u64))?;
        report.row(vec![
            cell(n),
            cell(sec.m),
            cell(sec.k),
            cell(p.ks_statistic),
            cell(p.threshold),
            cell(p.passes()),
        ]);
        let detail = format!("KS {:.5} vs {:.5}", p.ks_statistic, p.threshold);
        // large N must look Gaussian; N <= 2 must not
        if n >= 1000 {
            report.check(format!("gaussian at N={n}"), p.passes(), detail);
        } else if n <= 2 {
            report.check(format!("non-gaussian at N={n}"), !p.passes(), detail);
        }
    }
    Ok(report)
}

pub(super) fn free_energy_sweep(config: &ExperimentConfig, seed: u64, memory: MemoryBudget) -> Result<Report> {
    let sec = &config.free_energy_sweep;
    let mix = config.mixture()?;
    let c = sec.perturbed.then_some(config.c);
    let b = budgets(config, memory);
    let mut report = Report::new(&[
        "kind",
        "n",
        "value",
        "stderr",
        "jackknife_bias",
        "method",
        "n_disorder",
        "n_inner",
        "z",
    ]);
    for &n in &config.n {
        let run = quenched_free_energy(
            &SingleSpec::new(n, mix.clone(), c),
            &b,
            derive_seed(seed, "size", n as u64),
        )?;
        let e = run.estimate;
        report.row(vec![
            "quenched".into(),
            cell(n),
            cell(e.value),
            cell(e.stderr),
            cell(e.jackknife_bias),
            e.method.as_str().into(),
            cell(e.n_disorder),
            cell(e.n_inner),
            String::new(),
        ]);
        if n <= 3 {
            let o = oracle_agreement(
                n,
                &mix,
                c,
                sec.oracle_draws,
                sec.oracle_n_inner,
                derive_seed(seed, "oracle", n as u64),
            )?;
            let bias = o.draws.iter().map(|d| d.jackknife_bias).sum::<f64>() / o.draws.len() as f64;
            report.row(vec![
                "mc_minus_exact".into(),
                cell(n),
                cell(o.mean_diff),
                cell(o.stderr),
                cell(bias),
                "plain_mc".into(),
                cell(o.draws.len()),
                cell(sec.oracle_n_inner),
                cell(o.z_score()),
            ]);
            report.check(
                format!("oracle N={n}"),
                o.z_score().abs() <= sec.max_z,
                format!("mean mc - exact = {:.3e} +- {:.3e}", o.mean_diff, o.stderr),
            );
        }
    }
    Ok(report)
}

pub(super) fn superadd(config: &ExperimentConfig, seed: u64, memory: MemoryBudget) -> Result<Report> {
    let sec = &config.superadd_table;
    let mix = config.mixture()?;
    let b = budgets(config, memory);
    let mut report = Report::new(&[
        "n",
        "m",
        "defect",
        "stderr",
        "threshold",
        "joint_total",
        "first_total",
        "second_total",
        "pass",
    ]);
    for (n, m) in config.pairs() {
        let d = superadditivity_defect(n, m, &mix, Some(config.c), &b, seed)?;
        let threshold = -(sec.sigmas * d.stderr + sec.slack_per_m * m as f64);
        let pass = d.defect >= threshold;
        report.row(vec![
            cell(n),
            cell(m),
            cell(d.defect),
            cell(d.stderr),
            cell(threshold),
            cell(d.joint.total),
            cell(d.first.total),
            cell(d.second.total),
            cell(pass),
        ]);
        report.check(
            format!("defect N={n} M={m}"),
            pass,
            format!("{:.4} +- {:.4} vs {threshold:.4}", d.defect, d.stderr),
        );
    }
    Ok(report)
}

fn paired_row(n: usize, m: usize, label: &str, c: &PairedComparison) -> Vec<String> {
    vec![
        cell(n),
        cell(m),
        label.into(),
        cell(c.left.mean),
        cell(c.left.stderr),
        cell(c.right.mean),
        cell(c.right.stderr),
        cell(c.difference.mean),
        cell(c.difference.stderr),
        cell(c.combined_z()),
    ]
}

const PAIRED_COLUMNS: [&str; 10] = [
    "n",
    "m",
    "endpoint",
    "phi",
    "phi_stderr",
    "reference",
    "reference_stderr",
    "difference",
    "paired_stderr",
    "combined_z",
];

pub(super) fn endpoints(config: &ExperimentConfig, seed: u64, memory: MemoryBudget) -> Result<Report> {
    let sec = &config.interp_endpoints;
    let b = budgets(config, memory);
    let mut report = Report::new(&PAIRED_COLUMNS);
    for (i, (n, m)) in config.pairs().into_iter().enumerate() {
        let c = endpoint_check(&spec(config, n, m, memory)?, &b, derive_seed(seed, "cell", i as u64))?;
        for (label, pc) in [("t=0", &c.at_zero), ("t=1", &c.at_one)] {
            report.row(paired_row(n, m, label, pc));
            report.check(
                format!("{label} N={n} M={m}"),
                pc.combined_z() <= sec.sigmas,
                format!(
                    "difference {:.4} at {:.2} combined sigma",
                    pc.difference.mean,
                    pc.combined_z()
                ),
            );
        }
    }
    Ok(report)
}

pub(super) fn derivative(config: &ExperimentConfig, seed: u64) -> Result<Report> {
    let sec = &config.interp_derivative;
    let mut report = Report::new(&[
        "n",
        "m",
        "t",
        "method",
        "ibp",
        "ibp_stderr",
        "fd",
        "fd_stderr",
        "combined_z",
    ]);
    let mix = config.mixture()?;
    for (i, (n, m)) in config.pairs().into_iter().enumerate() {
        let sp = DisorderSpec::new(n, m, mix.clone(), Some(config.c));
        let cell_seed = derive_seed(seed, "cell", i as u64);
        for &t in &sec.ts {
            if t - sec.h < 0.0 || t + sec.h > 1.0 {
                return Err(Error::Config {
                    key: "interp_derivative.ts".into(),
                    reason: format!("t = {t} with step {} leaves [0, 1]", sec.h),
                });
            }
            let (method, l, r) = if (n, m) == (1, 1) {
                let c = derivative_fd_check(&sp, t, sec.h, config.n_disorder, cell_seed)?;
                ("exact", c.left, c.right)
            } else {
                let ibp = phi_prime_ibp(&sp, t, &config.mcmc(), config.n_disorder, cell_seed)?;
                let phi = phi_curve(
                    &sp,
                    &[t - sec.h, t + sec.h],
                    &budgets(config, MemoryBudget::default()),
                    cell_seed,
                )?;
                let fd = (phi[1].phi - phi[0].phi) / (2.0 * sec.h);
                let fd_se = combined_stderr(&[phi[0].stderr, phi[1].stderr]) / (2.0 * sec.h);
                let as_est = |mean, stderr| MeanEstimate {
                    mean,
                    stderr,
                    n: config.n_disorder,
                };
                ("monte_carlo", as_est(ibp.value, ibp.stderr), as_est(fd, fd_se))
            };
            let z = (l.mean - r.mean).abs() / l.stderr.hypot(r.stderr);
            report.row(vec![
                cell(n),
                cell(m),
                cell(t),
                method.into(),
                cell(l.mean),
                cell(l.stderr),
                cell(r.mean),
                cell(r.stderr),
                cell(z),
            ]);
            report.check(
                format!("derivative N={n} M={m} t={t}"),
                z <= sec.sigmas,
                format!("{method}: {z:.2} combined sigma"),
            );
        }
    }
    Ok(report)
}

pub(super) fn positivity(config: &ExperimentConfig, seed: u64, memory: MemoryBudget) -> Result<Report> {
    let sec = &config.positivity_scan;
    let mut report = Report::new(&[
        "n",
        "m",
        "t",
        "seed",
        "phi",
        "phi_prime",
        "mean_u",
        "mass_neg",
        "mass_neg_stderr",
        "mass_pos",
        "non_ergodic",
    ]);
    let b = budgets(config, memory);
    for (i, (n, m)) in config.pairs().into_iter().enumerate() {
        let sp = spec(config, n, m, memory)?;
        let cell_seed = derive_seed(seed, "cell", i as u64);
        let phis = phi_curve(&sp, &sec.ts, &b, cell_seed)?;
        for (p, &t) in phis.iter().zip(&sec.ts) {
            let stats = replica_scan(&sp, t, config.eps, &config.mcmc(), config.n_disorder, cell_seed)?;
            let col = |f: fn(&crate::interpolation::ReplicaStats) -> f64| {
                MeanEstimate::from_samples(&stats.iter().map(f).collect::<Vec<_>>())
            };
            let u = col(|s| s.mean_u);
            let neg = col(|s| s.mass_neg);
            let pos = col(|s| s.mass_pos);
            report.row(vec![
                cell(n),
                cell(m),
                cell(t),
                cell(cell_seed),
                cell(p.phi),
                cell(-0.5 * u.mean),
                cell(u.mean),
                cell(neg.mean),
                cell(neg.stderr),
                cell(pos.mean),
                cell(stats.iter().filter(|s| s.non_ergodic).count()),
            ]);
        }
    }
    let mixtures: Vec<Mixture> = if sec.audit_mixtures.is_empty() {
        vec![config.mixture()?]
    } else {
        sec.audit_mixtures
            .iter()
            .map(|g| Mixture::new(g))
            .collect::<Result<_>>()?
    };
    for (k, mix) in mixtures.iter().enumerate() {
        let (n, m) = config.pairs()[0];
        let a = u_plus_audit(n, m, mix, sec.random_pairs, derive_seed(seed, "u_plus", k as u64))?;
        report.check(
            format!("U+ <= 0 for mixture {:?}", mix.gammas()),
            a.violations() == 0,
            format!(
                "{} grid points, {} random pairs, {} violations, max {:.3e}",
                a.grid_points,
                a.random_pairs,
                a.violations(),
                a.max_u_plus
            ),
        );
    }
    Ok(report)
}

pub(super) fn lipschitz(config: &ExperimentConfig, seed: u64) -> Result<Report> {
    let mix = config.mixture()?;
    let mut report = Report::new(&["n_total", "draw", "l1", "l2", "l1_normalized"]);
    for &total in &config.lipschitz_audit.n_total {
        let (n, m) = (total / 2, total - total / 2);
        let rows: Vec<(f64, f64, f64)> = (0..config.n_disorder)
            .into_par_iter()
            .map(|d| {
                let bs = derive_seed(seed, "bundle", d as u64);
                let bundle = FieldBundle::sample(&DisorderSpec::new(n, m, mix.clone(), Some(config.c)), bs)?;
                let l = lipschitz_estimates(
                    &bundle,
                    (total as f64).sqrt(),
                    config.n_probes,
                    ProbeMethod::GradientAscentPolish,
                    bs,
                )?;
                Ok((l.l1, l.l2, l.l1_normalized))
            })
            .collect::<Result<_>>()?;
        for (d, r) in rows.iter().enumerate() {
            report.row(vec![cell(total), cell(d), cell(r.0), cell(r.1), cell(r.2)]);
        }
        let e = MeanEstimate::from_samples(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
        report.check(
            format!("concentration N+M={total}"),
            e.std_dev() < e.mean / 3.0,
            format!("l1/sqrt(N+M): mean {:.4}, sd {:.4}", e.mean, e.std_dev()),
        );
    }
    Ok(report)
}

pub(super) fn lemma(config: &ExperimentConfig, seed: u64) -> Result<Report> {
    let sec = &config.lemma_estimate_audit;
    let mix = config.mixture()?;
    let mut report = Report::new(&[
        "n",
        "m",
        "r",
        "side",
        "sampled",
        "checked",
        "violations",
        "l1",
        "l2",
        "reprobe_rounds",
        "min_slack",
    ]);
    let mut cell_index = 0u64;
    for (n, m) in config.pairs() {
        for &off in &sec.offsets {
            let r = (m as f64).sqrt() + off;
            let bs = derive_seed(seed, "bundle", cell_index);
            cell_index += 1;
            let bundle = FieldBundle::sample(&DisorderSpec::new(n, m, mix.clone(), Some(config.c)), bs)?;
            let a = lemma_estimate_check(&bundle, r, sec.n_pairs, config.n_probes, bs)?;
            let side = match a.side {
                crate::band::Side::Plus => "plus",
                crate::band::Side::Minus => "minus",
            };
            report.row(vec![
                cell(n),
                cell(m),
                cell(r),
                side.into(),
                cell(a.sampled),
                cell(a.checked),
                cell(a.violations),
                cell(a.lipschitz.l1),
                cell(a.lipschitz.l2),
                cell(a.reprobe_rounds),
                cell(a.min_slack),
            ]);
            report.check(
                format!("taylor chain N={n} M={m} r={r:.4}"),
                a.violations == 0,
                format!("{} violations over {} pairs", a.violations, a.checked),
            );
        }
    }
    Ok(report)
}
