//! Experiment orchestration: one plant integration shared by every observer
//! in lockstep, then certificates, metrics, bound checks, comparisons and
//! artifact emission.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ptobs_core::certify::{check_trajectory_bounds, Certificate};
use ptobs_core::metrics::{compare, compute_metrics, MetricsWindows, RunMetrics};
use ptobs_core::sim::{simulate_multi, SimError};
use ptobs_core::timescale::TimeScale;

use crate::output::{
    fnum, fopt, fvec, plot_script, write_csv, write_manifest, CsvArtifact, Report,
    RunManifest, MANIFEST_NAME,
};
use crate::scenario::{LoadedScenario, ObserverCfg};

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub report_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
    pub plot_path: Option<PathBuf>,
    /// The integration hit a non-finite state; artifacts describe the
    /// partial run and the process should exit non-zero.
    pub blew_up: bool,
}

/// Execute a loaded scenario into `out_dir`. With `check_only` the
/// simulation is skipped: the report carries the configuration echo and the
/// gain certificates only.
pub fn execute(ls: &LoadedScenario, out_dir: &Path, check_only: bool) -> Result<RunOutcome> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("create run directory {}", out_dir.display()))?;

    let scn = &ls.scenario;
    let mut report = Report::new();
    report.echo_config(scn);

    // design certificates for the prescribed-time family
    let want_certs = scn.certify.enabled || check_only;
    let mut certificates: Vec<Option<Certificate<f64>>> = Vec::new();
    for (cfg, (_, obs)) in scn.observers.iter().zip(&ls.observers) {
        let cert = match (cfg, obs.timescale()) {
            (
                ObserverCfg::Pt { gains, .. } | ObserverCfg::ExtendedPt { gains, .. },
                Some(ts),
            ) if want_certs => Some(
                Certificate::new(gains, *ts, scn.certify.gamma_bar_f, scn.certify.sigma_bar)
                    .context("certificate construction")?,
            ),
            _ => None,
        };
        certificates.push(cert);
    }

    for ((label, _), cert) in ls.observers.iter().zip(&certificates) {
        if let Some(cert) = cert {
            certificate_block(&mut report, label, cert);
        }
    }

    let manifest_base = RunManifest {
        scenario: scn.clone(),
        check_only,
        blowup_t_last_good: None,
        csv: Vec::new(),
        report: scn.output.report_path.clone(),
        plot_script: None,
    };

    if check_only {
        report.block("artifacts");
        report.kv("report", &scn.output.report_path);
        report.kv("manifest", MANIFEST_NAME);
        let report_path = out_dir.join(&scn.output.report_path);
        write_text(&report_path, &report.finish())?;
        write_manifest(out_dir, &manifest_base)?;
        return Ok(RunOutcome {
            out_dir: out_dir.to_path_buf(),
            report_path,
            csv_paths: Vec::new(),
            plot_path: None,
            blew_up: false,
        });
    }

    // one shared plant pass, every observer fed the same measurements
    let observers: Vec<_> = ls.observers.iter().map(|(_, o)| o.clone()).collect();
    let (trajs, blowup) =
        match simulate_multi(&ls.system, &observers, &ls.x0, &ls.xhat0, &ls.sim) {
            Ok(t) => (t, None),
            Err(SimError::NonFinite { t_last_good, partial }) => (partial, Some(t_last_good)),
            Err(e) => bail!("simulation failed: {e}"),
        };

    if let Some(t) = blowup {
        report.block("blowup");
        report.kv("t_last_good", fnum(t));
        report.kv(
            "note",
            "integration reached a non-finite state; artifacts cover the partial run",
        );
    }

    // CSV per observer
    let mut csv_artifacts = Vec::new();
    let mut csv_paths = Vec::new();
    for ((label, _), traj) in ls.observers.iter().zip(&trajs) {
        let file = format!("{}_{label}.csv", scn.output.csv_path);
        let path = out_dir.join(&file);
        write_csv(&path, traj)?;
        csv_artifacts.push(CsvArtifact {
            label: label.clone(),
            path: file,
            plant_dim: traj.plant_dim(),
            observer_dim: traj.observer_dim(),
            has_disturbance: traj.d_true().is_some(),
        });
        csv_paths.push(path);
    }

    // metrics; high-gain runs are probed at the first prescribed time for
    // comparability
    let fallback_ts: Option<&TimeScale<f64>> =
        ls.observers.iter().find_map(|(_, o)| o.timescale());
    let windows = MetricsWindows::default();
    let mut metrics: Vec<Option<RunMetrics<f64>>> = Vec::new();
    for ((label, obs), traj) in ls.observers.iter().zip(&trajs) {
        let ts = obs.timescale().or(fallback_ts);
        report.block(&format!("metrics {label}"));
        match compute_metrics(traj, ts, &windows) {
            Ok(m) => {
                metrics_block(&mut report, &m);
                metrics.push(Some(m));
            }
            Err(e) => {
                report.kv("error", e);
                metrics.push(None);
            }
        }
    }

    if ls.observers.len() >= 2 {
        let first_label = &ls.observers[0].0;
        for j in 1..ls.observers.len() {
            let label = &ls.observers[j].0;
            report.block(&format!("comparison {first_label} vs {label}"));
            match (&metrics[0], &metrics[j]) {
                (Some(a), Some(b)) => match compare(a, b) {
                    Ok(rep) => {
                        report.kv("peak_ratio", fnum(rep.peak_ratio));
                        report.kv("post_t_ratio", fopt(rep.post_t_ratio));
                        report.kv(
                            &format!("{first_label}_peak_smaller"),
                            rep.first_peak_smaller,
                        );
                        report.kv(
                            &format!("{first_label}_post_t_smaller"),
                            rep.first_post_t_smaller,
                        );
                    }
                    Err(e) => report.kv("error", e),
                },
                _ => report.kv("error", "metrics unavailable for one of the runs"),
            }
        }
    }

    // proof-bound checks against each certificate
    for (((label, _), cert), traj) in
        ls.observers.iter().zip(&certificates).zip(&trajs)
    {
        let Some(cert) = cert else { continue };
        report.block(&format!("bounds {label}"));
        if !cert.is_hurwitz() {
            report.kv("skipped", "design is not Hurwitz; no Lyapunov envelope exists");
            continue;
        }
        match check_trajectory_bounds(traj, cert) {
            Ok(b) => bounds_block(&mut report, &b),
            Err(e) => report.kv("error", e),
        }
    }

    report.block("artifacts");
    for a in &csv_artifacts {
        report.kv(&format!("csv.{}", a.label), &a.path);
    }
    report.kv("report", &scn.output.report_path);
    report.kv("plot_script", &scn.output.plot_script);
    report.kv("manifest", MANIFEST_NAME);

    let report_path = out_dir.join(&scn.output.report_path);
    write_text(&report_path, &report.finish())?;

    let plot_path = out_dir.join(&scn.output.plot_script);
    write_text(&plot_path, &plot_script(&scn.name, &csv_artifacts))?;

    let manifest = RunManifest {
        blowup_t_last_good: blowup,
        csv: csv_artifacts,
        plot_script: Some(scn.output.plot_script.clone()),
        ..manifest_base
    };
    write_manifest(out_dir, &manifest)?;

    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        report_path,
        csv_paths,
        plot_path: Some(plot_path),
        blew_up: blowup.is_some(),
    })
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("write {}", path.display()))
}

fn certificate_block(report: &mut Report, label: &str, cert: &Certificate<f64>) {
    report.block(&format!("certificate {label}"));
    report.kv("gains", fvec(cert.gains()));
    let eigs = cert
        .eigenvalues()
        .iter()
        .map(|z| format!("({}, {})", fnum(z.re), fnum(z.im)))
        .collect::<Vec<_>>()
        .join("; ");
    report.kv("eigenvalues", eigs);
    report.kv("hurwitz", cert.is_hurwitz());
    let Some(an) = cert.analysis() else {
        report.kv("note", "design is not Hurwitz; no Lyapunov analysis");
        return;
    };
    for i in 0..an.p.n_rows() {
        let row: Vec<f64> = (0..an.p.n_cols()).map(|j| an.p[(i, j)]).collect();
        report.kv(&format!("p.{i}"), fvec(&row));
    }
    report.kv("lambda1", fnum(an.lambda1));
    report.kv("lambda2", fnum(an.lambda2));
    report.kv("lambda_min_p", fnum(an.lambda_min_p));
    report.kv("lambda_max_p", fnum(an.lambda_max_p));
    report.kv("gamma_bar_f", fnum(an.gamma_bar_f));
    report.kv("sigma_bar", fnum(an.sigma_bar));
    report.kv("a", fnum(an.a));
    report.kv("b", fnum(an.b));
    report.kv("t1_star", fnum(an.t1_star));
    if let (Ok(r0), Ok(r1)) = (cert.ball_radius(0.0), cert.ball_radius(an.t1_star)) {
        report.kv("ball_radius.t0", fnum(r0));
        report.kv("ball_radius.t1_star", fnum(r1));
    }
}

fn metrics_block(report: &mut Report, m: &RunMetrics<f64>) {
    report.kv("peak_err", fnum(m.peak_err));
    report.kv("peak_time", fnum(m.peak_time));
    report.kv("err_at_t_minus", fopt(m.err_at_t_minus));
    report.kv("probe_time", fopt(m.probe_time));
    report.kv("post_t_max_err", fopt(m.post_t_max_err));
    report.kv("dhat_track_err", fopt(m.dhat_track_err));
    report.kv("settled", m.settled);
    report.kv("plant_hash", format!("{:016x}", m.plant_hash));
}

fn bounds_block(report: &mut Report, b: &ptobs_core::certify::BoundsReport<f64>) {
    report.kv("t1_star", fnum(b.t1_star));
    report.kv("scaled.pass", b.scaled.pass);
    report.kv("scaled.samples", b.scaled.samples);
    report.kv("scaled.min_margin", fnum(b.scaled.min_margin));
    report.kv("scaled.first_violation", fopt(b.scaled.first_violation));
    report.kv("state.pass", b.state.pass);
    report.kv("state.samples", b.state.samples);
    report.kv("state.min_margin", fnum(b.state.min_margin));
    report.kv("state.first_violation", fopt(b.state.first_violation));
    report.kv("t2_star", fopt(b.ball_entry_time));
}
