//! Artifact emission: per-observer CSV trajectories, the plain-text run
//! report, the gnuplot script and the machine-readable run manifest.
//!
//! Everything written here is deterministic for a fixed resolved scenario —
//! no timestamps, no absolute paths, floats always at 17 significant digits
//! — so identical runs produce byte-identical artifacts.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::Path;

use anyhow::{Context, Result};
use ptobs_core::sim::Trajectory;
use serde::{Deserialize, Serialize};

use crate::scenario::{ObserverCfg, Scenario};

/// 17 significant digits: enough to round-trip an IEEE double exactly.
pub fn fnum(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fvec(v: &[f64]) -> String {
    v.iter().map(|x| fnum(*x)).collect::<Vec<_>>().join(", ")
}

pub fn fopt(v: Option<f64>) -> String {
    v.map(fnum).unwrap_or_else(|| "none".to_owned())
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Write one trajectory. Columns: `t,x1..xn,xhat1..xhatk,err_norm,mu`; for
/// disturbance-estimating observers the last estimate column is the
/// disturbance estimate and is headed `dhat`, with the recorded true
/// disturbance appended as a final `d` column.
pub fn write_csv(path: &Path, traj: &Trajectory<f64>) -> Result<()> {
    let n = traj.plant_dim();
    let k = traj.observer_dim();
    let f = File::create(path).with_context(|| format!("create {}", path.display()))?;
    let mut w = BufWriter::new(f);

    let mut header = String::from("t");
    for i in 1..=n {
        write!(header, ",x{i}").unwrap();
    }
    for j in 1..=k {
        if j == k && k == n + 1 {
            header.push_str(",dhat");
        } else {
            write!(header, ",xhat{j}").unwrap();
        }
    }
    header.push_str(",err_norm,mu");
    if traj.d_true().is_some() {
        header.push_str(",d");
    }
    header.push('\n');
    w.write_all(header.as_bytes())?;

    let mut line = String::new();
    for s in 0..traj.len() {
        line.clear();
        line.push_str(&fnum(traj.times()[s]));
        for v in traj.x_row(s) {
            line.push(',');
            line.push_str(&fnum(*v));
        }
        for v in traj.xhat_row(s) {
            line.push(',');
            line.push_str(&fnum(*v));
        }
        line.push(',');
        line.push_str(&fnum(traj.err_norm()[s]));
        line.push(',');
        line.push_str(&fnum(traj.mu()[s]));
        if let Some(d) = traj.d_true() {
            line.push(',');
            line.push_str(&fnum(d[s]));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// `key = value` lines grouped into `[block]` sections.
#[derive(Debug, Default)]
pub struct Report {
    buf: String,
}

impl Report {
    pub fn new() -> Self {
        Report { buf: String::from("# ptobs run report\n") }
    }

    pub fn block(&mut self, title: &str) {
        write!(self.buf, "\n[{title}]\n").unwrap();
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.buf, "{key} = {value}").unwrap();
    }

    pub fn finish(self) -> String {
        self.buf
    }

    /// Echo the full resolved configuration (auditability: a report plus the
    /// binary is enough to reproduce the run).
    pub fn echo_config(&mut self, scn: &Scenario) {
        self.block("config");
        self.kv("name", &scn.name);
        self.kv("system.n", scn.system.n);
        for (i, f) in scn.system.f.iter().enumerate() {
            self.kv(&format!("system.f{}", i + 1), f);
        }
        self.kv("system.f0", &scn.system.f0);
        self.kv("system.u", &scn.system.u);
        self.kv("system.d", &scn.system.d);
        self.kv("observers.count", scn.observers.len());
        for ob in &scn.observers {
            let pre = format!("observer.{}", ob.label());
            self.kv(&format!("{pre}.variant"), ob.variant_name());
            match ob {
                ObserverCfg::Pt { gains, t_prescribed, m, mu_cap, .. }
                | ObserverCfg::ExtendedPt { gains, t_prescribed, m, mu_cap, .. } => {
                    self.kv(&format!("{pre}.gains"), fvec(gains));
                    self.kv(&format!("{pre}.T"), fnum(*t_prescribed));
                    self.kv(&format!("{pre}.m"), fnum(*m));
                    self.kv(&format!("{pre}.mu_cap"), fnum(*mu_cap));
                }
                ObserverCfg::Hg { alpha, epsilon, hg_gain_power, .. } => {
                    self.kv(&format!("{pre}.alpha"), fvec(alpha));
                    self.kv(&format!("{pre}.epsilon"), fnum(*epsilon));
                    self.kv(&format!("{pre}.hg_gain_power"), hg_gain_power);
                }
            }
        }
        self.kv("initial.x0", fvec(&scn.initial.x0));
        self.kv("initial.xhat0", fvec(&scn.initial.xhat0));
        self.kv("initial.dhat0", fnum(scn.initial.dhat0));
        self.kv("sim.t_end", fnum(scn.sim.t_end));
        self.kv("sim.dt_base", fnum(scn.sim.dt_base));
        self.kv("sim.dt_min", fnum(scn.sim.dt_min));
        self.kv("sim.record_stride", scn.sim.record_stride);
        self.kv("sim.noise_std", fnum(scn.sim.noise_std));
        self.kv("sim.seed", scn.sim.seed);
        self.kv("sim.singularity_shrink", scn.sim.singularity_shrink);
        self.kv("certify.enabled", scn.certify.enabled);
        self.kv("certify.gamma_bar_f", fnum(scn.certify.gamma_bar_f));
        self.kv("certify.sigma_bar", fnum(scn.certify.sigma_bar));
        self.kv("output.csv_path", &scn.output.csv_path);
        self.kv("output.report_path", &scn.output.report_path);
        self.kv("output.plot_script", &scn.output.plot_script);
    }
}

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CsvArtifact {
    pub label: String,
    pub path: String,
    pub plant_dim: usize,
    pub observer_dim: usize,
    pub has_disturbance: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub scenario: Scenario,
    pub check_only: bool,
    /// Last good time before a non-finite state, if the run blew up.
    pub blowup_t_last_good: Option<f64>,
    pub csv: Vec<CsvArtifact>,
    pub report: String,
    pub plot_script: Option<String>,
}

pub const MANIFEST_NAME: &str = "run.json";

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = dir.join(MANIFEST_NAME);
    let mut body = serde_json::to_string_pretty(manifest)?;
    body.push('\n');
    fs::write(&path, body).with_context(|| format!("write {}", path.display()))
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest> {
    let path = dir.join(MANIFEST_NAME);
    let src =
        fs::read_to_string(&path).with_context(|| format!("read {}", path.display()))?;
    serde_json::from_str(&src).with_context(|| format!("parse {}", path.display()))
}

// ---------------------------------------------------------------------------
// gnuplot
// ---------------------------------------------------------------------------

/// Emit a gnuplot script over the run's CSVs: one panel per plant state
/// (true state vs every estimate), one log-scale error-norm panel, and a
/// disturbance panel (true vs estimated) when a run recorded one.
pub fn plot_script(name: &str, csvs: &[CsvArtifact]) -> String {
    let n = csvs.first().map(|c| c.plant_dim).unwrap_or(0);
    let dist_rows = csvs.iter().any(|c| c.has_disturbance);
    let rows = n + 1 + usize::from(dist_rows);
    let mut s = String::new();
    writeln!(s, "# {name}: render with `gnuplot <this file>`").unwrap();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set grid").unwrap();
    writeln!(s, "set key outside right top").unwrap();
    writeln!(s, "set terminal pngcairo size 1100,{}", 320 * rows).unwrap();
    writeln!(s, "set output '{name}.png'").unwrap();
    writeln!(s, "set multiplot layout {rows},1 title '{name}'").unwrap();
    writeln!(s, "set xlabel 't'").unwrap();

    // column layout per file: t=1, x_i=1+i, xhat_j=1+n+j,
    // err=n+k+2, mu=n+k+3, d=n+k+4
    for i in 1..=n {
        writeln!(s).unwrap();
        writeln!(s, "set ylabel 'x{i}'").unwrap();
        let mut parts = Vec::new();
        if let Some(first) = csvs.first() {
            parts.push(format!(
                "'{}' using 1:{} with lines lw 2 title 'x{i}'",
                first.path,
                1 + i
            ));
        }
        for c in csvs {
            parts.push(format!(
                "'{}' using 1:{} with lines title 'x{i} est ({})'",
                c.path,
                1 + c.plant_dim + i,
                c.label
            ));
        }
        writeln!(s, "plot {}", parts.join(", \\\n     ")).unwrap();
    }

    writeln!(s).unwrap();
    writeln!(s, "set ylabel 'estimation error norm'").unwrap();
    writeln!(s, "set logscale y").unwrap();
    let parts: Vec<String> = csvs
        .iter()
        .map(|c| {
            format!(
                "'{}' using 1:{} with lines title 'err ({})'",
                c.path,
                c.plant_dim + c.observer_dim + 2,
                c.label
            )
        })
        .collect();
    writeln!(s, "plot {}", parts.join(", \\\n     ")).unwrap();
    writeln!(s, "unset logscale y").unwrap();

    if dist_rows {
        writeln!(s).unwrap();
        writeln!(s, "set ylabel 'disturbance'").unwrap();
        let mut parts = Vec::new();
        if let Some(first) = csvs.iter().find(|c| c.has_disturbance) {
            parts.push(format!(
                "'{}' using 1:{} with lines lw 2 title 'd'",
                first.path,
                first.plant_dim + first.observer_dim + 4
            ));
        }
        for c in csvs.iter().filter(|c| c.observer_dim > c.plant_dim) {
            parts.push(format!(
                "'{}' using 1:{} with lines title 'd est ({})'",
                c.path,
                1 + c.plant_dim + c.observer_dim,
                c.label
            ));
        }
        writeln!(s, "plot {}", parts.join(", \\\n     ")).unwrap();
    }

    writeln!(s).unwrap();
    writeln!(s, "unset multiplot").unwrap();
    writeln!(s, "unset output").unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ptobs_core::sim::Trajectory;

    fn tiny_traj(extended: bool) -> Trajectory<f64> {
        let k = if extended { 2 } else { 1 };
        let xhat = if extended {
            vec![0.5, 0.1, 0.75, 0.2]
        } else {
            vec![0.5, 0.75]
        };
        Trajectory::from_raw(
            1,
            k,
            vec![0.0, 0.5],
            vec![1.0, 0.25],
            xhat,
            vec![1.0, 2.0],
            extended.then(|| vec![0.0, 0.05]),
        )
        .unwrap()
    }

    #[test]
    fn csv_layout_plain() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_csv(&p, &tiny_traj(false)).unwrap();
        let body = std::fs::read_to_string(&p).unwrap();
        let mut lines = body.lines();
        assert_eq!(lines.next().unwrap(), "t,x1,xhat1,err_norm,mu");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.0000000000000000e0,1.0000000000000000e0,"), "{first}");
        assert_eq!(body.matches('\n').count(), 3, "header + 2 rows, LF only");
        assert!(!body.contains('\r'));
    }

    #[test]
    fn csv_layout_extended_names_dhat_and_appends_d() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.csv");
        write_csv(&p, &tiny_traj(true)).unwrap();
        let body = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            body.lines().next().unwrap(),
            "t,x1,xhat1,dhat,err_norm,mu,d"
        );
        let cols: Vec<&str> = body.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(cols.len(), 7);
    }

    #[test]
    fn numbers_round_trip_exactly() {
        let v = [0.1, 1.0 / 3.0, 2.0_f64.sqrt(), -5.0e-300, 1.28886e-2];
        for x in v {
            let s = fnum(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn report_blocks_and_keys() {
        let mut r = Report::new();
        r.block("demo");
        r.kv("answer", 42);
        r.kv("value", fnum(0.5));
        let s = r.finish();
        assert!(s.starts_with("# ptobs run report\n"));
        assert!(s.contains("\n[demo]\nanswer = 42\nvalue = 5.0000000000000000e-1\n"));
    }

    #[test]
    fn plot_script_references_all_csvs() {
        let csvs = vec![
            CsvArtifact {
                label: "pt".into(),
                path: "e_pt.csv".into(),
                plant_dim: 2,
                observer_dim: 2,
                has_disturbance: false,
            },
            CsvArtifact {
                label: "ext".into(),
                path: "e_ext.csv".into(),
                plant_dim: 2,
                observer_dim: 3,
                has_disturbance: true,
            },
        ];
        let s = plot_script("demo", &csvs);
        assert!(s.contains("set output 'demo.png'"));
        assert!(s.contains("set multiplot layout 4,1"), "{s}");
        assert!(s.contains("'e_pt.csv' using 1:2"), "plant x1 from first csv");
        assert!(s.contains("'e_ext.csv' using 1:9"), "true d column of extended csv:\n{s}");
        assert!(s.contains("'e_ext.csv' using 1:6"), "dhat column");
        assert!(s.contains("set logscale y"));
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let scn = crate::scenario::load("example1").unwrap().scenario;
        let m = RunManifest {
            scenario: scn,
            check_only: false,
            blowup_t_last_good: None,
            csv: vec![],
            report: "report.txt".into(),
            plot_script: Some("plot.gp".into()),
        };
        write_manifest(dir.path(), &m).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), m);
    }
}
