//! Scalar summaries of a run — peak transient, error at the end of the
//! convergence window, post-window residual, disturbance tracking — and a
//! comparison of two observers that rode the same plant.
//!
//! Comparisons are only meaningful when both trajectories saw the identical
//! plant path, so every [`RunMetrics`] carries a hash of its plant columns
//! and [`compare`] refuses mismatched runs.

use crate::scalar::Real;
use crate::sim::Trajectory;
use crate::timescale::TimeScale;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("no samples fall inside the requested window")]
    EmptyWindow,
    #[error("metrics come from different plant runs and cannot be compared")]
    PlantMismatch,
}

/// Where along the run the summary quantities are measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsWindows<T> {
    /// The near-convergence probe sits at T·(1 − delta_frac).
    pub delta_frac: T,
    /// Start of the disturbance-tracking tail; defaults to max(2T, 2).
    pub dhat_tail_start: Option<T>,
    /// The run counts as settled if the probe error is below this.
    pub settle_tol: T,
}

impl<T: Real> Default for MetricsWindows<T> {
    fn default() -> Self {
        MetricsWindows {
            delta_frac: T::from_f64(1e-3),
            dhat_tail_start: None,
            settle_tol: T::from_f64(1e-2),
        }
    }
}

/// Scalar summaries of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics<T> {
    /// Largest ‖x − x̂‖ over the whole run, and when it occurred.
    pub peak_err: T,
    pub peak_time: T,
    /// ‖x − x̂‖ at the sample nearest T·(1 − delta_frac), with the actual
    /// sample time used; None without a time scale.
    pub err_at_t_minus: Option<T>,
    pub probe_time: Option<T>,
    /// Largest ‖x − x̂‖ over t ≥ T; None without a time scale.
    pub post_t_max_err: Option<T>,
    /// Largest |d̂ − d| over the tail window; None unless the observer
    /// estimates the disturbance and the true value was recorded.
    pub dhat_track_err: Option<T>,
    /// Probe error at or below `settle_tol`.
    pub settled: bool,
    /// Hash of the plant columns; identifies the underlying plant run.
    pub plant_hash: u64,
}

/// Verdicts and ratios from two observers on the same plant run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareReport<T> {
    /// second.peak_err / first.peak_err (1 when equal).
    pub peak_ratio: T,
    /// second.post_t_max_err / first.post_t_max_err when both exist.
    pub post_t_ratio: Option<T>,
    /// first.peak_err strictly below second's.
    pub first_peak_smaller: bool,
    /// first.post_t_max_err strictly below second's (false if either missing).
    pub first_post_t_smaller: bool,
}

/// FNV-1a over the bit patterns of the times and plant columns.
fn plant_hash<T: Real>(traj: &Trajectory<T>) -> u64 {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    let mut eat = |v: f64| {
        for byte in v.to_bits().to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    for s in 0..traj.len() {
        eat(traj.times()[s].to_f64().unwrap_or(f64::NAN));
        for &v in traj.x_row(s) {
            eat(v.to_f64().unwrap_or(f64::NAN));
        }
    }
    h
}

/// Summarize one trajectory. `ts` supplies the prescribed time T for the
/// probe and post-T windows; pass None for observers without one.
pub fn compute_metrics<T: Real>(
    traj: &Trajectory<T>,
    ts: Option<&TimeScale<T>>,
    w: &MetricsWindows<T>,
) -> Result<RunMetrics<T>, MetricsError> {
    if traj.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    let times = traj.times();
    let errs = traj.err_norm();
    let t_end = *times.last().expect("non-empty");

    let mut peak_err = errs[0];
    let mut peak_time = times[0];
    for (&t, &e) in times.iter().zip(errs) {
        if e > peak_err {
            peak_err = e;
            peak_time = t;
        }
    }

    let mut err_at_t_minus = None;
    let mut probe_time = None;
    let mut post_t_max_err = None;
    if let Some(ts) = ts {
        let tp = ts.prescribed_time();
        let probe = tp * (T::one() - w.delta_frac);
        if probe > t_end {
            return Err(MetricsError::EmptyWindow);
        }
        let s = traj.nearest_sample(probe);
        err_at_t_minus = Some(errs[s]);
        probe_time = Some(times[s]);

        let post = times
            .iter()
            .zip(errs)
            .filter(|(&t, _)| t >= tp)
            .map(|(_, &e)| e)
            .fold(None, |acc: Option<T>, e| Some(acc.map_or(e, |a| a.max(e))));
        post_t_max_err = post;
    }

    let mut dhat_track_err = None;
    if let (Some(d_true), true) = (traj.d_true(), traj.observer_dim() > traj.plant_dim()) {
        let tail_start = w.dhat_tail_start.unwrap_or_else(|| {
            let two = T::from_f64(2.0);
            ts.map_or(two, |ts| (two * ts.prescribed_time()).max(two))
        });
        let mut worst: Option<T> = None;
        for s in 0..traj.len() {
            if times[s] >= tail_start {
                let miss = (traj.dhat(s).expect("augmented state") - d_true[s]).abs();
                worst = Some(worst.map_or(miss, |w| w.max(miss)));
            }
        }
        dhat_track_err = Some(worst.ok_or(MetricsError::EmptyWindow)?);
    }

    let settle_probe = err_at_t_minus.unwrap_or(*errs.last().expect("non-empty"));
    Ok(RunMetrics {
        peak_err,
        peak_time,
        err_at_t_minus,
        probe_time,
        post_t_max_err,
        dhat_track_err,
        settled: settle_probe <= w.settle_tol,
        plant_hash: plant_hash(traj),
    })
}

/// Compare two observers that rode the same plant run (checked through the
/// plant hash). Ratios are second/first, so values above 1 mean the first
/// observer did better.
pub fn compare<T: Real>(
    first: &RunMetrics<T>,
    second: &RunMetrics<T>,
) -> Result<CompareReport<T>, MetricsError> {
    if first.plant_hash != second.plant_hash {
        return Err(MetricsError::PlantMismatch);
    }
    let ratio = |a: T, b: T| if a == b { T::one() } else { b / a };
    let post_t_ratio = match (first.post_t_max_err, second.post_t_max_err) {
        (Some(a), Some(b)) => Some(ratio(a, b)),
        _ => None,
    };
    Ok(CompareReport {
        peak_ratio: ratio(first.peak_err, second.peak_err),
        post_t_ratio,
        first_peak_smaller: first.peak_err < second.peak_err,
        first_post_t_smaller: match (first.post_t_max_err, second.post_t_max_err) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        },
    })
}
