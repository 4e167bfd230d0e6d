//! Full and sliced demodulation, Hann smoothing, flattening and scaling.
//!
//! Both demodulation integrals use the midpoint rule on the raw samples:
//!
//! ```text
//! I =  (2/T) Σ r(τ_k) cos(2π f τ_k) δτ
//! Q = -(2/T) Σ r(τ_k) sin(2π f τ_k) δτ
//! ```
//!
//! Sliced demodulation evaluates the same sums over consecutive windows of
//! length Δt, so the slice average equals the full result.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{ReadoutError, Result};
use crate::sim::RawShot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IqPoint {
    pub i: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub i_series: Vec<f64>,
    pub q_series: Vec<f64>,
    pub dt_ns: f64,
    pub label: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.i_series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i_series.is_empty()
    }

    /// Time average of the trajectory as a single I/Q point.
    pub fn mean(&self) -> IqPoint {
        let n = self.len() as f64;
        IqPoint {
            i: self.i_series.iter().sum::<f64>() / n,
            q: self.q_series.iter().sum::<f64>() / n,
        }
    }
}

/// Flattened trajectory: I-part followed by Q-part.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<usize>,
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() <= 1e-6 * x.abs().max(1.0)
}

fn check_whole_periods(duration_ns: f64, f_if_hz: f64, what: &str) -> Result<()> {
    let periods = duration_ns * f_if_hz / 1e9;
    if f_if_hz.is_nan() || f_if_hz <= 0.0 || !is_integral(periods) || periods.round() < 1.0 {
        return Err(ReadoutError::InvalidArgument(format!(
            "{what} of {duration_ns} ns spans {periods} carrier periods at {f_if_hz} Hz"
        )));
    }
    Ok(())
}

/// Demodulate `samples[range]` against the carrier. Times are absolute, so
/// slices keep the carrier phase of the whole shot.
fn demod_range(shot: &RawShot, f_if_hz: f64, start: usize, len: usize) -> IqPoint {
    let dt_s = shot.duration_ns * 1e-9 / shot.samples.len() as f64;
    let mut si = 0.0;
    let mut sq = 0.0;
    for k in start..start + len {
        let t = (k as f64 + 0.5) * dt_s;
        let (s, c) = (TAU * f_if_hz * t).sin_cos();
        let r = shot.samples[k];
        si += r * c;
        sq += r * s;
    }
    let norm = 2.0 / len as f64;
    IqPoint {
        i: norm * si,
        q: -norm * sq,
    }
}

pub fn full_demod(shot: &RawShot, f_if_hz: f64) -> Result<IqPoint> {
    check_whole_periods(shot.duration_ns, f_if_hz, "shot")?;
    if shot.samples.is_empty() {
        return Err(ReadoutError::InvalidArgument("shot has no samples".into()));
    }
    Ok(demod_range(shot, f_if_hz, 0, shot.samples.len()))
}

pub fn sliced_demod(shot: &RawShot, f_if_hz: f64, dt_ns: f64) -> Result<Trajectory> {
    check_whole_periods(dt_ns, f_if_hz, "slice")?;
    let slices = shot.duration_ns / dt_ns;
    if !is_integral(slices) || slices.round() < 1.0 {
        return Err(ReadoutError::InvalidArgument(format!(
            "slice of {dt_ns} ns does not divide the {} ns shot",
            shot.duration_ns
        )));
    }
    let c = slices.round() as usize;
    let n = shot.samples.len();
    if !n.is_multiple_of(c) || n == 0 {
        return Err(ReadoutError::InvalidArgument(format!(
            "{n} samples cannot be cut into {c} equal slices"
        )));
    }
    let per = n / c;
    let (i_series, q_series) = (0..c)
        .map(|j| {
            let p = demod_range(shot, f_if_hz, j * per, per);
            (p.i, p.q)
        })
        .unzip();
    Ok(Trajectory {
        i_series,
        q_series,
        dt_ns,
        label: Some(shot.prepared_label),
    })
}

/// Unit-sum Hann kernel with strictly positive taps
/// (`w_j ∝ 1 - cos(2π (j+1) / (len+1))`).
pub fn hann_kernel(len: usize) -> Vec<f64> {
    assert!(len >= 1);
    let w: Vec<f64> = (0..len)
        .map(|j| 0.5 - 0.5 * (TAU * (j + 1) as f64 / (len + 1) as f64).cos())
        .collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|x| x / sum).collect()
}

/// Same-length convolution with reflect padding (edge sample not repeated).
fn convolve_reflect(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = kernel.len();
    if m <= 1 || n == 0 {
        return x.to_vec();
    }
    let left = (m - 1) / 2;
    let reflect = |i: isize| -> f64 {
        let n = n as isize;
        let mut i = i;
        // a single reflection suffices because m <= n
        if i < 0 {
            i = -i;
        }
        if i >= n {
            i = 2 * (n - 1) - i;
        }
        x[i as usize]
    };
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * reflect(i as isize + j as isize - left as isize))
                .sum()
        })
        .collect()
}

/// Reported when the requested smoothing window had to be shortened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowClamped {
    pub requested: usize,
    pub used: usize,
}

/// Hann smoothing of both quadratures. A window at least as long as the
/// series is clamped to the series length and reported.
pub fn smooth(traj: &Trajectory, window_len: usize) -> Result<(Trajectory, Option<WindowClamped>)> {
    if window_len == 0 {
        return Err(ReadoutError::InvalidArgument("smoothing window must be >= 1".into()));
    }
    let n = traj.len();
    let (used, clamp) = if n > 0 && window_len >= n {
        (
            n,
            Some(WindowClamped {
                requested: window_len,
                used: n,
            }),
        )
    } else {
        (window_len, None)
    };
    if used <= 1 {
        return Ok((traj.clone(), clamp));
    }
    let k = hann_kernel(used);
    Ok((
        Trajectory {
            i_series: convolve_reflect(&traj.i_series, &k),
            q_series: convolve_reflect(&traj.q_series, &k),
            dt_ns: traj.dt_ns,
            label: traj.label,
        },
        clamp,
    ))
}

pub fn flatten(traj: &Trajectory) -> FeatureVector {
    let mut values = Vec::with_capacity(2 * traj.len());
    values.extend_from_slice(&traj.i_series);
    values.extend_from_slice(&traj.q_series);
    FeatureVector {
        values,
        label: traj.label,
    }
}

pub fn unflatten(fv: &FeatureVector, dt_ns: f64) -> Result<Trajectory> {
    if !fv.values.len().is_multiple_of(2) {
        return Err(ReadoutError::InvalidArgument(format!(
            "feature vector of odd length {}",
            fv.values.len()
        )));
    }
    let c = fv.values.len() / 2;
    Ok(Trajectory {
        i_series: fv.values[..c].to_vec(),
        q_series: fv.values[c..].to_vec(),
        dt_ns,
        label: fv.label,
    })
}

/// Per-dimension min/max scaling to [0, 1], fit on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit<'a, I>(rows: I) -> Result<Scaler>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut it = rows.into_iter();
        let first = it
            .next()
            .ok_or_else(|| ReadoutError::InvalidArgument("cannot fit a scaler on no data".into()))?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for row in it {
            if row.len() != min.len() {
                return Err(ReadoutError::DimensionMismatch {
                    expected: min.len(),
                    got: row.len(),
                });
            }
            for ((lo, hi), &x) in min.iter_mut().zip(max.iter_mut()).zip(row) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn apply_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(ReadoutError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.min).zip(&self.max) {
            *v = if hi > lo {
                ((*v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.5
            };
        }
        Ok(())
    }

    pub fn apply(&self, fv: &FeatureVector) -> Result<FeatureVector> {
        let mut values = fv.values.clone();
        self.apply_in_place(&mut values)?;
        Ok(FeatureVector {
            values,
            label: fv.label,
        })
    }

    /// Map scaled values back to feature units (constant dimensions map to their value).
    pub fn invert(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&s, (&lo, &hi))| lo + s * (hi - lo))
            .collect()
    }
}

pub fn fit_scaler(train: &[FeatureVector]) -> Result<Scaler> {
    Scaler::fit(train.iter().map(|f| f.values.as_slice()))
}

pub fn apply_scaler(scaler: &Scaler, fv: &FeatureVector) -> Result<FeatureVector> {
    scaler.apply(fv)
}
