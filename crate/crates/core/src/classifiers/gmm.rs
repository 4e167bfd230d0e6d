use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demod::IqPoint;
use crate::error::{ReadoutError, Result};
use crate::rng::{derived_rng, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    /// Stop when the mean log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Added to the covariance diagonal in every M-step.
    pub reg_covar: f64,
    pub kmeans_max_iter: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            tol: 1e-3,
            max_iter: 100,
            reg_covar: 1e-6,
            kmeans_max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    /// Symmetric: `cov[0][1] == cov[1][0]`.
    pub cov: [[f64; 2]; 2],
}

impl GmmComponent {
    /// `ln(weight * N(p; mean, cov))`.
    pub fn log_weighted_density(&self, p: IqPoint) -> f64 {
        let [[a, b], [_, d]] = self.cov;
        let det = a * d - b * b;
        let (dx, dy) = (p.i - self.mean[0], p.q - self.mean[1]);
        let maha = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
        self.weight.ln() - (2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * maha
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub components: Vec<GmmComponent>,
    /// Component index -> class label, once assigned.
    pub labels: Option<Vec<usize>>,
    /// Mean log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    pub converged: bool,
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Component with the largest weighted density; ties go to the lowest index.
    pub fn winner(&self, p: IqPoint) -> usize {
        let mut best = 0;
        let mut best_v = f64::NEG_INFINITY;
        for (k, c) in self.components.iter().enumerate() {
            let v = c.log_weighted_density(p);
            if v > best_v {
                best = k;
                best_v = v;
            }
        }
        best
    }

    /// Posterior component probabilities.
    pub fn posterior(&self, p: IqPoint) -> Vec<f64> {
        let logs: Vec<f64> = self.components.iter().map(|c| c.log_weighted_density(p)).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    pub fn mean_log_likelihood(&self, points: &[IqPoint]) -> f64 {
        points.iter().map(|&p| log_sum_exp(&self.log_terms(p))).sum::<f64>() / points.len() as f64
    }

    fn log_terms(&self, p: IqPoint) -> Vec<f64> {
        self.components.iter().map(|c| c.log_weighted_density(p)).collect()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn dist2(p: IqPoint, c: [f64; 2]) -> f64 {
    (p.i - c[0]).powi(2) + (p.q - c[1]).powi(2)
}

fn nearest(p: IqPoint, centers: &[[f64; 2]]) -> usize {
    let mut best = 0;
    for k in 1..centers.len() {
        if dist2(p, centers[k]) < dist2(p, centers[best]) {
            best = k;
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations; returns hard assignments.
fn kmeans<R: Rng + ?Sized>(points: &[IqPoint], k: usize, max_iter: usize, rng: &mut R) -> Vec<usize> {
    let n = points.len();
    let first = points[rng.random_range(0..n)];
    let mut centers = vec![[first.i, first.q]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = [points[next].i, points[next].q];
        centers.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }

    let mut assign: Vec<usize> = points.iter().map(|&p| nearest(p, &centers)).collect();
    for _ in 0..max_iter {
        let mut sums = vec![[0.0; 2]; k];
        let mut counts = vec![0usize; k];
        for (&p, &a) in points.iter().zip(&assign) {
            sums[a][0] += p.i;
            sums[a][1] += p.q;
            counts[a] += 1;
        }
        for j in 0..k {
            // an empty cluster keeps its previous center
            if counts[j] > 0 {
                centers[j] = [sums[j][0] / counts[j] as f64, sums[j][1] / counts[j] as f64];
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    assign
}

/// Maximization step from a responsibility matrix (`resp[i * k + j]`).
fn m_step(points: &[IqPoint], resp: &[f64], k: usize, reg: f64) -> Result<Vec<GmmComponent>> {
    let n = points.len() as f64;
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let mass: f64 = (0..points.len()).map(|i| resp[i * k + j]).sum();
        if mass < 10.0 * f64::EPSILON {
            return Err(ReadoutError::DegenerateComponent { component: j, mass });
        }
        let mut mean = [0.0; 2];
        for (i, p) in points.iter().enumerate() {
            let r = resp[i * k + j];
            mean[0] += r * p.i;
            mean[1] += r * p.q;
        }
        mean[0] /= mass;
        mean[1] /= mass;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for (i, p) in points.iter().enumerate() {
            let r = resp[i * k + j];
            let (dx, dy) = (p.i - mean[0], p.q - mean[1]);
            sxx += r * dx * dx;
            sxy += r * dx * dy;
            syy += r * dy * dy;
        }
        let cov = [[sxx / mass + reg, sxy / mass], [sxy / mass, syy / mass + reg]];
        out.push(GmmComponent {
            weight: mass / n,
            mean,
            cov,
        });
    }
    Ok(out)
}

/// Fit a `k`-component full-covariance mixture with EM (unlabeled).
pub fn gmm_fit(points: &[IqPoint], k: usize, seed: u64, config: &GmmConfig) -> Result<GmmModel> {
    if k == 0 {
        return Err(ReadoutError::InvalidArgument("need at least one component".into()));
    }
    if points.iter().any(|p| !p.i.is_finite() || !p.q.is_finite()) {
        return Err(ReadoutError::InvalidArgument("non-finite I/Q point".into()));
    }
    let mut distinct: Vec<(u64, u64)> = points.iter().map(|p| (p.i.to_bits(), p.q.to_bits())).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < k {
        return Err(ReadoutError::InvalidArgument(format!(
            "{} distinct points cannot support {k} components",
            distinct.len()
        )));
    }

    let assign = kmeans(points, k, config.kmeans_max_iter, &mut derived_rng(seed, &[stream::KMEANS]));
    let mut resp = vec![0.0; points.len() * k];
    for (i, &a) in assign.iter().enumerate() {
        resp[i * k + a] = 1.0;
    }
    let mut model = GmmModel {
        components: m_step(points, &resp, k, config.reg_covar)?,
        labels: None,
        log_likelihood: Vec::new(),
        converged: false,
    };

    for _ in 0..config.max_iter {
        // E-step
        let mut total = 0.0;
        for (i, &p) in points.iter().enumerate() {
            let logs = model.log_terms(p);
            let lse = log_sum_exp(&logs);
            total += lse;
            for (j, l) in logs.iter().enumerate() {
                resp[i * k + j] = (l - lse).exp();
            }
        }
        let ll = total / points.len() as f64;
        if !ll.is_finite() {
            return Err(ReadoutError::DegenerateComponent {
                component: 0,
                mass: f64::NAN,
            });
        }
        let prev = model.log_likelihood.last().copied();
        model.log_likelihood.push(ll);
        if prev.is_some_and(|prev| ll - prev < config.tol) {
            model.converged = true;
            break;
        }
        model.components = m_step(points, &resp, k, config.reg_covar)?;
    }
    Ok(model)
}

/// Map each component to the majority label of the training points it wins.
/// Components that win nothing take the label of the nearest (by mean)
/// component that does. Ties go to the lower label.
pub fn gmm_assign_labels(model: &GmmModel, points: &[IqPoint], labels: &[usize]) -> Result<GmmModel> {
    if points.len() != labels.len() {
        return Err(ReadoutError::DimensionMismatch {
            expected: points.len(),
            got: labels.len(),
        });
    }
    if points.is_empty() {
        return Err(ReadoutError::InvalidArgument("no labeled points".into()));
    }
    let k = model.k();
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; n_labels]; k];
    for (&p, &l) in points.iter().zip(labels) {
        counts[model.winner(p)][l] += 1;
    }
    let majority: Vec<Option<usize>> = counts
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| {
                let mut best = 0;
                for (l, &c) in row.iter().enumerate() {
                    if c > row[best] {
                        best = l;
                    }
                }
                best
            })
        })
        .collect();
    let map = (0..k)
        .map(|j| match majority[j] {
            Some(l) => l,
            None => {
                let mj = model.components[j].mean;
                let p = IqPoint { i: mj[0], q: mj[1] };
                let mut best: Option<(f64, usize)> = None;
                for (o, m) in majority.iter().enumerate() {
                    if let Some(l) = m {
                        let d = dist2(p, model.components[o].mean);
                        if best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, *l));
                        }
                    }
                }
                best.map(|(_, l)| l).expect("at least one component wins a point")
            }
        })
        .collect();
    Ok(GmmModel {
        labels: Some(map),
        ..model.clone()
    })
}

/// Label of the component with the largest posterior.
pub fn gmm_predict(model: &GmmModel, point: IqPoint) -> Result<usize> {
    let map = model.labels.as_ref().ok_or(ReadoutError::UnlabeledModel)?;
    Ok(map[model.winner(point)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[(f64, f64)], sigma: f64, n: usize, seed: u64) -> (Vec<IqPoint>, Vec<usize>) {
        let mut rng = crate::rng::seeded_rng(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for (l, &(x, y)) in centers.iter().enumerate() {
            for _ in 0..n {
                pts.push(IqPoint {
                    i: x + noise.sample(&mut rng),
                    q: y + noise.sample(&mut rng),
                });
                labels.push(l);
            }
        }
        (pts, labels)
    }

    #[test]
    fn single_component_is_sample_moments() {
        let (pts, _) = blobs(&[(1.0, -2.0)], 0.7, 500, 1);
        let m = gmm_fit(&pts, 1, 3, &GmmConfig::default()).unwrap();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.i).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.q).sum::<f64>() / n;
        let sxy = pts.iter().map(|p| (p.i - mx) * (p.q - my)).sum::<f64>() / n;
        let sxx = pts.iter().map(|p| (p.i - mx).powi(2)).sum::<f64>() / n;
        let c = m.components[0];
        assert!((c.mean[0] - mx).abs() < 1e-12 && (c.mean[1] - my).abs() < 1e-12);
        assert!((c.cov[0][0] - (sxx + 1e-6)).abs() < 1e-12);
        assert!((c.cov[0][1] - sxy).abs() < 1e-12);
        assert_eq!(c.weight, 1.0);
    }

    #[test]
    fn separated_clusters_are_recovered() {
        let (pts, labels) = blobs(&[(-5.0, 0.0), (5.0, 0.0)], 0.1, 1000, 2);
        let m = gmm_fit(&pts, 2, 4, &GmmConfig::default()).unwrap();
        let m = gmm_assign_labels(&m, &pts, &labels).unwrap();
        for c in &m.components {
            assert!((c.weight - 0.5).abs() < 0.05);
            let target = if c.mean[0] < 0.0 { -5.0 } else { 5.0 };
            assert!((c.mean[0] - target).abs() < 0.05 && c.mean[1].abs() < 0.05);
        }
        let map = m.labels.as_ref().unwrap();
        let mut sorted = map.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1]);
        assert_eq!(gmm_predict(&m, IqPoint { i: -5.0, q: 0.0 }).unwrap(), 0);
        assert_eq!(gmm_predict(&m, IqPoint { i: 5.0, q: 0.0 }).unwrap(), 1);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let (pts, _) = blobs(&[(-1.0, 0.0), (1.0, 0.3), (0.0, 1.5)], 0.8, 400, 5);
        let cfg = GmmConfig {
            tol: 0.0,
            max_iter: 60,
            ..GmmConfig::default()
        };
        let m = gmm_fit(&pts, 3, 6, &cfg).unwrap();
        for w in m.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn unlabeled_model_cannot_predict() {
        let (pts, _) = blobs(&[(0.0, 0.0)], 1.0, 10, 1);
        let m = gmm_fit(&pts, 1, 1, &GmmConfig::default()).unwrap();
        assert!(matches!(gmm_predict(&m, pts[0]), Err(ReadoutError::UnlabeledModel)));
    }

    #[test]
    fn too_few_distinct_points() {
        let pts = vec![IqPoint { i: 1.0, q: 1.0 }; 5];
        assert!(gmm_fit(&pts, 2, 1, &GmmConfig::default()).is_err());
    }

    #[test]
    fn empty_component_takes_nearest_label() {
        let comp = |x: f64, w: f64| GmmComponent {
            weight: w,
            mean: [x, 0.0],
            cov: [[0.01, 0.0], [0.0, 0.01]],
        };
        // component 2 sits near component 1 but all points are near 0 and 1
        let model = GmmModel {
            components: vec![comp(0.0, 0.45), comp(10.0, 0.45), comp(12.0, 0.1)],
            labels: None,
            log_likelihood: vec![],
            converged: true,
        };
        let pts = [IqPoint { i: 0.0, q: 0.0 }, IqPoint { i: 10.0, q: 0.0 }];
        let m = gmm_assign_labels(&model, &pts, &[1, 0]).unwrap();
        assert_eq!(m.labels, Some(vec![1, 0, 0]));
    }

    #[test]
    fn majority_ties_go_to_lower_label() {
        let model = GmmModel {
            components: vec![GmmComponent {
                weight: 1.0,
                mean: [0.0, 0.0],
                cov: [[1.0, 0.0], [0.0, 1.0]],
            }],
            labels: None,
            log_likelihood: vec![],
            converged: true,
        };
        let pts = [IqPoint { i: 0.0, q: 0.0 }, IqPoint { i: 0.1, q: 0.0 }];
        let m = gmm_assign_labels(&model, &pts, &[2, 1]).unwrap();
        assert_eq!(m.labels, Some(vec![1]));
    }
}
