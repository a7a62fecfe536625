//! Multiclass logistic regression (softmax cross-entropy).
//!
//! The model is stored flattened, one row per class: `[w_k1, .., w_kd, b_k]`
//! for class `k` (the bias entry is present only when the client fits an
//! intercept). The loss is the average negative log-likelihood plus an
//! optional `mu/2 ||x||²`.

use crate::error::{Error, Result};
use crate::linalg::Vector;

use super::dataset::Dataset;

const POWER_ITERATIONS: usize = 50;
const POWER_REL_TOL: f64 = 1e-9;
const SQUARINGS: usize = 3;
const SQUARING_MAX_STRIDE: usize = 1024;

/// A smoothness constant together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessEstimate {
    pub value: f64,
    /// `false` when power iteration did not settle and the trace bound was used.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MclrClient {
    data: Dataset,
    classes: usize,
    mu: f64,
    intercept: bool,
    smoothness: SmoothnessEstimate,
}

impl MclrClient {
    pub fn new(data: Dataset, classes: usize, mu: f64, intercept: bool) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidObjective(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidObjective(format!(
                "mu must be >= 0, got {mu}"
            )));
        }
        if let Some(&bad) = data.labels().iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidObjective(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let mut client = Self {
            data,
            classes,
            mu,
            intercept,
            smoothness: SmoothnessEstimate {
                value: mu,
                converged: true,
            },
        };
        client.smoothness = client.estimate_smoothness();
        Ok(client)
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    fn stride(&self) -> usize {
        self.data.n_features() + usize::from(self.intercept)
    }

    pub fn dim(&self) -> usize {
        self.classes * self.stride()
    }

    pub fn sample_count(&self) -> usize {
        self.data.len()
    }

    fn logits(&self, x: &[f64], j: usize, out: &mut [f64]) {
        let a = self.data.row(j);
        let stride = self.stride();
        let d = a.len();
        for (k, z) in out.iter_mut().enumerate() {
            let w = &x[k * stride..k * stride + d];
            let mut acc: f64 = w.iter().zip(a).map(|(wi, ai)| wi * ai).sum();
            if self.intercept {
                acc += x[k * stride + d];
            }
            *z = acc;
        }
    }

    /// Turns logits into probabilities in place and returns `-log p[label]`.
    fn softmax_nll(z: &mut [f64], label: usize) -> f64 {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in z.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        let nll = total.ln() - (z[label].ln());
        z.iter_mut().for_each(|v| *v /= total);
        nll
    }

    fn loss_over<I: Iterator<Item = usize>>(&self, x: &[f64], rows: I, count: usize) -> f64 {
        let mut z = vec![0.0; self.classes];
        let mut sum = 0.0;
        for j in rows {
            self.logits(x, j, &mut z);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            sum += lse - z[self.data.label(j)];
        }
        sum / count as f64 + 0.5 * self.mu * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn grad_over<I: Iterator<Item = usize>>(&self, x: &[f64], rows: I, count: usize) -> Vector {
        let stride = self.stride();
        let d = self.data.n_features();
        let mut g = Vector::zeros(self.dim());
        let mut z = vec![0.0; self.classes];
        let inv = 1.0 / count as f64;
        for j in rows {
            self.logits(x, j, &mut z);
            let label = self.data.label(j);
            Self::softmax_nll(&mut z, label);
            z[label] -= 1.0;
            let a = self.data.row(j);
            for (k, &r) in z.iter().enumerate() {
                let c = r * inv;
                let row = &mut g[k * stride..(k + 1) * stride];
                row[..d]
                    .iter_mut()
                    .zip(a)
                    .for_each(|(gi, ai)| *gi += c * ai);
                if self.intercept {
                    row[d] += c;
                }
            }
        }
        if self.mu > 0.0 {
            g.axpy(self.mu, x);
        }
        g
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.loss_over(x, 0..self.data.len(), self.data.len())
    }

    pub fn grad(&self, x: &[f64]) -> Vector {
        self.grad_over(x, 0..self.data.len(), self.data.len())
    }

    /// Average gradient over the given sample indices (repeats allowed).
    pub fn minibatch_grad(&self, x: &[f64], rows: &[usize]) -> Vector {
        self.grad_over(x, rows.iter().copied(), rows.len())
    }

    /// Per-sample class probabilities (exposed for checks and evaluation).
    pub fn probabilities(&self, x: &[f64], j: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.classes];
        self.logits(x, j, &mut z);
        Self::softmax_nll(&mut z, self.data.label(j));
        z
    }

    /// Fraction of samples whose most probable class equals the label.
    pub fn accuracy(&self, x: &[f64]) -> f64 {
        let mut z = vec![0.0; self.classes];
        let hits = (0..self.data.len())
            .filter(|&j| {
                self.logits(x, j, &mut z);
                let best = (0..self.classes).fold(0, |b, k| if z[k] > z[b] { k } else { b });
                best == self.data.label(j)
            })
            .count();
        hits as f64 / self.data.len().max(1) as f64
    }

    pub fn smoothness(&self) -> SmoothnessEstimate {
        self.smoothness
    }

    /// `λ_max(ÃᵀÃ) / (2m) + mu`, where `Ã` is the feature matrix with the bias
    /// column appended. The softmax Hessian in logit space is bounded by `I/2`,
    /// which gives the factor one half.
    ///
    /// Power iteration runs on a power of the Gram matrix (by repeated squaring)
    /// so that small eigengaps of raw Gaussian designs still settle in the
    /// iteration budget.
    fn estimate_smoothness(&self) -> SmoothnessEstimate {
        let m = self.data.len();
        if m == 0 {
            return SmoothnessEstimate {
                value: self.mu,
                converged: true,
            };
        }
        let gram = self.gram();
        let k = self.stride();
        let mut op = gram.clone();
        if k <= SQUARING_MAX_STRIDE {
            for _ in 0..SQUARINGS {
                op = square_normalized(&op, k);
            }
        }
        let apply = |a: &[f64], v: &[f64]| -> Vec<f64> {
            a.chunks(k)
                .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
                .collect()
        };
        let rayleigh = |v: &[f64]| {
            apply(&gram, v)
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let mut v = vec![1.0 / (k as f64).sqrt(); k];
        let mut theta_prev = f64::NAN;
        let mut converged = false;
        let mut theta = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let w = apply(&op, &v);
            let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n == 0.0 {
                converged = true;
                break;
            }
            v = w.iter().map(|x| x / n).collect();
            theta = rayleigh(&v);
            if (theta - theta_prev).abs() <= POWER_REL_TOL * theta.abs() {
                converged = true;
                break;
            }
            theta_prev = theta;
        }
        let lambda_max = if converged {
            theta
        } else {
            log::warn!("power iteration did not converge; using the trace bound for smoothness");
            (0..k).map(|i| gram[i * k + i]).sum()
        };
        SmoothnessEstimate {
            value: lambda_max / (2.0 * m as f64) + self.mu,
            converged,
        }
    }

    /// `ÃᵀÃ`, row-major, `stride × stride`.
    fn gram(&self) -> Vec<f64> {
        let k = self.stride();
        let d = self.data.n_features();
        let mut g = vec![0.0; k * k];
        let mut row = vec![1.0; k];
        for j in 0..self.data.len() {
            row[..d].copy_from_slice(self.data.row(j));
            for a in 0..k {
                let ra = row[a];
                g[a * k..(a + 1) * k]
                    .iter_mut()
                    .zip(&row)
                    .for_each(|(gi, rb)| *gi += ra * rb);
            }
        }
        g
    }
}

/// `(A / tr A)²` for a symmetric PSD `A`; the scaling keeps entries bounded.
fn square_normalized(a: &[f64], k: usize) -> Vec<f64> {
    let tr: f64 = (0..k).map(|i| a[i * k + i]).sum();
    if tr <= 0.0 {
        return a.to_vec();
    }
    let s: Vec<f64> = a.iter().map(|v| v / tr).collect();
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for l in 0..k {
            let sil = s[i * k + l];
            out[i * k..(i + 1) * k]
                .iter_mut()
                .zip(&s[l * k..(l + 1) * k])
                .for_each(|(o, b)| *o += sil * b);
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn random_client(seed: u64, m: usize, d: usize, c: usize, mu: f64) -> MclrClient {
        let mut rng = stream(seed, 0, 0, Purpose::Sampling);
        let features: Vec<f64> = (0..m * d)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..c)).collect();
        MclrClient::new(Dataset::new(features, labels, d).unwrap(), c, mu, true).unwrap()
    }

    fn random_x(seed: u64, dim: usize) -> Vec<f64> {
        let mut rng = stream(seed, 1, 0, Purpose::Sampling);
        (0..dim)
            .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
            .collect::<Vec<f64>>()
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..20 {
            let client = random_client(seed, 20, 5, 3, if seed % 2 == 0 { 0.0 } else { 0.1 });
            let x = random_x(seed, client.dim());
            let g = client.grad(&x);
            let h = 1e-5;
            let mut fd = vec![0.0; x.len()];
            for k in 0..x.len() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                fd[k] = (client.value(&xp) - client.value(&xm)) / (2.0 * h);
            }
            let diff: f64 = g
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let scale = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(
                diff <= 1e-6 * scale,
                "seed {seed}: rel err {}",
                diff / scale
            );
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let client = random_client(3, 30, 4, 5, 0.0);
        let x: Vec<f64> = random_x(3, client.dim()).iter().map(|v| v * 40.0).collect();
        for j in 0..30 {
            let p = client.probabilities(&x, j);
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(p.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn convex_along_random_segments() {
        let client = random_client(4, 25, 4, 3, 0.0);
        for s in 0..20 {
            let a = random_x(100 + s, client.dim());
            let b = random_x(200 + s, client.dim());
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            assert!(client.value(&mid) <= 0.5 * client.value(&a) + 0.5 * client.value(&b) + 1e-9);
        }
    }

    #[test]
    fn gradient_is_lipschitz_with_estimated_constant() {
        let client = random_client(5, 40, 6, 4, 0.05);
        let est = client.smoothness();
        assert!(est.converged);
        for s in 0..20 {
            let a = random_x(300 + s, client.dim());
            let b = random_x(400 + s, client.dim());
            let gd: f64 = crate::linalg::dist_sq(&client.grad(&a), &client.grad(&b)).sqrt();
            let xd = crate::linalg::dist_sq(&a, &b).sqrt();
            assert!(gd <= est.value * xd * (1.0 + 1e-6));
        }
    }

    #[test]
    fn identity_design_smoothness() {
        // single sample, single feature, no intercept: A = [1], λ_max = 1
        let c =
            MclrClient::new(Dataset::new(vec![1.0], vec![0], 1).unwrap(), 2, 0.0, false).unwrap();
        assert!((c.smoothness().value - 0.5).abs() < 1e-12);
        // A = I_4 with m = d = 4: λ_max(AᵀA) = 1, so L = 1 / (2 * 4)
        let mut eye = vec![0.0; 16];
        (0..4).for_each(|k| eye[k * 4 + k] = 1.0);
        let c = MclrClient::new(
            Dataset::new(eye, vec![0, 1, 2, 0], 4).unwrap(),
            3,
            0.0,
            false,
        )
        .unwrap();
        assert!((c.smoothness().value - 0.125).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range_labels() {
        let data = Dataset::new(vec![1.0, 2.0], vec![0, 3], 1).unwrap();
        assert!(MclrClient::new(data, 3, 0.0, true).is_err());
    }

    #[test]
    fn minibatch_of_everything_is_full_gradient() {
        let client = random_client(6, 10, 3, 3, 0.0);
        let x = random_x(6, client.dim());
        let all: Vec<usize> = (0..10).collect();
        let a = client.minibatch_grad(&x, &all);
        let b = client.grad(&x);
        assert!(crate::linalg::dist_sq(&a, &b) < 1e-28);
    }
}
