//! Synthetic softmax-labelled data.
//!
//! Features are standard normal. A single linear labeller `W` (classes × features)
//! is drawn from the run seed; every row of `W` is rescaled to norm `sqrt(d)` and
//! the label of a point is the argmax of `W a`. Equal row norms and a zero
//! bias keep the class frequencies close to uniform.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

use super::dataset::Dataset;

/// How labels are spread over clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heterogeneity {
    Iid,
    /// Each client only holds samples from `labels_per_client` classes.
    NonIid {
        labels_per_client: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub clients: usize,
    pub samples_per_client: usize,
    pub features: usize,
    pub classes: usize,
    pub heterogeneity: Heterogeneity,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            clients: 10,
            samples_per_client: 100,
            features: 60,
            classes: 10,
            heterogeneity: Heterogeneity::Iid,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSynthetic(m));
        if self.clients == 0 || self.samples_per_client == 0 {
            return bad("clients and samples_per_client must be positive".into());
        }
        if self.features == 0 || self.classes < 2 {
            return bad("need at least one feature and two classes".into());
        }
        if let Heterogeneity::NonIid {
            labels_per_client: k,
        } = self.heterogeneity
        {
            if k == 0 || k > self.classes {
                return bad(format!(
                    "labels_per_client = {k} must be in 1..={}",
                    self.classes
                ));
            }
        }
        Ok(())
    }

    /// Class set a client may hold: consecutive labels, rotating with the client index.
    pub fn allowed_labels(&self, client: usize) -> Vec<usize> {
        match self.heterogeneity {
            Heterogeneity::Iid => (0..self.classes).collect(),
            Heterogeneity::NonIid {
                labels_per_client: k,
            } => (0..k).map(|j| (client * k + j) % self.classes).collect(),
        }
    }
}

/// The labelling model shared by all clients.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeller {
    weights: Vec<f64>,
    features: usize,
    classes: usize,
}

impl Labeller {
    pub fn draw(spec: &SyntheticSpec) -> Self {
        let mut rng = stream(spec.seed, 0, 0, Purpose::SyntheticData);
        let d = spec.features;
        let mut weights: Vec<f64> = (0..spec.classes * d)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        for row in weights.chunks_mut(d) {
            let n = row
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
                .max(f64::MIN_POSITIVE);
            let s = (d as f64).sqrt() / n;
            row.iter_mut().for_each(|v| *v *= s);
        }
        Self {
            weights,
            features: d,
            classes: spec.classes,
        }
    }

    pub fn label(&self, a: &[f64]) -> usize {
        let score = |k: usize| -> f64 {
            self.weights[k * self.features..(k + 1) * self.features]
                .iter()
                .zip(a)
                .map(|(w, x)| w * x)
                .sum()
        };
        let mut best = 0;
        let mut best_score = score(0);
        for k in 1..self.classes {
            let s = score(k);
            if s > best_score {
                best = k;
                best_score = s;
            }
        }
        best
    }
}

/// Generates one dataset per client, deterministically in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<Dataset>> {
    spec.validate()?;
    let labeller = Labeller::draw(spec);
    let d = spec.features;
    (0..spec.clients)
        .map(|client| {
            let allowed = spec.allowed_labels(client);
            let mut mask = vec![false; spec.classes];
            allowed.iter().for_each(|&l| mask[l] = true);
            let mut rng = stream(spec.seed, client + 1, 0, Purpose::SyntheticData);
            let mut features = Vec::with_capacity(spec.samples_per_client * d);
            let mut labels = Vec::with_capacity(spec.samples_per_client);
            let budget = 1000 * spec.samples_per_client * spec.classes;
            let mut draws = 0usize;
            let mut a = vec![0.0; d];
            while labels.len() < spec.samples_per_client {
                if draws == budget {
                    return Err(Error::InvalidSynthetic(format!(
                        "client {client}: labels {allowed:?} are too rare to fill {} samples",
                        spec.samples_per_client
                    )));
                }
                draws += 1;
                a.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                let label = labeller.label(&a);
                if mask[label] {
                    labels.push(label);
                    features.extend_from_slice(&a);
                }
            }
            Dataset::new(features, labels, d)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let spec = SyntheticSpec {
            clients: 3,
            samples_per_client: 20,
            seed: 11,
            ..Default::default()
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let bytes = |ds: &[Dataset]| -> Vec<u8> {
            ds.iter()
                .flat_map(|d| {
                    d.features()
                        .iter()
                        .flat_map(|v| v.to_le_bytes())
                        .collect::<Vec<_>>()
                })
                .collect()
        };
        assert_eq!(bytes(&a), bytes(&b));
        let c = generate_synthetic(&SyntheticSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn non_iid_clients_hold_at_most_k_labels() {
        let spec = SyntheticSpec {
            clients: 10,
            samples_per_client: 50,
            heterogeneity: Heterogeneity::NonIid {
                labels_per_client: 3,
            },
            seed: 5,
            ..Default::default()
        };
        for (i, ds) in generate_synthetic(&spec).unwrap().iter().enumerate() {
            let mut seen: Vec<usize> = ds.labels().to_vec();
            seen.sort_unstable();
            seen.dedup();
            assert!(seen.len() <= 3, "client {i}: {seen:?}");
            assert!(seen.iter().all(|l| spec.allowed_labels(i).contains(l)));
        }
    }

    #[test]
    fn iid_label_frequencies_are_balanced() {
        // 10^4 samples; every class frequency must be within 30% of 1/c
        let spec = SyntheticSpec {
            clients: 1,
            samples_per_client: 10_000,
            seed: 0,
            ..Default::default()
        };
        let ds = &generate_synthetic(&spec).unwrap()[0];
        let mut counts = vec![0usize; spec.classes];
        ds.labels().iter().for_each(|&l| counts[l] += 1);
        let expected = 10_000.0 / spec.classes as f64;
        for (k, c) in counts.iter().enumerate() {
            let rel = (*c as f64 - expected).abs() / expected;
            assert!(rel <= 0.3, "class {k}: {c} samples ({rel:.3} off)");
        }
    }

    #[test]
    fn infeasible_specs_rejected() {
        let spec = SyntheticSpec {
            heterogeneity: Heterogeneity::NonIid {
                labels_per_client: 11,
            },
            ..Default::default()
        };
        assert!(matches!(
            generate_synthetic(&spec),
            Err(Error::InvalidSynthetic(_))
        ));
        assert!(generate_synthetic(&SyntheticSpec {
            clients: 0,
            ..Default::default()
        })
        .is_err());
    }
}
