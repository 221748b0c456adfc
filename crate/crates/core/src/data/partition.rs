//! Label-skewed splits of a dataset across clients.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::dataset::indices_by_class;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

pub const MAX_PARTITION_ATTEMPTS: usize = 100;

/// Disjoint index lists into a parent dataset, one per client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub shards: Vec<Vec<usize>>,
}

impl Partition {
    pub fn num_clients(&self) -> usize {
        self.shards.len()
    }

    /// Checks that shards are non-empty, pairwise disjoint and cover `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for (k, shard) in self.shards.iter().enumerate() {
            if shard.is_empty() {
                return Err(Error::InfeasiblePartition(format!("shard {k} is empty")));
            }
            for &i in shard {
                if i >= n {
                    return Err(Error::InfeasiblePartition(format!(
                        "shard {k} holds index {i} ≥ {n}"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InfeasiblePartition(format!(
                        "index {i} assigned twice"
                    )));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InfeasiblePartition(format!(
                "index {missing} not assigned to any shard"
            )));
        }
        Ok(())
    }

    /// Per-shard class histograms.
    pub fn class_histograms(&self, labels: &[usize], num_classes: usize) -> Vec<Vec<usize>> {
        self.shards
            .iter()
            .map(|shard| {
                let mut h = vec![0; num_classes];
                for &i in shard {
                    h[labels[i]] += 1;
                }
                h
            })
            .collect()
    }

    /// Mean over clients of the Shannon entropy (nats) of each shard's label distribution.
    pub fn mean_label_entropy(&self, labels: &[usize], num_classes: usize) -> f64 {
        let hists = self.class_histograms(labels, num_classes);
        let total: f64 = hists
            .iter()
            .map(|h| {
                let n: usize = h.iter().sum();
                h.iter()
                    .filter(|&&c| c > 0)
                    .map(|&c| {
                        let p = c as f64 / n as f64;
                        -p * p.ln()
                    })
                    .sum::<f64>()
            })
            .sum();
        total / hists.len() as f64
    }

    /// One JSON object per line: `{"client": k, "indices": [...]}`.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            client: usize,
            indices: &'a [usize],
        }
        for (client, indices) in self.shards.iter().enumerate() {
            serde_json::to_writer(&mut w, &Line { client, indices })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn num_classes_of(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

fn sample_dirichlet<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("Gamma({alpha}, 1): {e}")))?;
    let mut p: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = p.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        p.iter_mut().for_each(|v| *v /= sum);
    } else {
        // every draw underflowed: all mass on one client
        let hot = rng.random_range(0..k);
        p = vec![0.0; k];
        p[hot] = 1.0;
    }
    Ok(p)
}

/// Splits every class across `k` clients with proportions drawn from
/// `Dirichlet(alpha · 1_k)`. The whole partition is re-drawn while any shard
/// is empty, up to [`MAX_PARTITION_ATTEMPTS`] times.
pub fn dirichlet_partition(labels: &[usize], k: usize, alpha: f64, seed: u64) -> Result<Partition> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 clients, got {k}")));
    }
    let by_class = indices_by_class(labels, num_classes_of(labels));
    let mut rng = rng::stream(seed, Stream::Partition);
    for _ in 0..MAX_PARTITION_ATTEMPTS {
        let mut shards = vec![Vec::new(); k];
        for class_idx in &by_class {
            let mut idx = class_idx.clone();
            idx.shuffle(&mut rng);
            let props = sample_dirichlet(alpha, k, &mut rng)?;
            let n = idx.len();
            let mut start = 0;
            let mut cum = 0.0;
            for (client, p) in props.iter().enumerate() {
                cum += p;
                let end = if client + 1 == k {
                    n
                } else {
                    ((cum * n as f64) as usize).clamp(start, n)
                };
                shards[client].extend_from_slice(&idx[start..end]);
                start = end;
            }
        }
        if shards.iter().all(|s| !s.is_empty()) {
            shards.iter_mut().for_each(|s| s.sort_unstable());
            return Ok(Partition { shards });
        }
    }
    Err(Error::PartitionRetriesExhausted {
        attempts: MAX_PARTITION_ATTEMPTS,
    })
}

/// Gives every client exactly `n_classes` distinct classes; each class's
/// samples are split evenly among the clients that own it.
pub fn cn_partition(labels: &[usize], k: usize, n_classes: usize, seed: u64) -> Result<Partition> {
    let c = num_classes_of(labels);
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one client".into()));
    }
    if n_classes == 0 || n_classes > c {
        return Err(Error::InfeasiblePartition(format!(
            "classes per client must be in 1..={c}, got {n_classes}"
        )));
    }
    if k * n_classes < c {
        return Err(Error::InfeasiblePartition(format!(
            "{k} clients × {n_classes} classes cannot cover {c} classes"
        )));
    }
    let mut rng = rng::stream(seed, Stream::Partition);
    let mut order: Vec<usize> = (0..c).collect();
    order.shuffle(&mut rng);

    let mut owners = vec![Vec::new(); c];
    for client in 0..k {
        for j in 0..n_classes {
            owners[order[(client * n_classes + j) % c]].push(client);
        }
    }

    let by_class = indices_by_class(labels, c);
    let mut shards = vec![Vec::new(); k];
    for (class, mut idx) in by_class.into_iter().enumerate() {
        let owners = &owners[class];
        if idx.len() < owners.len() {
            return Err(Error::InfeasiblePartition(format!(
                "class {class} has {} samples for {} owners",
                idx.len(),
                owners.len()
            )));
        }
        idx.shuffle(&mut rng);
        let base = idx.len() / owners.len();
        let extra = idx.len() % owners.len();
        let mut start = 0;
        for (j, &client) in owners.iter().enumerate() {
            let len = base + usize::from(j < extra);
            shards[client].extend_from_slice(&idx[start..start + len]);
            start += len;
        }
    }
    shards.iter_mut().for_each(|s| s.sort_unstable());
    Ok(Partition { shards })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(c: usize, per: usize) -> Vec<usize> {
        (0..c).flat_map(|y| std::iter::repeat_n(y, per)).collect()
    }

    #[test]
    fn concentrated_dirichlet_is_near_uniform() {
        let labels = balanced(10, 1000);
        let p = dirichlet_partition(&labels, 10, 1e6, 3).unwrap();
        p.validate(labels.len()).unwrap();
        for h in p.class_histograms(&labels, 10) {
            for &count in &h {
                assert!((count as f64 - 100.0).abs() <= 10.0, "{h:?}");
            }
        }
    }

    #[test]
    fn dirichlet_is_deterministic() {
        let labels = balanced(5, 40);
        assert_eq!(
            dirichlet_partition(&labels, 4, 0.3, 8).unwrap(),
            dirichlet_partition(&labels, 4, 0.3, 8).unwrap()
        );
        assert_ne!(
            dirichlet_partition(&labels, 4, 0.3, 8).unwrap(),
            dirichlet_partition(&labels, 4, 0.3, 9).unwrap()
        );
    }

    #[test]
    fn heterogeneity_ordering() {
        let labels = balanced(10, 300);
        let h = |alpha| dirichlet_partition(&labels, 10, alpha, 1).unwrap().mean_label_entropy(&labels, 10);
        assert!(h(0.1) < h(100.0));
    }

    #[test]
    fn impossible_dirichlet_exhausts_retries() {
        // 3 samples cannot fill 5 shards
        let err = dirichlet_partition(&[0, 1, 2], 5, 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::PartitionRetriesExhausted { attempts: 100 }));
        assert!(dirichlet_partition(&[0, 1], 2, 0.0, 0).is_err());
        assert!(dirichlet_partition(&[0, 1], 1, 1.0, 0).is_err());
    }

    #[test]
    fn cn_two_classes_each() {
        let labels = balanced(10, 50);
        let p = cn_partition(&labels, 10, 2, 4).unwrap();
        p.validate(labels.len()).unwrap();
        for h in p.class_histograms(&labels, 10) {
            assert_eq!(h.iter().filter(|&&c| c > 0).count(), 2, "{h:?}");
        }
    }

    #[test]
    fn cn_diagonal_and_full() {
        let labels = balanced(4, 12);
        let diag = cn_partition(&labels, 4, 1, 0).unwrap();
        for h in diag.class_histograms(&labels, 4) {
            assert_eq!(h.iter().filter(|&&c| c == 12).count(), 1);
            assert_eq!(h.iter().sum::<usize>(), 12);
        }
        let full = cn_partition(&labels, 3, 4, 0).unwrap();
        full.validate(labels.len()).unwrap();
        for h in full.class_histograms(&labels, 4) {
            assert_eq!(h, vec![4; 4]);
        }
    }

    #[test]
    fn cn_infeasible() {
        let labels = balanced(10, 5);
        assert!(matches!(cn_partition(&labels, 4, 2, 0), Err(Error::InfeasiblePartition(_))));
        assert!(matches!(cn_partition(&labels, 10, 11, 0), Err(Error::InfeasiblePartition(_))));
        assert!(matches!(cn_partition(&labels, 10, 0, 0), Err(Error::InfeasiblePartition(_))));
    }

    #[test]
    fn jsonl_export() {
        let p = Partition { shards: vec![vec![0, 2], vec![1]] };
        let mut buf = Vec::new();
        p.write_jsonl(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"client\":0,\"indices\":[0,2]}\n{\"client\":1,\"indices\":[1]}\n"
        );
    }
}
