use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::nsg::non_self_gradient;
use crate::error::{Error, Result};
use crate::nn::{Matrix, ParamVector};

/// How uploaded prototypes are combined on the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrototypeAgg {
    #[default]
    Mean,
    Sum,
}

/// Server-side bookkeeping for the round loop.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub global_params: ParamVector,
    pub round: usize,
    pub eta_g: f64,
    /// Participants of the most recent round, ascending.
    pub prev_selected: Vec<usize>,
    /// Their deltas; keys always equal `prev_selected`.
    pub prev_deltas: BTreeMap<usize, ParamVector>,
    /// Step applied by the most recent aggregation, `θ^t - θ^{t-1}`.
    pub prev_global_delta: ParamVector,
    pub global_prototypes: Option<Matrix>,
    pub prototype_agg: PrototypeAgg,
}

impl ServerState {
    pub fn new(global_params: ParamVector, eta_g: f64) -> Self {
        let n = global_params.len();
        ServerState {
            global_params,
            round: 0,
            eta_g,
            prev_selected: Vec::new(),
            prev_deltas: BTreeMap::new(),
            prev_global_delta: ParamVector::zeros(n),
            global_prototypes: None,
            prototype_agg: PrototypeAgg::Mean,
        }
    }

    fn check_deltas(&self, deltas: &BTreeMap<usize, ParamVector>) -> Result<()> {
        if deltas.is_empty() {
            return Err(Error::InvalidArgument("aggregation needs at least one delta".into()));
        }
        for d in deltas.values() {
            if d.len() != self.global_params.len() {
                return Err(Error::dims("client delta", self.global_params.len(), d.len()));
            }
        }
        Ok(())
    }

    /// Mean of `deltas`, reduced in ascending client-id order.
    pub fn mean_delta(deltas: &BTreeMap<usize, ParamVector>) -> ParamVector {
        let mut it = deltas.values();
        let mut sum = it.next().expect("non-empty deltas").clone();
        for d in it {
            sum.add_assign(d);
        }
        sum.scale(1.0 / deltas.len() as f64);
        sum
    }

    /// `θ^{t+1} = θ^t + η_g · mean(Δ_k)`.
    pub fn aggregate(&mut self, deltas: BTreeMap<usize, ParamVector>) -> Result<&ParamVector> {
        self.check_deltas(&deltas)?;
        let mut step = Self::mean_delta(&deltas);
        step.scale(self.eta_g);
        self.apply_step(deltas, step)
    }

    /// Adds `step` to the global model and rolls the round history forward.
    pub fn apply_step(
        &mut self,
        deltas: BTreeMap<usize, ParamVector>,
        step: ParamVector,
    ) -> Result<&ParamVector> {
        self.check_deltas(&deltas)?;
        if step.len() != self.global_params.len() {
            return Err(Error::dims("global step", self.global_params.len(), step.len()));
        }
        self.global_params.add_assign(&step);
        if !self.global_params.is_finite() {
            return Err(Error::NonFinite(format!(
                "global model after aggregation at round {}",
                self.round
            )));
        }
        self.prev_selected = deltas.keys().copied().collect();
        self.prev_deltas = deltas;
        self.prev_global_delta = step;
        self.round += 1;
        Ok(&self.global_params)
    }

    pub fn non_self_gradient(&self, client: usize, eta_l: f64) -> Result<ParamVector> {
        non_self_gradient(&self.prev_deltas, client, self.eta_g, eta_l)
    }

    /// Combines uploaded `C × embed_dim` prototype matrices in client-id order.
    pub fn aggregate_prototypes(&mut self, uploads: &BTreeMap<usize, Matrix>) -> Result<&Matrix> {
        let combined = combine_prototypes(uploads.values(), self.prototype_agg)?;
        Ok(self.global_prototypes.insert(combined))
    }

    /// Checks the history invariants that hold after plain aggregation.
    pub fn check_invariants(&self) -> Result<()> {
        if !self.prev_deltas.keys().copied().eq(self.prev_selected.iter().copied()) {
            return Err(Error::StateCorruption(
                "cached deltas do not match last round's participants".into(),
            ));
        }
        if !self.prev_deltas.is_empty() {
            let mut expected = Self::mean_delta(&self.prev_deltas);
            expected.scale(self.eta_g);
            if !expected.bit_eq(&self.prev_global_delta) {
                return Err(Error::StateCorruption(
                    "global delta differs from η_g · mean of cached deltas".into(),
                ));
            }
        }
        Ok(())
    }
}

pub fn combine_prototypes<'a, I>(uploads: I, agg: PrototypeAgg) -> Result<Matrix>
where
    I: IntoIterator<Item = &'a Matrix>,
{
    let mut it = uploads.into_iter();
    let first = it
        .next()
        .ok_or_else(|| Error::InvalidArgument("no prototypes uploaded".into()))?;
    let mut acc = first.clone();
    let mut n = 1usize;
    for m in it {
        if m.rows() != acc.rows() || m.cols() != acc.cols() {
            return Err(Error::dims(
                "prototype upload",
                acc.rows() * acc.cols(),
                m.rows() * m.cols(),
            ));
        }
        for (a, b) in acc.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *a += b;
        }
        n += 1;
    }
    if agg == PrototypeAgg::Mean {
        let inv = 1.0 / n as f64;
        acc.as_mut_slice().iter_mut().for_each(|v| *v *= inv);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::from_vec(v.to_vec())
    }

    fn deltas(items: &[(usize, &[f64])]) -> BTreeMap<usize, ParamVector> {
        items.iter().map(|(k, v)| (*k, pv(v))).collect()
    }

    #[test]
    fn single_client_identity() {
        let theta = pv(&[0.25, -1.5, 3.0]);
        let trained = pv(&[0.5, -1.0, 2.0]);
        let mut s = ServerState::new(theta.clone(), 1.0);
        s.aggregate(deltas(&[(2, trained.sub(&theta).as_slice())])).unwrap();
        assert!(s.global_params.max_abs_diff(&trained) < 1e-15);
        s.check_invariants().unwrap();
        assert_eq!(s.round, 1);
        assert_eq!(s.prev_selected, vec![2]);
    }

    #[test]
    fn frozen_and_cancelling() {
        let theta = pv(&[1.0, 2.0]);
        let mut s = ServerState::new(theta.clone(), 0.0);
        s.aggregate(deltas(&[(0, &[5.0, 5.0])])).unwrap();
        assert_eq!(s.global_params, theta);

        let mut s = ServerState::new(theta.clone(), 1.0);
        s.aggregate(deltas(&[(0, &[0.3, -0.7]), (1, &[-0.3, 0.7])])).unwrap();
        assert_eq!(s.global_params, theta);
        s.check_invariants().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let mut s = ServerState::new(pv(&[0.0, 0.0]), 1.0);
        assert!(s.aggregate(BTreeMap::new()).is_err());
        assert!(s.aggregate(deltas(&[(0, &[1.0])])).is_err());
    }

    #[test]
    fn prototype_aggregation() {
        let p = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 4.0]]).unwrap();
        let mut neg = p.clone();
        neg.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        let mut s = ServerState::new(pv(&[0.0]), 1.0);

        let one: BTreeMap<_, _> = [(3, p.clone())].into_iter().collect();
        assert_eq!(s.aggregate_prototypes(&one).unwrap(), &p);

        let cancel: BTreeMap<_, _> = [(0, p.clone()), (1, neg)].into_iter().collect();
        assert!(s.aggregate_prototypes(&cancel).unwrap().as_slice().iter().all(|&v| v == 0.0));

        let same: BTreeMap<_, _> = (0..3).map(|k| (k, p.clone())).collect();
        assert_eq!(s.aggregate_prototypes(&same).unwrap(), &p);

        s.prototype_agg = PrototypeAgg::Sum;
        let summed = s.aggregate_prototypes(&same).unwrap();
        assert_eq!(summed.get(0, 0), 3.0);

        let bad: BTreeMap<_, _> = [(0, p.clone()), (1, Matrix::zeros(1, 2))].into_iter().collect();
        assert!(s.aggregate_prototypes(&bad).is_err());
    }
}
