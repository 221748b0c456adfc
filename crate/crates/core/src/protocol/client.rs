use crate::nn::ParamVector;
use crate::rng::{self, SimRng, Stream};

/// Per-client state that persists across rounds.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: usize,
    pub shard: Vec<usize>,
    /// Δ_k from this client's most recent participation.
    pub last_delta: Option<ParamVector>,
    pub last_participation_round: Option<usize>,
    /// Reset to zero at the start of every local round.
    pub momentum_buffer: ParamVector,
    /// SCAFFOLD client control variate, created on first use.
    pub control_variate: Option<ParamVector>,
    pub rng: SimRng,
    pub surrogate_rng: SimRng,
}

impl ClientState {
    pub fn new(id: usize, shard: Vec<usize>, num_params: usize, training_seed: u64) -> Self {
        ClientState {
            id,
            shard,
            last_delta: None,
            last_participation_round: None,
            momentum_buffer: ParamVector::zeros(num_params),
            control_variate: None,
            rng: rng::stream(training_seed, Stream::Client(id)),
            surrogate_rng: rng::stream(training_seed, Stream::ClientSurrogate(id)),
        }
    }

    pub fn record_participation(&mut self, round: usize, delta: ParamVector) {
        self.last_delta = Some(delta);
        self.last_participation_round = Some(round);
    }

    pub fn selected_in(&self, round: usize) -> bool {
        self.last_participation_round == Some(round)
    }

    pub fn is_consistent(&self) -> bool {
        self.last_delta.is_some() == self.last_participation_round.is_some()
    }
}
