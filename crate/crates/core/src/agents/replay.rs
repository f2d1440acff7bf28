use alloc::vec::Vec;

use rand::Rng;

use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecord {
    pub state: Vec<f64>,
    /// Action the agent emitted from `state`.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// A minibatch in row-per-record form.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_states: Matrix,
    pub terminals: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_records(records: &[ReplayRecord]) -> Self {
        let rows = |f: fn(&ReplayRecord) -> &[f64]| {
            Matrix::from_rows(&records.iter().map(f).collect::<Vec<_>>())
        };
        Self {
            states: rows(|r| &r.state),
            actions: rows(|r| &r.action),
            rewards: records.iter().map(|r| r.reward).collect(),
            next_states: rows(|r| &r.next_state),
            terminals: records.iter().map(|r| r.terminal).collect(),
        }
    }
}

/// Bounded circular store; once full, new records overwrite the oldest.
#[derive(Debug, Clone)]
pub struct ReplayMemory {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    terminals: Vec<bool>,
    cursor: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize, state_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            state_dim,
            action_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            terminals: Vec::new(),
            cursor: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, record: ReplayRecord) {
        assert_eq!(record.state.len(), self.state_dim, "state dimension");
        assert_eq!(record.next_state.len(), self.state_dim, "state dimension");
        assert_eq!(record.action.len(), self.action_dim, "action dimension");
        if self.len() < self.capacity {
            self.states.extend_from_slice(&record.state);
            self.actions.extend_from_slice(&record.action);
            self.rewards.push(record.reward);
            self.next_states.extend_from_slice(&record.next_state);
            self.terminals.push(record.terminal);
        } else {
            let i = self.cursor;
            let (ds, da) = (self.state_dim, self.action_dim);
            self.states[i * ds..(i + 1) * ds].copy_from_slice(&record.state);
            self.actions[i * da..(i + 1) * da].copy_from_slice(&record.action);
            self.rewards[i] = record.reward;
            self.next_states[i * ds..(i + 1) * ds].copy_from_slice(&record.next_state);
            self.terminals[i] = record.terminal;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> ReplayRecord {
        let (ds, da) = (self.state_dim, self.action_dim);
        ReplayRecord {
            state: self.states[i * ds..(i + 1) * ds].to_vec(),
            action: self.actions[i * da..(i + 1) * da].to_vec(),
            reward: self.rewards[i],
            next_state: self.next_states[i * ds..(i + 1) * ds].to_vec(),
            terminal: self.terminals[i],
        }
    }

    /// Draw `n` stored indices uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.is_empty(), "sampling from an empty replay memory");
        (0..n).map(|_| rng.random_range(0..self.len())).collect()
    }

    pub fn batch(&self, indices: &[usize]) -> Batch {
        let (ds, da) = (self.state_dim, self.action_dim);
        let gather = |src: &[f64], width: usize| {
            let mut data = Vec::with_capacity(indices.len() * width);
            for &i in indices {
                data.extend_from_slice(&src[i * width..(i + 1) * width]);
            }
            Matrix::from_vec(indices.len(), width, data)
        };
        Batch {
            states: gather(&self.states, ds),
            actions: gather(&self.actions, da),
            rewards: indices.iter().map(|&i| self.rewards[i]).collect(),
            next_states: gather(&self.next_states, ds),
            terminals: indices.iter().map(|&i| self.terminals[i]).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch {
        let indices = self.sample_indices(n, rng);
        self.batch(&indices)
    }
}
