use std::marker::PhantomData;

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<A> {
    pub state: Vec<f64>,
    pub action: A,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// Action types the buffer can store as a fixed-width row of floats.
pub trait FlatAction: Clone {
    fn width(&self) -> usize;
    fn write(&self, out: &mut [f64]);
    fn read(row: &[f64]) -> Self;
}

impl FlatAction for usize {
    fn width(&self) -> usize {
        1
    }

    fn write(&self, out: &mut [f64]) {
        out[0] = *self as f64;
    }

    fn read(row: &[f64]) -> Self {
        row[0] as usize
    }
}

impl FlatAction for Vec<f64> {
    fn width(&self) -> usize {
        self.len()
    }

    fn write(&self, out: &mut [f64]) {
        out.copy_from_slice(self);
    }

    fn read(row: &[f64]) -> Self {
        row.to_vec()
    }
}

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
///
/// Transitions live in flat row-major arrays. One small allocation per stored
/// transition, interleaved with the large minibatch temporaries, fragments
/// the heap badly over a long run.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<A> {
    capacity: usize,
    state_dim: usize,
    action_dim: usize,
    len: usize,
    states: Vec<f64>,
    next_states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next: usize,
    _action: PhantomData<A>,
}

/// Row-major minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<A> {
    pub size: usize,
    pub states: Vec<f64>,
    pub actions: Vec<A>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
}

impl<A: FlatAction> ReplayBuffer<A> {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity: capacity.max(1),
            state_dim: 0,
            action_dim: 0,
            len: 0,
            states: Vec::new(),
            next_states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next: 0,
            _action: PhantomData,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Panics if the state or action width differs from the first stored
    /// transition.
    pub fn push(&mut self, t: Transition<A>) {
        if self.len == 0 {
            self.state_dim = t.state.len();
            self.action_dim = t.action.width();
        }
        let (d, k) = (self.state_dim, self.action_dim);
        assert!(
            t.state.len() == d && t.next_state.len() == d && t.action.width() == k,
            "replay widths {}/{}/{}, buffer holds {d}/{d}/{k}",
            t.state.len(),
            t.next_state.len(),
            t.action.width()
        );
        if self.len < self.capacity {
            if self.states.capacity() == 0 {
                let n = self.capacity.min(1 << 20);
                self.states.reserve_exact(n * d);
                self.next_states.reserve_exact(n * d);
                self.actions.reserve_exact(n * k);
                self.rewards.reserve_exact(n);
            }
            self.states.extend_from_slice(&t.state);
            self.next_states.extend_from_slice(&t.next_state);
            self.actions.resize((self.len + 1) * k, 0.0);
            t.action.write(&mut self.actions[self.len * k..]);
            self.rewards.push(t.reward);
            self.len += 1;
        } else {
            let i = self.next;
            self.states[i * d..(i + 1) * d].copy_from_slice(&t.state);
            self.next_states[i * d..(i + 1) * d].copy_from_slice(&t.next_state);
            t.action.write(&mut self.actions[i * k..(i + 1) * k]);
            self.rewards[i] = t.reward;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn sample_indices(&self, batch: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        if self.len < batch || batch == 0 {
            return Err(Error::BufferUnderflow { len: self.len, batch });
        }
        Ok((0..batch).map(|_| rng.random_range(0..self.len)).collect())
    }

    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Result<Batch<A>> {
        let idx = self.sample_indices(batch, rng)?;
        let (d, k) = (self.state_dim, self.action_dim);
        let mut b = Batch {
            size: batch,
            states: Vec::with_capacity(batch * d),
            actions: Vec::with_capacity(batch),
            rewards: Vec::with_capacity(batch),
            next_states: Vec::with_capacity(batch * d),
        };
        for i in idx {
            b.states.extend_from_slice(&self.states[i * d..(i + 1) * d]);
            b.actions.push(A::read(&self.actions[i * k..(i + 1) * k]));
            b.rewards.push(self.rewards[i]);
            b.next_states.extend_from_slice(&self.next_states[i * d..(i + 1) * d]);
        }
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn t(i: usize) -> Transition<usize> {
        Transition {
            state: vec![i as f64],
            action: i,
            reward: -(i as f64),
            next_state: vec![i as f64 + 1.0],
        }
    }

    #[test]
    fn ring_never_exceeds_capacity() {
        let mut b = ReplayBuffer::new(5);
        for i in 0..12 {
            b.push(t(i));
            assert!(b.len() <= 5);
        }
        let mut held: Vec<usize> = b.actions.iter().map(|&a| a as usize).collect();
        held.sort();
        assert_eq!(held, vec![7, 8, 9, 10, 11]);
    }

    #[test]
    fn underflow() {
        let mut b = ReplayBuffer::new(10);
        b.push(t(0));
        let mut rng = seeded(0);
        assert!(matches!(b.sample(2, &mut rng), Err(Error::BufferUnderflow { len: 1, batch: 2 })));
        assert!(b.sample(1, &mut rng).is_ok());
    }

    #[test]
    fn batch_rows_line_up() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..10 {
            b.push(t(i));
        }
        let s = b.sample(4, &mut seeded(1)).unwrap();
        for k in 0..4 {
            let a = s.actions[k] as f64;
            assert_eq!(s.states[k], a);
            assert_eq!(s.rewards[k], -a);
            assert_eq!(s.next_states[k], a + 1.0);
        }
    }

    #[test]
    fn sampling_is_uniform() {
        let mut b = ReplayBuffer::new(100);
        for i in 0..100 {
            b.push(t(i));
        }
        let mut rng = seeded(2);
        let mut counts = [0usize; 100];
        for _ in 0..1000 {
            for i in b.sample_indices(100, &mut rng).unwrap() {
                counts[i] += 1;
            }
        }
        let e = 1000.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // χ²₉₉ upper 0.001 quantile.
        assert!(chi2 < 148.23, "{chi2}");
    }
}
