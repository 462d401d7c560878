//! FIFO queue over shared values with a public head and a possibly secret tail.

use super::ops::{index_vector, vec_write_with};
use super::{MpcError, Session, SharedValue, SharedVector};

#[derive(Debug, Clone)]
enum Tail {
    Public(usize),
    Secret(SharedValue),
}

/// Oblivious FIFO of fixed capacity.
///
/// Unconditional pushes keep the tail public. The first conditional push makes
/// the tail secret: later pushes write at a secret position through an index
/// vector, so the access pattern is independent of the condition bits. Slots
/// beyond the tail hold 0, so popping an exhausted queue yields 0.
///
/// With a secret tail the caller guarantees that no more than `capacity`
/// elements are ever pushed with a true condition; writes past the end are
/// dropped.
#[derive(Debug, Clone)]
pub struct ObliviousQueue {
    slots: SharedVector,
    head: usize,
    tail: Tail,
}

impl ObliviousQueue {
    pub fn new(s: &Session, capacity: usize) -> Self {
        Self {
            slots: s.zeros(capacity),
            head: 0,
            tail: Tail::Public(0),
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    /// Number of pops so far.
    pub fn head(&self) -> usize {
        self.head
    }

    pub fn has_secret_tail(&self) -> bool {
        matches!(self.tail, Tail::Secret(_))
    }

    pub fn push(&mut self, s: &mut Session, x: SharedValue) -> Result<(), MpcError> {
        match self.tail {
            Tail::Public(t) => {
                if t >= self.capacity() {
                    return Err(MpcError::QueueCapacity(self.capacity()));
                }
                self.slots[t] = x;
                self.tail = Tail::Public(t + 1);
                Ok(())
            }
            Tail::Secret(_) => {
                let one = s.constant(1);
                self.push_zeroed(s, one, x)
            }
        }
    }

    /// Appends `x` when `cond` is 1; otherwise leaves the queue unchanged.
    pub fn push_if(&mut self, s: &mut Session, cond: SharedValue, x: SharedValue) -> Result<(), MpcError> {
        let gated = s.mul(cond, x)?;
        self.push_zeroed(s, cond, gated)
    }

    /// Like [`ObliviousQueue::push_if`] for an `x` already known to be 0 when
    /// `cond` is 0, which saves a multiplication.
    pub fn push_zeroed(&mut self, s: &mut Session, cond: SharedValue, x: SharedValue) -> Result<(), MpcError> {
        let pos = self.tail_position(s);
        let ind = index_vector(s, pos, self.capacity())?;
        // writing a zero at the tail is harmless: that slot is still empty
        let slots = vec_write_with(s, &self.slots, &ind, x)?;
        self.commit_push(s, slots, cond);
        Ok(())
    }

    /// 1-based position the next push writes to.
    pub(crate) fn tail_position(&self, s: &Session) -> SharedValue {
        match self.tail {
            Tail::Public(t) => s.constant(t as u64 + 1),
            Tail::Secret(t) => t.add_public(s.element(1)),
        }
    }

    /// Completes a conditional push whose slot write was done by the caller.
    pub(crate) fn commit_push(&mut self, s: &Session, slots: SharedVector, cond: SharedValue) {
        debug_assert_eq!(slots.len(), self.slots.len());
        self.slots = slots;
        let tail = match self.tail {
            Tail::Public(t) => s.constant(t as u64),
            Tail::Secret(t) => t,
        };
        self.tail = Tail::Secret(tail + cond);
    }

    pub fn pop(&mut self, s: &Session) -> SharedValue {
        let v = self.slots.get(self.head).copied().unwrap_or_else(|| s.zero());
        self.head += 1;
        v
    }

    /// Raw slot shares, for inspection in tests.
    pub fn slots(&self) -> &SharedVector {
        &self.slots
    }
}
