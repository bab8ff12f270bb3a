use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::model::{DomainAdvertisement, PeerId, SspId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    /// All peers have joined; link and group the super-peers.
    Overlay,
    WarmupStart,
    WarmupEnd,
    MeasurementStart,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    PeerJoin(Box<DomainAdvertisement>),
    QuerySubmit {
        peer: PeerId,
        ordinal: usize,
    },
    /// A random surviving super-peer leaves.
    SpLeave,
    InduceIndex(SspId),
    PhaseMarker(Phase),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: u64,
    pub seq: u64,
    pub kind: EventKind,
}

/// Min-queue on `(time, seq)`; `seq` is assigned at scheduling time, so
/// events at the same tick leave in the order they were scheduled.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<(u64, u64, usize)>>,
    slots: Vec<Option<EventKind>>,
    next_seq: u64,
    now: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Schedules `kind` at `time`, clamped to the current clock.
    pub fn schedule(&mut self, time: u64, kind: EventKind) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        let slot = self.slots.len();
        self.slots.push(Some(kind));
        self.heap.push(Reverse((time.max(self.now), seq, slot)));
        seq
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse((time, seq, slot)) = self.heap.pop()?;
        debug_assert!(time >= self.now);
        self.now = time;
        let kind = self.slots[slot].take().expect("each slot is popped once");
        Some(Event { time, seq, kind })
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
