use std::collections::VecDeque;

use serde_json::Value;

use crate::envelope::Envelope;

/// Message types that may be shed when a client falls behind, in the order
/// they are shed. Everything else is always delivered.
pub const DROPPABLE: [&str; 3] = ["point_cloud", "detections", "robot_state"];

/// Per-connection outgoing queue. Assigns the connection's sequence numbers
/// and enforces the drop policy for slow readers.
#[derive(Debug)]
pub struct Outbox {
    queue: VecDeque<Envelope>,
    capacity: usize,
    next_seq: u64,
    dropped: u64,
}

impl Outbox {
    pub fn new(capacity: usize) -> Self {
        Self {
            queue: VecDeque::new(),
            capacity: capacity.max(1),
            next_seq: 1,
            dropped: 0,
        }
    }

    pub fn push(&mut self, kind: &str, timestamp: f64, payload: Value) {
        let env = Envelope::new(kind, self.next_seq, timestamp, payload);
        self.next_seq += 1;
        self.queue.push_back(env);
        while self.queue.len() > self.capacity {
            let victim = DROPPABLE
                .iter()
                .find_map(|kind| self.queue.iter().position(|e| e.kind == *kind));
            match victim {
                Some(i) => {
                    self.queue.remove(i);
                    self.dropped += 1;
                }
                // Only undroppable messages left; let the queue grow.
                None => break,
            }
        }
    }

    pub fn pop(&mut self) -> Option<Envelope> {
        self.queue.pop_front()
    }

    pub fn drain(&mut self) -> Vec<Envelope> {
        self.queue.drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Messages shed so far.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
