//! Schedules of absolute transition times, one entry per node.
//!
//! [`IndexedQueue`] is a 4-ary min-heap with a position map, giving
//! `O(log N)` push, pop, update and removal. [`FlatSchedule`] keeps a plain
//! time array instead: `O(1)` updates and an `O(N)` scan for the minimum,
//! which wins when nearly every node is touched on every event.
//!
//! Both order entries by `(time, node)`, so ties go to the smaller node id.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueueError {
    #[error("node {0} is already scheduled")]
    Duplicate(usize),
    #[error("node {0} is not scheduled")]
    Missing(usize),
    #[error("node {node} out of range for capacity {capacity}")]
    OutOfRange { node: usize, capacity: usize },
    #[error("time {0} is not finite")]
    NonFinite(f64),
    #[error("time {time} precedes the last popped time {last}")]
    InThePast { time: f64, last: f64 },
}

/// The operations the engine needs from a schedule.
pub trait Schedule {
    /// An empty schedule able to hold nodes `0..capacity`.
    fn with_capacity(capacity: usize) -> Self
    where
        Self: Sized;

    fn push(&mut self, node: usize, time: f64) -> Result<(), QueueError>;

    /// Removes and returns the entry with the smallest `(time, node)`.
    fn pop_min(&mut self) -> Option<(usize, f64)>;

    fn peek_min(&self) -> Option<(usize, f64)>;

    fn update(&mut self, node: usize, time: f64) -> Result<(), QueueError>;

    fn remove(&mut self, node: usize) -> Result<(), QueueError>;

    fn contains(&self, node: usize) -> bool;

    fn time_of(&self, node: usize) -> Option<f64>;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Push or update, whichever applies.
    fn schedule(&mut self, node: usize, time: f64) -> Result<(), QueueError> {
        if self.contains(node) {
            self.update(node, time)
        } else {
            self.push(node, time)
        }
    }

    /// Remove if present.
    fn unschedule(&mut self, node: usize) -> Result<(), QueueError> {
        if self.contains(node) {
            self.remove(node)
        } else {
            Ok(())
        }
    }
}

const ABSENT: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Entry {
    time: f64,
    node: u32,
}

impl Entry {
    #[inline]
    fn before(&self, other: &Entry) -> bool {
        self.time < other.time || (self.time == other.time && self.node < other.node)
    }
}

/// Children per heap slot. Siblings are adjacent in memory and the tree is
/// half as deep as a binary heap, so large heaps take fewer cache misses.
const ARITY: usize = 4;

/// Indexed 4-ary min-heap keyed by node id.
#[derive(Clone, Debug)]
pub struct IndexedQueue {
    heap: Vec<Entry>,
    /// `pos[node]` is the node's slot in `heap`, or `ABSENT`.
    pos: Vec<u32>,
    last_popped: f64,
}

impl IndexedQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity < ABSENT as usize, "capacity exceeds u32 node ids");
        Self {
            heap: Vec::new(),
            pos: vec![ABSENT; capacity],
            last_popped: f64::NEG_INFINITY,
        }
    }

    pub fn capacity(&self) -> usize {
        self.pos.len()
    }

    /// Entries in heap order; exposed for invariant checks.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.heap.iter().map(|e| (e.node as usize, e.time))
    }

    fn check(&self, node: usize, time: f64) -> Result<(), QueueError> {
        self.check_node(node)?;
        if !time.is_finite() {
            return Err(QueueError::NonFinite(time));
        }
        if time < self.last_popped {
            return Err(QueueError::InThePast {
                time,
                last: self.last_popped,
            });
        }
        Ok(())
    }

    fn check_node(&self, node: usize) -> Result<(), QueueError> {
        if node >= self.pos.len() {
            Err(QueueError::OutOfRange {
                node,
                capacity: self.pos.len(),
            })
        } else {
            Ok(())
        }
    }

    #[inline]
    fn place(&mut self, slot: usize, entry: Entry) {
        self.pos[entry.node as usize] = slot as u32;
        self.heap[slot] = entry;
    }

    fn sift_up(&mut self, mut slot: usize) {
        let entry = self.heap[slot];
        while slot > 0 {
            let parent = (slot - 1) / ARITY;
            if !entry.before(&self.heap[parent]) {
                break;
            }
            let p = self.heap[parent];
            self.place(slot, p);
            slot = parent;
        }
        self.place(slot, entry);
    }

    fn sift_down(&mut self, mut slot: usize) {
        let entry = self.heap[slot];
        let len = self.heap.len();
        loop {
            let first = ARITY * slot + 1;
            if first >= len {
                break;
            }
            let mut child = first;
            for c in first + 1..(first + ARITY).min(len) {
                if self.heap[c].before(&self.heap[child]) {
                    child = c;
                }
            }
            if !self.heap[child].before(&entry) {
                break;
            }
            let c = self.heap[child];
            self.place(slot, c);
            slot = child;
        }
        self.place(slot, entry);
    }

    /// Detaches the entry at `slot`, restoring the heap property.
    fn take(&mut self, slot: usize) -> Entry {
        let removed = self.heap[slot];
        self.pos[removed.node as usize] = ABSENT;
        let last = self.heap.pop().expect("slot implies non-empty heap");
        if slot < self.heap.len() {
            self.place(slot, last);
            if slot > 0 && last.before(&self.heap[(slot - 1) / ARITY]) {
                self.sift_up(slot);
            } else {
                self.sift_down(slot);
            }
        }
        removed
    }
}

impl Schedule for IndexedQueue {
    fn with_capacity(capacity: usize) -> Self {
        Self::new(capacity)
    }

    fn push(&mut self, node: usize, time: f64) -> Result<(), QueueError> {
        self.check(node, time)?;
        if self.pos[node] != ABSENT {
            return Err(QueueError::Duplicate(node));
        }
        let slot = self.heap.len();
        self.heap.push(Entry {
            time,
            node: node as u32,
        });
        self.pos[node] = slot as u32;
        self.sift_up(slot);
        Ok(())
    }

    fn pop_min(&mut self) -> Option<(usize, f64)> {
        if self.heap.is_empty() {
            return None;
        }
        let e = self.take(0);
        self.last_popped = e.time;
        Some((e.node as usize, e.time))
    }

    fn peek_min(&self) -> Option<(usize, f64)> {
        self.heap.first().map(|e| (e.node as usize, e.time))
    }

    fn update(&mut self, node: usize, time: f64) -> Result<(), QueueError> {
        self.check(node, time)?;
        let slot = self.pos[node];
        if slot == ABSENT {
            return Err(QueueError::Missing(node));
        }
        let slot = slot as usize;
        let old = self.heap[slot];
        self.heap[slot].time = time;
        if self.heap[slot].before(&old) {
            self.sift_up(slot);
        } else {
            self.sift_down(slot);
        }
        Ok(())
    }

    fn remove(&mut self, node: usize) -> Result<(), QueueError> {
        self.check_node(node)?;
        match self.pos[node] {
            ABSENT => Err(QueueError::Missing(node)),
            slot => {
                self.take(slot as usize);
                Ok(())
            }
        }
    }

    #[inline]
    fn contains(&self, node: usize) -> bool {
        self.pos.get(node).is_some_and(|&p| p != ABSENT)
    }

    fn time_of(&self, node: usize) -> Option<f64> {
        match self.pos.get(node) {
            Some(&p) if p != ABSENT => Some(self.heap[p as usize].time),
            _ => None,
        }
    }

    fn len(&self) -> usize {
        self.heap.len()
    }
}

/// Flat per-node time array; absent nodes hold `+∞`.
#[derive(Clone, Debug)]
pub struct FlatSchedule {
    times: Vec<f64>,
    len: usize,
    last_popped: f64,
}

impl FlatSchedule {
    pub fn new(capacity: usize) -> Self {
        Self {
            times: vec![f64::INFINITY; capacity],
            len: 0,
            last_popped: f64::NEG_INFINITY,
        }
    }

    fn check(&self, node: usize, time: f64) -> Result<(), QueueError> {
        if node >= self.times.len() {
            return Err(QueueError::OutOfRange {
                node,
                capacity: self.times.len(),
            });
        }
        if !time.is_finite() {
            return Err(QueueError::NonFinite(time));
        }
        if time < self.last_popped {
            return Err(QueueError::InThePast {
                time,
                last: self.last_popped,
            });
        }
        Ok(())
    }

    fn argmin(&self) -> Option<(usize, f64)> {
        if self.len == 0 {
            return None;
        }
        let mut best = 0;
        let mut best_time = f64::INFINITY;
        // Strict `<` keeps the first, i.e. smallest, node id among ties.
        for (i, &t) in self.times.iter().enumerate() {
            if t < best_time {
                best_time = t;
                best = i;
            }
        }
        Some((best, best_time))
    }
}

impl Schedule for FlatSchedule {
    fn with_capacity(capacity: usize) -> Self {
        Self::new(capacity)
    }

    fn push(&mut self, node: usize, time: f64) -> Result<(), QueueError> {
        self.check(node, time)?;
        if self.times[node].is_finite() {
            return Err(QueueError::Duplicate(node));
        }
        self.times[node] = time;
        self.len += 1;
        Ok(())
    }

    fn pop_min(&mut self) -> Option<(usize, f64)> {
        let (node, time) = self.argmin()?;
        self.times[node] = f64::INFINITY;
        self.len -= 1;
        self.last_popped = time;
        Some((node, time))
    }

    fn peek_min(&self) -> Option<(usize, f64)> {
        self.argmin()
    }

    fn update(&mut self, node: usize, time: f64) -> Result<(), QueueError> {
        self.check(node, time)?;
        if !self.times[node].is_finite() {
            return Err(QueueError::Missing(node));
        }
        self.times[node] = time;
        Ok(())
    }

    fn remove(&mut self, node: usize) -> Result<(), QueueError> {
        match self.times.get(node) {
            None => Err(QueueError::OutOfRange {
                node,
                capacity: self.times.len(),
            }),
            Some(t) if !t.is_finite() => Err(QueueError::Missing(node)),
            Some(_) => {
                self.times[node] = f64::INFINITY;
                self.len -= 1;
                Ok(())
            }
        }
    }

    #[inline]
    fn contains(&self, node: usize) -> bool {
        self.times.get(node).is_some_and(|t| t.is_finite())
    }

    fn time_of(&self, node: usize) -> Option<f64> {
        self.times.get(node).copied().filter(|t| t.is_finite())
    }

    fn len(&self) -> usize {
        self.len
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::{BTreeMap, HashMap};

    fn both() -> [Box<dyn Schedule>; 2] {
        [
            Box::new(IndexedQueue::new(16)),
            Box::new(FlatSchedule::new(16)),
        ]
    }

    #[test]
    fn pops_in_time_order() {
        for mut q in both() {
            q.push(2, 5.0).unwrap();
            q.push(7, 1.0).unwrap();
            assert_eq!(q.pop_min(), Some((7, 1.0)));
            assert_eq!(q.pop_min(), Some((2, 5.0)));
            assert_eq!(q.pop_min(), None);
        }
    }

    #[test]
    fn duplicate_and_non_finite_rejected() {
        for mut q in both() {
            q.push(3, 1.0).unwrap();
            assert_eq!(q.push(3, 2.0), Err(QueueError::Duplicate(3)));
            assert_eq!(
                q.push(4, f64::INFINITY),
                Err(QueueError::NonFinite(f64::INFINITY))
            );
            assert!(matches!(q.push(5, f64::NAN), Err(QueueError::NonFinite(_))));
            assert!(matches!(
                q.push(99, 1.0),
                Err(QueueError::OutOfRange { .. })
            ));
            assert_eq!(q.len(), 1);
        }
    }

    #[test]
    fn ties_break_by_node_id() {
        for mut q in both() {
            q.push(2, 3.0).unwrap();
            q.push(1, 3.0).unwrap();
            assert_eq!(q.pop_min(), Some((1, 3.0)));
            q.push(0, 9.0).unwrap();
            q.push(5, 4.0).unwrap();
            q.update(0, 3.0).unwrap();
            assert_eq!(q.pop_min(), Some((0, 3.0)));
            assert_eq!(q.pop_min(), Some((2, 3.0)));
        }
    }

    #[test]
    fn single_entry() {
        for mut q in both() {
            q.push(4, 0.5).unwrap();
            assert_eq!(q.pop_min(), Some((4, 0.5)));
            assert!(q.is_empty());
        }
    }

    #[test]
    fn update_moves_entry() {
        for mut q in both() {
            q.push(1, 5.0).unwrap();
            q.push(2, 9.0).unwrap();
            q.update(2, 1.0).unwrap();
            assert_eq!(q.peek_min(), Some((2, 1.0)));
            assert_eq!(q.update(3, 1.0), Err(QueueError::Missing(3)));
        }
    }

    #[test]
    fn remove_then_push_again() {
        for mut q in both() {
            q.push(1, 2.0).unwrap();
            q.remove(1).unwrap();
            assert!(q.is_empty());
            assert_eq!(q.remove(1), Err(QueueError::Missing(1)));
            q.push(1, 3.0).unwrap();
            assert_eq!(q.time_of(1), Some(3.0));
        }
    }

    #[test]
    fn times_before_last_pop_rejected() {
        for mut q in both() {
            q.push(0, 2.0).unwrap();
            q.push(1, 4.0).unwrap();
            q.pop_min();
            assert!(matches!(q.push(2, 1.0), Err(QueueError::InThePast { .. })));
            assert!(matches!(
                q.update(1, 1.9),
                Err(QueueError::InThePast { .. })
            ));
            q.push(2, 2.0).unwrap();
        }
    }

    #[test]
    fn random_pushes_pop_sorted() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 100.0).collect();
        let mut q = IndexedQueue::new(n);
        for (i, &t) in times.iter().enumerate() {
            q.push(i, t).unwrap();
        }
        let mut expected: Vec<(f64, usize)> = times.iter().copied().zip(0..).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (t, i) in expected {
            assert_eq!(q.pop_min(), Some((i, t)));
        }
    }

    #[derive(Clone, Debug)]
    enum Op {
        Push(usize, f64),
        Update(usize, f64),
        Remove(usize),
        Pop,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0usize..40, 0.0f64..10.0).prop_map(|(n, t)| Op::Push(n, t)),
            (0usize..40, 0.0f64..10.0).prop_map(|(n, t)| Op::Update(n, t)),
            (0usize..40).prop_map(Op::Remove),
            Just(Op::Pop),
        ]
    }

    proptest! {
        #[test]
        fn heap_and_flat_match_ordered_map(ops in prop::collection::vec(op(), 1..400)) {
            let mut heap = IndexedQueue::new(40);
            let mut flat = FlatSchedule::new(40);
            let mut oracle: BTreeMap<(u64, usize), ()> = BTreeMap::new();
            let mut times: HashMap<usize, f64> = HashMap::new();
            let mut floor = 0.0f64;
            for op in ops {
                match op {
                    Op::Push(n, dt) | Op::Update(n, dt) => {
                        let t = floor + dt;
                        let present = times.contains_key(&n);
                        if present {
                            heap.update(n, t).unwrap();
                            flat.update(n, t).unwrap();
                            oracle.remove(&(times[&n].to_bits(), n));
                        } else {
                            heap.push(n, t).unwrap();
                            flat.push(n, t).unwrap();
                        }
                        oracle.insert((t.to_bits(), n), ());
                        times.insert(n, t);
                    }
                    Op::Remove(n) => {
                        let expect_ok = times.contains_key(&n);
                        prop_assert_eq!(heap.remove(n).is_ok(), expect_ok);
                        prop_assert_eq!(flat.remove(n).is_ok(), expect_ok);
                        if let Some(t) = times.remove(&n) {
                            oracle.remove(&(t.to_bits(), n));
                        }
                    }
                    Op::Pop => {
                        let expected = oracle.pop_first().map(|((bits, n), _)| (n, f64::from_bits(bits)));
                        prop_assert_eq!(heap.pop_min(), expected);
                        prop_assert_eq!(flat.pop_min(), expected);
                        if let Some((n, t)) = expected {
                            times.remove(&n);
                            floor = t;
                        }
                    }
                }
                prop_assert_eq!(heap.len(), oracle.len());
                prop_assert_eq!(flat.len(), oracle.len());
                for (&n, &t) in &times {
                    prop_assert_eq!(heap.time_of(n), Some(t));
                }
            }
        }
    }
}
