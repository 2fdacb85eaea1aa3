use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::model::{ElementId, OpId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LockMode {
    Shared,
    Exclusive,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
enum Held {
    #[default]
    Free,
    Shared(BTreeSet<OpId>),
    Exclusive(OpId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Entry {
    held: Held,
    queue: VecDeque<(OpId, LockMode)>,
}

/// Reader-writer locks with a FIFO wait queue per element.
///
/// A request is granted when it is compatible with the current holders and
/// nobody else waits ahead of it.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LockManager {
    entries: BTreeMap<ElementId, Entry>,
}

impl LockManager {
    pub fn new() -> Self {
        Self::default()
    }

    fn grantable(&self, elem: ElementId, owner: OpId, mode: LockMode) -> bool {
        let Some(e) = self.entries.get(&elem) else {
            return true;
        };
        let compatible = match (&e.held, mode) {
            (Held::Free, _) => true,
            (Held::Shared(_), LockMode::Shared) => true,
            (Held::Shared(s), LockMode::Exclusive) => s.len() == 1 && s.contains(&owner),
            (Held::Exclusive(o), _) => *o == owner,
        };
        // a holder re-requesting its own lock does not queue behind waiters
        let reentrant = match &e.held {
            Held::Exclusive(o) => *o == owner,
            Held::Shared(s) => s.contains(&owner),
            Held::Free => false,
        };
        compatible && (reentrant || e.queue.front().is_none_or(|(o, _)| *o == owner))
    }

    fn grant(&mut self, elem: ElementId, owner: OpId, mode: LockMode) {
        let e = self.entries.entry(elem).or_default();
        if e.queue.front().is_some_and(|(o, _)| *o == owner) {
            e.queue.pop_front();
        }
        e.held = match (std::mem::take(&mut e.held), mode) {
            (Held::Exclusive(o), _) => Held::Exclusive(o),
            (_, LockMode::Exclusive) => Held::Exclusive(owner),
            (Held::Shared(mut s), LockMode::Shared) => {
                s.insert(owner);
                Held::Shared(s)
            }
            (Held::Free, LockMode::Shared) => Held::Shared(BTreeSet::from([owner])),
        };
    }

    /// Grants the lock or enqueues the requester (once) and returns false.
    pub fn acquire(&mut self, elem: ElementId, owner: OpId, mode: LockMode) -> bool {
        if self.grantable(elem, owner, mode) {
            self.grant(elem, owner, mode);
            return true;
        }
        let q = &mut self.entries.entry(elem).or_default().queue;
        if !q.iter().any(|(o, _)| *o == owner) {
            q.push_back((owner, mode));
        }
        false
    }

    /// All-or-nothing exclusive acquisition. On failure nothing changes and
    /// the first unavailable element is returned.
    pub fn try_acquire_all(&mut self, elems: &[ElementId], owner: OpId) -> Result<(), ElementId> {
        if let Some(bad) = elems.iter().find(|e| !self.grantable(**e, owner, LockMode::Exclusive)) {
            return Err(*bad);
        }
        for e in elems {
            self.grant(*e, owner, LockMode::Exclusive);
        }
        Ok(())
    }

    pub fn release(&mut self, elem: ElementId, owner: OpId) {
        let Some(e) = self.entries.get_mut(&elem) else {
            return;
        };
        e.held = match std::mem::take(&mut e.held) {
            Held::Exclusive(o) if o == owner => Held::Free,
            Held::Shared(mut s) => {
                s.remove(&owner);
                if s.is_empty() {
                    Held::Free
                } else {
                    Held::Shared(s)
                }
            }
            other => other,
        };
        if e.held == Held::Free && e.queue.is_empty() {
            self.entries.remove(&elem);
        }
    }

    /// Drops any queue entries of `owner`.
    pub fn forget(&mut self, owner: OpId) {
        for e in self.entries.values_mut() {
            e.queue.retain(|(o, _)| *o != owner);
        }
        self.entries.retain(|_, e| e.held != Held::Free || !e.queue.is_empty());
    }

    pub fn holds(&self, elem: ElementId, owner: OpId) -> bool {
        match self.entries.get(&elem).map(|e| &e.held) {
            Some(Held::Shared(s)) => s.contains(&owner),
            Some(Held::Exclusive(o)) => *o == owner,
            _ => false,
        }
    }

    pub fn held_by(&self, owner: OpId) -> Vec<ElementId> {
        self.entries.keys().copied().filter(|e| self.holds(*e, owner)).collect()
    }

    pub fn is_quiescent(&self) -> bool {
        self.entries.is_empty()
    }

    /// Structural invariants: no empty shared sets, no owner both holding
    /// and waiting on one element.
    pub fn audit(&self) -> bool {
        self.entries.values().all(|e| {
            let holders: BTreeSet<OpId> = match &e.held {
                Held::Free => BTreeSet::new(),
                Held::Shared(s) => {
                    if s.is_empty() {
                        return false;
                    }
                    s.clone()
                }
                Held::Exclusive(o) => BTreeSet::from([*o]),
            };
            let waiting: BTreeSet<OpId> = e.queue.iter().map(|q| q.0).collect();
            waiting.len() == e.queue.len() && holders.is_disjoint(&waiting)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: ElementId = ElementId(3);
    const A: OpId = OpId(1);
    const B: OpId = OpId(2);
    const C: OpId = OpId(3);

    #[test]
    fn holder_reacquires_past_waiters() {
        let mut m = LockManager::new();
        assert!(m.acquire(X, A, LockMode::Exclusive));
        assert!(!m.acquire(X, B, LockMode::Exclusive));
        assert!(m.acquire(X, A, LockMode::Exclusive));
        assert_eq!(m.try_acquire_all(&[X], A), Ok(()));
        assert_eq!(m.try_acquire_all(&[X], C), Err(X));
        m.release(X, A);
        assert!(m.acquire(X, B, LockMode::Exclusive));
    }

    #[test]
    fn shared_and_exclusive_exclude_each_other() {
        let mut m = LockManager::new();
        assert!(m.acquire(X, A, LockMode::Shared));
        assert!(m.acquire(X, B, LockMode::Shared));
        assert!(!m.acquire(X, C, LockMode::Exclusive));
        m.release(X, A);
        assert!(!m.acquire(X, C, LockMode::Exclusive));
        m.release(X, B);
        assert!(m.acquire(X, C, LockMode::Exclusive));
        assert!(m.acquire(X, C, LockMode::Exclusive), "re-entrant");
        assert!(!m.acquire(X, A, LockMode::Shared));
        assert!(m.audit());
    }

    #[test]
    fn queue_is_fifo() {
        let mut m = LockManager::new();
        assert!(m.acquire(X, A, LockMode::Exclusive));
        assert!(!m.acquire(X, B, LockMode::Exclusive));
        assert!(!m.acquire(X, C, LockMode::Shared));
        m.release(X, A);
        // C is compatible but B waits ahead of it
        assert!(!m.acquire(X, C, LockMode::Shared));
        assert!(m.acquire(X, B, LockMode::Exclusive));
        m.release(X, B);
        assert!(m.acquire(X, C, LockMode::Shared));
        m.release(X, C);
        assert!(m.is_quiescent());
    }

    #[test]
    fn all_or_nothing() {
        let mut m = LockManager::new();
        let y = ElementId(4);
        assert!(m.acquire(y, B, LockMode::Shared));
        assert_eq!(m.try_acquire_all(&[X, y], A), Err(y));
        assert!(!m.holds(X, A));
        m.release(y, B);
        assert_eq!(m.try_acquire_all(&[X, y], A), Ok(()));
        assert_eq!(m.held_by(A), vec![X, y]);
    }
}
