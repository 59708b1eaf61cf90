//! Per-line LRU engines: a set-associative cache and the naive
//! fully-associative reference list used as an oracle.

use super::{Accounting, LineCache};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    line: u64,
    dirty: bool,
    tensor: usize,
}

/// One recency list, most recent first.
fn touch(list: &mut Vec<Entry>, ways: usize, line: u64, write: bool, tensor: usize, acct: &mut Accounting) {
    match list.iter().position(|e| e.line == line) {
        Some(pos) => {
            let mut e = list.remove(pos);
            e.dirty |= write;
            list.insert(0, e);
            acct.hits += 1;
        }
        None => {
            acct.miss(tensor, 1, write);
            list.insert(0, Entry { line, dirty: write, tensor });
            if list.len() > ways {
                let victim = list.pop().expect("over capacity");
                if victim.dirty {
                    acct.writeback(victim.tensor, 1);
                }
            }
        }
    }
}

fn flush_list(list: &mut [Entry], acct: &mut Accounting) {
    for e in list.iter_mut().filter(|e| e.dirty) {
        acct.writeback(e.tensor, 1);
        e.dirty = false;
    }
}

/// `k`-way set-associative LRU; set index is the line number modulo the set count.
#[derive(Debug, Clone)]
pub struct SetAssociativeLru {
    ways: usize,
    sets: Vec<Vec<Entry>>,
}

impl SetAssociativeLru {
    pub fn new(capacity_lines: u64, ways: usize) -> Self {
        let n = (capacity_lines / ways as u64) as usize;
        Self { ways, sets: vec![Vec::with_capacity(ways); n] }
    }
}

impl LineCache for SetAssociativeLru {
    fn access(&mut self, first: u64, count: u64, write: bool, tensor: usize, acct: &mut Accounting) {
        let n = self.sets.len() as u64;
        for line in first..first + count {
            touch(&mut self.sets[(line % n) as usize], self.ways, line, write, tensor, acct);
        }
    }

    fn flush(&mut self, acct: &mut Accounting) {
        for set in &mut self.sets {
            flush_list(set, acct);
        }
    }
}

/// Single linked recency list searched linearly. Slow and obviously correct.
#[derive(Debug, Clone)]
pub struct ReferenceLru {
    capacity: usize,
    list: Vec<Entry>,
}

impl ReferenceLru {
    pub fn new(capacity_lines: u64) -> Self {
        Self { capacity: capacity_lines as usize, list: Vec::new() }
    }
}

impl LineCache for ReferenceLru {
    fn access(&mut self, first: u64, count: u64, write: bool, tensor: usize, acct: &mut Accounting) {
        for line in first..first + count {
            touch(&mut self.list, self.capacity, line, write, tensor, acct);
        }
    }

    fn flush(&mut self, acct: &mut Accounting) {
        flush_list(&mut self.list, acct);
    }
}
