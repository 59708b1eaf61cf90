//! Fully-associative LRU over line ranges.
//!
//! The recency stack is stored as segments of consecutive lines. Every access
//! of a contiguous range creates one recency group (a stamp); inside a group,
//! higher addresses are more recent because ranges are walked in ascending
//! order. Whether a line hits depends only on its stack depth, and for a piece
//! of the accessed range that lies inside one old segment the depth is the
//! same for every line of the piece, so a multi-megabyte sweep costs a handful
//! of map operations instead of one per line.

use std::collections::{BTreeMap, BTreeSet};

use super::{Accounting, LineCache};

#[derive(Debug, Clone, Copy)]
struct Segment {
    end: u64,
    stamp: u64,
    dirty: bool,
    tensor: usize,
}

/// Lines per stamp, with prefix sums.
#[derive(Debug, Clone)]
struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(size: usize) -> Self {
        Self { tree: vec![0; size + 1] }
    }

    fn size(&self) -> usize {
        self.tree.len() - 1
    }

    fn add(&mut self, idx: u64, delta: i64) {
        let mut i = idx as usize + 1;
        while i < self.tree.len() {
            self.tree[i] = self.tree[i].wrapping_add(delta as u64);
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over stamps `0..=idx`.
    fn prefix(&self, idx: u64) -> u64 {
        let mut i = idx as usize + 1;
        let mut sum = 0u64;
        while i > 0 {
            sum = sum.wrapping_add(self.tree[i]);
            i &= i - 1;
        }
        sum
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    start: u64,
    end: u64,
    /// `(segment start, segment)` of the resident segment holding the piece.
    resident: Option<(u64, Segment)>,
}

#[derive(Debug, Clone)]
pub struct RangeLru {
    capacity: u64,
    by_addr: BTreeMap<u64, Segment>,
    by_age: BTreeSet<(u64, u64)>,
    counts: Fenwick,
    total: u64,
    next_stamp: u64,
}

const MIN_STAMPS: usize = 1 << 12;

impl RangeLru {
    pub fn new(capacity_lines: u64) -> Self {
        Self {
            capacity: capacity_lines,
            by_addr: BTreeMap::new(),
            by_age: BTreeSet::new(),
            counts: Fenwick::new(MIN_STAMPS),
            total: 0,
            next_stamp: 0,
        }
    }

    pub fn resident_lines(&self) -> u64 {
        self.total
    }

    fn insert(&mut self, start: u64, seg: Segment) {
        debug_assert!(start < seg.end);
        self.by_addr.insert(start, seg);
        self.by_age.insert((seg.stamp, start));
        self.counts.add(seg.stamp, (seg.end - start) as i64);
        self.total += seg.end - start;
    }

    fn remove(&mut self, start: u64) -> Segment {
        let seg = self.by_addr.remove(&start).expect("segment exists");
        self.by_age.remove(&(seg.stamp, start));
        self.counts.add(seg.stamp, -((seg.end - start) as i64));
        self.total -= seg.end - start;
        seg
    }

    /// Renumbers live stamps densely once the stamp space is exhausted.
    fn compact(&mut self) {
        let mut remap = BTreeMap::new();
        for &(stamp, _) in &self.by_age {
            let next = remap.len() as u64;
            remap.entry(stamp).or_insert(next);
        }
        let live = remap.len();
        let mut counts = Fenwick::new((4 * live).max(MIN_STAMPS));
        let mut by_age = BTreeSet::new();
        for (&start, seg) in self.by_addr.iter_mut() {
            seg.stamp = remap[&seg.stamp];
            by_age.insert((seg.stamp, start));
            counts.add(seg.stamp, (seg.end - start) as i64);
        }
        self.by_age = by_age;
        self.counts = counts;
        self.next_stamp = live as u64;
    }

    fn fresh_stamp(&mut self) -> u64 {
        if self.next_stamp as usize >= self.counts.size() {
            self.compact();
        }
        let s = self.next_stamp;
        self.next_stamp += 1;
        s
    }

    fn pieces(&self, start: u64, end: u64) -> Vec<Piece> {
        let mut overlapping: Vec<(u64, Segment)> =
            self.by_addr.range(..end).rev().take_while(|(_, seg)| seg.end > start).map(|(&s, &seg)| (s, seg)).collect();
        overlapping.reverse();
        let mut out = Vec::with_capacity(2 * overlapping.len() + 1);
        let mut cur = start;
        for (s, seg) in overlapping {
            if s > cur {
                out.push(Piece { start: cur, end: s, resident: None });
            }
            let piece_end = seg.end.min(end);
            out.push(Piece { start: cur.max(s), end: piece_end, resident: Some((s, seg)) });
            cur = piece_end;
        }
        if cur < end {
            out.push(Piece { start: cur, end, resident: None });
        }
        out
    }

    /// Lines of the segment's group stacked above `line`, excluding other groups.
    fn within_group_above(&self, seg: &Segment, line: u64) -> u64 {
        let later: u64 =
            self.by_age.range((seg.stamp, seg.end)..(seg.stamp + 1, 0)).map(|&(_, s)| self.by_addr[&s].end - s).sum();
        (seg.end - 1 - line) + later
    }

    fn trim(&mut self, acct: &mut Accounting) {
        while self.total > self.capacity {
            let &(_, start) = self.by_age.first().expect("non-empty when over capacity");
            let excess = self.total - self.capacity;
            let seg = self.remove(start);
            let len = seg.end - start;
            let evict = excess.min(len);
            if seg.dirty {
                acct.writeback(seg.tensor, evict);
            }
            if evict < len {
                self.insert(start + evict, seg);
            }
        }
    }
}

impl LineCache for RangeLru {
    fn access(&mut self, first: u64, count: u64, write: bool, tensor: usize, acct: &mut Accounting) {
        let (start, end) = (first, first + count);
        let pieces = self.pieces(start, end);

        let mut hit_flags = Vec::with_capacity(pieces.len());
        for (idx, p) in pieces.iter().enumerate() {
            let hit = match p.resident {
                None => false,
                Some((_, seg)) => {
                    let above_groups = self.total - self.counts.prefix(seg.stamp);
                    let moved_above: u64 = pieces[..idx]
                        .iter()
                        .filter_map(|q| q.resident.filter(|(_, s)| s.stamp > seg.stamp).map(|_| q.end - q.start))
                        .sum();
                    let depth = above_groups + self.within_group_above(&seg, p.start) + (p.start - start) - moved_above;
                    depth < self.capacity
                }
            };
            hit_flags.push(hit);
        }

        let mut new_segments: Vec<(u64, u64, bool)> = Vec::new();
        let mut hits = 0;
        for (p, &hit) in pieces.iter().zip(&hit_flags) {
            let len = p.end - p.start;
            let mut dirty = write;
            if let Some((seg_start, _)) = p.resident {
                let seg = self.remove(seg_start);
                if seg_start < p.start {
                    self.insert(seg_start, Segment { end: p.start, ..seg });
                }
                if p.end < seg.end {
                    self.insert(p.end, seg);
                }
                if hit {
                    hits += len;
                    dirty |= seg.dirty;
                } else if seg.dirty {
                    acct.writeback(seg.tensor, len);
                }
            }
            match new_segments.last_mut() {
                Some(last) if last.2 == dirty && last.1 == p.start => last.1 = p.end,
                _ => new_segments.push((p.start, p.end, dirty)),
            }
        }
        acct.hits += hits;
        acct.miss(tensor, count - hits, write);

        let stamp = self.fresh_stamp();
        for (s, e, dirty) in new_segments {
            self.insert(s, Segment { end: e, stamp, dirty, tensor });
        }
        self.trim(acct);
    }

    fn flush(&mut self, acct: &mut Accounting) {
        for (&start, seg) in self.by_addr.iter_mut().filter(|(_, s)| s.dirty) {
            acct.writeback(seg.tensor, seg.end - start);
            seg.dirty = false;
        }
    }
}
