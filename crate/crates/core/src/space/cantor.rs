//! Cantor space `{0,1}^N` with the cylinder basis.
//!
//! Cylinders are enumerated in length-then-lexicographic order, which is the
//! heap numbering: the word `w` has index `2^|w| + value(w)`, so the index
//! written in binary is `1` followed by `w`. The first entries are
//!
//! | index | cylinder |
//! |------:|----------|
//! | 1 | ε (the whole space) |
//! | 2 | 0 |
//! | 3 | 1 |
//! | 4 | 00 |
//! | 5 | 01 |
//! | 6 | 10 |
//! | 7 | 11 |
//! | 8 | 000 |
//!
//! Every cylinder is clopen, so exteriors are complements and all boundaries
//! are empty.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use super::{check_inside, BasisHandle, Injection, Locator, Space, SpaceError};

/// Longest word whose index fits in a `u64`.
pub const MAX_WORD_LEN: usize = 62;

/// A finite binary word naming the cylinder of all sequences extending it.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(pub Vec<bool>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn child(&self, bit: bool) -> Word {
        let mut v = self.0.clone();
        v.push(bit);
        Word(v)
    }

    pub fn index(&self) -> u64 {
        assert!(self.len() <= MAX_WORD_LEN, "cylinder too deep for a u64 index");
        self.0.iter().fold(1u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn from_index(index: u64) -> Word {
        assert!(index >= 1, "basis indices start at 1");
        let len = 63 - index.leading_zeros() as usize;
        Word((0..len).rev().map(|k| (index >> k) & 1 == 1).collect())
    }

    fn parse(s: &str) -> Option<Word> {
        if s == "ε" || s == "e" {
            return Some(Word::default());
        }
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<bool>>>()
            .map(Word)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        for &b in &self.0 {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

/// A clopen set given as a finite antichain of cylinders, sorted, with every
/// pair of sibling cylinders merged into their parent.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Antichain(Vec<Word>);

impl Antichain {
    pub fn empty() -> Self {
        Antichain(Vec::new())
    }

    pub fn whole() -> Self {
        Antichain(vec![Word::default()])
    }

    pub fn cylinder(w: Word) -> Self {
        Antichain(vec![w])
    }

    pub fn words(&self) -> &[Word] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The canonical antichain covering the union of the given cylinders.
    pub fn from_words(mut words: Vec<Word>) -> Self {
        words.sort();
        words.dedup();
        let mut stack: Vec<Word> = Vec::with_capacity(words.len());
        for w in words {
            if stack.last().is_some_and(|top| top.is_prefix_of(&w)) {
                continue;
            }
            stack.push(w);
            while stack.len() >= 2 {
                let n = stack.len();
                let (a, b) = (&stack[n - 2], &stack[n - 1]);
                let siblings = a.len() == b.len()
                    && !a.is_empty()
                    && a.0[..a.len() - 1] == b.0[..b.len() - 1]
                    && !a.0[a.len() - 1]
                    && b.0[b.len() - 1];
                if !siblings {
                    break;
                }
                let mut parent = stack.pop().expect("two entries");
                parent.0.pop();
                stack.pop();
                // The parent may swallow nothing else: earlier entries are
                // lexicographically smaller and not its descendants.
                stack.push(parent);
            }
        }
        Antichain(stack)
    }

    pub fn meet(&self, other: &Self) -> Self {
        let mut out = Vec::new();
        for x in &self.0 {
            // The ancestor of x in `other`, if any, is the largest word <= x.
            let k = other.0.partition_point(|y| y <= x);
            if k > 0 && other.0[k - 1].is_prefix_of(x) {
                out.push(x.clone());
                continue;
            }
            for y in &other.0[k..] {
                if !x.is_prefix_of(y) {
                    break;
                }
                out.push(y.clone());
            }
        }
        Antichain::from_words(out)
    }

    pub fn join(&self, other: &Self) -> Self {
        Antichain::from_words(self.0.iter().chain(other.0.iter()).cloned().collect())
    }

    pub fn complement(&self) -> Self {
        fn go(prefix: &Word, set: &[Word], out: &mut Vec<Word>) {
            if set.is_empty() {
                out.push(prefix.clone());
                return;
            }
            if set.iter().any(|w| w.len() == prefix.len()) {
                return;
            }
            let split = set.partition_point(|w| !w.0[prefix.len()]);
            go(&prefix.child(false), &set[..split], out);
            go(&prefix.child(true), &set[split..], out);
        }
        let mut out = Vec::new();
        go(&Word::default(), &self.0, &mut out);
        Antichain::from_words(out)
    }

    pub fn contains(&self, p: &CantorPoint) -> bool {
        self.0.iter().any(|w| p.extends(w))
    }
}

impl fmt::Display for Antichain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        write!(f, "{}", parts.join("∪"))
    }
}

/// An eventually constant sequence: `head` followed by `tail` forever. These
/// serve as probe points; boundaries in Cantor space are always empty.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CantorPoint {
    pub head: Word,
    pub tail: bool,
}

impl CantorPoint {
    pub fn bit(&self, k: usize) -> bool {
        self.head.0.get(k).copied().unwrap_or(self.tail)
    }

    pub fn extends(&self, w: &Word) -> bool {
        w.0.iter().enumerate().all(|(k, &b)| self.bit(k) == b)
    }

    fn prefix(&self, len: usize) -> Word {
        Word((0..len).map(|k| self.bit(k)).collect())
    }
}

impl fmt::Display for CantorPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})^ω", self.head, u8::from(self.tail))
    }
}

/// Cylinder index: every stored word maps to its cell.
#[derive(Clone, Debug, Default)]
pub struct CylinderLocator {
    words: BTreeMap<Word, usize>,
}

impl Locator<Antichain> for CylinderLocator {
    fn insert(&mut self, region: &Antichain, id: usize) {
        for w in region.words() {
            self.words.insert(w.clone(), id);
        }
    }

    fn remove(&mut self, region: &Antichain, id: usize) {
        for w in region.words() {
            if self.words.get(w) == Some(&id) {
                self.words.remove(w);
            }
        }
    }

    fn query(&self, region: &Antichain, out: &mut Vec<usize>) {
        for w in region.words() {
            for len in 0..=w.len() {
                if let Some(&id) = self.words.get(&Word(w.0[..len].to_vec())) {
                    out.push(id);
                }
            }
            for (v, &id) in self.words.range(w.clone()..) {
                if !w.is_prefix_of(v) {
                    break;
                }
                out.push(id);
            }
        }
    }
}

/// Cantor space, optionally with an injected prefix of cylinders.
#[derive(Clone, Debug, Default)]
pub struct CantorSpace {
    inj: Arc<Injection<Antichain>>,
}

impl CantorSpace {
    pub fn canonical() -> Self {
        Self::default()
    }

    pub fn with_prefix(prefix: Vec<Antichain>) -> Result<Self, SpaceError> {
        let mut canonical = Vec::new();
        for (k, r) in prefix.iter().enumerate() {
            let [w] = r.words() else {
                return Err(SpaceError::NotABasisElement(r.to_string()));
            };
            if w.len() > MAX_WORD_LEN || prefix[..k].contains(r) {
                return Err(SpaceError::NotABasisElement(r.to_string()));
            }
            canonical.push(w.index());
        }
        canonical.sort_unstable();
        Ok(CantorSpace { inj: Arc::new(Injection { regions: prefix, canonical }) })
    }

    pub fn prefix(&self) -> &[Antichain] {
        &self.inj.regions
    }

    fn canonical_floor(&self, min_index: u64) -> u64 {
        if min_index <= self.inj.len() {
            1
        } else {
            self.inj.to_canonical(min_index)
        }
    }

    /// Smallest canonical index at least `c_min` among descendants (or self)
    /// of `w` of length `len`, skipping rejected ones.
    fn first_below(w: &Word, len: usize, c_min: u64, skip: &mut dyn FnMut(u64) -> bool) -> Option<u64> {
        let shift = len - w.len();
        let lo = w.index() << shift;
        let hi = lo + (1u64 << shift);
        let mut c = lo.max(c_min);
        while c < hi {
            if !skip(c) {
                return Some(c);
            }
            c += 1;
        }
        None
    }
}

impl Space for CantorSpace {
    type Region = Antichain;
    type Point = CantorPoint;
    type Locator = CylinderLocator;

    fn name(&self) -> &'static str {
        "cantor"
    }

    fn empty(&self) -> Antichain {
        Antichain::empty()
    }

    fn whole(&self) -> Antichain {
        Antichain::whole()
    }

    fn is_empty(&self, a: &Antichain) -> bool {
        a.is_empty()
    }

    fn meet(&self, a: &Antichain, b: &Antichain) -> Antichain {
        a.meet(b)
    }

    fn join(&self, a: &Antichain, b: &Antichain) -> Antichain {
        a.join(b)
    }

    fn join_all(&self, regions: Vec<Antichain>) -> Antichain {
        Antichain::from_words(regions.into_iter().flat_map(|r| r.0).collect())
    }

    fn exterior(&self, a: &Antichain) -> Antichain {
        a.complement()
    }

    fn boundary_of(&self, _a: &Antichain) -> BTreeSet<CantorPoint> {
        BTreeSet::new()
    }

    fn contains_point(&self, a: &Antichain, p: &CantorPoint) -> bool {
        a.contains(p)
    }

    fn closure_strictly_inside(&self, a: &Antichain, b: &Antichain) -> bool {
        &a.meet(b) == a && !b.meet(&a.complement()).is_empty()
    }

    fn enumerate(&self, index: u64) -> BasisHandle<Antichain> {
        assert!(index >= 1, "basis indices start at 1");
        if index <= self.inj.len() {
            return BasisHandle { index, region: self.inj.regions[index as usize - 1].clone() };
        }
        let c = self.inj.to_canonical(index);
        BasisHandle { index, region: Antichain::cylinder(Word::from_index(c)) }
    }

    fn index_of(&self, region: &Antichain) -> Result<u64, SpaceError> {
        if let Some(p) = self.inj.position(region) {
            return Ok(p);
        }
        match region.words() {
            [w] if w.len() <= MAX_WORD_LEN => {
                self.inj.overall_index(w.index()).ok_or_else(|| SpaceError::NotABasisElement(region.to_string()))
            }
            _ => Err(SpaceError::NotABasisElement(region.to_string())),
        }
    }

    fn find_hole(
        &self,
        u: &Antichain,
        forbidden: &HashSet<u64>,
        min_index: u64,
        scan_cap: u64,
    ) -> Result<BasisHandle<Antichain>, SpaceError> {
        if u.is_empty() {
            return Err(SpaceError::EmptyRegion);
        }
        let min_index = min_index.max(1);
        let limit = min_index.saturating_add(scan_cap);
        for index in min_index..=self.inj.len().min(limit.saturating_sub(1)) {
            let h = self.enumerate(index);
            if !forbidden.contains(&index) && self.closure_strictly_inside(&h.region, u) {
                return Ok(h);
            }
        }
        let c_min = self.canonical_floor(min_index);
        let single = match u.words() {
            [w] => Some(w.index()),
            _ => None,
        };
        let mut skip = |c: u64| {
            // A lone cylinder is not strictly inside itself.
            single == Some(c) || self.inj.overall_index(c).is_none_or(|i| forbidden.contains(&i))
        };
        let start_len = (63 - c_min.leading_zeros()) as usize;
        for len in start_len..=MAX_WORD_LEN {
            // Overall positions never undercut canonical indices.
            if (1u64 << len) >= limit {
                break;
            }
            let best = u
                .words()
                .iter()
                .filter(|w| w.len() <= len)
                .filter_map(|w| Self::first_below(w, len, c_min, &mut skip))
                .min();
            if let Some(c) = best {
                let index = self.inj.overall_index(c).expect("injected entries are skipped");
                if index >= limit {
                    break;
                }
                return Ok(self.enumerate(index));
            }
        }
        Err(SpaceError::ScanExhausted { min_index, scan_cap })
    }

    fn finite_subcover(
        &self,
        k: &BTreeSet<CantorPoint>,
        constraint: &Antichain,
        forbidden: &HashSet<u64>,
        min_index: u64,
        scan_cap: u64,
    ) -> Result<Vec<BasisHandle<Antichain>>, SpaceError> {
        check_inside(self, k, constraint)?;
        let min_index = min_index.max(1);
        let limit = min_index.saturating_add(scan_cap);
        let c_min = self.canonical_floor(min_index);
        let mut chosen: Vec<BasisHandle<Antichain>> = Vec::new();
        for p in k {
            if chosen.iter().any(|h| h.region.contains(p)) {
                continue;
            }
            let ok = |h: &BasisHandle<Antichain>, chosen: &[BasisHandle<Antichain>]| {
                !forbidden.contains(&h.index)
                    && chosen.iter().all(|c| c.index != h.index)
                    && h.region.contains(p)
                    && self.subset(&h.region, constraint)
            };
            let mut found = None;
            for index in min_index..=self.inj.len().min(limit.saturating_sub(1)) {
                let h = self.enumerate(index);
                if ok(&h, &chosen) {
                    found = Some(h);
                    break;
                }
            }
            if found.is_none() {
                // Exactly one cylinder of each length contains p, and its
                // canonical index grows with the length.
                for len in 0..=MAX_WORD_LEN {
                    let c = p.prefix(len).index();
                    if c >= limit {
                        break;
                    }
                    if c < c_min {
                        continue;
                    }
                    let Some(index) = self.inj.overall_index(c) else { continue };
                    if index >= limit {
                        break;
                    }
                    let h = BasisHandle { index, region: Antichain::cylinder(p.prefix(len)) };
                    if ok(&h, &chosen) {
                        found = Some(h);
                        break;
                    }
                }
            }
            match found {
                Some(h) => chosen.push(h),
                None => return Err(SpaceError::ScanExhausted { min_index, scan_cap }),
            }
        }
        chosen.sort_by_key(|h| h.index);
        Ok(chosen)
    }

    fn format_region(&self, a: &Antichain) -> String {
        a.to_string()
    }

    fn format_point(&self, p: &CantorPoint) -> String {
        p.to_string()
    }

    /// Parses cylinders separated by `∪`, `U` or commas; `ε` is the empty
    /// word and `∅` the empty set.
    fn parse_region(&self, s: &str) -> Result<Antichain, SpaceError> {
        parse_antichain(s)
    }
}

pub fn parse_antichain(s: &str) -> Result<Antichain, SpaceError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace() && *c != '"').collect();
    let t = t.trim_start_matches('{').trim_end_matches('}');
    if t.is_empty() || t == "∅" {
        return Ok(Antichain::empty());
    }
    let words = t
        .replace(['∪', 'U'], ",")
        .split(',')
        .map(|w| Word::parse(w).ok_or_else(|| SpaceError::Parse(s.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Antichain::from_words(words))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> Antichain {
        parse_antichain(s).unwrap()
    }

    #[test]
    fn heap_numbering() {
        let c = CantorSpace::canonical();
        assert_eq!(c.enumerate(1).region, Antichain::whole());
        assert_eq!(c.index_of(&a("01")), Ok(5));
        for i in 1..5000 {
            assert_eq!(c.index_of(&c.enumerate(i).region), Ok(i));
        }
    }

    #[test]
    fn canonical_merges_siblings() {
        assert_eq!(a("00,01,1"), Antichain::whole());
        assert_eq!(a("0,01"), a("0"));
        assert_eq!(a("0").meet(&a("01")), a("01"));
        assert_eq!(a("0").meet(&a("01").complement()), a("00"));
        assert_eq!(a("01,10").complement(), a("00,11"));
    }

    #[test]
    fn first_hole_in_a_cylinder() {
        let c = CantorSpace::canonical();
        let h = c.find_hole(&a("0"), &HashSet::new(), 1, 1000).unwrap();
        assert_eq!(h.region, a("00"));
        let whole = c.find_hole(&Antichain::whole(), &HashSet::new(), 1, 1000).unwrap();
        assert_eq!(whole.region, a("0"));
    }
}
