//! Stages of the ascending rings: the cells of `𝒜_k`, the boundary support
//! `∂W_1 ∪ … ∪ ∂W_k`, and ring elements `B ⊎ C` built from them.
//!
//! A stage is refined in place one basis set at a time. Cells are shared
//! between snapshots through `Arc`, so cloning a stage is cheap relative to
//! rebuilding it.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock, RwLock};

use thiserror::Error;

use crate::dyadic::DyadicMass;
use crate::space::{BasisHandle, Locator, Space};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("basis index {0} was already inserted")]
    DuplicateInsertion(u64),
    #[error("region {0} is not a member of the ring at this stage")]
    NotRepresentable(String),
    #[error("ring elements belong to stages {left} and {right}")]
    StageMismatch { left: usize, right: usize },
    #[error("no cell with signature {0} at this stage")]
    UnknownCell(String),
}

struct Node {
    pos: u32,
    hash: u64,
    next: Option<Arc<Node>>,
}

/// The IN/EXT pattern of a cell over the first `len` inserted sets. Only the
/// IN positions are stored, as a shared list with the most recent first.
#[derive(Clone)]
pub struct CellSignature {
    len: usize,
    ins: Option<Arc<Node>>,
}

impl CellSignature {
    /// The all-EXT signature, which names no cell and stands for `∅`.
    pub fn empty(len: usize) -> Self {
        CellSignature { len, ins: None }
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        let mut ins = None;
        for (k, &f) in flags.iter().enumerate() {
            if f {
                ins = Some(push(ins, k as u32 + 1));
            }
        }
        CellSignature { len: flags.len(), ins }
    }

    pub fn width(&self) -> usize {
        self.len
    }

    pub fn is_empty_set(&self) -> bool {
        self.ins.is_none()
    }

    /// Positions (1-based) of the IN flags, ascending.
    pub fn in_positions(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.ins.as_deref();
        while let Some(n) = cur {
            out.push(n.pos as usize);
            cur = n.next.as_deref();
        }
        out.reverse();
        out
    }

    pub fn flags(&self) -> Vec<bool> {
        let mut f = vec![false; self.len];
        for p in self.in_positions() {
            f[p - 1] = true;
        }
        f
    }

    fn chain_hash(&self) -> u64 {
        self.ins.as_ref().map_or(0, |n| n.hash)
    }
}

fn push(next: Option<Arc<Node>>, pos: u32) -> Arc<Node> {
    let prev = next.as_ref().map_or(0x51_7c_c1_b7_27_22_0a_95, |n| n.hash);
    let hash = (prev ^ u64::from(pos)).wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(29);
    Arc::new(Node { pos, hash, next })
}

fn chain_cmp(a: &Option<Arc<Node>>, b: &Option<Arc<Node>>) -> Ordering {
    let (mut x, mut y) = (a.as_deref(), b.as_deref());
    loop {
        match (x, y) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(p), Some(q)) => {
                if std::ptr::eq(p, q) {
                    return Ordering::Equal;
                }
                match p.pos.cmp(&q.pos) {
                    Ordering::Equal => {
                        x = p.next.as_deref();
                        y = q.next.as_deref();
                    }
                    other => return other,
                }
            }
        }
    }
}

impl PartialEq for CellSignature {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len
            && self.chain_hash() == other.chain_hash()
            && chain_cmp(&self.ins, &other.ins) == Ordering::Equal
    }
}

impl Eq for CellSignature {}

impl Ord for CellSignature {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len.cmp(&other.len).then_with(|| chain_cmp(&self.ins, &other.ins))
    }
}

impl PartialOrd for CellSignature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Hash for CellSignature {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.len.hash(state);
        self.chain_hash().hash(state);
    }
}

/// Renders as one character per inserted set, `1` for IN and `0` for EXT.
impl fmt::Display for CellSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.flags() {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

impl fmt::Debug for CellSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sig(len={}, in={:?})", self.len, self.in_positions())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Root,
    PersistedFrom(CellSignature),
    SplitFrom(CellSignature),
    NewRegion(usize),
}

/// One element of `𝒜_k`.
#[derive(Debug)]
pub struct Cell<R> {
    ins: Option<Arc<Node>>,
    born: usize,
    origin: Origin,
    pub region: R,
    pub mass: DyadicMass,
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.pos)
    }
}

impl<R> Cell<R> {
    /// The stage at which this cell last changed signature.
    pub fn born(&self) -> usize {
        self.born
    }
}

/// How one cell meets a newly inserted basis set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Classification<R> {
    PersistExterior,
    PersistInside,
    Split { inside: R, outside: R },
}

pub fn classify<X: Space>(
    space: &X,
    region: &X::Region,
    v: &BasisHandle<X::Region>,
) -> Result<Classification<X::Region>, RingError> {
    let inside = space.meet(region, &v.region);
    let outside = space.meet_exterior(region, v);
    match (space.is_empty(&inside), space.is_empty(&outside)) {
        (true, _) if &outside == region => Ok(Classification::PersistExterior),
        (_, true) if &inside == region => Ok(Classification::PersistInside),
        (false, false) if &space.regularize(&space.join(&inside, &outside)) == region => {
            Ok(Classification::Split { inside, outside })
        }
        _ => Err(RingError::InvariantViolation(format!(
            "cell {} does not split cleanly along basis set {}",
            space.format_region(region),
            v.index
        ))),
    }
}

#[derive(Debug, Default)]
struct LogInner {
    indices: Vec<u64>,
    position: HashMap<u64, usize>,
}

/// The insertion order shared by a stage and its snapshots. A stage at index
/// `k` reads the first `k` entries; entries beyond belong to later stages of
/// the same run.
#[derive(Clone, Debug, Default)]
struct InsertionLog(Arc<RwLock<LogInner>>);

impl InsertionLog {
    fn read(&self) -> std::sync::RwLockReadGuard<'_, LogInner> {
        self.0.read().expect("insertion log poisoned")
    }

    fn position(&self, index: u64, k: usize) -> Option<usize> {
        self.read().position.get(&index).copied().filter(|&p| p <= k)
    }

    fn get(&self, pos: usize) -> u64 {
        self.read().indices[pos - 1]
    }

    /// Records `index` at position `k + 1`, forking if the shared log already
    /// diverges from this stage.
    fn append(&mut self, k: usize, index: u64) {
        {
            let inner = self.read();
            if inner.indices.len() > k && inner.indices[k] == index {
                return;
            }
        }
        if self.read().indices.len() != k {
            let indices: Vec<u64> = self.read().indices[..k].to_vec();
            let position = indices.iter().enumerate().map(|(p, &i)| (i, p + 1)).collect();
            *self = InsertionLog(Arc::new(RwLock::new(LogInner { indices, position })));
        }
        let mut inner = self.0.write().expect("insertion log poisoned");
        inner.indices.push(index);
        inner.position.insert(index, k + 1);
    }
}

/// Masses involved in one proper split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitRecord {
    pub parent: DyadicMass,
    pub inside: DyadicMass,
    pub outside: DyadicMass,
}

/// What one refinement did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepReport {
    pub position: usize,
    pub basis_index: u64,
    pub splits: Vec<SplitRecord>,
    pub persisted_inside: usize,
    pub new_region: Option<DyadicMass>,
    pub total_before: DyadicMass,
    pub total_after: DyadicMass,
}

/// The state after `k` insertions.
pub struct Stage<X: Space> {
    space: X,
    k: usize,
    log: InsertionLog,
    cells: Vec<Arc<Cell<X::Region>>>,
    /// `∩ W_i^e`, the points outside every inserted closure.
    outside: X::Region,
    total: DyadicMass,
    locator: OnceLock<X::Locator>,
    by_signature: OnceLock<HashMap<CellSignature, usize>>,
}

impl<X: Space> Clone for Stage<X> {
    fn clone(&self) -> Self {
        Stage {
            space: self.space.clone(),
            k: self.k,
            log: self.log.clone(),
            cells: self.cells.clone(),
            outside: self.outside.clone(),
            total: self.total.clone(),
            locator: OnceLock::new(),
            by_signature: OnceLock::new(),
        }
    }
}

impl<X: Space> fmt::Debug for Stage<X> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stage")
            .field("space", &self.space.name())
            .field("k", &self.k)
            .field("cells", &self.cells.len())
            .field("total", &self.total)
            .finish()
    }
}

/// Stage 1: the single cell `V_1` with mass 1/2.
pub fn init_stage<X: Space>(space: &X, v1: &BasisHandle<X::Region>) -> Result<Stage<X>, RingError> {
    if space.is_empty(&v1.region) {
        return Err(RingError::InvariantViolation("the first basis set is empty".into()));
    }
    let mut log = InsertionLog::default();
    log.append(0, v1.index);
    let cell = Cell {
        ins: Some(push(None, 1)),
        born: 1,
        origin: Origin::Root,
        region: v1.region.clone(),
        mass: DyadicMass::pow2_neg(1),
    };
    Ok(Stage {
        space: space.clone(),
        k: 1,
        log,
        cells: vec![Arc::new(cell)],
        outside: space.exterior(&v1.region),
        total: DyadicMass::pow2_neg(1),
        locator: OnceLock::new(),
        by_signature: OnceLock::new(),
    })
}

impl<X: Space> Stage<X> {
    pub fn space(&self) -> &X {
        &self.space
    }

    pub fn index(&self) -> usize {
        self.k
    }

    pub fn cells(&self) -> &[Arc<Cell<X::Region>>] {
        &self.cells
    }

    pub fn total_mass(&self) -> &DyadicMass {
        &self.total
    }

    /// The all-EXT region `∩ W_i^e`.
    pub fn outside(&self) -> &X::Region {
        &self.outside
    }

    pub fn signature(&self, cell: &Cell<X::Region>) -> CellSignature {
        CellSignature { len: self.k, ins: cell.ins.clone() }
    }

    pub fn origin(&self, cell: &Cell<X::Region>) -> Origin {
        if cell.born == self.k {
            cell.origin.clone()
        } else {
            Origin::PersistedFrom(CellSignature { len: self.k - 1, ins: cell.ins.clone() })
        }
    }

    /// Basis index of `W_pos`.
    pub fn inserted_at(&self, pos: usize) -> u64 {
        assert!((1..=self.k).contains(&pos), "position {pos} outside stage {}", self.k);
        self.log.get(pos)
    }

    pub fn inserted(&self) -> Vec<u64> {
        self.log.read().indices[..self.k].to_vec()
    }

    /// Stream position of a basis index, if inserted by this stage.
    pub fn position_of(&self, index: u64) -> Option<usize> {
        self.log.position(index, self.k)
    }

    pub fn handle_at(&self, pos: usize) -> BasisHandle<X::Region> {
        self.space.enumerate(self.inserted_at(pos))
    }

    /// `∂W_1 ∪ … ∪ ∂W_k`, computed from the inserted sets.
    pub fn boundary_support(&self) -> BTreeSet<X::Point> {
        (1..=self.k).flat_map(|p| self.space.boundary(&self.handle_at(p))).collect()
    }

    /// A point lies on some `∂W_i` exactly when it is in no cell and not in
    /// the all-EXT region.
    pub fn on_boundary_support(&self, p: &X::Point) -> bool {
        !self.space.contains_point(&self.outside, p) && self.cell_containing(p).is_none()
    }

    pub fn cell_containing(&self, p: &X::Point) -> Option<&Cell<X::Region>> {
        self.cells.iter().map(|c| c.as_ref()).find(|c| self.space.contains_point(&c.region, p))
    }

    pub fn cell(&self, sig: &CellSignature) -> Option<&Cell<X::Region>> {
        if sig.len != self.k || sig.ins.is_none() {
            return None;
        }
        let map = self
            .by_signature
            .get_or_init(|| self.cells.iter().enumerate().map(|(id, c)| (self.signature(c), id)).collect());
        map.get(sig).map(|&id| self.cells[id].as_ref())
    }

    fn locator(&self) -> &X::Locator {
        self.locator.get_or_init(|| {
            let mut loc = X::Locator::default();
            for (id, c) in self.cells.iter().enumerate() {
                loc.insert(&c.region, id);
            }
            loc
        })
    }

    /// Ids of cells whose region meets `region`.
    fn meeting(&self, region: &X::Region) -> Vec<usize> {
        let mut ids = Vec::new();
        self.locator().query(region, &mut ids);
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn refine(&self, v: &BasisHandle<X::Region>) -> Result<(Stage<X>, StepReport), RingError> {
        let mut next = self.clone();
        let report = next.refine_in_place(v)?;
        Ok((next, report))
    }

    /// Inserts `v` as `W_{k+1}`.
    pub fn refine_in_place(&mut self, v: &BasisHandle<X::Region>) -> Result<StepReport, RingError> {
        if self.position_of(v.index).is_some() {
            return Err(RingError::DuplicateInsertion(v.index));
        }
        let k1 = self.k + 1;
        let pos = u32::try_from(k1).expect("stage index fits in u32");
        let mut plan = Vec::new();
        for id in self.meeting(&v.region) {
            match classify(&self.space, &self.cells[id].region, v)? {
                Classification::PersistExterior => {}
                other => plan.push((id, other)),
            }
        }
        self.by_signature = OnceLock::new();
        let mut report = StepReport {
            position: k1,
            basis_index: v.index,
            splits: Vec::new(),
            persisted_inside: 0,
            new_region: None,
            total_before: self.total.clone(),
            total_after: DyadicMass::zero(),
        };
        for (id, class) in plan {
            let parent = self.cells[id].clone();
            let parent_sig = CellSignature { len: self.k, ins: parent.ins.clone() };
            let in_chain = Some(push(parent.ins.clone(), pos));
            match class {
                Classification::PersistExterior => unreachable!("filtered above"),
                Classification::PersistInside => {
                    report.persisted_inside += 1;
                    self.cells[id] = Arc::new(Cell {
                        ins: in_chain,
                        born: k1,
                        origin: Origin::PersistedFrom(parent_sig),
                        region: parent.region.clone(),
                        mass: parent.mass.clone(),
                    });
                }
                Classification::Split { inside, outside } => {
                    let half = parent.mass.half();
                    report.splits.push(SplitRecord {
                        parent: parent.mass.clone(),
                        inside: half.clone(),
                        outside: half.clone(),
                    });
                    let loc = self.locator.get_mut().expect("locator built above");
                    loc.remove(&parent.region, id);
                    loc.insert(&inside, id);
                    let out_id = self.cells.len();
                    loc.insert(&outside, out_id);
                    self.cells[id] = Arc::new(Cell {
                        ins: in_chain,
                        born: k1,
                        origin: Origin::SplitFrom(parent_sig.clone()),
                        region: inside,
                        mass: half.clone(),
                    });
                    self.cells.push(Arc::new(Cell {
                        ins: parent.ins.clone(),
                        born: k1,
                        origin: Origin::SplitFrom(parent_sig),
                        region: outside,
                        mass: half,
                    }));
                }
            }
        }
        let fresh = self.space.meet(&v.region, &self.outside);
        if !self.space.is_empty(&fresh) {
            let mass = DyadicMass::pow2_neg(k1 as u64);
            self.outside = self.space.meet_exterior(&self.outside, v);
            let id = self.cells.len();
            self.locator.get_mut().expect("locator built above").insert(&fresh, id);
            self.cells.push(Arc::new(Cell {
                ins: Some(push(None, pos)),
                born: k1,
                origin: Origin::NewRegion(k1),
                region: fresh,
                mass: mass.clone(),
            }));
            self.total = &self.total + &mass;
            report.new_region = Some(mass);
        }
        self.log.append(self.k, v.index);
        self.k = k1;
        report.total_after = self.total.clone();
        Ok(report)
    }

    /// Writes `region` as `B ⊎ C`: the cells inside it and the finitely many
    /// boundary points left over.
    pub fn decompose(&self, region: &X::Region) -> Result<RingElement<X::Point>, RingError> {
        let sp = &self.space;
        let mut open_part = BTreeSet::new();
        let mut parts = Vec::new();
        for id in self.meeting(region) {
            let c = &self.cells[id];
            let m = sp.meet(&c.region, region);
            if sp.is_empty(&m) {
                continue;
            }
            if m != c.region {
                return Err(RingError::NotRepresentable(sp.format_region(region)));
            }
            open_part.insert(self.signature(c));
            parts.push(c.region.clone());
        }
        let union = sp.join_all(parts);
        if !sp.is_empty(&sp.meet(region, &sp.exterior(&union))) {
            return Err(RingError::NotRepresentable(sp.format_region(region)));
        }
        let boundary_part = sp.boundary_of(&union).into_iter().filter(|p| sp.contains_point(region, p)).collect();
        Ok(RingElement { stage: self.k, open_part, boundary_part })
    }

    /// The open part of `d` as a region.
    pub fn open_region(&self, d: &RingElement<X::Point>) -> Result<X::Region, RingError> {
        self.check_stage(d)?;
        let regions = d
            .open_part
            .iter()
            .map(|s| self.cell(s).map(|c| c.region.clone()).ok_or_else(|| RingError::UnknownCell(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.space.join_all(regions))
    }

    /// Membership of a point in the set `B ⊎ C` described by `d`.
    pub fn element_contains(&self, d: &RingElement<X::Point>, p: &X::Point) -> Result<bool, RingError> {
        if d.boundary_part.contains(p) {
            return Ok(true);
        }
        Ok(self.space.contains_point(&self.open_region(d)?, p))
    }

    /// Re-expresses `d` at this later stage.
    pub fn lift(&self, d: &RingElement<X::Point>) -> Result<RingElement<X::Point>, RingError> {
        if d.stage > self.k {
            return Err(RingError::StageMismatch { left: d.stage, right: self.k });
        }
        let mut open = BTreeSet::new();
        let mut boundary = d.boundary_part.clone();
        for sig in &d.open_part {
            // Restricting the signature to its first `d.stage` flags picks out
            // the ancestor, so every descendant cell is found by its region.
            let region = self.ancestor_region(sig)?;
            let e = self.decompose(&region)?;
            open.extend(e.open_part);
            boundary.extend(e.boundary_part);
        }
        Ok(RingElement { stage: self.k, open_part: open, boundary_part: boundary })
    }

    fn ancestor_region(&self, sig: &CellSignature) -> Result<X::Region, RingError> {
        let sp = &self.space;
        let flags = sig.flags();
        let mut region = sp.whole();
        for (k, &f) in flags.iter().enumerate() {
            let h = self.handle_at(k + 1);
            region = if f { sp.meet(&region, &h.region) } else { sp.meet_exterior(&region, &h) };
        }
        if sp.is_empty(&region) {
            return Err(RingError::UnknownCell(sig.to_string()));
        }
        Ok(region)
    }

    fn check_stage(&self, d: &RingElement<X::Point>) -> Result<(), RingError> {
        if d.stage != self.k {
            return Err(RingError::StageMismatch { left: d.stage, right: self.k });
        }
        Ok(())
    }
}

/// A member `B ⊎ C` of `𝒟_n`: whole cells of stage `n` and a finite set of
/// points on the boundary support.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingElement<P: Ord> {
    pub stage: usize,
    pub open_part: BTreeSet<CellSignature>,
    pub boundary_part: BTreeSet<P>,
}

impl<P: Ord + Clone> RingElement<P> {
    pub fn empty(stage: usize) -> Self {
        RingElement { stage, open_part: BTreeSet::new(), boundary_part: BTreeSet::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.open_part.is_empty() && self.boundary_part.is_empty()
    }
}

/// `d1 ∪ d2`. Cells are atoms and boundary points lie in no cell, so the
/// union is taken part by part.
pub fn ring_union<P: Ord + Clone>(d1: &RingElement<P>, d2: &RingElement<P>) -> Result<RingElement<P>, RingError> {
    if d1.stage != d2.stage {
        return Err(RingError::StageMismatch { left: d1.stage, right: d2.stage });
    }
    Ok(RingElement {
        stage: d1.stage,
        open_part: d1.open_part.union(&d2.open_part).cloned().collect(),
        boundary_part: d1.boundary_part.union(&d2.boundary_part).cloned().collect(),
    })
}

/// `d1 − d2`, part by part for the same reason as [`ring_union`].
pub fn ring_difference<P: Ord + Clone>(d1: &RingElement<P>, d2: &RingElement<P>) -> Result<RingElement<P>, RingError> {
    if d1.stage != d2.stage {
        return Err(RingError::StageMismatch { left: d1.stage, right: d2.stage });
    }
    Ok(RingElement {
        stage: d1.stage,
        open_part: d1.open_part.difference(&d2.open_part).cloned().collect(),
        boundary_part: d1.boundary_part.difference(&d2.boundary_part).cloned().collect(),
    })
}

/// Inserts the handles in order starting from an empty stage.
pub fn run_stream<X: Space>(space: &X, handles: &[BasisHandle<X::Region>]) -> Result<Vec<Stage<X>>, RingError> {
    let Some((first, rest)) = handles.split_first() else {
        return Ok(Vec::new());
    };
    let mut stages = vec![init_stage(space, first)?];
    for h in rest {
        let (next, _) = stages.last().expect("nonempty").refine(h)?;
        stages.push(next);
    }
    Ok(stages)
}
