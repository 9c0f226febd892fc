//! Pareto dominance and nondominated archives: a plain list baseline and a
//! quad-tree keyed by per-objective successorship bit vectors, which prunes
//! dominance comparisons for four and more objectives.
//!
//! Both archives support a check-only dominance test for partial-assignment
//! bounds: the check never mutates the archive, so updates are deferred to
//! complete solutions.

use std::cell::Cell;

use serde::Serialize;
use thiserror::Error;

use crate::objectives::ObjectiveVector;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("objective vector length mismatch: {0} vs {1}")]
pub struct LengthMismatch(pub usize, pub usize);

/// `a` dominates `b` iff a <= b componentwise and a != b (all minimized).
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool, LengthMismatch> {
    if a.len() != b.len() {
        return Err(LengthMismatch(a.len(), b.len()));
    }
    Ok(dominates_unchecked(a, b))
}

fn dominates_unchecked(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let mut strict = false;
    for (x, y) in a.components().iter().zip(b.components()) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn dominates_or_equal(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    a.components().iter().zip(b.components()).all(|(x, y)| x <= y)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Point {
    pub vector: ObjectiveVector,
    /// Opaque solution id.
    pub payload: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Dominated,
    NonDominated,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertReport {
    pub inserted: bool,
    pub removed: Vec<Point>,
}

/// Common archive interface; `check` is the partial-assignment entry point
/// and must not mutate archive structure.
pub trait ParetoArchive {
    fn check(&self, vector: &ObjectiveVector) -> Result<CheckOutcome, LengthMismatch>;
    fn insert(&mut self, point: Point) -> Result<InsertReport, LengthMismatch>;
    fn vectors(&self) -> Vec<ObjectiveVector>;
    fn points(&self) -> Vec<Point>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Vector-to-vector dominance/successorship comparisons performed so far.
    fn comparison_count(&self) -> u64;
}

/// Serializes archive contents as a JSON array of `{vector, payload}`.
pub fn dump_archive(archive: &dyn ParetoArchive) -> String {
    serde_json::to_string(&archive.points()).expect("archive points serialize")
}

// ---------------------------------------------------------------------------
// List archive (the oracle baseline)
// ---------------------------------------------------------------------------

#[derive(Debug, Default)]
pub struct ListArchive {
    k: Option<usize>,
    points: Vec<Point>,
    comparisons: Cell<u64>,
}

impl ListArchive {
    pub fn new() -> Self {
        Self::default()
    }

    fn guard(&self, vector: &ObjectiveVector) -> Result<(), LengthMismatch> {
        match self.k {
            Some(k) if k != vector.len() => Err(LengthMismatch(k, vector.len())),
            _ => Ok(()),
        }
    }
}

impl ParetoArchive for ListArchive {
    fn check(&self, vector: &ObjectiveVector) -> Result<CheckOutcome, LengthMismatch> {
        self.guard(vector)?;
        for p in &self.points {
            self.comparisons.set(self.comparisons.get() + 1);
            if dominates_or_equal(&p.vector, vector) {
                return Ok(CheckOutcome::Dominated);
            }
        }
        Ok(CheckOutcome::NonDominated)
    }

    fn insert(&mut self, point: Point) -> Result<InsertReport, LengthMismatch> {
        self.guard(&point.vector)?;
        if self.check(&point.vector)? == CheckOutcome::Dominated {
            return Ok(InsertReport { inserted: false, removed: Vec::new() });
        }
        self.k = Some(point.vector.len());
        let mut removed = Vec::new();
        let mut kept = Vec::with_capacity(self.points.len() + 1);
        for p in self.points.drain(..) {
            self.comparisons.set(self.comparisons.get() + 1);
            if dominates_unchecked(&point.vector, &p.vector) {
                removed.push(p);
            } else {
                kept.push(p);
            }
        }
        self.points = kept;
        self.points.push(point);
        Ok(InsertReport { inserted: true, removed })
    }

    fn vectors(&self) -> Vec<ObjectiveVector> {
        self.points.iter().map(|p| p.vector.clone()).collect()
    }

    fn points(&self) -> Vec<Point> {
        self.points.clone()
    }

    fn len(&self) -> usize {
        self.points.len()
    }

    fn comparison_count(&self) -> u64 {
        self.comparisons.get()
    }
}

// ---------------------------------------------------------------------------
// Quad-tree archive
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct Node {
    point: Point,
    /// Children indexed by successorship code; codes 0 and 2^k - 1 never
    /// occur among stored nodes.
    children: Vec<Option<Box<Node>>>,
}

impl Node {
    fn new(point: Point, k: usize) -> Self {
        let mut children = Vec::with_capacity(1 << k);
        children.resize_with(1 << k, || None);
        Node { point, children }
    }

    fn collect_preorder(self, out: &mut Vec<Point>) {
        out.push(self.point);
        for child in self.children.into_iter().flatten() {
            child.collect_preorder(out);
        }
    }
}

#[derive(Debug, Default)]
pub struct QuadTreeArchive {
    k: Option<usize>,
    root: Option<Box<Node>>,
    size: usize,
    comparisons: Cell<u64>,
}

impl QuadTreeArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bit i is 1 iff `candidate_i >= node_i`.
    fn code(&self, candidate: &ObjectiveVector, node: &ObjectiveVector) -> usize {
        self.comparisons.set(self.comparisons.get() + 1);
        let mut code = 0usize;
        for (i, (c, n)) in candidate.components().iter().zip(node.components()).enumerate() {
            if c >= n {
                code |= 1 << i;
            }
        }
        code
    }

    /// True if some point in `node`'s subtree weakly dominates `vector`.
    fn dominated_in(&self, node: &Node, vector: &ObjectiveVector, full: usize) -> bool {
        let code = self.code(vector, &node.point.vector);
        if code == full {
            return true; // node <= vector in every component
        }
        if code == 0 {
            // vector strictly below the node everywhere; mutual nondominance
            // of the store rules out a dominator elsewhere in this subtree.
            return false;
        }
        // A dominator r satisfies r <= vector, so its code w.r.t. this node
        // is a submask of ours.
        let mut sub = code;
        loop {
            if let Some(child) = node.children[sub].as_deref() {
                if self.dominated_in(child, vector, full) {
                    return true;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & code;
        }
        false
    }

    /// Collects nodes dominated by `vector`, detaching their subtrees; the
    /// surviving descendants are queued for reinsertion.
    fn extract_dominated(
        &self,
        slot: &mut Option<Box<Node>>,
        vector: &ObjectiveVector,
        removed: &mut Vec<Point>,
        reinsert: &mut Vec<Point>,
    ) {
        let Some(node) = slot.as_deref_mut() else { return };
        let code = self.code(&node.point.vector, vector);
        let full = node.children.len() - 1;
        if code == full {
            // vector <= node everywhere: remove this node with its subtree.
            let node = slot.take().unwrap();
            let mut points = Vec::new();
            node.collect_preorder(&mut points);
            for p in points {
                self.comparisons.set(self.comparisons.get() + 1);
                if dominates_or_equal(vector, &p.vector) {
                    removed.push(p);
                } else {
                    reinsert.push(p);
                }
            }
            return;
        }
        // Points dominated by `vector` sit in child subtrees whose code is a
        // supermask of vector's code w.r.t. this node.
        let vcode = self.code(vector, &node.point.vector);
        // Iterate supermasks of vcode.
        let mut sup = vcode;
        loop {
            if sup != 0 && sup != full {
                self.extract_dominated(&mut node.children[sup], vector, removed, reinsert);
            }
            if sup == full {
                break;
            }
            sup = (sup + 1) | vcode;
        }
    }

    fn place(&mut self, point: Point) {
        let k = point.vector.len();
        match self.root {
            None => {
                self.root = Some(Box::new(Node::new(point, k)));
            }
            Some(ref mut root) => {
                let mut cur: &mut Node = root;
                loop {
                    let code = {
                        self.comparisons.set(self.comparisons.get() + 1);
                        let mut code = 0usize;
                        for (i, (c, n)) in point
                            .vector
                            .components()
                            .iter()
                            .zip(cur.point.vector.components())
                            .enumerate()
                        {
                            if c >= n {
                                code |= 1 << i;
                            }
                        }
                        code
                    };
                    debug_assert!(code != 0 && code != cur.children.len() - 1);
                    if cur.children[code].is_some() {
                        cur = cur.children[code].as_deref_mut().unwrap();
                    } else {
                        cur.children[code] = Some(Box::new(Node::new(point, k)));
                        break;
                    }
                }
            }
        }
        self.size += 1;
    }

    fn guard(&self, vector: &ObjectiveVector) -> Result<(), LengthMismatch> {
        match self.k {
            Some(k) if k != vector.len() => Err(LengthMismatch(k, vector.len())),
            _ => Ok(()),
        }
    }
}

impl ParetoArchive for QuadTreeArchive {
    fn check(&self, vector: &ObjectiveVector) -> Result<CheckOutcome, LengthMismatch> {
        self.guard(vector)?;
        match self.root.as_deref() {
            None => Ok(CheckOutcome::NonDominated),
            Some(root) => {
                let full = (1usize << vector.len()) - 1;
                if self.dominated_in(root, vector, full) {
                    Ok(CheckOutcome::Dominated)
                } else {
                    Ok(CheckOutcome::NonDominated)
                }
            }
        }
    }

    fn insert(&mut self, point: Point) -> Result<InsertReport, LengthMismatch> {
        self.guard(&point.vector)?;
        if self.check(&point.vector)? == CheckOutcome::Dominated {
            return Ok(InsertReport { inserted: false, removed: Vec::new() });
        }
        self.k = Some(point.vector.len());
        let mut removed = Vec::new();
        let mut reinsert = Vec::new();
        let mut root = self.root.take();
        self.extract_dominated(&mut root, &point.vector, &mut removed, &mut reinsert);
        self.root = root;
        self.size -= removed.len() + reinsert.len();
        for p in reinsert {
            self.place(p);
        }
        self.place(point);
        Ok(InsertReport { inserted: true, removed })
    }

    fn vectors(&self) -> Vec<ObjectiveVector> {
        self.points().into_iter().map(|p| p.vector).collect()
    }

    fn points(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.size);
        fn walk(node: &Node, out: &mut Vec<Point>) {
            out.push(node.point.clone());
            for child in node.children.iter().flatten() {
                walk(child, out);
            }
        }
        if let Some(root) = self.root.as_deref() {
            walk(root, &mut out);
        }
        out
    }

    fn len(&self) -> usize {
        self.size
    }

    fn comparison_count(&self) -> u64 {
        self.comparisons.get()
    }
}

/// Archive selected by run configuration.
pub fn make_archive(kind: ArchiveKind) -> Box<dyn ParetoArchive> {
    match kind {
        ArchiveKind::List => Box::new(ListArchive::new()),
        ArchiveKind::QuadTree => Box::new(QuadTreeArchive::new()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchiveKind {
    List,
    QuadTree,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(components: &[i64]) -> ObjectiveVector {
        ObjectiveVector::new(components.to_vec())
    }

    #[test]
    fn dominance_relation() {
        assert!(dominates(&v(&[1, 2, 3]), &v(&[1, 3, 3])).unwrap());
        assert!(!dominates(&v(&[1, 3]), &v(&[2, 2])).unwrap());
        assert!(!dominates(&v(&[2, 2]), &v(&[1, 3])).unwrap());
        assert!(!dominates(&v(&[1, 2]), &v(&[1, 2])).unwrap());
        assert!(dominates(&v(&[1]), &v(&[1, 2])).is_err());
    }

    fn both() -> Vec<Box<dyn ParetoArchive>> {
        vec![Box::new(ListArchive::new()), Box::new(QuadTreeArchive::new())]
    }

    #[test]
    fn check_on_empty_and_small_archives() {
        for mut a in both() {
            assert_eq!(a.check(&v(&[5, 5])).unwrap(), CheckOutcome::NonDominated);
            a.insert(Point { vector: v(&[1, 1]), payload: 0 }).unwrap();
            assert_eq!(a.check(&v(&[2, 2])).unwrap(), CheckOutcome::Dominated);
            assert_eq!(a.check(&v(&[1, 1])).unwrap(), CheckOutcome::Dominated);
            assert_eq!(a.check(&v(&[0, 2])).unwrap(), CheckOutcome::NonDominated);
        }
        for mut a in both() {
            a.insert(Point { vector: v(&[0, 3]), payload: 0 }).unwrap();
            a.insert(Point { vector: v(&[3, 0]), payload: 1 }).unwrap();
            assert_eq!(a.check(&v(&[1, 1])).unwrap(), CheckOutcome::NonDominated);
        }
    }

    #[test]
    fn insert_removes_dominated_points() {
        for mut a in both() {
            a.insert(Point { vector: v(&[2, 2]), payload: 0 }).unwrap();
            a.insert(Point { vector: v(&[0, 3]), payload: 1 }).unwrap();
            let report = a.insert(Point { vector: v(&[1, 1]), payload: 2 }).unwrap();
            assert!(report.inserted);
            assert_eq!(report.removed.len(), 1);
            assert_eq!(report.removed[0].vector, v(&[2, 2]));
            let mut vecs = a.vectors();
            vecs.sort();
            assert_eq!(vecs, vec![v(&[0, 3]), v(&[1, 1])]);
        }
    }

    #[test]
    fn dominated_insert_is_rejected() {
        for mut a in both() {
            a.insert(Point { vector: v(&[1, 1]), payload: 0 }).unwrap();
            let report = a.insert(Point { vector: v(&[2, 2]), payload: 1 }).unwrap();
            assert!(!report.inserted);
            assert!(report.removed.is_empty());
            // Equal vectors keep the first payload.
            let report = a.insert(Point { vector: v(&[1, 1]), payload: 9 }).unwrap();
            assert!(!report.inserted);
            assert_eq!(a.points()[0].payload, 0);
        }
    }

    #[test]
    fn quad_tree_matches_list_on_stream() {
        let mut list = ListArchive::new();
        let mut tree = QuadTreeArchive::new();
        // Small deterministic stream, 3 objectives.
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        for i in 0..500 {
            let mut comps = Vec::new();
            for _ in 0..3 {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                comps.push((state % 32) as i64);
            }
            let p = Point { vector: ObjectiveVector::new(comps), payload: i };
            list.insert(p.clone()).unwrap();
            tree.insert(p).unwrap();
            assert_eq!(list.len(), tree.len());
        }
        let mut lv = list.vectors();
        let mut tv = tree.vectors();
        lv.sort();
        tv.sort();
        assert_eq!(lv, tv);
    }

    #[test]
    fn dump_format() {
        let mut a = ListArchive::new();
        a.insert(Point { vector: v(&[1, 2]), payload: 7 }).unwrap();
        let text = dump_archive(&a);
        assert_eq!(text, r#"[{"vector":[1,2],"payload":7}]"#);
    }
}
