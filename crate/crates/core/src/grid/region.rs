//! Sets of points represented as disjoint box lists.

use super::ibox::{IBox, Index3};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    boxes: Vec<IBox>,
}

impl Region {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_box(b: IBox) -> Self {
        let mut r = Self::new();
        r.add(b);
        r
    }

    pub fn boxes(&self) -> &[IBox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn volume(&self) -> usize {
        self.boxes.iter().map(IBox::volume).sum()
    }

    pub fn contains(&self, p: Index3) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    /// Add the points of `b`, keeping the boxes disjoint.
    pub fn add(&mut self, b: IBox) {
        if b.is_empty() {
            return;
        }
        let mut pieces = vec![b];
        for existing in &self.boxes {
            pieces = pieces.iter().flat_map(|p| p.subtract(existing)).collect();
        }
        self.boxes.extend(pieces);
        self.coalesce();
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut r = self.clone();
        for b in &other.boxes {
            r.add(*b);
        }
        r
    }

    pub fn subtract_box(&self, cut: &IBox) -> Region {
        Region {
            boxes: self.boxes.iter().flat_map(|b| b.subtract(cut)).collect(),
        }
    }

    pub fn subtract(&self, other: &Region) -> Region {
        let mut r = self.clone();
        for b in &other.boxes {
            r = r.subtract_box(b);
        }
        r
    }

    pub fn intersect_box(&self, b: &IBox) -> Region {
        Region {
            boxes: self
                .boxes
                .iter()
                .map(|x| x.intersect(b))
                .filter(|x| !x.is_empty())
                .collect(),
        }
    }

    /// Whether every point of `b` is in the region.
    pub fn contains_box(&self, b: &IBox) -> bool {
        Region::from_box(*b).subtract(self).is_empty()
    }

    pub fn bounding_box(&self) -> IBox {
        self.boxes.iter().fold(IBox::empty(), |acc, b| acc.hull(b))
    }

    /// Merge pairs of boxes that share a full face, so that regions built
    /// from one box stay one box.
    fn coalesce(&mut self) {
        loop {
            let mut merged = false;
            'outer: for a in 0..self.boxes.len() {
                for b in (a + 1)..self.boxes.len() {
                    if let Some(m) = try_merge(&self.boxes[a], &self.boxes[b]) {
                        self.boxes[a] = m;
                        self.boxes.swap_remove(b);
                        merged = true;
                        break 'outer;
                    }
                }
            }
            if !merged {
                break;
            }
        }
        self.boxes.sort();
    }
}

fn try_merge(a: &IBox, b: &IBox) -> Option<IBox> {
    for d in 0..3 {
        let others_equal = (0..3)
            .filter(|&e| e != d)
            .all(|e| a.lo[e] == b.lo[e] && a.hi[e] == b.hi[e]);
        if !others_equal {
            continue;
        }
        if a.hi[d] == b.lo[d] || b.hi[d] == a.lo[d] {
            let mut m = *a;
            m.lo[d] = a.lo[d].min(b.lo[d]);
            m.hi[d] = a.hi[d].max(b.hi[d]);
            return Some(m);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_box() -> impl Strategy<Value = IBox> {
        (
            prop::array::uniform3(-6i64..6),
            prop::array::uniform3(1i64..6),
        )
            .prop_map(|(lo, len)| IBox::new(lo, [lo[0] + len[0], lo[1] + len[1], lo[2] + len[2]]))
    }

    proptest! {
        #[test]
        fn union_matches_pointwise_membership(boxes in prop::collection::vec(arb_box(), 1..5)) {
            let mut r = Region::new();
            for b in &boxes { r.add(*b); }
            let world = IBox::new([-7; 3], [13; 3]);
            let mut count = 0;
            for p in world.points() {
                let expect = boxes.iter().any(|b| b.contains(p));
                let covered = r.boxes().iter().filter(|b| b.contains(p)).count();
                prop_assert_eq!(covered, usize::from(expect));
                count += usize::from(expect);
            }
            prop_assert_eq!(r.volume(), count);
        }
    }

    #[test]
    fn adjacent_boxes_coalesce() {
        let mut r = Region::from_box(IBox::new([0; 3], [4, 4, 4]));
        r.add(IBox::new([4, 0, 0], [8, 4, 4]));
        assert_eq!(r.boxes(), &[IBox::new([0; 3], [8, 4, 4])]);
        assert!(r.contains_box(&IBox::new([1, 1, 1], [7, 3, 3])));
        assert!(!r.contains_box(&IBox::new([1, 1, 1], [9, 3, 3])));
    }
}
