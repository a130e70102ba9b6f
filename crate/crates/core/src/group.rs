//! Finite groups and bounded truncations of `Z^k`, with counting Haar
//! weights, metric balls, and the set algebra (products, translates,
//! complements) used throughout the certification chain.
//!
//! Group elements are addressed by their index in the carrier. The carrier is
//! enumerated in mixed-radix order, last coordinate fastest, so index `0` is
//! the identity for cyclic groups.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates of a group element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Element(pub Vec<i64>);

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupKind {
    /// `Z_{N1} x ... x Z_{Nk}`.
    Cyclic { moduli: Vec<u32> },
    /// The box `[-w1, w1] x ... x [-wk, wk]` inside `Z^k`.
    Truncated { half_widths: Vec<u32> },
}

/// A finite group, or a symmetric box truncation of `Z^k`.
#[derive(Debug, Clone)]
pub struct GroupModel {
    kind: GroupKind,
    carrier: Vec<Element>,
    haar: Vec<f64>,
    radices: Vec<usize>,
    strides: Vec<usize>,
    identity: usize,
}

impl GroupModel {
    pub fn cyclic(moduli: &[u32]) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::InvalidGroup("no moduli given".into()));
        }
        if moduli.contains(&0) {
            return Err(Error::InvalidGroup("moduli must be positive".into()));
        }
        let radices: Vec<usize> = moduli.iter().map(|&n| n as usize).collect();
        Self::build(GroupKind::Cyclic { moduli: moduli.to_vec() }, radices, |_, c| c as i64)
    }

    pub fn truncated(half_widths: &[u32]) -> Result<Self> {
        if half_widths.is_empty() {
            return Err(Error::InvalidGroup("no half widths given".into()));
        }
        let radices: Vec<usize> = half_widths.iter().map(|&w| 2 * w as usize + 1).collect();
        let hw = half_widths.to_vec();
        Self::build(
            GroupKind::Truncated { half_widths: half_widths.to_vec() },
            radices,
            move |axis, c| c as i64 - hw[axis] as i64,
        )
    }

    fn build(kind: GroupKind, radices: Vec<usize>, coord: impl Fn(usize, usize) -> i64) -> Result<Self> {
        let size = radices
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .filter(|&s| s <= 1 << 24)
            .ok_or_else(|| Error::InvalidGroup("carrier too large".into()))?;
        let mut strides = vec![1usize; radices.len()];
        for axis in (0..radices.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * radices[axis + 1];
        }
        let carrier: Vec<Element> = (0..size)
            .map(|idx| {
                Element(
                    radices
                        .iter()
                        .zip(&strides)
                        .enumerate()
                        .map(|(axis, (&r, &s))| coord(axis, (idx / s) % r))
                        .collect(),
                )
            })
            .collect();
        let mut group = Self {
            kind,
            haar: vec![1.0; size],
            carrier,
            radices,
            strides,
            identity: 0,
        };
        let zero = Element(vec![0; group.rank()]);
        group.identity = group.index_of(&zero)?;
        Ok(group)
    }

    /// Replaces the counting measure with explicit positive weights.
    pub fn with_haar_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.carrier.len() {
            return Err(Error::InvalidGroup(format!(
                "expected {} Haar weights, got {}",
                self.carrier.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidGroup("Haar weights must be positive".into()));
        }
        self.haar = weights;
        Ok(self)
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn is_cyclic(&self) -> bool {
        matches!(self.kind, GroupKind::Cyclic { .. })
    }

    /// Number of coordinates.
    pub fn rank(&self) -> usize {
        self.radices.len()
    }

    pub fn order(&self) -> usize {
        self.carrier.len()
    }

    pub fn carrier(&self) -> &[Element] {
        &self.carrier
    }

    pub fn element(&self, idx: usize) -> &Element {
        &self.carrier[idx]
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn haar_weight(&self, idx: usize) -> f64 {
        self.haar[idx]
    }

    pub fn index_of(&self, x: &Element) -> Result<usize> {
        if x.0.len() != self.rank() {
            return Err(Error::NotInCarrier(x.to_string()));
        }
        let mut idx = 0usize;
        for (axis, &c) in x.0.iter().enumerate() {
            let digit = match &self.kind {
                GroupKind::Cyclic { moduli } => {
                    let n = moduli[axis] as i64;
                    if !(0..n).contains(&c) {
                        return Err(Error::NotInCarrier(x.to_string()));
                    }
                    c
                }
                GroupKind::Truncated { half_widths } => {
                    let w = half_widths[axis] as i64;
                    if !(-w..=w).contains(&c) {
                        return Err(Error::NotInCarrier(x.to_string()));
                    }
                    c + w
                }
            };
            idx += digit as usize * self.strides[axis];
        }
        Ok(idx)
    }

    /// Reduces raw coordinates into the carrier: modular for cyclic groups,
    /// `OutOfCarrier` for truncations.
    fn reduce(&self, raw: Vec<i64>) -> Result<usize> {
        match &self.kind {
            GroupKind::Cyclic { moduli } => {
                let coords = raw
                    .into_iter()
                    .zip(moduli)
                    .map(|(c, &n)| c.rem_euclid(n as i64))
                    .collect();
                self.index_of(&Element(coords))
            }
            GroupKind::Truncated { .. } => {
                let e = Element(raw);
                self.index_of(&e).map_err(|_| Error::OutOfCarrier(e.to_string()))
            }
        }
    }

    /// `a * b`.
    pub fn compose(&self, a: usize, b: usize) -> Result<usize> {
        if self.is_cyclic() {
            let mut idx = 0;
            for (&r, &s) in self.radices.iter().zip(&self.strides) {
                idx += (((a / s) % r + (b / s) % r) % r) * s;
            }
            return Ok(idx);
        }
        let raw = self.carrier[a]
            .0
            .iter()
            .zip(&self.carrier[b].0)
            .map(|(x, y)| x + y)
            .collect();
        self.reduce(raw)
    }

    pub fn inverse(&self, a: usize) -> Result<usize> {
        if self.is_cyclic() {
            let mut idx = 0;
            for (&r, &s) in self.radices.iter().zip(&self.strides) {
                idx += ((r - (a / s) % r) % r) * s;
            }
            return Ok(idx);
        }
        self.reduce(self.carrier[a].0.iter().map(|x| -x).collect())
    }

    /// Word length of `x`: max over coordinates of the (cyclic) absolute value.
    pub fn norm(&self, x: usize) -> u64 {
        let coords = &self.carrier[x].0;
        match &self.kind {
            GroupKind::Cyclic { moduli } => coords
                .iter()
                .zip(moduli)
                .map(|(&c, &n)| {
                    let c = c as u64;
                    c.min(n as u64 - c)
                })
                .max()
                .unwrap_or(0),
            GroupKind::Truncated { .. } => coords.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0),
        }
    }

    /// Left-invariant distance `norm(a^-1 b)`.
    pub fn distance(&self, a: usize, b: usize) -> u64 {
        match &self.kind {
            GroupKind::Cyclic { moduli } => self.carrier[a]
                .0
                .iter()
                .zip(&self.carrier[b].0)
                .zip(moduli)
                .map(|((&x, &y), &n)| {
                    let d = (y - x).rem_euclid(n as i64) as u64;
                    d.min(n as u64 - d)
                })
                .max()
                .unwrap_or(0),
            GroupKind::Truncated { .. } => self.carrier[a]
                .0
                .iter()
                .zip(&self.carrier[b].0)
                .map(|(x, y)| (y - x).unsigned_abs())
                .max()
                .unwrap_or(0),
        }
    }

    /// Largest norm attained on the carrier.
    pub fn diameter(&self) -> u64 {
        (0..self.order()).map(|x| self.norm(x)).max().unwrap_or(0)
    }

    /// `{x : norm(x) <= radius}`, always symmetric and containing `e`.
    pub fn ball(&self, radius: u64) -> CompactSet {
        let set = CompactSet::from_indices((0..self.order()).filter(|&x| self.norm(x) <= radius));
        debug_assert!(self.check_neighborhood(&set).is_ok());
        set
    }

    pub fn full_set(&self) -> CompactSet {
        CompactSet::from_indices(0..self.order())
    }

    /// `K L = {k l : k in K, l in L}`.
    pub fn product_set(&self, k: &CompactSet, l: &CompactSet) -> Result<CompactSet> {
        let mut out = BTreeSet::new();
        for &a in k.iter() {
            for &b in l.iter() {
                out.insert(self.compose(a, b)?);
            }
        }
        Ok(CompactSet { members: out })
    }

    /// `y K`.
    pub fn translate_set(&self, y: usize, k: &CompactSet) -> Result<CompactSet> {
        k.iter()
            .map(|&x| self.compose(y, x))
            .collect::<Result<BTreeSet<_>>>()
            .map(|members| CompactSet { members })
    }

    pub fn complement(&self, k: &CompactSet) -> CompactSet {
        CompactSet::from_indices((0..self.order()).filter(|x| !k.contains(*x)))
    }

    pub fn inverse_set(&self, k: &CompactSet) -> Result<CompactSet> {
        k.iter()
            .map(|&x| self.inverse(x))
            .collect::<Result<BTreeSet<_>>>()
            .map(|members| CompactSet { members })
    }

    /// Haar measure `|K|`.
    pub fn measure(&self, k: &CompactSet) -> f64 {
        k.iter().map(|&x| self.haar[x]).sum()
    }

    /// Fails unless `U = U^-1` and `e in U`.
    pub fn check_neighborhood(&self, u: &CompactSet) -> Result<()> {
        if !u.contains(self.identity) {
            return Err(Error::MissingIdentity);
        }
        for &x in u.iter() {
            match self.inverse(x) {
                Ok(inv) if u.contains(inv) => {}
                _ => return Err(Error::NonSymmetricNeighborhood),
            }
        }
        Ok(())
    }

    /// Separation constant `max_x card{j : x_j in xU}`, evaluated from the
    /// definition by scanning every translate `xU`.
    pub fn separation_constant(&self, points: &PointSet, u: &CompactSet) -> Result<usize> {
        self.check_neighborhood(u)?;
        let mut best = 0;
        for x in 0..self.order() {
            let window = match self.translate_set(x, u) {
                Ok(w) => w,
                // On a truncation the translate may leave the box; only the
                // part inside the carrier can hold points.
                Err(Error::OutOfCarrier(_)) => CompactSet::from_indices(
                    u.iter().filter_map(|&v| self.compose(x, v).ok()),
                ),
                Err(e) => return Err(e),
            };
            let count = points.iter().filter(|&&p| window.contains(p)).count();
            best = best.max(count);
        }
        Ok(best)
    }

    /// `|| sum_j chi_{x_j U} ||_inf`, the same constant through the
    /// indicator-sum formulation.
    pub fn indicator_sum_bound(&self, points: &PointSet, u: &CompactSet) -> Result<usize> {
        self.check_neighborhood(u)?;
        let mut cover = vec![0usize; self.order()];
        for &p in points.iter() {
            for &v in u.iter() {
                match self.compose(p, v) {
                    Ok(x) => cover[x] += 1,
                    Err(Error::OutOfCarrier(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(cover.into_iter().max().unwrap_or(0))
    }
}

/// A finite subset of the carrier, stored as sorted carrier indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct CompactSet {
    members: BTreeSet<usize>,
}

impl CompactSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        Self { members: indices.into_iter().collect() }
    }

    pub fn from_elements<'a>(group: &GroupModel, elems: impl IntoIterator<Item = &'a Element>) -> Result<Self> {
        elems
            .into_iter()
            .map(|e| group.index_of(e))
            .collect::<Result<BTreeSet<_>>>()
            .map(|members| Self { members })
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.contains(&x)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> {
        self.members.iter()
    }

    pub fn is_subset(&self, other: &CompactSet) -> bool {
        self.members.is_subset(&other.members)
    }

    /// Membership mask over a carrier of the given order.
    pub fn mask(&self, order: usize) -> Vec<bool> {
        let mut m = vec![false; order];
        for &x in &self.members {
            m[x] = true;
        }
        m
    }
}

/// An indexed family `x_j` of carrier elements; repeated points are allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PointSet {
    points: Vec<usize>,
}

impl PointSet {
    pub fn new(points: Vec<usize>) -> Self {
        Self { points }
    }

    /// Every element of the carrier, once.
    pub fn full(group: &GroupModel) -> Self {
        Self::new((0..group.order()).collect())
    }

    /// The sublattice of points whose coordinates are multiples of `steps`.
    pub fn lattice(group: &GroupModel, steps: &[u32]) -> Result<Self> {
        if steps.len() != group.rank() || steps.contains(&0) {
            return Err(Error::InvalidGroup(format!(
                "lattice steps {steps:?} do not fit a rank-{} group",
                group.rank()
            )));
        }
        Ok(Self::new(
            (0..group.order())
                .filter(|&x| {
                    group.element(x).0.iter().zip(steps).all(|(c, &s)| c.rem_euclid(s as i64) == 0)
                })
                .collect(),
        ))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> {
        self.points.iter()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn z(moduli: &[u32]) -> GroupModel {
        GroupModel::cyclic(moduli).unwrap()
    }

    fn idx(g: &GroupModel, c: &[i64]) -> usize {
        g.index_of(&Element(c.to_vec())).unwrap()
    }

    fn set(g: &GroupModel, cs: &[&[i64]]) -> CompactSet {
        CompactSet::from_indices(cs.iter().map(|c| idx(g, c)))
    }

    #[test]
    fn compose_and_inverse_examples() {
        let z8 = z(&[8]);
        assert_eq!(z8.compose(idx(&z8, &[3]), idx(&z8, &[6])).unwrap(), idx(&z8, &[1]));
        assert_eq!(z8.inverse(idx(&z8, &[3])).unwrap(), idx(&z8, &[5]));
        assert_eq!(z8.inverse(z8.identity()).unwrap(), z8.identity());

        let z44 = z(&[4, 4]);
        let p = z44.compose(idx(&z44, &[1, 2]), idx(&z44, &[3, 3])).unwrap();
        assert_eq!(z44.element(p), &Element(vec![0, 1]));
        assert_eq!(z44.inverse(idx(&z44, &[1, 2])).unwrap(), idx(&z44, &[3, 2]));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = rng.random_range(0..z44.order());
            assert_eq!(z44.compose(z44.identity(), x).unwrap(), x);
            assert_eq!(z44.compose(x, z44.identity()).unwrap(), x);
        }
    }

    #[test]
    fn cyclic_group_axioms_hold_exhaustively() {
        let g = z(&[3, 4]);
        let e = g.identity();
        for a in 0..g.order() {
            assert_eq!(g.compose(a, g.inverse(a).unwrap()).unwrap(), e);
            for b in 0..g.order() {
                for c in 0..g.order() {
                    let left = g.compose(g.compose(a, b).unwrap(), c).unwrap();
                    let right = g.compose(a, g.compose(b, c).unwrap()).unwrap();
                    assert_eq!(left, right);
                }
            }
        }
        assert!(g.haar.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn balls() {
        let z8 = z(&[8]);
        assert_eq!(z8.ball(1), set(&z8, &[&[7], &[0], &[1]]));
        assert_eq!(z8.ball(0), set(&z8, &[&[0]]));
        assert_eq!(z(&[4, 4]).ball(1).len(), 9);
        assert_eq!(z8.diameter(), 4);
    }

    #[test]
    fn product_translate_complement_measure() {
        let z8 = z(&[8]);
        let k = set(&z8, &[&[0], &[1]]);
        assert_eq!(z8.product_set(&k, &k).unwrap(), set(&z8, &[&[0], &[1], &[2]]));
        assert_eq!(z8.product_set(&k, &set(&z8, &[&[0]])).unwrap(), k);
        assert_eq!(z8.translate_set(idx(&z8, &[3]), &k).unwrap(), set(&z8, &[&[3], &[4]]));
        assert_eq!(z8.translate_set(z8.identity(), &k).unwrap(), k);

        let z4 = z(&[4]);
        let sub = set(&z4, &[&[0], &[2]]);
        assert_eq!(z4.product_set(&sub, &sub).unwrap(), sub);
        assert_eq!(z4.complement(&set(&z4, &[&[0]])), set(&z4, &[&[1], &[2], &[3]]));
        assert!(z4.complement(&z4.full_set()).is_empty());
        assert_eq!(z4.complement(&CompactSet::empty()), z4.full_set());

        let z44 = z(&[4, 4]);
        let k2 = set(&z44, &[&[0, 0], &[0, 1]]);
        assert_eq!(
            z44.translate_set(idx(&z44, &[1, 0]), &k2).unwrap(),
            set(&z44, &[&[1, 0], &[1, 1]])
        );

        assert_eq!(z8.measure(&z8.ball(1)), 3.0);
        assert_eq!(z8.measure(&CompactSet::empty()), 0.0);
        assert_eq!(z44.measure(&z44.full_set()), 16.0);
    }

    #[test]
    fn separation_constant_examples() {
        let z8 = z(&[8]);
        let u = z8.ball(1);
        assert_eq!(z8.separation_constant(&PointSet::full(&z8), &u).unwrap(), 3);
        for r in 0..4 {
            let single = PointSet::new(vec![z8.identity()]);
            assert_eq!(z8.separation_constant(&single, &z8.ball(r)).unwrap(), 1);
        }
        let dup = PointSet::new(vec![idx(&z8, &[0]), idx(&z8, &[0]), idx(&z8, &[1])]);
        assert_eq!(z8.separation_constant(&dup, &u).unwrap(), 3);

        let lopsided = set(&z8, &[&[0], &[1]]);
        assert_eq!(
            z8.separation_constant(&dup, &lopsided),
            Err(Error::NonSymmetricNeighborhood)
        );
    }

    #[test]
    fn truncated_group_flags_escapes() {
        let g = GroupModel::truncated(&[2]).unwrap();
        assert_eq!(g.order(), 5);
        assert_eq!(g.element(g.identity()), &Element(vec![0]));
        let one = idx(&g, &[1]);
        let two = idx(&g, &[2]);
        assert_eq!(g.compose(one, one).unwrap(), two);
        assert!(matches!(g.compose(two, one), Err(Error::OutOfCarrier(_))));
        assert_eq!(g.inverse(two).unwrap(), idx(&g, &[-2]));
        assert!(matches!(g.product_set(&g.ball(1), &g.ball(2)), Err(Error::OutOfCarrier(_))));
        assert!(matches!(g.translate_set(two, &g.ball(1)), Err(Error::OutOfCarrier(_))));
        assert_eq!(g.ball(5), g.full_set());
        assert_eq!(g.distance(idx(&g, &[-2]), two), 4);
    }

    #[test]
    fn lattice_points() {
        let g = z(&[8, 8]);
        let lat = PointSet::lattice(&g, &[2, 4]).unwrap();
        assert_eq!(lat.len(), 8);
        assert!(PointSet::lattice(&g, &[2]).is_err());
    }

    #[test]
    fn weighted_haar_rejects_nonpositive() {
        let g = z(&[3]);
        assert!(g.clone().with_haar_weights(vec![1.0, 0.0, 2.0]).is_err());
        let w = g.with_haar_weights(vec![1.0, 0.5, 2.0]).unwrap();
        assert_eq!(w.measure(&w.full_set()), 3.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn groups() -> impl Strategy<Value = GroupModel> {
            prop_oneof![
                (1u32..20).prop_map(|n| z(&[n])),
                (1u32..6, 1u32..6).prop_map(|(a, b)| z(&[a, b])),
            ]
        }

        fn subset(order: usize) -> impl Strategy<Value = CompactSet> {
            proptest::collection::vec(any::<bool>(), order)
                .prop_map(|bits| CompactSet::from_indices(bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)))
        }

        proptest! {
            #[test]
            fn balls_are_symmetric(g in groups(), r in 0u64..6) {
                let u = g.ball(r);
                for &x in u.iter() {
                    prop_assert!(u.contains(g.inverse(x).unwrap()));
                }
                prop_assert!(u.contains(g.identity()));
            }

            #[test]
            fn counting_measure_is_left_invariant(
                (g, k, y) in groups().prop_flat_map(|g| {
                    let n = g.order();
                    (Just(g), subset(n), 0..n)
                })
            ) {
                let yk = g.translate_set(y, &k).unwrap();
                prop_assert_eq!(g.measure(&yk), g.measure(&k));
            }

            #[test]
            fn product_set_is_monotone(
                (g, k, extra, l) in groups().prop_flat_map(|g| {
                    let n = g.order();
                    (Just(g), subset(n), subset(n), subset(n))
                })
            ) {
                let big = CompactSet::from_indices(k.iter().chain(extra.iter()).copied());
                let kl = g.product_set(&k, &l).unwrap();
                let bigl = g.product_set(&big, &l).unwrap();
                prop_assert!(kl.is_subset(&bigl));
            }
        }
    }

    #[test]
    fn separation_routes_agree_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let groups = [z(&[8]), z(&[16]), z(&[4, 4]), z(&[5, 7])];
        for trial in 0..50 {
            let g = &groups[trial % groups.len()];
            let m = rng.random_range(1..=2 * g.order());
            let pts = PointSet::new((0..m).map(|_| rng.random_range(0..g.order())).collect());
            let u = g.ball(rng.random_range(0..=3));
            assert_eq!(
                g.separation_constant(&pts, &u).unwrap(),
                g.indicator_sum_bound(&pts, &u).unwrap()
            );
        }
    }
}
