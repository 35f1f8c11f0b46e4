//! The L×L toric code with qubits on edges.
//!
//! Coordinates: vertex `(x, y)` sits at column `x`, row `y`, with `y` growing
//! downwards. The horizontal edge `(x, y)` joins vertices `(x, y)` and
//! `(x+1, y)`; the vertical edge `(x, y)` joins `(x, y)` and `(x, y+1)`.
//! Face `(x, y)` has those two vertices as its top-left corner, so its boundary
//! is `h(x, y)`, `h(x, y+1)`, `v(x, y)` and `v(x+1, y)`. All arithmetic wraps
//! modulo `L`.
//!
//! Edge indices are linearised orientation-major, then row, then column:
//! `index = o·L² + y·L + x` with horizontal `o = 0` and vertical `o = 1`.

use bitvec::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("lattice size must be at least 2, got {0}")]
    InvalidSize(usize),
    #[error("residual pattern has {0} defects; logical class is only defined for syndrome-free patterns")]
    NonEmptySyndrome(usize),
    #[error("pattern length {found} does not match lattice qubit count {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeIndex {
    pub orientation: Orientation,
    pub x: usize,
    pub y: usize,
}

/// Plaquette (face) coordinate. Ordered row-major so sorted syndromes follow
/// the face linearisation `y·L + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceCoord {
    pub y: usize,
    pub x: usize,
}

impl FaceCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VertexCoord {
    pub x: usize,
    pub y: usize,
}

impl VertexCoord {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Net X flips, one bit per edge qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ErrorPattern {
    flips: BitVec<u64, Lsb0>,
}

impl ErrorPattern {
    pub fn zeros(n_qubits: usize) -> Self {
        Self {
            flips: bitvec![u64, Lsb0; 0; n_qubits],
        }
    }

    pub fn from_edges(lat: &ToricLattice, edges: impl IntoIterator<Item = EdgeIndex>) -> Self {
        let mut pattern = Self::zeros(lat.n_qubits());
        for e in edges {
            pattern.toggle(lat.edge_to_index(e));
        }
        pattern
    }

    pub fn len(&self) -> usize {
        self.flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.flips[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.flips.set(index, value);
    }

    pub fn toggle(&mut self, index: usize) {
        let bit = self.flips[index];
        self.flips.set(index, !bit);
    }

    pub fn weight(&self) -> usize {
        self.flips.count_ones()
    }

    pub fn is_zero(&self) -> bool {
        self.flips.not_any()
    }

    /// Indices of flipped edges in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.flips.iter_ones()
    }

    pub fn xor_assign(&mut self, other: &ErrorPattern) {
        assert_eq!(self.len(), other.len(), "pattern length mismatch");
        self.flips ^= other.flips.as_bitslice();
    }

    pub fn xor(&self, other: &ErrorPattern) -> ErrorPattern {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Number of edges set in both patterns.
    pub fn overlap(&self, other: &ErrorPattern) -> usize {
        self.flips
            .as_raw_slice()
            .iter()
            .zip(other.flips.as_raw_slice())
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }
}

/// Set of defect faces, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Syndrome {
    defects: Vec<FaceCoord>,
}

impl Syndrome {
    /// Builds a syndrome from an arbitrary list; duplicates cancel in pairs.
    pub fn from_faces(faces: impl IntoIterator<Item = FaceCoord>) -> Self {
        let mut all: Vec<FaceCoord> = faces.into_iter().collect();
        all.sort_unstable();
        let mut defects = Vec::with_capacity(all.len());
        for f in all {
            if defects.last() == Some(&f) {
                defects.pop();
            } else {
                defects.push(f);
            }
        }
        Self { defects }
    }

    pub fn defects(&self) -> &[FaceCoord] {
        &self.defects
    }

    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn symmetric_difference(&self, other: &Syndrome) -> Syndrome {
        Syndrome::from_faces(self.defects.iter().chain(other.defects.iter()).copied())
    }
}

/// Homology of a syndrome-free residual, as parities against the two logical Z
/// operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LogicalClass {
    pub z1_parity: bool,
    pub z2_parity: bool,
}

impl LogicalClass {
    pub fn is_trivial(&self) -> bool {
        !self.z1_parity && !self.z2_parity
    }

    pub fn compose(self, other: LogicalClass) -> LogicalClass {
        LogicalClass {
            z1_parity: self.z1_parity ^ other.z1_parity,
            z2_parity: self.z2_parity ^ other.z2_parity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ToricLattice {
    size: usize,
}

impl ToricLattice {
    pub fn new(size: usize) -> Result<Self, LatticeError> {
        if size < 2 {
            return Err(LatticeError::InvalidSize(size));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.size * self.size
    }

    pub fn n_faces(&self) -> usize {
        self.size * self.size
    }

    pub fn n_vertices(&self) -> usize {
        self.size * self.size
    }

    fn wrap(&self, coord: isize) -> usize {
        coord.rem_euclid(self.size as isize) as usize
    }

    pub fn edge_to_index(&self, e: EdgeIndex) -> usize {
        let o = match e.orientation {
            Orientation::Horizontal => 0,
            Orientation::Vertical => 1,
        };
        o * self.size * self.size + e.y * self.size + e.x
    }

    pub fn index_to_edge(&self, index: usize) -> EdgeIndex {
        let l2 = self.size * self.size;
        let orientation = if index < l2 {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        };
        let r = index % l2;
        EdgeIndex {
            orientation,
            x: r % self.size,
            y: r / self.size,
        }
    }

    pub fn face_index(&self, f: FaceCoord) -> usize {
        f.y * self.size + f.x
    }

    pub fn face_from_index(&self, index: usize) -> FaceCoord {
        FaceCoord::new(index % self.size, index / self.size)
    }

    pub fn face_at(&self, x: isize, y: isize) -> FaceCoord {
        FaceCoord::new(self.wrap(x), self.wrap(y))
    }

    pub fn h_edge(&self, x: isize, y: isize) -> EdgeIndex {
        EdgeIndex {
            orientation: Orientation::Horizontal,
            x: self.wrap(x),
            y: self.wrap(y),
        }
    }

    pub fn v_edge(&self, x: isize, y: isize) -> EdgeIndex {
        EdgeIndex {
            orientation: Orientation::Vertical,
            x: self.wrap(x),
            y: self.wrap(y),
        }
    }

    pub fn plaquette_support(&self, f: FaceCoord) -> [EdgeIndex; 4] {
        let (x, y) = (f.x as isize, f.y as isize);
        [
            self.h_edge(x, y),
            self.h_edge(x, y + 1),
            self.v_edge(x, y),
            self.v_edge(x + 1, y),
        ]
    }

    pub fn star_support(&self, v: VertexCoord) -> [EdgeIndex; 4] {
        let (x, y) = (v.x as isize, v.y as isize);
        [
            self.h_edge(x, y),
            self.h_edge(x - 1, y),
            self.v_edge(x, y),
            self.v_edge(x, y - 1),
        ]
    }

    /// The two faces sharing edge `index`.
    pub fn edge_faces(&self, index: usize) -> [FaceCoord; 2] {
        let e = self.index_to_edge(index);
        let (x, y) = (e.x as isize, e.y as isize);
        match e.orientation {
            Orientation::Horizontal => [self.face_at(x, y - 1), self.face_at(x, y)],
            Orientation::Vertical => [self.face_at(x - 1, y), self.face_at(x, y)],
        }
    }

    pub fn syndrome(&self, e: &ErrorPattern) -> Syndrome {
        assert_eq!(e.len(), self.n_qubits(), "pattern length mismatch");
        let mut parity = bitvec![u64, Lsb0; 0; self.n_faces()];
        for j in e.ones() {
            for f in self.edge_faces(j) {
                let k = self.face_index(f);
                let bit = parity[k];
                parity.set(k, !bit);
            }
        }
        // Face linearisation is row-major, matching FaceCoord's ordering.
        Syndrome {
            defects: parity
                .iter_ones()
                .map(|k| self.face_from_index(k))
                .collect(),
        }
    }

    /// Canonical Z̄₁ support: horizontal edges of row 0.
    pub fn logical_z1_support(&self) -> Vec<EdgeIndex> {
        (0..self.size as isize).map(|x| self.h_edge(x, 0)).collect()
    }

    /// Canonical Z̄₂ support: vertical edges of column 0.
    pub fn logical_z2_support(&self) -> Vec<EdgeIndex> {
        (0..self.size as isize).map(|y| self.v_edge(0, y)).collect()
    }

    /// X̄ loop crossing row 0 once (a vertical dual loop through column 0 faces).
    pub fn logical_x1_pattern(&self) -> ErrorPattern {
        ErrorPattern::from_edges(self, (0..self.size as isize).map(|y| self.h_edge(0, y)))
    }

    /// X̄ loop crossing column 0 once (a horizontal dual loop through row 0 faces).
    pub fn logical_x2_pattern(&self) -> ErrorPattern {
        ErrorPattern::from_edges(self, (0..self.size as isize).map(|x| self.v_edge(x, 0)))
    }

    pub fn logical_class(&self, r: &ErrorPattern) -> Result<LogicalClass, LatticeError> {
        if r.len() != self.n_qubits() {
            return Err(LatticeError::LengthMismatch {
                expected: self.n_qubits(),
                found: r.len(),
            });
        }
        let syn = self.syndrome(r);
        if !syn.is_empty() {
            return Err(LatticeError::NonEmptySyndrome(syn.len()));
        }
        Ok(self.logical_class_unchecked(r))
    }

    /// Parities against the logical supports without the syndrome check.
    pub(crate) fn logical_class_unchecked(&self, r: &ErrorPattern) -> LogicalClass {
        let l = self.size;
        let z1 = (0..l).filter(|&x| r.get(x)).count() % 2 == 1;
        let z2 = (0..l).filter(|&y| r.get(l * l + y * l)).count() % 2 == 1;
        LogicalClass {
            z1_parity: z1,
            z2_parity: z2,
        }
    }

    fn axis_distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        d.min(self.size - d)
    }

    pub fn torus_distance(&self, u: FaceCoord, v: FaceCoord) -> usize {
        self.axis_distance(u.x, v.x) + self.axis_distance(u.y, v.y)
    }

    /// Signed step count along one axis: shorter wrap direction, positive on ties.
    fn axis_steps(&self, from: usize, to: usize) -> isize {
        let l = self.size;
        let forward = (to + l - from) % l;
        if forward * 2 <= l {
            forward as isize
        } else {
            forward as isize - l as isize
        }
    }

    /// Dual-lattice path from `u` to `v`: x first along the shorter wrap
    /// direction, then y; antipodal ties go in the increasing direction.
    pub fn shortest_path(&self, u: FaceCoord, v: FaceCoord) -> ErrorPattern {
        let mut path = ErrorPattern::zeros(self.n_qubits());
        self.add_shortest_path(&mut path, u, v);
        path
    }

    /// XORs the shortest path between `u` and `v` into `pattern`.
    pub fn add_shortest_path(&self, pattern: &mut ErrorPattern, u: FaceCoord, v: FaceCoord) {
        let dx = self.axis_steps(u.x, v.x);
        let dy = self.axis_steps(u.y, v.y);
        let (mut x, y0) = (u.x as isize, u.y as isize);
        // Moving face (x, y) -> (x+1, y) crosses v(x+1, y).
        for _ in 0..dx.unsigned_abs() {
            if dx > 0 {
                pattern.toggle(self.edge_to_index(self.v_edge(x + 1, y0)));
                x += 1;
            } else {
                pattern.toggle(self.edge_to_index(self.v_edge(x, y0)));
                x -= 1;
            }
        }
        let mut y = y0;
        // Moving face (x, y) -> (x, y+1) crosses h(x, y+1).
        for _ in 0..dy.unsigned_abs() {
            if dy > 0 {
                pattern.toggle(self.edge_to_index(self.h_edge(x, y + 1)));
                y += 1;
            } else {
                pattern.toggle(self.edge_to_index(self.h_edge(x, y)));
                y -= 1;
            }
        }
    }

    /// Neighbouring face in direction `dir` (0: +x, 1: −x, 2: +y, 3: −y) and
    /// the edge crossed to reach it.
    pub fn step_face(&self, f: FaceCoord, dir: u8) -> (FaceCoord, usize) {
        let (x, y) = (f.x as isize, f.y as isize);
        match dir {
            0 => (
                self.face_at(x + 1, y),
                self.edge_to_index(self.v_edge(x + 1, y)),
            ),
            1 => (
                self.face_at(x - 1, y),
                self.edge_to_index(self.v_edge(x, y)),
            ),
            2 => (
                self.face_at(x, y + 1),
                self.edge_to_index(self.h_edge(x, y + 1)),
            ),
            _ => (
                self.face_at(x, y - 1),
                self.edge_to_index(self.h_edge(x, y)),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet, VecDeque};

    fn lat(l: usize) -> ToricLattice {
        ToricLattice::new(l).unwrap()
    }

    #[test]
    fn counts() {
        let l = lat(7);
        assert_eq!(l.n_qubits(), 98);
        assert_eq!(l.n_faces(), 49);
        assert_eq!(l.n_vertices(), 49);
        assert!(ToricLattice::new(1).is_err());
    }

    #[test]
    fn edge_linearisation_is_bijective() {
        let l = lat(5);
        let mut seen = HashSet::new();
        for i in 0..l.n_qubits() {
            let e = l.index_to_edge(i);
            assert_eq!(l.edge_to_index(e), i);
            seen.insert(e);
        }
        assert_eq!(seen.len(), 50);
        assert_eq!(l.edge_to_index(l.v_edge(2, 3)), 25 + 3 * 5 + 2);
    }

    #[test]
    fn plaquette_corner_and_wrap() {
        let l = lat(7);
        let s = l.plaquette_support(FaceCoord::new(0, 0));
        assert_eq!(
            s,
            [
                l.h_edge(0, 0),
                l.h_edge(0, 1),
                l.v_edge(0, 0),
                l.v_edge(1, 0)
            ]
        );
        let s = l.plaquette_support(FaceCoord::new(6, 6));
        assert!(s.contains(&l.h_edge(6, 0)));
        assert!(s.contains(&l.v_edge(0, 6)));
    }

    #[test]
    fn every_edge_in_two_plaquettes_and_two_stars() {
        let l = lat(7);
        let mut plaq: HashMap<EdgeIndex, usize> = HashMap::new();
        let mut star: HashMap<EdgeIndex, usize> = HashMap::new();
        for y in 0..7 {
            for x in 0..7 {
                for e in l.plaquette_support(FaceCoord::new(x, y)) {
                    *plaq.entry(e).or_default() += 1;
                }
                for e in l.star_support(VertexCoord::new(x, y)) {
                    *star.entry(e).or_default() += 1;
                }
            }
        }
        assert_eq!(plaq.len(), 98);
        assert!(plaq.values().all(|&c| c == 2));
        assert_eq!(star.len(), 98);
        assert!(star.values().all(|&c| c == 2));
    }

    #[test]
    fn plaquette_star_overlap_is_even() {
        let l = lat(5);
        for fy in 0..5 {
            for fx in 0..5 {
                let p: HashSet<_> = l
                    .plaquette_support(FaceCoord::new(fx, fy))
                    .into_iter()
                    .collect();
                for vy in 0..5 {
                    for vx in 0..5 {
                        let n = l
                            .star_support(VertexCoord::new(vx, vy))
                            .iter()
                            .filter(|e| p.contains(e))
                            .count();
                        assert!(n == 0 || n == 2);
                    }
                }
            }
        }
    }

    #[test]
    fn star_interior_vertex() {
        let l = lat(7);
        let s = l.star_support(VertexCoord::new(3, 3));
        let set: HashSet<_> = s.iter().collect();
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn syndrome_examples() {
        let l = lat(7);
        assert!(l.syndrome(&ErrorPattern::zeros(98)).is_empty());

        let e = ErrorPattern::from_edges(&l, [l.v_edge(3, 2)]);
        let s = l.syndrome(&e);
        assert_eq!(s.defects(), &[FaceCoord::new(2, 2), FaceCoord::new(3, 2)]);

        let star = ErrorPattern::from_edges(&l, l.star_support(VertexCoord::new(4, 1)));
        assert!(l.syndrome(&star).is_empty());
    }

    #[test]
    fn logical_class_examples() {
        let l = lat(7);
        assert_eq!(
            l.logical_class(&ErrorPattern::zeros(98)).unwrap(),
            LogicalClass::default()
        );
        let x1 = l.logical_class(&l.logical_x1_pattern()).unwrap();
        assert_eq!((x1.z1_parity, x1.z2_parity), (true, false));
        let x2 = l.logical_class(&l.logical_x2_pattern()).unwrap();
        assert_eq!((x2.z1_parity, x2.z2_parity), (false, true));

        let star = ErrorPattern::from_edges(&l, l.star_support(VertexCoord::new(0, 0)));
        assert!(l.logical_class(&star).unwrap().is_trivial());

        // As an X pattern a plaquette boundary is not a stabilizer: it carries a syndrome.
        let plaq = ErrorPattern::from_edges(&l, l.plaquette_support(FaceCoord::new(2, 2)));
        assert!(matches!(
            l.logical_class(&plaq),
            Err(LatticeError::NonEmptySyndrome(4))
        ));
    }

    #[test]
    fn torus_distance_examples() {
        let l = lat(7);
        let u = FaceCoord::new(0, 0);
        assert_eq!(l.torus_distance(u, u), 0);
        let v = FaceCoord::new(3, 5);
        // Brute force over wrap choices per axis.
        let brute = |a: usize, b: usize| {
            let (a, b) = (a as isize, b as isize);
            [b - a, b - a + 7, b - a - 7]
                .iter()
                .map(|d| d.abs())
                .min()
                .unwrap() as usize
        };
        assert_eq!(brute(0, 3) + brute(0, 5), 5);
        assert_eq!(l.torus_distance(u, v), 5);
        assert_eq!(l.torus_distance(v, u), 5);
    }

    #[test]
    fn shortest_path_adjacent_is_shared_edge() {
        let l = lat(7);
        let p = l.shortest_path(FaceCoord::new(2, 2), FaceCoord::new(3, 2));
        assert_eq!(
            p.ones().collect::<Vec<_>>(),
            vec![l.edge_to_index(l.v_edge(3, 2))]
        );
        let p = l.shortest_path(FaceCoord::new(2, 0), FaceCoord::new(2, 6));
        assert_eq!(
            p.ones().collect::<Vec<_>>(),
            vec![l.edge_to_index(l.h_edge(2, 0))]
        );
    }

    #[test]
    fn antipodal_tie_goes_forward() {
        let l = lat(8);
        let p = l.shortest_path(FaceCoord::new(6, 0), FaceCoord::new(2, 0));
        // Forward from x=6: crosses v(7,0), v(0,0), v(1,0), v(2,0).
        let expected: Vec<usize> = [0, 1, 2, 7]
            .iter()
            .map(|&x| l.edge_to_index(l.v_edge(x, 0)))
            .collect();
        assert_eq!(p.ones().collect::<Vec<_>>(), expected);
    }

    fn bfs_distance(l: &ToricLattice, u: FaceCoord, v: FaceCoord) -> usize {
        let mut dist = vec![usize::MAX; l.n_faces()];
        let mut q = VecDeque::new();
        dist[l.face_index(u)] = 0;
        q.push_back(u);
        while let Some(f) = q.pop_front() {
            let d = dist[l.face_index(f)];
            for dir in 0..4 {
                let (g, _) = l.step_face(f, dir);
                if dist[l.face_index(g)] == usize::MAX {
                    dist[l.face_index(g)] = d + 1;
                    q.push_back(g);
                }
            }
        }
        dist[l.face_index(v)]
    }

    #[test]
    fn shortest_path_matches_bfs_and_has_right_boundary() {
        use rand::{Rng, SeedableRng};
        let l = lat(11);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let u = FaceCoord::new(rng.gen_range(0..11), rng.gen_range(0..11));
            let mut v = u;
            while v == u {
                v = FaceCoord::new(rng.gen_range(0..11), rng.gen_range(0..11));
            }
            let p = l.shortest_path(u, v);
            let d = bfs_distance(&l, u, v);
            assert_eq!(p.weight(), d);
            assert_eq!(l.torus_distance(u, v), d);
            assert_eq!(l.syndrome(&p), Syndrome::from_faces([u, v]));
        }
    }

    #[test]
    fn syndrome_from_faces_cancels_duplicates() {
        let a = FaceCoord::new(1, 1);
        let b = FaceCoord::new(2, 1);
        let s = Syndrome::from_faces([b, a, b]);
        assert_eq!(s.defects(), &[a]);
    }
}
