//! Matching decoders: complete weighted graph on syndrome defects, exact
//! minimum-weight perfect matching, and conversion of the matching into a
//! correction pattern.

pub mod blossom;
pub mod weights;

use thiserror::Error;

use crate::lattice::{ErrorPattern, FaceCoord, Syndrome, ToricLattice};
use crate::seed;
use blossom::{max_weight_matching, BlossomSolution, DualInit};
pub use weights::{Family, WeightFamily};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchError {
    #[error("perfect matching needs an even number of vertices, got {0}")]
    OddVertexCount(usize),
    #[error("invalid weight family: {0}")]
    InvalidFamily(String),
}

/// Complete graph on the defects with symmetric integer edge weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchGraph {
    pub vertices: Vec<FaceCoord>,
    weights: Vec<i64>,
}

impl MatchGraph {
    /// Builds a graph from an explicit symmetric weight matrix (row-major).
    pub fn from_matrix(vertices: Vec<FaceCoord>, weights: Vec<i64>) -> Self {
        let n = vertices.len();
        assert_eq!(weights.len(), n * n, "weight matrix must be n×n");
        Self { vertices, weights }
    }

    /// Graph with `n` placeholder vertices and weights `w(i, j)`.
    pub fn from_fn(n: usize, mut w: impl FnMut(usize, usize) -> i64) -> Self {
        let mut weights = vec![0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let x = w(i, j);
                weights[i * n + j] = x;
                weights[j * n + i] = x;
            }
        }
        Self {
            vertices: vec![FaceCoord::new(0, 0); n],
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn weight(&self, i: usize, j: usize) -> i64 {
        self.weights[i * self.len() + j]
    }

    pub fn edge_count(&self) -> usize {
        let n = self.len();
        n * n.saturating_sub(1) / 2
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    /// Matched vertex pairs `(i, j)` with `i < j`, sorted.
    pub pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn total_weight(&self, g: &MatchGraph) -> i64 {
        self.pairs.iter().map(|&(i, j)| g.weight(i, j)).sum()
    }

    fn from_mates(mate: &[Option<usize>]) -> Self {
        let pairs = mate
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.filter(|&j| i < j).map(|j| (i, j)))
            .collect();
        Self { pairs }
    }
}

/// How much of the complete graph the blossom solver sees per attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Every pair, in one solve.
    Complete,
    /// Start from each vertex's `k` cheapest edges; add any edge whose reduced
    /// cost the final duals leave negative and re-solve until the duals
    /// certify the matching on the complete graph.
    Certified { k: usize },
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::Certified { k: 10 }
    }
}

/// Exact minimum-weight perfect matching of the complete graph `g`.
pub fn mwpm(g: &MatchGraph) -> Result<Matching, MatchError> {
    mwpm_with(g, Strategy::default())
}

pub fn mwpm_with(g: &MatchGraph, strategy: Strategy) -> Result<Matching, MatchError> {
    let n = g.len();
    if n % 2 == 1 {
        return Err(MatchError::OddVertexCount(n));
    }
    match n {
        0 => return Ok(Matching::default()),
        2 => {
            return Ok(Matching {
                pairs: vec![(0, 1)],
            })
        }
        _ => {}
    }
    // Minimum weight perfect = maximum weight of (C − w) at maximum cardinality.
    let c = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| g.weight(i, j))
        .max()
        .unwrap()
        + 1;
    let flipped = |i: usize, j: usize| c - g.weight(i, j);

    let mut k = match strategy {
        Strategy::Complete => n - 1,
        Strategy::Certified { k } => k.clamp(1, n - 1),
    };
    let mut extra: Vec<(usize, usize)> = Vec::new();
    loop {
        let mut pairs = nearest_pairs(g, k);
        pairs.extend(extra.iter().copied());
        pairs.sort_unstable();
        pairs.dedup();
        let edges: Vec<(usize, usize, i64)> =
            pairs.iter().map(|&(i, j)| (i, j, flipped(i, j))).collect();
        let sol = max_weight_matching(n, &edges, true, DualInit::Greedy);
        if !sol.is_perfect() {
            debug_assert!(k < n - 1, "complete graph on even n has a perfect matching");
            k = (2 * k).min(n - 1);
            continue;
        }
        if k == n - 1 {
            return Ok(Matching::from_mates(&sol.mate));
        }
        let violated = negative_reduced_costs(&sol, n, flipped);
        if violated.is_empty() {
            return Ok(Matching::from_mates(&sol.mate));
        }
        extra.extend(violated);
    }
}

/// Union over vertices of their `k` lowest-weight incident pairs.
fn nearest_pairs(g: &MatchGraph, k: usize) -> Vec<(usize, usize)> {
    let n = g.len();
    if k >= n - 1 {
        return (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
    }
    let mut out = Vec::with_capacity(n * k);
    let mut row: Vec<(i64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        row.clear();
        row.extend((0..n).filter(|&j| j != i).map(|j| (g.weight(i, j), j)));
        row.select_nth_unstable(k - 1);
        out.extend(row[..k].iter().map(|&(_, j)| (i.min(j), i.max(j))));
    }
    out
}

/// Pairs whose full reduced cost (vertex plus enclosing-blossom duals) is
/// negative under the solver's final duals.
fn negative_reduced_costs(
    sol: &BlossomSolution,
    n: usize,
    w: impl Fn(usize, usize) -> i64,
) -> Vec<(usize, usize)> {
    let chains: Vec<Vec<usize>> = (0..n).map(|v| sol.ancestors(v)).collect();
    let mut bad = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut s = sol.dual[i] + sol.dual[j] - 2 * w(i, j);
            if !chains[i].is_empty() && !chains[j].is_empty() {
                for (a, b) in chains[i].iter().zip(&chains[j]) {
                    if a != b {
                        break;
                    }
                    s += 2 * sol.dual[*a];
                }
            }
            if s < 0 {
                bad.push((i, j));
            }
        }
    }
    bad
}

/// Builds the complete defect graph for `syn` under weight family `w`.
pub fn build_graph(
    lat: &ToricLattice,
    syn: &Syndrome,
    w: &WeightFamily,
) -> Result<MatchGraph, MatchError> {
    Decoder::new(*lat, w.clone())?.graph(syn.defects())
}

/// Correction pattern for `syn`: XOR of shortest paths over matched pairs.
pub fn decode(
    lat: &ToricLattice,
    syn: &Syndrome,
    w: &WeightFamily,
) -> Result<ErrorPattern, MatchError> {
    Decoder::new(*lat, w.clone())?.decode(syn.defects())
}

/// Weight multiplier that leaves room for the tie-breaking jitter.
pub const TIE_SCALE: u64 = 1 << 20;

/// A weight family bound to a lattice, with its weights tabulated by distance.
#[derive(Debug, Clone)]
pub struct Decoder {
    lat: ToricLattice,
    family: WeightFamily,
    table: Vec<i64>,
    strategy: Strategy,
}

impl Decoder {
    pub fn new(lat: ToricLattice, family: WeightFamily) -> Result<Self, MatchError> {
        family.validate(lat.size())?;
        // Torus Manhattan distance never exceeds 2·⌊L/2⌋.
        let max_d = 2 * (lat.size() / 2);
        let table = (0..=max_d as u32)
            .map(|d| {
                if d == 0 {
                    0
                } else {
                    family.scaled_weight(d, lat.size())
                }
            })
            .collect::<Vec<i64>>();
        let max = table.iter().copied().max().unwrap_or(0);
        if max.checked_mul(4 * TIE_SCALE as i64).is_none() {
            return Err(MatchError::InvalidFamily(format!(
                "weights up to {max} overflow the jittered matching"
            )));
        }
        Ok(Self {
            lat,
            family,
            table,
            strategy: Strategy::default(),
        })
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn lattice(&self) -> &ToricLattice {
        &self.lat
    }

    pub fn graph(&self, defects: &[FaceCoord]) -> Result<MatchGraph, MatchError> {
        self.build(defects, None)
    }

    /// As [`Decoder::graph`], with weights scaled by [`TIE_SCALE`] plus a
    /// pseudo-random jitter keyed by `salt` and the two faces. The jitter
    /// summed over any perfect matching stays below one unit of the original
    /// weight, so it only decides between matchings of equal weight.
    pub fn jittered_graph(
        &self,
        defects: &[FaceCoord],
        salt: u64,
    ) -> Result<MatchGraph, MatchError> {
        self.build(defects, Some(salt))
    }

    fn build(&self, defects: &[FaceCoord], salt: Option<u64>) -> Result<MatchGraph, MatchError> {
        let n = defects.len();
        if n % 2 == 1 {
            return Err(MatchError::OddVertexCount(n));
        }
        let span = (TIE_SCALE / (n as u64 / 2).max(1)).max(1);
        let mut weights = vec![0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = self.lat.torus_distance(defects[i], defects[j]);
                let mut x = self.table[d];
                if let Some(salt) = salt {
                    let (a, b) = (
                        self.lat.face_index(defects[i]),
                        self.lat.face_index(defects[j]),
                    );
                    let pair = seed::combine(a.min(b) as u64, a.max(b) as u64);
                    x = x * TIE_SCALE as i64 + (seed::combine(salt, pair) % span) as i64;
                }
                weights[i * n + j] = x;
                weights[j * n + i] = x;
            }
        }
        Ok(MatchGraph {
            vertices: defects.to_vec(),
            weights,
        })
    }

    /// Decodes a defect list given in any order. Among several minimum-weight
    /// matchings the solver's choice is deterministic but not uniform; see
    /// [`Decoder::decode_jittered`].
    pub fn decode(&self, defects: &[FaceCoord]) -> Result<ErrorPattern, MatchError> {
        self.correction(defects, &self.graph(defects)?)
    }

    /// Decodes with ties between minimum-weight matchings broken at random,
    /// the randomness being fixed by `salt`.
    pub fn decode_jittered(
        &self,
        defects: &[FaceCoord],
        salt: u64,
    ) -> Result<ErrorPattern, MatchError> {
        self.correction(defects, &self.jittered_graph(defects, salt)?)
    }

    fn correction(
        &self,
        defects: &[FaceCoord],
        g: &MatchGraph,
    ) -> Result<ErrorPattern, MatchError> {
        let m = mwpm_with(g, self.strategy)?;
        let mut correction = ErrorPattern::zeros(self.lat.n_qubits());
        for &(i, j) in &m.pairs {
            self.lat
                .add_shortest_path(&mut correction, defects[i], defects[j]);
        }
        Ok(correction)
    }
}
