//! Maximum-weight matching in general graphs by Edmonds' primal-dual blossom
//! method, O(n³), integer arithmetic throughout.
//!
//! The structure follows Galil's presentation. Vertex duals are stored doubled
//! (`dual[v] = 2·u(v)`) so that every quantity stays integral when the edge
//! weights are integers. Blossom duals are stored undoubled.
//!
//! Edge endpoints are addressed as `p = 2k` (first vertex of edge `k`) and
//! `p = 2k + 1` (second vertex); `p ^ 1` is the opposite endpoint.

const NONE: usize = usize::MAX;

/// How vertex duals are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualInit {
    /// Every vertex starts at the largest edge weight.
    Uniform,
    /// Every vertex starts at its largest incident weight and mutually tight
    /// edges are matched greedily before the first stage. Only valid with
    /// `max_cardinality` when a perfect matching exists.
    Greedy,
}

/// Matching plus the final dual solution, which certifies optimality.
#[derive(Debug, Clone)]
pub struct BlossomSolution {
    /// `mate[v]` is the vertex matched to `v`, or `None`.
    pub mate: Vec<Option<usize>>,
    /// Doubled vertex duals followed by blossom duals (indices `n..2n`).
    pub dual: Vec<i64>,
    /// Immediate parent blossom of each vertex or blossom.
    pub parent: Vec<Option<usize>>,
}

impl BlossomSolution {
    pub fn is_perfect(&self) -> bool {
        self.mate.iter().all(Option::is_some)
    }

    /// Enclosing blossoms of `v`, outermost first.
    pub fn ancestors(&self, v: usize) -> Vec<usize> {
        let mut chain = Vec::new();
        let mut b = self.parent[v];
        while let Some(x) = b {
            chain.push(x);
            b = self.parent[x];
        }
        chain.reverse();
        chain
    }
}

struct State<'a> {
    n: usize,
    weights: Vec<i64>,
    endpoint: Vec<usize>,
    neighbend: &'a [Vec<usize>],
    mate: Vec<usize>,
    label: Vec<i8>,
    labelend: Vec<usize>,
    inblossom: Vec<usize>,
    blossomparent: Vec<usize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<usize>,
    blossomendps: Vec<Vec<usize>>,
    bestedge: Vec<usize>,
    blossombestedges: Vec<Option<Vec<usize>>>,
    unusedblossoms: Vec<usize>,
    dualvar: Vec<i64>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
}

/// Solves maximum-weight matching on `n` vertices.
///
/// `edges` holds `(i, j, w)` with `i != j` and at most one edge per pair.
/// With `max_cardinality` only maximum-cardinality matchings are considered.
pub fn max_weight_matching(
    n: usize,
    edges: &[(usize, usize, i64)],
    max_cardinality: bool,
    init: DualInit,
) -> BlossomSolution {
    let mut neighbend = vec![Vec::new(); n];
    for (k, &(i, j, _)) in edges.iter().enumerate() {
        neighbend[i].push(2 * k + 1);
        neighbend[j].push(2 * k);
    }
    let mut st = State::new(n, edges, &neighbend);
    if init == DualInit::Greedy && max_cardinality {
        st.greedy_start();
    } else {
        let maxweight = edges.iter().map(|e| e.2).max().unwrap_or(0).max(0);
        st.dualvar[..n].iter_mut().for_each(|d| *d = maxweight);
    }
    st.run(max_cardinality);
    st.into_solution()
}

impl<'a> State<'a> {
    fn new(n: usize, edges: &[(usize, usize, i64)], neighbend: &'a [Vec<usize>]) -> Self {
        let mut endpoint = Vec::with_capacity(2 * edges.len());
        for &(i, j, _) in edges {
            endpoint.push(i);
            endpoint.push(j);
        }
        let mut blossombase: Vec<usize> = (0..n).collect();
        blossombase.extend(std::iter::repeat_n(NONE, n));
        Self {
            n,
            weights: edges.iter().map(|e| e.2).collect(),
            endpoint,
            neighbend,
            mate: vec![NONE; n],
            label: vec![0; 2 * n],
            labelend: vec![NONE; 2 * n],
            inblossom: (0..n).collect(),
            blossomparent: vec![NONE; 2 * n],
            blossomchilds: vec![Vec::new(); 2 * n],
            blossombase,
            blossomendps: vec![Vec::new(); 2 * n],
            bestedge: vec![NONE; 2 * n],
            blossombestedges: vec![None; 2 * n],
            unusedblossoms: (n..2 * n).rev().collect(),
            dualvar: vec![0; 2 * n],
            allowedge: vec![false; edges.len()],
            queue: Vec::new(),
        }
    }

    fn into_solution(self) -> BlossomSolution {
        let n = self.n;
        let mate = self
            .mate
            .iter()
            .map(|&p| (p != NONE).then(|| self.endpoint[p]))
            .collect();
        let parent = self
            .blossomparent
            .iter()
            .map(|&b| (b != NONE).then_some(b))
            .collect();
        debug_assert_eq!(self.dualvar.len(), 2 * n);
        BlossomSolution {
            mate,
            dual: self.dualvar,
            parent,
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn greedy_start(&mut self) {
        let n = self.n;
        let mut best = vec![i64::MIN; n];
        for (k, &w) in self.weights.iter().enumerate() {
            let (i, j) = (self.endpoint[2 * k], self.endpoint[2 * k + 1]);
            best[i] = best[i].max(w);
            best[j] = best[j].max(w);
        }
        for v in 0..n {
            self.dualvar[v] = if best[v] == i64::MIN { 0 } else { best[v] };
        }
        for v in 0..n {
            if self.mate[v] != NONE {
                continue;
            }
            for &p in &self.neighbend[v] {
                let w = self.endpoint[p];
                let k = p / 2;
                if self.mate[w] == NONE && self.slack(k) == 0 {
                    self.mate[v] = p;
                    self.mate[w] = p ^ 1;
                    break;
                }
            }
        }
        // Free vertices must share dual parity so that S–S slacks stay even.
        for v in 0..n {
            if self.mate[v] == NONE && self.dualvar[v] % 2 != 0 {
                self.dualvar[v] += 1;
            }
        }
    }

    #[inline]
    fn slack(&self, k: usize) -> i64 {
        self.dualvar[self.endpoint[2 * k]] + self.dualvar[self.endpoint[2 * k + 1]]
            - 2 * self.weights[k]
    }

    fn blossom_leaves(&self, b: usize, out: &mut Vec<usize>) {
        if b < self.n {
            out.push(b);
            return;
        }
        let mut stack = vec![b];
        while let Some(t) = stack.pop() {
            if t < self.n {
                out.push(t);
            } else {
                // Preserve child order in the output.
                stack.extend(self.blossomchilds[t].iter().rev());
            }
        }
    }

    fn leaves(&self, b: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.blossom_leaves(b, &mut out);
        out
    }

    fn assign_label(&mut self, w: usize, t: i8, p: usize) {
        let mut w = w;
        let mut t = t;
        let mut p = p;
        loop {
            let b = self.inblossom[w];
            debug_assert!(self.label[w] == 0 && self.label[b] == 0);
            self.label[w] = t;
            self.label[b] = t;
            self.labelend[w] = p;
            self.labelend[b] = p;
            self.bestedge[w] = NONE;
            self.bestedge[b] = NONE;
            if t == 1 {
                let mut leaves = std::mem::take(&mut self.queue);
                self.blossom_leaves(b, &mut leaves);
                self.queue = leaves;
                return;
            }
            // T-vertex: its mate becomes S.
            let base = self.blossombase[b];
            let mp = self.mate[base];
            debug_assert!(mp != NONE);
            w = self.endpoint[mp];
            t = 1;
            p = mp ^ 1;
        }
    }

    /// Traces back from `v` and `w` to find either a new blossom base or an
    /// augmenting path (returns `NONE`).
    fn scan_blossom(&mut self, v: usize, w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = NONE;
        let (mut v, mut w) = (v, w);
        while v != NONE || w != NONE {
            let mut b = self.inblossom[v];
            if self.label[b] & 4 != 0 {
                base = self.blossombase[b];
                break;
            }
            debug_assert_eq!(self.label[b], 1);
            path.push(b);
            self.label[b] = 5;
            if self.labelend[b] == NONE {
                v = NONE;
            } else {
                v = self.endpoint[self.labelend[b]];
                b = self.inblossom[v];
                debug_assert_eq!(self.label[b], 2);
                v = self.endpoint[self.labelend[b]];
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = 1;
        }
        base
    }

    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w) = (self.endpoint[2 * k], self.endpoint[2 * k + 1]);
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("blossom pool exhausted");
        self.blossombase[b] = base;
        self.blossomparent[b] = NONE;
        self.blossomparent[bb] = b;
        let mut path = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossomparent[bv] = b;
            path.push(bv);
            endps.push(self.labelend[bv]);
            v = self.endpoint[self.labelend[bv]];
            bv = self.inblossom[v];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b;
            path.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            w = self.endpoint[self.labelend[bw]];
            bw = self.inblossom[w];
        }
        debug_assert_eq!(self.label[bb], 1);
        self.label[b] = 1;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = 0;
        self.blossomchilds[b] = path.clone();
        self.blossomendps[b] = endps;
        for v in self.leaves(b) {
            if self.label[self.inblossom[v]] == 2 {
                // Former T-vertices inside the blossom become S and get scanned.
                self.queue.push(v);
            }
            self.inblossom[v] = b;
        }

        let mut bestedgeto = vec![NONE; 2 * self.n];
        for &sub in &path {
            let lists: Vec<Vec<usize>> = match self.blossombestedges[sub].take() {
                Some(list) => vec![list],
                None => self
                    .leaves(sub)
                    .into_iter()
                    .map(|v| self.neighbend[v].iter().map(|p| p / 2).collect())
                    .collect(),
            };
            for list in lists {
                for k in list {
                    let (mut i, mut j) = (self.endpoint[2 * k], self.endpoint[2 * k + 1]);
                    if self.inblossom[j] == b {
                        std::mem::swap(&mut i, &mut j);
                    }
                    let _ = i;
                    let bj = self.inblossom[j];
                    if bj != b
                        && self.label[bj] == 1
                        && (bestedgeto[bj] == NONE || self.slack(k) < self.slack(bestedgeto[bj]))
                    {
                        bestedgeto[bj] = k;
                    }
                }
            }
            self.bestedge[sub] = NONE;
        }
        let best: Vec<usize> = bestedgeto.into_iter().filter(|&k| k != NONE).collect();
        let mut be = NONE;
        for &k in &best {
            if be == NONE || self.slack(k) < self.slack(be) {
                be = k;
            }
        }
        self.bestedge[b] = be;
        self.blossombestedges[b] = Some(best);
    }

    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        let childs = self.blossomchilds[b].clone();
        for &s in &childs {
            self.blossomparent[s] = NONE;
            if s < self.n {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for v in self.leaves(s) {
                    self.inblossom[v] = s;
                }
            }
        }
        if !endstage && self.label[b] == 2 {
            // Relabel the part of the blossom on the alternating path through it.
            let len = childs.len() as isize;
            let at = |j: isize| j.rem_euclid(len) as usize;
            let entrychild = self.inblossom[self.endpoint[self.labelend[b] ^ 1]];
            let mut j = childs.iter().position(|&c| c == entrychild).unwrap() as isize;
            let (jstep, endptrick): (isize, usize) = if j & 1 != 0 {
                j -= len;
                (1, 0)
            } else {
                (-1, 1)
            };
            let endps = self.blossomendps[b].clone();
            let mut p = self.labelend[b];
            while j != 0 {
                let q = self.endpoint[p ^ 1];
                self.label[q] = 0;
                let e = endps[at(j - endptrick as isize)];
                self.label[self.endpoint[e ^ endptrick ^ 1]] = 0;
                self.assign_label(q, 2, p);
                self.allowedge[e / 2] = true;
                j += jstep;
                p = endps[at(j - endptrick as isize)] ^ endptrick;
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            let bv = childs[at(j)];
            let q = self.endpoint[p ^ 1];
            self.label[q] = 2;
            self.label[bv] = 2;
            self.labelend[q] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = NONE;
            j += jstep;
            while childs[at(j)] != entrychild {
                let bv = childs[at(j)];
                if self.label[bv] == 1 {
                    j += jstep;
                    continue;
                }
                let leaves = self.leaves(bv);
                if let Some(&v) = leaves.iter().find(|&&v| self.label[v] != 0) {
                    debug_assert_eq!(self.label[v], 2);
                    debug_assert_eq!(self.inblossom[v], bv);
                    self.label[v] = 0;
                    let m = self.mate[self.blossombase[bv]];
                    self.label[self.endpoint[m]] = 0;
                    let le = self.labelend[v];
                    self.assign_label(v, 2, le);
                }
                j += jstep;
            }
        }
        self.label[b] = -1;
        self.labelend[b] = NONE;
        self.blossomchilds[b] = Vec::new();
        self.blossomendps[b] = Vec::new();
        self.blossombase[b] = NONE;
        self.blossombestedges[b] = None;
        self.bestedge[b] = NONE;
        self.unusedblossoms.push(b);
    }

    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.n {
            self.augment_blossom(t, v);
        }
        let len = self.blossomchilds[b].len() as isize;
        let at = |j: isize| j.rem_euclid(len) as usize;
        let i = self.blossomchilds[b].iter().position(|&c| c == t).unwrap();
        let mut j = i as isize;
        let (jstep, endptrick): (isize, usize) = if i & 1 != 0 {
            j -= len;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = self.blossomchilds[b][at(j)];
            let p = self.blossomendps[b][at(j - endptrick as isize)] ^ endptrick;
            if t >= self.n {
                let e = self.endpoint[p];
                self.augment_blossom(t, e);
            }
            j += jstep;
            let t = self.blossomchilds[b][at(j)];
            if t >= self.n {
                let e = self.endpoint[p ^ 1];
                self.augment_blossom(t, e);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert_eq!(self.blossombase[b], v);
    }

    fn augment_matching(&mut self, k: usize) {
        let (v, w) = (self.endpoint[2 * k], self.endpoint[2 * k + 1]);
        for (mut s, mut p) in [(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.inblossom[s];
                debug_assert_eq!(self.label[bs], 1);
                if bs >= self.n {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == NONE {
                    break;
                }
                let t = self.endpoint[self.labelend[bs]];
                let bt = self.inblossom[t];
                debug_assert_eq!(self.label[bt], 2);
                s = self.endpoint[self.labelend[bt]];
                let j = self.endpoint[self.labelend[bt] ^ 1];
                if bt >= self.n {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    fn run(&mut self, max_cardinality: bool) {
        let n = self.n;
        for _stage in 0..n {
            if self.mate.iter().all(|&m| m != NONE) {
                break;
            }
            self.label.iter_mut().for_each(|l| *l = 0);
            self.bestedge.iter_mut().for_each(|e| *e = NONE);
            for b in n..2 * n {
                self.blossombestedges[b] = None;
            }
            self.allowedge.iter_mut().for_each(|a| *a = false);
            self.queue.clear();
            for v in 0..n {
                if self.mate[v] == NONE && self.label[self.inblossom[v]] == 0 {
                    self.assign_label(v, 1, NONE);
                }
            }

            let mut augmented = false;
            loop {
                while let Some(v) = self.queue.pop() {
                    debug_assert_eq!(self.label[self.inblossom[v]], 1);
                    let nb = self.neighbend;
                    for &p in &nb[v] {
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.inblossom[v] == self.inblossom[w] {
                            continue;
                        }
                        let mut kslack = 0;
                        if !self.allowedge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allowedge[k] = true;
                            }
                        }
                        if self.allowedge[k] {
                            let bw = self.inblossom[w];
                            if self.label[bw] == 0 {
                                self.assign_label(w, 2, p ^ 1);
                            } else if self.label[bw] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base != NONE {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == 0 {
                                self.label[w] = 2;
                                self.labelend[w] = p ^ 1;
                            }
                        } else if self.label[self.inblossom[w]] == 1 {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == NONE || kslack < self.slack(self.bestedge[b]) {
                                self.bestedge[b] = k;
                            }
                        } else if self.label[w] == 0
                            && (self.bestedge[w] == NONE || kslack < self.slack(self.bestedge[w]))
                        {
                            self.bestedge[w] = k;
                        }
                    }
                    if augmented {
                        break;
                    }
                }
                if augmented {
                    break;
                }

                // Dual update.
                let mut deltatype = 0u8;
                let mut delta = 0i64;
                let mut deltaedge = NONE;
                let mut deltablossom = NONE;
                if !max_cardinality {
                    deltatype = 1;
                    delta = self.dualvar[..n].iter().copied().min().unwrap_or(0);
                }
                for v in 0..n {
                    if self.label[self.inblossom[v]] == 0 && self.bestedge[v] != NONE {
                        let d = self.slack(self.bestedge[v]);
                        if deltatype == 0 || d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v];
                        }
                    }
                }
                for b in 0..2 * n {
                    if self.blossomparent[b] == NONE
                        && self.label[b] == 1
                        && self.bestedge[b] != NONE
                    {
                        let kslack = self.slack(self.bestedge[b]);
                        debug_assert!(kslack % 2 == 0, "odd S-S slack {kslack}");
                        let d = kslack / 2;
                        if deltatype == 0 || d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b];
                        }
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE
                        && self.blossomparent[b] == NONE
                        && self.label[b] == 2
                        && (deltatype == 0 || self.dualvar[b] < delta)
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if deltatype == 0 {
                    // No augmenting path left; final update keeps the duals verifiable.
                    debug_assert!(max_cardinality);
                    deltatype = 1;
                    delta = self.dualvar[..n].iter().copied().min().unwrap_or(0).max(0);
                }

                for v in 0..n {
                    match self.label[self.inblossom[v]] {
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => {}
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE && self.blossomparent[b] == NONE {
                        match self.label[b] {
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => {}
                        }
                    }
                }

                match deltatype {
                    1 => break,
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let (mut i, j) = (
                            self.endpoint[2 * deltaedge],
                            self.endpoint[2 * deltaedge + 1],
                        );
                        if self.label[self.inblossom[i]] == 0 {
                            i = j;
                        }
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let i = self.endpoint[2 * deltaedge];
                        self.queue.push(i);
                    }
                    _ => self.expand_blossom(deltablossom, false),
                }
            }

            if !augmented {
                break;
            }
            for b in n..2 * n {
                if self.blossomparent[b] == NONE
                    && self.blossombase[b] != NONE
                    && self.label[b] == 1
                    && self.dualvar[b] == 0
                {
                    self.expand_blossom(b, true);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn weight_of(edges: &[(usize, usize, i64)], mate: &[Option<usize>]) -> i64 {
        edges
            .iter()
            .filter(|&&(i, j, _)| mate[i] == Some(j))
            .map(|e| e.2)
            .sum()
    }

    fn is_matching(n: usize, edges: &[(usize, usize, i64)], mate: &[Option<usize>]) -> bool {
        (0..n).all(|v| match mate[v] {
            None => true,
            Some(u) => {
                mate[u] == Some(v)
                    && edges
                        .iter()
                        .any(|&(i, j, _)| (i, j) == (u, v) || (i, j) == (v, u))
            }
        })
    }

    /// Exhaustive (cardinality, weight) optimum over all matchings.
    fn brute(n: usize, edges: &[(usize, usize, i64)], max_card: bool) -> (usize, i64) {
        fn rec(
            k: usize,
            used: &mut Vec<bool>,
            edges: &[(usize, usize, i64)],
            card: usize,
            w: i64,
            best: &mut Vec<(usize, i64)>,
        ) {
            if k == edges.len() {
                best.push((card, w));
                return;
            }
            rec(k + 1, used, edges, card, w, best);
            let (i, j, x) = edges[k];
            if !used[i] && !used[j] {
                used[i] = true;
                used[j] = true;
                rec(k + 1, used, edges, card + 1, w + x, best);
                used[i] = false;
                used[j] = false;
            }
        }
        let mut all = Vec::new();
        rec(0, &mut vec![false; n], edges, 0, 0, &mut all);
        if max_card {
            *all.iter().max().unwrap()
        } else {
            all.iter()
                .map(|&(_, w)| (0, w))
                .max()
                .map(|(_, w)| (0, w))
                .unwrap()
        }
    }

    fn check(n: usize, edges: &[(usize, usize, i64)], max_card: bool) {
        let sol = max_weight_matching(n, edges, max_card, DualInit::Uniform);
        assert!(is_matching(n, edges, &sol.mate));
        let (card, w) = brute(n, edges, max_card);
        assert_eq!(weight_of(edges, &sol.mate), w, "{edges:?}");
        if max_card {
            assert_eq!(sol.mate.iter().flatten().count() / 2, card);
        }
    }

    #[test]
    fn trivial_graphs() {
        let sol = max_weight_matching(0, &[], false, DualInit::Uniform);
        assert!(sol.mate.is_empty());
        let sol = max_weight_matching(2, &[(0, 1, 1)], false, DualInit::Uniform);
        assert_eq!(sol.mate, vec![Some(1), Some(0)]);
        let sol = max_weight_matching(3, &[(0, 1, 10), (1, 2, 11)], false, DualInit::Uniform);
        assert_eq!(sol.mate, vec![None, Some(2), Some(1)]);
    }

    #[test]
    fn blossom_structure_cases() {
        // Graphs that exercise S-blossoms, T-blossoms, nesting, relabelling
        // and expansion.
        let cases: &[&[(usize, usize, i64)]] = &[
            &[(1, 2, 5), (2, 3, 11), (3, 4, 5)],
            &[(1, 2, 8), (1, 3, 9), (2, 3, 10), (3, 4, 7)],
            &[
                (1, 2, 8),
                (1, 3, 9),
                (2, 3, 10),
                (3, 4, 7),
                (1, 6, 5),
                (4, 5, 6),
            ],
            &[
                (1, 2, 9),
                (1, 3, 8),
                (2, 3, 10),
                (1, 4, 5),
                (4, 5, 4),
                (1, 6, 3),
            ],
            &[
                (1, 2, 9),
                (1, 3, 9),
                (2, 3, 10),
                (2, 4, 8),
                (3, 5, 8),
                (4, 5, 10),
                (5, 6, 6),
            ],
            &[
                (1, 2, 10),
                (1, 7, 10),
                (2, 3, 12),
                (3, 4, 20),
                (3, 5, 20),
                (4, 5, 25),
                (5, 6, 10),
                (6, 7, 10),
                (7, 8, 8),
            ],
            &[
                (1, 2, 8),
                (1, 3, 8),
                (2, 3, 10),
                (2, 4, 12),
                (3, 5, 12),
                (4, 5, 14),
                (4, 6, 12),
                (5, 7, 12),
                (6, 7, 14),
                (7, 8, 12),
            ],
            &[
                (1, 2, 23),
                (1, 5, 22),
                (1, 6, 15),
                (2, 3, 25),
                (3, 4, 22),
                (4, 5, 25),
                (4, 8, 14),
                (5, 7, 13),
            ],
            &[
                (1, 2, 19),
                (1, 3, 20),
                (1, 8, 8),
                (2, 3, 25),
                (2, 4, 18),
                (3, 5, 18),
                (4, 5, 13),
                (4, 7, 7),
                (5, 6, 7),
            ],
            &[
                (1, 2, 45),
                (1, 5, 45),
                (2, 3, 50),
                (3, 4, 45),
                (4, 5, 50),
                (1, 6, 30),
                (3, 9, 35),
                (4, 8, 35),
                (5, 7, 26),
                (9, 10, 5),
            ],
            &[
                (1, 2, 45),
                (1, 5, 45),
                (2, 3, 50),
                (3, 4, 45),
                (4, 5, 50),
                (1, 6, 30),
                (3, 9, 35),
                (4, 8, 26),
                (5, 7, 40),
                (9, 10, 5),
            ],
            &[
                (1, 2, 45),
                (1, 5, 45),
                (2, 3, 50),
                (3, 4, 45),
                (4, 5, 50),
                (1, 6, 30),
                (3, 9, 35),
                (4, 8, 28),
                (5, 7, 26),
                (9, 10, 5),
            ],
            &[
                (1, 2, 45),
                (1, 7, 45),
                (2, 3, 50),
                (3, 4, 45),
                (4, 5, 95),
                (4, 6, 94),
                (5, 6, 94),
                (6, 7, 50),
                (1, 8, 30),
                (3, 11, 35),
                (5, 9, 36),
                (7, 10, 26),
                (11, 12, 5),
            ],
            &[
                (1, 2, 40),
                (1, 3, 40),
                (2, 3, 60),
                (2, 4, 55),
                (3, 5, 55),
                (4, 5, 50),
                (1, 8, 15),
                (5, 7, 30),
                (7, 6, 10),
                (8, 10, 10),
                (4, 9, 30),
            ],
        ];
        for edges in cases {
            let n = edges.iter().map(|e| e.0.max(e.1)).max().unwrap() + 1;
            check(n, edges, false);
            check(n, edges, true);
        }
    }

    #[test]
    fn random_sparse_graphs_match_brute_force() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let n = rng.gen_range(2..=9);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen_bool(0.45) {
                        edges.push((i, j, rng.gen_range(1..=30)));
                    }
                }
            }
            if edges.len() > 14 {
                edges.truncate(14);
            }
            check(n, &edges, false);
            check(n, &edges, true);
        }
    }

    #[test]
    fn complete_graphs_match_brute_force_both_inits() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let n = 2 * rng.gen_range(1..=4);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let hi = if trial % 2 == 0 { 6 } else { 1000 };
                    edges.push((i, j, rng.gen_range(0..=hi)));
                }
            }
            let (_, best) = brute(n, &edges, true);
            for init in [DualInit::Uniform, DualInit::Greedy] {
                let sol = max_weight_matching(n, &edges, true, init);
                assert!(sol.is_perfect());
                assert_eq!(weight_of(&edges, &sol.mate), best, "trial {trial} {init:?}");
            }
        }
    }
}
