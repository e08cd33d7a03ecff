//! Shifts of finite type: admissibility, word counting and enumeration,
//! structural classification, cyclic decomposition and topological entropy.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{input, Error, Result};

/// Words are plain symbol vectors; symbols are `0..K`.
pub type Word = Vec<u8>;

/// Largest length for which [`Sft::count_words`] returns an exact big integer.
pub const EXACT_COUNT_MAX_LEN: usize = 256;

/// A one-sided shift of finite type on `K` symbols with 0/1 transition matrix `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sft {
    k: usize,
    allowed: Vec<bool>,
    succ: Vec<Vec<u8>>,
}

impl Sft {
    /// Builds the shift from a square 0/1 matrix. Every row and column needs a 1.
    pub fn new(matrix: Vec<Vec<u8>>) -> Result<Self> {
        let k = matrix.len();
        if k < 2 {
            return input(format!("alphabet size must be at least 2, got {k}"));
        }
        if k > 256 {
            return input(format!("alphabet size {k} exceeds 256"));
        }
        let mut allowed = vec![false; k * k];
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != k {
                return input(format!("row {i} has {} entries, expected {k}", row.len()));
            }
            for (j, &e) in row.iter().enumerate() {
                match e {
                    0 => {}
                    1 => allowed[i * k + j] = true,
                    _ => return input(format!("entry ({i},{j}) is {e}, expected 0 or 1")),
                }
            }
        }
        for i in 0..k {
            if !(0..k).any(|j| allowed[i * k + j]) {
                return input(format!("symbol {i} has no successor (row {i} is zero)"));
            }
            if !(0..k).any(|j| allowed[j * k + i]) {
                return input(format!("symbol {i} has no predecessor (column {i} is zero)"));
            }
        }
        let succ = (0..k)
            .map(|i| (0..k).filter(|&j| allowed[i * k + j]).map(|j| j as u8).collect())
            .collect();
        Ok(Sft { k, allowed, succ })
    }

    pub fn full_shift(k: usize) -> Result<Self> {
        Sft::new(vec![vec![1; k]; k])
    }

    /// The golden mean shift: no two consecutive 1s.
    pub fn golden_mean() -> Self {
        Sft::new(vec![vec![1, 1], vec![1, 0]]).expect("golden mean matrix is valid")
    }

    /// Parses the matrix file format: `K` on the first line, then `K` rows of 0/1.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Input("empty matrix file".into()))?;
        let k: usize = header
            .parse()
            .map_err(|_| Error::Input(format!("bad alphabet size line: {header:?}")))?;
        let mut rows = Vec::with_capacity(k);
        for i in 0..k {
            let line = lines
                .next()
                .ok_or_else(|| Error::Input(format!("matrix file ends before row {i}")))?;
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<u8>().map_err(|_| Error::Input(format!("bad entry {t:?} in row {i}"))))
                .collect::<Result<Vec<u8>>>()?;
            rows.push(row);
        }
        if let Some(extra) = lines.next() {
            return input(format!("unexpected trailing line in matrix file: {extra:?}"));
        }
        Sft::new(rows)
    }

    pub fn alphabet_size(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn allowed(&self, a: u8, b: u8) -> bool {
        self.allowed[a as usize * self.k + b as usize]
    }

    /// Admissible successors of `a`, ascending.
    #[inline]
    pub fn successors(&self, a: u8) -> &[u8] {
        &self.succ[a as usize]
    }

    pub fn is_full_shift(&self) -> bool {
        self.allowed.iter().all(|&b| b)
    }

    pub fn matrix(&self) -> Vec<Vec<u8>> {
        (0..self.k)
            .map(|i| (0..self.k).map(|j| self.allowed[i * self.k + j] as u8).collect())
            .collect()
    }

    pub fn check_word(&self, word: &[u8]) -> Result<()> {
        match word.iter().position(|&s| s as usize >= self.k) {
            Some(i) => input(format!("symbol {} at index {i} is out of range for K={}", word[i], self.k)),
            None => Ok(()),
        }
    }

    /// True iff every consecutive pair of `word` is allowed.
    pub fn is_admissible(&self, word: &[u8]) -> Result<bool> {
        self.check_word(word)?;
        Ok(self.admissible_unchecked(word))
    }

    pub(crate) fn admissible_unchecked(&self, word: &[u8]) -> bool {
        word.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    /// Index of the first inadmissible transition `(i, i+1)`, if any.
    pub fn first_violation(&self, word: &[u8]) -> Option<usize> {
        word.windows(2).position(|w| !self.allowed(w[0], w[1]))
    }

    /// Exact number of admissible words of length `n` (transfer-matrix iteration).
    pub fn count_words(&self, n: usize) -> Result<BigUint> {
        if n > EXACT_COUNT_MAX_LEN {
            return Err(Error::Resource(format!(
                "exact counts are limited to n <= {EXACT_COUNT_MAX_LEN}; use log_count_words for n = {n}"
            )));
        }
        if n == 0 {
            return Ok(BigUint::one());
        }
        let mut v = vec![BigUint::one(); self.k];
        for _ in 1..n {
            let mut next = vec![BigUint::zero(); self.k];
            for a in 0..self.k {
                for &b in &self.succ[a] {
                    next[b as usize] += &v[a];
                }
            }
            v = next;
        }
        Ok(v.into_iter().sum())
    }

    /// Natural log of the number of admissible words of length `n`, any `n`.
    pub fn log_count_words(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let mut v = vec![1.0f64; self.k];
        let mut log_scale = 0.0;
        for _ in 1..n {
            let mut next = vec![0.0; self.k];
            for a in 0..self.k {
                for &b in &self.succ[a] {
                    next[b as usize] += v[a];
                }
            }
            let m = next.iter().cloned().fold(0.0, f64::max);
            for x in next.iter_mut() {
                *x /= m;
            }
            log_scale += m.ln();
            v = next;
        }
        log_scale + v.iter().sum::<f64>().ln()
    }

    /// Count of admissible words of length `n` as `f64` (may overflow to infinity).
    pub fn count_words_f64(&self, n: usize) -> f64 {
        self.log_count_words(n).exp()
    }

    /// Streams the admissible words of length `n` in lexicographic order.
    pub fn words(&self, n: usize) -> Words<'_> {
        Words::new(self, Vec::new(), n)
    }

    /// Streams admissible length-`n` extensions of `prefix` in lexicographic order.
    pub fn words_with_prefix(&self, prefix: &[u8], n: usize) -> Words<'_> {
        Words::new(self, prefix.to_vec(), n)
    }

    /// Calls `f` on every admissible word of length `n` extending `prefix`, lexicographically.
    pub fn for_each_word(&self, prefix: &[u8], n: usize, mut f: impl FnMut(&[u8])) {
        if prefix.len() > n || !self.admissible_unchecked(prefix) {
            return;
        }
        let mut word = prefix.to_vec();
        word.resize(n, 0);
        self.dfs_words(&mut word, prefix.len(), &mut f);
    }

    fn dfs_words(&self, word: &mut [u8], depth: usize, f: &mut impl FnMut(&[u8])) {
        if depth == word.len() {
            f(word);
            return;
        }
        if depth == 0 {
            for s in 0..self.k as u8 {
                word[0] = s;
                self.dfs_words(word, 1, f);
            }
        } else {
            let prev = word[depth - 1];
            for &s in &self.succ[prev as usize] {
                word[depth] = s;
                self.dfs_words(word, depth + 1, f);
            }
        }
    }

    /// Disjoint lexicographic chunks covering all admissible words of length `n`:
    /// the admissible prefixes of length `min(prefix_len, n)`.
    /// Uniform-successor random walk of length `len`, optionally continuing `start`.
    pub fn random_word(&self, start: &[u8], len: usize, rng: &mut impl Rng) -> Word {
        let mut w = start.to_vec();
        if w.is_empty() && len > 0 {
            w.push(rng.gen_range(0..self.k as u8));
        }
        while w.len() < len {
            let succ = self.successors(*w.last().expect("nonempty"));
            w.push(succ[rng.gen_range(0..succ.len())]);
        }
        w.truncate(len);
        w
    }

    pub fn word_chunks(&self, n: usize, prefix_len: usize) -> Vec<Word> {
        self.words(prefix_len.min(n)).collect()
    }

    /// Strongly connected components (each sorted), ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<u8>> {
        let reach = self.reachability();
        let mut seen = vec![false; self.k];
        let mut comps = Vec::new();
        for i in 0..self.k {
            if seen[i] {
                continue;
            }
            let comp: Vec<u8> = (0..self.k)
                .filter(|&j| j == i || (reach[i][j] && reach[j][i]))
                .map(|j| j as u8)
                .collect();
            for &j in &comp {
                seen[j as usize] = true;
            }
            comps.push(comp);
        }
        comps
    }

    /// `reach[i][j]`: some path of length >= 1 leads from i to j.
    fn reachability(&self) -> Vec<Vec<bool>> {
        (0..self.k)
            .map(|start| {
                let mut seen = vec![false; self.k];
                let mut stack: Vec<u8> = self.succ[start].clone();
                while let Some(v) = stack.pop() {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        stack.extend_from_slice(&self.succ[v as usize]);
                    }
                }
                seen
            })
            .collect()
    }

    /// Breadth-first levels from `root` (None for unreachable symbols).
    fn bfs_levels(&self, root: u8) -> Vec<Option<usize>> {
        let mut level = vec![None; self.k];
        level[root as usize] = Some(0);
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let lu = level[u as usize].unwrap();
            for &v in &self.succ[u as usize] {
                if level[v as usize].is_none() {
                    level[v as usize] = Some(lu + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    }

    /// gcd of cycle lengths inside the component containing `members`.
    fn component_period(&self, members: &[u8]) -> usize {
        let inside: Vec<bool> = (0..self.k).map(|i| members.contains(&(i as u8))).collect();
        let level = self.bfs_levels(members[0]);
        let mut g = 0usize;
        for &u in members {
            for &v in &self.succ[u as usize] {
                if inside[v as usize] {
                    let (lu, lv) = (level[u as usize].unwrap(), level[v as usize].unwrap());
                    g = gcd(g, (lu + 1).abs_diff(lv));
                }
            }
        }
        g
    }

    fn is_irreducible(&self) -> bool {
        let reach = self.reachability();
        (0..self.k).all(|i| (0..self.k).all(|j| reach[i][j]))
    }

    /// Smallest `t >= 1` with `A^t > 0`, searched up to the Wielandt bound.
    fn primitivity_exponent(&self) -> Option<usize> {
        let words = self.k.div_ceil(64);
        let a_rows: Vec<Vec<u64>> = (0..self.k).map(|i| bitrow(&self.succ[i], words)).collect();
        let full = full_row(self.k, words);
        let mut power = a_rows.clone();
        let bound = (self.k - 1) * (self.k - 1) + 1;
        for t in 1..=bound {
            if power.iter().all(|row| *row == full) {
                return Some(t);
            }
            power = bool_mul(&power, &a_rows, self.k);
        }
        None
    }

    pub fn classify(&self) -> SftClassification {
        let irreducible = self.is_irreducible();
        let period = if irreducible {
            self.component_period(&(0..self.k as u8).collect::<Vec<_>>())
        } else {
            self.components()
                .iter()
                .filter(|c| c.len() > 1 || self.allowed(c[0], c[0]))
                .map(|c| self.component_period(c))
                .fold(0, gcd)
                .max(1)
        };
        let exponent = if irreducible { self.primitivity_exponent() } else { None };
        let aperiodic = exponent.is_some();
        debug_assert!(!aperiodic || period == 1);
        let primitivity_r = exponent.map(|t| t - 1);
        let connecting_words = primitivity_r.map(|r| self.build_connecting_words(r));
        SftClassification { irreducible, aperiodic, period, primitivity_r, connecting_words }
    }

    /// Connecting words `W_{a,b}` of length `r`; errors name the obstruction.
    pub fn connecting_words(&self) -> Result<ConnectingWords> {
        if !self.is_irreducible() {
            let reach = self.reachability();
            let (a, b) = (0..self.k)
                .flat_map(|a| (0..self.k).map(move |b| (a, b)))
                .find(|&(a, b)| !reach[a][b])
                .expect("reducible shift has an unreachable pair");
            return Err(Error::Structural(format!(
                "shift is reducible: symbol {b} cannot be reached from symbol {a}, so no connecting word W_({a},{b}) exists"
            )));
        }
        match self.primitivity_exponent() {
            Some(t) => Ok(self.build_connecting_words(t - 1)),
            None => Err(Error::Structural(format!(
                "shift has period {} so no power of A is positive; split it with spectral_decomposition and work on each cyclic class",
                self.classify().period
            ))),
        }
    }

    fn build_connecting_words(&self, r: usize) -> ConnectingWords {
        // reach[t][u] = bitset of v with A^t[u][v] > 0, t = 0..=r+1
        let words = self.k.div_ceil(64);
        let a_rows: Vec<Vec<u64>> = (0..self.k).map(|i| bitrow(&self.succ[i], words)).collect();
        let mut reach = vec![(0..self.k).map(|i| bitrow(&[i as u8], words)).collect::<Vec<_>>()];
        for t in 1..=r + 1 {
            let next = bool_mul(&reach[t - 1], &a_rows, self.k);
            reach.push(next);
        }
        let has = |row: &[u64], v: usize| row[v / 64] >> (v % 64) & 1 == 1;
        let mut table = vec![vec![Vec::new(); self.k]; self.k];
        for a in 0..self.k {
            for b in 0..self.k {
                let mut w = Vec::with_capacity(r);
                let mut prev = a as u8;
                for pos in 1..=r {
                    let remaining = r + 1 - pos;
                    let c = *self.succ[prev as usize]
                        .iter()
                        .find(|&&c| has(&reach[remaining][c as usize], b))
                        .expect("primitive matrix admits a path of every length >= exponent");
                    w.push(c);
                    prev = c;
                }
                debug_assert!(self.allowed(prev, b as u8));
                table[a][b] = w;
            }
        }
        ConnectingWords { r, table }
    }

    /// Cyclic classes by BFS level mod p, with the induced shift on p-blocks of each class.
    pub fn spectral_decomposition(&self) -> Result<SpectralDecomposition> {
        if !self.is_irreducible() {
            return Err(Error::Structural("spectral decomposition needs an irreducible shift".into()));
        }
        let period = self.component_period(&(0..self.k as u8).collect::<Vec<_>>());
        let level = self.bfs_levels(0);
        let mut classes = vec![Vec::new(); period];
        for (s, l) in level.iter().enumerate() {
            classes[l.expect("irreducible") % period].push(s as u8);
        }
        let mut induced = Vec::with_capacity(period);
        for class in &classes {
            let blocks: Vec<Word> = class.iter().flat_map(|&s| self.words_with_prefix(&[s], period)).collect();
            if blocks.len() > 256 {
                return Err(Error::Unsupported(format!(
                    "induced alphabet has {} blocks, more than 256",
                    blocks.len()
                )));
            }
            let matrix = blocks
                .iter()
                .map(|u| blocks.iter().map(|v| self.allowed(*u.last().unwrap(), v[0]) as u8).collect())
                .collect();
            let sft = if blocks.len() == 1 {
                None
            } else {
                Some(Sft::new(matrix)?)
            };
            induced.push(InducedShift { blocks, sft });
        }
        Ok(SpectralDecomposition { period, classes, induced })
    }

    /// Perron root of `A` (max over irreducible components), with right/left vectors
    /// when the shift is irreducible.
    pub fn perron_root(&self) -> Result<f64> {
        let mut best: f64 = 0.0;
        for comp in self.components() {
            if comp.len() == 1 && !self.allowed(comp[0], comp[0]) {
                continue;
            }
            let (lambda, _) = self.power_iterate(&comp, false)?;
            best = best.max(lambda);
        }
        if best == 0.0 {
            return Err(Error::Structural("transition matrix is nilpotent; entropy undefined".into()));
        }
        Ok(best)
    }

    /// Topological entropy in nats: log of the Perron root.
    pub fn topological_entropy(&self) -> Result<f64> {
        let h = self.perron_root()?.ln();
        let slope = self.log_count_words(40) / 40.0;
        if slope < h - 1e-9 {
            return Err(Error::Internal(format!(
                "entropy {h} exceeds the word-count slope {slope} at n = 40"
            )));
        }
        Ok(h)
    }

    /// Perron data of an irreducible shift: `(λ, right v, left u)` with `u·v = 1`, `Σ v = 1`.
    pub fn perron_data(&self) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        if !self.is_irreducible() {
            return Err(Error::Structural("Perron eigenvectors need an irreducible shift".into()));
        }
        let all: Vec<u8> = (0..self.k as u8).collect();
        let (lambda, v) = self.power_iterate(&all, false)?;
        let (_, mut u) = self.power_iterate(&all, true)?;
        let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        for x in u.iter_mut() {
            *x /= dot;
        }
        Ok((lambda, v, u))
    }

    /// Power iteration on `A + I` restricted to `members` (an irreducible component),
    /// stopped by the Collatz–Wielandt bracket at relative width 1e-12.
    fn power_iterate(&self, members: &[u8], transpose: bool) -> Result<(f64, Vec<f64>)> {
        let m = members.len();
        let idx: Vec<usize> = members.iter().map(|&s| s as usize).collect();
        let entry = |i: usize, j: usize| {
            let (a, b) = if transpose { (idx[j], idx[i]) } else { (idx[i], idx[j]) };
            self.allowed[a * self.k + b] as u8 as f64
        };
        let mut v = vec![1.0f64; m];
        for _ in 0..1_000_000 {
            let w: Vec<f64> = (0..m).map(|i| v[i] + (0..m).map(|j| entry(i, j) * v[j]).sum::<f64>()).collect();
            let ratios = w.iter().zip(&v).map(|(a, b)| a / b);
            let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
            let norm: f64 = w.iter().sum();
            v = w.iter().map(|x| x / norm).collect();
            if (hi - lo) <= 1e-12 * hi {
                let lambda = 0.5 * (lo + hi) - 1.0;
                let mut full = vec![0.0; self.k];
                for (i, &s) in idx.iter().enumerate() {
                    full[s] = v[i];
                }
                return Ok((lambda, full));
            }
        }
        Err(Error::Internal("power iteration did not converge".into()))
    }
}

/// Streaming lexicographic enumeration of admissible words with a fixed prefix.
pub struct Words<'a> {
    sft: &'a Sft,
    word: Word,
    fixed: usize,
    n: usize,
    started: bool,
    done: bool,
}

impl<'a> Words<'a> {
    fn new(sft: &'a Sft, prefix: Word, n: usize) -> Self {
        let done = prefix.len() > n || !sft.admissible_unchecked(&prefix) || prefix.iter().any(|&s| s as usize >= sft.k);
        let fixed = prefix.len();
        Words { sft, word: prefix, fixed, n, started: false, done }
    }

    /// Extends `self.word` with the smallest admissible continuation up to length n.
    fn fill_min(&mut self) {
        while self.word.len() < self.n {
            let next = match self.word.last() {
                None => 0,
                Some(&p) => self.sft.successors(p)[0],
            };
            self.word.push(next);
        }
    }

    /// Advances to the next word, returning false when exhausted.
    fn advance(&mut self) -> bool {
        while self.word.len() > self.fixed {
            let last = self.word.pop().unwrap();
            let candidates: &[u8] = match self.word.last() {
                None => &[],
                Some(&p) => self.sft.successors(p),
            };
            let next = if self.word.is_empty() {
                if (last as usize) + 1 < self.sft.k {
                    Some(last + 1)
                } else {
                    None
                }
            } else {
                candidates.iter().copied().find(|&c| c > last)
            };
            if let Some(c) = next {
                self.word.push(c);
                self.fill_min();
                return true;
            }
        }
        false
    }
}

impl Iterator for Words<'_> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.fill_min();
            return Some(self.word.clone());
        }
        if self.advance() {
            Some(self.word.clone())
        } else {
            self.done = true;
            None
        }
    }
}

/// Connecting words `W_{a,b}` of common length `r`, with `a W_{a,b} b` admissible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConnectingWords {
    pub r: usize,
    table: Vec<Vec<Word>>,
}

impl ConnectingWords {
    #[inline]
    pub fn get(&self, a: u8, b: u8) -> &[u8] {
        &self.table[a as usize][b as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SftClassification {
    pub irreducible: bool,
    pub aperiodic: bool,
    pub period: usize,
    /// Smallest `r` with `A^{r+1} > 0`; absent unless aperiodic.
    pub primitivity_r: Option<usize>,
    pub connecting_words: Option<ConnectingWords>,
}

/// The shift on length-`p` blocks starting in one cyclic class.
#[derive(Debug, Clone)]
pub struct InducedShift {
    pub blocks: Vec<Word>,
    /// `None` when the class carries a single block (a fixed point of `σ^p`).
    pub sft: Option<Sft>,
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub period: usize,
    pub classes: Vec<Vec<u8>>,
    pub induced: Vec<InducedShift>,
}

impl SpectralDecomposition {
    pub fn class_of(&self, symbol: u8) -> usize {
        self.classes.iter().position(|c| c.contains(&symbol)).expect("classes partition the alphabet")
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bitrow(members: &[u8], words: usize) -> Vec<u64> {
    let mut row = vec![0u64; words];
    for &m in members {
        row[m as usize / 64] |= 1 << (m % 64);
    }
    row
}

fn full_row(k: usize, words: usize) -> Vec<u64> {
    bitrow(&(0..k as u8).collect::<Vec<_>>(), words)
}

fn bool_mul(p: &[Vec<u64>], a: &[Vec<u64>], k: usize) -> Vec<Vec<u64>> {
    p.iter()
        .map(|row| {
            let mut out = vec![0u64; row.len()];
            for j in 0..k {
                if row[j / 64] >> (j % 64) & 1 == 1 {
                    for (o, x) in out.iter_mut().zip(&a[j]) {
                        *o |= x;
                    }
                }
            }
            out
        })
        .collect()
}
