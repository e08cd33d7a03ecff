//! Explicit symbol-level transfer maps: the coordinatewise swap `φ_{ω,ω′}` on
//! full shifts, its block version `φ^M_{ω,ω′}` on aperiodic shifts of finite
//! type, and the encoding `φ^M_ω : {0..L−1}^ℕ → Σ_A`, together with harnesses
//! for their involution, bi-Lipschitz and equivariance laws.
//!
//! Maps return lazy points: symbols are produced block by block from bounded
//! windows of the inputs. With finite inputs the output ends at the last block
//! that can be resolved.

use std::collections::HashMap;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::point::{Point, SymbolGenerator};
use crate::sft::{ConnectingWords, Sft, Word};

/// Index sets `I^0_k = [kM,(k+1)M)`, `I^1_k = [k(M+r), k(M+r)+M)`, `I^2_k = [k(M+r)+M, (k+1)(M+r))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockLayout {
    pub m: usize,
    pub r: usize,
}

impl BlockLayout {
    pub fn new(m: usize, r: usize) -> Result<Self> {
        if m == 0 {
            return input("block length M must be at least 1");
        }
        Ok(BlockLayout { m, r })
    }

    pub fn period(&self) -> usize {
        self.m + self.r
    }

    pub fn i0(&self, k: usize) -> Range<usize> {
        k * self.m..(k + 1) * self.m
    }

    pub fn i1(&self, k: usize) -> Range<usize> {
        let a = k * self.period();
        a..a + self.m
    }

    pub fn i2(&self, k: usize) -> Range<usize> {
        let a = k * self.period() + self.m;
        a..a + self.r
    }
}

/// `Σ_{A,M}` in lexicographic order with its inverse.
#[derive(Debug, Clone)]
pub struct BlockCodebook {
    m: usize,
    words: Vec<Word>,
    index: HashMap<Word, usize>,
}

/// Largest codebook that will be materialized.
pub const MAX_CODEBOOK: usize = 1 << 20;

impl BlockCodebook {
    pub fn new(sft: &Sft, m: usize) -> Result<Self> {
        if m == 0 {
            return input("block length M must be at least 1");
        }
        let count = sft.count_words_f64(m);
        if count > MAX_CODEBOOK as f64 {
            return Err(Error::Resource(format!(
                "codebook of {count:.0} words of length {m} exceeds {MAX_CODEBOOK}; use a smaller M"
            )));
        }
        let words: Vec<Word> = sft.words(m).collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Ok(BlockCodebook { m, words, index })
    }

    pub fn block_len(&self) -> usize {
        self.m
    }

    /// `L = #Σ_{A,M}`.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, i: usize) -> &[u8] {
        &self.words[i]
    }

    pub fn index_of(&self, w: &[u8]) -> Option<usize> {
        self.index.get(w).copied()
    }
}

fn same_alphabet(sft: &Sft, points: &[&Point]) -> Result<()> {
    let k = sft.alphabet_size();
    match points.iter().find(|p| p.alphabet() != k) {
        Some(p) => input(format!("point over {} symbols used with a shift on {k} symbols", p.alphabet())),
        None => Ok(()),
    }
}

/// Requires an aperiodic shift and returns its connecting words.
fn aperiodic_connectors(sft: &Sft) -> Result<ConnectingWords> {
    let c = sft.classify();
    match c.connecting_words {
        Some(cw) if c.aperiodic => Ok(cw),
        _ => Err(Error::Unsupported(format!(
            "the block maps need an aperiodic irreducible shift (this one: irreducible={}, period={}); \
             split it with spectral_decomposition and map each cyclic class under σ^p",
            c.irreducible, c.period
        ))),
    }
}

/// `φ_{ω,ω′}(x)_i`: `ω′_i` if `x_i = ω_i`; `ω_i` if `x_i = ω′_i ≠ ω_i`; else `x_i`.
pub fn phi_full(sft: &Sft, omega: &Point, omega2: &Point, x: &Point) -> Result<Point> {
    if !sft.is_full_shift() {
        return Err(Error::Unsupported(
            "the coordinatewise swap does not preserve admissibility on a constrained shift; use phi_sft".into(),
        ));
    }
    same_alphabet(sft, &[omega, omega2, x])?;
    let gen = FullGen { omega: omega.clone(), omega2: omega2.clone(), x: x.clone() };
    Ok(Point::lazy(sft.alphabet_size(), "phi_full", Box::new(gen)))
}

#[inline]
fn swap_symbol(w: u8, w2: u8, s: u8) -> u8 {
    if s == w {
        w2
    } else if s == w2 {
        w
    } else {
        s
    }
}

struct FullGen {
    omega: Point,
    omega2: Point,
    x: Point,
}

impl SymbolGenerator for FullGen {
    fn extend(&mut self, buf: &mut Vec<u8>, target: usize) {
        let (a, b) = (buf.len(), target);
        let (w, w2, x) = (self.omega.window(a, b), self.omega2.window(a, b), self.x.window(a, b));
        let n = w.len().min(w2.len()).min(x.len());
        buf.extend((0..n).map(|i| swap_symbol(w[i], w2[i], x[i])));
    }
}

/// `φ^M_{ω,ω′}(x)` on an aperiodic shift, with `r = primitivity_r`.
pub fn phi_sft(sft: &Sft, omega: &Point, omega2: &Point, x: &Point, m: usize) -> Result<Point> {
    let cw = aperiodic_connectors(sft)?;
    same_alphabet(sft, &[omega, omega2, x])?;
    let layout = BlockLayout::new(m, cw.r)?;
    let gen = SftGen {
        layout,
        omega: omega.clone(),
        omega2: omega2.clone(),
        x: x.clone(),
        cw,
        next: 0,
        cur: None,
        done: false,
    };
    Ok(Point::lazy(sft.alphabet_size(), "phi_sft", Box::new(gen)))
}

struct SftGen {
    layout: BlockLayout,
    omega: Point,
    omega2: Point,
    x: Point,
    cw: ConnectingWords,
    next: usize,
    /// Content of `I^1_next` and whether it equals `ω′|_{I^1_next}`.
    cur: Option<(Word, bool)>,
    done: bool,
}

impl SftGen {
    fn block(&self, k: usize) -> Option<(Word, bool)> {
        let m = self.layout.m;
        let (r0, r1) = (self.layout.i0(k), self.layout.i1(k));
        let x0 = self.x.window(r0.start, r0.end);
        let w0 = self.omega.window(r0.start, r0.end);
        let w1 = self.omega2.window(r1.start, r1.end);
        if x0.len() < m || w0.len() < m || w1.len() < m {
            return None;
        }
        Some(if x0 == w0 {
            (w1, true)
        } else if x0 == w1 {
            (w0, false)
        } else {
            (x0, false)
        })
    }
}

impl SymbolGenerator for SftGen {
    fn extend(&mut self, buf: &mut Vec<u8>, target: usize) {
        while !self.done && buf.len() < target {
            let Some((cur, cur_match)) = self.cur.take().or_else(|| self.block(self.next)) else {
                self.done = true;
                break;
            };
            buf.extend_from_slice(&cur);
            let Some((nxt, nxt_match)) = self.block(self.next + 1) else {
                self.done = true;
                break;
            };
            let gap = if cur_match && nxt_match {
                let g = self.layout.i2(self.next);
                self.omega2.window(g.start, g.end)
            } else {
                self.cw.get(cur[cur.len() - 1], nxt[0]).to_vec()
            };
            if gap.len() < self.layout.r {
                self.done = true;
                break;
            }
            buf.extend_from_slice(&gap);
            self.next += 1;
            self.cur = Some((nxt, nxt_match));
        }
    }
}

/// `φ^M_ω(z)`: block `k` is `W_{(i_k+z_k) mod L}` with `W_{i_k} = ω|_{I^1_k}`; the gap
/// copies `ω|_{I^2_k}` when `z_k = z_{k+1} = 0` and is `W_{a,b}` otherwise.
///
/// `z` is a point over `L` symbols, so `L ≤ 256`. `ω` is checked against the
/// codebook on its first `depth` symbols; later inadmissible blocks end the stream.
pub fn phi_encode(sft: &Sft, omega: &Point, z: &Point, m: usize, depth: usize) -> Result<Point> {
    let cw = aperiodic_connectors(sft)?;
    same_alphabet(sft, &[omega])?;
    let layout = BlockLayout::new(m, cw.r)?;
    let book = BlockCodebook::new(sft, m)?;
    if book.len() > 256 {
        return Err(Error::Unsupported(format!(
            "L = {} exceeds 256, the largest alphabet a point can carry; use a smaller M",
            book.len()
        )));
    }
    if z.alphabet() != book.len() {
        return input(format!("z must be over L = {} symbols, got {}", book.len(), z.alphabet()));
    }
    let blocks = depth.div_ceil(layout.period()) + 1;
    for k in 0..blocks {
        let b = layout.i1(k);
        let w = omega.window(b.start, b.end);
        if w.len() == m && book.index_of(&w).is_none() {
            return input(format!("ω|[{}, {}) = {w:?} is not an admissible block", b.start, b.end));
        }
    }
    let gen = EncodeGen { layout, omega: omega.clone(), z: z.clone(), cw, book, next: 0, cur: None, done: false };
    Ok(Point::lazy(sft.alphabet_size(), "phi_encode", Box::new(gen)))
}

struct EncodeGen {
    layout: BlockLayout,
    omega: Point,
    z: Point,
    cw: ConnectingWords,
    book: BlockCodebook,
    next: usize,
    /// Content of `I^1_next` and whether `z_next = 0`.
    cur: Option<(Word, bool)>,
    done: bool,
}

impl EncodeGen {
    fn block(&self, k: usize) -> Option<(Word, bool)> {
        let b = self.layout.i1(k);
        let i = self.book.index_of(&self.omega.window(b.start, b.end))?;
        let zk = self.z.symbol_at(k)? as usize;
        Some((self.book.word((i + zk) % self.book.len()).to_vec(), zk == 0))
    }
}

impl SymbolGenerator for EncodeGen {
    fn extend(&mut self, buf: &mut Vec<u8>, target: usize) {
        while !self.done && buf.len() < target {
            let Some((cur, cur_zero)) = self.cur.take().or_else(|| self.block(self.next)) else {
                self.done = true;
                break;
            };
            buf.extend_from_slice(&cur);
            let Some((nxt, nxt_zero)) = self.block(self.next + 1) else {
                self.done = true;
                break;
            };
            let gap = if cur_zero && nxt_zero {
                let g = self.layout.i2(self.next);
                self.omega.window(g.start, g.end)
            } else {
                self.cw.get(cur[cur.len() - 1], nxt[0]).to_vec()
            };
            if gap.len() < self.layout.r {
                self.done = true;
                break;
            }
            buf.extend_from_slice(&gap);
            self.next += 1;
            self.cur = Some((nxt, nxt_zero));
        }
    }
}

fn first_mismatch(a: &[u8], b: &[u8]) -> Option<usize> {
    a.iter().zip(b).position(|(x, y)| x != y)
}

/// `e_i` with `ρ(σ^i a, σ^i b) = K^{-e_i}`, or `None` where no mismatch is visible.
fn distance_exponents(a: &[u8], b: &[u8]) -> Vec<Option<usize>> {
    let n = a.len().min(b.len());
    let mut out = vec![None; n];
    let mut next = None;
    for i in (0..n).rev() {
        if a[i] != b[i] {
            next = Some(i);
        }
        out[i] = next.map(|j| j - i);
    }
    out
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct InvolutionReport {
    pub samples: usize,
    /// Samples with `φ_{ω′,ω}(φ_{ω,ω′}(x)) ≠ x` on the checked prefix.
    pub involution_failures: usize,
    /// Samples with `{i: ω_i = x_i} ≠ {i: ω′_i = φ(x)_i}`.
    pub mismatch_set_failures: usize,
    /// Resolved indices at which `ρ(σ^i ω, σ^i x) = ρ(σ^i ω′, σ^i φ(x))` was compared.
    pub distance_checks: usize,
    pub distance_failures: usize,
    /// `(sample, index)` of the first failure.
    pub first_failure: Option<(usize, usize)>,
}

impl InvolutionReport {
    pub fn passed(&self) -> bool {
        self.involution_failures == 0 && self.mismatch_set_failures == 0 && self.distance_failures == 0
    }
}

/// Involution, mismatch-set identity and distance identity of `φ_{ω,ω′}` on `[0, depth)`.
pub fn check_involution(
    sft: &Sft,
    omega: &Point,
    omega2: &Point,
    samples: &[Point],
    depth: usize,
) -> Result<InvolutionReport> {
    let mut rep = InvolutionReport { samples: samples.len(), ..Default::default() };
    let w = omega.prefix(depth);
    let w2 = omega2.prefix(depth);
    for (s, x) in samples.iter().enumerate() {
        let y = phi_full(sft, omega, omega2, x)?;
        let back = phi_full(sft, omega2, omega, &y)?;
        let xs = x.prefix(depth);
        let ys = y.prefix(depth);
        let bs = back.prefix(depth);
        let fail = |rep: &mut InvolutionReport, i: usize| {
            rep.first_failure.get_or_insert((s, i));
        };
        // φ(x) ends where the shortest input ends; compare on that window
        let n = ys.len();
        if let Some(i) = first_mismatch(&xs[..n], &bs).or((bs.len() < n).then_some(bs.len())) {
            rep.involution_failures += 1;
            fail(&mut rep, i);
        }
        if let Some(i) = (0..n).find(|&i| (w[i] == xs[i]) != (w2[i] == ys[i])) {
            rep.mismatch_set_failures += 1;
            fail(&mut rep, i);
        }
        let d1 = distance_exponents(&w[..n], &xs[..n]);
        let d2 = distance_exponents(&w2[..n], &ys);
        for i in 0..n {
            match (d1[i], d2[i]) {
                (Some(a), Some(b)) => {
                    rep.distance_checks += 1;
                    if a != b {
                        rep.distance_failures += 1;
                        fail(&mut rep, i);
                    }
                }
                (None, None) => {}
                _ => {
                    rep.distance_failures += 1;
                    fail(&mut rep, i);
                }
            }
        }
    }
    Ok(rep)
}

/// Seeded inputs for the block-map harnesses, as explicit prefixes.
#[derive(Debug, Clone)]
pub struct Triple {
    pub omega: Word,
    pub omega2: Word,
    pub x: Word,
    /// A perturbation of `x`, for the pair form of the bounds.
    pub y: Word,
}

/// Copies `w` up to a position `≥ from` where another admissible symbol exists,
/// switches there and continues randomly. Returns `w` unchanged when no switch exists.
fn perturb(sft: &Sft, w: &[u8], from: usize, rng: &mut impl Rng) -> Word {
    let k = sft.alphabet_size() as u8;
    for q in from..w.len() {
        let alts: Vec<u8> = if q == 0 {
            (0..k).filter(|&s| s != w[0]).collect()
        } else {
            sft.successors(w[q - 1]).iter().copied().filter(|&s| s != w[q]).collect()
        };
        if !alts.is_empty() {
            let mut out = w[..q].to_vec();
            out.push(alts[rng.gen_range(0..alts.len())]);
            return sft.random_word(&out, w.len(), rng);
        }
    }
    w.to_vec()
}

/// `count` triples for block length `M` and gap `r`; `x` mixes three regimes
/// (perturbed `ω`, blockwise mixtures of `ω|_{I^0}`, `ω′|_{I^1}` and random blocks,
/// and independent walks) so every branch of the block rule is exercised.
pub fn sample_triples(sft: &Sft, layout: BlockLayout, count: usize, depth: usize, seed: u64) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = layout.m;
    let len2 = (depth / m + 2) * layout.period();
    (0..count)
        .map(|_| {
            let omega = sft.random_word(&[], depth, &mut rng);
            let omega2 = sft.random_word(&[], len2, &mut rng);
            let x = match rng.gen_range(0..3) {
                0 => {
                    let p = rng.gen_range(0..depth);
                    perturb(sft, &omega, p, &mut rng)
                }
                1 => {
                    let mut x: Word = Vec::with_capacity(depth + m);
                    for j in 0..depth.div_ceil(m) {
                        let cand = match rng.gen_range(0..4) {
                            0 | 1 => omega[layout.i0(j).start..layout.i0(j).end.min(depth)].to_vec(),
                            2 => omega2[layout.i1(j)].to_vec(),
                            _ => Vec::new(),
                        };
                        let seam_ok = match (x.last(), cand.first()) {
                            (_, None) => false,
                            (Some(&a), Some(&b)) => sft.allowed(a, b),
                            (None, Some(_)) => true,
                        };
                        if seam_ok && sft.admissible_unchecked(&cand) {
                            x.extend_from_slice(&cand);
                        } else {
                            let l = x.len() + m;
                            x = sft.random_word(&x, l, &mut rng);
                        }
                    }
                    x.truncate(depth);
                    x
                }
                _ => sft.random_word(&[], depth, &mut rng),
            };
            let p = rng.gen_range(0..depth);
            let y = perturb(sft, &x, p, &mut rng);
            Triple { omega, omega2, x, y }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MapKind {
    Sft,
    Encode,
}

/// Worst slacks of the two-sided distance bounds, in units of `log K`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub kind: MapKind,
    pub m: usize,
    pub r: usize,
    /// Number of `L` (encode only).
    pub l: Option<usize>,
    pub checked: usize,
    /// Pairs with distance 0 on both sides.
    pub vacuous: usize,
    /// Pairs whose distances were not resolved inside the sampled window.
    pub skipped: usize,
    pub violations: usize,
    pub min_lower_slack: f64,
    pub min_upper_slack: f64,
    pub first_violation: Option<String>,
}

impl BoundReport {
    fn new(kind: MapKind, m: usize, r: usize, l: Option<usize>) -> Self {
        BoundReport {
            kind,
            m,
            r,
            l,
            checked: 0,
            vacuous: 0,
            skipped: 0,
            violations: 0,
            min_lower_slack: f64::INFINITY,
            min_upper_slack: f64::INFINITY,
            first_violation: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Records one pair with first-mismatch exponents `p` (input) and `p′` (output).
    /// `lower_num`, `upper_num` are the integer slacks scaled by `den`.
    fn record(&mut self, lower_num: i64, upper_num: i64, den: i64, what: impl FnOnce() -> String) {
        self.checked += 1;
        self.min_lower_slack = self.min_lower_slack.min(lower_num as f64 / den as f64);
        self.min_upper_slack = self.min_upper_slack.min(upper_num as f64 / den as f64);
        if lower_num < 0 || upper_num < 0 {
            self.violations += 1;
            self.first_violation.get_or_insert_with(what);
        }
    }
}

/// Bi-Lipschitz-type bounds of the block maps over `samples` seeded inputs of length `depth`.
///
/// Block map, with `ρ = K^{-p}` and `ρ′ = K^{-p′}`:
/// `K^{-M} ρ^{(M+r)/M} ≤ ρ′ ≤ K^{M+2r} ρ^{(M+r)/M}`, checked as
/// `−M² − p(M+r) ≤ −p′M ≤ M(M+2r) − p(M+r)` for `(ω,x) ↦ (ω′,x′)` and `(x,y) ↦ (x′,y′)`.
/// Encoding, with `ρ(z,z′) = L^{-q}`: `K^{-M} K^{-q(M+r)} ≤ ρ′ ≤ K^{r} K^{-q(M+r)}`
/// for `(0,z)` and `(z,z′)`.
pub fn check_bilipschitz(
    sft: &Sft,
    kind: MapKind,
    m: usize,
    samples: usize,
    depth: usize,
    seed: u64,
) -> Result<BoundReport> {
    let cw = aperiodic_connectors(sft)?;
    let layout = BlockLayout::new(m, cw.r)?;
    match kind {
        MapKind::Sft => bilipschitz_sft(sft, layout, &sample_triples(sft, layout, samples, depth, seed)),
        MapKind::Encode => bilipschitz_encode(sft, layout, samples, depth, seed),
    }
}

/// Block-map bounds on given triples.
pub fn bilipschitz_sft(sft: &Sft, layout: BlockLayout, triples: &[Triple]) -> Result<BoundReport> {
    let k = sft.alphabet_size();
    let (m, r) = (layout.m as i64, layout.r as i64);
    let mut rep = BoundReport::new(MapKind::Sft, layout.m, layout.r, None);
    for t in triples {
        let pt = |w: &Word| Point::explicit(k, w.clone());
        let (omega, omega2) = (pt(&t.omega)?, pt(&t.omega2)?);
        let image = |x: &Word| -> Result<Word> {
            let out = phi_sft(sft, &omega, &omega2, &pt(x)?, layout.m)?;
            Ok(out.prefix((x.len() / layout.m + 1) * layout.period()))
        };
        let (xi, yi) = (image(&t.x)?, image(&t.y)?);
        for (a, b, a2, b2) in [(&t.omega, &t.x, &t.omega2, &xi), (&t.x, &t.y, &xi, &yi)] {
            let n = a.len().min(b.len());
            let Some(p) = first_mismatch(&a[..n], &b[..n]) else {
                if first_mismatch(a2, b2).is_none() {
                    rep.vacuous += 1;
                } else {
                    rep.skipped += 1;
                }
                continue;
            };
            // the block containing p must be fully sampled for the image to be resolved
            let Some(q) = ((p / layout.m + 1) * layout.m <= n).then(|| first_mismatch(a2, b2)).flatten() else {
                rep.skipped += 1;
                continue;
            };
            let (p, q) = (p as i64, q as i64);
            rep.record(m * m + p * (m + r) - q * m, q * m - p * (m + r) + m * (m + 2 * r), m, || {
                format!("first mismatch {p} maps to {q} (M={m}, r={r})")
            });
        }
    }
    Ok(rep)
}

fn bilipschitz_encode(sft: &Sft, layout: BlockLayout, samples: usize, depth: usize, seed: u64) -> Result<BoundReport> {
    let k = sft.alphabet_size();
    let book_len = BlockCodebook::new(sft, layout.m)?.len();
    let (m, r, per) = (layout.m as i64, layout.r as i64, layout.period() as i64);
    let mut rep = BoundReport::new(MapKind::Encode, layout.m, layout.r, Some(book_len));
    let blocks = (depth / layout.period()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let omega = Point::explicit(k, sft.random_word(&[], (blocks + 2) * layout.period(), &mut rng))?;
        let lead = rng.gen_range(0..=blocks);
        let z: Vec<u8> = (0..=blocks)
            .map(|j| {
                if j < lead || rng.gen_bool(0.3) {
                    0
                } else {
                    rng.gen_range(0..book_len) as u8
                }
            })
            .collect();
        let mut z2 = z.clone();
        let q2 = rng.gen_range(0..=blocks);
        z2[q2] = ((z2[q2] as usize + rng.gen_range(1..book_len)) % book_len) as u8;
        let zero = vec![0u8; z.len()];
        let image = |zz: &Vec<u8>| -> Result<Word> {
            let zp = Point::explicit(book_len, zz.clone())?;
            Ok(phi_encode(sft, &omega, &zp, layout.m, depth)?.prefix(zz.len() * layout.period()))
        };
        let (i0, i1, i2) = (image(&zero)?, image(&z)?, image(&z2)?);
        for (a, b, a2, b2) in [(&zero, &z, &i0, &i1), (&z, &z2, &i1, &i2)] {
            let Some(q) = first_mismatch(a, b) else {
                rep.vacuous += 1;
                continue;
            };
            let Some(p2) = first_mismatch(a2, b2) else {
                rep.skipped += 1;
                continue;
            };
            let (q, p2) = (q as i64, p2 as i64);
            rep.record(m + q * per - p2, p2 - q * per + r, 1, || {
                format!("z-mismatch at block {q} maps to {p2} (M={m}, r={r})")
            });
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AdmissibilityReport {
    pub samples: usize,
    pub symbols_checked: usize,
    pub violations: usize,
    /// `(sample, index)` of the first forbidden transition.
    pub first_violation: Option<(usize, usize)>,
}

/// Admissibility of `φ^M_{ω,ω′}(x)` and `φ^M_{ω,ω′}(y)` over the triples.
pub fn check_admissibility(sft: &Sft, m: usize, triples: &[Triple]) -> Result<AdmissibilityReport> {
    let k = sft.alphabet_size();
    let mut rep = AdmissibilityReport { samples: triples.len(), ..Default::default() };
    for (s, t) in triples.iter().enumerate() {
        let omega = Point::explicit(k, t.omega.clone())?;
        let omega2 = Point::explicit(k, t.omega2.clone())?;
        for x in [&t.x, &t.y] {
            let out = phi_sft(sft, &omega, &omega2, &Point::explicit(k, x.clone())?, m)?
                .prefix((x.len() / m + 1) * (m + sft.classify().primitivity_r.unwrap_or(0)));
            rep.symbols_checked += out.len();
            if let Some(i) = sft.first_violation(&out) {
                rep.violations += 1;
                rep.first_violation.get_or_insert((s, i));
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivarianceReport {
    pub compared: usize,
    pub first_mismatch: Option<usize>,
}

impl EquivarianceReport {
    pub fn holds(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// `σ^{M+r} φ^M_{ω,ω′}(x) = φ^M_{σ^M ω, σ^{M+r} ω′}(σ^M x)` on `[0, depth − (M+r))`.
pub fn check_equivariance(
    sft: &Sft,
    omega: &Point,
    omega2: &Point,
    x: &Point,
    m: usize,
    depth: usize,
) -> Result<EquivarianceReport> {
    let r = aperiodic_connectors(sft)?.r;
    let n = depth.saturating_sub(m + r);
    let lhs = phi_sft(sft, omega, omega2, x, m)?.shift(m + r).prefix(n);
    let rhs = phi_sft(sft, &omega.shift(m), &omega2.shift(m + r), &x.shift(m), m)?.prefix(n);
    let compared = lhs.len().min(rhs.len());
    let first_mismatch = first_mismatch(&lhs, &rhs).or((lhs.len() != rhs.len()).then_some(compared));
    Ok(EquivarianceReport { compared, first_mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(k: usize, s: &str) -> Point {
        Point::parse(s, k).unwrap()
    }

    #[test]
    fn layout_partitions_periods() {
        let l = BlockLayout::new(4, 1).unwrap();
        assert_eq!(l.i1(2), 10..14);
        assert_eq!(l.i2(2), 14..15);
        assert_eq!(l.i0(2), 8..12);
        assert!(BlockLayout::new(0, 1).is_err());
    }

    #[test]
    fn codebook_is_lexicographic() {
        let b = BlockCodebook::new(&Sft::golden_mean(), 3).unwrap();
        assert_eq!(b.len(), 5);
        assert_eq!(b.word(0), &[0, 0, 0]);
        assert_eq!(b.word(4), &[1, 0, 1]);
        for i in 0..5 {
            assert_eq!(b.index_of(b.word(i)), Some(i));
        }
        assert_eq!(b.index_of(&[1, 1, 0]), None);
    }

    #[test]
    fn phi_full_three_cases() {
        let sft = Sft::full_shift(3).unwrap();
        let w = pt(3, "periodic:/012");
        let w2 = pt(3, "periodic:/120");
        let x = pt(3, "periodic:/0");
        // brute force per index
        let expect: Vec<u8> = (0..6)
            .map(|i| {
                let (a, b) = ([0u8, 1, 2][i % 3], [1u8, 2, 0][i % 3]);
                if a == 0 {
                    b
                } else if b == 0 {
                    a
                } else {
                    0
                }
            })
            .collect();
        assert_eq!(expect, vec![1, 0, 2, 1, 0, 2]);
        assert_eq!(phi_full(&sft, &w, &w2, &x).unwrap().prefix(6), expect);
        assert_eq!(phi_full(&sft, &w, &w, &x).unwrap().prefix(9), x.prefix(9));
        assert_eq!(phi_full(&sft, &w, &w2, &w).unwrap().prefix(9), w2.prefix(9));
        assert!(matches!(phi_full(&Sft::golden_mean(), &w, &w2, &x), Err(Error::Unsupported(_))));
    }

    #[test]
    fn phi_sft_brute_force_golden_mean() {
        let sft = Sft::golden_mean();
        let w = Point::explicit(2, vec![0, 1, 0, 0, 1, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0]).unwrap();
        let w2 = Point::explicit(2, vec![1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 0, 1, 0, 0, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0]).unwrap();
        // x blocks: third branch, second branch (= ω′|I^1_1), third, first, first
        let x = Point::explicit(2, vec![0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 1, 0]).unwrap();
        let out = phi_sft(&sft, &w, &w2, &x, 4).unwrap().prefix(100);
        let w2s = w2.prefix(25);
        let (xs, ws) = (x.prefix(20), w.prefix(20));
        let mut expect = Vec::new();
        let blocks: Vec<(Vec<u8>, bool)> = (0..5)
            .map(|k| {
                let (x0, w0, w1) = (&xs[4 * k..4 * k + 4], &ws[4 * k..4 * k + 4], &w2s[5 * k..5 * k + 4]);
                if x0 == w0 {
                    (w1.to_vec(), true)
                } else if x0 == w1 {
                    (w0.to_vec(), false)
                } else {
                    (x0.to_vec(), false)
                }
            })
            .collect();
        for k in 0..5 {
            expect.extend_from_slice(&blocks[k].0);
            if k + 1 < 5 {
                if blocks[k].1 && blocks[k + 1].1 {
                    expect.push(w2s[5 * k + 4]);
                } else {
                    expect.push(sft.connecting_words().unwrap().get(blocks[k].0[3], blocks[k + 1].0[0])[0]);
                }
            }
        }
        assert_eq!(out, expect);
        assert_eq!(out.len(), 24);
        assert_eq!(sft.first_violation(&out), None);
        assert_eq!(&out[..4], &xs[..4]);
        assert_eq!(&out[5..9], &ws[4..8]);
        assert_eq!(&out[15..19], &w2s[15..19]);
        assert_eq!(out[19], w2s[19]);
    }

    #[test]
    fn phi_sft_fixed_points_and_errors() {
        let sft = Sft::golden_mean();
        let w = pt(2, "periodic:/010");
        let w2 = pt(2, "periodic:0/10");
        assert_eq!(phi_sft(&sft, &w, &w2, &w, 4).unwrap().prefix(200), w2.prefix(200));
        let periodic = Sft::new(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let e = phi_sft(&periodic, &w, &w, &w, 2).unwrap_err();
        assert!(matches!(&e, Error::Unsupported(msg) if msg.contains("spectral_decomposition")));
    }

    #[test]
    fn phi_encode_examples() {
        let sft = Sft::golden_mean();
        let w = pt(2, "periodic:/01");
        let zero = Point::constant(5, 0).unwrap();
        assert_eq!(phi_encode(&sft, &w, &zero, 3, 80).unwrap().prefix(80), w.prefix(80));
        // ω = 0101…, M = 3, r = 1: every ω|I^1_k is 010 (index 2)
        let z = Point::periodic(5, vec![1, 2], vec![0]).unwrap();
        let out = phi_encode(&sft, &w, &z, 3, 16).unwrap().prefix(16);
        let book = BlockCodebook::new(&sft, 3).unwrap();
        let cw = sft.connecting_words().unwrap();
        let b0 = book.word((2 + 1) % 5).to_vec(); // 100
        let b1 = book.word((2 + 2) % 5).to_vec(); // 101
        let b2 = vec![0, 1, 0];
        let b3 = vec![0, 1, 0];
        let mut expect = b0.clone();
        expect.extend_from_slice(cw.get(b0[2], b1[0]));
        expect.extend_from_slice(&b1);
        expect.extend_from_slice(cw.get(b1[2], b2[0]));
        expect.extend_from_slice(&b2);
        expect.push(w.symbol_at(11).unwrap());
        expect.extend_from_slice(&b3);
        expect.push(w.symbol_at(15).unwrap());
        assert_eq!(out, expect);
        assert_eq!(out[..8], [1, 0, 0, 0, 1, 0, 1, 0]);
        assert_eq!(sft.first_violation(&out), None);
        let bad = pt(2, "prefix:11000000");
        assert!(matches!(phi_encode(&sft, &bad, &zero, 3, 8), Err(Error::Input(_))));
        assert!(matches!(phi_encode(&sft, &w, &Point::constant(4, 0).unwrap(), 3, 8), Err(Error::Input(_))));
    }

    #[test]
    fn involution_and_identities() {
        let sft = Sft::full_shift(3).unwrap();
        let w = pt(3, "periodic:/0120");
        let w2 = pt(3, "periodic:2/10");
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<Point> =
            (0..50).map(|_| Point::explicit(3, sft.random_word(&[], 128, &mut rng)).unwrap()).collect();
        let rep = check_involution(&sft, &w, &w2, &samples, 128).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.distance_checks > 1000);
        // near-equal ω, ω′ differing at a single index
        let a = Point::explicit(3, vec![0; 64]).unwrap();
        let mut bw = vec![0; 64];
        bw[20] = 2;
        let b = Point::explicit(3, bw).unwrap();
        let x = Point::explicit(3, (0..64).map(|i| (i % 3) as u8).collect()).unwrap();
        let rep = check_involution(&sft, &a, &b, &[x, a.clone()], 64).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn bounds_hold_on_golden_mean() {
        let sft = Sft::golden_mean();
        for m in [2, 4] {
            let rep = check_bilipschitz(&sft, MapKind::Sft, m, 60, 128, 7).unwrap();
            assert!(rep.passed(), "{rep:?}");
            assert!(rep.checked > 60);
            assert!(rep.min_lower_slack >= 0.0 && rep.min_upper_slack >= 0.0);
        }
        let rep = check_bilipschitz(&sft, MapKind::Encode, 3, 60, 128, 7).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.l, Some(5));
    }

    #[test]
    fn equivariance_examples() {
        let sft = Sft::golden_mean();
        let w = pt(2, "periodic:/010");
        let w2 = pt(2, "periodic:/0");
        let rep = check_equivariance(&sft, &w, &w2, &w, 4, 100).unwrap();
        assert!(rep.holds());
        assert_eq!(rep.compared, 95);
        let full = Sft::full_shift(2).unwrap();
        let x = pt(2, "periodic:/0111");
        assert!(check_equivariance(&full, &w, &w2, &x, 3, 60).unwrap().holds());
    }

    proptest! {
        #[test]
        fn phi_sft_laws_on_random_triples(seed in 0u64..1000, m in 1usize..6) {
            let sft = Sft::golden_mean();
            let layout = BlockLayout::new(m, 1).unwrap();
            let triples = sample_triples(&sft, layout, 4, 64, seed);
            prop_assert_eq!(check_admissibility(&sft, m, &triples).unwrap().violations, 0);
            prop_assert!(bilipschitz_sft(&sft, layout, &triples).unwrap().passed());
            for t in &triples {
                let p = |w: &Word| Point::explicit(2, w.clone()).unwrap();
                prop_assert!(check_equivariance(&sft, &p(&t.omega), &p(&t.omega2), &p(&t.x), m, 64).unwrap().holds());
            }
        }

        #[test]
        fn encode_injective_on_blocks(a in proptest::collection::vec(0u8..5, 3), b in proptest::collection::vec(0u8..5, 3)) {
            let sft = Sft::golden_mean();
            let w = pt(2, "periodic:/0010");
            let enc = |z: &Vec<u8>| {
                let zp = Point::periodic(5, z.clone(), vec![0]).unwrap();
                phi_encode(&sft, &w, &zp, 3, 12).unwrap().prefix(12)
            };
            prop_assert_eq!(a == b, enc(&a) == enc(&b));
        }
    }
}
