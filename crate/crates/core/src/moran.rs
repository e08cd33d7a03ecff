//! Moran-set engine: α-chains, geometric breakpoint schedules, frequency block
//! libraries, assembled sets with exact word counts and the balanced measure
//! `μ̂`, and mean-Li–Yorke witness points.
//!
//! Segments longer than a piece cap are split into near-equal pieces, each
//! drawn from the library independently. In gap mode every piece after the
//! first starts with the `r` symbols of a connecting word `W_{a,b}`, so the
//! word set up to any breakpoint is an exact product of piece counts.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entropy::{
    distribution_principle_check, ConstantReport, CylinderMeasure, CylinderSetOracle, Provenance,
};
use crate::error::{input, Error, Result};
use crate::point::{kpow, Point, SymbolGenerator};
use crate::sft::{ConnectingWords, Sft};

/// Compact connected target set `C`.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    Interval(f64, f64),
    /// Union of intervals; rejected unless it is connected.
    Union(Vec<(f64, f64)>),
    /// Connected skeleton of a set in `R^d`.
    Polyline(Vec<Vec<f64>>),
}

struct Path {
    vertices: Vec<Vec<f64>>,
    /// Cumulative arc length at each vertex.
    arc: Vec<f64>,
}

impl Path {
    fn new(c: &TargetSet) -> Result<Path> {
        let vertices = match c {
            TargetSet::Interval(a, b) => {
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    return input(format!("interval [{a}, {b}] is not a compact interval"));
                }
                vec![vec![*a], vec![*b]]
            }
            TargetSet::Union(parts) => {
                if parts.is_empty() {
                    return input("target set is empty");
                }
                let mut parts = parts.clone();
                parts.sort_by(|x, y| x.0.total_cmp(&y.0));
                let (lo, mut hi) = parts[0];
                for &(a, b) in &parts {
                    if !(a.is_finite() && b.is_finite() && a <= b) {
                        return input(format!("[{a}, {b}] is not a compact interval"));
                    }
                    if a > hi {
                        return input(format!("target set is disconnected: gap ({hi}, {a})"));
                    }
                    hi = hi.max(b);
                }
                vec![vec![lo], vec![hi]]
            }
            TargetSet::Polyline(v) => {
                if v.is_empty() || v.iter().any(|p| p.len() != v[0].len() || p.is_empty()) {
                    return input("polyline needs vertices of one common positive dimension");
                }
                v.clone()
            }
        };
        let mut arc = vec![0.0];
        for w in vertices.windows(2) {
            arc.push(arc.last().unwrap() + dist(&w[0], &w[1]));
        }
        Ok(Path { vertices, arc })
    }

    fn len(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    fn at(&self, u: f64) -> Vec<f64> {
        let u = u.clamp(0.0, self.len());
        let i = self.arc.partition_point(|&a| a <= u).clamp(1, self.vertices.len().max(2) - 1);
        if self.vertices.len() == 1 {
            return self.vertices[0].clone();
        }
        let (a, b) = (&self.vertices[i - 1], &self.vertices[i]);
        let seg = self.arc[i] - self.arc[i - 1];
        let t = if seg > 0.0 { ((u - self.arc[i - 1]) / seg).clamp(0.0, 1.0) } else { 0.0 };
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    }

    fn grid(&self, step: f64) -> Vec<f64> {
        let n = (self.len() / step).ceil() as usize;
        (0..=n).map(|i| (i as f64 * step).min(self.len())).collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Per-level sweeps `α_{L,1..J(L)}` of `C`, flattened to `α′_j`.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaChain {
    pub eps: Vec<f64>,
    /// `J(L)` per level.
    pub counts: Vec<usize>,
    /// `α′_j`, levels concatenated.
    pub alphas: Vec<Vec<f64>>,
    /// `ε′_j = ε_L` for the level `L` holding `j`.
    pub eps_prime: Vec<f64>,
    pub grid: f64,
}

impl AlphaChain {
    /// `λ(L, k) = k + Σ_{i<L} J(i)`, both 1-based.
    pub fn lambda(&self, level: usize, k: usize) -> usize {
        k + self.counts[..level - 1].iter().sum::<usize>()
    }

    pub fn level(&self, level: usize) -> &[Vec<f64>] {
        let a = self.lambda(level, 1) - 1;
        &self.alphas[a..a + self.counts[level - 1]]
    }

    /// Step bound, per-level cover of `C` on the grid, and bijectivity of `λ`.
    pub fn verify(&self, c: &TargetSet) -> Result<()> {
        let path = Path::new(c)?;
        for j in 0..self.alphas.len().saturating_sub(1) {
            let d = dist(&self.alphas[j], &self.alphas[j + 1]);
            if d >= self.eps_prime[j] {
                return Err(Error::Internal(format!("chain step {j}: |α′_j − α′_(j+1)| = {d} ≥ ε′_j")));
            }
        }
        let grid = path.grid(self.grid);
        for (l, &e) in self.eps.iter().enumerate() {
            let pts = self.level(l + 1);
            for &u in &grid {
                let p = path.at(u);
                if !pts.iter().any(|a| dist(a, &p) < e) {
                    return Err(Error::Internal(format!("level {} leaves {p:?} uncovered", l + 1)));
                }
            }
        }
        let mut seen = vec![false; self.alphas.len()];
        for (l, &j) in self.counts.iter().enumerate() {
            for k in 1..=j {
                let i = self.lambda(l + 1, k);
                if i == 0 || i > seen.len() || std::mem::replace(&mut seen[i - 1], true) {
                    return Err(Error::Internal(format!("λ({}, {k}) = {i} is not a bijection", l + 1)));
                }
            }
        }
        Ok(())
    }
}

/// Sweeps `C` at each level with steps `< ε_L`. With a score hook each level
/// ends at the grid maximizer of the score (the packing variant).
pub fn build_alpha_chain(
    c: &TargetSet,
    eps: &[f64],
    grid: f64,
    score: Option<&dyn Fn(&[f64]) -> f64>,
) -> Result<AlphaChain> {
    let path = Path::new(c)?;
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0)) {
        return input("ε ladder must be nonempty and positive");
    }
    if eps.windows(2).any(|w| w[1] > w[0]) {
        return input("ε ladder must be non-increasing");
    }
    if !(grid > 0.0) {
        return input("grid resolution must be positive");
    }
    let len = path.len();
    let best = score.map(|f| {
        path.grid(grid).into_iter().fold((0.0, f64::NEG_INFINITY), |acc, u| {
            let v = f(&path.at(u));
            if v > acc.1 {
                (u, v)
            } else {
                acc
            }
        })
    });
    let mut alphas = Vec::new();
    let mut eps_prime = Vec::new();
    let mut counts = Vec::new();
    let mut u_prev = 0.0;
    for &e in eps {
        let center = best.map_or(len / 2.0, |b| b.0);
        let cp = path.at(center);
        let mut level: Vec<f64> = if path.vertices.iter().all(|v| dist(v, &cp) < e) {
            vec![center]
        } else {
            let (near, far) = if u_prev <= len - u_prev { (0.0, len) } else { (len, 0.0) };
            let mut stops = vec![u_prev, near, far];
            if let Some((u, _)) = best {
                stops.push(u);
            }
            let mut us = vec![u_prev];
            for w in stops.windows(2) {
                let n = ((w[1] - w[0]).abs() / (0.9 * e)).ceil() as usize;
                us.extend((1..=n).map(|i| w[0] + (w[1] - w[0]) * i as f64 / n as f64));
            }
            us
        };
        level.dedup();
        u_prev = *level.last().unwrap();
        counts.push(level.len());
        eps_prime.extend(std::iter::repeat(e).take(level.len()));
        alphas.extend(level.into_iter().map(|u| path.at(u)));
    }
    let chain = AlphaChain { eps: eps.to_vec(), counts, alphas, eps_prime, grid };
    chain.verify(c)?;
    Ok(chain)
}

/// How `T_j` follows `T_{j−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GrowthPolicy {
    /// `T_j = T_{j−1} · q`.
    Ratio(f64),
    /// `T_j = j · T_{j−1} · ⌈1/ε′_j⌉`.
    Default,
    /// The default growth with the factor capped.
    Capped(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct StageSpan {
    /// 1-based stage index `j`.
    pub stage: usize,
    /// `T_{j−1}` (0 for the first stage).
    pub start: usize,
    /// `T_j`.
    pub end: usize,
    /// `m(j)`; 1 for the first stage, a single segment `[0, T_1)`.
    pub m: usize,
    /// `r_j` with `r_j^{m(j)} = T_j / T_{j−1}`; absent for the first stage.
    pub r: Option<f64>,
    /// `t_0^j, …, t_{m(j)}^j`.
    pub breakpoints: Vec<usize>,
}

/// Finite-window monotone trends of the schedule constraints (`None`: no ε data).
#[derive(Debug, Clone, Serialize)]
pub struct ScheduleTrends {
    pub t_eps_increasing: Option<bool>,
    pub tail_ratio_decreasing: bool,
    pub r_eps_increasing: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MoranSchedule {
    pub stages: Vec<StageSpan>,
    pub eps: Vec<f64>,
    pub trends: ScheduleTrends,
}

/// Largest final breakpoint accepted by the builders.
pub const MAX_LENGTH: usize = 1 << 24;

fn eps_at(eps: &[f64], j: usize) -> Option<f64> {
    eps.get(j - 1).or(eps.last()).copied()
}

pub fn build_schedule(t1: usize, policy: GrowthPolicy, stages: usize, eps: &[f64]) -> Result<MoranSchedule> {
    if t1 < 16 {
        return input(format!("T_1 = {t1} is below the minimum 16"));
    }
    if stages == 0 {
        return input("a schedule needs at least one stage");
    }
    if eps.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return input("ε′_j must lie in (0, 1]");
    }
    let mut spans = vec![StageSpan { stage: 1, start: 0, end: t1, m: 1, r: None, breakpoints: vec![0, t1] }];
    for j in 2..=stages {
        let prev = spans.last().unwrap().end;
        let factor = match policy {
            GrowthPolicy::Ratio(q) => q,
            GrowthPolicy::Default | GrowthPolicy::Capped(_) => {
                let e = eps_at(eps, j).ok_or_else(|| Error::Input("the default growth policy needs ε′_j".into()))?;
                let f = (j as f64) * (1.0 / e).ceil();
                match policy {
                    GrowthPolicy::Capped(cap) => f.min(cap),
                    _ => f,
                }
            }
        };
        let end = (prev as f64 * factor).round();
        if !(end > prev as f64) {
            return input(format!("T_{j} must strictly exceed T_{} = {prev} (growth factor {factor})", j - 1));
        }
        if end > MAX_LENGTH as f64 {
            return Err(Error::Resource(format!(
                "T_{j} = {end:.0} exceeds the length cap {MAX_LENGTH}; use fewer stages or slower growth"
            )));
        }
        let end = end as usize;
        let ratio = end as f64 / prev as f64;
        let m = (ratio.log2() - 1e-12).ceil().max(1.0) as usize;
        let r = ratio.powf(1.0 / m as f64);
        if !(r > 1.0 && r <= 2.0 + 1e-12) {
            return Err(Error::Internal(format!("r_{j} = {r} outside (1, 2]")));
        }
        let mut bps: Vec<usize> = (0..m).map(|l| (r.powi(l as i32) * prev as f64 + 1e-9).floor() as usize).collect();
        bps.push(end);
        if bps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Internal(format!("breakpoints of stage {j} are not strictly increasing: {bps:?}")));
        }
        spans.push(StageSpan { stage: j, start: prev, end, m, r: Some(r), breakpoints: bps });
    }
    let t: Vec<f64> = spans.iter().map(|s| s.end as f64).collect();
    let strictly_up = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let with_eps = |f: &dyn Fn(usize, f64) -> f64, from: usize| -> Option<bool> {
        (!eps.is_empty()).then(|| strictly_up(&(from..=stages).map(|j| f(j, eps_at(eps, j).unwrap())).collect::<Vec<_>>()))
    };
    let tail: Vec<f64> = (1..t.len()).map(|j| t[..j].iter().sum::<f64>() / t[j]).collect();
    let trends = ScheduleTrends {
        t_eps_increasing: with_eps(&|j, e| t[j - 1] * e, 1),
        tail_ratio_decreasing: tail.windows(2).all(|w| w[1] < w[0]),
        r_eps_increasing: with_eps(&|j, e| (spans[j - 1].r.unwrap_or(1.0) - 1.0) / e, 2),
    };
    Ok(MoranSchedule { stages: spans, eps: eps.to_vec(), trends })
}

impl MoranSchedule {
    /// `T_1, …, T_n`.
    pub fn t(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.end).collect()
    }

    /// All breakpoints after 0, increasing.
    pub fn breakpoints(&self) -> Vec<usize> {
        self.stages.iter().flat_map(|s| s.breakpoints[1..].iter().copied()).collect()
    }

    /// `(stage, start, end)` per segment.
    pub fn segments(&self) -> Vec<(usize, usize, usize)> {
        self.stages
            .iter()
            .flat_map(|s| s.breakpoints.windows(2).map(move |w| (s.stage, w[0], w[1])))
            .collect()
    }

    pub fn total_len(&self) -> usize {
        self.stages.last().map_or(0, |s| s.end)
    }
}

/// Per-stage word sets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BlockLibrary {
    /// Every admissible word.
    AllWords,
    /// Words whose frequency of `symbol` lies within `tols[j]` of `targets[j]`
    /// (the last entry repeats for later stages).
    Frequency { symbol: u8, targets: Vec<f64>, tols: Vec<f64> },
}

impl BlockLibrary {
    /// Targets and tolerances from a one-dimensional chain.
    pub fn from_chain(symbol: u8, chain: &AlphaChain) -> Result<Self> {
        if chain.alphas.iter().any(|a| a.len() != 1) {
            return input("frequency libraries need a one-dimensional chain");
        }
        Ok(BlockLibrary::Frequency {
            symbol,
            targets: chain.alphas.iter().map(|a| a[0]).collect(),
            tols: chain.eps_prime.clone(),
        })
    }

    fn symbol(&self) -> u8 {
        match self {
            BlockLibrary::AllWords => 0,
            BlockLibrary::Frequency { symbol, .. } => *symbol,
        }
    }

    /// Admissible occurrence counts `[lo, hi]` of the symbol in a word of length `len` at stage `j`.
    fn band(&self, stage: usize, len: usize) -> (usize, usize) {
        match self {
            BlockLibrary::AllWords => (0, len),
            BlockLibrary::Frequency { targets, tols, .. } => {
                let a = eps_at(targets, stage).unwrap();
                let t = eps_at(tols, stage).unwrap();
                let lo = ((a - t) * len as f64 - 1e-9).ceil().max(0.0) as usize;
                let hi = ((a + t) * len as f64 + 1e-9).floor().min(len as f64);
                if hi < 0.0 {
                    return (1, 0);
                }
                (lo, hi as usize)
            }
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        if let BlockLibrary::Frequency { symbol, targets, tols } = self {
            if *symbol as usize >= k {
                return input(format!("frequency symbol {symbol} out of range for {k} symbols"));
            }
            if targets.is_empty() || tols.is_empty() {
                return input("frequency library needs targets and tolerances");
            }
            if tols.iter().any(|&t| !(t >= 0.0)) {
                return input("tolerances must be non-negative");
            }
        }
        Ok(())
    }
}

/// How pieces are joined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GapMode {
    /// Free concatenation; needs a full shift when there are several pieces.
    None,
    /// Every piece after the first starts with a connecting word of length `r`.
    Connect,
    /// `None` on full shifts, `Connect` otherwise.
    Auto,
}

/// One library draw: `[start, start+len)`, of which the first `gap` symbols are a connecting word.
#[derive(Debug, Clone, Serialize)]
pub struct Piece {
    pub stage: usize,
    pub start: usize,
    pub len: usize,
    pub gap: usize,
    /// Occurrence band of the library symbol in the `len − gap` free symbols.
    pub lo: usize,
    pub hi: usize,
    /// `ln` of the number of library words for this piece.
    pub log_count: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BreakpointCount {
    pub breakpoint: usize,
    /// `ln #W_0^t(M)`.
    pub count_log: f64,
    pub slope: f64,
}

/// `ln x` for a big integer.
pub fn big_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Normalized completion counts `Ñ(rem, a, j) = N(rem, a, j) / λ^rem`, where `N` counts words `v`
/// of length `rem` with `a v` admissible (`a = K`: no constraint) and `j` occurrences of the symbol.
struct CompletionTable {
    ln_lambda: f64,
    pre: Vec<Vec<f64>>,
    suf: Vec<Vec<f64>>,
}

impl CompletionTable {
    fn new(sft: &Sft, symbol: u8, max_len: usize) -> Result<Self> {
        let k = sft.alphabet_size();
        let lambda = sft.perron_root()?;
        let mut dist = vec![vec![1.0f64]; k + 1];
        let mut pre = Vec::with_capacity(max_len + 1);
        let mut suf = Vec::with_capacity(max_len + 1);
        let all: Vec<u8> = (0..k as u8).collect();
        for rem in 0..=max_len {
            if rem > 0 {
                let mut next = vec![vec![0.0; rem + 1]; k + 1];
                for (a, row) in next.iter_mut().enumerate() {
                    let cands = if a == k { &all[..] } else { sft.successors(a as u8) };
                    for &b in cands {
                        let inc = (b == symbol) as usize;
                        for (j, &v) in dist[b as usize].iter().enumerate() {
                            row[j + inc] += v / lambda;
                        }
                    }
                }
                dist = next;
            }
            let w = rem + 2;
            let mut p = vec![0.0; (k + 1) * w];
            let mut s = vec![0.0; (k + 1) * w];
            for a in 0..=k {
                for j in 0..=rem {
                    p[a * w + j + 1] = p[a * w + j] + dist[a][j];
                }
                for j in (0..=rem).rev() {
                    s[a * w + j] = s[a * w + j + 1] + dist[a][j];
                }
            }
            pre.push(p);
            suf.push(s);
        }
        Ok(CompletionTable { ln_lambda: lambda.ln(), pre, suf })
    }

    /// `Σ_{lo ≤ j ≤ hi} Ñ(rem, a, j)`.
    fn count(&self, rem: usize, a: usize, lo: i64, hi: i64) -> f64 {
        let hi = hi.min(rem as i64);
        let lo = lo.max(0);
        if lo > hi {
            return 0.0;
        }
        let (lo, hi) = (lo as usize, hi as usize);
        let w = rem + 2;
        let (p, s) = (&self.pre[rem], &self.suf[rem]);
        // subtract within whichever tail is smaller to limit cancellation
        let v = if p[a * w + hi + 1] <= s[a * w + lo] {
            p[a * w + hi + 1] - p[a * w + lo]
        } else {
            s[a * w + lo] - s[a * w + hi + 1]
        };
        v.max(0.0)
    }
}

/// Data shared between a set and its samplers.
struct Shared {
    sft: Sft,
    symbol: u8,
    pieces: Vec<Piece>,
    cw: Option<ConnectingWords>,
    table: CompletionTable,
}

/// An assembled Moran set with exact breakpoint counts and the measure `μ̂`.
pub struct MoranSet {
    shared: Arc<Shared>,
    pub schedule: MoranSchedule,
    pub library: BlockLibrary,
    /// Gap length `r` in connect mode.
    pub gap: Option<usize>,
    pub counts: Vec<BreakpointCount>,
    exact: Vec<BigUint>,
    piece_counts: Vec<BigUint>,
    /// Normalized totals `Ñ(len − gap, START, band)` per piece.
    norm_totals: Vec<f64>,
}

/// Longest piece for alphabet size `k` (bounds the completion table).
pub fn piece_cap(k: usize) -> usize {
    (((1usize << 23) as f64 / (k + 1) as f64).sqrt() as usize).clamp(64, 1024)
}

/// Exact band counts `#{w ∈ Σ_{A,ℓ}: lo ≤ #_s(w) ≤ hi}` for all requested `(ℓ, lo, hi)`.
fn exact_band_counts(sft: &Sft, symbol: u8, needs: &[(usize, usize, usize)]) -> HashMap<(usize, usize, usize), BigUint> {
    let k = sft.alphabet_size();
    let mut by_len: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for &(l, lo, hi) in needs {
        by_len.entry(l).or_default().push((lo, hi));
    }
    let mut out = HashMap::new();
    let Some(&max) = by_len.keys().last() else {
        return out;
    };
    // v[a][j]: words of the current length ending in a with j occurrences
    let mut v: Vec<Vec<BigUint>> = (0..k)
        .map(|a| {
            let mut row = vec![BigUint::zero(); 2];
            row[(a as u8 == symbol) as usize] = BigUint::one();
            row
        })
        .collect();
    for len in 1..=max {
        if len > 1 {
            let mut next = vec![vec![BigUint::zero(); len + 1]; k];
            for (a, row) in v.iter().enumerate() {
                for &b in sft.successors(a as u8) {
                    let inc = (b == symbol) as usize;
                    let target = &mut next[b as usize];
                    for (j, c) in row.iter().enumerate() {
                        if !c.is_zero() {
                            target[j + inc] += c;
                        }
                    }
                }
            }
            v = next;
        }
        if let Some(bands) = by_len.get(&len) {
            for &(lo, hi) in bands {
                let mut total = BigUint::zero();
                for row in &v {
                    for c in row.iter().take(hi.min(len) + 1).skip(lo) {
                        total += c;
                    }
                }
                out.insert((len, lo, hi), total);
            }
        }
    }
    out
}

/// Builds the Moran set: pieces, exact counts at every breakpoint, and the tables behind `μ̂`.
pub fn assemble_moran(sft: &Sft, schedule: &MoranSchedule, library: &BlockLibrary, gaps: GapMode) -> Result<MoranSet> {
    let k = sft.alphabet_size();
    library.validate(k)?;
    if schedule.total_len() > MAX_LENGTH {
        return Err(Error::Resource(format!("final breakpoint exceeds {MAX_LENGTH}")));
    }
    let cap = piece_cap(k);
    let mut spans = Vec::new();
    for (stage, a, b) in schedule.segments() {
        let n = (b - a).div_ceil(cap);
        let (base, extra) = ((b - a) / n, (b - a) % n);
        let mut s = a;
        for i in 0..n {
            let len = base + (i < extra) as usize;
            spans.push((stage, s, len, a, b));
            s += len;
        }
    }
    let mode = match gaps {
        GapMode::Auto if sft.is_full_shift() => GapMode::None,
        GapMode::Auto => GapMode::Connect,
        g => g,
    };
    let cw = match mode {
        GapMode::Connect => Some(sft.connecting_words()?),
        _ => {
            if spans.len() > 1 && !sft.is_full_shift() {
                return Err(Error::Build(
                    "gapless assembly of several pieces needs a full shift; use connecting-word gaps".into(),
                ));
            }
            None
        }
    };
    let r = cw.as_ref().map_or(0, |c| c.r);
    let mut pieces = Vec::with_capacity(spans.len());
    let mut needs = Vec::new();
    for (i, &(stage, start, len, a, b)) in spans.iter().enumerate() {
        let gap = if i == 0 { 0 } else { r };
        if len <= gap {
            return Err(Error::Build(format!(
                "stage {stage} segment [{a}, {b}): piece of length {len} leaves no room after the gap of {gap}"
            )));
        }
        let (lo, hi) = library.band(stage, len - gap);
        if lo > hi {
            return Err(Error::Build(format!(
                "stage {stage} segment [{a}, {b}): the library band is empty for words of length {}",
                len - gap
            )));
        }
        needs.push((len - gap, lo, hi));
        pieces.push(Piece { stage, start, len, gap, lo, hi, log_count: 0.0 });
    }
    let symbol = library.symbol();
    let exact_map = exact_band_counts(sft, symbol, &needs);
    let mut piece_counts = Vec::with_capacity(pieces.len());
    for (p, key) in pieces.iter_mut().zip(&needs) {
        let c = exact_map[key].clone();
        if c.is_zero() {
            let (stage, a, b) = spans.iter().find(|s| s.1 == p.start).map(|s| (s.0, s.3, s.4)).unwrap();
            return Err(Error::Build(format!(
                "stage {stage} segment [{a}, {b}): no admissible word of length {} has {}..={} occurrences of symbol {symbol}",
                key.0, key.1, key.2
            )));
        }
        p.log_count = big_ln(&c);
        piece_counts.push(c);
    }
    let max_len = pieces.iter().map(|p| p.len - p.gap).max().unwrap_or(0);
    let table = CompletionTable::new(sft, symbol, max_len)?;
    let norm_totals = pieces
        .iter()
        .map(|p| table.count(p.len - p.gap, k, p.lo as i64, p.hi as i64))
        .collect();
    let bps = schedule.breakpoints();
    let mut counts = Vec::with_capacity(bps.len());
    let mut exact = Vec::with_capacity(bps.len());
    let mut acc = BigUint::one();
    let mut bi = 0;
    for (p, c) in pieces.iter().zip(&piece_counts) {
        acc *= c;
        if bi < bps.len() && p.start + p.len == bps[bi] {
            let l = big_ln(&acc);
            counts.push(BreakpointCount { breakpoint: bps[bi], count_log: l, slope: l / bps[bi] as f64 });
            exact.push(acc.clone());
            bi += 1;
        }
    }
    debug_assert_eq!(bi, bps.len());
    Ok(MoranSet {
        schedule: schedule.clone(),
        library: library.clone(),
        gap: cw.as_ref().map(|c| c.r),
        counts,
        exact,
        piece_counts,
        norm_totals,
        shared: Arc::new(Shared { sft: sft.clone(), symbol, pieces, cw, table }),
    })
}

impl MoranSet {
    pub fn total_len(&self) -> usize {
        self.schedule.total_len()
    }

    pub fn sft(&self) -> &Sft {
        &self.shared.sft
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.shared.pieces
    }

    /// Exact `#W_0^t(M)` at the `i`-th breakpoint.
    pub fn exact_count(&self, i: usize) -> &BigUint {
        &self.exact[i]
    }

    /// Exact library count of each piece.
    pub fn piece_count(&self, i: usize) -> &BigUint {
        &self.piece_counts[i]
    }

    /// Product of the piece counts inside `[a, b)`; `a`, `b` must be piece boundaries.
    pub fn count_between(&self, a: usize, b: usize) -> BigUint {
        self.shared.pieces
            .iter()
            .zip(&self.piece_counts)
            .filter(|(p, _)| p.start >= a && p.start + p.len <= b)
            .fold(BigUint::one(), |acc, (_, c)| acc * c)
    }

    fn library_ok(&self, p: &Piece, lib: &[u8]) -> bool {
        let s = self.library.symbol();
        let c = lib.iter().filter(|&&x| x == s).count();
        self.shared.sft.admissible_unchecked(lib) && c >= p.lo && c <= p.hi
    }

    /// `ln μ̂([w])`; words longer than the construction are truncated.
    fn log_mu(&self, word: &[u8]) -> f64 {
        let k = self.shared.sft.alphabet_size();
        let w = &word[..word.len().min(self.total_len())];
        let sym = self.library.symbol();
        let mut lm = 0.0;
        for (i, p) in self.shared.pieces.iter().enumerate() {
            if w.len() <= p.start {
                break;
            }
            let seg = &w[p.start..w.len().min(p.start + p.len)];
            let prev = (p.start > 0).then(|| w[p.start - 1]);
            let free = p.len - p.gap;
            let gap_word = |b: u8| -> &[u8] {
                match (&self.shared.cw, prev) {
                    (Some(cw), Some(a)) if p.gap > 0 => cw.get(a, b),
                    _ => &[],
                }
            };
            if p.gap == 0 {
                if let (Some(a), Some(&b)) = (prev, seg.first()) {
                    if !self.shared.sft.allowed(a, b) {
                        return f64::NEG_INFINITY;
                    }
                }
            }
            if seg.len() == p.len {
                let lib = &seg[p.gap..];
                if gap_word(lib[0]) != &seg[..p.gap] || !self.library_ok(p, lib) {
                    return f64::NEG_INFINITY;
                }
                lm -= p.log_count;
                continue;
            }
            let total = self.norm_totals[i];
            let (lo, hi) = (p.lo as i64, p.hi as i64);
            let num = if seg.len() <= p.gap {
                (0..k as u8)
                    .filter(|&b| gap_word(b).starts_with(seg))
                    .map(|b| {
                        let inc = (b == sym) as i64;
                        self.shared.table.count(free - 1, b as usize, lo - inc, hi - inc)
                    })
                    .sum::<f64>()
                    * (-self.shared.table.ln_lambda).exp()
            } else {
                let u = &seg[p.gap..];
                if gap_word(u[0]) != &seg[..p.gap] || !self.shared.sft.admissible_unchecked(u) {
                    return f64::NEG_INFINITY;
                }
                let c = u.iter().filter(|&&x| x == sym).count() as i64;
                let a = u.len();
                self.shared.table.count(free - a, *u.last().unwrap() as usize, lo - c, hi - c)
                    * (-(a as f64) * self.shared.table.ln_lambda).exp()
            };
            if num <= 0.0 {
                return f64::NEG_INFINITY;
            }
            return lm + num.ln() - total.ln();
        }
        lm
    }

    /// A point of `M` with every library choice uniform; deterministic in `seed`.
    pub fn sample(&self, seed: u64) -> Point {
        let gen = MoranSampler { set: Arc::clone(&self.shared), rng: ChaCha8Rng::seed_from_u64(seed), next: 0 };
        Point::lazy(self.shared.sft.alphabet_size(), "moran", Box::new(gen))
    }

}

impl Shared {
    /// Draws a uniform library word for piece `i`, given the previous symbol.
    fn sample_piece(&self, i: usize, prev: Option<u8>, rng: &mut impl Rng, out: &mut Vec<u8>) {
        let p = &self.pieces[i];
        let k = self.sft.alphabet_size();
        let sym = self.symbol;
        let free = p.len - p.gap;
        let all: Vec<u8> = (0..k as u8).collect();
        let mut lib = Vec::with_capacity(free);
        let mut c = 0i64;
        for t in 0..free {
            let rem = free - t - 1;
            let cands: &[u8] = match lib.last() {
                Some(&a) => self.sft.successors(a),
                None if p.gap == 0 && prev.is_some() => self.sft.successors(prev.unwrap()),
                None => &all,
            };
            let weights: Vec<f64> = cands
                .iter()
                .map(|&b| {
                    let cb = c + (b == sym) as i64;
                    self.table.count(rem, b as usize, p.lo as i64 - cb, p.hi as i64 - cb)
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let mut x = rng.gen::<f64>() * total;
            let mut pick = cands[cands.len() - 1];
            for (&b, &wt) in cands.iter().zip(&weights) {
                if x < wt {
                    pick = b;
                    break;
                }
                x -= wt;
            }
            c += (pick == sym) as i64;
            lib.push(pick);
        }
        if let (Some(cw), Some(a)) = (&self.cw, prev) {
            if p.gap > 0 {
                out.extend_from_slice(cw.get(a, lib[0]));
            }
        }
        out.extend_from_slice(&lib);
    }
}

struct MoranSampler {
    set: Arc<Shared>,
    rng: ChaCha8Rng,
    next: usize,
}

impl SymbolGenerator for MoranSampler {
    fn extend(&mut self, buf: &mut Vec<u8>, target: usize) {
        while buf.len() < target && self.next < self.set.pieces.len() {
            let prev = buf.last().copied();
            self.set.sample_piece(self.next, prev, &mut self.rng, buf);
            self.next += 1;
        }
    }
}

impl CylinderMeasure for MoranSet {
    fn log_mass(&self, word: &[u8]) -> f64 {
        self.log_mu(word)
    }
}

impl CylinderSetOracle for MoranSet {
    fn accepts(&self, word: &[u8]) -> bool {
        self.log_mu(word) > f64::NEG_INFINITY
    }

    fn provenance(&self) -> Provenance {
        Provenance::Exact
    }
}

/// Largest `H(β) + (1−β)·log(K−1)` over `|β − α| ≤ tol`: the entropy design value of a
/// frequency band on the full shift.
pub fn band_design_full_shift(alpha: f64, tol: f64, k: usize) -> f64 {
    let f = |b: f64| {
        let h = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
        h(b) + h(1.0 - b) + (1.0 - b) * ((k - 1) as f64).ln()
    };
    let peak = 1.0 / k as f64;
    f(peak.clamp((alpha - tol).max(0.0), (alpha + tol).min(1.0)))
}

#[derive(Debug, Clone, Serialize)]
pub struct MoranEntropyReport {
    pub design: f64,
    pub margin: f64,
    pub slopes: Vec<BreakpointCount>,
    pub final_slope: f64,
    /// `|final_slope − design| / design`.
    pub relative_error: f64,
    /// Depths `T_j` used by the distribution-principle checks.
    pub ladder: Vec<usize>,
    /// `μ̂` check at `s = design − margin`.
    pub below: ConstantReport,
    /// `μ̂` check at `s = design + margin`.
    pub above: ConstantReport,
}

/// Breakpoint slopes and distribution-principle checks of `μ̂` around the design value.
pub fn moran_entropy_report(set: &MoranSet, design: f64, margin: f64, samples: usize, seed: u64) -> Result<MoranEntropyReport> {
    if samples == 0 {
        return input("at least one sample point is needed");
    }
    let points: Vec<Point> = (0..samples as u64).map(|i| set.sample(seed.wrapping_add(i))).collect();
    let ladder = set.schedule.t();
    let below = distribution_principle_check(set, &points, design - margin, &ladder)?;
    let above = distribution_principle_check(set, &points, design + margin, &ladder)?;
    let final_slope = set.counts.last().map_or(0.0, |c| c.slope);
    Ok(MoranEntropyReport {
        design,
        margin,
        slopes: set.counts.clone(),
        final_slope,
        relative_error: ((final_slope - design) / design).abs(),
        ladder,
        below,
        above,
    })
}

/// Stage of a witness: copy `ω` or deviate from it.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessStage {
    pub stage: usize,
    pub start: usize,
    pub end: usize,
    pub copy: bool,
}

/// A point that alternates long copies of `ω` with stretches that differ from
/// `ω` at even offsets (wherever an admissible substitute exists).
pub struct Witness {
    pub point: Point,
    pub stages: Vec<WitnessStage>,
    omega: Point,
    k: usize,
}

/// Odd stages copy `ω`, even stages deviate.
pub fn ml_witness(omega: &Point, sft: &Sft, schedule: &MoranSchedule) -> Result<Witness> {
    ml_witness_pattern(omega, sft, schedule, &|j| j % 2 == 1)
}

/// Witness with an explicit copy pattern over 1-based stages; past the last stage it copies `ω`.
pub fn ml_witness_pattern(
    omega: &Point,
    sft: &Sft,
    schedule: &MoranSchedule,
    copy: &dyn Fn(usize) -> bool,
) -> Result<Witness> {
    if omega.alphabet() != sft.alphabet_size() {
        return input("ω and the shift use different alphabets");
    }
    let stages: Vec<WitnessStage> = schedule
        .stages
        .iter()
        .map(|s| WitnessStage { stage: s.stage, start: s.start, end: s.end, copy: copy(s.stage) })
        .collect();
    let gen = WitnessGen { sft: sft.clone(), omega: omega.clone(), stages: stages.clone() };
    Ok(Witness { point: Point::lazy(sft.alphabet_size(), "ml_witness", Box::new(gen)), stages, omega: omega.clone(), k: sft.alphabet_size() })
}

struct WitnessGen {
    sft: Sft,
    omega: Point,
    stages: Vec<WitnessStage>,
}

impl WitnessGen {
    fn deviate_at(&self, p: usize) -> bool {
        self.stages.iter().any(|s| !s.copy && p >= s.start && p < s.end && (p - s.start) % 2 == 0)
    }
}

impl SymbolGenerator for WitnessGen {
    fn extend(&mut self, buf: &mut Vec<u8>, target: usize) {
        let w = self.omega.window(buf.len(), target + 1);
        let base = buf.len();
        for (t, &wp) in w.iter().enumerate().take(w.len().saturating_sub(1)) {
            let p = base + t;
            let next = w[t + 1];
            let mut s = wp;
            if self.deviate_at(p) {
                let k = self.sft.alphabet_size() as u8;
                if let Some(b) = (0..k).find(|&b| {
                    b != wp && buf.last().map_or(true, |&a| self.sft.allowed(a, b)) && self.sft.allowed(b, next)
                }) {
                    s = b;
                }
            }
            buf.push(s);
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StagePrediction {
    pub stage: usize,
    pub start: usize,
    pub end: usize,
    pub copy: bool,
    /// Fraction of even offsets where a substitute was placed.
    pub deviation_density: f64,
    /// Mean of `ρ(σ^i ω, σ^i x)` over the stage (clipped to the horizon).
    pub mean_distance: f64,
    /// Running average at the stage end (or the horizon).
    pub average_at_end: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessPrediction {
    pub horizon: usize,
    pub window_start: usize,
    pub stages: Vec<StagePrediction>,
    pub min_average: f64,
    pub max_average: f64,
}

impl Witness {
    /// Window-average predictions from the block structure: the substitution positions
    /// fix `ρ(σ^i ω, σ^i x) = K^{-(f(i)−i)}`, `f(i)` the next substitution, which sums
    /// geometrically between substitutions.
    pub fn predictions(&self, horizon: usize, window_fraction: f64) -> Result<WitnessPrediction> {
        const SLACK: usize = 64;
        let x = self.point.prefix(horizon + SLACK);
        let w = self.omega.prefix(horizon + SLACK);
        if x.len() < horizon || w.len() < horizon {
            return input(format!("ω is too short for horizon {horizon}"));
        }
        let n = x.len().min(w.len());
        let subs: Vec<usize> = (0..n).filter(|&i| x[i] != w[i]).collect();
        // ρ_i per index, as geometric runs ending at each substitution
        let mut rho = vec![0.0; horizon];
        let mut prev = 0usize;
        for &f in &subs {
            for (i, r) in rho.iter_mut().enumerate().take(f.min(horizon - 1) + 1).skip(prev) {
                *r = kpow(self.k, f - i);
            }
            prev = f + 1;
            if prev >= horizon {
                break;
            }
        }
        let mut sums = vec![0.0; horizon + 1];
        for i in 0..horizon {
            sums[i + 1] = sums[i] + rho[i];
        }
        let avg = |m: usize| sums[m] / m as f64;
        let window_start = ((window_fraction * horizon as f64).ceil() as usize).max(1);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for m in window_start..=horizon {
            lo = lo.min(avg(m));
            hi = hi.max(avg(m));
        }
        let stages = self
            .stages
            .iter()
            .filter(|s| s.start < horizon)
            .map(|s| {
                let end = s.end.min(horizon);
                let evens = (end - s.start).div_ceil(2);
                let placed = subs.iter().filter(|&&f| f >= s.start && f < end).count();
                StagePrediction {
                    stage: s.stage,
                    start: s.start,
                    end: s.end,
                    copy: s.copy,
                    deviation_density: if s.copy { 0.0 } else { placed as f64 / evens as f64 },
                    mean_distance: (sums[end] - sums[s.start]) / (end - s.start) as f64,
                    average_at_end: avg(end),
                }
            })
            .collect();
        Ok(WitnessPrediction { horizon, window_start, stages, min_average: lo, max_average: hi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::Word;
    use proptest::prelude::*;

    #[test]
    fn chain_examples() {
        let c = TargetSet::Interval(0.2, 0.6);
        let eps: Vec<f64> = (1..=6).map(|l| 0.5f64.powi(l)).collect();
        let chain = build_alpha_chain(&c, &eps, 1e-3, None).unwrap();
        chain.verify(&c).unwrap();
        assert_eq!(chain.counts.len(), 6);
        assert!(chain.counts[5] >= (0.4 / 0.5f64.powi(6)) as usize);
        let single = build_alpha_chain(&TargetSet::Interval(0.3, 0.3), &eps, 1e-3, None).unwrap();
        assert!(single.alphas.iter().all(|a| a[0] == 0.3));
        let tiny = build_alpha_chain(&TargetSet::Interval(0.3, 0.3 + 1e-9), &[0.1], 1e-10, None).unwrap();
        assert_eq!(tiny.counts, vec![1]);
        let gap = TargetSet::Union(vec![(0.0, 0.2), (0.3, 0.5)]);
        assert!(matches!(build_alpha_chain(&gap, &eps, 1e-3, None), Err(Error::Input(_))));
        let joined = TargetSet::Union(vec![(0.0, 0.3), (0.3, 0.5)]);
        assert!(build_alpha_chain(&joined, &eps, 1e-3, None).is_ok());
    }

    #[test]
    fn chain_packing_variant_ends_at_score_maximum() {
        let c = TargetSet::Interval(0.1, 0.9);
        let score = |a: &[f64]| -(a[0] - 0.37).powi(2);
        let chain = build_alpha_chain(&c, &[0.2, 0.1, 0.05], 1e-3, Some(&score)).unwrap();
        for l in 1..=3 {
            let last = chain.level(l).last().unwrap()[0];
            assert!((last - 0.37).abs() < 1e-3, "level {l} ends at {last}");
        }
    }

    #[test]
    fn chain_polyline() {
        let c = TargetSet::Polyline(vec![vec![0.0, 0.0], vec![0.3, 0.0], vec![0.3, 0.4]]);
        let chain = build_alpha_chain(&c, &[0.1, 0.05], 1e-2, None).unwrap();
        assert!(chain.alphas.iter().all(|a| a.len() == 2));
    }

    #[test]
    fn schedule_examples() {
        let s = build_schedule(16, GrowthPolicy::Ratio(4.0), 2, &[]).unwrap();
        assert_eq!(s.breakpoints(), vec![16, 32, 64]);
        assert_eq!(s.stages[1].m, 2);
        assert!((s.stages[1].r.unwrap() - 2.0).abs() < 1e-12);
        let s = build_schedule(16, GrowthPolicy::Ratio(8.0), 3, &[]).unwrap();
        assert_eq!(s.stages[1].m, 3);
        assert_eq!(s.breakpoints(), vec![16, 32, 64, 128, 256, 512, 1024]);
        assert!(matches!(build_schedule(16, GrowthPolicy::Ratio(1.0), 2, &[]), Err(Error::Input(_))));
        assert!(build_schedule(8, GrowthPolicy::Ratio(2.0), 2, &[]).is_err());
        let d = build_schedule(16, GrowthPolicy::Default, 3, &[0.5, 0.25]).unwrap();
        assert_eq!(d.t(), vec![16, 128, 1536]);
        assert_eq!(d.trends.t_eps_increasing, Some(true));
        let c = build_schedule(16, GrowthPolicy::Capped(3.0), 3, &[0.1]).unwrap();
        assert_eq!(c.t(), vec![16, 48, 144]);
        let odd = build_schedule(20, GrowthPolicy::Ratio(3.3), 3, &[]).unwrap();
        for st in &odd.stages[1..] {
            let r = st.r.unwrap();
            assert!(r > 1.0 && r <= 2.0);
            assert_eq!(*st.breakpoints.first().unwrap(), st.start);
            assert_eq!(*st.breakpoints.last().unwrap(), st.end);
        }
    }

    fn brute_count(set: &MoranSet, t: usize) -> usize {
        set.sft().words(t).filter(|w| set.accepts(w)).count()
    }

    #[test]
    fn degenerate_all_words_build() {
        let sft = Sft::golden_mean();
        let sched = build_schedule(16, GrowthPolicy::Ratio(2.0), 1, &[]).unwrap();
        let set = assemble_moran(&sft, &sched, &BlockLibrary::AllWords, GapMode::None).unwrap();
        assert_eq!(set.exact_count(0), &sft.count_words(16).unwrap());
        let full = Sft::full_shift(3).unwrap();
        let sched = build_schedule(16, GrowthPolicy::Ratio(2.0), 3, &[]).unwrap();
        let set = assemble_moran(&full, &sched, &BlockLibrary::AllWords, GapMode::Auto).unwrap();
        for c in &set.counts {
            assert!((c.slope - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_counts_match_enumeration() {
        let sft = Sft::full_shift(2).unwrap();
        let lib = BlockLibrary::Frequency { symbol: 1, targets: vec![0.5], tols: vec![0.1] };
        let sched = build_schedule(16, GrowthPolicy::Ratio(2.0), 2, &[]).unwrap();
        let set = assemble_moran(&sft, &sched, &lib, GapMode::None).unwrap();
        // band for 16 symbols: 7..=9 ones → C(16,7)+C(16,8)+C(16,9)
        let b16 = 11440u64 + 12870 + 11440;
        assert_eq!(set.exact_count(0), &BigUint::from(b16));
        assert_eq!(set.exact_count(1), &(BigUint::from(b16) * BigUint::from(b16)));
        assert_eq!(brute_count(&set, 16) as u64, b16);
        // reduced sizes, enumerated
        let small = build_schedule(16, GrowthPolicy::Ratio(1.5), 2, &[]).unwrap();
        let set = assemble_moran(&sft, &small, &lib, GapMode::None).unwrap();
        assert_eq!(BigUint::from(brute_count(&set, 24)), *set.exact_count(1));
    }

    #[test]
    fn gap_mode_is_admissible_and_exact() {
        let sft = Sft::golden_mean();
        let lib = BlockLibrary::Frequency { symbol: 1, targets: vec![0.3], tols: vec![0.15] };
        let sched = build_schedule(16, GrowthPolicy::Ratio(1.25), 2, &[]).unwrap();
        let set = assemble_moran(&sft, &sched, &lib, GapMode::Auto).unwrap();
        assert_eq!(set.gap, Some(1));
        assert_eq!(BigUint::from(brute_count(&set, 20)), *set.exact_count(1));
        for seed in 0..20 {
            let x = set.sample(seed).prefix(20);
            assert_eq!(x.len(), 20);
            assert_eq!(sft.first_violation(&x), None);
            assert!(set.accepts(&x));
        }
        let full_gapless = assemble_moran(&sft, &sched, &lib, GapMode::None);
        assert!(matches!(full_gapless, Err(Error::Build(_))));
    }

    #[test]
    fn empty_band_names_segment() {
        let sft = Sft::golden_mean();
        let lib = BlockLibrary::Frequency { symbol: 1, targets: vec![0.9], tols: vec![0.05] };
        let sched = build_schedule(16, GrowthPolicy::Ratio(2.0), 2, &[]).unwrap();
        match assemble_moran(&sft, &sched, &lib, GapMode::Auto) {
            Err(Error::Build(msg)) => assert!(msg.contains("segment [0, 16)"), "{msg}"),
            other => panic!("{:?}", other.map(|s| s.counts)),
        }
    }

    #[test]
    fn mu_hat_is_additive_and_matches_quotient() {
        let sft = Sft::golden_mean();
        let lib = BlockLibrary::Frequency { symbol: 1, targets: vec![0.35], tols: vec![0.2] };
        let sched = build_schedule(16, GrowthPolicy::Ratio(1.25), 2, &[]).unwrap();
        let set = assemble_moran(&sft, &sched, &lib, GapMode::Connect).unwrap();
        let total = set.exact_count(1).to_f64().unwrap();
        let words: Vec<Word> = sft.words(20).filter(|w| set.accepts(w)).collect();
        for n in [3, 15, 16, 17, 19] {
            let mut by_prefix: HashMap<&[u8], usize> = HashMap::new();
            for w in &words {
                *by_prefix.entry(&w[..n]).or_default() += 1;
            }
            for (p, c) in by_prefix {
                let m = set.mass(p);
                assert!((m - c as f64 / total).abs() < 1e-9 * m.max(1e-300), "n={n}: {m} vs {}", c as f64 / total);
                let children: f64 = sft.successors(p[n - 1]).iter().map(|&b| set.mass(&[p, &[b]].concat())).sum();
                assert!((children - m).abs() < 1e-9 * m);
            }
        }
        let root: f64 = (0..2u8).map(|b| set.mass(&[b])).sum();
        assert!((root - 1.0).abs() < 1e-12);
    }

    #[test]
    fn long_segments_are_chunked() {
        let sft = Sft::full_shift(2).unwrap();
        let lib = BlockLibrary::Frequency { symbol: 1, targets: vec![0.5], tols: vec![0.1] };
        let sched = build_schedule(64, GrowthPolicy::Ratio(64.0), 2, &[]).unwrap();
        let set = assemble_moran(&sft, &sched, &lib, GapMode::Auto).unwrap();
        assert!(set.pieces().iter().all(|p| p.len <= piece_cap(2)));
        for (i, c) in set.counts.iter().enumerate().skip(1) {
            let seg = set.count_between(set.counts[i - 1].breakpoint, c.breakpoint);
            assert_eq!(set.exact_count(i), &(set.exact_count(i - 1) * seg));
        }
        let x = set.sample(9).prefix(set.total_len());
        assert_eq!(x.len(), 4096);
        assert!(set.accepts(&x));
    }

    #[test]
    fn witness_alternates_and_predicts() {
        let sft = Sft::full_shift(2).unwrap();
        let sched = build_schedule(64, GrowthPolicy::Ratio(16.0), 4, &[]).unwrap();
        let omega = Point::periodic(2, vec![], vec![0, 1, 1]).unwrap();
        let w = ml_witness(&omega, &sft, &sched).unwrap();
        let x = w.point.prefix(2000);
        assert_eq!(&x[..64], &omega.prefix(64)[..]);
        assert!((64..1024).step_by(2).all(|i| x[i] != omega.symbol_at(i).unwrap()));
        assert!((65..1024).step_by(2).all(|i| x[i] == omega.symbol_at(i).unwrap()));
        let pred = w.predictions(20000, 0.01).unwrap();
        assert!((pred.stages[1].mean_distance - 0.75).abs() < 2e-3);
        assert!((pred.stages[1].deviation_density - 1.0).abs() < 1e-12);
        let analytic = 960.0 * 0.75 / 16384.0;
        assert!((pred.stages[2].average_at_end - analytic).abs() < 1e-3);
        let copy_only = ml_witness_pattern(&omega, &sft, &sched, &|_| true).unwrap();
        assert_eq!(copy_only.point.prefix(5000), omega.prefix(5000));
    }

    #[test]
    fn witness_respects_constraints() {
        let sft = Sft::golden_mean();
        let sched = build_schedule(64, GrowthPolicy::Ratio(4.0), 4, &[]).unwrap();
        let omega = Point::markov(&crate::markov::MarkovMeasure::parry(&sft).unwrap(), 3);
        let w = ml_witness(&omega, &sft, &sched).unwrap();
        let x = w.point.prefix(4096);
        assert_eq!(sft.first_violation(&x), None);
        let pred = w.predictions(4000, 0.01).unwrap();
        assert!(pred.stages[1].deviation_density > 0.3);
    }

    proptest! {
        #[test]
        fn sampler_is_sound(seed in 0u64..10_000) {
            let sft = Sft::golden_mean();
            let lib = BlockLibrary::Frequency { symbol: 1, targets: vec![0.3], tols: vec![0.1] };
            let sched = build_schedule(32, GrowthPolicy::Ratio(3.0), 3, &[]).unwrap();
            let set = assemble_moran(&sft, &sched, &lib, GapMode::Auto).unwrap();
            let x = set.sample(seed).prefix(set.total_len());
            prop_assert_eq!(sft.first_violation(&x), None);
            for n in [1, 31, 32, 33, 100, 288] {
                prop_assert!(set.accepts(&x[..n]));
            }
        }

        #[test]
        fn count_consistency(t1 in 16usize..40, q in 1.2f64..6.0) {
            let sft = Sft::full_shift(2).unwrap();
            let lib = BlockLibrary::Frequency { symbol: 0, targets: vec![0.5], tols: vec![0.2] };
            let sched = build_schedule(t1, GrowthPolicy::Ratio(q), 3, &[]).unwrap();
            let set = assemble_moran(&sft, &sched, &lib, GapMode::None).unwrap();
            for i in 1..set.counts.len() {
                let seg = set.count_between(set.counts[i - 1].breakpoint, set.counts[i].breakpoint);
                prop_assert_eq!(set.exact_count(i), &(set.exact_count(i - 1) * seg));
            }
        }
    }
}
