//! Points as lazily extendable symbol streams, the metric `ρ`, the Bowen metric
//! `ρ_n`, average distances and distance trajectories.

use std::fmt;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::interval::Interval;
use crate::markov::{MarkovMeasure, MarkovStream};

/// Source of symbols for lazily materialized points.
pub trait SymbolGenerator: Send {
    /// Appends symbols until `buf.len() >= target`, or fewer if the stream ends.
    fn extend(&mut self, buf: &mut Vec<u8>, target: usize);
}

impl SymbolGenerator for MarkovStream {
    fn extend(&mut self, buf: &mut Vec<u8>, target: usize) {
        while buf.len() < target {
            buf.push(self.next_symbol());
        }
    }
}

/// A one-sided sequence over `0..K`. Clones share the backend (and its identity).
#[derive(Clone)]
pub struct Point {
    k: usize,
    inner: Arc<Backend>,
}

enum Backend {
    Explicit(Vec<u8>),
    Periodic { pre: Vec<u8>, period: Vec<u8> },
    Lazy { kind: &'static str, state: Mutex<LazyState> },
}

struct LazyState {
    buf: Vec<u8>,
    gen: Option<Box<dyn SymbolGenerator>>,
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.inner {
            Backend::Explicit(w) => write!(f, "Point(prefix of length {})", w.len()),
            Backend::Periodic { pre, period } => write!(f, "Point(periodic {pre:?}/{period:?})"),
            Backend::Lazy { kind, .. } => write!(f, "Point({kind}, known depth {})", self.known_depth().unwrap_or(0)),
        }
    }
}

fn check_symbols(k: usize, w: &[u8]) -> Result<()> {
    match w.iter().find(|&&s| s as usize >= k) {
        Some(s) => input(format!("symbol {s} out of range for alphabet size {k}")),
        None => Ok(()),
    }
}

impl Point {
    /// A finite prefix; symbols beyond it are unknown.
    pub fn explicit(k: usize, symbols: Vec<u8>) -> Result<Self> {
        check_symbols(k, &symbols)?;
        Ok(Point { k, inner: Arc::new(Backend::Explicit(symbols)) })
    }

    /// The eventually periodic point `pre · period^∞`.
    pub fn periodic(k: usize, pre: Vec<u8>, period: Vec<u8>) -> Result<Self> {
        if period.is_empty() {
            return input("periodic point needs a nonempty period");
        }
        check_symbols(k, &pre)?;
        check_symbols(k, &period)?;
        Ok(Point { k, inner: Arc::new(Backend::Periodic { pre, period }) })
    }

    pub fn constant(k: usize, symbol: u8) -> Result<Self> {
        Point::periodic(k, Vec::new(), vec![symbol])
    }

    /// A `ν`-typical sample; the prefix is memoized and extension is deterministic in `seed`.
    pub fn markov(measure: &MarkovMeasure, seed: u64) -> Self {
        Point::lazy(measure.alphabet_size(), "markov", Box::new(MarkovStream::new(measure.clone(), seed)))
    }

    pub fn lazy(k: usize, kind: &'static str, gen: Box<dyn SymbolGenerator>) -> Self {
        Point { k, inner: Arc::new(Backend::Lazy { kind, state: Mutex::new(LazyState { buf: Vec::new(), gen: Some(gen) }) }) }
    }

    /// Parses `prefix:0110`, `periodic:<pre>/<per>` or `markov:<file>:<seed>`.
    /// Symbols are single digits, or comma-separated integers when a comma is present.
    pub fn parse(literal: &str, k: usize) -> Result<Self> {
        let (kind, rest) = literal
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("point literal {literal:?} lacks a kind prefix")))?;
        match kind {
            "prefix" => Point::explicit(k, parse_symbols(rest)?),
            "periodic" => {
                let (pre, per) = rest
                    .split_once('/')
                    .ok_or_else(|| Error::Input(format!("periodic literal {literal:?} needs <pre>/<per>")))?;
                Point::periodic(k, parse_symbols(pre)?, parse_symbols(per)?)
            }
            "markov" => {
                let (file, seed) = rest
                    .rsplit_once(':')
                    .ok_or_else(|| Error::Input(format!("markov literal {literal:?} needs <file>:<seed>")))?;
                let seed: u64 = seed.parse().map_err(|_| Error::Input(format!("bad seed {seed:?}")))?;
                let text = std::fs::read_to_string(file)
                    .map_err(|e| Error::Input(format!("cannot read measure file {file:?}: {e}")))?;
                let m = MarkovMeasure::from_text(&text)?;
                if m.alphabet_size() != k {
                    return input(format!("measure in {file:?} has {} symbols, expected {k}", m.alphabet_size()));
                }
                Ok(Point::markov(&m, seed))
            }
            other => input(format!("unknown point kind {other:?}; use prefix, periodic or markov")),
        }
    }

    pub fn alphabet(&self) -> usize {
        self.k
    }

    pub fn backend_kind(&self) -> &'static str {
        match &*self.inner {
            Backend::Explicit(_) => "prefix",
            Backend::Periodic { .. } => "periodic",
            Backend::Lazy { kind, .. } => kind,
        }
    }

    /// Symbol at index `i`, materializing if needed; `None` past the end of a finite stream.
    pub fn symbol_at(&self, i: usize) -> Option<u8> {
        match &*self.inner {
            Backend::Explicit(w) => w.get(i).copied(),
            Backend::Periodic { pre, period } => Some(periodic_symbol(pre, period, i)),
            Backend::Lazy { state, .. } => {
                let mut st = state.lock().expect("point cache poisoned");
                st.ensure(i + 1);
                st.buf.get(i).copied()
            }
        }
    }

    /// The first `n` symbols (fewer if the stream is finite and shorter).
    pub fn prefix(&self, n: usize) -> Vec<u8> {
        match &*self.inner {
            Backend::Explicit(w) => w[..n.min(w.len())].to_vec(),
            Backend::Periodic { pre, period } => (0..n).map(|i| periodic_symbol(pre, period, i)).collect(),
            Backend::Lazy { state, .. } => {
                let mut st = state.lock().expect("point cache poisoned");
                st.ensure(n);
                st.buf[..n.min(st.buf.len())].to_vec()
            }
        }
    }

    /// Symbols `[start, end)`, truncated if the stream ends first.
    pub fn window(&self, start: usize, end: usize) -> Vec<u8> {
        let p = self.prefix(end);
        p.get(start.min(p.len())..).unwrap_or(&[]).to_vec()
    }

    /// Largest depth available without new sampling (`None`: unbounded, closed form).
    pub fn known_depth(&self) -> Option<usize> {
        match &*self.inner {
            Backend::Explicit(w) => Some(w.len()),
            Backend::Periodic { .. } => None,
            Backend::Lazy { state, .. } => Some(state.lock().expect("point cache poisoned").buf.len()),
        }
    }

    /// Hard length limit of a finite stream.
    pub fn max_depth(&self) -> Option<usize> {
        match &*self.inner {
            Backend::Explicit(w) => Some(w.len()),
            Backend::Periodic { .. } => None,
            Backend::Lazy { state, .. } => {
                let st = state.lock().expect("point cache poisoned");
                st.gen.is_none().then_some(st.buf.len())
            }
        }
    }

    /// Equality provable from the backends: shared identity, or equal eventually periodic sequences.
    pub fn same_as(&self, other: &Point) -> bool {
        if Arc::ptr_eq(&self.inner, &other.inner) {
            return true;
        }
        if let (Backend::Periodic { pre: p1, period: q1 }, Backend::Periodic { pre: p2, period: q2 }) =
            (&*self.inner, &*other.inner)
        {
            let l = lcm(q1.len(), q2.len());
            if l > 1 << 20 {
                return false;
            }
            let n = p1.len().max(p2.len()) + l;
            return (0..n).all(|i| periodic_symbol(p1, q1, i) == periodic_symbol(p2, q2, i));
        }
        false
    }

    /// The shifted point `σ^i x`.
    pub fn shift(&self, i: usize) -> Point {
        match &*self.inner {
            Backend::Explicit(w) => Point { k: self.k, inner: Arc::new(Backend::Explicit(w[i.min(w.len())..].to_vec())) },
            Backend::Periodic { pre, period } => {
                let (pre2, period2) = if i < pre.len() {
                    (pre[i..].to_vec(), period.clone())
                } else {
                    let r = (i - pre.len()) % period.len();
                    (Vec::new(), [&period[r..], &period[..r]].concat())
                };
                Point { k: self.k, inner: Arc::new(Backend::Periodic { pre: pre2, period: period2 }) }
            }
            Backend::Lazy { .. } => Point::lazy(self.k, "shift", Box::new(ShiftGen { base: self.clone(), offset: i })),
        }
    }
}

impl LazyState {
    fn ensure(&mut self, target: usize) {
        if self.buf.len() >= target {
            return;
        }
        if let Some(gen) = self.gen.as_mut() {
            // grow geometrically so repeated small requests stay cheap
            let goal = target.max(self.buf.len() + self.buf.len() / 2).max(64);
            gen.extend(&mut self.buf, goal);
            if self.buf.len() < goal {
                self.gen = None;
            }
        }
    }
}

struct ShiftGen {
    base: Point,
    offset: usize,
}

impl SymbolGenerator for ShiftGen {
    fn extend(&mut self, buf: &mut Vec<u8>, target: usize) {
        let src = self.base.window(self.offset + buf.len(), self.offset + target);
        buf.extend_from_slice(&src);
    }
}

fn periodic_symbol(pre: &[u8], period: &[u8], i: usize) -> u8 {
    if i < pre.len() {
        pre[i]
    } else {
        period[(i - pre.len()) % period.len()]
    }
}

fn lcm(a: usize, b: usize) -> usize {
    let g = {
        let (mut x, mut y) = (a, b);
        while y != 0 {
            (x, y) = (y, x % y);
        }
        x
    };
    a / g * b
}

pub fn parse_symbols(text: &str) -> Result<Vec<u8>> {
    let text = text.trim();
    if text.contains(',') {
        text.split(',')
            .map(|t| t.trim().parse::<u8>().map_err(|_| Error::Input(format!("bad symbol {t:?}"))))
            .collect()
    } else {
        text.chars()
            .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(|| Error::Input(format!("bad symbol {c:?}"))))
            .collect()
    }
}

/// `K^{-j}`.
#[inline]
pub fn kpow(k: usize, j: usize) -> f64 {
    (k as f64).powi(-(j.min(i32::MAX as usize) as i32))
}

/// `ρ` between two finite windows: exact at the first mismatch, else `[0, K^{-m}]`.
pub fn rho_words(k: usize, a: &[u8], b: &[u8]) -> Interval {
    let m = a.len().min(b.len());
    match (0..m).find(|&i| a[i] != b[i]) {
        Some(j) => Interval::point(kpow(k, j)),
        None => Interval::new(0.0, kpow(k, m)),
    }
}

/// `ρ(x, y)` scanning indices `< lookahead`.
pub fn rho(x: &Point, y: &Point, lookahead: usize) -> Interval {
    if x.same_as(y) {
        return Interval::ZERO;
    }
    rho_words(x.alphabet(), &x.prefix(lookahead), &y.prefix(lookahead))
}

/// `ρ_n(x, y) = max_{i<n} ρ(σ^i x, σ^i y)`; windows end at absolute index `lookahead`.
pub fn rho_n(x: &Point, y: &Point, n: usize, lookahead: usize) -> Interval {
    let t = trajectory(x, y, n, lookahead.saturating_sub(n));
    (0..n).map(|i| t.interval(i)).fold(Interval::ZERO, Interval::max)
}

/// `(1/n) Σ_{i<n} ρ(σ^i x, σ^i y)` with windows ending at absolute index `lookahead`.
pub fn avg_distance(x: &Point, y: &Point, n: usize, lookahead: usize) -> Interval {
    let t = trajectory(x, y, n, lookahead.saturating_sub(n));
    t.sum_to(n) * (1.0 / n as f64)
}

/// Distance value: exact `K^{-exp}`, or the interval `[0, K^{-exp}]` when unresolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dist {
    pub exp: u32,
    pub exact: bool,
}

/// `d_i = ρ(σ^i x, σ^i y)` for `i < horizon`.
#[derive(Debug, Clone)]
pub struct DistanceTrajectory {
    pub k: usize,
    /// Both points are provably identical; every `d_i = 0`.
    pub identical: bool,
    values: Vec<Dist>,
}

impl DistanceTrajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dist(&self, i: usize) -> Dist {
        self.values[i]
    }

    pub fn interval(&self, i: usize) -> Interval {
        if self.identical {
            return Interval::ZERO;
        }
        let d = self.values[i];
        let v = kpow(self.k, d.exp as usize);
        if d.exact {
            Interval::point(v)
        } else {
            Interval::new(0.0, v)
        }
    }

    /// `Σ_{i<n} d_i` as an interval.
    pub fn sum_to(&self, n: usize) -> Interval {
        (0..n).map(|i| self.interval(i)).sum()
    }

    /// Running sums `Σ_{i<n} d_i` for `n = 0..=len`.
    pub fn prefix_sums(&self) -> Vec<Interval> {
        let mut out = Vec::with_capacity(self.values.len() + 1);
        let mut acc = Interval::ZERO;
        out.push(acc);
        for i in 0..self.values.len() {
            acc += self.interval(i);
            out.push(acc);
        }
        out
    }
}

/// Builds the trajectory, materializing both points to `horizon + slack`.
pub fn trajectory(x: &Point, y: &Point, horizon: usize, slack: usize) -> DistanceTrajectory {
    let k = x.alphabet();
    if x.same_as(y) {
        return DistanceTrajectory { k, identical: true, values: vec![Dist { exp: 0, exact: true }; horizon] };
    }
    let depth = horizon + slack;
    let a = x.prefix(depth);
    let b = y.prefix(depth);
    let w = a.len().min(b.len());
    // next[i] = first mismatch index >= i, scanning right to left
    let mut values = vec![Dist { exp: 0, exact: false }; horizon];
    let mut next: Option<usize> = None;
    for i in (0..w).rev() {
        if a[i] != b[i] {
            next = Some(i);
        }
        if i < horizon {
            values[i] = match next {
                Some(j) => Dist { exp: (j - i) as u32, exact: true },
                None => Dist { exp: (w - i) as u32, exact: false },
            };
        }
    }
    DistanceTrajectory { k, identical: false, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn px(s: &str) -> Point {
        Point::parse(s, 2).unwrap()
    }

    #[test]
    fn rho_examples() {
        let x = Point::markov(&MarkovMeasure::uniform(2).unwrap(), 3);
        assert_eq!(rho(&x, &x.clone(), 10), Interval::ZERO);
        assert_eq!(rho(&px("periodic:/0"), &px("periodic:/1"), 10), Interval::point(1.0));
        assert_eq!(rho(&px("periodic:001/0"), &px("periodic:/0"), 10), Interval::point(0.25));
        assert_eq!(rho(&px("prefix:0000"), &px("periodic:/0"), 10), Interval::new(0.0, 1.0 / 16.0));
        assert_eq!(rho(&px("periodic:0/0"), &px("periodic:/00"), 3), Interval::ZERO);
    }

    #[test]
    fn rho_n_examples() {
        let x = px("periodic:/01");
        let y = px("periodic:/10");
        assert_eq!(rho_n(&x, &x, 5, 20), Interval::ZERO);
        assert_eq!(rho_n(&x, &y, 5, 20), Interval::point(1.0));
        assert_eq!(rho_n(&px("periodic:00001/0"), &px("periodic:/0"), 3, 10), Interval::point(0.25));
    }

    #[test]
    fn avg_distance_examples() {
        let x = px("periodic:/01");
        let y = px("periodic:/10");
        assert_eq!(avg_distance(&x, &x, 100, 120), Interval::ZERO);
        assert_eq!(avg_distance(&x, &y, 100, 120), Interval::point(1.0));
        // agree on [0,50), disagree everywhere after
        let omega = px("periodic:/0");
        let mut w = vec![0u8; 50];
        w.extend(vec![1u8; 100]);
        let z = Point::explicit(2, w).unwrap();
        let expect = ((0..50).map(|i| 2f64.powi(-(50 - i))).sum::<f64>() + 50.0) / 100.0;
        let got = avg_distance(&z, &omega, 100, 150);
        assert!(got.is_exact());
        assert!((got.lo - expect).abs() < 1e-15);
        assert!((got.lo - 0.51).abs() < 1e-3);
    }

    #[test]
    fn literal_parsing() {
        assert_eq!(px("prefix:0110").prefix(10), vec![0, 1, 1, 0]);
        assert_eq!(px("periodic:1/01").prefix(5), vec![1, 0, 1, 0, 1]);
        assert_eq!(Point::parse("periodic:/2,10", 11).unwrap().prefix(3), vec![2, 10, 2]);
        assert!(Point::parse("prefix:012", 2).is_err());
        assert!(Point::parse("periodic:01", 2).is_err());
        assert!(Point::parse("nonsense", 2).is_err());
        assert!(Point::parse("markov:/no/such/file:3", 2).is_err());
    }

    #[test]
    fn lazy_points_are_stable() {
        let m = MarkovMeasure::uniform(3).unwrap();
        let x = Point::markov(&m, 9);
        let a = x.symbol_at(500).unwrap();
        assert_eq!(x.known_depth().map(|d| d >= 501), Some(true));
        assert_eq!(x.prefix(1000)[500], a);
        assert_eq!(Point::markov(&m, 9).prefix(1000), x.prefix(1000));
        assert_eq!(x.shift(10).prefix(20), x.window(10, 30));
        assert_eq!(x.max_depth(), None);
    }

    #[test]
    fn shift_of_periodic() {
        let x = px("periodic:11/010");
        for i in 0..8 {
            assert_eq!(x.shift(i).prefix(12), x.window(i, i + 12));
        }
    }

    #[test]
    fn trajectory_intervals_only_at_exhausted_windows() {
        let x = Point::explicit(2, vec![0, 1, 0, 0, 0, 0]).unwrap();
        let y = Point::explicit(2, vec![0, 0, 0, 0, 0, 0]).unwrap();
        let t = trajectory(&x, &y, 6, 0);
        assert_eq!(t.dist(0), Dist { exp: 1, exact: true });
        assert_eq!(t.dist(1), Dist { exp: 0, exact: true });
        assert_eq!(t.dist(2), Dist { exp: 4, exact: false });
        assert_eq!(t.dist(5), Dist { exp: 1, exact: false });
    }

    fn three_points() -> impl Strategy<Value = (Vec<u8>, Vec<u8>, Vec<u8>)> {
        let w = || proptest::collection::vec(0u8..2, 24);
        (w(), w(), w())
    }

    proptest! {
        #[test]
        fn ultrametric((a, b, c) in three_points(), cut1 in 0usize..24, cut2 in 0usize..24) {
            // correlate the words so small distances occur
            let mut b = b;
            let mut c = c;
            b[..cut1].copy_from_slice(&a[..cut1]);
            c[..cut2].copy_from_slice(&b[..cut2]);
            let (xy, yz, xz) = (rho_words(2, &a, &b), rho_words(2, &b, &c), rho_words(2, &a, &c));
            if xy.is_exact() && yz.is_exact() && xz.is_exact() {
                prop_assert!(xz.lo <= xy.lo.max(yz.lo));
            }
            if xy.is_exact() && a[0] == b[0] {
                let shifted = rho_words(2, &a[1..], &b[1..]);
                prop_assert!(shifted.lo <= 2.0 * xy.lo);
            }
        }

        #[test]
        fn avg_width_bound(a in proptest::collection::vec(0u8..3, 40), n in 1usize..30, look in 0usize..10) {
            let x = Point::explicit(3, a.clone()).unwrap();
            let y = Point::explicit(3, a).unwrap();
            let lookahead = (n + look).min(40);
            let avg = avg_distance(&x, &y, n, lookahead);
            prop_assert!(avg.width() <= kpow(3, lookahead - n) + 1e-15);
        }
    }
}
