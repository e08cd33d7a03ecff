//! Vector-valued potentials `f(ω, x)` evaluated on finite prefixes with rigorous
//! interval error bounds; Birkhoff sums, segment-average checks, limit-set and
//! achievable-set estimates.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::interval::Interval;
use crate::point::{kpow, Point};
use crate::sft::Sft;

/// Symbols of lookahead used when evaluating the metric potential at a point.
pub const METRIC_LOOKAHEAD: usize = 64;
const MAX_TABLE_ENTRIES: usize = 1 << 24;

/// Finite-depth potential: `f(ω, x)` depends on `ω[0..k)` and `x[0..k)` only.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderTable {
    k: usize,
    depth: usize,
    dim: usize,
    /// `[(ω_code · K^depth + x_code) · dim + c]`, big-endian word codes.
    values: Vec<f64>,
    /// `partial[m][(ω_code · K^m + x_prefix_code) · dim + c]` = (min, max) over completions.
    partial: Vec<Vec<(f64, f64)>>,
    var: Vec<f64>,
    omega_independent: bool,
}

fn code(k: usize, w: &[u8]) -> usize {
    w.iter().fold(0, |acc, &s| acc * k + s as usize)
}

fn decode(k: usize, len: usize, mut c: usize) -> Vec<u8> {
    let mut w = vec![0u8; len];
    for i in (0..len).rev() {
        w[i] = (c % k) as u8;
        c /= k;
    }
    w
}

impl CylinderTable {
    pub fn from_fn(k: usize, depth: usize, dim: usize, mut f: impl FnMut(&[u8], &[u8]) -> Vec<f64>) -> Result<Self> {
        let kd = k.checked_pow(depth as u32).unwrap_or(usize::MAX);
        if dim == 0 {
            return input("potential dimension must be at least 1");
        }
        if kd.saturating_mul(kd).saturating_mul(dim) > MAX_TABLE_ENTRIES {
            return input(format!("cylinder table of depth {depth} over {k} symbols is too large"));
        }
        let mut values = Vec::with_capacity(kd * kd * dim);
        for wc in 0..kd {
            let w = decode(k, depth, wc);
            for xc in 0..kd {
                let v = f(&w, &decode(k, depth, xc));
                if v.len() != dim {
                    return input(format!("table entry has {} values, expected {dim}", v.len()));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return input("table entries must be finite");
                }
                values.extend(v);
            }
        }
        Ok(Self::from_values(k, depth, dim, values))
    }

    fn from_values(k: usize, depth: usize, dim: usize, values: Vec<f64>) -> Self {
        let kd = k.pow(depth as u32);
        let partial = (0..depth)
            .map(|m| {
                let km = k.pow(m as u32);
                let shrink = k.pow((depth - m) as u32);
                let mut t = vec![(f64::INFINITY, f64::NEG_INFINITY); kd * km * dim];
                for wc in 0..kd {
                    for xc in 0..kd {
                        let xp = xc / shrink;
                        for c in 0..dim {
                            let v = values[(wc * kd + xc) * dim + c];
                            let e = &mut t[(wc * km + xp) * dim + c];
                            e.0 = e.0.min(v);
                            e.1 = e.1.max(v);
                        }
                    }
                }
                t
            })
            .collect();
        let var = (0..depth)
            .map(|i| {
                // groups of entries whose ω and x agree on the first i symbols
                let shrink = k.pow((depth - i) as u32);
                let ki = k.pow(i as u32);
                let mut lo = vec![f64::INFINITY; ki * ki * dim];
                let mut hi = vec![f64::NEG_INFINITY; ki * ki * dim];
                for wc in 0..kd {
                    for xc in 0..kd {
                        let g = (wc / shrink) * ki + xc / shrink;
                        for c in 0..dim {
                            let v = values[(wc * kd + xc) * dim + c];
                            lo[g * dim + c] = lo[g * dim + c].min(v);
                            hi[g * dim + c] = hi[g * dim + c].max(v);
                        }
                    }
                }
                lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max)
            })
            .collect();
        let omega_independent = (0..kd).all(|wc| {
            values[wc * kd * dim..(wc + 1) * kd * dim] == values[..kd * dim]
        });
        CylinderTable { k, depth, dim, values, partial, var, omega_independent }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega_independent(&self) -> bool {
        self.omega_independent
    }

    #[inline]
    pub(crate) fn entry(&self, wc: usize, xc: usize, c: usize) -> f64 {
        self.values[(wc * self.k.pow(self.depth as u32) + xc) * self.dim + c]
    }

    #[inline]
    pub(crate) fn values_at(&self, wc: usize, xc: usize) -> &[f64] {
        let kd = self.k.pow(self.depth as u32);
        &self.values[(wc * kd + xc) * self.dim..(wc * kd + xc + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn partial_at(&self, m: usize, wc: usize, xp: usize) -> &[(f64, f64)] {
        let km = self.k.pow(m as u32);
        &self.partial[m][(wc * km + xp) * self.dim..(wc * km + xp + 1) * self.dim]
    }

    /// Range of each coordinate over the whole table.
    pub fn range(&self) -> Vec<Interval> {
        (0..self.dim)
            .map(|c| {
                let it = self.values.iter().skip(c).step_by(self.dim);
                Interval::new(it.clone().cloned().fold(f64::INFINITY, f64::min), it.cloned().fold(f64::NEG_INFINITY, f64::max))
            })
            .collect()
    }

    /// Interval value on windows `ω[0..)`, `x[0..)` of any lengths.
    pub fn eval(&self, omega: &[u8], x: &[u8]) -> Vec<Interval> {
        let d = self.depth;
        if omega.len() >= d && x.len() >= d {
            let v = self.values_at(code(self.k, &omega[..d]), code(self.k, &x[..d]));
            return v.iter().map(|&a| Interval::point(a)).collect();
        }
        if omega.len() >= d {
            let m = x.len();
            return self
                .partial_at(m, code(self.k, &omega[..d]), code(self.k, x))
                .iter()
                .map(|&(a, b)| Interval::new(a, b))
                .collect();
        }
        // short ω window: scan every entry compatible with both prefixes
        let kd = self.k.pow(d as u32);
        let mut out = vec![Interval { lo: f64::INFINITY, hi: f64::NEG_INFINITY }; self.dim];
        for wc in 0..kd {
            let w = decode(self.k, d, wc);
            if !w.starts_with(&omega[..omega.len().min(d)]) {
                continue;
            }
            for xc in 0..kd {
                let xw = decode(self.k, d, xc);
                if !xw.starts_with(&x[..x.len().min(d)]) {
                    continue;
                }
                for (c, o) in out.iter_mut().enumerate() {
                    let v = self.entry(wc, xc, c);
                    o.lo = o.lo.min(v);
                    o.hi = o.hi.max(v);
                }
            }
        }
        out
    }

    /// Scalar table `Σ_c p_c (f_c − α_c)` at depth at least 1.
    pub(crate) fn compose(&self, p: &[f64], alpha: &[f64]) -> CylinderTable {
        let shift: f64 = p.iter().zip(alpha).map(|(a, b)| a * b).sum();
        let base = self.at_least_depth_one();
        let values = base
            .values
            .chunks(base.dim)
            .map(|v| v.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() - shift)
            .collect();
        CylinderTable::from_values(base.k, base.depth, 1, values)
    }

    pub(crate) fn at_least_depth_one(&self) -> CylinderTable {
        if self.depth > 0 {
            return self.clone();
        }
        let kk = self.k * self.k;
        let values = (0..kk).flat_map(|_| self.values.iter().copied()).collect();
        CylinderTable::from_values(self.k, 1, self.dim, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Cylinder(Arc<CylinderTable>),
    Metric,
    Affine { base: Box<Potential>, p: Vec<f64>, alpha: Vec<f64> },
}

/// Potential `f: (ω, x) ↦ R^d` over the alphabet `0..K` (shared by `ω` and `x`).
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    k: usize,
    kind: Kind,
}

/// Canonical scalar form used by enumeration engines.
#[derive(Debug, Clone)]
pub(crate) enum Flat {
    /// Depth ≥ 1 table (any dimension).
    Table(CylinderTable),
    /// `scale · ρ + offset`.
    Metric { scale: f64, offset: f64 },
}

impl Potential {
    pub fn cylinder(table: CylinderTable) -> Self {
        Potential { k: table.k, kind: Kind::Cylinder(Arc::new(table)) }
    }

    /// Indicator of `x_0 = symbol`; Birkhoff averages are symbol frequencies.
    pub fn frequency(k: usize, symbol: u8) -> Self {
        Potential::cylinder(
            CylinderTable::from_fn(k, 1, 1, |_, x| vec![(x[0] == symbol) as u8 as f64]).expect("small table"),
        )
    }

    pub fn constant(k: usize, c: &[f64]) -> Self {
        Potential::cylinder(CylinderTable::from_fn(k, 0, c.len(), |_, _| c.to_vec()).expect("small table"))
    }

    /// `ρ(ω, x)`.
    pub fn metric(k: usize) -> Self {
        Potential { k, kind: Kind::Metric }
    }

    /// The scalar potential `⟨p, f − α⟩`.
    pub fn affine(base: Potential, p: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        if p.len() != base.dim() || alpha.len() != base.dim() {
            return input(format!(
                "affine form needs vectors of length {}, got p of {} and alpha of {}",
                base.dim(),
                p.len(),
                alpha.len()
            ));
        }
        Ok(Potential { k: base.k, kind: Kind::Affine { base: Box::new(base), p, alpha } })
    }

    /// Parses a potential file. `base=` paths of affine files resolve relative to `dir`.
    pub fn from_text(text: &str, k: usize, dir: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Input("empty potential file".into()))?;
        let fields: std::collections::HashMap<&str, &str> =
            header.split_whitespace().filter_map(|t| t.split_once('=')).collect();
        let get = |key: &str| {
            fields.get(key).copied().ok_or_else(|| Error::Input(format!("potential header lacks {key}=")))
        };
        match get("kind")? {
            "metric" => Ok(Potential::metric(k)),
            "affine" => {
                let base = Potential::load(&dir.join(get("base")?), k)?;
                Potential::affine(base, parse_vector(get("p")?)?, parse_vector(get("alpha")?)?)
            }
            "cylinder" => {
                let depth: usize = get("depth")?.parse().map_err(|_| Error::Input("bad depth".into()))?;
                let dim: usize = get("dim")?.parse().map_err(|_| Error::Input("bad dim".into()))?;
                let rows: Vec<(Option<Vec<u8>>, Option<Vec<u8>>, Vec<f64>)> = lines
                    .map(|l| parse_row(l, k, depth, dim))
                    .collect::<Result<_>>()?;
                let matches = |pat: &Option<Vec<u8>>, w: &[u8]| pat.as_ref().map_or(true, |p| p == w);
                let mut missing = None;
                let mut conflict = None;
                let table = CylinderTable::from_fn(k, depth, dim, |w, x| {
                    let mut found: Option<&Vec<f64>> = None;
                    for (pw, px, v) in &rows {
                        if matches(pw, w) && matches(px, x) {
                            match found {
                                Some(prev) if prev != v => conflict = Some((w.to_vec(), x.to_vec())),
                                _ => found = Some(v),
                            }
                        }
                    }
                    match found {
                        Some(v) => v.clone(),
                        None => {
                            missing = Some((w.to_vec(), x.to_vec()));
                            vec![0.0; dim]
                        }
                    }
                })?;
                if let Some((w, x)) = conflict {
                    return input(format!("conflicting values for ω-word {w:?}, x-word {x:?}"));
                }
                if let Some((w, x)) = missing {
                    return input(format!("no value given for ω-word {w:?}, x-word {x:?}"));
                }
                Ok(Potential::cylinder(table))
            }
            other => input(format!("unknown potential kind {other:?}")),
        }
    }

    pub fn load(path: &Path, k: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read potential file {}: {e}", path.display())))?;
        Potential::from_text(&text, k, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn alphabet(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Cylinder(t) => t.dim,
            Kind::Metric | Kind::Affine { .. } => 1,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            Kind::Cylinder(_) => "cylinder",
            Kind::Metric => "metric",
            Kind::Affine { .. } => "affine",
        }
    }

    /// Finite dependence depth (`None` for anything involving `ρ`).
    pub fn depth(&self) -> Option<usize> {
        match &self.kind {
            Kind::Cylinder(t) => Some(t.depth),
            Kind::Metric => None,
            Kind::Affine { base, .. } => base.depth(),
        }
    }

    pub fn omega_independent(&self) -> bool {
        match &self.kind {
            Kind::Cylinder(t) => t.omega_independent,
            Kind::Metric => false,
            Kind::Affine { base, .. } => base.omega_independent(),
        }
    }

    /// `var_i f`: bound on the change of `f` between pairs agreeing to depth `i`.
    pub fn var_bound(&self, i: usize) -> f64 {
        match &self.kind {
            Kind::Cylinder(t) => t.var.get(i).copied().unwrap_or(0.0),
            Kind::Metric => kpow(self.k, i),
            Kind::Affine { base, p, .. } => p.iter().map(|x| x.abs()).sum::<f64>() * base.var_bound(i),
        }
    }

    /// `Σ_{i≤64} var_i` plus a geometric tail estimate for the remainder.
    pub fn var_sum(&self) -> (f64, f64) {
        let head: f64 = (0..=64).map(|i| self.var_bound(i)).sum();
        let tail = match self.depth() {
            Some(_) => 0.0,
            None => self.var_bound(65) * self.k as f64 / (self.k as f64 - 1.0),
        };
        (head, tail)
    }

    /// Interval value of `f(ω, x)` from windows starting at the evaluation index.
    pub fn eval(&self, omega: &[u8], x: &[u8]) -> Vec<Interval> {
        match &self.kind {
            Kind::Cylinder(t) => t.eval(omega, x),
            Kind::Metric => vec![crate::point::rho_words(self.k, omega, x)],
            Kind::Affine { base, p, alpha } => vec![combine(&base.eval(omega, x), p, alpha)],
        }
    }

    /// Values at positions `0..n`, flattened as `[i · dim + c]`. `identical` marks `ω = x`.
    pub fn pointwise(&self, omega: &[u8], x: &[u8], n: usize, identical: bool) -> Vec<Interval> {
        match &self.kind {
            Kind::Cylinder(t) => {
                let mut out = Vec::with_capacity(n * t.dim);
                for i in 0..n {
                    let ow = &omega[i.min(omega.len())..];
                    let xw = &x[i.min(x.len())..];
                    out.extend(t.eval(&ow[..ow.len().min(t.depth)], &xw[..xw.len().min(t.depth)]));
                }
                out
            }
            Kind::Metric => {
                if identical {
                    return vec![Interval::ZERO; n];
                }
                let w = omega.len().min(x.len());
                let mut out = vec![Interval::new(0.0, 1.0); n];
                let mut next: Option<usize> = None;
                for i in (0..w).rev() {
                    if omega[i] != x[i] {
                        next = Some(i);
                    }
                    if i < n {
                        out[i] = match next {
                            Some(j) => Interval::point(kpow(self.k, j - i)),
                            None => Interval::new(0.0, kpow(self.k, w - i)),
                        };
                    }
                }
                out
            }
            Kind::Affine { base, p, alpha } => {
                let d = base.dim();
                base.pointwise(omega, x, n, identical).chunks(d).map(|v| combine(v, p, alpha)).collect()
            }
        }
    }

    /// Symbols of lookahead beyond the last position that evaluation consumes.
    pub fn window(&self) -> usize {
        self.depth().unwrap_or(METRIC_LOOKAHEAD)
    }

    pub(crate) fn flatten(&self) -> Flat {
        match &self.kind {
            Kind::Cylinder(t) => Flat::Table(t.at_least_depth_one()),
            Kind::Metric => Flat::Metric { scale: 1.0, offset: 0.0 },
            Kind::Affine { base, p, alpha } => match base.flatten() {
                Flat::Table(t) => Flat::Table(t.compose(p, alpha)),
                Flat::Metric { scale, offset } => Flat::Metric { scale: p[0] * scale, offset: p[0] * (offset - alpha[0]) },
            },
        }
    }

    /// Range of the (scalar or vector) values over all arguments.
    pub fn range(&self) -> Vec<Interval> {
        match self.flatten() {
            Flat::Table(t) => t.range(),
            Flat::Metric { scale, offset } => vec![Interval::new(0.0, 1.0) * scale + Interval::point(offset)],
        }
    }
}

fn combine(v: &[Interval], p: &[f64], alpha: &[f64]) -> Interval {
    let shift: f64 = p.iter().zip(alpha).map(|(a, b)| a * b).sum();
    v.iter().zip(p).map(|(iv, &c)| *iv * c).sum::<Interval>() - Interval::point(shift)
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Input(format!("bad number {t:?} in vector"))))
        .collect()
}

type Row = (Option<Vec<u8>>, Option<Vec<u8>>, Vec<f64>);

fn parse_row(line: &str, k: usize, depth: usize, dim: usize) -> Result<Row> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() != 2 + dim {
        return input(format!("table line {line:?} needs 2 words and {dim} values"));
    }
    let word = |t: &str| -> Result<Option<Vec<u8>>> {
        if t == "*" {
            return Ok(None);
        }
        let w = crate::point::parse_symbols(t)?;
        if w.len() != depth || w.iter().any(|&s| s as usize >= k) {
            return input(format!("word {t:?} must have length {depth} over {k} symbols"));
        }
        Ok(Some(w))
    };
    let values = toks[2..]
        .iter()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Input(format!("bad value {t:?}"))))
        .collect::<Result<_>>()?;
    Ok((word(toks[0])?, word(toks[1])?, values))
}

/// A Birkhoff sum with its accumulated evaluation uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BirkhoffSum {
    /// Per-coordinate enclosure of `S_a^b f(ω, x)`.
    pub value: Vec<Interval>,
    /// Largest coordinate width: the variation tails actually incurred.
    pub error_bound: f64,
}

/// `S_a^b f(ω, x) = Σ_{a≤i<b} f(σ^i ω, σ^i x)`.
pub fn birkhoff_sum(f: &Potential, omega: &Point, x: &Point, a: usize, b: usize) -> Result<BirkhoffSum> {
    if a > b {
        return input(format!("birkhoff_sum needs a <= b, got {a} > {b}"));
    }
    let vals = pointwise_along(f, omega, x, b);
    let d = f.dim();
    let value: Vec<Interval> = (0..d).map(|c| (a..b).map(|i| vals[i * d + c]).sum()).collect();
    let error_bound = value.iter().map(|v| v.width()).fold(0.0, f64::max);
    Ok(BirkhoffSum { value, error_bound })
}

fn pointwise_along(f: &Potential, omega: &Point, x: &Point, n: usize) -> Vec<Interval> {
    let depth = n + f.window();
    f.pointwise(&omega.prefix(depth), &x.prefix(depth), n, omega.same_as(x))
}

/// Upper bound of the Euclidean distance from a box to a point.
fn box_distance_upper(v: &[Interval], alpha: &[f64]) -> f64 {
    v.iter()
        .zip(alpha)
        .map(|(iv, &a)| {
            let m = (iv.lo - a).abs().max((iv.hi - a).abs());
            m * m
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentCheck {
    /// Upper bound of `|(1/(n−m)) S_m^n f − α|`.
    pub normalized_lhs: f64,
    /// `(n+m)ε/(n−m)`.
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
    /// Upper bound of the un-normalized `|S_m^n f − α|`, for comparison.
    pub literal_lhs: f64,
    pub literal_holds: bool,
}

/// Checks `|(1/(n−m)) S_m^n f − α| < (n+m)ε/(n−m)` after verifying the hypothesis
/// `|(1/j) S_0^j f − α| < ε` for every `j ∈ (N, n]`.
#[allow(clippy::too_many_arguments)]
pub fn segment_average_bound_check(
    f: &Potential,
    omega: &Point,
    x: &Point,
    alpha: &[f64],
    eps: f64,
    big_n: usize,
    m: usize,
    n: usize,
) -> Result<SegmentCheck> {
    if !(n > m && m > big_n) {
        return Err(Error::Precondition(format!("need n > m > N, got n={n}, m={m}, N={big_n}")));
    }
    if alpha.len() != f.dim() {
        return input(format!("alpha has {} coordinates, potential has {}", alpha.len(), f.dim()));
    }
    let d = f.dim();
    let vals = pointwise_along(f, omega, x, n);
    let mut acc = vec![Interval::ZERO; d];
    for j in 1..=n {
        for c in 0..d {
            acc[c] += vals[(j - 1) * d + c];
        }
        if j > big_n {
            let avg: Vec<Interval> = acc.iter().map(|s| *s * (1.0 / j as f64)).collect();
            let dist = box_distance_upper(&avg, alpha);
            if dist >= eps {
                return Err(Error::Precondition(format!(
                    "hypothesis fails at j = {j}: |S_0^j f / j − α| ≤ {dist} is not below ε = {eps}"
                )));
            }
        }
    }
    let seg: Vec<Interval> = (0..d).map(|c| (m..n).map(|i| vals[i * d + c]).sum()).collect();
    let len = (n - m) as f64;
    let normalized: Vec<Interval> = seg.iter().map(|s| *s * (1.0 / len)).collect();
    let normalized_lhs = box_distance_upper(&normalized, alpha);
    let bound = (n + m) as f64 * eps / len;
    let literal_lhs = box_distance_upper(&seg, alpha);
    Ok(SegmentCheck {
        normalized_lhs,
        bound,
        slack: bound - normalized_lhs,
        holds: normalized_lhs < bound,
        literal_lhs,
        literal_holds: literal_lhs < bound,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub representative: Vec<f64>,
    pub radius: f64,
    pub members: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitSetEstimate {
    pub horizon: usize,
    /// `(n, (1/n) S_0^n f)` on the geometric ladder and the dense tail window.
    pub samples: Vec<(usize, Vec<Interval>)>,
    pub clusters: Vec<Cluster>,
    /// Linkage radius used for clustering.
    pub cluster_radius: f64,
}

#[derive(Debug, Clone)]
pub struct LimitSetConfig {
    /// Linkage radius; default is three times the spread of the last decade
    /// (see [`decade_spread`]).
    pub cluster_radius: Option<f64>,
    pub tail_points: usize,
}

impl Default for LimitSetConfig {
    fn default() -> Self {
        LimitSetConfig { cluster_radius: None, tail_points: 200 }
    }
}

/// Running averages on a ladder, clustered (single linkage) over the last decade of `n`.
pub fn limit_set_estimate(
    f: &Potential,
    omega: &Point,
    x: &Point,
    horizon: usize,
    config: &LimitSetConfig,
) -> Result<LimitSetEstimate> {
    if horizon < 100 {
        return Err(Error::Precondition(format!("horizon must be at least 100, got {horizon}")));
    }
    let d = f.dim();
    let vals = pointwise_along(f, omega, x, horizon);
    let mut ns: Vec<usize> = Vec::new();
    let mut j = 0;
    loop {
        let n = (horizon as f64 * 0.5f64.powi(j)).ceil() as usize;
        if n < 100 {
            break;
        }
        ns.push(n);
        j += 1;
    }
    let start = (0.8 * horizon as f64).ceil() as usize;
    let pts = config.tail_points.max(2);
    for t in 0..pts {
        ns.push(start + (horizon - start) * t / (pts - 1));
    }
    ns.sort_unstable();
    ns.dedup();
    let mut samples = Vec::with_capacity(ns.len());
    let mut acc = vec![Interval::ZERO; d];
    let mut upto = 0;
    for &n in &ns {
        while upto < n {
            for c in 0..d {
                acc[c] += vals[upto * d + c];
            }
            upto += 1;
        }
        samples.push((n, acc.iter().map(|s| *s * (1.0 / n as f64)).collect::<Vec<_>>()));
    }
    let recent: Vec<Vec<f64>> = samples
        .iter()
        .filter(|(n, _)| *n * 10 >= horizon)
        .map(|(_, v)| v.iter().map(|i| i.mid()).collect())
        .collect();
    // floor absorbs rounding noise of exactly constant averages
    let radius = config
        .cluster_radius
        .unwrap_or_else(|| (3.0 * decade_spread(&vals, d, horizon)).max(1e-9));
    let clusters = single_linkage(&recent, radius);
    Ok(LimitSetEstimate { horizon, samples, clusters, cluster_radius: radius })
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Standard error of an average at the start of the last decade: the pointwise
/// standard deviation over positions `[h/10, h)` divided by `√(h/10)`.
fn decade_spread(vals: &[Interval], d: usize, horizon: usize) -> f64 {
    let start = horizon / 10;
    let len = (horizon - start) as f64;
    let var: f64 = (0..d)
        .map(|c| {
            let xs = (start..horizon).map(|i| vals[i * d + c].mid());
            let mean = xs.clone().sum::<f64>() / len;
            xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / len
        })
        .sum();
    (var / start.max(1) as f64).sqrt()
}

fn single_linkage(points: &[Vec<f64>], radius: f64) -> Vec<Cluster> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut c = i;
        while p[c] != r {
            let nx = p[c];
            p[c] = r;
            c = nx;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if euclid(&points[i], &points[j]) <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, g)) => g.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    groups
        .into_iter()
        .map(|(_, g)| {
            let d = points[g[0]].len();
            let rep: Vec<f64> = (0..d).map(|c| g.iter().map(|&i| points[i][c]).sum::<f64>() / g.len() as f64).collect();
            let radius = g.iter().map(|&i| euclid(&points[i], &rep)).fold(0.0, f64::max);
            Cluster { representative: rep, radius, members: g.len() }
        })
        .collect()
}

/// Estimated set of achievable averages: hull of periodic-orbit averages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AchievableSet {
    pub dim: usize,
    /// `[lo, hi]` for `d = 1`; counter-clockwise hull vertices for `d = 2`.
    pub vertices: Vec<Vec<f64>>,
    pub max_period: usize,
    pub orbits: usize,
    /// Averages were taken against one fixed `ω` rather than over the product system.
    pub omega_dependent: bool,
}

impl AchievableSet {
    pub fn interval(lo: f64, hi: f64) -> Self {
        AchievableSet { dim: 1, vertices: vec![vec![lo], vec![hi]], max_period: 0, orbits: 0, omega_dependent: false }
    }

    /// Signed distance from `alpha` to the boundary: positive strictly inside.
    pub fn interior_margin(&self, alpha: &[f64]) -> f64 {
        match self.dim {
            1 => (alpha[0] - self.vertices[0][0]).min(self.vertices[1][0] - alpha[0]),
            _ => {
                let v = &self.vertices;
                if v.len() < 3 {
                    return f64::NEG_INFINITY;
                }
                (0..v.len())
                    .map(|i| {
                        let (a, b) = (&v[i], &v[(i + 1) % v.len()]);
                        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
                        let len = (ex * ex + ey * ey).sqrt();
                        (ex * (alpha[1] - a[1]) - ey * (alpha[0] - a[0])) / len
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn contains(&self, alpha: &[f64]) -> bool {
        self.interior_margin(alpha) >= -1e-12
    }
}

/// Hull of the averages of `f` over admissible cycles of period `≤ max_period`.
///
/// For `ω`-dependent tables: with `omega` given, `x`-cycles are averaged against
/// `ω`'s prefix (result flagged `ω`-dependent); otherwise `ω`-cycles of the full
/// shift are paired with `x`-cycles of equal length.
pub fn achievable_set_estimate(
    f: &Potential,
    sft: &Sft,
    max_period: usize,
    omega: Option<&Point>,
    budget: u64,
) -> Result<AchievableSet> {
    if max_period == 0 || max_period > 16 {
        return input(format!("max_period must be in 1..=16, got {max_period}"));
    }
    let table = match f.flatten() {
        Flat::Table(t) => t,
        Flat::Metric { .. } => {
            return Err(Error::Unsupported(
                "the metric potential has infinite depth; approximate it by a depth-k cylinder truncation first".into(),
            ))
        }
    };
    if f.dim() > 2 {
        return Err(Error::Unsupported(format!("achievable hulls are implemented for d <= 2, got d = {}", f.dim())));
    }
    let k = sft.alphabet_size();
    let d = table.dim;
    let depth = table.depth;
    let product = omega.is_none() && !table.omega_independent;
    let omega_prefix = omega.map(|w| w.prefix(max_period + depth));
    let mut work: u64 = 0;
    let mut averages: Vec<Vec<f64>> = Vec::new();
    for p in 1..=max_period {
        let cycles: Vec<Vec<u8>> = sft.words(p).filter(|w| sft.allowed(w[p - 1], w[0])).collect();
        let omega_cycles: Vec<Vec<u8>> = if product {
            (0..k.pow(p as u32)).map(|c| decode(k, p, c)).collect()
        } else {
            vec![Vec::new()]
        };
        work += (cycles.len() * omega_cycles.len()) as u64;
        if work > budget {
            return Err(Error::Resource(format!(
                "periodic-orbit enumeration exceeds the budget of {budget} orbits; lower max_period"
            )));
        }
        for w in &cycles {
            for u in &omega_cycles {
                let mut sum = vec![0.0; d];
                for i in 0..p {
                    let xc = (0..depth).fold(0, |acc, t| acc * k + w[(i + t) % p] as usize);
                    let wc = if product {
                        (0..depth).fold(0, |acc, t| acc * k + u[(i + t) % p] as usize)
                    } else if let Some(om) = &omega_prefix {
                        code(k, &om[i..i + depth])
                    } else {
                        0
                    };
                    for (c, s) in sum.iter_mut().enumerate() {
                        *s += table.entry(wc, xc, c);
                    }
                }
                averages.push(sum.iter().map(|s| s / p as f64).collect());
            }
        }
    }
    let vertices = if d == 1 {
        let lo = averages.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        let hi = averages.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        vec![vec![lo], vec![hi]]
    } else {
        convex_hull(&averages)
    };
    Ok(AchievableSet {
        dim: d,
        vertices,
        max_period,
        orbits: averages.len(),
        omega_dependent: omega.is_some() && !table.omega_independent,
    })
}

/// Monotone-chain hull, counter-clockwise, without collinear points.
fn convex_hull(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts.into_iter().map(|(x, y)| vec![x, y]).collect();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull.into_iter().map(|(x, y)| vec![x, y]).collect()
}
