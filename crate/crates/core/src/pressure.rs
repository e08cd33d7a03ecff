//! Partition functions, pressure ladders, conditional pressure over sampled `ω`,
//! and Legendre-transform spectra.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::interval::Interval;
use crate::markov::MarkovMeasure;
use crate::point::Point;
use crate::potential::{achievable_set_estimate, AchievableSet, Flat, Potential};
use crate::sft::Sft;
use crate::sums::{check_budget, WordSums, DEFAULT_BUDGET};

/// Streaming log-sum-exp.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lse {
    max: f64,
    sum: f64,
}

impl Lse {
    pub const EMPTY: Lse = Lse { max: f64::NEG_INFINITY, sum: 0.0 };

    #[inline]
    pub fn push(&mut self, v: f64) {
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub fn merge(self, o: Lse) -> Lse {
        if o.max == f64::NEG_INFINITY {
            return self;
        }
        if self.max == f64::NEG_INFINITY {
            return o;
        }
        let max = self.max.max(o.max);
        Lse { max, sum: self.sum * (self.max - max).exp() + o.sum * (o.max - max).exp() }
    }

    pub fn value(self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `log Z_n` enclosed by the log-sum-exp of lower and upper Birkhoff enclosures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogPartition {
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
}

impl LogPartition {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Word-budget and parallelism controls shared by the enumeration routines.
#[derive(Debug, Clone, Copy)]
pub struct Enumeration {
    pub budget: u64,
}

impl Default for Enumeration {
    fn default() -> Self {
        Enumeration { budget: DEFAULT_BUDGET }
    }
}

/// Prefix length giving enough chunks for a parallel ordered reduction.
pub(crate) fn chunk_prefix_len(sft: &Sft, n: usize) -> usize {
    let mut len = 0;
    while len < n && sft.count_words_f64(len) < 256.0 {
        len += 1;
    }
    len
}

/// `log Z_n(ψ, ω)` for the scalar flat potential `ψ`.
pub(crate) fn log_partition_flat(sft: &Sft, flat: &Flat, omega: &[u8], n: usize, budget: u64) -> Result<LogPartition> {
    check_budget(sft, n, budget)?;
    let engine = WordSums::new(sft, flat, omega, n);
    let chunks = sft.word_chunks(n, chunk_prefix_len(sft, n));
    let parts: Vec<(Lse, Lse)> = chunks
        .par_iter()
        .map(|prefix| {
            let (mut lo, mut hi) = (Lse::EMPTY, Lse::EMPTY);
            engine.for_each(prefix, |_, s| {
                lo.push(s[0].lo);
                hi.push(s[0].hi);
            });
            (lo, hi)
        })
        .collect();
    let (lo, hi) = parts.into_iter().fold((Lse::EMPTY, Lse::EMPTY), |(a, b), (c, d)| (a.merge(c), b.merge(d)));
    Ok(LogPartition { n, lower: lo.value(), upper: hi.value() })
}

fn scalar_form(f: &Potential, p: &[f64], alpha: &[f64]) -> Result<Potential> {
    Potential::affine(f.clone(), p.to_vec(), alpha.to_vec())
}

fn check_alphabets(sft: &Sft, f: &Potential, omega: &Point) -> Result<()> {
    if f.alphabet() != sft.alphabet_size() || omega.alphabet() != sft.alphabet_size() {
        return input(format!(
            "alphabet mismatch: shift has {} symbols, potential {}, ω {}",
            sft.alphabet_size(),
            f.alphabet(),
            omega.alphabet()
        ));
    }
    Ok(())
}

/// `log Z_n(⟨p, f − α⟩, ω)` with brackets.
pub fn partition_function(
    sft: &Sft,
    f: &Potential,
    omega: &Point,
    n: usize,
    p: &[f64],
    alpha: &[f64],
    en: Enumeration,
) -> Result<LogPartition> {
    check_alphabets(sft, f, omega)?;
    let flat = scalar_form(f, p, alpha)?.flatten();
    let omega_prefix = omega.prefix(WordSums::omega_len_needed(&flat, n));
    log_partition_flat(sft, &flat, &omega_prefix, n, en.budget)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureEstimate {
    pub ladder: Vec<usize>,
    /// `(1/n) log Z_n`, midpoint of the brackets.
    pub values: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Aitken Δ² extrapolation of the last three values (last value if fewer).
    pub extrapolated: f64,
    /// Rigorous enclosure of the limit when the structure allows one.
    pub limit_bracket: Option<Interval>,
}

/// Per-`n` pressure values with extrapolation and a conservative limit bracket.
///
/// The bracket exists for `ω`-independent finite-depth potentials: `Z_n` is then
/// submultiplicative (upper end) and, on aperiodic shifts, concatenation through
/// connecting words of length `r` gives `P ≥ (log Z_n + r·min ψ)/(n + r)`.
pub fn pressure_estimate(
    sft: &Sft,
    f: &Potential,
    omega: &Point,
    p: &[f64],
    alpha: &[f64],
    ladder: &[usize],
    en: Enumeration,
) -> Result<PressureEstimate> {
    if ladder.is_empty() || ladder.windows(2).any(|w| w[0] >= w[1]) || ladder[0] == 0 {
        return input("n ladder must be non-empty, positive and strictly increasing");
    }
    let zs: Vec<LogPartition> = ladder
        .iter()
        .map(|&n| partition_function(sft, f, omega, n, p, alpha, en))
        .collect::<Result<_>>()?;
    Ok(assemble_estimate(sft, &scalar_form(f, p, alpha)?, ladder, &zs))
}

fn assemble_estimate(sft: &Sft, psi: &Potential, ladder: &[usize], zs: &[LogPartition]) -> PressureEstimate {
    let lower: Vec<f64> = zs.iter().map(|z| z.lower / z.n as f64).collect();
    let upper: Vec<f64> = zs.iter().map(|z| z.upper / z.n as f64).collect();
    let values: Vec<f64> = lower.iter().zip(&upper).map(|(a, b)| 0.5 * (a + b)).collect();
    let limit_bracket = if psi.omega_independent() && psi.depth().is_some() {
        let up = upper.iter().cloned().fold(f64::INFINITY, f64::min);
        let lo = sft.classify().primitivity_r.map(|r| {
            let psi_min = psi.range()[0].lo;
            zs.iter()
                .map(|z| (z.lower + r as f64 * psi_min) / (z.n + r) as f64)
                .fold(f64::NEG_INFINITY, f64::max)
        });
        Some(Interval::new(lo.unwrap_or(f64::NEG_INFINITY).min(up), up))
    } else {
        None
    };
    let mut extrapolated = aitken(&values);
    if let Some(b) = limit_bracket {
        extrapolated = extrapolated.clamp(b.lo, b.hi);
    }
    PressureEstimate { ladder: ladder.to_vec(), values, lower, upper, extrapolated, limit_bracket }
}

/// Aitken Δ² on the last three terms; falls back to the last term.
pub fn aitken(v: &[f64]) -> f64 {
    match v {
        [] => f64::NAN,
        [.., a, b, c] => {
            let denom = (c - b) - (b - a);
            if denom.abs() < 1e-14 || !denom.is_finite() {
                *c
            } else {
                c - (c - b) * (c - b) / denom
            }
        }
        [.., c] => *c,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalPressure {
    /// Mean over samples of `(1/n) log Z_n` (bracket midpoints).
    pub mean: f64,
    pub stderr: f64,
    pub variance: f64,
    pub lower_mean: f64,
    pub upper_mean: f64,
    pub samples: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Seeds of the sampled `ω`s, derived deterministically from `seed`.
pub fn sample_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen()).collect()
}

/// Monte-Carlo estimate of `P_ν(⟨p, f − α⟩) = ∫ P(·, ω) dν(ω)` at depth `n`.
#[allow(clippy::too_many_arguments)]
pub fn conditional_pressure(
    sft: &Sft,
    f: &Potential,
    nu: &MarkovMeasure,
    p: &[f64],
    alpha: &[f64],
    n: usize,
    num_samples: usize,
    seed: u64,
    en: Enumeration,
) -> Result<ConditionalPressure> {
    if num_samples == 0 {
        return input("need at least one ω sample");
    }
    if nu.alphabet_size() != sft.alphabet_size() {
        return input(format!(
            "measure has {} symbols but the shift has {}",
            nu.alphabet_size(),
            sft.alphabet_size()
        ));
    }
    let psi = scalar_form(f, p, alpha)?;
    let flat = psi.flatten();
    let seeds = sample_seeds(seed, num_samples);
    let need = WordSums::omega_len_needed(&flat, n);
    let zs: Vec<LogPartition> = if psi.omega_independent() {
        let z = log_partition_flat(sft, &flat, &vec![0; need], n, en.budget)?;
        vec![z; num_samples]
    } else {
        seeds
            .iter()
            .map(|&s| log_partition_flat(sft, &flat, &nu.sample(s, need), n, en.budget))
            .collect::<Result<_>>()?
    };
    let m = num_samples as f64;
    let samples: Vec<f64> = zs.iter().map(|z| z.mid() / n as f64).collect();
    let mean = samples.iter().sum::<f64>() / m;
    let variance = if num_samples > 1 {
        samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(ConditionalPressure {
        mean,
        stderr: (variance / m).sqrt(),
        variance,
        lower_mean: zs.iter().map(|z| z.lower / n as f64).sum::<f64>() / m,
        upper_mean: zs.iter().map(|z| z.upper / n as f64).sum::<f64>() / m,
        samples,
        seeds,
    })
}

#[derive(Debug, Clone)]
pub struct SearchControl {
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// Margin to the boundary of the achievable set; default half the hull distance.
    pub eta: Option<f64>,
    pub tolerance: f64,
    /// Longest cycle used for the achievable-set hull; default picks the largest
    /// period whose enumeration stays under `2^20` cycles.
    pub hull_period: Option<usize>,
    pub enumeration: Enumeration,
}

impl Default for SearchControl {
    fn default() -> Self {
        SearchControl {
            n: 12,
            samples: 16,
            seed: 0,
            eta: None,
            tolerance: 1e-6,
            hull_period: None,
            enumeration: Enumeration::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub alpha: Vec<f64>,
    pub p_star: Vec<f64>,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub stderr: f64,
    pub iterations: usize,
    pub radius: f64,
    pub eta: f64,
    /// `|p*|` reached the search radius: the margin hypothesis may be violated.
    pub boundary_hit: bool,
    /// `min(φ(p*±h)) − φ(p*)` along each coordinate; negative values flag a non-minimum.
    pub convexity_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumCurve {
    pub points: Vec<SpectrumPoint>,
    /// Value of the objective at `p = 0` (the counting bound every value obeys).
    pub counting_bound: f64,
    pub hull: AchievableSet,
    /// Largest violation of concavity along a 1-D grid (0 when concave).
    pub concavity_defect: f64,
}

fn default_hull_period(k: usize, product: bool) -> usize {
    let mut p = 1;
    let per = |p: usize| (k as f64).powi(p as i32) * if product { (k as f64).powi(p as i32) } else { 1.0 };
    while p < 16 && (1..=p + 1).map(per).sum::<f64>() <= (1u64 << 20) as f64 {
        p += 1;
    }
    p
}

/// Golden-section minimization on `[lo, hi]`; returns `(argmin, min, iterations)`.
pub fn golden_section(mut phi: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64, usize) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (phi(a), phi(b));
    let mut it = 0;
    while hi - lo > tol {
        it += 1;
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = phi(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = phi(b);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = phi(x);
    let (mut best, mut fbest) = (x, fx);
    for (c, fc) in [(a, fa), (b, fb)] {
        if fc < fbest {
            best = c;
            fbest = fc;
        }
    }
    (best, fbest, it)
}

/// `α ↦ inf_p P_ν(⟨p, f − α⟩)` on a grid, searching `|p| ≤ R = max(P_ν(f_0)/η, 10)`.
pub fn legendre_spectrum(
    sft: &Sft,
    f: &Potential,
    nu: &MarkovMeasure,
    alphas: &[Vec<f64>],
    control: &SearchControl,
) -> Result<SpectrumCurve> {
    let d = f.dim();
    if alphas.iter().any(|a| a.len() != d) {
        return input(format!("every α must have {d} coordinates"));
    }
    let product = !f.omega_independent();
    let period = control.hull_period.unwrap_or_else(|| default_hull_period(sft.alphabet_size(), product));
    let hull = achievable_set_estimate(f, sft, period, None, u64::MAX)?;
    let objective = |p: &[f64], alpha: &[f64]| {
        conditional_pressure(sft, f, nu, p, alpha, control.n, control.samples, control.seed, control.enumeration)
    };
    let zero = vec![0.0; d];
    let counting_bound = objective(&zero, &zero)?.mean;
    let mut points = Vec::with_capacity(alphas.len());
    for alpha in alphas {
        let margin = hull.interior_margin(alpha);
        if margin <= 0.0 {
            return Err(Error::Domain(format!(
                "α = {alpha:?} is not in the interior of the achievable set (estimated from cycles of period ≤ {period}); the search-radius bound needs α ∈ P_A°"
            )));
        }
        let eta = control.eta.unwrap_or(0.5 * margin);
        let p0 = objective(&zero, alpha)?.mean;
        let radius = (p0 / eta).max(10.0);
        let mut err = None;
        let mut phi = |p: &[f64]| match objective(p, alpha) {
            Ok(c) => c.mean,
            Err(e) => {
                err.get_or_insert(e);
                f64::INFINITY
            }
        };
        let mut p = vec![0.0; d];
        let mut iterations = 0;
        for _sweep in 0..if d == 1 { 1 } else { 50 } {
            let before = p.clone();
            for c in 0..d {
                let (best, _, it) = golden_section(
                    |t| {
                        let mut q = p.clone();
                        q[c] = t;
                        phi(&q)
                    },
                    -radius,
                    radius,
                    control.tolerance,
                );
                p[c] = best;
                iterations += it;
            }
            if p.iter().zip(&before).all(|(a, b)| (a - b).abs() <= control.tolerance) {
                break;
            }
        }
        if let Some(e) = err {
            return Err(e);
        }
        let at = objective(&p, alpha)?;
        let h = 1e-3;
        let convexity_gap = (0..d)
            .flat_map(|c| {
                [-h, h].into_iter().map({
                    let p = p.clone();
                    let phi_ref = &objective;
                    move |s| {
                        let mut q = p.clone();
                        q[c] += s;
                        phi_ref(&q, alpha).map(|v| v.mean).unwrap_or(f64::INFINITY)
                    }
                })
            })
            .fold(f64::INFINITY, f64::min)
            - at.mean;
        let boundary_hit = p.iter().any(|x| x.abs() >= radius - control.tolerance);
        points.push(SpectrumPoint {
            alpha: alpha.clone(),
            p_star: p,
            value: at.mean,
            lower: at.lower_mean,
            upper: at.upper_mean,
            stderr: at.stderr,
            iterations,
            radius,
            eta,
            boundary_hit,
            convexity_gap,
        });
    }
    let concavity_defect = if d == 1 { concavity_defect(&points) } else { 0.0 };
    Ok(SpectrumCurve { points, counting_bound, hull, concavity_defect })
}

/// Largest amount by which a value falls below the chord of its grid neighbours.
fn concavity_defect(points: &[SpectrumPoint]) -> f64 {
    points
        .windows(3)
        .map(|w| {
            let (x0, x1, x2) = (w[0].alpha[0], w[1].alpha[0], w[2].alpha[0]);
            let t = (x1 - x0) / (x2 - x0);
            let chord = (1.0 - t) * w[0].value + t * w[2].value;
            (chord - w[1].value).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// `−α log α − (1−α) log(1−α) + (1−α) log(K−1)`: the entropy of points of the full
/// `K`-shift whose frequency of a given symbol is `α`.
pub fn besicovitch_eggleston_oracle(alpha: f64, k: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("frequency α = {alpha} is outside [0, 1]")));
    }
    let xlx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    Ok(-xlx(alpha) - xlx(1.0 - alpha) + (1.0 - alpha) * ((k as f64) - 1.0).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricBoundCheck {
    /// Upper bracket of `(1/n) log Z_n(p·ρ, ω)`.
    pub slope: f64,
    pub lower_slope: f64,
    /// `log((K−1)e^p + 1)`.
    pub bound: f64,
    /// `|p|/((K−1)n)`: covers the pending tail terms of `ρ` on length-`n` cylinders.
    pub tail_allowance: f64,
    /// `bound − slope`.
    pub strict_slack: f64,
    /// `bound + tail_allowance − slope`.
    pub slack: f64,
    pub holds: bool,
}

/// Checks `(1/n) log Z_n(p·ρ, ω) ≤ log((K−1)e^p + 1) + tail_allowance` on the full `K`-shift.
pub fn metric_pressure_bound_check(
    k: usize,
    p: f64,
    n: usize,
    omega: &Point,
    tolerance: f64,
    en: Enumeration,
) -> Result<MetricBoundCheck> {
    if p >= 0.0 {
        return Err(Error::Precondition(format!("the metric bound needs p < 0, got p = {p}")));
    }
    let sft = Sft::full_shift(k)?;
    let z = partition_function(&sft, &Potential::metric(k), omega, n, &[p], &[0.0], en)?;
    let slope = z.upper / n as f64;
    let bound = ((k as f64 - 1.0) * p.exp() + 1.0).ln();
    let tail_allowance = p.abs() / ((k as f64 - 1.0) * n as f64);
    let slack = bound + tail_allowance - slope;
    Ok(MetricBoundCheck {
        slope,
        lower_slope: z.lower / n as f64,
        bound,
        tail_allowance,
        strict_slack: bound - slope,
        slack,
        holds: slack >= -tolerance,
    })
}
