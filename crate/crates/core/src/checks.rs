//! Self-contained invariant suites behind `sftlab check`.
//!
//! Each suite draws seeded cases, evaluates one structural law and reports the
//! number of violations together with the worst margin seen (negative margins
//! are violations).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chaos::{distributional_profile, ChaosConfig};
use crate::entropy::{
    check_oracle_monotone, AcceptAll, CountingMeasure, CylinderMeasure, CylinderSetOracle, FnOracle, PrefixesOf,
    Provenance, StartsWith,
};
use crate::error::{input, Result};
use crate::markov::MarkovMeasure;
use crate::moran::{assemble_moran, build_schedule, ml_witness, BlockLibrary, GapMode, GrowthPolicy};
use crate::point::{rho, Point};
use crate::potential::{CylinderTable, Potential};
use crate::pressure::{partition_function, Enumeration};
use crate::sft::Sft;
use crate::transfer::{check_admissibility, check_equivariance, check_involution, sample_triples, BlockLayout};

pub const SUITES: &[&str] = &["convexity", "ultrametric", "additivity", "distributional", "oracle", "transfer", "moran"];

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOutcome {
    pub suite: String,
    pub cases: usize,
    pub failures: usize,
    /// Smallest margin over all cases.
    pub worst_margin: f64,
    pub first_failure: Option<String>,
}

impl SuiteOutcome {
    fn new(suite: &str) -> Self {
        SuiteOutcome { suite: suite.into(), cases: 0, failures: 0, worst_margin: f64::INFINITY, first_failure: None }
    }

    fn record(&mut self, margin: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if !(margin >= 0.0) {
            self.failures += 1;
            self.first_failure.get_or_insert_with(what);
        }
    }

    fn flag(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.record(if ok { 0.0 } else { -1.0 }, what)
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

/// Runs one suite; `quick` selects reduced sizes.
pub fn run_suite(name: &str, quick: bool, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match name {
        "convexity" => convexity(quick, &mut rng),
        "ultrametric" => ultrametric(quick, &mut rng),
        "additivity" => additivity(quick, &mut rng),
        "distributional" => distributional(quick, &mut rng),
        "oracle" => oracle(quick, seed),
        "transfer" => transfer(quick, seed),
        "moran" => moran(quick, seed),
        other => input(format!("unknown suite '{other}'; expected one of {}", SUITES.join(", "))),
    }
}

pub fn run_all(quick: bool, seed: u64) -> Result<Vec<SuiteOutcome>> {
    SUITES.iter().map(|s| run_suite(s, quick, seed)).collect()
}

fn shifts() -> Vec<(&'static str, Sft)> {
    vec![
        ("golden", Sft::golden_mean()),
        ("full2", Sft::full_shift(2).unwrap()),
        ("full3", Sft::full_shift(3).unwrap()),
    ]
}

fn random_point(sft: &Sft, rng: &mut ChaCha8Rng, len: usize) -> Result<Point> {
    let start = [rng.gen_range(0..sft.alphabet_size() as u8)];
    Point::explicit(sft.alphabet_size(), sft.random_word(&start, len, rng))
}

/// `p ↦ log Z_n(p·f)` is convex: midpoint test at 1e−9 on exact cylinder potentials.
fn convexity(quick: bool, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("convexity");
    let n = if quick { 8 } else { 12 };
    let trials = if quick { 12 } else { 40 };
    let en = Enumeration::default();
    for (name, sft) in shifts() {
        let k = sft.alphabet_size();
        let vals: Vec<f64> = (0..k * k).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let table = CylinderTable::from_fn(k, 1, 1, |w, x| vec![vals[w[0] as usize * k + x[0] as usize]])?;
        let omega_dep = CylinderTable::from_fn(k, 1, 1, |w, x| vec![(w[0] == x[0]) as u8 as f64])?;
        // depth-1 tables keep the partition function exact (brackets collapse)
        let potentials =
            [("frequency", Potential::frequency(k, 0)), ("random", Potential::cylinder(table)), ("match", Potential::cylinder(omega_dep))];
        for (pname, f) in &potentials {
            let omega = random_point(&sft, rng, n + 8)?;
            for _ in 0..trials {
                let a = rng.gen_range(-4.0..4.0);
                let b = rng.gen_range(-4.0..4.0);
                let z = |p: f64| partition_function(&sft, f, &omega, n, &[p], &[0.0], en);
                let (za, zb, zm) = (z(a)?, z(b)?, z(0.5 * (a + b))?);
                let margin = 0.5 * (za.lower + zb.lower) - zm.upper + 1e-9;
                out.record(margin, || format!("{name}/{pname}: midpoint of p={a}, {b} violates convexity by {}", -margin));
            }
        }
    }
    Ok(out)
}

/// `ρ(x,z) ≤ max(ρ(x,y), ρ(y,z))`, symmetry and `ρ(x,x) = 0`.
fn ultrametric(quick: bool, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("ultrametric");
    let trials = if quick { 300 } else { 3000 };
    for (name, sft) in shifts() {
        let k = sft.alphabet_size();
        for _ in 0..trials {
            let len = 24;
            let x = sft.random_word(&[rng.gen_range(0..k as u8)], len, rng);
            let mut y = x.clone();
            let i = rng.gen_range(0..len);
            y[i] = rng.gen_range(0..k as u8);
            let mut z = y.clone();
            let j = rng.gen_range(0..len);
            z[j] = rng.gen_range(0..k as u8);
            let [x, y, z] = [x, y, z].map(|w| Point::periodic(k, vec![], w).unwrap());
            let (dxy, dyz, dxz) = (rho(&x, &y, 64), rho(&y, &z, 64), rho(&x, &z, 64));
            out.record(dxy.hi.max(dyz.hi) - dxz.lo, || format!("{name}: ρ(x,z)={dxz:?} exceeds max({dxy:?}, {dyz:?})"));
            let dyx = rho(&y, &x, 64);
            out.flag(dyx == dxy, || format!("{name}: ρ not symmetric: {dxy:?} vs {dyx:?}"));
            out.flag(rho(&x, &x, 64).hi == 0.0, || format!("{name}: ρ(x,x) ≠ 0"));
        }
    }
    Ok(out)
}

fn children_margin(sft: &Sft, mu: &dyn CylinderMeasure, w: &[u8]) -> f64 {
    let parent = mu.mass(w);
    let children: f64 = match w.last() {
        Some(&a) => sft.successors(a).iter().map(|&b| mu.mass(&[w, &[b]].concat())).sum(),
        None => (0..sft.alphabet_size() as u8).map(|b| mu.mass(&[b])).sum(),
    };
    1e-9 * parent.max(1e-300) - (children - parent).abs()
}

/// Children masses sum to the parent mass (1e−9 relative).
fn additivity(quick: bool, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("additivity");
    let words = if quick { 200 } else { 2000 };
    let golden = Sft::golden_mean();
    let full2 = Sft::full_shift(2)?;
    let measures: Vec<(&str, Sft, Box<dyn CylinderMeasure>)> = vec![
        ("parry", golden.clone(), Box::new(MarkovMeasure::parry(&golden)?)),
        ("bernoulli", full2.clone(), Box::new(MarkovMeasure::bernoulli(&[0.3, 0.7])?)),
        ("counting", golden.clone(), Box::new(CountingMeasure::new(&golden, &StartsWith(vec![0, 1]), 14)?)),
        ("moran", full2.clone(), {
            let sched = build_schedule(16, GrowthPolicy::Ratio(1.5), 2, &[])?;
            let lib = BlockLibrary::Frequency { symbol: 1, targets: vec![0.5], tols: vec![0.15] };
            Box::new(assemble_moran(&full2, &sched, &lib, GapMode::Auto)?)
        }),
        ("moran-gap", golden.clone(), {
            let sched = build_schedule(16, GrowthPolicy::Ratio(1.5), 2, &[])?;
            let lib = BlockLibrary::Frequency { symbol: 1, targets: vec![0.3], tols: vec![0.15] };
            Box::new(assemble_moran(&golden, &sched, &lib, GapMode::Auto)?)
        }),
    ];
    for (name, sft, mu) in &measures {
        out.record(children_margin(sft, mu.as_ref(), &[]), || format!("{name}: root masses do not sum to 1"));
        for _ in 0..words {
            // counting measures are defined only up to their depth
            let len = rng.gen_range(1..if *name == "counting" { 14 } else { 24 });
            let w = sft.random_word(&[rng.gen_range(0..sft.alphabet_size() as u8)], len, rng);
            let m = children_margin(sft, mu.as_ref(), &w);
            out.record(m, || format!("{name}: children of {w:?} miss the parent mass by {}", -m));
        }
    }
    Ok(out)
}

/// `F ≤ F*` at every ε and both non-decreasing in ε, on raw proportions.
fn distributional(quick: bool, rng: &mut ChaCha8Rng) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("distributional");
    let horizon = if quick { 4000 } else { 40000 };
    let config = ChaosConfig::default();
    let grid = config.eps_grid.clone();
    let full2 = Sft::full_shift(2)?;
    let bern = MarkovMeasure::uniform(2)?;
    let omega = Point::periodic(2, vec![], vec![0, 1, 1])?;
    let sched = build_schedule(64, GrowthPolicy::Ratio(4.0), 5, &[])?;
    let pairs = vec![
        ("alternating", Point::periodic(2, vec![], vec![0, 1])?, Point::periodic(2, vec![], vec![1, 0])?),
        ("random", Point::markov(&bern, rng.gen()), Point::markov(&bern, rng.gen())),
        ("witness", ml_witness(&omega, &full2, &sched)?.point, omega.clone()),
        ("identical", omega.clone(), omega),
    ];
    for (name, x, y) in &pairs {
        let prof = distributional_profile(x, y, &grid, horizon, &config)?;
        let per_n = prof.ladder.len();
        for (e, s) in prof.summary.iter().enumerate() {
            out.record(s.f_star.lo - s.f.lo, || format!("{name}: F > F* at ε={}", s.eps));
            out.record(s.f_star.hi - s.f.hi, || format!("{name}: upper F > F* at ε={}", s.eps));
            if e > 0 {
                let p = &prof.summary[e - 1];
                out.record((s.f.lo - p.f.lo).min(s.f_star.lo - p.f_star.lo), || format!("{name}: F or F* decreases at ε={}", s.eps));
                for i in 0..per_n {
                    let (a, b) = (&prof.rows[(e - 1) * per_n + i], &prof.rows[e * per_n + i]);
                    out.record(b.proportion - a.proportion, || format!("{name}: proportion decreases in ε at n={}", b.n));
                }
            }
        }
    }
    Ok(out)
}

/// Monotone oracles pass the monotonicity test; a non-monotone one is caught.
fn oracle(quick: bool, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("oracle");
    let samples = if quick { 200 } else { 2000 };
    let golden = Sft::golden_mean();
    let full2 = Sft::full_shift(2)?;
    let sched = build_schedule(16, GrowthPolicy::Ratio(2.0), 3, &[])?;
    let lib = BlockLibrary::Frequency { symbol: 1, targets: vec![0.3], tols: vec![0.1] };
    let moran = assemble_moran(&golden, &sched, &lib, GapMode::Auto)?;
    let prefixes = PrefixesOf(Point::periodic(2, vec![], vec![0, 1, 0])?);
    let starts = StartsWith(vec![1, 0, 1]);
    let oracles: Vec<(&str, &Sft, &dyn CylinderSetOracle)> = vec![
        ("all", &golden, &AcceptAll),
        ("starts-with", &full2, &starts),
        ("prefixes", &full2, &prefixes),
        ("moran", &golden, &moran),
    ];
    for (name, sft, o) in oracles {
        let r = check_oracle_monotone(sft, o, 40, samples, seed);
        out.flag(r.is_ok(), || format!("{name}: {}", r.unwrap_err()));
    }
    let broken = FnOracle(|w: &[u8]| w.len() != 3, Provenance::Exact);
    let caught = check_oracle_monotone(&full2, &broken, 8, 50, seed).is_err();
    out.flag(caught, || "a non-monotone oracle went undetected".into());
    Ok(out)
}

/// Transfer-map laws at reduced sizes.
fn transfer(quick: bool, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("transfer");
    let (count, depth) = if quick { (60, 128) } else { (400, 512) };
    let full3 = Sft::full_shift(3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = random_point(&full3, &mut rng, depth + 8)?;
    let omega2 = random_point(&full3, &mut rng, depth + 8)?;
    let samples: Vec<Point> = (0..count).map(|_| random_point(&full3, &mut rng, depth)).collect::<Result<_>>()?;
    let inv = check_involution(&full3, &omega, &omega2, &samples, depth)?;
    out.flag(inv.passed(), || format!("full shift involution: {inv:?}"));
    let golden = Sft::golden_mean();
    for m in [2, 4] {
        let layout = BlockLayout::new(m, 1)?;
        let triples = sample_triples(&golden, layout, count, depth, seed);
        let adm = check_admissibility(&golden, m, &triples)?;
        out.flag(adm.violations == 0, || format!("M={m} admissibility: {:?}", adm.first_violation));
        let bounds = crate::transfer::bilipschitz_sft(&golden, layout, &triples)?;
        out.flag(bounds.passed(), || format!("M={m} bounds: {:?}", bounds.first_violation));
        for t in triples.iter().take(count / 4) {
            let [o, o2, x] = [&t.omega, &t.omega2, &t.x].map(|w| Point::explicit(2, w.clone()));
            let (o, o2, x) = (o?, o2?, x?);
            let eq = check_equivariance(&golden, &o, &o2, &x, m, depth)?;
            out.flag(eq.holds(), || format!("M={m} equivariance mismatch at {:?}", eq.first_mismatch));
        }
    }
    Ok(out)
}

/// Count consistency, sampler soundness and μ̂ normalization of small builds.
fn moran(quick: bool, seed: u64) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("moran");
    let draws = if quick { 20 } else { 200 };
    let builds = [
        (Sft::full_shift(2)?, BlockLibrary::Frequency { symbol: 0, targets: vec![0.5], tols: vec![0.1] }, 3.0),
        (Sft::golden_mean(), BlockLibrary::Frequency { symbol: 1, targets: vec![0.3], tols: vec![0.1] }, 2.5),
        (Sft::full_shift(3)?, BlockLibrary::AllWords, 4.0),
    ];
    for (i, (sft, lib, q)) in builds.iter().enumerate() {
        let sched = build_schedule(32, GrowthPolicy::Ratio(*q), 3, &[])?;
        let set = assemble_moran(sft, &sched, lib, GapMode::Auto)?;
        for j in 1..set.counts.len() {
            let seg = set.count_between(set.counts[j - 1].breakpoint, set.counts[j].breakpoint);
            let ok = set.exact_count(j) == &(set.exact_count(j - 1) * seg);
            out.flag(ok, || format!("build {i}: count inconsistency at breakpoint {}", set.counts[j].breakpoint));
        }
        for s in 0..draws as u64 {
            let x = set.sample(seed.wrapping_add(s)).prefix(set.total_len());
            let ok = x.len() == set.total_len() && sft.first_violation(&x).is_none() && set.accepts(&x);
            out.flag(ok, || format!("build {i}: sample {s} is not an accepted admissible word"));
        }
    }
    Ok(out)
}
