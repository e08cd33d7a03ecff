//! Stationary Markov measures: cylinder masses, entropy rate, seeded sampling,
//! the Parry measure and the quasi-Bernoulli constant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{input, Error, Result};
use crate::sft::{Sft, Word};

const ROW_TOL: f64 = 1e-12;
const STATIONARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovMeasure {
    p: Vec<Vec<f64>>,
    pi: Vec<f64>,
}

impl MarkovMeasure {
    /// Validates a stochastic matrix; solves for `π` when not supplied.
    pub fn new(p: Vec<Vec<f64>>, pi: Option<Vec<f64>>) -> Result<Self> {
        let k = p.len();
        if k < 2 {
            return input("Markov measure needs at least 2 symbols");
        }
        for (i, row) in p.iter().enumerate() {
            if row.len() != k {
                return input(format!("row {i} of P has {} entries, expected {k}", row.len()));
            }
            if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                return input(format!("row {i} of P has a negative or non-finite entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return input(format!("row {i} of P sums to {s}, not 1"));
            }
        }
        let pi = match pi {
            Some(pi) => pi,
            None => stationary(&p)?,
        };
        if pi.len() != k || pi.iter().any(|&x| !(x >= 0.0)) {
            return input("stationary vector has wrong length or negative entries");
        }
        if (pi.iter().sum::<f64>() - 1.0).abs() > STATIONARY_TOL {
            return input("stationary vector does not sum to 1");
        }
        for j in 0..k {
            let pj: f64 = (0..k).map(|i| pi[i] * p[i][j]).sum();
            if (pj - pi[j]).abs() > STATIONARY_TOL {
                return input(format!("πP differs from π at coordinate {j} ({pj} vs {})", pi[j]));
            }
        }
        Ok(MarkovMeasure { p, pi })
    }

    /// Product measure with the given symbol probabilities.
    pub fn bernoulli(probs: &[f64]) -> Result<Self> {
        MarkovMeasure::new(vec![probs.to_vec(); probs.len()], Some(probs.to_vec()))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        MarkovMeasure::bernoulli(&vec![1.0 / k as f64; k])
    }

    /// Measure of maximal entropy: `P_ij = A_ij v_j / (λ v_i)`, `π_i ∝ u_i v_i`.
    pub fn parry(sft: &Sft) -> Result<Self> {
        let (lambda, v, u) = sft.perron_data()?;
        let k = sft.alphabet_size();
        let mut p = vec![vec![0.0; k]; k];
        for i in 0..k {
            for &j in sft.successors(i as u8) {
                p[i][j as usize] = v[j as usize] / (lambda * v[i]);
            }
            let s: f64 = p[i].iter().sum();
            for x in p[i].iter_mut() {
                *x /= s;
            }
        }
        let mut pi: Vec<f64> = (0..k).map(|i| u[i] * v[i]).collect();
        let s: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|x| *x /= s);
        MarkovMeasure::new(p, Some(pi))
    }

    /// Parses `K`, then `K` rows of `P`, then an optional `π` row.
    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| Error::Input(format!("bad number {t:?} in measure file"))))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let (header, rest) = rows.split_first().ok_or_else(|| Error::Input("empty measure file".into()))?;
        if header.len() != 1 || header[0].fract() != 0.0 || header[0] < 2.0 {
            return input("measure file must start with the alphabet size K");
        }
        let k = header[0] as usize;
        if rest.len() != k && rest.len() != k + 1 {
            return input(format!("measure file has {} rows after K, expected {k} or {}", rest.len(), k + 1));
        }
        MarkovMeasure::new(rest[..k].to_vec(), rest.get(k).cloned())
    }

    pub fn alphabet_size(&self) -> usize {
        self.p.len()
    }

    pub fn transition(&self, i: u8, j: u8) -> f64 {
        self.p[i as usize][j as usize]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    /// Errors unless every positive transition is allowed by `sft`.
    pub fn check_compatible(&self, sft: &Sft) -> Result<()> {
        if sft.alphabet_size() != self.alphabet_size() {
            return input(format!(
                "measure has {} symbols but the shift has {}",
                self.alphabet_size(),
                sft.alphabet_size()
            ));
        }
        for (i, row) in self.p.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x > 0.0 && !sft.allowed(i as u8, j as u8) {
                    return input(format!("P[{i}][{j}] > 0 but the transition {i}->{j} is forbidden"));
                }
            }
        }
        Ok(())
    }

    /// `π_{w_0} ∏ P_{w_i w_{i+1}}`; zero for words outside the support.
    pub fn cylinder_mass(&self, word: &[u8]) -> f64 {
        let Some(&first) = word.first() else { return 1.0 };
        if first as usize >= self.p.len() {
            return 0.0;
        }
        let mut m = self.pi[first as usize];
        for w in word.windows(2) {
            if w[1] as usize >= self.p.len() {
                return 0.0;
            }
            m *= self.p[w[0] as usize][w[1] as usize];
        }
        m
    }

    pub fn log_cylinder_mass(&self, word: &[u8]) -> f64 {
        let Some(&first) = word.first() else { return 0.0 };
        let mut m = self.pi.get(first as usize).copied().unwrap_or(0.0).ln();
        for w in word.windows(2) {
            m += self.p[w[0] as usize].get(w[1] as usize).copied().unwrap_or(0.0).ln();
        }
        m
    }

    /// `−Σ_i π_i Σ_j P_ij log P_ij` in nats.
    pub fn entropy_rate(&self) -> f64 {
        self.pi
            .iter()
            .zip(&self.p)
            .map(|(&pi, row)| -pi * row.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>())
            .sum()
    }

    /// A deterministic word of length `len` sampled from the chain.
    pub fn sample(&self, seed: u64, len: usize) -> Word {
        let mut stream = MarkovStream::new(self.clone(), seed);
        (0..len).map(|_| stream.next_symbol()).collect()
    }

    /// Continues a chain from `last` for `len` more symbols.
    pub fn continue_from<R: Rng>(&self, last: u8, rng: &mut R, len: usize) -> Word {
        let mut cur = last;
        (0..len)
            .map(|_| {
                cur = draw(&self.p[cur as usize], rng);
                cur
            })
            .collect()
    }

    /// Largest multiplicative defect `max(r, 1/r)`, `r = ν[WW′]/(ν[W]ν[W′])`, over
    /// support words with `|W|, |W′| ≤ max_len` whose concatenation has positive mass.
    pub fn quasi_bernoulli_constant(&self, max_len: usize) -> f64 {
        // ν[WW′]/(ν[W]ν[W′]) = P_{ab}/π_b for a = last(W), b = first(W′), so the
        // pair search only depends on the boundary symbols realized by support words.
        let k = self.p.len();
        let support_words: Vec<Word> = (1..=max_len)
            .flat_map(|n| all_words(k, n))
            .filter(|w| self.cylinder_mass(w) > 0.0)
            .collect();
        let mut c: f64 = 1.0;
        for w in &support_words {
            for v in &support_words {
                let joint = {
                    let mut wv = w.clone();
                    wv.extend_from_slice(v);
                    self.cylinder_mass(&wv)
                };
                if joint > 0.0 {
                    let r = joint / (self.cylinder_mass(w) * self.cylinder_mass(v));
                    c = c.max(r).max(1.0 / r);
                }
            }
        }
        c
    }
}

fn all_words(k: usize, n: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..k as u8).map(move |s| {
                    let mut w2 = w.clone();
                    w2.push(s);
                    w2
                })
            })
            .collect();
    }
    out
}

fn draw<R: Rng>(probs: &[f64], rng: &mut R) -> u8 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i as u8;
            }
        }
    }
    last_positive as u8
}

/// Solves `πP = π`, `Σπ = 1` by Gaussian elimination.
fn stationary(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = p.len();
    // rows: (P^T − I) with the last equation replaced by Σπ = 1
    let mut m: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut row: Vec<f64> = (0..k).map(|j| p[j][i] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    m[k - 1] = vec![1.0; k + 1];
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[piv][col].abs() < 1e-14 {
            return input("stationary vector is not unique (reducible chain); supply π explicitly");
        }
        m.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=k {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Ok((0..k).map(|i| (m[i][k] / m[i][i]).max(0.0)).collect())
}

/// Lazily sampled symbol stream of a Markov chain.
#[derive(Debug, Clone)]
pub struct MarkovStream {
    measure: MarkovMeasure,
    rng: ChaCha8Rng,
    last: Option<u8>,
}

impl MarkovStream {
    pub fn new(measure: MarkovMeasure, seed: u64) -> Self {
        MarkovStream { measure, rng: ChaCha8Rng::seed_from_u64(seed), last: None }
    }

    pub fn next_symbol(&mut self) -> u8 {
        let s = match self.last {
            None => draw(&self.measure.pi, &mut self.rng),
            Some(prev) => draw(&self.measure.p[prev as usize], &mut self.rng),
        };
        self.last = Some(s);
        s
    }
}
