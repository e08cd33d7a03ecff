//! Depth-first enumeration of admissible words with incrementally resolved
//! Birkhoff-sum enclosures `S_0^n f(ω, x)`, `x ∈ [W]`.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::point::kpow;
use crate::potential::{CylinderTable, Flat};
use crate::sft::Sft;

/// Default cap on the number of enumerated words.
pub const DEFAULT_BUDGET: u64 = 1 << 26;

/// Fails with a resource error when `#Σ_{A,n}` exceeds `budget`.
pub fn check_budget(sft: &Sft, n: usize, budget: u64) -> Result<()> {
    let over = match sft.count_words(n) {
        Ok(c) => c > BigUint::from(budget),
        Err(_) => true,
    };
    if over {
        return Err(Error::Resource(format!(
            "enumerating words of length {n} exceeds the budget of {budget} words; use a smaller n"
        )));
    }
    Ok(())
}

pub(crate) struct WordSums<'a> {
    sft: &'a Sft,
    flat: &'a Flat,
    omega: &'a [u8],
    n: usize,
    omega_codes: Vec<usize>,
    /// `geo[m] = Σ_{j<m} K^{-j}`.
    geo: Vec<f64>,
    /// `tail[m] = Σ_{1≤j≤m} K^{-j}`.
    tail: Vec<f64>,
    symbols: Vec<u8>,
}

impl<'a> WordSums<'a> {
    /// `omega` must hold at least `n + depth − 1` symbols (`n` for the metric).
    pub fn new(sft: &'a Sft, flat: &'a Flat, omega: &'a [u8], n: usize) -> Self {
        let k = sft.alphabet_size();
        let omega_codes = match flat {
            Flat::Table(t) => (0..n)
                .map(|i| omega[i..i + t.depth()].iter().fold(0, |acc, &s| acc * k + s as usize))
                .collect(),
            Flat::Metric { .. } => Vec::new(),
        };
        let mut geo = vec![0.0; n + 2];
        let mut tail = vec![0.0; n + 2];
        for m in 1..n + 2 {
            geo[m] = geo[m - 1] + kpow(k, m - 1);
            tail[m] = tail[m - 1] + kpow(k, m);
        }
        WordSums { sft, flat, omega, n, omega_codes, geo, tail, symbols: (0..k as u8).collect() }
    }

    pub fn omega_len_needed(flat: &Flat, n: usize) -> usize {
        match flat {
            Flat::Table(t) => n + t.depth() - 1,
            Flat::Metric { .. } => n,
        }
    }

    pub fn dim(&self) -> usize {
        match self.flat {
            Flat::Table(t) => t.dim(),
            Flat::Metric { .. } => 1,
        }
    }

    /// Calls `f(word, sums)` for every admissible length-`n` word extending `prefix`.
    pub fn for_each(&self, prefix: &[u8], mut f: impl FnMut(&[u8], &[Interval])) {
        if prefix.len() > self.n || !self.sft.admissible_unchecked(prefix) {
            return;
        }
        let mut word = vec![0u8; self.n];
        let mut out = vec![Interval::ZERO; self.dim()];
        match self.flat {
            Flat::Table(t) => {
                let d = t.dim();
                let mut codes = vec![0usize; self.n + 1];
                let mut res = vec![0.0; (self.n + 1) * d];
                self.dfs_table(t, prefix, &mut word, 0, &mut codes, &mut res, &mut out, &mut f);
            }
            Flat::Metric { scale, offset } => {
                let mut state = vec![(0.0, -1i64); self.n + 1];
                self.dfs_metric(*scale, *offset, prefix, &mut word, 0, &mut state, &mut out, &mut f);
            }
        }
    }

    fn candidates<'b>(&'b self, prefix: &'b [u8], word: &[u8], t: usize) -> &'b [u8] {
        if t < prefix.len() {
            &prefix[t..t + 1]
        } else if t == 0 {
            &self.symbols
        } else {
            self.sft.successors(word[t - 1])
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs_table(
        &self,
        table: &CylinderTable,
        prefix: &[u8],
        word: &mut [u8],
        t: usize,
        codes: &mut [usize],
        res: &mut [f64],
        out: &mut [Interval],
        f: &mut impl FnMut(&[u8], &[Interval]),
    ) {
        let d = table.dim();
        let depth = table.depth();
        let k = self.sft.alphabet_size();
        if t == self.n {
            for c in 0..d {
                out[c] = Interval::point(res[t * d + c]);
            }
            for i in (self.n + 1).saturating_sub(depth)..self.n {
                let m = self.n - i;
                let xp = codes[t] % k.pow(m as u32);
                for (c, &(lo, hi)) in table.partial_at(m, self.omega_codes[i], xp).iter().enumerate() {
                    out[c].lo += lo;
                    out[c].hi += hi;
                }
            }
            f(word, out);
            return;
        }
        let kd = k.pow(depth as u32);
        for &s in self.candidates(prefix, word, t) {
            word[t] = s;
            codes[t + 1] = (codes[t] * k + s as usize) % kd;
            let (head, rest) = res.split_at_mut((t + 1) * d);
            rest[..d].copy_from_slice(&head[t * d..]);
            if t + 1 >= depth {
                let i = t + 1 - depth;
                for (r, v) in rest[..d].iter_mut().zip(table.values_at(self.omega_codes[i], codes[t + 1])) {
                    *r += v;
                }
            }
            self.dfs_table(table, prefix, word, t + 1, codes, res, out, f);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs_metric(
        &self,
        scale: f64,
        offset: f64,
        prefix: &[u8],
        word: &mut [u8],
        t: usize,
        state: &mut [(f64, i64)],
        out: &mut [Interval],
        f: &mut impl FnMut(&[u8], &[Interval]),
    ) {
        if t == self.n {
            let (r, lm) = state[t];
            let pending = self.tail[(self.n as i64 - 1 - lm) as usize];
            out[0] = Interval::new(r, r + pending) * scale + Interval::point(self.n as f64 * offset);
            f(word, out);
            return;
        }
        for &s in self.candidates(prefix, word, t) {
            word[t] = s;
            let (r, lm) = state[t];
            state[t + 1] = if s != self.omega[t] {
                (r + self.geo[(t as i64 - lm) as usize], t as i64)
            } else {
                (r, lm)
            };
            self.dfs_metric(scale, offset, prefix, word, t + 1, state, out, f);
        }
    }
}
