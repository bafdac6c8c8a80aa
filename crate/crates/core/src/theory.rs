//! Zipf partial sums and the recall bounds for the intermediate filter.
//!
//! Everything here is a pure function on `f64`. Bounds that come out
//! negative or above one are clamped and flagged as vacuous instead of
//! being rejected.

use serde::Serialize;

use crate::error::{Error, Result};

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `M_k = sum_{i=1..k} i^-a`, summed from the smallest term up.
pub fn harmonic_partial(k: u64, a: f64) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    let mut acc = CompensatedSum::default();
    for i in (1..=k).rev() {
        acc.add((i as f64).powf(-a));
    }
    acc.value()
}

/// All prefix sums `M_0..=M_k` in one sweep; `out[0] = 0`.
pub fn harmonic_prefixes(k: u64, a: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k as usize + 1);
    out.push(0.0);
    let mut acc = CompensatedSum::default();
    for i in 1..=k {
        acc.add((i as f64).powf(-a));
        out.push(acc.value());
    }
    out
}

/// Integral sandwich `(lower, upper)` around `M_k`.
pub fn mk_bounds(k: u64, a: f64) -> (f64, f64) {
    assert!(k >= 1, "k must be at least 1");
    assert!(a > 0.0, "a must be positive");
    let kf = k as f64;
    if a == 1.0 {
        ((kf + 1.0).ln(), kf.ln() + 1.0)
    } else {
        let e = 1.0 - a;
        (((kf + 1.0).powf(e) - 1.0) / e, (kf.powf(e) - a) / e)
    }
}

/// Rank-frequency law `p_i = i^-a / M_D` over ranks `1..=D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZipfModel {
    pub a: f64,
    pub d: u64,
}

impl ZipfModel {
    pub fn new(a: f64, d: u64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::config(format!("Zipf exponent must be positive, got {a}")));
        }
        if d == 0 {
            return Err(Error::config("Zipf support must hold at least one rank"));
        }
        Ok(ZipfModel { a, d })
    }

    pub fn normalizer(&self) -> f64 {
        harmonic_partial(self.d, self.a)
    }

    /// Probability of rank `i` (1-based).
    pub fn prob(&self, i: u64) -> f64 {
        assert!((1..=self.d).contains(&i), "rank {i} outside 1..={}", self.d);
        (i as f64).powf(-self.a) / self.normalizer()
    }

    /// `p_1..p_D` in rank order.
    pub fn probabilities(&self) -> Vec<f64> {
        let m = self.normalizer();
        (1..=self.d).map(|i| (i as f64).powf(-self.a) / m).collect()
    }
}

/// `beta - m / (N - m)`; may be negative.
pub fn beta_prime(beta: f64, m: u64, n_total: u64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("sequence count must be at least 1".into()));
    }
    if n_total <= m {
        return Err(Error::Domain(format!(
            "gram total {n_total} must exceed the sequence count {m}"
        )));
    }
    Ok(beta - m as f64 / (n_total - m) as f64)
}

fn check_exponent(a: f64) -> Result<()> {
    if a == 1.0 {
        return Err(Error::Unsupported(
            "the closed-form bounds need a != 1".into(),
        ));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::config(format!("Zipf exponent must be positive, got {a}")));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::Domain(format!("mass fraction {beta} outside [0, 1]")))
    }
}

/// Upper bound on the rank of the best `(n+1)`-gram the filter can find.
///
/// Floored at 0 and capped at `d_next - 1`; a non-positive base means the
/// bound says nothing and the cap is returned.
pub fn u_bound(d_next: u64, a: f64, beta_eff: f64) -> Result<f64> {
    check_exponent(a)?;
    check_beta(beta_eff)?;
    if d_next == 0 {
        return Err(Error::Domain("support size must be at least 1".into()));
    }
    let cap = (d_next - 1) as f64;
    let e = 1.0 - a;
    let base = ((d_next as f64).powf(e) - a) * (1.0 - beta_eff) + 1.0;
    if base <= 0.0 {
        return Ok(cap);
    }
    let u = base.powf(1.0 / e) - 1.0;
    if u.is_nan() {
        return Ok(cap);
    }
    Ok(u.clamp(0.0, cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecallBound {
    /// Unclamped expression.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub value: f64,
    /// True when the raw expression fell outside `[0, 1]`.
    pub vacuous: bool,
}

impl RecallBound {
    fn from_raw(raw: f64) -> Self {
        let value = if raw.is_nan() { 0.0 } else { raw.clamp(0.0, 1.0) };
        RecallBound {
            raw,
            value,
            vacuous: !(0.0..=1.0).contains(&raw),
        }
    }
}

/// Lower bound on the fraction of the top `k` `(n+1)`-grams recalled.
pub fn recall_bound(k: u64, d_next: u64, a: f64, beta_eff: f64) -> Result<RecallBound> {
    check_exponent(a)?;
    check_beta(beta_eff)?;
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let e = 1.0 - a;
    let num = ((d_next as f64).powf(e) - a) * (1.0 - beta_eff) - a;
    let den = (k as f64 + 1.0).powf(e) - 1.0;
    Ok(RecallBound::from_raw(1.0 - num / den))
}

/// Width `4 sqrt(k^2 ln(2D/delta) / (2N))` of the top-k mass deviation.
pub fn concentration_delta(delta: f64, k: u64, d: u64, n_total: u64) -> f64 {
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    assert!(n_total >= 1, "N must be at least 1");
    let k = k as f64;
    4.0 * (k * k * (2.0 * d as f64 / delta).ln() / (2.0 * n_total as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub k: u64,
    pub k_prime: u64,
    /// Mass of the retained `n`-gram prefixes.
    pub beta: f64,
    /// Sequence count.
    pub m: u64,
    /// Total `n`-grams observed.
    pub n_total: u64,
    pub delta: f64,
    /// Support size of the `n`-grams, used in the concentration width.
    pub d: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisyBounds {
    pub beta_prime: f64,
    pub delta_width: f64,
    /// `beta' - Delta` before clamping.
    pub beta_double_prime: f64,
    /// `beta''` clamped to `[0, 1]`; what the bounds were evaluated at.
    pub beta_eff: f64,
    pub u: f64,
    pub recall: RecallBound,
    pub vacuous: bool,
}

/// Both bounds with sampling noise and the prefix transfer accounted for.
pub fn noisy_bounds(inputs: &BoundInputs, a: f64, d_next: u64) -> Result<NoisyBounds> {
    check_beta(inputs.beta)?;
    if !(inputs.delta > 0.0 && inputs.delta < 1.0) {
        return Err(Error::Domain(format!("delta {} outside (0, 1)", inputs.delta)));
    }
    let bp = beta_prime(inputs.beta, inputs.m, inputs.n_total)?;
    let width = concentration_delta(inputs.delta, inputs.k, inputs.d, inputs.n_total);
    let bpp = bp - width;
    let beta_eff = bpp.clamp(0.0, 1.0);
    let u = u_bound(d_next, a, beta_eff)?;
    let recall = recall_bound(inputs.k, d_next, a, beta_eff)?;
    Ok(NoisyBounds {
        beta_prime: bp,
        delta_width: width,
        beta_double_prime: bpp,
        beta_eff,
        u,
        recall,
        vacuous: bpp <= 0.0 || recall.vacuous,
    })
}

/// Outcome of the adversarial placement of the retained mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstCase {
    /// Best (smallest) rank the filter is guaranteed to reach.
    pub best_rank: u64,
    /// Share of the top-k mass from `best_rank` through `k`.
    pub recall_mass: f64,
    /// Share of the top-k ranks from `best_rank` through `k`.
    pub recall_count: f64,
}

/// Puts the retained mass `beta_eff` on the least frequent ranks and reports
/// what is left of the top `k`.
///
/// The best surviving rank is the largest `u` with `sum_{i >= u} p_i >= beta_eff`.
pub fn worst_case(k: u64, d_next: u64, a: f64, beta_eff: f64) -> Result<WorstCase> {
    check_beta(beta_eff)?;
    if k == 0 || d_next == 0 {
        return Err(Error::Domain("k and the support size must be at least 1".into()));
    }
    let prefix = harmonic_prefixes(d_next, a);
    let total = prefix[d_next as usize];
    // Tail mass from rank u is (total - M_{u-1}) / total; it shrinks as u grows.
    let fits = |u: u64| (total - prefix[u as usize - 1]) / total >= beta_eff - 1e-15;
    let (mut lo, mut hi) = (1u64, d_next);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let u = lo;
    let kk = k.min(d_next);
    let (recall_mass, recall_count) = if u > kk {
        (0.0, 0.0)
    } else {
        let mk = prefix[kk as usize];
        (
            (mk - prefix[u as usize - 1]) / mk,
            (kk - u + 1) as f64 / kk as f64,
        )
    };
    Ok(WorstCase {
        best_rank: u,
        recall_mass,
        recall_count,
    })
}
