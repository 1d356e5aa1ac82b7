//! Phase functions of two- and three-wave interactions, their lower bounds,
//! the gradients of the bad phase and the frequency cutoffs `χ`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{self, dyadic_index, smooth_step_down, DEFAULT_GAP};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::spectral::{lambda, lambda_prime, Sign};

/// Ordered signs `(μ₁, μ₂[, μ₃])`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SignTuple {
    signs: Vec<Sign>,
}

impl SignTuple {
    pub fn new(signs: &[Sign]) -> Result<Self> {
        if !(2..=3).contains(&signs.len()) {
            return Err(Error::param("signs", format!("arity must be 2 or 3, got {}", signs.len())));
        }
        Ok(SignTuple { signs: signs.to_vec() })
    }

    pub fn parse(s: &str) -> Result<Self> {
        let signs = s
            .chars()
            .map(|c| Sign::from_char(c).ok_or_else(|| Error::param("signs", format!("bad sign {c:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        SignTuple::new(&signs)
    }

    pub fn arity(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn get(&self, i: usize) -> Sign {
        self.signs[i]
    }

    /// Membership in `{+++, +−−, −−−}`.
    pub fn is_good(&self) -> bool {
        matches!(self.to_string().as_str(), "+++" | "+--" | "---")
    }

    /// Membership in the good set together with the bad triple `++−`.
    pub fn in_full_set(&self) -> bool {
        self.is_good() || self.to_string() == "++-"
    }

    pub fn flipped(&self) -> SignTuple {
        SignTuple { signs: self.signs.iter().map(|s| s.flip()).collect() }
    }

    /// Evaluate the phase at `xis`, whose length must match the arity.
    pub fn phase(&self, xis: &[f64]) -> Result<f64> {
        if xis.len() != self.arity() {
            return Err(Error::param("phase", format!("{} inputs for signs {self}", xis.len())));
        }
        Ok(phase_n(xis, &self.signs))
    }

    pub fn all(arity: usize) -> Vec<SignTuple> {
        (0..1usize << arity)
            .map(|bits| SignTuple {
                signs: (0..arity)
                    .map(|i| if bits >> (arity - 1 - i) & 1 == 0 { Sign::Plus } else { Sign::Minus })
                    .collect(),
            })
            .collect()
    }

    pub fn good_triples() -> Vec<SignTuple> {
        ["+++", "+--", "---"].iter().map(|s| SignTuple::parse(s).unwrap()).collect()
    }

    pub fn full_triples() -> Vec<SignTuple> {
        ["+++", "++-", "+--", "---"].iter().map(|s| SignTuple::parse(s).unwrap()).collect()
    }
}

impl fmt::Display for SignTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.signs {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl TryFrom<String> for SignTuple {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        SignTuple::parse(&s)
    }
}

impl From<SignTuple> for String {
    fn from(s: SignTuple) -> String {
        s.to_string()
    }
}

fn phase_n(xis: &[f64], signs: &[Sign]) -> f64 {
    let total: f64 = xis.iter().sum();
    xis.iter().zip(signs).fold(-lambda(total), |acc, (&x, s)| acc + s.as_f64() * lambda(x))
}

/// `Φ_{μ₁μ₂}(ξ₁,ξ₂) = −Λ(ξ₁+ξ₂) + μ₁Λ(ξ₁) + μ₂Λ(ξ₂)`.
pub fn phase2(xi1: f64, xi2: f64, m1: Sign, m2: Sign) -> f64 {
    -lambda(xi1 + xi2) + m1.as_f64() * lambda(xi1) + m2.as_f64() * lambda(xi2)
}

/// `Φ_{μ₁μ₂μ₃}(ξ₁,ξ₂,ξ₃)`.
pub fn phase3(xi1: f64, xi2: f64, xi3: f64, m1: Sign, m2: Sign, m3: Sign) -> f64 {
    -lambda(xi1 + xi2 + xi3) + m1.as_f64() * lambda(xi1) + m2.as_f64() * lambda(xi2) + m3.as_f64() * lambda(xi3)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEvaluation {
    pub signs: SignTuple,
    pub inputs: Vec<f64>,
    pub value: f64,
    /// `∂Φ/∂ξᵢ`, when requested.
    pub gradient: Option<Vec<f64>>,
    pub dyadic: Vec<i32>,
}

pub fn evaluate(signs: &SignTuple, inputs: &[f64], with_gradient: bool) -> Result<PhaseEvaluation> {
    if inputs.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("phase inputs", "must be finite"));
    }
    let value = signs.phase(inputs)?;
    let gradient = with_gradient.then(|| {
        let dt = lambda_prime(inputs.iter().sum());
        inputs.iter().zip(signs.signs()).map(|(&x, s)| s.as_f64() * lambda_prime(x) - dt).collect()
    });
    Ok(PhaseEvaluation {
        signs: signs.clone(),
        inputs: inputs.to_vec(),
        value,
        gradient,
        dyadic: inputs.iter().map(|&x| dyadic_index(x)).collect(),
    })
}

/// The bad phase in the variables `ξ₁ = ξ−η, ξ₂ = η−ζ, ξ₃ = ζ`.
pub fn bad_phase(xi: f64, eta: f64, zeta: f64) -> f64 {
    phase3(xi - eta, eta - zeta, zeta, Sign::Plus, Sign::Plus, Sign::Minus)
}

/// `(∂_ξΦ, ∂_ζΦ) = (Λ'(ξ−η) − Λ'(ξ), Λ'(ζ−η) − Λ'(ζ))` of [`bad_phase`].
pub fn phase_gradients(xi: f64, eta: f64, zeta: f64) -> (f64, f64) {
    (
        lambda_prime(xi - eta) - lambda_prime(xi),
        lambda_prime(zeta - eta) - lambda_prime(zeta),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundId {
    /// `|Φ_{μ₁μ₂}|⁻¹ ≲ 1 + min{|ξ₁+ξ₂|, |ξ₁|, |ξ₂|}`.
    #[serde(rename = "bdd1")]
    Bdd1,
    /// The analogue for the good triples.
    #[serde(rename = "3phase")]
    ThreePhase,
    /// `|Φ_{++−}| ≥ Λ(ξ₃)/2` when `max{k₁,k₂} ≤ k₃ − gap`.
    #[serde(rename = "badphase")]
    BadPhase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Sampling {
    /// Uniform samples in `[-range, range]^arity`.
    Uniform { count: usize, range: f64, seed: u64 },
    /// Every dyadic cell with `k₁,k₂ ≤ k₃ − gap`, `k₃ ≤ k3_max`, on a
    /// `side³` lattice of magnitudes and all sign patterns.
    Dyadic { k3_max: i32, gap: i32, side: usize },
}

impl Sampling {
    /// The default exhaustive sweep: `k₃ ≤ 14`, gap 5, 64 points per cell.
    pub fn dyadic_default() -> Self {
        Sampling::Dyadic { k3_max: 14, gap: DEFAULT_GAP, side: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub signs: SignTuple,
    pub point: Vec<f64>,
    pub phase: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub bound: BoundId,
    pub sampling: Sampling,
    pub samples: usize,
    /// For `bdd1`/`3phase` the largest `|Φ|⁻¹/(1+min)`; for `badphase`
    /// the smallest `|Φ_{++−}|/Λ(ξ₃)`.
    pub fitted_constant: f64,
    pub worst: Option<Witness>,
    pub violations: usize,
    pub first_violation: Option<Witness>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn inverse_ratio(signs: &SignTuple, p: &[f64]) -> Witness {
    let phase = phase_n(p, signs.signs());
    let total: f64 = p.iter().sum();
    let m = p.iter().fold(total.abs(), |a, x| a.min(x.abs()));
    Witness { signs: signs.clone(), point: p.to_vec(), phase, ratio: 1.0 / (phase.abs() * (1.0 + m)) }
}

/// Audit one of the phase bounds over a sample set.
pub fn audit_phase_bounds(bound: BoundId, sampling: &Sampling, exec: Exec) -> Result<AuditReport> {
    match (bound, sampling) {
        (BoundId::BadPhase, Sampling::Dyadic { k3_max, gap, side }) => badphase_sweep(*k3_max, *gap, *side, exec),
        (BoundId::BadPhase, _) => Err(Error::param("sampling", "badphase audit needs dyadic sampling")),
        (_, Sampling::Uniform { count, range, seed }) => {
            if *count == 0 {
                return Err(Error::EmptySample);
            }
            if !range.is_finite() || *range <= 0.0 {
                return Err(Error::param("range", "must be finite and positive"));
            }
            let families = if bound == BoundId::Bdd1 { SignTuple::all(2) } else { SignTuple::good_triples() };
            let arity = families[0].arity();
            let blocks = count.div_ceil(BLOCK);
            let parts: Vec<Vec<Witness>> = exec.map_range(blocks, |b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(b as u64));
                let len = BLOCK.min(count - b * BLOCK);
                (0..len)
                    .flat_map(|_| {
                        let p: Vec<f64> = (0..arity).map(|_| rng.gen_range(-range..=*range)).collect();
                        families.iter().map(move |s| inverse_ratio(s, &p)).collect::<Vec<_>>()
                    })
                    .collect()
            });
            let all: Vec<Witness> = parts.into_iter().flatten().collect();
            let bad = |w: &Witness| !w.ratio.is_finite();
            let worst = all.iter().filter(|w| !bad(w)).max_by(|a, b| a.ratio.total_cmp(&b.ratio)).cloned();
            Ok(AuditReport {
                bound,
                sampling: sampling.clone(),
                samples: all.len(),
                fitted_constant: worst.as_ref().map_or(f64::INFINITY, |w| w.ratio),
                worst,
                violations: all.iter().filter(|w| bad(w)).count(),
                first_violation: all.iter().find(|w| bad(w)).cloned(),
            })
        }
        (_, Sampling::Dyadic { .. }) => Err(Error::param("sampling", "bdd1/3phase audits need uniform sampling")),
    }
}

const BLOCK: usize = 4096;

fn lattice(k: i32, side: usize) -> Vec<f64> {
    let (lo, hi) = dyadic::support(k);
    if side == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..side).map(|i| lo + (hi - lo) * i as f64 / (side - 1) as f64).collect()
}

fn badphase_sweep(k3_max: i32, gap: i32, side: usize, exec: Exec) -> Result<AuditReport> {
    if side == 0 {
        return Err(Error::EmptySample);
    }
    if gap < 1 {
        return Err(Error::param("gap", "must be at least 1"));
    }
    let mut cells = Vec::new();
    for k3 in (gap - 1).max(-1)..=k3_max {
        for k1 in -1..=k3 - gap {
            for k2 in -1..=k3 - gap {
                cells.push((k1, k2, k3));
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptySample);
    }
    let signs = SignTuple::parse("++-").unwrap();
    let patterns: Vec<[f64; 3]> = (0..8)
        .map(|b| [1.0, 2.0, 4.0].map(|bit| if b & (bit as i32) == 0 { 1.0 } else { -1.0 }))
        .collect();
    let parts: Vec<Vec<Witness>> = exec.map_slice(&cells, |&(k1, k2, k3)| {
        let (a, b, c) = (lattice(k1, side), lattice(k2, side), lattice(k3, side));
        let mut out = Vec::with_capacity(side * side * side * 8);
        for &r1 in &a {
            for &r2 in &b {
                for &r3 in &c {
                    for s in &patterns {
                        let p = [s[0] * r1, s[1] * r2, s[2] * r3];
                        let phase = phase_n(&p, signs.signs());
                        out.push(Witness { signs: signs.clone(), point: p.to_vec(), phase, ratio: phase.abs() / lambda(p[2]) });
                    }
                }
            }
        }
        out
    });
    let all: Vec<Witness> = parts.into_iter().flatten().collect();
    let bad = |w: &Witness| !(w.ratio >= 0.5);
    let worst = all.iter().min_by(|a, b| a.ratio.total_cmp(&b.ratio)).cloned();
    Ok(AuditReport {
        bound: BoundId::BadPhase,
        sampling: Sampling::Dyadic { k3_max, gap, side },
        samples: all.len(),
        fitted_constant: worst.as_ref().map_or(f64::NAN, |w| w.ratio),
        worst,
        violations: all.iter().filter(|w| bad(w)).count(),
        first_violation: all.iter().find(|w| bad(w)).cloned(),
    })
}

/// Two-sided gradient bound `c·2^{-3k₁}|η| ≤ |∂Φ| ≤ C|η|` on cells with
/// `k₂ ≤ k₁`, `k₃ − gap ≤ k₁ ≤ k₃`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientAudit {
    pub samples: usize,
    /// `min |∂Φ| / (2^{-3k₁}|η|)` over both gradients.
    pub lower_constant: f64,
    /// `max |∂Φ| / |η|`.
    pub upper_constant: f64,
    /// Lower constant restricted to each `k₁`.
    pub lower_by_k1: Vec<(i32, f64)>,
}

pub fn gradient_bound_audit(k_max: i32, points_per_cell: usize, seed: u64, exec: Exec) -> Result<GradientAudit> {
    if points_per_cell == 0 || k_max < -1 {
        return Err(Error::EmptySample);
    }
    let gap = DEFAULT_GAP;
    let mut cells = Vec::new();
    for k3 in -1..=k_max {
        for k1 in (k3 - gap).max(-1)..=k3 {
            for k2 in -1..=k1 {
                cells.push((k1, k2, k3));
            }
        }
    }
    let rows: Vec<(i32, f64, f64, usize)> = exec.map_range(cells.len(), |ci| {
        let (k1, k2, k3) = cells[ci];
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (ci as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let draw = |rng: &mut ChaCha8Rng, k: i32| {
            let (lo, hi) = dyadic::support(k);
            let r = rng.gen_range(lo..=hi);
            if rng.gen_bool(0.5) {
                r
            } else {
                -r
            }
        };
        let (mut lo, mut hi, mut n) = (f64::INFINITY, 0.0f64, 0);
        for _ in 0..points_per_cell {
            let (x1, x2, x3) = (draw(&mut rng, k1), draw(&mut rng, k2), draw(&mut rng, k3));
            let (zeta, eta) = (x3, x2 + x3);
            let xi = x1 + eta;
            if eta == 0.0 {
                continue;
            }
            let (gx, gz) = phase_gradients(xi, eta, zeta);
            for g in [gx, gz] {
                let r = g.abs() / eta.abs();
                hi = hi.max(r);
                lo = lo.min(r / (2f64).powi(-3 * k1));
            }
            n += 1;
        }
        (k1, lo, hi, n)
    });
    let mut lower_by_k1: Vec<(i32, f64)> = Vec::new();
    for &(k1, lo, _, _) in &rows {
        match lower_by_k1.iter_mut().find(|e| e.0 == k1) {
            Some(e) => e.1 = e.1.min(lo),
            None => lower_by_k1.push((k1, lo)),
        }
    }
    lower_by_k1.sort_by_key(|e| e.0);
    Ok(GradientAudit {
        samples: rows.iter().map(|r| r.3).sum(),
        lower_constant: rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
        upper_constant: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        lower_by_k1,
    })
}

/// `χ(s)`: 0 for `s ≤ 1`, 1 for `s ≥ 2`, smooth in between.
pub fn chi(s: f64) -> f64 {
    1.0 - smooth_step_down(s, 1.0, 2.0)
}

/// The three-way split `χ_high + χ_med + χ_low = 1` of the `η` axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiPartition {
    pub t: f64,
    pub j: i32,
    pub k1: i32,
    pub m: i32,
}

pub const CHI_GAP_DEFAULT: i32 = 8;

pub fn chi_partition(t: f64, j: i32, k1: i32, m: i32) -> Result<ChiPartition> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param("t", "must be finite and non-negative"));
    }
    if j < -1 {
        return Err(Error::BadDyadicIndex(j));
    }
    if m < 3 {
        return Err(Error::param("M", format!("must be at least 3 for disjoint supports, got {m}")));
    }
    Ok(ChiPartition { t, j, k1, m })
}

impl ChiPartition {
    /// Lower edge `2^{j+3k₁+M}` of the high region in `t|η|`.
    pub fn high_threshold(&self) -> f64 {
        (2f64).powi(self.j + 3 * self.k1 + self.m)
    }

    /// Upper edge `2^{j−M}` scale of the low region in `t|η|`.
    pub fn low_threshold(&self) -> f64 {
        (2f64).powi(self.j - self.m)
    }

    pub fn high(&self, eta: f64) -> f64 {
        chi(self.t * eta.abs() / self.high_threshold())
    }

    pub fn low(&self, eta: f64) -> f64 {
        1.0 - chi(self.t * eta.abs() / self.low_threshold())
    }

    pub fn med(&self, eta: f64) -> f64 {
        (1.0 - self.high(eta)) * (1.0 - self.low(eta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Sign::{Minus as M, Plus as P};

    #[test]
    fn phase_examples() {
        assert_eq!(phase3(0.0, 0.0, 0.0, P, P, M), 0.0);
        assert_eq!(phase3(0.0, 0.0, 0.0, P, P, P), 2.0);
        assert!((phase2(2.0, -2.0, P, M) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sign_tuples() {
        let s = SignTuple::parse("+-").unwrap();
        assert_eq!(s.arity(), 2);
        assert!(SignTuple::parse("+").is_err());
        assert!(SignTuple::parse("++++").is_err());
        assert!(SignTuple::parse("+x").is_err());
        assert!(SignTuple::parse("+--").unwrap().is_good());
        assert!(!SignTuple::parse("++-").unwrap().is_good());
        assert!(SignTuple::parse("++-").unwrap().in_full_set());
        assert!(!SignTuple::parse("-+-").unwrap().in_full_set());
        assert_eq!(SignTuple::all(3).len(), 8);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "\"+-\"");
        assert_eq!(serde_json::from_str::<SignTuple>(&json).unwrap(), s);
        assert!(s.phase(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn evaluation_gradient_matches_difference() {
        let s = SignTuple::parse("+--").unwrap();
        let p = [0.7, -1.3, 2.2];
        let e = evaluate(&s, &p, true).unwrap();
        let g = e.gradient.unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let (mut a, mut b) = (p, p);
            a[i] += h;
            b[i] -= h;
            let fd = (s.phase(&a).unwrap() - s.phase(&b).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
        assert_eq!(e.dyadic, vec![dyadic_index(0.7), dyadic_index(-1.3), dyadic_index(2.2)]);
        assert!(evaluate(&s, &[f64::NAN, 0.0, 0.0], false).is_err());
    }

    #[test]
    fn badphase_witness() {
        let v = phase3(0.01, 0.02, 100.0, P, P, M);
        assert!(v.abs() >= lambda(100.0) / 2.0);
    }

    #[test]
    fn good_triple_at_origin() {
        let s = SignTuple::parse("+++").unwrap();
        let w = inverse_ratio(&s, &[0.0, 0.0, 0.0]);
        assert_eq!(w.phase, 2.0);
        assert_eq!(w.ratio, 0.5);
    }

    #[test]
    fn badphase_exhaustive_sweep() {
        let r = audit_phase_bounds(BoundId::BadPhase, &Sampling::dyadic_default(), Exec::default()).unwrap();
        assert!(r.passed(), "{:?}", r.first_violation);
        assert!(r.fitted_constant >= 0.5);
        // Σ_{m=1}^{11} m² cells, 64 points, 8 sign patterns
        assert_eq!(r.samples, 506 * 64 * 8);
    }

    #[test]
    fn three_phase_uniform_audit() {
        let s = Sampling::Uniform { count: 100_000, range: 1024.0, seed: 3 };
        let r = audit_phase_bounds(BoundId::ThreePhase, &s, Exec::default()).unwrap();
        assert!(r.passed());
        assert!(r.fitted_constant.is_finite() && r.fitted_constant > 0.0);
        let r2 = audit_phase_bounds(BoundId::Bdd1, &s, Exec::default()).unwrap();
        assert!(r2.passed() && r2.fitted_constant.is_finite());
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["bound"], "3phase");
    }

    #[test]
    fn audit_errors() {
        let s = Sampling::Uniform { count: 0, range: 1.0, seed: 0 };
        assert!(matches!(audit_phase_bounds(BoundId::Bdd1, &s, Exec::Sequential), Err(Error::EmptySample)));
        assert!(audit_phase_bounds(BoundId::BadPhase, &Sampling::Uniform { count: 1, range: 1.0, seed: 0 }, Exec::Sequential).is_err());
    }

    #[test]
    fn audit_is_mode_independent() {
        let s = Sampling::Uniform { count: 10_000, range: 64.0, seed: 9 };
        let a = audit_phase_bounds(BoundId::ThreePhase, &s, Exec::Sequential).unwrap();
        let b = audit_phase_bounds(BoundId::ThreePhase, &s, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(phase_gradients(3.0, 0.0, -2.0), (0.0, 0.0));
        let (xi, eta) = (40.0, 1e-3);
        let (gx, _) = phase_gradients(xi, eta, 1.0);
        let approx = eta * (1.0 + xi).powi(-3);
        assert!(gx.abs() <= 8.0 * approx && gx.abs() >= approx / 8.0);
        let (gx, _) = phase_gradients(2.0, 0.5, 0.3);
        assert!(gx < 0.0);
    }

    #[test]
    fn gradient_two_sided_bound() {
        let a = gradient_bound_audit(10, 32, 1, Exec::default()).unwrap();
        assert!(a.upper_constant <= 1.0 + 1e-12);
        assert!(a.lower_constant > 0.0);
        // Λ'' ≥ (1 + (68·2^{k₁})²)^{-3/2} on these cells
        assert!(a.lower_constant >= 68f64.powi(-3), "{:?}", a.lower_by_k1);
        let first = a.lower_by_k1.iter().find(|e| e.0 == 2).unwrap().1;
        let last = a.lower_by_k1.last().unwrap().1;
        assert!(last >= first / 8.0, "{:?}", a.lower_by_k1);
    }

    #[test]
    fn chi_partition_examples() {
        assert!(chi_partition(1.0, 0, 0, 2).is_err());
        let c = chi_partition(10.0, 5, 0, 3).unwrap();
        for i in 0..1000 {
            let eta = -50.0 + 0.1 * i as f64;
            assert!((c.high(eta) + c.med(eta) + c.low(eta) - 1.0).abs() < 1e-15);
            if eta.abs() < 256.0 / 10.0 {
                assert_eq!(c.high(eta), 0.0);
            }
            if c.t * eta.abs() > (2f64).powi(c.j - c.m + 1) {
                assert_eq!(c.low(eta), 0.0);
            }
            assert!(c.high(eta) == 0.0 || c.low(eta) == 0.0);
        }
        assert_eq!(c.low(0.0), 1.0);
        assert_eq!(chi(1.0), 0.0);
        assert_eq!(chi(2.0), 1.0);
    }

    proptest! {
        #[test]
        fn phase_symmetries(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0) {
            for s in SignTuple::all(2) {
                let (m1, m2) = (s.get(0), s.get(1));
                prop_assert!((phase2(a, b, m1, m2) - phase2(b, a, m2, m1)).abs() < 1e-12);
            }
            let ppp = phase3(a, b, c, P, P, P);
            let mmm = phase3(a, b, c, M, M, M);
            prop_assert!((mmm - (-ppp - 2.0 * lambda(a + b + c))).abs() < 1e-11);
        }

        #[test]
        fn gradients_match_finite_differences(xi in -10.0f64..10.0, eta in -10.0f64..10.0, zeta in -10.0f64..10.0) {
            let (gx, gz) = phase_gradients(xi, eta, zeta);
            let h = 1e-4;
            let fx = (bad_phase(xi + h, eta, zeta) - bad_phase(xi - h, eta, zeta)) / (2.0 * h);
            let fz = (bad_phase(xi, eta, zeta + h) - bad_phase(xi, eta, zeta - h)) / (2.0 * h);
            if gx.abs() > 1e-3 {
                prop_assert!((fx - gx).abs() <= 1e-6 * gx.abs());
            }
            if gz.abs() > 1e-3 {
                prop_assert!((fz - gz).abs() <= 1e-6 * gz.abs());
            }
        }
    }
}
