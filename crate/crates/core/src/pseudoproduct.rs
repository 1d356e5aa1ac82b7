//! Bilinear and trilinear Fourier multiplier operators, the symbol families
//! of the normal-form reduction and empirical operator-norm audits.
//!
//! On the grid, `T_m(f, g)` has Fourier coefficients
//! `(1/L) Σ_{m₂} m(ξ_{m−m₂}, ξ_{m₂}) f̂_{m−m₂} ĝ_{m₂}` with indices taken
//! modulo `n`, so that `m ≡ 1` reproduces the pointwise product exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{self, psi_k_unchecked};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::phases::{phase2, phase3, SignTuple};
use crate::spectral::{lambda, make_grid, Field, Sign, Spectrum};

type Eval = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;
pub type Unary = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    AI,
    B,
    BI,
    MI,
    MII,
    M,
    PhiInvA,
    PhiInvM,
    Custom(String),
}

impl Family {
    /// Arity of the symbol and of the sign tuple the family is indexed by.
    fn arities(&self) -> Option<(usize, usize)> {
        match self {
            Family::A | Family::PhiInvA => Some((2, 2)),
            Family::AI => Some((2, 3)),
            Family::B | Family::BI | Family::MI | Family::MII | Family::M | Family::PhiInvM => Some((3, 3)),
            Family::Custom(_) => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::A => write!(f, "a"),
            Family::AI => write!(f, "aI"),
            Family::B => write!(f, "b"),
            Family::BI => write!(f, "bI"),
            Family::MI => write!(f, "mI"),
            Family::MII => write!(f, "mII"),
            Family::M => write!(f, "m"),
            Family::PhiInvA => write!(f, "phi_inv_a"),
            Family::PhiInvM => write!(f, "phi_inv_m"),
            Family::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "a" => Family::A,
            "aI" | "a^I" => Family::AI,
            "b" => Family::B,
            "bI" | "b^I" => Family::BI,
            "mI" | "m^I" => Family::MI,
            "mII" | "m^II" => Family::MII,
            "m" => Family::M,
            "phi_inv_a" => Family::PhiInvA,
            "phi_inv_m" => Family::PhiInvM,
            other => match other.strip_prefix("custom:") {
                Some(name) => Family::Custom(name.to_string()),
                None => return Err(Error::UnknownFamily(other.to_string())),
            },
        })
    }
}

/// A 2- or 3-argument Fourier multiplier symbol.
#[derive(Clone)]
pub struct SymbolSpec {
    arity: usize,
    family: Family,
    signs: Option<SignTuple>,
    eval: Eval,
    /// `Σ c · Π_i φ_i(ξ_i)` when the symbol is a sum of products.
    separable: Option<Vec<(Complex64, Vec<Unary>)>>,
}

impl fmt::Debug for SymbolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolSpec")
            .field("arity", &self.arity)
            .field("family", &self.family)
            .field("signs", &self.signs)
            .field("separable", &self.separable.is_some())
            .finish()
    }
}

impl SymbolSpec {
    pub fn custom(arity: usize, name: &str, f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Result<Self> {
        if !(2..=3).contains(&arity) {
            return Err(Error::param("arity", format!("must be 2 or 3, got {arity}")));
        }
        Ok(SymbolSpec { arity, family: Family::Custom(name.into()), signs: None, eval: Arc::new(f), separable: None })
    }

    /// `Σ_t c_t Π_i φ_{t,i}(ξ_i)`.
    pub fn separable(arity: usize, name: &str, terms: Vec<(Complex64, Vec<Unary>)>) -> Result<Self> {
        if !(2..=3).contains(&arity) || terms.iter().any(|t| t.1.len() != arity) {
            return Err(Error::param("arity", "every term needs one factor per argument"));
        }
        let t2 = terms.clone();
        let eval: Eval = Arc::new(move |x: &[f64]| {
            t2.iter().map(|(c, fs)| fs.iter().zip(x).fold(*c, |acc, (f, &xi)| acc * f(xi))).sum()
        });
        Ok(SymbolSpec { arity, family: Family::Custom(name.into()), signs: None, eval, separable: Some(terms) })
    }

    pub fn constant(arity: usize, c: Complex64) -> Self {
        let one: Unary = Arc::new(|_| Complex64::new(1.0, 0.0));
        SymbolSpec::separable(arity, "const", vec![(c, vec![one; arity])]).unwrap()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn signs(&self) -> Option<&SignTuple> {
        self.signs.as_ref()
    }

    pub fn is_separable(&self) -> bool {
        self.separable.is_some()
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        (self.eval)(xi)
    }

    pub fn label(&self) -> String {
        match &self.signs {
            Some(s) => format!("{}_{s}", self.family),
            None => self.family.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Generator {
    One,
    InvL(usize),
    XiL(usize),
}

impl Generator {
    pub fn parse(s: &str) -> Result<Self> {
        let slot = |d: &str| d.parse::<usize>().ok().filter(|i| (1..=3).contains(i));
        if s == "1" {
            return Ok(Generator::One);
        }
        if let Some(i) = s.strip_prefix("invL").and_then(slot) {
            return Ok(Generator::InvL(i));
        }
        if let Some(i) = s.strip_prefix("xiL").and_then(slot) {
            return Ok(Generator::XiL(i));
        }
        Err(Error::UnknownGenerator(s.to_string()))
    }

    fn slot(self) -> Option<usize> {
        match self {
            Generator::One => None,
            Generator::InvL(i) | Generator::XiL(i) => Some(i),
        }
    }

    fn unary(self, x: f64) -> f64 {
        match self {
            Generator::One => 1.0,
            Generator::InvL(_) => 1.0 / lambda(x),
            Generator::XiL(_) => x / lambda(x),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::One => write!(f, "1"),
            Generator::InvL(i) => write!(f, "invL{i}"),
            Generator::XiL(i) => write!(f, "xiL{i}"),
        }
    }
}

/// One product of generators with a complex coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub gens: Vec<Generator>,
    pub coef: Complex64,
}

impl Term {
    fn eval(&self, x: &[f64]) -> Complex64 {
        self.gens.iter().fold(self.coef, |acc, g| match g.slot() {
            None => acc,
            Some(i) => acc * g.unary(x[i - 1]),
        })
    }

    fn factors(&self, arity: usize) -> (Complex64, Vec<Unary>) {
        let factors = (1..=arity)
            .map(|slot| {
                let gens: Vec<Generator> = self.gens.iter().copied().filter(|g| g.slot() == Some(slot)).collect();
                Arc::new(move |x: f64| Complex64::new(gens.iter().map(|g| g.unary(x)).product(), 0.0)) as Unary
            })
            .collect();
        (self.coef, factors)
    }
}

#[derive(Serialize, Deserialize)]
struct RawTerm {
    gens: Vec<String>,
    coef: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    family: String,
    signs: String,
    terms: Vec<RawTerm>,
}

/// Coefficients of the quadratic symbols `a_{μ₁μ₂}` and cubic symbols
/// `b_{μ₁μ₂μ₃}` of a concrete nonlinearity. Missing entries are zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymbolTables {
    a: BTreeMap<usize, Vec<Term>>,
    b: BTreeMap<usize, Vec<Term>>,
}

fn sign_key(signs: &[Sign]) -> usize {
    signs.iter().fold(0, |k, s| 2 * k + usize::from(*s == Sign::Minus))
}

fn key_string(key: usize, arity: usize) -> String {
    (0..arity).map(|i| if key >> (arity - 1 - i) & 1 == 1 { '-' } else { '+' }).collect()
}

impl SymbolTables {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Add a term to `a_{signs}` (arity 2) or `b_{signs}` (arity 3).
    pub fn add(&mut self, family: &str, signs: &SignTuple, gens: &[Generator], coef: Complex64) -> Result<()> {
        let arity = match family {
            "a" => 2,
            "b" => 3,
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        if signs.arity() != arity {
            return Err(Error::SignMismatch { family: family.into(), signs: signs.to_string(), arity });
        }
        if let Some(g) = gens.iter().find(|g| g.slot().is_some_and(|s| s > arity)) {
            return Err(Error::UnknownGenerator(format!("{g} in family {family}")));
        }
        let map = if arity == 2 { &mut self.a } else { &mut self.b };
        map.entry(sign_key(signs.signs())).or_default().push(Term { gens: gens.to_vec(), coef });
        Ok(())
    }

    /// `F = u²` with `u = Σ_μ μ U_μ / (2iΛ)`: `a_{μ₁μ₂} = −μ₁μ₂ / (4Λ(ξ₁)Λ(ξ₂))`.
    pub fn u_squared() -> Self {
        let mut t = Self::empty();
        for s in SignTuple::all(2) {
            let c = -s.get(0).as_f64() * s.get(1).as_f64() / 4.0;
            t.add("a", &s, &[Generator::InvL(1), Generator::InvL(2)], Complex64::new(c, 0.0)).unwrap();
        }
        t
    }

    /// `F = (∂_t u)² ∂_x u` with `∂_t u = Σ_μ U_μ/2`, `∂_x u = Σ_μ μ ξ U_μ/(2Λ)`:
    /// `b_{μ₁μ₂μ₃} = μ₃ ξ₃ / (8Λ(ξ₃))`.
    pub fn dtu_sq_dxu() -> Self {
        let mut t = Self::empty();
        for s in SignTuple::all(3) {
            let c = s.get(2).as_f64() / 8.0;
            t.add("b", &s, &[Generator::XiL(3)], Complex64::new(c, 0.0)).unwrap();
        }
        t
    }

    pub fn merged(&self, other: &SymbolTables) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.a {
            out.a.entry(*k).or_default().extend(v.iter().cloned());
        }
        for (k, v) in &other.b {
            out.b.entry(*k).or_default().extend(v.iter().cloned());
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.a.values().all(|v| v.is_empty()) && self.b.values().all(|v| v.is_empty())
    }

    /// Load one table object or an array of them.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let raws: Vec<RawTable> = if value.is_array() {
            serde_json::from_value(value)?
        } else {
            vec![serde_json::from_value(value)?]
        };
        let mut t = Self::empty();
        for raw in raws {
            let signs = SignTuple::parse(&raw.signs)?;
            let arity = match raw.family.as_str() {
                "a" => 2,
                "b" => 3,
                other => return Err(Error::UnknownFamily(other.to_string())),
            };
            if signs.arity() != arity {
                return Err(Error::SignMismatch { family: raw.family, signs: raw.signs, arity });
            }
            for term in raw.terms {
                let gens = term.gens.iter().map(|g| Generator::parse(g)).collect::<Result<Vec<_>>>()?;
                t.add(&raw.family, &signs, &gens, Complex64::new(term.coef[0], term.coef[1]))?;
            }
        }
        Ok(t)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let raw = |family: &str, map: &BTreeMap<usize, Vec<Term>>, arity: usize| -> Vec<RawTable> {
            map.iter()
                .map(|(signs, terms)| RawTable {
                    family: family.into(),
                    signs: key_string(*signs, arity),
                    terms: terms
                        .iter()
                        .map(|t| RawTerm { gens: t.gens.iter().map(|g| g.to_string()).collect(), coef: [t.coef.re, t.coef.im] })
                        .collect(),
                })
                .collect()
        };
        let mut all = raw("a", &self.a, 2);
        all.extend(raw("b", &self.b, 3));
        serde_json::to_value(all).unwrap()
    }

    fn terms<'a>(&self, map: &'a BTreeMap<usize, Vec<Term>>, signs: &[Sign]) -> &'a [Term] {
        map.get(&sign_key(signs)).map_or(&[], |v| v.as_slice())
    }

    pub fn a(&self, m1: Sign, m2: Sign, x1: f64, x2: f64) -> Complex64 {
        self.terms(&self.a, &[m1, m2]).iter().map(|t| t.eval(&[x1, x2])).sum()
    }

    pub fn b(&self, m: [Sign; 3], x: [f64; 3]) -> Complex64 {
        self.terms(&self.b, &m).iter().map(|t| t.eval(&x)).sum()
    }

    /// `a^I_{+μ₁μ₂} = a_{μ₁μ₂}`, `a^I_{−μ₁μ₂}(ξ₁,ξ₂) = conj(a_{−μ₁,−μ₂}(−ξ₁,−ξ₂))`.
    pub fn a_i(&self, s: Sign, m1: Sign, m2: Sign, x1: f64, x2: f64) -> Complex64 {
        match s {
            Sign::Plus => self.a(m1, m2, x1, x2),
            Sign::Minus => self.a(m1.flip(), m2.flip(), -x1, -x2).conj(),
        }
    }

    pub fn phi_inv_a(&self, m1: Sign, m2: Sign, x1: f64, x2: f64) -> Complex64 {
        self.a(m1, m2, x1, x2) / phase2(x1, x2, m1, m2)
    }

    pub fn b_i(&self, s: Sign, m1: Sign, m2: Sign, x: [f64; 3]) -> Complex64 {
        let [x1, x2, x3] = x;
        let mut acc = ZERO;
        for mu in [Sign::Plus, Sign::Minus] {
            acc += self.phi_inv_a(mu, s, x2 + x3, x1) * self.a_i(mu, m1, m2, x2, x3);
            acc += self.phi_inv_a(s, mu, x1, x2 + x3) * self.a_i(mu, m1, m2, x2, x3);
        }
        I * acc
    }

    fn compose(&self, signs: &SignTuple, x: [f64; 3], inner: impl Fn([Sign; 3], [f64; 3]) -> Complex64) -> Complex64 {
        use Sign::{Minus as M, Plus as P};
        let [x1, x2, x3] = x;
        match signs.signs() {
            [P, P, P] => inner([P, P, P], x),
            [M, M, M] => inner([M, M, M], x),
            [P, P, M] => inner([P, P, M], x) + inner([P, M, P], [x1, x3, x2]) + inner([M, P, P], [x3, x2, x1]),
            [P, M, M] => inner([P, M, M], x) + inner([M, P, M], [x2, x1, x3]) + inner([M, M, P], [x3, x2, x1]),
            _ => unreachable!("sign tuple checked at build time"),
        }
    }

    pub fn m_i(&self, signs: &SignTuple, x: [f64; 3]) -> Complex64 {
        self.compose(signs, x, |s, y| self.b_i(s[0], s[1], s[2], y))
    }

    pub fn m_ii(&self, signs: &SignTuple, x: [f64; 3]) -> Complex64 {
        self.compose(signs, x, |s, y| self.b(s, y))
    }

    pub fn m(&self, signs: &SignTuple, x: [f64; 3]) -> Complex64 {
        self.m_i(signs, x) + self.m_ii(signs, x)
    }
}

/// Region `|ξ₃| ≥ 0.625·2^{gap−1}`, `max{|ξ₁|,|ξ₂|} ≤ 2.56·2^{−gap}|ξ₃|`: the
/// union of the supports of `ψ_{k₁}⊗ψ_{k₂}⊗ψ_{k₃}` over `max{k₁,k₂} ≤ k₃ − gap`.
pub fn in_gap_region(x: [f64; 3], gap: i32) -> bool {
    let (inner, outer) = (dyadic::PSI_INNER / 2.0, dyadic::PSI_OUTER);
    x[2].abs() >= inner * (2f64).powi(gap - 1)
        && x[0].abs().max(x[1].abs()) <= outer / inner * (2f64).powi(-gap) * x[2].abs()
}

/// Build the symbol of a family, indexed by `signs`.
///
/// `gap` is required only for `Φ⁻¹m` with the bad triple `++−`, whose phase
/// vanishes at the origin; the symbol is then cut to [`in_gap_region`].
pub fn build_symbol(family: Family, signs: &SignTuple, tables: &Arc<SymbolTables>, gap: Option<i32>) -> Result<SymbolSpec> {
    let (arity, sign_arity) = family.arities().ok_or_else(|| Error::UnknownFamily(family.to_string()))?;
    let mismatch = || Error::SignMismatch { family: family.to_string(), signs: signs.to_string(), arity: sign_arity };
    if signs.arity() != sign_arity {
        return Err(mismatch());
    }
    if matches!(family, Family::MI | Family::MII | Family::M | Family::PhiInvM) && !signs.in_full_set() {
        return Err(mismatch());
    }
    let t = tables.clone();
    let s = signs.clone();
    let (s0, s1, s2) = (s.get(0), s.get(1), s.get(sign_arity - 1));
    let eval: Eval = match family {
        Family::A => Arc::new(move |x| t.a(s0, s1, x[0], x[1])),
        Family::AI => Arc::new(move |x| t.a_i(s0, s1, s2, x[0], x[1])),
        Family::PhiInvA => Arc::new(move |x| t.phi_inv_a(s0, s1, x[0], x[1])),
        Family::B => Arc::new(move |x| t.b([s0, s1, s2], [x[0], x[1], x[2]])),
        Family::BI => Arc::new(move |x| t.b_i(s0, s1, s2, [x[0], x[1], x[2]])),
        Family::MI => Arc::new(move |x| t.m_i(&s, [x[0], x[1], x[2]])),
        Family::MII => Arc::new(move |x| t.m_ii(&s, [x[0], x[1], x[2]])),
        Family::M => Arc::new(move |x| t.m(&s, [x[0], x[1], x[2]])),
        Family::PhiInvM => {
            if signs.is_good() {
                Arc::new(move |x| t.m(&s, [x[0], x[1], x[2]]) / phase3(x[0], x[1], x[2], s0, s1, s2))
            } else {
                let gap = gap.ok_or_else(|| Error::VanishingPhase(signs.to_string()))?;
                if gap < 1 {
                    return Err(Error::GapViolation(format!("gap must be positive, got {gap}")));
                }
                Arc::new(move |x| {
                    let y = [x[0], x[1], x[2]];
                    if in_gap_region(y, gap) {
                        t.m(&s, y) / phase3(x[0], x[1], x[2], s0, s1, s2)
                    } else {
                        ZERO
                    }
                })
            }
        }
        Family::Custom(_) => unreachable!(),
    };
    let separable = match family {
        Family::A => Some(tables.terms(&tables.a, &[s0, s1]).iter().map(|t| t.factors(2)).collect()),
        Family::B => Some(tables.terms(&tables.b, &[s0, s1, s2]).iter().map(|t| t.factors(3)).collect()),
        _ => None,
    };
    Ok(SymbolSpec { arity, family, signs: Some(signs.clone()), eval, separable })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// Fast path for separable symbols, direct summation otherwise.
    #[default]
    Auto,
    Direct,
    Fast,
}

fn check_finite(v: Complex64, xi: &[f64]) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteSymbol { xi: xi[0] })
    }
}

/// `T_m(f, g)`.
pub fn t2(m: &SymbolSpec, f: &Field, g: &Field) -> Result<Field> {
    t2_with(m, f, g, Mode::Auto, Exec::default())
}

/// `T_m(f, g, h)`.
pub fn t3(m: &SymbolSpec, f: &Field, g: &Field, h: &Field) -> Result<Field> {
    t3_with(m, f, g, h, Mode::Auto, Exec::default())
}

pub fn t2_with(m: &SymbolSpec, f: &Field, g: &Field, mode: Mode, exec: Exec) -> Result<Field> {
    multilinear(m, &[f, g], mode, exec)
}

pub fn t3_with(m: &SymbolSpec, f: &Field, g: &Field, h: &Field, mode: Mode, exec: Exec) -> Result<Field> {
    multilinear(m, &[f, g, h], mode, exec)
}

fn multilinear(m: &SymbolSpec, inputs: &[&Field], mode: Mode, exec: Exec) -> Result<Field> {
    if m.arity != inputs.len() {
        return Err(Error::param("symbol", format!("arity {} with {} inputs", m.arity, inputs.len())));
    }
    for w in inputs.windows(2) {
        w[0].check_grid(w[1])?;
    }
    match (mode, &m.separable) {
        (Mode::Fast, None) => Err(Error::param("mode", "fast path needs a separable symbol")),
        (Mode::Fast | Mode::Auto, Some(terms)) => fast(terms, inputs),
        _ => direct(m, inputs, exec),
    }
}

fn fast(terms: &[(Complex64, Vec<Unary>)], inputs: &[&Field]) -> Result<Field> {
    let mut out = Field::zeros(inputs[0].grid());
    for (c, factors) in terms {
        let mut prod = Field::from_real_fn(inputs[0].grid(), |_| 1.0).scale(*c);
        for (phi, f) in factors.iter().zip(inputs) {
            prod = prod.mul(&f.apply_symbol(|x| phi(x))?)?;
        }
        out = out.add(&prod)?;
    }
    Ok(out)
}

fn direct(m: &SymbolSpec, inputs: &[&Field], exec: Exec) -> Result<Field> {
    let grid = inputs[0].grid().clone();
    let spectra: Vec<Vec<Complex64>> = inputs.iter().map(|f| f.spectrum().coeffs().to_vec()).collect();
    let mut out = direct_batch(m, &grid, &[spectra], exec)?;
    Ok(Spectrum::from_coeffs(grid, out.pop().unwrap())?.to_field())
}

/// Output spectra of `T_m` for several input tuples sharing one grid, with
/// the symbol evaluated once per frequency tuple in the union of supports.
fn direct_batch(m: &SymbolSpec, grid: &Arc<crate::spectral::Grid>, batch: &[Vec<Vec<Complex64>>], exec: Exec) -> Result<Vec<Vec<Complex64>>> {
    let n = grid.n();
    let xi = grid.wavenumbers();
    let arity = m.arity;
    let supp: Vec<Vec<usize>> = (0..arity)
        .map(|slot| (0..n).filter(|&i| batch.iter().any(|inp| inp[slot][i] != ZERO)).collect())
        .collect();
    let mut live = vec![vec![false; n]; arity];
    for (slot, s) in supp.iter().enumerate() {
        for &i in s {
            live[slot][i] = true;
        }
    }
    let norm = grid.box_length().powi(arity as i32 - 1);
    let nb = batch.len();
    let rows: Vec<Result<Vec<Complex64>>> = exec.map_range(n, |k| {
        let mut acc = vec![ZERO; nb];
        if arity == 2 {
            for &i1 in &supp[0] {
                let i2 = (k + n - i1) % n;
                if live[1][i2] {
                    let x = [xi[i1], xi[i2]];
                    let v = check_finite(m.eval(&x), &x)?;
                    for (a, inp) in acc.iter_mut().zip(batch) {
                        *a += v * inp[0][i1] * inp[1][i2];
                    }
                }
            }
        } else {
            for &i1 in &supp[0] {
                for &i2 in &supp[1] {
                    let i3 = (2 * n + k - i1 - i2) % n;
                    if live[2][i3] {
                        let x = [xi[i1], xi[i2], xi[i3]];
                        let v = check_finite(m.eval(&x), &x)?;
                        for (a, inp) in acc.iter_mut().zip(batch) {
                            *a += v * inp[0][i1] * inp[1][i2] * inp[2][i3];
                        }
                    }
                }
            }
        }
        Ok(acc.into_iter().map(|a| a / norm).collect())
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..nb).map(|b| rows.iter().map(|r| r[b]).collect()).collect())
}

/// `Σ_{μ₁μ₂} T_{a_{μ₁μ₂}}(U_{μ₁}, U_{μ₂}) + Σ_{μ₁μ₂μ₃} T_{b_{μ₁μ₂μ₃}}(U_{μ₁}, U_{μ₂}, U_{μ₃})`
/// with `U₊ = U`, `U₋ = conj U`.
pub fn nonlinearity_from_tables(tables: &Arc<SymbolTables>, u: &Field) -> Result<Field> {
    let pick = |s: Sign| if s == Sign::Plus { u.clone() } else { u.conj() };
    let mut out = Field::zeros(u.grid());
    for s in SignTuple::all(2) {
        let m = build_symbol(Family::A, &s, tables, None)?;
        out = out.add(&t2(&m, &pick(s.get(0)), &pick(s.get(1)))?)?;
    }
    for s in SignTuple::all(3) {
        let m = build_symbol(Family::B, &s, tables, None)?;
        out = out.add(&t3(&m, &pick(s.get(0)), &pick(s.get(1)), &pick(s.get(2)))?)?;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lemma {
    #[serde(rename = "bilinear:a")]
    BilinearA,
    #[serde(rename = "bilinear:b")]
    BilinearB,
    #[serde(rename = "trilin")]
    Trilin,
    #[serde(rename = "trilin:good")]
    TrilinGood,
    #[serde(rename = "trilinear++-")]
    TrilinearBad,
}

impl Lemma {
    pub const ALL: [Lemma; 5] = [Lemma::BilinearA, Lemma::BilinearB, Lemma::Trilin, Lemma::TrilinGood, Lemma::TrilinearBad];

    pub fn id(self) -> &'static str {
        match self {
            Lemma::BilinearA => "bilinear:a",
            Lemma::BilinearB => "bilinear:b",
            Lemma::Trilin => "trilin",
            Lemma::TrilinGood => "trilin:good",
            Lemma::TrilinearBad => "trilinear++-",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Lemma::ALL.into_iter().find(|l| l.id() == s).ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }

    fn arity(self) -> usize {
        match self {
            Lemma::BilinearA | Lemma::BilinearB => 2,
            _ => 3,
        }
    }

    /// The symbols covered by the lemma, each with its dyadic factor.
    fn symbols(self, tables: &Arc<SymbolTables>, gap: i32) -> Vec<(SymbolSpec, fn(&[i32]) -> f64)> {
        let mut out: Vec<(SymbolSpec, fn(&[i32]) -> f64)> = Vec::new();
        match self {
            Lemma::BilinearA => {
                for s in SignTuple::all(2) {
                    out.push((build_symbol(Family::PhiInvA, &s, tables, None).unwrap(), |k| (2f64).powi(5 * k[0].min(k[1]))));
                }
            }
            Lemma::BilinearB => {
                for s in SignTuple::all(2) {
                    out.push((build_symbol(Family::A, &s, tables, None).unwrap(), |_| 1.0));
                }
                for s in SignTuple::all(3) {
                    out.push((build_symbol(Family::AI, &s, tables, None).unwrap(), |_| 1.0));
                }
            }
            Lemma::Trilin => {
                for s in SignTuple::all(3) {
                    out.push((build_symbol(Family::B, &s, tables, None).unwrap(), |_| 1.0));
                }
                for s in SignTuple::full_triples() {
                    out.push((build_symbol(Family::M, &s, tables, None).unwrap(), |k| (2f64).powi(7 * median(k))));
                }
            }
            Lemma::TrilinGood => {
                for s in SignTuple::good_triples() {
                    out.push((build_symbol(Family::PhiInvM, &s, tables, None).unwrap(), |k| (2f64).powi(8 * median(k))));
                }
            }
            Lemma::TrilinearBad => {
                let s = SignTuple::parse("++-").unwrap();
                out.push((build_symbol(Family::PhiInvM, &s, tables, Some(gap)).unwrap(), |k| (2f64).powi(7 * k[0].max(k[1]))));
            }
        }
        out
    }
}

fn median(k: &[i32]) -> i32 {
    let mut v = k.to_vec();
    v.sort();
    v[1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditSettings {
    /// Grid size; at most 128.
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Dyadic sweep `k_lo ..= k_hi` (of `k₃` for `trilinear++-`).
    pub k_lo: i32,
    pub k_hi: i32,
    pub gap: i32,
    /// Explicit k-tuples overriding the sweep.
    pub tuples: Option<Vec<Vec<i32>>>,
}

impl AuditSettings {
    pub fn for_lemma(lemma: Lemma) -> Self {
        let (k_lo, k_hi) = match lemma {
            Lemma::BilinearA | Lemma::BilinearB => (-1, 6),
            Lemma::Trilin | Lemma::TrilinGood => (-1, 4),
            Lemma::TrilinearBad => (4, 8),
        };
        AuditSettings { n: 128, trials: 3, seed: 7, k_lo, k_hi, gap: dyadic::DEFAULT_GAP, tuples: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleRatio {
    pub ks: Vec<i32>,
    pub symbol: String,
    /// `‖T(P f, P g[, P h])‖_{L²} / (‖P f‖_{L²}‖P g‖_{L^∞}[‖P h‖_{L^∞}])`
    /// divided by the lemma's dyadic factor, maximized over trials.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundAudit {
    pub lemma: Lemma,
    pub settings: AuditSettings,
    pub rows: Vec<TupleRatio>,
    pub max_ratio: f64,
    pub bottom_quartile_max: f64,
    pub top_quartile_max: f64,
    /// Tuples skipped because a localized input vanished on the grid.
    pub excluded: Vec<Vec<i32>>,
}

/// Allowed growth of the top-quartile maximum over the bottom-quartile one.
pub const GROWTH_FACTOR: f64 = 4.0;

impl BoundAudit {
    pub fn no_growth(&self) -> bool {
        self.max_ratio.is_finite() && self.top_quartile_max <= GROWTH_FACTOR * self.bottom_quartile_max
    }
}

fn sweep(lemma: Lemma, s: &AuditSettings) -> Vec<Vec<i32>> {
    let r = s.k_lo.max(-1)..=s.k_hi;
    let mut out = Vec::new();
    match lemma {
        Lemma::BilinearA | Lemma::BilinearB => {
            for k1 in r.clone() {
                for k2 in r.clone() {
                    out.push(vec![k1, k2]);
                }
            }
        }
        Lemma::Trilin | Lemma::TrilinGood => {
            for k1 in r.clone() {
                for k2 in r.clone() {
                    for k3 in r.clone() {
                        out.push(vec![k1, k2, k3]);
                    }
                }
            }
        }
        Lemma::TrilinearBad => {
            for k3 in r {
                for k1 in -1..=k3 - s.gap {
                    for k2 in -1..=k3 - s.gap {
                        out.push(vec![k1, k2, k3]);
                    }
                }
            }
        }
    }
    out
}

fn lp_norm(f: &Field, p: f64) -> f64 {
    if p.is_infinite() {
        f.sup_norm()
    } else {
        (f.grid().dx() * f.values().iter().map(|v| v.norm().powf(p)).sum::<f64>()).powf(1.0 / p)
    }
}

fn localized_spectrum(grid: &Arc<crate::spectral::Grid>, k: i32, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    grid.wavenumbers()
        .iter()
        .map(|&x| {
            let w = psi_k_unchecked(k, x);
            if w == 0.0 {
                ZERO
            } else {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w
            }
        })
        .collect()
}

/// Empirical operator-norm ratios for one of the multiplier lemmas.
///
/// Each k-tuple gets its own grid, sized so that the sum of the input
/// frequencies stays below the Nyquist frequency and the periodic products
/// coincide with the ones on the line.
pub fn bound_audit(lemma: Lemma, settings: &AuditSettings, tables: &Arc<SymbolTables>, exec: Exec) -> Result<BoundAudit> {
    if settings.n > 128 {
        return Err(Error::InfeasibleGrid(settings.n));
    }
    if settings.trials == 0 {
        return Err(Error::EmptySample);
    }
    let tuples = match &settings.tuples {
        Some(t) => t.clone(),
        None => sweep(lemma, settings),
    };
    if tuples.is_empty() {
        return Err(Error::EmptySample);
    }
    for t in &tuples {
        if t.len() != lemma.arity() || t.iter().any(|&k| k < -1) {
            return Err(Error::param("tuples", format!("bad k-tuple {t:?} for {}", lemma.id())));
        }
        if lemma == Lemma::TrilinearBad && t[0].max(t[1]) > t[2] - settings.gap {
            return Err(Error::GapViolation(format!("{t:?} needs max(k1,k2) <= k3 - {}", settings.gap)));
        }
    }
    let symbols = lemma.symbols(tables, settings.gap);
    let per_tuple: Vec<Result<Option<Vec<TupleRatio>>>> = exec.map_range(tuples.len(), |ti| {
        let ks = &tuples[ti];
        let top: f64 = ks.iter().map(|&k| dyadic::support(k).1).sum();
        let xi_max = 1.05 * top;
        let grid = make_grid(settings.n, std::f64::consts::PI * settings.n as f64 / xi_max)?;
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ ((ti as u64 + 1) * 0x9E37_79B9));
        let mut best = vec![0.0f64; symbols.len()];
        let mut batch = Vec::new();
        let mut denoms = Vec::new();
        for _ in 0..settings.trials {
            let spectra: Vec<Vec<Complex64>> = ks.iter().map(|&k| localized_spectrum(&grid, k, &mut rng)).collect();
            let denom: f64 = spectra
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let f = Spectrum::from_coeffs(grid.clone(), c.clone()).map(|s| s.to_field());
                    f.map(|f| lp_norm(&f, if i == 0 { 2.0 } else { f64::INFINITY }))
                })
                .product::<Result<f64>>()?;
            if !(denom > 0.0) {
                return Ok(None);
            }
            batch.push(spectra);
            denoms.push(denom);
        }
        for (si, (sym, factor)) in symbols.iter().enumerate() {
            let outs = direct_batch(sym, &grid, &batch, Exec::Sequential)?;
            for (out, denom) in outs.into_iter().zip(&denoms) {
                let norm = Spectrum::from_coeffs(grid.clone(), out)?.l2_norm();
                best[si] = best[si].max(norm / denom / factor(ks));
            }
        }
        Ok(Some(
            symbols
                .iter()
                .zip(best)
                .map(|((sym, _), ratio)| TupleRatio { ks: ks.clone(), symbol: sym.label(), ratio })
                .collect(),
        ))
    });
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut keyed: Vec<(Vec<i32>, f64)> = Vec::new();
    for (t, r) in tuples.iter().zip(per_tuple) {
        match r? {
            None => excluded.push(t.clone()),
            Some(rs) => {
                keyed.push((t.clone(), rs.iter().map(|r| r.ratio).fold(0.0, f64::max)));
                rows.extend(rs);
            }
        }
    }
    if keyed.is_empty() {
        return Err(Error::EmptySample);
    }
    let sweep_key = |k: &[i32]| match lemma {
        Lemma::TrilinearBad => (k[2], k.iter().sum::<i32>()),
        _ => (*k.iter().max().unwrap(), k.iter().sum::<i32>()),
    };
    keyed.sort_by_key(|(k, _)| sweep_key(k));
    let q = (keyed.len() / 4).max(1);
    let maxf = |s: &[(Vec<i32>, f64)]| s.iter().map(|e| e.1).fold(0.0, f64::max);
    Ok(BoundAudit {
        lemma,
        settings: settings.clone(),
        max_ratio: maxf(&keyed),
        bottom_quartile_max: maxf(&keyed[..q]),
        top_quartile_max: maxf(&keyed[keyed.len() - q..]),
        rows,
        excluded,
    })
}
