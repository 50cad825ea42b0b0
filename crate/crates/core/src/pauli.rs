//! Pauli strings and sparse Pauli-sum operators.
//!
//! A [`PauliWord`] packs one letter per qubit (two bits each, qubit 0 in the
//! lowest bits), so products and comparisons are branch-light integer work.
//! Qubit 0 is the leftmost tensor factor of the dense representation.
//!
//! [`PauliSum`] is the workhorse of the algebraic pipeline: C-space bases,
//! F coefficients and graph derivatives are all carried as sparse Pauli
//! expansions, which keeps their cost independent of `2^n`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::Operator;

pub const MAX_QUBITS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    fn code(self) -> u32 {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    fn from_code(c: u32) -> Pauli {
        match c & 3 {
            0 => Pauli::I,
            1 => Pauli::X,
            2 => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Product of two single-qubit letters as `(letter, k)` meaning `i^k · letter`.
const fn letter_product(a: u32, b: u32) -> (u32, u32) {
    match (a, b) {
        (0, b) => (b, 0),
        (a, 0) => (a, 0),
        (1, 1) | (2, 2) | (3, 3) => (0, 0),
        (1, 2) => (3, 1),
        (2, 3) => (1, 1),
        (3, 1) => (2, 1),
        (2, 1) => (3, 3),
        (3, 2) => (1, 3),
        (1, 3) => (2, 3),
        _ => (0, 0),
    }
}

const PRODUCT_TABLE: [[(u32, u32); 4]; 4] = {
    let mut t = [[(0u32, 0u32); 4]; 4];
    let mut a = 0;
    while a < 4 {
        let mut b = 0;
        while b < 4 {
            t[a][b] = letter_product(a as u32, b as u32);
            b += 1;
        }
        a += 1;
    }
    t
};

const I_POWERS: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, -1.0),
];

/// Phase-free Pauli string on up to [`MAX_QUBITS`] qubits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliWord(u32);

impl PauliWord {
    pub const IDENTITY: PauliWord = PauliWord(0);

    pub fn single(qubit: usize, p: Pauli) -> Self {
        debug_assert!(qubit < MAX_QUBITS);
        PauliWord(p.code() << (2 * qubit))
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        letters
            .iter()
            .enumerate()
            .fold(PauliWord::IDENTITY, |w, (q, &p)| w.with(q, p))
    }

    pub fn letter(self, qubit: usize) -> Pauli {
        Pauli::from_code(self.0 >> (2 * qubit))
    }

    pub fn with(self, qubit: usize, p: Pauli) -> Self {
        let shift = 2 * qubit;
        PauliWord((self.0 & !(3 << shift)) | (p.code() << shift))
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    /// Number of non-identity letters.
    pub fn weight(self) -> usize {
        (0..MAX_QUBITS).filter(|&q| (self.0 >> (2 * q)) & 3 != 0).count()
    }

    /// Bit mask of qubits carrying a non-identity letter.
    pub fn support(self) -> u32 {
        (0..MAX_QUBITS)
            .filter(|&q| (self.0 >> (2 * q)) & 3 != 0)
            .fold(0, |m, q| m | (1 << q))
    }

    /// Highest qubit index touched plus one.
    pub fn span(self) -> usize {
        if self.0 == 0 {
            0
        } else {
            (32 - self.0.leading_zeros() as usize).div_ceil(2)
        }
    }

    /// `self · other = i^k · word`, returned as `(word, k)`.
    pub fn mul(self, other: PauliWord) -> (PauliWord, u32) {
        let (mut a, mut b) = (self.0, other.0);
        let mut out = 0u32;
        let mut phase = 0u32;
        let mut shift = 0;
        while a | b != 0 {
            let (l, k) = PRODUCT_TABLE[(a & 3) as usize][(b & 3) as usize];
            out |= l << shift;
            phase += k;
            a >>= 2;
            b >>= 2;
            shift += 2;
        }
        (PauliWord(out), phase & 3)
    }

    pub fn commutes_with(self, other: PauliWord) -> bool {
        let (_, k1) = self.mul(other);
        let (_, k2) = other.mul(self);
        k1 == k2
    }

    pub fn to_letters(self, n: usize) -> String {
        (0..n).map(|q| self.letter(q).as_char()).collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?} in {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if letters.len() > MAX_QUBITS {
            return Err(Error::Parse(format!("Pauli string {s:?} longer than {MAX_QUBITS}")));
        }
        Ok(PauliWord::from_letters(&letters))
    }
}

/// A single Pauli string with a complex coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliString {
    pub letters: Vec<Pauli>,
    pub coefficient: C64,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>, coefficient: C64) -> Self {
        Self { letters, coefficient }
    }

    pub fn word(&self) -> PauliWord {
        PauliWord::from_letters(&self.letters)
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| Error::Parse(format!("bad Pauli letter {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::new(letters, C64::new(1.0, 0.0)))
    }
}

/// Sparse linear combination of Pauli words, kept sorted and merged.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PauliSum {
    terms: Vec<(PauliWord, C64)>,
}

impl PauliSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(word: PauliWord, coeff: impl Into<C64>) -> Self {
        let c = coeff.into();
        if c == C64::new(0.0, 0.0) {
            return Self::zero();
        }
        Self { terms: vec![(word, c)] }
    }

    pub fn from_terms<I: IntoIterator<Item = (PauliWord, C64)>>(iter: I) -> Self {
        let mut terms: Vec<_> = iter.into_iter().collect();
        normalize(&mut terms);
        Self { terms }
    }

    /// Parses real combinations such as `2zz-xx-yy` or `xyz + 0.5*zzi`.
    pub fn parse_expr(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::Parse("empty Pauli expression".into()));
        }
        let mut terms = Vec::new();
        let mut rest = compact.as_str();
        while !rest.is_empty() {
            let sign = match rest.as_bytes()[0] {
                b'-' => {
                    rest = &rest[1..];
                    -1.0
                }
                b'+' => {
                    rest = &rest[1..];
                    1.0
                }
                _ if terms.is_empty() => 1.0,
                _ => return Err(Error::Parse(format!("expected sign in {s:?}"))),
            };
            let end = rest[1..].find(['+', '-']).map_or(rest.len(), |k| k + 1);
            let (term, tail) = rest.split_at(end);
            rest = tail;
            let split = term.find(|c: char| Pauli::from_char(c).is_some()).unwrap_or(term.len());
            let (num, word) = term.split_at(split);
            let num = num.trim_end_matches('*');
            let coeff = if num.is_empty() {
                1.0
            } else {
                num.parse::<f64>().map_err(|_| Error::Parse(format!("bad coefficient {num:?} in {s:?}")))?
            };
            if word.is_empty() {
                return Err(Error::Parse(format!("missing Pauli word in {s:?}")));
            }
            terms.push((PauliWord::parse(word)?, C64::new(sign * coeff, 0.0)));
        }
        Ok(Self::from_terms(terms))
    }

    /// `Σ_i σ_p^i` on `n` qubits.
    pub fn collective(p: Pauli, n: usize) -> Self {
        Self::from_terms((0..n).map(|q| (PauliWord::single(q, p), C64::new(1.0, 0.0))))
    }

    pub fn terms(&self) -> &[(PauliWord, C64)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, word: PauliWord) -> C64 {
        self.terms
            .binary_search_by_key(&word, |t| t.0)
            .map(|i| self.terms[i].1)
            .unwrap_or_default()
    }

    pub fn scale(&self, c: impl Into<C64>) -> Self {
        let c = c.into();
        Self::from_terms(self.terms.iter().map(|&(w, a)| (w, a * c)))
    }

    pub fn add_scaled(&mut self, other: &PauliSum, c: impl Into<C64>) {
        let c = c.into();
        if other.terms.is_empty() || c == C64::new(0.0, 0.0) {
            return;
        }
        let mut merged = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            let (wa, ca) = self.terms[i];
            let (wb, cb) = other.terms[j];
            match wa.cmp(&wb) {
                std::cmp::Ordering::Less => {
                    merged.push((wa, ca));
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    merged.push((wb, cb * c));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let s = ca + cb * c;
                    if s != C64::new(0.0, 0.0) {
                        merged.push((wa, s));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        merged.extend_from_slice(&self.terms[i..]);
        merged.extend(other.terms[j..].iter().map(|&(w, b)| (w, b * c)));
        self.terms = merged;
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &PauliSum) -> PauliSum {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for &(wa, ca) in &self.terms {
            for &(wb, cb) in &other.terms {
                let (w, k) = wa.mul(wb);
                out.push((w, ca * cb * I_POWERS[k as usize]));
            }
        }
        normalize(&mut out);
        PauliSum { terms: out }
    }

    pub fn commutator(&self, other: &PauliSum) -> PauliSum {
        // Only anticommuting word pairs survive: [P,Q] = 2PQ when PQ = -QP.
        let mut out = Vec::new();
        for &(wa, ca) in &self.terms {
            for &(wb, cb) in &other.terms {
                let (w, k1) = wa.mul(wb);
                let (_, k2) = wb.mul(wa);
                if k1 != k2 {
                    out.push((w, 2.0 * ca * cb * I_POWERS[k1 as usize]));
                }
            }
        }
        normalize(&mut out);
        PauliSum { terms: out }
    }

    /// `i[self, other]`; Hermitian when both arguments are.
    pub fn i_commutator(&self, other: &PauliSum) -> PauliSum {
        self.commutator(other).scale(C64::new(0.0, 1.0))
    }

    /// Normalized Hilbert–Schmidt inner product `Tr(a† b) / 2^n`.
    pub fn inner(&self, other: &PauliSum) -> C64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = C64::new(0.0, 0.0);
        while i < self.terms.len() && j < other.terms.len() {
            match self.terms[i].0.cmp(&other.terms[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.terms[i].1.conj() * other.terms[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.iter().map(|t| t.1.norm()).fold(0.0, f64::max)
    }

    pub fn dagger(&self) -> PauliSum {
        PauliSum { terms: self.terms.iter().map(|&(w, c)| (w, c.conj())).collect() }
    }

    /// Drop terms with magnitude at or below `tol`.
    pub fn pruned(&self, tol: f64) -> PauliSum {
        PauliSum { terms: self.terms.iter().copied().filter(|t| t.1.norm() > tol).collect() }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.iter().all(|t| t.1.im.abs() <= tol)
    }

    /// Qubits touched by any term (bit mask).
    pub fn support(&self) -> u32 {
        self.terms.iter().fold(0, |m, t| m | t.0.support())
    }

    pub fn to_dense(&self, n: usize) -> Operator {
        let dim = 1usize << n;
        let mut m = Operator::zeros(dim, dim);
        for &(w, c) in &self.terms {
            accumulate_word(&mut m, w, c, n);
        }
        m
    }

    /// Expansion of a dense operator in the Pauli basis; `O(4^n · 2^n)`.
    pub fn from_dense(op: &Operator, n: usize) -> PauliSum {
        let dim = 1usize << n;
        let mut terms = Vec::new();
        for raw in 0..(1u64 << (2 * n)) {
            let w = PauliWord(raw as u32);
            let mut acc = C64::new(0.0, 0.0);
            // Tr(P† A) with P|c> = phase|c ^ x>.
            for col in 0..dim {
                let (row, ph) = word_action(w, col, n);
                acc += ph.conj() * op[(row, col)];
            }
            let c = acc / dim as f64;
            if c.norm() > 1e-15 {
                terms.push((w, c));
            }
        }
        PauliSum { terms }
    }

    /// Real parts of the coefficients; imaginary parts must be negligible.
    pub fn real_terms(&self) -> impl Iterator<Item = (PauliWord, f64)> + '_ {
        self.terms.iter().map(|&(w, c)| (w, c.re))
    }

    pub fn display(&self, n: usize) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        self.terms
            .iter()
            .map(|(w, c)| {
                if c.im == 0.0 {
                    format!("{:+.6}*{}", c.re, w.to_letters(n))
                } else {
                    format!("({:.6}{:+.6}i)*{}", c.re, c.im, w.to_letters(n))
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.terms.iter().map(|t| t.0.span()).max().unwrap_or(1).max(1);
        f.write_str(&self.display(n))
    }
}

impl Add for &PauliSum {
    type Output = PauliSum;
    fn add(self, rhs: &PauliSum) -> PauliSum {
        let mut out = self.clone();
        out.add_scaled(rhs, 1.0);
        out
    }
}

impl Sub for &PauliSum {
    type Output = PauliSum;
    fn sub(self, rhs: &PauliSum) -> PauliSum {
        let mut out = self.clone();
        out.add_scaled(rhs, -1.0);
        out
    }
}

impl Mul for &PauliSum {
    type Output = PauliSum;
    fn mul(self, rhs: &PauliSum) -> PauliSum {
        PauliSum::mul(self, rhs)
    }
}

impl Neg for &PauliSum {
    type Output = PauliSum;
    fn neg(self) -> PauliSum {
        self.scale(-1.0)
    }
}

fn normalize(terms: &mut Vec<(PauliWord, C64)>) {
    if terms.is_empty() {
        return;
    }
    terms.sort_unstable_by_key(|t| t.0);
    let mut out: Vec<(PauliWord, C64)> = Vec::with_capacity(terms.len());
    for &(w, c) in terms.iter() {
        match out.last_mut() {
            Some(last) if last.0 == w => last.1 += c,
            _ => out.push((w, c)),
        }
    }
    out.retain(|t| t.1 != C64::new(0.0, 0.0));
    *terms = out;
}

/// Action of a Pauli word on computational basis state `col`: returns the
/// output row and the phase. Qubit `q` is bit `n-1-q` of the basis index.
fn word_action(w: PauliWord, col: usize, n: usize) -> (usize, C64) {
    let mut row = col;
    let mut k = 0u32;
    let mut sign = false;
    for q in 0..n {
        let bit_pos = n - 1 - q;
        let bit = (col >> bit_pos) & 1;
        match w.letter(q) {
            Pauli::I => {}
            Pauli::X => row ^= 1 << bit_pos,
            Pauli::Y => {
                row ^= 1 << bit_pos;
                // Y|0> = i|1>, Y|1> = -i|0>
                k += if bit == 0 { 1 } else { 3 };
            }
            Pauli::Z => sign ^= bit == 1,
        }
    }
    let mut ph = I_POWERS[(k & 3) as usize];
    if sign {
        ph = -ph;
    }
    (row, ph)
}

pub(crate) fn accumulate_word(m: &mut Operator, w: PauliWord, c: C64, n: usize) {
    let dim = 1usize << n;
    for col in 0..dim {
        let (row, ph) = word_action(w, col, n);
        m[(row, col)] += c * ph;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_qubit_products_follow_su2() {
        let x = PauliWord::single(0, Pauli::X);
        let y = PauliWord::single(0, Pauli::Y);
        let z = PauliWord::single(0, Pauli::Z);
        assert_eq!(x.mul(y), (z, 1));
        assert_eq!(y.mul(x), (z, 3));
        assert_eq!(z.mul(x), (y, 1));
        assert_eq!(x.mul(x), (PauliWord::IDENTITY, 0));
    }

    #[test]
    fn commutator_of_x_and_y() {
        let x = PauliSum::single(PauliWord::single(0, Pauli::X), 1.0);
        let y = PauliSum::single(PauliWord::single(0, Pauli::Y), 1.0);
        let c = x.commutator(&y);
        assert_eq!(c.terms(), &[(PauliWord::single(0, Pauli::Z), C64::new(0.0, 2.0))]);
    }

    #[test]
    fn dense_round_trip_small() {
        let s = PauliSum::from_terms([
            (PauliWord::parse("XY").unwrap(), C64::new(0.5, 0.0)),
            (PauliWord::parse("ZI").unwrap(), C64::new(-1.0, 0.25)),
        ]);
        let back = PauliSum::from_dense(&s.to_dense(2), 2);
        assert_eq!(back.len(), 2);
        assert!((&back - &s).norm() < 1e-14);
    }

    #[test]
    fn parse_and_print() {
        let w = PauliWord::parse("xIz").unwrap();
        assert_eq!(w.to_letters(3), "XIZ");
        assert_eq!(w.weight(), 2);
        assert_eq!(w.support(), 0b101);
        assert!(PauliWord::parse("XQ").is_err());
    }

    #[test]
    fn disjoint_supports_commute_exactly() {
        let a = PauliSum::from_terms([
            (PauliWord::parse("XI").unwrap(), C64::new(0.3, 0.0)),
            (PauliWord::parse("YI").unwrap(), C64::new(-0.7, 0.0)),
        ]);
        let b = PauliSum::from_terms([(PauliWord::parse("IZ").unwrap(), C64::new(1.1, 0.0))]);
        assert!(a.commutator(&b).is_empty());
    }
}
