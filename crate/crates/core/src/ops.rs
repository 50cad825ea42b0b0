//! Dense operator algebra on `n`-qubit registers.
//!
//! Networks of interest stay at or below seven qubits, so every operator is a
//! plain `DMatrix<Complex64>` of size at most 128×128.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::pauli::{accumulate_word, Pauli, PauliString};

pub type Operator = DMatrix<C64>;

/// Relative Hermiticity tolerance on the max-abs scale.
pub const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-8;
const BRANCH_MARGIN: f64 = 1e-6;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_matrix(p: Pauli) -> Matrix2<C64> {
    let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
    match p {
        Pauli::I => Matrix2::new(l, o, o, l),
        Pauli::X => Matrix2::new(o, l, l, o),
        Pauli::Y => Matrix2::new(o, -i, i, o),
        Pauli::Z => Matrix2::new(l, o, o, -l),
    }
}

pub fn identity(n: usize) -> Operator {
    Operator::identity(1 << n, 1 << n)
}

pub fn dim_of(n: usize) -> usize {
    1 << n
}

/// Qubit count for a `2^n`-dimensional operator.
pub fn qubits_of(op: &Operator) -> usize {
    op.nrows().trailing_zeros() as usize
}

/// Kronecker product of per-qubit 2×2 factors, qubit 0 leftmost.
pub fn kron_all(factors: &[Matrix2<C64>]) -> Operator {
    let mut out = Operator::from_element(1, 1, c(1.0, 0.0));
    for f in factors {
        let fd = DMatrix::from_fn(2, 2, |r, k| f[(r, k)]);
        out = out.kronecker(&fd);
    }
    out
}

/// `coefficient · σ_{l1} ⊗ … ⊗ σ_{ln}` built directly from the tensor definition.
pub fn build_pauli(p: &PauliString, n: usize) -> Result<Operator> {
    if n == 0 {
        return Err(Error::LengthMismatch { expected: 1, actual: 0 });
    }
    if p.letters.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: p.letters.len() });
    }
    let factors: Vec<_> = p.letters.iter().map(|&l| pauli_matrix(l)).collect();
    Ok(kron_all(&factors) * p.coefficient)
}

/// `σ_p` acting on `qubit` of an `n`-qubit register.
pub fn single_site(p: Pauli, qubit: usize, n: usize) -> Operator {
    let factors: Vec<_> = (0..n)
        .map(|q| if q == qubit { pauli_matrix(p) } else { pauli_matrix(Pauli::I) })
        .collect();
    kron_all(&factors)
}

/// `Σ_i σ_p^i`.
pub fn collective(p: Pauli, n: usize) -> Operator {
    let dim = dim_of(n);
    let mut m = Operator::zeros(dim, dim);
    for q in 0..n {
        accumulate_word(&mut m, crate::pauli::PauliWord::single(q, p), c(1.0, 0.0), n);
    }
    m
}

/// `U^{⊗n}` for a single-qubit matrix `u`.
pub fn tensor_power(u: &Matrix2<C64>, n: usize) -> Operator {
    kron_all(&vec![*u; n])
}

fn check_dims(a: &Operator, b: &Operator) -> Result<()> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimMismatch { left: a.nrows(), right: b.nrows() });
    }
    Ok(())
}

pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    check_dims(a, b)?;
    Ok(a * b - b * a)
}

/// `Tr(a† b) / dim`, so Pauli strings are orthonormal at any register size.
pub fn hs_inner(a: &Operator, b: &Operator) -> Result<C64> {
    check_dims(a, b)?;
    let s: C64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    Ok(s / a.nrows() as f64)
}

/// Normalized Hilbert–Schmidt norm `sqrt(Tr(a†a)/dim)`.
pub fn hs_norm(a: &Operator) -> f64 {
    (a.iter().map(|x| x.norm_sqr()).sum::<f64>() / a.nrows() as f64).sqrt()
}

pub fn max_abs(a: &Operator) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn hermitian_deviation(a: &Operator) -> f64 {
    let n = a.nrows();
    let mut dev = 0.0f64;
    for r in 0..n {
        for k in r..n {
            dev = dev.max((a[(r, k)] - a[(k, r)].conj()).norm());
        }
    }
    dev
}

pub fn is_hermitian(a: &Operator) -> bool {
    hermitian_deviation(a) <= HERMITIAN_TOL * max_abs(a)
}

pub fn hermitian_part(a: &Operator) -> Operator {
    (a + a.adjoint()) * c(0.5, 0.0)
}

pub fn unitary_deviation(u: &Operator) -> f64 {
    let p = u.adjoint() * u;
    let id = Operator::identity(u.nrows(), u.ncols());
    max_abs(&(p - id))
}

/// Eigendecomposition of a Hermitian operator after symmetrization.
pub fn eigh(h: &Operator) -> Result<(Vec<f64>, Operator)> {
    let dev = hermitian_deviation(h);
    if dev > HERMITIAN_TOL * max_abs(h) {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(h));
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// `exp(-i h t)` for Hermitian `h`, via eigendecomposition.
pub fn expm_skew(h: &Operator, t: f64) -> Result<Operator> {
    let (vals, vecs) = eigh(h)?;
    let phases: Vec<C64> = vals.iter().map(|&l| C64::from_polar(1.0, -l * t)).collect();
    let mut scaled = vecs.clone();
    for (k, ph) in phases.iter().enumerate() {
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= ph;
        }
    }
    Ok(scaled * vecs.adjoint())
}

/// Hermitian `H` with `exp(-iH) = u` and eigenphases in `(-π, π)`.
pub fn logm_unitary(u: &Operator) -> Result<Operator> {
    let dev = unitary_deviation(u);
    if dev > UNITARY_TOL {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let (lambdas, q) = unitary_eigen(u)?;
    let mut thetas = Vec::with_capacity(lambdas.len());
    for l in &lambdas {
        let arg = l.arg();
        if std::f64::consts::PI - arg.abs() < BRANCH_MARGIN {
            return Err(Error::BranchAmbiguous { phase: arg });
        }
        thetas.push(-arg);
    }
    let mut scaled = q.clone();
    for (k, th) in thetas.iter().enumerate() {
        for r in 0..scaled.nrows() {
            scaled[(r, k)] *= th;
        }
    }
    Ok(hermitian_part(&(scaled * q.adjoint())))
}

/// Eigenvalues and unitary eigenvectors of a (numerically) unitary matrix.
///
/// Diagonalizes the Hermitian `Re U + c·Im U`, whose eigenvectors are those
/// of `U` unless two eigenphases collide under `cos θ + c sin θ`. A residual
/// check catches that case and falls back to the complex Schur form.
pub fn unitary_eigen(u: &Operator) -> Result<(Vec<C64>, Operator)> {
    const C: f64 = 0.577_215_664_901_532_9;
    const TOL: f64 = 1e-9;
    let ud = u.adjoint();
    let re = (u + &ud).scale(0.5);
    let im = (u - &ud) * c(0.0, -0.5);
    if let Ok((_, q)) = eigh(&(re + im.scale(C))) {
        let uq = u * &q;
        let lambda: Vec<C64> = (0..q.ncols()).map(|a| q.column(a).dotc(&uq.column(a))).collect();
        let mut resid = uq;
        for (a, l) in lambda.iter().enumerate() {
            let col = q.column(a) * *l;
            let mut r = resid.column_mut(a);
            r -= col;
        }
        if max_abs(&resid) <= TOL {
            return Ok((lambda, q));
        }
    }
    schur_eigen(u)
}

fn schur_eigen(u: &Operator) -> Result<(Vec<C64>, Operator)> {
    let schur = nalgebra::Schur::new(u.clone());
    let (q, t) = schur.unpack();
    let n = t.nrows();
    let mut off = 0.0f64;
    for r in 0..n {
        for k in (r + 1)..n {
            off = off.max(t[(r, k)].norm());
        }
    }
    if off > 1e-7 {
        return Err(Error::NotUnitary { deviation: off });
    }
    Ok(((0..n).map(|k| t[(k, k)]).collect(), q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::PauliString;

    fn ps(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_x() {
        let x = build_pauli(&ps("X"), 1).unwrap();
        assert_eq!(x[(0, 1)], c(1.0, 0.0));
        assert_eq!(x[(1, 0)], c(1.0, 0.0));
        assert_eq!(x[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn zz_is_diagonal() {
        let zz = build_pauli(&ps("ZZ"), 2).unwrap();
        let expect = [1.0, -1.0, -1.0, 1.0];
        for (k, e) in expect.iter().enumerate() {
            assert_eq!(zz[(k, k)], c(*e, 0.0));
        }
        assert_eq!(max_abs(&(zz.clone() - Operator::from_diagonal(&zz.diagonal()))), 0.0);
    }

    #[test]
    fn xy_traceless_and_involutive() {
        let xy = build_pauli(&ps("XY"), 2).unwrap();
        assert!(xy.trace().norm() < 1e-15);
        assert!(max_abs(&(&xy * &xy - identity(2))) < 1e-15);
    }

    #[test]
    fn length_mismatch_reports_both_lengths() {
        match build_pauli(&ps("XY"), 3) {
            Err(Error::LengthMismatch { expected: 3, actual: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn xy_commutator_is_2iz() {
        let x = build_pauli(&ps("X"), 1).unwrap();
        let y = build_pauli(&ps("Y"), 1).unwrap();
        let z = build_pauli(&ps("Z"), 1).unwrap();
        let cm = commutator(&x, &y).unwrap();
        assert!(max_abs(&(cm - z * c(0.0, 2.0))) < 1e-15);
        assert!(max_abs(&commutator(&x, &x).unwrap()) == 0.0);
    }

    #[test]
    fn collective_x_with_detunings() {
        // [ΣX, δ1 Z1 + δ2 Z2] with δ = (1, 2) equals -2i(Y1 + 2 Y2).
        let sx = collective(Pauli::X, 2);
        let dz = single_site(Pauli::Z, 0, 2) + single_site(Pauli::Z, 1, 2) * c(2.0, 0.0);
        let expect = (single_site(Pauli::Y, 0, 2) + single_site(Pauli::Y, 1, 2) * c(2.0, 0.0)) * c(0.0, -2.0);
        assert!(max_abs(&(commutator(&sx, &dz).unwrap() - expect)) < 1e-14);
    }

    #[test]
    fn hs_inner_normalization() {
        let x = build_pauli(&ps("X"), 1).unwrap();
        let y = build_pauli(&ps("Y"), 1).unwrap();
        assert!((hs_inner(&x, &x).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(hs_inner(&x, &y).unwrap().norm() < 1e-15);
        let zz = build_pauli(&ps("ZZI"), 3).unwrap();
        assert!((hs_inner(&zz, &zz).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!(hs_inner(&x, &zz).is_err());
    }

    #[test]
    fn half_pi_pulse_population() {
        let h = build_pauli(&ps("X"), 1).unwrap() * c(std::f64::consts::FRAC_PI_4, 0.0);
        let u = expm_skew(&h, 1.0).unwrap();
        assert!((u[(0, 0)].norm_sqr() - 0.5).abs() < 1e-14);
        assert!(unitary_deviation(&u) < 1e-12);
    }

    #[test]
    fn zero_generator_gives_identity() {
        let u = expm_skew(&Operator::zeros(4, 4), 3.0).unwrap();
        assert!(max_abs(&(u - identity(2))) < 1e-15);
    }

    #[test]
    fn exp_inverse_pair() {
        let z = build_pauli(&ps("Z"), 1).unwrap();
        let p = expm_skew(&z, 0.7).unwrap() * expm_skew(&z, -0.7).unwrap();
        assert!(max_abs(&(p - identity(1))) < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut a = Operator::zeros(2, 2);
        a[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(expm_skew(&a, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn logm_of_identity_and_diagonal() {
        assert!(max_abs(&logm_unitary(&identity(2)).unwrap()) < 1e-14);
        let z = build_pauli(&ps("Z"), 1).unwrap();
        let u = expm_skew(&(z.clone() * c(0.3, 0.0)), 1.0).unwrap();
        let h = logm_unitary(&u).unwrap();
        assert!(max_abs(&(h - z * c(0.3, 0.0))) < 1e-13);
    }

    #[test]
    fn logm_branch_ambiguity_is_explicit() {
        let z = build_pauli(&ps("Z"), 1).unwrap();
        let u = expm_skew(&z, std::f64::consts::PI).unwrap();
        let err = logm_unitary(&u).unwrap_err();
        assert!(matches!(err, Error::BranchAmbiguous { .. }));
        assert!(err.to_string().contains("shorter time"));
    }
}
