//! Solvers for `(I - λP) v = r`.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::numeric::{PolicySystem, Rational};

/// Above this many states the float backend switches from dense LU to
/// Gauss-Seidel sweeps over the sparse rows.
pub const DENSE_LIMIT: usize = 400;

const GS_MAX_SWEEPS: usize = 1_000_000;

pub(crate) fn solve_f64(system: &PolicySystem<f64>) -> Result<Vec<f64>> {
    if system.len() <= DENSE_LIMIT {
        solve_dense_f64(system)
    } else {
        solve_gauss_seidel(system)
    }
}

pub(crate) fn solve_dense_f64(system: &PolicySystem<f64>) -> Result<Vec<f64>> {
    let n = system.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    for (s, row) in system.rows.iter().enumerate() {
        for &(t, p) in row {
            a[(s, t)] -= system.discount * p;
        }
    }
    let b = DVector::from_column_slice(&system.rhs);
    let x = a.lu().solve(&b).ok_or(Error::Singular)?;
    Ok(x.iter().copied().collect())
}

/// Iterates until a full sweep changes no value by more than a few ulps.
pub(crate) fn solve_gauss_seidel(system: &PolicySystem<f64>) -> Result<Vec<f64>> {
    let n = system.len();
    let lambda = system.discount;
    let mut v = vec![0.0; n];
    for _ in 0..GS_MAX_SWEEPS {
        let mut change: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for s in 0..n {
            let mut acc = system.rhs[s];
            let mut diag = 1.0;
            for &(t, p) in &system.rows[s] {
                if t == s {
                    diag -= lambda * p;
                } else {
                    acc += lambda * p * v[t];
                }
            }
            let next = acc / diag;
            change = change.max((next - v[s]).abs());
            scale = scale.max(next.abs());
            v[s] = next;
        }
        if change <= 4.0 * f64::EPSILON * scale {
            return Ok(v);
        }
    }
    Err(Error::Invariant(
        "Gauss-Seidel sweeps failed to settle".into(),
    ))
}

/// Fraction-free (Bareiss) elimination on the integer-scaled system.
pub(crate) fn solve_bareiss(system: &PolicySystem<Rational>) -> Result<Vec<Rational>> {
    let n = system.len();
    // Augmented integer matrix, each row scaled by the lcm of its denominators.
    let mut m: Vec<Vec<BigInt>> = Vec::with_capacity(n);
    for s in 0..n {
        let mut row = vec![Rational::zero(); n + 1];
        row[s] = Rational::one();
        for (t, p) in &system.rows[s] {
            row[*t] -= &system.discount * p;
        }
        row[n] = system.rhs[s].clone();
        let lcm = row
            .iter()
            .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        m.push(
            row.into_iter()
                .map(|x| (x * Rational::from_integer(lcm.clone())).to_integer())
                .collect(),
        );
    }

    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            let swap = (k + 1..n).find(|&i| !m[i][k].is_zero()).ok_or(Error::Singular)?;
            m.swap(k, swap);
        }
        let (upper, lower) = m.split_at_mut(k + 1);
        let pivot_row = &upper[k];
        for row in lower.iter_mut() {
            let factor = row[k].clone();
            for j in k + 1..=n {
                let t = &row[j] * &pivot_row[k] - &factor * &pivot_row[j];
                row[j] = t / &prev;
            }
            row[k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }

    let mut x = vec![Rational::zero(); n];
    for i in (0..n).rev() {
        let mut acc = Rational::from_integer(m[i][n].clone());
        for j in i + 1..n {
            if !m[i][j].is_zero() {
                acc -= Rational::from_integer(m[i][j].clone()) * &x[j];
            }
        }
        let d = &m[i][i];
        if d.is_zero() {
            return Err(Error::Singular);
        }
        x[i] = acc / Rational::from_integer(d.clone());
        debug_assert!(!x[i].denom().is_negative());
    }
    Ok(x)
}
