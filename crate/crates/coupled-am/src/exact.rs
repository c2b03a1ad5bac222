//! Exact rational linear algebra for desk-scale generator matrices: rank and
//! null-space bases without floating-point drift.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

fn to_rational(m: &[Vec<i64>]) -> Vec<Vec<BigRational>> {
    m.iter()
        .map(|row| {
            row.iter()
                .map(|&v| BigRational::from_integer(BigInt::from(v)))
                .collect()
        })
        .collect()
}

/// Row-reduces in place; returns the pivot column of each pivot row.
fn row_reduce(a: &mut [Vec<BigRational>], cols: usize) -> Vec<usize> {
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = a[r][c].clone();
        for v in a[r].iter_mut() {
            *v /= inv.clone();
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let factor = a[i][c].clone();
                let pivot_row = a[r].clone();
                for (aij, arj) in a[i].iter_mut().zip(&pivot_row) {
                    *aij -= factor.clone() * arj.clone();
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    pivots
}

/// Rank over the rationals.
pub fn rank(matrix: &[Vec<i64>]) -> usize {
    if matrix.is_empty() {
        return 0;
    }
    let cols = matrix[0].len();
    let mut a = to_rational(matrix);
    row_reduce(&mut a, cols).len()
}

/// Integer basis of the right null space `{v : M v = 0}`. Each basis vector is
/// scaled to integer entries with content 1.
pub fn null_space_basis(matrix: &[Vec<i64>]) -> Vec<Vec<i64>> {
    if matrix.is_empty() {
        return Vec::new();
    }
    let cols = matrix[0].len();
    let mut a = to_rational(matrix);
    let pivots = row_reduce(&mut a, cols);
    let pivot_set: std::collections::HashSet<usize> = pivots.iter().copied().collect();
    let free: Vec<usize> = (0..cols).filter(|c| !pivot_set.contains(c)).collect();

    let mut basis = Vec::with_capacity(free.len());
    for &fc in &free {
        // v[fc] = 1; pivot variables read off the reduced rows.
        let mut v = vec![BigRational::zero(); cols];
        v[fc] = BigRational::one();
        for (row, &pc) in pivots.iter().enumerate() {
            v[pc] = -a[row][fc].clone();
        }
        basis.push(scale_to_integers(&v));
    }
    basis
}

fn scale_to_integers(v: &[BigRational]) -> Vec<i64> {
    let mut lcm = BigInt::one();
    for x in v {
        if !x.is_zero() {
            lcm = num_integer::lcm(lcm, x.denom().abs());
        }
    }
    let ints: Vec<BigInt> = v.iter().map(|x| (x * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let mut gcd = BigInt::zero();
    for x in &ints {
        gcd = num_integer::gcd(gcd, x.abs());
    }
    if gcd.is_zero() {
        gcd = BigInt::one();
    }
    ints.iter()
        .map(|x| {
            let reduced = x / &gcd;
            i64::try_from(&reduced).expect("null-space entries fit i64 at desk scale")
        })
        .collect()
}
