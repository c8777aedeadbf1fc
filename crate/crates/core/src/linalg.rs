//! Small dense linear algebra on row-major square matrices.

use crate::scalar::Scalar;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is row-major `n x n`. Returns `None` when a pivot vanishes.
pub fn solve<T: Scalar>(a: &[T], b: &[T]) -> Option<Vec<T>> {
    let n = b.len();
    assert_eq!(a.len(), n * n, "matrix/vector size mismatch");
    let mut m = a.to_vec();
    let mut x = b.to_vec();

    for col in 0..n {
        let (pivot, pivot_abs) =
            (col..n)
                .map(|r| (r, m[r * n + col].abs()))
                .fold(
                    (col, T::zero()),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pivot_abs <= T::min_positive_value() {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                m.swap(col * n + j, pivot * n + j);
            }
            x.swap(col, pivot);
        }
        let diag = m[col * n + col];
        for r in (col + 1)..n {
            let factor = m[r * n + col] / diag;
            if factor == T::zero() {
                continue;
            }
            for j in col..n {
                let v = m[col * n + j];
                m[r * n + j] -= factor * v;
            }
            let xv = x[col];
            x[r] -= factor * xv;
        }
    }

    for row in (0..n).rev() {
        let mut acc = x[row];
        for j in (row + 1)..n {
            acc -= m[row * n + j] * x[j];
        }
        x[row] = acc / m[row * n + row];
    }
    Some(x)
}

pub fn mat_vec<T: Scalar>(a: &[T], x: &[T]) -> Vec<T> {
    let n = x.len();
    (0..a.len() / n)
        .map(|r| {
            a[r * n..(r + 1) * n]
                .iter()
                .zip(x)
                .map(|(&m, &v)| m * v)
                .sum()
        })
        .collect()
}

pub fn mat_t_vec<T: Scalar>(a: &[T], x: &[T]) -> Vec<T> {
    let rows = x.len();
    let cols = a.len() / rows;
    let mut out = vec![T::zero(); cols];
    for (r, &xr) in x.iter().enumerate() {
        for (c, o) in out.iter_mut().enumerate() {
            *o += a[r * cols + c] * xr;
        }
    }
    out
}

pub fn norm2<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

/// Largest singular value of a row-major `n x n` matrix by power iteration
/// on `aᵀa`, stopping once the estimate changes by less than `tol`.
pub fn spectral_norm<T: Scalar>(a: &[T], n: usize, tol: T, max_iters: usize) -> T {
    // A deterministic start vector with components in every direction.
    let mut v: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.37) * T::from_count(i) + T::lit(0.011) * T::from_count(i * i))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut sigma = T::zero();
    for _ in 0..max_iters {
        let av = mat_vec(a, &v);
        let w = mat_t_vec(a, &av);
        let nw = norm2(&w);
        if nw <= T::min_positive_value() {
            return T::zero();
        }
        let next = nw.sqrt();
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - sigma).abs() < tol {
            return next;
        }
        sigma = next;
    }
    sigma
}
