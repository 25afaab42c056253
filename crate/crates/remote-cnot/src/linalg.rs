//! Small dense complex-matrix helpers (row-major `Vec<Complex64>`).

use num_complex::Complex64;

pub(crate) const C0: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const C1: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn identity(n: usize) -> Vec<Complex64> {
    let mut m = vec![C0; n * n];
    for i in 0..n {
        m[i * n + i] = C1;
    }
    m
}

pub(crate) fn matmul(n: usize, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![C0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == C0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub(crate) fn adjoint(n: usize, a: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![C0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = a[i * n + j].conj();
        }
    }
    out
}

pub(crate) fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `out += weight * |u><v|` accumulated into an n x n matrix.
pub(crate) fn add_outer(
    n: usize,
    out: &mut [Complex64],
    weight: Complex64,
    u: &[Complex64],
    v: &[Complex64],
) {
    for (i, ui) in u.iter().enumerate() {
        if *ui == C0 {
            continue;
        }
        for (j, vj) in v.iter().enumerate() {
            out[i * n + j] += weight * ui * vj.conj();
        }
    }
}

/// Kronecker product with the first factor major: index = i_a * nb + i_b.
pub(crate) fn kron(na: usize, a: &[Complex64], nb: usize, b: &[Complex64]) -> Vec<Complex64> {
    let n = na * nb;
    let mut out = vec![C0; n * n];
    for ra in 0..na {
        for ca in 0..na {
            let f = a[ra * na + ca];
            if f == C0 {
                continue;
            }
            for rb in 0..nb {
                for cb in 0..nb {
                    out[(ra * nb + rb) * n + (ca * nb + cb)] = f * b[rb * nb + cb];
                }
            }
        }
    }
    out
}

pub(crate) fn add_assign(out: &mut [Complex64], other: &[Complex64]) {
    for (o, x) in out.iter_mut().zip(other.iter()) {
        *o += x;
    }
}
