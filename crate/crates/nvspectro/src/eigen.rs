//! Small Hermitian eigensolver used for the spin Hamiltonian and the ZFS
//! tensor principal axes.
//!
//! Cyclic complex Jacobi on a 3x3 Hermitian matrix. Each rotation exactly
//! zeroes one off-diagonal pair; off-diagonal mass decays quadratically, so
//! a handful of sweeps reaches machine precision. The contract is the
//! residual bound `|H v - lambda v| <= 1e-9 |H|`, not the algorithm.

use nalgebra::Matrix3;
use num_complex::Complex64;

const MAX_SWEEPS: usize = 50;

/// Eigenvalues (ascending) and matching unit eigenvectors (columns) of a
/// Hermitian matrix. The input is used as given; callers validate
/// Hermiticity to their own tolerance first.
pub fn hermitian_eigen_3x3(h: &Matrix3<Complex64>) -> ([f64; 3], Matrix3<Complex64>) {
    let mut a = *h;
    // Work on the explicitly Hermitized matrix so roundoff in the input
    // cannot push the iteration off the Hermitian manifold.
    for p in 0..3 {
        a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
        for q in (p + 1)..3 {
            let m = 0.5 * (a[(p, q)] + a[(q, p)].conj());
            a[(p, q)] = m;
            a[(q, p)] = m.conj();
        }
    }

    let scale = frobenius(&a).max(f64::MIN_POSITIVE);
    let tol = f64::EPSILON * scale;
    let mut q_acc = Matrix3::<Complex64>::identity();

    for _ in 0..MAX_SWEEPS {
        if off_diagonal(&a) <= tol {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            rotate(&mut a, &mut q_acc, p, q);
        }
    }

    let mut vals = [a[(0, 0)].re, a[(1, 1)].re, a[(2, 2)].re];
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    vals = [vals[order[0]], vals[order[1]], vals[order[2]]];
    let mut vecs = Matrix3::<Complex64>::zeros();
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &q_acc.column(src).into_owned());
    }
    (vals, vecs)
}

/// One Jacobi rotation annihilating the (p, q) element of `a`,
/// accumulated into `q_acc`.
fn rotate(a: &mut Matrix3<Complex64>, q_acc: &mut Matrix3<Complex64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    let m = apq.norm();
    if m == 0.0 {
        return;
    }
    // Phase that makes the off-diagonal element real, then a real Jacobi
    // angle for the resulting symmetric 2x2 block.
    let phase = apq / m;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let tau = (aqq - app) / (2.0 * m);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // Column-p/q entries of the combined unitary (phase x rotation).
    let vpp = phase * c;
    let vpq = phase * s;
    let vqp = Complex64::new(-s, 0.0);
    let vqq = Complex64::new(c, 0.0);

    for k in 0..3 {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = akp * vpp + akq * vqp;
        let new_kq = akp * vpq + akq * vqq;
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp.conj();
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq.conj();
    }
    a[(p, p)] = Complex64::new(app - t * m, 0.0);
    a[(q, q)] = Complex64::new(aqq + t * m, 0.0);
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);

    for k in 0..3 {
        let qkp = q_acc[(k, p)];
        let qkq = q_acc[(k, q)];
        q_acc[(k, p)] = qkp * vpp + qkq * vqp;
        q_acc[(k, q)] = qkp * vpq + qkq * vqq;
    }
}

fn off_diagonal(a: &Matrix3<Complex64>) -> f64 {
    (a[(0, 1)].norm_sqr() + a[(0, 2)].norm_sqr() + a[(1, 2)].norm_sqr()).sqrt()
}

pub(crate) fn frobenius(a: &Matrix3<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
