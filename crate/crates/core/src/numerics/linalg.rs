use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{NsoError, Result};

/// Diagonal jitter added to kernel matrices before factorization.
pub const DEFAULT_JITTER: f64 = 1e-8;

/// Relative singular-value cutoff used by [`lstsq`] to decide numerical rank.
const RANK_RTOL: f64 = 1e-12;

/// Lower-triangular `L` with `L L^T = A + jitter I`.
pub fn cholesky(a: ArrayView2<f64>, jitter: f64) -> Result<Array2<f64>> {
    let (n, m) = a.dim();
    if n != m {
        return Err(NsoError::Dimension(format!(
            "cholesky needs a square matrix, got {n}x{m}"
        )));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]] + jitter;
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(NsoError::Decomposition { pivot: j });
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Ok(l)
}

/// Minimum-norm least-squares solution of `A x = b`.
///
/// Householder QR reduces the problem to the small triangular factor, whose
/// SVD decides the numerical rank (cutoff `1e-12 * sigma_max`).
pub fn lstsq(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<Array1<f64>> {
    let rhs = b.insert_axis(ndarray::Axis(1));
    Ok(lstsq_many(a, rhs)?.column(0).to_owned())
}

/// [`lstsq`] for several right-hand sides (the columns of `b`) sharing one
/// factorization. Returns one solution column per right-hand side.
pub fn lstsq_many(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(NsoError::Dimension(format!(
            "lstsq needs a non-empty matrix, got {m}x{n}"
        )));
    }
    if b.nrows() != m {
        return Err(NsoError::Dimension(format!(
            "lstsq: matrix has {m} rows but right-hand side has {}",
            b.nrows()
        )));
    }
    let nrhs = b.ncols();
    let mat = DMatrix::from_fn(m, n, |i, j| a[[i, j]]);
    let mut rhs = DMatrix::from_fn(m, nrhs, |i, j| b[[i, j]]);

    let (r, qtb) = if m > n {
        let qr = mat.qr();
        qr.q_tr_mul(&mut rhs);
        (qr.r(), rhs.rows(0, n).into_owned())
    } else {
        (mat, rhs)
    };

    let svd = r.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let cutoff = RANK_RTOL * smax;

    let mut x = Array2::<f64>::zeros((n, nrhs));
    for (k, &s) in sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        for c in 0..nrhs {
            let coef = u.column(k).dot(&qtb.column(c)) / s;
            for j in 0..n {
                x[[j, c]] += v_t[(k, j)] * coef;
            }
        }
    }
    Ok(x)
}

/// `C = alpha * A B + beta * C` on strided row-major-or-otherwise slices.
///
/// `A` is `m x k`, `B` is `k x n`, `C` is `m x n`; each operand is described
/// by its row and column strides in elements. Offsets are bounds-checked
/// before delegating to the blocked kernel.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
    csc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |r: usize, c: usize, rs: usize, cs: usize| (r - 1) * rs + (c - 1) * cs + 1;
    assert!(span(m, n, rsc, csc) <= c.len(), "gemm: C out of bounds");
    if k == 0 {
        for i in 0..m {
            for j in 0..n {
                let idx = i * rsc + j * csc;
                c[idx] = if beta == 0.0 { 0.0 } else { beta * c[idx] };
            }
        }
        return;
    }
    assert!(span(m, k, rsa, csa) <= a.len(), "gemm: A out of bounds");
    assert!(span(k, n, rsb, csb) <= b.len(), "gemm: B out of bounds");
    // SAFETY: every index touched is < len by the span checks above, and the
    // output slice is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}
