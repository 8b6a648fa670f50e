/// `C = alpha * A B + beta * C` for row/column-strided `f64` matrices.
///
/// `A` is `m x k`, `B` is `k x n`, `C` is `m x n`; strides are in elements.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa, "gemm: A too short");
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb, "gemm: B too short");
    }
    assert!(c.len() > (m - 1) * rsc + (n - 1), "gemm: C too short");
    // SAFETY: the asserts above bound every index the kernel touches.
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
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transposed_product() {
        // A = [[1,2],[3,4]] stored row-major; compute A^T A
        let a = [1.0, 2.0, 3.0, 4.0];
        let mut c = [0.0; 4];
        gemm(2, 2, 2, 1.0, &a, (1, 2), &a, (2, 1), 0.0, &mut c, 2);
        assert_eq!(c, [10.0, 14.0, 14.0, 20.0]);
    }
}
