//! Strided matrix views over flat buffers, dispatched to `matrixmultiply`.

/// A read-only strided matrix view: element `(r, c)` lives at
/// `data[offset + r * rs + c * cs]`.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub offset: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> View<'a> {
    pub fn new(data: &'a [f64], offset: usize, rs: usize, cs: usize) -> Self {
        View {
            data,
            offset,
            rs,
            cs,
        }
    }

    /// Row-major `[_, cols]` matrix.
    pub fn rm(data: &'a [f64], cols: usize) -> Self {
        View::new(data, 0, cols, 1)
    }

    /// Transposed view of a row-major `[_, cols]` matrix.
    pub fn tr(data: &'a [f64], cols: usize) -> Self {
        View::new(data, 0, 1, cols)
    }

    fn last_index(&self, rows: usize, cols: usize) -> usize {
        self.offset + (rows - 1) * self.rs + (cols - 1) * self.cs
    }
}

/// Mutable strided destination.
pub(crate) struct ViewMut<'a> {
    pub data: &'a mut [f64],
    pub offset: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> ViewMut<'a> {
    pub fn new(data: &'a mut [f64], offset: usize, rs: usize, cs: usize) -> Self {
        ViewMut {
            data,
            offset,
            rs,
            cs,
        }
    }

    pub fn rm(data: &'a mut [f64], cols: usize) -> Self {
        ViewMut::new(data, 0, cols, 1)
    }
}

/// `c = alpha * a[m,k] * b[k,n] + beta * c[m,n]`.
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: View<'_>,
    b: View<'_>,
    beta: f64,
    c: ViewMut<'_>,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.offset + (m - 1) * c.rs + (n - 1) * c.cs < c.data.len());
    if k == 0 {
        for r in 0..m {
            for col in 0..n {
                let idx = c.offset + r * c.rs + col * c.cs;
                c.data[idx] *= beta;
            }
        }
        return;
    }
    assert!(a.last_index(m, k) < a.data.len());
    assert!(b.last_index(k, n) < b.data.len());
    // SAFETY: bounds of all three strided views were checked above and
    // `c` is borrowed mutably, so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.offset),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr().add(c.offset),
            c.rs as isize,
            c.cs as isize,
        );
    }
}
