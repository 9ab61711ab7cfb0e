//! Packed, register-blocked matrix multiply.
//!
//! `C = op(A) · op(B)` where each operand is addressed through a (row stride,
//! column stride) pair, so transposed operands cost nothing beyond packing.
//! The summation order depends only on the operand shapes, never on the
//! data, which keeps training runs bitwise reproducible for a given build.
//! Fused multiply-add is used when the build target has it (it is enabled by
//! the workspace's `target-cpu=native`), so two builds for different targets
//! can differ in the last bits.

const MR: usize = 4;
const NR: usize = 16;
const KC: usize = 256;

/// Strided read-only view of a dense operand.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl View<'_> {
    #[inline(always)]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.rs + j * self.cs]
    }
}

/// Overwrites `c` (row-major, `a.rows × b.cols`) with `a · b`.
pub(crate) fn gemm(a: View<'_>, b: View<'_>, c: &mut [f64]) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    debug_assert_eq!(k, b.rows);
    debug_assert_eq!(c.len(), m * n);
    c.fill(0.0);
    if m == 0 || n == 0 || k == 0 {
        return;
    }

    let panels = n.div_ceil(NR);
    let mut apack = vec![0.0f64; KC * MR];
    let mut bpack = vec![0.0f64; KC * panels * NR];

    let mut k0 = 0;
    while k0 < k {
        let kc = KC.min(k - k0);

        for p in 0..panels {
            let dst = &mut bpack[p * kc * NR..(p + 1) * kc * NR];
            for kk in 0..kc {
                let row = &mut dst[kk * NR..kk * NR + NR];
                for (j, slot) in row.iter_mut().enumerate() {
                    let col = p * NR + j;
                    *slot = if col < n { b.at(k0 + kk, col) } else { 0.0 };
                }
            }
        }

        let mut i0 = 0;
        while i0 < m {
            let mr = MR.min(m - i0);
            for kk in 0..kc {
                for i in 0..MR {
                    apack[kk * MR + i] = if i < mr { a.at(i0 + i, k0 + kk) } else { 0.0 };
                }
            }
            for p in 0..panels {
                let acc = micro_kernel(&apack[..kc * MR], &bpack[p * kc * NR..(p + 1) * kc * NR]);
                let ncols = NR.min(n - p * NR);
                for (i, acc_row) in acc.iter().enumerate().take(mr) {
                    let out = &mut c[(i0 + i) * n + p * NR..(i0 + i) * n + p * NR + ncols];
                    for (o, v) in out.iter_mut().zip(acc_row.iter()) {
                        *o += *v;
                    }
                }
            }
            i0 += MR;
        }
        k0 += kc;
    }
}

#[cfg(target_feature = "fma")]
#[inline(always)]
fn madd(a: f64, b: f64, c: f64) -> f64 {
    a.mul_add(b, c)
}

// Without hardware FMA `mul_add` is a slow library call.
#[cfg(not(target_feature = "fma"))]
#[inline(always)]
fn madd(a: f64, b: f64, c: f64) -> f64 {
    c + a * b
}

#[inline(always)]
fn micro_kernel(apack: &[f64], bpack: &[f64]) -> [[f64; NR]; MR] {
    let mut acc = [[0.0f64; NR]; MR];
    for (arow, brow) in apack.chunks_exact(MR).zip(bpack.chunks_exact(NR)) {
        let brow: &[f64; NR] = brow.try_into().unwrap();
        for i in 0..MR {
            let av = arow[i];
            for j in 0..NR {
                acc[i][j] = madd(av, brow[j], acc[i][j]);
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: View<'_>, b: View<'_>) -> Vec<f64> {
        let mut c = vec![0.0; a.rows * b.cols];
        for i in 0..a.rows {
            for j in 0..b.cols {
                let mut s = 0.0;
                for k in 0..a.cols {
                    s += a.at(i, k) * b.at(k, j);
                }
                c[i * b.cols + j] = s;
            }
        }
        c
    }

    #[test]
    fn matches_naive_on_ragged_shapes() {
        for &(m, k, n) in &[
            (1, 1, 1),
            (3, 5, 7),
            (17, 300, 33),
            (4, 16, 16),
            (9, 513, 2),
        ] {
            let a: Vec<f64> = (0..m * k)
                .map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0)
                .collect();
            let b: Vec<f64> = (0..k * n)
                .map(|i| ((i * 53 % 97) as f64) / 40.0 - 1.2)
                .collect();
            let av = View {
                data: &a,
                rows: m,
                cols: k,
                rs: k,
                cs: 1,
            };
            let bv = View {
                data: &b,
                rows: k,
                cols: n,
                rs: n,
                cs: 1,
            };
            let mut c = vec![f64::NAN; m * n];
            gemm(av, bv, &mut c);
            for (x, y) in c.iter().zip(naive(av, bv)) {
                assert!(
                    (x - y).abs() < 1e-9 * (1.0 + y.abs()),
                    "{m}x{k}x{n}: {x} vs {y}"
                );
            }
        }
    }

    #[test]
    fn transposed_views() {
        let (m, k, n) = (6, 20, 5);
        // a stored as k x m, used transposed.
        let at: Vec<f64> = (0..m * k).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..n * k).map(|i| (i as f64).cos()).collect();
        let av = View {
            data: &at,
            rows: m,
            cols: k,
            rs: 1,
            cs: m,
        };
        let bv = View {
            data: &b,
            rows: k,
            cols: n,
            rs: 1,
            cs: k,
        };
        let mut c = vec![0.0; m * n];
        gemm(av, bv, &mut c);
        for (x, y) in c.iter().zip(naive(av, bv)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_inner_dimension_yields_zeros() {
        let av = View {
            data: &[],
            rows: 2,
            cols: 0,
            rs: 0,
            cs: 1,
        };
        let bv = View {
            data: &[],
            rows: 0,
            cols: 3,
            rs: 3,
            cs: 1,
        };
        let mut c = vec![1.0; 6];
        gemm(av, bv, &mut c);
        assert!(c.iter().all(|&x| x == 0.0));
    }
}
