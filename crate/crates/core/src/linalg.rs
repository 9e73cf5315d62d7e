//! Dense LU with partial pivoting and a 1-norm condition estimate.
//!
//! Matrices are square and stored row-major. The factorisation is right-looking and
//! blocked; the trailing update goes through `matrixmultiply::dgemm`, which runs
//! single-threaded here so results do not depend on the machine's core count.

const BLOCK: usize = 64;

#[derive(Debug, Clone)]
pub struct LuFactorization {
    n: usize,
    lu: Vec<f64>,
    /// Row `i` of the factored matrix is row `perm[i]` of the input.
    perm: Vec<usize>,
    singular: bool,
    norm1: f64,
}

/// Maximum absolute column sum of a row-major `n x n` matrix.
pub fn norm1(n: usize, a: &[f64]) -> f64 {
    let mut sums = vec![0.0; n];
    for row in a.chunks_exact(n) {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v.abs();
        }
    }
    sums.into_iter().fold(0.0, f64::max)
}

pub fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    a.chunks_exact(n).map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect()
}

/// `||A x - b||_inf / ||b||_inf`, or the absolute residual when `b = 0`.
pub fn relative_residual(n: usize, a: &[f64], x: &[f64], b: &[f64]) -> f64 {
    let ax = matvec(n, a, x);
    let res = ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        res / scale
    } else {
        res
    }
}

impl LuFactorization {
    pub fn factor(n: usize, mut a: Vec<f64>) -> Self {
        assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
        let norm1 = norm1(n, &a);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut singular = false;

        let mut k0 = 0;
        while k0 < n {
            let kb = BLOCK.min(n - k0);
            let kend = k0 + kb;
            for k in k0..kend {
                let mut p = k;
                let mut best = a[k * n + k].abs();
                for i in k + 1..n {
                    let v = a[i * n + k].abs();
                    if v > best {
                        best = v;
                        p = i;
                    }
                }
                if p != k {
                    for j in 0..n {
                        a.swap(k * n + j, p * n + j);
                    }
                    perm.swap(k, p);
                }
                let pivot = a[k * n + k];
                if pivot == 0.0 {
                    singular = true;
                    continue;
                }
                let (upper, lower) = a.split_at_mut((k + 1) * n);
                let prow = &upper[k * n + k + 1..k * n + kend];
                for row in lower.chunks_exact_mut(n) {
                    let l = row[k] / pivot;
                    row[k] = l;
                    if l != 0.0 {
                        for (x, u) in row[k + 1..kend].iter_mut().zip(prow) {
                            *x -= l * u;
                        }
                    }
                }
            }
            if kend < n {
                // U12 = L11^{-1} A12
                for i in k0 + 1..kend {
                    let (upper, rest) = a.split_at_mut(i * n);
                    let row_i = &mut rest[..n];
                    for p in k0..i {
                        let l = row_i[p];
                        if l != 0.0 {
                            let row_p = &upper[p * n..(p + 1) * n];
                            for (x, u) in row_i[kend..].iter_mut().zip(&row_p[kend..]) {
                                *x -= l * u;
                            }
                        }
                    }
                }
                // A22 -= L21 U12
                let rows = n - kend;
                let cols = n - kend;
                let ptr = a.as_mut_ptr();
                // SAFETY: L21 (rows kend.., cols k0..kend), U12 (rows k0..kend, cols kend..)
                // and A22 (rows kend.., cols kend..) are disjoint regions of `a`.
                unsafe {
                    matrixmultiply::dgemm(
                        rows,
                        kb,
                        cols,
                        -1.0,
                        ptr.add(kend * n + k0),
                        n as isize,
                        1,
                        ptr.add(k0 * n + kend),
                        n as isize,
                        1,
                        1.0,
                        ptr.add(kend * n + kend),
                        n as isize,
                        1,
                    );
                }
            }
            k0 = kend;
        }
        Self { n, lu: a, perm, singular, norm1 }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        // U^T y = b, column-oriented over rows of U
        for i in 0..n {
            let row = &self.lu[i * n..(i + 1) * n];
            y[i] /= row[i];
            let yi = y[i];
            for (t, u) in y[i + 1..].iter_mut().zip(&row[i + 1..]) {
                *t -= u * yi;
            }
        }
        // L^T z = y
        for i in (0..n).rev() {
            let row = &self.lu[i * n..i * n + i];
            let zi = y[i];
            for (t, l) in y[..i].iter_mut().zip(row) {
                *t -= l * zi;
            }
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Estimate of `||A||_1 ||A^{-1}||_1` (Hager's method with Higham's extra test vector).
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if self.singular {
            return f64::INFINITY;
        }
        if n == 0 {
            return 0.0;
        }
        let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x);
            est = l1(&y);
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let alt_est = 2.0 * l1(&self.solve(&alt)) / (3.0 * n as f64);
        let inv_norm = est.max(alt_est);
        if inv_norm.is_finite() {
            self.norm1 * inv_norm
        } else {
            f64::INFINITY
        }
    }
}
