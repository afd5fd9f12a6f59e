//! Brute-force reference implementations. Nothing here calls into the
//! library's numeric code paths.
#![allow(dead_code)]

/// Plain row-major matrix as nested vectors.
pub type Rows = Vec<Vec<f64>>;

pub fn column_means(rows: &Rows) -> Vec<f64> {
    let q = rows[0].len();
    let mut mean = vec![0.0; q];
    for r in rows {
        for j in 0..q {
            mean[j] += r[j];
        }
    }
    mean.iter().map(|s| s / rows.len() as f64).collect()
}

pub fn center(rows: &Rows) -> Rows {
    let mean = column_means(rows);
    rows.iter().map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect()
}

/// AᵀA for a row-major A.
pub fn gram(rows: &Rows) -> Rows {
    let q = rows[0].len();
    let mut g = vec![vec![0.0; q]; q];
    for r in rows {
        for i in 0..q {
            for j in 0..q {
                g[i][j] += r[i] * r[j];
            }
        }
    }
    g
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Returns (eigenvalues, eigenvectors as columns) sorted by eigenvalue descending.
pub fn jacobi_eigen(sym: &Rows) -> (Vec<f64>, Rows) {
    let n = sym.len();
    let mut a = sym.clone();
    let mut v: Rows = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i][j] * a[i][j];
                }
            }
        }
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].partial_cmp(&a[x][x]).unwrap());
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    (values, vectors)
}

/// Projects centered rows onto the top-`z` eigenvectors of their covariance.
pub fn pca_project(centered: &Rows, z: usize) -> Rows {
    let (_, vecs) = jacobi_eigen(&gram(centered));
    centered
        .iter()
        .map(|r| (0..z).map(|c| (0..r.len()).map(|k| r[k] * vecs[k][c]).sum()).collect())
        .collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    s.sqrt()
}

/// Double loop over secondary × primary rows.
pub fn pairwise(secondary: &Rows, primary: &Rows) -> Rows {
    let mut out = vec![vec![0.0; primary.len()]; secondary.len()];
    for j in 0..secondary.len() {
        for k in 0..primary.len() {
            out[j][k] = dist(&secondary[j], &primary[k]);
        }
    }
    out
}

pub fn row_sums(m: &Rows) -> Vec<f64> {
    m.iter()
        .map(|r| {
            let mut s = 0.0;
            for x in r {
                s += x;
            }
            s
        })
        .collect()
}

pub fn mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

/// Insertion sort, stable.
pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for &x in v {
        let pos = out.iter().position(|&y| y > x).unwrap_or(out.len());
        out.insert(pos, x);
    }
    out
}

/// Stable argsort via insertion.
pub fn argsort(v: &[f64]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let pos = out.iter().position(|&j| v[j] > v[i]).unwrap_or(out.len());
        out.insert(pos, i);
    }
    out
}

/// Linear-interpolation quantile over a sorted slice.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Exhaustive ODS: (best threshold, best F) over `k / 100`, smallest k wins ties.
pub fn ods(preds: &[Vec<f64>], masks: &[Vec<f64>]) -> (f64, f64) {
    let mut best = (0.0, -1.0);
    for k in 1..100 {
        let t = k as f64 / 100.0;
        let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
        for (p, g) in preds.iter().zip(masks) {
            for i in 0..p.len() {
                let pos = p[i] >= t;
                let truth = g[i] > 0.5;
                if pos && truth {
                    tp += 1;
                } else if pos {
                    fp += 1;
                } else if truth {
                    fneg += 1;
                }
            }
        }
        let f = f_from_counts(tp, fp, fneg);
        if f > best.1 {
            best = (t, f);
        }
    }
    best
}

pub fn f_from_counts(tp: u64, fp: u64, fneg: u64) -> f64 {
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / (tp + fp) as f64;
    let r = tp as f64 / (tp + fneg) as f64;
    2.0 * p * r / (p + r)
}

/// Small deterministic generator for oracle inputs (SplitMix64).
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn rows(&mut self, n: usize, q: usize) -> Rows {
        (0..n).map(|_| (0..q).map(|_| self.uniform(-3.0, 3.0)).collect()).collect()
    }
}
