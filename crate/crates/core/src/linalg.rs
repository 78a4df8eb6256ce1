//! Dense symmetric eigendecomposition and PCA.
//!
//! The eigensolver is Householder tridiagonalization followed by the implicit
//! QL algorithm, adapted from the EISPACK `tred2`/`tql2` routines.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
/// `vectors[k]` is the unit eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Decomposes a symmetric `n x n` matrix given as rows.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> Result<SymmetricEigen> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Empty("matrix".into()));
    }
    if matrix.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("matrix is not square".into()));
    }
    let mut v: Vec<Vec<f64>> = matrix.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;

    // tql2 leaves eigenvalues ascending with eigenvectors in columns of v.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<f64> = (0..n).map(|i| v[i][k]).collect();
            // Fix the sign so the largest-magnitude entry is positive.
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            col
        })
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d[..n].copy_from_slice(&v[n - 1][..n]);
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Degenerate("eigenvalue iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for i in (l + 2)..n {
                    d[i] -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Principal component model fitted to a set of row vectors.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-length principal axes, by descending explained variance.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl Pca {
    /// Fits `n_components` axes. Uses the covariance matrix when the
    /// dimension is at most the sample count, otherwise the Gram matrix.
    pub fn fit(rows: &[Vec<f64>], n_components: usize) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidInput("PCA needs at least two rows".into()));
        }
        let dim = rows[0].len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("PCA rows must share a positive dimension".into()));
        }
        if n_components == 0 {
            return Err(Error::InvalidInput("n_components must be positive".into()));
        }
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
            .collect();
        let denom = (n - 1) as f64;
        let total_variance: f64 =
            centered.iter().flat_map(|r| r.iter()).map(|x| x * x).sum::<f64>() / denom;

        let k = n_components.min(dim);
        let (explained, components) = if dim <= n {
            let mut cov = vec![vec![0.0; dim]; dim];
            for r in &centered {
                for i in 0..dim {
                    let ri = r[i];
                    if ri == 0.0 {
                        continue;
                    }
                    for j in i..dim {
                        cov[i][j] += ri * r[j];
                    }
                }
            }
            for i in 0..dim {
                for j in i..dim {
                    cov[i][j] /= denom;
                    cov[j][i] = cov[i][j];
                }
            }
            let eig = symmetric_eigen(&cov)?;
            (
                eig.values[..k].iter().map(|v| v.max(0.0)).collect::<Vec<_>>(),
                eig.vectors[..k].to_vec(),
            )
        } else {
            let mut gram = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i..n {
                    let g: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
                    gram[i][j] = g;
                    gram[j][i] = g;
                }
            }
            let eig = symmetric_eigen(&gram)?;
            let mut values = Vec::with_capacity(k);
            let mut axes = Vec::with_capacity(k);
            for c in 0..k.min(n) {
                let lambda = eig.values[c].max(0.0);
                values.push(lambda / denom);
                let mut axis = vec![0.0; dim];
                if lambda > 0.0 {
                    for (u, row) in eig.vectors[c].iter().zip(&centered) {
                        for (a, x) in axis.iter_mut().zip(row) {
                            *a += u * x;
                        }
                    }
                    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
                    axis.iter_mut().for_each(|x| *x /= norm);
                }
                axes.push(axis);
            }
            (values, axes)
        };
        Ok(Pca {
            mean,
            components,
            explained_variance: explained,
            total_variance,
        })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|axis| {
                axis.iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(a, (x, m))| a * (x - m))
                    .sum()
            })
            .collect()
    }

    /// Mean squared reconstruction error per row (sum over dimensions) on the
    /// fitting data, expressed through the unexplained variance.
    pub fn unexplained_variance(&self) -> f64 {
        (self.total_variance - self.explained_variance.iter().sum::<f64>()).max(0.0)
    }
}
