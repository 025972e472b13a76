use nalgebra::DMatrix;

use crate::tolerances::FD_STEP;
use crate::{Error, Result};

/// First and second coordinate derivatives of a metric field.
pub struct MetricDerivatives {
    pub h: DMatrix<f64>,
    /// `d1[a][(i, j)] = d_a h_ij`
    pub d1: Vec<DMatrix<f64>>,
    /// `d2[a][b][(i, j)] = d_a d_b h_ij`
    pub d2: Vec<Vec<DMatrix<f64>>>,
}

fn at<F: Fn(&[f64]) -> DMatrix<f64>>(sampler: &F, p: &[f64], offsets: &[(usize, f64)]) -> DMatrix<f64> {
    let mut q = p.to_vec();
    for &(a, dx) in offsets {
        q[a] += dx;
    }
    sampler(&q)
}

fn first(sampler: &impl Fn(&[f64]) -> DMatrix<f64>, p: &[f64], a: usize, h: f64) -> DMatrix<f64> {
    let f = |k: f64| at(sampler, p, &[(a, k * h)]);
    (f(-2.0) - f(2.0) + (f(1.0) - f(-1.0)) * 8.0) / (12.0 * h)
}

fn second_pure(sampler: &impl Fn(&[f64]) -> DMatrix<f64>, p: &[f64], a: usize, h: f64) -> DMatrix<f64> {
    let f = |k: f64| at(sampler, p, &[(a, k * h)]);
    ((f(1.0) + f(-1.0)) * 16.0 - f(2.0) - f(-2.0) - f(0.0) * 30.0) / (12.0 * h * h)
}

fn second_mixed(
    sampler: &impl Fn(&[f64]) -> DMatrix<f64>,
    p: &[f64],
    a: usize,
    b: usize,
    ha: f64,
    hb: f64,
) -> DMatrix<f64> {
    let w = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
    let mut acc: Option<DMatrix<f64>> = None;
    for &(ka, wa) in &w {
        for &(kb, wb) in &w {
            let m = at(sampler, p, &[(a, ka * ha), (b, kb * hb)]) * (wa * wb);
            acc = Some(match acc {
                Some(s) => s + m,
                None => m,
            });
        }
    }
    acc.expect("non-empty stencil") / (144.0 * ha * hb)
}

fn richardson(coarse: DMatrix<f64>, fine: DMatrix<f64>) -> DMatrix<f64> {
    (fine * 16.0 - coarse) / 15.0
}

/// Metric derivatives by fourth-order central differences with one level of
/// Richardson extrapolation, steps `1e-3 (1 + |x_a|)`.
pub fn metric_derivatives<F: Fn(&[f64]) -> DMatrix<f64>>(sampler: &F, point: &[f64]) -> MetricDerivatives {
    let n = point.len();
    let steps: Vec<f64> = point.iter().map(|x| FD_STEP * (1.0 + x.abs())).collect();
    let h = sampler(point);
    let d1: Vec<DMatrix<f64>> = (0..n)
        .map(|a| {
            richardson(
                first(sampler, point, a, steps[a]),
                first(sampler, point, a, 0.5 * steps[a]),
            )
        })
        .collect();
    let mut d2 = vec![vec![DMatrix::zeros(n, n); n]; n];
    for a in 0..n {
        for b in a..n {
            let m = if a == b {
                richardson(
                    second_pure(sampler, point, a, steps[a]),
                    second_pure(sampler, point, a, 0.5 * steps[a]),
                )
            } else {
                richardson(
                    second_mixed(sampler, point, a, b, steps[a], steps[b]),
                    second_mixed(sampler, point, a, b, 0.5 * steps[a], 0.5 * steps[b]),
                )
            };
            d2[a][b] = m.clone();
            d2[b][a] = m;
        }
    }
    MetricDerivatives { h, d1, d2 }
}

/// Scalar curvature of the metric field `sampler` at `point`, computed from
/// Christoffel symbols and their derivatives built on finite-difference
/// metric derivatives.
pub fn fd_oracle_scal<F: Fn(&[f64]) -> DMatrix<f64>>(sampler: &F, point: &[f64], d_total: usize) -> Result<f64> {
    if d_total == 0 || d_total > 4 || point.len() != d_total {
        return Err(Error::Oracle(format!(
            "need 1 <= d_total <= 4 and a matching point, got {d_total} and {}",
            point.len()
        )));
    }
    let n = d_total;
    let md = metric_derivatives(sampler, point);
    if md.h.nrows() != n || md.h.ncols() != n {
        return Err(Error::Oracle("sampler returned a matrix of the wrong size".into()));
    }
    if md.d1.iter().chain(md.d2.iter().flatten()).any(|m| m.iter().any(|v| !v.is_finite())) {
        return Err(Error::Oracle("non-finite finite differences".into()));
    }
    let hinv = md
        .h
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Oracle("singular metric at the sample point".into()))?;

    // dhinv[m] = d_m h^{kl} = -h^{ka} d_m h_ab h^{bl}
    let dhinv: Vec<DMatrix<f64>> = md.d1.iter().map(|d| -(&hinv * d * &hinv)).collect();

    // Lowered symbols L_{lij} = (d_i h_lj + d_j h_li - d_l h_ij) / 2 and their derivatives.
    let lower = |l: usize, i: usize, j: usize| 0.5 * (md.d1[i][(l, j)] + md.d1[j][(l, i)] - md.d1[l][(i, j)]);
    let dlower =
        |m: usize, l: usize, i: usize, j: usize| 0.5 * (md.d2[m][i][(l, j)] + md.d2[m][j][(l, i)] - md.d2[m][l][(i, j)]);

    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    let mut dgamma = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut g = 0.0;
                for l in 0..n {
                    g += hinv[(k, l)] * lower(l, i, j);
                }
                gamma[k][i][j] = g;
                for m in 0..n {
                    let mut dg = 0.0;
                    for l in 0..n {
                        dg += dhinv[m][(k, l)] * lower(l, i, j) + hinv[(k, l)] * dlower(m, l, i, j);
                    }
                    dgamma[m][k][i][j] = dg;
                }
            }
        }
    }

    // R_jl = d_k G^k_jl - d_l G^k_kj + G^k_km G^m_jl - G^k_lm G^m_kj
    let mut scal = 0.0;
    for j in 0..n {
        #[allow(clippy::needless_range_loop)]
        for l in 0..n {
            let mut r = 0.0;
            for k in 0..n {
                r += dgamma[k][k][j][l] - dgamma[l][k][k][j];
                for m in 0..n {
                    r += gamma[k][k][m] * gamma[m][j][l] - gamma[k][l][m] * gamma[m][k][j];
                }
            }
            scal += hinv[(j, l)] * r;
        }
    }
    Ok(scal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_is_flat() {
        let s = fd_oracle_scal(&|_: &[f64]| DMatrix::identity(3, 3), &[0.1, 0.2, 0.3], 3).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn round_two_sphere() {
        for &rho in &[0.7, 1.0, 2.0] {
            let metric = move |x: &[f64]| {
                let f = rho * (x[0] / rho).sin();
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, f * f]))
            };
            let s = fd_oracle_scal(&metric, &[0.9 * rho, 0.4], 2).unwrap();
            let expected = 2.0 / (rho * rho);
            assert!(((s - expected) / expected).abs() < 1e-7, "{s} vs {expected}");
        }
    }

    #[test]
    fn round_three_sphere_in_polar_coordinates() {
        // dt^2 + sin^2 t (da^2 + sin^2 a db^2): scal = 6.
        let metric = |x: &[f64]| {
            let f = x[0].sin();
            let s = x[1].sin();
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, f * f, f * f * s * s]))
        };
        let s = fd_oracle_scal(&metric, &[1.1, 0.8, 0.3], 3).unwrap();
        assert!((s - 6.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_large_dimension() {
        let r = fd_oracle_scal(&|_: &[f64]| DMatrix::identity(5, 5), &[0.0; 5], 5);
        assert!(matches!(r, Err(Error::Oracle(_))));
    }
}
