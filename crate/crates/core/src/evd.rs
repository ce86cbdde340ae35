//! Dense eigendecomposition of real nonsymmetric matrices.
//!
//! Householder reduction to upper Hessenberg form followed by the Francis
//! double-shift QR iteration with accumulated transformations and
//! eigenvector back-substitution, after the Algol procedures orthes/hqr2
//! (Handbook for Automatic Computation, Vol. II) and their EISPACK/JAMA
//! descendants. Eigenvectors are polished by inverse iteration until they
//! meet the residual contract; a pair whose vector cannot meet it inside a
//! cluster of nearly equal eigenvalues is returned without a vector.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::StochasticMatrix;

/// Residual bound every returned eigenpair satisfies.
pub const RESIDUAL_BOUND: f64 = 1e-8;

/// Margin allowed above the unit spectral radius of a stochastic matrix.
pub const SPECTRAL_RADIUS_SLACK: f64 = 1e-8;

/// Eigenvalues closer than this are treated as one cluster when deciding
/// whether a missing eigenvector is a multiplicity artifact.
const CLUSTER_GAP: f64 = 1e-6;

/// One eigenvalue with, where the geometric multiplicity permits, a
/// canonically normalized right eigenvector and its residual.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: Option<DVector<Complex64>>,
    pub residual: Option<f64>,
}

/// Full spectrum of a matrix, sorted by descending modulus, ties by
/// descending angle in (-pi, pi], then ascending extraction index.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub pairs: Vec<EigenPair>,
    dim: usize,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.pairs.iter().map(|p| p.value)
    }
}

/// Rescales an eigenvector so its infinity norm is one and the entry of
/// largest modulus (ties broken by lowest index) becomes exactly +1.
pub fn normalize_mode(v: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    let mut best = 0usize;
    let mut best_norm = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let n = z.norm();
        if n > best_norm {
            best_norm = n;
            best = i;
        }
    }
    if best_norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let pivot = v[best];
    let mut out = v.clone();
    for z in out.iter_mut() {
        *z /= pivot;
    }
    out[best] = Complex64::new(1.0, 0.0);
    Ok(out)
}

fn residual_inf(a: &DMatrix<f64>, value: Complex64, v: &DVector<Complex64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            acc += a[(i, j)] * v[j];
        }
        acc -= value * v[i];
        worst = worst.max(acc.norm());
    }
    worst
}

/// One inverse-iteration step: solve (A - lambda I) x = v and renormalize.
fn inverse_iteration_step(
    a: &DMatrix<f64>,
    value: Complex64,
    v: &DVector<Complex64>,
) -> Option<DVector<Complex64>> {
    let n = a.nrows();
    let mut shifted = DMatrix::from_fn(n, n, |i, j| Complex64::new(a[(i, j)], 0.0));
    // A tiny diagonal perturbation keeps the shifted matrix factorable when
    // lambda is an exact eigenvalue of a small integer-ratio matrix.
    let mu = value + Complex64::new(1e-13 * (1.0 + value.norm()), 0.0);
    for i in 0..n {
        shifted[(i, i)] -= mu;
    }
    let solved = shifted.lu().solve(v)?;
    normalize_mode(&solved).ok()
}

struct RawEigen {
    re: Vec<f64>,
    im: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Reduces `h` to upper Hessenberg form in place, accumulating the
/// orthogonal transformations into a fresh matrix.
fn hessenberg(h: &mut DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let high = n - 1;
    let mut ort = vec![0.0f64; n];

    for m in 1..high {
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut sum = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            sum += ort[i] * ort[i];
        }
        let mut g = sum.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        let hh = sum - ort[m] * g;
        ort[m] -= g;

        // H = (I - u u'/h) H (I - u u'/h)
        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[(m, m - 1)] = scale * g;
    }

    let mut v = DMatrix::identity(n, n);
    for m in (1..high).rev() {
        if h[(m, m - 1)] == 0.0 {
            continue;
        }
        for i in (m + 1)..=high {
            ort[i] = h[(i, m - 1)];
        }
        for j in m..=high {
            let mut g = 0.0;
            for i in m..=high {
                g += ort[i] * v[(i, j)];
            }
            // Double division avoids possible underflow.
            g = (g / ort[m]) / h[(m, m - 1)];
            for i in m..=high {
                v[(i, j)] += g * ort[i];
            }
        }
    }
    v
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix, then eigenvector
/// back-substitution and back-transformation. `v` accumulates the
/// Hessenberg transformations on entry and holds eigenvectors on exit:
/// column i for a real eigenvalue i, columns (i, i+1) holding real and
/// imaginary parts for a conjugate pair at (i, i+1).
#[allow(clippy::needless_range_loop)]
fn hqr2(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let nn = h.nrows();
    let mut d = vec![0.0f64; nn];
    let mut e = vec![0.0f64; nn];
    let low = 0isize;
    let high = nn as isize - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut t, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let mut n = high;
    let mut iter = 0;
    let mut total_iter = 0usize;
    let iteration_budget = 120 * nn.max(1);

    while n >= low {
        let nu = n as usize;

        // Look for a single small subdiagonal element.
        let mut l = n;
        while l > low {
            let lu = l as usize;
            s = h[(lu - 1, lu - 1)].abs() + h[(lu, lu)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(lu, lu - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            h[(nu, nu)] += exshift;
            d[nu] = h[(nu, nu)];
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots found.
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;
            x = h[(nu, nu)];

            if q >= 0.0 {
                // Real pair.
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
                x = h[(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in (nu - 1)..nn {
                    z = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * z;
                }
                for i in low as usize..=high as usize {
                    z = v[(i, nu - 1)];
                    v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                    v[(i, nu)] = q * v[(i, nu)] - p * z;
                }
            } else {
                // Complex pair.
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // No convergence yet: form shift.
            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }

            if iter == 10 {
                // Wilkinson's original ad hoc shift.
                exshift += x;
                for i in low as usize..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                // MATLAB's ad hoc shift.
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low as usize..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total_iter += 1;
            if total_iter > iteration_budget {
                return Err(Error::EigenNoConvergence(nu + 1));
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = n - 2;
            while m >= l {
                let mu = m as usize;
                z = h[(mu, mu)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(mu + 1, mu)] + h[(mu, mu + 1)];
                q = h[(mu + 1, mu + 1)] - z - r - s;
                r = h[(mu + 2, mu + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(mu, mu - 1)].abs() * (q.abs() + r.abs())
                    < eps
                        * (p.abs()
                            * (h[(mu - 1, mu - 1)].abs() + z.abs() + h[(mu + 1, mu + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            let mu = m as usize;
            for i in (mu + 2)..=nu {
                h[(i, i - 2)] = 0.0;
                if i > mu + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step involving rows l..n and columns m..n.
            for k in mu..nu {
                let notlast = k != nu - 1;
                if k != mu {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != mu {
                    h[(k, k - 1)] = -s * x;
                } else if l != m {
                    h[(k, k - 1)] = -h[(k, k - 1)];
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;

                for j in k..nn {
                    p = h[(k, j)] + q * h[(k + 1, j)];
                    if notlast {
                        p += r * h[(k + 2, j)];
                        h[(k + 2, j)] -= p * z;
                    }
                    h[(k, j)] -= p * x;
                    h[(k + 1, j)] -= p * y;
                }
                for i in 0..=nu.min(k + 3) {
                    p = x * h[(i, k)] + y * h[(i, k + 1)];
                    if notlast {
                        p += z * h[(i, k + 2)];
                        h[(i, k + 2)] -= p * r;
                    }
                    h[(i, k)] -= p;
                    h[(i, k + 1)] -= p * q;
                }
                for i in low as usize..=high as usize {
                    p = x * v[(i, k)] + y * v[(i, k + 1)];
                    if notlast {
                        p += z * v[(i, k + 2)];
                        v[(i, k + 2)] -= p * r;
                    }
                    v[(i, k)] -= p;
                    v[(i, k + 1)] -= p * q;
                }
            }
        }
    }

    // Back-substitute to find vectors of the upper triangular form.
    if norm == 0.0 {
        return Ok((d, e));
    }
    for n in (0..nn).rev() {
        p = d[n];
        q = e[n];

        if q == 0.0 {
            // Real vector.
            let mut l = n;
            h[(n, n)] = 1.0;
            for i in (0..n).rev() {
                w = h[(i, i)] - p;
                r = 0.0;
                for j in l..=n {
                    r += h[(i, j)] * h[(j, n)];
                }
                if e[i] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        h[(i, n)] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        // Solve the 2x2 real block above.
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                        t = (x * s - z * r) / q;
                        h[(i, n)] = t;
                        h[(i + 1, n)] = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    // Overflow control.
                    t = h[(i, n)].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            // Complex vector: last component imaginary, matrix triangular.
            let mut l = n - 1;
            if h[(n, n - 1)].abs() > h[(n - 1, n)].abs() {
                h[(n - 1, n - 1)] = q / h[(n, n - 1)];
                h[(n - 1, n)] = -(h[(n, n)] - p) / h[(n, n - 1)];
            } else {
                let (re, im) = cdiv(0.0, -h[(n - 1, n)], h[(n - 1, n - 1)] - p, q);
                h[(n - 1, n - 1)] = re;
                h[(n - 1, n)] = im;
            }
            h[(n, n - 1)] = 0.0;
            h[(n, n)] = 1.0;
            for i in (0..n - 1).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h[(i, j)] * h[(j, n - 1)];
                    sa += h[(i, j)] * h[(j, n)];
                }
                w = h[(i, i)] - p;

                if e[i] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        let (re, im) = cdiv(-ra, -sa, w, q);
                        h[(i, n - 1)] = re;
                        h[(i, n)] = im;
                    } else {
                        x = h[(i, i + 1)];
                        y = h[(i + 1, i)];
                        let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                        let vi = (d[i] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps
                                * norm
                                * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (re, im) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[(i, n - 1)] = re;
                        h[(i, n)] = im;
                        if x.abs() > z.abs() + q.abs() {
                            h[(i + 1, n - 1)] =
                                (-ra - w * h[(i, n - 1)] + q * h[(i, n)]) / x;
                            h[(i + 1, n)] = (-sa - w * h[(i, n)] - q * h[(i, n - 1)]) / x;
                        } else {
                            let (re, im) =
                                cdiv(-r - y * h[(i, n - 1)], -s - y * h[(i, n)], z, q);
                            h[(i + 1, n - 1)] = re;
                            h[(i + 1, n)] = im;
                        }
                    }
                    // Overflow control.
                    t = h[(i, n - 1)].abs().max(h[(i, n)].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            h[(j, n - 1)] /= t;
                            h[(j, n)] /= t;
                        }
                    }
                }
            }
        }
    }

    // Back-transformation to eigenvectors of the original matrix.
    for j in (0..nn).rev() {
        for i in 0..nn {
            z = 0.0;
            for k in 0..=j {
                z += v[(i, k)] * h[(k, j)];
            }
            v[(i, j)] = z;
        }
    }

    Ok((d, e))
}

fn eigen_raw(a: &DMatrix<f64>) -> Result<RawEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return Ok(RawEigen {
            re: vec![],
            im: vec![],
            vectors: DMatrix::zeros(0, 0),
        });
    }
    if n == 1 {
        return Ok(RawEigen {
            re: vec![a[(0, 0)]],
            im: vec![0.0],
            vectors: DMatrix::identity(1, 1),
        });
    }
    let mut h = a.clone();
    let mut v = hessenberg(&mut h);
    let (re, im) = hqr2(&mut h, &mut v)?;
    Ok(RawEigen {
        re,
        im,
        vectors: v,
    })
}

/// Eigendecomposition of a matrix known to be dense and square; used for
/// general matrices in tests and diagnostics. See [`eigendecompose`] for
/// the stochastic-matrix entry point with the spectral-radius check.
pub fn eigen_pairs(a: &DMatrix<f64>) -> Result<Vec<EigenPair>> {
    let raw = eigen_raw(a)?;
    let n = a.nrows();
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if raw.im[i] == 0.0 {
            let value = Complex64::new(raw.re[i], 0.0);
            let vector = DVector::from_fn(n, |r, _| Complex64::new(raw.vectors[(r, i)], 0.0));
            pairs.push(polish(a, value, vector));
            i += 1;
        } else {
            let value = Complex64::new(raw.re[i], raw.im[i].abs());
            let vector = DVector::from_fn(n, |r, _| {
                Complex64::new(raw.vectors[(r, i)], raw.vectors[(r, i + 1)])
            });
            let first = polish(a, value, vector);
            let second = EigenPair {
                value: first.value.conj(),
                vector: first.vector.as_ref().map(|v| {
                    normalize_mode(&v.map(|z| z.conj())).expect("conjugate of nonzero vector")
                }),
                residual: first.residual,
            };
            pairs.push(first);
            pairs.push(second);
            i += 2;
        }
    }

    // Check vectorless pairs for the multiplicity excuse.
    let values: Vec<Complex64> = pairs.iter().map(|p| p.value).collect();
    for pair in &pairs {
        if pair.vector.is_some() {
            continue;
        }
        let clustered = values
            .iter()
            .filter(|v| (**v - pair.value).norm() < CLUSTER_GAP)
            .count()
            > 1;
        if !clustered {
            return Err(Error::EigenResidual {
                re: pair.value.re,
                im: pair.value.im,
                residual: pair.residual.unwrap_or(f64::NAN),
            });
        }
    }

    // Sort by descending modulus, ties by descending angle, then extraction
    // order (stable sort keeps it).
    pairs.sort_by(|a, b| {
        b.value
            .norm()
            .total_cmp(&a.value.norm())
            .then(b.value.arg().total_cmp(&a.value.arg()))
    });
    Ok(pairs)
}

fn polish(a: &DMatrix<f64>, value: Complex64, vector: DVector<Complex64>) -> EigenPair {
    let mut best = match normalize_mode(&vector) {
        Ok(v) => v,
        Err(_) => {
            return EigenPair {
                value,
                vector: None,
                residual: None,
            }
        }
    };
    let mut best_residual = residual_inf(a, value, &best);
    for _ in 0..2 {
        if best_residual <= RESIDUAL_BOUND / 10.0 {
            break;
        }
        match inverse_iteration_step(a, value, &best) {
            Some(refined) => {
                let r = residual_inf(a, value, &refined);
                if r < best_residual {
                    best = refined;
                    best_residual = r;
                } else {
                    break;
                }
            }
            None => break,
        }
    }
    if best_residual <= RESIDUAL_BOUND {
        EigenPair {
            value,
            vector: Some(best),
            residual: Some(best_residual),
        }
    } else {
        EigenPair {
            value,
            vector: None,
            residual: Some(best_residual),
        }
    }
}

/// Full spectrum of a stochastic interaction matrix.
///
/// Every returned pair satisfies the residual bound where a vector is
/// present, and the spectral radius is verified against the stochastic
/// bound |lambda| <= 1.
pub fn eigendecompose(w: &StochasticMatrix) -> Result<Spectrum> {
    let pairs = eigen_pairs(w.as_matrix())?;
    for pair in &pairs {
        if pair.value.norm() > 1.0 + SPECTRAL_RADIUS_SLACK {
            return Err(Error::EigenResidual {
                re: pair.value.re,
                im: pair.value.im,
                residual: pair.value.norm() - 1.0,
            });
        }
    }
    Ok(Spectrum {
        pairs,
        dim: w.dim(),
    })
}

/// Orthonormal basis of the null space of `a`, taking every right singular
/// vector whose singular value is at most `tol`.
pub fn null_space_basis(a: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut basis = Vec::new();
    for (i, &sigma) in svd.singular_values.iter().enumerate() {
        if sigma <= tol {
            basis.push(v_t.row(i).transpose());
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn two_by_two_hand_solution() {
        let a = matrix(&[&[0.0, 0.5], &[1.0, 0.5]]);
        let pairs = eigen_pairs(&a).unwrap();
        assert_eq!(pairs.len(), 2);
        // lambda^2 - 0.5 lambda - 0.5 = 0 -> 1 and -0.5.
        assert_abs_diff_eq!(pairs[0].value.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pairs[1].value.re, -0.5, epsilon = 1e-12);
        let v1 = pairs[0].vector.as_ref().unwrap();
        assert_abs_diff_eq!(v1[0].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v1[1].re, 1.0, epsilon = 1e-12);
        let v2 = pairs[1].vector.as_ref().unwrap();
        assert_abs_diff_eq!(v2[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v2[1].re, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_has_unit_eigenvalue_with_multiplicity() {
        let pairs = eigen_pairs(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(pairs.len(), 3);
        for p in &pairs {
            assert_abs_diff_eq!(p.value.re, 1.0, epsilon = 1e-14);
            assert_abs_diff_eq!(p.value.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn cycle_with_leak_spectrum() {
        // a -> b -> c -> a with weight 0.8 and 0.2 leak into absorbing d:
        // eigenvalues 1 and the cube roots scaled by 0.8.
        let a = matrix(&[
            &[0.0, 0.0, 0.8, 0.0],
            &[0.8, 0.0, 0.0, 0.0],
            &[0.0, 0.8, 0.0, 0.0],
            &[0.2, 0.2, 0.2, 1.0],
        ]);
        let pairs = eigen_pairs(&a).unwrap();
        let angle = 2.0 * std::f64::consts::PI / 3.0;
        let expected = [
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(0.8, angle),
            Complex64::new(0.8, 0.0),
            Complex64::from_polar(0.8, -angle),
        ];
        for (pair, want) in pairs.iter().zip(expected) {
            assert!((pair.value - want).norm() < 1e-10, "{:?} vs {want}", pair.value);
        }
        // Sorted: modulus 1 first, then the 0.8 shell by descending angle.
        assert!(pairs[1].value.im > 0.0);
        assert_eq!(pairs[2].value.im, 0.0);
        assert!(pairs[3].value.im < 0.0);
    }

    #[test]
    fn conjugate_pairs_and_residuals_on_random_stochastic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3, 5, 8, 13, 21] {
            let mut a = DMatrix::zeros(n, n);
            for col in 0..n {
                let mut sum = 0.0;
                for row in 0..n {
                    let x: f64 = rng.random::<f64>();
                    let x = if x < 0.3 { 0.0 } else { x };
                    a[(row, col)] = x;
                    sum += x;
                }
                if sum == 0.0 {
                    a[(col, col)] = 1.0;
                } else {
                    for row in 0..n {
                        a[(row, col)] /= sum;
                    }
                }
            }
            let pairs = eigen_pairs(&a).unwrap();
            assert_eq!(pairs.len(), n);
            for p in &pairs {
                assert!(p.value.norm() <= 1.0 + SPECTRAL_RADIUS_SLACK);
                if let (Some(v), Some(r)) = (&p.vector, p.residual) {
                    assert!(r <= RESIDUAL_BOUND, "residual {r:e} at n={n}");
                    let recomputed = residual_inf(&a, p.value, v);
                    assert!(recomputed <= RESIDUAL_BOUND);
                }
                if p.value.im != 0.0 {
                    assert!(
                        pairs
                            .iter()
                            .any(|q| (q.value - p.value.conj()).norm() < 1e-12),
                        "conjugate missing for {:?}",
                        p.value
                    );
                }
            }
        }
    }

    #[test]
    fn normalization_is_canonical_and_idempotent() {
        let v = DVector::from_vec(vec![
            Complex64::new(-2.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]);
        let n = normalize_mode(&v).unwrap();
        assert_eq!(n[0], Complex64::new(1.0, 0.0));
        assert_eq!(n[1], Complex64::new(-0.5, 0.0));
        assert_eq!(normalize_mode(&n).unwrap(), n);

        let v = DVector::from_vec(vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.5)]);
        let n = normalize_mode(&v).unwrap();
        assert_eq!(n[0], Complex64::new(1.0, 0.0));
        assert_abs_diff_eq!(n[1].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(n[1].im, 0.0, epsilon = 1e-15);

        let v = DVector::from_vec(vec![Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0)]);
        assert_eq!(normalize_mode(&v).unwrap(), v);

        let zero = DVector::from_vec(vec![Complex64::new(0.0, 0.0)]);
        assert!(matches!(normalize_mode(&zero), Err(Error::ZeroVector)));
    }

    #[test]
    fn null_space_of_rank_one_column_map() {
        // Columns all equal e3: null space is the plane v1 + v2 + v3 = 0.
        let a = matrix(&[
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
            &[1.0, 1.0, 1.0],
        ]);
        let basis = null_space_basis(&a, 1e-10);
        assert_eq!(basis.len(), 2);
        for v in &basis {
            let image = &a * v;
            assert!(image.amax() <= 1e-12);
            assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn defective_zero_block_keeps_eigenvalues() {
        // Shift-like matrix: d absorbing, a -> b -> c -> d; algebraic
        // multiplicity of 0 is 3 but the null space is one-dimensional.
        let a = matrix(&[
            &[0.0, 0.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 1.0],
        ]);
        let pairs = eigen_pairs(&a).unwrap();
        let zeros = pairs
            .iter()
            .filter(|p| p.value.norm() <= 1e-8)
            .count();
        assert_eq!(zeros, 3);
        let basis = null_space_basis(&a, 1e-10);
        assert_eq!(basis.len(), 1);
    }
}
