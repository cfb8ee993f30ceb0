//! Dense complex matrix helpers shared by the finite-N modules.

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{Eigh, Inverse, UPLO};
use num_complex::Complex64 as C64;

use crate::error::Result;

pub type CMat = Array2<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn zeros(d: usize) -> CMat {
    Array2::zeros((d, d))
}

pub fn identity(d: usize) -> CMat {
    Array2::eye(d)
}

pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

/// Largest absolute entry.
pub fn max_norm(a: &CMat) -> f64 {
    a.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_defect(a: &CMat) -> f64 {
    let d = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + &dagger(a)).mapv(|z| z * 0.5)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

/// Kronecker product `a ⊗ b`, with `b` as the fast index.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            out.slice_mut(s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb])
                .assign(&b.mapv(|z| z * aij));
        }
    }
    out
}

/// `Tr(a b)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let d = a.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            acc += a[[i, k]] * b[[k, i]];
        }
    }
    acc
}

/// Eigenvalues (ascending) and eigenvectors (columns) of the Hermitian
/// part of `a`.
pub fn eigh(a: &CMat) -> Result<(Array1<f64>, CMat)> {
    // LAPACK reads the row-major buffer as the transpose, i.e. the complex
    // conjugate of a Hermitian matrix, so its eigenvectors come back
    // conjugated.
    let (vals, vecs) = hermitian_part(a).eigh(UPLO::Lower)?;
    Ok((vals, vecs.mapv(|z| z.conj())))
}

pub fn eigvalsh(a: &CMat) -> Result<Array1<f64>> {
    Ok(eigh(a)?.0)
}

/// Eigen-decomposition sorted by descending eigenvalue, each eigenvector's
/// first non-negligible component made real and positive.
pub fn eigh_descending(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let (vals, vecs) = eigh(a)?;
    let d = vals.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]));
    let mut out = Array2::zeros((d, d));
    let mut sorted = Vec::with_capacity(d);
    for (col, &k) in order.iter().enumerate() {
        sorted.push(vals[k]);
        let v = vecs.column(k);
        let phase = v
            .iter()
            .find(|z| z.norm() > 1e-10)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(C64::new(1.0, 0.0));
        out.column_mut(col).assign(&v.mapv(|z| z * phase));
    }
    Ok((sorted, out))
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function<F: Fn(f64) -> f64>(a: &CMat, f: F) -> Result<CMat> {
    let (vals, vecs) = eigh(a)?;
    let scaled = {
        let mut v = vecs.clone();
        for (mut col, &lam) in v.axis_iter_mut(Axis(1)).zip(vals.iter()) {
            let fl = f(lam);
            col.mapv_inplace(|z| z * fl);
        }
        v
    };
    Ok(scaled.dot(&dagger(&vecs)))
}

/// Half the trace norm of `a − b` for Hermitian arguments.
pub fn trace_distance(a: &CMat, b: &CMat) -> Result<f64> {
    let diff = a - b;
    Ok(0.5 * eigvalsh(&diff)?.iter().map(|x| x.abs()).sum::<f64>())
}

/// Shannon entropy (nats) of a spectrum, with `0 ln 0 = 0` below `cutoff`.
pub fn spectral_entropy(vals: &[f64], cutoff: f64) -> f64 {
    vals.iter()
        .filter(|&&p| p >= cutoff)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Traces out the second factor of a `d1 ⊗ d2` operator.
pub fn partial_trace_second(a: &CMat, d1: usize, d2: usize) -> CMat {
    let mut out = zeros(d1);
    for i in 0..d1 {
        for j in 0..d1 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..d2 {
                acc += a[[i * d2 + k, j * d2 + k]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Traces out the first factor of a `d1 ⊗ d2` operator.
pub fn partial_trace_first(a: &CMat, d1: usize, d2: usize) -> CMat {
    let mut out = zeros(d2);
    for k in 0..d2 {
        for l in 0..d2 {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d1 {
                acc += a[[i * d2 + k, i * d2 + l]];
            }
            out[[k, l]] = acc;
        }
    }
    out
}

fn norm_one(a: &CMat) -> f64 {
    a.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &CMat) -> Result<CMat> {
    let d = a.nrows();
    let norm = norm_one(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.mapv(|z| z / 2f64.powi(squarings));
    let b = &PADE13;
    let id = identity(d);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let sc = |m: &CMat, c: f64| m.mapv(|z| z * c);

    let inner_u = sc(&a6, b[13]) + sc(&a4, b[11]) + sc(&a2, b[9]);
    let u =
        a.dot(&(a6.dot(&inner_u) + sc(&a6, b[7]) + sc(&a4, b[5]) + sc(&a2, b[3]) + sc(&id, b[1])));
    let inner_v = sc(&a6, b[12]) + sc(&a4, b[10]) + sc(&a2, b[8]);
    let v = a6.dot(&inner_v) + sc(&a6, b[6]) + sc(&a4, b[4]) + sc(&a2, b[2]) + sc(&id, b[0]);

    let denom = (&v - &u).inv()?;
    let mut r = denom.dot(&(&v + &u));
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigh_reconstructs_complex_hermitian() {
        let a = array![
            [c(1.0, 0.0), c(0.3, 0.7), c(-0.2, 0.1)],
            [c(0.3, -0.7), c(-0.5, 0.0), c(0.0, -0.4)],
            [c(-0.2, -0.1), c(0.0, 0.4), c(2.0, 0.0)]
        ];
        let (vals, vecs) = eigh(&a).unwrap();
        let d = Array2::from_diag(&vals.mapv(|v| c(v, 0.0)));
        assert!(max_abs_diff(&vecs.dot(&d).dot(&dagger(&vecs)), &a) < 1e-13);
        let (vals, vecs) = eigh_descending(&a).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let col = vecs.column(k).to_owned();
            let av = a.dot(&col);
            assert!(av
                .iter()
                .zip(col.iter())
                .all(|(x, y)| (x - y * *v).norm() < 1e-13));
        }
        let sq = hermitian_function(&a, |x| x * x).unwrap();
        assert!(max_abs_diff(&sq, &a.dot(&a)) < 1e-13);
    }

    #[test]
    fn expm_of_pauli_rotation() {
        // exp(-i θ σ_x) = cos θ − i sin θ σ_x
        let theta = 0.7;
        let sx = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let e = expm(&sx.mapv(|z| z * c(0.0, -theta))).unwrap();
        let expect = array![
            [c(theta.cos(), 0.0), c(0.0, -theta.sin())],
            [c(0.0, -theta.sin()), c(theta.cos(), 0.0)]
        ];
        assert!(max_abs_diff(&e, &expect) < 1e-14);
    }

    #[test]
    fn expm_large_norm_diagonal() {
        let a = array![[c(-30.0, 2.0), c(0.0, 0.0)], [c(0.0, 0.0), c(3.0, 0.0)]];
        let e = expm(&a).unwrap();
        let e00 = c(-30.0, 2.0).exp();
        assert!((e[[0, 0]] - e00).norm() < 1e-20);
        assert!((e[[1, 1]].re - 3f64.exp()).abs() < 1e-12 * 3f64.exp());
    }

    #[test]
    fn partial_traces_of_product() {
        let a = array![[c(0.3, 0.0), c(0.1, 0.2)], [c(0.1, -0.2), c(0.7, 0.0)]];
        let b = array![
            [c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.1)],
            [c(0.0, 0.0), c(0.25, 0.0), c(0.0, 0.0)],
            [c(0.0, -0.1), c(0.0, 0.0), c(0.25, 0.0)]
        ];
        let ab = kron(&a, &b);
        assert!(max_abs_diff(&partial_trace_second(&ab, 2, 3), &a) < 1e-15);
        assert!(max_abs_diff(&partial_trace_first(&ab, 2, 3), &b) < 1e-15);
    }

    #[test]
    fn descending_eigenvectors_have_positive_lead() {
        let a = array![[c(1.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(1.0, 0.0)]];
        let (vals, vecs) = eigh_descending(&a).unwrap();
        assert!((vals[0] - 2.0).abs() < 1e-14 && vals[1].abs() < 1e-14);
        for k in 0..2 {
            let lead = vecs
                .column(k)
                .iter()
                .copied()
                .find(|z| z.norm() > 1e-10)
                .unwrap();
            assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
        }
    }
}
