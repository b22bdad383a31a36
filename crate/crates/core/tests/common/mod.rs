//! Shared helpers and dense oracles for the integration tests.
#![allow(dead_code)]

pub mod oracles;

use curlforge::fem::{Csr, FemSpaces};
use curlforge::mesh::{build_canonical_mesh, GeometryKind, GeometryParams, Mesh};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn mesh(kind: GeometryKind, n: usize) -> Mesh {
    build_canonical_mesh(kind, n, &GeometryParams::default()).unwrap()
}

pub fn spaces(kind: GeometryKind, n: usize) -> FemSpaces {
    FemSpaces::new(&mesh(kind, n)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn dense(a: &Csr) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.nrows, a.ncols, |i, j| d[i][j])
}

/// Minimum-norm least squares through SVD; rows are scaled to unit norm first.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut a = a.clone();
    let mut b = b.clone();
    for i in 0..a.nrows() {
        let n = a.row(i).norm();
        if n > 0.0 {
            a.row_mut(i).scale_mut(1.0 / n);
            b[i] /= n;
        }
    }
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-11 * svd.singular_values.max()).unwrap()
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(1e-300)
}

/// Dense curl operator, rows `3 t + c` scaled by `sqrt(vol_t)`.
pub fn curl_dense(s: &FemSpaces) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(3 * s.nt(), s.ne());
    for t in 0..s.nt() {
        let w = s.vol[t].sqrt();
        for k in 0..6 {
            let v = s.curl_local(t, k);
            for i in 0..3 {
                c[(3 * t + i, s.tet_edges[t][k])] += w * v[i];
            }
        }
    }
    c
}

pub fn p0_rhs(s: &FemSpaces, z: &[curlforge::vec3::V3]) -> DVector<f64> {
    DVector::from_fn(3 * s.nt(), |r, _| s.vol[r / 3].sqrt() * z[r / 3][r % 3])
}

/// Stack row blocks.
pub fn vstack(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks[0].ncols();
    let mut m = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        m.view_mut((r, 0), (b.nrows(), cols)).copy_from(b);
        r += b.nrows();
    }
    m
}

pub fn vcat(blocks: &[DVector<f64>]) -> DVector<f64> {
    let v: Vec<f64> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
    DVector::from_vec(v)
}

pub fn p0_diff(s: &FemSpaces, a: &[curlforge::vec3::V3], b: &[curlforge::vec3::V3]) -> f64 {
    let d: Vec<_> = a.iter().zip(b).map(|(x, y)| curlforge::vec3::sub(*x, *y)).collect();
    s.p0_norm(&d)
}

pub fn random_p0(rng: &mut ChaCha8Rng, n: usize) -> Vec<curlforge::vec3::V3> {
    (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()
}

pub fn zero_boundary(s: &FemSpaces, mut x: Vec<f64>) -> Vec<f64> {
    for e in 0..s.ne() {
        if s.bnd_edge[e] {
            x[e] = 0.0;
        }
    }
    x
}
