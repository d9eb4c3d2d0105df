//! 2-D projection of embeddings and grid-sampled mosaics.
//!
//! The projection is PCA: the top two principal axes of the centred points,
//! each signed so its largest-magnitude loading is positive, with the
//! projected coordinates min-max scaled to `[0, 1]`. An axis with no
//! variance projects to zeros.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;

pub const PCA: &str = "pca";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtlasLayout {
    pub grid_w: usize,
    pub grid_h: usize,
    /// Row-major, row 0 covering `y` in `[0, 1/grid_h)`.
    pub tiles: Vec<Option<usize>>,
    pub projection: Vec<[f64; 2]>,
    pub projector: String,
}

impl AtlasLayout {
    pub fn tile(&self, col: usize, row: usize) -> Option<usize> {
        self.tiles[row * self.grid_w + col]
    }
}

/// Tile containing a point in `[0, 1]^2`.
pub fn tile_of(p: [f64; 2], grid_w: usize, grid_h: usize) -> (usize, usize) {
    let cell = |v: f64, n: usize| (((v * n as f64) as isize).max(0) as usize).min(n - 1);
    (cell(p[0], grid_w), cell(p[1], grid_h))
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// eigenvalue descending (stable on ties).
fn symmetric_eigen(mut a: Vec<f64>, m: usize) -> Vec<(f64, Vec<f64>)> {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>();
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * m + j] * a[i * m + j])
            .sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..m {
                    let (akp, akq) = (a[k * m + p], a[k * m + q]);
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let (apk, aqk) = (a[p * m + k], a[q * m + k]);
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
                for k in 0..m {
                    let (vkp, vkq) = (v[k * m + p], v[k * m + q]);
                    v[k * m + p] = c * vkp - s * vkq;
                    v[k * m + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> =
        (0..m).map(|j| (a[j * m + j], (0..m).map(|k| v[k * m + j]).collect())).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs
}

/// Flip `v` so its largest-magnitude entry (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn min_max(values: &mut [f64]) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    for v in values.iter_mut() {
        *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
    }
}

/// Top-two principal-component coordinates scaled to `[0, 1]^2`.
pub fn project_2d<P: AsRef<[f64]>>(points: &[P]) -> Result<Vec<[f64; 2]>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewEmbeddings { needed: 2, found: n });
    }
    let d = points[0].as_ref().len();
    for p in points {
        if p.as_ref().len() != d {
            return Err(Error::DimMismatch { left: d, right: p.as_ref().len() });
        }
    }
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p.as_ref()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let x: Vec<f64> = points
        .iter()
        .flat_map(|p| p.as_ref().iter().zip(&mean).map(|(v, m)| v - m).collect::<Vec<_>>())
        .collect();

    // Principal axes in feature space, from whichever of X^T X or X X^T is
    // smaller.
    let axes: Vec<(f64, Vec<f64>)> = if d <= n {
        let mut cov = vec![0.0; d * d];
        for r in 0..n {
            let row = &x[r * d..(r + 1) * d];
            for i in 0..d {
                for j in i..d {
                    cov[i * d + j] += row[i] * row[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                cov[i * d + j] = cov[j * d + i];
            }
        }
        symmetric_eigen(cov, d).into_iter().take(2).collect()
    } else {
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..d).map(|k| x[i * d + k] * x[j * d + k]).sum();
                gram[i * n + j] = s;
                gram[j * n + i] = s;
            }
        }
        symmetric_eigen(gram, n)
            .into_iter()
            .take(2)
            .map(|(lambda, u)| {
                let mut v = vec![0.0; d];
                for i in 0..n {
                    for k in 0..d {
                        v[k] += u[i] * x[i * d + k];
                    }
                }
                let norm = libm::sqrt(v.iter().map(|a| a * a).sum::<f64>());
                if norm > 0.0 {
                    for a in &mut v {
                        *a /= norm;
                    }
                }
                (lambda, v)
            })
            .collect()
    };

    let top = axes.first().map_or(0.0, |a| a.0).max(0.0);
    let mut coords = vec![[0.0; 2]; n];
    for (k, (lambda, axis)) in axes.into_iter().enumerate() {
        if !(lambda > 1e-12 * top && lambda > 0.0) {
            continue;
        }
        let mut axis = axis;
        fix_sign(&mut axis);
        let mut proj: Vec<f64> =
            (0..n).map(|i| (0..d).map(|j| x[i * d + j] * axis[j]).sum()).collect();
        min_max(&mut proj);
        for (c, p) in coords.iter_mut().zip(proj) {
            c[k] = p;
        }
    }
    Ok(coords)
}

/// For each tile, the point inside it nearest the tile centre; equal
/// distances go to the lower index.
pub fn grid_sample(coords: &[[f64; 2]], grid_w: usize, grid_h: usize) -> Result<AtlasLayout> {
    if grid_w == 0 || grid_h == 0 {
        return Err(Error::InvalidArgument("atlas grid must be at least 1x1"));
    }
    let mut tiles: Vec<Option<usize>> = vec![None; grid_w * grid_h];
    let mut best = vec![f64::INFINITY; grid_w * grid_h];
    for (i, p) in coords.iter().enumerate() {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::InvalidArgument("atlas coordinates must be finite"));
        }
        let (c, r) = tile_of(*p, grid_w, grid_h);
        let cx = (c as f64 + 0.5) / grid_w as f64;
        let cy = (r as f64 + 0.5) / grid_h as f64;
        let dist = (p[0] - cx) * (p[0] - cx) + (p[1] - cy) * (p[1] - cy);
        let t = r * grid_w + c;
        if dist < best[t] {
            best[t] = dist;
            tiles[t] = Some(i);
        }
    }
    Ok(AtlasLayout {
        grid_w,
        grid_h,
        tiles,
        projection: coords.to_vec(),
        projector: String::from(PCA),
    })
}

/// Mosaic of `tile x tile` thumbnails; empty tiles stay black.
pub fn render_atlas(layout: &AtlasLayout, frames: &[Option<Frame>], tile: usize) -> Result<Frame> {
    let mut out = Frame::black(tile * layout.grid_w, tile * layout.grid_h);
    for r in 0..layout.grid_h {
        for c in 0..layout.grid_w {
            let Some(genome) = layout.tile(c, r) else { continue };
            let frame = frames
                .get(genome)
                .and_then(|f| f.as_ref())
                .ok_or(Error::MissingFrame { genome })?;
            let thumb = frame.resample(tile, tile);
            for y in 0..tile {
                for x in 0..tile {
                    out.set(c * tile + x, r * tile + y, thumb.get(x, y));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{make_rng, standard_normal};
    use nalgebra::{DMatrix, SymmetricEigen};
    use proptest::prelude::*;

    #[test]
    fn two_points_span_first_axis() {
        let c = project_2d(&[vec![0.0, 1.0, 2.0], vec![3.0, 1.0, 0.0]]).unwrap();
        let xs = [c[0][0], c[1][0]];
        assert!(xs.contains(&0.0) && xs.contains(&1.0));
        assert_eq!([c[0][1], c[1][1]], [0.0, 0.0]);
    }

    #[test]
    fn identical_points_project_to_origin() {
        let c = project_2d(&[[1.0, 2.0]; 4]).unwrap();
        assert!(c.iter().all(|p| *p == [0.0, 0.0]));
    }

    #[test]
    fn duplicated_dataset_projects_identically() {
        let mut rng = make_rng(1, 1);
        let pts: Vec<Vec<f64>> =
            (0..10).map(|_| (0..5).map(|_| standard_normal(&mut rng)).collect()).collect();
        let twice: Vec<Vec<f64>> = pts.iter().chain(pts.iter()).cloned().collect();
        let a = project_2d(&pts).unwrap();
        let b = project_2d(&twice).unwrap();
        for i in 0..10 {
            for k in 0..2 {
                assert!((a[i][k] - b[i][k]).abs() < 1e-9);
                assert!((b[i][k] - b[i + 10][k]).abs() < 1e-15);
            }
        }
        assert_eq!(a, project_2d(&pts).unwrap());
    }

    /// Independent projection through nalgebra's symmetric eigensolver.
    fn oracle(points: &[Vec<f64>]) -> Vec<[f64; 2]> {
        let n = points.len();
        let d = points[0].len();
        let x = DMatrix::from_fn(n, d, |i, j| points[i][j]);
        let mean = x.row_mean();
        let xc = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
        let cov = xc.transpose() * &xc;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut out = vec![[0.0; 2]; n];
        for k in 0..2 {
            let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
            let big = (0..d).fold(0, |b, i| if v[i].abs() > v[b].abs() { i } else { b });
            if v[big] < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
            let proj: Vec<f64> = (0..n).map(|i| (0..d).map(|j| xc[(i, j)] * v[j]).sum()).collect();
            let lo = proj.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = proj.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for i in 0..n {
                out[i][k] = (proj[i] - lo) / (hi - lo);
            }
        }
        out
    }

    #[test]
    fn matches_eigen_oracle_on_2d_data() {
        let mut rng = make_rng(2, 2);
        // Anisotropic cloud rotated by 30 degrees.
        let (s, c) = (0.5, libm::sqrt(3.0) / 2.0);
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let (a, b) = (3.0 * standard_normal(&mut rng), standard_normal(&mut rng));
                vec![c * a - s * b + 1.0, s * a + c * b - 2.0]
            })
            .collect();
        let got = project_2d(&pts).unwrap();
        let want = oracle(&pts);
        for (g, w) in got.iter().zip(&want) {
            assert!((g[0] - w[0]).abs() < 1e-9 && (g[1] - w[1]).abs() < 1e-9, "{g:?} vs {w:?}");
        }
    }

    #[test]
    fn wide_data_uses_gram_path_and_matches_oracle() {
        let mut rng = make_rng(3, 3);
        let pts: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..20).map(|j| standard_normal(&mut rng) + (i * j) as f64 * 0.1).collect())
            .collect();
        let got = project_2d(&pts).unwrap();
        let want = oracle(&pts);
        for (g, w) in got.iter().zip(&want) {
            assert!((g[0] - w[0]).abs() < 1e-8 && (g[1] - w[1]).abs() < 1e-8, "{g:?} vs {w:?}");
        }
    }

    #[test]
    fn grid_examples() {
        let l = grid_sample(&[[0.1, 0.5], [0.9, 0.5]], 2, 1).unwrap();
        assert_eq!(l.tiles, vec![Some(0), Some(1)]);
        let empty = grid_sample(&[], 3, 2).unwrap();
        assert!(empty.tiles.iter().all(Option::is_none));
        let l = grid_sample(&[[0.1, 0.1], [0.4, 0.4], [0.22, 0.22]], 2, 2).unwrap();
        assert_eq!(l.tile(0, 0), Some(2));
        // Equidistant from the centre: lower index wins.
        let l = grid_sample(&[[0.7, 0.25], [0.3, 0.25]], 1, 1).unwrap();
        assert_eq!(l.tile(0, 0), Some(0));
        // The upper boundary belongs to the last tile.
        assert_eq!(tile_of([1.0, 1.0], 4, 3), (3, 2));
    }

    #[test]
    fn mosaic_examples() {
        let red = Frame::filled(8, 8, [1.0, 0.0, 0.0]);
        let l = grid_sample(&[[0.5, 0.5]], 1, 1).unwrap();
        assert_eq!(render_atlas(&l, &[Some(red.clone())], 8).unwrap(), red);
        let empty = grid_sample(&[], 3, 2).unwrap();
        let m = render_atlas(&empty, &[], 4).unwrap();
        assert_eq!((m.width(), m.height()), (12, 8));
        assert!(m.pixels().iter().all(|&p| p == 0.0));
        assert_eq!(render_atlas(&l, &[None], 8), Err(Error::MissingFrame { genome: 0 }));
    }

    proptest! {
        #[test]
        fn representatives_lie_in_their_tiles(pts in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..40), w in 1usize..6, h in 1usize..6) {
            let coords: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            let l = grid_sample(&coords, w, h).unwrap();
            for r in 0..h {
                for c in 0..w {
                    if let Some(i) = l.tile(c, r) {
                        prop_assert_eq!(tile_of(coords[i], w, h), (c, r));
                    }
                }
            }
        }

        #[test]
        fn grid_sample_permutation_invariant(pts in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..30), w in 1usize..5, h in 1usize..5) {
            // Distinct points only, so the tie rule never applies.
            let coords: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            let mut rev = coords.clone();
            rev.reverse();
            let a = grid_sample(&coords, w, h).unwrap();
            let b = grid_sample(&rev, w, h).unwrap();
            let n = coords.len();
            for t in 0..w * h {
                let pa = a.tiles[t].map(|i| coords[i]);
                let pb = b.tiles[t].map(|i| rev[i]);
                let tie = a.tiles[t].is_some_and(|i| {
                    let best = pa.unwrap();
                    let (cx, cy) = ((t % w) as f64 + 0.5, (t / w) as f64 + 0.5);
                    let d = |p: [f64; 2]| (p[0] - cx / w as f64).powi(2) + (p[1] - cy / h as f64).powi(2);
                    (0..n).any(|j| j != i && tile_of(coords[j], w, h) == tile_of(best, w, h) && d(coords[j]) == d(best))
                });
                if !tie {
                    prop_assert_eq!(pa, pb);
                }
            }
        }
    }
}
