//! Brute-force references shared by the oracle and acceptance tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use autodissect::{BinaryMask, Vec3};
use nalgebra::Rotation3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Foreground 8-components and background 4-components (with a one-pixel
/// background frame around the image).
pub fn topology(data: &[bool], w: usize, h: usize) -> (usize, usize) {
    let (pw, ph) = (w + 2, h + 2);
    let fg = |x: usize, y: usize| x >= 1 && y >= 1 && x <= w && y <= h && data[(y - 1) * w + (x - 1)];
    let mut seen = vec![false; pw * ph];
    let (mut fg_count, mut bg_count) = (0, 0);
    for start in 0..pw * ph {
        if seen[start] {
            continue;
        }
        let (sx, sy) = (start % pw, start / pw);
        let want = fg(sx, sy);
        if want {
            fg_count += 1;
        } else {
            bg_count += 1;
        }
        let nbrs: &[(i64, i64)] = if want {
            &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
        } else {
            &[(1, 0), (-1, 0), (0, 1), (0, -1)]
        };
        let mut queue = VecDeque::from([(sx, sy)]);
        seen[start] = true;
        while let Some((x, y)) = queue.pop_front() {
            for &(dx, dy) in nbrs {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= pw as i64 || ny >= ph as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                let k = ny * pw + nx;
                if !seen[k] && fg(nx, ny) == want {
                    seen[k] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    (fg_count, bg_count)
}

fn deletion_preserves_topology(data: &mut [bool], w: usize, h: usize, i: usize) -> bool {
    let before = topology(data, w, h);
    data[i] = false;
    let after = topology(data, w, h);
    data[i] = true;
    before == after
}

fn neighbour_count(data: &[bool], w: usize, h: usize, x: usize, y: usize) -> usize {
    let mut n = 0;
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if (dx, dy) != (0, 0) && nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                n += data[ny as usize * w + nx as usize] as usize;
            }
        }
    }
    n
}

pub fn reference_thin(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut data = mask.data().to_vec();
    let borders = [(0i64, -1i64), (0, 1), (1, 0), (-1, 0)];
    let is_fg = |data: &[bool], x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && data[y as usize * w + x as usize]
    };
    loop {
        let mut any_change = false;
        for &(bx, by) in &borders {
            let mut candidates = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    if !data[i] || is_fg(&data, x as i64 + bx, y as i64 + by) {
                        continue;
                    }
                    if neighbour_count(&data, w, h, x, y) == 1 {
                        continue;
                    }
                    if deletion_preserves_topology(&mut data, w, h, i) {
                        candidates.push(i);
                    }
                }
            }
            for i in candidates {
                if deletion_preserves_topology(&mut data, w, h, i) {
                    data[i] = false;
                    any_change = true;
                }
            }
        }
        if !any_change {
            break;
        }
    }
    BinaryMask::from_vec(w, h, data)
}

pub fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize) -> BinaryMask {
    match rng.random_range(0..3) {
        // Salt and pepper at a random density.
        0 => {
            let p: f64 = rng.random_range(0.2..0.8);
            BinaryMask::from_fn(w, h, |_, _| rng.random::<f64>() < p)
        }
        // Union of rectangles, with a few holes punched in.
        1 => {
            let mut m = BinaryMask::new(w, h, false);
            for _ in 0..rng.random_range(1..5) {
                let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
                let (x1, y1) = (rng.random_range(x0..w), rng.random_range(y0..h));
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        m.set(x, y, true);
                    }
                }
            }
            for _ in 0..rng.random_range(0..4) {
                m.set(rng.random_range(0..w), rng.random_range(0..h), false);
            }
            m
        }
        // Filled disc.
        _ => {
            let (cx, cy) = (rng.random_range(3.0..13.0), rng.random_range(3.0..13.0));
            let r: f64 = rng.random_range(2.0..8.0);
            BinaryMask::from_fn(w, h, |x, y| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
        }
    }
}

/// Cyclic Jacobi rotations on a 3×3 symmetric matrix; returns eigenvalues, descending.
pub fn jacobi_eigenvalues(mut a: [[f64; 3]; 3]) -> [f64; 3] {
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut b = a;
            for k in 0..3 {
                b[k][p] = c * a[k][p] - s * a[k][q];
                b[k][q] = s * a[k][p] + c * a[k][q];
            }
            let mut r = b;
            for k in 0..3 {
                r[p][k] = c * b[p][k] - s * b[q][k];
                r[q][k] = s * b[p][k] + c * b[q][k];
            }
            a = r;
        }
    }
    let mut ev = [a[0][0], a[1][1], a[2][2]];
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

pub fn brute_covariance(points: &[Vec3]) -> [[f64; 3]; 3] {
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k] / n;
        }
    }
    let mut c = [[0.0; 3]; 3];
    for p in points {
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / n;
            }
        }
    }
    c
}

pub fn random_cloud(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let n = rng.random_range(5..60);
    let scales = [rng.random_range(0.5..10.0), rng.random_range(0.5..5.0), rng.random_range(0.05..2.0)];
    let rot = Rotation3::from_euler_angles(
        rng.random_range(-3.0..3.0),
        rng.random_range(-1.5..1.5),
        rng.random_range(-3.0..3.0),
    );
    let offset = Vec3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(50.0..150.0));
    (0..n)
        .map(|_| {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0) * scales[0],
                rng.random_range(-1.0..1.0) * scales[1],
                rng.random_range(-1.0..1.0) * scales[2],
            );
            rot * v + offset
        })
        .collect()
}

/// Every `w`×`h` binary mask, in bit order.
pub fn all_masks(w: usize, h: usize) -> impl Iterator<Item = BinaryMask> {
    (0u32..(1 << (w * h))).map(move |bits| BinaryMask::from_vec(w, h, (0..w * h).map(|k| bits & (1 << k) != 0).collect()))
}

/// The 500-mask random corpus used by the thinning checks.
pub fn random_corpus() -> Vec<BinaryMask> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    (0..500).map(|_| random_mask(&mut rng, 16, 16)).collect()
}
