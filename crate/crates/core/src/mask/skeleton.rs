//! Topology-preserving thinning in the style of Lee, Kashyap & Chu, reduced to 2D.
//!
//! The image is swept repeatedly with a 3×3 window, once per border direction
//! (north, south, east, west). A pixel is a deletion candidate when it is a
//! border pixel of the current direction, is not an arc end, keeps the local
//! Euler number and is simple. Candidates are then re-checked sequentially so
//! that parallel removal cannot disconnect the object. Sweeping stops when a
//! full round of the four directions removes nothing.

use std::sync::OnceLock;

use super::MaskError;
use crate::geometry::PointSet3;
use crate::grid::{BinaryMask, DepthMap};
use crate::perception::{back_project_pixels, CameraModel};

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonPolyline {
    /// Row-major skeleton pixels.
    pub pixels: Vec<(usize, usize)>,
    /// Back-projected points, filled by [`SkeletonPolyline::lift`].
    pub points3d: PointSet3,
}

impl SkeletonPolyline {
    pub fn lift(mut self, depth: &DepthMap, camera: &CameraModel) -> Self {
        self.points3d = back_project_pixels(&self.pixels, depth, camera);
        self
    }
}

/// Neighbour `k` of pixel `(x, y)`, counter-clockwise from east (y down).
const RING: [(i64, i64); 8] = [
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

fn ring_bit(code: u8, k: usize) -> bool {
    code & (1 << (k % 8)) != 0
}

/// Yokoi 8-connectivity number of the centre pixel.
fn connectivity_number(code: u8) -> u32 {
    let off = |k: usize| u32::from(!ring_bit(code, k));
    [0usize, 2, 4, 6]
        .iter()
        .map(|&k| off(k) - off(k) * off(k + 1) * off(k + 2))
        .sum()
}

/// Quad contribution to the 8-connected Euler number, scaled by 4.
fn quad_value(a: bool, b: bool, c: bool, d: bool) -> i32 {
    // a b
    // c d
    match (a as u8) + (b as u8) + (c as u8) + (d as u8) {
        1 => 1,
        3 => -1,
        2 if (a && d) || (b && c) => -2,
        _ => 0,
    }
}

fn euler_invariant(code: u8) -> bool {
    let n = |dx: i64, dy: i64| {
        let k = RING.iter().position(|&o| o == (dx, dy)).unwrap();
        ring_bit(code, k)
    };
    let quads = [
        (n(-1, -1), n(0, -1), n(-1, 0)),
        (n(0, -1), n(1, -1), n(1, 0)),
        (n(-1, 0), n(-1, 1), n(0, 1)),
        (n(1, 0), n(0, 1), n(1, 1)),
    ];
    // Quad corners with the centre at bottom-right, bottom-left, top-right, top-left.
    let delta: i32 = [
        quad_value(quads[0].0, quads[0].1, quads[0].2, true)
            - quad_value(quads[0].0, quads[0].1, quads[0].2, false),
        quad_value(quads[1].0, quads[1].1, true, quads[1].2)
            - quad_value(quads[1].0, quads[1].1, false, quads[1].2),
        quad_value(quads[2].0, true, quads[2].1, quads[2].2)
            - quad_value(quads[2].0, false, quads[2].1, quads[2].2),
        quad_value(true, quads[3].0, quads[3].1, quads[3].2)
            - quad_value(false, quads[3].0, quads[3].1, quads[3].2),
    ]
    .iter()
    .sum();
    delta == 0
}

struct Tables {
    simple: [bool; 256],
    euler: [bool; 256],
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut simple = [false; 256];
        let mut euler = [false; 256];
        for code in 0..=255u8 {
            simple[code as usize] = connectivity_number(code) == 1;
            euler[code as usize] = euler_invariant(code);
        }
        Tables { simple, euler }
    })
}

/// Deleting the centre of this 3×3 neighbourhood preserves topology.
pub fn is_simple(code: u8) -> bool {
    tables().simple[code as usize]
}

fn neighborhood(data: &[bool], w: usize, h: usize, x: usize, y: usize) -> u8 {
    let mut code = 0u8;
    for (k, &(dx, dy)) in RING.iter().enumerate() {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h && data[ny as usize * w + nx as usize]
        {
            code |= 1 << k;
        }
    }
    code
}

/// Offset of the 4-neighbour that must be background for each border direction.
const BORDERS: [(i64, i64); 4] = [(0, -1), (0, 1), (1, 0), (-1, 0)];

/// Thins `mask` to a one-pixel-wide skeleton. Pixels outside the grid count as background.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut data = mask.data().to_vec();
    let t = tables();
    let get = |data: &[bool], x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && data[y as usize * w + x as usize]
    };
    let mut candidates = Vec::new();
    let mut unchanged_borders = 0;
    while unchanged_borders < BORDERS.len() {
        unchanged_borders = 0;
        for &(bx, by) in &BORDERS {
            candidates.clear();
            for y in 0..h {
                for x in 0..w {
                    if !data[y * w + x] || get(&data, x as i64 + bx, y as i64 + by) {
                        continue;
                    }
                    let code = neighborhood(&data, w, h, x, y);
                    if code.count_ones() == 1 {
                        continue;
                    }
                    if t.euler[code as usize] && t.simple[code as usize] {
                        candidates.push((x, y));
                    }
                }
            }
            let mut changed = false;
            for &(x, y) in &candidates {
                if t.simple[neighborhood(&data, w, h, x, y) as usize] {
                    data[y * w + x] = false;
                    changed = true;
                }
            }
            if !changed {
                unchanged_borders += 1;
            }
        }
    }
    BinaryMask::from_vec(w, h, data)
}

/// Skeleton pixels of `mask`; `points3d` is left empty until [`SkeletonPolyline::lift`].
pub fn skeletonize(mask: &BinaryMask) -> Result<SkeletonPolyline, MaskError> {
    if mask.is_empty_mask() {
        return Err(MaskError::MaskTooSmall {
            area: 0,
            min_area: 1,
        });
    }
    Ok(SkeletonPolyline {
        pixels: thin(mask).pixels(),
        points3d: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lut_classifies_textbook_cases() {
        assert!(!is_simple(0)); // isolated pixel
        assert!(!is_simple(255)); // interior pixel
        assert!(is_simple(0b0000_0001)); // arc end
        assert!(!is_simple(0b0001_0001)); // middle of a horizontal line
        assert!(is_simple(0b0000_0111)); // corner of a block
    }

    #[test]
    fn euler_table_agrees_with_simplicity_on_simple_points() {
        for code in 0..=255u8 {
            if is_simple(code) {
                assert!(tables().euler[code as usize], "code {code:08b}");
            }
        }
    }

    #[test]
    fn one_pixel_line_is_already_thin() {
        let pixels: Vec<_> = (3..13).map(|x| (x, 5)).collect();
        let m = BinaryMask::from_pixels(16, 11, &pixels);
        let s = skeletonize(&m).unwrap();
        assert_eq!(s.pixels, pixels);
    }

    #[test]
    fn empty_mask_is_rejected() {
        assert!(matches!(
            skeletonize(&BinaryMask::new(4, 4, false)),
            Err(MaskError::MaskTooSmall { .. })
        ));
    }

    #[test]
    fn filled_rectangle_thins_to_a_connected_line() {
        let mut m = BinaryMask::new(30, 12, false);
        for y in 2..9 {
            for x in 3..27 {
                m.set(x, y, true);
            }
        }
        let s = thin(&m);
        assert_eq!(super::super::components8(&s).len(), 1);
        assert!(s.count() < 30);
        assert!(s.pixels().iter().all(|&(x, y)| *m.get(x, y)));
    }
}
