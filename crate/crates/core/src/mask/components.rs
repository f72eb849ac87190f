use std::collections::VecDeque;

use super::MaskError;
use crate::grid::{BinaryMask, NEIGHBORS_8};

/// 100 mm² at the default 0.25 mm per pixel; well above saturated-noise speckle.
pub const DEFAULT_MIN_AREA_PX: usize = 1600;

/// 8-connected components, each listed in BFS order; components appear in
/// raster order of their first pixel.
pub fn components8(mask: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !*mask.get(x, y) || seen[i] {
                continue;
            }
            seen[i] = true;
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([(x, y)]);
            while let Some((cx, cy)) = queue.pop_front() {
                comp.push((cx, cy));
                for &(dx, dy) in &NEIGHBORS_8 {
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if matches!(mask.get_signed(nx, ny), Some(true)) {
                        let j = ny as usize * w + nx as usize;
                        if !seen[j] {
                            seen[j] = true;
                            queue.push_back((nx as usize, ny as usize));
                        }
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

/// Keeps the largest 8-connected component (first in raster order on ties).
pub fn largest_component(mask: &BinaryMask, min_area_px: usize) -> Result<BinaryMask, MaskError> {
    let comps = components8(mask);
    let best = comps
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
        .map(|(_, c)| c);
    let area = best.map_or(0, |c| c.len());
    if area < min_area_px || area == 0 {
        return Err(MaskError::MaskTooSmall {
            area,
            min_area: min_area_px,
        });
    }
    let (w, h) = mask.dims();
    Ok(BinaryMask::from_pixels(w, h, best.unwrap()))
}
