//! Dense row-major 2D grids used for label images, binary masks and depth maps.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// Tissue class of a single pixel. The discriminant is the class id written to PGM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum TissueClass {
    #[default]
    Background = 0,
    Liver = 1,
    Gallbladder = 2,
    LiverBed = 3,
}

impl TissueClass {
    pub const ALL: [TissueClass; 4] = [
        TissueClass::Background,
        TissueClass::Liver,
        TissueClass::Gallbladder,
        TissueClass::LiverBed,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }
}

/// Row-major grid; `(x, y)` is `(column, row)` with `y` pointing down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type LabelMask = Grid<TissueClass>;
pub type BinaryMask = Grid<bool>;
pub type DepthMap = Grid<f64>;

/// 8-neighbourhood offsets in raster order.
pub const NEIGHBORS_8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl<T: Clone> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Builds a grid from row-major data. Panics if the length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid data length mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> Option<&T> {
        if self.contains(x, y) {
            Some(&self.data[y as usize * self.width + x as usize])
        } else {
            None
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Iterates `(x, y, &value)` in row-major order.
    pub fn iter_coords(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i % w, i / w, v))
    }
}

impl Grid<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Set pixels in row-major order.
    pub fn pixels(&self) -> Vec<(usize, usize)> {
        self.iter_coords()
            .filter(|(_, _, &v)| v)
            .map(|(x, y, _)| (x, y))
            .collect()
    }

    pub fn from_pixels(width: usize, height: usize, pixels: &[(usize, usize)]) -> Self {
        let mut m = Grid::new(width, height, false);
        for &(x, y) in pixels {
            m.set(x, y, true);
        }
        m
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &BinaryMask) -> BinaryMask {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &BinaryMask) -> BinaryMask {
        self.zip_with(other, |a, b| a && !b)
    }

    fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> BinaryMask {
        assert!(self.same_dims(other), "mask dimension mismatch");
        Grid {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// True when any 8-neighbour of `(x, y)` is set.
    pub fn any_neighbor8(&self, x: usize, y: usize) -> bool {
        NEIGHBORS_8
            .iter()
            .any(|&(dx, dy)| matches!(self.get_signed(x as i64 + dx, y as i64 + dy), Some(true)))
    }

    /// Intersection over union; two empty masks count as a perfect match.
    pub fn iou(&self, other: &BinaryMask) -> f64 {
        let inter = self.and(other).count();
        let union = self.or(other).count();
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

impl LabelMask {
    pub fn class_mask(&self, class: TissueClass) -> BinaryMask {
        self.map(|&c| c == class)
    }

    pub fn class_count(&self, class: TissueClass) -> usize {
        self.data.iter().filter(|&&c| c == class).count()
    }

    /// Binary PGM (P5) with one byte per pixel holding the class id.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "P5\n{} {}\n3\n", self.width, self.height)?;
        let bytes: Vec<u8> = self.data.iter().map(|c| c.id()).collect();
        out.write_all(&bytes)
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.data.len() + 16);
        self.write_pgm(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}
