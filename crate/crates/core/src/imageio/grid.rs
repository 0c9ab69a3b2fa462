use crate::tensor::Tensor;

/// Pixel-centre coordinates of an `H×W` image, row-major, one `(x, y)` row per pixel.
///
/// Column `i` maps to `x = 2(i + 0.5)/W − 1` and row `j` to `y = 2(j + 0.5)/H − 1`,
/// so every component lies strictly inside `(−1, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateGrid {
    height: usize,
    width: usize,
    coords: Tensor<f32>,
}

impl CoordinateGrid {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `[H·W × 2]` coordinate matrix.
    pub fn coords(&self) -> &Tensor<f32> {
        &self.coords
    }

    /// Grid restricted to the given pixel rows (indices into the row-major order).
    pub fn select(&self, rows: &[usize]) -> Tensor<f32> {
        let data = rows
            .iter()
            .flat_map(|&r| self.coords.data()[2 * r..2 * r + 2].iter().copied())
            .collect();
        Tensor::new(vec![rows.len().max(1), 2], data).expect("non-empty row selection")
    }
}

fn centre(i: usize, extent: usize) -> f32 {
    (2.0 * (i as f64 + 0.5) / extent as f64 - 1.0) as f32
}

/// Builds the canonical coordinate grid shared by training and decoding.
pub fn make_coordinate_grid(height: usize, width: usize) -> CoordinateGrid {
    assert!(height >= 1 && width >= 1, "grid extents must be positive");
    let mut data = Vec::with_capacity(2 * height * width);
    for row in 0..height {
        let y = centre(row, height);
        for col in 0..width {
            data.push(centre(col, width));
            data.push(y);
        }
    }
    CoordinateGrid {
        height,
        width,
        coords: Tensor::new(vec![height * width, 2], data).expect("grid shape"),
    }
}
