//! Binary instance masks with a run-length codec and set algebra.
//!
//! Masks are stored as run lengths over the column-major pixel scan (linear
//! index `col * height + row`): the first count covers zeros, counts alternate
//! zero/one runs, and they sum to `width * height`. Only the first count may
//! be zero, which makes the representation canonical — two masks are pixelwise
//! equal exactly when their fields compare equal.
//!
//! All set operations work directly on runs, so their cost scales with the
//! number of runs rather than the pixel count. Decoding to a [`BitGrid`] is
//! provided for tests and golden fixtures.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::BBox;

#[derive(Debug, Error, PartialEq)]
pub enum MaskError {
    #[error("mask dimensions {width}x{height} invalid: {reason}")]
    InvalidDimensions {
        width: u32,
        height: u32,
        reason: &'static str,
    },

    #[error("run-length counts invalid for {width}x{height} mask: {reason}")]
    InvalidCounts {
        width: u32,
        height: u32,
        reason: &'static str,
    },

    #[error("mask dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("column span (col {col}, rows {row_start}..{row_end}) outside {width}x{height} mask")]
    SpanOutOfBounds {
        col: u32,
        row_start: u32,
        row_end: u32,
        width: u32,
        height: u32,
    },

    #[error("polygon needs at least three vertices with finite coordinates")]
    DegeneratePolygon,

    #[error("operation requires a nonempty mask")]
    EmptyMask,
}

fn check_dims(width: u32, height: u32) -> Result<(), MaskError> {
    if width == 0 || height == 0 {
        return Err(MaskError::InvalidDimensions {
            width,
            height,
            reason: "dimensions must be positive",
        });
    }
    if width as u64 * height as u64 > u32::MAX as u64 {
        return Err(MaskError::InvalidDimensions {
            width,
            height,
            reason: "pixel count exceeds u32 range",
        });
    }
    Ok(())
}

/// Dense row-major boolean grid; the decoded form of a [`Mask`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitGrid {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BitGrid {
    pub fn new(width: u32, height: u32) -> Result<Self, MaskError> {
        check_dims(width, height)?;
        Ok(BitGrid {
            width,
            height,
            bits: vec![false; (width * height) as usize],
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, row: u32, col: u32) -> bool {
        assert!(row < self.height && col < self.width, "pixel out of range");
        self.bits[(row * self.width + col) as usize]
    }

    pub fn set(&mut self, row: u32, col: u32, value: bool) {
        assert!(row < self.height && col < self.width, "pixel out of range");
        self.bits[(row * self.width + col) as usize] = value;
    }
}

/// Run-length-encoded binary mask. See the module docs for the encoding.
///
/// Serialized as the object `{"width", "height", "counts"}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    counts: Vec<u32>,
}

impl Mask {
    /// All-background mask.
    pub fn empty(width: u32, height: u32) -> Result<Self, MaskError> {
        check_dims(width, height)?;
        Ok(Mask {
            width,
            height,
            counts: vec![width * height],
        })
    }

    /// Builds a mask from raw run-length counts, validating every invariant.
    pub fn from_counts(width: u32, height: u32, counts: Vec<u32>) -> Result<Self, MaskError> {
        check_dims(width, height)?;
        let invalid = |reason| MaskError::InvalidCounts {
            width,
            height,
            reason,
        };
        if counts.is_empty() {
            return Err(invalid("counts must not be empty"));
        }
        if counts.iter().skip(1).any(|&c| c == 0) {
            return Err(invalid("only the first count may be zero"));
        }
        let sum: u64 = counts.iter().map(|&c| c as u64).sum();
        if sum != width as u64 * height as u64 {
            return Err(invalid("counts must sum to width * height"));
        }
        Ok(Mask {
            width,
            height,
            counts,
        })
    }

    /// Encodes a dense grid (column-major scan).
    pub fn encode(grid: &BitGrid) -> Mask {
        let mut counts: Vec<u32> = Vec::new();
        let mut current = false; // runs start with zeros
        let mut run = 0u32;
        for col in 0..grid.width {
            for row in 0..grid.height {
                let bit = grid.get(row, col);
                if bit == current {
                    run += 1;
                } else {
                    counts.push(run);
                    current = bit;
                    run = 1;
                }
            }
        }
        counts.push(run);
        Mask {
            width: grid.width,
            height: grid.height,
            counts,
        }
    }

    /// Decodes to a dense grid; exact inverse of [`Mask::encode`].
    pub fn decode(&self) -> BitGrid {
        let mut grid = BitGrid::new(self.width, self.height).expect("mask dims are valid");
        for (start, end) in self.one_runs() {
            for idx in start..end {
                let col = (idx / self.height as u64) as u32;
                let row = (idx % self.height as u64) as u32;
                grid.set(row, col, true);
            }
        }
        grid
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// The raw run-length counts (canonical form).
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Foreground pixel count.
    pub fn area(&self) -> u64 {
        self.counts
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&c| c as u64)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    fn total(&self) -> u64 {
        self.width as u64 * self.height as u64
    }

    /// Foreground intervals `[start, end)` in column-major linear order.
    pub fn one_runs(&self) -> Vec<(u64, u64)> {
        let mut runs = Vec::with_capacity(self.counts.len() / 2);
        let mut pos = 0u64;
        for (i, &c) in self.counts.iter().enumerate() {
            if i % 2 == 1 {
                runs.push((pos, pos + c as u64));
            }
            pos += c as u64;
        }
        runs
    }

    /// Rebuilds canonical counts from sorted, non-overlapping (possibly
    /// adjacent) foreground intervals.
    fn from_sorted_runs(width: u32, height: u32, runs: &[(u64, u64)]) -> Mask {
        let total = width as u64 * height as u64;
        let mut counts: Vec<u32> = Vec::with_capacity(runs.len() * 2 + 1);
        let mut prev_end = 0u64;
        for &(start, end) in runs {
            debug_assert!(start >= prev_end && start <= end && end <= total);
            if start == end {
                continue;
            }
            if start == prev_end && prev_end > 0 {
                // Adjacent to the previous foreground run: extend it.
                let last = counts.last_mut().expect("a run was already emitted");
                *last += (end - start) as u32;
            } else {
                counts.push((start - prev_end) as u32); // gap (may be 0 only at the front)
                counts.push((end - start) as u32);
            }
            prev_end = end;
        }
        if counts.is_empty() {
            counts.push(total as u32);
        } else if prev_end < total {
            counts.push((total - prev_end) as u32);
        }
        Mask {
            width,
            height,
            counts,
        }
    }

    fn check_same_dims(&self, other: &Mask) -> Result<(), MaskError> {
        if self.width != other.width || self.height != other.height {
            return Err(MaskError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    fn combine(&self, other: &Mask, keep: impl Fn(bool, bool) -> bool) -> Mask {
        let a = self.one_runs();
        let b = other.one_runs();
        let total = self.total();
        let mut out: Vec<(u64, u64)> = Vec::new();
        let (mut ia, mut ib) = (0usize, 0usize);
        let mut pos = 0u64;
        while pos < total {
            while ia < a.len() && a[ia].1 <= pos {
                ia += 1;
            }
            while ib < b.len() && b[ib].1 <= pos {
                ib += 1;
            }
            let in_a = ia < a.len() && a[ia].0 <= pos;
            let in_b = ib < b.len() && b[ib].0 <= pos;
            let next_a = a
                .get(ia)
                .map_or(total, |r| if r.0 > pos { r.0 } else { r.1 });
            let next_b = b
                .get(ib)
                .map_or(total, |r| if r.0 > pos { r.0 } else { r.1 });
            let next = next_a.min(next_b).min(total);
            if keep(in_a, in_b) {
                match out.last_mut() {
                    Some(last) if last.1 == pos => last.1 = next,
                    _ => out.push((pos, next)),
                }
            }
            pos = next;
        }
        Mask::from_sorted_runs(self.width, self.height, &out)
    }

    /// Pixelwise OR.
    pub fn union(&self, other: &Mask) -> Result<Mask, MaskError> {
        self.check_same_dims(other)?;
        Ok(self.combine(other, |a, b| a || b))
    }

    /// Pixelwise `self AND NOT other`.
    pub fn subtract(&self, other: &Mask) -> Result<Mask, MaskError> {
        self.check_same_dims(other)?;
        Ok(self.combine(other, |a, b| a && !b))
    }

    /// Pixelwise AND.
    pub fn intersect(&self, other: &Mask) -> Result<Mask, MaskError> {
        self.check_same_dims(other)?;
        Ok(self.combine(other, |a, b| a && b))
    }

    /// Pixelwise NOT.
    pub fn complement(&self) -> Mask {
        let counts = if self.counts[0] == 0 {
            self.counts[1..].to_vec()
        } else {
            let mut v = Vec::with_capacity(self.counts.len() + 1);
            v.push(0);
            v.extend_from_slice(&self.counts);
            v
        };
        Mask {
            width: self.width,
            height: self.height,
            counts,
        }
    }

    /// Overlap pixel count, without materializing the intersection.
    pub fn intersection_area(&self, other: &Mask) -> Result<u64, MaskError> {
        self.check_same_dims(other)?;
        let a = self.one_runs();
        let b = other.one_runs();
        let (mut ia, mut ib) = (0usize, 0usize);
        let mut acc = 0u64;
        while ia < a.len() && ib < b.len() {
            let lo = a[ia].0.max(b[ib].0);
            let hi = a[ia].1.min(b[ib].1);
            if lo < hi {
                acc += hi - lo;
            }
            if a[ia].1 <= b[ib].1 {
                ia += 1;
            } else {
                ib += 1;
            }
        }
        Ok(acc)
    }

    /// Intersection over union; 0 when both masks are empty.
    pub fn iou(&self, other: &Mask) -> Result<f64, MaskError> {
        let inter = self.intersection_area(other)?;
        let union = self.area() + other.area() - inter;
        Ok(if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        })
    }

    /// True when every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> Result<bool, MaskError> {
        Ok(self.intersection_area(other)? == self.area())
    }

    /// Tight bounding box in the pixel-index convention
    /// `[col_min, row_min, col_max + 1, row_max + 1]`.
    pub fn bbox(&self) -> Result<BBox, MaskError> {
        let h = self.height as u64;
        let mut col_min = u64::MAX;
        let mut col_max = 0u64;
        let mut row_min = u64::MAX;
        let mut row_max = 0u64;
        let mut any = false;
        for (start, end) in self.one_runs() {
            any = true;
            let c0 = start / h;
            let c1 = (end - 1) / h;
            col_min = col_min.min(c0);
            col_max = col_max.max(c1);
            if c1 > c0 {
                // The run wraps a column boundary, so it touches row 0 and
                // row height-1.
                row_min = 0;
                row_max = h - 1;
            } else {
                row_min = row_min.min(start % h);
                row_max = row_max.max((end - 1) % h);
            }
        }
        if !any {
            return Err(MaskError::EmptyMask);
        }
        Ok(BBox::new(
            col_min as f64,
            row_min as f64,
            (col_max + 1) as f64,
            (row_max + 1) as f64,
        )
        .expect("mask bbox corners are ordered"))
    }

    /// Mean of foreground pixel centers, i.e. `(col + 0.5, row + 0.5)`.
    pub fn centroid(&self) -> Result<(f64, f64), MaskError> {
        let h = self.height as u64;
        let mut count = 0u64;
        let mut sum_col = 0u64;
        let mut sum_row = 0u64;
        for (start, end) in self.one_runs() {
            let mut cur = start;
            while cur < end {
                let col = cur / h;
                let r0 = cur % h;
                let rows = (h - r0).min(end - cur);
                let r1 = r0 + rows;
                count += rows;
                sum_col += col * rows;
                // sum of integers r0..r1-1
                sum_row += (r0 + r1 - 1) * rows / 2;
                cur += rows;
            }
        }
        if count == 0 {
            return Err(MaskError::EmptyMask);
        }
        Ok((
            sum_col as f64 / count as f64 + 0.5,
            sum_row as f64 / count as f64 + 0.5,
        ))
    }

    /// Per-column foreground row spans `(col, row_start, row_end)`.
    pub fn column_spans(&self) -> Vec<(u32, u32, u32)> {
        let h = self.height as u64;
        let mut spans = Vec::new();
        for (start, end) in self.one_runs() {
            let mut cur = start;
            while cur < end {
                let col = (cur / h) as u32;
                let r0 = (cur % h) as u32;
                let rows = (h - r0 as u64).min(end - cur);
                spans.push((col, r0, r0 + rows as u32));
                cur += rows;
            }
        }
        spans
    }

    /// Builds a mask from per-column row spans. Spans may arrive unsorted and
    /// overlapping; they are normalized.
    pub fn from_column_spans(
        width: u32,
        height: u32,
        spans: &[(u32, u32, u32)],
    ) -> Result<Mask, MaskError> {
        check_dims(width, height)?;
        let h = height as u64;
        let mut runs: Vec<(u64, u64)> = Vec::with_capacity(spans.len());
        for &(col, r0, r1) in spans {
            if col >= width || r0 > r1 || r1 > height {
                return Err(MaskError::SpanOutOfBounds {
                    col,
                    row_start: r0,
                    row_end: r1,
                    width,
                    height,
                });
            }
            if r0 < r1 {
                runs.push((col as u64 * h + r0 as u64, col as u64 * h + r1 as u64));
            }
        }
        runs.sort_unstable();
        // Merge overlapping or adjacent intervals into disjoint sorted runs.
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(runs.len());
        for (s, e) in runs {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        Ok(Mask::from_sorted_runs(width, height, &merged))
    }

    /// Solid rectangle covering pixel columns `[col_start, col_end)` and rows
    /// `[row_start, row_end)`. Empty ranges yield an empty mask.
    pub fn solid_rect(
        width: u32,
        height: u32,
        col_start: u32,
        row_start: u32,
        col_end: u32,
        row_end: u32,
    ) -> Result<Mask, MaskError> {
        check_dims(width, height)?;
        if col_start > col_end || col_end > width || row_start > row_end || row_end > height {
            return Err(MaskError::SpanOutOfBounds {
                col: col_start,
                row_start,
                row_end,
                width,
                height,
            });
        }
        let spans: Vec<(u32, u32, u32)> = (col_start..col_end)
            .map(|c| (c, row_start, row_end))
            .collect();
        Mask::from_column_spans(width, height, &spans)
    }

    /// Keeps only the pixels whose indices fall inside the (outward-rounded)
    /// box: columns `[floor(x_min), ceil(x_max))`, rows likewise. Clipping to
    /// a mask's own bounding box is the identity.
    pub fn clip_to_box(&self, bound: &BBox) -> Mask {
        let c0 = bound.x_min().floor().max(0.0) as u32;
        let c1 = (bound.x_max().ceil().max(0.0) as u64).min(self.width as u64) as u32;
        let r0 = bound.y_min().floor().max(0.0) as u32;
        let r1 = (bound.y_max().ceil().max(0.0) as u64).min(self.height as u64) as u32;
        if c0 >= c1 || r0 >= r1 {
            return Mask::empty(self.width, self.height).expect("mask dims are valid");
        }
        let rect = Mask::solid_rect(self.width, self.height, c0, r0, c1, r1)
            .expect("clip rectangle is in bounds");
        self.intersect(&rect).expect("dimensions match")
    }

    /// Shift by whole pixels; anything pushed outside the image is discarded.
    pub fn translated(&self, dx: i64, dy: i64) -> Mask {
        if dx == 0 && dy == 0 {
            return self.clone();
        }
        let mut spans = Vec::new();
        for (col, r0, r1) in self.column_spans() {
            let c = col as i64 + dx;
            if c < 0 || c >= self.width as i64 {
                continue;
            }
            let nr0 = (r0 as i64 + dy).clamp(0, self.height as i64);
            let nr1 = (r1 as i64 + dy).clamp(0, self.height as i64);
            if nr0 < nr1 {
                spans.push((c as u32, nr0 as u32, nr1 as u32));
            }
        }
        Mask::from_column_spans(self.width, self.height, &spans).expect("spans are clamped")
    }

    /// Morphological dilation by a `(2r+1)`-square structuring element,
    /// clipped at the image boundary.
    pub fn dilate(&self, radius: u32) -> Mask {
        if radius == 0 || self.is_empty() {
            return self.clone();
        }
        let r = radius as i64;
        let mut spans = Vec::new();
        for (col, r0, r1) in self.column_spans() {
            let nr0 = (r0 as i64 - r).max(0) as u32;
            let nr1 = (r1 as i64 + r).min(self.height as i64) as u32;
            let c_lo = (col as i64 - r).max(0);
            let c_hi = (col as i64 + r).min(self.width as i64 - 1);
            for c in c_lo..=c_hi {
                spans.push((c as u32, nr0, nr1));
            }
        }
        Mask::from_column_spans(self.width, self.height, &spans).expect("spans are clamped")
    }

    /// Morphological erosion by a `(2r+1)`-square structuring element. The
    /// neighborhood is clipped at the image boundary, so border pixels only
    /// need their in-image neighbors to be foreground.
    pub fn erode(&self, radius: u32) -> Mask {
        if radius == 0 {
            return self.clone();
        }
        self.complement().dilate(radius).complement()
    }
}

impl Serialize for Mask {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Mask", 3)?;
        s.serialize_field("width", &self.width)?;
        s.serialize_field("height", &self.height)?;
        s.serialize_field("counts", &self.counts)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            width: u32,
            height: u32,
            counts: Vec<u32>,
        }
        let repr = Repr::deserialize(deserializer)?;
        Mask::from_counts(repr.width, repr.height, repr.counts).map_err(D::Error::custom)
    }
}

/// Rasterizes a convex polygon to a mask clipped to `width x height`.
///
/// A pixel is foreground when its center `(col + 0.5, row + 0.5)` lies inside
/// the polygon (boundary inclusive). Vertex order may be clockwise or
/// counter-clockwise; convexity is assumed, not checked.
pub fn rasterize_convex_polygon(
    points: &[(f64, f64)],
    width: u32,
    height: u32,
) -> Result<Mask, MaskError> {
    check_dims(width, height)?;
    if points.len() < 3 || points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(MaskError::DegeneratePolygon);
    }
    let min_x = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_x = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);

    // Columns whose center x = col + 0.5 falls inside [min_x, max_x].
    let col_lo = (min_x - 0.5).ceil().max(0.0) as i64;
    let col_hi = (max_x - 0.5).floor().min(width as f64 - 1.0) as i64;
    let mut spans = Vec::new();
    for col in col_lo..=col_hi {
        let x = col as f64 + 0.5;
        let mut y_lo = f64::INFINITY;
        let mut y_hi = f64::NEG_INFINITY;
        for i in 0..points.len() {
            let (px, py) = points[i];
            let (qx, qy) = points[(i + 1) % points.len()];
            if x < px.min(qx) || x > px.max(qx) {
                continue;
            }
            if px == qx {
                // Vertical edge exactly at this column center.
                y_lo = y_lo.min(py.min(qy));
                y_hi = y_hi.max(py.max(qy));
            } else {
                let t = (x - px) / (qx - px);
                let y = py + t * (qy - py);
                y_lo = y_lo.min(y);
                y_hi = y_hi.max(y);
            }
        }
        if y_lo > y_hi {
            continue;
        }
        // Rows whose center y = row + 0.5 falls inside [y_lo, y_hi].
        let r0 = (y_lo - 0.5).ceil().max(0.0) as i64;
        let r1 = (y_hi - 0.5).floor().min(height as f64 - 1.0) as i64;
        if r0 <= r1 {
            spans.push((col as u32, r0 as u32, r1 as u32 + 1));
        }
    }
    Mask::from_column_spans(width, height, &spans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask(width: u32, height: u32, counts: &[u32]) -> Mask {
        Mask::from_counts(width, height, counts.to_vec()).unwrap()
    }

    #[test]
    fn golden_counts_all_zero() {
        let grid = BitGrid::new(2, 2).unwrap();
        assert_eq!(Mask::encode(&grid).counts(), &[4]);
    }

    #[test]
    fn golden_counts_all_one() {
        let mut grid = BitGrid::new(2, 2).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                grid.set(r, c, true);
            }
        }
        assert_eq!(Mask::encode(&grid).counts(), &[0, 4]);
    }

    #[test]
    fn golden_counts_single_pixel_row0_col1() {
        let mut grid = BitGrid::new(2, 2).unwrap();
        grid.set(0, 1, true);
        assert_eq!(Mask::encode(&grid).counts(), &[2, 1, 1]);
    }

    #[test]
    fn decode_inverts_encode() {
        let mut grid = BitGrid::new(3, 2).unwrap();
        grid.set(0, 0, true);
        grid.set(1, 2, true);
        let m = Mask::encode(&grid);
        assert_eq!(m.decode(), grid);
    }

    #[test]
    fn from_counts_rejects_bad_input() {
        assert!(Mask::from_counts(2, 2, vec![1, 0, 3]).is_err()); // inner zero
        assert!(Mask::from_counts(2, 2, vec![3]).is_err()); // wrong sum
        assert!(Mask::from_counts(2, 2, vec![]).is_err());
        assert!(Mask::from_counts(0, 2, vec![0]).is_err());
        assert!(Mask::from_counts(2, 2, vec![2, 1, 1]).is_ok());
    }

    #[test]
    fn subtract_self_is_empty() {
        let m = mask(2, 2, &[1, 3]);
        assert!(m.subtract(&m).unwrap().is_empty());
    }

    #[test]
    fn subtract_empty_is_identity() {
        let m = mask(2, 2, &[1, 3]);
        let empty = Mask::empty(2, 2).unwrap();
        assert_eq!(m.subtract(&empty).unwrap(), m);
    }

    #[test]
    fn subtract_leaves_disjoint_remainder() {
        // 2x1 image: both pixels set; shadow is the left pixel (col 0).
        let association = mask(2, 1, &[0, 2]);
        let shadow = mask(2, 1, &[0, 1, 1]);
        let object = association.subtract(&shadow).unwrap();
        assert_eq!(object.counts(), &[1, 1]); // right pixel only
    }

    #[test]
    fn union_identities() {
        let m = mask(2, 2, &[1, 2, 1]);
        let empty = Mask::empty(2, 2).unwrap();
        assert_eq!(m.union(&empty).unwrap(), m);
        assert_eq!(m.union(&m).unwrap(), m);
        let a = mask(2, 2, &[0, 1, 3]);
        let b = mask(2, 2, &[3, 1]);
        let u = a.union(&b).unwrap();
        assert_eq!(u.area(), 2);
    }

    #[test]
    fn iou_identical_disjoint_empty() {
        let m = mask(2, 2, &[1, 2, 1]);
        assert_eq!(m.iou(&m).unwrap(), 1.0);
        let a = mask(2, 2, &[0, 1, 3]);
        let b = mask(2, 2, &[3, 1]);
        assert_eq!(a.iou(&b).unwrap(), 0.0);
        let empty = Mask::empty(2, 2).unwrap();
        assert_eq!(empty.iou(&empty).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Mask::empty(2, 2).unwrap();
        let b = Mask::empty(3, 2).unwrap();
        assert!(matches!(
            a.union(&b),
            Err(MaskError::DimensionMismatch(2, 2, 3, 2))
        ));
    }

    #[test]
    fn bbox_area_centroid_single_pixel() {
        // Pixel at row 1, col 2 in a 4x3 image.
        let mut grid = BitGrid::new(4, 3).unwrap();
        grid.set(1, 2, true);
        let m = Mask::encode(&grid);
        assert_eq!(m.area(), 1);
        assert_eq!(m.bbox().unwrap(), BBox::new(2.0, 1.0, 3.0, 2.0).unwrap());
        assert_eq!(m.centroid().unwrap(), (2.5, 1.5));
    }

    #[test]
    fn bbox_and_centroid_of_full_mask() {
        let m = mask(4, 6, &[0, 24]);
        assert_eq!(m.bbox().unwrap(), BBox::new(0.0, 0.0, 4.0, 6.0).unwrap());
        assert_eq!(m.centroid().unwrap(), (2.0, 3.0));
    }

    #[test]
    fn centroid_of_two_pixels() {
        // (row 0, col 0) and (row 0, col 2) in a 3-wide, 1-tall image.
        let mut grid = BitGrid::new(3, 1).unwrap();
        grid.set(0, 0, true);
        grid.set(0, 2, true);
        let m = Mask::encode(&grid);
        assert_eq!(m.centroid().unwrap(), (1.5, 0.5));
    }

    #[test]
    fn empty_mask_bbox_and_centroid_error() {
        let empty = Mask::empty(2, 2).unwrap();
        assert!(matches!(empty.bbox(), Err(MaskError::EmptyMask)));
        assert!(matches!(empty.centroid(), Err(MaskError::EmptyMask)));
    }

    #[test]
    fn solid_rect_matches_dense_construction() {
        let m = Mask::solid_rect(6, 5, 1, 2, 4, 4).unwrap();
        let mut grid = BitGrid::new(6, 5).unwrap();
        for col in 1..4 {
            for row in 2..4 {
                grid.set(row, col, true);
            }
        }
        assert_eq!(m, Mask::encode(&grid));
        assert_eq!(m.area(), 6);
    }

    #[test]
    fn clip_to_own_bbox_is_identity() {
        let m = Mask::solid_rect(8, 8, 2, 3, 6, 7).unwrap();
        assert_eq!(m.clip_to_box(&m.bbox().unwrap()), m);
    }

    #[test]
    fn clip_to_disjoint_box_is_empty() {
        let m = Mask::solid_rect(8, 8, 0, 0, 2, 2).unwrap();
        let far = BBox::new(5.0, 5.0, 7.0, 7.0).unwrap();
        assert!(m.clip_to_box(&far).is_empty());
    }

    #[test]
    fn translate_moves_and_clips() {
        let m = Mask::solid_rect(4, 4, 0, 0, 2, 2).unwrap();
        let t = m.translated(2, 3);
        assert_eq!(t, Mask::solid_rect(4, 4, 2, 3, 4, 4).unwrap());
        assert_eq!(m.translated(0, 0), m);
        assert!(m.translated(10, 0).is_empty());
    }

    #[test]
    fn dilation_grows_a_point_into_a_square() {
        let mut grid = BitGrid::new(7, 7).unwrap();
        grid.set(3, 3, true);
        let m = Mask::encode(&grid);
        let d = m.dilate(2);
        assert_eq!(d, Mask::solid_rect(7, 7, 1, 1, 6, 6).unwrap());
    }

    #[test]
    fn erosion_shrinks_a_square() {
        let m = Mask::solid_rect(9, 9, 1, 1, 8, 8).unwrap();
        let e = m.erode(2);
        assert_eq!(e, Mask::solid_rect(9, 9, 3, 3, 6, 6).unwrap());
    }

    #[test]
    fn rasterize_axis_aligned_quad_equals_solid_rect() {
        let quad = [(1.0, 2.0), (5.0, 2.0), (5.0, 6.0), (1.0, 6.0)];
        let m = rasterize_convex_polygon(&quad, 8, 8).unwrap();
        assert_eq!(m, Mask::solid_rect(8, 8, 1, 2, 5, 6).unwrap());
    }

    #[test]
    fn rasterize_clips_to_image_bounds() {
        let quad = [(-3.0, -3.0), (4.0, -3.0), (4.0, 4.0), (-3.0, 4.0)];
        let m = rasterize_convex_polygon(&quad, 6, 6).unwrap();
        assert_eq!(m, Mask::solid_rect(6, 6, 0, 0, 4, 4).unwrap());
    }

    #[test]
    fn rasterize_triangle_contains_its_own_centroid_pixel() {
        let tri = [(1.0, 1.0), (9.0, 1.0), (5.0, 8.0)];
        let m = rasterize_convex_polygon(&tri, 12, 12).unwrap();
        let grid = m.decode();
        assert!(grid.get(2, 5)); // interior near the top edge midpoint
        assert!(!grid.get(9, 1)); // outside, below the left vertex
        assert!(m.area() > 0);
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let m = mask(3, 2, &[2, 1, 3]);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"width":3,"height":2,"counts":[2,1,3]}"#);
        let back: Mask = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"width":3,"height":2,"counts":[2,0,4]}"#;
        assert!(serde_json::from_str::<Mask>(bad).is_err());
    }

    fn grid_from_bits(w: u32, h: u32, bits: &[bool]) -> BitGrid {
        let mut grid = BitGrid::new(w, h).unwrap();
        let mut i = 0;
        for r in 0..h {
            for c in 0..w {
                grid.set(r, c, bits[i]);
                i += 1;
            }
        }
        grid
    }

    fn arb_grid(max_side: u32) -> impl Strategy<Value = BitGrid> {
        (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::ANY, (w * h) as usize)
                .prop_map(move |bits| grid_from_bits(w, h, &bits))
        })
    }

    /// Two independent grids sharing the same dimensions.
    fn arb_grid_pair(max_side: u32) -> impl Strategy<Value = (BitGrid, BitGrid)> {
        (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
            let bits = proptest::collection::vec(proptest::bool::ANY, (w * h) as usize);
            (bits.clone(), bits)
                .prop_map(move |(b1, b2)| (grid_from_bits(w, h, &b1), grid_from_bits(w, h, &b2)))
        })
    }

    proptest! {
        #[test]
        fn rle_round_trip_is_exact(grid in arb_grid(24)) {
            let m = Mask::encode(&grid);
            prop_assert_eq!(m.decode(), grid);
        }

        #[test]
        fn inclusion_exclusion_for_areas((g1, g2) in arb_grid_pair(12)) {
            let a = Mask::encode(&g1);
            let b = Mask::encode(&g2);
            let union = a.union(&b).unwrap().area();
            let inter = a.intersect(&b).unwrap().area();
            prop_assert_eq!(union + inter, a.area() + b.area());
            prop_assert_eq!(inter, a.intersection_area(&b).unwrap());
        }

        #[test]
        fn subtraction_removes_all_of_b((g1, g2) in arb_grid_pair(12)) {
            let a = Mask::encode(&g1);
            let b = Mask::encode(&g2);
            let diff = a.union(&b).unwrap().subtract(&b).unwrap();
            prop_assert_eq!(diff.intersection_area(&b).unwrap(), 0);
            prop_assert!(diff.is_subset_of(&a).unwrap());
        }

        #[test]
        fn opening_shrinks_and_closing_grows(grid in arb_grid(16), r in 1u32..3) {
            let m = Mask::encode(&grid);
            let opened = m.erode(r).dilate(r);
            let closed = m.dilate(r).erode(r);
            prop_assert!(opened.is_subset_of(&m).unwrap());
            prop_assert!(m.is_subset_of(&closed).unwrap());
        }

        #[test]
        fn complement_is_involutive(grid in arb_grid(12)) {
            let m = Mask::encode(&grid);
            prop_assert_eq!(m.complement().complement(), m.clone());
            prop_assert_eq!(m.complement().area(), m.total() - m.area());
        }
    }
}
