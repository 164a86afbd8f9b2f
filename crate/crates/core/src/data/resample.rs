//! Bilinear image resampling.
//!
//! Pixel centers are aligned: output pixel `j` samples the source at
//! `(j + 0.5)·(src/dst) − 0.5`, clamped to the valid range.

/// Resamples a row-major `rows × cols` image to `out_rows × out_cols`.
pub fn resample_bilinear(
    src: &[f64],
    rows: usize,
    cols: usize,
    out_rows: usize,
    out_cols: usize,
) -> Vec<f64> {
    assert_eq!(src.len(), rows * cols, "image buffer does not match its size");
    let ys: Vec<(usize, usize, f64)> = (0..out_rows).map(|i| taps(i, rows, out_rows)).collect();
    let xs: Vec<(usize, usize, f64)> = (0..out_cols).map(|j| taps(j, cols, out_cols)).collect();
    let mut out = Vec::with_capacity(out_rows * out_cols);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = src[y0 * cols + x0] * (1.0 - fx) + src[y0 * cols + x1] * fx;
            let bottom = src[y1 * cols + x0] * (1.0 - fx) + src[y1 * cols + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Neighbouring source indices and the weight of the upper one.
fn taps(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, pos - lo as f64)
}
