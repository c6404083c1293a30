//! Multi-dimensional FFT on a cubic grid, row-major with the last axis
//! fastest, as laid out by [`crate::lattice::Torus`].

use num_complex::Complex64;
use rustfft::FftPlanner;

/// In-place `d`-dimensional transform. The inverse is unnormalized, as
/// in `rustfft`.
pub fn fft_nd(data: &mut [Complex64], d: usize, side: usize, inverse: bool) {
    assert_eq!(data.len(), side.pow(d as u32));
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(side) } else { planner.plan_fft_forward(side) };
    let mut line = vec![Complex64::new(0.0, 0.0); side];
    for axis in 0..d {
        let stride = side.pow((d - 1 - axis) as u32);
        let block = stride * side;
        for start in 0..data.len() / side {
            let (outer, inner) = (start / stride, start % stride);
            let base = outer * block + inner;
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[base + j * stride];
            }
            fft.process(&mut line);
            for (j, v) in line.iter().enumerate() {
                data[base + j * stride] = *v;
            }
        }
    }
}

/// Signed frequency of FFT bin `j` on a grid of `side` points.
pub fn signed_frequency(j: usize, side: usize) -> i64 {
    if 2 * j <= side {
        j as i64
    } else {
        j as i64 - side as i64
    }
}

/// Signed frequency multi-index of a flat FFT bin.
pub fn mode_of(mut index: usize, d: usize, side: usize) -> Vec<i64> {
    let mut k = vec![0; d];
    for a in (0..d).rev() {
        k[a] = signed_frequency(index % side, side);
        index /= side;
    }
    k
}
