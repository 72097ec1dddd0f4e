//! Vector and box geometry.
//!
//! The floating-point evaluation order of [`l2_normalize`] and
//! [`squared_distance`] is fixed and documented, so that scores are
//! reproducible bit-for-bit by any implementation that follows it.

use crate::error::{Error, Result};
use crate::types::BBox;

/// Norms below this are treated as zero.
pub const MIN_NORM: f64 = 1e-12;

/// Number of interleaved partial sums used by [`squared_distance`].
pub const DISTANCE_LANES: usize = 8;

/// Scales `values` to unit Euclidean norm.
///
/// The norm is `sqrt` of the left-to-right sum of squares, and each component
/// is divided (not multiplied by a reciprocal) by it.
pub fn l2_normalize(values: &[f64]) -> Result<Vec<f64>> {
    let mut sum = 0.0;
    for &v in values {
        sum += v * v;
    }
    let norm = sum.sqrt();
    if !(norm >= MIN_NORM) {
        return Err(Error::ZeroVector);
    }
    Ok(values.iter().map(|&v| v / norm).collect())
}

/// Squared Euclidean distance between two equal-length vectors.
///
/// Component `i` accumulates into partial sum `i % 8`; the partial sums are
/// then combined as `((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))`.
/// Panics if the lengths differ.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "squared_distance on unequal lengths");
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the feature was detected at runtime.
        return unsafe { squared_distance_avx2(a, b) };
    }
    squared_distance_lanes(a, b)
}

// Lanes 0-3 and 4-7 live in two registers; subtract, multiply and add are
// separate instructions (no fused multiply-add), so every lane rounds exactly
// as in the portable path.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn squared_distance_avx2(a: &[f64], b: &[f64]) -> f64 {
    use std::arch::x86_64::*;
    let n = a.len() / DISTANCE_LANES * DISTANCE_LANES;
    let (pa, pb) = (a.as_ptr(), b.as_ptr());
    let mut lo = _mm256_setzero_pd();
    let mut hi = _mm256_setzero_pd();
    let mut i = 0;
    while i < n {
        let d0 = _mm256_sub_pd(_mm256_loadu_pd(pa.add(i)), _mm256_loadu_pd(pb.add(i)));
        let d1 = _mm256_sub_pd(_mm256_loadu_pd(pa.add(i + 4)), _mm256_loadu_pd(pb.add(i + 4)));
        lo = _mm256_add_pd(lo, _mm256_mul_pd(d0, d0));
        hi = _mm256_add_pd(hi, _mm256_mul_pd(d1, d1));
        i += DISTANCE_LANES;
    }
    let mut acc = [0.0f64; DISTANCE_LANES];
    _mm256_storeu_pd(acc.as_mut_ptr(), lo);
    _mm256_storeu_pd(acc.as_mut_ptr().add(4), hi);
    for (lane, (x, y)) in a[n..].iter().zip(&b[n..]).enumerate() {
        let d = x - y;
        acc[lane] += d * d;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Squared distances from `x` to each of `queries`, appended to `out`.
///
/// Each value equals `squared_distance(q, x)` bit for bit; the queries are
/// only processed side by side. Panics if any length differs from `x`.
pub fn squared_distances(queries: &[&[f64]], x: &[f64], out: &mut Vec<f64>) {
    for q in queries {
        assert_eq!(q.len(), x.len(), "squared_distance on unequal lengths");
    }
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        let mut groups = queries.chunks_exact(4);
        for g in &mut groups {
            // SAFETY: the feature was detected at runtime and lengths checked.
            out.extend(unsafe { squared_distance_group_avx2::<4>([g[0], g[1], g[2], g[3]], x) });
        }
        for q in groups.remainder() {
            // SAFETY: as above.
            out.push(unsafe { squared_distance_avx2(q, x) });
        }
        return;
    }
    out.extend(queries.iter().map(|q| squared_distance_lanes(q, x)));
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn squared_distance_group_avx2<const N: usize>(qs: [&[f64]; N], x: &[f64]) -> [f64; N] {
    use std::arch::x86_64::*;
    let n = x.len() / DISTANCE_LANES * DISTANCE_LANES;
    let px = x.as_ptr();
    let mut lo = [_mm256_setzero_pd(); N];
    let mut hi = [_mm256_setzero_pd(); N];
    let mut i = 0;
    while i < n {
        let x0 = _mm256_loadu_pd(px.add(i));
        let x1 = _mm256_loadu_pd(px.add(i + 4));
        for k in 0..N {
            let pq = qs[k].as_ptr();
            let d0 = _mm256_sub_pd(_mm256_loadu_pd(pq.add(i)), x0);
            let d1 = _mm256_sub_pd(_mm256_loadu_pd(pq.add(i + 4)), x1);
            lo[k] = _mm256_add_pd(lo[k], _mm256_mul_pd(d0, d0));
            hi[k] = _mm256_add_pd(hi[k], _mm256_mul_pd(d1, d1));
        }
        i += DISTANCE_LANES;
    }
    let mut result = [0.0; N];
    for k in 0..N {
        let mut acc = [0.0f64; DISTANCE_LANES];
        _mm256_storeu_pd(acc.as_mut_ptr(), lo[k]);
        _mm256_storeu_pd(acc.as_mut_ptr().add(4), hi[k]);
        for (lane, (a, b)) in qs[k][n..].iter().zip(&x[n..]).enumerate() {
            let d = a - b;
            acc[lane] += d * d;
        }
        result[k] = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    }
    result
}

#[inline(always)]
fn squared_distance_lanes(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; DISTANCE_LANES];
    let mut ca = a.chunks_exact(DISTANCE_LANES);
    let mut cb = b.chunks_exact(DISTANCE_LANES);
    for (xa, xb) in (&mut ca).zip(&mut cb) {
        for lane in 0..DISTANCE_LANES {
            let d = xa[lane] - xb[lane];
            acc[lane] += d * d;
        }
    }
    for (lane, (x, y)) in ca.remainder().iter().zip(cb.remainder()).enumerate() {
        let d = x - y;
        acc[lane] += d * d;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

/// Intersection over union of two boxes; 0 when they do not overlap.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    // (x + w) - x need not round back to w
    if a == b {
        return 1.0;
    }
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(l2_normalize(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let v = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] - 0.8).abs() < 1e-15);
        assert_eq!(l2_normalize(&[0.0, 0.0]), Err(Error::ZeroVector));
        assert_eq!(l2_normalize(&[1e-13]), Err(Error::ZeroVector));
        assert_eq!(l2_normalize(&[f64::NAN]), Err(Error::ZeroVector));
    }

    #[test]
    fn iou_examples() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx(5.0, 5.0, 1.0, 1.0)), 0.0);
        // touching edges share no area
        assert_eq!(iou(&a, &bx(2.0, 0.0, 2.0, 2.0)), 0.0);
        let third = iou(&a, &bx(1.0, 0.0, 2.0, 2.0));
        assert!((third - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn distance_matches_naive_sum() {
        let a: Vec<f64> = (0..19).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..19).map(|i| (i as f64 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((squared_distance(&a, &b) - naive).abs() < 1e-12);
        assert_eq!(squared_distance(&a, &a), 0.0);
    }

    #[test]
    fn simd_paths_match_portable_bits() {
        for len in [1usize, 7, 8, 9, 16, 61, 512] {
            let x: Vec<f64> = (0..len).map(|i| (i as f64 * 0.73).sin() * 1e3).collect();
            let qs: Vec<Vec<f64>> = (0..6)
                .map(|k| (0..len).map(|i| ((i * (k + 2)) as f64 * 0.19).cos()).collect())
                .collect();
            let refs: Vec<&[f64]> = qs.iter().map(Vec::as_slice).collect();
            let mut out = Vec::new();
            squared_distances(&refs, &x, &mut out);
            for (q, d) in refs.iter().zip(&out) {
                let portable = squared_distance_lanes(q, &x);
                assert_eq!(d.to_bits(), portable.to_bits());
                assert_eq!(squared_distance(q, &x).to_bits(), portable.to_bits());
                assert_eq!(squared_distance(&x, q).to_bits(), portable.to_bits());
            }
        }
    }
}
