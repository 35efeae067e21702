use alloc::vec::Vec;

use super::CurvePoint;
use crate::math;
use crate::{Error, Result};

/// Kneedle knee of a (mostly) decreasing curve, without smoothing.
///
/// Coordinates `(log10 x, y)` are min-max normalized to the unit square and
/// the knee is the point maximizing `(1 - y_n) - x_n`, the gap between the
/// flipped curve and the diagonal. Ties go to the smaller `x`. For data
/// exactly linear in `log x` the difference curve is zero up to rounding and
/// the returned point is not meaningful.
pub fn detect_knee(points: &[CurvePoint]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::InsufficientData("knee detection needs at least 4 points".into()));
    }
    for p in points {
        p.validate()?;
    }
    if points.windows(2).any(|w| w[1].x <= w[0].x) {
        return Err(Error::Input("knee detection needs strictly ascending x".into()));
    }
    if points.windows(2).all(|w| w[1].y >= w[0].y) {
        return Err(Error::NoKnee);
    }

    let lx: Vec<f64> = points.iter().map(|p| math::log10(p.x)).collect();
    let (x_lo, x_hi) = (lx[0], lx[lx.len() - 1]);
    let y_lo = points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y_hi = points.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);

    let mut best = (f64::NEG_INFINITY, points[0].x);
    for (p, &l) in points.iter().zip(&lx) {
        let xn = (l - x_lo) / (x_hi - x_lo);
        let yn = (p.y - y_lo) / (y_hi - y_lo);
        let diff = (1.0 - yn) - xn;
        if diff > best.0 {
            best = (diff, p.x);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pts(xs: &[f64], f: impl Fn(f64) -> f64) -> Vec<CurvePoint> {
        xs.iter().map(|&x| CurvePoint { x, y: f(x) }).collect()
    }

    #[test]
    fn piecewise_elbow() {
        let xs = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
        let points = pts(&xs, |x| if x <= 10.0 { 2.0 - math::log10(x) } else { 1.0 - 0.01 * math::log10(x / 10.0) });
        assert_eq!(detect_knee(&points).unwrap(), 10.0);
    }

    #[test]
    fn increasing_curve_has_no_knee() {
        let points = pts(&[1.0, 2.0, 3.0, 4.0], |x| x);
        assert_eq!(detect_knee(&points), Err(Error::NoKnee));
        let flat = pts(&[1.0, 2.0, 3.0, 4.0], |_| 1.0);
        assert_eq!(detect_knee(&flat), Err(Error::NoKnee));
    }

    #[test]
    fn linear_in_log_x_is_not_an_error() {
        let xs = [1.0, 10.0, 100.0, 1000.0, 10000.0];
        let points = pts(&xs, |x| 5.0 - math::log10(x));
        let knee = detect_knee(&points).unwrap();
        assert!(xs.contains(&knee));
    }

    #[test]
    fn preconditions() {
        let three = pts(&[1.0, 2.0, 3.0], |x| 1.0 / x);
        assert!(matches!(detect_knee(&three), Err(Error::InsufficientData(_))));
        let unsorted = vec![
            CurvePoint { x: 2.0, y: 1.0 },
            CurvePoint { x: 1.0, y: 2.0 },
            CurvePoint { x: 3.0, y: 0.5 },
            CurvePoint { x: 4.0, y: 0.4 },
        ];
        assert!(matches!(detect_knee(&unsorted), Err(Error::Input(_))));
    }
}
