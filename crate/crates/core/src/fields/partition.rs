use super::{ChartField, Levels};
use crate::error::{Error, Result};
use crate::geom::{Frame, RegionExpr};
use crate::manifold::box_grid;

/// Smooth weight equal to 1 on `shrink(region, margin)` and vanishing outside
/// `shrink(region, margin / 2)`.
pub fn plateau(region: &RegionExpr, margin: f64, frame: &Frame) -> Result<ChartField> {
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument(format!("plateau margin must be positive, got {margin}")));
    }
    let e = region.clone();
    let fr = frame.clone();
    let levels = Levels {
        ones: RegionExpr::Level { expr: Box::new(region.clone()), margin, frame: frame.clone(), one: true },
        zeros: RegionExpr::Level { expr: Box::new(region.clone()), margin, frame: frame.clone(), one: false },
    };
    Ok(ChartField::new(frame.domain.clone(), 1, move |x, out| out[0] = e.plateau(x, margin, &fr))
        .with_smooth(RegionExpr::All)
        .with_levels(levels))
}

/// Normalized plateaus subordinate to `regions`.
///
/// Every point of `samples` (default: a 65-per-axis grid of the frame's domain)
/// must lie where some plateau equals one, otherwise a cover gap is reported.
pub fn partition_of_unity(
    regions: &[RegionExpr],
    margin: f64,
    frame: &Frame,
    samples: Option<&[Vec<f64>]>,
) -> Result<Vec<ChartField>> {
    if regions.is_empty() {
        return Err(Error::InvalidArgument("empty cover".into()));
    }
    if !(margin > 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
    }
    let owned;
    let pts: &[Vec<f64>] = match samples {
        Some(p) => p,
        None => {
            owned = box_grid(&frame.domain, 65);
            &owned
        }
    };
    for x in pts {
        if !regions.iter().any(|r| r.plateau(x, margin, frame) == 1.0) {
            return Err(Error::CoverGap { chart: 0, point: x.clone() });
        }
    }
    let regions: Vec<RegionExpr> = regions.to_vec();
    Ok((0..regions.len())
        .map(|i| {
            let rs = regions.clone();
            let fr = frame.clone();
            ChartField::new(frame.domain.clone(), 1, move |x, out| {
                let vals: Vec<f64> = rs.iter().map(|r| r.plateau(x, margin, &fr)).collect();
                let s: f64 = vals.iter().sum();
                out[0] = if s > 0.0 { vals[i] / s } else { 0.0 };
            })
            .with_smooth(RegionExpr::All)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{smooth_step, Rect};

    fn frame() -> Frame {
        Frame { domain: Rect::closed(&[0.0], &[1.0]), face_lo: vec![true], face_hi: vec![true] }
    }

    fn two() -> Vec<RegionExpr> {
        vec![RegionExpr::rect(Rect::closed(&[0.0], &[0.6])), RegionExpr::rect(Rect::closed(&[0.4], &[1.0]))]
    }

    #[test]
    fn single_region_is_one() {
        let p = partition_of_unity(&[RegionExpr::All], 0.1, &frame(), None).unwrap();
        assert_eq!(p[0].eval1(&[0.3]), 1.0);
    }

    #[test]
    fn two_intervals() {
        let p = partition_of_unity(&two(), 0.1, &frame(), None).unwrap();
        assert_eq!(p[0].eval1(&[0.2]), 1.0);
        assert_eq!(p[1].eval1(&[0.2]), 0.0);
        for k in 0..=100 {
            let x = [k as f64 / 100.0];
            let s = p[0].eval1(&x) + p[1].eval1(&x);
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    // λ₁(0.48) for the two-interval cover with margin 0.1, from the plateau formula
    // evaluated independently (mpmath, 30 digits).
    const SPLIT_048: f64 = 0.5892546061581099;

    #[test]
    fn pinned_split() {
        let p = partition_of_unity(&two(), 0.1, &frame(), None).unwrap();
        let a = p[0].eval1(&[0.48]);
        let b = p[1].eval1(&[0.48]);
        assert!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0);
        assert!((a - SPLIT_048).abs() < 1e-12, "{a}");
        assert!((a - 1.0 / (1.0 + smooth_step(0.6))).abs() < 1e-12);
    }

    #[test]
    fn cover_gap() {
        let err = partition_of_unity(&two(), 0.25, &frame(), None).unwrap_err();
        match err {
            Error::CoverGap { point, .. } => assert!(point[0] > 0.3 && point[0] < 0.7),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn plateau_levels_match_values() {
        let u = RegionExpr::rect(Rect::open(&[0.25], &[0.75]));
        let p = plateau(&u, 0.1, &frame()).unwrap();
        let lv = p.levels.clone().unwrap();
        for k in 0..=200 {
            let x = [k as f64 / 200.0];
            let v = p.eval1(&x);
            assert_eq!(lv.ones.contains(&x), v == 1.0);
            assert_eq!(lv.zeros.contains(&x), v == 0.0);
        }
    }
}
