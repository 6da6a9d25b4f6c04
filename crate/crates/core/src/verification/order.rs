//! Observed convergence orders from refinement sequences.

/// Errors below this are treated as round-off and carry no order information.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// `log₂(e_i / e_{i+1})` for consecutive levels with the mesh halved
/// between them. `None` where either error is at the round-off floor.
pub fn pairwise_orders(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| {
            if w[0] <= ROUNDOFF_FLOOR || w[1] <= ROUNDOFF_FLOOR {
                None
            } else {
                Some((w[0] / w[1]).log2())
            }
        })
        .collect()
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(mesh: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = mesh
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > ROUNDOFF_FLOOR)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Outcome of an order requirement on a refinement sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrderVerdict {
    /// Every error is already below the absolute floor.
    AtFloor {
        max_error: f64,
    },
    Measured {
        order: f64,
    },
    /// Too few levels above round-off to fit a slope.
    Undetermined,
}

impl OrderVerdict {
    pub fn assess(mesh: &[f64], errors: &[f64], floor: f64) -> Self {
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        if max_error <= floor {
            return OrderVerdict::AtFloor { max_error };
        }
        match fitted_order(mesh, errors) {
            Some(order) => OrderVerdict::Measured { order },
            None => OrderVerdict::Undetermined,
        }
    }

    pub fn meets(&self, min_order: f64) -> bool {
        match self {
            OrderVerdict::AtFloor { .. } => true,
            OrderVerdict::Measured { order } => *order >= min_order,
            OrderVerdict::Undetermined => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_sequence() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        assert!((fitted_order(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        for o in pairwise_orders(&e) {
            assert!((o.unwrap() - 2.0).abs() < 1e-12);
        }
        assert!(OrderVerdict::assess(&h, &e, 1e-9).meets(1.9));
    }

    #[test]
    fn roundoff_levels_are_skipped() {
        assert_eq!(pairwise_orders(&[1e-14, 1e-15]), vec![None]);
        assert_eq!(fitted_order(&[1.0, 0.5], &[0.0, 0.0]), None);
        let v = OrderVerdict::assess(&[1.0, 0.5], &[1e-13, 2e-13], 1e-9);
        assert!(matches!(v, OrderVerdict::AtFloor { .. }));
        assert!(v.meets(1.9));
    }

    #[test]
    fn first_order_fails_a_second_order_requirement() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.to_vec();
        assert!(!OrderVerdict::assess(&h, &e, 1e-9).meets(1.9));
    }
}
