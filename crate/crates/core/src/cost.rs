//! Manipulation cost: a fixed charge `k` for every price touched plus a
//! symmetric convex variable cost `c(shift)`.
//!
//! The average cost `(k + c(q)) / |q|` is U-shaped for strictly convex `c`
//! and `k > 0`; its minimizer [`CostModel::delta_min`] drives every case
//! split in [`crate::attack`].

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{invalid, Result};
use crate::numeric::golden_section;

/// Argument tolerance for numerically located minimizers of the average cost.
pub const DELTA_MIN_XTOL: f64 = 1e-9;

/// Piecewise-linear convex cost on `q >= 0`, mirrored to `q < 0`.
///
/// Knots start at the origin; beyond the last knot the last slope continues.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexTable {
    knots: Vec<(f64, f64)>,
    slopes: Vec<f64>,
}

impl ConvexTable {
    /// Validates `(q, c(q))` knots with `q` strictly increasing from `0`.
    /// A missing `(0, 0)` knot is prepended.
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.first().map(|k| k.0) != Some(0.0) {
            knots.insert(0, (0.0, 0.0));
        }
        if knots[0].1 != 0.0 {
            return Err(invalid("convex table", "c(0) must be 0"));
        }
        if knots.len() < 2 {
            return Err(invalid("convex table", "need at least one knot beyond the origin"));
        }
        if knots.iter().any(|&(q, c)| !q.is_finite() || !c.is_finite()) {
            return Err(invalid("convex table", "knots must be finite"));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid("convex table", "knot positions must increase strictly"));
        }
        let slopes: Vec<f64> = knots.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        if slopes[0] < 0.0 {
            return Err(invalid("convex table", "cost must not decrease away from zero"));
        }
        if slopes.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("convex table", "slopes must be non-decreasing (convexity)"));
        }
        Ok(ConvexTable { knots, slopes })
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    /// Strictly increasing slopes.
    pub fn is_strict(&self) -> bool {
        self.slopes.windows(2).all(|w| w[1] > w[0])
    }

    fn segment(&self, q: f64) -> usize {
        // segment j covers [q_j, q_{j+1}); the last one extends to infinity
        let j = self.knots.partition_point(|k| k.0 <= q);
        j.saturating_sub(1).min(self.slopes.len() - 1)
    }

    fn value(&self, q: f64) -> f64 {
        let q = q.abs();
        let j = self.segment(q);
        let (qj, cj) = self.knots[j];
        cj + self.slopes[j] * (q - qj)
    }

    fn derivative(&self, q: f64) -> f64 {
        if q == 0.0 {
            return 0.0;
        }
        let s = self.slopes[self.segment(q.abs())];
        if q > 0.0 {
            s
        } else {
            -s
        }
    }

    /// Intercept of the last segment's line; `c(q) = s_last * q + intercept` far out.
    fn tail_intercept(&self) -> f64 {
        let j = self.slopes.len() - 1;
        let (qj, cj) = self.knots[j];
        cj - self.slopes[j] * qj
    }
}

/// The variable part `c` of the manipulation cost.
#[derive(Debug, Clone, PartialEq)]
pub enum VariableCost {
    Zero,
    /// `a * q^2`
    Quadratic { a: f64 },
    /// `a * |q|^p`, `p > 1`
    Power { a: f64, p: f64 },
    ConvexTable(ConvexTable),
}

impl VariableCost {
    pub fn value(&self, q: f64) -> f64 {
        match self {
            VariableCost::Zero => 0.0,
            VariableCost::Quadratic { a } => a * q * q,
            VariableCost::Power { a, p } => a * libm::pow(q.abs(), *p),
            VariableCost::ConvexTable(t) => t.value(q),
        }
    }

    pub fn derivative(&self, q: f64) -> f64 {
        match self {
            VariableCost::Zero => 0.0,
            VariableCost::Quadratic { a } => 2.0 * a * q,
            VariableCost::Power { a, p } => {
                let g = a * p * libm::pow(q.abs(), p - 1.0);
                if q < 0.0 {
                    -g
                } else {
                    g
                }
            }
            VariableCost::ConvexTable(t) => t.derivative(q),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, VariableCost::Zero)
    }

    pub fn is_strictly_convex(&self) -> bool {
        match self {
            VariableCost::Zero => false,
            VariableCost::Quadratic { .. } | VariableCost::Power { .. } => true,
            VariableCost::ConvexTable(t) => t.is_strict(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            VariableCost::Quadratic { a } if !(a.is_finite() && a > 0.0) => {
                Err(invalid("quadratic cost", "need a > 0"))
            }
            VariableCost::Power { a, p } if !(a.is_finite() && a > 0.0 && p.is_finite() && p > 1.0) => {
                Err(invalid("power cost", "need a > 0 and p > 1"))
            }
            _ => Ok(()),
        }
    }
}

/// Minimizer of the average cost on `(0, inf)`, or `Infinite` when the
/// average cost decreases forever. `Infinite` orders above every finite value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum DeltaMin {
    Finite(f64),
    Infinite,
}

impl DeltaMin {
    pub fn finite(self) -> Option<f64> {
        match self {
            DeltaMin::Finite(d) => Some(d),
            DeltaMin::Infinite => None,
        }
    }

    /// Total comparison against a price.
    pub fn cmp_price(self, x: f64) -> Ordering {
        match self {
            DeltaMin::Finite(d) => d.total_cmp(&x),
            DeltaMin::Infinite => Ordering::Greater,
        }
    }
}

/// Fixed cost per manipulated price plus a variable cost of the shift.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    k: f64,
    variable: VariableCost,
}

impl CostModel {
    pub fn new(k: f64, variable: VariableCost) -> Result<Self> {
        if !(k.is_finite() && k >= 0.0) {
            return Err(invalid("cost model", "fixed cost k must be finite and >= 0"));
        }
        variable.validate()?;
        if k == 0.0 && variable.is_zero() {
            return Err(invalid("cost model", "k = 0 with zero variable cost makes every attack free"));
        }
        Ok(CostModel { k, variable })
    }

    pub fn quadratic(k: f64, a: f64) -> Result<Self> {
        Self::new(k, VariableCost::Quadratic { a })
    }

    pub fn fixed_only(k: f64) -> Result<Self> {
        Self::new(k, VariableCost::Zero)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn variable(&self) -> &VariableCost {
        &self.variable
    }

    /// `c(q)`
    pub fn variable_cost(&self, q: f64) -> f64 {
        self.variable.value(q)
    }

    /// `c'(q)`; table costs use the slope of the segment to the right of `|q|`.
    pub fn marginal_cost(&self, q: f64) -> f64 {
        self.variable.derivative(q)
    }

    /// Cost of moving one unit of mass by `q`, including the fixed charge when `q != 0`.
    pub fn move_cost(&self, q: f64) -> f64 {
        if q == 0.0 {
            0.0
        } else {
            self.k + self.variable.value(q)
        }
    }

    /// `(k + c(q)) / |q|`
    pub fn average_cost(&self, q: f64) -> Result<f64> {
        if q == 0.0 || !q.is_finite() {
            return Err(invalid("average cost argument", "q must be finite and non-zero"));
        }
        Ok(self.avg(q))
    }

    fn avg(&self, q: f64) -> f64 {
        (self.k + self.variable.value(q)) / q.abs()
    }

    pub fn delta_min(&self) -> DeltaMin {
        if self.variable.is_zero() {
            return DeltaMin::Infinite;
        }
        if self.k == 0.0 {
            return DeltaMin::Finite(0.0);
        }
        match &self.variable {
            VariableCost::Zero => DeltaMin::Infinite,
            VariableCost::Quadratic { a } => DeltaMin::Finite(libm::sqrt(self.k / a)),
            VariableCost::Power { a, p } => DeltaMin::Finite(libm::pow(self.k / (a * (p - 1.0)), 1.0 / p)),
            VariableCost::ConvexTable(t) => {
                if self.k + t.tail_intercept() > 0.0 {
                    return DeltaMin::Infinite;
                }
                // average cost is non-decreasing past the last knot here
                let hi = t.knots[t.knots.len() - 1].0;
                let lo = hi * 1e-12;
                DeltaMin::Finite(golden_section(|q| self.avg(q), lo, hi, DELTA_MIN_XTOL))
            }
        }
    }

    /// Proportionality factor `beta` with `self.c = beta * other.c` on probe points, if any.
    pub fn proportional_to(&self, other: &CostModel, probes: &[f64]) -> Option<f64> {
        let mut beta = None;
        for &q in probes.iter().filter(|q| **q != 0.0) {
            let (a, b) = (self.variable_cost(q), other.variable_cost(q));
            if b == 0.0 {
                if a != 0.0 {
                    return None;
                }
                continue;
            }
            let r = a / b;
            match beta {
                None => beta = Some(r),
                Some(b0) if (r - b0).abs() <= 1e-9 * (1.0 + b0.abs()) => {}
                Some(_) => return None,
            }
        }
        beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad(k: f64, a: f64) -> CostModel {
        CostModel::quadratic(k, a).unwrap()
    }

    fn power(k: f64, a: f64, p: f64) -> CostModel {
        CostModel::new(k, VariableCost::Power { a, p }).unwrap()
    }

    fn table(k: f64) -> CostModel {
        let t = ConvexTable::new(alloc::vec![(1.0, 0.5), (2.0, 2.0), (4.0, 8.0), (6.0, 16.0)]).unwrap();
        CostModel::new(k, VariableCost::ConvexTable(t)).unwrap()
    }

    #[test]
    fn variable_cost_examples() {
        assert_eq!(quad(0.0, 1.0).variable_cost(2.0), 4.0);
        assert_eq!(power(0.0, 1.0, 3.0).variable_cost(-2.0), 8.0);
        assert_eq!(CostModel::fixed_only(1.0).unwrap().variable_cost(5.0), 0.0);
    }

    #[test]
    fn marginal_cost_examples() {
        assert_eq!(quad(0.0, 1.0).marginal_cost(2.0), 4.0);
        assert!((power(0.0, 1.0, 3.0).marginal_cost(2.0) - 12.0).abs() < 1e-12);
        assert_eq!(quad(0.0, 0.5).marginal_cost(1.0), 1.0);
        assert_eq!(power(0.0, 1.0, 1.5).marginal_cost(0.0), 0.0);
    }

    #[test]
    fn average_cost_examples() {
        let m = quad(8.0, 1.0);
        assert_eq!(m.average_cost(2.0).unwrap(), 6.0);
        // grid minimum of the same expression, as a cross-check of the formula
        let grid_min = (1..=40_000)
            .map(|i| i as f64 * 1e-4)
            .map(|q| (8.0 + q * q) / q)
            .fold(f64::INFINITY, f64::min);
        assert!((grid_min - m.average_cost(8f64.sqrt()).unwrap()).abs() < 1e-6);
        assert_eq!(quad(0.0, 1.0).average_cost(3.0).unwrap(), 3.0);
        assert_eq!(CostModel::fixed_only(1.0).unwrap().average_cost(0.5).unwrap(), 2.0);
        assert!(m.average_cost(0.0).is_err());
    }

    #[test]
    fn delta_min_examples() {
        let d = quad(8.0, 1.0).delta_min().finite().unwrap();
        let by_search = golden_section(|q| (8.0 + q * q) / q, 1e-6, 100.0, 1e-12);
        // the crossing of average and marginal cost pins the minimizer sharper
        let crossing = crate::numeric::bisect(|q| (8.0 + q * q) / q - 2.0 * q, 1e-6, 100.0, 200).unwrap();
        assert!((d - 8f64.sqrt()).abs() < 1e-12);
        assert!((d - by_search).abs() < 1e-7);
        assert!((d - crossing.mid()).abs() < 1e-9);
        assert_eq!(CostModel::fixed_only(1.0).unwrap().delta_min(), DeltaMin::Infinite);
        assert_eq!(quad(0.0, 1.0).delta_min(), DeltaMin::Finite(0.0));

        let pw = power(3.0, 0.5, 3.0);
        let closed = pw.delta_min().finite().unwrap();
        let searched = golden_section(|q| pw.avg(q), 1e-6, 50.0, 1e-12);
        assert!((closed - searched).abs() < 1e-7);
    }

    #[test]
    fn table_delta_min_lands_on_knot() {
        // average cost at knots: q=2 -> (k+2)/2, q=4 -> (k+8)/4; with k=2 the minimum is at q=2
        let d = table(2.0).delta_min().finite().unwrap();
        assert!((d - 2.0).abs() < 1e-8, "{d}");
        // tail intercept 16 - 4*6 = -8, so k = 9 never stops decreasing
        assert_eq!(table(9.0).delta_min(), DeltaMin::Infinite);
    }

    #[test]
    fn infinity_orders_above_prices() {
        assert!(DeltaMin::Infinite > DeltaMin::Finite(1e300));
        assert_eq!(DeltaMin::Infinite.cmp_price(f64::MAX), Ordering::Greater);
        assert_eq!(DeltaMin::Finite(2.0).cmp_price(2.0), Ordering::Equal);
    }

    #[test]
    fn construction_errors() {
        assert!(CostModel::fixed_only(0.0).is_err());
        assert!(CostModel::quadratic(-1.0, 1.0).is_err());
        assert!(CostModel::quadratic(1.0, 0.0).is_err());
        assert!(CostModel::new(0.0, VariableCost::Power { a: 1.0, p: 1.0 }).is_err());
        assert!(ConvexTable::new(alloc::vec![(1.0, 2.0), (2.0, 3.0)]).is_err());
        assert!(ConvexTable::new(alloc::vec![(1.0, 1.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn table_strictness() {
        assert!(ConvexTable::new(alloc::vec![(1.0, 1.0), (2.0, 3.0)]).unwrap().is_strict());
        assert!(!ConvexTable::new(alloc::vec![(1.0, 1.0), (2.0, 2.0)]).unwrap().is_strict());
    }

    #[test]
    fn proportional_costs() {
        let probes = [0.5, 1.0, 2.0];
        assert_eq!(quad(0.0, 2.0).proportional_to(&quad(0.0, 1.0), &probes), Some(2.0));
        assert_eq!(power(0.0, 1.0, 3.0).proportional_to(&quad(0.0, 1.0), &probes), None);
    }

    fn models() -> [CostModel; 4] {
        [quad(8.0, 1.0), power(1.0, 0.7, 2.5), power(0.0, 2.0, 1.5), table(2.0)]
    }

    #[test]
    fn symmetric_costs() {
        for m in models() {
            for q in [0.1, 1.0, 3.7, 12.0] {
                assert_eq!(m.variable_cost(q), m.variable_cost(-q));
            }
        }
    }

    #[test]
    fn u_shape_around_delta_min() {
        for m in [quad(8.0, 1.0), power(1.0, 0.7, 2.5), quad(2.0, 3.0)] {
            let dm = m.delta_min().finite().unwrap();
            for i in 1..=1000 {
                let d = 4.0 * dm * i as f64 / 1000.0;
                if (d - dm).abs() < 1e-6 * dm {
                    continue;
                }
                let gap = m.avg(d) - m.marginal_cost(d);
                if d < dm {
                    assert!(gap > 0.0, "d={d} dm={dm}");
                } else {
                    assert!(gap < 0.0, "d={d} dm={dm}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn marginal_matches_central_difference(q in -8.0f64..8.0, which in 0usize..4) {
            let m = &models()[which];
            let h = 1e-5;
            if let VariableCost::ConvexTable(t) = m.variable() {
                // finite differences straddling a kink are not derivatives
                prop_assume!(t.knots().iter().all(|k| (k.0 - q.abs()).abs() > 2.0 * h));
            }
            prop_assume!(q.abs() > 0.01);
            let fd = (m.variable_cost(q + h) - m.variable_cost(q - h)) / (2.0 * h);
            let exact = m.marginal_cost(q);
            prop_assert!((exact - fd).abs() <= 1e-5 * (1.0 + exact.abs()), "q={} exact={} fd={}", q, exact, fd);
        }
    }
}
