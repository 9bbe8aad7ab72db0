//! Temperature balancing: the heater power split that nulls the thermopile
//! temperature difference at fixed total power, calibration sweeps over flow,
//! and the inverse flow estimate.
//!
//! Because the steady model is linear in the heater powers, two unit solves
//! give the influence coefficients `d1`, `d2` (K/W) and the balanced split in
//! closed form. A bisection on `ΔP` using full re-solves is kept as an
//! independent cross-check.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::thermal::{delta_t_thermopile, SourceMode, SteadyOperator, ThermalError, ThermalModel};
use crate::units::{to_ul_per_min, UL_PER_MIN};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum BalanceError {
    #[error("total power must be positive, got {0:e} W")]
    NonPositivePower(f64),
    #[error(
        "unbalanceable at Q = {q_ul_per_min} µl/min: P1 = {p1:e} W, P2 = {p2:e} W (power budget too small for this flow)"
    )]
    Unbalanceable { q_ul_per_min: f64, p1: f64, p2: f64 },
    #[error("balance verification failed: residual ΔT = {residual:e} K exceeds {tolerance:e} K")]
    NotVerified { residual: f64, tolerance: f64 },
    #[error("bisection bracket [-P_T, P_T] does not contain a sign change")]
    NoBracket,
    #[error("thermal solve failed at Q = {q_ul_per_min} µl/min: {source}")]
    Solver {
        q_ul_per_min: f64,
        #[source]
        source: ThermalError,
    },
    #[error("flow list must be strictly increasing")]
    UnsortedFlows,
    #[error("sensitivity fit needs at least 3 points with Q <= Q_max, found {0}")]
    TooFewPoints(usize),
    #[error("calibration ratios are not strictly increasing; curve cannot be inverted")]
    NotMonotone,
    #[error("ratio {ratio} outside calibrated range [{min}, {max}] (sensor saturates at {max})")]
    OutOfRange { ratio: f64, min: f64, max: f64 },
}

/// Balanced operating point. Flow in m³/s, powers in W.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceResult<T> {
    pub q: T,
    pub total_power: T,
    pub p1: T,
    pub p2: T,
    pub dp: T,
    pub ratio: T,
    /// Thermopile ΔT remaining after re-solving at the balanced powers (K).
    pub dt_residual: T,
}

impl<T: Scalar> BalanceResult<T> {
    pub fn q_ul_per_min(&self) -> T {
        to_ul_per_min(self.q)
    }

    fn from_split(q: T, total_power: T, p1: T, dt_residual: T) -> Self {
        let p2 = total_power - p1;
        let dp = p2 - p1;
        Self {
            q,
            total_power,
            p1,
            p2,
            dp,
            ratio: dp / total_power,
            dt_residual,
        }
    }
}

/// Residual ΔT tolerance: 1e-9 K per mW of total power.
pub fn balance_tolerance<T: Scalar>(total_power: T) -> T {
    T::of(1e-9) * total_power / T::of(1e-3)
}

fn solver_err(q: f64) -> impl Fn(ThermalError) -> BalanceError {
    move |source| BalanceError::Solver {
        q_ul_per_min: q / UL_PER_MIN,
        source,
    }
}

/// Influence coefficients `(d1, d2)`: ΔT_TC per watt of each heater.
pub fn influence<T: Scalar>(op: &SteadyOperator<T>) -> Result<(T, T), ThermalError> {
    let (up, down) = op.unit_fields()?;
    Ok((delta_t_thermopile(&up), delta_t_thermopile(&down)))
}

/// Closed-form balance from a factored operator. Returns the result even when
/// a power is negative; the caller decides whether that is an error.
pub fn balance_with_operator<T: Scalar>(
    op: &SteadyOperator<T>,
    total_power: T,
) -> Result<BalanceResult<T>, BalanceError> {
    let q = op.flow();
    let err = solver_err(q.as_f64());
    if !(total_power > T::zero()) {
        return Err(BalanceError::NonPositivePower(total_power.as_f64()));
    }
    let (d1, d2) = influence(op).map_err(&err)?;
    let p1 = total_power * d2 / (d2 - d1);
    let p2 = total_power - p1;
    let check = op.solve(p1, p2, SourceMode::Superposition).map_err(&err)?;
    let residual = delta_t_thermopile(&check);
    let tolerance = balance_tolerance(total_power);
    if residual.abs() > tolerance {
        return Err(BalanceError::NotVerified {
            residual: residual.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    Ok(BalanceResult::from_split(q, total_power, p1, residual))
}

fn check_physical<T: Scalar>(r: BalanceResult<T>) -> Result<BalanceResult<T>, BalanceError> {
    if r.p1 < T::zero() || r.p2 < T::zero() {
        return Err(BalanceError::Unbalanceable {
            q_ul_per_min: r.q_ul_per_min().as_f64(),
            p1: r.p1.as_f64(),
            p2: r.p2.as_f64(),
        });
    }
    Ok(r)
}

/// Power split nulling ΔT_TC at flow `q` (m³/s) and total power `total_power` (W).
pub fn balance_power<T: Scalar>(
    model: &ThermalModel<T>,
    q: T,
    total_power: T,
) -> Result<BalanceResult<T>, BalanceError> {
    if !(total_power > T::zero()) {
        return Err(BalanceError::NonPositivePower(total_power.as_f64()));
    }
    let op = model.operator(q).map_err(solver_err(q.as_f64()))?;
    check_physical(balance_with_operator(&op, total_power)?)
}

/// Bisection on `ΔP ∈ [-P_T, P_T]`, re-solving the full model at every
/// iterate.
pub fn balance_power_bisection<T: Scalar>(
    model: &ThermalModel<T>,
    q: T,
    total_power: T,
) -> Result<BalanceResult<T>, BalanceError> {
    if !(total_power > T::zero()) {
        return Err(BalanceError::NonPositivePower(total_power.as_f64()));
    }
    let err = solver_err(q.as_f64());
    let two = T::of(2.0);
    let dt_at = |dp: T| -> Result<T, BalanceError> {
        let p1 = (total_power - dp) / two;
        let p2 = (total_power + dp) / two;
        let field = model.solve_steady(q, p1, p2).map_err(&err)?;
        Ok(delta_t_thermopile(&field))
    };
    let (mut lo, mut hi) = (-total_power, total_power);
    let (f_lo, f_hi) = (dt_at(lo)?, dt_at(hi)?);
    if f_lo == T::zero() {
        hi = lo;
    } else if f_hi == T::zero() {
        lo = hi;
    } else if (f_lo > T::zero()) == (f_hi > T::zero()) {
        return Err(BalanceError::NoBracket);
    }
    let lo_positive = f_lo > T::zero();
    let stop = total_power * T::of(1e-12).max(T::epsilon() * T::of(4.0));
    while hi - lo > stop {
        let mid = (lo + hi) / two;
        let f = dt_at(mid)?;
        if f == T::zero() {
            lo = mid;
            hi = mid;
            break;
        }
        if (f > T::zero()) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let dp = (lo + hi) / two;
    let p1 = (total_power - dp) / two;
    let residual = dt_at(dp)?;
    Ok(BalanceResult::from_split(q, total_power, p1, residual))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointFlag {
    Ok,
    /// A heater would need negative power; values are reported unclamped.
    Unbalanceable,
}

impl PointFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointFlag::Ok => "ok",
            PointFlag::Unbalanceable => "unbalanceable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint<T> {
    pub result: BalanceResult<T>,
    pub flag: PointFlag,
}

/// Sensor transfer function `ΔP/P_T` versus flow, ordered by flow.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve<T> {
    pub total_power: T,
    pub points: Vec<CalibrationPoint<T>>,
}

impl<T: Scalar> CalibrationCurve<T> {
    /// Balanced points only, as `(Q µl/min, ratio)`.
    pub fn knots(&self) -> Vec<(T, T)> {
        self.points
            .iter()
            .filter(|p| p.flag == PointFlag::Ok)
            .map(|p| (p.result.q_ul_per_min(), p.result.ratio))
            .collect()
    }

    /// `true` when the balanced ratios strictly increase with flow.
    pub fn is_monotone(&self) -> bool {
        self.knots().windows(2).all(|w| w[1].1 > w[0].1)
    }
}

/// Balances every flow in `flows` (m³/s, strictly increasing). Points that
/// need a negative heater power are kept and flagged.
pub fn calibration_curve<T: Scalar>(
    model: &ThermalModel<T>,
    flows: &[T],
    total_power: T,
) -> Result<CalibrationCurve<T>, BalanceError> {
    if !(total_power > T::zero()) {
        return Err(BalanceError::NonPositivePower(total_power.as_f64()));
    }
    if flows.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(BalanceError::UnsortedFlows);
    }
    let points = flows
        .par_iter()
        .map(|&q| {
            let op = model.operator(q).map_err(solver_err(q.as_f64()))?;
            let result = balance_with_operator(&op, total_power)?;
            let flag = if result.p1 < T::zero() || result.p2 < T::zero() {
                PointFlag::Unbalanceable
            } else {
                PointFlag::Ok
            };
            Ok(CalibrationPoint { result, flag })
        })
        .collect::<Result<Vec<_>, BalanceError>>()?;
    Ok(CalibrationCurve {
        total_power,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityFit<T> {
    /// Slope of `ΔP/P_T` per µl/min, fitted through the origin.
    pub slope: T,
    /// Euclidean norm of the fit residuals.
    pub residual_norm: T,
    pub points: usize,
}

/// Least-squares slope through the origin over balanced points with
/// `Q <= q_max` (m³/s).
pub fn fit_sensitivity<T: Scalar>(
    curve: &CalibrationCurve<T>,
    q_max: T,
) -> Result<SensitivityFit<T>, BalanceError> {
    let limit = to_ul_per_min(q_max);
    let pts: Vec<(T, T)> = curve.knots().into_iter().filter(|(q, _)| *q <= limit).collect();
    if pts.len() < 3 {
        return Err(BalanceError::TooFewPoints(pts.len()));
    }
    let sqq: T = pts.iter().map(|&(q, _)| q * q).sum();
    if sqq == T::zero() {
        return Err(BalanceError::TooFewPoints(0));
    }
    let sqr: T = pts.iter().map(|&(q, r)| q * r).sum();
    let slope = sqr / sqq;
    let residual_norm = pts
        .iter()
        .map(|&(q, r)| (r - slope * q).powi(2))
        .sum::<T>()
        .sqrt();
    Ok(SensitivityFit {
        slope,
        residual_norm,
        points: pts.len(),
    })
}

/// Flow (m³/s) producing `ratio`, by piecewise-linear inversion of the
/// balanced knots. Exact at knots.
pub fn invert_flow<T: Scalar>(ratio: T, curve: &CalibrationCurve<T>) -> Result<T, BalanceError> {
    let knots: Vec<(T, T)> = curve
        .points
        .iter()
        .filter(|p| p.flag == PointFlag::Ok)
        .map(|p| (p.result.q, p.result.ratio))
        .collect();
    if knots.len() < 2 || knots.windows(2).any(|w| !(w[1].1 > w[0].1)) {
        return Err(BalanceError::NotMonotone);
    }
    let (min, max) = (knots[0].1, knots[knots.len() - 1].1);
    if !(ratio >= min && ratio <= max) {
        return Err(BalanceError::OutOfRange {
            ratio: ratio.as_f64(),
            min: min.as_f64(),
            max: max.as_f64(),
        });
    }
    if let Some(&(q, _)) = knots.iter().find(|(_, r)| *r == ratio) {
        return Ok(q);
    }
    let i = knots.partition_point(|&(_, r)| r < ratio) - 1;
    let (q0, r0) = knots[i];
    let (q1, r1) = knots[i + 1];
    Ok(q0 + (ratio - r0) / (r1 - r0) * (q1 - q0))
}

pub fn write_curve_csv<T: Scalar, W: Write>(curve: &CalibrationCurve<T>, mut out: W) -> io::Result<()> {
    writeln!(out, "Q_ul_per_min,P1_W,P2_W,dP_W,ratio,dT_residual_K,flag")?;
    for p in &curve.points {
        let r = &p.result;
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            r.q_ul_per_min(),
            r.p1,
            r.p2,
            r.dp,
            r.ratio,
            r.dt_residual,
            p.flag.as_str()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(qs: &[f64], f: impl Fn(f64) -> f64) -> CalibrationCurve<f64> {
        let points = qs
            .iter()
            .map(|&q| {
                let ratio = f(q);
                let pt = 1e-4;
                let p1 = pt * (1.0 - ratio) / 2.0;
                CalibrationPoint {
                    result: BalanceResult::from_split(q * UL_PER_MIN, pt, p1, 0.0),
                    flag: PointFlag::Ok,
                }
            })
            .collect();
        CalibrationCurve {
            total_power: 1e-4,
            points,
        }
    }

    #[test]
    fn linear_fixture_recovers_slope() {
        let qs = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        let curve = synthetic(&qs, |q| 0.89 * q);
        let fit = fit_sensitivity(&curve, 0.5 * UL_PER_MIN).unwrap();
        assert!((fit.slope - 0.89).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-12);
        assert_eq!(fit.points, 6);
    }

    #[test]
    fn zero_curve_has_zero_slope() {
        let curve = synthetic(&[0.0, 0.1, 0.2, 0.3], |_| 0.0);
        let fit = fit_sensitivity(&curve, 1.0 * UL_PER_MIN).unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn fit_needs_three_points() {
        let curve = synthetic(&[0.0, 0.1, 0.6], |q| q);
        assert!(matches!(
            fit_sensitivity(&curve, 0.5 * UL_PER_MIN),
            Err(BalanceError::TooFewPoints(2))
        ));
    }

    #[test]
    fn inversion_is_exact_at_knots() {
        let qs = [0.0, 0.1, 0.2, 0.35, 0.5];
        let curve = synthetic(&qs, |q| 0.9 * q - 0.2 * q * q);
        for p in &curve.points {
            assert_eq!(invert_flow(p.result.ratio, &curve).unwrap(), p.result.q);
        }
        assert_eq!(invert_flow(0.0, &curve).unwrap(), 0.0);
        let mid = invert_flow(0.5 * (curve.points[1].result.ratio + curve.points[2].result.ratio), &curve)
            .unwrap();
        assert!(mid > 0.1 * UL_PER_MIN && mid < 0.2 * UL_PER_MIN);
    }

    #[test]
    fn inversion_rejects_saturated_ratio() {
        let curve = synthetic(&[0.0, 0.5, 1.0], |q| 0.5 * q);
        match invert_flow(0.6, &curve) {
            Err(BalanceError::OutOfRange { max, .. }) => assert!((max - 0.5).abs() < 1e-12),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn inversion_rejects_non_monotone_curve() {
        let curve = synthetic(&[0.0, 0.5, 1.0], |q| if q > 0.7 { 0.1 } else { q });
        assert!(matches!(invert_flow(0.05, &curve), Err(BalanceError::NotMonotone)));
    }

    #[test]
    fn split_keeps_total_power() {
        let r: BalanceResult<f64> = BalanceResult::from_split(0.0, 1e-4, 0.3e-4, 0.0);
        assert!((r.p1 + r.p2 - 1e-4).abs() <= 1e-4 * 1e-12);
        assert!((r.ratio - 0.4).abs() < 1e-12);
    }
}
