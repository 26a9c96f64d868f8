//! The outer iteratively reweighted inversion loop: weight refresh, pair
//! factorization, parameter choice with cooling, filtered solve, model update,
//! bound projection with hard-constraint capture, and termination tests.
//!
//! Each iteration regularizes the model increment around the previous iterate,
//! so the stabilizer value reported per iteration is that of the accepted
//! increment; the cumulative stabilizer against the configured a-priori model
//! is recorded alongside it.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::forward::{GravityProfile, SensitivityMatrix};
use crate::gsvd::{gsvd_factorize, solve_filtered};
use crate::regparam::{
    cooled_alpha, corner_of_curve, evaluate_curve, gcv_argmin_of_curve, initial_alpha, AlphaGrid,
    CurvePoint, InitialAlphaMean, ParamStatus, DEFAULT_ALPHA_GRID_POINTS,
};
use crate::scalar::{real, Real};
use crate::weights::{
    compose_stabilizer, data_weights, depth_weights, hard_constrain, ms_weights,
    smoothness_operator, StabilizerOperator,
};

/// Admissible density range, in the same units as the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<T: Real> {
    lower: T,
    upper: T,
}

impl<T: Real> Bounds<T> {
    pub fn new(lower: T, upper: T) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::Config("bounds must be finite with lower < upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> T {
        self.lower
    }

    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn contains(&self, v: T) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// Parameter-choice method applied each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParamMethod {
    #[default]
    LCurve,
    Gcv,
}

impl std::fmt::Display for ParamMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParamMethod::LCurve => "lcurve",
            ParamMethod::Gcv => "gcv",
        })
    }
}

/// Stabilizer flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilizerKind {
    #[default]
    MinimumSupport,
    Smoothness,
}

impl std::fmt::Display for StabilizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StabilizerKind::MinimumSupport => "minimum-support",
            StabilizerKind::Smoothness => "smoothness",
        })
    }
}

/// How the minimum-support weights are rebuilt after the first iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeVariant {
    /// From the difference of the two previous iterates.
    #[default]
    IterateDifference,
    /// From the difference of the previous iterate and a fixed a-priori model.
    FixedApriori,
}

impl std::fmt::Display for WeVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeVariant::IterateDifference => "iterate-difference",
            WeVariant::FixedApriori => "fixed-apriori",
        })
    }
}

/// Candidate-alpha grid specification; `range: None` derives the span from
/// the generalized singular values of each iteration's factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGridSpec<T: Real> {
    pub n_points: usize,
    pub range: Option<(T, T)>,
}

impl<T: Real> Default for AlphaGridSpec<T> {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_ALPHA_GRID_POINTS,
            range: None,
        }
    }
}

/// Full parameterization of one inversion run.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionConfig<T: Real> {
    /// Focusing parameter of the minimum-support weights.
    pub epsilon: T,
    /// Depth-weighting exponent.
    pub beta: T,
    /// Depth-weighting offset in meters.
    pub zeta: T,
    pub bounds: Bounds<T>,
    /// Termination constant.
    pub tau: T,
    /// Cooling constant in [0.01, 0.5].
    pub cooling_c: T,
    pub max_iter: usize,
    pub param_method: ParamMethod,
    pub stabilizer: StabilizerKind,
    pub alpha_grid: AlphaGridSpec<T>,
    /// A-priori model; also the initial model when provided.
    pub m_apr: Option<DVector<T>>,
    /// Cells whose density is known a priori; their stabilizer weight is
    /// pinned from the start.
    pub hard_cells: Vec<usize>,
    pub we_variant: WeVariant,
    pub initial_alpha_mean: InitialAlphaMean,
}

impl<T: Real> InversionConfig<T> {
    /// Configuration with the reference defaults: epsilon 0.02, beta 0.6,
    /// zeta 0.1 m, tau 0.01, c 0.4, at most 20 iterations, L-curve choice,
    /// minimum-support stabilizer.
    pub fn new(bounds: Bounds<T>) -> Self {
        Self {
            epsilon: real(0.02),
            beta: real(0.6),
            zeta: real(0.1),
            bounds,
            tau: real(0.01),
            cooling_c: real(0.4),
            max_iter: 20,
            param_method: ParamMethod::default(),
            stabilizer: StabilizerKind::default(),
            alpha_grid: AlphaGridSpec::default(),
            m_apr: None,
            hard_cells: Vec::new(),
            we_variant: WeVariant::default(),
            initial_alpha_mean: InitialAlphaMean::default(),
        }
    }

    pub fn validate(&self, n_cells: usize) -> Result<()> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::Config("tau must be > 0".into()));
        }
        if !(self.cooling_c >= real::<T>(0.01) && self.cooling_c <= real::<T>(0.5)) {
            return Err(Error::Config("cooling constant must lie in [0.01, 0.5]".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.beta >= T::zero()) {
            return Err(Error::Config("beta must be >= 0".into()));
        }
        if !(self.zeta > T::zero()) {
            return Err(Error::Config("zeta must be > 0".into()));
        }
        if self.alpha_grid.n_points < 3 {
            return Err(Error::Config("alpha grid needs at least 3 points".into()));
        }
        if let Some((lo, hi)) = self.alpha_grid.range {
            if !(lo > T::zero()) || !(hi > lo) {
                return Err(Error::Config("alpha grid range must satisfy 0 < min < max".into()));
            }
        }
        if let Some(m) = &self.m_apr {
            if m.len() != n_cells {
                return Err(Error::DimensionMismatch {
                    context: "a-priori model",
                    expected: n_cells,
                    actual: m.len(),
                });
            }
        }
        if let Some(&j) = self.hard_cells.iter().find(|&&j| j >= n_cells) {
            return Err(Error::CellIndexOutOfRange {
                index: j,
                n_cells,
            });
        }
        Ok(())
    }
}

/// Which criterion stopped the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Sufficient decrease of the parametric functional.
    FunctionalDecrease,
    /// Sufficiently small model change.
    ModelChange,
    /// Iteration budget exhausted without convergence.
    MaxIterations,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::FunctionalDecrease => "functional-decrease",
            Termination::ModelChange => "model-change",
            Termination::MaxIterations => "max-iterations",
        })
    }
}

/// Per-iteration trace of the inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T: Real> {
    pub k: usize,
    /// Applied regularization parameter (after cooling).
    pub alpha: T,
    /// Parameter proposed by the choice method before cooling.
    pub alpha_star: T,
    /// Weighted data misfit of the accepted model.
    pub fidelity: T,
    /// Stabilizer value of the accepted increment.
    pub stabilizer_increment: T,
    /// Stabilizer value of the accepted model against the a-priori model.
    pub stabilizer_model: T,
    /// fidelity + alpha^2 * stabilizer_increment.
    pub objective: T,
    pub model_change: T,
    pub model_norm: T,
    pub param_status: ParamStatus,
}

/// Final model and its convergence history.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult<T: Real> {
    pub model: DVector<T>,
    pub records: Vec<IterationRecord<T>>,
    pub termination: Termination,
    pub converged: bool,
    pub final_alpha: T,
}

/// Clamps out-of-range entries to the violated bound and pins the stabilizer
/// weight of every clamped cell. Idempotent.
pub fn project_bounds<T: Real>(
    model: &DVector<T>,
    bounds: &Bounds<T>,
    whard: &DVector<T>,
) -> Result<(DVector<T>, DVector<T>)> {
    if whard.len() != model.len() {
        return Err(Error::DimensionMismatch {
            context: "bound projection",
            expected: model.len(),
            actual: whard.len(),
        });
    }
    let mut projected = model.clone();
    let mut whard_out = whard.clone();
    for j in 0..model.len() {
        if model[j] < bounds.lower() {
            projected[j] = bounds.lower();
        } else if model[j] > bounds.upper() {
            projected[j] = bounds.upper();
        } else {
            continue;
        }
        whard_out = hard_constrain(&whard_out, j)?;
    }
    Ok((projected, whard_out))
}

/// Data fidelity, stabilizer value, and the parametric functional
/// `P = fidelity + alpha^2 * stabilizer` for a model against a reference.
pub fn objective_terms<T: Real>(
    g: &SensitivityMatrix<T>,
    d_obs: &DVector<T>,
    sigmas: &DVector<T>,
    d_op: &StabilizerOperator<T>,
    model: &DVector<T>,
    m_ref: &DVector<T>,
    alpha: T,
) -> Result<(T, T, T)> {
    let m = g.n_stations();
    if d_obs.len() != m || sigmas.len() != m {
        return Err(Error::DimensionMismatch {
            context: "objective data",
            expected: m,
            actual: d_obs.len().min(sigmas.len()),
        });
    }
    if model.len() != g.n_cells() || m_ref.len() != g.n_cells() {
        return Err(Error::DimensionMismatch {
            context: "objective model",
            expected: g.n_cells(),
            actual: model.len().min(m_ref.len()),
        });
    }
    let wd = data_weights(sigmas)?;
    let predicted = g.entries() * model;
    let mut fidelity = T::zero();
    for i in 0..m {
        let r = wd[i] * (predicted[i] - d_obs[i]);
        fidelity += r * r;
    }
    let stab = d_op.apply(&(model - m_ref))?.norm_squared();
    Ok((fidelity, stab, fidelity + alpha * alpha * stab))
}

/// First satisfied termination criterion, in order: (i) sufficient decrease of
/// the functional, (ii) small model change, then the iteration cap.
pub fn check_termination<T: Real>(
    records: &[IterationRecord<T>],
    tau: T,
    max_iter: usize,
) -> Option<Termination> {
    let last = records.last()?;
    if records.len() >= 2 {
        let prev = &records[records.len() - 2];
        let decrease = prev.objective - last.objective;
        // A genuine but small decrease signals convergence; an increase is an
        // oscillation the reweighting may still recover from.
        if decrease >= T::zero() && decrease < tau * (T::one() + last.objective) {
            return Some(Termination::FunctionalDecrease);
        }
    }
    if last.model_change < tau.sqrt() * (T::one() + last.model_norm) {
        return Some(Termination::ModelChange);
    }
    if last.k >= max_iter {
        return Some(Termination::MaxIterations);
    }
    None
}

/// Convergence test of the outer loop. The two stall criteria are required
/// jointly, as in the classical optimization termination tests they derive
/// from: the objective must have stopped improving and the model must have
/// stopped moving. Taken separately, the step test routinely fires on a
/// single conservative mid-descent iteration while the misfit is still far
/// from the noise level.
fn loop_termination<T: Real>(
    records: &[IterationRecord<T>],
    tau: T,
    max_iter: usize,
) -> Option<Termination> {
    let last = records.last()?;
    let step_small = last.model_change < tau.sqrt() * (T::one() + last.model_norm);
    if records.len() == 1 {
        if step_small {
            return Some(Termination::ModelChange);
        }
    } else {
        let prev = &records[records.len() - 2];
        let decrease = prev.objective - last.objective;
        let objective_stalled =
            decrease >= T::zero() && decrease < tau * (T::one() + last.objective);
        if objective_stalled && step_small {
            return Some(Termination::FunctionalDecrease);
        }
    }
    if last.k >= max_iter {
        return Some(Termination::MaxIterations);
    }
    None
}

/// Number of cells exceeding half of the maximum recovered contrast, a proxy
/// for the anomalous-domain size.
pub fn support_count<T: Real>(model: &DVector<T>) -> usize {
    let mx = model.max();
    if !(mx > T::zero()) {
        return 0;
    }
    let threshold = mx / real::<T>(2.0);
    model.iter().filter(|&&v| v > threshold).count()
}

/// Runs the iteratively reweighted inversion.
pub fn invert<T: Real>(
    g: &SensitivityMatrix<T>,
    d_obs: &GravityProfile<T>,
    sigmas: &DVector<T>,
    config: &InversionConfig<T>,
) -> Result<InversionResult<T>> {
    invert_with_observer(g, d_obs, sigmas, config, &mut |_, _| {})
}

/// Like [`invert`], reporting each accepted iteration and its parameter-choice
/// trace to the observer.
pub fn invert_with_observer<T: Real>(
    g: &SensitivityMatrix<T>,
    d_obs: &GravityProfile<T>,
    sigmas: &DVector<T>,
    config: &InversionConfig<T>,
    observer: &mut dyn FnMut(&IterationRecord<T>, &[CurvePoint<T>]),
) -> Result<InversionResult<T>> {
    let m = g.n_stations();
    let n = g.n_cells();
    if d_obs.len() != m {
        return Err(Error::DimensionMismatch {
            context: "observed data",
            expected: m,
            actual: d_obs.len(),
        });
    }
    if sigmas.len() != m {
        return Err(Error::DimensionMismatch {
            context: "data sigmas",
            expected: m,
            actual: sigmas.len(),
        });
    }
    config.validate(n)?;

    let wd = data_weights(sigmas)?;
    let wdepth = depth_weights(g.grid(), config.beta, config.zeta)?;
    let mut whard = DVector::from_element(n, T::one());
    for &j in &config.hard_cells {
        whard = hard_constrain(&whard, j)?;
    }
    let m_apr = config
        .m_apr
        .clone()
        .unwrap_or_else(|| DVector::from_element(n, T::zero()));

    // Weighted kernel, constant across iterations.
    let mut gt = g.entries().clone();
    for i in 0..m {
        let w = wd[i];
        for j in 0..n {
            gt[(i, j)] *= w;
        }
    }

    let mut model = m_apr.clone();
    let mut model_prev = model.clone();
    let mut alpha_prev: Option<T> = None;
    let mut records: Vec<IterationRecord<T>> = Vec::new();
    let mut termination = Termination::MaxIterations;

    for k in 1..=config.max_iter {
        let d_op = match config.stabilizer {
            StabilizerKind::MinimumSupport => {
                let we = if k == 1 {
                    ms_weights(None, n, config.epsilon)?
                } else {
                    let reference = match config.we_variant {
                        WeVariant::IterateDifference => &model_prev,
                        WeVariant::FixedApriori => &m_apr,
                    };
                    ms_weights(Some((&model, reference)), n, config.epsilon)?
                };
                compose_stabilizer(&we, &whard, &wdepth)?
            }
            StabilizerKind::Smoothness => smoothness_operator(g.grid(), &whard, &wdepth)?,
        };

        let factors = gsvd_factorize(&gt, &d_op)?;
        let alpha_grid = match config.alpha_grid.range {
            Some((lo, hi)) => AlphaGrid::log_spaced(lo, hi, config.alpha_grid.n_points)?,
            None => AlphaGrid::from_factors(&factors, config.alpha_grid.n_points)?,
        };
        let predicted = g.entries() * &model;
        let r_tilde = DVector::from_fn(m, |i, _| wd[i] * (d_obs.values()[i] - predicted[i]));
        let curve = evaluate_curve(&factors, &r_tilde, &alpha_grid)?;

        let (alpha, alpha_star, param_status) = if k == 1 {
            let a0 = initial_alpha(factors.gamma(), config.initial_alpha_mean)?;
            (a0, a0, ParamStatus::Ok)
        } else {
            let prev = alpha_prev.expect("previous alpha exists after iteration 1");
            let (star, status) = match config.param_method {
                ParamMethod::LCurve => match corner_of_curve(&curve) {
                    Ok(found) => found,
                    // An exhausted residual leaves no corner to find; keep the
                    // previous parameter, termination will fire on its own.
                    Err(Error::DegenerateCurve(_)) => (prev, ParamStatus::FlatGcvFallback),
                    Err(e) => return Err(e),
                },
                ParamMethod::Gcv => gcv_argmin_of_curve(&curve, Some(prev))?,
            };
            (cooled_alpha(prev, star, config.cooling_c)?, star, status)
        };

        let increment = solve_filtered(&factors, &r_tilde, alpha)?;
        let updated = &model + &increment;
        let (projected, whard_next) = project_bounds(&updated, &config.bounds, &whard)?;
        whard = whard_next;

        let (fidelity, stabilizer_increment, objective) =
            objective_terms(g, d_obs.values(), sigmas, &d_op, &projected, &model, alpha)?;
        if !objective.is_finite() {
            return Err(Error::Numerical(format!(
                "objective not finite at iteration {k}: fidelity {fidelity:?}, \
                 stabilizer {stabilizer_increment:?}"
            )));
        }
        let stabilizer_model = d_op.apply(&(&projected - &m_apr))?.norm_squared();
        let record = IterationRecord {
            k,
            alpha,
            alpha_star,
            fidelity,
            stabilizer_increment,
            stabilizer_model,
            objective,
            model_change: (&projected - &model).norm(),
            model_norm: projected.norm(),
            param_status,
        };
        observer(&record, &curve);
        records.push(record);

        model_prev = std::mem::replace(&mut model, projected);
        alpha_prev = Some(alpha);

        if let Some(t) = loop_termination(&records, config.tau, config.max_iter) {
            termination = t;
            break;
        }
    }

    let converged = !matches!(termination, Termination::MaxIterations);
    let final_alpha = records
        .last()
        .map(|r| r.alpha)
        .ok_or_else(|| Error::Numerical("no iterations were recorded".into()))?;
    Ok(InversionResult {
        model,
        records,
        termination,
        converged,
        final_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: usize, objective: f64, model_change: f64, model_norm: f64) -> IterationRecord<f64> {
        IterationRecord {
            k,
            alpha: 1.0,
            alpha_star: 1.0,
            fidelity: objective,
            stabilizer_increment: 0.0,
            stabilizer_model: 0.0,
            objective,
            model_change,
            model_norm,
            param_status: ParamStatus::Ok,
        }
    }

    #[test]
    fn projection_clamps_and_pins() {
        let bounds = Bounds::new(0.0, 1.0).unwrap();
        let whard = DVector::from_element(3, 1.0);

        let inside = DVector::from_vec(vec![0.2, 0.5, 0.9]);
        let (p, w) = project_bounds(&inside, &bounds, &whard).unwrap();
        assert_eq!(p, inside);
        assert_eq!(w, whard);

        let outside = DVector::from_vec(vec![1.2, 0.5, -0.1]);
        let (p, w) = project_bounds(&outside, &bounds, &whard).unwrap();
        assert_eq!(p, DVector::from_vec(vec![1.0, 0.5, 0.0]));
        assert_eq!(w, DVector::from_vec(vec![100.0, 1.0, 100.0]));

        let (p2, w2) = project_bounds(&p, &bounds, &w).unwrap();
        assert_eq!(p, p2);
        assert_eq!(w, w2);
    }

    #[test]
    fn functional_decrease_criterion_fires() {
        let records = vec![record(1, 100.0, 10.0, 10.0), record(2, 99.9, 10.0, 10.0)];
        assert_eq!(
            check_termination(&records, 0.01, 20),
            Some(Termination::FunctionalDecrease)
        );
    }

    #[test]
    fn model_change_criterion_fires_on_identical_models() {
        let records = vec![record(1, 100.0, 0.0, 5.0)];
        assert_eq!(
            check_termination(&records, 0.01, 20),
            Some(Termination::ModelChange)
        );
    }

    #[test]
    fn max_iterations_without_convergence() {
        let records: Vec<_> = (1..=20)
            .map(|k| record(k, 1e4 / k as f64, 50.0, 1.0))
            .collect();
        assert_eq!(
            check_termination(&records, 0.01, 20),
            Some(Termination::MaxIterations)
        );
        let fewer = &records[..10];
        assert_eq!(check_termination(fewer, 0.01, 20), None);
    }

    #[test]
    fn support_counts_cells_above_half_max() {
        let m = DVector::from_vec(vec![0.0, 0.2, 0.6, 1.0, 0.49]);
        assert_eq!(support_count(&m), 2);
        assert_eq!(support_count(&DVector::<f64>::zeros(4)), 0);
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let bounds = Bounds::new(0.0, 1.0).unwrap();
        let mut cfg = InversionConfig::<f64>::new(bounds);
        assert!(cfg.validate(10).is_ok());
        cfg.cooling_c = 0.6;
        assert!(cfg.validate(10).is_err());
        cfg.cooling_c = 0.4;
        cfg.hard_cells = vec![10];
        assert!(cfg.validate(10).is_err());
        cfg.hard_cells.clear();
        cfg.m_apr = Some(DVector::zeros(9));
        assert!(cfg.validate(10).is_err());
        assert!(Bounds::new(1.0, 1.0).is_err());
    }
}
