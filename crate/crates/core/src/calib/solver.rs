//! Robust Levenberg-Marquardt over the calibration state.

use alloc::vec::Vec;

use nalgebra::{Cholesky, SMatrix, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use super::residuals::{
    residual_a, residual_a_jacobian, residual_g, residual_g_jacobian, residual_w, residual_w_jacobian, Delta,
    Jacobian, ACCEL_BIAS, DIM, GYRO_BIAS, POS, ROT, TIME,
};
use super::types::{CalibConfig, CalibFrame, CalibResult, CalibState, IterationRecord};
use super::dataset::MIN_FRAMES;
use crate::error::CalibError;
use crate::geometry::Vec3;

type Normal = SMatrix<f64, DIM, DIM>;

pub const GRADIENT_TOL: f64 = 1e-10;
pub const STEP_TOL: f64 = 1e-12;
pub const MAX_CONDITION: f64 = 1e12;
const LAMBDA_INIT: f64 = 1e-4;
const LAMBDA_MAX: f64 = 1e10;
const DAMPING_FLOOR: f64 = 1e-9;

/// Which error-state coordinates the solver may move.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamMask([bool; DIM]);

impl ParamMask {
    pub fn all() -> Self {
        ParamMask([true; DIM])
    }

    pub fn only(blocks: &[(usize, usize)]) -> Self {
        let mut m = [false; DIM];
        for &(start, len) in blocks {
            m[start..start + len].iter_mut().for_each(|b| *b = true);
        }
        ParamMask(m)
    }

    fn active(&self, i: usize) -> bool {
        self.0[i]
    }
}

/// Cauchy scale per family; zero disables the family.
#[derive(Clone, Copy, Debug)]
struct Problem<'a> {
    frames: &'a [CalibFrame],
    scales: [f64; 3],
    sigma: [Vec3; 3],
    mask: ParamMask,
}

fn cauchy_cost(s: f64, c: f64) -> f64 {
    let c2 = c * c;
    c2 * (s / c2).ln_1p()
}

fn cauchy_weight(s: f64, c: f64) -> f64 {
    1.0 / (1.0 + s / (c * c))
}

fn whiten(r: &Vec3, sigma: &Vec3) -> Vec3 {
    r.component_div(sigma)
}

impl Problem<'_> {
    fn check_ground(&self) -> Result<(), CalibError> {
        if self.scales[2] > 0.0 {
            if let Some(f) = self.frames.iter().find(|f| f.ground().is_none()) {
                return Err(CalibError::MissingGroundObservation { index: f.index });
            }
        }
        Ok(())
    }

    fn residuals(&self, x: &CalibState, f: &CalibFrame) -> [Option<Vec3>; 3] {
        [
            (self.scales[0] > 0.0).then(|| residual_w(x, f)),
            (self.scales[1] > 0.0).then(|| residual_a(x, f)),
            // Ground presence was checked up front.
            (self.scales[2] > 0.0).then(|| residual_g(x, f).unwrap_or_else(|_| Vec3::zeros())),
        ]
    }

    fn cost(&self, x: &CalibState) -> f64 {
        let mut total = 0.0;
        for f in self.frames {
            for (i, r) in self.residuals(x, f).iter().enumerate() {
                if let Some(r) = r {
                    total += cauchy_cost(whiten(r, &self.sigma[i]).norm_squared(), self.scales[i]);
                }
            }
        }
        total
    }

    /// IRLS normal equations restricted to the active coordinates.
    fn linearize(&self, x: &CalibState) -> (f64, Normal, Delta) {
        let mut h = Normal::zeros();
        let mut g = Delta::zeros();
        let mut cost = 0.0;
        for f in self.frames {
            let mut blocks: [Option<(Vec3, Jacobian)>; 3] = [None, None, None];
            if self.scales[0] > 0.0 {
                blocks[0] = Some(residual_w_jacobian(x, f));
            }
            if self.scales[1] > 0.0 {
                blocks[1] = Some(residual_a_jacobian(x, f));
            }
            if self.scales[2] > 0.0 {
                blocks[2] = residual_g_jacobian(x, f).ok();
            }
            for (i, b) in blocks.iter().enumerate() {
                let Some((r, j)) = b else { continue };
                let e = whiten(r, &self.sigma[i]);
                let mut jw = *j;
                for row in 0..3 {
                    jw.row_mut(row).scale_mut(1.0 / self.sigma[i][row]);
                }
                let s = e.norm_squared();
                let w = cauchy_weight(s, self.scales[i]);
                cost += cauchy_cost(s, self.scales[i]);
                h += jw.transpose() * jw * w;
                g += jw.transpose() * e * w;
            }
        }
        for i in 0..DIM {
            if !self.mask.active(i) {
                h.row_mut(i).fill(0.0);
                h.column_mut(i).fill(0.0);
                g[i] = 0.0;
            }
        }
        (cost, h, g)
    }

    fn condition(&self, h: &Normal) -> f64 {
        let idx: Vec<usize> = (0..DIM).filter(|&i| self.mask.active(i)).collect();
        let n = idx.len();
        let d: Vec<f64> = idx.iter().map(|&i| h[(i, i)]).collect();
        if d.iter().any(|v| !(*v > 0.0)) {
            return f64::INFINITY;
        }
        let scaled = nalgebra::DMatrix::from_fn(n, n, |a, b| {
            h[(idx[a], idx[b])] / (d[a] * d[b]).sqrt() + if a == b { 1e-12 } else { 0.0 }
        });
        let eig = SymmetricEigen::new(scaled).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        if lo <= 0.0 { f64::INFINITY } else { hi / lo }
    }

    fn rms(&self, x: &CalibState) -> [f64; 3] {
        let mut sum = [0.0; 3];
        let mut count = [0usize; 3];
        for f in self.frames {
            let r = [Some(residual_w(x, f)), Some(residual_a(x, f)), residual_g(x, f).ok()];
            for i in 0..3 {
                if let Some(r) = r[i] {
                    sum[i] += r.norm_squared();
                    count[i] += 3;
                }
            }
        }
        core::array::from_fn(|i| if count[i] == 0 { 0.0 } else { (sum[i] / count[i] as f64).sqrt() })
    }

    fn record(&self, iteration: usize, cost: f64, state: &CalibState) -> IterationRecord {
        let [rms_w, rms_a, rms_g] = self.rms(state);
        IterationRecord { iteration, cost, state: *state, rms_w, rms_a, rms_g }
    }

    fn run(&self, initial: CalibState, max_iterations: usize, allow_rank_deficient: bool) -> Result<CalibResult, CalibError> {
        if self.frames.len() < MIN_FRAMES {
            return Err(CalibError::InsufficientOverlap { found: self.frames.len(), required: MIN_FRAMES });
        }
        self.check_ground()?;

        let mut x = initial;
        let (mut cost, mut h, mut g) = self.linearize(&x);
        if !allow_rank_deficient {
            let condition = self.condition(&h);
            if condition > MAX_CONDITION {
                return Err(CalibError::RankDeficient { condition });
            }
        }
        let mut history = alloc::vec![self.record(0, cost, &x)];
        let mut lambda = LAMBDA_INIT;
        let mut iterations = 0;
        let mut converged = false;

        while iterations < max_iterations {
            if g.amax() < GRADIENT_TOL {
                converged = true;
                break;
            }
            let mut a = h;
            for i in 0..DIM {
                a[(i, i)] = if self.mask.active(i) { h[(i, i)] * (1.0 + lambda) + lambda * DAMPING_FLOOR } else { 1.0 };
            }
            let Some(chol) = Cholesky::new(a) else {
                lambda *= 10.0;
                if lambda > LAMBDA_MAX {
                    break;
                }
                continue;
            };
            let step = -chol.solve(&g);
            if step.norm() < STEP_TOL {
                converged = true;
                break;
            }
            let trial = x.boxplus(&step);
            let trial_cost = self.cost(&trial);
            if trial_cost < cost {
                x = trial;
                iterations += 1;
                lambda = (lambda * 0.3).max(1e-12);
                (cost, h, g) = self.linearize(&x);
                history.push(self.record(iterations, cost, &x));
            } else {
                lambda *= 10.0;
                if lambda > LAMBDA_MAX {
                    // No descent direction left at working precision.
                    converged = true;
                    break;
                }
            }
        }

        let [rms_w, rms_a, rms_g] = self.rms(&x);
        Ok(CalibResult { estimate: x, rms_w, rms_a, rms_g, iterations, converged, reference_errors: None, history })
    }
}

fn validate(cfg: &CalibConfig) -> Result<(), CalibError> {
    let ok = |v: f64| v.is_finite() && v >= 0.0;
    if !(cfg.rho_w > 0.0 && cfg.rho_w.is_finite()) || !ok(cfg.rho_a) || !ok(cfg.rho_g) {
        return Err(CalibError::InvalidConfig("rho_w must be positive and rho_a, rho_g non-negative"));
    }
    if !(cfg.cauchy_scale > 0.0 && cfg.cauchy_scale.is_finite()) {
        return Err(CalibError::InvalidConfig("cauchy_scale must be positive"));
    }
    let positive = |s: &Vec3| s.iter().all(|v| *v > 0.0 && v.is_finite());
    if !positive(&cfg.sigma_w) || !positive(&cfg.sigma_a) || !positive(&cfg.sigma_g) {
        return Err(CalibError::InvalidConfig("residual standard deviations must be positive"));
    }
    if cfg.max_iterations == 0 {
        return Err(CalibError::InvalidConfig("max_iterations must be at least 1"));
    }
    Ok(())
}

impl CalibConfig {
    /// Cauchy scales of the angular-rate, acceleration and ground families.
    pub fn kernel_scales(&self) -> [f64; 3] {
        let unit = self.cauchy_scale / self.rho_w;
        [self.cauchy_scale, unit * self.rho_a, unit * self.rho_g]
    }
}

fn problem<'a>(frames: &'a [CalibFrame], cfg: &CalibConfig, scales: [f64; 3], mask: ParamMask) -> Problem<'a> {
    Problem { frames, scales, sigma: [cfg.sigma_w, cfg.sigma_a, cfg.sigma_g], mask }
}

/// Joint estimate of every calibration parameter from all three residual
/// families at once.
pub fn solve(frames: &[CalibFrame], cfg: &CalibConfig) -> Result<CalibResult, CalibError> {
    validate(cfg)?;
    problem(frames, cfg, cfg.kernel_scales(), ParamMask::all()).run(cfg.initial, cfg.max_iterations, cfg.allow_rank_deficient)
}

/// Two-stage baseline kept for ablation: rotation, time offset and gyro
/// bias from angular rates alone, then translation and accelerometer bias
/// with the rotation held fixed. Rank deficiency is tolerated in both
/// stages.
pub fn solve_sequential(frames: &[CalibFrame], cfg: &CalibConfig) -> Result<CalibResult, CalibError> {
    validate(cfg)?;
    let [cw, ca, cg] = cfg.kernel_scales();
    let first = problem(frames, cfg, [cw, 0.0, 0.0], ParamMask::only(&[(ROT, 3), (TIME, 1), (GYRO_BIAS, 3)]))
        .run(cfg.initial, cfg.max_iterations, true)?;
    let second = problem(frames, cfg, [0.0, ca, cg], ParamMask::only(&[(POS, 3), (ACCEL_BIAS, 3)]))
        .run(first.estimate, cfg.max_iterations, true)?;
    let mut history = first.history;
    let offset = first.iterations;
    history.extend(second.history.into_iter().skip(1).map(|mut r| {
        r.iteration += offset;
        r
    }));
    Ok(CalibResult {
        iterations: first.iterations + second.iterations,
        converged: first.converged && second.converged,
        history,
        ..second
    })
}
