//! Jump-model parameter sets, their validity constraints, the drift
//! compensators that move between the jump and diffusion parts of the
//! splitting, and closed-form characteristic exponents for FFT
//! cross-validation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::{EngineError, Result};

/// Exclusion zone around α ∈ {0, 1} inside which the special-case formulas
/// are dispatched instead of Γ(−α).
pub const ALPHA_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MertonParams {
    pub lambda: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KouParams {
    pub lambda: f64,
    pub p_up: f64,
    pub theta1: f64,
    pub theta2: f64,
}

/// Generalized tempered stable jumps (CGMY/KoBoL family). Either tail may
/// be switched off with zero intensity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GtspParams {
    pub lambda_r: f64,
    pub lambda_l: f64,
    pub nu_r: f64,
    pub nu_l: f64,
    pub alpha_r: f64,
    pub alpha_l: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub rate: f64,
    pub dividend: f64,
    pub sigma: f64,
    /// Compensator drift moved over from the jump part.
    pub drift_shift: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum LevyJumpModel {
    None,
    Merton(MertonParams),
    Kou(KouParams),
    Gtsp(GtspParams),
}

/// Which side of a two-sided GTSP measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
}

impl MertonParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.lambda >= 0.0) {
            errs.push(format!("λ ≥ 0 required, got {}", self.lambda));
        }
        if !(self.sigma_j > 0.0) {
            errs.push(format!("σ_J > 0 required, got {}", self.sigma_j));
        }
        collect(errs)
    }

    /// κ = e^{μ_J + σ_J²/2} − 1.
    pub fn kappa(&self) -> f64 {
        (self.mu_j + 0.5 * self.sigma_j * self.sigma_j).exp() - 1.0
    }
}

impl KouParams {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.lambda > 0.0) {
            errs.push(format!("λ > 0 required, got {}", self.lambda));
        }
        if !(self.theta1 > 1.0) {
            errs.push(format!("θ₁ > 1 required, got {}", self.theta1));
        }
        if !(self.theta2 > 0.0) {
            errs.push(format!("θ₂ > 0 required, got {}", self.theta2));
        }
        if !(self.p_up > 0.0 && self.p_up < 1.0) {
            errs.push(format!("0 < p < 1 required, got {}", self.p_up));
        }
        collect(errs)
    }

    /// μ₀ = p/(θ₁−1) − (1−p)/(1+θ₂), the expectation of e^Y − 1.
    pub fn mu0(&self) -> Result<f64> {
        if !(self.theta1 > 1.0) {
            return Err(EngineError::InvalidModel(format!(
                "θ₁ > 1 required, got {}",
                self.theta1
            )));
        }
        Ok(self.p_up / (self.theta1 - 1.0) - (1.0 - self.p_up) / (1.0 + self.theta2))
    }
}

impl GtspParams {
    /// One-sided right-tail model.
    pub fn right_only(lambda_r: f64, nu_r: f64, alpha_r: f64) -> Self {
        GtspParams {
            lambda_r,
            lambda_l: 0.0,
            nu_r,
            nu_l: 1.0,
            alpha_r,
            alpha_l: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.lambda_r >= 0.0 && self.lambda_l >= 0.0) {
            errs.push("tail intensities must be nonnegative".into());
        }
        if self.lambda_r > 0.0 && !(self.nu_r > 1.0) {
            errs.push(format!("ν_R > 1 required, got {}", self.nu_r));
        }
        if self.lambda_l > 0.0 && !(self.nu_l > 0.0) {
            errs.push(format!("ν_L > 0 required, got {}", self.nu_l));
        }
        if !(self.alpha_r < 2.0) {
            errs.push(format!("α_R < 2 required, got {}", self.alpha_r));
        }
        if !(self.alpha_l < 2.0) {
            errs.push(format!("α_L < 2 required, got {}", self.alpha_l));
        }
        collect(errs)
    }
}

fn collect(errs: Vec<String>) -> Result<()> {
    if errs.is_empty() {
        Ok(())
    } else {
        Err(EngineError::InvalidModel(errs.join("; ")))
    }
}

impl LevyJumpModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            LevyJumpModel::None => Ok(()),
            LevyJumpModel::Merton(p) => p.validate(),
            LevyJumpModel::Kou(p) => p.validate(),
            LevyJumpModel::Gtsp(p) => p.validate(),
        }
    }
}

/// α-regime of one GTSP tail; each regime maps to its own discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaRegime {
    Negative,
    Zero,
    ZeroToOne,
    One,
    OneToTwo,
}

pub fn alpha_regime(alpha: f64) -> Result<AlphaRegime> {
    if alpha >= 2.0 - ALPHA_GUARD {
        return Err(EngineError::InvalidModel(format!("α = {alpha} must be below 2")));
    }
    if alpha.abs() <= ALPHA_GUARD {
        Ok(AlphaRegime::Zero)
    } else if (alpha - 1.0).abs() <= ALPHA_GUARD {
        Ok(AlphaRegime::One)
    } else if alpha < 0.0 {
        Ok(AlphaRegime::Negative)
    } else if alpha < 1.0 {
        Ok(AlphaRegime::ZeroToOne)
    } else {
        Ok(AlphaRegime::OneToTwo)
    }
}

/// ln(ν−1) − 2ν·coth⁻¹(1−2ν), the α = 1 right-tail drift constant; equals
/// (1−ν)ln(ν−1) + ν·ln ν and is positive for ν > 1.
pub fn alpha_one_const_right(nu: f64) -> Result<f64> {
    if !(nu > 1.0) {
        return Err(EngineError::InvalidModel(format!(
            "right α=1 constant needs ν > 1, got {nu}"
        )));
    }
    Ok((1.0 - nu) * (nu - 1.0).ln() + nu * nu.ln())
}

/// (1+ν)ln(1+ν) − ν·ln ν, the α = 1 left-tail drift constant.
pub fn alpha_one_const_left(nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(EngineError::InvalidModel(format!(
            "left α=1 constant needs ν > 0, got {nu}"
        )));
    }
    Ok((1.0 + nu) * (1.0 + nu).ln() - nu * nu.ln())
}

/// The scalar coefficient of ∇ that leaves the jump generator for the
/// diffusion drift, λ·Γ(−α)·[ν^α − (ν∓1)^α] with the α ∈ {0, 1} limits on
/// their special formulas. For α = 1 the coefficient depends on the dump
/// parameter κ: the generator keeps κ·c·∇ and the diffusion is debited by
/// (κ−1)·c·λ.
pub fn gtsp_drift_coefficient(p: &GtspParams, side: Side, kappa_dump: f64) -> Result<f64> {
    let (lam, nu, alpha) = match side {
        Side::Right => (p.lambda_r, p.nu_r, p.alpha_r),
        Side::Left => (p.lambda_l, p.nu_l, p.alpha_l),
    };
    if lam == 0.0 {
        return Ok(0.0);
    }
    match alpha_regime(alpha)? {
        AlphaRegime::Zero => {
            // log((ν∓1)/ν) coefficient of Eq-style log form
            match side {
                Side::Right => {
                    if !(nu > 1.0) {
                        return Err(EngineError::InvalidModel(
                            "α=0 right drift needs ν > 1".into(),
                        ));
                    }
                    Ok(lam * ((nu - 1.0) / nu).ln())
                }
                Side::Left => Ok(-lam * ((nu + 1.0) / nu).ln()),
            }
        }
        AlphaRegime::One => {
            let c = match side {
                Side::Right => alpha_one_const_right(nu)?,
                Side::Left => alpha_one_const_left(nu)?,
            };
            Ok(-lam * (kappa_dump - 1.0) * c)
        }
        _ => {
            let g = gamma(-alpha);
            let other = match side {
                Side::Right => nu - 1.0,
                Side::Left => nu + 1.0,
            };
            if side == Side::Right && !(nu > 1.0) {
                return Err(EngineError::InvalidModel(
                    "right-tail drift needs ν > 1".into(),
                ));
            }
            Ok(lam * g * (nu.powf(alpha) - other.powf(alpha)))
        }
    }
}

/// Compensated characteristic exponent φ(u) of the jump part, such that
/// the jump characteristic function over time t is exp(t·φ(u)) and
/// φ(−i·1) = 0 (the martingale compensator (e^y − 1)∇ is included).
pub fn characteristic_exponent(model: &LevyJumpModel, u: f64) -> Result<Complex64> {
    characteristic_exponent_complex(model, Complex64::new(u, 0.0))
}

/// φ on the complex plane; the damped Fourier inversion evaluates it at
/// u − (α+1)i, which stays inside the strip of analyticity as long as the
/// tail decays dominate the damping.
pub fn characteristic_exponent_complex(model: &LevyJumpModel, u: Complex64) -> Result<Complex64> {
    let iu = Complex64::i() * u;
    match model {
        LevyJumpModel::None => Ok(Complex64::new(0.0, 0.0)),
        LevyJumpModel::Merton(p) => {
            let kappa = p.kappa();
            let e = (iu * p.mu_j + 0.5 * p.sigma_j * p.sigma_j * iu * iu).exp();
            Ok(p.lambda * (e - 1.0 - iu * kappa))
        }
        LevyJumpModel::Kou(p) => {
            let mu0 = p.mu0()?;
            let up = p.p_up * p.theta1 / (p.theta1 - iu);
            let dn = (1.0 - p.p_up) * p.theta2 / (p.theta2 + iu);
            Ok(p.lambda * (up + dn - 1.0 - iu * mu0))
        }
        LevyJumpModel::Gtsp(p) => {
            let mut phi = Complex64::new(0.0, 0.0);
            if p.lambda_r > 0.0 {
                phi += gtsp_side_exponent(p.lambda_r, p.nu_r, p.alpha_r, Side::Right, iu)?;
            }
            if p.lambda_l > 0.0 {
                phi += gtsp_side_exponent(p.lambda_l, p.nu_l, p.alpha_l, Side::Left, iu)?;
            }
            Ok(phi)
        }
    }
}

fn gtsp_side_exponent(
    lam: f64,
    nu: f64,
    alpha: f64,
    side: Side,
    iu: Complex64,
) -> Result<Complex64> {
    // ∇ → iu with the operator argument ν ∓ ∇
    let s = match side {
        Side::Right => nu - iu,
        Side::Left => nu + iu,
    };
    let drift_arg = match side {
        Side::Right => iu,
        Side::Left => iu,
    };
    match alpha_regime(alpha)? {
        AlphaRegime::Zero => {
            let other = match side {
                Side::Right => nu - 1.0,
                Side::Left => nu + 1.0,
            };
            Ok(lam * (nu.ln() - s.ln() + drift_arg * (other / nu).ln()))
        }
        AlphaRegime::One => match side {
            Side::Right => {
                let c = alpha_one_const_right(nu)?;
                Ok(lam * (s * s.ln() - nu * nu.ln() + drift_arg * c))
            }
            Side::Left => {
                let c = alpha_one_const_left(nu)?;
                Ok(lam * (s * (s / nu).ln() - drift_arg * c))
            }
        },
        _ => {
            let g = gamma(-alpha);
            let other = match side {
                Side::Right => nu - 1.0,
                Side::Left => nu + 1.0,
            };
            let na = nu.powf(alpha);
            Ok(lam * g * (s.powf(alpha) - na + drift_arg * (na - other.powf(alpha))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_kou() -> KouParams {
        KouParams {
            lambda: 0.1,
            p_up: 0.3445,
            theta1: 3.0465,
            theta2: 3.0775,
        }
    }

    #[test]
    fn merton_kappa_values() {
        let p = MertonParams { lambda: 1.0, mu_j: 0.3, sigma_j: 0.1 };
        assert!((p.kappa() - 0.35662536).abs() < 1e-7);
        let p = MertonParams { lambda: 1.0, mu_j: 0.0, sigma_j: 1e-9 };
        assert!(p.kappa().abs() < 1e-12);
        // martingale-neutral jump mean
        let s = 0.4;
        let p = MertonParams { lambda: 1.0, mu_j: -0.5 * s * s, sigma_j: s };
        assert!(p.kappa().abs() < 1e-15);
    }

    #[test]
    fn kou_mu0_values() {
        let mu0 = table1_kou().mu0().unwrap();
        assert!((mu0 - 0.007575913955171348).abs() < 1e-15);
        let p = KouParams { lambda: 1.0, p_up: 1.0, theta1: 2.0, theta2: 1.0 };
        assert!((p.mu0().unwrap() - 1.0).abs() < 1e-15);
        // p = (θ₁−1)·(1+θ₂)/((1+θ₂)·(θ₁−1) + ...) family where μ₀ = 0:
        // p/(θ₁−1) = (1−p)/(1+θ₂)
        let (t1, t2) = (3.0, 2.0);
        let p_up = (t1 - 1.0) / (t1 + t2);
        let p = KouParams { lambda: 1.0, p_up, theta1: t1, theta2: t2 };
        assert!(p.mu0().unwrap().abs() < 1e-15);
        let bad = KouParams { lambda: 1.0, p_up: 0.5, theta1: 0.9, theta2: 1.0 };
        assert!(bad.mu0().is_err());
    }

    #[test]
    fn validation_messages() {
        let bad = KouParams { lambda: 0.1, p_up: 0.5, theta1: 0.9, theta2: 1.0 };
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("θ₁ > 1"));
        let bad = GtspParams::right_only(1.0, 1.0, -0.5);
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("ν_R > 1"));
        assert!(table1_kou().validate().is_ok());
    }

    #[test]
    fn gtsp_drift_examples() {
        // ν_R = 2, α_R = −0.5, λ_R = 10 → 10·Γ(0.5)·(2^{−1/2} − 1)
        let p = GtspParams::right_only(10.0, 2.0, -0.5);
        let c = gtsp_drift_coefficient(&p, Side::Right, 5.0).unwrap();
        let want = 10.0 * std::f64::consts::PI.sqrt() * (0.5f64.sqrt() - 1.0);
        assert!((c - want).abs() < 1e-12);
        // α = 1 with ν_R = 1 is ill-defined (log(ν−1))
        let p = GtspParams::right_only(1.0, 1.0, 1.0);
        assert!(gtsp_drift_coefficient(&p, Side::Right, 5.0).is_err());
        // α → 0 dispatches to the log form
        let p = GtspParams::right_only(2.0, 3.0, 0.0);
        let c = gtsp_drift_coefficient(&p, Side::Right, 5.0).unwrap();
        assert!((c - 2.0 * (2.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn phi_vanishes_at_zero() {
        let models = [
            LevyJumpModel::Merton(MertonParams { lambda: 5.0, mu_j: 0.3, sigma_j: 0.1 }),
            LevyJumpModel::Kou(table1_kou()),
            LevyJumpModel::Gtsp(GtspParams::right_only(10.0, 2.0, -0.5)),
            LevyJumpModel::Gtsp(GtspParams {
                lambda_r: 0.33,
                lambda_l: 0.33,
                nu_r: 1.5098,
                nu_l: 2.7598,
                alpha_r: 0.0,
                alpha_l: 0.0,
            }),
        ];
        for m in models {
            let phi = characteristic_exponent(&m, 0.0).unwrap();
            assert!(phi.norm() < 1e-14, "{m:?}: {phi}");
        }
    }

    #[test]
    fn compensator_scalar_identity() {
        // φ with ∇ → 1 must vanish for the compensated closed forms
        let p = table1_kou();
        let mu0 = p.mu0().unwrap();
        let v = p.p_up * p.theta1 / (p.theta1 - 1.0)
            + (1.0 - p.p_up) * p.theta2 / (p.theta2 + 1.0)
            - 1.0
            - mu0;
        assert!(v.abs() < 1e-10);
        let m = MertonParams { lambda: 1.0, mu_j: 0.3, sigma_j: 0.1 };
        let v = (m.mu_j + 0.5 * m.sigma_j * m.sigma_j).exp() - 1.0 - m.kappa();
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn alpha_regime_dispatch() {
        assert_eq!(alpha_regime(-0.5).unwrap(), AlphaRegime::Negative);
        assert_eq!(alpha_regime(0.0).unwrap(), AlphaRegime::Zero);
        assert_eq!(alpha_regime(0.9).unwrap(), AlphaRegime::ZeroToOne);
        assert_eq!(alpha_regime(1.0).unwrap(), AlphaRegime::One);
        assert_eq!(alpha_regime(1.98).unwrap(), AlphaRegime::OneToTwo);
        assert!(alpha_regime(2.0).is_err());
    }

    #[test]
    fn alpha_one_constants() {
        // closed forms: right (1−ν)ln(ν−1)+ν ln ν; left (1+ν)ln(1+ν)−ν ln ν
        let c = alpha_one_const_right(2.0).unwrap();
        assert!((c - 2.0 * 2.0f64.ln()).abs() < 1e-14);
        assert!(c > 0.0);
        let c = alpha_one_const_left(2.0).unwrap();
        assert!((c - (3.0 * 3.0f64.ln() - 2.0 * 2.0f64.ln())).abs() < 1e-14);
    }
}
