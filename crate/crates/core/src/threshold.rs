//! Next-generation-matrix thresholds for the homogeneous model.
//!
//! With infected compartments ordered `(C1, C2, I1, I2)` the next-generation
//! matrix reduces to the 2x2 blocks
//!
//! ```text
//! L = F1 (beta_c I + eta beta_i V2^-1) V1^-1
//! U = beta_i F1 V2^-1
//! ```
//!
//! and `R0 = rho(kappa L + (1 - kappa) U)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{HomogeneousParams, ParamErrors};

#[derive(Debug, Error)]
pub enum ThresholdError {
    #[error(transparent)]
    Params(#[from] ParamErrors),
    #[error("singular transfer matrix ({0})")]
    Singular(&'static str),
    #[error("negative discriminant {0:e}: closed-form trace/determinant are inconsistent")]
    NegativeDiscriminant(f64),
}

pub type Mat2 = [[f64; 2]; 2];

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_add(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

pub fn mat2_scale(a: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn mat2_det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn mat2_trace(a: &Mat2) -> f64 {
    a[0][0] + a[1][1]
}

pub fn mat2_inv(a: &Mat2) -> Option<Mat2> {
    let det = mat2_det(a);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

/// Spectral radius of a 2x2 matrix with real spectrum, `(Tr + sqrt(Tr^2 - 4 det)) / 2`.
/// Entrywise non-negative matrices always have a non-negative discriminant.
pub fn mat2_spectral_radius(a: &Mat2) -> f64 {
    let tr = mat2_trace(a);
    let det = mat2_det(a);
    if tr == 0.0 && det == 0.0 {
        return 0.0;
    }
    let disc = (a[0][0] - a[1][1]).powi(2) + 4.0 * a[0][1] * a[1][0];
    let root = disc.max(0.0).sqrt();
    ((tr + root) / 2.0).abs().max(((tr - root) / 2.0).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgmMatrices {
    pub f1: Mat2,
    pub v1: Mat2,
    pub v2: Mat2,
    pub l: Mat2,
    pub u: Mat2,
}

impl NgmMatrices {
    /// `kappa L + (1 - kappa) U`.
    pub fn h(&self, kappa: f64) -> Mat2 {
        mat2_add(&mat2_scale(&self.l, kappa), &mat2_scale(&self.u, 1.0 - kappa))
    }
}

pub fn build_ngm(hp: &HomogeneousParams) -> Result<NgmMatrices, ThresholdError> {
    hp.validate()?;
    let (s1, s2) = (hp.s1(), hp.s2());
    let e = &hp.epi;
    let f1 = [[hp.d1 * s1, hp.d1 * s1], [hp.d1 * s2, (hp.p * hp.d2 + hp.d1) * s2]];
    let v1 = [[hp.gamma1 + e.eta_prime, -hp.gamma2], [-hp.gamma1, hp.gamma2 + e.eta_prime]];
    let v2 = [[hp.gamma1_i + e.delta, -hp.gamma2_i], [-hp.gamma1_i, hp.gamma2_i + e.delta]];
    let v1_inv = mat2_inv(&v1).ok_or(ThresholdError::Singular("V1"))?;
    let v2_inv = mat2_inv(&v2).ok_or(ThresholdError::Singular("V2"))?;
    let inner = mat2_add(&[[e.beta_c, 0.0], [0.0, e.beta_c]], &mat2_scale(&v2_inv, e.eta * e.beta_i));
    let l = mat2_mul(&mat2_mul(&f1, &inner), &v1_inv);
    let u = mat2_scale(&mat2_mul(&f1, &v2_inv), e.beta_i);
    Ok(NgmMatrices { f1, v1, v2, l, u })
}

/// Layer-wise thresholds. The `tilde_*` values equal the plain ones at `kappa = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentThresholds {
    pub r0_1: f64,
    pub r0_2: f64,
    pub tilde_r0_1: f64,
    pub tilde_r0_2: f64,
}

pub fn r0_components(hp: &HomogeneousParams) -> ComponentThresholds {
    let e = &hp.epi;
    let infected_residual = (e.delta + hp.gamma1_i) / (e.delta * (e.delta + hp.gamma1_i + hp.gamma2_i));
    let r0_1 = hp.d1 * (e.beta_c / e.eta_prime + e.eta * e.beta_i / (e.eta_prime * e.delta));
    let r0_2 = hp.p * hp.d2 * (e.beta_c / e.eta_prime + e.eta * e.beta_i * infected_residual / e.eta_prime);
    let kb = e.kappa_bar();
    ComponentThresholds {
        r0_1,
        r0_2,
        tilde_r0_1: e.kappa * r0_1 + kb * hp.d1 * e.beta_i / e.delta,
        tilde_r0_2: e.kappa * r0_2 + kb * hp.p * hp.d2 * e.beta_i * infected_residual,
    }
}

/// Trace, determinant and discriminant of `kappa L + (1 - kappa) U` from the
/// closed-form expressions in terms of the layer thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedForm {
    pub trace: f64,
    pub det: f64,
    pub discriminant: f64,
    pub z1: f64,
    pub z2: f64,
}

pub fn closed_form(hp: &HomogeneousParams) -> ClosedForm {
    let e = &hp.epi;
    let c = r0_components(hp);
    let (s1, s2) = (hp.s1(), hp.s2());
    let (k, kb) = (e.kappa, e.kappa_bar());
    let w = e.beta_c / e.eta + e.beta_i / (e.delta + hp.gamma1_i + hp.gamma2_i);
    let switching = e.eta_prime + hp.gamma1 + hp.gamma2;
    let pd2 = hp.p * hp.d2;
    let z1 = c.tilde_r0_2 - k * pd2 * e.eta * hp.gamma2 * w / (e.eta_prime * switching);
    let z2 = k * pd2 * e.eta * w / switching + kb * pd2 * e.beta_i / (e.delta + hp.gamma1_i + hp.gamma2_i);
    let trace = c.tilde_r0_1 + s2 * z1;
    let det = s1 * s2 * c.tilde_r0_1 * z2;
    ClosedForm { trace, det, discriminant: trace * trace - 4.0 * det, z1, z2 }
}

/// `rho(kappa L + (1 - kappa) U)` as `(Tr + sqrt(disc)) / 2` from the closed form.
pub fn rho_closed_form(hp: &HomogeneousParams) -> Result<f64, ThresholdError> {
    let cf = closed_form(hp);
    let scale = cf.trace.abs().max(1.0);
    if cf.discriminant < -1e-12 * scale * scale {
        return Err(ThresholdError::NegativeDiscriminant(cf.discriminant));
    }
    if cf.trace == 0.0 && cf.det == 0.0 {
        return Ok(0.0);
    }
    Ok((cf.trace + cf.discriminant.max(0.0).sqrt()) / 2.0)
}

/// Basic reproduction number: `rho(L)` when `kappa = 1`, else `rho(kappa L + (1 - kappa) U)`.
pub fn r0(hp: &HomogeneousParams) -> Result<f64, ThresholdError> {
    let ngm = build_ngm(hp)?;
    Ok(mat2_spectral_radius(&ngm.h(hp.epi.kappa)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityCase {
    /// DFE stable for every activation rate.
    #[serde(rename = "I")]
    AlwaysStable,
    /// DFE unstable for every activation rate.
    #[serde(rename = "II")]
    AlwaysUnstable,
    /// Stable below a critical activation rate.
    #[serde(rename = "III")]
    Conditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub r0: f64,
    pub r0_1: f64,
    pub r0_2: f64,
    /// True when `kappa < 1` and the component values are the tilde variants.
    pub extended: bool,
    pub case: StabilityCase,
    pub gamma1_star: Option<f64>,
    pub trace: f64,
    pub det: f64,
    pub discriminant: f64,
    /// Cubic `a g^3 + b g^2 + c g + d` whose positive root is the critical
    /// activation rate; only for `kappa = 1`.
    pub cubic: Option<[f64; 4]>,
}

/// Coefficients of the cubic in `gamma1` whose sign decides stability when
/// `kappa = 1`: the DFE is stable where the cubic is negative.
///
/// Obtained by clearing denominators in `1 - Tr(L) + det(L) = 0`.
pub fn stability_cubic(hp: &HomogeneousParams) -> Option<[f64; 4]> {
    if hp.epi.kappa != 1.0 {
        return None;
    }
    let e = &hp.epi;
    let c = r0_components(hp);
    let (r1, r2) = (c.r0_1, c.r0_2);
    let (ep, g2) = (e.eta_prime, hp.gamma2);
    let w = e.beta_c / e.eta + e.beta_i / (e.delta + hp.gamma1_i + hp.gamma2_i);
    let k = hp.p * hp.d2 * e.eta * w / ep;
    let a = r1 + r2 - 1.0;
    let b = ep * (r1 + r2 - 1.0) + g2 * (3.0 * r1 + 2.0 * r2 - 3.0) - k * g2;
    let cc = g2 * (ep * (2.0 * r1 + r2 - 2.0 - k * r1) + g2 * (3.0 * r1 + r2 - 3.0 - k));
    let d = g2 * g2 * (r1 - 1.0) * (ep + g2);
    Some([a, b, cc, d])
}

pub fn eval_cubic(coef: &[f64; 4], x: f64) -> f64 {
    ((coef[0] * x + coef[1]) * x + coef[2]) * x + coef[3]
}

pub fn classify_stability(hp: &HomogeneousParams) -> Result<ThresholdReport, ThresholdError> {
    hp.validate()?;
    let comps = r0_components(hp);
    let extended = hp.epi.kappa < 1.0;
    let (r0_1, r0_2) = if extended { (comps.tilde_r0_1, comps.tilde_r0_2) } else { (comps.r0_1, comps.r0_2) };
    let case = if r0_1 + r0_2 < 1.0 {
        StabilityCase::AlwaysStable
    } else if r0_1 >= 1.0 {
        StabilityCase::AlwaysUnstable
    } else {
        StabilityCase::Conditional
    };
    let gamma1_star = match case {
        StabilityCase::Conditional => critical_gamma1(hp)?,
        _ => None,
    };
    let cf = closed_form(hp);
    Ok(ThresholdReport {
        r0: r0(hp)?,
        r0_1,
        r0_2,
        extended,
        case,
        gamma1_star,
        trace: cf.trace,
        det: cf.det,
        discriminant: cf.discriminant,
        cubic: stability_cubic(hp),
    })
}

/// Activation rate at which `r0` crosses one, found by bisection.
/// `None` when no crossing exists below `1e12`.
pub fn critical_gamma1(hp: &HomogeneousParams) -> Result<Option<f64>, ThresholdError> {
    let f = |g: f64| r0(&hp.with_gamma1(g)).map(|r| r - 1.0);
    let lo0 = f(0.0)?;
    if lo0 >= 0.0 {
        return Ok(None);
    }
    let mut hi = hp.gamma2.max(1.0);
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::EpidemicParams;

    fn standard(d1: f64, d2: f64, gamma2_i: f64) -> HomogeneousParams {
        HomogeneousParams {
            d1,
            d2,
            p: 0.3,
            gamma1: 0.2,
            gamma2: 0.2,
            gamma1_i: 0.0,
            gamma2_i,
            epi: EpidemicParams::standard(),
        }
    }

    #[test]
    fn r0_1_table_value() {
        // 4 * (0.1 / 0.8 + 0.56 * 0.2 / (0.8 * 1.5)) = 4 * (0.125 + 0.093333..)
        let c = r0_components(&standard(4.0, 50.0, 0.2));
        assert!((c.r0_1 - 4.0 * (0.125 + 0.112 / 1.2)).abs() < 1e-14);
        assert!((c.r0_1 - 0.873_333_333_333_333_3).abs() < 1e-12);
    }

    #[test]
    fn no_temporal_layer_zeroes_r0_2() {
        let mut hp = standard(4.0, 50.0, 0.2);
        hp.p = 0.0;
        assert_eq!(r0_components(&hp).r0_2, 0.0);
        hp.p = 0.3;
        hp.d2 = 0.0;
        assert_eq!(r0_components(&hp).r0_2, 0.0);
    }

    #[test]
    fn tilde_reduces_at_kappa_one() {
        let c = r0_components(&standard(4.0, 50.0, 0.2));
        assert_eq!(c.tilde_r0_1, c.r0_1);
        assert_eq!(c.tilde_r0_2, c.r0_2);
    }

    #[test]
    fn inactive_population_has_zero_second_row() {
        let ngm = build_ngm(&standard(4.0, 50.0, 0.2).with_gamma1(0.0)).unwrap();
        assert_eq!(ngm.f1[1], [0.0, 0.0]);
        let hp = standard(4.0, 50.0, 0.2).with_gamma1(0.0);
        let c = r0_components(&hp);
        assert!((rho_closed_form(&hp).unwrap() - c.r0_1).abs() < 1e-14);
        assert!((r0(&hp).unwrap() - c.r0_1).abs() < 1e-14);
    }

    #[test]
    fn p_zero_gives_static_threshold() {
        let mut hp = standard(4.0, 50.0, 0.2);
        hp.p = 0.0;
        let c = r0_components(&hp);
        assert!((rho_closed_form(&hp).unwrap() - c.r0_1).abs() < 1e-14);
    }

    #[test]
    fn no_infected_route_reduces_l() {
        let mut hp = standard(4.0, 50.0, 0.2);
        hp.epi.beta_i = 0.0;
        let ngm = build_ngm(&hp).unwrap();
        let expect = mat2_mul(&mat2_scale(&ngm.f1, hp.epi.beta_c), &mat2_inv(&ngm.v1).unwrap());
        for i in 0..2 {
            for j in 0..2 {
                assert!((ngm.l[i][j] - expect[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_transfer_rejected() {
        let mut hp = standard(4.0, 50.0, 0.2);
        hp.epi.delta = 0.0;
        assert!(build_ngm(&hp).is_err());
    }

    #[test]
    fn fig7_regimes() {
        let hp = standard(3.0, 6.0, 1.0);
        let rep = classify_stability(&hp).unwrap();
        assert!((rep.r0_1 - 0.655).abs() < 1e-12);
        // 0.3 * 6 * (0.125 + 0.56 * 1.5 * 0.2 / (0.8 * 1.5 * 2.5))
        assert!((rep.r0_2 - 0.3258).abs() < 1e-12);
        assert_eq!(rep.case, StabilityCase::AlwaysStable);
        assert!(rep.gamma1_star.is_none());

        let rep = classify_stability(&standard(3.0, 12.0, 1.0)).unwrap();
        assert!((rep.r0_1 + rep.r0_2 - 1.3066).abs() < 1e-12);
        assert_eq!(rep.case, StabilityCase::Conditional);
        let g = rep.gamma1_star.unwrap();
        assert!(g > 0.0 && g.is_finite());

        let rep = classify_stability(&standard(6.0, 12.0, 1.0)).unwrap();
        assert_eq!(rep.case, StabilityCase::AlwaysUnstable);
    }

    #[test]
    fn critical_rate_brackets_and_solves_cubic() {
        let hp = standard(3.0, 12.0, 1.0);
        let g = critical_gamma1(&hp).unwrap().unwrap();
        assert!(r0(&hp.with_gamma1(g - 1e-4)).unwrap() < 1.0);
        assert!(r0(&hp.with_gamma1(g + 1e-4)).unwrap() > 1.0);
        let cubic = stability_cubic(&hp).unwrap();
        let scale: f64 = cubic.iter().enumerate().map(|(k, c)| (c * g.powi(3 - k as i32)).abs()).sum();
        assert!(eval_cubic(&cubic, g).abs() / scale < 1e-8);
        // stable side is negative
        assert!(eval_cubic(&cubic, 0.5 * g) < 0.0);
        assert!(eval_cubic(&cubic, 2.0 * g) > 0.0);
    }

    #[test]
    fn extended_case_labels_use_tilde_values() {
        let hp = standard(3.0, 12.0, 1.0).with_kappa(0.6);
        let rep = classify_stability(&hp).unwrap();
        assert!(rep.extended);
        let c = r0_components(&hp);
        assert_eq!(rep.r0_1, c.tilde_r0_1);
        assert!(rep.cubic.is_none());
    }
}
