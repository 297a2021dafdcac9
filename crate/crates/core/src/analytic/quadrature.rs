//! Globally adaptive Gauss–Kronrod (7/15-point) quadrature.

use crate::prelude::*;
use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tolerance: f64,
    /// Hard cap on the number of panels.
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tolerance: 1e-12,
            max_panels: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// One G7K15 panel: Kronrod value and `|K15 − G7|`.
pub fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫_a^b f`, bisecting the panel with the largest error estimate until the
/// summed estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Integral> {
    let (v, e) = gauss_kronrod_15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    loop {
        let (value, error) = panels
            .iter()
            .fold((0.0, 0.0), |(s, t), p| (s + p.2, t + p.3));
        if !value.is_finite() {
            return Err(Error::Quadrature("integrand is not finite".into()));
        }
        if error <= cfg.abs_tolerance {
            return Ok(Integral {
                value,
                error,
                panels: panels.len(),
            });
        }
        if panels.len() >= cfg.max_panels {
            return Err(Error::Quadrature(format!(
                "error estimate {error:e} above {:e} after {} panels",
                cfg.abs_tolerance,
                panels.len()
            )));
        }
        let worst = (0..panels.len())
            .max_by(|&i, &j| panels[i].3.total_cmp(&panels[j].3))
            .expect("at least one panel");
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gauss_kronrod_15(&f, pa, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact_on_one_panel() {
        let (v, _) = gauss_kronrod_15(&|x: f64| x.powi(20), -1.0, 1.0);
        assert!((v - 2.0 / 21.0).abs() < 1e-15);
    }

    #[test]
    fn oscillatory_and_peaked_integrands() {
        let cfg = QuadratureConfig::default();
        let r = integrate(|x: f64| (50.0 * x).cos(), 0.0, core::f64::consts::PI, &cfg).unwrap();
        assert!(r.value.abs() < 1e-12);
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, &cfg).unwrap();
        let exact = 2.0 * 100.0 * (100.0f64).atan();
        assert!((r.value - exact).abs() < 1e-9);
    }

    #[test]
    fn panel_cap_is_reported() {
        let cfg = QuadratureConfig {
            abs_tolerance: 1e-14,
            max_panels: 3,
        };
        assert!(matches!(
            integrate(|x: f64| x.abs().sqrt(), -1.0, 1.0, &cfg),
            Err(Error::Quadrature(_))
        ));
    }
}
