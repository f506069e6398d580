use std::f64::consts::PI;

use num_complex::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// A complex Gaussian `coeff · exp(-width (x - center)² + i·wavenumber·(x - center))`.
///
/// The centre is chosen so that the linear term is purely imaginary; `|term|` then peaks at
/// `center` with value `|coeff|`, which keeps evaluation free of overflow even for branches whose
/// general-form coefficients would be astronomically large.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTerm {
    pub coeff: Complex64,
    /// Complex quadratic coefficient; `re > 0` is required.
    pub width: Complex64,
    pub center: f64,
    pub wavenumber: f64,
}

impl GaussianTerm {
    /// Builds a term from `coeff · exp(-width·(x-x0)² + lin·(x-x0))` with arbitrary complex `lin`,
    /// re-centring on the envelope maximum.
    pub fn from_general(coeff: Complex64, width: Complex64, x0: f64, lin: Complex64) -> Self {
        Self::from_general_scaled(coeff, Complex64::new(0.0, 0.0), width, x0, lin)
    }

    /// As [`from_general`](Self::from_general) with an extra factor `exp(log_scale)`, folded into
    /// the exponent so that huge and tiny factors never meet as separate floats.
    fn from_general_scaled(coeff: Complex64, log_scale: Complex64, width: Complex64, x0: f64, lin: Complex64) -> Self {
        let shift = lin.re / (2.0 * width.re);
        let center = x0 + shift;
        // exponent at the new centre, and its slope there
        let exponent = log_scale - width * shift * shift + lin * shift;
        let slope = lin - 2.0 * width * shift;
        GaussianTerm {
            coeff: coeff * exponent.exp(),
            width,
            center,
            wavenumber: slope.im,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> Complex64 {
        let u = x - self.center;
        self.coeff * (-self.width * u * u + I * (self.wavenumber * u)).exp()
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> Complex64 {
        let u = x - self.center;
        (-2.0 * self.width * u + I * self.wavenumber) * self.eval(x)
    }

    pub fn conj(&self) -> Self {
        GaussianTerm {
            coeff: self.coeff.conj(),
            width: self.width.conj(),
            center: self.center,
            wavenumber: -self.wavenumber,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        GaussianTerm {
            coeff: self.coeff * factor,
            ..*self
        }
    }

    /// Pointwise product, again a single Gaussian.
    pub fn mul(&self, other: &GaussianTerm) -> GaussianTerm {
        let width = self.width + other.width;
        // expand about our own centre: other(x) exponent in powers of u = x - self.center
        let d = self.center - other.center;
        let lin = I * self.wavenumber - 2.0 * other.width * d + I * other.wavenumber;
        let constant = -other.width * d * d + I * (other.wavenumber * d);
        GaussianTerm::from_general_scaled(
            self.coeff * other.coeff,
            constant,
            width,
            self.center,
            lin,
        )
    }

    /// `∫ term dx` over the real line.
    pub fn integral(&self) -> Complex64 {
        let k = self.wavenumber;
        self.coeff * (Complex64::from(PI) / self.width).sqrt() * (-(k * k) / (4.0 * self.width)).exp()
    }

    /// Unitary Fourier transform `(2πħ)^{-1/2} ∫ e^{-ipx/ħ} term(x) dx`, returned as a Gaussian in `p`.
    pub fn fourier(&self, hbar: f64) -> GaussianTerm {
        let p_center = hbar * self.wavenumber;
        let width = 1.0 / (4.0 * self.width * hbar * hbar);
        let coeff = self.coeff * (Complex64::from(PI) / self.width).sqrt() / (2.0 * PI * hbar).sqrt()
            * (-I * (p_center * self.center / hbar)).exp();
        GaussianTerm {
            coeff,
            width,
            center: p_center,
            wavenumber: -self.center / hbar,
        }
    }

    /// Standard deviation of the envelope `|term|` (not of `|term|²`).
    pub fn envelope_std(&self) -> f64 {
        1.0 / (2.0 * self.width.re).sqrt()
    }

    /// Interval outside which `|term|` is below 1e-16 of its peak.
    pub fn support(&self) -> (f64, f64) {
        let r = crate::corenum::GAUSSIAN_TAIL_SIGMAS * self.envelope_std();
        (self.center - r, self.center + r)
    }
}

/// Evaluates a superposition of terms.
pub fn sum_eval(terms: &[GaussianTerm], x: f64) -> Complex64 {
    terms.iter().map(|t| t.eval(x)).sum()
}

pub fn sum_derivative(terms: &[GaussianTerm], x: f64) -> Complex64 {
    terms.iter().map(|t| t.derivative(x)).sum()
}

/// `∫ |Σ terms|² dx` in closed form.
pub fn sum_norm_sqr(terms: &[GaussianTerm]) -> f64 {
    let mut total = Complex64::new(0.0, 0.0);
    for a in terms {
        let ac = a.conj();
        for b in terms {
            total += ac.mul(b).integral();
        }
    }
    total.re
}

/// Union of the supports of all terms.
pub fn sum_support(terms: &[GaussianTerm]) -> (f64, f64) {
    terms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
        let (a, b) = t.support();
        (lo.min(a), hi.max(b))
    })
}
