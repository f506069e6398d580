use num_complex::Complex64;

use super::Grid1D;
use crate::error::{Error, Result};

/// Composite trapezoid rule on a uniform grid.
pub fn integrate_1d(samples: &[f64], grid: &Grid1D) -> Result<f64> {
    if samples.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: samples.len(),
        });
    }
    if let Some((i, v)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite {
            value: *v,
            context: format!("sample {i}"),
        });
    }
    let n = samples.len();
    let interior: f64 = samples[1..n - 1].iter().sum();
    Ok(grid.spacing() * (interior + 0.5 * (samples[0] + samples[n - 1])))
}

/// Exact integral over `[from, to]` of the piecewise-linear interpolant of `samples`.
///
/// Limits are clamped to the grid; an empty or reversed range yields zero.
pub fn integrate_linear_between(samples: &[f64], grid: &Grid1D, from: f64, to: f64) -> Result<f64> {
    if samples.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            got: samples.len(),
        });
    }
    let from = from.max(grid.lo());
    let to = to.min(grid.hi());
    if !(to > from) {
        return Ok(0.0);
    }
    let h = grid.spacing();
    let interp = |i: usize, x: f64| {
        let x0 = grid.point(i);
        let s = ((x - x0) / h).clamp(0.0, 1.0);
        samples[i] + s * (samples[i + 1] - samples[i])
    };
    let cell = |x: f64| (((x - grid.lo()) / h).floor() as usize).min(grid.len() - 2);
    let (i0, i1) = (cell(from), cell(to));
    let mut total = 0.0;
    for i in i0..=i1 {
        let a = from.max(grid.point(i));
        let b = to.min(grid.point(i + 1));
        if b > a {
            total += 0.5 * (b - a) * (interp(i, a) + interp(i, b));
        }
    }
    Ok(total)
}

/// `(f(x+h) - f(x-h)) / 2h`.
pub fn central_derivative<F>(f: F, x: f64, h: f64) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {h}")));
    }
    let (fp, fm) = (f(x + h), f(x - h));
    for (v, at) in [(fp, x + h), (fm, x - h)] {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite {
                value: if v.re.is_finite() { v.im } else { v.re },
                context: format!("derivative evaluation at {at}"),
            });
        }
    }
    Ok((fp - fm) / (2.0 * h))
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    /// Absolute floor on the accepted error, on top of the round-off floor.
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            rel_tol: 1e-9,
            abs_tol: 0.0,
            max_subdivisions: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: Complex64,
    pub error: f64,
    pub subdivisions: usize,
}

/// Adaptive 21-point Gauss–Kronrod integration of a complex integrand.
pub fn adaptive_integrate<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<Complex64>
where
    F: Fn(f64) -> Complex64,
{
    let opts = AdaptiveOptions {
        rel_tol,
        ..AdaptiveOptions::default()
    };
    adaptive_integrate_with(f, lo, hi, &opts).map(|r| r.value)
}

/// Real-valued convenience wrapper around [`adaptive_integrate`].
pub fn adaptive_integrate_real<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    adaptive_integrate(|x| Complex64::new(f(x), 0.0), lo, hi, rel_tol).map(|z| z.re)
}

struct Segment {
    lo: f64,
    hi: f64,
    value: Complex64,
    error: f64,
    abs_value: f64,
}

pub fn adaptive_integrate_with<F>(
    f: F,
    lo: f64,
    hi: f64,
    opts: &AdaptiveOptions,
) -> Result<QuadratureResult>
where
    F: Fn(f64) -> Complex64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(Error::invalid(format!("integration bounds must satisfy lo < hi, got [{lo}, {hi}]")));
    }
    if !(opts.rel_tol > 0.0 && opts.rel_tol <= 1e-2) {
        return Err(Error::invalid(format!(
            "rel_tol must lie in (0, 1e-2], got {}",
            opts.rel_tol
        )));
    }

    let first = gk21(&f, lo, hi)?;
    let mut segments = vec![first];
    let mut subdivisions = 0;
    loop {
        let value: Complex64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        let abs_value: f64 = segments.iter().map(|s| s.abs_value).sum();
        let tol = (opts.rel_tol * value.norm())
            .max(opts.abs_tol)
            .max(1e3 * f64::EPSILON * abs_value);
        if error <= tol {
            return Ok(QuadratureResult {
                value,
                error,
                subdivisions,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = &segments[worst];
        let mid = 0.5 * (seg.lo + seg.hi);
        let too_small = (seg.hi - seg.lo) <= 1e-12 * (hi - lo) || mid <= seg.lo || mid >= seg.hi;
        if subdivisions >= opts.max_subdivisions || too_small {
            return Err(Error::NoConvergence {
                lo,
                hi,
                subdivisions,
                error,
                requested: tol,
            });
        }
        let (a, b) = (seg.lo, seg.hi);
        let left = gk21(&f, a, mid)?;
        let right = gk21(&f, mid, b)?;
        segments[worst] = left;
        segments.push(right);
        subdivisions += 1;
    }
}

// Kronrod abscissae on [0, 1]; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

fn checked<F: Fn(f64) -> Complex64>(f: &F, x: f64) -> Result<Complex64> {
    let v = f(x);
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            value: if v.re.is_finite() { v.im } else { v.re },
            context: format!("integrand at {x}"),
        })
    }
}

fn gk21<F: Fn(f64) -> Complex64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = checked(f, center)?;
    let mut kronrod = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    let mut abs_sum = fc.norm() * WGK[10];
    let mut values = [(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)); 10];
    for (j, slot) in values.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let f1 = checked(f, center - dx)?;
        let f2 = checked(f, center + dx)?;
        kronrod += (f1 + f2) * WGK[j];
        abs_sum += (f1.norm() + f2.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += (f1 + f2) * WG[j / 2];
        }
        *slot = (f1, f2);
    }
    let mean = kronrod * 0.5;
    let mut asc = (fc - mean).norm() * WGK[10];
    for (j, (f1, f2)) in values.iter().enumerate() {
        asc += ((f1 - mean).norm() + (f2 - mean).norm()) * WGK[j];
    }
    let asc = asc * half;
    let mut error = ((kronrod - gauss) * half).norm();
    if asc > 0.0 && error > 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    Ok(Segment {
        lo,
        hi,
        value: kronrod * half,
        error,
        abs_value: abs_sum * half,
    })
}
