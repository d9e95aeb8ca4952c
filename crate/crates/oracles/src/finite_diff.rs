use crate::OracleError;

/// Central difference at `at`, refined by Richardson extrapolation over `h` and `h/2`.
///
/// The two central estimates must agree to 1e-3 relative (or 1e-9 absolute
/// when the derivative is essentially zero).
pub fn finite_difference<F: Fn(f64) -> f64>(f: F, at: f64, h: f64) -> Result<f64, OracleError> {
    if !(h > 0.0) {
        return Err(OracleError::Invalid(format!("step h={h}")));
    }
    let eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(OracleError::NonFinite(x))
        }
    };
    let central = |step: f64| -> Result<f64, OracleError> {
        Ok((eval(at + step)? - eval(at - step)?) / (2.0 * step))
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    let scale = coarse.abs().max(fine.abs());
    if (coarse - fine).abs() > 1e-3 * scale && (coarse - fine).abs() > 1e-9 {
        return Err(OracleError::Richardson { coarse, fine });
    }
    Ok((4.0 * fine - coarse) / 3.0)
}
