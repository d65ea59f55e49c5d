use super::ControlError;

/// `(sqrt(5) - 1) / 2`, the bracket contraction factor per iteration.
pub const GOLDEN_RATIO_CONJUGATE: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq)]
pub struct GssOutcome {
    pub x: f64,
    pub f: f64,
    pub evaluations: usize,
    /// `(lo, hi)` before the first contraction and after each one.
    pub brackets: Vec<(f64, f64)>,
}

/// Golden-section search on `[lo, hi]` until the bracket is narrower than
/// `tolerance`; returns the bracket midpoint. Uses `n + 3` evaluations for
/// `n` contractions.
pub fn gss_minimize<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tolerance: f64) -> Result<GssOutcome, ControlError> {
    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let invalid = !(lo < hi) || !(tolerance > 0.0);
    if invalid {
        return Err(ControlError::InvalidConfig("golden-section search needs lo < hi and tolerance > 0".into()));
    }
    let rho = GOLDEN_RATIO_CONJUGATE;
    let mut evaluations = 0;
    let mut eval = |x: f64| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ControlError::NonFinite(format!("objective at {x}")))
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut c = b - rho * (b - a);
    let mut d = a + rho * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut brackets = vec![(a, b)];
    while b - a >= tolerance {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - rho * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + rho * (b - a);
            fd = eval(d)?;
        }
        brackets.push((a, b));
    }
    let x = 0.5 * (a + b);
    let fx = eval(x)?;
    Ok(GssOutcome {
        x,
        f: fx,
        evaluations,
        brackets,
    })
}
