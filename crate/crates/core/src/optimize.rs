//! Golden-section search for a maximum on a bracket.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Best point found by [`golden_section_max`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes `f` on `[lo, hi]` until the bracket is narrower than `tol`.
///
/// The endpoints are evaluated as well, so a maximum sitting on the
/// boundary of the bracket is returned exactly. For a unimodal `f` this
/// converges to the maximizer; otherwise it returns the best point visited.
/// Non-finite values compare as `-∞` except `+∞`, which wins outright.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Maximum {
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut best = Maximum {
        x: lo,
        value: key(f(lo)),
        evaluations: 1,
    };
    let consider = |x: f64, v: f64, best: &mut Maximum| {
        best.evaluations += 1;
        // strictly greater keeps the smallest x on ties when scanning left to right
        if v > best.value || (v == best.value && x < best.x) {
            best.x = x;
            best.value = v;
        }
    };
    if hi <= lo {
        return best;
    }
    let v_hi = key(f(hi));
    consider(hi, v_hi, &mut best);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = key(f(x1));
    let mut f2 = key(f(x2));
    consider(x1, f1, &mut best);
    consider(x2, f2, &mut best);
    for _ in 0..max_iter {
        if b - a <= tol {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = key(f(x1));
            consider(x1, f1, &mut best);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = key(f(x2));
            consider(x2, f2, &mut best);
        }
    }
    best
}
