//! Adaptive Gauss-Kronrod quadrature (G7/K15) on finite intervals.

/// 15-point Kronrod nodes on [-1, 1] (symmetric; non-negative half listed).
const XK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

/// Kronrod weights matching `XK`.
const WK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// Gauss weights for the embedded 7-point rule (nodes XK[1], XK[3], ...).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let center = 0.5 * (a + b);
    let mut kron = 0.0;
    let mut gauss = 0.0;
    for i in 0..8 {
        let x = half * XK[i];
        let (flo, fhi) = (f(center - x), f(center + x));
        let pair = if i == 7 { flo } else { flo + fhi };
        kron += WK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Adaptive bisection around GK15. Splits the worst panel until the summed
/// error estimate satisfies the absolute or relative tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        err: f64,
    }
    let (value, err) = gk15(&f, a, b);
    let mut panels = vec![Panel { a, b, value, err }];
    // Panel budget keeps pathological integrands from spinning forever.
    for _ in 0..2000 {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            panels.push(p);
            break;
        }
        for (lo, hi) in [(p.a, mid), (mid, p.b)] {
            let (value, err) = gk15(&f, lo, hi);
            panels.push(Panel {
                a: lo,
                b: hi,
                value,
                err,
            });
        }
    }
    panels.iter().map(|p| p.value).sum()
}
