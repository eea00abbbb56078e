//! Quadrature building blocks: Gauss-Legendre rules of arbitrary order and an
//! adaptive Gauss-Kronrod (G7/K15) integrator for real and complex integrands.

use num_complex::Complex64;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre polynomial; nodes are accurate to machine
/// precision for the orders used here (n <= a few thousand).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

// Kronrod 15-point nodes (positive half) and weights, with the embedded
// Gauss-7 weights. Standard QUADPACK values.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = Complex64::new(0.0, 0.0);
    let mut gauss = Complex64::new(0.0, 0.0);
    for (j, &x) in XGK.iter().enumerate() {
        if x == 0.0 {
            let fc = f(c);
            kron += WGK[j] * fc;
            gauss += WG[3] * fc;
        } else {
            let f1 = f(c - h * x);
            let f2 = f(c + h * x);
            kron += WGK[j] * (f1 + f2);
            if j % 2 == 1 {
                gauss += WG[j / 2] * (f1 + f2);
            }
        }
    }
    kron *= h;
    gauss *= h;
    (kron, (kron - gauss).norm())
}

/// Adaptive Gauss-Kronrod integration of a complex-valued integrand over a
/// finite interval. Splits the worst subinterval until the summed error
/// estimate is below `rel_tol * |value|` (or an absolute floor).
pub fn integrate_complex<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Complex64 {
    #[derive(Debug)]
    struct Seg {
        a: f64,
        b: f64,
        val: Complex64,
        err: f64,
    }
    let (val, err) = gk15(&f, a, b);
    let mut segs = vec![Seg { a, b, val, err }];
    for _ in 0..2000 {
        let total: Complex64 = segs.iter().map(|s| s.val).sum();
        let toterr: f64 = segs.iter().map(|s| s.err).sum();
        if toterr <= rel_tol * total.norm().max(1e-300) + 1e-300 {
            break;
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .unwrap();
        let s = segs.swap_remove(idx);
        let mid = 0.5 * (s.a + s.b);
        if mid <= s.a || mid >= s.b {
            segs.push(s); // interval exhausted at f64 resolution
            break;
        }
        let (v1, e1) = gk15(&f, s.a, mid);
        let (v2, e2) = gk15(&f, mid, s.b);
        segs.push(Seg {
            a: s.a,
            b: mid,
            val: v1,
            err: e1,
        });
        segs.push(Seg {
            a: mid,
            b: s.b,
            val: v2,
            err: e2,
        });
    }
    segs.iter().map(|s| s.val).sum()
}

/// Adaptive integration of a real integrand over a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    integrate_complex(|x| Complex64::new(f(x), 0.0), a, b, rel_tol).re
}

/// Integrate a real integrand over [a, inf) by mapping the tail onto (0, 1].
/// `scale` sets where the finite head ends; the tail uses x = a + scale*t/(1-t).
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, scale: f64, rel_tol: f64) -> f64 {
    let head = integrate(&f, a, a + scale, rel_tol);
    // x = a + scale/t maps t in (0,1] onto [a+scale, inf)
    let tail = integrate(
        |t| {
            let x = a + scale / t;
            f(x) * scale / (t * t)
        },
        1e-12,
        1.0,
        rel_tol,
    );
    head + tail
}
