//! Dormand–Prince 5(4) integration for small fixed-size systems.

/// Right-hand side `dy/ds = f(s, y)`.
pub trait System<const D: usize> {
    fn rhs(&self, s: f64, y: &[f64; D]) -> [f64; D];
}

impl<const D: usize, F: Fn(f64, &[f64; D]) -> [f64; D]> System<D> for F {
    fn rhs(&self, s: f64, y: &[f64; D]) -> [f64; D] {
        self(s, y)
    }
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand–Prince step. Returns the 5th-order solution and the
/// embedded error estimate (componentwise).
pub fn dopri_step<const D: usize, S: System<D>>(sys: &S, s: f64, y: &[f64; D], h: f64) -> ([f64; D], [f64; D]) {
    let mut k = [[0.0; D]; 7];
    k[0] = sys.rhs(s, y);
    for stage in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(stage) {
            let a = A[stage][j];
            if a != 0.0 {
                for i in 0..D {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[stage] = sys.rhs(s + C[stage] * h, &ys);
    }
    // The 7th stage is evaluated at the 5th-order solution (FSAL).
    let mut y_new = *y;
    for (j, kj) in k.iter().enumerate().take(6) {
        for i in 0..D {
            y_new[i] += h * A[6][j] * kj[i];
        }
    }
    let mut err = [0.0; D];
    for (j, kj) in k.iter().enumerate() {
        for i in 0..D {
            err[i] += h * E[j] * kj[i];
        }
    }
    (y_new, err)
}

/// Step-size control parameters.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-300,
            max_step: 0.05,
        }
    }
}

fn error_norm<const D: usize>(y0: &[f64; D], y1: &[f64; D], err: &[f64; D], ctl: &StepControl) -> f64 {
    let mut acc: f64 = 0.0;
    for i in 0..D {
        let scale = ctl.atol + ctl.rtol * y0[i].abs().max(y1[i].abs());
        acc = acc.max((err[i] / scale).abs());
    }
    acc
}

fn next_step(h: f64, norm: f64) -> f64 {
    let factor = if norm == 0.0 {
        5.0
    } else {
        (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
    };
    h * factor
}

/// Integrates from `s0` to exactly `s1` (either direction) with adaptive substeps.
/// `h_hint` is the initial trial step magnitude; the accepted step size of the
/// last substep is written back so consecutive calls reuse it.
pub fn integrate_to<const D: usize, S: System<D>>(
    sys: &S,
    s0: f64,
    y0: [f64; D],
    s1: f64,
    h_hint: &mut f64,
    ctl: &StepControl,
) -> [f64; D] {
    let dir = if s1 >= s0 { 1.0 } else { -1.0 };
    let mut s = s0;
    let mut y = y0;
    let mut h = h_hint.abs().min(ctl.max_step).max(1e-12);
    while (s1 - s) * dir > 0.0 {
        let remaining = (s1 - s).abs();
        let last = h >= remaining;
        let step = if last { remaining } else { h };
        let (y_new, err) = dopri_step(sys, s, &y, dir * step);
        let norm = error_norm(&y, &y_new, &err, ctl);
        if norm <= 1.0 || step < 1e-12 {
            s = if last { s1 } else { s + dir * step };
            y = y_new;
            if !last {
                h = next_step(step, norm).min(ctl.max_step);
            }
        } else {
            h = next_step(step, norm);
        }
    }
    *h_hint = h;
    y
}

/// Outcome of [`integrate_until`].
#[derive(Debug, Clone, Copy)]
pub struct Stopped<const D: usize> {
    pub s: f64,
    pub y: [f64; D],
    /// True when `stop` fired, false when `s_end` was reached.
    pub triggered: bool,
}

/// Adaptive integration from `s0` towards `s_end`, checking `stop` after each
/// accepted step and returning at the first step where it holds.
pub fn integrate_until<const D: usize, S: System<D>, P: FnMut(f64, &[f64; D]) -> bool>(
    sys: &S,
    s0: f64,
    y0: [f64; D],
    s_end: f64,
    ctl: &StepControl,
    mut stop: P,
) -> Stopped<D> {
    let mut s = s0;
    let mut y = y0;
    let mut h = ctl.max_step.min(1e-3);
    while s < s_end {
        let step = h.min(s_end - s);
        let (y_new, err) = dopri_step(sys, s, &y, step);
        let norm = error_norm(&y, &y_new, &err, ctl);
        if norm <= 1.0 || step < 1e-12 {
            s += step;
            y = y_new;
            if stop(s, &y) {
                return Stopped { s, y, triggered: true };
            }
            h = next_step(step, norm).min(ctl.max_step);
        } else {
            h = next_step(step, norm);
        }
    }
    Stopped { s, y, triggered: false }
}
