//! Dormand-Prince 5(4) integrator with continuous (dense) output and
//! zero-crossing event location.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// Hairer's continuous extension coefficients.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for DormandPrince {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 1_000_000 }
    }
}

/// One accepted step with its interpolation polynomial.
#[derive(Debug, Clone)]
struct DenseStep<const N: usize> {
    t0: f64,
    h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut y = [0.0; N];
        for i in 0..N {
            let r = &self.r;
            y[i] = r[0][i] + s * (r[1][i] + s1 * (r[2][i] + s * (r[3][i] + s1 * r[4][i])));
        }
        y
    }
}

/// Dense solution over `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    steps: Vec<DenseStep<N>>,
    pub t_start: f64,
    pub t_end: f64,
    pub y_end: [f64; N],
}

impl<const N: usize> OdeSolution<N> {
    /// Interpolated state at `t`, clamped to the integrated range.
    pub fn at(&self, t: f64) -> [f64; N] {
        if t >= self.t_end {
            return self.y_end;
        }
        let idx = self.steps.partition_point(|s| s.t0 <= t).saturating_sub(1);
        self.steps[idx].eval(t.max(self.t_start))
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

impl DormandPrince {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    /// Integrate `dy/dt = f(t, y)` from `t0` to `t_end`.
    pub fn integrate<const N: usize, F>(&self, f: F, t0: f64, y0: [f64; N], t_end: f64) -> Result<OdeSolution<N>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        self.run(f, t0, y0, t_end, None::<fn(f64, &[f64; N]) -> f64>).map(|(sol, _)| sol)
    }

    /// Integrate until `event(t, y)` changes sign (or `t_max` is reached).
    /// Returns the solution truncated at the event time, which is located to
    /// near machine precision on the dense output.
    pub fn integrate_until<const N: usize, F, G>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; N],
        t_max: f64,
        event: G,
    ) -> Result<(OdeSolution<N>, Option<f64>)>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        G: Fn(f64, &[f64; N]) -> f64,
    {
        self.run(f, t0, y0, t_max, Some(event))
    }

    fn run<const N: usize, F, G>(
        &self,
        f: F,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        event: Option<G>,
    ) -> Result<(OdeSolution<N>, Option<f64>)>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
        G: Fn(f64, &[f64; N]) -> f64,
    {
        if !(t_end > t0) {
            return Err(Error::Integration(format!("empty interval [{t0}, {t_end}]")));
        }
        let span = t_end - t0;
        let mut t = t0;
        let mut y = y0;
        let mut k1 = f(t, &y);
        let mut h = (span * 1e-3).min(span);
        let mut steps = Vec::new();
        let mut g_prev = event.as_ref().map(|g| g(t, &y));

        for _ in 0..self.max_steps {
            if t + h > t_end {
                h = t_end - t;
            }
            let k2 = f(t + C2 * h, &axpy(&y, &[(h * A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(&y, &[(h * A31, &k1), (h * A32, &k2)]));
            let k4 = f(t + C4 * h, &axpy(&y, &[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]));
            let k5 = f(
                t + C5 * h,
                &axpy(&y, &[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &axpy(&y, &[(h * A61, &k1), (h * A62, &k2), (h * A63, &k3), (h * A64, &k4), (h * A65, &k5)]),
            );
            let y_new = axpy(&y, &[(h * A71, &k1), (h * A73, &k3), (h * A74, &k4), (h * A75, &k5), (h * A76, &k6)]);
            let k7 = f(t + h, &y_new);

            let mut err_sq = 0.0;
            for i in 0..N {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err_sq += (e / scale).powi(2);
            }
            let err = (err_sq / N as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration(format!("non-finite error estimate at t = {t}")));
            }

            if err <= 1.0 {
                let mut r = [[0.0; N]; 5];
                for i in 0..N {
                    let dy = y_new[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    r[0][i] = y[i];
                    r[1][i] = dy;
                    r[2][i] = bspl;
                    r[3][i] = dy - h * k7[i] - bspl;
                    r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                let step = DenseStep { t0: t, h, r };
                let t_new = t + h;

                if let (Some(g), Some(gp)) = (event.as_ref(), g_prev) {
                    let g_new = g(t_new, &y_new);
                    if gp == 0.0 || gp.signum() != g_new.signum() {
                        let t_event = locate_root(|s| g(s, &step.eval(s)), t, t_new, gp, g_new);
                        let y_event = step.eval(t_event);
                        steps.push(step);
                        let sol = OdeSolution { steps, t_start: t0, t_end: t_event, y_end: y_event };
                        return Ok((sol, Some(t_event)));
                    }
                    g_prev = Some(g_new);
                }

                steps.push(step);
                t = t_new;
                y = y_new;
                k1 = k7;
                if t >= t_end {
                    let sol = OdeSolution { steps, t_start: t0, t_end: t, y_end: y };
                    return Ok((sol, None));
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if h < span * 1e-15 {
                return Err(Error::Integration(format!("step size underflow at t = {t}")));
            }
        }
        Err(Error::Integration(format!("exceeded {} steps", self.max_steps)))
    }
}

/// Bracketed root by the Illinois variant of regula falsi.
fn locate_root<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, mut ga: f64, mut gb: f64) -> f64 {
    if ga == 0.0 {
        return a;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c > a && c < b { c } else { 0.5 * (a + b) };
        let gc = g(c);
        if gc == 0.0 || (b - a).abs() <= 4.0 * f64::EPSILON * b.abs().max(a.abs()) {
            return c;
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    0.5 * (a + b)
}
