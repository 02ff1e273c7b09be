//! Dormand–Prince 5(4) with PI step control on flat real state vectors.
//!
//! Only the `control` components enter the error norm, the blow-up test and
//! the step-size heuristics, so two runs whose control components see the
//! same arithmetic take identical steps.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
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

#[derive(Clone, Copy, Debug)]
pub(crate) struct RkConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub blowup: f64,
    pub boundary_tol: f64,
    pub max_step: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Stop {
    Finished,
    Boundary,
    BlowUp,
    Underflow,
}

#[derive(Debug)]
pub(crate) enum RkError<E> {
    Rhs(E),
    MaxSteps(f64),
}

/// Accepted steps, including the initial point.
#[derive(Clone, Debug)]
pub(crate) struct RkRun {
    pub ts: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub fs: Vec<Vec<f64>>,
    pub stop: Stop,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
///
/// `boundary(y)` is the signed distance to the edge of the admissible region;
/// steps landing outside are halved, and the run stops once an accepted
/// state is within `boundary_tol` of the edge.
pub(crate) fn integrate<F, B, Er>(
    mut f: F,
    boundary: B,
    t0: f64,
    t1: f64,
    y0: Vec<f64>,
    control: &[usize],
    cfg: &RkConfig,
) -> Result<RkRun, RkError<Er>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, Er>,
    B: Fn(&[f64]) -> f64,
{
    let f0 = f(t0, &y0).map_err(RkError::Rhs)?;
    let mut run = RkRun {
        ts: vec![t0],
        ys: vec![y0],
        fs: vec![f0],
        stop: Stop::Finished,
    };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(run);
    }
    let dir = (t1 - t0).signum();
    let h_min = 1e-14 * span;

    let norm = |v: &[f64]| control.iter().fold(0.0, |m: f64, &i| m.max(v[i].abs()));
    let (d0, d1) = (norm(&run.ys[0]), norm(&run.fs[0]));
    let mut h = if d1 <= 1e-12 { span } else { (0.01 * d0.max(1.0) / d1).min(span) };
    let mut err_old: f64 = 1e-4;
    let mut rejected = false;
    let mut t = t0;
    let mut y = run.ys[0].clone();
    let mut fy = run.fs[0].clone();
    let dim = y.len();
    let mut steps = 0usize;

    loop {
        let remaining = (t1 - t).abs();
        if remaining == 0.0 {
            return Ok(run);
        }
        if steps >= cfg.max_steps {
            return Err(RkError::MaxSteps(t));
        }
        if let Some(m) = cfg.max_step {
            h = h.min(m);
        }
        let last = h >= remaining || remaining - h <= 1e-12 * span;
        if last {
            h = remaining;
        }
        if h < h_min {
            run.stop = Stop::Underflow;
            return Ok(run);
        }
        steps += 1;

        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(fy.clone());
        let mut stage_failed = false;
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..dim {
                        ys[i] += dir * h * a * kj[i];
                    }
                }
            }
            let ts = if s >= 5 && last { t1 } else { t + dir * C[s] * h };
            match f(ts, &ys) {
                Ok(v) => k.push(v),
                Err(_) => {
                    stage_failed = true;
                    break;
                }
            }
        }
        if stage_failed {
            h *= 0.5;
            rejected = true;
            continue;
        }
        // 5th order solution is the last stage point
        let mut y_new = y.clone();
        for (j, kj) in k.iter().take(6).enumerate() {
            let b = A[6][j];
            if b != 0.0 {
                for i in 0..dim {
                    y_new[i] += dir * h * b * kj[i];
                }
            }
        }
        let mut err: f64 = 0.0;
        for &i in control {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
            let r = dir * h * e / sc;
            err += r * r;
        }
        let err = if control.is_empty() { 0.0 } else { (err / control.len() as f64).sqrt() };

        if err.is_nan() || err > 1.0 {
            let fac = if err.is_nan() { 0.2 } else { (0.9 * err.powf(-0.2)).max(0.2) };
            h *= fac;
            rejected = true;
            continue;
        }
        let dist = boundary(&y_new);
        if dist.is_nan() || dist <= 0.0 {
            h *= 0.5;
            rejected = true;
            continue;
        }

        t = if last { t1 } else { t + dir * h };
        y = y_new;
        fy = k.pop().expect("seven stages");
        run.ts.push(t);
        run.ys.push(y.clone());
        run.fs.push(fy.clone());

        if dist < cfg.boundary_tol {
            run.stop = Stop::Boundary;
            return Ok(run);
        }
        if control.iter().any(|&i| !(y[i].abs() <= cfg.blowup)) {
            run.stop = Stop::BlowUp;
            return Ok(run);
        }

        let e = err.max(1e-10);
        let mut fac = 0.9 * e.powf(-0.7 / 5.0) * err_old.powf(0.4 / 5.0);
        fac = fac.clamp(0.2, if rejected { 1.0 } else { 5.0 });
        h *= fac;
        err_old = e;
        rejected = false;
    }
}

/// Cubic Hermite interpolation between two accepted steps.
pub(crate) fn hermite(t0: f64, y0: &[f64], f0: &[f64], t1: f64, y1: &[f64], f1: &[f64], t: f64) -> Vec<f64> {
    let h = t1 - t0;
    if h == 0.0 {
        return y0.to_vec();
    }
    let s = (t - t0) / h;
    let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
    let h10 = s * (1.0 - s) * (1.0 - s);
    let h01 = s * s * (3.0 - 2.0 * s);
    let h11 = s * s * (s - 1.0);
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RkConfig {
        RkConfig {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 100_000,
            blowup: 1e8,
            boundary_tol: 1e-9,
            max_step: None,
        }
    }

    fn free(_: &[f64]) -> f64 {
        f64::INFINITY
    }

    #[test]
    fn exponential_growth() {
        let run = integrate(|_, y: &[f64]| Ok::<_, ()>(vec![y[0]]), free, 0.0, 1.0, vec![1.0], &[0], &cfg()).unwrap();
        assert_eq!(run.stop, Stop::Finished);
        assert_eq!(*run.ts.last().unwrap(), 1.0);
        assert!((run.ys.last().unwrap()[0] - 1f64.exp()).abs() < 1e-9);
        let back = integrate(|_, y: &[f64]| Ok::<_, ()>(vec![y[0]]), free, 0.0, -2.0, vec![1.0], &[0], &cfg()).unwrap();
        assert!((back.ys.last().unwrap()[0] - (-2f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn rotation_with_dense_output() {
        let f = |_: f64, y: &[f64]| Ok::<_, ()>(vec![-y[1], y[0]]);
        let run = integrate(f, free, 0.0, 10.0, vec![1.0, 0.0], &[0, 1], &cfg()).unwrap();
        let y = run.ys.last().unwrap();
        assert!((y[0] - 10f64.cos()).abs() < 1e-8 && (y[1] - 10f64.sin()).abs() < 1e-8);
        let k = run.ts.len() / 2;
        let tm = 0.5 * (run.ts[k] + run.ts[k + 1]);
        let ym = hermite(run.ts[k], &run.ys[k], &run.fs[k], run.ts[k + 1], &run.ys[k + 1], &run.fs[k + 1], tm);
        assert!((ym[0] - tm.cos()).abs() < 1e-5);
    }

    #[test]
    fn boundary_and_blowup() {
        // x' = 1 on (0, 1) from 0.5
        let run = integrate(|_, _y: &[f64]| Ok::<_, ()>(vec![1.0]), |y: &[f64]| 1.0 - y[0], 0.0, 10.0, vec![0.5], &[0], &cfg())
            .unwrap();
        assert_eq!(run.stop, Stop::Boundary);
        assert!((run.ts.last().unwrap() - 0.5).abs() < 1e-8);
        // x' = x², x(0) = 1 blows up at t = 1
        let run = integrate(|_, y: &[f64]| Ok::<_, ()>(vec![y[0] * y[0]]), free, 0.0, 10.0, vec![1.0], &[0], &cfg()).unwrap();
        assert_eq!(run.stop, Stop::BlowUp);
        assert!((run.ts.last().unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn step_cap() {
        let c = RkConfig { max_step: Some(0.1), ..cfg() };
        let run = integrate(|_, _y: &[f64]| Ok::<_, ()>(vec![1.0]), free, 0.0, 1.0, vec![0.0], &[0], &c).unwrap();
        assert!(run.ts.len() >= 11);
        assert_eq!(*run.ts.last().unwrap(), 1.0);
        assert!(run.ts.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-15));
    }

    #[test]
    fn uncontrolled_components_ride_along() {
        // second component is not controlled but follows the same steps
        let f = |_: f64, y: &[f64]| Ok::<_, ()>(vec![y[0], 2.0 * y[1]]);
        let a = integrate(f, free, 0.0, 1.0, vec![1.0, 1.0], &[0], &cfg()).unwrap();
        let b = integrate(|_, y: &[f64]| Ok::<_, ()>(vec![y[0]]), free, 0.0, 1.0, vec![1.0], &[0], &cfg()).unwrap();
        assert_eq!(a.ts, b.ts);
        for (ya, yb) in a.ys.iter().zip(&b.ys) {
            assert_eq!(ya[0], yb[0]);
        }
    }
}
