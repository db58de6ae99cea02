//! Nelder-Mead simplex descent with in-place restarts around the incumbent.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop as soon as the best value drops below this.
    pub target: f64,
    /// Convergence when the value spread and simplex diameter are both tiny.
    pub ftol: f64,
    pub xtol: f64,
    pub initial_step: f64,
    /// Number of times a converged simplex is rebuilt around its best vertex.
    pub rebuilds: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            target: 1e-30,
            ftol: 1e-32,
            xtol: 1e-13,
            initial_step: 0.25,
            rebuilds: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

pub fn minimize<F>(f: F, x0: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut evals = 0usize;
    let mut best_x = x0.to_vec();
    let mut best_v = eval(x0);
    evals += 1;
    if dim == 0 {
        return SimplexResult {
            x: best_x,
            value: best_v,
            evals,
        };
    }

    let mut step = opts.initial_step;
    for _round in 0..=opts.rebuilds {
        let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        pts.push((best_x.clone(), best_v));
        for i in 0..dim {
            let mut x = best_x.clone();
            let h = if x[i].abs() > 1e-12 {
                step * x[i].abs().max(0.1)
            } else {
                step
            };
            x[i] += h;
            let v = eval(&x);
            evals += 1;
            pts.push((x, v));
        }

        while evals < opts.max_evals {
            pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            let (lo, hi) = (pts[0].1, pts[dim].1);
            if lo <= opts.target {
                break;
            }
            let diam = pts[1..]
                .iter()
                .map(|(x, _)| {
                    x.iter()
                        .zip(&pts[0].0)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if hi - lo <= opts.ftol && diam <= opts.xtol {
                break;
            }
            if diam <= opts.xtol * 1e-3 {
                break;
            }

            let mut centroid = vec![0.0; dim];
            for (x, _) in &pts[..dim] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / dim as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&pts[dim].0)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let xr = along(1.0);
            let vr = eval(&xr);
            evals += 1;
            if vr < pts[0].1 {
                let xe = along(2.0);
                let ve = eval(&xe);
                evals += 1;
                pts[dim] = if ve < vr { (xe, ve) } else { (xr, vr) };
            } else if vr < pts[dim - 1].1 {
                pts[dim] = (xr, vr);
            } else {
                let (xc, vc) = if vr < pts[dim].1 {
                    let xc = along(0.5);
                    let vc = eval(&xc);
                    (xc, vc)
                } else {
                    let xc = along(-0.5);
                    let vc = eval(&xc);
                    (xc, vc)
                };
                evals += 1;
                if vc < pts[dim].1.min(vr) {
                    pts[dim] = (xc, vc);
                } else {
                    let x0 = pts[0].0.clone();
                    for p in pts.iter_mut().skip(1) {
                        let xs: Vec<f64> = x0
                            .iter()
                            .zip(&p.0)
                            .map(|(a, b)| a + 0.5 * (b - a))
                            .collect();
                        let vs = eval(&xs);
                        evals += 1;
                        *p = (xs, vs);
                    }
                }
            }
        }

        pts.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let improved = pts[0].1 < best_v;
        if pts[0].1 <= best_v {
            best_x = pts[0].0.clone();
            best_v = pts[0].1;
        }
        if best_v <= opts.target || evals >= opts.max_evals || (!improved && _round > 0) {
            break;
        }
        step *= 0.1;
    }

    SimplexResult {
        x: best_x,
        value: best_v,
        evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let r = minimize(
            |x| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &SimplexOptions::default(),
        );
        assert!(r.value < 1e-20, "{}", r.value);
        assert!((r.x[0] - 1.0).abs() < 1e-9 && (r.x[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let opts = SimplexOptions {
            max_evals: 20000,
            ..SimplexOptions::default()
        };
        let r = minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &opts,
        );
        assert!(r.value < 1e-16, "{}", r.value);
    }

    #[test]
    fn respects_eval_budget() {
        let opts = SimplexOptions {
            max_evals: 50,
            rebuilds: 0,
            ..SimplexOptions::default()
        };
        let r = minimize(
            |x| x.iter().map(|v| v.abs()).sum(),
            &[3.0, -4.0, 5.0],
            &opts,
        );
        assert!(r.evals <= 50 + 8);
    }
}
