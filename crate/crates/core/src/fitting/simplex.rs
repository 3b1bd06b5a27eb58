//! Nelder–Mead downhill simplex with box projection.

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Converged when every vertex lies within `tolerance · max(1, |x_best|)`
    /// of the best vertex in every coordinate.
    pub tolerance: f64,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            tolerance: 1e-8,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub history: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimise `f` from `x0` with initial simplex offsets `steps` along each axis.
pub fn minimize<F>(f: F, x0: &[f64], steps: &[f64], opts: &SimplexOptions) -> SimplexOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(steps.len(), n, "one initial step per coordinate");
    let project = |x: &mut Vec<f64>| {
        if let Some(b) = &opts.bounds {
            for (xi, &(lo, hi)) in x.iter_mut().zip(b) {
                *xi = xi.clamp(lo, hi);
            }
        }
    };
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    project(&mut start);
    let mut vertices = vec![start.clone()];
    for i in 0..n {
        let mut v = start.clone();
        v[i] += steps[i];
        project(&mut v);
        if v[i] == start[i] {
            // Pinned against a bound: step inward instead.
            v[i] = start[i] - steps[i];
            project(&mut v);
        }
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v)).collect();

    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&k| vertices[k].clone()).collect();
        values = order.iter().map(|&k| values[k]).collect();

        if spread_ok(&vertices, opts.tolerance) {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|j| vertices[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let towards = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = (0..n)
                .map(|j| centroid[j] + coef * (vertices[n][j] - centroid[j]))
                .collect();
            project(&mut p);
            p
        };

        let reflected = towards(-REFLECT);
        let f_r = eval(&reflected);
        if f_r < values[0] {
            let expanded = towards(-REFLECT * EXPAND);
            let f_e = eval(&expanded);
            if f_e < f_r {
                vertices[n] = expanded;
                values[n] = f_e;
            } else {
                vertices[n] = reflected;
                values[n] = f_r;
            }
        } else if f_r < values[n - 1] {
            vertices[n] = reflected;
            values[n] = f_r;
        } else {
            let (candidate, f_c) = if f_r < values[n] {
                let c = towards(-REFLECT * CONTRACT);
                let fc = eval(&c);
                (c, fc)
            } else {
                let c = towards(CONTRACT);
                let fc = eval(&c);
                (c, fc)
            };
            if f_c < values[n].min(f_r) {
                vertices[n] = candidate;
                values[n] = f_c;
            } else {
                let best = vertices[0].clone();
                for k in 1..=n {
                    let mut v: Vec<f64> = (0..n)
                        .map(|j| best[j] + SHRINK * (vertices[k][j] - best[j]))
                        .collect();
                    project(&mut v);
                    values[k] = eval(&v);
                    vertices[k] = v;
                }
            }
        }
        history.push(values.iter().copied().fold(f64::INFINITY, f64::min));
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("simplex has vertices");
    SimplexOutcome {
        x: vertices[best].clone(),
        fx: values[best],
        iterations,
        evaluations,
        converged,
        history,
    }
}

fn spread_ok(vertices: &[Vec<f64>], tol: f64) -> bool {
    let best = &vertices[0];
    vertices[1..].iter().all(|v| {
        v.iter()
            .zip(best)
            .all(|(a, b)| (a - b).abs() <= tol * b.abs().max(1.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let out = minimize(f, &[-1.2, 1.0], &[0.5, 0.5], &SimplexOptions::default());
        assert!(out.converged);
        assert!(
            (out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6,
            "{:?}",
            out.x
        );
    }

    #[test]
    fn best_value_never_increases() {
        let f = |x: &[f64]| {
            x.iter()
                .enumerate()
                .map(|(i, v)| (i as f64 + 1.0) * (v - 0.3).powi(2))
                .sum()
        };
        let out = minimize(
            f,
            &[2.0, -1.0, 4.0],
            &[1.0, 1.0, 1.0],
            &SimplexOptions::default(),
        );
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.fx < 1e-14);
    }

    #[test]
    fn bounds_are_respected() {
        let f = |x: &[f64]| (x[0] + 3.0).powi(2) + (x[1] - 1.0).powi(2);
        let opts = SimplexOptions {
            bounds: Some(vec![(0.0, 5.0), (-5.0, 5.0)]),
            ..SimplexOptions::default()
        };
        let out = minimize(f, &[1.0, 0.0], &[0.5, 0.5], &opts);
        assert!(
            out.x[0].abs() < 1e-7 && (out.x[1] - 1.0).abs() < 1e-6,
            "{:?}",
            out.x
        );
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &[f64]| x[0] * x[0] + x[1] * x[1];
        let opts = SimplexOptions {
            max_iterations: 5,
            ..SimplexOptions::default()
        };
        let out = minimize(f, &[3.0, 3.0], &[1.0, 1.0], &opts);
        assert!(!out.converged);
        assert_eq!(out.iterations, 5);
    }
}
