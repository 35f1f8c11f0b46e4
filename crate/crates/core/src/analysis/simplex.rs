//! Nelder–Mead simplex minimisation for small, smooth, derivative-free problems.

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Minimises `f` from the initial simplex `start` (n + 1 points in n
/// dimensions). Converged when every vertex lies within `xtol` of the best in
/// every coordinate. Returns `Err(best-so-far)` after `max_iter` iterations.
pub fn minimize(
    f: impl Fn(&[f64]) -> f64,
    start: Vec<Vec<f64>>,
    xtol: f64,
    max_iter: usize,
) -> Result<Minimum, Minimum> {
    let n = start.len() - 1;
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut pts: Vec<(Vec<f64>, f64)> = start
        .into_iter()
        .map(|x| {
            let v = eval(&x);
            (x, v)
        })
        .collect();
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };
    for it in 0..max_iter {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = pts[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < xtol {
            return Ok(Minimum {
                x: pts[0].0.clone(),
                value: pts[0].1,
                iterations: it,
            });
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &pts[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = pts[n].clone();
        let reflected = lerp(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected);
        if fr < pts[0].1 {
            let expanded = lerp(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded);
            pts[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
        } else if fr < pts[n - 1].1 {
            pts[n] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < worst.1 {
                let c = lerp(&centroid, &worst.0, -0.5);
                let v = eval(&c);
                (c, v)
            } else {
                let c = lerp(&centroid, &worst.0, 0.5);
                let v = eval(&c);
                (c, v)
            };
            if fc < worst.1.min(fr) {
                pts[n] = (contracted, fc);
            } else {
                let best = pts[0].0.clone();
                for p in pts.iter_mut().skip(1) {
                    p.0 = lerp(&best, &p.0, 0.5);
                    p.1 = eval(&p.0);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    Err(Minimum {
        x: pts[0].0.clone(),
        value: pts[0].1,
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let m = minimize(
            |x| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.25).powi(2),
            vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.0, 0.5]],
            1e-9,
            5000,
        )
        .unwrap();
        assert!((m.x[0] - 1.5).abs() < 1e-8 && (m.x[1] + 0.25).abs() < 1e-8);
    }

    #[test]
    fn rosenbrock() {
        let m = minimize(
            |x| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2),
            vec![vec![-1.2, 1.0], vec![-1.0, 1.0], vec![-1.2, 1.2]],
            1e-10,
            10_000,
        )
        .unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let r = minimize(|x| x[0].abs(), vec![vec![100.0], vec![101.0]], 1e-12, 3);
        assert!(r.is_err());
    }
}
