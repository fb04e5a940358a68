//! Derivative-free local search on the unit cube.
//!
//! One Nelder–Mead implementation serves both surrogate/likelihood fitting
//! and acquisition maximization. Points are projected onto `[0, 1]^d` before
//! every evaluation, so callers map their boxes onto the cube themselves.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug)]
pub struct NelderMead {
    pub max_evals: usize,
    pub initial_step: f64,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_evals: 400,
            initial_step: 0.15,
            f_tol: 1e-10,
            x_tol: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

fn project(x: &mut [f64]) {
    for v in x {
        *v = if v.is_finite() {
            v.clamp(0.0, 1.0)
        } else {
            0.5
        };
    }
}

impl NelderMead {
    pub fn minimize<F>(&self, mut f: F, start: &[f64]) -> Minimum
    where
        F: FnMut(&[f64]) -> f64,
    {
        let d = start.len();
        let mut evals = 0usize;
        let mut eval = |x: &[f64], evals: &mut usize| {
            *evals += 1;
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        };

        let mut x0 = start.to_vec();
        project(&mut x0);
        if d == 0 {
            let value = eval(&x0, &mut evals);
            return Minimum {
                x: x0,
                value,
                evals,
            };
        }

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
        simplex.push(x0.clone());
        for i in 0..d {
            let mut p = x0.clone();
            // step inward when the start sits on the upper face
            p[i] += if p[i] + self.initial_step <= 1.0 {
                self.initial_step
            } else {
                -self.initial_step
            };
            project(&mut p);
            simplex.push(p);
        }
        let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut order: Vec<usize> = (0..=d).collect();
        while evals < self.max_evals {
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            let best = order[0];
            let worst = order[d];
            let second = order[d - 1];

            let spread = values[worst] - values[best];
            let size = simplex
                .iter()
                .map(|p| {
                    p.iter()
                        .zip(&simplex[best])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            if (spread.is_finite() && spread.abs() <= self.f_tol) || size <= self.x_tol {
                break;
            }

            let mut centroid = vec![0.0; d];
            for &i in order.iter().take(d) {
                for (c, v) in centroid.iter_mut().zip(&simplex[i]) {
                    *c += v / d as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[worst])
                    .map(|(c, w)| c + t * (c - w))
                    .collect();
                project(&mut p);
                p
            };

            let reflected = along(alpha);
            let fr = eval(&reflected, &mut evals);
            if fr < values[best] {
                let expanded = along(gamma);
                let fe = eval(&expanded, &mut evals);
                if fe < fr {
                    simplex[worst] = expanded;
                    values[worst] = fe;
                } else {
                    simplex[worst] = reflected;
                    values[worst] = fr;
                }
                continue;
            }
            if fr < values[second] {
                simplex[worst] = reflected;
                values[worst] = fr;
                continue;
            }
            let (contracted, fc) = if fr < values[worst] {
                let c = along(rho);
                let v = eval(&c, &mut evals);
                (c, v)
            } else {
                let c = along(-rho);
                let v = eval(&c, &mut evals);
                (c, v)
            };
            if fc < values[worst].min(fr) {
                simplex[worst] = contracted;
                values[worst] = fc;
                continue;
            }
            // shrink toward the best vertex
            let anchor = simplex[best].clone();
            for &i in order.iter().skip(1) {
                for (v, a) in simplex[i].iter_mut().zip(&anchor) {
                    *v = a + sigma * (*v - a);
                }
                values[i] = eval(&simplex[i], &mut evals);
            }
        }

        let best = (0..=d)
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .unwrap_or(0);
        Minimum {
            x: simplex.swap_remove(best),
            value: values[best],
            evals,
        }
    }

    /// Runs a local search from every start and keeps the lowest value.
    /// Ties go to the earliest start, which keeps results order-stable.
    pub fn minimize_multi<F>(&self, mut f: F, starts: &[Vec<f64>]) -> Option<Minimum>
    where
        F: FnMut(&[f64]) -> f64,
    {
        let mut best: Option<Minimum> = None;
        for s in starts {
            let m = self.minimize(&mut f, s);
            if best.as_ref().is_none_or(|b| m.value < b.value) {
                best = Some(m);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_quadratic_minimum() {
        let nm = NelderMead {
            max_evals: 2000,
            ..Default::default()
        };
        let m = nm.minimize(
            |x| (x[0] - 0.3).powi(2) + 2.0 * (x[1] - 0.7).powi(2),
            &[0.9, 0.1],
        );
        assert!(
            (m.x[0] - 0.3).abs() < 1e-4 && (m.x[1] - 0.7).abs() < 1e-4,
            "{m:?}"
        );
    }

    #[test]
    fn respects_box() {
        let m = NelderMead::default().minimize(|x| -x[0], &[0.5]);
        assert!(m.x[0] <= 1.0 && m.x[0] > 0.999);
    }

    #[test]
    fn zero_dimensional() {
        let m = NelderMead::default().minimize(|_| 3.0, &[]);
        assert_eq!((m.value, m.evals), (3.0, 1));
    }

    #[test]
    fn nan_is_treated_as_worst() {
        let m = NelderMead::default().minimize(
            |x| {
                if x[0] > 0.6 {
                    f64::NAN
                } else {
                    (x[0] - 0.5).powi(2)
                }
            },
            &[0.2],
        );
        assert!((m.x[0] - 0.5).abs() < 1e-3);
    }
}
