use crate::params::BlockBounds;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derivative-free maximization of `f` over a box: a coarse lattice pass
/// followed by Nelder-Mead refinement from the best cells, with all
/// evaluations clamped into the box.
///
/// The lattice uses `points_per_dim` per coordinate up to `max_lattice`
/// total points; beyond that it falls back to a seeded uniform sample of
/// `max_lattice` points plus the box corners (corner count permitting).
#[derive(Debug, Clone)]
pub struct GridSearch {
    pub points_per_dim: usize,
    pub max_lattice: usize,
    pub refine_starts: usize,
    pub nm_max_iters: usize,
    pub nm_tol: f64,
    pub seed: u64,
}

impl Default for GridSearch {
    fn default() -> Self {
        GridSearch {
            points_per_dim: 20,
            max_lattice: 8000,
            refine_starts: 5,
            nm_max_iters: 600,
            nm_tol: 1e-13,
            seed: 0x9e3779b97f4a7c15,
        }
    }
}

impl GridSearch {
    pub fn maximize<F: Fn(&[f64]) -> f64>(&self, f: F, bounds: &BlockBounds) -> (Vec<f64>, f64) {
        let dim = bounds.dim();
        if dim == 0 {
            let v = f(&[]);
            return (Vec::new(), v);
        }
        let mut scored: Vec<(f64, Vec<f64>)> = self
            .initial_points(bounds)
            .into_iter()
            .map(|x| (f(&x), x))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        let clamped_f = |x: &[f64]| f(&bounds.clamp(x));
        let mut best_v = scored[0].0;
        let mut best_x = bounds.clamp(&scored[0].1);
        for (_, start) in scored.iter().take(self.refine_starts) {
            let (x, v) = nelder_mead_max(&clamped_f, start, bounds, self.nm_max_iters, self.nm_tol);
            let x = bounds.clamp(&x);
            if v > best_v {
                best_v = v;
                best_x = x;
            }
        }
        (best_x, best_v)
    }

    fn initial_points(&self, bounds: &BlockBounds) -> Vec<Vec<f64>> {
        let dim = bounds.dim();
        let lattice_size = (self.points_per_dim as f64).powi(dim as i32);
        if lattice_size <= self.max_lattice as f64 {
            let mut points = Vec::with_capacity(lattice_size as usize);
            let mut index = vec![0usize; dim];
            loop {
                let point: Vec<f64> = (0..dim)
                    .map(|q| {
                        let frac = index[q] as f64 / (self.points_per_dim - 1) as f64;
                        bounds.lower()[q] + frac * (bounds.upper()[q] - bounds.lower()[q])
                    })
                    .collect();
                points.push(point);
                let mut q = 0;
                loop {
                    index[q] += 1;
                    if index[q] < self.points_per_dim {
                        break;
                    }
                    index[q] = 0;
                    q += 1;
                    if q == dim {
                        return points;
                    }
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut points = Vec::with_capacity(self.max_lattice + (1 << dim.min(12)));
        if dim <= 12 {
            for mask in 0u32..(1 << dim) {
                let corner: Vec<f64> = (0..dim)
                    .map(|q| {
                        if mask >> q & 1 == 1 {
                            bounds.upper()[q]
                        } else {
                            bounds.lower()[q]
                        }
                    })
                    .collect();
                points.push(corner);
            }
        }
        points.push(bounds.midpoint());
        while points.len() < self.max_lattice {
            points.push(bounds.sample_uniform(&mut rng));
        }
        points
    }
}

/// Nelder-Mead simplex maximization (standard reflection/expansion/
/// contraction coefficients), evaluations clamped by the caller.
pub fn nelder_mead_max<F: Fn(&[f64]) -> f64>(
    f: &F,
    start: &[f64],
    bounds: &BlockBounds,
    max_iters: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    if dim == 0 {
        return (Vec::new(), f(start));
    }
    // initial simplex: start plus per-coordinate steps scaled to the box
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(start.to_vec());
    for q in 0..dim {
        let mut v = start.to_vec();
        let span = bounds.upper()[q] - bounds.lower()[q];
        let step = 0.05 * span;
        v[q] = if v[q] + step <= bounds.upper()[q] {
            v[q] + step
        } else {
            v[q] - step
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    for _ in 0..max_iters {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| {
            values[b]
                .partial_cmp(&values[a])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        if (values[best] - values[worst]).abs() <= tol * (1.0 + values[best].abs()) {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for (i, x) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for q in 0..dim {
                centroid[q] += x[q];
            }
        }
        for c in &mut centroid {
            *c /= dim as f64;
        }

        let reflect: Vec<f64> = (0..dim)
            .map(|q| centroid[q] + (centroid[q] - simplex[worst][q]))
            .collect();
        let fr = f(&reflect);

        if fr > values[best] {
            let expand: Vec<f64> = (0..dim)
                .map(|q| centroid[q] + 2.0 * (centroid[q] - simplex[worst][q]))
                .collect();
            let fe = f(&expand);
            if fe > fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr > values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let contract: Vec<f64> = (0..dim)
                .map(|q| centroid[q] + 0.5 * (simplex[worst][q] - centroid[q]))
                .collect();
            let fc = f(&contract);
            if fc > values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                // shrink toward the best vertex
                let best_point = simplex[best].clone();
                for (i, x) in simplex.iter_mut().enumerate() {
                    if i == best {
                        continue;
                    }
                    for q in 0..dim {
                        x[q] = best_point[q] + 0.5 * (x[q] - best_point[q]);
                    }
                }
                for (i, x) in simplex.iter().enumerate() {
                    if i != best {
                        values[i] = f(x);
                    }
                }
            }
        }
    }

    let (mut bi, mut bv) = (0, values[0]);
    for (i, &v) in values.iter().enumerate() {
        if v > bv {
            bv = v;
            bi = i;
        }
    }
    (simplex[bi].clone(), bv)
}

/// Maximizes a concave univariate function on [lo, hi] by golden-section
/// search; used by the profile-statistic checks.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_search_finds_interior_quadratic_max() {
        let bounds = BlockBounds::new(vec![-3.0, -3.0], vec![4.0, 4.0]).unwrap();
        let f = |x: &[f64]| -(x[0] - 0.7).powi(2) - 2.0 * (x[1] + 1.2).powi(2);
        let (x, v) = GridSearch::default().maximize(f, &bounds);
        assert!((x[0] - 0.7).abs() < 1e-6, "x = {x:?}");
        assert!((x[1] + 1.2).abs() < 1e-6, "x = {x:?}");
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn grid_search_finds_corner_max() {
        let bounds = BlockBounds::new(vec![-2.0], vec![5.0]).unwrap();
        let f = |x: &[f64]| x[0];
        let (x, v) = GridSearch::default().maximize(f, &bounds);
        assert!((x[0] - 5.0).abs() < 1e-9);
        assert!((v - 5.0).abs() < 1e-9);
    }

    #[test]
    fn golden_section_hits_parabola_peak() {
        let (x, v) = golden_section_max(|x| -(x - 1.5) * (x - 1.5), -10.0, 10.0, 1e-12);
        assert!((x - 1.5).abs() < 1e-7);
        assert!(v.abs() < 1e-13);
    }
}
