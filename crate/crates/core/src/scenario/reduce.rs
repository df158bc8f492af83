use super::{Scenario, ScenarioSet};
use crate::error::{Error, Result};

/// Euclidean distance between scenarios over the concatenated wind,
/// irradiance and load-multiplier series, each coordinate scaled by its
/// probability-weighted standard deviation across the set. Coordinates with
/// zero spread are dropped.
#[derive(Debug, Clone)]
pub struct ScenarioMetric {
    features: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
}

fn raw_features(s: &Scenario) -> Vec<f64> {
    s.wind_speed
        .iter()
        .chain(&s.irradiance)
        .chain(s.load_multiplier.iter().flatten())
        .copied()
        .collect()
}

impl ScenarioMetric {
    pub fn new(set: &ScenarioSet) -> Self {
        let raw: Vec<Vec<f64>> = set.iter().map(raw_features).collect();
        let probabilities: Vec<f64> = set.iter().map(|s| s.probability).collect();
        let dims = raw[0].len();
        let mut keep = Vec::new();
        let mut inv_scale = Vec::new();
        for d in 0..dims {
            let mean: f64 = raw.iter().zip(&probabilities).map(|(f, p)| p * f[d]).sum();
            let var: f64 = raw
                .iter()
                .zip(&probabilities)
                .map(|(f, p)| p * (f[d] - mean).powi(2))
                .sum();
            if var > 0.0 {
                keep.push(d);
                inv_scale.push(1.0 / var.sqrt());
            }
        }
        let features = raw
            .iter()
            .map(|f| keep.iter().zip(&inv_scale).map(|(&d, s)| f[d] * s).collect())
            .collect();
        Self {
            features,
            probabilities,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.features[i]
            .iter()
            .zip(&self.features[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Kantorovich distance between the full distribution and the best
    /// re-weighting supported on `kept`: every scenario ships its mass to the
    /// nearest kept scenario.
    pub fn transport_cost(&self, kept: &[usize]) -> f64 {
        (0..self.len())
            .map(|i| {
                let nearest = kept
                    .iter()
                    .map(|&j| self.distance(i, j))
                    .fold(f64::INFINITY, f64::min);
                self.probabilities[i] * nearest
            })
            .sum()
    }

    fn nearest_among(&self, i: usize, candidates: impl Iterator<Item = usize>, dist: &[f64]) -> (usize, f64) {
        let n = self.len();
        let mut best = (usize::MAX, f64::INFINITY);
        for j in candidates {
            if j == i {
                continue;
            }
            let d = dist[i * n + j];
            // strict comparison keeps the lower index on ties
            if d < best.1 || (d == best.1 && j < best.0) {
                best = (j, d);
            }
        }
        best
    }
}

/// Backward reduction to `target` scenarios.
///
/// Repeatedly deletes the scenario whose probability times distance to its
/// nearest surviving neighbour is smallest (ties to the lower index), moving
/// its mass onto that neighbour. Once the survivors are fixed, each original
/// scenario's probability is assigned to its nearest survivor, which is the
/// re-weighting that minimizes the transport cost for that support.
pub fn reduce_scenarios(set: &ScenarioSet, target: usize) -> Result<ScenarioSet> {
    reduce_scenarios_indexed(set, target).map(|(reduced, _)| reduced)
}

/// Same as [`reduce_scenarios`], also returning the input indices of the
/// retained scenarios in ascending order.
pub fn reduce_scenarios_indexed(set: &ScenarioSet, target: usize) -> Result<(ScenarioSet, Vec<usize>)> {
    let n = set.len();
    if target == 0 || target > n {
        return Err(Error::InvalidParameter(format!(
            "reduction target must be in 1..={n}, got {target}"
        )));
    }
    if target == n {
        return Ok((set.clone(), (0..n).collect()));
    }

    let metric = ScenarioMetric::new(set);
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.distance(i, j);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut alive = vec![true; n];
    let mut mass: Vec<f64> = set.iter().map(|s| s.probability).collect();
    let mut nearest: Vec<(usize, f64)> = (0..n).map(|i| metric.nearest_among(i, 0..n, &dist)).collect();

    for _ in 0..(n - target) {
        let mut victim = usize::MAX;
        let mut victim_cost = f64::INFINITY;
        for i in (0..n).filter(|&i| alive[i]) {
            let cost = mass[i] * nearest[i].1;
            if cost < victim_cost {
                victim = i;
                victim_cost = cost;
            }
        }
        let heir = nearest[victim].0;
        mass[heir] += mass[victim];
        mass[victim] = 0.0;
        alive[victim] = false;
        for k in 0..n {
            if alive[k] && nearest[k].0 == victim {
                nearest[k] = metric.nearest_among(k, (0..n).filter(|&j| alive[j]), &dist);
            }
        }
    }

    let kept: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    let mut weights = vec![0.0; n];
    for (i, s) in set.iter().enumerate() {
        let home = if alive[i] {
            i
        } else {
            *kept
                .iter()
                .min_by(|&&a, &&b| dist[i * n + a].total_cmp(&dist[i * n + b]).then(a.cmp(&b)))
                .expect("at least one survivor")
        };
        weights[home] += s.probability;
    }
    let total: f64 = kept.iter().map(|&i| weights[i]).sum();
    let scenarios = kept
        .iter()
        .map(|&i| Scenario {
            probability: weights[i] / total,
            ..set.scenarios()[i].clone()
        })
        .collect();
    Ok((ScenarioSet::new(scenarios, set.horizon(), set.master_seed())?, kept))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::generate_scenarios;
    use super::*;
    use rand::seq::index::sample;

    #[test]
    fn reduces_to_target_with_unit_mass() {
        let set = generate_scenarios(&flat_model(24), 24, 1000, 42).unwrap();
        let reduced = reduce_scenarios(&set, 30).unwrap();
        assert_eq!(reduced.len(), 30);
        let total: f64 = reduced.iter().map(|s| s.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_target_is_identity() {
        let set = generate_scenarios(&flat_model(24), 24, 12, 1).unwrap();
        assert_eq!(reduce_scenarios(&set, 12).unwrap(), set);
    }

    #[test]
    fn rejects_bad_targets() {
        let set = generate_scenarios(&flat_model(24), 24, 12, 1).unwrap();
        assert!(reduce_scenarios(&set, 0).is_err());
        assert!(reduce_scenarios(&set, 13).is_err());
    }

    #[test]
    fn duplicate_pair_merges() {
        let a = constant_scenario(0.3, 4, 1.0);
        let b = constant_scenario(0.3, 4, 1.0);
        let c = constant_scenario(0.4, 4, 5.0);
        let set = ScenarioSet::new(vec![a.clone(), b, c.clone()], 4, 0).unwrap();
        let (reduced, kept) = reduce_scenarios_indexed(&set, 2).unwrap();
        // equal zero-cost ties: the lower index goes first
        assert_eq!(kept, vec![1, 2]);
        assert!((reduced.scenarios()[0].probability - 0.6).abs() < 1e-12);
        assert!((reduced.scenarios()[1].probability - 0.4).abs() < 1e-12);
        assert_eq!(reduced.scenarios()[0].wind_speed, a.wind_speed);
        assert_eq!(reduced.scenarios()[1].wind_speed, c.wind_speed);
    }

    #[test]
    fn retained_scenarios_come_from_input() {
        let set = generate_scenarios(&flat_model(24), 24, 80, 5).unwrap();
        let (reduced, kept) = reduce_scenarios_indexed(&set, 10).unwrap();
        for (s, &i) in reduced.iter().zip(&kept) {
            let orig = &set.scenarios()[i];
            assert_eq!(s.wind_speed, orig.wind_speed);
            assert_eq!(s.irradiance, orig.irradiance);
            assert_eq!(s.load_multiplier, orig.load_multiplier);
        }
    }

    #[test]
    fn beats_random_subsets() {
        let set = generate_scenarios(&flat_model(24), 24, 200, 17).unwrap();
        let metric = ScenarioMetric::new(&set);
        let (_, kept) = reduce_scenarios_indexed(&set, 20).unwrap();
        let ours = metric.transport_cost(&kept);
        let mut rng = crate::rng::stream(123, 0);
        let wins = (0..100)
            .filter(|_| {
                let random: Vec<usize> = sample(&mut rng, 200, 20).into_vec();
                ours <= metric.transport_cost(&random)
            })
            .count();
        assert!(wins >= 95, "won {wins}/100");
    }

    #[test]
    fn end_to_end_reproducible() {
        let run = || {
            let set = generate_scenarios(&flat_model(24), 24, 150, 8).unwrap();
            reduce_scenarios(&set, 15).unwrap()
        };
        assert_eq!(run(), run());
    }
}
