use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::balancing::{dwa_weights, normalized_total, uncertainty_total, TaskLosses};
use super::strategy::{Balancing, StrategyConfig, Surgery};
use super::surgery::{cagrad, graddrop, pcgrad, GradientSet};
use crate::{Error, Result};

const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub learning_rate: f64,
    /// Multiplier on the classification cross-entropy.
    pub cls_scale: f64,
    /// Standard deviation of the regression target noise.
    pub noise: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            input_dim: 16,
            hidden_dim: 32,
            train_samples: 256,
            test_samples: 256,
            learning_rate: 0.02,
            cls_scale: 10.0,
            noise: 0.1,
        }
    }
}

/// Inputs with a regression target and a binary label, both from a planted linear teacher.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyData {
    pub dim: usize,
    pub x: Vec<f64>,
    pub y_reg: Vec<f64>,
    pub y_cls: Vec<f64>,
}

impl ToyData {
    pub fn len(&self) -> usize {
        self.y_reg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_reg.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.x[k * self.dim..(k + 1) * self.dim]
    }

    fn sample<R: Rng>(teacher: &Teacher, n: usize, noise: f64, rng: &mut R) -> Self {
        let dim = teacher.reg.len();
        let mut x = Vec::with_capacity(n * dim);
        let mut y_reg = Vec::with_capacity(n);
        let mut y_cls = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let eps: f64 = StandardNormal.sample(rng);
            y_reg.push(dot(&teacher.reg, &row) + noise * eps);
            y_cls.push(if dot(&teacher.cls, &row) > 0.0 { 1.0 } else { 0.0 });
            x.extend(row);
        }
        Self { dim, x, y_reg, y_cls }
    }
}

struct Teacher {
    reg: Vec<f64>,
    cls: Vec<f64>,
}

impl Teacher {
    fn planted<R: Rng>(dim: usize, rng: &mut R) -> Self {
        let mut unit = || {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut *rng)).collect();
            let n = dot(&v, &v).sqrt();
            v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
        };
        let reg = unit();
        let cls = unit();
        Self { reg, cls }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shared tanh encoder with a regression head and a classification head.
///
/// Parameters live in one flat vector laid out as
/// `[W1 (hidden × input), b1, w_reg, b_reg, w_cls, b_cls]`; the first
/// [`shared_len`](Self::shared_len) entries are shared by both tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    input: usize,
    hidden: usize,
    cls_scale: f64,
    pub params: Vec<f64>,
}

impl ToyModel {
    pub fn init<R: Rng>(config: &ToyConfig, rng: &mut R) -> Self {
        let (d, h) = (config.input_dim, config.hidden_dim);
        let mut params = Vec::with_capacity(h * d + 3 * h + 2);
        let s1 = 1.0 / (d as f64).sqrt();
        let s2 = 1.0 / (h as f64).sqrt();
        let mut normal = || -> f64 { StandardNormal.sample(&mut *rng) };
        params.extend((0..h * d).map(|_| s1 * normal()));
        params.extend(std::iter::repeat_n(0.0, h));
        params.extend((0..h).map(|_| s2 * normal()));
        params.push(0.0);
        params.extend((0..h).map(|_| s2 * normal()));
        params.push(0.0);
        Self { input: d, hidden: h, cls_scale: config.cls_scale, params }
    }

    pub fn shared_len(&self) -> usize {
        self.hidden * self.input + self.hidden
    }

    fn head_offsets(&self) -> (usize, usize) {
        let reg = self.shared_len();
        (reg, reg + self.hidden + 1)
    }

    fn forward(&self, x: &[f64], hidden: &mut [f64]) -> (f64, f64) {
        let (d, h) = (self.input, self.hidden);
        let w1 = &self.params[..h * d];
        let b1 = &self.params[h * d..h * d + h];
        for j in 0..h {
            hidden[j] = (dot(&w1[j * d..(j + 1) * d], x) + b1[j]).tanh();
        }
        let (r, c) = self.head_offsets();
        let y = dot(&self.params[r..r + h], hidden) + self.params[r + h];
        let z = dot(&self.params[c..c + h], hidden) + self.params[c + h];
        (y, z)
    }

    /// `[mean squared error, cls_scale × mean binary cross-entropy]`.
    pub fn losses(&self, data: &ToyData) -> [f64; 2] {
        let mut hidden = vec![0.0; self.hidden];
        let (mut mse, mut bce) = (0.0, 0.0);
        for k in 0..data.len() {
            let (y, z) = self.forward(data.row(k), &mut hidden);
            mse += (y - data.y_reg[k]).powi(2);
            bce += softplus(z) - data.y_cls[k] * z;
        }
        let n = data.len() as f64;
        [mse / n, self.cls_scale * bce / n]
    }

    /// Full-parameter gradient of each task loss.
    pub fn gradients(&self, data: &ToyData) -> [Vec<f64>; 2] {
        let (d, h) = (self.input, self.hidden);
        let (r, c) = self.head_offsets();
        let n = data.len() as f64;
        let mut g_reg = vec![0.0; self.params.len()];
        let mut g_cls = vec![0.0; self.params.len()];
        let mut hidden = vec![0.0; h];
        for k in 0..data.len() {
            let x = data.row(k);
            let (y, z) = self.forward(x, &mut hidden);
            let dy = 2.0 * (y - data.y_reg[k]) / n;
            let dz = self.cls_scale * (sigmoid(z) - data.y_cls[k]) / n;
            for (grad, head, delta) in [(&mut g_reg, r, dy), (&mut g_cls, c, dz)] {
                for j in 0..h {
                    grad[head + j] += delta * hidden[j];
                    let pre = delta * self.params[head + j] * (1.0 - hidden[j] * hidden[j]);
                    let row = &mut grad[j * d..(j + 1) * d];
                    for (gi, xi) in row.iter_mut().zip(x) {
                        *gi += pre * xi;
                    }
                    grad[h * d + j] += pre;
                }
                grad[head + h] += delta;
            }
        }
        [g_reg, g_cls]
    }

    pub fn accuracy(&self, data: &ToyData) -> f64 {
        let mut hidden = vec![0.0; self.hidden];
        let hits = (0..data.len())
            .filter(|&k| {
                let (_, z) = self.forward(data.row(k), &mut hidden);
                (z > 0.0) == (data.y_cls[k] > 0.5)
            })
            .count();
        hits as f64 / data.len().max(1) as f64
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub step: usize,
    pub losses: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyHistory {
    pub strategy: StrategyConfig,
    pub seed: u64,
    /// Losses before each update and the task weights that update used.
    pub epochs: Vec<EpochRecord>,
    pub final_losses: Vec<f64>,
    pub test_reg_mse: f64,
    pub test_cls_accuracy: f64,
}

impl ToyHistory {
    pub fn initial_losses(&self) -> &[f64] {
        self.epochs.first().map_or(&self.final_losses, |e| &e.losses)
    }

    /// Final loss over initial loss, per task.
    pub fn loss_ratios(&self) -> Vec<f64> {
        self.final_losses.iter().zip(self.initial_losses()).map(|(f, i)| f / i).collect()
    }
}

/// The seeded data and initial model that [`train_toy`] starts from.
pub fn toy_fixture(config: &ToyConfig, seed: u64) -> (ToyData, ToyData, ToyModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let teacher = Teacher::planted(config.input_dim, &mut rng);
    let train = ToyData::sample(&teacher, config.train_samples, config.noise, &mut rng);
    let test = ToyData::sample(&teacher, config.test_samples, config.noise, &mut rng);
    let model = ToyModel::init(config, &mut rng);
    (train, test, model)
}

/// Full-batch gradient descent on the two-task toy network.
pub fn train_toy(strategy: &StrategyConfig, config: &ToyConfig, steps: usize, seed: u64) -> Result<ToyHistory> {
    strategy.validate()?;
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let (train, test, mut model) = toy_fixture(config, seed);
    let mut surgery_rng = ChaCha8Rng::seed_from_u64(strategy.seed);
    surgery_rng.set_stream(seed);
    let lr = config.learning_rate;
    let shared = model.shared_len();
    let mut log_vars = vec![0.0; 2];
    let mut tracker: Option<TaskLosses> = None;
    let mut epochs = Vec::with_capacity(steps);

    for step in 0..steps {
        let losses = guard(model.losses(&train), step)?;
        let tl = match tracker.as_mut() {
            Some(tl) => {
                tl.set(losses.to_vec())?;
                tl
            }
            None => tracker.insert(TaskLosses::new(losses.to_vec())?),
        };
        let weights = match strategy.balancing {
            Balancing::EqualNormalized => normalized_total(&losses)?.weights,
            Balancing::Dwa => dwa_weights(tl, strategy.dwa_temperature)?,
            Balancing::Uncertainty => {
                let u = uncertainty_total(&losses, &log_vars)?;
                for (s, g) in log_vars.iter_mut().zip(&u.grad_log_vars) {
                    *s -= lr * g;
                }
                u.scales
            }
        };
        let grads = model.gradients(&train);
        let scaled: Vec<Vec<f64>> =
            grads.iter().zip(&weights).map(|(g, w)| g.iter().map(|v| w * v).collect()).collect();
        let set = GradientSet::new(scaled.iter().map(|g| g[..shared].to_vec()).collect())?;
        let combined = match strategy.surgery {
            Surgery::None => set.sum(),
            Surgery::Pcgrad => pcgrad(&set, &mut surgery_rng)?,
            Surgery::Cagrad => cagrad(&set, strategy.cagrad_c)?,
            Surgery::Graddrop => graddrop(&set, &mut surgery_rng)?,
        };
        for (p, g) in model.params[..shared].iter_mut().zip(&combined) {
            *p -= lr * g;
        }
        for i in shared..model.params.len() {
            model.params[i] -= lr * (scaled[0][i] + scaled[1][i]);
        }
        epochs.push(EpochRecord { step, losses: losses.to_vec(), weights });
        tl.end_epoch();
    }

    let final_losses = guard(model.losses(&train), steps)?.to_vec();
    Ok(ToyHistory {
        strategy: strategy.clone(),
        seed,
        epochs,
        final_losses,
        test_reg_mse: model.losses(&test)[0],
        test_cls_accuracy: model.accuracy(&test),
    })
}

fn guard(losses: [f64; 2], step: usize) -> Result<[f64; 2]> {
    for &loss in &losses {
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { step, loss });
        }
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ToyConfig {
        ToyConfig { input_dim: 4, hidden_dim: 5, train_samples: 6, test_samples: 6, ..ToyConfig::default() }
    }

    #[test]
    fn gradients_match_central_differences() {
        let config = small();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for point in 0..20u64 {
            let (data, _, mut model) = toy_fixture(&config, point);
            for p in model.params.iter_mut() {
                *p += rng.random_range(-1.0..1.0);
            }
            let analytic = model.gradients(&data);
            let h = 1e-6;
            for i in 0..model.params.len() {
                let orig = model.params[i];
                model.params[i] = orig + h;
                let up = model.losses(&data);
                model.params[i] = orig - h;
                let down = model.losses(&data);
                model.params[i] = orig;
                for t in 0..2 {
                    let fd = (up[t] - down[t]) / (2.0 * h);
                    let a = analytic[t][i];
                    let err = (fd - a).abs() / a.abs().max(fd.abs()).max(1e-6);
                    assert!(err <= 1e-4, "point {point} param {i} task {t}: {a} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn zero_learning_rate_keeps_history_constant() {
        let config = ToyConfig { learning_rate: 0.0, ..small() };
        for strategy in StrategyConfig::grid() {
            let h = train_toy(&strategy, &config, 5, 1).unwrap();
            for e in &h.epochs {
                assert_eq!(e.losses, h.final_losses, "{strategy}");
            }
        }
    }

    #[test]
    fn deterministic_for_same_seed() {
        let s = StrategyConfig { surgery: Surgery::Graddrop, ..StrategyConfig::default() };
        let a = train_toy(&s, &small(), 30, 4).unwrap();
        let b = train_toy(&s, &small(), 30, 4).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let config = ToyConfig { learning_rate: 1e6, ..small() };
        let s = StrategyConfig::new(Balancing::Dwa, Surgery::None);
        assert!(matches!(train_toy(&s, &config, 50, 0), Err(Error::Diverged { .. })));
    }

    #[test]
    fn equal_normalized_halves_both_losses() {
        let h = train_toy(&StrategyConfig::default(), &ToyConfig::default(), 500, 7).unwrap();
        for r in h.loss_ratios() {
            assert!(r <= 0.5, "{:?}", h.loss_ratios());
        }
    }
}
