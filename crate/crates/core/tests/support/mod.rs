//! Deliberately naive reference implementations used as test oracles.
#![allow(dead_code)]

use std::cmp::Ordering;

pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// SPEA2 fitness straight from the definitions.
pub fn spea2_fit(objs: &[Vec<f64>]) -> Vec<f64> {
    let n = objs.len();
    let strength: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| dominates(&objs[i], &objs[j])).count() as f64)
        .collect();
    let k = ((n as f64).sqrt().floor() as usize).clamp(1, n.saturating_sub(1).max(1));
    (0..n)
        .map(|i| {
            let raw: f64 = (0..n).filter(|&j| dominates(&objs[j], &objs[i])).map(|j| strength[j]).sum();
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist(&objs[i], &objs[j])).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let sigma = d.get(k - 1).copied().unwrap_or(0.0);
            raw + 1.0 / (sigma + 2.0)
        })
        .collect()
}

/// Environmental selection of `n` members; returns sorted indices.
pub fn spea2_select(objs: &[Vec<f64>], n: usize) -> Vec<usize> {
    let fit = spea2_fit(objs);
    let mut archive: Vec<usize> = (0..objs.len()).filter(|&i| fit[i] < 1.0).collect();
    if archive.len() < n {
        let mut all: Vec<usize> = (0..objs.len()).collect();
        all.sort_by(|&a, &b| fit[a].partial_cmp(&fit[b]).unwrap().then(a.cmp(&b)));
        archive = all[..n].to_vec();
    }
    while archive.len() > n {
        let lists: Vec<Vec<f64>> = archive
            .iter()
            .map(|&i| {
                let mut d: Vec<f64> = archive.iter().filter(|&&j| j != i).map(|&j| dist(&objs[i], &objs[j])).collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                d
            })
            .collect();
        let mut worst = 0;
        for c in 1..archive.len() {
            if lex(&lists[c], &lists[worst]) == Ordering::Less {
                worst = c;
            }
        }
        archive.remove(worst);
    }
    archive.sort();
    archive
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap() {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Hypervolume by inclusion–exclusion over all subsets (small fronts only).
pub fn hv_inclusion_exclusion(front: &[Vec<f64>], r: &[f64]) -> f64 {
    let n = front.len();
    assert!(n <= 16);
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let mut vol = 1.0;
        for d in 0..r.len() {
            let corner = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| front[i][d]).fold(f64::NEG_INFINITY, f64::max);
            vol *= (r[d] - corner).max(0.0);
        }
        if mask.count_ones() % 2 == 1 {
            total += vol;
        } else {
            total -= vol;
        }
    }
    total
}

pub fn igd_direct(reference: &[Vec<f64>], front: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    for r in reference {
        let mut best = f64::INFINITY;
        for f in front {
            let d = dist(r, f);
            if d < best {
                best = d;
            }
        }
        sum += best;
    }
    sum / reference.len() as f64
}

/// Two-sided exact rank-sum p-value by enumerating every split of the
/// pooled sample.
pub fn rank_sum_exact(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let ranks: Vec<f64> = pooled
        .iter()
        .map(|&v| {
            let below = pooled.iter().filter(|&&w| w < v).count() as f64;
            let equal = pooled.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = ranks[..a.len()].iter().sum();
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        if w <= observed + 1e-9 {
            le += 1;
        }
        if w >= observed - 1e-9 {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

use gmoea::gan::{GanConfig, GanPair};
use gmoea::nn::{disc_loss_and_grad, gen_loss_and_grad, Activation, GenLoss, Gradients, MlpParams};
use ndarray::Array2;
use rand::Rng;

/// Random MLP with at most three layers and widths up to 8, random biases.
pub fn random_mlp<R: Rng>(input: usize, output: usize, rng: &mut R) -> MlpParams {
    let depth = rng.random_range(1..=3);
    let mut dims = vec![input];
    for _ in 1..depth {
        dims.push(rng.random_range(1..=8));
    }
    dims.push(output);
    let hidden = if rng.random_bool(0.5) { Activation::Relu } else { Activation::Sigmoid };
    let mut net = MlpParams::init(&dims, hidden, rng).unwrap();
    for l in &mut net.layers {
        l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
    }
    net
}

pub fn random_batch<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random::<f64>())
}

fn shifted(net: &MlpParams, index: usize, delta: f64) -> MlpParams {
    let mut out = net.clone();
    let mut k = index;
    for l in &mut out.layers {
        if k < l.weights.len() {
            let cols = l.weights.ncols();
            l.weights[[k / cols, k % cols]] += delta;
            return out;
        }
        k -= l.weights.len();
        if k < l.bias.len() {
            l.bias[k] += delta;
            return out;
        }
        k -= l.bias.len();
    }
    panic!("parameter index out of range");
}

/// Central differences of `loss` with respect to every parameter of `net`.
pub fn numeric_gradient(net: &MlpParams, h: f64, loss: impl Fn(&MlpParams) -> f64) -> Vec<f64> {
    (0..net.n_params())
        .map(|i| (loss(&shifted(net, i, h)) - loss(&shifted(net, i, -h))) / (2.0 * h))
        .collect()
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

fn column(net: &MlpParams, x: &Array2<f64>) -> Vec<f64> {
    net.predict(x.view()).unwrap().column(0).to_vec()
}

/// Relative error of backprop against finite differences for the
/// three-term discriminator loss on a random network and batch.
pub fn discriminator_gradient_error<R: Rng>(rng: &mut R, h: f64) -> f64 {
    let d = rng.random_range(1..=8);
    let net = random_mlp(d, 1, rng);
    let groups: Vec<Array2<f64>> = (0..3).map(|_| random_batch(rng.random_range(1..=6), d, rng)).collect();
    let loss = |p: &MlpParams| disc_loss_and_grad(&column(p, &groups[0]), &column(p, &groups[1]), &column(p, &groups[2])).0;

    let forwards: Vec<_> = groups.iter().map(|x| net.forward(x.view()).unwrap()).collect();
    let probs: Vec<Vec<f64>> = forwards.iter().map(|(o, _)| o.column(0).to_vec()).collect();
    let (_, g) = disc_loss_and_grad(&probs[0], &probs[1], &probs[2]);
    let mut total = Gradients::zeros_like(&net);
    for ((_, cache), g) in forwards.iter().zip([g.real, g.fake, g.generated]) {
        let d_out = Array2::from_shape_vec((g.len(), 1), g).unwrap();
        total.add_assign(&net.backward(cache, d_out.view()).unwrap().0);
    }
    relative_error(&total.flatten(), &numeric_gradient(&net, h, loss))
}

/// Relative error of the generator gradient, backpropagated through a fixed
/// discriminator, against finite differences.
pub fn generator_gradient_error<R: Rng>(rng: &mut R, mode: GenLoss, h: f64) -> f64 {
    let d = rng.random_range(1..=8);
    let gen = random_mlp(d, d, rng);
    let disc = random_mlp(d, 1, rng);
    let z = random_batch(rng.random_range(1..=6), d, rng);
    let loss = |g: &MlpParams| {
        let x = g.predict(z.view()).unwrap();
        gen_loss_and_grad(&column(&disc, &x), mode).0
    };

    let (x, g_cache) = gen.forward(z.view()).unwrap();
    let (probs, d_cache) = disc.forward(x.view()).unwrap();
    let (_, grad) = gen_loss_and_grad(&probs.column(0).to_vec(), mode);
    let d_out = Array2::from_shape_vec((grad.len(), 1), grad).unwrap();
    let (_, d_x) = disc.backward(&d_cache, d_out.view()).unwrap();
    let (grads, _) = gen.backward(&g_cache, d_x.view()).unwrap();
    relative_error(&grads.flatten(), &numeric_gradient(&gen, h, loss))
}

/// Whether one discriminator Adam step lowers the discriminator loss on the
/// batch it was computed from.
pub fn discriminator_step_lowers_loss<R: Rng>(rng: &mut R) -> bool {
    let d = rng.random_range(2..=10);
    let mut gan = GanPair::new(d, &GanConfig::default(), rng).unwrap();
    let real = random_batch(16, d, rng).mapv(|v| 0.5 * v);
    let fake = random_batch(16, d, rng).mapv(|v| 0.5 + 0.5 * v);
    let z = random_batch(32, d, rng);
    let before = gan.discriminator_step(real.view(), fake.view(), z.view()).unwrap();
    let after = gan.discriminator_loss(real.view(), fake.view(), z.view()).unwrap();
    after < before
}
