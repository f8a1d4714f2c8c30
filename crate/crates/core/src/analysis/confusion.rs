//! Probability that an interfering tail lands on an internal codeword
//! boundary of a victim replica, which makes the receiver stop the victim
//! early and subtract a truncated waveform.
//!
//! Interferers follow the traffic model: Poisson activations at every start
//! time with rate `lambda`, uniform codeword count, `N_rep` distinct slots
//! and uniform in-slot offsets.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::FrameConfig;

/// Subset count above which [`prob_no_hit`] samples subsets instead of
/// enumerating them.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;
const SUBSET_SAMPLES: usize = 100_000;

/// Point estimate with a standard error (zero for exact values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_err: 0.0 }
    }

    /// Binomial proportion `hits / trials` with its standard error.
    pub fn proportion(hits: u64, trials: u64) -> Self {
        let p = hits as f64 / trials as f64;
        Estimate {
            value: p,
            std_err: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

/// The replica being decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VictimReplica {
    pub tau_v: usize,
    pub iota_v: usize,
    /// 1-based slot.
    pub slot: usize,
    pub offset: usize,
}

impl VictimReplica {
    pub fn start(&self, frame: &FrameConfig) -> usize {
        self.tau_v + (self.slot - 1) * frame.l_max() + self.offset
    }
}

/// Internal codeword boundaries of a victim replica, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DangerousSet {
    instants: Vec<usize>,
}

impl DangerousSet {
    pub fn new(mut instants: Vec<usize>) -> Self {
        instants.sort_unstable();
        instants.dedup();
        DangerousSet { instants }
    }

    pub fn instants(&self) -> &[usize] {
        &self.instants
    }

    pub fn len(&self) -> usize {
        self.instants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instants.is_empty()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.instants.binary_search(&t).is_ok()
    }
}

/// Starts of codeword blocks `2..=iota_v` of the victim, where a tail would
/// end the unit after `j` blocks.
pub fn dangerous_set(victim: &VictimReplica, frame: &FrameConfig) -> DangerousSet {
    let start = victim.start(frame);
    DangerousSet::new((1..victim.iota_v).map(|j| start + frame.tail_offset(j)).collect())
}

/// Probability that a replica of an interferer active at `tau_u` with `iota`
/// codewords, placed in slot `s`, has its tail at `delta`.
pub fn p_delta(tau_u: usize, s: usize, iota: usize, delta: usize, frame: &FrameConfig) -> f64 {
    let base = tau_u + (s - 1) * frame.l_max() + frame.tail_offset(iota);
    let o_max = frame.max_offset(iota);
    match delta.checked_sub(base) {
        Some(o) if o <= o_max => 1.0 / (o_max + 1) as f64,
        _ => 0.0,
    }
}

/// Probability that a replica in slot `s` has its tail anywhere in the set.
pub fn p_dangerous(tau_u: usize, s: usize, iota: usize, set: &DangerousSet, frame: &FrameConfig) -> f64 {
    set.instants().iter().map(|&d| p_delta(tau_u, s, iota, d, frame)).sum()
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k.min(n));
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    c
}

/// Probability that none of the `N_rep` replicas of the interferer hits the
/// set, averaged over the equally likely slot subsets.
pub fn prob_no_hit(tau_u: usize, iota: usize, set: &DangerousSet, frame: &FrameConfig) -> Estimate {
    if set.is_empty() {
        return Estimate::exact(1.0);
    }
    let miss: Vec<f64> = (1..=frame.n_slot)
        .map(|s| 1.0 - p_dangerous(tau_u, s, iota, set, frame))
        .collect();
    if miss.iter().all(|&m| m == 1.0) {
        return Estimate::exact(1.0);
    }
    let subsets = binomial(frame.n_slot, frame.n_rep);
    if subsets <= ENUMERATION_LIMIT {
        let mut total = 0.0;
        for_each_subset(frame.n_slot, frame.n_rep, &mut |subset| {
            total += subset.iter().map(|&s| miss[s]).product::<f64>();
        });
        Estimate::exact(total / subsets as f64)
    } else {
        let seed = (tau_u as u64) << 8 ^ iota as u64 ^ (set.instants()[0] as u64) << 32;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..SUBSET_SAMPLES)
            .map(|_| {
                index::sample(&mut rng, frame.n_slot, frame.n_rep)
                    .into_iter()
                    .map(|s| miss[s])
                    .product()
            })
            .collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate {
            value: mean,
            std_err: (var / n).sqrt(),
        }
    }
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Probability that an interferer active at `tau_u` hits the set, averaged
/// over its uniform codeword count.
pub fn q_dangerous(tau_u: usize, set: &DangerousSet, frame: &FrameConfig) -> f64 {
    let sum: f64 = (1..=frame.iota_max)
        .map(|iota| 1.0 - prob_no_hit(tau_u, iota, set, frame).value)
        .sum();
    sum / frame.iota_max as f64
}

/// Mean number of interferers hitting the set per unit `lambda`, the sum of
/// `q_dangerous` over every admissible activation time.
pub fn hit_intensity(victim: &VictimReplica, frame: &FrameConfig) -> f64 {
    let set = dangerous_set(victim, frame);
    if set.is_empty() {
        return 0.0;
    }
    let t_act = t_act(frame);
    (0..t_act).map(|tau| q_dangerous(tau, &set, frame)).sum()
}

/// `1 - exp(-lambda * sum_tau q_D(tau))`.
pub fn tail_confusion_prob(victim: &VictimReplica, frame: &FrameConfig, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    -(-lambda * hit_intensity(victim, frame)).exp_m1()
}

fn t_act(frame: &FrameConfig) -> usize {
    frame.t_sf + 1 - frame.n_slot * frame.l_max()
}

/// Places the replicas of one interferer and reports whether any tail lands
/// in the set.
fn interferer_hits<R: Rng + ?Sized>(
    tau: usize,
    iota: usize,
    set: &DangerousSet,
    frame: &FrameConfig,
    rng: &mut R,
) -> bool {
    let base = tau + frame.tail_offset(iota);
    let o_max = frame.max_offset(iota);
    let mut hit = false;
    for s in index::sample(rng, frame.n_slot, frame.n_rep) {
        let o = rng.random_range(0..=o_max);
        hit |= set.contains(base + s * frame.l_max() + o);
    }
    hit
}

/// Direct simulation of the slot and offset draws of one interferer.
pub fn mc_no_hit<R: Rng + ?Sized>(
    tau_u: usize,
    iota: usize,
    set: &DangerousSet,
    frame: &FrameConfig,
    trials: u64,
    rng: &mut R,
) -> Estimate {
    let misses = (0..trials)
        .filter(|_| !interferer_hits(tau_u, iota, set, frame, rng))
        .count() as u64;
    Estimate::proportion(misses, trials)
}

/// Brute-force estimate of the tail-confusion probability. Each trial draws
/// a whole superframe of interferers and checks every tail against the set.
///
/// The total activation count of a trial is drawn as one Poisson variate of
/// mean `lambda * T_act` with uniform start times, which has the same law as
/// independent per-time Poisson counts.
pub fn mc_tail_confusion<R: Rng + ?Sized>(
    victim: &VictimReplica,
    frame: &FrameConfig,
    lambda: f64,
    trials: u64,
    rng: &mut R,
) -> Estimate {
    assert!(trials >= 1);
    let set = dangerous_set(victim, frame);
    if lambda == 0.0 || set.is_empty() {
        return Estimate::exact(0.0);
    }
    let t_act = t_act(frame);
    let poisson = Poisson::new(lambda * t_act as f64).expect("positive finite rate");
    let hits = (0..trials)
        .filter(|_| {
            let m = poisson.sample(rng) as usize;
            let mut hit = false;
            for _ in 0..m {
                let tau = rng.random_range(0..t_act);
                let iota = rng.random_range(1..=frame.iota_max);
                hit |= interferer_hits(tau, iota, &set, frame, rng);
            }
            hit
        })
        .count() as u64;
    Estimate::proportion(hits, trials)
}
