//! Unrolled WMMSE as a ReLU/binary-unit network.
//!
//! One iteration maps `v^t` to `v^(t+1)` through
//!
//! ```text
//! a_k = h_kk^2 v_k / (sum_{j != k} h_kj^2 v_j^2 + s2)
//! b_k = a_k v_k   / (sum_j      h_kj^2 v_j^2 + s2)
//! v_k = [alpha_k a_k / sum_j alpha_j b_j h_jk^2]_0^sqrt(P)
//! ```
//!
//! with every product and quotient replaced by a binary-expansion net. Squared
//! gains are computed once up front. The bits of `a_k` and `b_k` produced by their
//! divisions are reused for the following products, which are then exact.

use rand::Rng;

use super::arith::{leading_exponent, BitExpansionSpec, Bits};
use super::graph::{GraphBuilder, GraphCounts, Lin, UnitGraph};
use crate::error::{check_dim, Error, Result};
use crate::instance::ProblemInstance;
use crate::rng;
use crate::wmmse::{wmmse_iterates, Init};

/// Slack applied to nominal `Y_max` bounds when sizing gating constants.
pub const GATE_SLACK: f64 = 2.0;

/// Channels and iterates over which the approximation is certified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleSet {
    pub num_users: usize,
    pub h_min: f64,
    pub h_max: f64,
    /// Lower bound on `sum_k v_k^t` for every iterate.
    pub v_min: f64,
    pub p_max: f64,
    /// Noise standard deviation; every receiver sees noise power `sigma^2`.
    pub sigma: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl AdmissibleSet {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if self.num_users == 0 {
            return Err(Error::invalid("admissible set needs K >= 1"));
        }
        if !(pos(self.h_min) && self.h_min <= self.h_max && self.h_max.is_finite()) {
            return Err(Error::invalid("need 0 < h_min <= h_max"));
        }
        if !(pos(self.v_min) && pos(self.p_max) && pos(self.sigma)) {
            return Err(Error::invalid("v_min, p_max and sigma must be positive"));
        }
        if !(pos(self.alpha_min) && self.alpha_min <= self.alpha_max && self.alpha_max.is_finite()) {
            return Err(Error::invalid("need 0 < alpha_min <= alpha_max"));
        }
        Ok(())
    }

    pub fn noise_power(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// IC instance with these gains (receiver-major), the set's noise and budget.
    pub fn instance(&self, gains: Vec<f64>, weights: Vec<f64>) -> Result<ProblemInstance> {
        let k = self.num_users;
        ProblemInstance::ic(k, gains, self.noise_power(), self.p_max)?.with_weights(weights)
    }

    /// Whether all gains lie in `[h_min, h_max]` and every iterate `v^0..v^T`
    /// keeps `sum_k v_k >= v_min`.
    pub fn admits(&self, inst: &ProblemInstance, iterations: usize, init: &Init) -> Result<bool> {
        check_dim(self.num_users, inst.num_users())?;
        if !inst.gains().iter().all(|&h| h >= self.h_min && h <= self.h_max) {
            return Ok(false);
        }
        let iterates = wmmse_iterates(inst, init, iterations)?;
        Ok(iterates.iter().all(|v| v.iter().sum::<f64>() >= self.v_min))
    }

    /// `count` admissible instances with gains uniform in `[h_min, h_max]`,
    /// found by rejection; sample `i` uses stream `(seed, i)` with redraws.
    pub fn sample(&self, count: usize, iterations: usize, weights: &[f64], seed: u64) -> Result<Vec<ProblemInstance>> {
        self.validate()?;
        check_dim(self.num_users, weights.len())?;
        let k = self.num_users;
        (0..count)
            .map(|i| {
                let mut r = rng::substream(seed, i as u64);
                for _ in 0..10_000 {
                    let gains = (0..k * k).map(|_| r.random_range(self.h_min..=self.h_max)).collect();
                    let inst = self.instance(gains, weights.to_vec())?;
                    if self.admits(&inst, iterations, &Init::FullPower)? {
                        return Ok(inst);
                    }
                }
                Err(Error::invalid("admissible set is (nearly) empty: v_min too large"))
            })
            .collect()
    }
}

/// Per-iteration error amplification factor `G`.
///
/// The noise of an unspecified receiver `l` is taken as the common `sigma`, and
/// the user-specific weights `alpha_k`, `alpha_j` as `alpha_max` (worst case).
pub fn wmmse_error_amplifier(adm: &AdmissibleSet) -> Result<f64> {
    adm.validate()?;
    let k = adm.num_users as f64;
    let (hmin, hmax, p, s) = (adm.h_min, adm.h_max, adm.p_max, adm.sigma);
    let s2 = s * s;
    let hmax2 = hmax * hmax;
    let sp = p.sqrt();
    let pmin = adm.v_min;
    let (amin, amax) = (adm.alpha_min, adm.alpha_max);

    let d_minus = (k - 1.0) * hmax2 * p + s2;
    let d_full = k * hmax2 * p + s2;
    let b_err =
        12.0 * (s2 + hmax2 * sp) / s2.powi(2) * (s2.powi(2) + hmax2 * p) / s2.powi(4) * (k - 1.0) * hmax2 * sp + 1.0;
    let lead = 1.0 / ((k * amin).powi(2) * s2 * hmin.powi(8) * pmin * pmin);
    let inner = k * amin * s2 * hmin.powi(4) * pmin + amax * hmax2 * sp * d_minus * d_full;
    let g = lead * inner * (k * amax * d_minus * d_full) * hmax2 * b_err + 1.0;
    if !g.is_finite() {
        return Err(Error::invalid("error amplifier overflows; admissible set too wide"));
    }
    Ok(g)
}

/// Smallest `n` with `n >= T log2 G + log2(1 / eps)`, at least 1.
pub fn plan_bits(g: f64, iterations: usize, eps: f64) -> Result<u32> {
    if !(g >= 1.0 && eps > 0.0) {
        return Err(Error::invalid("need G >= 1 and eps > 0"));
    }
    let n = (iterations as f64 * g.log2() + (1.0 / eps).log2()).ceil();
    Ok(n.max(1.0) as u32)
}

/// Closed-form upper estimate of the number of bits (binary units) used:
/// `TK(6 ceil(log 1/sigma) + 4 ceil(log H_max) + (3K+4) ceil(log P / 2) + (2K+3)(n+1))`,
/// with each ceiling clamped at 0 as for the leading exponents.
pub fn bit_count_estimate(adm: &AdmissibleSet, iterations: usize, n: u32) -> f64 {
    let k = adm.num_users as f64;
    let c = |x: f64| x.log2().ceil().max(0.0);
    iterations as f64
        * k
        * (6.0 * c(1.0 / adm.sigma)
            + 4.0 * c(adm.h_max)
            + (3.0 * k + 4.0) * c(adm.p_max.sqrt())
            + (2.0 * k + 3.0) * (n as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetInit {
    /// `v^0 = sqrt(P_max)`, built into the graph; inputs are the gains only.
    Fixed,
    /// `v^0` supplied as `K` extra inputs after the gains.
    Input,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseNetConfig {
    pub adm: AdmissibleSet,
    pub iterations: usize,
    pub n_bits: u32,
    pub init: NetInit,
    /// User weights `alpha_k`, each within `[alpha_min, alpha_max]`.
    pub weights: Vec<f64>,
    /// Target accuracy used only to flag an insufficient bit budget.
    pub target_eps: f64,
}

impl WmmseNetConfig {
    pub fn new(adm: AdmissibleSet, iterations: usize, n_bits: u32) -> Self {
        Self { adm, iterations, n_bits, init: NetInit::Fixed, weights: vec![1.0; adm.num_users], target_eps: 1e-2 }
    }

    pub fn validate(&self) -> Result<()> {
        self.adm.validate()?;
        check_dim(self.adm.num_users, self.weights.len())?;
        if self.n_bits == 0 {
            return Err(Error::invalid("n_bits must be at least 1"));
        }
        if !self.weights.iter().all(|&a| a >= self.adm.alpha_min && a <= self.adm.alpha_max) {
            return Err(Error::invalid("weights must lie in [alpha_min, alpha_max]"));
        }
        if !(self.target_eps > 0.0) {
            return Err(Error::invalid("target eps must be positive"));
        }
        Ok(())
    }
}

/// Leading exponents of every expansion in the net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Exponents {
    h: i32,
    v: i32,
    q: i32,
    a: i32,
    b: i32,
    vdiv: i32,
}

/// Value bounds that size the expansions and gates.
#[derive(Debug, Clone, Copy)]
struct Ranges {
    sp: f64,
    hsq: f64,
    z_a: f64,
    z_b: f64,
    d_minus: f64,
    d_full: f64,
}

fn ranges(adm: &AdmissibleSet) -> Ranges {
    let k = adm.num_users as f64;
    let hsq = adm.h_max * adm.h_max;
    let s2 = adm.noise_power();
    let sp = adm.p_max.sqrt();
    Ranges {
        sp,
        hsq,
        z_a: hsq * sp / s2,
        z_b: hsq * adm.p_max / (s2 * s2),
        d_minus: (k - 1.0) * hsq * adm.p_max + s2,
        d_full: k * hsq * adm.p_max + s2,
    }
}

fn exponents(adm: &AdmissibleSet) -> Exponents {
    let r = ranges(adm);
    Exponents {
        h: leading_exponent(adm.h_max),
        v: leading_exponent(r.sp),
        q: leading_exponent(adm.p_max),
        a: leading_exponent(r.z_a),
        b: leading_exponent(r.z_b),
        vdiv: leading_exponent(r.sp),
    }
}

/// Closed-form unit and layer counts of [`build_wmmse_net`], from `(m, n, K, T)` alone.
pub fn wmmse_net_counts(cfg: &WmmseNetConfig) -> GraphCounts {
    let k = cfg.adm.num_users;
    let kk = k * k;
    let e = exponents(&cfg.adm);
    let bits = |m: i32| (m + cfg.n_bits as i32 + 1) as usize;
    let (bh, bv, bq, ba, bb, bvd) = (bits(e.h), bits(e.v), bits(e.q), bits(e.a), bits(e.b), bits(e.vdiv));
    // an expansion of B bits on operands of depth d ends at d + 2B - 1
    let last = |d: usize, b: usize| d + 2 * b - 1;

    let mut c = GraphCounts { output: k, ..Default::default() };
    let mut d_h = 0;
    if cfg.iterations > 0 {
        c.binary += kk * bh;
        c.relu += kk * (bh - 1) + kk * bh;
        d_h = last(0, bh) + 1;
    }
    // None while v is the built-in constant initialization
    let mut d_v: Option<usize> = match cfg.init {
        NetInit::Fixed => None,
        NetInit::Input => Some(0),
    };
    for _ in 0..cfg.iterations {
        let (d_numa, d_r) = match d_v {
            Some(dv) => {
                c.binary += k * bv + k * bq;
                c.relu += k * (bv - 1) + 2 * k * bv + k * (bq - 1) + kk * bq;
                let l_v = last(dv, bv);
                let d_q = l_v + 1;
                let l_q = last(d_q, bq);
                (l_v.max(d_h) + 1, l_q.max(d_h) + 1)
            }
            None => (d_h, d_h),
        };
        let d_dminus = if k > 1 { d_r } else { 0 };
        let l_a = last(d_numa.max(d_dminus), ba);
        c.binary += k * ba;
        c.relu += k * (ba - 1);
        let d_numb = match d_v {
            Some(dv) => {
                c.relu += k * ba;
                l_a.max(dv) + 1
            }
            None => l_a,
        };
        let l_b = last(d_numb.max(d_r), bb);
        c.binary += k * bb;
        c.relu += k * (bb - 1) + kk * bb;
        let d_s = l_b.max(d_h) + 1;
        let l_vd = last(l_a.max(d_s), bvd);
        c.binary += k * bvd;
        c.relu += k * (bvd - 1) + 2 * k;
        d_v = Some(l_vd + 2);
    }
    c.layers = match d_v {
        Some(dv) => {
            c.binary += k * bv;
            c.relu += k * (bv - 1) + k * bv;
            last(dv, bv) + 2
        }
        None => 1,
    };
    c
}

/// A constructed unrolled-WMMSE network and its error budget.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseNet {
    pub graph: UnitGraph,
    pub config: WmmseNetConfig,
    /// Per-iteration amplification factor `G`.
    pub amplifier: f64,
    /// `G^T / 2^n`: certified `|v_k^T - v~_k^T|` on the admissible set.
    pub certified_bound: f64,
    /// Bits required for `target_eps` by the planning relation.
    pub planned_bits: u32,
    pub expected_counts: GraphCounts,
}

impl WmmseNet {
    /// Approximate `(v_k^T)^2` for one instance (plus `v^0` when it is an input).
    pub fn eval(&self, inst: &ProblemInstance, v0: Option<&[f64]>) -> Result<Vec<f64>> {
        check_dim(self.config.adm.num_users, inst.num_users())?;
        let mut x = inst.gains().to_vec();
        match (self.config.init, v0) {
            (NetInit::Input, Some(v)) => x.extend_from_slice(v),
            (NetInit::Fixed, None) => {}
            _ => return Err(Error::invalid("v0 must be given exactly when the net takes it as input")),
        }
        self.graph.eval(&x)
    }
}

fn mul_with(b: &mut GraphBuilder, bits: Option<&Bits>, x: &Lin, y: &Lin, y_max: f64) -> Lin {
    match bits {
        Some(bits) => b.mul_bits(bits, y, y_max),
        None => y.scale(x.constant),
    }
}

pub fn build_wmmse_net(cfg: &WmmseNetConfig) -> Result<WmmseNet> {
    cfg.validate()?;
    let adm = &cfg.adm;
    let (k, n, t_max) = (adm.num_users, cfg.n_bits, cfg.iterations);
    let r = ranges(adm);
    let s2 = adm.noise_power();
    let one = Lin::constant(1.0);
    let spec = |z: f64, y: f64| BitExpansionSpec::new(z, y, n);

    let mut b = GraphBuilder::new();
    let h: Vec<Lin> = (0..k * k).map(|_| b.input()).collect();
    let mut v: Vec<Lin> = match cfg.init {
        NetInit::Fixed => vec![Lin::constant(r.sp); k],
        NetInit::Input => (0..k).map(|_| b.input()).collect(),
    };

    let mut hsq = Vec::new();
    if t_max > 0 {
        for hk in &h {
            let bits = b.expand(hk, &one, &spec(adm.h_max, 1.0)?);
            hsq.push(b.mul_bits(&bits, hk, adm.h_max * GATE_SLACK));
        }
    }
    let g = |kk: usize, j: usize| kk * k + j;

    for _ in 0..t_max {
        let mut vbits: Vec<Option<Bits>> = Vec::with_capacity(k);
        for vj in &v {
            vbits.push(if vj.is_constant() { None } else { Some(b.expand(vj, &one, &spec(r.sp, 1.0)?)) });
        }
        let q: Vec<Lin> =
            (0..k).map(|j| mul_with(&mut b, vbits[j].as_ref(), &v[j], &v[j], r.sp * GATE_SLACK)).collect();
        let num_a: Vec<Lin> = (0..k)
            .map(|kk| mul_with(&mut b, vbits[kk].as_ref(), &v[kk], &hsq[g(kk, kk)], r.hsq * GATE_SLACK))
            .collect();
        let mut qbits: Vec<Option<Bits>> = Vec::with_capacity(k);
        for qj in &q {
            qbits.push(if qj.is_constant() { None } else { Some(b.expand(qj, &one, &spec(adm.p_max, 1.0)?)) });
        }
        let mut d_minus = Vec::with_capacity(k);
        let mut d_full = Vec::with_capacity(k);
        for kk in 0..k {
            let rk: Vec<Lin> = (0..k)
                .map(|j| mul_with(&mut b, qbits[j].as_ref(), &q[j], &hsq[g(kk, j)], r.hsq * GATE_SLACK))
                .collect();
            let others = Lin::sum(rk.iter().enumerate().filter(|(j, _)| *j != kk).map(|(_, x)| x)).offset(s2);
            d_full.push(others.plus(&rk[kk]));
            d_minus.push(others);
        }

        let mut a_bits = Vec::with_capacity(k);
        let mut b_bits = Vec::with_capacity(k);
        for kk in 0..k {
            let ab = b.div(&num_a[kk], &d_minus[kk], r.z_a, r.d_minus * GATE_SLACK, n)?;
            a_bits.push(ab);
        }
        for kk in 0..k {
            let num_b = if v[kk].is_constant() {
                a_bits[kk].value().scale(v[kk].constant)
            } else {
                b.mul_bits(&a_bits[kk], &v[kk], r.sp * GATE_SLACK)
            };
            b_bits.push(b.div(&num_b, &d_full[kk], r.z_b, r.d_full * GATE_SLACK, n)?);
        }
        let b_cap = 2f64.powi(b_bits[0].leading_exponent() + 1);
        let den_max = adm.alpha_max * k as f64 * b_cap * r.hsq * GATE_SLACK;
        let mut next = Vec::with_capacity(k);
        for kk in 0..k {
            let mut den = Lin::default();
            for j in 0..k {
                let s = b.mul_bits(&b_bits[j], &hsq[g(j, kk)], r.hsq * GATE_SLACK);
                den = den.add_scaled(&s, cfg.weights[j]);
            }
            let num = a_bits[kk].value().scale(cfg.weights[kk]);
            let quotient = b.div(&num, &den, r.sp, den_max, n)?;
            next.push(b.project(&quotient.value(), r.sp));
        }
        v = next;
    }

    for vk in &v {
        let sq = if vk.is_constant() {
            Lin::constant(vk.constant * vk.constant)
        } else {
            let bits = b.expand(vk, &one, &spec(r.sp, 1.0)?);
            b.mul_bits(&bits, vk, r.sp * GATE_SLACK)
        };
        b.output(&sq);
    }

    let amplifier = wmmse_error_amplifier(adm)?;
    let planned_bits = plan_bits(amplifier, t_max, cfg.target_eps)?;
    let certified_bound = (t_max as f64 * amplifier.log2() - n as f64).exp2();
    b.meta("op", "wmmse");
    b.meta("n", n);
    b.meta("iterations", t_max);
    b.meta("init", format!("{:?}", cfg.init).to_lowercase());
    b.meta("amplifier_g", amplifier);
    b.meta("bound", certified_bound);
    b.meta("planned_bits", planned_bits);
    b.meta("target_eps", cfg.target_eps);
    b.meta("bit_count_estimate", bit_count_estimate(adm, t_max, n));
    b.meta("gate_slack", GATE_SLACK);
    b.meta("adm.num_users", adm.num_users);
    b.meta("adm.h_min", adm.h_min);
    b.meta("adm.h_max", adm.h_max);
    b.meta("adm.v_min", adm.v_min);
    b.meta("adm.p_max", adm.p_max);
    b.meta("adm.sigma", adm.sigma);
    b.meta("adm.alpha_min", adm.alpha_min);
    b.meta("adm.alpha_max", adm.alpha_max);
    if n < planned_bits {
        b.warn(format!(
            "n_bits = {n} is below the {planned_bits} bits the amplifier G = {amplifier:.3e} requires for eps = {}",
            cfg.target_eps
        ));
    }
    let graph = b.finish();
    let expected_counts = wmmse_net_counts(cfg);
    Ok(WmmseNet { graph, config: cfg.clone(), amplifier, certified_bound, planned_bits, expected_counts })
}
