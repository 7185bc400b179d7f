//! Binary-expansion networks for `x * y` and `x / y`.
//!
//! Bits are extracted most-significant first. With `r^(m) = x`, bit `i` is
//! `Binary[r^(i) - 2^i y >= 0]` and the remainder is
//! `r^(i) = r^(i+1) - max(2^(i+1) y + M (bit_(i+1) - 1), 0)`, where the big-M
//! term switches the subtraction off when the previous bit is 0. Each bit after
//! the first costs one gate ReLU and one binary unit. A product reuses the bits of
//! `x` through `sum_i max(2^i y + C (x_i - 1), 0)` with `C >= 2^m Y_max`.

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use super::graph::{GraphBuilder, GraphCounts, Lin, UnitGraph};
use crate::error::{Error, Result};

/// `max(0, ceil(log2 bound))`: exponent of the leading bit needed for values up to `bound`.
pub fn leading_exponent(bound: f64) -> i32 {
    bound.log2().ceil().max(0.0) as i32
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitExpansionSpec {
    /// Exponent of the leading bit.
    pub m: i32,
    /// Number of fractional bits.
    pub n: u32,
    /// Gating constant of the remainder recursion.
    pub big_m: f64,
}

impl BitExpansionSpec {
    /// Spec for quotients up to `z_max` with denominators up to `y_max`; `M = 2^(m+1) Y_max`.
    pub fn new(z_max: f64, y_max: f64, n: u32) -> Result<Self> {
        if !(z_max > 0.0 && y_max > 0.0 && z_max.is_finite() && y_max.is_finite()) {
            return Err(Error::invalid("expansion bounds must be positive and finite"));
        }
        if n == 0 {
            return Err(Error::invalid("at least one fractional bit is required"));
        }
        let m = leading_exponent(z_max);
        Ok(Self { m, n, big_m: 2f64.powi(m + 1) * y_max })
    }

    pub fn num_bits(&self) -> usize {
        (self.m + self.n as i32 + 1) as usize
    }

    /// `M >= 2^m Y_max` is what the gating needs.
    pub fn validate(&self, y_max: f64) -> Result<()> {
        if self.m < 0 || self.n == 0 || !(self.big_m >= 2f64.powi(self.m) * y_max) {
            return Err(Error::invalid(format!("inadmissible expansion {self:?} for Y_max = {y_max}")));
        }
        Ok(())
    }

    /// Largest value the expansion can represent: `2^(m+1) - 2^-n`.
    pub fn capacity(&self) -> f64 {
        2f64.powi(self.m + 1) - 2f64.powi(-(self.n as i32))
    }
}

/// Binary digits `(exponent, bit unit)`, most significant first.
#[derive(Debug, Clone, PartialEq)]
pub struct Bits {
    pub digits: Vec<(i32, Lin)>,
}

impl Bits {
    /// `sum_i 2^i bit_i`.
    pub fn value(&self) -> Lin {
        self.digits.iter().fold(Lin::default(), |acc, (i, b)| acc.add_scaled(b, 2f64.powi(*i)))
    }

    pub fn leading_exponent(&self) -> i32 {
        self.digits[0].0
    }
}

impl GraphBuilder {
    /// Bits of `x / y` per `spec`. `y` may be a constant (`y = 1` extracts the bits of `x`).
    pub fn expand(&mut self, x: &Lin, y: &Lin, spec: &BitExpansionSpec) -> Bits {
        let lo = -(spec.n as i32);
        let mut removed = Lin::default();
        let mut digits: Vec<(i32, Lin)> = Vec::with_capacity(spec.num_bits());
        for i in (lo..=spec.m).rev() {
            if let Some((_, prev)) = digits.last() {
                let gate = Lin::constant(-spec.big_m).add_scaled(prev, spec.big_m).add_scaled(y, 2f64.powi(i + 1));
                let r = self.relu(&gate);
                removed = removed.plus(&r);
            }
            let test = x.minus(&removed).add_scaled(y, -2f64.powi(i));
            let bit = self.binary(&test);
            digits.push((i, bit));
        }
        Bits { digits }
    }

    /// `x~ * y` from the bits of `x` via gated ReLUs; `y` must lie in `[0, y_max]`.
    /// A constant `y` makes the product affine in the bits and adds no units.
    pub fn mul_bits(&mut self, bits: &Bits, y: &Lin, y_max: f64) -> Lin {
        if y.is_constant() {
            return bits.value().scale(y.constant);
        }
        let gate = 2f64.powi(bits.leading_exponent() + y_max.log2().ceil() as i32);
        let mut acc = Lin::default();
        for (i, b) in &bits.digits {
            let pre = Lin::constant(-gate).add_scaled(b, gate).add_scaled(y, 2f64.powi(*i));
            acc = acc.plus(&self.relu(&pre));
        }
        acc
    }

    /// `x * y` with `x` in `[0, x_max]` expanded to `n` fractional bits.
    /// Products with a constant factor are affine and built without units.
    pub fn mul(&mut self, x: &Lin, x_max: f64, y: &Lin, y_max: f64, n: u32) -> Result<Lin> {
        if x.is_constant() {
            return Ok(y.scale(x.constant));
        }
        if y.is_constant() {
            return Ok(x.scale(y.constant));
        }
        let bits = self.expand(x, &Lin::constant(1.0), &BitExpansionSpec::new(x_max, 1.0, n)?);
        Ok(self.mul_bits(&bits, y, y_max))
    }

    /// Bits of `x / y` for quotients up to `z_max` and `0 < y <= y_max`.
    /// Quotients beyond the capacity saturate to all-ones.
    pub fn div(&mut self, x: &Lin, y: &Lin, z_max: f64, y_max: f64, n: u32) -> Result<Bits> {
        Ok(self.expand(x, y, &BitExpansionSpec::new(z_max, y_max, n)?))
    }

    /// `[I]_0^c = c - max(c - max(I, 0), 0)` with two ReLUs.
    pub fn project(&mut self, input: &Lin, c: f64) -> Lin {
        let r1 = self.relu(input);
        let r2 = self.relu(&Lin::constant(c).minus(&r1));
        Lin::constant(c).minus(&r2)
    }
}

/// Input region on which a constructed net's certified bound holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `0 <= x <= x_max`, `0 <= y <= y_max`.
    Mul { x_max: f64, y_max: f64 },
    /// `x >= 0`, `0 < y <= y_max`, `x / y <= z_max`.
    Div { z_max: f64, y_max: f64 },
}

impl Domain {
    /// `None` inside the domain, else a description of the violated condition.
    pub fn violation(&self, x: f64, y: f64) -> Option<String> {
        match *self {
            Domain::Mul { x_max, y_max } => {
                if !(0.0..=x_max).contains(&x) {
                    Some(format!("x = {x} outside [0, {x_max}]"))
                } else if !(0.0..=y_max).contains(&y) {
                    Some(format!("y = {y} outside [0, {y_max}]"))
                } else {
                    None
                }
            }
            Domain::Div { z_max, y_max } => {
                if !(x >= 0.0) {
                    Some(format!("x = {x} is negative"))
                } else if !(y > 0.0 && y <= y_max) {
                    Some(format!("y = {y} outside (0, {y_max}]"))
                } else if x / y > z_max {
                    Some(format!("x / y = {} exceeds {z_max}", x / y))
                } else {
                    None
                }
            }
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.violation(x, y).is_none()
    }
}

/// A two-input arithmetic net with its certified error bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ArithNet {
    pub graph: UnitGraph,
    pub spec: BitExpansionSpec,
    pub domain: Domain,
    /// Certified `|truth - output|` on the domain.
    pub bound: f64,
}

impl ArithNet {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.graph.eval(&[x, y]).expect("two inputs")[0]
    }

    pub fn truth(&self, x: f64, y: f64) -> f64 {
        match self.domain {
            Domain::Mul { .. } => x * y,
            Domain::Div { .. } => x / y,
        }
    }

    /// `|truth - output|` computed in exact rational arithmetic on the f64
    /// inputs and output, and whether it is within [`ArithNet::bound`].
    pub fn exact_error(&self, x: f64, y: f64) -> Result<(f64, bool)> {
        let q = |v: f64| BigRational::from_float(v).ok_or_else(|| Error::invalid(format!("{v} is not finite")));
        let (qx, qy) = (q(x)?, q(y)?);
        let truth = match self.domain {
            Domain::Mul { .. } => &qx * &qy,
            Domain::Div { .. } if qy.is_zero() => return Err(Error::Domain("division by y = 0".into())),
            Domain::Div { .. } => &qx / &qy,
        };
        let err = (q(self.eval(x, y))? - truth).abs();
        let ok = err <= q(self.bound)?;
        Ok((err.to_f64().unwrap_or(f64::INFINITY), ok))
    }
}

fn record(b: &mut GraphBuilder, op: &str, spec: &BitExpansionSpec, bound: f64) {
    b.meta("op", op);
    b.meta("m", spec.m);
    b.meta("n", spec.n);
    b.meta("big_m", spec.big_m);
    b.meta("bound", bound);
}

/// Network with `|xy - NET(x, y)| <= y_max / 2^n` on `[0, x_max] x [0, y_max]`.
pub fn build_mul_net(x_max: f64, y_max: f64, n: u32) -> Result<ArithNet> {
    if !(x_max > 0.0 && y_max > 0.0) {
        return Err(Error::invalid("mul-net bounds must be positive"));
    }
    let spec = BitExpansionSpec::new(x_max, 1.0, n)?;
    let bound = y_max / 2f64.powi(n as i32);
    let mut b = GraphBuilder::new();
    let x = b.input();
    let y = b.input();
    let bits = b.expand(&x, &Lin::constant(1.0), &spec);
    let out = b.mul_bits(&bits, &y, y_max);
    b.output(&out);
    record(&mut b, "mul", &spec, bound);
    b.meta("x_max", x_max);
    b.meta("y_max", y_max);
    b.meta("gate", 2f64.powi(spec.m + y_max.log2().ceil() as i32));
    Ok(ArithNet { graph: b.finish(), spec, domain: Domain::Mul { x_max, y_max }, bound })
}

/// Network with `|x/y - NET(x, y)| <= 2^-n` on `{x >= 0, 0 < y <= y_max, x/y <= z_max}`.
pub fn build_div_net(z_max: f64, y_max: f64, n: u32) -> Result<ArithNet> {
    let spec = BitExpansionSpec::new(z_max, y_max, n)?;
    let bound = 2f64.powi(-(n as i32));
    let mut b = GraphBuilder::new();
    let x = b.input();
    let y = b.input();
    let bits = b.expand(&x, &y, &spec);
    b.output(&bits.value());
    record(&mut b, "div", &spec, bound);
    b.meta("z_max", z_max);
    b.meta("y_max", y_max);
    Ok(ArithNet { graph: b.finish(), spec, domain: Domain::Div { z_max, y_max }, bound })
}

/// Closed-form size of [`build_div_net`]: `m+n+1` binary units, `m+n` ReLUs,
/// `2(m+n+1)` layers including the read-out.
pub fn div_net_counts(m: i32, n: u32) -> GraphCounts {
    let bits = (m + n as i32 + 1) as usize;
    GraphCounts { relu: bits - 1, binary: bits, affine: 0, output: 1, layers: 2 * bits }
}

/// Closed-form size of [`build_mul_net`]: the division counts plus `m+n+1`
/// ReLUs and one layer.
pub fn mul_net_counts(m: i32, n: u32) -> GraphCounts {
    let d = div_net_counts(m, n);
    GraphCounts { relu: d.relu + d.binary, layers: d.layers + 1, ..d }
}

/// `|x/y - (x +- e1)/(y +- e2)| <= (z_max + 1) / y_min * max(e1, e2)`.
pub fn div_error_bound(eps1: f64, eps2: f64, y_min: f64, z_max: f64) -> Result<f64> {
    if !(y_min > 0.0) {
        return Err(Error::invalid("Y_min must be positive"));
    }
    if !(eps1 >= 0.0 && eps2 >= 0.0 && z_max >= 0.0) {
        return Err(Error::invalid("perturbations and Z_max must be nonnegative"));
    }
    Ok((z_max + 1.0) / y_min * eps1.max(eps2))
}

/// `|xy - (x +- e1)(y +- e2)| <= 3 max(x_max, y_max) max(e1, e2)`.
pub fn mul_error_bound(eps1: f64, eps2: f64, x_max: f64, y_max: f64) -> Result<f64> {
    if !(eps1 >= 0.0 && eps2 >= 0.0 && x_max >= 0.0 && y_max >= 0.0) {
        return Err(Error::invalid("mul error bound arguments must be nonnegative"));
    }
    Ok(3.0 * x_max.max(y_max) * eps1.max(eps2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    /// Straight-line re-implementation of the gated recursion and gated products.
    fn reference_mul(x: f64, y: f64, x_max: f64, y_max: f64, n: i32) -> f64 {
        let m = x_max.log2().ceil().max(0.0) as i32;
        let big_m = 2f64.powi(m + 1);
        let gate = 2f64.powi(m + y_max.log2().ceil() as i32);
        let mut rem = x;
        let mut prev: Option<f64> = None;
        let mut out = 0.0;
        for i in (-n..=m).rev() {
            if let Some(p) = prev {
                rem -= (2f64.powi(i + 1) + big_m * (p - 1.0)).max(0.0);
            }
            let bit = if rem - 2f64.powi(i) >= 0.0 { 1.0 } else { 0.0 };
            out += (2f64.powi(i) * y + gate * (bit - 1.0)).max(0.0);
            prev = Some(bit);
        }
        out
    }

    #[test]
    fn mul_examples() {
        let net = build_mul_net(2.0, 2.0, 8).unwrap();
        assert_eq!(net.eval(0.0, 1.7), 0.0);
        assert!((net.eval(1.5, 2.0) - 3.0).abs() <= 2.0 / 256.0);
        assert_eq!(net.bound, 0.0078125);
        net.graph.validate().unwrap();
        let (err, ok) = net.exact_error(1.5, 2.0).unwrap();
        assert!(ok && err <= net.bound);
        let div = build_div_net(1.0, 1.0, 4).unwrap();
        assert!(div.exact_error(0.0, 0.0).is_err());
    }

    #[test]
    fn mul_matches_reference_and_bound_is_tight() {
        let net = build_mul_net(2.0, 2.0, 8).unwrap();
        let mut r = rng::substream(21, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let (x, y) = (r.random_range(0.0..=2.0), r.random_range(0.0..=2.0));
            let out = net.eval(x, y);
            assert_eq!(out, reference_mul(x, y, 2.0, 2.0, 8));
            let err = (x * y - out).abs();
            assert!(err <= net.bound, "{x} {y} {err}");
            worst = worst.max(err);
        }
        assert!(worst > net.bound / 4.0, "{worst}");
    }

    #[test]
    fn div_examples_and_sweep() {
        let net = build_div_net(1.0, 1.0, 10).unwrap();
        assert_eq!(net.eval(0.0, 1.0), 0.0);
        assert!((net.eval(0.25, 0.75) - 1.0 / 3.0).abs() <= 2f64.powi(-10));
        assert_eq!(net.eval(1.0, 1.0), 1.0);

        let net = build_div_net(1.0, 1.0, 12).unwrap();
        let mut r = rng::substream(22, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let y: f64 = r.random_range(1e-3..=1.0);
            let x = r.random_range(0.0..=1.0) * y;
            assert!(net.domain.contains(x, y));
            let err = (x / y - net.eval(x, y)).abs();
            assert!(err <= net.bound, "{x} {y} {err}");
            worst = worst.max(err);
        }
        assert!(worst > net.bound / 4.0);
    }

    #[test]
    fn div_handles_larger_ranges() {
        let net = build_div_net(10.0, 4.0, 8).unwrap();
        assert_eq!(net.spec.m, 4);
        let mut r = rng::substream(23, 0);
        for _ in 0..5000 {
            let y: f64 = r.random_range(0.01..=4.0);
            let x = r.random_range(0.0..=10.0) * y;
            assert!((x / y - net.eval(x, y)).abs() <= net.bound);
        }
    }

    #[test]
    fn quotients_beyond_capacity_saturate() {
        let net = build_div_net(1.0, 1.0, 6).unwrap();
        assert_eq!(net.eval(5.0, 1.0), net.spec.capacity());
        assert_eq!(net.eval(0.0, 0.0), net.spec.capacity());
        assert!(net.domain.violation(5.0, 1.0).is_some());
        assert!(net.domain.violation(0.5, 0.0).is_some());
        assert!(net.domain.violation(-0.1, 1.0).is_some());
    }

    #[test]
    fn counts_match_closed_form() {
        for (z_max, n) in [(1.0, 1u32), (1.0, 10), (3.0, 5), (100.0, 12), (0.25, 4)] {
            let d = build_div_net(z_max, 1.0, n).unwrap();
            assert_eq!(d.graph.counts(), div_net_counts(d.spec.m, n));
            let m = build_mul_net(z_max, 2.0, n).unwrap();
            assert_eq!(m.graph.counts(), mul_net_counts(m.spec.m, n));
        }
        let c = div_net_counts(0, 10);
        assert_eq!((c.binary, c.relu, c.layers), (11, 10, 22));
        let c = mul_net_counts(1, 8);
        assert_eq!((c.binary, c.relu, c.layers), (10, 19, 21));
    }

    #[test]
    fn exact_mode_agrees_with_float() {
        let net = build_div_net(1.0, 1.0, 8).unwrap();
        for (x, y) in [(0.3, 0.9), (0.125, 0.5), (0.7, 0.71)] {
            let exact =
                net.graph.eval_exact(&[BigRational::from_float(x).unwrap(), BigRational::from_float(y).unwrap()]);
            let e = exact.unwrap()[0].clone();
            assert_eq!(BigRational::from_float(net.eval(x, y)).unwrap(), e);
        }
    }

    #[test]
    fn expansion_spec_rules() {
        let s = BitExpansionSpec::new(1.0, 1.0, 10).unwrap();
        assert_eq!((s.m, s.num_bits(), s.big_m), (0, 11, 2.0));
        s.validate(1.0).unwrap();
        assert!(s.validate(4.0).is_err());
        assert!(BitExpansionSpec::new(1.0, 1.0, 0).is_err());
        assert!(BitExpansionSpec::new(0.0, 1.0, 3).is_err());
        assert_eq!(BitExpansionSpec::new(5.0, 1.0, 3).unwrap().m, 3);
        assert!(build_mul_net(-1.0, 1.0, 3).is_err());
    }

    #[test]
    fn bound_formulas() {
        assert_eq!(div_error_bound(0.0, 0.0, 0.5, 10.0).unwrap(), 0.0);
        assert!((div_error_bound(0.01, 0.01, 0.5, 10.0).unwrap() - 0.22).abs() < 1e-15);
        assert!(div_error_bound(0.1, 0.1, 0.0, 1.0).is_err());
        assert_eq!(mul_error_bound(0.0, 0.0, 2.0, 3.0).unwrap(), 0.0);
        assert!((mul_error_bound(0.1, 0.1, 2.0, 3.0).unwrap() - 0.9).abs() < 1e-15);
        assert!(mul_error_bound(-0.1, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn propagation_inequalities_hold() {
        let mut r = rng::substream(24, 0);
        let sign = |r: &mut rand_chacha::ChaCha8Rng| if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut div_checked = 0;
        while div_checked < 100_000 {
            let y_min: f64 = r.random_range(0.01..2.0);
            let y = r.random_range(y_min..y_min + 5.0);
            let e2 = r.random_range(0.0..(y - y_min));
            let z_max: f64 = r.random_range(0.1..10.0);
            let x = r.random_range(0.0..=z_max * y);
            let e1 = r.random_range(0.0..=x);
            if !(y_min < y - e2) {
                continue;
            }
            let perturbed = (x + sign(&mut r) * e1) / (y + sign(&mut r) * e2);
            let bound = div_error_bound(e1, e2, y_min, z_max).unwrap();
            assert!((x / y - perturbed).abs() <= bound * (1.0 + 1e-12));
            div_checked += 1;
        }
        for _ in 0..100_000 {
            let (x_max, y_max): (f64, f64) = (r.random_range(0.01..10.0), r.random_range(0.01..10.0));
            let (x, y) = (r.random_range(0.0..=x_max), r.random_range(0.0..=y_max));
            let cap = x_max.max(y_max);
            let (e1, e2) = (r.random_range(0.0..=cap), r.random_range(0.0..=cap));
            let perturbed = (x + sign(&mut r) * e1) * (y + sign(&mut r) * e2);
            let bound = mul_error_bound(e1, e2, x_max, y_max).unwrap();
            assert!((x * y - perturbed).abs() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn composition_stays_within_propagated_budget() {
        // (x / y) * u: the product amplifies the quotient error and adds its own
        let n = 10;
        let (z_max, y_max, u_max) = (1.0, 1.0, 2.0);
        let mut b = GraphBuilder::new();
        let (x, y, u) = (b.input(), b.input(), b.input());
        let q = b.div(&x, &y, z_max, y_max, n).unwrap();
        let qv = q.value();
        let prod = b.mul_bits(&q, &u, u_max);
        b.output(&prod);
        b.output(&qv);
        let g = b.finish();
        let eps_div = 2f64.powi(-(n as i32));
        let budget = mul_error_bound(eps_div, 0.0, z_max, u_max).unwrap();
        let mut r = rng::substream(25, 0);
        for _ in 0..10_000 {
            let yv: f64 = r.random_range(0.01..=1.0);
            let xv = r.random_range(0.0..=1.0) * yv;
            let uv = r.random_range(0.0..=u_max);
            let out = g.eval(&[xv, yv, uv]).unwrap();
            assert!((out[1] - xv / yv).abs() <= eps_div);
            assert!((out[0] - xv / yv * uv).abs() <= budget, "{}", (out[0] - xv / yv * uv).abs());
        }
    }
}
