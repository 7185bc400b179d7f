use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnitKind {
    Input,
    /// Identity of its pre-activation; used for intermediate linear read-outs.
    Affine,
    Relu,
    /// 1 if the pre-activation is `>= 0`, else 0.
    Binary,
    /// Identity read-out exposed as a graph output.
    Output,
}

impl UnitKind {
    pub fn name(self) -> &'static str {
        match self {
            UnitKind::Input => "input",
            UnitKind::Affine => "affine",
            UnitKind::Relu => "relu",
            UnitKind::Binary => "binary",
            UnitKind::Output => "output",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "input" => UnitKind::Input,
            "affine" => UnitKind::Affine,
            "relu" => UnitKind::Relu,
            "binary" => UnitKind::Binary,
            "output" => UnitKind::Output,
            _ => return None,
        })
    }

    #[inline]
    fn activate(self, z: f64) -> f64 {
        match self {
            UnitKind::Relu => z.max(0.0),
            UnitKind::Binary => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub kind: UnitKind,
    pub bias: f64,
    /// `(source unit, coefficient)`; sources always precede the unit.
    pub edges: Vec<(usize, f64)>,
    pub layer: usize,
}

/// Layered DAG of input, affine, ReLU and binary-step units in topological order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnitGraph {
    pub units: Vec<Unit>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    /// Free-form construction parameters (bit counts, gating constants, bounds).
    pub meta: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GraphCounts {
    pub relu: usize,
    pub binary: usize,
    pub affine: usize,
    pub output: usize,
    /// Largest layer index; inputs sit at layer 0.
    pub layers: usize,
}

impl UnitGraph {
    pub fn counts(&self) -> GraphCounts {
        let mut c = GraphCounts::default();
        for u in &self.units {
            match u.kind {
                UnitKind::Relu => c.relu += 1,
                UnitKind::Binary => c.binary += 1,
                UnitKind::Affine => c.affine += 1,
                UnitKind::Output => c.output += 1,
                UnitKind::Input => {}
            }
            c.layers = c.layers.max(u.layer);
        }
        c
    }

    pub fn num_edges(&self) -> usize {
        self.units.iter().map(|u| u.edges.len()).sum()
    }

    /// Checks topological order, layer consistency and input/output bookkeeping.
    pub fn validate(&self) -> Result<()> {
        let mut seen_inputs = Vec::new();
        for (id, u) in self.units.iter().enumerate() {
            if u.kind == UnitKind::Input {
                if !u.edges.is_empty() || u.layer != 0 || u.bias != 0.0 {
                    return Err(Error::invalid(format!("input unit {id} must have no edges, zero bias, layer 0")));
                }
                seen_inputs.push(id);
                continue;
            }
            let mut layer = 0;
            for &(src, c) in &u.edges {
                if src >= id {
                    return Err(Error::invalid(format!("unit {id} reads from later unit {src}")));
                }
                if !c.is_finite() {
                    return Err(Error::invalid(format!("unit {id} has a non-finite coefficient")));
                }
                layer = layer.max(self.units[src].layer);
            }
            if !u.bias.is_finite() {
                return Err(Error::invalid(format!("unit {id} has a non-finite bias")));
            }
            if u.layer != layer + 1 {
                return Err(Error::invalid(format!("unit {id} has layer {} but sources imply {}", u.layer, layer + 1)));
            }
        }
        if seen_inputs != self.inputs {
            return Err(Error::invalid("input list does not match input units"));
        }
        for &o in &self.outputs {
            if self.units.get(o).map(|u| u.kind) != Some(UnitKind::Output) {
                return Err(Error::invalid(format!("output {o} is not an output unit")));
            }
        }
        Ok(())
    }

    /// Forward evaluation in topological order.
    pub fn eval(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.inputs.len(), inputs.len())?;
        let mut val = vec![0.0; self.units.len()];
        for (&id, &x) in self.inputs.iter().zip(inputs) {
            val[id] = x;
        }
        for (id, u) in self.units.iter().enumerate() {
            if u.kind == UnitKind::Input {
                continue;
            }
            let mut z = u.bias;
            for &(src, c) in &u.edges {
                z += c * val[src];
            }
            val[id] = u.kind.activate(z);
        }
        Ok(self.outputs.iter().map(|&o| val[o]).collect())
    }

    /// Evaluation in exact rational arithmetic. Every coefficient is a finite
    /// `f64`, hence an exact dyadic rational, so this isolates rounding effects.
    pub fn eval_exact(&self, inputs: &[BigRational]) -> Result<Vec<BigRational>> {
        check_dim(self.inputs.len(), inputs.len())?;
        let exact = |x: f64| BigRational::from_float(x).expect("finite coefficient");
        let mut val = vec![BigRational::zero(); self.units.len()];
        for (&id, x) in self.inputs.iter().zip(inputs) {
            val[id] = x.clone();
        }
        for (id, u) in self.units.iter().enumerate() {
            if u.kind == UnitKind::Input {
                continue;
            }
            let mut z = exact(u.bias);
            for &(src, c) in &u.edges {
                z += exact(c) * &val[src];
            }
            val[id] = match u.kind {
                UnitKind::Relu if z.is_negative() => BigRational::zero(),
                UnitKind::Binary if z.is_negative() => BigRational::zero(),
                UnitKind::Binary => BigRational::one(),
                _ => z,
            };
        }
        Ok(self.outputs.iter().map(|&o| val[o].clone()).collect())
    }
}

/// Affine combination of unit values, `constant + sum coeff * unit`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lin {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Lin {
    pub fn unit(id: usize) -> Self {
        Self { terms: vec![(id, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|&(u, c)| (u, c * s)).collect(), constant: self.constant * s }
    }

    /// `self + s * other`, merging repeated units in first-occurrence order.
    pub fn add_scaled(&self, other: &Lin, s: f64) -> Self {
        let mut out = self.clone();
        for &(u, c) in &other.terms {
            match out.terms.iter_mut().find(|(v, _)| *v == u) {
                Some(t) => t.1 += c * s,
                None => out.terms.push((u, c * s)),
            }
        }
        out.constant += other.constant * s;
        out
    }

    pub fn plus(&self, other: &Lin) -> Self {
        self.add_scaled(other, 1.0)
    }

    pub fn minus(&self, other: &Lin) -> Self {
        self.add_scaled(other, -1.0)
    }

    pub fn offset(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.constant += c;
        out
    }

    pub fn sum<'a>(forms: impl IntoIterator<Item = &'a Lin>) -> Self {
        forms.into_iter().fold(Lin::default(), |acc, f| acc.plus(f))
    }
}

/// Incremental graph construction. Units are appended in topological order and
/// receive layer `1 + max(layer of sources)`.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    graph: UnitGraph,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self) -> Lin {
        let id = self.graph.units.len();
        self.graph.units.push(Unit { kind: UnitKind::Input, bias: 0.0, edges: Vec::new(), layer: 0 });
        self.graph.inputs.push(id);
        Lin::unit(id)
    }

    /// Deepest layer among the units a form reads; 0 for constants.
    pub fn depth(&self, form: &Lin) -> usize {
        form.terms.iter().filter(|t| t.1 != 0.0).map(|&(u, _)| self.graph.units[u].layer).max().unwrap_or(0)
    }

    fn push(&mut self, kind: UnitKind, form: &Lin) -> usize {
        let edges: Vec<(usize, f64)> = form.terms.iter().copied().filter(|&(_, c)| c != 0.0).collect();
        let layer = 1 + edges.iter().map(|&(u, _)| self.graph.units[u].layer).max().unwrap_or(0);
        self.graph.units.push(Unit { kind, bias: form.constant, edges, layer });
        self.graph.units.len() - 1
    }

    pub fn relu(&mut self, form: &Lin) -> Lin {
        Lin::unit(self.push(UnitKind::Relu, form))
    }

    pub fn binary(&mut self, form: &Lin) -> Lin {
        Lin::unit(self.push(UnitKind::Binary, form))
    }

    pub fn affine(&mut self, form: &Lin) -> Lin {
        Lin::unit(self.push(UnitKind::Affine, form))
    }

    pub fn output(&mut self, form: &Lin) -> usize {
        let id = self.push(UnitKind::Output, form);
        self.graph.outputs.push(id);
        id
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.graph.meta.insert(key.to_string(), value.to_string());
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.graph.warnings.push(msg.into());
    }

    pub fn num_units(&self) -> usize {
        self.graph.units.len()
    }

    pub fn finish(self) -> UnitGraph {
        self.graph
    }
}
