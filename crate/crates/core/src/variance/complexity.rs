use serde::{Deserialize, Serialize};

use crate::sampling::BatchPlan;

/// Bytes per stored float when converting counts to megabytes.
pub const FLOAT_BYTES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    FullBatch,
    #[serde(rename = "graphsage")]
    GraphSage,
    #[serde(rename = "vrgcn")]
    VrGcn,
    #[serde(rename = "fastgcn")]
    FastGcn,
    Ladies,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::FullBatch,
        Scheme::GraphSage,
        Scheme::VrGcn,
        Scheme::FastGcn,
        Scheme::Ladies,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::FullBatch => "full_batch",
            Scheme::GraphSage => "graphsage",
            Scheme::VrGcn => "vrgcn",
            Scheme::FastGcn => "fastgcn",
            Scheme::Ladies => "ladies",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityParams {
    pub layers: usize,
    pub hidden: usize,
    pub num_nodes: usize,
    /// `||A||_0`.
    pub adjacency_nnz: usize,
    pub batch: usize,
    pub s_node: usize,
    pub s_layer: usize,
}

/// One summand of a complexity expression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Term {
    pub expression: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityEstimate {
    pub scheme: Scheme,
    pub memory_terms: Vec<Term>,
    pub time_terms: Vec<Term>,
    pub memory: f64,
    pub time: f64,
}

/// Evaluates the memory and time rows of the complexity table, constants
/// dropped.
pub fn complexity_estimate(scheme: Scheme, c: &ComplexityParams) -> ComplexityEstimate {
    let l = c.layers as f64;
    let k = c.hidden as f64;
    let n = c.num_nodes as f64;
    let b = c.batch as f64;
    let sn = c.s_node as f64;
    let sl = c.s_layer as f64;
    let a0 = c.adjacency_nnz as f64;
    let d = if c.num_nodes == 0 { 0.0 } else { a0 / n };
    let fan = sn.powi(c.layers as i32 - 1);
    let term = |expression, value| Term { expression, value };
    let (memory_terms, time_terms) = match scheme {
        Scheme::FullBatch => (
            vec![term("L*n*K", l * n * k), term("L*K^2", l * k * k)],
            vec![term("L*nnz(A)*K", l * a0 * k), term("L*n*K^2", l * n * k * k)],
        ),
        Scheme::GraphSage => (
            vec![term("b*K*s_node^(L-1)", b * k * fan), term("L*K^2", l * k * k)],
            vec![
                term("b*K*s_node^L", b * k * fan * sn),
                term("b*K^2*s_node^(L-1)", b * k * k * fan),
            ],
        ),
        Scheme::VrGcn => (
            vec![term("L*n*K", l * n * k), term("L*K^2", l * k * k)],
            vec![
                term("b*D*K*s_node^(L-1)", b * d * k * fan),
                term("b*K^2*s_node^(L-1)", b * k * k * fan),
            ],
        ),
        Scheme::FastGcn | Scheme::Ladies => (
            vec![term("L*K*s_layer", l * k * sl), term("L*K^2", l * k * k)],
            vec![
                term("L*K*s_layer^2", l * k * sl * sl),
                term("L*K^2*s_layer", l * k * k * sl),
            ],
        ),
    };
    ComplexityEstimate {
        scheme,
        memory: memory_terms.iter().map(|t| t.value).sum(),
        time: time_terms.iter().map(|t| t.value).sum(),
        memory_terms,
        time_terms,
    }
}

/// Activations a forward pass through `plan` stores: `hidden` floats for
/// every output row of every layer.
pub fn activation_count(plan: &BatchPlan, hidden: usize) -> usize {
    hidden * plan.layers.iter().map(|l| l.upper_nodes.len()).sum::<usize>()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivationCensus {
    /// Output rows per layer, bottom first.
    pub rows_per_layer: Vec<usize>,
    pub activations: usize,
    pub parameters: usize,
    /// `(activations + parameters) * FLOAT_BYTES` in MiB.
    pub megabytes: f64,
}

/// Counts stored activations for `plan` and parameters for layer widths
/// `dims`, with every hidden layer `hidden` wide.
pub fn measure_actuals(plan: &BatchPlan, hidden: usize, dims: &[usize]) -> ActivationCensus {
    let activations = activation_count(plan, hidden);
    let parameters: usize = dims.windows(2).map(|d| d[0] * d[1]).sum();
    ActivationCensus {
        rows_per_layer: plan.rows_per_layer(),
        activations,
        parameters,
        megabytes: ((activations + parameters) * FLOAT_BYTES) as f64 / (1024.0 * 1024.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ComplexityParams {
        ComplexityParams {
            layers: 1,
            hidden: 4,
            num_nodes: 10,
            adjacency_nnz: 30,
            batch: 2,
            s_node: 3,
            s_layer: 5,
        }
    }

    #[test]
    fn one_layer_by_hand() {
        let c = params();
        let full = complexity_estimate(Scheme::FullBatch, &c);
        assert_eq!(full.memory, 10.0 * 4.0 + 16.0);
        assert_eq!(full.time, 30.0 * 4.0 + 10.0 * 16.0);
        let sage = complexity_estimate(Scheme::GraphSage, &c);
        assert_eq!(sage.memory, 2.0 * 4.0 + 16.0);
        assert_eq!(sage.time, 2.0 * 4.0 * 3.0 + 2.0 * 16.0);
        let vr = complexity_estimate(Scheme::VrGcn, &c);
        assert_eq!(vr.time, 2.0 * 3.0 * 4.0 + 2.0 * 16.0);
        let ladies = complexity_estimate(Scheme::Ladies, &c);
        assert_eq!(ladies.memory, 4.0 * 5.0 + 16.0);
        assert_eq!(ladies.time, 4.0 * 25.0 + 16.0 * 5.0);
    }

    #[test]
    fn layerwise_rows_coincide() {
        let c = ComplexityParams { layers: 5, ..params() };
        let a = complexity_estimate(Scheme::Ladies, &c);
        let b = complexity_estimate(Scheme::FastGcn, &c);
        assert_eq!((a.memory, a.time), (b.memory, b.time));
    }

    #[test]
    fn node_wise_memory_grows_by_fanout() {
        let mut c = ComplexityParams { hidden: 64, ..params() };
        let mut last = None;
        for layers in 2..6 {
            c.layers = layers;
            let e = complexity_estimate(Scheme::GraphSage, &c);
            let fan_term = e.memory_terms[0].value;
            if let Some(prev) = last {
                assert_eq!(fan_term, prev * c.s_node as f64);
            }
            last = Some(fan_term);
        }
    }
}
