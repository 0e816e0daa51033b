//! Central finite-difference verification of [`Graph::backward`].

use serde::Serialize;

use super::graph::{Graph, NodeId};
use super::Param;
use crate::error::Result;
use crate::tensor::Matrix;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is zero are compared on an absolute scale.
const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coordinate {
    pub param: String,
    pub index: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoordinateFailure {
    pub coordinate: Coordinate,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub checked: usize,
    pub max_rel_error: f64,
    pub failures: Vec<CoordinateFailure>,
    /// Coordinates whose ±step perturbation changes a maxpool argmax or a
    /// clamp, where the loss is not differentiable along the probe.
    pub excluded: Vec<Coordinate>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Runs `build` on fresh graphs to compare backward gradients against
/// central differences `(f(p + h) - f(p - h)) / 2h` for every coordinate of
/// every parameter.
///
/// `build` receives one param node per entry of `params`, in order, and must
/// return a scalar loss node.
pub fn finite_diff_check<F>(build: F, params: &[Param], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let (g, ids, loss) = evaluate(&build, params)?;
    let grads = g.backward(loss)?;
    let analytic: Vec<Matrix> = ids
        .iter()
        .zip(params)
        .map(|(&id, p)| grads.get_or_zeros(id, p.value.shape()))
        .collect();
    compare_gradients(build, params, &analytic, h, tol)
}

/// Compares caller-supplied analytic gradients against central differences.
/// [`finite_diff_check`] is this with `analytic` taken from backward.
pub fn compare_gradients<F>(
    build: F,
    params: &[Param],
    analytic: &[Matrix],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let (base_graph, _, _) = evaluate(&build, params)?;
    let base_sig = base_graph.branch_signature();

    let mut report = GradCheckReport {
        step: h,
        tolerance: tol,
        checked: 0,
        max_rel_error: 0.0,
        failures: Vec::new(),
        excluded: Vec::new(),
    };
    let mut probe: Vec<Param> = params.to_vec();
    for (pi, param) in params.iter().enumerate() {
        for k in 0..param.value.len() {
            let orig = param.value.data()[k];

            probe[pi].value.data_mut()[k] = orig + h;
            let (gp, _, lp) = evaluate(&build, &probe)?;
            probe[pi].value.data_mut()[k] = orig - h;
            let (gm, _, lm) = evaluate(&build, &probe)?;
            probe[pi].value.data_mut()[k] = orig;

            let coordinate = Coordinate {
                param: param.name.clone(),
                index: k,
            };
            if gp.branch_signature() != base_sig || gm.branch_signature() != base_sig {
                report.excluded.push(coordinate);
                continue;
            }
            let numeric = (gp.scalar(lp) - gm.scalar(lm)) / (2.0 * h);
            let a = analytic[pi].data()[k];
            let err = rel_error(a, numeric);
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(err);
            if !(err < tol) {
                report.failures.push(CoordinateFailure {
                    coordinate,
                    analytic: a,
                    numeric,
                    rel_error: err,
                });
            }
        }
    }
    Ok(report)
}

fn evaluate<F>(build: &F, params: &[Param]) -> Result<(Graph, Vec<NodeId>, NodeId)>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let mut g = Graph::new();
    let ids: Vec<NodeId> = params.iter().map(|p| g.param(p.value.clone())).collect();
    let loss = build(&mut g, &ids)?;
    Ok((g, ids, loss))
}
