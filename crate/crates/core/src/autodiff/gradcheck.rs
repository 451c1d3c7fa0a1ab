//! Central finite-difference verification of analytic gradients.

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, KinkSite, NodeId};
use super::params::{ParamId, ParamStore};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Finite-difference step per real component.
    pub step: f64,
    /// Pass threshold on the worst relative error.
    pub tol: f64,
    /// Components that move a kink-site value lying within this distance of
    /// the kink are excluded.
    pub kink_margin: f64,
    /// Denominator floor for the relative error, so that components with
    /// vanishing gradients are judged on absolute error.
    pub abs_floor: f64,
    /// Check a seeded random subset when the model has more components.
    pub max_components: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-6,
            tol: 1e-4,
            kink_margin: 1e-4,
            abs_floor: 1e-6,
            max_components: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentError {
    pub param: String,
    pub index: usize,
    pub imaginary: bool,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub worst: Option<ComponentError>,
    pub passed: bool,
}

fn loss_of(graph: &Graph, loss: NodeId) -> f64 {
    graph.value(loss).values()[0].re
}

fn kink_snapshot(graph: &Graph) -> Vec<(KinkSite, Vec<Complex64>)> {
    graph
        .kink_sites()
        .into_iter()
        .map(|(site, values)| (site, values.to_vec()))
        .collect()
}

/// True when the perturbation moved some kink-site value that sits within
/// `margin` of its kink.
fn touches_kink(
    base: &[(KinkSite, Vec<Complex64>)],
    perturbed: &[(KinkSite, Vec<Complex64>)],
    margin: f64,
) -> bool {
    base.iter().zip(perturbed).any(|((site, b), (_, p))| {
        b.iter().zip(p).any(|(b, p)| match site {
            KinkSite::Relu => {
                (b.re.abs() < margin && b.re != p.re) || (b.im.abs() < margin && b.im != p.im)
            }
            KinkSite::GateMagnitude => b.norm() < margin && b != p,
        })
    })
}

/// Compares the tape's analytic gradient of the scalar loss produced by
/// `build` against central differences, one real component at a time.
pub fn grad_check<F>(params: &mut ParamStore, build: F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&ParamStore) -> Result<(Graph, NodeId)>,
{
    let (graph, loss) = build(params)?;
    params.zero_grads();
    for p in params.iter_mut() {
        p.tensor.grad_mut();
    }
    graph.backward(loss, params)?;
    let base_kinks = kink_snapshot(&graph);
    drop(graph);

    let analytic: Vec<Vec<Complex64>> = params
        .iter()
        .map(|p| p.tensor.grad().expect("allocated above").to_vec())
        .collect();

    // (param, entry, imaginary part)
    let mut components: Vec<(usize, usize, bool)> = Vec::new();
    for (pi, p) in params.iter().enumerate() {
        for i in 0..p.tensor.len() {
            components.push((pi, i, false));
            components.push((pi, i, true));
        }
    }
    if let Some(limit) = opts.max_components {
        if components.len() > limit {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut picked = sample(&mut rng, components.len(), limit).into_vec();
            picked.sort_unstable();
            components = picked.into_iter().map(|i| components[i]).collect();
        }
    }

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_kinks: 0,
        worst: None,
        passed: true,
    };

    for (pi, index, imaginary) in components {
        let id = ParamId(pi);
        let original = params.get(id).values()[index];
        let nudge = |params: &mut ParamStore, delta: f64| {
            let v = &mut params.get_mut(id).values_mut()[index];
            *v = if imaginary {
                Complex64::new(original.re, original.im + delta)
            } else {
                Complex64::new(original.re + delta, original.im)
            };
        };

        nudge(params, opts.step);
        let (g_plus, l_plus) = build(params)?;
        nudge(params, -opts.step);
        let (g_minus, l_minus) = build(params)?;
        params.get_mut(id).values_mut()[index] = original;

        if touches_kink(&base_kinks, &kink_snapshot(&g_plus), opts.kink_margin)
            || touches_kink(&base_kinks, &kink_snapshot(&g_minus), opts.kink_margin)
        {
            report.skipped_kinks += 1;
            continue;
        }

        let numeric = (loss_of(&g_plus, l_plus) - loss_of(&g_minus, l_minus)) / (2.0 * opts.step);
        let g = analytic[pi][index];
        let analytic_part = if imaginary { g.im } else { g.re };
        let denom = analytic_part.abs().max(numeric.abs()).max(opts.abs_floor);
        let rel_error = (analytic_part - numeric).abs() / denom;
        report.checked += 1;
        if rel_error > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel_error);
            report.worst = Some(ComponentError {
                param: params.iter().nth(pi).map(|p| p.name.clone()).unwrap_or_default(),
                index,
                imaginary,
                analytic: analytic_part,
                numeric,
                rel_error,
            });
        }
    }
    report.passed = report.max_rel_error < opts.tol;
    Ok(report)
}
