use super::{Result, Scalar, Tape, Tensor, Var};

/// A scalar loss graph that can be built at any precision.
///
/// Implementors record their forward computation on the given tape using
/// `params` (already bound as leaves) and return the scalar loss.
pub trait LossGraph {
    fn build<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var]) -> Result<Var>;
}

/// Outcome of comparing autodiff gradients against central differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    /// Worst `|g_fd − g_ad| / max(|g_fd|, |g_ad|, 1e-8)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Number of scalar parameters compared.
    pub checked: usize,
}

impl GradCheck {
    pub fn within(&self, rtol: f64) -> bool {
        self.max_rel_error < rtol
    }
}

fn eval<G: LossGraph + ?Sized>(graph: &G, params: &[Tensor<f64>]) -> Result<f64> {
    let mut tape = Tape::<f64>::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone(), false)).collect();
    let loss = graph.build(&mut tape, &vars)?;
    Ok(tape.value(loss).item())
}

/// Checks the tape's gradients of `graph` against double-precision central
/// differences with the given `step`.
pub fn finite_difference_check<G: LossGraph + ?Sized>(
    graph: &G,
    params: &[Tensor<f64>],
    step: f64,
) -> Result<GradCheck> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut tape = Tape::<f64>::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone(), true)).collect();
    let loss = graph.build(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut report = GradCheck {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
    };
    let mut probe = params.to_vec();
    for (pi, var) in vars.iter().enumerate() {
        let analytic = grads
            .get(*var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(params[pi].shape()));
        for ei in 0..params[pi].numel() {
            let orig = params[pi].data()[ei];
            probe[pi].data_mut()[ei] = orig + step;
            let up = eval(graph, &probe)?;
            probe[pi].data_mut()[ei] = orig - step;
            let down = eval(graph, &probe)?;
            probe[pi].data_mut()[ei] = orig;

            let fd = (up - down) / (2.0 * step);
            let ad = analytic.data()[ei];
            let abs = (fd - ad).abs();
            let rel = abs / fd.abs().max(ad.abs()).max(1e-8);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
            report.checked += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear {
        coeffs: Tensor<f64>,
    }

    impl LossGraph for Linear {
        fn build<T: Scalar>(&self, tape: &mut Tape<T>, params: &[Var]) -> Result<Var> {
            let c = tape.constant(self.coeffs.cast());
            let prod = tape.mul(params[0], c)?;
            Ok(tape.sum(prod))
        }
    }

    #[test]
    fn linear_loss_is_exact_to_rounding() {
        let coeffs = Tensor::new(vec![4], vec![0.5, -1.25, 2.0, 3.0]).unwrap();
        let x = Tensor::new(vec![4], vec![0.1, 0.2, -0.3, 0.4]).unwrap();
        let report = finite_difference_check(&Linear { coeffs }, &[x], 1e-3).unwrap();
        assert_eq!(report.checked, 4);
        assert!(report.max_rel_error < 1e-10, "{report:?}");
    }
}
