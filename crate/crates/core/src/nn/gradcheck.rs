use super::{Graph, ParameterSet, Var};
use crate::error::{Error, Result};

/// Denominator floor for the relative error, so that gradients that are zero
/// both ways (or nearly) compare on an absolute scale.
pub const GRADCHECK_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

fn evaluate<F>(f: &F, params: &ParameterSet) -> Result<f64>
where
    F: Fn(&mut Graph, &ParameterSet) -> Result<Var>,
{
    let mut g = Graph::new();
    let loss = f(&mut g, params)?;
    if g.shape(loss) != (1, 1) {
        return Err(Error::Shape(format!("loss shape {:?}", g.shape(loss))));
    }
    let v = g.scalar(loss);
    if !v.is_finite() {
        return Err(Error::Numeric(format!("loss is {v}")));
    }
    Ok(v)
}

/// Compares autodiff gradients of the scalar built by `f` with central
/// finite differences of step `epsilon`, element by element over every
/// parameter. The difference uses the fourth-order central stencil
/// `(8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`, whose small truncation
/// error allows steps large enough to keep roundoff well below the
/// tolerance. The relative error of one element is
/// `|a - n| / max(|a|, |n|, GRADCHECK_FLOOR)`.
pub fn check_gradients<F>(f: F, params: &ParameterSet, epsilon: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParameterSet) -> Result<Var>,
{
    let mut g = Graph::new();
    let loss = f(&mut g, params)?;
    let grads = g.backward(loss)?;
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    for name in names {
        let n = params.get(&name)?.len();
        let analytic = grads.get(&name);
        for i in 0..n {
            let orig = params.get(&name)?.values()[i];
            let mut at = |offset: f64| -> Result<f64> {
                probe.get_mut(&name)?.values_mut()[i] = orig + offset;
                evaluate(&f, &probe)
            };
            let near = at(epsilon)? - at(-epsilon)?;
            let far = at(2.0 * epsilon)? - at(-2.0 * epsilon)?;
            probe.get_mut(&name)?.values_mut()[i] = orig;
            let numeric = (8.0 * near - far) / (12.0 * epsilon);
            let a = analytic.map_or(0.0, |g| g[i]);
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err;
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut ps = ParameterSet::new();
        ps.insert("w", Tensor::matrix(1, 4, vec![0.3, -1.2, 2.0, 0.7]).unwrap());
        let report = check_gradients(
            |g, ps| {
                let w = g.param(ps, "w")?;
                let sq = g.square(w);
                let s = g.sum(sq);
                Ok(g.scale(s, 0.5))
            },
            &ps,
            1e-4,
        )
        .unwrap();
        assert!(report.max_relative_error < 1e-8, "{report:?}");
        assert_eq!(report.checked, 4);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let mut ps = ParameterSet::new();
        ps.insert("w", Tensor::matrix(1, 3, vec![1.0, 2.0, 3.0]).unwrap());
        let report = check_gradients(
            |g, ps| {
                let w = g.param(ps, "w")?;
                let z = g.scale(w, 0.0);
                let s = g.sum(z);
                Ok(g.add_scalar(s, 4.0))
            },
            &ps,
            1e-4,
        )
        .unwrap();
        assert_eq!(report.max_relative_error, 0.0);
    }

    #[test]
    fn non_finite_loss_is_numeric_error() {
        let mut ps = ParameterSet::new();
        ps.insert("w", Tensor::scalar(1000.0));
        let r = check_gradients(
            |g, ps| {
                let w = g.param(ps, "w")?;
                Ok(g.exp(w))
            },
            &ps,
            1e-4,
        );
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
