use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;

use super::{Gradients, ParamStore};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Worst relative error per parameter tensor, in store order.
    pub groups: Vec<(String, f64)>,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn group(&self, name: &str) -> Option<f64> {
        self.groups.iter().find(|(n, _)| n == name).map(|(_, e)| *e)
    }
}

/// Compares analytic gradients to central finite differences.
///
/// `loss` returns the loss and its analytic gradient at the given
/// parameters. Up to `max_coords` coordinates per tensor are checked (all of
/// them when the tensor is smaller). Because parameters are f32, the actual
/// step after rounding is used as the difference denominator. The error for
/// one coordinate is `|analytic - fd| / max(1, |analytic|, |fd|)`.
pub fn grad_check<F>(
    params: &mut ParamStore,
    eps: f64,
    max_coords: usize,
    seed: u64,
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<(f64, Gradients)>,
{
    let (base, analytic) = loss(params)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    let mut rng = rng::stream(seed, &[0x9c4e]);
    let mut groups = Vec::new();
    let mut worst: f64 = 0.0;
    for id in params.ids().collect::<Vec<_>>() {
        let n = params.get(id).len();
        let coords: Vec<usize> = if n <= max_coords {
            (0..n).collect()
        } else {
            index::sample(&mut rng, n, max_coords).into_vec()
        };
        let mut group_err: f64 = 0.0;
        for k in coords {
            let x = params.values(id)[k];
            let up = params.set(id, k, x + eps);
            let (l_up, _) = loss(params)?;
            let down = params.set(id, k, x - eps);
            let (l_down, _) = loss(params)?;
            params.set(id, k, x);
            if !l_up.is_finite() || !l_down.is_finite() {
                return Err(Error::NonFinite("loss"));
            }
            let fd = (l_up - l_down) / (up - down);
            let a = analytic.get(id)[k];
            let err = (a - fd).abs() / 1f64.max(a.abs()).max(fd.abs());
            group_err = group_err.max(err);
        }
        worst = worst.max(group_err);
        groups.push((params.get(id).name.clone(), group_err));
    }
    Ok(GradCheckReport {
        groups,
        max_rel_err: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ParamId, Tape, Tensor};
    use alloc::vec;

    fn scalar_store(x: f32) -> ParamStore {
        let mut p = ParamStore::new();
        p.add(Tensor::new("x", 1, 1, vec![x]).unwrap()).unwrap();
        p
    }

    #[test]
    fn quadratic_is_exact() {
        let mut p = scalar_store(3.0);
        let report = grad_check(&mut p, 1e-3, 8, 0, |p| {
            let mut t = Tape::new(p);
            let x = t.param(ParamId(0));
            let l = t.mul(x, x);
            let l = t.sum(&[l]);
            Ok((t.scalar(l), t.backward(l)?))
        })
        .unwrap();
        assert!(report.max_rel_err < 1e-8, "{report:?}");
        assert_eq!(p.values(ParamId(0))[0], 3.0);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let mut p = scalar_store(-1.5);
        let report = grad_check(&mut p, 1e-3, 8, 0, |p| {
            let mut t = Tape::new(p);
            let _ = t.param(ParamId(0));
            let c = t.constant(4.0);
            let g = t.backward(c)?;
            assert_eq!(g.per_param[0], [0.0]);
            Ok((t.scalar(c), g))
        })
        .unwrap();
        assert_eq!(report.max_rel_err, 0.0);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let mut p = scalar_store(1.0);
        let r = grad_check(&mut p, 1e-3, 8, 0, |p| Ok((f64::NAN, Gradients::zeros(p))));
        assert_eq!(r, Err(Error::NonFinite("loss")));
    }
}
