use alloc::format;
use alloc::vec::Vec;

use crate::tensor::{Tape, Var, PROB_FLOOR};
use crate::{Error, Result};

/// `-Σ_t ln max(p*_t[y_t], floor)`.
pub fn ce_loss(dists: &[Vec<f64>], targets: &[usize]) -> Result<f64> {
    if targets.is_empty() || dists.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} distributions for {} targets",
            dists.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (p, &y) in dists.iter().zip(targets) {
        let py = *p.get(y).ok_or(Error::IdOutOfRange {
            id: y,
            size: p.len(),
        })?;
        total -= libm::log(py.max(PROB_FLOOR));
    }
    Ok(total)
}

/// `(Σ_t -ln p(y'_t)) · (r_sampled - r_greedy)`; minimizing it raises the
/// probability of samples that beat the greedy baseline.
pub fn self_critic_loss(logprobs: &[f64], r_sampled: f64, r_greedy: f64) -> f64 {
    let advantage = r_sampled - r_greedy;
    if advantage == 0.0 {
        return 0.0;
    }
    -logprobs.iter().sum::<f64>() * advantage
}

fn unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Invalid(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}

/// `(1 - ζ) SC_S + ζ SC_G`.
pub fn trl_loss(sc_source: f64, sc_target: f64, zeta: f64) -> Result<f64> {
    unit("zeta", zeta)?;
    Ok(interpolate(sc_source, sc_target, zeta))
}

/// `(1 - η) L_CE + η L_TRL`.
pub fn mixed_loss(ce: f64, trl: f64, eta: f64) -> Result<f64> {
    unit("eta", eta)?;
    Ok(interpolate(ce, trl, eta))
}

// endpoints return one side exactly, whatever the other holds
fn interpolate(a: f64, b: f64, w: f64) -> f64 {
    if w == 0.0 {
        a
    } else if w == 1.0 {
        b
    } else {
        (1.0 - w) * a + w * b
    }
}

/// `Σ_t Σ_i min(α_ti, cov_ti)`.
pub fn coverage_loss(attentions: &[Vec<f64>], coverages: &[Vec<f64>]) -> Result<f64> {
    if attentions.len() != coverages.len() {
        return Err(Error::Shape("attention and coverage counts differ".into()));
    }
    let mut total = 0.0;
    for (a, c) in attentions.iter().zip(coverages) {
        if a.len() != c.len() {
            return Err(Error::Shape("attention and coverage lengths differ".into()));
        }
        total += a.iter().zip(c).map(|(x, y)| x.min(*y)).sum::<f64>();
    }
    Ok(total)
}

/// Tape version of the two-term interpolation. A side with weight zero is
/// left out of the graph, so it contributes no gradient at all.
pub fn interpolate_on_tape(
    tape: &mut Tape<'_>,
    a: Option<Var>,
    b: Option<Var>,
    w: f64,
) -> Result<Var> {
    unit("weight", w)?;
    let mut parts = Vec::new();
    if w < 1.0 {
        let a = a.ok_or(Error::Invalid("missing first term".into()))?;
        parts.push(if w == 0.0 { a } else { tape.scale(a, 1.0 - w) });
    }
    if w > 0.0 {
        let b = b.ok_or(Error::Invalid("missing second term".into()))?;
        parts.push(if w == 1.0 { b } else { tape.scale(b, w) });
    }
    Ok(match parts.as_slice() {
        [one] => *one,
        _ => tape.sum(&parts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn ce_examples() {
        assert_eq!(
            ce_loss(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1, 0]).unwrap(),
            0.0
        );
        assert!((ce_loss(&[vec![0.5, 0.5]], &[0]).unwrap() - libm::log(2.0)).abs() < 1e-15);
        let u = vec![1.0 / 6.0; 6];
        assert!((ce_loss(&[u.clone(), u], &[2, 5]).unwrap() - 2.0 * libm::log(6.0)).abs() < 1e-14);
        assert!((ce_loss(&[vec![0.0, 1.0]], &[0]).unwrap() - -libm::log(PROB_FLOOR)).abs() < 1e-12);
        assert!(ce_loss(&[vec![1.0]], &[3]).is_err());
        assert!(ce_loss(&[], &[]).is_err());
    }

    #[test]
    fn self_critic_examples() {
        assert_eq!(self_critic_loss(&[-1.0, -1.0], 0.4, 0.4), 0.0);
        assert!((self_critic_loss(&[-1.5, -0.5], 0.8, 0.5) - 0.6).abs() < 1e-15);
        assert!((self_critic_loss(&[-1.5, -0.5], 0.5, 0.8) + 0.6).abs() < 1e-15);
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(trl_loss(0.6, 1.0, 0.0).unwrap(), 0.6);
        assert_eq!(trl_loss(0.6, 1.0, 1.0).unwrap(), 1.0);
        assert!((trl_loss(0.6, 1.0, 0.5).unwrap() - 0.8).abs() < 1e-15);
        assert!(trl_loss(0.6, 1.0, 1.1).is_err());
        assert_eq!(mixed_loss(1.0, 0.8, 0.0).unwrap(), 1.0);
        assert_eq!(mixed_loss(1.0, 0.8, 1.0).unwrap(), 0.8);
        assert!((mixed_loss(1.0, 0.8, 0.3).unwrap() - 0.94).abs() < 1e-15);
        assert_eq!(mixed_loss(f64::NAN, 0.8, 1.0).unwrap(), 0.8);
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(
            coverage_loss(&[vec![0.4, 0.6]], &[vec![0.0, 0.0]]).unwrap(),
            0.0
        );
        let a = vec![0.25, 0.75];
        let total = coverage_loss(&[a.clone(), a.clone()], &[vec![0.0, 0.0], a.clone()]).unwrap();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
