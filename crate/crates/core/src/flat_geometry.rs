//! Exact Riemannian kernels on flat tori T^n = R^n / (l_1 Z x ... x l_n Z).
//!
//! Everything here is closed-form: the exponential map is coordinate-wise
//! addition mod the lattice, the logarithm picks the unique shortest
//! representative, and parallel transport is the identity. Downstream
//! modules rely on these being exact so that no curvature error terms enter
//! any verified formula.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// A flat torus with a rectangular lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTorus {
    lengths: Vec<f64>,
}

impl FlatTorus {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() || lengths.iter().any(|&l| l <= 0.0 || !l.is_finite()) {
            return Err(CoreError::InvalidConfig(
                "lattice lengths must be positive and finite".into(),
            ));
        }
        Ok(Self { lengths })
    }

    pub fn circle(length: f64) -> Result<Self> {
        Self::new(vec![length])
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Half the shortest lattice length: the injectivity radius of the quotient metric.
    pub fn injectivity_radius(&self) -> f64 {
        0.5 * self.lengths.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// The chart constant eps0; charts use dist < eps0 and logs stay unique below 2*eps0.
    pub fn eps0(&self) -> f64 {
        0.5 * self.injectivity_radius()
    }

    /// Reduce a raw coordinate vector into the fundamental domain [0, l_i).
    pub fn reduce(&self, coords: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| {
            let l = self.lengths[i];
            let mut c = coords[i] % l;
            if c < 0.0 {
                c += l;
            }
            // c == l can appear from rounding of tiny negatives.
            if c >= l {
                c -= l;
            }
            c
        })
    }

    /// Nonzero lattice vector norms up to `max_norm`, sorted and deduplicated.
    pub fn lattice_norms_up_to(&self, max_norm: f64) -> Vec<f64> {
        let mut norms = Vec::new();
        for w in self.lattice_vectors_up_to(max_norm) {
            let n = w.norm();
            if n > 0.0 {
                norms.push(n);
            }
        }
        norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
        norms.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        norms
    }

    /// All lattice vectors (including zero) with norm <= max_norm.
    pub fn lattice_vectors_up_to(&self, max_norm: f64) -> Vec<DVector<f64>> {
        let n = self.dim();
        let caps: Vec<i64> = self
            .lengths
            .iter()
            .map(|l| (max_norm / l).floor() as i64)
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0i64; n];
        fn rec(
            k: usize,
            n: usize,
            caps: &[i64],
            lengths: &[f64],
            idx: &mut Vec<i64>,
            max_norm: f64,
            out: &mut Vec<DVector<f64>>,
        ) {
            if k == n {
                let w = DVector::from_fn(n, |i, _| idx[i] as f64 * lengths[i]);
                if w.norm() <= max_norm {
                    out.push(w);
                }
                return;
            }
            for v in -caps[k]..=caps[k] {
                idx[k] = v;
                rec(k + 1, n, caps, lengths, idx, max_norm, out);
            }
        }
        rec(0, n, &caps, &self.lengths, &mut idx, max_norm, &mut out);
        out
    }
}

/// A point on the torus, stored reduced into the fundamental domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    coords: DVector<f64>,
}

impl TorusPoint {
    pub fn new(torus: &FlatTorus, coords: DVector<f64>) -> Self {
        assert_eq!(coords.len(), torus.dim(), "point dimension mismatch");
        Self {
            coords: torus.reduce(&coords),
        }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }
}

/// A point (q, p) of the cotangent bundle; the fiber covector is identified
/// with a vector through the flat metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotangentPoint {
    pub base: TorusPoint,
    pub fiber: DVector<f64>,
}

impl CotangentPoint {
    pub fn new(base: TorusPoint, fiber: DVector<f64>) -> Self {
        assert_eq!(base.coords().len(), fiber.len(), "fiber dimension mismatch");
        Self { base, fiber }
    }
}

/// Shortest representative of `to - from`, i.e. the inverse exponential map.
///
/// Errors with `DistanceTooLarge` on an antipodal tie (offset exactly l_i/2
/// in some coordinate), where no unique shortest representative exists.
pub fn log_map(torus: &FlatTorus, from: &TorusPoint, to: &TorusPoint) -> Result<DVector<f64>> {
    let n = torus.dim();
    let mut v = DVector::zeros(n);
    for i in 0..n {
        let l = torus.lengths()[i];
        let mut d = (to.coords()[i] - from.coords()[i]) % l;
        if d > 0.5 * l {
            d -= l;
        } else if d < -0.5 * l {
            d += l;
        }
        let tie = (d.abs() - 0.5 * l).abs() < l * 1e-13;
        if tie {
            return Err(CoreError::DistanceTooLarge { coord: i, offset: d });
        }
        v[i] = d;
    }
    Ok(v)
}

/// Exponential map: (at + v) reduced mod the lattice. Globally defined.
pub fn exp_map(torus: &FlatTorus, at: &TorusPoint, v: &DVector<f64>) -> TorusPoint {
    TorusPoint::new(torus, at.coords() + v)
}

/// Quotient-metric distance.
pub fn dist(torus: &FlatTorus, a: &TorusPoint, b: &TorusPoint) -> f64 {
    let mut s = 0.0;
    for i in 0..torus.dim() {
        let l = torus.lengths()[i];
        let d = (b.coords()[i] - a.coords()[i]).abs() % l;
        let d = d.min(l - d);
        s += d * d;
    }
    s.sqrt()
}

/// Parallel transport along the unique short geodesic. On a flat torus this
/// is the identity on coordinates; it is named so call sites that mirror the
/// transported-pairing formulas stay readable.
pub fn parallel_transport(
    _torus: &FlatTorus,
    _from: &TorusPoint,
    _to: &TorusPoint,
    v: &DVector<f64>,
) -> DVector<f64> {
    v.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(t: &FlatTorus, cs: &[f64]) -> TorusPoint {
        TorusPoint::new(t, DVector::from_row_slice(cs))
    }

    /// Brute-force oracle: shortest representative over all lattice translates
    /// within +-2 cells per coordinate.
    fn log_oracle(t: &FlatTorus, from: &TorusPoint, to: &TorusPoint) -> DVector<f64> {
        let n = t.dim();
        let base: Vec<f64> = (0..n).map(|i| to.coords()[i] - from.coords()[i]).collect();
        let mut best: Option<DVector<f64>> = None;
        let mut idx = vec![-2i64; n];
        loop {
            let cand = DVector::from_fn(n, |i, _| base[i] + idx[i] as f64 * t.lengths()[i]);
            if best.as_ref().is_none_or(|b| cand.norm() < b.norm()) {
                best = Some(cand);
            }
            let mut k = 0;
            loop {
                if k == n {
                    return best.unwrap();
                }
                idx[k] += 1;
                if idx[k] <= 2 {
                    break;
                }
                idx[k] = -2;
                k += 1;
            }
        }
    }

    #[test]
    fn log_wraparound() {
        let t = FlatTorus::circle(1.0).unwrap();
        let v = log_map(&t, &pt(&t, &[0.9]), &pt(&t, &[0.1])).unwrap();
        assert_relative_eq!(v[0], 0.2, epsilon = 1e-14);
    }

    #[test]
    fn log_identity_is_zero() {
        let t = FlatTorus::new(vec![2.0, 3.0]).unwrap();
        let p = pt(&t, &[1.3, 0.4]);
        let v = log_map(&t, &p, &p).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn log_matches_brute_force_oracle() {
        let t = FlatTorus::new(vec![2.0, 3.0]).unwrap();
        let from = pt(&t, &[0.0, 0.0]);
        let to = pt(&t, &[0.5, 2.9]);
        let v = log_map(&t, &from, &to).unwrap();
        assert_relative_eq!(v[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(v[1], -0.1, epsilon = 1e-13);
        let o = log_oracle(&t, &from, &to);
        assert_relative_eq!((v - o).norm(), 0.0, epsilon = 1e-13);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = pt(&t, &[rng.random::<f64>() * 2.0, rng.random::<f64>() * 3.0]);
            let b = pt(&t, &[rng.random::<f64>() * 2.0, rng.random::<f64>() * 3.0]);
            if let Ok(v) = log_map(&t, &a, &b) {
                let o = log_oracle(&t, &a, &b);
                assert!((v - o).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn exp_reduces_mod_lattice() {
        let t = FlatTorus::circle(1.0).unwrap();
        let p = exp_map(&t, &pt(&t, &[0.9]), &DVector::from_row_slice(&[0.2]));
        assert_relative_eq!(p.coords()[0], 0.1, epsilon = 1e-14);
        let q = pt(&t, &[0.3]);
        assert_eq!(exp_map(&t, &q, &DVector::zeros(1)), q);
    }

    #[test]
    fn exp_log_roundtrip_random() {
        let t = FlatTorus::new(vec![1.0, 2.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut tested = 0;
        while tested < 1000 {
            let a = pt(&t, &[rng.random::<f64>(), rng.random::<f64>() * 2.5]);
            let b = pt(&t, &[rng.random::<f64>(), rng.random::<f64>() * 2.5]);
            if dist(&t, &a, &b) >= t.injectivity_radius() {
                continue;
            }
            tested += 1;
            let v = log_map(&t, &a, &b).unwrap();
            let back = exp_map(&t, &a, &v);
            assert!(dist(&t, &back, &b) < 1e-12);
            assert_relative_eq!(v.norm(), dist(&t, &a, &b), epsilon = 1e-14);
        }
    }

    #[test]
    fn dist_properties() {
        let t = FlatTorus::circle(1.0).unwrap();
        assert_eq!(dist(&t, &pt(&t, &[0.4]), &pt(&t, &[0.4])), 0.0);
        assert_relative_eq!(dist(&t, &pt(&t, &[0.9]), &pt(&t, &[0.1])), 0.2, epsilon = 1e-14);

        let t2 = FlatTorus::new(vec![1.0, 3.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let mut p = || pt(&t2, &[rng.random::<f64>(), rng.random::<f64>() * 3.0]);
            let (a, b, c) = (p(), p(), p());
            let (ab, bc, ac) = (dist(&t2, &a, &b), dist(&t2, &b, &c), dist(&t2, &a, &c));
            assert!(ac <= ab + bc + 1e-12);
            assert_relative_eq!(ab, dist(&t2, &b, &a), epsilon = 1e-14);
        }
    }

    #[test]
    fn antipodal_tie_errors() {
        let t = FlatTorus::circle(1.0).unwrap();
        let e = log_map(&t, &pt(&t, &[0.0]), &pt(&t, &[0.5]));
        assert!(matches!(e, Err(CoreError::DistanceTooLarge { .. })));
    }

    #[test]
    fn transport_is_isometry() {
        let t = FlatTorus::new(vec![1.0, 1.0]).unwrap();
        let v = DVector::from_row_slice(&[0.3, -0.4]);
        let w = parallel_transport(&t, &pt(&t, &[0.0, 0.0]), &pt(&t, &[0.2, 0.9]), &v);
        assert_eq!(v, w);
    }

    #[test]
    fn lattice_enumeration_counts() {
        let t = FlatTorus::new(vec![1.0, 1.0]).unwrap();
        // norms <= 1.5: zero, 4 of norm 1, 4 of norm sqrt(2)
        assert_eq!(t.lattice_vectors_up_to(1.5).len(), 9);
        // norms <= 2.5 additionally: 4 of norm 2, 8 of norm sqrt(5)
        assert_eq!(t.lattice_vectors_up_to(2.5).len(), 21);
    }
}
