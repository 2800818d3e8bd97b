//! Shared oracles for the integration tests.
#![allow(dead_code)]

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use endcalc::symbol::{sharp, Atom, AtomEnv, Coeff, Mono, Polynomial, Rules, Symbol};
use endcalc::Result;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Assigns every atom an independent value in [0.5, 1.5], fixed per (seed, atom).
pub struct RandomAtoms {
    pub seed: u64,
}

impl AtomEnv for RandomAtoms {
    fn atom(&self, a: &Atom, _r: f64, _theta: &[f64]) -> Result<f64> {
        let mut h = DefaultHasher::new();
        self.seed.hash(&mut h);
        a.hash(&mut h);
        Ok(0.5 + (h.finish() >> 11) as f64 / (1u64 << 53) as f64)
    }
}

fn atom_pool() -> Vec<Coeff> {
    let up = |j, k, dr: u8, t: u8| Coeff::atom(Atom::MetricUpper { j, k, dr, dt: [t, 0, 0] });
    vec![
        Coeff::one(),
        Coeff::atom(Atom::W),
        Coeff::atom(Atom::LOG),
        Coeff::atom(Atom::Warp { k: 2 }),
        Coeff::w_pow(-1),
        up(0, 0, 0, 0),
        up(0, 1, 0, 0),
        up(1, 1, 1, 0),
        up(0, 1, 0, 1),
        Coeff::atom_pow(Atom::det(), 1),
    ]
}

/// A random polynomial in (ρ, η) of degree ≤ `deg`, two to three atoms per coefficient.
pub fn random_poly(rng: &mut ChaCha8Rng, deg: u8) -> Polynomial {
    let pool = atom_pool();
    let mut terms = Vec::new();
    for j in 0..=deg {
        for a in 0..=(deg - j) {
            if rng.gen_bool(0.3) {
                continue;
            }
            let mut c = Coeff::constant(Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            for _ in 0..rng.gen_range(1..=2) {
                c = c.mul(&pool[rng.gen_range(0..pool.len())]);
            }
            terms.push((Mono { j, alpha: [a, 0, 0] }, c));
        }
    }
    Polynomial::from_terms(terms).reduced(&Rules::generic())
}

/// D_r = -i ∂_r, D_θ = -i ∂_θ on coefficients.
fn dr(c: &Coeff, g: &Rules) -> Coeff {
    c.d_r(g).scale(Complex64::new(0.0, -1.0))
}

fn dt(c: &Coeff, g: &Rules) -> Coeff {
    c.d_theta(0, g).scale(Complex64::new(0.0, -1.0))
}

/// Coefficients of h^0, h^1, ... of e^{-iφ/h} op(a) op(b) e^{iφ/h}, where
/// φ = rρ + θη and op(c ρ^j η^α) = c (h w D_θ)^α (h D_r)^j, for n = 2.
///
/// Computed by pushing the plane wave through the differential operators with
/// the Leibniz rule, independently of the composition formula.
pub fn conjugated_composition(a: &Polynomial, b: &Polynomial, rho: f64, eta: f64) -> Vec<Coeff> {
    let g = Rules::generic();
    let w = Coeff::atom(Atom::W);
    // op(b) e^{iφ/h} = b(r, θ, ρ, w η) e^{iφ/h}
    let mut big_b = Coeff::zero();
    for (m, c) in b.terms() {
        let k = rho.powi(m.j as i32) * eta.powi(m.alpha[0] as i32);
        big_b = big_b.add(&c.mul(&w.powi(m.alpha[0] as u32)).scale(k));
    }
    let mut total: Vec<Coeff> = Vec::new();
    for (m, c) in a.terms() {
        let mut f = vec![big_b.clone()];
        for _ in 0..m.j {
            // (ρ + h D_r)
            let mut next = vec![Coeff::zero(); f.len() + 1];
            for (l, fl) in f.iter().enumerate() {
                next[l] = next[l].add(&fl.scale(rho));
                next[l + 1] = next[l + 1].add(&dr(fl, &g));
            }
            f = next;
        }
        for _ in 0..m.alpha[0] {
            // (w η + h w D_θ)
            let mut next = vec![Coeff::zero(); f.len() + 1];
            for (l, fl) in f.iter().enumerate() {
                next[l] = next[l].add(&w.mul(fl).scale(eta));
                next[l + 1] = next[l + 1].add(&w.mul(&dt(fl, &g)));
            }
            f = next;
        }
        if total.len() < f.len() {
            total.resize(f.len(), Coeff::zero());
        }
        for (l, fl) in f.iter().enumerate() {
            total[l] = total[l].add(&c.mul(fl)).reduced(&g);
        }
    }
    total
}

/// Largest relative deviation between the plane-wave oracle and Σ_k h^k (a#b)_k,
/// order by order in h, over `points` random (atoms, ρ, η).
pub fn composition_identity_error(seed: u64, points: usize) -> f64 {
    use rand::SeedableRng;
    let g = Rules::generic();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for p in 0..points {
        let da = rng.gen_range(1..=3);
        let a = random_poly(&mut rng, da);
        let db = rng.gen_range(0..=3);
        let b = random_poly(&mut rng, db);
        let sa = Symbol::polynomial(2, da as i32, a.clone());
        let sb = Symbol::polynomial(2, 3, b.clone());
        let rho = rng.gen_range(-2.0..2.0);
        let eta = rng.gen_range(-2.0..2.0);
        let env = RandomAtoms { seed: seed.wrapping_mul(1000).wrapping_add(p as u64) };
        let oracle = conjugated_composition(&a, &b, rho, eta);
        let wv = env.atom(&Atom::W, 0.0, &[0.0]).unwrap();
        for k in 0..oracle.len().max(da as usize + 1) {
            let lhs = oracle.get(k).map(|c| c.eval_at(&env, 0.0, &[0.0]).unwrap()).unwrap_or_default();
            let s = sharp(&sa, &sb, k as u32, &g).unwrap();
            let rhs = s.at(&env, 0.0, &[0.0]).unwrap().eval(rho, &[wv * eta], Complex64::new(0.0, 1.0)).unwrap();
            let scale = 1.0 + lhs.norm().max(rhs.norm());
            worst = worst.max((lhs - rhs).norm() / scale);
        }
    }
    worst
}
