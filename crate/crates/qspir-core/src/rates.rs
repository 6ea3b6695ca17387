//! Closed-form achievable rates and regime selection.

use alloc::vec::Vec;
use core::fmt;

use crate::params::{Model, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        let g = gcd(num, den).max(1);
        Rational {
            num: num / g,
            den: den / g,
        }
    }

    pub fn zero() -> Self {
        Rational { num: 0, den: 1 }
    }
}

impl PartialOrd for Rational {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rational {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// How the point relates to the case boundaries of the rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    None,
    /// Equality between the regime 3 and regime 4 conditions; the larger rate was taken.
    Tie,
    /// Case conditions hold but the layout needs a negative width.
    Unrealizable,
}

impl Flag {
    pub fn name(&self) -> &'static str {
        match self {
            Flag::None => "none",
            Flag::Tie => "tie",
            Flag::Unrealizable => "unrealizable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatePoint {
    pub params: Params,
    /// 1..=4, `None` when infeasible.
    pub regime: Option<u8>,
    pub rate: Rational,
    pub m: usize,
    pub h: usize,
    pub delta: i64,
    pub l1: i64,
    pub l2: i64,
    pub flag: Flag,
    pub reason: &'static str,
}

impl RatePoint {
    pub fn feasible(&self) -> bool {
        self.regime.is_some()
    }
}

struct Candidate {
    regime: u8,
    l1: i64,
    l2: i64,
    delta: i64,
}

impl Candidate {
    fn total(&self) -> i64 {
        self.l1 + self.l2
    }

    fn realizable(&self) -> bool {
        self.l1 >= 0 && self.l2 >= 0
    }
}

/// Rate of the theorem matching `p.model`, with the case selected by its conditions.
pub fn theorem_rate(p: &Params) -> RatePoint {
    let (n, e, u, b) = (p.n as i64, p.e as i64, p.u as i64, p.b as i64);
    let (m, h) = (p.m() as i64, p.h() as i64);
    let a = h + m + b;
    let c = 2 * b + u + e;
    let delta = n + e - 2 * a;
    let base = n - a - 2 * b - u;
    let (nu, mu) = ((n + 1) / 2, n / 2);
    let r4_bound = match p.model {
        Model::Xeutspir => h + m + u,
        Model::XbeutspirStatic => h + 3 * b + u + m,
        Model::XbeutspirDynamic => h + 3 * b + u + 2 * m,
    };

    let mut point = RatePoint {
        params: *p,
        regime: None,
        rate: Rational::zero(),
        m: m as usize,
        h: h as usize,
        delta: 0,
        l1: 0,
        l2: 0,
        flag: Flag::None,
        reason: "",
    };
    if p.validate().is_err() {
        point.reason = "invalid parameters";
        return point;
    }

    let r3 = Candidate {
        regime: 3,
        l1: nu - 3 * b - u - e,
        l2: mu - 3 * b - u,
        delta: 0,
    };
    let r4 = Candidate {
        regime: 4,
        l1: base,
        l2: 0,
        delta: 0,
    };

    let mut flag = Flag::None;
    let chosen = if 2 * a >= n {
        if e <= 2 * a - n {
            (n - u > a).then_some(Candidate {
                regime: 1,
                l1: base,
                l2: base,
                delta: 0,
            })
        } else {
            // N - U - delta/2 > A, doubled
            (2 * (n - u) - delta > 2 * a).then_some(Candidate {
                regime: 2,
                l1: base - delta,
                l2: base,
                delta,
            })
        }
    } else if c < a {
        (n > 6 * b + 2 * u + e).then_some(r3)
    } else if c > a {
        (n > r4_bound).then_some(r4)
    } else {
        flag = Flag::Tie;
        let ok3 = n > 6 * b + 2 * u + e && r3.total() > 0 && r3.realizable();
        let ok4 = n > r4_bound && r4.total() > 0;
        match (ok3, ok4) {
            (true, true) if r4.total() > r3.total() => Some(r4),
            (true, _) => Some(r3),
            (false, true) => Some(r4),
            (false, false) => None,
        }
    };

    let Some(cand) = chosen else {
        point.reason = "no case conditions hold";
        return point;
    };
    if cand.total() <= 0 {
        point.reason = "rate formula is not positive";
        return point;
    }
    if !cand.realizable() {
        flag = Flag::Unrealizable;
    }
    let num = (cand.total() as u64).min(p.n as u64);
    point.regime = Some(cand.regime);
    point.rate = Rational::new(num, p.n as u64);
    point.delta = cand.delta;
    point.l1 = cand.l1;
    point.l2 = cand.l2;
    point.flag = flag;
    point
}

/// Inclusive parameter ranges, swept in model, N, K, X, T, E, U, B order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub models: Vec<Model>,
    pub n: (usize, usize),
    pub k: (usize, usize),
    pub x: (usize, usize),
    pub t: (usize, usize),
    pub e: (usize, usize),
    pub u: (usize, usize),
    pub b: (usize, usize),
}

impl Grid {
    pub fn point(p: Params) -> Self {
        Grid {
            models: alloc::vec![p.model],
            n: (p.n, p.n),
            k: (p.k, p.k),
            x: (p.x, p.x),
            t: (p.t, p.t),
            e: (p.e, p.e),
            u: (p.u, p.u),
            b: (p.b, p.b),
        }
    }

    pub fn params(&self) -> Vec<Params> {
        let r = |(lo, hi): (usize, usize)| lo..=hi;
        let mut out = Vec::new();
        for &model in &self.models {
            for n in r(self.n) {
                for k in r(self.k) {
                    for x in r(self.x) {
                        for t in r(self.t) {
                            for e in r(self.e) {
                                for u in r(self.u) {
                                    for b in r(self.b) {
                                        if model == Model::Xeutspir && b > 0 {
                                            continue;
                                        }
                                        out.push(Params::new(model, n, k, x, t, e, u, b));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn sweep(grid: &Grid) -> Vec<RatePoint> {
    grid.params().iter().map(theorem_rate).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(model: Model, n: usize, x: usize, t: usize, e: usize, u: usize, b: usize) -> Params {
        Params::new(model, n, 2, x, t, e, u, b)
    }

    // Direct substitution into the printed case formulas.
    fn oracle(q: &Params) -> Option<(u8, i64, i64)> {
        let (n, x, e, u, b) = (q.n as i64, q.x as i64, q.e as i64, q.u as i64, q.b as i64);
        let t = q.t as i64;
        let (m, h) = match q.model {
            Model::Xeutspir => (e.max(t), x),
            Model::XbeutspirStatic => (e.max(t), x.max(b)),
            Model::XbeutspirDynamic => ((e + b).max(t), x.max(b)),
        };
        let d = n + e - 2 * h - 2 * m - 2 * b;
        // rates as numerators over 2N
        let cases = [
            (2 * (n - u) > 2 * (h + m + b) && 2 * (h + m + b) >= n && e <= 2 * h + 2 * m + 2 * b - n,
             4 * (n - h - m - 3 * b - u)),
            (2 * (n - u) - d > 2 * (h + m + b) && 2 * (h + m + b) >= n && e > 2 * h + 2 * m + 2 * b - n,
             4 * (n - h - m - 3 * b - u) - 2 * d),
            (2 * (h + m + b) < n && 2 * b + u + e < h + m + b && n > 6 * b + 2 * u + e,
             2 * (n - 6 * b - 2 * u - e)),
            (2 * (h + m + b) < n && 2 * b + u + e > h + m + b && n > match q.model {
                Model::Xeutspir => x + m + u,
                Model::XbeutspirStatic => h + 3 * b + u + m,
                Model::XbeutspirDynamic => h + 3 * b + u + 2 * m,
            }, 2 * (n - h - 3 * b - u - m)),
        ];
        let hits: Vec<_> = cases.iter().enumerate().filter(|(_, c)| c.0).collect();
        assert!(hits.len() <= 1);
        hits.first().map(|(i, c)| (*i as u8 + 1, c.1, 2 * n))
    }

    #[test]
    fn worked_points() {
        let a = theorem_rate(&p(Model::Xeutspir, 8, 3, 2, 1, 1, 0));
        assert_eq!((a.regime, a.rate, a.l1, a.l2), (Some(1), Rational::new(1, 2), 2, 2));
        let b = theorem_rate(&p(Model::XbeutspirDynamic, 17, 5, 4, 0, 0, 2));
        assert_eq!((b.regime, b.rate, b.l1), (Some(1), Rational::new(4, 17), 2));
        let c = theorem_rate(&p(Model::Xeutspir, 10, 2, 2, 1, 1, 0));
        assert_eq!((c.regime, c.rate, c.l1, c.l2), (Some(3), Rational::new(7, 10), 3, 4));
        for n in 1..30 {
            let z = theorem_rate(&p(Model::Xeutspir, n, 0, 0, 0, 0, 0));
            assert_eq!(z.rate, Rational::new(1, 1));
            assert_eq!(z.flag, Flag::Tie);
        }
    }

    #[test]
    fn regime_two_can_be_unrealizable() {
        let r = theorem_rate(&p(Model::Xeutspir, 6, 0, 0, 3, 1, 0));
        assert_eq!(r.regime, Some(2));
        assert_eq!((r.l1, r.l2), (-1, 2));
        assert_eq!(r.flag, Flag::Unrealizable);
        assert_eq!(r.rate, Rational::new(1, 6));
    }

    #[test]
    fn empty_and_single_grid() {
        let mut g = Grid::point(p(Model::Xeutspir, 8, 3, 2, 1, 1, 0));
        assert_eq!(sweep(&g), alloc::vec![theorem_rate(&p(Model::Xeutspir, 8, 3, 2, 1, 1, 0))]);
        g.models.clear();
        assert!(sweep(&g).is_empty());
    }

    #[test]
    fn monotone_on_n20_slice() {
        let g = Grid {
            models: alloc::vec![Model::Xeutspir],
            n: (20, 20),
            k: (2, 2),
            x: (0, 6),
            t: (0, 6),
            e: (0, 6),
            u: (0, 4),
            b: (0, 0),
        };
        let pts = sweep(&g);
        for r in &pts {
            let q = r.params;
            for nb in [
                Params { x: q.x + 1, ..q },
                Params { t: q.t + 1, ..q },
                Params { e: q.e + 1, ..q },
                Params { u: q.u + 1, ..q },
            ] {
                if let Some(next) = pts.iter().find(|z| z.params == nb) {
                    assert!(next.rate <= r.rate, "{:?} -> {:?}", q, nb);
                }
            }
        }
    }

    #[test]
    fn dynamic_can_exceed_static_across_regimes() {
        let s = theorem_rate(&p(Model::XbeutspirStatic, 19, 4, 0, 4, 0, 1));
        let d = theorem_rate(&p(Model::XbeutspirDynamic, 19, 4, 0, 4, 0, 1));
        assert_eq!((s.regime, s.rate), (Some(3), Rational::new(9, 19)));
        assert_eq!((d.regime, d.rate), (Some(2), Rational::new(11, 19)));
    }

    #[test]
    fn byzantine_cases_not_monotone_in_e() {
        let lo = theorem_rate(&p(Model::XbeutspirStatic, 20, 0, 3, 1, 1, 1));
        let hi = theorem_rate(&p(Model::XbeutspirStatic, 20, 0, 3, 3, 1, 1));
        assert_eq!((lo.regime, lo.rate, lo.flag), (Some(3), Rational::new(11, 20), Flag::None));
        assert_eq!((hi.regime, hi.rate, hi.flag), (Some(4), Rational::new(12, 20), Flag::None));
    }

    proptest! {
        #[test]
        fn matches_case_oracle(model in prop::sample::select(Model::ALL.to_vec()), n in 1usize..24,
                               x in 0usize..8, t in 0usize..8, e in 0usize..8, u in 0usize..6, b in 0usize..4) {
            let b = if model == Model::Xeutspir { 0 } else { b };
            let q = p(model, n, x, t, e, u, b);
            let r = theorem_rate(&q);
            match oracle(&q) {
                Some((reg, num, den)) if num > 0 => {
                    prop_assert_eq!(r.regime, Some(reg));
                    let num = (num as u64).min(den as u64);
                    prop_assert_eq!(r.rate, Rational::new(num, den as u64));
                    prop_assert_eq!(Rational::new((r.l1 + r.l2).min(n as i64) as u64, n as u64), r.rate);
                }
                Some(_) => prop_assert!(r.regime.is_none()),
                None => prop_assert!(r.regime.is_none() || r.flag == Flag::Tie),
            }
            prop_assert!(r.rate <= Rational::new(1, 1));
        }

        #[test]
        fn model_orderings(n in 1usize..24, x in 0usize..8, t in 0usize..8, e in 0usize..8, u in 0usize..6, b in 0usize..4) {
            let s = theorem_rate(&p(Model::XbeutspirStatic, n, x, t, e, u, b));
            let d = theorem_rate(&p(Model::XbeutspirDynamic, n, x, t, e, u, b));
            if s.regime == d.regime {
                prop_assert!(s.rate >= d.rate, "{:?} {:?}", s, d);
            }
            let one = theorem_rate(&p(Model::Xeutspir, n, x, t, e, u, 0));
            let dz = theorem_rate(&p(Model::XbeutspirDynamic, n, x, t, e, u, 0));
            // the dynamic regime-4 gate carries one extra M
            if one.regime == Some(4) && n <= x + 2 * one.m + u {
                prop_assert!(dz.regime.is_none());
            } else {
                prop_assert_eq!(one.rate, dz.rate);
            }
        }

        #[test]
        fn superdense_doubling(n in 1usize..24, x in 0usize..8, t in 0usize..8, e in 0usize..8, u in 0usize..6) {
            let r = theorem_rate(&p(Model::Xeutspir, n, x, t, e, u, 0));
            if r.regime == Some(1) {
                let single = (n - x - r.m - u) as u64;
                prop_assert_eq!(r.rate, Rational::new(2 * single, n as u64));
            }
        }
    }
}
