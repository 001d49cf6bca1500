//! Joint network key rate and its chain-rule split into per-user
//! contributions for a given conditioning order.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{condition_on_heterodyne, von_neumann_entropy, CovarianceMatrix};
use crate::keyrates::{
    delta_fs, joint_mutual_information, mutual_information_from_covariance, worst_case_params,
    RateMode,
};
use crate::network::{
    attach_trusted_detector, build_channel_output_cm, outcome_covariance, ModeRole, NetworkParams,
};
use crate::scalar::Real;

/// Largest user count for which all `M!` orderings are enumerated.
pub const MAX_EXHAUSTIVE_USERS: usize = 8;

/// A conditioning order over users, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ordering(Vec<usize>);

impl Ordering {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &k in &order {
            if k >= order.len() || seen[k] {
                return Err(Error::Validation(format!(
                    "ordering {order:?} is not a permutation of 0..{}",
                    order.len()
                )));
            }
            seen[k] = true;
        }
        if order.is_empty() {
            return Err(Error::Validation("empty ordering".into()));
        }
        Ok(Self(order))
    }

    pub fn identity(m: usize) -> Result<Self> {
        Self::new((0..m).collect())
    }

    pub fn users(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check_for(&self, params_users: usize) -> Result<()> {
        if self.len() != params_users {
            return Err(Error::Validation(format!(
                "ordering {self} has {} users, network has {params_users}",
                self.len()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for Ordering {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Ordering> for Vec<usize> {
    fn from(o: Ordering) -> Self {
        o.0
    }
}

/// Parses 1-based user numbers, e.g. `"4,3,2,1"` or `"B4,B3,B2,B1"`.
impl FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('(').trim_end_matches(')');
        let users = s
            .split(',')
            .map(|t| {
                let t = t.trim();
                let t = t.strip_prefix(['B', 'b']).unwrap_or(t);
                match t.parse::<usize>() {
                    Ok(k) if k >= 1 => Ok(k - 1),
                    _ => Err(Error::Validation(format!("bad user number {t:?} in ordering"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(users)
    }
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "B{}", k + 1)?;
        }
        f.write_str(")")
    }
}

fn position_check(order: &Ordering, position: usize) -> Result<()> {
    if position >= order.len() {
        return Err(Error::Validation(format!(
            "position {position} out of range for ordering {order}"
        )));
    }
    Ok(())
}

/// `I(A : B_{order[k]} | B_{order[0..k]})`, `position` 0-based.
pub fn chain_mutual_information_term<T: Real>(
    params: &NetworkParams<T>,
    order: &Ordering,
    position: usize,
) -> Result<T> {
    order.check_for(params.num_users())?;
    position_check(order, position)?;
    let c = outcome_covariance(params)?;
    chain_term(&c, order, position)
}

fn chain_term<T: Real>(c: &DMatrix<T>, order: &Ordering, position: usize) -> Result<T> {
    let users = order.users();
    mutual_information_from_covariance(c, users[position], &users[..position])
}

/// Conditional states along the order: entry 0 is the global state, entry
/// `k` has the first `k` users' detectors attached and their outcomes
/// conditioned on. Remaining users stay in the state.
fn conditional_states<T: Real>(
    params: &NetworkParams<T>,
    order: &Ordering,
) -> Result<Vec<CovarianceMatrix<T>>> {
    let mut state = build_channel_output_cm(params)?;
    let mut states = vec![state.clone()];
    for &k in order.users() {
        let (with_det, _, _) = attach_trusted_detector(
            &state,
            k,
            params.detector_efficiency,
            params.user(k)?.trusted_noise,
        )?;
        state = condition_on_heterodyne(&with_det, &[ModeRole::ChannelOutput(k).label()])?;
        states.push(state.clone());
    }
    Ok(states)
}

/// Entropies `S_0, S_1, …, S_M` of the conditional states along the order.
pub fn conditional_entropies<T: Real>(params: &NetworkParams<T>, order: &Ordering) -> Result<Vec<T>> {
    order.check_for(params.num_users())?;
    conditional_states(params, order)?
        .iter()
        .map(von_neumann_entropy)
        .collect()
}

/// `S_{k} − S_{k+1}` along the order, `position` 0-based.
pub fn telescopic_holevo_term<T: Real>(
    params: &NetworkParams<T>,
    order: &Ordering,
    position: usize,
) -> Result<T> {
    position_check(order, position)?;
    let s = conditional_entropies(params, order)?;
    Ok(s[position] - s[position + 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow<T = f64> {
    pub order: Ordering,
    /// Contribution of `order[i]`, indexed by position in the order.
    pub contributions: Vec<T>,
    pub row_sum: T,
}

impl<T: Real> DecompositionRow<T> {
    /// Contribution of user `k` (0-based), wherever it sits in the order.
    pub fn contribution_of(&self, k: usize) -> Option<T> {
        let pos = self.order.users().iter().position(|&u| u == k)?;
        Some(self.contributions[pos])
    }
}

fn eval_params<T: Real>(params: &NetworkParams<T>, mode: RateMode) -> Result<NetworkParams<T>> {
    params.validate()?;
    match mode {
        RateMode::Finite => Ok(worst_case_params(params)?.0),
        RateMode::Asymptotic => Ok(params.clone()),
    }
}

fn decompose_evaluated<T: Real>(
    eval: &NetworkParams<T>,
    c: &DMatrix<T>,
    order: &Ordering,
    delta: T,
) -> Result<DecompositionRow<T>> {
    order.check_for(eval.num_users())?;
    let s = conditional_entropies(eval, order)?;
    let contributions = (0..order.len())
        .map(|i| Ok(eval.beta * chain_term(c, order, i)? - (s[i] - s[i + 1]) - delta))
        .collect::<Result<Vec<T>>>()?;
    let row_sum = contributions.iter().fold(T::zero(), |a, &b| a + b);
    Ok(DecompositionRow {
        order: order.clone(),
        contributions,
        row_sum,
    })
}

/// Per-user contributions `β·I_chain − ΔS − Δ(N)` for one ordering.
pub fn decompose<T: Real>(
    params: &NetworkParams<T>,
    order: &Ordering,
    mode: RateMode,
) -> Result<DecompositionRow<T>> {
    let eval = eval_params(params, mode)?;
    let c = outcome_covariance(&eval)?;
    decompose_evaluated(&eval, &c, order, mode_delta(&eval, mode)?)
}

fn mode_delta<T: Real>(params: &NetworkParams<T>, mode: RateMode) -> Result<T> {
    match mode {
        RateMode::Finite => delta_fs(params.block_size),
        RateMode::Asymptotic => Ok(T::zero()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTable<T = f64> {
    pub rows: Vec<DecompositionRow<T>>,
    pub joint_rate: T,
    /// `max |row_sum − joint_rate|` over the rows.
    pub max_row_spread: T,
}

/// Every permutation of `0..m` in lexicographic order.
pub fn lexicographic_orderings(m: usize) -> Result<Vec<Ordering>> {
    if m == 0 {
        return Err(Error::Validation("no users".into()));
    }
    if m > MAX_EXHAUSTIVE_USERS {
        return Err(Error::Guard(format!(
            "{m} users gives {m}! orderings; all-orderings mode is limited to {MAX_EXHAUSTIVE_USERS} users, sample orderings instead"
        )));
    }
    let mut cur: Vec<usize> = (0..m).collect();
    let mut out = vec![Ordering(cur.clone())];
    // next permutation
    while let Some(i) = (0..m.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) {
        let j = (i + 1..m).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
        out.push(Ordering(cur.clone()));
    }
    Ok(out)
}

/// `count` distinct orderings drawn with a fixed seed, returned sorted.
pub fn sample_orderings(m: usize, count: usize, seed: u64) -> Result<Vec<Ordering>> {
    if m == 0 || count == 0 {
        return Err(Error::Validation("sampling needs at least one user and one ordering".into()));
    }
    let total = (1..=m as u128).try_fold(1u128, |acc, k| acc.checked_mul(k));
    let count = match total {
        Some(t) if t < count as u128 => t as usize,
        _ => count,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < count {
        let mut v: Vec<usize> = (0..m).collect();
        v.shuffle(&mut rng);
        seen.insert(Ordering(v));
    }
    Ok(seen.into_iter().collect())
}

/// Decomposes along each of `orders`; rows come back in the given order.
pub fn decompose_orderings<T: Real>(
    params: &NetworkParams<T>,
    orders: &[Ordering],
    mode: RateMode,
) -> Result<DecompositionTable<T>> {
    let eval = eval_params(params, mode)?;
    let c = outcome_covariance(&eval)?;
    let delta = mode_delta(&eval, mode)?;
    let rows = orders
        .par_iter()
        .map(|o| decompose_evaluated(&eval, &c, o, delta))
        .collect::<Result<Vec<_>>>()?;
    let joint_rate = joint_key_rate(params, mode)?.rate;
    let max_row_spread = rows
        .iter()
        .map(|r| (r.row_sum - joint_rate).abs())
        .fold(T::zero(), |a, b| a.max(b));
    Ok(DecompositionTable {
        rows,
        joint_rate,
        max_row_spread,
    })
}

/// All `M!` orderings; refused above [`MAX_EXHAUSTIVE_USERS`].
pub fn all_orderings<T: Real>(params: &NetworkParams<T>, mode: RateMode) -> Result<DecompositionTable<T>> {
    let orders = lexicographic_orderings(params.num_users())?;
    decompose_orderings(params, &orders, mode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointKeyRate<T = f64> {
    /// `β I(A:B_1…B_M) − χ − M·Δ(N)`, with `χ = S(Γ) − S(Γ | all outcomes)`.
    pub rate: T,
    pub mutual_information: T,
    pub holevo: T,
    /// `S(ρ_A) − S(Γ | all outcomes)`.
    pub holevo_alice_endpoint: T,
    pub rate_alice_endpoint: T,
    /// `M·Δ(N)`, zero in asymptotic mode.
    pub delta_total: T,
    /// Row sum of the identity-order decomposition.
    pub decomposition_sum: T,
}

/// Joint rate of Alice with all users, evaluated directly.
pub fn joint_key_rate<T: Real>(params: &NetworkParams<T>, mode: RateMode) -> Result<JointKeyRate<T>> {
    let eval = eval_params(params, mode)?;
    let m = eval.num_users();
    let mi = joint_mutual_information(&eval)?;

    let global = build_channel_output_cm(&eval)?;
    let s_global = von_neumann_entropy(&global)?;
    let s_alice = von_neumann_entropy(&global.reduce(&["A"])?)?;
    let mut state = global;
    for (k, u) in eval.users.iter().enumerate() {
        state = attach_trusted_detector(&state, k, eval.detector_efficiency, u.trusted_noise)?.0;
    }
    let measured: Vec<String> = (0..m).map(|k| ModeRole::ChannelOutput(k).label()).collect();
    let s_final = von_neumann_entropy(&condition_on_heterodyne(&state, &measured)?)?;

    let delta = mode_delta(&eval, mode)?;
    let delta_total = delta * T::from_usize(m).expect("user count representable");
    let holevo = s_global - s_final;
    let holevo_alice_endpoint = s_alice - s_final;
    let c = outcome_covariance(&eval)?;
    let decomposition_sum = decompose_evaluated(&eval, &c, &Ordering::identity(m)?, delta)?.row_sum;
    Ok(JointKeyRate {
        rate: eval.beta * mi - holevo - delta_total,
        mutual_information: mi,
        holevo,
        holevo_alice_endpoint,
        rate_alice_endpoint: eval.beta * mi - holevo_alice_endpoint - delta_total,
        delta_total,
        decomposition_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_parse_and_display() {
        let o: Ordering = "4,3,2,1".parse().unwrap();
        assert_eq!(o.users(), &[3, 2, 1, 0]);
        assert_eq!(o.to_string(), "(B4,B3,B2,B1)");
        assert_eq!(o.to_string().parse::<Ordering>().unwrap(), o);
        assert!("1,1,2".parse::<Ordering>().is_err());
        assert!("0,1".parse::<Ordering>().is_err());
        assert!("1,3".parse::<Ordering>().is_err());
        assert!("".parse::<Ordering>().is_err());
    }

    #[test]
    fn lexicographic_enumeration() {
        let all = lexicographic_orderings(4).unwrap();
        assert_eq!(all.len(), 24);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(all[0].users(), &[0, 1, 2, 3]);
        assert_eq!(all[23].users(), &[3, 2, 1, 0]);
        assert_eq!(lexicographic_orderings(1).unwrap().len(), 1);
        assert!(matches!(lexicographic_orderings(9), Err(Error::Guard(_))));
    }

    #[test]
    fn sampling_is_seeded_and_distinct() {
        let a = sample_orderings(6, 10, 7).unwrap();
        assert_eq!(a, sample_orderings(6, 10, 7).unwrap());
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample_orderings(3, 100, 1).unwrap().len(), 6);
        assert_eq!(sample_orderings(12, 3, 1).unwrap().len(), 3);
    }

    #[test]
    fn serde_rejects_non_permutation() {
        assert!(serde_json::from_str::<Ordering>("[0,0]").is_err());
        let o: Ordering = serde_json::from_str("[1,0]").unwrap();
        assert_eq!(o.users(), &[1, 0]);
    }
}
