//! Contract menus and per-round participant selection.
//!
//! Selection solves the budget/deadline-constrained quality maximization as a
//! 0/1 knapsack with a density greedy (quality per reward unit). Menu checks
//! verify reward monotonicity across types and the adjacent incentive
//! compatibility relaxations (LDIC/LUIC).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One (type, reward) menu entry with the type's quality index and cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractItem {
    pub type_index: usize,
    pub theta: f64,
    pub reward: f64,
    pub cost: f64,
}

/// Menu of items ordered by type index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractMenu {
    items: Vec<ContractItem>,
}

impl ContractMenu {
    /// Build a menu, enforcing strictly increasing type indices,
    /// non-decreasing thetas, and positive rewards.
    pub fn new(items: Vec<ContractItem>) -> Result<Self> {
        for w in items.windows(2) {
            if w[1].type_index <= w[0].type_index {
                return Err(Error::invalid("ContractMenu: type indices must be strictly increasing"));
            }
            if w[1].theta < w[0].theta {
                return Err(Error::invalid("ContractMenu: thetas must be non-decreasing"));
            }
        }
        for item in &items {
            if !(item.reward > 0.0) {
                return Err(Error::invalid(format!(
                    "ContractMenu: reward for type {} must be > 0",
                    item.type_index
                )));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[ContractItem] {
        &self.items
    }
}

/// One candidate for per-round selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    /// Claimed quality φ (truthful for honest clients).
    pub phi: f64,
    /// Reward the candidate must be offered (IR floor or higher).
    pub reward: f64,
    /// Round latency, seconds.
    pub t_total: f64,
}

/// Outcome of one selection round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected client ids, ascending.
    pub selected: Vec<usize>,
    /// 0/1 indicator aligned with the candidate input order.
    pub indicator: Vec<u8>,
    /// Sum of claimed φ over the selected set.
    pub objective: f64,
    /// Sum of offered rewards over the selected set.
    pub total_reward: f64,
    /// Latency of the slowest selected client (0 when empty).
    pub deadline_used: f64,
}

/// Smallest reward with non-negative supplier utility: ln(θR) − C ≥ 0
/// solved for R.
pub fn min_feasible_reward(theta: f64, cost: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::invalid("min_feasible_reward: theta must be > 0"));
    }
    Ok(cost.exp() / theta)
}

/// Greedy selection under a reward budget and latency deadline.
///
/// Candidates slower than the deadline are dropped. The rest are packed
/// greedily in φ/reward (density) order with skip-and-continue, ties broken
/// by lower id. Two cheap safeguards against the density heuristic's known
/// worst cases — a second pass in plain φ order and the best single
/// affordable candidate — are evaluated as well, and the best of the three
/// packings is returned. The budget and deadline constraints hold on the
/// output by construction.
pub fn select_participants(
    candidates: &[Candidate],
    budget: f64,
    deadline: f64,
) -> Result<SelectionResult> {
    if budget < 0.0 {
        return Err(Error::invalid("select_participants: budget must be >= 0"));
    }
    let feasible: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].t_total <= deadline)
        .collect();

    let pack = |order: &[usize]| -> (Vec<u8>, f64, f64) {
        let mut indicator = vec![0u8; candidates.len()];
        let mut spent = 0.0;
        let mut objective = 0.0;
        for &i in order {
            let c = &candidates[i];
            if spent + c.reward <= budget {
                indicator[i] = 1;
                spent += c.reward;
                objective += c.phi;
            }
        }
        (indicator, spent, objective)
    };
    let sorted_by = |key: &dyn Fn(&Candidate) -> f64| -> Vec<usize> {
        let mut order = feasible.clone();
        order.sort_by(|&a, &b| {
            key(&candidates[b])
                .partial_cmp(&key(&candidates[a]))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(candidates[a].id.cmp(&candidates[b].id))
        });
        order
    };

    let mut packings = vec![
        pack(&sorted_by(&|c| c.phi / c.reward)),
        pack(&sorted_by(&|c| c.phi)),
    ];
    if let Some(&best_single) = feasible
        .iter()
        .filter(|&&i| candidates[i].reward <= budget)
        .max_by(|&&a, &&b| {
            candidates[a]
                .phi
                .partial_cmp(&candidates[b].phi)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(candidates[b].id.cmp(&candidates[a].id))
        })
    {
        packings.push(pack(&[best_single]));
    }
    // highest objective wins; ties favor the cheaper packing, then the
    // earlier (density-first) one
    let (indicator, spent, objective) = packings
        .into_iter()
        .reduce(|best, next| {
            if next.2 > best.2 || (next.2 == best.2 && next.1 < best.1) {
                next
            } else {
                best
            }
        })
        .expect("at least one packing");

    let mut selected: Vec<usize> = candidates
        .iter()
        .zip(&indicator)
        .filter(|(_, &s)| s == 1)
        .map(|(c, _)| c.id)
        .collect();
    selected.sort_unstable();
    let deadline_used = candidates
        .iter()
        .zip(&indicator)
        .filter(|(_, &s)| s == 1)
        .map(|(c, _)| c.t_total)
        .fold(0.0f64, f64::max);

    Ok(SelectionResult {
        selected,
        indicator,
        objective,
        total_reward: spent,
        deadline_used,
    })
}

/// A reward-monotonicity violation between adjacent types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub lower_type: usize,
    pub upper_type: usize,
}

/// Empty iff rewards are non-decreasing in type index.
pub fn verify_monotonicity(menu: &ContractMenu) -> Vec<MonotonicityViolation> {
    menu.items()
        .windows(2)
        .filter(|w| w[1].reward < w[0].reward)
        .map(|w| MonotonicityViolation {
            lower_type: w[0].type_index,
            upper_type: w[1].type_index,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcDirection {
    Downward,
    Upward,
}

/// A violated adjacent incentive-compatibility constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcViolation {
    pub direction: IcDirection,
    pub at_type: usize,
    pub neighbor_type: usize,
    /// Utility slack (negative when violated).
    pub slack: f64,
}

/// Check local downward IC (type m does not prefer the item below) and
/// local upward IC (type m does not prefer the item above) for every
/// adjacent pair. Empty iff all constraints hold. Utility comparisons
/// carry a tiny absolute tolerance so that exactly-binding constraints are
/// not flagged for last-ulp rounding in the logarithms.
pub fn verify_ldic_luic(menu: &ContractMenu) -> Result<Vec<IcViolation>> {
    const TOL: f64 = 1e-12;
    let items = menu.items();
    let mut violations = Vec::new();
    let utility = |theta: f64, item: &ContractItem| -> Result<f64> {
        let product = theta * item.reward;
        if !(product > 0.0) {
            return Err(Error::invalid("verify_ldic_luic: theta*reward must be > 0"));
        }
        Ok(product.ln() - item.cost)
    };
    for m in 1..items.len() {
        let own = utility(items[m].theta, &items[m])?;
        let below = utility(items[m].theta, &items[m - 1])?;
        if own < below - TOL {
            violations.push(IcViolation {
                direction: IcDirection::Downward,
                at_type: items[m].type_index,
                neighbor_type: items[m - 1].type_index,
                slack: own - below,
            });
        }
    }
    for m in 0..items.len().saturating_sub(1) {
        let own = utility(items[m].theta, &items[m])?;
        let above = utility(items[m].theta, &items[m + 1])?;
        if own < above - TOL {
            violations.push(IcViolation {
                direction: IcDirection::Upward,
                at_type: items[m].type_index,
                neighbor_type: items[m + 1].type_index,
                slack: own - above,
            });
        }
    }
    Ok(violations)
}
