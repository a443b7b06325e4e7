//! Order splitting: decomposing each ATM's total replenishment demand into
//! bounded smaller deposits and scheduling them into periods.
//!
//! A split option with `k` parts exists for every `k` between
//! `ceil(total/upper)` and `floor(total/lower)`; parts are a near-equal
//! integer partition, so every part stays inside `[lower, upper]` whenever
//! any decomposition does. Scheduling is just-in-time: walking the horizon
//! forward, a part is placed in the period where the running balance would
//! otherwise go negative, and parts never forced by a shortfall land in the
//! last period. That placement minimizes the sum of end-of-period balances,
//! hence the financial cost, for the given parts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Atm, Instance, Money};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    NoSplit,
    Split,
}

/// Per-deposit bounds and the splitting mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub lower_bound: Money,
    pub upper_bound: Money,
    pub mode: SplitMode,
}

impl SplitPolicy {
    pub fn no_split() -> SplitPolicy {
        SplitPolicy { lower_bound: 1, upper_bound: Money::MAX, mode: SplitMode::NoSplit }
    }

    pub fn split(lower_bound: Money, upper_bound: Money) -> Result<SplitPolicy, SplitError> {
        if lower_bound <= 0 || lower_bound > upper_bound {
            return Err(SplitError::BadBounds { lower_bound, upper_bound });
        }
        Ok(SplitPolicy { lower_bound, upper_bound, mode: SplitMode::Split })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("split bounds must satisfy 0 < lower <= upper, got [{lower_bound}, {upper_bound}]")]
    BadBounds { lower_bound: Money, upper_bound: Money },
    #[error("total demand must be positive, got {0}")]
    NonpositiveTotal(Money),
}

/// One way of splitting a total into `parts.len()` deposits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOption {
    /// Deposit amounts, ascending, summing exactly to the total.
    pub parts: Vec<Money>,
}

impl SplitOption {
    pub fn count(&self) -> usize {
        self.parts.len()
    }
}

/// Near-equal partition of `total` into `k` parts, ascending (the larger
/// remainder parts come last so just-in-time placement pushes them later).
fn near_equal_parts(total: Money, k: usize) -> Vec<Money> {
    let base = total / k as Money;
    let remainder = (total % k as Money) as usize;
    let mut parts = vec![base; k];
    for p in parts.iter_mut().skip(k - remainder) {
        *p += 1;
    }
    parts
}

/// Enumerates every admissible deposit count for a total under the policy.
/// In no-split mode the single option is the whole amount; in split mode
/// the result may be empty when no count fits the bounds.
pub fn enumerate_splits(total: Money, policy: &SplitPolicy) -> Result<Vec<SplitOption>, SplitError> {
    if total <= 0 {
        return Err(SplitError::NonpositiveTotal(total));
    }
    match policy.mode {
        SplitMode::NoSplit => Ok(vec![SplitOption { parts: vec![total] }]),
        SplitMode::Split => {
            let k_min = (total + policy.upper_bound - 1) / policy.upper_bound; // ceil
            let k_max = total / policy.lower_bound; // floor
            Ok((k_min.max(1)..=k_max)
                .map(|k| SplitOption { parts: near_equal_parts(total, k as usize) })
                .collect())
        }
    }
}

/// Just-in-time deposit placement for one ATM.
///
/// Places every part into a period so the running balance stays
/// nonnegative while the sum of end-of-period balances is minimal: each
/// part lands in the latest period the balance allows, and where a
/// shortfall could be covered by different part combinations the cheaper
/// one is chosen exactly (dynamic program over part counts; near-equal
/// parts have at most two distinct sizes, so the state space is tiny).
/// Returns the per-period deposit vector and whether the balance stays
/// nonnegative; when even placing everything in period 1 cannot cover the
/// withdrawals, that earliest placement is returned with the flag false.
pub fn schedule_deposits(inst: &Instance, atm: &Atm, amounts: &[Money]) -> (Vec<Money>, bool) {
    let p = inst.periods;
    assert!(!amounts.is_empty(), "amounts must be nonempty");
    let earliest = || {
        let mut d = vec![0; p];
        d[0] = amounts.iter().sum();
        d
    };

    // distinct part sizes with multiplicities
    let mut values: Vec<Money> = amounts.to_vec();
    values.sort_unstable();
    values.dedup();
    let counts: Vec<usize> = values
        .iter()
        .map(|v| amounts.iter().filter(|a| *a == v).count())
        .collect();
    let radix: Vec<usize> = counts.iter().map(|c| c + 1).collect();
    let work: usize = radix.iter().map(|&r| r * (r + 1) / 2).fold(1usize, |a, b| a.saturating_mul(b));
    if work > 2_000_000 {
        // many distinct sizes: exact placement is not worth the blowup
        return greedy_schedule(inst, atm, amounts);
    }
    let states: usize = radix.iter().product();

    // cumulative deposit requirement per period
    let mut need = Vec::with_capacity(p);
    let mut cum = -atm.initial_balance;
    for t in 0..p {
        cum += atm.forecast_withdrawals[t];
        need.push(cum.max(0));
    }

    let decode = |mut s: usize| -> Vec<usize> {
        radix
            .iter()
            .map(|&r| {
                let c = s % r;
                s /= r;
                c
            })
            .collect()
    };
    let sum_of = |s: usize| -> Money {
        decode(s)
            .iter()
            .zip(&values)
            .map(|(&c, &v)| c as Money * v)
            .sum()
    };
    let sums: Vec<Money> = (0..states).map(sum_of).collect();

    // dp[s] = minimal sum of cumulative deposits over periods so far,
    // with parts `s` already placed; choice[t][s] = predecessor state
    const INF: i128 = i128::MAX;
    let mut dp = vec![INF; states];
    dp[0] = 0;
    let mut choice = vec![vec![usize::MAX; states]; p];
    for t in 0..p {
        let mut next = vec![INF; states];
        for s_new in 0..states {
            if sums[s_new] < need[t] {
                continue;
            }
            let new_counts = decode(s_new);
            // enumerate predecessor states componentwise <= s_new
            let mut best: Option<(i128, usize)> = None;
            let mut stack = vec![(0usize, 0usize, 1usize)]; // (dim, state, stride)
            while let Some((dim, s_old, stride)) = stack.pop() {
                if dim == radix.len() {
                    if dp[s_old] != INF {
                        let cost = dp[s_old] + sums[s_new] as i128;
                        if best.map_or(true, |(b, bs)| cost < b || (cost == b && s_old < bs)) {
                            best = Some((cost, s_old));
                        }
                    }
                    continue;
                }
                for c in 0..=new_counts[dim] {
                    stack.push((dim + 1, s_old + c * stride, stride * radix[dim]));
                }
            }
            if let Some((cost, s_old)) = best {
                next[s_new] = cost;
                choice[t][s_new] = s_old;
            }
        }
        dp = next;
    }

    let full = states - 1;
    if dp[full] == INF {
        return (earliest(), false);
    }
    // walk the predecessors back to per-period placements
    let mut deposits = vec![0; p];
    let mut s = full;
    for t in (0..p).rev() {
        let prev = choice[t][s];
        deposits[t] = sums[s] - sums[prev];
        s = prev;
    }
    (deposits, true)
}

/// Forward-trigger fallback for inputs with too many distinct part sizes:
/// walks the horizon placing the smallest pending part whenever the balance
/// would dip below zero, holding unforced parts to the last period. Not
/// always balance-sum minimal, but conserving and feasibility-correct.
fn greedy_schedule(inst: &Instance, atm: &Atm, amounts: &[Money]) -> (Vec<Money>, bool) {
    let p = inst.periods;
    let mut parts = amounts.to_vec();
    parts.sort_unstable();
    let mut deposits = vec![0; p];
    let mut balance = atm.initial_balance;
    let mut next = 0usize;
    for t in 0..p {
        balance -= atm.forecast_withdrawals[t];
        while balance < 0 && next < parts.len() {
            deposits[t] += parts[next];
            balance += parts[next];
            next += 1;
        }
        if balance < 0 {
            let mut earliest = vec![0; p];
            earliest[0] = parts.iter().sum();
            return (earliest, false);
        }
    }
    for &a in &parts[next..] {
        deposits[p - 1] += a;
    }
    (deposits, true)
}

/// One evaluated split option for an ATM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOption {
    pub parts: Vec<Money>,
    /// Per-period deposits after just-in-time placement.
    pub deposits: Vec<Money>,
    /// Running balance stays nonnegative under this schedule.
    pub inventory_ok: bool,
    /// Every nonzero deposit lies inside the policy bounds.
    pub within_bounds: bool,
    /// Sum of end-of-period balances: the financial-cost proxy used to rank
    /// options (routing ignored).
    pub balance_sum: i128,
}

/// Split decisions for one ATM: every option kept, the proxy-best tagged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmSplit {
    pub atm: usize,
    pub options: Vec<ScheduleOption>,
    /// Index into `options`; `None` when the ATM has no demand.
    pub chosen: Option<usize>,
    /// Set when split mode had no feasible count and k=1 was used instead.
    pub fallback: bool,
}

/// Per-ATM decomposition of total demand into per-period deposits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSchedule {
    pub policy: SplitPolicy,
    pub atms: Vec<AtmSplit>,
}

impl SplitSchedule {
    /// Chosen deposits as an `[atm][period]` matrix.
    pub fn deposits_matrix(&self, inst: &Instance) -> Vec<Vec<Money>> {
        let mut out = vec![vec![0; inst.periods]; inst.num_atms()];
        for split in &self.atms {
            if let Some(c) = split.chosen {
                out[split.atm] = split.options[c].deposits.clone();
            }
        }
        out
    }

    /// Warnings for ATMs where split mode fell back to a single deposit.
    pub fn fallback_warnings(&self, inst: &Instance) -> Vec<String> {
        self.atms
            .iter()
            .filter(|s| s.fallback)
            .map(|s| {
                format!(
                    "atm {}: no split count fits the bounds; using a single deposit",
                    inst.atms[s.atm].id
                )
            })
            .collect()
    }
}

fn evaluate_option(inst: &Instance, atm: &Atm, parts: Vec<Money>, policy: &SplitPolicy) -> ScheduleOption {
    let (deposits, inventory_ok) = schedule_deposits(inst, atm, &parts);
    let within_bounds = match policy.mode {
        SplitMode::NoSplit => true,
        SplitMode::Split => deposits
            .iter()
            .all(|&d| d == 0 || (policy.lower_bound..=policy.upper_bound).contains(&d)),
    };
    let mut balance = atm.initial_balance as i128;
    let mut sum = 0i128;
    for t in 0..inst.periods {
        balance += (deposits[t] - atm.forecast_withdrawals[t]) as i128;
        sum += balance;
    }
    ScheduleOption { parts, deposits, inventory_ok, within_bounds, balance_sum: sum }
}

/// Builds the full split schedule: every admissible option per ATM is
/// evaluated by the financial-cost proxy and the best usable one is chosen.
/// ATMs with zero demand are excluded (all-zero deposits); when split mode
/// admits no usable option the ATM falls back to a single deposit.
pub fn build_split_schedule(inst: &Instance, policy: &SplitPolicy) -> SplitSchedule {
    let atms = inst
        .atms
        .iter()
        .enumerate()
        .map(|(j, atm)| {
            if atm.total_demand <= 0 {
                return AtmSplit { atm: j, options: Vec::new(), chosen: None, fallback: false };
            }
            let mut options: Vec<ScheduleOption> = enumerate_splits(atm.total_demand, policy)
                .expect("total_demand > 0")
                .into_iter()
                .map(|opt| evaluate_option(inst, atm, opt.parts, policy))
                .collect();
            let mut fallback = false;
            let usable = |o: &ScheduleOption| o.inventory_ok && o.within_bounds;
            if !options.iter().any(usable) {
                // no admissible count: schedule the whole amount at once
                let single = evaluate_option(inst, atm, vec![atm.total_demand], policy);
                fallback = true;
                options.push(single);
            }
            let chosen = options
                .iter()
                .enumerate()
                .filter(|(_, o)| o.inventory_ok)
                .filter(|(_, o)| o.within_bounds || fallback)
                .min_by_key(|(i, o)| (o.balance_sum, o.parts.len(), *i))
                .map(|(i, _)| i)
                // even period-1 placement cannot cover withdrawals; keep the
                // least-bad option and let the checker report C14
                .unwrap_or(0);
            AtmSplit { atm: j, options, chosen: Some(chosen), fallback }
        })
        .collect();
    SplitSchedule { policy: *policy, atms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atm, Depot, Instance, Vehicle};

    const B: Money = 1_000_000_000;

    fn instance_with(atms: Vec<Atm>, periods: usize) -> Instance {
        let v = 1 + atms.len();
        let mut dist = vec![1000; v * v];
        for i in 0..v {
            dist[i * v + i] = 0;
        }
        Instance::assemble(
            vec![Depot { id: "01".into(), coords: None }],
            atms,
            vec![Vehicle {
                id: "1".into(),
                home_depot: "01".into(),
                capacity: 100 * B,
                cost_per_km: 2,
                speed_kmh: 40.0,
                fixed_trip_cost: 0,
            }],
            periods,
            dist,
            None,
            0.05,
            (510, 1050),
            480,
            500_000,
            None,
        )
        .unwrap()
    }

    fn atm(total: Money, initial: Money, m: Vec<Money>) -> Atm {
        Atm {
            id: "1".into(),
            initial_balance: initial,
            service_window: (0, 1440),
            service_time_min: 5,
            forecast_withdrawals: m,
            total_demand: total,
            coords: None,
        }
    }

    #[test]
    fn three_billion_splits_into_three() {
        let policy = SplitPolicy::split(B, 14 * B / 10).unwrap();
        let options = enumerate_splits(3 * B, &policy).unwrap();
        assert_eq!(options.len(), 1);
        assert_eq!(options[0].parts, vec![B, B, B]);
    }

    #[test]
    fn two_and_half_billion_splits_into_two() {
        let policy = SplitPolicy::split(B, 14 * B / 10).unwrap();
        let options = enumerate_splits(25 * B / 10, &policy).unwrap();
        assert_eq!(options.len(), 1);
        assert_eq!(options[0].parts, vec![125 * B / 100, 125 * B / 100]);
    }

    #[test]
    fn below_lower_bound_has_no_option() {
        let policy = SplitPolicy::split(B, 14 * B / 10).unwrap();
        let options = enumerate_splits(9 * B / 10, &policy).unwrap();
        assert!(options.is_empty());
    }

    #[test]
    fn nonpositive_total_is_an_error() {
        let policy = SplitPolicy::no_split();
        assert_eq!(enumerate_splits(0, &policy), Err(SplitError::NonpositiveTotal(0)));
    }

    #[test]
    fn no_split_returns_single_option() {
        let options = enumerate_splits(7 * B, &SplitPolicy::no_split()).unwrap();
        assert_eq!(options.len(), 1);
        assert_eq!(options[0].parts, vec![7 * B]);
    }

    #[test]
    fn parts_conserve_total_and_stay_near_equal() {
        let policy = SplitPolicy::split(100, 400).unwrap();
        for total in [1000, 1001, 1003, 1999] {
            for opt in enumerate_splits(total, &policy).unwrap() {
                assert_eq!(opt.parts.iter().sum::<Money>(), total);
                let min = *opt.parts.iter().min().unwrap();
                let max = *opt.parts.iter().max().unwrap();
                assert!(max - min <= 1, "parts not near-equal: {:?}", opt.parts);
                assert!(min >= policy.lower_bound && max <= policy.upper_bound);
            }
        }
    }

    #[test]
    fn single_period_takes_the_amount() {
        let inst = instance_with(vec![atm(500, 0, vec![100])], 1);
        let (d, ok) = schedule_deposits(&inst, &inst.atms[0], &[500]);
        assert!(ok);
        assert_eq!(d, vec![500]);
    }

    #[test]
    fn matched_withdrawals_force_both_periods() {
        let inst = instance_with(vec![atm(100, 0, vec![50, 50])], 2);
        let (d, ok) = schedule_deposits(&inst, &inst.atms[0], &[50, 50]);
        assert!(ok);
        assert_eq!(d, vec![50, 50]);
    }

    #[test]
    fn unforced_amount_lands_in_last_period() {
        // balances without deposits: 50, 0, -50 -> the single part is
        // triggered in period 3, the latest feasible placement
        let inst = instance_with(vec![atm(50, 100, vec![50, 50, 50])], 3);
        let (d, ok) = schedule_deposits(&inst, &inst.atms[0], &[50]);
        assert!(ok);
        assert_eq!(d, vec![0, 0, 50]);
    }

    #[test]
    fn surplus_amount_held_back_to_horizon_end() {
        let inst = instance_with(vec![atm(50, 1000, vec![10, 10, 10])], 3);
        let (d, ok) = schedule_deposits(&inst, &inst.atms[0], &[50]);
        assert!(ok);
        assert_eq!(d, vec![0, 0, 50]);
    }

    #[test]
    fn unsatisfiable_demand_falls_back_to_earliest() {
        let inst = instance_with(vec![atm(40, 0, vec![100])], 1);
        let (d, ok) = schedule_deposits(&inst, &inst.atms[0], &[40]);
        assert!(!ok);
        assert_eq!(d, vec![40]);
    }

    /// Exhaustive placement oracle: minimum balance sum over all feasible
    /// assignments of parts to periods (collisions allowed).
    fn oracle_min_balance_sum(inst: &Instance, atm: &Atm, parts: &[Money]) -> Option<i128> {
        let p = inst.periods;
        let k = parts.len();
        let mut best: Option<i128> = None;
        let mut placement = vec![0usize; k];
        loop {
            let mut deposits = vec![0i64; p];
            for (i, &t) in placement.iter().enumerate() {
                deposits[t] += parts[i];
            }
            let mut balance = atm.initial_balance as i128;
            let mut sum = 0i128;
            let mut ok = true;
            for t in 0..p {
                balance += (deposits[t] - atm.forecast_withdrawals[t]) as i128;
                if balance < 0 {
                    ok = false;
                    break;
                }
                sum += balance;
            }
            if ok {
                best = Some(best.map_or(sum, |b: i128| b.min(sum)));
            }
            // next placement in base-p counting
            let mut i = 0;
            loop {
                if i == k {
                    return best;
                }
                placement[i] += 1;
                if placement[i] < p {
                    break;
                }
                placement[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn jit_matches_exhaustive_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = rng.gen_range(1..=5);
            let total: Money = rng.gen_range(100..=2000);
            let k = rng.gen_range(1..=4.min(p + 1));
            let parts = near_equal_parts(total, k);
            let m: Vec<Money> = (0..p).map(|_| rng.gen_range(0..=500)).collect();
            let initial = rng.gen_range(0..=600);
            let inst = instance_with(vec![atm(total, initial, m)], p);
            let (deposits, ok) = schedule_deposits(&inst, &inst.atms[0], &parts);
            let oracle = oracle_min_balance_sum(&inst, &inst.atms[0], &parts);
            assert_eq!(ok, oracle.is_some(), "feasibility disagrees with oracle");
            if let Some(best) = oracle {
                let mut balance = inst.atms[0].initial_balance as i128;
                let mut sum = 0i128;
                for t in 0..p {
                    balance += (deposits[t] - inst.atms[0].forecast_withdrawals[t]) as i128;
                    sum += balance;
                }
                assert_eq!(sum, best, "jit is not balance-sum minimal");
            }
        }
    }

    #[test]
    fn build_no_split_is_single_deposit() {
        let inst = instance_with(vec![atm(300, 100, vec![100, 100, 100])], 3);
        let schedule = build_split_schedule(&inst, &SplitPolicy::no_split());
        let matrix = schedule.deposits_matrix(&inst);
        assert_eq!(matrix[0].iter().sum::<Money>(), 300);
        assert_eq!(matrix[0].iter().filter(|&&d| d > 0).count(), 1);
    }

    #[test]
    fn split_beats_no_split_on_financial_proxy() {
        // a table-shaped ATM: 3.0B total, uniform withdrawals over 7 days
        let m: Vec<Money> = {
            let per = 3 * B / 7;
            let mut v = vec![per; 7];
            v[6] = 3 * B - 6 * per;
            v
        };
        let first = m[0];
        let inst = instance_with(vec![atm(3 * B, first, m)], 7);
        let policy = SplitPolicy::split(B, 14 * B / 10).unwrap();
        let split = build_split_schedule(&inst, &policy);
        let nosplit = build_split_schedule(&inst, &SplitPolicy::no_split());
        let split_sum = split.atms[0].options[split.atms[0].chosen.unwrap()].balance_sum;
        let ns_sum = nosplit.atms[0].options[nosplit.atms[0].chosen.unwrap()].balance_sum;
        assert!(split_sum < ns_sum, "split {split_sum} should beat no-split {ns_sum}");
        assert_eq!(split.atms[0].options[split.atms[0].chosen.unwrap()].parts.len(), 3);
    }

    #[test]
    fn zero_demand_atm_is_excluded() {
        let inst = instance_with(vec![atm(0, 100, vec![10, 10])], 2);
        let schedule = build_split_schedule(&inst, &SplitPolicy::no_split());
        assert_eq!(schedule.atms[0].chosen, None);
        assert_eq!(schedule.deposits_matrix(&inst)[0], vec![0, 0]);
    }

    #[test]
    fn infeasible_bounds_fall_back_with_warning() {
        // total below the lower bound: no admissible count
        let inst = instance_with(vec![atm(500, 0, vec![250, 250])], 2);
        let policy = SplitPolicy::split(600, 800).unwrap();
        let schedule = build_split_schedule(&inst, &policy);
        assert!(schedule.atms[0].fallback);
        let warnings = schedule.fallback_warnings(&inst);
        assert_eq!(warnings.len(), 1);
        let matrix = schedule.deposits_matrix(&inst);
        assert_eq!(matrix[0].iter().sum::<Money>(), 500);
    }

    #[test]
    fn conservation_holds_for_every_chosen_schedule() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let p = rng.gen_range(1..=7);
            let total: Money = rng.gen_range(1..=5000);
            let m: Vec<Money> = (0..p).map(|_| rng.gen_range(0..=800)).collect();
            let inst = instance_with(vec![atm(total, rng.gen_range(0..=500), m)], p);
            let policy = if rng.gen_bool(0.5) {
                SplitPolicy::split(rng.gen_range(1..=200), rng.gen_range(200..=2000)).unwrap()
            } else {
                SplitPolicy::no_split()
            };
            let schedule = build_split_schedule(&inst, &policy);
            let matrix = schedule.deposits_matrix(&inst);
            assert_eq!(matrix[0].iter().sum::<Money>(), total);
        }
    }
}
