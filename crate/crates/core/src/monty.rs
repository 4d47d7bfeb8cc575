//! The three-cup shell game: stay/switch simulation, analytic expected
//! payouts, exact enumeration, and scoring of cup-win forecasts.
//!
//! The winning range under a cup is a fixed-but-unknown fact of each game,
//! exactly like interval coverage; the design-level win probability is the
//! forecast that pays.

use num_rational::Ratio;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::Interval;
use crate::rng::{self, domain};
use crate::scoring::{score, Forecast, ScoringRuleKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MontyError {
    #[error("the hidden amount is at least $10, got {0}")]
    PrizeTooSmall(f64),
    #[error("game terms must be finite and the penalty fraction non-negative")]
    InvalidTerms,
    #[error("n must be at least 1")]
    ZeroGames,
}

/// Game terms: the hidden prize, the buy-in, and the losing penalty as a
/// fraction of the prize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameConfig {
    prize_v: f64,
    buy_in: f64,
    loss_fraction: f64,
}

impl GameConfig {
    /// Standard terms: $5 buy-in, half the prize on a loss.
    pub fn new(prize_v: f64) -> Result<Self, MontyError> {
        Self::with_terms(prize_v, 5.0, 0.5)
    }

    pub fn with_terms(prize_v: f64, buy_in: f64, loss_fraction: f64) -> Result<Self, MontyError> {
        if !prize_v.is_finite() || prize_v < 10.0 {
            return Err(MontyError::PrizeTooSmall(prize_v));
        }
        if !buy_in.is_finite() || !loss_fraction.is_finite() || loss_fraction < 0.0 {
            return Err(MontyError::InvalidTerms);
        }
        Ok(Self {
            prize_v,
            buy_in,
            loss_fraction,
        })
    }

    pub fn prize_v(&self) -> f64 {
        self.prize_v
    }

    pub fn buy_in(&self) -> f64 {
        self.buy_in
    }

    pub fn loss_fraction(&self) -> f64 {
        self.loss_fraction
    }

    pub fn win_payout(&self) -> f64 {
        self.prize_v - self.buy_in
    }

    pub fn loss_payout(&self) -> f64 {
        -self.loss_fraction * self.prize_v - self.buy_in
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Stay,
    Switch,
}

impl Strategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Stay => "stay",
            Strategy::Switch => "switch",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "stay" => Ok(Strategy::Stay),
            "switch" => Ok(Strategy::Switch),
            other => Err(format!("unknown strategy `{other}` (stay|switch)")),
        }
    }
}

/// Everything that happened in one game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameRecord {
    pub winning_cup: usize,
    pub initial_pick: usize,
    pub removed_cup: usize,
    pub final_pick: usize,
    pub won: bool,
    pub payout: f64,
}

/// Play one game: winning cup and initial pick are uniform, the host
/// removes a non-chosen losing cup (uniformly when two qualify).
pub fn play_game_detailed(
    rng: &mut impl Rng,
    config: &GameConfig,
    strategy: Strategy,
) -> GameRecord {
    let winning_cup = rng.gen_range(0..3usize);
    let initial_pick = rng.gen_range(0..3usize);

    let mut eligible = [0usize; 2];
    let mut n_eligible = 0;
    for cup in 0..3 {
        if cup != initial_pick && cup != winning_cup {
            eligible[n_eligible] = cup;
            n_eligible += 1;
        }
    }
    let removed_cup = if n_eligible == 2 {
        eligible[rng.gen_range(0..2usize)]
    } else {
        eligible[0]
    };

    let final_pick = match strategy {
        Strategy::Stay => initial_pick,
        Strategy::Switch => (0..3)
            .find(|&cup| cup != initial_pick && cup != removed_cup)
            .expect("exactly one cup remains"),
    };
    let won = final_pick == winning_cup;
    GameRecord {
        winning_cup,
        initial_pick,
        removed_cup,
        final_pick,
        won,
        payout: if won {
            config.win_payout()
        } else {
            config.loss_payout()
        },
    }
}

/// Payout of one game in dollars.
pub fn play_game(rng: &mut impl Rng, config: &GameConfig, strategy: Strategy) -> f64 {
    play_game_detailed(rng, config, strategy).payout
}

/// Analytic expected payout: `p v - (1-p) * loss_fraction * v - buy_in`
/// with p = 1/3 when staying and 2/3 when switching. At the standard terms
/// this is -5 for stay and v/2 - 5 for switch.
pub fn expected_payout(config: &GameConfig, strategy: Strategy) -> f64 {
    let p_win = match strategy {
        Strategy::Stay => 1.0 / 3.0,
        Strategy::Switch => 2.0 / 3.0,
    };
    p_win * config.prize_v - (1.0 - p_win) * config.loss_fraction * config.prize_v - config.buy_in
}

/// Mean payout over n independent games with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoutSummary {
    pub mean: f64,
    pub standard_error: f64,
    pub n: u64,
    pub wins: u64,
}

/// Monte Carlo mean payout. Each game draws from its own stream keyed by
/// (seed, game index), so the result is exact integer arithmetic over the
/// win count and independent of parallel scheduling.
pub fn simulate_mean_payout(
    config: &GameConfig,
    strategy: Strategy,
    n: u64,
    seed: u64,
) -> Result<PayoutSummary, MontyError> {
    let wins = count_wins(config, strategy, n, seed)?;
    let losses = n - wins;
    let (pw, pl) = (config.win_payout(), config.loss_payout());
    let mean = (wins as f64 * pw + losses as f64 * pl) / n as f64;
    let standard_error = if n < 2 {
        0.0
    } else {
        let dw = pw - mean;
        let dl = pl - mean;
        let sample_var = (wins as f64 * dw * dw + losses as f64 * dl * dl) / (n - 1) as f64;
        (sample_var / n as f64).sqrt()
    };
    Ok(PayoutSummary {
        mean,
        standard_error,
        n,
        wins,
    })
}

fn count_wins(
    config: &GameConfig,
    strategy: Strategy,
    n: u64,
    seed: u64,
) -> Result<u64, MontyError> {
    if n == 0 {
        return Err(MontyError::ZeroGames);
    }
    let wins = (0..n)
        .into_par_iter()
        .map(|game| {
            let mut rng = rng::stream(seed, &[domain::MONTY, game]);
            play_game_detailed(&mut rng, config, strategy).won as u64
        })
        .sum();
    Ok(wins)
}

/// One row of the cup-win forecast comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CupForecastRow {
    pub id: String,
    pub strategy: Strategy,
    pub forecast: f64,
    pub mean_score: f64,
    pub n: u64,
}

/// Score constant forecasts against the cup-win indicators: certainty
/// ("my cup covers") and the design-level win probabilities 1/3 and 2/3.
pub fn score_cup_forecasts(
    n: u64,
    seed: u64,
    kind: ScoringRuleKind,
) -> Result<Vec<CupForecastRow>, MontyError> {
    if n == 0 {
        return Err(MontyError::ZeroGames);
    }
    let config = GameConfig::new(10.0).expect("standard terms are valid");
    // switch wins exactly when stay loses, so one pass covers both
    let stay_wins = count_wins(&config, Strategy::Stay, n, seed)?;
    let switch_wins = n - stay_wins;

    let mean_for = |wins: u64, q: f64| {
        let q = Forecast::new(q).expect("constants lie in [0,1]");
        let hit = score(kind, q, true.into());
        let miss = score(kind, q, false.into());
        let losses = n - wins;
        let mut sum = 0.0;
        if wins > 0 {
            sum += wins as f64 * hit;
        }
        if losses > 0 {
            sum += losses as f64 * miss;
        }
        sum / n as f64
    };

    Ok(vec![
        CupForecastRow {
            id: "stay_constant_1".to_string(),
            strategy: Strategy::Stay,
            forecast: 1.0,
            mean_score: mean_for(stay_wins, 1.0),
            n,
        },
        CupForecastRow {
            id: "stay_constant_third".to_string(),
            strategy: Strategy::Stay,
            forecast: 1.0 / 3.0,
            mean_score: mean_for(stay_wins, 1.0 / 3.0),
            n,
        },
        CupForecastRow {
            id: "switch_constant_1".to_string(),
            strategy: Strategy::Switch,
            forecast: 1.0,
            mean_score: mean_for(switch_wins, 1.0),
            n,
        },
        CupForecastRow {
            id: "switch_constant_two_thirds".to_string(),
            strategy: Strategy::Switch,
            forecast: 2.0 / 3.0,
            mean_score: mean_for(switch_wins, 2.0 / 3.0),
            n,
        },
    ])
}

/// Exact win probability by enumerating every (winning cup, initial pick,
/// host choice) case with rational weights; independent of the Monte Carlo
/// path.
pub fn enumerate_win_probability(strategy: Strategy) -> Ratio<u64> {
    let mut total = Ratio::new(0u64, 1u64);
    for winning in 0..3usize {
        for pick in 0..3usize {
            let eligible: Vec<usize> = (0..3).filter(|&c| c != pick && c != winning).collect();
            for &host in &eligible {
                let weight = Ratio::new(1u64, 9u64) * Ratio::new(1u64, eligible.len() as u64);
                let final_pick = match strategy {
                    Strategy::Stay => pick,
                    Strategy::Switch => (0..3)
                        .find(|&c| c != pick && c != host)
                        .expect("exactly one cup remains"),
                };
                if final_pick == winning {
                    total += weight;
                }
            }
        }
    }
    total
}

/// Disjoint dollar ranges under the cups, the winning cup's containing the
/// prize. Drawn from a stream separate from game play, so generating them
/// never perturbs payouts. Narrative output only.
pub fn range_labels(
    config: &GameConfig,
    winning_cup: usize,
    seed: u64,
    game_index: u64,
) -> [Interval; 3] {
    let mut rng = rng::stream(seed, &[domain::MONTY_LABELS, game_index]);
    let v = config.prize_v;
    let below = v - 1.0 - 9.0 * rng.gen::<f64>();
    let above = v + 1.0 + 9.0 * rng.gen::<f64>();
    let winning = Interval::new(below, above).expect("ordered by construction");
    // losers sit strictly on either side of the winning range
    let low_width = 1.0 + 9.0 * rng.gen::<f64>();
    let high_width = 1.0 + 9.0 * rng.gen::<f64>();
    let low = Interval::new(below - 1.0 - low_width, below - 1.0).expect("ordered");
    let high = Interval::new(above + 1.0, above + 1.0 + high_width).expect("ordered");

    let mut labels = [low, winning, high];
    // rotate so the winning range lands under the winning cup
    labels.rotate_left((1 + 3 - winning_cup) % 3);
    labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(GameConfig::new(10.0).is_ok());
        assert!(matches!(
            GameConfig::new(9.0),
            Err(MontyError::PrizeTooSmall(_))
        ));
        assert!(GameConfig::with_terms(10.0, 5.0, -0.1).is_err());
    }

    #[test]
    fn expected_payout_formulas() {
        let c = GameConfig::new(10.0).unwrap();
        assert!((expected_payout(&c, Strategy::Stay) + 5.0).abs() < 1e-12);
        assert!(expected_payout(&c, Strategy::Switch).abs() < 1e-12);
        let c = GameConfig::new(50.0).unwrap();
        assert!((expected_payout(&c, Strategy::Stay) + 5.0).abs() < 1e-12);
        assert!((expected_payout(&c, Strategy::Switch) - 20.0).abs() < 1e-12);
        // a win at v=50 nets +45 after the buy-in
        assert!((c.win_payout() - 45.0).abs() < 1e-12);
    }

    #[test]
    fn host_never_removes_the_pick_or_the_winner() {
        let config = GameConfig::new(25.0).unwrap();
        for game in 0..5_000u64 {
            let mut rng = rng::stream(7, &[domain::MONTY, game]);
            let rec = play_game_detailed(&mut rng, &config, Strategy::Switch);
            assert_ne!(rec.removed_cup, rec.initial_pick);
            assert_ne!(rec.removed_cup, rec.winning_cup);
            assert_ne!(rec.final_pick, rec.initial_pick);
            assert_eq!(rec.won, rec.final_pick == rec.winning_cup);
        }
    }

    #[test]
    fn exact_enumeration() {
        assert_eq!(
            enumerate_win_probability(Strategy::Stay),
            Ratio::new(1u64, 3u64)
        );
        assert_eq!(
            enumerate_win_probability(Strategy::Switch),
            Ratio::new(2u64, 3u64)
        );
    }

    #[test]
    fn simulated_payouts_match_analytics() {
        let c = GameConfig::new(10.0).unwrap();
        for (strategy, expected) in [(Strategy::Stay, -5.0), (Strategy::Switch, 0.0)] {
            let s = simulate_mean_payout(&c, strategy, 200_000, 99).unwrap();
            assert!(
                (s.mean - expected).abs() <= 4.0 * s.standard_error,
                "{strategy:?}: {} vs {expected} (se {})",
                s.mean,
                s.standard_error
            );
        }
        assert!(matches!(
            simulate_mean_payout(&c, Strategy::Stay, 0, 1),
            Err(MontyError::ZeroGames)
        ));
    }

    #[test]
    fn forecast_scores_favor_the_design_probability() {
        let rows = score_cup_forecasts(200_000, 42, ScoringRuleKind::Brier).unwrap();
        let get = |id: &str| rows.iter().find(|r| r.id == id).unwrap().mean_score;
        // p(1-p) = 2/9 for both design-level forecasts
        assert!((get("stay_constant_third") - 2.0 / 9.0).abs() < 0.01);
        assert!((get("switch_constant_two_thirds") - 2.0 / 9.0).abs() < 0.01);
        // certainty about the stay cup loses badly: 1-p = 2/3
        assert!((get("stay_constant_1") - 2.0 / 3.0).abs() < 0.01);
        assert!(get("stay_constant_1") > get("stay_constant_third"));
        assert!(get("switch_constant_1") > get("switch_constant_two_thirds"));
    }

    #[test]
    fn labels_are_disjoint_and_do_not_perturb_play() {
        let config = GameConfig::new(30.0).unwrap();
        for game in 0..200u64 {
            let labels = range_labels(&config, (game % 3) as usize, 5, game);
            let winner = (game % 3) as usize;
            assert!(labels[winner].contains(config.prize_v()));
            for (i, a) in labels.iter().enumerate() {
                for (j, b) in labels.iter().enumerate() {
                    if i != j {
                        assert!(a.upper() < b.lower() || b.upper() < a.lower());
                        assert!(!(a.contains(config.prize_v()) && b.contains(config.prize_v())));
                    }
                }
            }
        }
        // play streams are untouched by label generation
        let play = |with_labels: bool| -> Vec<GameRecord> {
            (0..500u64)
                .map(|game| {
                    let mut rng = rng::stream(11, &[domain::MONTY, game]);
                    let rec = play_game_detailed(&mut rng, &config, Strategy::Switch);
                    if with_labels {
                        let _ = range_labels(&config, rec.winning_cup, 11, game);
                    }
                    rec
                })
                .collect()
        };
        assert_eq!(play(false), play(true));
    }
}
