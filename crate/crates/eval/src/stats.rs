//! Binomial win-rate statistics.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no games played")]
    NoGames,
    #[error("{wins} wins out of {games} games")]
    TooManyWins { wins: u64, games: u64 },
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

fn check(wins: u64, games: u64) -> Result<(), StatsError> {
    if games == 0 {
        return Err(StatsError::NoGames);
    }
    if wins > games {
        return Err(StatsError::TooManyWins { wins, games });
    }
    Ok(())
}

/// Wilson score interval for `wins / games` at normal quantile `z`.
pub fn wilson_interval(wins: u64, games: u64, z: f64) -> Result<(f64, f64), StatsError> {
    check(wins, games)?;
    let n = games as f64;
    let p = wins as f64 / n;
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let denom = 1.0 + z2 / n;
    // The bounds are exactly 0 and 1 at the extremes; pin them against rounding.
    let lo = if wins == 0 { 0.0 } else { ((centre - spread) / denom).max(0.0) };
    let hi = if wins == games { 1.0 } else { ((centre + spread) / denom).min(1.0) };
    Ok((lo, hi))
}

/// One-sample z statistic of `wins / games` against 0.5.
pub fn z_test(wins: u64, games: u64) -> Result<f64, StatsError> {
    check(wins, games)?;
    let n = games as f64;
    Ok((wins as f64 / n - 0.5) / (0.25 / n).sqrt())
}

/// Elo difference implied by a win rate; ±infinity at 1 and 0.
pub fn elo_delta(win_rate: f64) -> f64 {
    if win_rate <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if win_rate >= 1.0 {
        return f64::INFINITY;
    }
    -400.0 * (1.0 / win_rate - 1.0).log10()
}

/// Serde form for values that may be ±infinity, written as `"inf"` / `"-inf"`.
pub mod sentinel {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        match *v {
            f64::INFINITY => "inf".serialize(s),
            f64::NEG_INFINITY => "-inf".serialize(s),
            x => x.serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("not a number: {t}"))),
        }
    }
}
