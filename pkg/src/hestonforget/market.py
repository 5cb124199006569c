"""Synthetic market generator: Heston paths, quote grids, time shards.

The experiment datasets are fully determined by (path seed, noise seed); the
RNG algorithm (NumPy PCG64) is recorded in the metadata sidecar so datasets
can be regenerated byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .pricing import HestonParams, QuadratureConfig, QuoteFeatures, price_batch

RNG_ALGORITHM = "numpy-PCG64"
TRADING_DAYS_PER_YEAR = 252

QUOTE_CSV_HEADER = "quote_id,day_index,shard_id,S,K,T_years,r,y,weight"


@dataclass(frozen=True)
class PathConfig:
    """Euler path settings: daily steps of dt years starting at s0."""

    days: int
    dt: float = 1.0 / TRADING_DAYS_PER_YEAR
    s0: float = 100.0
    rate: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.days < 1:
            raise ValueError(f"days must be >= 1, got {self.days}")
        if not (self.dt > 0.0 and self.s0 > 0.0):
            raise ValueError("dt and s0 must be positive")


@dataclass(frozen=True)
class GridConfig:
    """Daily quote grid: maturities in trading days, absolute strike levels."""

    maturities_days: tuple[int, ...]
    strikes: tuple[float, ...]
    noise_sigma: float

    def __post_init__(self):
        if not self.maturities_days or not self.strikes:
            raise ValueError("maturities_days and strikes must be nonempty")
        if self.noise_sigma < 0.0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class Quote:
    """One observed option quote."""

    quote_id: int
    day_index: int
    features: QuoteFeatures
    y: float
    shard_id: int
    weight: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.y):
            raise ValueError(f"observed price must be finite, got {self.y}")
        if self.weight < 0.0:
            raise ValueError(f"weight must be >= 0, got {self.weight}")


@dataclass(frozen=True)
class HestonPath:
    """Simulated daily (spot, variance) path plus the config that made it."""

    spot: np.ndarray
    variance: np.ndarray
    config: PathConfig

    @property
    def days(self) -> int:
        return self.config.days


def correlated_normals(
    rng: np.random.Generator, n: int, rho: float
) -> tuple[np.ndarray, np.ndarray]:
    """Variance and spot shock streams with exact construction corr = rho."""
    z_v = rng.standard_normal(n)
    z_perp = rng.standard_normal(n)
    z_s = rho * z_v + math.sqrt(1.0 - rho * rho) * z_perp
    return z_v, z_s


def simulate_path(path_cfg: PathConfig, params: HestonParams) -> HestonPath:
    """Full-truncation Euler path of (S_t, v_t) over days+1 daily points.

    The variance recursion evolves the raw value but uses v+ = max(v, 0) in
    both diffusion coefficients; the reported variance is the truncated v+.
    """
    rng = np.random.default_rng(path_cfg.seed)
    z_v, z_s = correlated_normals(rng, path_cfg.days, params.rho)

    dt = path_cfg.dt
    sqrt_dt = math.sqrt(dt)
    spot = np.empty(path_cfg.days + 1)
    variance = np.empty(path_cfg.days + 1)
    spot[0] = path_cfg.s0
    raw_v = params.v0
    for t in range(path_cfg.days):
        v_plus = raw_v if raw_v > 0.0 else 0.0
        variance[t] = v_plus
        vol = math.sqrt(v_plus)
        spot[t + 1] = spot[t] * (1.0 + path_cfg.rate * dt + vol * sqrt_dt * z_s[t])
        raw_v = raw_v + params.kappa * (params.theta_v - v_plus) * dt \
            + params.sigma_v * vol * sqrt_dt * z_v[t]
    variance[path_cfg.days] = raw_v if raw_v > 0.0 else 0.0
    return HestonPath(spot=spot, variance=variance, config=path_cfg)


def build_quotes(
    path: HestonPath,
    grid: GridConfig,
    params_true: HestonParams,
    quad: QuadratureConfig,
    noise_seed: int,
    threads: int = 1,
) -> list[Quote]:
    """One noisy quote per (day, maturity, strike), ids in lexicographic order.

    y = price(S_day, K, T; params_true) + eps with eps ~ N(0, noise_sigma^2)
    drawn in quote-id order from its own generator. Noise is additive, so deep
    out-of-the-money quotes may come out negative; they are kept as-is.
    """
    maturities = sorted(grid.maturities_days)
    strikes = sorted(grid.strikes)
    days = range(path.days)
    rate = path.config.rate

    spots, ks, ts, rs = [], [], [], []
    day_ix = []
    for day in days:
        for m_days in maturities:
            for strike in strikes:
                spots.append(path.spot[day])
                ks.append(strike)
                ts.append(m_days / TRADING_DAYS_PER_YEAR)
                rs.append(rate)
                day_ix.append(day)

    prices = price_batch(
        np.array(spots), np.array(ks), np.array(ts), np.array(rs),
        params_true, quad, threads=threads,
    )
    eps = grid.noise_sigma * np.random.default_rng(noise_seed).standard_normal(
        len(prices)
    )
    return [
        Quote(
            quote_id=i,
            day_index=day_ix[i],
            features=QuoteFeatures(spots[i], ks[i], ts[i], rs[i]),
            y=float(prices[i] + eps[i]),
            shard_id=0,
        )
        for i in range(len(prices))
    ]


def shard_by_time(quotes: list[Quote], shard_days: int) -> list[Quote]:
    """Assign shard_id = floor(day_index / shard_days) to every quote."""
    if shard_days < 1:
        raise ValueError(f"shard_days must be >= 1, got {shard_days}")
    return [replace(q, shard_id=q.day_index // shard_days) for q in quotes]


def _fmt(value: float) -> str:
    """Shortest decimal that round-trips the IEEE-754 double exactly."""
    return repr(float(value))


def quotes_csv_bytes(quotes: list[Quote]) -> bytes:
    lines = [QUOTE_CSV_HEADER]
    for q in sorted(quotes, key=lambda q: q.quote_id):
        f = q.features
        lines.append(
            f"{q.quote_id},{q.day_index},{q.shard_id},{_fmt(f.spot)},"
            f"{_fmt(f.strike)},{_fmt(f.maturity)},{_fmt(f.rate)},"
            f"{_fmt(q.y)},{_fmt(q.weight)}"
        )
    return ("\n".join(lines) + "\n").encode()


def dataset_hash(quotes: list[Quote]) -> str:
    """Content hash of the canonical CSV serialization."""
    return hashlib.sha256(quotes_csv_bytes(quotes)).hexdigest()


def save_quotes(quotes: list[Quote], path: str | Path) -> None:
    Path(path).write_bytes(quotes_csv_bytes(quotes))


def load_quotes(path: str | Path) -> list[Quote]:
    text = Path(path).read_text()
    lines = text.strip().split("\n")
    if lines[0] != QUOTE_CSV_HEADER:
        raise ValueError(f"unexpected quote CSV header: {lines[0]!r}")
    quotes = []
    for line in lines[1:]:
        qid, day, shard, s, k, t, r, y, w = line.split(",")
        quotes.append(
            Quote(
                quote_id=int(qid),
                day_index=int(day),
                features=QuoteFeatures(float(s), float(k), float(t), float(r)),
                y=float(y),
                shard_id=int(shard),
                weight=float(w),
            )
        )
    return quotes


def save_metadata(meta: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_metadata(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


class QuoteStore:
    """Shard-addressable quote container keyed to a dataset content hash."""

    def __init__(self, quotes: list[Quote]):
        self._quotes = sorted(quotes, key=lambda q: q.quote_id)
        ids = [q.quote_id for q in self._quotes]
        if len(set(ids)) != len(ids):
            raise ValueError("quote ids must be unique")
        self._ids = frozenset(ids)
        self._by_shard: dict[int, list[Quote]] = {}
        for q in self._quotes:
            self._by_shard.setdefault(q.shard_id, []).append(q)
        self.dataset_hash = dataset_hash(self._quotes)

    def __len__(self) -> int:
        return len(self._quotes)

    @property
    def quotes(self) -> list[Quote]:
        return list(self._quotes)

    @property
    def ids(self) -> frozenset[int]:
        return self._ids

    @property
    def shard_ids(self) -> list[int]:
        return sorted(self._by_shard)

    def shard(self, shard_id: int) -> list[Quote]:
        return list(self._by_shard[shard_id])

    def retained(self, forget_ids) -> list[Quote]:
        """Quotes not in forget_ids, ascending quote_id."""
        forget = set(forget_ids)
        return [q for q in self._quotes if q.quote_id not in forget]
