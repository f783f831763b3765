"""Scenario configuration: strict TOML loading with full-file validation.

Unknown keys are rejected and every violation is reported at once, so a
mis-specified scenario never runs silently.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path


class ConfigError(Exception):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


def _fraction(value) -> Fraction:
    # str() round-trips TOML floats to their decimal literal
    return Fraction(str(value))


@dataclass
class WalletRoster:
    count: int = 8
    balance: list[int] = field(default_factory=lambda: [1000, 1000])


@dataclass
class RelayerParams:
    fee: list[int] = field(default_factory=lambda: [1, 0])
    collateral: list[int] = field(default_factory=lambda: [0, 2])


@dataclass
class AuctionParams:
    pricing: str = "first"
    commit_window: int = 0  # 0 means "use delta"
    reveal_window: int = 0
    bidders_min: int = 3
    bidders_max: int = 10
    max_bid: int = 100
    withhold_prob: float = 0.0


@dataclass
class FBAParams:
    order_qty: int = 10
    mm_depth: int = 1000


@dataclass
class RFQParams:
    mm_count: int = 2
    fill_cost: float = 0.0
    fee_slope: float = 0.1
    latency_max: int = 0


@dataclass
class AMMParams:
    reserve_x: int = 1_000_000
    reserve_y: int = 100_000_000
    pool_fee: float = 0.0
    order_size: int = 5000
    orders: int = 3
    blocks: int = 10


@dataclass
class LiquidationParams:
    collateral: int = 100
    debt: int = 9000
    threshold: float = 1.1
    bidders: int = 3
    horizon: int = 200


@dataclass
class ScenarioConfig:
    seed: int
    protocol: str = "invariants"
    trials: int = 100
    delta: int = 3
    n_tokens: int = 2
    price: float = 100.0
    price_step: float = 0.01
    disposition: str = "lock"
    blocks: int = 50
    wallets: WalletRoster = field(default_factory=WalletRoster)
    relayer: RelayerParams = field(default_factory=RelayerParams)
    auction: AuctionParams = field(default_factory=AuctionParams)
    fba: FBAParams = field(default_factory=FBAParams)
    rfq: RFQParams = field(default_factory=RFQParams)
    amm: AMMParams = field(default_factory=AMMParams)
    liquidation: LiquidationParams = field(default_factory=LiquidationParams)

    @property
    def price_fraction(self) -> Fraction:
        return _fraction(self.price)

    @property
    def step_fraction(self) -> Fraction:
        return _fraction(self.price_step)

    def validate(self) -> list[str]:
        errors = []
        if self.delta < 1:
            errors.append("delta must be >= 1")
        if self.trials < 1:
            errors.append("trials must be >= 1")
        if self.n_tokens < 1:
            errors.append("n_tokens must be >= 1")
        if not (0 <= self.price_step < 1):
            errors.append("price_step must be in [0, 1)")
        if self.price <= 0:
            errors.append("price must be positive")
        if self.disposition not in ("burn", "lock"):
            errors.append("disposition must be 'burn' or 'lock'")
        if self.protocol not in (
            "auction", "fba", "rfq", "amm", "liquidation", "invariants"
        ):
            errors.append(f"unknown protocol {self.protocol!r}")
        if len(self.wallets.balance) != self.n_tokens:
            errors.append("wallets.balance length must equal n_tokens")
        if len(self.relayer.fee) != self.n_tokens:
            errors.append("relayer.fee length must equal n_tokens")
        if len(self.relayer.collateral) != self.n_tokens:
            errors.append("relayer.collateral length must equal n_tokens")
        if self.auction.pricing not in ("first", "second"):
            errors.append("auction.pricing must be 'first' or 'second'")
        if not (1 <= self.auction.bidders_min <= self.auction.bidders_max):
            errors.append("auction bidder bounds must satisfy 1 <= min <= max")
        if not (0 <= self.amm.pool_fee < 1):
            errors.append("amm.pool_fee must be in [0, 1)")
        if self.liquidation.bidders < 1:
            errors.append("liquidation.bidders must be >= 1")
        return errors


_SECTIONS = {
    "wallets": WalletRoster,
    "relayer": RelayerParams,
    "auction": AuctionParams,
    "fba": FBAParams,
    "rfq": RFQParams,
    "amm": AMMParams,
    "liquidation": LiquidationParams,
}


def _build_section(cls, data: dict, section: str, errors: list[str]):
    allowed = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in allowed:
            errors.append(f"unknown key {section}.{key}")
            continue
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as e:
        errors.append(f"bad section {section}: {e}")
        return cls()


def parse_config(data: dict) -> ScenarioConfig:
    errors: list[str] = []
    top_allowed = {
        f.name for f in fields(ScenarioConfig) if f.name not in _SECTIONS
    }
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                errors.append(f"section {key} must be a table")
                continue
            kwargs[key] = _build_section(_SECTIONS[key], value, key, errors)
        elif key in top_allowed:
            kwargs[key] = value
        else:
            errors.append(f"unknown key {key}")
    if "seed" not in kwargs:
        errors.append("seed is mandatory")
    if errors:
        raise ConfigError(errors)
    cfg = ScenarioConfig(**kwargs)
    errors = cfg.validate()
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError([f"config file not found: {p}"])
    with open(p, "rb") as f:
        try:
            data = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError([f"invalid TOML: {e}"]) from e
    return parse_config(data)
