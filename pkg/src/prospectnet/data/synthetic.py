"""Synthetic households standing in for vendor feature files.

Non-customers draw numeric features from N(0, I) and customers from
N(mu, I) with ||mu|| = separation. Each categorical column has a
non-customer distribution p0 and a customer distribution
p1 ~ p0 * exp(separation * categorical_skew * s) for a random score s per
category. The audience (existing customers) and the universe (targetable
households outside the audience) are generated together; a small
``customer_like_fraction`` of the universe is drawn from the customer
distribution (unlabelled would-be customers). Conversion propensity of a
non-audience household is a logistic function of its exact customer vs
non-customer log-likelihood ratio, so it rises monotonically with
customer-likeness.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .csvio import RawRecord
from .schema import Column, FeatureSchema


@dataclass(frozen=True)
class SyntheticPopulationSpec:
    universe_size: int = 50_000
    audience_size: int = 5_000
    numeric_dims: int = 30
    categorical_cardinalities: tuple[int, ...] = (5, 5, 5, 5)
    separation: float = 1.5
    categorical_skew: float = 0.5
    customer_like_fraction: float = 0.03
    conversion_intercept: float = -6.0
    conversion_slope: float = 1.0
    repeat_purchase_rate: float = 0.3
    missing_rate: float = 0.0
    decimals: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "categorical_cardinalities", tuple(self.categorical_cardinalities))
        if not 0 < self.audience_size < self.universe_size:
            raise ValueError(
                f"need 0 < audience_size < universe_size, got {self.audience_size} and {self.universe_size}"
            )
        if self.separation < 0:
            raise ValueError("separation must be >= 0")
        if self.numeric_dims < 0 or any(k < 2 for k in self.categorical_cardinalities):
            raise ValueError("numeric_dims must be >= 0 and every categorical cardinality >= 2")
        if self.numeric_dims == 0 and not self.categorical_cardinalities:
            raise ValueError("spec has no features")
        if not 0.0 <= self.customer_like_fraction <= 1.0 or not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("fractions must lie in [0, 1)")

    @property
    def encoded_width(self) -> int:
        return self.numeric_dims * (2 if self.missing_rate > 0 else 1) + sum(self.categorical_cardinalities)


@dataclass
class SyntheticPopulation:
    schema: FeatureSchema
    audience: list[RawRecord]
    universe: list[RawRecord]  # households outside the audience
    propensity: dict[str, float]  # non-audience households only
    conversions: dict[str, int]  # non-audience households only
    customer_like: dict[str, bool] = field(default_factory=dict)


def synthetic_schema(spec: SyntheticPopulationSpec) -> FeatureSchema:
    cols = [Column(f"num_{i:02d}", "numeric", missing=spec.missing_rate > 0) for i in range(spec.numeric_dims)]
    cols += [
        Column(f"cat_{k}", "categorical", vocabulary=tuple(f"v{j}" for j in range(card)))
        for k, card in enumerate(spec.categorical_cardinalities)
    ]
    return FeatureSchema(tuple(cols), id_column="record_id")


def generate_synthetic(spec: SyntheticPopulationSpec) -> SyntheticPopulation:
    rng = np.random.default_rng(spec.seed)
    d = spec.numeric_dims

    direction = rng.normal(size=d)
    mu = spec.separation * direction / np.linalg.norm(direction) if d else direction
    p0 = [rng.dirichlet(np.full(k, 2.0)) for k in spec.categorical_cardinalities]
    p1 = []
    for base in p0:
        tilt = base * np.exp(spec.separation * spec.categorical_skew * rng.normal(size=base.size))
        p1.append(tilt / tilt.sum())

    n = spec.universe_size + spec.audience_size
    n_other = spec.universe_size
    is_customer = np.zeros(n, dtype=bool)
    is_customer[: spec.audience_size] = True
    in_audience = is_customer.copy()
    is_customer[spec.audience_size :] = rng.random(n_other) < spec.customer_like_fraction
    order = rng.permutation(n)
    is_customer, in_audience = is_customer[order], in_audience[order]

    numeric = rng.normal(size=(n, d)) + np.where(is_customer[:, None], mu, 0.0)
    numeric = np.round(numeric, spec.decimals)
    cats = np.empty((n, len(p0)), dtype=np.int64)
    for k, (a, b) in enumerate(zip(p0, p1)):
        u = rng.random(n)
        cats[:, k] = np.where(
            is_customer,
            np.searchsorted(np.cumsum(b), u, side="right"),
            np.searchsorted(np.cumsum(a), u, side="right"),
        )
    cats = np.minimum(cats, np.array(spec.categorical_cardinalities) - 1)

    llr = numeric @ mu - 0.5 * float(mu @ mu)
    for k, (a, b) in enumerate(zip(p0, p1)):
        llr += np.log(b[cats[:, k]] / a[cats[:, k]])

    logits = spec.conversion_intercept + spec.conversion_slope * llr
    propensity = 1.0 / (1.0 + np.exp(-logits))
    converts = rng.random(n) < propensity
    counts = np.where(converts, 1 + rng.poisson(spec.repeat_purchase_rate, size=n), 0)

    missing_mask = rng.random((n, d)) < spec.missing_rate if spec.missing_rate > 0 else None

    schema = synthetic_schema(spec)
    width = len(str(n - 1))
    ids = [f"H{i:0{width}d}" for i in range(n)]
    households = []
    num_rows = numeric.tolist()
    cat_rows = cats.tolist()
    for i in range(n):
        nums = num_rows[i]
        if missing_mask is not None:
            nums = [None if missing_mask[i, j] else v for j, v in enumerate(nums)]
        households.append(RawRecord(ids[i], tuple(nums) + tuple(f"v{c}" for c in cat_rows[i])))
    audience = [r for r, a in zip(households, in_audience) if a]
    universe = [r for r, a in zip(households, in_audience) if not a]
    prospect_idx = np.flatnonzero(~in_audience)
    return SyntheticPopulation(
        schema=schema,
        audience=audience,
        universe=universe,
        propensity={ids[i]: float(propensity[i]) for i in prospect_idx},
        conversions={ids[i]: int(counts[i]) for i in prospect_idx},
        customer_like={ids[i]: bool(is_customer[i]) for i in prospect_idx},
    )
