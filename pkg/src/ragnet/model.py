"""System parameters and the Bernoulli arrival process.

All probabilities are per slot.  Complements (1 - s, 1 - alpha, 1 - lambda)
are computed on demand and never stored.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

FIELD_NAMES = (
    "lambda1",
    "lambda2",
    "alpha1",
    "alpha2",
    "s1",
    "s2",
    "l1_minus",
    "l1_plus",
    "l2_minus",
    "l2_plus",
)

SYMMETRIC_FIELD_NAMES = ("lambda", "alpha", "s", "l_minus", "l_plus")

# l_minus + l_plus = 1 is checked to this absolute tolerance so that values
# such as 0.1 / 0.9 read from JSON are accepted.
_SUM_TOL = 1e-12


class ParameterError(ValueError):
    """Raised when a parameter set violates a model invariant."""


def _check_unit(name, value):
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ParameterError(f"{name} must be a number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} out of [0,1]: {value}")


@dataclass(frozen=True)
class ModelParams:
    lambda1: float
    lambda2: float
    alpha1: float
    alpha2: float
    s1: float
    s2: float
    l1_minus: float
    l1_plus: float
    l2_minus: float
    l2_plus: float

    def __post_init__(self):
        validate(self)

    # per-user accessors, k in {1, 2}
    def lam(self, k: int) -> float:
        return self.lambda1 if k == 1 else self.lambda2

    def alpha(self, k: int) -> float:
        return self.alpha1 if k == 1 else self.alpha2

    def s(self, k: int) -> float:
        return self.s1 if k == 1 else self.s2

    def l_minus(self, k: int) -> float:
        return self.l1_minus if k == 1 else self.l2_minus

    def l_plus(self, k: int) -> float:
        return self.l1_plus if k == 1 else self.l2_plus

    def swapped(self) -> "ModelParams":
        """The same system with the users relabelled."""
        return ModelParams(
            lambda1=self.lambda2,
            lambda2=self.lambda1,
            alpha1=self.alpha2,
            alpha2=self.alpha1,
            s1=self.s2,
            s2=self.s1,
            l1_minus=self.l2_minus,
            l1_plus=self.l2_plus,
            l2_minus=self.l1_minus,
            l2_plus=self.l1_plus,
        )

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        unknown = set(data) - set(FIELD_NAMES)
        if unknown:
            raise ParameterError(f"unknown field(s): {', '.join(sorted(unknown))}")
        missing = set(FIELD_NAMES) - set(data)
        if missing:
            raise ParameterError(f"missing field(s): {', '.join(sorted(missing))}")
        return cls(**{k: data[k] for k in FIELD_NAMES})

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))

    def is_symmetric(self) -> bool:
        return (
            self.lambda1 == self.lambda2
            and self.alpha1 == self.alpha2
            and self.s1 == self.s2
            and self.l1_minus == self.l2_minus
            and self.l1_plus == self.l2_plus
        )


def validate(params: ModelParams) -> ModelParams:
    """Check ranges and the signal-effect normalisation; return ``params``."""
    for f in fields(params):
        _check_unit(f.name, getattr(params, f.name))
    for k in (1, 2):
        total = getattr(params, f"l{k}_minus") + getattr(params, f"l{k}_plus")
        if abs(total - 1.0) > _SUM_TOL:
            raise ParameterError(f"l{k}_minus+l{k}_plus != 1 (got {total})")
    return params


@dataclass(frozen=True)
class SymmetricParams:
    """Parameters of the symmetric system, shared by both users."""

    lam: float
    alpha: float
    s: float
    l_minus: float
    l_plus: float

    def __post_init__(self):
        for name, value in zip(SYMMETRIC_FIELD_NAMES, self._values()):
            _check_unit(name, value)
        if abs(self.l_minus + self.l_plus - 1.0) > _SUM_TOL:
            raise ParameterError(
                f"l_minus+l_plus != 1 (got {self.l_minus + self.l_plus})"
            )

    def _values(self):
        return (self.lam, self.alpha, self.s, self.l_minus, self.l_plus)

    @classmethod
    def make(cls, lam, alpha, s, l_plus) -> "SymmetricParams":
        """Build from ``l_plus`` alone, taking ``l_minus = 1 - l_plus``."""
        return cls(lam=lam, alpha=alpha, s=s, l_minus=1.0 - l_plus, l_plus=l_plus)

    def embed(self) -> ModelParams:
        return ModelParams(
            lambda1=self.lam,
            lambda2=self.lam,
            alpha1=self.alpha,
            alpha2=self.alpha,
            s1=self.s,
            s2=self.s,
            l1_minus=self.l_minus,
            l1_plus=self.l_plus,
            l2_minus=self.l_minus,
            l2_plus=self.l_plus,
        )

    def replace(self, **changes) -> "SymmetricParams":
        d = asdict(self)
        d.update(changes)
        if "l_plus" in changes and "l_minus" not in changes:
            d["l_minus"] = 1.0 - d["l_plus"]
        if "l_minus" in changes and "l_plus" not in changes:
            d["l_plus"] = 1.0 - d["l_minus"]
        return SymmetricParams(**d)

    def to_dict(self) -> dict:
        return dict(zip(SYMMETRIC_FIELD_NAMES, self._values()))

    @classmethod
    def from_dict(cls, data: dict) -> "SymmetricParams":
        unknown = set(data) - set(SYMMETRIC_FIELD_NAMES)
        if unknown:
            raise ParameterError(f"unknown field(s): {', '.join(sorted(unknown))}")
        missing = set(SYMMETRIC_FIELD_NAMES) - set(data)
        if missing:
            raise ParameterError(f"missing field(s): {', '.join(sorted(missing))}")
        return cls(
            lam=data["lambda"],
            alpha=data["alpha"],
            s=data["s"],
            l_minus=data["l_minus"],
            l_plus=data["l_plus"],
        )

    @classmethod
    def from_model(cls, params: ModelParams) -> "SymmetricParams":
        if not params.is_symmetric():
            raise ParameterError("parameters are not symmetric across users")
        return cls(
            lam=params.lambda1,
            alpha=params.alpha1,
            s=params.s1,
            l_minus=params.l1_minus,
            l_plus=params.l1_plus,
        )


def arrival_pgf(x, y, params: ModelParams):
    """Joint pgf ``E[x^A1 y^A2]`` of independent Bernoulli arrivals."""
    l1, l2 = params.lambda1, params.lambda2
    return (1.0 - l1 + l1 * x) * (1.0 - l2 + l2 * y)


def load_params(path) -> ModelParams | SymmetricParams:
    """Read a parameter file; the key set decides which type is returned."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ParameterError("parameter file must hold a JSON object")
    if set(data) <= set(SYMMETRIC_FIELD_NAMES) and "lambda" in data:
        return SymmetricParams.from_dict(data)
    return ModelParams.from_dict(data)
