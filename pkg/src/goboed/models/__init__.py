"""Benchmark systems: source localization, epidemic control, pharmacokinetics."""

from .base import InputScaler, Model
from .pk import PkModel
from .siqr import SiqrModel
from .srcloc import SrcLocModel
from .toy import LinearGaussianModel

_REGISTRY = {"srcloc": SrcLocModel, "siqr": SiqrModel, "pk": PkModel}


def make_model(name: str):
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; expected one of {sorted(_REGISTRY)}") from None


__all__ = [
    "InputScaler",
    "LinearGaussianModel",
    "Model",
    "PkModel",
    "SiqrModel",
    "SrcLocModel",
    "make_model",
]
