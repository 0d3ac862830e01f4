"""Radial interpolation of two Lipschitz maps across a spherical shell.

Given 0 < a < b and maps f1, f2 with f1(0) = f2(0) = 0 and
Lip(f1) + Lip(f2) <= 1, the blend equals f1 inside radius a, f2 outside
radius b and mixes radially in between; its Lipschitz constant is at most
1 + a/(b-a).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .fn import BlendFn, ConstFn, LipFn, SumFn
from .spaces import NormedSpace


@dataclass
class BlendSpec:
    a: float
    b: float
    f1: LipFn
    f2: LipFn
    lip1: float
    lip2: float
    space: NormedSpace
    _blend: BlendFn = field(default=None, repr=False)

    def __post_init__(self):
        if not (0.0 < self.a < self.b):
            raise InputError("need 0 < a < b")
        if self.lip1 < 0 or self.lip2 < 0 or self.lip1 + self.lip2 > 1.0 + 1e-12:
            raise InputError("need lip1, lip2 >= 0 with lip1 + lip2 <= 1")
        if self.f1.d != self.f2.d or self.f1.l != self.f2.l:
            raise InputError("f1 and f2 must share domain and codomain")
        zero = np.zeros(self.f1.d)
        self.f1 = self._anchor(self.f1, zero, "f1")
        self.f2 = self._anchor(self.f2, zero, "f2")
        self._blend = BlendFn(self.a, self.b, self.f1, self.f2, self.space,
                              lip1=self.lip1, lip2=self.lip2)

    @staticmethod
    def _anchor(f, zero, name):
        v = f(zero)
        if np.max(np.abs(v)) <= 1e-12:
            return f
        warnings.warn("%s(0) != 0; subtracting the constant %r" % (name, v))
        return SumFn([f, ConstFn(v, f.d)], [1.0, -1.0])

    @property
    def fn(self) -> BlendFn:
        return self._blend

    @property
    def lip_bound(self) -> float:
        return 1.0 + self.a / (self.b - self.a)


def build_blend(spec: BlendSpec) -> BlendFn:
    return spec.fn


def eval_blend(spec: BlendSpec, x):
    """Evaluate the blend at one point or a batch of points."""
    return spec.fn(x)
