"""Parameter domains: intervals, cylinders and cubes with tensor-product quadrature."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

MIN_GAUSS_ORDER = 4


def gauss_legendre(order: int, panels=1) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [0, 1].

    ``panels`` is a panel count or an explicit increasing list of break points
    including 0 and 1.
    """
    if order < MIN_GAUSS_ORDER:
        raise ConfigError("quadrature.order", f"Gauss order must be >= {MIN_GAUSS_ORDER}, got {order}")
    if np.ndim(panels) == 0:
        if int(panels) < 1:
            raise ConfigError("quadrature.panels", "need at least one panel")
        breaks = np.linspace(0.0, 1.0, int(panels) + 1)
    else:
        breaks = np.asarray(panels, dtype=float)
        if breaks[0] != 0.0 or breaks[-1] != 1.0 or np.any(np.diff(breaks) <= 0):
            raise ConfigError("quadrature.panels", "break points must increase from 0 to 1")
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        nodes.append(a + (b - a) * (x + 1) / 2)
        weights.append((b - a) * w / 2)
    return np.concatenate(nodes), np.concatenate(weights)


def trapezoid_periodic(M: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform nodes j/M with equal weights; spectrally accurate for smooth periodic integrands."""
    if M < MIN_GAUSS_ORDER:
        raise ConfigError("quadrature.loop_nodes", f"need at least {MIN_GAUSS_ORDER} loop nodes, got {M}")
    return np.arange(M) / M, np.full(M, 1.0 / M)


@dataclass(frozen=True, eq=False)
class Axis:
    nodes: np.ndarray
    weights: np.ndarray
    periodic: bool
    rule: str


@dataclass(frozen=True, eq=False)
class ParameterDomain:
    """Tensor-product domain [0,1]^k; periodic axes are circles (no boundary faces).

    Orientation is du^1 ^ ... ^ du^k in axis order.
    """

    shape: str
    axes: tuple
    volume: float = field(init=False)

    def __post_init__(self):
        if not self.axes:
            raise ConfigError("domain", "a parameter domain needs at least one axis")
        vol = 1.0
        for ax in self.axes:
            s = float(np.sum(ax.weights))
            if abs(s - 1.0) > 1e-12:
                raise ConfigError("domain", f"axis weights sum to {s!r}, expected 1")
            if ax.periodic and np.any((ax.nodes < 0) | (ax.nodes >= 1)):
                raise ConfigError("domain", "periodic nodes must lie in [0, 1)")
            vol *= s
        object.__setattr__(self, "volume", vol)

    @classmethod
    def interval(cls, order: int = 8, panels=1) -> "ParameterDomain":
        n, w = gauss_legendre(order, panels)
        return cls("interval", (Axis(n, w, False, f"gauss{order}x{_npanels(panels)}"),))

    @classmethod
    def cylinder(cls, order: int = 8, loop_nodes: int = 32, loop_rule: str = "trapezoid",
                 loop_panels=1) -> "ParameterDomain":
        """(s, t) with s periodic (the loop) first and t in [0, 1] second."""
        if loop_rule == "trapezoid":
            s = Axis(*trapezoid_periodic(loop_nodes), True, f"trapezoid{loop_nodes}")
        elif loop_rule == "gauss":
            n, w = gauss_legendre(order, loop_panels)
            s = Axis(n, w, True, f"gauss{order}x{_npanels(loop_panels)}")
        else:
            raise ConfigError("quadrature.loop_rule", f"unknown rule {loop_rule!r}")
        n, w = gauss_legendre(order)
        return cls("cylinder", (s, Axis(n, w, False, f"gauss{order}x1")))

    @classmethod
    def cube(cls, k: int, order: int = 8, panels=1) -> "ParameterDomain":
        n, w = gauss_legendre(order, panels)
        ax = Axis(n, w, False, f"gauss{order}x{_npanels(panels)}")
        return cls("square" if k == 2 else "cube", (ax,) * k)

    @property
    def k(self) -> int:
        return len(self.axes)

    @property
    def periodic(self) -> tuple:
        return tuple(ax.periodic for ax in self.axes)

    def points(self):
        """Iterate (u, weight) over the tensor grid in C order."""
        for combo in itertools.product(*(range(len(ax.nodes)) for ax in self.axes)):
            u = tuple(float(ax.nodes[i]) for ax, i in zip(self.axes, combo))
            w = float(np.prod([ax.weights[i] for ax, i in zip(self.axes, combo)]))
            yield u, w

    def num_points(self) -> int:
        return int(np.prod([len(ax.nodes) for ax in self.axes]))

    def face(self, a: int) -> "ParameterDomain | None":
        """Domain of the two faces u_a = 0, 1 (None when k == 1)."""
        rest = self.axes[:a] + self.axes[a + 1:]
        return ParameterDomain(self.shape + "-face", rest) if rest else None

    def describe(self) -> dict:
        return {"shape": self.shape, "k": self.k,
                "axes": [{"rule": ax.rule, "nodes": len(ax.nodes), "periodic": ax.periodic}
                         for ax in self.axes]}


def _npanels(panels) -> int:
    return int(panels) if np.ndim(panels) == 0 else len(panels) - 1


def definite_integral(f, order: int = 16) -> float:
    """Gauss-Legendre quadrature of a scalar function on [0, 1]."""
    x, w = gauss_legendre(order)
    return float(sum(wi * f(xi) for xi, wi in zip(x, w)))
