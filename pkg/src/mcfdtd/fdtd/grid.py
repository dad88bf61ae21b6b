"""Yee grid geometry, materials, sources and boundary descriptions.

Index conventions: a grid has ``(I, M, K)`` cells.  Every field component is
either node-aligned (integer position, ``N + 1`` samples) or cell-aligned
(half-integer position, ``N`` samples) along each axis.  All arrays carry a
trailing multicomplex coefficient axis.  A 2-D TE grid is a 3-D grid with
``K == 1`` holding only ``Ez``, ``Hx`` and ``Hy``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from .. import multicomplex as mc

C0 = constants.c
EPS0 = constants.epsilon_0
MU0 = constants.mu_0

AXES = "xyz"

# True where the component sits on integer (node) positions along that axis
STAGGER = {
    "Ex": (False, True, True),
    "Ey": (True, False, True),
    "Ez": (True, True, False),
    "Hx": (True, False, False),
    "Hy": (False, True, False),
    "Hz": (False, False, True),
}
E_COMPONENTS = ("Ex", "Ey", "Ez")
H_COMPONENTS = ("Hx", "Hy", "Hz")
TE2D_COMPONENTS = ("Ez", "Hx", "Hy")

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")


def component_axis(comp: str) -> int:
    return AXES.index(comp[1])


def component_shape(comp: str, dims) -> tuple[int, int, int]:
    return tuple(n + 1 if node else n for n, node in zip(dims, STAGGER[comp]))


class Diverged(RuntimeError):
    """A field grew beyond the stability threshold."""


@dataclass
class YeeGrid:
    """Cell counts and per-cell multicomplex edge lengths (meters).

    ``sizes[a]`` has shape ``(I, M, K, ncoef)`` and holds the length of every
    cell along axis ``a``; only perturbed cells carry imaginary parts.
    """

    dims: tuple[int, int, int]
    sizes: list
    te2d: bool = False

    @classmethod
    def uniform(cls, dims, spacing, order: int = 0, te2d: bool = False) -> "YeeGrid":
        dims = tuple(int(n) for n in dims)
        if len(dims) == 2:
            dims = dims + (1,)
            te2d = True
        if te2d and dims[2] != 1:
            raise ValueError("a 2-D TE grid has exactly one cell along z")
        if any(n < 1 for n in dims):
            raise ValueError(f"cell counts must be positive, got {dims}")
        spacing = tuple(float(s) for s in spacing)
        if len(spacing) == 2:
            spacing = spacing + (1.0,)
        if any(s <= 0 for s in spacing):
            raise ValueError("cell sizes must be positive")
        nc = 1 << order
        sizes = []
        for s in spacing:
            arr = np.zeros(dims + (nc,))
            arr[..., 0] = s
            sizes.append(arr)
        return cls(dims, sizes, te2d)

    @property
    def ncoef(self) -> int:
        return self.sizes[0].shape[-1]

    @property
    def order(self) -> int:
        return mc.order_of(self.ncoef)

    @property
    def components(self) -> tuple[str, ...]:
        return TE2D_COMPONENTS if self.te2d else E_COMPONENTS + H_COMPONENTS

    def promote(self, order: int) -> "YeeGrid":
        return YeeGrid(self.dims, [mc.promote(s, order) for s in self.sizes], self.te2d)

    def nominal_min_spacing(self) -> tuple[float, ...]:
        return tuple(float(s[..., 0].min()) for s in self.sizes)

    def cfl_limit(self) -> float:
        """Largest stable time step, judged on the nominal (real) cell sizes."""
        mins = self.nominal_min_spacing()
        if any(m <= 0 for m in mins):
            raise ValueError("nominal cell sizes must be positive")
        used = mins[:2] if self.te2d else mins
        return 1.0 / (C0 * np.sqrt(sum(1.0 / m**2 for m in used)))

    def node_positions(self, axis: int, line=(0, 0, 0)) -> np.ndarray:
        """Multicomplex node coordinates along ``axis`` for one line of cells."""
        idx = list(line)
        idx[axis] = slice(None)
        cells = self.sizes[axis][tuple(idx)]
        out = np.zeros((cells.shape[0] + 1, cells.shape[1]))
        out[1:] = np.cumsum(cells, axis=0)
        return out


@dataclass
class MaterialMap:
    """Per-cell relative permittivity; mu_r is 1 and the media are lossless."""

    eps_r: np.ndarray

    @classmethod
    def vacuum(cls, dims, order: int = 0) -> "MaterialMap":
        eps = np.zeros(tuple(dims) + (1 << order,))
        eps[..., 0] = 1.0
        return cls(eps)

    def fill(self, lo, hi, value: float) -> None:
        box = tuple(slice(a, b) for a, b in zip(lo, hi))
        self.eps_r[box] = 0.0
        self.eps_r[box + (0,)] = value

    def promote(self, order: int) -> "MaterialMap":
        return MaterialMap(mc.promote(self.eps_r, order))

    def validate(self) -> None:
        if np.any(self.eps_r[..., 0] < 1.0):
            raise ValueError("relative permittivity must have real part >= 1")


def gaussian_pulse(t, width: float, delay: float | None = None):
    """``exp(-((t - t0) / T)**2)`` with the customary ``t0 = 3T``."""
    t0 = 3.0 * width if delay is None else delay
    return np.exp(-(((np.asarray(t) - t0) / width) ** 2))


@dataclass
class SourceSpec:
    """Soft Gaussian source added to one E component over a node box."""

    component: str
    lo: tuple[int, int, int]
    hi: tuple[int, int, int]
    width: float
    amplitude: float = 1.0
    delay: float | None = None

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("pulse half-width must be positive")
        if self.component not in E_COMPONENTS:
            raise ValueError("sources drive an electric field component")

    def value(self, t: float) -> float:
        return float(self.amplitude * gaussian_pulse(t, self.width, self.delay))


@dataclass
class PecPlate:
    """Zero-thickness conductor in the plane ``axis == index`` (node index).

    ``lo``/``hi`` are cell ranges (half-open) along the two in-plane axes,
    given in x, y, z order with the normal axis entry ignored.
    """

    axis: int
    index: int
    lo: tuple[int, int, int]
    hi: tuple[int, int, int]


@dataclass
class BoundarySpec:
    """Per-face condition: ``"pec"`` or ``"mur"`` (first-order absorbing).

    ``eps_eff`` maps a face to the effective permittivity that sets its Mur
    wave speed ``c / sqrt(eps_eff)`` (1 when absent).  ``plates`` lists
    interior zero-thickness conductors.
    """

    faces: dict = field(default_factory=lambda: {f: "pec" for f in FACES})
    eps_eff: dict = field(default_factory=dict)
    plates: list = field(default_factory=list)

    def __post_init__(self):
        for face, kind in self.faces.items():
            if face not in FACES:
                raise ValueError(f"unknown face {face!r}")
            if kind not in ("pec", "mur"):
                raise ValueError(f"face {face}: unknown boundary {kind!r}")
        for face in FACES:
            self.faces.setdefault(face, "pec")

    @classmethod
    def all_pec(cls) -> "BoundarySpec":
        return cls()
