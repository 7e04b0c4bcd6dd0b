"""Named initial-data and forcing presets.

Descriptors are strings like ``"taylor-green"`` or
``"random-bandlimited(seed=3,kmin=1,kmax=8,amp=0.5)"``; unknown keys are
rejected.  Scalar presets build a :class:`SpectralField`, vector presets a
divergence-free :class:`VectorField`.  Random presets are reproducible: the
stream depends only on the descriptor (plus the run seed when the descriptor
does not pin one).
"""

from __future__ import annotations

import math
import re

import numpy as np

from . import lp
from .spectral import (
    Grid,
    SpectralField,
    VectorField,
    biot_savart,
    hermitian_symmetrize,
    l2_norm,
    leray_project,
    vector_l2_norm,
)

_DESCRIPTOR_RE = re.compile(r"^\s*([a-zA-Z][a-zA-Z0-9_-]*)\s*(?:\((.*)\))?\s*$")


class PresetError(ValueError):
    pass


def parse_descriptor(descriptor: str) -> tuple[str, dict[str, float]]:
    m = _DESCRIPTOR_RE.match(descriptor)
    if not m:
        raise PresetError(f"malformed preset descriptor: {descriptor!r}")
    name = m.group(1).lower()
    kwargs: dict[str, float] = {}
    body = m.group(2)
    if body:
        for item in body.split(","):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise PresetError(f"preset argument must be key=value: {item!r}")
            key, val = item.split("=", 1)
            kwargs[key.strip().lower()] = float(val.strip())
    return name, kwargs


def _pick(kwargs: dict, key: str, default: float) -> float:
    return float(kwargs.pop(key, default))


def _reject_leftovers(name: str, kwargs: dict) -> None:
    if kwargs:
        raise PresetError(f"unknown arguments for preset {name!r}: {sorted(kwargs)}")


def random_band_field(
    grid: Grid, seed: int, kmin: float, kmax: float, amp: float, decay: float = 2.0,
    require_m1: bool = False, require_m2: bool = False,
) -> SpectralField:
    """Random real field: ``|fhat| ~ (1+|m|)^-decay`` in the band, uniform phases.

    ``require_m1``/``require_m2`` drop all modes constant along that axis
    (needed by checks whose right-hand side vanishes on such modes).
    """
    rng = np.random.default_rng(int(seed))
    r = grid.abs_modes
    band = (r >= kmin) & (r <= kmax)
    if require_m1:
        band &= np.broadcast_to(grid.modes1 != 0, band.shape)
    if require_m2:
        band &= np.broadcast_to(grid.modes2 != 0, band.shape)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=band.shape)
    coeffs = np.where(band, (1.0 + r) ** (-decay) * np.exp(1j * phases), 0.0)
    coeffs = hermitian_symmetrize(coeffs)
    f = SpectralField(grid, coeffs)
    n = l2_norm(f)
    if n == 0.0:
        raise PresetError("random band is empty on this grid")
    return f * (amp / n)


def _bump(grid: Grid, x0: float, y0: float, width: float) -> np.ndarray:
    x1, x2 = grid.points()
    # periodic analogue of a gaussian bump, smooth on the torus
    s = (np.cos(2.0 * math.pi * (x1 - x0) / grid.l1)
         + np.cos(2.0 * math.pi * (x2 - y0) / grid.l2) - 2.0)
    return np.exp(s / (width * width))


def scalar_preset(descriptor: str, grid: Grid, default_seed: int = 0) -> SpectralField:
    name, kw = parse_descriptor(descriptor)
    if name == "zero":
        _reject_leftovers(name, kw)
        return SpectralField.zero(grid)
    if name == "constant":
        c = _pick(kw, "c", 1.0)
        _reject_leftovers(name, kw)
        return SpectralField.constant(grid, c)
    if name == "bubble":
        amp = _pick(kw, "amp", 1.0)
        w = _pick(kw, "w", 0.5)
        x0 = _pick(kw, "x", grid.l1 / 2.0)
        y0 = _pick(kw, "y", grid.l2 / 2.0)
        _reject_leftovers(name, kw)
        return SpectralField.from_values(grid, amp * _bump(grid, x0, y0, w))
    if name == "mode":
        m1 = int(_pick(kw, "m1", 1))
        m2 = int(_pick(kw, "m2", 0))
        amp = _pick(kw, "amp", 1.0)
        _reject_leftovers(name, kw)
        x1, x2 = grid.points()
        vals = amp * np.cos(2.0 * math.pi * (m1 * x1 / grid.l1 + m2 * x2 / grid.l2))
        return SpectralField.from_values(grid, vals)
    if name == "random-bandlimited":
        seed = int(_pick(kw, "seed", default_seed))
        kmin = _pick(kw, "kmin", 1.0)
        kmax = _pick(kw, "kmax", grid.dealias_radius / 2.0)
        amp = _pick(kw, "amp", 1.0)
        decay = _pick(kw, "decay", 2.0)
        _reject_leftovers(name, kw)
        return random_band_field(grid, seed, kmin, kmax, amp, decay)
    if name == "single-block":
        q = int(_pick(kw, "q", 4))
        seed = int(_pick(kw, "seed", default_seed))
        amp = _pick(kw, "amp", 1.0)
        _reject_leftovers(name, kw)
        part = lp.build_partition(grid)
        raw = random_band_field(grid, seed, 1.0, grid.abs_modes.max(), 1.0)
        blk = lp.delta_q(raw, q, part)
        n = l2_norm(blk)
        if n == 0.0:
            raise PresetError(f"block q={q} is empty on this grid")
        return blk * (amp / n)
    raise PresetError(f"unknown scalar preset {name!r}")


def vector_preset(descriptor: str, grid: Grid, default_seed: int = 0) -> VectorField:
    name, kw = parse_descriptor(descriptor)
    if name == "zero":
        _reject_leftovers(name, kw)
        return VectorField.zero(grid)
    if name == "taylor-green":
        amp = _pick(kw, "amp", 1.0)
        _reject_leftovers(name, kw)
        x1, x2 = grid.points()
        a1 = 2.0 * math.pi / grid.l1
        a2 = 2.0 * math.pi / grid.l2
        v1 = -amp * np.cos(a1 * x1) * np.sin(a2 * x2)
        v2 = amp * (a1 / a2) * np.sin(a1 * x1) * np.cos(a2 * x2)
        vf = VectorField.from_values(grid, v1, v2)
        vf.divergence_free = True
        return vf
    if name == "vortex-pair":
        amp = _pick(kw, "amp", 1.0)
        w = _pick(kw, "w", 0.6)
        sep = _pick(kw, "sep", grid.l2 / 4.0)
        _reject_leftovers(name, kw)
        cx = grid.l1 / 2.0
        cy = grid.l2 / 2.0
        om = _bump(grid, cx, cy + sep / 2.0, w) - _bump(grid, cx, cy - sep / 2.0, w)
        omega = SpectralField.from_values(grid, amp * om)
        omega.coeffs[0, 0] = 0.0  # bumps cancel only up to quadrature
        return biot_savart(omega)
    if name == "random-bandlimited":
        seed = int(_pick(kw, "seed", default_seed))
        kmin = _pick(kw, "kmin", 1.0)
        kmax = _pick(kw, "kmax", grid.dealias_radius / 2.0)
        amp = _pick(kw, "amp", 1.0)
        decay = _pick(kw, "decay", 2.0)
        _reject_leftovers(name, kw)
        raw = VectorField(
            random_band_field(grid, seed, kmin, kmax, 1.0, decay),
            random_band_field(grid, seed + 1, kmin, kmax, 1.0, decay),
        )
        proj = leray_project(raw)
        n = vector_l2_norm(proj)
        if n == 0.0:
            raise PresetError("projected random field vanished")
        return proj * (amp / n)
    if name == "lacunary":
        jmax = int(_pick(kw, "jmax", 5))
        amp = _pick(kw, "amp", 1.0)
        _reject_leftovers(name, kw)
        if 2**jmax > grid.dealias_radius * math.sqrt(2.0):
            raise PresetError(f"lacunary jmax={jmax} does not fit the grid band")
        x1, x2 = grid.points()
        a1 = 2.0 * math.pi / grid.l1
        a2 = 2.0 * math.pi / grid.l2
        om = np.zeros_like(x1)
        # block amplitudes ~ 1/sqrt(j): partial gradient sups grow like sqrt(N)
        # while the full gradient sup diverges with jmax
        for j in range(1, jmax + 1):
            om += (amp / math.sqrt(j)) * np.cos((2**j) * a1 * x1) * np.cos((2**j) * a2 * x2)
        omega = SpectralField.from_values(grid, om)
        return biot_savart(omega)
    if name == "vorticity-block":
        q = int(_pick(kw, "q", 3))
        seed = int(_pick(kw, "seed", default_seed))
        amp = _pick(kw, "amp", 1.0)
        _reject_leftovers(name, kw)
        om = scalar_preset(f"single-block(q={q},seed={seed},amp=1.0)", grid)
        om.coeffs[0, 0] = 0.0
        u = biot_savart(om)
        n = vector_l2_norm(u)
        return u * (amp / n) if n > 0 else u
    raise PresetError(f"unknown vector preset {name!r}")
