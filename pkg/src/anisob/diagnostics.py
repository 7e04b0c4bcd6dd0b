"""Inequality monitors: evaluate the a priori bounds along a trajectory.

Each monitor names the quantities it needs per sample (observables), then
turns the sampled series into a left-hand side, a right-hand side and a
margin ``rhs - lhs``.  Explicit-constant monitors carry no free parameter;
fitted monitors report the smallest constant making their structural
right-hand side an envelope of the data (so their margin is nonnegative by
construction and the interesting output is the constant's stability).

Monitors whose right-hand side is exponentially large are evaluated in log
scale (``log_scale = True``); the reported lhs/rhs/margin are then logs of
the underlying quantities.

Time integrals on either side go through one shared trapezoidal accumulator
so a margin can never change sign because of mismatched quadrature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable

import numpy as np

from . import lp
from .solver import (
    ConfigError,
    RunContext,
    SimConfig,
    SimState,
    SystemKind,
    cumtrapz,
    trapezoid_error_estimate,
)
from .spectral import (
    SpectralField,
    VectorField,
    derivative,
    fractional_d1,
    grad_linf_norm,
    h_norm,
    l2_norm,
    lp_norm,
    vector_l2_norm,
    vorticity,
)

_TINY = 1e-300


class SampleView:
    """Per-sample lens over a state with memoized derived fields."""

    def __init__(self, state: SimState, cfg: SimConfig, ctx: RunContext):
        self.state = state
        self.cfg = cfg
        self.ctx = ctx
        self._cache: dict[str, object] = {}

    def _memo(self, key: str, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def theta(self) -> SpectralField:
        return self.state.theta

    @property
    def u(self) -> VectorField:
        return self.state.u

    @property
    def omega(self) -> SpectralField:
        return self._memo("omega", lambda: vorticity(self.state.u))

    @property
    def partition(self) -> lp.DyadicPartition:
        return lp.build_partition(self.state.grid)

    @property
    def advecting_velocity(self) -> VectorField:
        if self.cfg.kind is SystemKind.ANISO_STOKES:
            def build():
                g = self.state.grid
                return VectorField(
                    SpectralField(g, self.ctx.v_adv[0].copy()),
                    SpectralField(g, self.ctx.v_adv[1].copy()),
                    True,
                )
            return self._memo("v_adv", build)
        return self.state.u


# ---------------------------------------------------------------------------
# Observable library (functions of one SampleView)
# ---------------------------------------------------------------------------


def _obs_theta_lp(p: float) -> tuple[str, Callable]:
    tag = "inf" if p == math.inf else f"{p:g}"
    return f"theta_l{tag}", lambda v: lp_norm(v.theta, p)


OBS_THETA_L2 = ("theta_l2", lambda v: l2_norm(v.theta))
OBS_THETA_LINF = _obs_theta_lp(math.inf)
OBS_U_L2 = ("u_l2", lambda v: vector_l2_norm(v.u))
OBS_D1U_L2SQ = (
    "d1u_l2sq",
    lambda v: l2_norm(derivative(v.u.u1, 1)) ** 2 + l2_norm(derivative(v.u.u2, 1)) ** 2,
)
OBS_OMEGA_L2 = ("omega_l2", lambda v: l2_norm(v.omega))
OBS_D1OMEGA_L2SQ = ("d1omega_l2sq", lambda v: l2_norm(derivative(v.omega, 1)) ** 2)
OBS_D1THETA_L2SQ = ("d1theta_l2sq", lambda v: l2_norm(derivative(v.theta, 1)) ** 2)
OBS_THETA_H1SQ = ("theta_h1sq", lambda v: h_norm(v.theta, 1) ** 2)
OBS_D1THETA_H1SQ = ("d1theta_h1sq", lambda v: h_norm(derivative(v.theta, 1), 1) ** 2)
OBS_GRADU_LINF = ("gradu_linf", lambda v: grad_linf_norm(v.u))


def _loglip_v(view: SampleView) -> float:
    # the advecting velocity is frozen for the prescribed-flow kinds
    if view.cfg.kind in (SystemKind.TRANSPORT, SystemKind.ANISO_STOKES):
        cache = view.ctx.static_cache
        if "loglip_v" not in cache:
            cache["loglip_v"] = lp.loglip_seminorm(view.advecting_velocity, view.partition)
        return cache["loglip_v"]
    return lp.loglip_seminorm(view.advecting_velocity, view.partition)


OBS_LOGLIP_V = ("loglip_v", _loglip_v)


def _static_obs(name: str, fn):
    """Wrap an observable of frozen context fields with a per-run memo."""

    def wrapped(view: SampleView) -> float:
        cache = view.ctx.static_cache
        if name not in cache:
            cache[name] = fn(view)
        return cache[name]

    return name, wrapped
OBS_RHO_BLOCKS = ("rho_blocks", lambda v: lp.block_l2_norms(v.theta, v.partition))
OBS_W_BLOCKS = ("w_blocks", lambda v: lp.block_l2_norms_vec(v.u, v.partition))


def _obs_omega_lp(p: float):
    return f"omega_l{p:g}", lambda v: lp_norm(v.omega, p)


def _obs_d1theta_lp(p: float):
    return f"d1theta_l{p:g}", lambda v: lp_norm(derivative(v.theta, 1), p)


def _obs_omega_sqrtl(p_max: int):
    return f"omega_sqrtl_{p_max}", lambda v: lp.sqrtl_norm(v.omega, p_max).value


def _obs_frac_theta_sq(sigma: float):
    return (
        f"absd1_{sigma:g}_theta_sq",
        lambda v: l2_norm(fractional_d1(v.theta, sigma)) ** 2,
    )


def _obs_d1w_blocks():
    def fn(v):
        dw = VectorField(derivative(v.u.u1, 1), derivative(v.u.u2, 1))
        return lp.block_l2_norms_vec(dw, v.partition)

    return "d1w_blocks", fn


def _obs_hs_block_sq(slot: str, s: float):
    def fn(v):
        f = v.theta if slot == "theta" else v.omega
        return lp.sobolev_norm(f, s, v.partition).value ** 2

    return f"{slot}_hs{s:g}sq_block", fn


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class MonitorReport:
    name: str
    ts: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    constant_mode: str
    bound_kind: str = "bound"  # "bound": rhs >= lhs expected; "equality": drift tracker
    log_scale: bool = False
    fitted_constant: float | None = None
    quad_error: float = 0.0
    meta: dict = dc_field(default_factory=dict)
    extra: dict = dc_field(default_factory=dict)

    @property
    def margin(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def min_margin(self) -> float:
        return float(self.margin.min()) if len(self.ts) else 0.0

    @property
    def scale(self) -> float:
        if not len(self.ts):
            return 0.0
        return float(max(np.max(np.abs(self.lhs)), np.max(np.abs(self.rhs))))

    @property
    def samples(self) -> list[tuple[float, float, float, float]]:
        return [
            (float(t), float(l), float(r), float(r - l))
            for t, l, r in zip(self.ts, self.lhs, self.rhs)
        ]


def margin_tolerance(report: MonitorReport, tol_floor_rel: float = 1e-8) -> float:
    """Allowed negative margin: relative floor plus the integrator estimate.

    The estimate combines the global RK4 drift (``dt^4 * t_end``) with a
    Richardson estimate of the trapezoid error of any time integral the
    monitor accumulated.
    """
    dt = report.meta.get("dt", 0.0)
    t_end = report.ts[-1] if len(report.ts) else 0.0
    scale = report.scale
    integ = dt**4 * t_end * scale + 4.0 * report.quad_error
    return max(tol_floor_rel * scale, integ)


def is_violated(report: MonitorReport) -> bool:
    if report.bound_kind != "bound" or report.constant_mode != "explicit":
        return False
    return report.min_margin < -margin_tolerance(report)


# ---------------------------------------------------------------------------
# Monitor machinery
# ---------------------------------------------------------------------------


@dataclass
class InequalityMonitor:
    name: str
    kinds: frozenset
    constant_mode: str  # "explicit" | "fitted"
    needs: Callable[[SimConfig], list[tuple[str, Callable]]]
    evaluate: Callable  # (ts, obs, cfg, meta) -> dict with lhs/rhs/...
    bound_kind: str = "bound"
    log_scale: bool = False
    experimental: bool = False
    requires: Callable[[SimConfig], None] = lambda cfg: None

    def check_config(self, cfg: SimConfig) -> None:
        if cfg.kind not in self.kinds:
            raise ConfigError(
                f"monitor {self.name!r} does not apply to system {cfg.kind.value!r}"
            )
        self.requires(cfg)

    def required_observables(self, cfg: SimConfig) -> list[tuple[str, Callable]]:
        return self.needs(cfg)

    def build_report(self, ts, obs, cfg, meta) -> MonitorReport:
        out = self.evaluate(ts, obs, cfg, meta)
        return MonitorReport(
            name=self.name,
            ts=ts,
            lhs=np.asarray(out["lhs"], dtype=float),
            rhs=np.asarray(out["rhs"], dtype=float),
            constant_mode=self.constant_mode,
            bound_kind=self.bound_kind,
            log_scale=self.log_scale,
            fitted_constant=out.get("fitted"),
            quad_error=out.get("quad_error", 0.0),
            meta=dict(meta),
            extra=out.get("extra", {}),
        )


def _mp(cfg: SimConfig, key: str, default):
    return cfg.monitor_params.get(key, default)


def _fit_max_ratio(num: np.ndarray, den: np.ndarray) -> float:
    mask = den > _TINY
    if not np.any(mask):
        return 0.0
    return float(np.max(num[mask] / den[mask]))


def _fit_envelope_constant(margin_of_c: Callable[[float], float]) -> float:
    """Smallest C > 0 with ``margin_of_c(C) >= 0`` (margin increasing in C)."""
    lo, hi = 1e-12, 1.0
    for _ in range(200):
        if margin_of_c(hi) >= 0.0:
            break
        hi *= 4.0
    else:
        return hi
    for _ in range(100):
        mid = math.sqrt(lo * hi)
        if margin_of_c(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def _safe_log(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, _TINY))


# ---------------------------------------------------------------------------
# Catalogue
# ---------------------------------------------------------------------------


def _require_positive(attr: str):
    def check(cfg: SimConfig):
        if getattr(cfg, attr) <= 0:
            raise ConfigError(f"monitor requires {attr} > 0")

    return check


def _mon_theta_l2() -> InequalityMonitor:
    def evaluate(ts, obs, cfg, meta):
        lhs = obs["theta_l2"]
        return {"lhs": lhs, "rhs": np.full_like(lhs, lhs[0])}

    return InequalityMonitor(
        name="theta_l2",
        kinds=frozenset({SystemKind.HORIZONTAL_VISCOSITY}),
        constant_mode="explicit",
        needs=lambda cfg: [OBS_THETA_L2],
        evaluate=evaluate,
    )


def _mon_u_energy() -> InequalityMonitor:
    def evaluate(ts, obs, cfg, meta):
        diss = cumtrapz(ts, obs["d1u_l2sq"])
        lhs = obs["u_l2"] ** 2 + 2.0 * cfg.nu * diss
        rhs = (obs["u_l2"][0] + ts * obs["theta_l2"][0]) ** 2
        qerr = 2.0 * cfg.nu * trapezoid_error_estimate(ts, obs["d1u_l2sq"])
        return {"lhs": lhs, "rhs": rhs, "quad_error": qerr}

    return InequalityMonitor(
        name="u_energy",
        kinds=frozenset({SystemKind.HORIZONTAL_VISCOSITY}),
        constant_mode="explicit",
        needs=lambda cfg: [OBS_U_L2, OBS_D1U_L2SQ, OBS_THETA_L2],
        evaluate=evaluate,
    )


def _mon_omega_l2() -> InequalityMonitor:
    def evaluate(ts, obs, cfg, meta):
        diss = cumtrapz(ts, obs["d1omega_l2sq"])
        lhs = obs["omega_l2"] ** 2 + cfg.nu * diss
        rhs = obs["omega_l2"][0] ** 2 + (ts / cfg.nu) * obs["theta_l2"][0] ** 2
        qerr = cfg.nu * trapezoid_error_estimate(ts, obs["d1omega_l2sq"])
        return {"lhs": lhs, "rhs": rhs, "quad_error": qerr}

    return InequalityMonitor(
        name="omega_l2",
        kinds=frozenset({SystemKind.HORIZONTAL_VISCOSITY}),
        constant_mode="explicit",
        needs=lambda cfg: [OBS_OMEGA_L2, OBS_D1OMEGA_L2SQ, OBS_THETA_L2],
        evaluate=evaluate,
        requires=_require_positive("nu"),
    )


def _mon_theta_lp_conservation(p: float) -> InequalityMonitor:
    name_p = "inf" if p == math.inf else f"{p:g}"
    spec = _obs_theta_lp(p)

    def evaluate(ts, obs, cfg, meta):
        lhs = obs[spec[0]]
        return {"lhs": lhs, "rhs": np.full_like(lhs, lhs[0])}

    return InequalityMonitor(
        name=f"theta_lp_conservation_{name_p}",
        kinds=frozenset({SystemKind.HORIZONTAL_VISCOSITY}),
        constant_mode="explicit",
        needs=lambda cfg: [spec],
        evaluate=evaluate,
        bound_kind="equality",
    )


def _mon_omega_sqrtl() -> InequalityMonitor:
    def needs(cfg):
        p_max = int(_mp(cfg, "p_max", 64))
        return [_obs_omega_sqrtl(p_max), OBS_THETA_L2, OBS_THETA_LINF]

    def evaluate(ts, obs, cfg, meta):
        p_max = int(_mp(cfg, "p_max", 64))
        w = obs[f"omega_sqrtl_{p_max}"]
        theta0 = max(obs["theta_l2"][0], obs["theta_linf"][0])
        lhs = w**2
        rhs = w[0] ** 2 + ts / (2.0 * cfg.nu) * theta0**2
        return {"lhs": lhs, "rhs": rhs}

    return InequalityMonitor(
        name="omega_sqrtL",
        kinds=frozenset({SystemKind.HORIZONTAL_VISCOSITY}),
        constant_mode="explicit",
        needs=needs,
        evaluate=evaluate,
        requires=_require_positive("nu"),
    )


def _mon_theta_energy_2() -> InequalityMonitor:
    def evaluate(ts, obs, cfg, meta):
        diss = cumtrapz(ts, obs["d1theta_l2sq"])
        lhs = obs["theta_l2"] ** 2 + 2.0 * cfg.kappa * diss
        rhs = np.full_like(lhs, obs["theta_l2"][0] ** 2)
        qerr = 2.0 * cfg.kappa * trapezoid_error_estimate(ts, obs["d1theta_l2sq"])
        return {"lhs": lhs, "rhs": rhs, "quad_error": qerr}

    return InequalityMonitor(
        name="theta_energy_2",
        kinds=frozenset({SystemKind.HORIZONTAL_DIFFUSIVITY, SystemKind.REGULARIZED}),
        constant_mode="explicit",
        needs=lambda cfg: [OBS_THETA_L2, OBS_D1THETA_L2SQ],
        evaluate=evaluate,
    )


def _mon_u_l2_2() -> InequalityMonitor:
    def evaluate(ts, obs, cfg, meta):
        lhs = obs["u_l2"]
        rhs = obs["u_l2"][0] + ts * obs["theta_l2"][0]
        return {"lhs": lhs, "rhs": rhs}

    return InequalityMonitor(
        name="u_l2_2",
        kinds=frozenset({SystemKind.HORIZONTAL_DIFFUSIVITY, SystemKind.REGULARIZED}),
        constant_mode="explicit",
        needs=lambda cfg: [OBS_U_L2, OBS_THETA_L2],
        evaluate=evaluate,
    )


def _mon_omega_l2_2() -> InequalityMonitor:
    def evaluate(ts, obs, cfg, meta):
        lhs = obs["omega_l2"]
        rhs = obs["omega_l2"][0] + np.sqrt(ts / (2.0 * cfg.kappa)) * obs["theta_l2"][0]
        return {"lhs": lhs, "rhs": rhs}

    return InequalityMonitor(
        name="omega_l2_2",
        kinds=frozenset({SystemKind.HORIZONTAL_DIFFUSIVITY, SystemKind.REGULARIZED}),
        constant_mode="explicit",
        needs=lambda cfg: [OBS_OMEGA_L2, OBS_THETA_L2],
        evaluate=evaluate,
        requires=_require_positive("kappa"),
    )


def _mon_omega_lp_2() -> InequalityMonitor:
    def needs(cfg):
        p = float(_mp(cfg, "lp_p", 4))
        return [_obs_omega_lp(p), _obs_d1theta_lp(p)]

    def evaluate(ts, obs, cfg, meta):
        p = float(_mp(cfg, "lp_p", 4))
        lhs = obs[f"omega_l{p:g}"]
        src = obs[f"d1theta_l{p:g}"]
        rhs = lhs[0] + cumtrapz(ts, src)
        return {"lhs": lhs, "rhs": rhs, "quad_error": trapezoid_error_estimate(ts, src)}

    return InequalityMonitor(
        name="omega_lp_2",
        kinds=frozenset({SystemKind.HORIZONTAL_DIFFUSIVITY, SystemKind.REGULARIZED}),
        constant_mode="explicit",
        needs=needs,
        evaluate=evaluate,
    )


def _mon_theta_h1_2() -> InequalityMonitor:
    def evaluate(ts, obs, cfg, meta):
        kappa = cfg.kappa
        energy = obs["theta_h1sq"] + kappa * cumtrapz(ts, obs["d1theta_h1sq"])
        init = obs["theta_h1sq"][0]
        if init <= _TINY:
            z = np.zeros_like(ts)
            return {"lhs": z, "rhs": z, "fitted": 0.0}
        a = obs["omega_l2"][0] ** 2 + (ts / kappa) * obs["theta_l2"][0] ** 2
        b = 1.0 + (obs["u_l2"][0] ** 2 + ts**2 * obs["theta_l2"][0] ** 2) / kappa**2
        denom = ts * a * b / kappa
        lhs = _safe_log(energy)
        with np.errstate(divide="ignore", invalid="ignore"):
            c_req = np.where(denom > _TINY, (lhs - math.log(init)) / np.maximum(denom, _TINY), -math.inf)
        fitted = float(np.max(c_req)) if np.any(denom > _TINY) else 0.0
        rhs = math.log(init) + fitted * denom
        return {"lhs": lhs, "rhs": rhs, "fitted": fitted}

    return InequalityMonitor(
        name="theta_h1_2",
        kinds=frozenset({SystemKind.HORIZONTAL_DIFFUSIVITY, SystemKind.REGULARIZED}),
        constant_mode="fitted",
        needs=lambda cfg: [
            OBS_THETA_H1SQ,
            OBS_D1THETA_H1SQ,
            OBS_OMEGA_L2,
            OBS_U_L2,
            OBS_THETA_L2,
        ],
        evaluate=evaluate,
        log_scale=True,
        requires=_require_positive("kappa"),
    )


def _mon_aniso_hs_2() -> InequalityMonitor:
    def needs(cfg):
        s = float(_mp(cfg, "s_aniso", 0.5))
        return [_obs_frac_theta_sq(1.0 + s), _obs_frac_theta_sq(2.0 + s)]

    def evaluate(ts, obs, cfg, meta):
        s = float(_mp(cfg, "s_aniso", 0.5))
        lo = obs[f"absd1_{1.0 + s:g}_theta_sq"]
        hi = obs[f"absd1_{2.0 + s:g}_theta_sq"]
        lhs = lo + cfg.kappa * cumtrapz(ts, hi)
        init = lo[0]
        growth = lhs - init
        fitted = _fit_max_ratio(growth[1:], ts[1:]) if len(ts) > 1 else 0.0
        rhs = init + fitted * ts
        return {"lhs": lhs, "rhs": rhs, "fitted": fitted}

    def requires(cfg):
        _require_positive("kappa")(cfg)
        s = float(_mp(cfg, "s_aniso", 0.5))
        if not (0.0 < s <= 0.5):
            raise ConfigError("aniso_hs_2 needs s in (0, 1/2]")

    return InequalityMonitor(
        name="aniso_hs_2",
        kinds=frozenset({SystemKind.HORIZONTAL_DIFFUSIVITY, SystemKind.REGULARIZED}),
        constant_mode="fitted",
        needs=needs,
        evaluate=evaluate,
        requires=requires,
    )


def _mon_omega_sqrtl_2() -> InequalityMonitor:
    def needs(cfg):
        p_max = int(_mp(cfg, "p_max", 64))
        return [_obs_omega_sqrtl(p_max), OBS_D1THETA_H1SQ]

    def evaluate(ts, obs, cfg, meta):
        p_max = int(_mp(cfg, "p_max", 64))
        w = obs[f"omega_sqrtl_{p_max}"]
        shape = np.sqrt(ts) * np.sqrt(cumtrapz(ts, obs["d1theta_h1sq"]))
        fitted = _fit_max_ratio(w - w[0], shape)
        return {"lhs": w, "rhs": w[0] + fitted * shape, "fitted": fitted}

    return InequalityMonitor(
        name="omega_sqrtL_2",
        kinds=frozenset({SystemKind.HORIZONTAL_DIFFUSIVITY, SystemKind.REGULARIZED}),
        constant_mode="fitted",
        needs=needs,
        evaluate=evaluate,
    )


def _mon_losing_besov() -> InequalityMonitor:
    def needs(cfg):
        def f_norm(view):
            s = float(_mp(cfg, "s_losing", 0.5))
            if view.ctx.force is None:
                return 0.0
            f = SpectralField(view.state.grid, view.ctx.force[0].copy())
            return lp.besov_b2inf_norm(f, s, view.partition).value

        return [OBS_RHO_BLOCKS, OBS_LOGLIP_V, _static_obs("f_besov_s", f_norm)]

    def evaluate(ts, obs, cfg, meta):
        s = float(_mp(cfg, "s_losing", 0.5))
        eps = float(_mp(cfg, "eps_losing", 0.2))
        blocks = obs["rho_blocks"]
        lost = np.array([lp.besov_from_blocks(b, s - eps) for b in blocks])
        unlost = np.array([lp.besov_from_blocks(b, s) for b in blocks])
        w = cumtrapz(ts, obs["loglip_v"])
        data = unlost[0] + cumtrapz(ts, obs["f_besov_s"])
        if unlost[0] <= _TINY:
            z = np.zeros_like(ts)
            return {"lhs": z, "rhs": z, "fitted": 0.0}
        lhs = _safe_log(lost)
        log_data = _safe_log(data)

        def min_margin(c):
            rhs = math.log(c) + (c / eps) * w**2 + log_data
            return float(np.min(rhs - lhs))

        fitted = _fit_envelope_constant(min_margin)
        rhs = math.log(fitted) + (fitted / eps) * w**2 + log_data
        eta = eps / w[-1] if w[-1] > _TINY else 0.0
        s_t = s - eta * w
        besov_st = np.array(
            [lp.besov_from_blocks(b, st) for b, st in zip(blocks, s_t)]
        )
        extra = {"s_t": s_t, "besov_at_s_t": besov_st, "unlost": unlost, "w_int": w}
        return {"lhs": lhs, "rhs": rhs, "fitted": fitted, "extra": extra}

    return InequalityMonitor(
        name="losing_besov",
        kinds=frozenset({SystemKind.TRANSPORT}),
        constant_mode="fitted",
        needs=needs,
        evaluate=evaluate,
        log_scale=True,
    )


def _mon_losing_besov_unlost() -> InequalityMonitor:
    def evaluate(ts, obs, cfg, meta):
        s = float(_mp(cfg, "s_losing", 0.5))
        blocks = obs["rho_blocks"]
        unlost = np.array([lp.besov_from_blocks(b, s) for b in blocks])
        return {"lhs": unlost, "rhs": np.full_like(unlost, unlost[0])}

    return InequalityMonitor(
        name="losing_besov_unlost",
        kinds=frozenset({SystemKind.TRANSPORT}),
        constant_mode="explicit",
        needs=lambda cfg: [OBS_RHO_BLOCKS],
        evaluate=evaluate,
        bound_kind="equality",
    )


def _mon_stokes_losing() -> InequalityMonitor:
    def needs(cfg):
        s = float(_mp(cfg, "s_losing", 0.5))

        def f_norm(view):
            if view.ctx.force is None:
                return 0.0
            g = view.state.grid
            fv = VectorField(
                SpectralField(g, view.ctx.force[1].copy()),
                SpectralField(g, view.ctx.force[2] - (view.ctx.g_force if view.ctx.g_force is not None else 0.0)),
            )
            blocks = lp.block_l2_norms_vec(fv, view.partition)
            return lp.besov_from_blocks(blocks, s)

        def g_norm_sq(view):
            if view.ctx.g_force is None:
                return 0.0
            g = view.state.grid
            gs = SpectralField(g, view.ctx.g_force.copy())
            return lp.besov_b2inf_norm(gs, s - 1.0, view.partition).value ** 2

        return [
            OBS_W_BLOCKS,
            _obs_d1w_blocks(),
            OBS_LOGLIP_V,
            _static_obs("fvec_besov_s", f_norm),
            _static_obs("g_besov_sm1_sq", g_norm_sq),
        ]

    def evaluate(ts, obs, cfg, meta):
        s = float(_mp(cfg, "s_losing", 0.5))
        eps = float(_mp(cfg, "eps_losing", 0.2))
        nu = cfg.nu
        lost = np.array([lp.besov_from_blocks(b, s - eps) for b in obs["w_blocks"]])
        d1_lost_sq = np.array(
            [lp.besov_from_blocks(b, s - eps) ** 2 for b in obs["d1w_blocks"]]
        )
        core = lost + math.sqrt(nu) * np.sqrt(cumtrapz(ts, d1_lost_sq))
        w = cumtrapz(ts, obs["loglip_v"])
        init = lp.besov_from_blocks(obs["w_blocks"][0], s)
        data = (
            init
            + cumtrapz(ts, obs["fvec_besov_s"])
            + np.sqrt(cumtrapz(ts, obs["g_besov_sm1_sq"])) / math.sqrt(nu)
        )
        if np.max(data) <= _TINY:
            z = np.zeros_like(ts)
            return {"lhs": z, "rhs": z, "fitted": 0.0}
        lhs = _safe_log(np.maximum(core, _TINY))
        log_pref = np.log1p(np.sqrt(nu * ts))
        log_data = _safe_log(data)

        def min_margin(c):
            rhs = math.log(c) + log_pref + (c / eps) * w**2 + log_data
            return float(np.min(rhs - lhs))

        fitted = _fit_envelope_constant(min_margin)
        rhs = math.log(fitted) + log_pref + (fitted / eps) * w**2 + log_data
        return {"lhs": lhs, "rhs": rhs, "fitted": fitted}

    return InequalityMonitor(
        name="stokes_losing",
        kinds=frozenset({SystemKind.ANISO_STOKES}),
        constant_mode="fitted",
        needs=needs,
        evaluate=evaluate,
        log_scale=True,
        requires=_require_positive("nu"),
    )


def _mon_hs_gronwall() -> InequalityMonitor:
    """Optional high-regularity Gronwall envelope; experimental, fitted."""

    def needs(cfg):
        s = float(_mp(cfg, "s_high", 2.5))

        def pair_sq(view):
            return (
                lp.sobolev_norm(view.theta, s - 1.0, view.partition).value ** 2
                + lp.sobolev_norm(view.omega, s - 1.0, view.partition).value ** 2
            )

        def d1omega_sq(view):
            return lp.sobolev_norm(derivative(view.omega, 1), s - 1.0, view.partition).value ** 2

        return [
            ("thetaomega_hsm1_sq", pair_sq),
            ("d1omega_hsm1_sq", d1omega_sq),
            OBS_THETA_LINF,
            OBS_GRADU_LINF,
        ]

    def evaluate(ts, obs, cfg, meta):
        nu = cfg.nu
        energy = obs["thetaomega_hsm1_sq"] + nu * cumtrapz(ts, obs["d1omega_hsm1_sq"])
        init = energy[0]
        if init <= _TINY:
            z = np.zeros_like(ts)
            return {"lhs": z, "rhs": z, "fitted": 0.0}
        g_int = cumtrapz(ts, obs["theta_linf"] + obs["gradu_linf"])
        lhs = _safe_log(energy)
        need = lhs - math.log(init) - ts / nu
        fitted = _fit_max_ratio(need[1:], g_int[1:]) if len(ts) > 1 else 0.0
        fitted = max(fitted, 0.0)
        rhs = math.log(init) + ts / nu + fitted * g_int
        return {"lhs": lhs, "rhs": rhs, "fitted": fitted}

    return InequalityMonitor(
        name="hs_gronwall",
        kinds=frozenset({SystemKind.HORIZONTAL_VISCOSITY}),
        constant_mode="fitted",
        needs=needs,
        evaluate=evaluate,
        log_scale=True,
        experimental=True,
        requires=_require_positive("nu"),
    )


def monitor_catalogue() -> dict[str, InequalityMonitor]:
    """Fresh instances of every named monitor."""
    monitors = [
        _mon_theta_l2(),
        _mon_u_energy(),
        _mon_omega_l2(),
        _mon_theta_lp_conservation(2),
        _mon_theta_lp_conservation(4),
        _mon_theta_lp_conservation(math.inf),
        _mon_omega_sqrtl(),
        _mon_theta_energy_2(),
        _mon_u_l2_2(),
        _mon_omega_l2_2(),
        _mon_omega_lp_2(),
        _mon_theta_h1_2(),
        _mon_aniso_hs_2(),
        _mon_omega_sqrtl_2(),
        _mon_losing_besov(),
        _mon_losing_besov_unlost(),
        _mon_stokes_losing(),
        _mon_hs_gronwall(),
    ]
    return {m.name: m for m in monitors}


def monitors_for(names: list[str], cfg: SimConfig) -> list[InequalityMonitor]:
    """Resolve monitor names against the catalogue, checking applicability."""
    catalogue = monitor_catalogue()
    out = []
    for name in names:
        if name not in catalogue:
            raise ConfigError(f"unknown monitor {name!r}")
        mon = catalogue[name]
        mon.check_config(cfg)
        out.append(mon)
    return out


def default_monitors(cfg: SimConfig) -> list[InequalityMonitor]:
    """Every non-experimental monitor applicable to the configured system."""
    out = []
    for mon in monitor_catalogue().values():
        if mon.experimental or cfg.kind not in mon.kinds:
            continue
        try:
            mon.requires(cfg)
        except ConfigError:
            continue
        out.append(mon)
    return out


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_csv(reports: list[MonitorReport], path: str | Path) -> None:
    """One row per sample time: ``t`` then lhs/rhs/margin per monitor."""
    if reports:
        ts = reports[0].ts
        for rep in reports[1:]:
            if len(rep.ts) != len(ts) or np.any(rep.ts != ts):
                raise ValueError("reports do not share a sample grid")
    else:
        ts = np.array([])
    cols = ["t"]
    for rep in reports:
        cols += [f"{rep.name}.lhs", f"{rep.name}.rhs", f"{rep.name}.margin"]
    lines = [",".join(cols)]
    for i, t in enumerate(ts):
        row = [_fmt(float(t))]
        for rep in reports:
            row += [_fmt(float(rep.lhs[i])), _fmt(float(rep.rhs[i])), _fmt(float(rep.margin[i]))]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def parse_csv(path: str | Path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    if data.size == 0:
        return {name: np.array([]) for name in header}
    return {name: data[:, j] for j, name in enumerate(header)}


def summary_dict(result) -> dict:
    mons = {}
    for rep in result.reports:
        entry = {
            "min_margin": float(rep.min_margin),
            "constant_mode": rep.constant_mode,
            "bound_kind": rep.bound_kind,
            "log_scale": rep.log_scale,
            "tolerance": float(margin_tolerance(rep)),
            "violated": bool(is_violated(rep)),
        }
        if rep.fitted_constant is not None:
            entry["fitted_constant"] = float(rep.fitted_constant)
        mons[rep.name] = entry
    return {
        "dt": result.dt,
        "steps": result.steps,
        "t_end": float(result.ts[-1]) if len(result.ts) else 0.0,
        "monitors": mons,
    }


def write_summary(result, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary_dict(result), sort_keys=True, indent=2) + "\n")
