"""Time integration of the spectrally truncated systems.

All variants share one Galerkin structure: the state is band-limited to a
radial ball ``|m| <= n``, quadratic terms are evaluated pointwise in physical
space and re-truncated to the ball (alias-free as long as ``n`` does not
exceed the grid's dealias radius), and the diagonal dissipation is integrated
exactly through an integrating-factor classical RK4, so purely linear runs
reproduce the exact decay multiplier.

Variants:

* ``horizontal_viscosity``   -- transport of theta, velocity dissipated by d1^2
* ``horizontal_diffusivity`` -- theta dissipated by d1^2, velocity ideal
* ``isotropic``              -- reference system with full Laplacians
* ``regularized``            -- horizontal_diffusivity plus eps*Laplacian on both
* ``transport``              -- scalar advected by a frozen velocity, optional
                                source and optional one-directional diffusion
                                (kappa = 0 gives the pure transport equation;
                                kappa > 0 exercises the heat multiplier alone)
* ``aniso_stokes``           -- velocity advected by a frozen field, d1^2 viscosity,
                                vector forcing plus a vertical scalar forcing
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace
from enum import Enum
from typing import Any

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import presets
from .spectral import (
    Grid,
    SpectralField,
    VectorField,
    hermitian_symmetrize,
    leray_project,
    sharp_truncate,
    vector_linf_norm,
)


class ConfigError(ValueError):
    pass


class StepFailure(RuntimeError):
    def __init__(self, time: float, message: str):
        super().__init__(f"t={time:.6g}: {message}")
        self.time = time


class SystemKind(str, Enum):
    HORIZONTAL_VISCOSITY = "horizontal_viscosity"
    HORIZONTAL_DIFFUSIVITY = "horizontal_diffusivity"
    ISOTROPIC = "isotropic"
    REGULARIZED = "regularized"
    TRANSPORT = "transport"
    ANISO_STOKES = "aniso_stokes"


_USES_NU = {SystemKind.HORIZONTAL_VISCOSITY, SystemKind.ISOTROPIC, SystemKind.ANISO_STOKES}
_USES_KAPPA = {
    SystemKind.HORIZONTAL_DIFFUSIVITY,
    SystemKind.ISOTROPIC,
    SystemKind.REGULARIZED,
    SystemKind.TRANSPORT,
}
_USES_EPS = {SystemKind.REGULARIZED}

DT_STABILITY_CAP = 0.05  # auto time step is 0.5 * min(dx/|u|, this cap)


@dataclass
class SimConfig:
    kind: SystemKind
    grid: Grid
    t_end: float
    nu: float = 0.0
    kappa: float = 0.0
    epsilon: float = 0.0
    n_truncation: float | None = None  # None -> grid dealias radius
    dt: float | str = "auto"
    theta0: str = "zero"
    u0: str = "zero"
    advect: str | None = None  # prescribed velocity (aniso_stokes only)
    forcing_f: str = "zero"  # scalar source (transport) / vector forcing (aniso_stokes)
    forcing_g: str = "zero"  # vertical scalar forcing (aniso_stokes)
    seed: int = 0
    sample_every: int = 1
    monitor_params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.kind = SystemKind(self.kind)
        self.validate()

    def validate(self) -> None:
        if self.t_end < 0:
            raise ConfigError("t_end must be >= 0")
        if self.sample_every < 1:
            raise ConfigError("sample_every must be >= 1")
        if isinstance(self.dt, str):
            if self.dt != "auto":
                raise ConfigError("dt must be a positive number or 'auto'")
        elif self.dt <= 0:
            raise ConfigError("dt must be positive")
        for name, value, allowed in (
            ("nu", self.nu, _USES_NU),
            ("kappa", self.kappa, _USES_KAPPA),
            ("epsilon", self.epsilon, _USES_EPS),
        ):
            if value < 0:
                raise ConfigError(f"{name} must be >= 0")
            if value > 0 and self.kind not in allowed:
                raise ConfigError(f"{name} is not a parameter of {self.kind.value}")
        if self.n_truncation is not None:
            if self.n_truncation <= 0:
                raise ConfigError("n_truncation must be positive")
            if self.n_truncation > self.grid.dealias_radius + 1e-12:
                raise ConfigError("n_truncation must not exceed the dealias radius")
        if self.kind is SystemKind.ANISO_STOKES and not self.advect:
            raise ConfigError("aniso_stokes needs an 'advect' velocity preset")
        if self.advect and self.kind is not SystemKind.ANISO_STOKES:
            raise ConfigError("'advect' is only meaningful for aniso_stokes"
                              " (transport uses the initial u as frozen velocity)")

    @property
    def ball_radius(self) -> float:
        return self.grid.dealias_radius if self.n_truncation is None else self.n_truncation


@dataclass
class SimState:
    theta: SpectralField
    u: VectorField
    t: float

    @property
    def grid(self) -> Grid:
        return self.theta.grid


# ---------------------------------------------------------------------------
# Run context: precomputed multipliers and frozen auxiliary fields
# ---------------------------------------------------------------------------


@dataclass
class RunContext:
    cfg: SimConfig
    ball: np.ndarray  # bool mask |m| <= n
    ik1: np.ndarray  # first-derivative multipliers, Nyquist zeroed
    ik2: np.ndarray
    lin: np.ndarray  # (3, n1, n2) real diagonal of the linear part
    proj_k1: np.ndarray  # k1/|k|^2 etc. for the projection
    proj_k2: np.ndarray
    v_adv: np.ndarray | None = None  # (2, n1, n2) frozen advecting velocity
    force: np.ndarray | None = None  # (3, n1, n2) static forcing coefficients
    g_force: np.ndarray | None = None  # vertical scalar forcing, kept for reports
    static_cache: dict = dc_field(default_factory=dict)  # per-run memo for frozen-field observables


def build_context(cfg: SimConfig) -> RunContext:
    g = cfg.grid
    ball = g.abs_modes <= cfg.ball_radius
    ik1 = np.where(g.nyquist1, 0.0, 1j * g.k1) * np.ones_like(g.k2)
    ik2 = np.ones_like(g.k1) * np.where(g.nyquist2, 0.0, 1j * g.k2)
    ksq = g.ksq.copy()
    ksq[0, 0] = 1.0

    lin = np.zeros((3, g.n1, g.n2))
    kk = cfg.kind
    if kk is SystemKind.HORIZONTAL_VISCOSITY:
        lin[1] = lin[2] = -cfg.nu * g.k1**2
    elif kk is SystemKind.HORIZONTAL_DIFFUSIVITY:
        lin[0] = -cfg.kappa * g.k1**2
    elif kk is SystemKind.ISOTROPIC:
        lin[0] = -cfg.kappa * g.ksq
        lin[1] = lin[2] = -cfg.nu * g.ksq
    elif kk is SystemKind.REGULARIZED:
        lin[0] = -cfg.kappa * g.k1**2 - cfg.epsilon * g.ksq
        lin[1] = lin[2] = -cfg.epsilon * g.ksq
    elif kk is SystemKind.ANISO_STOKES:
        lin[1] = lin[2] = -cfg.nu * g.k1**2
    elif kk is SystemKind.TRANSPORT:
        lin[0] = -cfg.kappa * g.k1**2

    ctx = RunContext(
        cfg=cfg,
        ball=ball,
        ik1=ik1,
        ik2=ik2,
        lin=lin,
        proj_k1=g.k1 / ksq * np.ones_like(g.k2),
        proj_k2=np.ones_like(g.k1) * g.k2 / ksq,
    )

    if kk is SystemKind.ANISO_STOKES:
        v = presets.vector_preset(cfg.advect, g, cfg.seed)
        v = leray_project(v)
        ctx.v_adv = np.stack([v.u1.coeffs * ball, v.u2.coeffs * ball])
        force = np.zeros((3, g.n1, g.n2), dtype=complex)
        fv = presets.vector_preset(cfg.forcing_f, g, cfg.seed)
        gs = presets.scalar_preset(cfg.forcing_g, g, cfg.seed)
        force[1] = fv.u1.coeffs * ball
        force[2] = fv.u2.coeffs * ball
        # the scalar forcing acts vertically; it is projected together with
        # the rest of the velocity tendency
        force[2] += gs.coeffs * ball
        ctx.force = force
        ctx.g_force = gs.coeffs * ball
    elif kk is SystemKind.TRANSPORT:
        force = np.zeros((3, g.n1, g.n2), dtype=complex)
        fs = presets.scalar_preset(cfg.forcing_f, g, cfg.seed)
        force[0] = fs.coeffs * ball
        ctx.force = force
    return ctx


def init_state(cfg: SimConfig, ctx: RunContext | None = None) -> SimState:
    """Build the initial state: presets, projected and ball-truncated."""
    g = cfg.grid
    radius = cfg.ball_radius
    theta = sharp_truncate(presets.scalar_preset(cfg.theta0, g, cfg.seed), radius)
    u = presets.vector_preset(cfg.u0, g, cfg.seed)
    u = leray_project(u)  # presets with nonzero divergence are projected, not rejected
    u = VectorField(sharp_truncate(u.u1, radius), sharp_truncate(u.u2, radius), True)
    return SimState(theta=theta, u=u, t=0.0)


def _pack(state: SimState) -> np.ndarray:
    return np.stack([state.theta.coeffs, state.u.u1.coeffs, state.u.u2.coeffs])


def _unpack(Y: np.ndarray, grid: Grid, t: float) -> SimState:
    return SimState(
        theta=SpectralField(grid, Y[0].copy()),
        u=VectorField(
            SpectralField(grid, Y[1].copy()),
            SpectralField(grid, Y[2].copy()),
            divergence_free=True,
        ),
        t=t,
    )


def _rhs_arrays(Y: np.ndarray, ctx: RunContext) -> np.ndarray:
    """Nonlinear (non-diagonal) part of the tendency, ball-truncated."""
    cfg = ctx.cfg
    g = cfg.grid
    kk = cfg.kind
    out = np.zeros_like(Y)

    th = Y[0]
    if kk is SystemKind.ANISO_STOKES:
        a1, a2 = ctx.v_adv
        w1, w2 = Y[1], Y[2]
    else:
        a1, a2 = Y[1], Y[2]
        w1, w2 = Y[1], Y[2]

    # the advecting velocity is frozen for the prescribed-flow kinds; its
    # physical values can be reused across stages and steps (run() seeds the
    # cache; the one-shot rhs() entry point never does)
    cached = ctx.static_cache.get("adv_values")
    if cached is not None and kk in (SystemKind.TRANSPORT, SystemKind.ANISO_STOKES):
        a1v, a2v = cached
    else:
        a1v = np.fft.ifft2(a1, norm="forward").real
        a2v = np.fft.ifft2(a2, norm="forward").real
        if kk in (SystemKind.TRANSPORT, SystemKind.ANISO_STOKES):
            ctx.static_cache["adv_values"] = (a1v, a2v)

    def fwd(vals):
        return np.fft.fft2(vals, norm="forward") * ctx.ball

    # scalar advection: -div(theta * u); skipped when no scalar evolves
    if kk is not SystemKind.ANISO_STOKES:
        thv = np.fft.ifft2(th, norm="forward").real
        f1 = fwd(thv * a1v)
        f2 = fwd(thv * a2v)
        out[0] = -(ctx.ik1 * f1 + ctx.ik2 * f2)

    # velocity advection: -P div(a (x) w)  (a = w except for the frozen-velocity runs)
    if kk is not SystemKind.TRANSPORT:
        if kk is SystemKind.ANISO_STOKES:
            w1v = np.fft.ifft2(w1, norm="forward").real
            w2v = np.fft.ifft2(w2, norm="forward").real
        else:
            w1v, w2v = a1v, a2v
        t11 = fwd(a1v * w1v)
        t12 = fwd(a1v * w2v)
        t21 = fwd(a2v * w1v) if kk is SystemKind.ANISO_STOKES else t12
        t22 = fwd(a2v * w2v)
        r1 = -(ctx.ik1 * t11 + ctx.ik2 * t21)
        r2 = -(ctx.ik1 * t12 + ctx.ik2 * t22)
        # buoyancy enters only the vertical component
        if kk is not SystemKind.ANISO_STOKES:
            r2 = r2 + th
        if ctx.force is not None:
            r1 = r1 + ctx.force[1]
            r2 = r2 + ctx.force[2]
        # project: r -= k (k.r)/|k|^2
        kr = g.k1 * r1 + g.k2 * r2
        out[1] = r1 - ctx.proj_k1 * kr
        out[2] = r2 - ctx.proj_k2 * kr
    elif ctx.force is not None:
        out[0] = out[0] + ctx.force[0]

    return out


def rhs(state: SimState, cfg: SimConfig, ctx: RunContext | None = None) -> tuple[SpectralField, VectorField]:
    """Full tendency (nonlinear part plus diagonal dissipation) as fields."""
    if ctx is None:
        ctx = build_context(cfg)
    Y = _pack(state)
    dY = _rhs_arrays(Y, ctx) + ctx.lin * Y
    g = cfg.grid
    return (
        SpectralField(g, dY[0]),
        VectorField(SpectralField(g, dY[1]), SpectralField(g, dY[2]), True),
    )


def _step_arrays(Y: np.ndarray, t: float, dt: float, ctx: RunContext,
                 e_half: np.ndarray, e_full: np.ndarray) -> np.ndarray:
    """One integrating-factor RK4 step; the diagonal part is exact."""
    with np.errstate(invalid="ignore", over="ignore"):  # blow-ups detected below
        k1 = _rhs_arrays(Y, ctx)
        y2 = e_half * (Y + (0.5 * dt) * k1)
        k2 = _rhs_arrays(y2, ctx)
        y3 = e_half * Y + (0.5 * dt) * k2
        k3 = _rhs_arrays(y3, ctx)
        y4 = e_full * Y + dt * e_half * k3
        k4 = _rhs_arrays(y4, ctx)
        out = e_full * Y + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)
    if not np.all(np.isfinite(out)):
        raise StepFailure(t + dt, "non-finite coefficients (time step too large?)")
    # re-enforce realness; support containment is automatic (rhs is ball-masked,
    # the diagonal factors preserve support)
    for c in range(out.shape[0]):
        out[c] = hermitian_symmetrize(out[c])
    return out


def step(state: SimState, cfg: SimConfig, dt: float | None = None,
         ctx: RunContext | None = None) -> SimState:
    """Advance one step of length ``dt`` (defaults to the auto step)."""
    if ctx is None:
        ctx = build_context(cfg)
    if dt is None:
        dt = resolve_dt(cfg, state)
    e_half = np.exp(ctx.lin * (0.5 * dt))
    e_full = e_half * e_half
    Y = _step_arrays(_pack(state), state.t, dt, ctx, e_half, e_full)
    return _unpack(Y, cfg.grid, state.t + dt)


def resolve_dt(cfg: SimConfig, state0: SimState) -> float:
    """CFL-style automatic step: ``0.5 * min(dx/|u|_inf, cap)``, frozen per run."""
    if not isinstance(cfg.dt, str):
        return float(cfg.dt)
    g = cfg.grid
    dx = min(g.l1 / g.n1, g.l2 / g.n2)
    umax = vector_linf_norm(state0.u)
    if cfg.kind is SystemKind.ANISO_STOKES and cfg.advect:
        v = presets.vector_preset(cfg.advect, g, cfg.seed)
        umax = max(umax, vector_linf_norm(v))
    cand = DT_STABILITY_CAP if umax == 0.0 else min(dx / umax, DT_STABILITY_CAP)
    return 0.5 * cand


@dataclass
class RunResult:
    cfg: SimConfig
    dt: float
    steps: int
    ts: np.ndarray
    observables: dict[str, np.ndarray]
    reports: list[Any]
    state0: SimState
    state_final: SimState


def run(cfg: SimConfig, monitors: list[Any] | None = None,
        snapshot_dir: str | None = None, snapshot_every: int | None = None) -> RunResult:
    """Integrate from 0 to ``t_end``, sampling observables for the monitors.

    ``monitors`` are objects exposing ``required_observables(cfg)`` and
    ``build_report(ts, obs, cfg, run_meta)``; see the diagnostics module.
    Deterministic for a fixed config.
    """
    monitors = monitors or []
    ctx = build_context(cfg)
    state = init_state(cfg, ctx)
    state0 = SimState(state.theta.copy(), state.u.copy(), 0.0)

    dt = resolve_dt(cfg, state)
    if cfg.t_end == 0.0:
        steps = 0
    else:
        steps = max(int(math.ceil(cfg.t_end / dt - 1e-12)), 1)
        steps = cfg.sample_every * int(math.ceil(steps / cfg.sample_every))
        dt = cfg.t_end / steps

    obs_specs: dict[str, Any] = {}
    for mon in monitors:
        for name, fn in mon.required_observables(cfg):
            obs_specs.setdefault(name, fn)

    e_half = np.exp(ctx.lin * (0.5 * dt))
    e_full = e_half * e_half

    ts: list[float] = []
    samples: dict[str, list] = {name: [] for name in obs_specs}

    from .diagnostics import SampleView  # local import to avoid a cycle

    snap_stride = max(int((snapshot_every or cfg.sample_every) // cfg.sample_every), 1)

    def take_sample(Y: np.ndarray, t: float):
        view = SampleView(_unpack(Y, cfg.grid, t), cfg, ctx)
        ts.append(t)
        for name, fn in obs_specs.items():
            samples[name].append(fn(view))
        k = len(ts) - 1
        if snapshot_dir is not None and k % snap_stride == 0:
            from .snapshot import save_field

            save_field(view.state.theta, f"{snapshot_dir}/theta_{k:05d}.field", "theta", t)
            save_field(view.state.u.u1, f"{snapshot_dir}/u1_{k:05d}.field", "u1", t)
            save_field(view.state.u.u2, f"{snapshot_dir}/u2_{k:05d}.field", "u2", t)

    Y = _pack(state)
    take_sample(Y, 0.0)
    for k in range(steps):
        Y = _step_arrays(Y, k * dt, dt, ctx, e_half, e_full)
        if (k + 1) % cfg.sample_every == 0:
            take_sample(Y, (k + 1) * dt)

    ts_arr = np.asarray(ts)
    obs = {name: np.asarray(vals) for name, vals in samples.items()}
    meta = {"dt": dt, "steps": steps, "sample_dt": dt * cfg.sample_every}
    reports = [mon.build_report(ts_arr, obs, cfg, meta) for mon in monitors]

    return RunResult(
        cfg=cfg,
        dt=dt,
        steps=steps,
        ts=ts_arr,
        observables=obs,
        reports=reports,
        state0=state0,
        state_final=_unpack(Y, cfg.grid, steps * dt if steps else 0.0),
    )


def quadrature_integrals(ts: np.ndarray, series: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Cumulative trapezoid of each integrand over the shared sample times."""
    out = {}
    for name, vals in series.items():
        out[name] = cumulative_trapezoid(vals, ts, initial=0.0)
    return out


def cumtrapz(ts: np.ndarray, vals: np.ndarray) -> np.ndarray:
    return cumulative_trapezoid(vals, ts, initial=0.0)


def trapezoid_error_estimate(ts: np.ndarray, vals: np.ndarray) -> float:
    """Richardson estimate of the final-time trapezoid error (stride-2 compare)."""
    if len(ts) < 5:
        return 0.0
    fine = cumulative_trapezoid(vals, ts, initial=0.0)[-1]
    coarse = cumulative_trapezoid(vals[::2], ts[::2], initial=0.0)[-1]
    return abs(fine - coarse) / 3.0
