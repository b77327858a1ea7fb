"""Inverse solver: loss, smoothness regularizer, Adam and the training loop.

Heights are optimized directly (clamped to [0,1] after every step),
specularity through its softplus raw grid, sharpness through its log-space
raw scalar. All per-step randomness (batch indices, ray jitter) is derived
functionally from (seed, stream, step[, slot]), never from stateful
generators, so a run replays bit-for-bit and a checkpoint resume continues
on the exact trajectory of an uninterrupted run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NonFiniteLoss, ShapeMismatch
from .geometry import ViewConfig, build_planes
from .gradients import GradientSet, backward_plane
from .metrics import altitude_mae, altitude_median, altitude_rmse, image_mse
from .renderer import render_image, render_plane
from .scene import DsmSurface, SharpnessParam, SpecularityMap

_SEED_MASK = 0xFFFFFFFFFFFFFFFF
_BATCH_STREAM = 101
_JITTER_STREAM = 202

DEFAULT_LR_SCHEDULE = ((0, 1.0), (5000, 0.1), (8000, 0.01))
BETA_MODES = ("learned", "fixed", "anneal")


@dataclass(frozen=True)
class RunConfig:
    """Solver hyperparameters. Defaults reproduce the reference protocol."""

    steps: int = 10000
    lr_schedule: tuple = DEFAULT_LR_SCHEDULE
    plane_batch: int = 64
    rays_per_plane: int = 256
    reg_weight: float = 1e-4
    learn_theta: bool = False
    learn_beta: bool = True
    jitter: bool = True
    seed: int = 0
    grid_size: int = 64
    height_init: float = 0.5
    theta_raw_init: float = -5.0
    beta_init: float = 0.05
    beta_mode: str = "learned"  # learned | fixed | anneal
    beta_final: float = 0.01  # anneal target at the last step
    checkpoint_every: int = 0  # 0 disables checkpoints
    log_every: int = 500
    out_dir: str | None = None

    def __post_init__(self):
        sched = tuple((int(s), float(lr)) for s, lr in self.lr_schedule)
        object.__setattr__(self, "lr_schedule", sched)
        if not sched or sched[0][0] != 0:
            raise ValueError("lr_schedule must start with a breakpoint at step 0")
        breaks = [s for s, _ in sched]
        if any(b >= c for b, c in zip(breaks, breaks[1:])):
            raise ValueError("lr_schedule breakpoints must be strictly increasing")
        if any(lr <= 0.0 for _, lr in sched):
            raise ValueError("lr_schedule rates must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.plane_batch < 1:
            raise ValueError("plane_batch must be >= 1")
        if self.rays_per_plane < 1:
            raise ValueError("rays_per_plane must be >= 1")
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.reg_weight < 0.0:
            raise ValueError("reg_weight must be non-negative")
        if self.beta_init <= 0.0 or self.beta_final <= 0.0:
            raise ValueError("beta values must be positive")
        if self.beta_mode not in BETA_MODES:
            raise ValueError(f"beta_mode must be one of {BETA_MODES}")


def lr_for_step(schedule, step):
    """Piecewise-constant lookup: the last breakpoint at or before step."""
    lr = schedule[0][1]
    for bk, value in schedule:
        if step >= bk:
            lr = value
        else:
            break
    return lr


def data_loss(rendered, observed):
    """Mean squared error over all (plane, bin) amplitude pairs."""
    a = np.asarray(rendered, dtype=np.float64)
    b = np.asarray(observed, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"profile shapes differ: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


def smoothness_reg(surface):
    """Mean squared height difference over unordered 4-connected pairs."""
    h = surface.heights if isinstance(surface, DsmSurface) else np.asarray(surface, float)
    dx = h[:, 1:] - h[:, :-1]
    dy = h[1:, :] - h[:-1, :]
    pairs = dx.size + dy.size
    if pairs == 0:
        return 0.0
    return float((np.sum(dx * dx) + np.sum(dy * dy)) / pairs)


def smoothness_grad(heights):
    """Gradient of smoothness_reg with respect to every height."""
    h = np.asarray(heights, dtype=np.float64)
    dx = h[:, 1:] - h[:, :-1]
    dy = h[1:, :] - h[:-1, :]
    pairs = dx.size + dy.size
    g = np.zeros_like(h)
    if pairs == 0:
        return g
    g[:, 1:] += 2.0 * dx
    g[:, :-1] -= 2.0 * dx
    g[1:, :] += 2.0 * dy
    g[:-1, :] -= 2.0 * dy
    g /= pairs
    return g


@dataclass
class TrainState:
    surface: DsmSurface
    spec_map: SpecularityMap
    sharpness: SharpnessParam
    m_heights: np.ndarray
    v_heights: np.ndarray
    m_theta: np.ndarray
    v_theta: np.ndarray
    m_beta: float = 0.0
    v_beta: float = 0.0
    step: int = 0
    loss_history: list = field(default_factory=list)


def init_state(grid_shape, cfg: RunConfig) -> TrainState:
    """Flat-surface starting point with zeroed optimizer moments."""
    surface = DsmSurface(heights=np.full(grid_shape, float(cfg.height_init)))
    spec_map = SpecularityMap(raw=np.full(grid_shape, float(cfg.theta_raw_init)))
    return TrainState(
        surface=surface,
        spec_map=spec_map,
        sharpness=SharpnessParam.from_beta(cfg.beta_init),
        m_heights=np.zeros(grid_shape),
        v_heights=np.zeros(grid_shape),
        m_theta=np.zeros(grid_shape),
        v_theta=np.zeros(grid_shape),
    )


@dataclass(frozen=True)
class BatchItem:
    """One sampled azimuth plane with its observed range profile."""

    plane: object
    view: ViewConfig
    observed: np.ndarray
    rng: object = None  # jitter generator; None renders unjittered


_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8


def _adam_array(param, grad, m, v, lr, t):
    m *= _ADAM_B1
    m += (1.0 - _ADAM_B1) * grad
    v *= _ADAM_B2
    v += (1.0 - _ADAM_B2) * grad * grad
    mhat = m / (1.0 - _ADAM_B1**t)
    vhat = v / (1.0 - _ADAM_B2**t)
    param -= lr * mhat / (np.sqrt(vhat) + _ADAM_EPS)


def _adam_scalar(param, grad, m, v, lr, t):
    m = _ADAM_B1 * m + (1.0 - _ADAM_B1) * grad
    v = _ADAM_B2 * v + (1.0 - _ADAM_B2) * grad * grad
    mhat = m / (1.0 - _ADAM_B1**t)
    vhat = v / (1.0 - _ADAM_B2**t)
    return param - lr * mhat / (math.sqrt(vhat) + _ADAM_EPS), m, v


def _anneal_beta(cfg: RunConfig, step):
    frac = min(1.0, step / cfg.steps)
    return cfg.beta_init * (cfg.beta_final / cfg.beta_init) ** frac


def train_step(state: TrainState, batch, cfg: RunConfig):
    """One optimizer step over a batch of planes; mutates state.

    Returns a diagnostics dict (loss, data term, reg term, lr, gradient
    norms). Raises NonFiniteLoss with the step's diagnostics if the loss
    or any gradient stops being finite.
    """
    if not batch:
        raise ValueError("batch must contain at least one plane")

    spec_arg = state.spec_map if cfg.learn_theta else None
    beta = state.sharpness.beta
    grid_shape = state.surface.heights.shape

    total_bins = 0
    for item in batch:
        if item.observed.shape != (item.view.n_range_bins,):
            raise ShapeMismatch(
                f"observed profile shape {item.observed.shape} != "
                f"({item.view.n_range_bins},)"
            )
        total_bins += item.observed.size

    grads = GradientSet.zeros(grid_shape)
    sse = 0.0
    for item in batch:
        # tape lives in shared scratch; consumed by backward before the
        # next render overwrites it
        profile, tape = render_plane(
            state.surface,
            spec_arg,
            beta,
            item.plane,
            item.view,
            jitter=item.rng is not None,
            rng=item.rng,
            reuse_buffers=True,
        )
        resid = profile - item.observed
        sse += float(resid @ resid)
        grads.add_(backward_plane(tape, (2.0 / total_bins) * resid))

    data = sse / total_bins
    reg = smoothness_reg(state.surface)
    loss = data + cfg.reg_weight * reg
    grads.d_heights += cfg.reg_weight * smoothness_grad(state.surface.heights)

    if not (math.isfinite(loss) and grads.is_finite()):
        raise NonFiniteLoss(
            f"non-finite loss/gradient at step {state.step}: "
            f"data={data!r} reg={reg!r} beta={beta!r} "
            f"max|dH|={np.max(np.abs(grads.d_heights))!r} "
            f"max|dTheta|={np.max(np.abs(grads.d_theta_raw))!r} "
            f"dBeta={grads.d_beta_raw!r}"
        )

    lr = lr_for_step(cfg.lr_schedule, state.step)
    t = state.step + 1
    _adam_array(state.surface.heights, grads.d_heights,
                state.m_heights, state.v_heights, lr, t)
    if cfg.learn_theta:
        _adam_array(state.spec_map.raw, grads.d_theta_raw,
                    state.m_theta, state.v_theta, lr, t)
    if cfg.beta_mode == "learned":
        if cfg.learn_beta:
            state.sharpness.raw, state.m_beta, state.v_beta = _adam_scalar(
                state.sharpness.raw, grads.d_beta_raw,
                state.m_beta, state.v_beta, lr, t,
            )
    elif cfg.beta_mode == "anneal":
        state.sharpness.raw = math.log(_anneal_beta(cfg, t))
    # "fixed": leave beta at its initial value

    state.surface.clamp()
    state.step = t
    state.loss_history.append(float(loss))
    return {
        "loss": float(loss),
        "data": float(data),
        "reg": float(reg),
        "lr": float(lr),
        "grad_norm_heights": float(np.linalg.norm(grads.d_heights)),
        "grad_norm_theta": float(np.linalg.norm(grads.d_theta_raw)),
        "grad_beta": float(grads.d_beta_raw),
    }


def _batch_rng(seed, step):
    return np.random.default_rng(
        np.random.SeedSequence([int(seed) & _SEED_MASK, _BATCH_STREAM, int(step)])
    )


def _jitter_rng(seed, step, slot):
    return np.random.default_rng(
        np.random.SeedSequence(
            [int(seed) & _SEED_MASK, _JITTER_STREAM, int(step), int(slot)]
        )
    )


def fit(images, views, cfg: RunConfig, truth=None, state=None, quiet=False):
    """Recover a surface (and optionally a specularity map) from SAR images.

    images and views are parallel lists; planes are sampled uniformly with
    replacement across all views, batch-rendered with jitter, and fitted
    for cfg.steps optimizer steps from a flat initialization (or from a
    supplied state, which continues an interrupted run exactly).

    Returns (surface, specularity map, beta, report).
    """
    if len(images) < 1:
        raise ValueError("need at least one image")
    if len(images) != len(views):
        raise ShapeMismatch(f"{len(images)} images vs {len(views)} views")
    for image, view in zip(images, views):
        want = (view.n_planes, view.n_range_bins)
        if image.amplitudes.shape != want:
            raise ShapeMismatch(
                f"image shape {image.amplitudes.shape} != view {want}"
            )

    eff_views = [
        v if v.n_rays == cfg.rays_per_plane else replace(v, n_rays=cfg.rays_per_plane)
        for v in views
    ]
    planes = [build_planes(v) for v in eff_views]
    flat_index = [
        (vi, pi) for vi, v in enumerate(views) for pi in range(v.n_planes)
    ]

    if state is None:
        state = init_state((cfg.grid_size, cfg.grid_size), cfg)

    t0 = time.perf_counter()
    for step in range(state.step, cfg.steps):
        idx = _batch_rng(cfg.seed, step).integers(0, len(flat_index),
                                                  size=cfg.plane_batch)
        batch = []
        for slot, flat in enumerate(idx):
            vi, pi = flat_index[flat]
            rng = _jitter_rng(cfg.seed, step, slot) if cfg.jitter else None
            batch.append(BatchItem(
                plane=planes[vi][pi],
                view=eff_views[vi],
                observed=images[vi].amplitudes[pi],
                rng=rng,
            ))
        info = train_step(state, batch, cfg)

        if not quiet and cfg.log_every > 0 and (
            step % cfg.log_every == 0 or step == cfg.steps - 1
        ):
            print(
                f"step {step} lr {info['lr']:g} loss {info['loss']:.6e} "
                f"wall {time.perf_counter() - t0:.1f}s",
                flush=True,
            )
        if (
            cfg.checkpoint_every > 0
            and cfg.out_dir is not None
            and state.step % cfg.checkpoint_every == 0
        ):
            from . import io as _io  # deferred: io imports this module's types

            _io.write_checkpoint(_io.checkpoint_path(cfg.out_dir), state, cfg)

    wall = time.perf_counter() - t0
    report = {
        "steps": state.step,
        "wall_time_s": wall,
        "loss_history": np.asarray(state.loss_history),
        "final_loss": state.loss_history[-1] if state.loss_history else float("nan"),
        "reg_weight": cfg.reg_weight,
        "lr_schedule": cfg.lr_schedule,
        "beta": state.sharpness.beta,
        "theta_mean": float(np.mean(state.spec_map.theta)),
        "theta_max": float(np.max(state.spec_map.theta)),
    }

    spec_arg = state.spec_map if cfg.learn_theta else None
    for k, view in enumerate(views):
        rendered = render_image(state.surface, spec_arg, state.sharpness.beta,
                                view, jitter=False)
        report[f"view{k}_mse"] = image_mse(rendered, images[k])

    if truth is not None:
        report["altitude_rmse"] = altitude_rmse(state.surface, truth)
        report["altitude_mae"] = altitude_mae(state.surface, truth)
        report["altitude_median"] = altitude_median(state.surface, truth)

    if cfg.checkpoint_every > 0 and cfg.out_dir is not None:
        from . import io as _io

        _io.write_checkpoint(_io.checkpoint_path(cfg.out_dir), state, cfg)

    return state.surface, state.spec_map, state.sharpness.beta, report
