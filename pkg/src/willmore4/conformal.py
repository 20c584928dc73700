"""Conformal motions of flat ambient space and the invariance harness.

A motion acts on ambient points; surfaces pick motions up as post-maps, so
jet evaluation composes the analytic family map with each motion in jet
arithmetic (inversion is a rational map, exact on jets). Each motion also
knows the logarithm of its conformal factor, which lets scale functions be
pulled back so that pointwise conformal invariants can be compared before
and after a motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet, jet_apply

#: default guard radius around the singular locus of an inversion
DELTA_GUARD = 0.5

_KINDS = ("translation", "rotation", "dilation", "inversion", "special_conformal")


@dataclass(frozen=True)
class ConformalMotion:
    """One generator of the Moebius group of flat ambient space."""

    kind: str
    params: dict
    delta_guard: float = DELTA_GUARD

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown motion kind {self.kind!r}")


def translation(t) -> ConformalMotion:
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise ValueError("translation vector must be finite")
    return ConformalMotion("translation", {"t": t})


def rotation(R) -> ConformalMotion:
    R = np.asarray(R, dtype=np.float64)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError(f"rotation needs a square matrix, got shape {R.shape}")
    err = np.max(np.abs(R.T @ R - np.eye(R.shape[0])))
    if err > 1e-12:
        raise ValueError(f"matrix is not orthogonal: max |R^T R - I| = {err:.3e}")
    return ConformalMotion("rotation", {"R": R})


def dilation(factor: float) -> ConformalMotion:
    factor = float(factor)
    if not factor > 0:
        raise ValueError(f"dilation factor must be positive, got {factor}")
    return ConformalMotion("dilation", {"factor": factor})


def inversion(center, delta_guard: float = DELTA_GUARD) -> ConformalMotion:
    center = np.asarray(center, dtype=np.float64)
    if not np.all(np.isfinite(center)):
        raise ValueError("inversion center must be finite")
    return ConformalMotion("inversion", {"center": center}, delta_guard)


def special_conformal(b, delta_guard: float = DELTA_GUARD) -> ConformalMotion:
    b = np.asarray(b, dtype=np.float64)
    if not np.all(np.isfinite(b)):
        raise ValueError("special conformal parameter must be finite")
    return ConformalMotion("special_conformal", {"b": b}, delta_guard)


def _stages(motion: ConformalMotion):
    """A motion as a list of elementary stages; special conformal unfolds
    into inversion, translation, inversion."""
    if motion.kind == "special_conformal":
        n = motion.params["b"].shape[0]
        origin = np.zeros(n)
        return [
            inversion(origin, motion.delta_guard),
            translation(-motion.params["b"]),
            inversion(origin, motion.delta_guard),
        ]
    return [motion]


def _apply_stage(motion: ConformalMotion, x: list[Jet]) -> list[Jet]:
    kind, par = motion.kind, motion.params
    if kind == "translation":
        t = par["t"]
        if t.shape[0] != len(x):
            raise ValueError(
                f"translation in dimension {t.shape[0]} applied to a point "
                f"in dimension {len(x)}"
            )
        return [xa + float(ta) for xa, ta in zip(x, t)]
    if kind == "rotation":
        R = par["R"]
        if R.shape[0] != len(x):
            raise ValueError(
                f"rotation in dimension {R.shape[0]} applied to a point "
                f"in dimension {len(x)}"
            )
        out = []
        for a in range(R.shape[0]):
            acc = Jet.zero(x[0].order, x[0].width)
            for b in range(R.shape[0]):
                if R[a, b] != 0.0:
                    acc = acc + float(R[a, b]) * x[b]
            out.append(acc)
        return out
    if kind == "dilation":
        lam = par["factor"]
        return [lam * xa for xa in x]
    # inversion about a center
    c = par["center"]
    if c.shape[0] != len(x):
        raise ValueError(
            f"inversion center in dimension {c.shape[0]} applied to a point "
            f"in dimension {len(x)}"
        )
    d = [xa - float(ca) for xa, ca in zip(x, c)]
    s = Jet.zero(x[0].order, x[0].width)
    for da in d:
        s = s + da * da
    _check_guard(motion, s, x)
    inv_s = jet_apply("recip", s)
    return [float(ca) + da * inv_s for ca, da in zip(c, d)]


def _check_guard(motion: ConformalMotion, s: Jet, x: list[Jet]) -> None:
    guard2 = motion.delta_guard**2
    bad = s.base <= guard2
    if np.any(bad):
        i = int(np.argmax(bad))
        pt = [float(xa.base[i]) for xa in x]
        raise ValueError(
            f"inversion guard violated: point {pt} lies within distance "
            f"{motion.delta_guard} of the singular locus "
            f"(|x - c| = {math.sqrt(max(float(s.base[i]), 0.0)):.3e})"
        )


def motion_jets(motion: ConformalMotion, x: list[Jet]) -> list[Jet]:
    """Image of ambient point jets under the motion."""
    for stage in _stages(motion):
        x = _apply_stage(stage, x)
    return x


def motion_points(motion: ConformalMotion, pts: np.ndarray) -> np.ndarray:
    """Image of plain ambient points (n, B) under the motion."""
    pts = np.asarray(pts, dtype=np.float64)
    single = pts.ndim == 1
    if single:
        pts = pts[:, None]
    out = np.empty_like(pts)
    for stage in _stages(motion):
        kind, par = stage.kind, stage.params
        if kind == "translation":
            out = pts + par["t"][:, None]
        elif kind == "rotation":
            out = par["R"] @ pts
        elif kind == "dilation":
            out = par["factor"] * pts
        else:
            d = pts - par["center"][:, None]
            s = np.sum(d * d, axis=0)
            if np.any(s <= stage.delta_guard**2):
                i = int(np.argmax(s <= stage.delta_guard**2))
                raise ValueError(
                    f"inversion guard violated at point {pts[:, i].tolist()}"
                )
            out = par["center"][:, None] + d / s
        pts = out
    return out[:, 0] if single else out


def log_conformal_factor(motion: ConformalMotion, x: list[Jet]) -> Jet:
    """log Lambda for the pullback of the flat metric: the motion satisfies
    (pullback of delta) = Lambda^2 delta with Lambda > 0 off the singular
    locus. Composition sums stage factors evaluated along the way."""
    order, width = x[0].order, x[0].width
    total = Jet.zero(order, width)
    for stage in _stages(motion):
        kind, par = stage.kind, stage.params
        if kind == "dilation":
            total = total + math.log(par["factor"])
        elif kind == "inversion":
            c = par["center"]
            d = [xa - float(ca) for xa, ca in zip(x, c)]
            s = Jet.zero(order, width)
            for da in d:
                s = s + da * da
            _check_guard(stage, s, x)
            total = total - jet_apply("log", s)
        x = _apply_stage(stage, x)
    return total


def apply_motion(spec, m: ConformalMotion):
    """Spec with the motion appended to its post-maps; guards are enforced
    whenever the composed map is evaluated."""
    return spec.with_post_map(m)


def motion_from_dict(d: dict) -> ConformalMotion:
    kind = d["kind"]
    guard = float(d.get("delta_guard", DELTA_GUARD))
    if kind == "translation":
        return translation(d["t"])
    if kind == "rotation":
        return rotation(d["R"])
    if kind == "dilation":
        return dilation(d["factor"])
    if kind == "inversion":
        return inversion(d["center"], guard)
    if kind == "special_conformal":
        return special_conformal(d["b"], guard)
    raise ValueError(f"unknown motion kind {kind!r}")
