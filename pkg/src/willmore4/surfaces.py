"""Built-in closed immersions of 4-manifolds, chart atlases, and quadrature.

Families
--------
round_sphere(radius, n)
    Hyperspherical angles (three colatitudes and one azimuth) scaled by the
    radius into the first five ambient coordinates.
product_torus(radii, n >= 8)
    Four circle factors occupying the first eight ambient coordinates.
trig_graph_torus(n >= 5, terms)
    Flat box base (theta_1..theta_4 mapped to the first four coordinates)
    plus trigonometric-polynomial displacements into coordinates 5..n,
    each term amp * cos(k . theta + phase). The displacement derivatives
    are periodic, so every geometric integrand is periodic on the box even
    though the base map itself is not.
composed(base, post_maps)
    Another spec with conformal motions appended.

Quadrature is a tensor-product rule: uniform trapezoid on periodic axes
(spectrally exact below the Nyquist degree) and Gauss-Legendre on the open
colatitude intervals. The integrand is expected to carry the full area
density sqrt(det g), so no separate Jacobian factors appear in the weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import jets as jetmod
from .jets import Jet, jet_apply, jet_variable

TWO_PI = 2.0 * math.pi

#: nodes are consumed in fixed chunks of this size, and chunk partial sums
#: are combined sequentially with compensated summation, so integration is
#: deterministic run to run
CHUNK = 2048

#: smallest allowed singular value of the immersion Jacobian
MIN_JACOBIAN_SV = 1e-8

_FAMILIES = ("round_sphere", "product_torus", "trig_graph_torus", "composed")


@dataclass(frozen=True)
class ImmersionSpec:
    """A closed-form immersion: family tag, family parameters, conformal
    motions applied after the family map, and the ambient scale function."""

    family: str
    params: dict
    post_maps: tuple = ()
    ambient_scale: object | None = None

    @property
    def n(self) -> int:
        if self.family == "composed":
            return self.params["base"].n
        return int(self.params["n"])

    @property
    def codim(self) -> int:
        return self.n - 4

    @property
    def fourier_degree(self) -> int:
        """Largest per-axis harmonic across displacement terms (1 for the
        purely circular families); the resolution rule keys off this."""
        if self.family == "composed":
            return self.params["base"].fourier_degree
        deg = 1
        for term in self.params.get("terms", ()):
            deg = max(deg, max(abs(int(k)) for k in term["k"]))
        return deg

    def with_post_map(self, motion) -> "ImmersionSpec":
        return replace(self, post_maps=self.post_maps + (motion,))

    def with_scale(self, scale) -> "ImmersionSpec":
        return replace(self, ambient_scale=scale)


def builtin_family(name: str, params: dict) -> ImmersionSpec:
    """Construct a validated spec for one of the built-in families."""
    if name not in _FAMILIES:
        raise ValueError(f"unknown immersion family {name!r}; choose from {_FAMILIES}")

    if name == "composed":
        base = params["base"]
        if not isinstance(base, ImmersionSpec):
            raise ValueError("composed family needs a base ImmersionSpec")
        maps = tuple(params.get("post_maps", ()))
        return replace(base, post_maps=base.post_maps + maps)

    n = int(params["n"])
    if n < 5:
        raise ValueError(f"ambient dimension must be at least 5, got {n}")

    if name == "round_sphere":
        r = float(params["radius"])
        if r <= 0:
            raise ValueError(f"sphere radius must be positive, got {r}")
        return ImmersionSpec(name, {"radius": r, "n": n})

    if name == "product_torus":
        radii = tuple(float(r) for r in params["radii"])
        if len(radii) != 4:
            raise ValueError(f"product torus needs 4 radii, got {len(radii)}")
        if any(r <= 0 for r in radii):
            raise ValueError(f"torus radii must be positive, got {radii}")
        if n < 8:
            raise ValueError(f"product torus needs ambient dimension >= 8, got {n}")
        return ImmersionSpec(name, {"radii": radii, "n": n})

    # trig_graph_torus
    terms = []
    for raw in params.get("terms", ()):
        axis = int(raw["axis"])
        if not 5 <= axis <= n:
            raise ValueError(
                f"displacement axis {axis} outside the normal coordinates 5..{n}"
            )
        k = tuple(int(v) for v in raw["k"])
        if len(k) != 4:
            raise ValueError(f"wave vector must have 4 entries, got {k}")
        terms.append(
            {
                "axis": axis,
                "amp": float(raw["amp"]),
                "k": k,
                "phase": float(raw.get("phase", 0.0)),
            }
        )
    return ImmersionSpec(name, {"n": n, "terms": tuple(terms)})


# -- jet evaluation of the immersion map --------------------------------------


def _seed(p, order: int) -> list[Jet]:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, None]
    if p.shape[0] != 4:
        raise ValueError(f"chart point must have 4 parameters, got shape {p.shape}")
    width = p.shape[1]
    return [jet_variable(i, p[i], order, width) for i in range(4)]


def _family_jets(spec: ImmersionSpec, theta: list[Jet]) -> list[Jet]:
    order, width = theta[0].order, theta[0].width
    n = spec.n
    zero = Jet.zero(order, width)
    out = [zero] * n

    if spec.family == "round_sphere":
        r = spec.params["radius"]
        sines = [jet_apply("sin", t) for t in theta]
        cosines = [jet_apply("cos", t) for t in theta]
        running = Jet.const(r, order, width)
        for i in range(4):
            out[i] = running * cosines[i]
            running = running * sines[i]
        out[4] = running
        return out

    if spec.family == "product_torus":
        for i, r in enumerate(spec.params["radii"]):
            out[2 * i] = r * jet_apply("cos", theta[i])
            out[2 * i + 1] = r * jet_apply("sin", theta[i])
        return out

    # trig_graph_torus: flat base in the first four coordinates
    for i in range(4):
        out[i] = theta[i]
    disp: dict[int, Jet] = {}
    for term in spec.params["terms"]:
        arg = Jet.zero(order, width)
        for i, k in enumerate(term["k"]):
            if k:
                arg = arg + float(k) * theta[i]
        if term["phase"]:
            arg = arg + term["phase"]
        a = term["axis"] - 1  # ambient coordinates are 1-based in configs
        wave = term["amp"] * jet_apply("cos", arg)
        disp[a] = disp[a] + wave if a in disp else wave
    for a, j in disp.items():
        out[a] = j
    return out


def _jacobian_min_eig(x: list[Jet]) -> np.ndarray:
    """Smallest eigenvalue of the flat Gram matrix of the Jacobian columns,
    per batch column (regularity monitor)."""
    space = x[0].space
    rows = [space.index_of[tuple(np.eye(4, dtype=int)[i])] for i in range(4)]
    jac = np.stack([xa.c[rows] for xa in x])  # (n, 4, B)
    gram = np.einsum("aib,ajb->bij", jac, jac)
    return np.linalg.eigvalsh(gram)[:, 0]


def eval_jets(spec: ImmersionSpec, p, K: int) -> list[Jet]:
    """Jets of the composed immersion map at chart point(s) p.

    p may be a single point (4,) or a batch (4, B); the returned jets carry
    the batch as their width. Raises if a conformal motion's guard radius is
    violated or the Jacobian drops rank at any point of the batch.
    """
    theta = _seed(p, K)
    x = _family_jets(spec, theta)
    if spec.post_maps:
        from .conformal import motion_jets

        for motion in spec.post_maps:
            x = motion_jets(motion, x)
    if K >= 1:
        min_eig = _jacobian_min_eig(x)
        bad = min_eig < MIN_JACOBIAN_SV**2
        if np.any(bad):
            i = int(np.argmax(bad))
            pt = np.asarray(p, dtype=np.float64).reshape(4, -1)[:, i]
            raise ValueError(
                f"immersion is degenerate at chart point {pt.tolist()}: "
                f"smallest Jacobian singular value "
                f"{math.sqrt(max(min_eig[i], 0.0)):.3e}"
            )
    return x


# -- atlases and quadrature ----------------------------------------------------


@dataclass(frozen=True)
class Chart:
    """A parameter box with per-axis quadrature nodes and weights."""

    nodes: tuple
    weights: tuple
    periodic: tuple
    lo: tuple
    hi: tuple


@dataclass(frozen=True)
class Atlas:
    charts: tuple
    resolution: int

    def node_chunks(self):
        """Yield (points (4, B), weights (B,)) in a fixed deterministic
        order with B <= CHUNK."""
        for chart in self.charts:
            grids = np.meshgrid(*chart.nodes, indexing="ij")
            pts = np.stack([g.reshape(-1) for g in grids])
            w = chart.weights[0]
            for wi in chart.weights[1:]:
                w = np.multiply.outer(w, wi)
            w = w.reshape(-1)
            total = pts.shape[1]
            for start in range(0, total, CHUNK):
                stop = min(start + CHUNK, total)
                yield pts[:, start:stop], w[start:stop]

    @property
    def node_count(self) -> int:
        return sum(
            int(np.prod([len(nd) for nd in chart.nodes])) for chart in self.charts
        )


def _trapezoid_axis(resolution: int):
    h = TWO_PI / resolution
    nodes = h * np.arange(resolution)
    weights = np.full(resolution, h)
    return nodes, weights


def _gauss_axis(resolution: int):
    x, w = np.polynomial.legendre.leggauss(resolution)
    return 0.5 * math.pi * (x + 1.0), 0.5 * math.pi * w


def build_atlas(spec: ImmersionSpec, resolution: int) -> Atlas:
    """Tensor-product quadrature atlas for a spec at a per-axis resolution."""
    if resolution < 4 * spec.fourier_degree:
        raise ValueError(
            f"resolution {resolution} is below 4x the spec's Fourier degree "
            f"{spec.fourier_degree}; raise it to at least {4 * spec.fourier_degree}"
        )
    family = spec.family
    if family == "composed":
        return build_atlas(spec.params["base"], resolution)
    if family == "round_sphere":
        gl_nodes, gl_weights = _gauss_axis(resolution)
        tr_nodes, tr_weights = _trapezoid_axis(resolution)
        chart = Chart(
            nodes=(gl_nodes, gl_nodes, gl_nodes, tr_nodes),
            weights=(gl_weights, gl_weights, gl_weights, tr_weights),
            periodic=(False, False, False, True),
            lo=(0.0, 0.0, 0.0, 0.0),
            hi=(math.pi, math.pi, math.pi, TWO_PI),
        )
    else:
        nodes, weights = _trapezoid_axis(resolution)
        chart = Chart(
            nodes=(nodes,) * 4,
            weights=(weights,) * 4,
            periodic=(True,) * 4,
            lo=(0.0,) * 4,
            hi=(TWO_PI,) * 4,
        )
    return Atlas(charts=(chart,), resolution=resolution)


def integrate(pointwise_field, spec: ImmersionSpec, atlas: Atlas) -> float:
    """Quadrature sum of a scalar density over the atlas.

    The field is called as pointwise_field(spec, points) on batches of
    chart points and must return the density already multiplied by
    sqrt(det g); weights carry only the parameter-box measure. Chunk sums
    accumulate sequentially with compensated summation.
    """
    total, comp = 0.0, 0.0
    for pts, w in atlas.node_chunks():
        values = np.asarray(pointwise_field(spec, pts), dtype=np.float64)
        if values.shape != w.shape:
            raise ValueError(
                f"field returned shape {values.shape}, expected {w.shape}"
            )
        finite = np.isfinite(values)
        if not np.all(finite):
            i = int(np.argmin(finite))
            raise ValueError(
                f"non-finite field value {values[i]} at chart point "
                f"{pts[:, i].tolist()}"
            )
        chunk = float(np.add.reduce(values * w))
        total, comp = _kahan(total, comp, chunk)
    return total


def _kahan(total, comp, value):
    y = value - comp
    t = total + y
    comp = (t - total) - y
    return t, comp


def validate_spec(spec: ImmersionSpec, atlas: Atlas) -> None:
    """Check immersion regularity (and motion guards) at every quadrature
    node; raises on the first violation."""
    for pts, _ in atlas.node_chunks():
        eval_jets(spec, pts, 1)


# -- config files ---------------------------------------------------------------


def load_config(path: str) -> dict:
    """Read an immersion + run configuration from a TOML or JSON file.

    Returns {"spec": ImmersionSpec, "run": {...}} where run holds plain
    options (resolution, jet orders, seeds) with defaults filled in by the
    command-line layer.
    """
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        try:
            import tomllib as toml
        except ImportError:  # Python < 3.11
            import tomli as toml
        with open(path, "rb") as fh:
            raw = toml.load(fh)

    imm = dict(raw.get("immersion", {}))
    family = imm.pop("family")
    spec = builtin_family(family, imm)

    maps = []
    if raw.get("post_maps"):
        from .conformal import motion_from_dict

        maps = [motion_from_dict(d) for d in raw["post_maps"]]
        spec = replace(spec, post_maps=spec.post_maps + tuple(maps))

    if raw.get("ambient_scale"):
        from .riemannian import scale_from_dict

        spec = spec.with_scale(scale_from_dict(raw["ambient_scale"]))

    return {"spec": spec, "run": dict(raw.get("run", {}))}
