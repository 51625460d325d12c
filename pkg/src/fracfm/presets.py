"""Named experiment presets and their construction.

A :class:`ScenePreset` is a plain, serializable description of an
experiment: media, background interfaces, damage, direction grid,
frequency, sampling surfaces, noise and thresholding.  ``build_*``
functions turn it into solver objects.

Presets
-------
``penny-homogeneous``
    Flat penny crack (radius 1, plane ``z = 0``, ``K = I``) in the homogeneous
    exterior medium; ``k_s = 4``, grid ``20 x 10``, 5 % noise, ``tau = 0.1``.
``inclusion-validation``
    Penetrable sphere (radius 0.5, ``k_s a = 2``) with an interface cap crack;
    used by the reciprocity and scattering-operator checks.
``composite1``
    Three media with two nested ellipsoidal interfaces and a damaged cap on
    the outer interface.  Desk-scale meshes; best effort.
``composite2``
    Three disjoint inclusions (ellipsoid, cube, sphere) of one medium, with a
    traction-free patch on the ellipsoid and ``K = 2 I`` patches on the cube
    and the sphere.  Desk-scale meshes; best effort.
"""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import yaml

from .background import BEMOptions, Homogeneous, Interface, PenetrableInclusion
from .geometry import (DirectionGrid, SamplingSurface, closed_surface_mesh,
                       direction_grid, parametric_surface, penny_crack, surface_patch)
from .wavecore import ElasticMedium, ValidationError, WaveNumbers, check_monotonicity, wave_numbers

__all__ = [
    "ScenePreset",
    "PRESETS",
    "preset",
    "preset_names",
    "preset_to_dict",
    "preset_from_dict",
    "dump_preset",
    "load_preset",
    "build_background",
    "build_crack",
    "build_grid",
    "build_sampling",
    "build_wave_numbers",
    "region_mask",
    "truth_mask",
]


@dataclass
class ScenePreset:
    """Serializable scene description.

    ``media`` lists ``(lam, mu, rho)`` with entry 0 the exterior medium.
    ``interfaces`` entries hold ``kind``, ``params``, ``inside``, ``outside``
    (medium indices) and ``n_nodes``.  ``crack`` is either
    ``{"kind": "penny", center, radius, normal, refinement, stiffness}`` or
    ``{"kind": "patches", "patches": [{interface, region, stiffness}, ...]}``
    with ``stiffness`` a 3x3 matrix in the local frame ``(nu, tau1, tau2)``.
    ``sampling`` lists ``{kind, params, count}`` parametric surfaces.
    """

    name: str
    media: list
    interfaces: list
    crack: dict
    grid: list
    omega: float
    sampling: list
    noise: dict = field(default_factory=lambda: {"delta": 0.05, "delta_b": 0.05})
    tau: float = 0.1
    method: str = "tikhonov"
    best_effort: bool = False
    notes: str = ""

    def __post_init__(self):
        media = [ElasticMedium(*m) for m in self.media]
        for itf in self.interfaces:
            a, b = media[itf["inside"]], media[itf["outside"]]
            if not check_monotonicity(a, b):
                raise ValidationError(f"preset {self.name!r}: media {itf['inside']} and "
                                      f"{itf['outside']} violate the monotonicity condition")


_K1 = np.eye(3).tolist()
_K2 = (2.0 * np.eye(3)).tolist()
_K0 = np.zeros((3, 3)).tolist()
_EXT = [1.5, 1.0, 1.0]


def _penny_homogeneous() -> ScenePreset:
    return ScenePreset(
        name="penny-homogeneous",
        media=[list(_EXT)],
        interfaces=[],
        crack={"kind": "penny", "center": [0.0, 0.0, 0.0], "radius": 1.0,
               "normal": [0.0, 0.0, 1.0], "refinement": 3, "stiffness": _K1},
        grid=[20, 10],
        omega=4.0,
        sampling=[{"kind": "plane", "count": [30, 30],
                   "params": {"center": [0.0, 0.0, 0.0], "normal": [0.0, 0.0, 1.0],
                              "half_width": 2.0}}],
        notes="penny crack stand-in for the localization experiment",
    )


def _inclusion_validation() -> ScenePreset:
    return ScenePreset(
        name="inclusion-validation",
        media=[list(_EXT), [0.4, 0.2, 0.5]],
        interfaces=[{"kind": "sphere", "params": {"center": [0.0, 0.0, 0.0], "radius": 0.5},
                     "inside": 1, "outside": 0, "n_nodes": 250}],
        crack={"kind": "patches", "patches": [
            {"interface": 0, "region": {"type": "halfspace", "normal": [0.0, 0.0, 1.0], "offset": 0.25},
             "stiffness": _K1}]},
        grid=[8, 12],
        omega=4.0,
        sampling=[{"kind": "sphere", "count": 200,
                   "params": {"center": [0.0, 0.0, 0.0], "radius": 0.5}}],
        notes="penetrable sphere with k_s * radius = 2",
    )


def _composite1() -> ScenePreset:
    return ScenePreset(
        name="composite1",
        media=[list(_EXT), [0.4, 0.2, 0.75], [0.6, 0.4, 1.5]],
        interfaces=[
            {"kind": "ellipsoid", "params": {"center": [0.0, 0.0, 0.0], "semi_axes": [4.5, 4.0, 6.0]},
             "inside": 1, "outside": 0, "n_nodes": 500},
            {"kind": "ellipsoid", "params": {"center": [0.0, 0.0, 0.0], "semi_axes": [3.0, 2.5, 2.0]},
             "inside": 2, "outside": 1, "n_nodes": 300},
        ],
        crack={"kind": "patches", "patches": [
            {"interface": 0, "region": {"type": "ball", "center": [3.2, 0.0, 4.2], "radius": 2.0},
             "stiffness": _K1}]},
        grid=[20, 10],
        omega=4.0,
        sampling=[
            {"kind": "ellipsoid", "count": 1400,
             "params": {"center": [0.0, 0.0, 0.0], "semi_axes": [4.5, 4.0, 6.0]}},
            {"kind": "ellipsoid", "count": 825,
             "params": {"center": [0.0, 0.0, 0.0], "semi_axes": [3.0, 2.5, 2.0]}},
        ],
        best_effort=True,
        notes="damage patch is a plausible cap on the outer interface (best effort)",
    )


def _composite2() -> ScenePreset:
    return ScenePreset(
        name="composite2",
        media=[list(_EXT), [0.4, 0.2, 0.5], [0.4, 0.2, 0.5], [0.4, 0.2, 0.5]],
        interfaces=[
            {"kind": "ellipsoid", "params": {"center": [0.0, 0.0, 0.0], "semi_axes": [3.0, 2.0, 4.0]},
             "inside": 1, "outside": 0, "n_nodes": 500},
            {"kind": "cube", "params": {"center": [0.0, 3.0, 3.0], "side": 1.8},
             "inside": 2, "outside": 0, "n_nodes": 150},
            {"kind": "sphere", "params": {"center": [0.0, -4.0, -2.0], "radius": 2.0},
             "inside": 3, "outside": 0, "n_nodes": 300},
        ],
        crack={"kind": "patches", "patches": [
            {"interface": 0, "region": {"type": "ball", "center": [3.0, 0.0, 0.0], "radius": 1.8},
             "stiffness": _K0},
            {"interface": 1, "region": {"type": "halfspace", "normal": [1.0, 0.0, 0.0], "offset": 0.85},
             "stiffness": _K2},
            {"interface": 2, "region": {"type": "ball", "center": [0.0, -4.0, -4.0], "radius": 1.5},
             "stiffness": _K2},
        ]},
        grid=[20, 10],
        omega=4.0,
        sampling=[
            {"kind": "ellipsoid", "count": 900,
             "params": {"center": [0.0, 0.0, 0.0], "semi_axes": [3.0, 2.0, 4.0]}},
            {"kind": "sphere", "count": 200, "params": {"center": [0.0, -4.0, -2.0], "radius": 2.0}},
            {"kind": "cube", "count": 150, "params": {"center": [0.0, 3.0, 3.0], "side": 1.8}},
        ],
        best_effort=True,
        notes="damage patches are plausible caps and a cube face (best effort)",
    )


PRESETS = {
    "penny-homogeneous": _penny_homogeneous,
    "inclusion-validation": _inclusion_validation,
    "composite1": _composite1,
    "composite2": _composite2,
}


def preset_names() -> list:
    return list(PRESETS)


def preset(name: str) -> ScenePreset:
    """Fresh copy of a named preset."""
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return PRESETS[name]()


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

_FIELDS = ("name", "media", "interfaces", "crack", "grid", "omega", "sampling", "noise", "tau",
           "method", "best_effort", "notes")


def preset_to_dict(p: ScenePreset) -> dict:
    return copy.deepcopy(asdict(p))


def preset_from_dict(d: dict, path: str = "scene") -> ScenePreset:
    """Strict inverse of :func:`preset_to_dict` (unknown keys are errors)."""
    if not isinstance(d, dict):
        raise ValidationError(f"{path}: expected a mapping")
    unknown = sorted(set(d) - set(_FIELDS))
    if unknown:
        raise ValidationError(f"{path}: unknown keys {unknown}")
    required = ("name", "media", "interfaces", "crack", "grid", "omega", "sampling")
    missing = [k for k in required if k not in d]
    if missing:
        raise ValidationError(f"{path}: missing keys {missing}")
    return ScenePreset(**copy.deepcopy(d))


def dump_preset(p: ScenePreset) -> str:
    return yaml.safe_dump(preset_to_dict(p), sort_keys=False)


def load_preset(text: str) -> ScenePreset:
    return preset_from_dict(yaml.safe_load(text))


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

def build_wave_numbers(p: ScenePreset) -> WaveNumbers:
    return wave_numbers(float(p.omega), ElasticMedium(*p.media[0]))


def build_grid(p: ScenePreset) -> DirectionGrid:
    return direction_grid(int(p.grid[0]), int(p.grid[1]))


def build_background(p: ScenePreset, options: Optional[BEMOptions] = None):
    media = [ElasticMedium(*m) for m in p.media]
    if not p.interfaces:
        return Homogeneous(media[0])
    itfs = [Interface(closed_surface_mesh(i["kind"], i["params"], int(i["n_nodes"])),
                      int(i["inside"]), int(i["outside"])) for i in p.interfaces]
    return PenetrableInclusion(media, itfs, options or BEMOptions())


def region_mask(region: dict, x: np.ndarray) -> np.ndarray:
    """Points inside a region: ``halfspace`` (``n.x > offset``) or ``ball``."""
    x = np.atleast_2d(x)
    kind = region.get("type")
    if kind == "halfspace":
        n = np.asarray(region["normal"], float)
        return x @ n > float(region["offset"])
    if kind == "ball":
        c = np.asarray(region["center"], float)
        return np.linalg.norm(x - c, axis=1) < float(region["radius"])
    raise ValidationError(f"unknown region type {kind!r}")


def build_crack(p: ScenePreset, background):
    """Crack geometry (or list of interface cracks) of a preset."""
    c = p.crack
    if c["kind"] == "penny":
        return penny_crack(c["center"], c["radius"], c["normal"], int(c["refinement"]),
                           np.asarray(c["stiffness"], float))
    if c["kind"] == "patches":
        if not p.interfaces:
            raise ValidationError("patch cracks need background interfaces")
        out = []
        for q in c["patches"]:
            mesh = background.interfaces[int(q["interface"])].mesh
            out.append(surface_patch(mesh, lambda cen, r=q["region"]: region_mask(r, cen),
                                     np.asarray(q["stiffness"], float)))
        return out[0] if len(out) == 1 else out
    raise ValidationError(f"unknown crack kind {c['kind']!r}")


def build_sampling(p: ScenePreset) -> SamplingSurface:
    """All sampling surfaces of a preset concatenated in order."""
    parts = [parametric_surface(s["kind"], s["params"], s["count"]) for s in p.sampling]
    if len(parts) == 1:
        return parts[0]
    return SamplingSurface("union", {"parts": [s["kind"] for s in p.sampling]},
                           np.concatenate([s.points for s in parts]),
                           np.concatenate([s.normals for s in parts]))


def truth_mask(p: ScenePreset, sampling: SamplingSurface, dilation: float = 0.0) -> np.ndarray:
    """Sampling points lying on the true damage, optionally dilated by ``dilation``."""
    c = p.crack
    x = sampling.points
    if c["kind"] == "penny":
        n = np.asarray(c["normal"], float)
        n = n / np.linalg.norm(n)
        rel = x - np.asarray(c["center"], float)
        off = rel @ n
        rad = np.linalg.norm(rel - off[:, None] * n, axis=1)
        return (np.abs(off) <= dilation + 1e-12) & (rad <= float(c["radius"]) + dilation)
    mask = np.zeros(len(x), dtype=bool)
    for q in c["patches"]:
        r = dict(q["region"])
        if r["type"] == "ball":
            r["radius"] = float(r["radius"]) + dilation
        else:
            r["offset"] = float(r["offset"]) - dilation
        itf = p.interfaces[int(q["interface"])]
        on_host = _on_surface(itf, x, dilation)
        mask |= region_mask(r, x) & on_host
    return mask


def _on_surface(itf: dict, x: np.ndarray, tol: float) -> np.ndarray:
    kind, prm = itf["kind"], itf["params"]
    c = np.asarray(prm.get("center", (0.0, 0.0, 0.0)), float)
    rel = x - c
    eps = max(tol, 1e-9)
    if kind == "sphere":
        return np.abs(np.linalg.norm(rel, axis=1) - float(prm["radius"])) <= eps
    if kind == "ellipsoid":
        a = np.asarray(prm["semi_axes"], float)
        return np.abs(np.linalg.norm(rel / a, axis=1) - 1.0) <= eps / a.min()
    if kind == "cube":
        h = float(prm["side"]) / 2
        return np.abs(np.abs(rel).max(axis=1) - h) <= eps
    raise ValidationError(f"unknown surface kind {kind!r}")
