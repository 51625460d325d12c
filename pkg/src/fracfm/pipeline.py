"""Experiment orchestration: configs, archives, runs and validation suites.

Config format
-------------
YAML with a strict schema (unknown keys are errors, every error carries its
path)::

    version: 1
    seed: 7                      # required
    scene: penny-homogeneous     # preset name or an inline preset mapping
    noise: {mode: target, delta: 0.05, delta_b: 0.05}
    method: tikhonov             # or picard
    picard: {N_P: null}          # null selects the default truncation rule
    tau: 0.1
    out: runs/penny
    stages: {forward: true, invert: true, archive_in: null}
    threads: null

``noise``, ``method`` and ``tau`` default to the preset values.  After
parsing, the config is fully expanded, so ``emit_config`` followed by
``parse_config`` reproduces an equal config.

FFM1 archives
-------------
Little-endian binary::

    magic    4s   b"FFM1"
    version  u2   1
    N_theta  u4
    N_phi    u4
    omega    f8
    n_media  u4
    media    n_media x (lam, mu, rho) f8
    role     u1 length + ASCII bytes
    data     (3N)^2 complex128 (re, im) pairs, row-major
    checksum 8 bytes, blake2b (digest size 8) of every preceding byte
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import struct
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import yaml

from . import __version__
from .background import BEMOptions, far_field_reciprocity
from .fracture import Scene, measured_far_matrix
from .geometry import DirectionGrid, direction_grid
from .inversion import (CLIP_TOL, WARN_TOL, FarFieldMatrix, apply_noise, differential_matrix,
                        f_sharp, indicator_map, noise_for_target, picard_default, scattering_matrix,
                        threshold)
from .presets import (ScenePreset, build_background, build_crack, build_grid, build_sampling,
                      build_wave_numbers, preset, preset_from_dict, preset_to_dict)
from .wavecore import ElasticMedium, ValidationError

__all__ = [
    "CONFIG_VERSION",
    "ConfigError",
    "PipelineError",
    "ExperimentConfig",
    "parse_config",
    "emit_config",
    "load_config",
    "write_archive",
    "read_archive",
    "archive_bytes",
    "run",
    "RunResult",
    "resolve_threads",
    "THREADS_ENV",
    "Check",
    "SUITES",
    "validate",
]

CONFIG_VERSION = 1
ARCHIVE_MAGIC = b"FFM1"
ARCHIVE_VERSION = 1
THREADS_ENV = "FRACFM_THREADS"
ARCHIVE_ROLES = ("F", "F_b", "F_delta", "F_b_delta")
CSV_COLUMNS = ("index", "x", "y", "z", "nx", "ny", "nz", "indicator", "alpha_or_Np", "truncated")


class ConfigError(ValidationError):
    """Schema violations, each reported as ``(path, message)``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Fully expanded experiment configuration."""

    seed: int
    scene: ScenePreset
    scene_ref: Optional[str] = None
    noise: dict = field(default_factory=lambda: {"mode": "target", "delta": 0.05, "delta_b": 0.05})
    method: str = "tikhonov"
    N_P: Optional[int] = None
    tau: float = 0.1
    out: str = "run"
    stages: dict = field(default_factory=lambda: {"forward": True, "invert": True, "archive_in": None})
    threads: Optional[int] = None
    version: int = CONFIG_VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "seed": self.seed,
            "scene_ref": self.scene_ref,
            "scene": preset_to_dict(self.scene),
            "noise": dict(self.noise),
            "method": self.method,
            "picard": {"N_P": self.N_P},
            "tau": self.tau,
            "out": self.out,
            "stages": dict(self.stages),
            "threads": self.threads,
        }


_TOP_KEYS = ("version", "seed", "scene", "scene_ref", "noise", "method", "picard", "tau", "out",
             "stages", "threads")
_NOISE_KEYS = ("mode", "delta", "delta_b")
_STAGE_KEYS = ("forward", "invert", "archive_in")


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _strict(d, keys, path, errors) -> dict:
    if d is None:
        return {}
    if not isinstance(d, dict):
        errors.append((path, "expected a mapping"))
        return {}
    for k in d:
        if k not in keys:
            errors.append((f"{path}.{k}", "unknown key"))
    return d


def config_from_dict(d, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Validate a config mapping; raises :class:`ConfigError` listing every problem."""
    errors: list = []
    d = _strict(d, _TOP_KEYS, "config", errors)
    if not d and not errors:
        errors.append(("config", "empty configuration"))
    version = d.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        errors.append(("config.version", f"unsupported version {version!r} (expected {CONFIG_VERSION})"))

    seed = d.get("seed")
    if seed is None:
        errors.append(("config.seed", "required field is missing"))
    elif not _is_int(seed) or not (0 <= int(seed) < 2 ** 64):
        errors.append(("config.seed", "must be an integer in [0, 2^64)"))

    scene, ref = None, d.get("scene_ref")
    raw = d.get("scene")
    if raw is None:
        errors.append(("config.scene", "required field is missing"))
    elif isinstance(raw, str):
        try:
            scene, ref = preset(raw), raw
        except ValidationError as exc:
            errors.append(("config.scene", str(exc)))
    else:
        try:
            scene = preset_from_dict(raw, "config.scene")
        except (ValidationError, TypeError) as exc:
            errors.append(("config.scene", str(exc)))
    if ref is not None and not isinstance(ref, str):
        errors.append(("config.scene_ref", "must be a string or null"))

    nz = _strict(d.get("noise"), _NOISE_KEYS, "config.noise", errors)
    noise = dict(scene.noise) if scene is not None else {}
    noise.setdefault("mode", "target")
    noise.update(nz)
    if noise.get("mode") not in ("target", "epsilon"):
        errors.append(("config.noise.mode", "must be 'target' or 'epsilon'"))
    for k in ("delta", "delta_b"):
        v = noise.get(k)
        if not _is_num(v) or not (0 <= float(v) < 1):
            errors.append((f"config.noise.{k}", "must be a number in [0, 1)"))
        else:
            noise[k] = float(v)

    method = d.get("method", scene.method if scene is not None else "tikhonov")
    if method not in ("tikhonov", "picard"):
        errors.append(("config.method", "must be 'tikhonov' or 'picard'"))
    pc = _strict(d.get("picard"), ("N_P",), "config.picard", errors)
    N_P = pc.get("N_P")
    if N_P is not None and (not _is_int(N_P) or N_P < 1):
        errors.append(("config.picard.N_P", "must be a positive integer or null"))

    tau = d.get("tau", scene.tau if scene is not None else 0.1)
    if not _is_num(tau) or not (0 <= float(tau) <= 1):
        errors.append(("config.tau", "must be a number in [0, 1]"))

    out = d.get("out", "run")
    if not isinstance(out, str) or not out:
        errors.append(("config.out", "must be a non-empty string"))

    st = _strict(d.get("stages"), _STAGE_KEYS, "config.stages", errors)
    stages = {"forward": True, "invert": True, "archive_in": None}
    stages.update(st)
    for k in ("forward", "invert"):
        if not isinstance(stages[k], bool):
            errors.append((f"config.stages.{k}", "must be a boolean"))
    if stages["forward"] is False and stages["invert"] is False:
        errors.append(("config.stages", "at least one of forward/invert must be enabled"))
    ain = stages["archive_in"]
    if ain is not None:
        if not isinstance(ain, str):
            errors.append(("config.stages.archive_in", "must be a directory path or null"))
        else:
            p = Path(ain) if base_dir is None or Path(ain).is_absolute() else base_dir / ain
            stages["archive_in"] = str(p)       # config-relative paths are resolved once here
            for name in ("F.ffm", "F_b.ffm"):
                if not (p / name).is_file():
                    errors.append(("config.stages.archive_in", f"missing archive {p / name}"))
    if stages["forward"] is False and stages["invert"] is True and ain is None:
        errors.append(("config.stages.archive_in", "invert-only runs need an archive directory"))

    threads = d.get("threads")
    if threads is not None and (not _is_int(threads) or threads < 1):
        errors.append(("config.threads", "must be a positive integer or null"))

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(seed=int(seed), scene=scene, scene_ref=ref, noise=noise, method=method,
                            N_P=None if N_P is None else int(N_P), tau=float(tau), out=out,
                            stages=stages, threads=None if threads is None else int(threads))


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Parse YAML text into a validated :class:`ExperimentConfig`."""
    try:
        d = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([("config", f"malformed YAML: {exc}")]) from exc
    return config_from_dict(d, base_dir)


def emit_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), path.parent)


def resolve_threads(flag: Optional[int] = None, config: Optional[int] = None) -> Optional[int]:
    """Thread count: the flag wins over the environment, which wins over the config."""
    if flag is not None:
        return int(flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
        if n < 1:
            raise ValidationError(f"{THREADS_ENV} must be positive")
        return n
    return config


def _apply_threads(n: Optional[int]):
    if n is None:
        return None
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:         # optional: BLAS keeps its own default
        return None
    return threadpool_limits(limits=n)


# --------------------------------------------------------------------------
# FFM1 archives
# --------------------------------------------------------------------------

def archive_bytes(F: FarFieldMatrix, media, role: str) -> bytes:
    """Serialize a raw far-field matrix to FFM1 bytes."""
    if role not in ARCHIVE_ROLES:
        raise ValidationError(f"unknown archive role {role!r}")
    if F.weights is not None:
        raise ValidationError("only raw far-field matrices are archived")
    g = F.grid
    media = [(m.lam, m.mu, m.rho) if isinstance(m, ElasticMedium) else tuple(m) for m in media]
    buf = io.BytesIO()
    buf.write(struct.pack("<4sHIIdI", ARCHIVE_MAGIC, ARCHIVE_VERSION, g.N_theta, g.N_phi,
                          float(F.omega), len(media)))
    for m in media:
        buf.write(struct.pack("<3d", *(float(v) for v in m)))
    tag = role.encode("ascii")
    buf.write(struct.pack("<B", len(tag)) + tag)
    buf.write(np.ascontiguousarray(F.data, dtype="<c16").tobytes())
    payload = buf.getvalue()
    return payload + hashlib.blake2b(payload, digest_size=8).digest()


def write_archive(path, F: FarFieldMatrix, media, role: str) -> str:
    """Write an FFM1 archive; returns the checksum as hex."""
    data = archive_bytes(F, media, role)
    Path(path).write_bytes(data)
    return data[-8:].hex()


def read_archive(path, grid: Optional[DirectionGrid] = None):
    """Read an FFM1 archive; returns ``(FarFieldMatrix, media, role)``.

    The checksum and the header dimensions are verified.  If ``grid`` is
    given its dimensions must match the header.
    """
    raw = Path(path).read_bytes()
    head = struct.calcsize("<4sHIIdI")
    if len(raw) < head + 9:
        raise ValidationError(f"{path}: truncated archive")
    payload, chk = raw[:-8], raw[-8:]
    if hashlib.blake2b(payload, digest_size=8).digest() != chk:
        raise ValidationError(f"{path}: checksum mismatch")
    magic, ver, nt, nph, omega, nm = struct.unpack_from("<4sHIIdI", payload, 0)
    if magic != ARCHIVE_MAGIC:
        raise ValidationError(f"{path}: not an FFM1 archive")
    if ver != ARCHIVE_VERSION:
        raise ValidationError(f"{path}: unsupported archive version {ver}")
    off = head
    media = [struct.unpack_from("<3d", payload, off + 24 * i) for i in range(nm)]
    off += 24 * nm
    (ln,) = struct.unpack_from("<B", payload, off)
    role = payload[off + 1:off + 1 + ln].decode("ascii")
    off += 1 + ln
    if role not in ARCHIVE_ROLES:
        raise ValidationError(f"{path}: unknown role {role!r}")
    n = 3 * nt * nph
    if len(payload) - off != 16 * n * n:
        raise ValidationError(f"{path}: data size does not match the header dimensions")
    if grid is not None and (grid.N_theta, grid.N_phi) != (nt, nph):
        raise ValidationError(f"{path}: archive grid {nt}x{nph} does not match "
                              f"{grid.N_theta}x{grid.N_phi}")
    g = grid if grid is not None else direction_grid(nt, nph)
    data = np.frombuffer(payload, dtype="<c16", count=n * n, offset=off).reshape(n, n).astype(complex)
    frole = "F_b" if role.startswith("F_b") else "F"
    return FarFieldMatrix(g, omega, data, frole), [list(m) for m in media], role


# --------------------------------------------------------------------------
# run
# --------------------------------------------------------------------------

@dataclass
class RunResult:
    out: Path
    manifest: dict
    imap: Optional[object] = None


def code_fingerprint() -> str:
    """blake2b over the package sources (sorted by name)."""
    h = hashlib.blake2b(digest_size=16)
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()


def _versions() -> dict:
    import numba
    import scipy
    return {"fracfm": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "yaml": yaml.__version__,
            "code": code_fingerprint()}


def _tolerances(cfg: ExperimentConfig) -> dict:
    return {
        "bem": asdict(BEMOptions()),
        "eigen_clip_relative": CLIP_TOL,
        "eigen_warn_relative": WARN_TOL,
        "morozov": {"variable": "log alpha", "xtol": 1e-15, "rtol": float(4 * np.finfo(float).eps),
                    "bracket": "[1e-16 min s^2, 1e16 max s^2]"},
        "tikhonov_keep_relative": 1e-14,
        "picard_keep_relative": 1e-14,
        "tau": cfg.tau,
    }


def _write_csv(path: Path, imap) -> None:
    s = imap.surface
    trunc = imap.truncated if imap.truncated is not None else imap.values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i in range(s.M):
            row = [str(i)] + ["%.17g" % v for v in (*s.points[i], *s.normals[i], imap.values[i],
                                                     imap.params[i], trunc[i])]
            w.writerow(row)


def _sha(path: Path) -> str:
    return hashlib.blake2b(path.read_bytes(), digest_size=16).hexdigest()


def run(cfg: ExperimentConfig, log: Optional[Callable[[str], None]] = None,
        bem: Optional[BEMOptions] = None) -> RunResult:
    """Forward solve, noise, inversion and exports for one config.

    Artifacts go to ``cfg.out``: ``F_b.ffm``, ``F.ffm`` (forward),
    ``F_delta.ffm``, ``F_b_delta.ffm``, ``eigen.json``, ``indicator.csv``
    (inversion) and ``manifest.json``.  A failing stage raises
    :class:`PipelineError`; artifacts written so far and the manifest (with
    ``status = failed`` and the stage name) are kept.
    """
    log = log or (lambda msg: None)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg.scene
    manifest = {
        "status": "running",
        "config": cfg.to_dict(),
        "rng": {"algorithm": "PCG64", "seeding": "SeedSequence(seed).spawn(2): [F, F_b]",
                "noise": "N = eps (2U - 1) + i eps (2U' - 1), real part drawn first"},
        "versions": _versions(),
        "tolerances": _tolerances(cfg),
        "timings": {},
        "artifacts": {},
    }
    threads = resolve_threads(None, cfg.threads)
    manifest["threads"] = threads
    limiter = _apply_threads(threads)
    state: dict = {}

    def save_manifest():
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))

    def stage(name, fn):
        log(f"[{name}] start")
        t0 = time.perf_counter()
        try:
            fn()
        except Exception as exc:
            manifest["timings"][name] = time.perf_counter() - t0
            manifest["status"] = "failed"
            manifest["failed_stage"] = name
            manifest["error"] = f"{type(exc).__name__}: {exc}"
            save_manifest()
            raise PipelineError(name, exc) from exc
        manifest["timings"][name] = time.perf_counter() - t0
        log(f"[{name}] done in {manifest['timings'][name]:.2f} s")

    def record(name, path, checksum=None):
        manifest["artifacts"][name] = {"path": path.name, "blake2b": checksum or _sha(path)}

    def setup():
        state["wn"] = build_wave_numbers(p)
        state["grid"] = build_grid(p)
        state["bg"] = build_background(p, bem)
        state["sampling"] = build_sampling(p)
        manifest["scene"] = {"k_s": state["wn"].k_s, "k_p": state["wn"].k_p,
                             "N": state["grid"].N, "M": state["sampling"].M}

    def forward():
        wn, grid, bg = state["wn"], state["grid"], state["bg"]
        crack = build_crack(p, bg)
        F_b = bg.far_matrix(grid, wn)
        F = measured_far_matrix(Scene(bg, crack), grid, wn, F_b=F_b)
        for role, M in (("F_b", F_b), ("F", F)):
            path = out / f"{role}.ffm"
            record(role, path, write_archive(path, M, p.media, role))
        state["F"], state["F_b"] = F, F_b

    def load():
        src = Path(cfg.stages["archive_in"])
        grid, wn = state["grid"], state["wn"]
        mats = {}
        for role in ("F", "F_b"):
            M, media, tag = read_archive(src / f"{role}.ffm", grid)
            if tag != role:
                raise ValidationError(f"{role}.ffm carries role {tag!r}")
            if not np.isclose(M.omega, wn.omega, rtol=1e-12, atol=0.0):
                raise ValidationError(f"{role}.ffm frequency {M.omega} does not match {wn.omega}")
            if not np.allclose(np.asarray(media, float), np.asarray(p.media, float), rtol=0, atol=0):
                raise ValidationError(f"{role}.ffm media table does not match the scene")
            mats[role] = M
        manifest["archive_in"] = str(src)
        state["F"], state["F_b"] = mats["F"], mats["F_b"]

    def noise():
        ss = np.random.SeedSequence(cfg.seed).spawn(2)
        nz = cfg.noise
        if nz["mode"] == "target":
            Fd, delta, eps = noise_for_target(state["F"], nz["delta"], ss[0])
            Fbd, delta_b, eps_b = noise_for_target(state["F_b"], nz["delta_b"], ss[1])
        else:
            Fd, delta = apply_noise(state["F"], nz["delta"], ss[0])
            eps = nz["delta"]
            if np.linalg.norm(state["F_b"].data) == 0:
                Fbd, delta_b, eps_b = state["F_b"], 0.0, 0.0
            else:
                Fbd, delta_b = apply_noise(state["F_b"], nz["delta_b"], ss[1])
                eps_b = nz["delta_b"]
        manifest["noise"] = {"delta": delta, "delta_b": delta_b, "epsilon": eps, "epsilon_b": eps_b}
        for role, M in (("F_delta", Fd), ("F_b_delta", Fbd)):
            path = out / f"{role}.ffm"
            record(role, path, write_archive(path, M, p.media, role))
        state["Fd"], state["Fbd"], state["delta"] = Fd, Fbd, delta

    def invert():
        wn = state["wn"]
        S_b = scattering_matrix(state["Fbd"], wn)
        F_D = differential_matrix(state["Fd"], state["Fbd"])
        _, eig = f_sharp(F_D, S_b)
        delta = state["delta"]
        N_P = cfg.N_P
        if cfg.method == "picard" and N_P is None:
            N_P = picard_default(eig, delta)
        imap = indicator_map(eig, state["sampling"], state["bg"], wn, S_b, cfg.method, delta, N_P)
        imap = threshold(imap, cfg.tau)
        summary = {"n": int(eig.values.size), "fingerprint": eig.fingerprint,
                   "clipped_negative": eig.clipped, "values": [float(v) for v in eig.values],
                   "method": cfg.method, "N_P": N_P, "delta_used": delta,
                   "range_deficient_points": int(np.sum(imap.flags)) if imap.flags is not None else 0}
        path = out / "eigen.json"
        path.write_text(json.dumps(summary, indent=2))
        record("eigen", path)
        path = out / "indicator.csv"
        _write_csv(path, imap)
        record("indicator", path)
        manifest["inversion"] = {"method": cfg.method, "N_P": N_P, "delta_used": delta,
                                 "tau": cfg.tau, "support_size": int(imap.mask.sum())}
        state["imap"] = imap

    try:
        stage("setup", setup)
        if cfg.stages["forward"]:
            stage("forward", forward)
        if cfg.stages["invert"]:
            if not cfg.stages["forward"]:
                stage("load", load)
            stage("noise", noise)
            stage("invert", invert)
        manifest["status"] = "ok"
        save_manifest()
    finally:
        if limiter is not None:
            limiter.restore_original_limits()
    return RunResult(out, manifest, state.get("imap"))


# --------------------------------------------------------------------------
# validation suites
# --------------------------------------------------------------------------

@dataclass
class Check:
    """One measured quantity against its tolerance."""

    suite: str
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.suite}/{self.name}: {self.value:.3e} (tol {self.tol:.1e}) {self.detail}".rstrip()


def _check(suite, name, value, tol, detail="", le=True) -> Check:
    value = float(value)
    ok = value <= tol if le else value >= tol
    return Check(suite, name, value, tol, bool(ok and np.isfinite(value)), detail)


def _random_unit(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def suite_kernels(seed: int = 0) -> list:
    """Navier residual of the Kupradze matrix and the homogeneous mixed reciprocity."""
    from .background import Homogeneous, mixed_reciprocity_residual
    from .wavecore import navier_residual, wave_numbers

    rng = np.random.default_rng(seed)
    m = ElasticMedium(1.5, 1.0, 1.0)
    res = []
    for _ in range(50):
        wn = wave_numbers(rng.uniform(0.5, 6.0), m)
        x = rng.uniform(-1, 1, 3)
        xi = x + _random_unit(rng, 1)[0] * rng.uniform(0.5, 2.0)
        res.append(navier_residual(xi, x, wn))
    wn = wave_numbers(4.0, m)
    bg = Homogeneous(m)
    X = rng.uniform(-2, 2, (100, 3))
    D = _random_unit(rng, 100)
    rec = [mixed_reciprocity_residual(bg, x, d, wn) for x, d in zip(X, D)]
    return [_check("kernels", "navier_residual_max", max(res), 1e-6, "50 random triples"),
            _check("kernels", "far_field_reciprocity_max", max(rec), 1e-12, "100 random pairs")]


def _validation_inclusion(n_nodes: int = 250):
    p = preset("inclusion-validation")
    p.interfaces[0]["n_nodes"] = n_nodes
    return p, build_background(p), build_wave_numbers(p)


def mrp_points(seed: int = 1):
    """10 exterior and 5 interior points with random directions (radius 0.5 sphere)."""
    rng = np.random.default_rng(seed)

    def pts(n, rmin, rmax):
        return _random_unit(rng, n) * rng.uniform(rmin, rmax, size=(n, 1))

    P = np.vstack([pts(10, 0.8, 1.5), pts(5, 0.0, 0.3)])
    return P, _random_unit(rng, 15)


def mrp_residuals(n_nodes: int, seed: int = 1) -> np.ndarray:
    from .background import mixed_reciprocity_residual

    _, bg, wn = _validation_inclusion(n_nodes)
    P, XI = mrp_points(seed)
    return np.array([mixed_reciprocity_residual(bg, x, xi, wn) for x, xi in zip(P, XI)])


def suite_reciprocity(n_nodes: int = 250) -> list:
    r = mrp_residuals(n_nodes)
    return [_check("reciprocity", "mixed_reciprocity_max", r.max(), 2e-2,
                   f"sphere, {n_nodes} nodes, 10 exterior + 5 interior points")]


def scattering_checks(n_nodes: int = 250, grid=(12, 16), seed: int = 3) -> dict:
    from .background import Homogeneous
    from .inversion import scattering_identity_residual, unitarity_defect

    p, bg, wn = _validation_inclusion(n_nodes)
    g = direction_grid(*grid)
    S_b = scattering_matrix(bg.far_matrix(g, wn), wn)
    rng = np.random.default_rng(seed)
    X = _random_unit(rng, 5) * rng.uniform(0.0, 0.4, (5, 1))
    hom = Homogeneous(ElasticMedium(*p.media[0]))
    S0 = scattering_matrix(hom.far_matrix(g, wn), wn)
    return {"unitarity": unitarity_defect(S_b),
            "identity": scattering_identity_residual(S_b, bg, X, wn),
            "unitarity_homogeneous": unitarity_defect(S0),
            "identity_homogeneous": scattering_identity_residual(S0, hom, X, wn)}


def suite_scattering() -> list:
    r = scattering_checks()
    return [_check("scattering", "unitarity_defect", r["unitarity"], 5e-2, "inclusion, grid 12x16"),
            _check("scattering", "interior_identity_max", r["identity"].max(), 2e-2, "5 interior points"),
            _check("scattering", "unitarity_defect_homogeneous", r["unitarity_homogeneous"], 1e-12),
            _check("scattering", "interior_identity_homogeneous", r["identity_homogeneous"].max(), 1e-12)]


def suite_factorization(refinement: int = 3) -> list:
    from .background import Homogeneous
    from .fracture import assemble_crack_system, factorization_residual
    from .geometry import penny_crack
    from .wavecore import wave_numbers

    m = ElasticMedium(1.5, 1.0, 1.0)
    bg = Homogeneous(m)
    wn = wave_numbers(4.0, m)
    g = direction_grid(8, 12)
    cr = penny_crack(refinement=refinement)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        S = assemble_crack_system(cr, bg, wn)
    res = factorization_residual(Scene(bg, cr), g, wn, system=S)
    return [_check("factorization", "factorization_residual", res, 5e-2,
                   f"penny radius 1, K = I, k_s = 4, grid 8x12, refinement {refinement}")]


def forward_checks(refinement: int = 2) -> dict:
    from .background import Homogeneous
    from .fracture import assemble_crack_system, crack_far_matrix, static_opening_error
    from .geometry import penny_crack
    from .wavecore import wave_numbers

    m = ElasticMedium(1.5, 1.0, 1.0)
    bg = Homogeneous(m)
    wn = wave_numbers(4.0, m)
    g = direction_grid(8, 12)
    out = {"static_normal": static_opening_error(3, m, 0), "static_shear": static_opening_error(3, m, 1)}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        FD = {}
        for kappa in (1.0, 1e3):
            cr = penny_crack(refinement=refinement, stiffness=kappa * np.eye(3))
            FD[kappa] = crack_far_matrix(assemble_crack_system(cr, bg, wn), g)
    out["welded_ratio"] = np.linalg.norm(FD[1e3]) / np.linalg.norm(FD[1.0])
    out["block_reciprocity"] = far_field_reciprocity(FD[1.0], g)
    return out


def suite_forward() -> list:
    r = forward_checks()
    return [_check("forward", "static_normal_opening_L2", r["static_normal"], 2e-2, "refinement 3"),
            _check("forward", "static_shear_opening_L2", r["static_shear"], 2e-2, "refinement 3"),
            _check("forward", "welded_limit_ratio", r["welded_ratio"], 1e-2, "kappa 1e3 vs 1"),
            _check("forward", "block_reciprocity", r["block_reciprocity"], 1e-2, "penny, K = I")]


def random_psd(rng, n: int, rank: Optional[int] = None) -> np.ndarray:
    """Random Hermitian PSD matrix with a geometric spectrum."""
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    mu = np.logspace(0, -rng.uniform(3, 8), n)
    if rank is not None:
        mu[rank:] = 0.0
    return (Q * mu) @ Q.conj().T


def regularization_checks(seed: int = 0, n_systems: int = 100) -> dict:
    from .inversion import eigensystem, picard_norm, tikhonov_morozov

    rng = np.random.default_rng(seed)
    disc = []
    for _ in range(n_systems):
        n = int(rng.integers(5, 40))
        A = random_psd(rng, n)
        b = rng.normal(size=n) + 1j * rng.normal(size=n)
        delta = rng.uniform(0.01, 0.2)
        r = tikhonov_morozov(A, b, delta)
        if not r.range_deficient:
            disc.append(abs(r.residual - delta * np.linalg.norm(b)) / (delta * np.linalg.norm(b)))
    closed = []
    for delta in (0.01, 0.05, 0.2, 0.5):
        b = rng.normal(size=7) + 1j * rng.normal(size=7)
        r = tikhonov_morozov(np.eye(7), b, delta)
        closed.append(abs(r.alpha - delta / (1 - delta)) / (delta / (1 - delta)))
    pic = []
    for _ in range(20):
        n = int(rng.integers(5, 40))
        A = random_psd(rng, n)
        eig = eigensystem(A)
        b = rng.normal(size=n) + 1j * rng.normal(size=n)
        N_P = int(rng.integers(1, n + 1))
        V = eig.vectors[:, :N_P]
        g = V @ ((V.conj().T @ b) / np.sqrt(eig.values[:N_P]))      # truncated solve of A^(1/2) g = b
        direct = np.linalg.norm(g) ** 2
        pic.append(abs(picard_norm(eig, b, N_P) - direct) / direct)
    return {"discrepancy": max(disc), "identity_alpha": max(closed), "picard": max(pic)}


def suite_regularization() -> list:
    r = regularization_checks()
    return [_check("regularization", "discrepancy_relative_max", r["discrepancy"], 1e-8, "100 PSD systems"),
            _check("regularization", "identity_alpha_relative", r["identity_alpha"], 1e-12,
                   "A = I, alpha = delta / (1 - delta)"),
            _check("regularization", "picard_vs_truncated_solve", r["picard"], 1e-10)]


def eigen_checks(seed: int = 0) -> dict:
    from .inversion import eigensystem, sqrt_psd

    rng = np.random.default_rng(seed)
    n = 60
    A = random_psd(rng, n)
    eig = eigensystem(A)
    rec = np.linalg.norm(eig.reconstruct() - A) / np.linalg.norm(A)
    R = sqrt_psd(eig)
    root = np.linalg.norm(R @ R - A) / np.linalg.norm(A)
    orth = np.linalg.norm(eig.vectors.conj().T @ eig.vectors - np.eye(n))
    g = direction_grid(4, 5)
    F_D = FarFieldMatrix(g, 1.0, rng.normal(size=(60, 60)) + 1j * rng.normal(size=(60, 60)), "F_D")
    S = FarFieldMatrix(g, 1.0, np.eye(60), "S_b", np.ones(60))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)     # random data: F_sharp is indefinite
        Fs, e2 = f_sharp(F_D, S)
    Ft = F_D.data
    re = 0.5 * (Ft + Ft.conj().T)
    im = -0.5j * (Ft - Ft.conj().T)
    w, U = np.linalg.eigh(re)
    w, U = np.linalg.eigh((U * np.abs(w)) @ U.conj().T + im)
    direct = (U * np.maximum(w, 0.0)) @ U.conj().T           # clipped at zero
    return {"reconstruct": rec, "sqrt": root, "orthonormal": orth,
            "sorted": float(np.all(np.diff(eig.values) <= 0)),
            "f_sharp": np.linalg.norm(Fs.data - direct) / np.linalg.norm(direct),
            "f_sharp_min_eig": float(e2.values.min())}


def suite_eigen() -> list:
    r = eigen_checks()
    return [_check("eigen", "reconstruction", r["reconstruct"], 1e-12),
            _check("eigen", "square_root", r["sqrt"], 1e-12),
            _check("eigen", "orthonormality", r["orthonormal"], 1e-12),
            _check("eigen", "descending_order", r["sorted"], 1.0, le=False),
            _check("eigen", "f_sharp_against_definition", r["f_sharp"], 1e-12),
            _check("eigen", "f_sharp_nonnegative", r["f_sharp_min_eig"], 0.0, le=False)]


SUITES = {
    "kernels": suite_kernels,
    "reciprocity": suite_reciprocity,
    "scattering": suite_scattering,
    "factorization": suite_factorization,
    "forward": suite_forward,
    "regularization": suite_regularization,
    "eigen": suite_eigen,
}


def validate(name: str) -> list:
    """Run one suite (or ``all``); returns the list of :class:`Check`."""
    if name == "all":
        return [c for fn in SUITES.values() for c in fn()]
    if name not in SUITES:
        raise ValidationError(f"unknown suite {name!r}; available: {', '.join(SUITES)}, all")
    return SUITES[name]()
