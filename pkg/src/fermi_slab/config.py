"""Run configuration: sectioned ``key = value`` text, validated up front.

Example::

    [physics]
    epsilon_F = 2.0
    m = 4

    [defect]
    type = trench
    w = 4

Every key is optional except where a section needs it; unknown keys are
errors, with a suggestion when the name looks like a typo.
"""

from __future__ import annotations

import configparser
import dataclasses
import difflib
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "config_hash"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is ``section.name`` and ``line`` 1-based."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None,
                 source: str = "<config>"):
        self.key = key
        self.line = line
        self.source = source
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}")
        self.detail = message

    def as_dict(self) -> dict:
        return {"type": "config", "message": self.detail, "key": self.key,
                "line": self.line, "source": self.source}


@dataclass(frozen=True)
class PhysicsConfig:
    epsilon_F: float = 2.0
    m: float = 4.0


@dataclass(frozen=True)
class DefectConfig:
    type: str = "trench"
    w: float = 4.0
    depth_scale: float = 1.0
    mollify_s: float = 0.0
    file: str = ""


@dataclass(frozen=True)
class GridConfig:
    L: float = 60.0
    n: int = 2001


@dataclass(frozen=True)
class ScfSection:
    max_iter: int = 200
    tol: float = 1e-8
    mixing_alpha: float = 0.3
    anderson_depth: int = 5


@dataclass(frozen=True)
class AnalysisConfig:
    friedel_window: tuple[float, float] | None = None
    free_exponent: bool = True
    m_sweep: tuple[float, ...] = (4.0, 2.0, 1.0, 0.5)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    defect: DefectConfig = field(default_factory=DefectConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    scf: ScfSection = field(default_factory=ScfSection)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def window(self) -> tuple[float, float]:
        """Friedel window, defaulting to ``[w + 4, L - 10]``."""
        if self.analysis.friedel_window is not None:
            return self.analysis.friedel_window
        return (self.defect.w + 4.0, self.grid.L - 10.0)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "physics": PhysicsConfig,
    "defect": DefectConfig,
    "grid": GridConfig,
    "scf": ScfSection,
    "analysis": AnalysisConfig,
    "output": OutputConfig,
}

_BOOLS = {"true": True, "yes": True, "on": True, "1": True,
          "false": False, "no": False, "off": False, "0": False}


def _float_list(text: str) -> tuple[float, ...]:
    items = [t for t in re.split(r"[,\s]+", text.strip().strip("[]()")) if t]
    return tuple(float(t) for t in items)


def _convert(kind, raw: str):
    if kind is float:
        return float(raw)
    if kind is int:
        value = float(raw)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(value)
    if kind is bool:
        try:
            return _BOOLS[raw.strip().lower()]
        except KeyError:
            raise ValueError(f"expected a boolean, got {raw!r}") from None
    if kind is str:
        return raw.strip()
    if kind == "floats":
        return _float_list(raw)
    if kind == "window":
        values = _float_list(raw)
        if len(values) != 2:
            raise ValueError(f"expected two numbers 'z_lo, z_hi', got {raw!r}")
        return values
    if kind == "strings":
        return tuple(t for t in re.split(r"[,\s]+", raw.strip()) if t)
    raise TypeError(kind)


_KINDS = {
    "physics": {"epsilon_F": float, "m": float},
    "defect": {"type": str, "w": float, "depth_scale": float, "mollify_s": float, "file": str},
    "grid": {"L": float, "n": int},
    "scf": {"max_iter": int, "tol": float, "mixing_alpha": float, "anderson_depth": int},
    "analysis": {"friedel_window": "window", "free_exponent": bool, "m_sweep": "floats"},
    "output": {"directory": str, "formats": "strings"},
}

ALL_KEYS = [f"{s}.{k}" for s, keys in _KINDS.items() for k in keys]


def _suggest(name: str) -> str:
    bare = name.split(".")[-1]
    candidates = difflib.get_close_matches(name, ALL_KEYS, n=1, cutoff=0.5)
    if not candidates:
        by_key = {k.split(".")[-1]: k for k in ALL_KEYS}
        close = difflib.get_close_matches(bare, list(by_key), n=1, cutoff=0.5)
        candidates = [by_key[c] for c in close]
    if not candidates:
        # word-level overlap catches reordered names like alpha_mix
        words = set(bare.lower().split("_"))
        scored = [(len(words & set(k.split(".")[-1].lower().split("_"))), k) for k in ALL_KEYS]
        best = max(scored)
        if best[0] > 0:
            candidates = [best[1]]
    return f"; did you mean `{candidates[0]}`?" if candidates else ""


class _LineIndex:
    """Maps ``section.key`` to the line where it is set (for error messages)."""

    def __init__(self, text: str):
        self.lines: dict[str, int] = {}
        self.overridden: set[str] = set()
        section = None
        for i, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            m = re.match(r"^\[([^\]]+)\]", stripped)
            if m:
                section = m.group(1).strip()
                self.lines.setdefault(section, i)
                continue
            m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", stripped)
            if m and section is not None:
                self.lines[f"{section}.{m.group(1).strip()}"] = i

    def get(self, key: str) -> int | None:
        return self.lines.get(key)


def _read_sections(text: str, source: str) -> tuple[configparser.ConfigParser, _LineIndex]:
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), strict=True
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key/value line outside any [section]", line=exc.lineno, source=source) from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1], line=exc.lineno, source=source) from exc
    except configparser.ParsingError as exc:
        lineno, content = exc.errors[0]
        raise ConfigError(f"cannot parse line {content!r}", line=lineno, source=source) from exc
    return parser, _LineIndex(text)


def _require(cond: bool, key: str, message: str, index: _LineIndex, source: str):
    if not cond:
        if key in index.overridden:
            raise ConfigError(f"`{key}` {message}", key=key, source="--override")
        raise ConfigError(f"`{key}` {message}", key=key, line=index.get(key), source=source)


def _validate(cfg: RunConfig, index: _LineIndex, source: str):
    p, d, g, s, a = cfg.physics, cfg.defect, cfg.grid, cfg.scf, cfg.analysis
    req = lambda cond, key, msg: _require(cond, key, msg, index, source)  # noqa: E731

    req(math.isfinite(p.epsilon_F) and p.epsilon_F > 0, "physics.epsilon_F", f"must be > 0 (got {p.epsilon_F})")
    req(math.isfinite(p.m) and p.m > 0, "physics.m",
        f"must be > 0 (got {p.m}); the self-consistent solve needs Yukawa screening")
    req(g.L > 0 and math.isfinite(g.L), "grid.L", f"must be > 0 (got {g.L})")
    req(g.n >= 3 and g.n % 2 == 1, "grid.n", f"must be an odd integer >= 3 (got {g.n})")
    req(d.type in ("trench", "custom-file"), "defect.type",
        f"must be 'trench' or 'custom-file' (got {d.type!r})")
    if d.type == "trench":
        req(d.w > 0, "defect.w", f"must be > 0 (got {d.w})")
        req(d.w < g.L, "defect.w", f"must be < grid.L = {g.L} (got {d.w})")
        req(g.L - d.w >= 10.0 / p.m, "defect.w",
            f"leaves a margin of {g.L - d.w:g} to the box edge; need >= 10/m = {10.0 / p.m:g}")
    else:
        req(bool(d.file), "defect.file", "is required when defect.type = custom-file")
    req(d.mollify_s >= 0, "defect.mollify_s", f"must be >= 0 (got {d.mollify_s})")
    req(math.isfinite(d.depth_scale), "defect.depth_scale", "must be finite")
    req(s.max_iter >= 1, "scf.max_iter", f"must be >= 1 (got {s.max_iter})")
    req(s.tol > 0, "scf.tol", f"must be > 0 (got {s.tol})")
    req(0 < s.mixing_alpha <= 1, "scf.mixing_alpha", f"must lie in (0, 1] (got {s.mixing_alpha})")
    req(s.anderson_depth >= 0, "scf.anderson_depth", f"must be >= 0 (got {s.anderson_depth})")
    ms = a.m_sweep
    req(len(ms) >= 1 and all(m > 0 for m in ms), "analysis.m_sweep", f"must be positive values (got {ms})")
    req(all(b < a_ for a_, b in zip(ms, ms[1:])), "analysis.m_sweep", f"must be strictly decreasing (got {ms})")
    if d.type == "trench":
        req(g.L - d.w >= 10.0 / min(ms), "analysis.m_sweep",
            f"smallest m = {min(ms)} needs a box margin >= {10.0 / min(ms):g}, have {g.L - d.w:g}")
    z_lo, z_hi = cfg.window
    k_F = math.sqrt(2.0 * p.epsilon_F)
    edge = d.w if d.type == "trench" else 0.0
    req(z_lo > edge + 2.0, "analysis.friedel_window", f"start {z_lo} must exceed defect edge + 2 = {edge + 2.0}")
    req(z_hi < g.L - 5.0, "analysis.friedel_window", f"end {z_hi} must be below L - 5 = {g.L - 5.0}")
    req(z_hi - z_lo >= 3.0 * math.pi / k_F, "analysis.friedel_window",
        f"must span at least 3 oscillation periods ({3.0 * math.pi / k_F:.3g})")
    bad = [f for f in cfg.output.formats if f not in ("csv", "json")]
    req(not bad, "output.formats", f"unknown format(s) {bad}; allowed: csv, json")


def parse_config(text: str, overrides=(), source: str = "<config>") -> RunConfig:
    """Parse and validate configuration text, then apply ``section.key=value`` overrides."""
    parser, index = _read_sections(text, source)
    values: dict[str, dict] = {name: {} for name in _SECTIONS}

    def assign(section: str, key: str, raw: str, line: int | None, src: str):
        full = f"{section}.{key}"
        if section not in _KINDS:
            raise ConfigError(f"unknown section [{section}]{_suggest(full)}", key=full, line=line, source=src)
        if key not in _KINDS[section]:
            raise ConfigError(f"unknown key `{full}`{_suggest(full)}", key=full, line=line, source=src)
        try:
            values[section][key] = _convert(_KINDS[section][key], raw)
        except ValueError as exc:
            raise ConfigError(f"`{full}`: {exc}", key=full, line=line, source=src) from exc

    for section in parser.sections():
        if section not in _KINDS:
            raise ConfigError(
                f"unknown section [{section}]{_suggest(section)}", key=section,
                line=index.get(section), source=source,
            )
        for key, raw in parser.items(section):
            assign(section, key, raw, index.get(f"{section}.{key}"), source)

    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value", source="--override")
        name, raw = item.split("=", 1)
        section, key = name.strip().split(".", 1)
        assign(section, key, raw, None, "--override")
        index.overridden.add(f"{section}.{key}")

    try:
        cfg = RunConfig(**{name: cls(**values[name]) for name, cls in _SECTIONS.items()})
    except TypeError as exc:  # pragma: no cover - guarded by the key checks above
        raise ConfigError(str(exc), source=source) from exc
    _validate(cfg, index, source)
    return cfg


def load_config(path: str | Path | None, overrides=()) -> RunConfig:
    if path is None:
        return parse_config("", overrides, source="<defaults>")
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", source=str(path)) from exc
    return parse_config(text, overrides, source=str(path))


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of the resolved configuration."""
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
