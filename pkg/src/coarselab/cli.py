"""Experiment runner: reproducible runs from key-value config files.

One experiment per config file.  Exit status is 0 when every verdict
passes or certifies, 1 when any verdict is refuted (so CI can gate on
the measured inequalities), and 2 on configuration errors.  Every run
writes a manifest, also on failure, that echoes the config and pins the
seed, so re-running a manifest's config reproduces the CSV outputs
byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__, actions, coarse, cone, odometer
from .coarse import REFUTED
from .odometer import BoundaryWord
from .spaces import (
    BallSpec,
    BinaryTreeSpace,
    CapExceeded,
    FreeGroupSpace,
    LatticeSpace,
    Space,
    space_from_config,
)

EXPERIMENTS = (
    "verify-coarse",
    "orbit",
    "fixed-point",
    "odometer-density",
    "cone-diagnostic",
    "higson-defect",
)


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    """Parse `key = value` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path) -> "ExperimentConfig":
    text = Path(path).read_text()
    return ExperimentConfig(raw=parse_config_text(text), source=str(path))


def _number(text: str) -> Fraction:
    """Exact numeric literal: int, fraction 'p/q', power '2^-8', decimal."""
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return Fraction(base) ** int(exp)
    return Fraction(text)


def _number_list(text: str) -> list[Fraction]:
    return [_number(part) for part in text.split(",") if part.strip()]


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict[str, str]
    source: str = "<memory>"

    @property
    def experiment(self) -> str:
        return self.raw.get("experiment", "")

    def get(self, key: str, default=None):
        return self.raw.get(key, default)

    def require(self, key: str) -> str:
        if key not in self.raw:
            raise ConfigError(
                f"{self.experiment or 'experiment'} config is missing required "
                f"field {key!r}"
            )
        return self.raw[key]

    def number(self, key: str, default=None) -> Fraction:
        if key not in self.raw:
            if default is None:
                raise ConfigError(f"missing required numeric field {key!r}")
            return Fraction(default)
        try:
            return _number(self.raw[key])
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"invalid numeric value for {key!r}: {exc}") from exc

    def numbers(self, key: str, default: str | None = None) -> list[Fraction]:
        text = self.raw.get(key, default)
        if text is None:
            raise ConfigError(f"missing required list field {key!r}")
        return _number_list(str(text))

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))


@dataclass(frozen=True)
class RunManifest:
    config: dict[str, str]
    source: str
    version: str
    wall_clock_seconds: float
    verdicts: dict
    outputs: list[str]
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "config": dict(sorted(self.config.items())),
            "config_source": self.source,
            "library_version": self.version,
            "wall_clock_seconds": self.wall_clock_seconds,
            "verdicts": self.verdicts,
            "outputs": self.outputs,
            "error": self.error,
        }


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def parse_point(space: Space, text: str):
    """Parse a point literal matching the space's format_point output."""
    text = text.strip()
    if isinstance(space, LatticeSpace):
        inner = text.strip("()")
        return space.validate(tuple(int(c) for c in inner.replace(",", " ").split()))
    if isinstance(space, FreeGroupSpace):
        return space.validate("" if text in ("e", "") else text)
    if isinstance(space, BinaryTreeSpace):
        if text == "*":
            return ()
        return space.validate(tuple(int(c) for c in text))
    if isinstance(space, cone.ConeSpace):
        if text == "apex":
            return space.basepoint
        node, height = text.split("@")
        return space.validate((node, float(Fraction(height))))
    raise ConfigError(f"cannot parse a point for model {space.model!r}")


def build_action(cfg: ExperimentConfig, space: Space) -> actions.ActionSpec:
    name = cfg.require("action").lower()
    if name == "self-translation":
        if not isinstance(space, LatticeSpace):
            raise ConfigError("self-translation acts on a lattice space")
        return actions.lattice_translation_action(space)
    if name == "left-translation":
        if not isinstance(space, FreeGroupSpace):
            raise ConfigError("left-translation acts on the free group")
        return actions.free_group_left_translation_action()
    if name == "translate":
        vec = tuple(int(c) for c in cfg.require("by").replace(",", " ").split())
        return actions.iterated_map_action(
            actions.lattice_translation(vec), f"translate{vec}", isometry=True
        )
    if name == "left-multiply":
        return actions.iterated_map_action(
            actions.left_translation(cfg.require("by")), "left-multiply", isometry=True
        )
    if name == "right-multiply":
        return actions.iterated_map_action(
            actions.right_translation(cfg.require("by")), "right-multiply"
        )
    if name == "odometer":
        return actions.iterated_map_action(odometer.odometer_step, "odometer")
    if name == "rotate":
        if not isinstance(space, cone.ConeSpace):
            raise ConfigError("rotate acts on a cone space")
        step = int(cfg.get("step", 1))
        n = len(space.grid.nodes)

        def rot(p):
            node, t = p
            if t == 0.0:
                return p
            return (str((int(node) + step) % n), t)

        return actions.iterated_map_action(rot, f"rotate+{step}", isometry=True)
    if name == "constant":
        return actions.iterated_map_action(lambda p: space.basepoint, "constant")
    raise ConfigError(f"unknown action {cfg.get('action')!r}")


# ---------------------------------------------------------------------------
# experiment bodies; each returns (verdicts, output files, refuted?)


def _run_verify_coarse(cfg: ExperimentConfig, out: Path):
    space = space_from_config(cfg.raw)
    action = build_action(cfg, space)
    radii = [float(r) for r in cfg.numbers("radii", "1,2,4,8")]
    sample = cfg.get("sample_radius")
    domain = cfg.get("domain_radius")
    verification = actions.verify_coarse_action(
        action,
        space,
        radii,
        None if sample is None else float(_number(sample)),
        None if domain is None else float(_number(domain)),
    )
    _write_text(out / "report.csv", verification.to_csv())
    _write_text(
        out / "report.json",
        json.dumps(verification.to_json_dict(), indent=2, sort_keys=True) + "\n",
    )
    return (
        {"action": verification.verdict},
        ["report.csv", "report.json"],
        verification.verdict == REFUTED,
    )


def _run_orbit(cfg: ExperimentConfig, out: Path):
    space = space_from_config(cfg.raw)
    action = build_action(cfg, space)
    horizon = int(cfg.number("horizon"))
    start = cfg.get("start")
    x0 = space.basepoint if start is None else parse_point(space, start)
    record = actions.orbit(action, space, x0, horizon)
    _write_text(out / "escape_profile.csv", record.escape_profile_csv())
    _write_text(
        out / "orbit.json",
        json.dumps(record.to_json_dict(space), indent=2, sort_keys=True) + "\n",
    )
    return (
        {"orbit_size": len(record.points), "max_displacement": record.max_displacement},
        ["escape_profile.csv", "orbit.json"],
        False,
    )


def _run_fixed_point(cfg: ExperimentConfig, out: Path):
    space = space_from_config(cfg.raw)
    action = build_action(cfg, space)
    horizon = int(cfg.number("horizon"))
    mode = cfg.get("mode", "finite")
    start = cfg.get("start")
    x0 = space.basepoint if start is None else parse_point(space, start)
    if mode == "finite":
        result = actions.detect_coarse_fixed_point_finite(action, space, x0, horizon)
        verdict = result.status
    elif mode == "isometry":
        radius = float(cfg.number("ball_radius"))
        min_returns = int(cfg.number("min_returns", 50))
        result = actions.detect_coarse_fixed_point_isometry(
            action, space, x0, BallSpec(x0, radius), horizon,
            min_returns=min_returns, seed=cfg.seed,
        )
        verdict = result.status
    else:
        raise ConfigError(f"unknown fixed-point mode {mode!r}")
    _write_text(
        out / "verdict.json",
        json.dumps(result.to_json_dict(space), indent=2, sort_keys=True) + "\n",
    )
    return ({"detector": verdict}, ["verdict.json"], False)


def _random_boundary_word(rng: random.Random, precision: int) -> BoundaryWord:
    return BoundaryWord(tuple(rng.randrange(2) for _ in range(precision)))


def _run_odometer_density(cfg: ExperimentConfig, out: Path):
    precision = int(cfg.number("precision"))
    epsilons = cfg.numbers("epsilons")
    n_targets = int(cfg.number("targets", 10))
    rng = random.Random(cfg.seed)
    start_text = cfg.get("start")
    if start_text:
        start = BoundaryWord(tuple(int(b) for b in start_text))
    else:
        start = _random_boundary_word(rng, precision)
    targets = [_random_boundary_word(rng, precision) for _ in range(n_targets)]
    table = odometer.density_experiment(start, targets, epsilons)
    _write_text(out / "density.csv", table.to_csv())
    ok = table.all_verified()
    return (
        {"density": "all-verified" if ok else "refuted", "rows": len(table.rows)},
        ["density.csv"],
        not ok,
    )


def _run_cone_diagnostic(cfg: ExperimentConfig, out: Path):
    space = space_from_config({**cfg.raw, "space": "cone"})
    r_e = float(cfg.number("entourage_radius"))
    heights = [float(t) for t in cfg.numbers("heights")]
    slack = float(cfg.number("slack", Fraction(1, 10)))
    table = cone.compactification_diagnostic(space.grid, space.lam, r_e, heights, slack)
    _write_text(out / "diagnostic.csv", table.to_csv())
    ok = table.all_passed()
    return (
        {"diagnostic": "all-passed" if ok else "refuted"},
        ["diagnostic.csv"],
        not ok,
    )


_FUNCTIONS = {
    "sin-log": lambda space: (
        lambda p: __import__("math").sin(
            __import__("math").log1p(space.distance(space.basepoint, p))
        )
    ),
    "sin-coordinate": lambda space: (lambda p: __import__("math").sin(p[0])),
    "constant": lambda space: (lambda p: 1.0),
}


def _run_higson_defect(cfg: ExperimentConfig, out: Path):
    space = space_from_config(cfg.raw)
    fname = cfg.require("function")
    if fname not in _FUNCTIONS:
        raise ConfigError(
            f"unknown function {fname!r}; choose from {sorted(_FUNCTIONS)}"
        )
    f = _FUNCTIONS[fname](space)
    radius = float(cfg.number("entourage_radius"))
    balls = [float(b) for b in cfg.numbers("balls")]
    window = cfg.get("window_radius")
    table = coarse.higson_defect(
        f, space, radius, balls,
        window_radius=None if window is None else float(_number(window)),
        function_id=fname,
    )
    _write_text(out / "defect.csv", table.to_csv())
    final = table.rows[-1].value if table.rows else 0.0
    return ({"defect_at_largest_ball": final}, ["defect.csv"], False)


_RUNNERS = {
    "verify-coarse": _run_verify_coarse,
    "orbit": _run_orbit,
    "fixed-point": _run_fixed_point,
    "odometer-density": _run_odometer_density,
    "cone-diagnostic": _run_cone_diagnostic,
    "higson-defect": _run_higson_defect,
}


def validate(cfg: ExperimentConfig) -> list[str]:
    """Static diagnostics only; runs no computation."""
    diags: list[str] = []
    exp = cfg.experiment
    if not exp:
        return ["missing required field 'experiment'"]
    if exp not in EXPERIMENTS:
        return [f"unknown experiment {exp!r}; choose from {list(EXPERIMENTS)}"]

    def need(*keys):
        for key in keys:
            if key not in cfg.raw:
                diags.append(f"{exp} experiment is missing required field {key!r}")

    if exp in ("verify-coarse", "orbit", "fixed-point"):
        need("space", "action")
    if exp in ("orbit", "fixed-point"):
        need("horizon")
    if exp == "fixed-point" and cfg.get("mode", "finite") == "isometry":
        need("ball_radius")
    if exp == "odometer-density":
        need("precision", "epsilons")
        if "precision" in cfg.raw and "epsilons" in cfg.raw:
            try:
                precision = int(cfg.number("precision"))
                for eps in cfg.numbers("epsilons"):
                    if odometer._precision_for(eps) >= precision:
                        diags.append(
                            f"insufficient precision: epsilon {eps} needs more than "
                            f"{precision} bits"
                        )
            except (ConfigError, ValueError) as exc:
                diags.append(str(exc))
    if exp == "cone-diagnostic":
        need("entourage_radius", "heights")
        if "base_cycle" not in cfg.raw and "base_edges" not in cfg.raw:
            diags.append("cone-diagnostic needs 'base_cycle' or 'base_edges'")
    if exp == "higson-defect":
        need("space", "function", "entourage_radius", "balls")
    return diags


def run(cfg: ExperimentConfig, out_dir=None, seed: int | None = None,
        cap: int | None = None) -> RunManifest:
    """Execute one experiment; the manifest is written even on failure."""
    raw = dict(cfg.raw)
    if seed is not None:
        raw["seed"] = str(seed)
    if cap is not None:
        raw["cap"] = str(cap)
    cfg = ExperimentConfig(raw=raw, source=cfg.source)

    out = Path(out_dir) if out_dir else Path(cfg.get("out", "results")) / (
        Path(cfg.source).stem if cfg.source != "<memory>" else cfg.experiment
    )
    started = time.monotonic()
    problems = validate(cfg)
    error = None
    verdicts: dict = {}
    files: list[str] = []
    refuted = False
    if problems:
        error = "; ".join(problems)
    else:
        try:
            verdicts, files, refuted = _RUNNERS[cfg.experiment](cfg, out)
        except (ConfigError, CapExceeded, ValueError) as exc:
            error = f"{type(exc).__name__}: {exc}"
    manifest = RunManifest(
        config=dict(cfg.raw),
        source=cfg.source,
        version=__version__,
        wall_clock_seconds=time.monotonic() - started,
        verdicts={**verdicts, "refuted": refuted},
        outputs=files,
        error=error,
    )
    _write_text(
        out / "manifest.json",
        json.dumps(manifest.to_json_dict(), indent=2, sort_keys=True) + "\n",
    )
    if error is not None:
        raise ConfigError(error)
    return manifest


def _exit_code(manifest: RunManifest) -> int:
    return 1 if manifest.verdicts.get("refuted") else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="coarselab", description="coarse-geometry experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "validate", "batch"):
        p = sub.add_parser(name)
        p.add_argument("path")
        if name != "validate":
            p.add_argument("--out", default=None)
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--cap", type=int, default=None)
    args = parser.parse_args(argv)

    if args.command == "validate":
        try:
            diags = validate(load_config(args.path))
        except ConfigError as exc:
            print(f"error: {exc}")
            return 2
        for d in diags:
            print(f"diagnostic: {d}")
        if not diags:
            print("ok")
        return 2 if diags else 0

    if args.command == "run":
        try:
            manifest = run(load_config(args.path), args.out, args.seed, args.cap)
        except (ConfigError, CapExceeded) as exc:
            print(f"error: {exc}")
            return 2
        for key, value in sorted(manifest.verdicts.items()):
            print(f"{key}: {value}")
        return _exit_code(manifest)

    # batch: every *.cfg in the directory, worst exit status wins
    paths = sorted(Path(args.path).glob("*.cfg"))
    if not paths:
        print(f"error: no .cfg files under {args.path}")
        return 2
    worst = 0
    for path in paths:
        try:
            manifest = run(
                load_config(path),
                None if args.out is None else Path(args.out) / path.stem,
                args.seed,
                args.cap,
            )
            code = _exit_code(manifest)
            print(f"{path.name}: exit {code}")
        except (ConfigError, CapExceeded) as exc:
            print(f"{path.name}: error: {exc}")
            code = 2
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
