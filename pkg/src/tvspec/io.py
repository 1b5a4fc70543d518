"""File formats: system definitions, reports, assignments, and CSV curves.

All inputs and outputs are JSON (CSV only for plot curves).  Reports are
serialized with sorted keys and no timestamps, so identical configs and
seeds yield byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import os
import re
from pathlib import Path
from typing import Any

import numpy as np

from .assignment import TargetSpectrum, build_diagonal_sequences
from .continuous import ContinuousSystem
from .errors import InputError
from .sequences import (
    Horizon,
    MatrixSequence,
    constant_sequence,
    explicit_sequence,
    periodic_sequence,
    random_bounded_sequence,
    random_input_sequence,
    triangular_from_scalars,
)

__all__ = [
    "RunConfig",
    "parse_targets",
    "parse_horizon",
    "load_system",
    "load_control_system",
    "load_continuous_system",
    "sequence_to_json",
    "sequence_from_json",
    "write_report",
    "write_exponent_csv",
    "save_assignment",
    "load_assignment",
]


@dataclasses.dataclass
class RunConfig:
    """Resolved run parameters, embedded into every report."""

    command: str
    system_path: str | None = None
    out_path: str | None = None
    csv_path: str | None = None
    horizon_override: tuple[int, int] | None = None
    window_length: int = 1 << 10
    grid_step: float = 0.01
    gap_threshold: float = 0.01
    tolerance: float = 0.05
    side: str = "two-sided"
    seed: int | None = None
    emit_csv: bool = False
    extras: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        for name in ("window_length", "grid_step", "gap_threshold", "tolerance"):
            if getattr(self, name) <= 0:
                raise InputError(f"{name} must be positive")
        if "TVSPEC_SEED" in os.environ:
            raw = os.environ["TVSPEC_SEED"]
            try:
                self.seed = int(raw)
            except ValueError:
                raise InputError(
                    f"TVSPEC_SEED must be an integer, got {raw!r}"
                ) from None

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        extras = data.pop("extras")
        data.update(extras)
        if self.horizon_override is not None:
            data["horizon_override"] = list(self.horizon_override)
        return data


def parse_targets(text: str) -> TargetSpectrum:
    """Parse '[a1,b1],[a2,b2],...' (or bare 'a,b' pairs) into targets."""
    pairs = re.findall(r"\[([^\[\]]+)\]", text)
    if not pairs:
        pairs = [text]
    intervals = []
    for pair in pairs:
        parts = [p.strip() for p in pair.split(",") if p.strip()]
        if len(parts) == 1:
            parts = parts * 2
        if len(parts) != 2:
            raise InputError(
                f"target interval needs one or two endpoints, got {pair!r}"
            )
        try:
            intervals.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise InputError(f"non-numeric target endpoint in {pair!r}") from None
    return TargetSpectrum(tuple(intervals))


def parse_horizon(text: str) -> tuple[int, int]:
    """Parse 'MIN:MAX' into a horizon override pair."""
    parts = text.split(":")
    if len(parts) != 2:
        raise InputError(f"horizon override must be MIN:MAX, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise InputError(f"horizon endpoints must be integers, got {text!r}") from None


def _load_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None


def _require(data: dict, key: str, context: str) -> Any:
    if key not in data:
        raise InputError(f"{context}: missing required field {key!r}")
    return data[key]


def _horizon_from(data: dict, override: tuple[int, int] | None, context: str) -> Horizon:
    if override is not None:
        return Horizon(override[0], override[1])
    raw = _require(data, "horizon", context)
    try:
        return Horizon(int(raw["min"]), int(raw["max"]))
    except (KeyError, TypeError, ValueError):
        raise InputError(
            f"{context}: horizon must be an object with integer 'min' and 'max'"
        ) from None


def _build_sequence(
    kind: str,
    params: dict,
    seed: int | None,
    rows: int,
    cols: int,
    horizon: Horizon,
    context: str,
) -> MatrixSequence:
    if kind == "constant":
        mat = np.asarray(_require(params, "matrix", context), dtype=np.float64)
        if mat.shape != (rows, cols):
            raise InputError(
                f"{context}: constant matrix has shape {mat.shape}, "
                f"expected ({rows}, {cols})"
            )
        return constant_sequence(mat, horizon)
    if kind == "explicit":
        mats = np.asarray(_require(params, "matrices", context), dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1:] != (rows, cols):
            raise InputError(
                f"{context}: explicit matrices must be a list of "
                f"({rows}, {cols}) matrices"
            )
        if mats.shape[0] != len(horizon):
            raise InputError(
                f"{context}: {mats.shape[0]} explicit matrices for a horizon "
                f"of {len(horizon)} points"
            )
        return explicit_sequence(mats, horizon)
    if kind == "periodic":
        mats = np.asarray(_require(params, "matrices", context), dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1:] != (rows, cols):
            raise InputError(
                f"{context}: periodic matrices must be a list of "
                f"({rows}, {cols}) matrices"
            )
        return periodic_sequence(mats, horizon)
    if kind == "dyadic":
        if rows != cols:
            raise InputError(f"{context}: dyadic systems are square")
        intervals = _require(params, "intervals", context)
        targets = TargetSpectrum(tuple((float(a), float(b)) for a, b in intervals))
        diagonal = build_diagonal_sequences(targets, horizon, rows)
        return triangular_from_scalars(
            diagonal.scalars,
            fill_seed=params.get("fill_seed", seed),
            fill_scale=float(params.get("fill_scale", 0.0)),
        )
    if kind == "random_bounded":
        if rows != cols:
            raise InputError(
                f"{context}: random_bounded is square; use random_input for "
                "rectangular input matrices"
            )
        if seed is None:
            raise InputError(f"{context}: random_bounded requires a seed")
        lo, hi = params.get("log_sv_range", (-0.5, 0.5))
        return random_bounded_sequence(
            rows, horizon, seed=seed, log_sv_range=(float(lo), float(hi))
        )
    if kind == "random_input":
        if seed is None:
            raise InputError(f"{context}: random_input requires a seed")
        return random_input_sequence(
            rows, cols, horizon, seed=seed, scale=float(params.get("scale", 1.0))
        )
    raise InputError(f"{context}: unknown sequence kind {kind!r}")


def load_system(
    path: str | Path, horizon_override: tuple[int, int] | None = None
) -> MatrixSequence:
    """Load a square system from a system-definition JSON file."""
    data = _load_json(path)
    context = str(path)
    dim = int(_require(data, "dim", context))
    horizon = _horizon_from(data, horizon_override, context)
    return _build_sequence(
        _require(data, "kind", context),
        data.get("params", {}),
        data.get("seed"),
        dim,
        dim,
        horizon,
        context,
    )


def load_control_system(
    path: str | Path, horizon_override: tuple[int, int] | None = None
) -> tuple[MatrixSequence, MatrixSequence]:
    """Load an (A, B) pair from a control-system JSON file."""
    data = _load_json(path)
    context = str(path)
    dim = int(_require(data, "dim", context))
    input_dim = int(_require(data, "input_dim", context))
    horizon = _horizon_from(data, horizon_override, context)
    specs = []
    for label, rows, cols in (("A", dim, dim), ("B", dim, input_dim)):
        sub = _require(data, label, context)
        specs.append(
            _build_sequence(
                _require(sub, "kind", f"{context}:{label}"),
                sub.get("params", {}),
                sub.get("seed"),
                rows,
                cols,
                horizon,
                f"{context}:{label}",
            )
        )
    return specs[0], specs[1]


def load_continuous_system(path: str | Path) -> ContinuousSystem:
    """Load a continuous coefficient from a continuous-definition JSON file."""
    data = _load_json(path)
    context = str(path)
    horizon_raw = _require(data, "horizon", context)
    horizon = Horizon(int(horizon_raw["min"]), int(horizon_raw["max"]))
    kind = _require(data, "kind", context)
    params = data.get("params", {})
    if kind == "piecewise_constant":
        table = np.asarray(_require(params, "table", context), dtype=np.float64)
        return ContinuousSystem.piecewise_constant(table, horizon)
    if kind == "builtin_callable":
        return ContinuousSystem.from_builtin(
            _require(params, "name", context), params.get("args", {}), horizon
        )
    raise InputError(f"{context}: unknown continuous kind {kind!r}")


def sequence_to_json(seq: MatrixSequence) -> dict:
    """Serialize a sequence with explicit matrices (lossless interchange)."""
    return {
        "dim": seq.rows,
        "cols": seq.cols,
        "horizon": seq.horizon.to_dict(),
        "kind": "explicit",
        "params": {"matrices": seq.stack().tolist()},
    }


def sequence_from_json(data: dict, context: str = "sequence") -> MatrixSequence:
    horizon_raw = _require(data, "horizon", context)
    horizon = Horizon(int(horizon_raw["min"]), int(horizon_raw["max"]))
    rows = int(_require(data, "dim", context))
    cols = int(data.get("cols", rows))
    return _build_sequence(
        _require(data, "kind", context),
        data.get("params", {}),
        data.get("seed"),
        rows,
        cols,
        horizon,
        context,
    )


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and (obj != obj or obj in (float("inf"), float("-inf"))):
        return repr(obj)
    return obj


def write_report(path: str | Path, payload: dict) -> None:
    """Write a deterministic JSON report (sorted keys, trailing newline)."""
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_exponent_csv(path: str | Path, table) -> None:
    """Emit window-exponent curves as CSV rows (n, mu_1(n), ..., mu_d(n))."""
    header = "n," + ",".join(f"mu_{i + 1}" for i in range(table.dim))
    lines = [header]
    for start, row in zip(table.starts, table.mu):
        lines.append(str(int(start)) + "," + ",".join(f"{v:.12g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_assignment(
    path: str | Path,
    result,
    A: MatrixSequence,
    B: MatrixSequence,
    config: RunConfig | None = None,
) -> None:
    """Persist an assignment: system, U/C/T matrices, and verification."""
    payload = {
        "A": sequence_to_json(A),
        "B": sequence_to_json(B),
        "U": sequence_to_json(result.U),
        "C": sequence_to_json(result.C),
        "T": sequence_to_json(result.T),
        "targets": result.targets.to_dict(),
        "certificate": result.certificate.to_dict(),
        "verification": {
            "passed": result.passed,
            "endpoint_error": result.endpoint_error,
            "tolerance": result.tolerance,
            "estimate": result.estimate.to_dict(),
        },
        "diagnostics": result.diagnostics,
    }
    if config is not None:
        payload["config"] = config.to_dict()
    write_report(path, payload)


def load_assignment(path: str | Path) -> dict:
    """Load an assignment file back into sequences plus metadata."""
    data = _load_json(path)
    context = str(path)
    out = {}
    for label in ("A", "B", "U", "C", "T"):
        out[label] = sequence_from_json(
            _require(data, label, context), f"{context}:{label}"
        )
    out["targets"] = TargetSpectrum(
        tuple(
            (float(a), float(b))
            for a, b in _require(data, "targets", context)["intervals"]
        )
    )
    out["verification"] = data.get("verification", {})
    out["certificate"] = data.get("certificate", {})
    out["config"] = data.get("config", {})
    return out
