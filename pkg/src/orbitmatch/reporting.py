"""Config (de)serialization and CSV/JSON/SVG emission.

Configs are TOML files with a flat normative schema: top-level keys
``kind, k, n_ladder, replicas, seed, out`` plus a ``[system]`` table and
kind-specific extras (``[observation]``, ``[encoder]``, ``[radii]``,
``weights``, ``samples``, ``cylinder_length``).  Emitted CSV and JSON
are byte-deterministic functions of (config, seed): floats are written
with shortest round-trip repr and JSON keys are sorted.
"""

from __future__ import annotations

import json
import math
import os
from typing import Optional

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .dimension import RadiiLadder
from .dynamics import (
    AffineObservation,
    Beta,
    CoordinateProjection,
    Gauss,
    Identity,
    MTimesMod1,
    PiecewiseDoubling,
    PiecewiseLinear,
    SkewProduct,
    TorusExpanding,
    skew_2x_3x,
)
from .errors import ConfigInvalid
from .experiments import ExperimentConfig, ExperimentResult
from .matching import BlockSubstitution, IdentityEncoder, LetterRepetition
from .symbolic import MarkovModel

_EXPERIMENT_KEYS = {
    "kind",
    "system",
    "k",
    "n_ladder",
    "replicas",
    "seed",
    "out",
    "label",
    "metric",
    "observation",
    "encoder",
    "weights",
    "radii",
    "samples",
    "cylinder_length",
}


# ---------------------------------------------------------------------------
# system / observation / encoder schemas


def system_to_dict(system) -> dict:
    if isinstance(system, MTimesMod1):
        return {"kind": "mtimes-mod1", "m": system.m}
    if isinstance(system, Beta):
        return {"kind": "beta", "beta": system.beta}
    if isinstance(system, Gauss):
        return {"kind": "gauss"}
    if isinstance(system, PiecewiseDoubling):
        return {"kind": "piecewise-doubling"}
    if isinstance(system, TorusExpanding):
        return {"kind": "torus-expanding", "dim": system.dim, "factor": system.factor}
    if isinstance(system, PiecewiseLinear):
        return {
            "kind": "piecewise-linear",
            "breakpoints": list(system.breakpoints),
            "slopes": list(system.slopes),
            "offsets": list(system.offsets),
        }
    if isinstance(system, SkewProduct):
        if system == skew_2x_3x():
            return {"kind": "skew-2x-3x"}
        return {
            "kind": "skew-product",
            "base": system_to_dict(system.base),
            "thresholds": list(system.thresholds),
            "fibers": [system_to_dict(f) for f in system.fibers],
        }
    if isinstance(system, MarkovModel):
        return {"kind": "markov", "matrix": [list(map(float, row)) for row in system.matrix]}
    raise ConfigInvalid(f"cannot serialize system {system!r}")


def system_from_dict(d: dict):
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigInvalid("system table needs a 'kind' key")
    kind = d["kind"]
    try:
        if kind == "mtimes-mod1":
            return MTimesMod1(int(d["m"]))
        if kind == "beta":
            return Beta(float(d["beta"]))
        if kind == "gauss":
            return Gauss()
        if kind == "piecewise-doubling":
            return PiecewiseDoubling()
        if kind == "torus-expanding":
            return TorusExpanding(int(d["dim"]), int(d["factor"]))
        if kind == "piecewise-linear":
            return PiecewiseLinear(
                tuple(d["breakpoints"]), tuple(d["slopes"]), tuple(d["offsets"])
            )
        if kind == "skew-2x-3x":
            return skew_2x_3x()
        if kind == "skew-product":
            return SkewProduct(
                base=system_from_dict(d["base"]),
                thresholds=tuple(d["thresholds"]),
                fibers=tuple(system_from_dict(f) for f in d["fibers"]),
            )
        if kind == "markov":
            return MarkovModel(np.asarray(d["matrix"], dtype=float))
        if kind == "bernoulli":
            return MarkovModel.bernoulli(np.asarray(d["p"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad parameters for system kind {kind!r}: {exc}") from exc
    raise ConfigInvalid(f"unknown system kind {kind!r}")


def observation_to_dict(obs) -> Optional[dict]:
    if obs is None:
        return None
    if isinstance(obs, Identity):
        return {"kind": "identity"}
    if isinstance(obs, CoordinateProjection):
        return {"kind": "project", "indices": list(obs.indices)}
    if isinstance(obs, AffineObservation):
        return {"kind": "affine", "scale": obs.scale, "offset": obs.offset}
    raise ConfigInvalid(f"cannot serialize observation {obs!r}")


def observation_from_dict(d: Optional[dict]):
    if d is None:
        return None
    kind = d.get("kind")
    if kind == "identity":
        return Identity()
    if kind == "project":
        return CoordinateProjection(tuple(int(i) for i in d["indices"]))
    if kind == "affine":
        return AffineObservation(float(d["scale"]), float(d["offset"]))
    raise ConfigInvalid(f"unknown observation kind {kind!r}")


def encoder_to_dict(enc) -> Optional[dict]:
    if enc is None:
        return None
    if isinstance(enc, IdentityEncoder):
        return {"kind": "identity"}
    if isinstance(enc, LetterRepetition):
        return {"kind": "letter-repetition", "weights": list(enc.weights)}
    if isinstance(enc, BlockSubstitution):
        return {
            "kind": "block-substitution",
            "words": [list(w) for w in enc.words],
            "alphabet": enc.alphabet_size,
        }
    raise ConfigInvalid(f"cannot serialize encoder {enc!r}")


def encoder_from_dict(d: Optional[dict]):
    if d is None:
        return None
    kind = d.get("kind")
    if kind == "identity":
        return IdentityEncoder()
    if kind == "letter-repetition":
        return LetterRepetition(tuple(int(w) for w in d["weights"]))
    if kind == "block-substitution":
        return BlockSubstitution(
            tuple(tuple(int(s) for s in w) for w in d["words"]), int(d["alphabet"])
        )
    raise ConfigInvalid(f"unknown encoder kind {kind!r}")


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {
        "kind": config.kind,
        "system": system_to_dict(config.system),
        "k": config.k,
        "n_ladder": list(int(n) for n in config.n_ladder),
        "replicas": config.replicas,
        "seed": config.seed,
        "out": config.out,
    }
    if config.label is not None:
        out["label"] = config.label
    if config.metric is not None:
        out["metric"] = config.metric
    if config.observation is not None:
        out["observation"] = observation_to_dict(config.observation)
    if config.encoder is not None:
        out["encoder"] = encoder_to_dict(config.encoder)
    if config.weights is not None:
        out["weights"] = list(int(w) for w in config.weights)
    if config.radii is not None:
        out["radii"] = {
            "r0": config.radii.r0,
            "count": config.radii.count,
            "ratio": config.radii.ratio,
        }
    if config.samples is not None:
        out["samples"] = config.samples
    if config.cylinder_length is not None:
        out["cylinder_length"] = config.cylinder_length
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    unknown = set(data) - _EXPERIMENT_KEYS
    if unknown:
        raise ConfigInvalid(f"unknown config keys {sorted(unknown)}")
    for key in ("kind", "system", "k", "n_ladder", "replicas", "seed"):
        if key not in data:
            raise ConfigInvalid(f"config is missing required key {key!r}")
    radii = None
    if "radii" in data:
        r = data["radii"]
        try:
            radii = RadiiLadder(
                float(r["r0"]), int(r["count"]), float(r.get("ratio", 0.5))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"bad radii ladder: {exc}") from exc
    try:
        return ExperimentConfig(
            kind=str(data["kind"]),
            system=system_from_dict(data["system"]),
            k=int(data["k"]),
            n_ladder=tuple(int(n) for n in data["n_ladder"]),
            replicas=int(data["replicas"]),
            seed=int(data["seed"]),
            out=str(data.get("out", "results")),
            label=data.get("label"),
            metric=data.get("metric"),
            observation=observation_from_dict(data.get("observation")),
            encoder=encoder_from_dict(data.get("encoder")),
            weights=tuple(int(w) for w in data["weights"]) if "weights" in data else None,
            radii=radii,
            samples=int(data["samples"]) if "samples" in data else None,
            cylinder_length=int(data["cylinder_length"])
            if "cylinder_length" in data
            else None,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad config value: {exc}") from exc


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return config_from_dict(data)


def result_label(config: ExperimentConfig) -> str:
    if config.label:
        return config.label
    return f"{config.kind}_{config.system.__class__.__name__.lower()}_k{config.k}"


# ---------------------------------------------------------------------------
# emission


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def write_csv(result: ExperimentResult, path: str):
    lines = ["n,replica,statistic,exponent"]
    for n, rep, stat, expo in result.rows:
        lines.append(f"{n},{rep},{_fmt(stat)},{_fmt(expo)}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv_rows(path: str) -> list:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "n,replica,statistic,exponent":
            raise ConfigInvalid(f"unexpected CSV header {header!r} in {path}")
        for line in fh:
            n, rep, stat, expo = line.strip().split(",")
            rows.append((int(n), int(rep), float(stat), float(expo)))
    return rows


def summary_dict(result: ExperimentResult) -> dict:
    return {
        "schema": "orbitmatch-result-v1",
        "config": config_to_dict(result.config),
        "seed": result.config.seed,
        "slope": result.slope,
        "intercept": result.intercept,
        "theory": result.theory,
        "abs_error": result.abs_error,
        "rel_error": result.rel_error,
        "per_n": result.per_n,
        "degenerate_rows": result.degenerate_rows,
        "row_count": len(result.rows),
    }


def write_json(result: ExperimentResult, path: str):
    payload = json.dumps(summary_dict(result), sort_keys=True, indent=2)
    with open(path, "w", newline="") as fh:
        fh.write(payload + "\n")


def _svg_polyline(xs, ys, to_px, color, dash="") -> str:
    pts = " ".join(f"{to_px(x, y)[0]:.2f},{to_px(x, y)[1]:.2f}" for x, y in zip(xs, ys))
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash_attr} '
        f'points="{pts}"/>'
    )


def write_svg(result: ExperimentResult, path: str):
    """Line chart of the per-window mean ordinate with the theory line overlaid."""
    pts = [
        (e["abscissa"], e["mean_ordinate"])
        for e in result.per_n
        if "abscissa" in e and "mean_ordinate" in e
    ]
    width, height, margin = 640, 440, 56
    title = result_label(result.config)
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width//2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
    ]
    if len(pts) >= 2:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        theory_ys = None
        if result.theory is not None:
            xm = sum(xs) / len(xs)
            ym = sum(ys) / len(ys)
            theory_ys = [ym + result.theory * (x - xm) for x in xs]
        all_y = ys + (theory_ys or [])
        x_lo, x_hi = min(xs), max(xs)
        y_lo, y_hi = min(all_y), max(all_y)
        x_span = (x_hi - x_lo) or 1.0
        y_span = (y_hi - y_lo) or 1.0

        def to_px(x, y):
            px = margin + (x - x_lo) / x_span * (width - 2 * margin)
            py = height - margin - (y - y_lo) / y_span * (height - 2 * margin)
            return px, py

        axis = (
            f'<line x1="{margin}" y1="{height-margin}" x2="{width-margin}" '
            f'y2="{height-margin}" stroke="black"/>'
            f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height-margin}" '
            f'stroke="black"/>'
        )
        body.append(axis)
        for x, y in ((x_lo, y_lo), (x_hi, y_hi)):
            px, py = to_px(x, y)
            body.append(
                f'<text x="{px:.2f}" y="{height-margin+16}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{x:.4g}</text>'
            )
            body.append(
                f'<text x="{margin-6}" y="{py:.2f}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{y:.4g}</text>'
            )
        body.append(_svg_polyline(xs, ys, to_px, "#1f77b4"))
        if theory_ys is not None:
            body.append(_svg_polyline(xs, theory_ys, to_px, "#d62728", dash="6,4"))
            body.append(
                f'<text x="{width-margin}" y="{margin}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11" fill="#d62728">'
                f"theory slope {result.theory:.6g}</text>"
            )
        body.append(
            f'<text x="{width-margin}" y="{margin+16}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="#1f77b4">'
            f"fitted slope {result.slope:.6g}</text>"
        )
    else:
        body.append(
            f'<text x="{width//2}" y="{height//2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">not enough windows to plot</text>'
        )
    body.append("</svg>")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(body) + "\n")


def report(result: ExperimentResult, out_dir: str, formats=("csv", "json", "svg")) -> list:
    """Write the requested artifacts; returns the emitted paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, result_label(result.config))
    written = []
    for fmt in formats:
        if fmt == "csv":
            write_csv(result, stem + ".csv")
        elif fmt == "json":
            write_json(result, stem + ".json")
        elif fmt == "svg":
            write_svg(result, stem + ".svg")
        else:
            raise ConfigInvalid(f"unknown report format {fmt!r}")
        written.append(stem + "." + fmt)
    return written
