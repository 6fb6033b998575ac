"""``bell-hv-lab``: run one experiment from a JSON config and write reproducible reports.

Usage::

    bell-hv-lab <command> --config run.json [--seed N] [--output-dir DIR] [--require-certified]

Commands: chsh, chain, equiprob, certify, signal, schulman-check.

Exit status: 0 success, 1 a check command missed its tolerance, 2 invalid
config or a source with no signalling channel, 3 certification premises not
met under ``--require-certified``.
"""
from __future__ import annotations

import argparse
import json
import math
import numbers
import sys
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .estimators import MonteCarlo, chain_stats, chsh, stream
from .geometry import Direction, build_chain, build_theorem2prime_layout
from .models import (
    ModelError,
    schulman_ratio,
    schulman_single_probs,
    source_from_json,
)
from .signalling import NoChannelError, ProtocolConfig, channel_sweep, random_bits, run_protocol, sweep_to_csv
from .theorems import CERTIFIED, equiprobability_check, quantum_chain_slack, thm2_certify

COMMANDS = ("chsh", "chain", "equiprob", "certify", "signal", "schulman-check")
EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_NOT_CERTIFIED = 0, 1, 2, 3
SEED_MAX = 2**64 - 1


class ConfigError(ValueError):
    pass


# Canonical serialisation


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite float {x!r}")
    s = format(x, ".17g")
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _encode(obj: Any, level: int) -> str:
    pad, inner = "  " * level, "  " * (level + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, numbers.Integral):
        return str(int(obj))
    if isinstance(obj, numbers.Real):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_encode(obj[k], level + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + _encode(v, level + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Sorted keys, two-space indent, floats at 17 significant digits."""
    return _encode(obj, 0) + "\n"


def emit_report(results: Any, fmt: str, path: str | Path) -> Path:
    """Write ``results`` as canonical JSON, or as CSV text (``results`` already rendered)."""
    path = Path(path)
    if fmt == "json":
        text = canonical_json(results)
    elif fmt == "csv":
        if not isinstance(results, str):
            raise TypeError("CSV results must be pre-rendered text")
        text = results
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


# Config resolution


def _require(doc: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in doc:
        raise ConfigError(f"missing '{key}' in {where}")
    return doc[key]


def _resolve_mode(doc: Mapping[str, Any] | None) -> dict[str, Any]:
    doc = dict(doc or {"kind": "exact"})
    kind = doc.get("kind", "exact")
    if kind == "exact":
        return {"kind": "exact"}
    if kind != "mc":
        raise ConfigError(f"mode kind must be 'exact' or 'mc', got {kind!r}")
    n = _require(doc, "n_samples", "mode")
    conf = doc.get("confidence", 0.99)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"mode.n_samples must be a positive integer, got {n!r}")
    if not isinstance(conf, (int, float)) or not 0 < conf < 1:
        raise ConfigError(f"mode.confidence must lie in (0, 1), got {conf!r}")
    return {"kind": "mc", "n_samples": n, "confidence": float(conf)}


def _mode(resolved: Mapping[str, Any]) -> MonteCarlo | None:
    m = resolved["mode"]
    if m["kind"] == "exact":
        return None
    return MonteCarlo(m["n_samples"], resolved["seed"], m["confidence"])


def _resolve_source(doc: Any) -> dict[str, Any]:
    if not isinstance(doc, Mapping):
        raise ConfigError("'source' must be an object")
    try:
        return source_from_json(doc).to_json()
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"invalid source: {exc}") from exc


def _angle(x: Any, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise ConfigError(f"{where} must be a finite angle in radians, got {x!r}")
    return float(x)


def resolve_config(command: str, doc: Mapping[str, Any], seed_override: int | None = None) -> dict[str, Any]:
    """Validate ``doc`` for ``command`` and fill in every default."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if not isinstance(doc, Mapping):
        raise ConfigError("config must be a JSON object")
    if "command" in doc and doc["command"] != command:
        raise ConfigError(f"config is for command {doc['command']!r}, not {command!r}")
    seed = doc.get("seed", 0) if seed_override is None else seed_override
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= SEED_MAX:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    out: dict[str, Any] = {"command": command, "seed": seed}
    geo = dict(doc.get("geometry", {}))

    if command == "schulman-check":
        sch = dict(doc.get("schulman", {}))
        gammas = sch.get("gamma_s", [0.01, 0.1, 1.0])
        if not isinstance(gammas, list) or not gammas or any(not isinstance(g, (int, float)) or g <= 0 for g in gammas):
            raise ConfigError("schulman.gamma_s must be a non-empty list of positive widths")
        out["schulman"] = {
            "gamma_s": [float(g) for g in gammas],
            "theta_points": int(sch.get("theta_points", 25)),
            "truncation": int(sch.get("truncation", 100_000)),
            "tolerance": float(sch.get("tolerance", 1e-6)),
        }
        if out["schulman"]["theta_points"] < 2 or out["schulman"]["truncation"] < 1:
            raise ConfigError("schulman.theta_points must be >= 2 and truncation >= 1")
        return out

    out["source"] = _resolve_source(_require(doc, "source", "config"))
    out["mode"] = _resolve_mode(doc.get("mode"))

    if command == "chsh":
        if "directions" in geo:
            d = geo["directions"]
            out["geometry"] = {
                "directions": {k: _angle(_require(d, k, "geometry.directions"), k) for k in ("I", "I_prime", "J", "J_prime")}
            }
            default_signs = [1, 1, 1, -1]
        else:
            out["geometry"] = {"start": _angle(geo.get("start", 0.0), "geometry.start")}
            default_signs = [1, 1, -1, 1]  # minus on (A0, B4)
        signs = geo.get("sign_pattern", default_signs)
        if not isinstance(signs, list) or len(signs) != 4 or sorted(signs) != [-1, 1, 1, 1]:
            raise ConfigError("geometry.sign_pattern must be four of +1/-1 with exactly one -1")
        out["geometry"]["sign_pattern"] = signs
    elif command in ("chain", "equiprob"):
        n = geo.get("n", 6)
        ns = n if isinstance(n, list) else [n]
        if not ns or any(isinstance(k, bool) or not isinstance(k, int) or k < 1 for k in ns):
            raise ConfigError("geometry.n must be a positive integer (or a list of them for equiprob)")
        if command == "chain" and isinstance(n, list):
            raise ConfigError("chain takes a single geometry.n")
        out["geometry"] = {"n": n, "start": _angle(geo.get("start", 0.0), "geometry.start")}
    elif command == "certify":
        out["geometry"] = {"start": _angle(geo.get("start", 0.0), "geometry.start")}
    elif command == "signal":
        p = dict(doc.get("protocol", {}))
        alice = p.get("alice_settings", [0.0, math.pi / 2])
        if not isinstance(alice, list) or len(alice) != 2:
            raise ConfigError("protocol.alice_settings must list two angles")
        proto = {
            "alice_settings": [_angle(a, "protocol.alice_settings") for a in alice],
            "bob_setting": _angle(p.get("bob_setting", 0.0), "protocol.bob_setting"),
            "pairs_per_bit": p.get("pairs_per_bit", 200),
            "decode_threshold": p.get("decode_threshold"),
        }
        if isinstance(proto["pairs_per_bit"], bool) or not isinstance(proto["pairs_per_bit"], int) or proto["pairs_per_bit"] < 1:
            raise ConfigError("protocol.pairs_per_bit must be a positive integer")
        if "bits" in p:
            bits = p["bits"]
            if not isinstance(bits, str) or not bits or set(bits) - {"0", "1"}:
                raise ConfigError("protocol.bits must be a non-empty string of 0/1")
            proto["bits"] = bits
        else:
            proto["n_bits"] = int(p.get("n_bits", 64))
        if "sweep" in p:
            sw = p["sweep"]
            proto["sweep"] = {
                "N_values": [int(v) for v in _require(sw, "N_values", "protocol.sweep")],
                "trials": int(sw.get("trials", 10)),
                "bits_per_trial": int(sw.get("bits_per_trial", 64)),
            }
        out["protocol"] = proto
    return out


# Commands


def _run_chsh(cfg: dict[str, Any]) -> tuple[dict[str, Any], dict[str, str]]:
    source = source_from_json(cfg["source"])
    geo = cfg["geometry"]
    if "directions" in geo:
        d = geo["directions"]
        settings = tuple(Direction(d[k]) for k in ("I", "I_prime", "J", "J_prime"))
    else:
        settings = build_theorem2prime_layout(geo["start"]).chsh_settings()
    est = chsh(source, settings, _mode(cfg), geo["sign_pattern"])
    res = est.to_json()
    res["violates_bell_bound"] = abs(est.s_value) - est.half_width > 2
    return res, {}


def _run_chain(cfg):
    source = source_from_json(cfg["source"])
    chain = build_chain(cfg["geometry"]["n"], cfg["geometry"]["start"])
    stats = chain_stats(source, chain, _mode(cfg))
    res = stats.to_json()
    res["quantum_delta"] = quantum_chain_slack(chain.n)
    return res, {"csv": stats.to_csv()}


def _run_equiprob(cfg):
    source = source_from_json(cfg["source"])
    n = cfg["geometry"]["n"]
    rows = []
    for k in n if isinstance(n, list) else [n]:
        check = equiprobability_check(source, k, cfg["geometry"]["start"], _mode(cfg))
        row = check.to_json()
        row["quantum_delta"] = quantum_chain_slack(k)
        rows.append(row)
    return {"chains": rows}, {}


def _run_certify(cfg):
    source = source_from_json(cfg["source"])
    layout = build_theorem2prime_layout(cfg["geometry"]["start"])
    report = thm2_certify(source, layout, _mode(cfg))
    res = report.to_json()
    res["layout"] = layout.to_json()
    return res, {}


def _run_signal(cfg):
    source = source_from_json(cfg["source"])
    p = cfg["protocol"]
    config = ProtocolConfig(
        source,
        (Direction(p["alice_settings"][0]), Direction(p["alice_settings"][1])),
        Direction(p["bob_setting"]),
        p["pairs_per_bit"],
        p["decode_threshold"],
    )
    bits = p["bits"] if "bits" in p else random_bits(p["n_bits"], stream(cfg["seed"], "message"))
    report = run_protocol(config, bits, cfg["seed"])
    res = report.to_json()
    res["expected_bob_marginals"] = list(config.expected_marginals())
    extra = {}
    if "sweep" in p:
        sw = p["sweep"]
        rows = channel_sweep(config, sw["N_values"], sw["trials"], cfg["seed"], sw["bits_per_trial"])
        extra["csv"] = sweep_to_csv(rows)
    return res, extra


def _run_schulman_check(cfg):
    sch = cfg["schulman"]
    thetas = np.linspace(0.0, math.pi, sch["theta_points"])
    rows, worst = [], 0.0
    for g in sch["gamma_s"]:
        for th in thetas:
            closed = schulman_ratio(float(th), g, "closed_form")
            trunc = schulman_ratio(float(th), g, "truncated", sch["truncation"])
            rel = abs(trunc - closed) / closed
            worst = max(worst, rel)
            rows.append({"gamma_s": g, "theta": float(th), "closed_form": closed, "truncated": trunc, "rel_error": rel})
    born_exact = all(
        schulman_single_probs(float(th), 0.0) == (math.cos(th / 2) ** 2, math.sin(th / 2) ** 2) for th in thetas
    )
    passed = worst < sch["tolerance"] and born_exact
    return {"grid": rows, "max_rel_error": worst, "born_limit_exact": born_exact, "passed": passed}, {}


_RUNNERS = {
    "chsh": _run_chsh,
    "chain": _run_chain,
    "equiprob": _run_equiprob,
    "certify": _run_certify,
    "signal": _run_signal,
    "schulman-check": _run_schulman_check,
}


def run(command: str, config: Mapping[str, Any], output_dir: str | Path = ".", seed: int | None = None,
        require_certified: bool = False) -> tuple[int, dict[str, Any]]:
    """Run ``command``; returns ``(exit_status, report)`` after writing the report files."""
    try:
        resolved = resolve_config(command, config, seed)
    except (TypeError, KeyError, AttributeError) as exc:
        raise ConfigError(f"malformed config: {exc!r}") from exc
    results, extra = _RUNNERS[command](resolved)
    report = {
        "artifact": {"name": "bell-hv-lab", "version": __version__},
        "command": command,
        "config": resolved,
        "results": results,
    }
    out = Path(output_dir)
    stem = command.replace("-", "_")
    emit_report(report, "json", out / f"{stem}.json")
    if "csv" in extra:
        emit_report(extra["csv"], "csv", out / ("sweep.csv" if command == "signal" else f"{stem}.csv"))
    status = EXIT_OK
    if command == "schulman-check" and not results["passed"]:
        status = EXIT_CHECK_FAILED
    if command == "certify" and require_certified and results["verdict"] != CERTIFIED:
        status = EXIT_NOT_CERTIFIED
    return status, report


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bell-hv-lab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed (unsigned 64-bit)")
    parser.add_argument("--output-dir", default=".", help="directory for report files")
    parser.add_argument("--require-certified", action="store_true",
                        help="exit 3 unless certification reports signalling_certified")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK

    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"bell-hv-lab: cannot read config {args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        status, report = run(args.command, doc, args.output_dir, args.seed, args.require_certified)
    except NoChannelError as exc:
        print(f"bell-hv-lab: no channel: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, ModelError) as exc:
        print(f"bell-hv-lab: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"bell-hv-lab: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.command == "certify":
        res = report["results"]
        print(f"verdict={res['verdict']} epsilon_hat={res['epsilon_hat']:.6g} "
              f"gamma_hat={res['gamma_hat']:.6g} ratio={res['ratio']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
