import json
import math
import subprocess
import sys

import pytest

from bell_hv_lab import __version__
from bell_hv_lab.cli import ConfigError, canonical_json, emit_report, main, resolve_config, run

WHARTON_UNIFORM = {"model": "wharton_pair", "weights": [0.25, 0.25, 0.25, 0.25], "spin_relation": "parallel", "gamma_s": 0.0}
QUANTUM = {"model": "quantum_correlated", "correlation_sign": 1}
HOMOGENEOUS = {"model": "wharton_pair", "weights": [1, 0, 0, 0]}

CONFIGS = {
    "chsh": {"source": WHARTON_UNIFORM, "mode": {"kind": "mc", "n_samples": 20000}, "seed": 5},
    "chain": {"source": QUANTUM, "geometry": {"n": 4, "start": 0.3}, "mode": {"kind": "mc", "n_samples": 5000}, "seed": 6},
    "equiprob": {"source": HOMOGENEOUS, "geometry": {"n": [2, 6]}, "seed": 7},
    "certify": {"source": WHARTON_UNIFORM, "mode": {"kind": "mc", "n_samples": 200000}, "seed": 8},
    "signal": {"source": HOMOGENEOUS, "protocol": {"n_bits": 16, "pairs_per_bit": 50, "sweep": {"N_values": [1, 5], "trials": 2}}, "seed": 9},
    "schulman-check": {"schulman": {"gamma_s": [0.1], "theta_points": 5, "truncation": 1000, "tolerance": 1e-3}},
}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_canonical_json_format():
    text = canonical_json({"b": 1.0, "a": [0.1, 2, None, True], "c": {"z": -0.0, "y": 1e-300}})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "0.10000000000000001" in text
    assert '"b": 1.0' in text and "-0.0" in text and "1e-300" in text
    assert json.loads(text)["c"]["y"] == 1e-300
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_emit_report_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_report({}, "xml", tmp_path / "r.xml")
    with pytest.raises(TypeError):
        emit_report({"a": 1}, "csv", tmp_path / "r.csv")
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_report({"a": 1}, "json", blocker / "sub" / "r.json")


@pytest.mark.parametrize("command", sorted(CONFIGS))
def test_every_command_is_byte_deterministic(tmp_path, command):
    cfg = write(tmp_path, CONFIGS[command])
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main([command, "--config", cfg, "--output-dir", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    # re-running from the embedded resolved config reproduces the report
    stem = command.replace("-", "_")
    report = json.loads(outs[0][f"{stem}.json"])
    cfg2 = write(tmp_path, report["config"], "embedded.json")
    out = tmp_path / "run_embedded"
    assert main([command, "--config", cfg2, "--output-dir", str(out)]) == 0
    assert {p.name: p.read_bytes() for p in sorted(out.iterdir())} == outs[0]
    assert report["artifact"]["version"] == __version__
    assert isinstance(report["config"]["seed"], int)


def test_certify_report_content(tmp_path):
    status, report = run("certify", {"source": WHARTON_UNIFORM}, tmp_path)
    assert status == 0
    res = report["results"]
    assert res["verdict"] == "signalling_certified"
    assert res["ratio"] == pytest.approx(1.7293, abs=1e-4)
    assert res["layout"]["chsh_pairs"][0] == ["A0", "B1"]


def test_require_certified_exit_codes(tmp_path):
    ok = write(tmp_path, {"source": WHARTON_UNIFORM}, "ok.json")
    assert main(["certify", "--config", ok, "--output-dir", str(tmp_path), "--require-certified"]) == 0
    bad = write(tmp_path, {"source": QUANTUM}, "bad.json")
    assert main(["certify", "--config", bad, "--output-dir", str(tmp_path), "--require-certified"]) == 3
    assert main(["certify", "--config", bad, "--output-dir", str(tmp_path)]) == 0


def test_chain_writes_csv(tmp_path):
    run("chain", CONFIGS["chain"], tmp_path)
    lines = (tmp_path / "chain.csv").read_text().splitlines()
    assert lines[0] == "link_index,side_pair,angle_rad,correlation,half_width"
    assert len(lines) == 9


def test_signal_quantum_source_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, {"source": QUANTUM})
    assert main(["signal", "--config", cfg, "--output-dir", str(tmp_path)]) == 2
    assert "no channel" in capsys.readouterr().err


def test_signal_explicit_bits(tmp_path):
    _, report = run("signal", {"source": HOMOGENEOUS, "protocol": {"bits": "1100101"}}, tmp_path)
    assert report["results"]["decoded_bits"] == "1100101"


def test_seed_override(tmp_path):
    cfg = write(tmp_path, CONFIGS["chsh"])
    main(["chsh", "--config", cfg, "--output-dir", str(tmp_path / "a"), "--seed", "123"])
    report = json.loads((tmp_path / "a" / "chsh.json").read_text())
    assert report["config"]["seed"] == 123


def test_schulman_check_exit_status(tmp_path):
    loose = write(tmp_path, CONFIGS["schulman-check"], "loose.json")
    assert main(["schulman-check", "--config", loose, "--output-dir", str(tmp_path)]) == 0
    strict = dict(CONFIGS["schulman-check"], schulman={"gamma_s": [0.1], "theta_points": 5, "truncation": 1000, "tolerance": 1e-9})
    assert main(["schulman-check", "--config", write(tmp_path, strict, "strict.json"), "--output-dir", str(tmp_path)]) == 1


@pytest.mark.parametrize(
    "doc",
    [
        {"source": {"model": "wharton_pair", "weights": [0.3, 0.3, 0.3, 0.3]}},
        {"source": {"model": "wharton_pair", "weights": [0.25, 0.25, 0.25, 0.25 + 2e-9]}},
        {"source": QUANTUM, "mode": {"kind": "mc", "n_samples": 100, "confidence": 1.0}},
        {"source": QUANTUM, "mode": {"kind": "mc", "n_samples": 100, "confidence": 0}},
        {"source": QUANTUM, "mode": {"kind": "mc", "n_samples": 0}},
        {"source": QUANTUM, "mode": {"kind": "bayes"}},
        {"source": {"model": "pilot_wave"}},
        {"source": QUANTUM, "seed": -1},
        {"source": QUANTUM, "seed": 2**64},
        {"source": QUANTUM, "geometry": {"n": 0}},
        {"mode": {"kind": "exact"}},
        {"source": QUANTUM, "command": "signal"},
        {"source": QUANTUM, "geometry": 5},
        {"source": QUANTUM, "mode": {"kind": "mc", "n_samples": "many"}},
        ["not", "an", "object"],
    ],
)
def test_validation_errors_exit_2(tmp_path, doc):
    cfg = write(tmp_path, doc)
    assert main(["chain", "--config", cfg, "--output-dir", str(tmp_path)]) == 2


def test_weights_within_tolerance_accepted():
    cfg = resolve_config("chain", {"source": {"model": "wharton_pair", "weights": [0.25, 0.25, 0.25, 0.25 + 5e-10]}})
    assert math.fsum(cfg["source"]["weights"]) == pytest.approx(1.0, abs=1e-15)


def test_unreadable_config_and_unknown_command(tmp_path):
    assert main(["chain", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["chain", "--config", str(tmp_path / "broken.json")]) == 2
    assert main(["teleport", "--config", str(tmp_path / "broken.json")]) == 2
    with pytest.raises(ConfigError):
        resolve_config("teleport", {})


def test_chsh_explicit_directions(tmp_path):
    doc = {"source": QUANTUM, "geometry": {"directions": {"I": 0.0, "I_prime": math.pi / 2, "J": math.pi / 4,
                                                           "J_prime": 3 * math.pi / 4},
                                         "sign_pattern": [1, 1, -1, 1]}}
    _, report = run("chsh", doc, tmp_path)
    assert report["results"]["s_value"] == pytest.approx(2 * math.sqrt(2))
    assert report["results"]["violates_bell_bound"]


def test_console_script(tmp_path):
    cfg = write(tmp_path, {"source": WHARTON_UNIFORM})
    proc = subprocess.run([sys.executable, "-m", "bell_hv_lab.cli", "certify", "--config", cfg, "--output-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verdict=signalling_certified" in proc.stdout
