from __future__ import annotations
import json

import pytest

from sprlab.app.cli import main
from sprlab.core.config import build_config, cli_overrides
from sprlab.core.errors import ChecksumMismatch, VersionMismatch
from sprlab.domain.group import enumerate_orbit
from sprlab.infrastructure.orbit_cache import HEADER, OrbitCache
from sprlab.infrastructure.reports import write_csv

PARABOLIC = """\
[group]
catalog = "cyclic_parabolic"
params = { k = 1.0 }

[enumeration]
R_max = 12.0

[exponent]
window = [4.0, 12.0]

[run]
log_level = "WARNING"
"""

SCHOTTKY = """\
[group]
catalog = "schottky"
params = { L = 3.0 }

[enumeration]
R_max = 10.0

[exponent]
window = [6.0, 10.0]

[run]
log_level = "WARNING"
"""


def _write(tmp_path, name: str, text: str):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def _run(cmd: str, cfg: str, out, cache, *extra: str) -> int:
    return main([cmd, cfg, "--out", str(out), "--cache", str(cache), *extra])


# -------------------- caché de órbita -------------------- #
def test_cache_round_trip(tmp_path, schottky):
    orbit = enumerate_orbit(schottky, 7.0)
    cache = OrbitCache(tmp_path / "o.orbit")
    assert not cache.exists and cache.read_key() is None
    cache.store(orbit, "k1")
    assert cache.read_key() == "k1"
    key, back = cache.load()
    assert key == "k1"
    assert back == orbit


def test_truncated_cache_is_rejected(tmp_path, schottky):
    path = tmp_path / "o.orbit"
    OrbitCache(path).store(enumerate_orbit(schottky, 7.0), "k1")
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(lines[:-3]) + "\n", encoding="utf-8")
    with pytest.raises(ChecksumMismatch):
        OrbitCache(path).load()


def test_tampered_cache_is_rejected(tmp_path, schottky):
    path = tmp_path / "o.orbit"
    OrbitCache(path).store(enumerate_orbit(schottky, 7.0), "k1")
    text = path.read_text(encoding="utf-8").replace("\n1;", "\n2;", 1)
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ChecksumMismatch):
        OrbitCache(path).load()


def test_unknown_header_is_rejected(tmp_path):
    path = tmp_path / "o.orbit"
    path.write_text("sprlab-orbit v0\n# key=x\n", encoding="utf-8")
    with pytest.raises(VersionMismatch):
        OrbitCache(path).read_key()
    with pytest.raises(VersionMismatch):
        OrbitCache(path).load()
    assert HEADER.endswith("v1")


def test_csv_cells_are_exact(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b", "c"], [[0.1, True, None]])
    assert path.read_text(encoding="utf-8") == "a;b;c\n0.1;true;\n"


# -------------------- CLI -------------------- #
def test_group_validate_writes_outputs(tmp_path):
    cfg = _write(tmp_path, "schottky.toml", SCHOTTKY)
    out = tmp_path / "out"
    assert _run("group-validate", cfg, out, tmp_path / "c.orbit") == 0
    rows = (out / "group.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0].startswith("letter;kind;")
    assert len(rows) == 5
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "group-validate"
    assert "group.csv" in manifest["outputs"]
    assert len(manifest["config_hash"]) == 64


def test_exponent_reuses_cache_and_is_reproducible(tmp_path):
    cfg = _write(tmp_path, "parabolic.toml", PARABOLIC)
    cache = tmp_path / "p.orbit"
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run("exponent", cfg, a, cache) == 0
    assert cache.is_file()
    assert _run("exponent", cfg, b, cache) == 0

    first = json.loads((a / "manifest.json").read_text(encoding="utf-8"))
    second = json.loads((b / "manifest.json").read_text(encoding="utf-8"))
    assert first["cache_hits"] == []
    assert second["cache_hits"] == ["p.orbit"]
    assert first["config_hash"] == second["config_hash"]
    for name in ("exponent.csv", "exponent_summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()

    header, values = (a / "exponent_summary.csv").read_text(encoding="utf-8").splitlines()
    summary = dict(zip(header.split(";"), values.split(";")))
    assert float(summary["delta_hat"]) == pytest.approx(0.5, abs=0.05)
    assert summary["collisions"] == "0"


def test_config_hash_ignores_run_location():
    data = {"group": {"catalog": "schottky", "params": {"L": 3.0}}}
    base = build_config(data)
    moved = build_config(data, cli_overrides(threads=4, out="elsewhere", cache="x.orbit"))
    assert moved.run.out == "elsewhere" and moved.run.threads == 4
    assert moved.config_hash() == base.config_hash()
    assert build_config(data, cli_overrides(seed=11)).config_hash() != base.config_hash()


def test_shadows_fills_requested_samples(tmp_path):
    cfg = _write(tmp_path, "schottky.toml",
                 SCHOTTKY.replace("R_max = 10.0", "R_max = 14.0")
                 .replace("window = [6.0, 10.0]", "window = [6.0, 14.0]"))
    out = tmp_path / "out"
    assert _run("shadows", cfg, out, tmp_path / "c.orbit") == 0
    header, values = (out / "shadows_summary.csv").read_text(encoding="utf-8").splitlines()
    summary = dict(zip(header.split(";"), values.split(";")))
    assert int(summary["samples"]) == 50
    assert float(summary["band_constant"]) <= 20.0


def test_unknown_catalog_exits_with_validation_code(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.toml", '[group]\ncatalog = "nope"\n')
    out = tmp_path / "out"
    assert _run("group-validate", cfg, out, tmp_path / "c.orbit") == 2
    record = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert record["error"] == "ConfigError"
    assert record["exit"] == 2
    assert "ConfigError" in capsys.readouterr().err


def test_invalid_config_exits_with_validation_code(tmp_path):
    cfg = _write(tmp_path, "bad.toml", SCHOTTKY.replace("window = [6.0, 10.0]",
                                                        "window = [6.0, 30.0]"))
    assert _run("exponent", cfg, tmp_path / "out", tmp_path / "c.orbit") == 2


def test_budget_exceeded_exits_with_budget_code(tmp_path):
    cfg = _write(tmp_path, "schottky.toml", SCHOTTKY)
    out = tmp_path / "out"
    assert _run("exponent", cfg, out, tmp_path / "c.orbit", "--budget", "10") == 3
    record = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert record["error"] == "BudgetExceeded"


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "spr-lab" in capsys.readouterr().out
