import asyncio

import numpy as np
import pytest

from kgsim.database import RunRegistry
from kgsim.experiments import RunConfig, RunManifest
from kgsim.persistence import (
    format_value,
    read_json,
    render_csv,
    render_gnuplot,
    write_csv,
    write_gnuplot,
    write_json,
    write_npz,
)


def test_format_value():
    assert format_value(None) == ""
    assert format_value(True) == "1"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(np.float64(2.0)) == "2"
    assert format_value(float("nan")) == "nan"
    assert format_value("critical") == "critical"


def test_render_csv_keeps_column_order():
    text = render_csv([{"b": 2.0, "a": 1.0}, {"a": None}], ["a", "b"])
    assert text == "a,b\n1,2\n,\n"
    assert render_csv([], ["p", "status"]) == "p,status\n"


def test_atomic_writers(tmp_path):
    async def scenario():
        csv_path = await write_csv(tmp_path / "out" / "series.csv", [{"t": 0.5}], ["t"])
        json_path = await write_json(tmp_path / "out" / "data.json", {"values": np.array([1.0, 2.0])})
        return csv_path, json_path, await read_json(json_path)

    csv_path, json_path, data = asyncio.run(scenario())
    assert csv_path.read_text() == "t\n0.5\n"
    assert data == {"values": [1.0, 2.0]}
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["data.json", "series.csv"]


def test_npz_writer(tmp_path):
    path = asyncio.run(write_npz(tmp_path / "snapshots.npz", t=np.array([0.0, 0.5])))
    with np.load(path) as data:
        np.testing.assert_array_equal(data["t"], [0.0, 0.5])
    assert [p.name for p in tmp_path.iterdir()] == ["snapshots.npz"]


def test_manifest_json(tmp_path):
    manifest = RunManifest.start("spectrum", RunConfig(k=4)).finish("ok", n_negative=1)
    path = asyncio.run(write_json(tmp_path / "manifest.json", manifest))
    data = asyncio.run(read_json(path))
    assert data["command"] == "spectrum"
    assert data["config"]["k"] == 4
    assert data["outputs"]["n_negative"] == 1


def test_gnuplot_script(tmp_path):
    text = render_gnuplot("timeseries.csv", "t", ["I", "distance"], "instability p=3")
    assert 'set multiplot layout 2,1 title "instability p=3"' in text
    assert 'plot "timeseries.csv" using "t":"distance" with lines title "distance"' in text
    assert "pngcairo" not in text
    path = asyncio.run(write_gnuplot(tmp_path / "plot.gp", "timeseries.csv", "t", ["I"], "run"))
    assert 'set output "plot.png"' in path.read_text()


@pytest.fixture
def registry(tmp_path):
    return RunRegistry(str(tmp_path / "runs.db"))


def _manifest(command, a):
    return RunManifest.start(command, RunConfig(a=a)).finish("ok").model_dump(mode="json")


def test_registry_roundtrip(registry):
    async def scenario():
        first = await registry.record_run(_manifest("groundstate", 0.01), "out/a")
        second = await registry.record_run(_manifest("evolve", 0.02), "out/b")
        return first, second, await registry.recent_runs(10)

    first, second, runs = asyncio.run(scenario())
    assert second > first
    assert [r["command"] for r in runs] == ["evolve", "groundstate"]
    assert runs[0]["out_dir"] == "out/b"


def test_registry_lookup_and_statistics(registry):
    manifest = _manifest("spectrum", 0.03)
    asyncio.run(registry.record_run(manifest, None))
    found = asyncio.run(registry.lookup(manifest["config_hash"][:8]))
    assert found["command"] == "spectrum"
    assert asyncio.run(registry.lookup("nothing")) is None
    stats = asyncio.run(registry.get_statistics())
    assert stats["total_runs"] == 1
    assert stats["by_command"] == {"spectrum": 1}
    assert stats["by_status"] == {"ok": 1}
