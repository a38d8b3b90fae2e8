import numpy as np
import pytest

from lamina.errors import ValidationError
from lamina.fields import Field, Grid
from lamina.snapshots import read_field, snapshot_name, write_field


def test_snapshot_keeps_grid_and_data(tmp_path):
    grid = Grid.graded(8, 4, 10, 2.0, 0.05, max_ratio=1.3)
    data = np.random.default_rng(0).standard_normal((3,) + grid.shape)
    path = write_field(tmp_path / snapshot_name(12), Field(grid, data, time=0.25), note="velocity")
    assert path.name == "u_000012.lamf"
    back = read_field(path)
    assert back.grid.same_as(grid)
    assert back.time == 0.25
    assert np.array_equal(back.data, data)
    sidecar = path.with_suffix(".txt").read_text()
    assert "shape 8 4 10" in sidecar
    assert "note velocity" in sidecar


def test_corrupt_snapshots(tmp_path):
    grid = Grid.uniform(4, 4, 4, 1.0)
    path = write_field(tmp_path / "p.lamf", Field(grid, np.zeros(grid.shape)))
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ValidationError, match="truncated"):
        read_field(path)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValidationError):
        read_field(path)
