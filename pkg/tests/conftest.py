import struct

import numpy as np
import pytest

from pixelps.brdf import MERL_SHAPE, MerlTable


def make_merl_data(seed=7, negative_fraction=0.02):
    """Deterministic synthetic table in the MERL layout, smooth enough to
    be physically plausible, with a sprinkling of negative (invalid) bins.
    """
    rng = np.random.default_rng(seed)
    th = np.linspace(0, 1, MERL_SHAPE[0])[None, :, None, None]
    td = np.linspace(0, 1, MERL_SHAPE[1])[None, None, :, None]
    base = rng.uniform(50.0, 400.0, (3, 1, 1, 1))
    data = base * (0.2 + np.exp(-6.0 * th) + 0.3 * td)
    data = np.broadcast_to(data, (3,) + MERL_SHAPE).copy()
    data += rng.normal(0.0, 1.0, data.shape)
    flat = data.reshape(-1)
    bad = rng.choice(flat.size, int(negative_fraction * flat.size), replace=False)
    flat[bad] = -1.0
    return data


def write_merl_file(path, data):
    with open(path, "wb") as fh:
        fh.write(struct.pack("<3i", *MERL_SHAPE))
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


@pytest.fixture(scope="session")
def merl_file(tmp_path_factory):
    data = make_merl_data()
    path = tmp_path_factory.mktemp("merl") / "synthetic-blue.binary"
    write_merl_file(path, data)
    return path, data


@pytest.fixture(scope="session")
def merl_dir(tmp_path_factory):
    """Directory of three small synthetic tables, enough for mixing tests."""
    directory = tmp_path_factory.mktemp("merl_lib")
    for i, name in enumerate(["synth-a", "synth-b", "synth-c"]):
        write_merl_file(directory / f"{name}.binary", make_merl_data(seed=10 + i))
    return directory


@pytest.fixture(scope="session")
def merl_table(merl_file):
    path, data = merl_file
    return MerlTable("synthetic-blue", data)
