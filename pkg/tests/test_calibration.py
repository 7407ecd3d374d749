import json

import pytest

from ncindex import __version__
from ncindex.calibration import ENV_VAR, compute_table, default_path, load_table, table_bytes, write_table
from ncindex.cocycles import odd_normalization_closed_form
from ncindex.exceptions import CalibrationError, ChecksumError


@pytest.fixture(scope="module")
def fresh():
    return compute_table()


def test_shipped_table_is_reproduced(fresh):
    assert table_bytes(fresh) == default_path().read_bytes()


def test_rerun_is_byte_identical(fresh):
    assert table_bytes(compute_table()) == table_bytes(fresh)


def test_table_contents(fresh):
    c = fresh.content
    assert c["version"] == __version__
    for n in ("1", "3", "5"):
        entry = c["odd_normalization"][n]
        assert float(entry["measured"]) == pytest.approx(float(odd_normalization_closed_form(int(n))))
    assert fresh.sign("pairing_vs_quadrature") == 1
    assert fresh.sign("toeplitz_vs_quadrature") == -1
    assert fresh.sign("flow_vs_pairing") == 1
    assert fresh.sign("berry_vs_kernel_index") == -1
    assert fresh.even_sign(0) == fresh.even_sign(2) == 1
    assert fresh.cm_constant == 1
    with pytest.raises(CalibrationError):
        fresh.odd_normalization(7)


def test_tampered_table_rejected(tmp_path, fresh):
    path = write_table(fresh, tmp_path / "cal.json")
    assert load_table(path).checksum == fresh.checksum
    doc = json.loads(path.read_text())
    doc["content"]["odd_normalization"]["1"]["measured"] = "2.6e-01"
    path.write_text(json.dumps(doc))
    with pytest.raises(ChecksumError):
        load_table(path)
    path.write_text("not json")
    with pytest.raises(ChecksumError):
        load_table(path)


def test_env_override(tmp_path, monkeypatch, fresh):
    path = write_table(fresh, tmp_path / "elsewhere.json")
    monkeypatch.setenv(ENV_VAR, str(path))
    assert default_path() == path
    assert load_table().checksum == fresh.checksum
