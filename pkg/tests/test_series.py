import numpy as np
import pytest

from laxforge.series import ChargeSeries, read_snapshot, write_snapshot


def _series():
    t = np.linspace(0.0, 1.0, 5)
    Q = np.array([1 + 1j, 1 + 1j, 1.1 + 1j, 1 + 1j, 1 + 1j])
    return ChargeSeries(t, {"Q1": Q}, {"Q1": np.zeros(5, dtype=complex)}, {"Q1": np.full(5, 1e-9)})


def test_csv_round_trip(tmp_path):
    path = str(tmp_path / "out" / "charges.csv")
    s = _series()
    s.write_csv(path)
    back = ChargeSeries.read_csv(path)
    assert back.names == ["Q1"]
    assert np.allclose(back.charges["Q1"], s.charges["Q1"])
    assert np.allclose(back.residuals["Q1"], 1e-9)


def test_csv_columns():
    cols = list(_series().to_frame().columns)
    assert cols == ["t", "Re_Q_Q1", "Im_Q_Q1", "Re_G_Q1", "Im_G_Q1", "res_Q1"]


def test_length_mismatch_rejected():
    with pytest.raises(ValueError):
        ChargeSeries(np.zeros(3), {"Q": np.zeros(4)})


def test_drift_and_summary():
    s = _series()
    assert s.drift("Q1") == pytest.approx(0.1 / abs(1 + 1j))
    assert "Q1" in s.summary()


def test_flows_stay_out_of_the_csv():
    s = _series()
    flows = ChargeSeries(s.times, s.charges, s.anomalies, s.residuals, {"Q1": np.full(5, 2e-3)})
    assert list(flows.to_frame().columns) == list(s.to_frame().columns)
    assert flows.flow_mismatch("Q1") == pytest.approx(2e-3)
    with pytest.raises(KeyError):
        s.flow_mismatch("Q1")
    with pytest.raises(ValueError):
        ChargeSeries(s.times, s.charges, flows={"Q1": np.zeros(4)})


def test_max_anomaly():
    s = _series()
    assert s.max_anomaly("Q1") == 0
    assert s.max_anomaly("missing") == 0
    s.anomalies["Q1"] = np.array([0, -3j, 1, 0, 0])
    assert s.max_anomaly("Q1") == pytest.approx(3.0)


def test_snapshot_round_trip(tmp_path):
    q = np.exp(1j * np.arange(64))
    r = -np.conj(q)
    path = write_snapshot(str(tmp_path / "snap.bin"), 64, 40.0, 2.5, q, r)
    N, L, t, q2, r2 = read_snapshot(path)
    assert (N, L, t) == (64, 40.0, 2.5)
    assert np.array_equal(q2, q) and np.array_equal(r2, r)


def test_snapshot_rejects_bad_lengths(tmp_path):
    with pytest.raises(ValueError):
        write_snapshot(str(tmp_path / "x.bin"), 64, 1.0, 0.0, np.zeros(10), np.zeros(64))
    path = tmp_path / "short.bin"
    path.write_bytes(b"\x00" * 8)
    with pytest.raises(ValueError):
        read_snapshot(str(path))
