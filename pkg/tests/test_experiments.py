import numpy as np
import pytest

from ertrans.errors import InvalidParameterError
from ertrans.experiments import (
    SweepSpec,
    efficiency_vs_time,
    schedule_trace,
    sweep_alpha,
    sweep_protocol_time,
    sweep_temperature,
    write_csv,
)
from ertrans.protocol import ProtocolParams


BASE = ProtocolParams()


class TestSweepSpec:
    def test_empty_values(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(BASE, "alpha_over_G", ())

    def test_non_monotone(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(BASE, "alpha_over_G", (0.1, 0.3, 0.2))

    def test_unknown_parameter(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(BASE, "kappa3", (0.1, 0.2))

    def test_unknown_output(self):
        with pytest.raises(InvalidParameterError):
            SweepSpec(BASE, "alpha_over_G", (0.1,), outputs=("purity",))


@pytest.fixture(scope="module")
def rows():
    spec = SweepSpec(BASE, "alpha_over_G", (0.1, 0.245, 0.6))
    return sweep_alpha(spec)


class TestSweepAlpha:
    def test_rows_and_argmax(self, rows):
        table, best = rows
        assert len(table) == 3
        assert best == 0.245

    def test_provenance_embedded(self, rows):
        table, _ = rows
        for row in table:
            assert row["orientation"] == "reversed"
            assert row["dims"] == "3x6x3"
            assert "step_s" in row

    def test_metrics_present(self, rows):
        table, _ = rows
        for row in table:
            assert 0.0 <= row["efficiency"] <= 1.0
            assert 0.0 <= row["fidelity"] <= 1.0
            assert row["noise"] >= 0.0

    def test_parallel_equals_serial(self, rows):
        table, _ = rows
        spec2 = SweepSpec(BASE, "alpha_over_G", (0.1, 0.245, 0.6), workers=2)
        table2, _ = sweep_alpha(spec2)
        for a, b in zip(table, table2):
            assert a == b

    def test_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            sweep_alpha(SweepSpec(BASE, "alpha_over_G", (0.5, 2.0)))


class TestSweepProtocolTime:
    def test_optimum_near_one(self):
        spec = SweepSpec(BASE, "t_final_ratio", (0.1, 1.0, 2.0))
        rows, best = sweep_protocol_time(spec)
        assert best == 1.0
        by_r = {r["t_final_ratio"]: r["efficiency"] for r in rows}
        assert by_r[0.1] < by_r[1.0]


class TestSweepTemperature:
    def test_two_curves(self):
        spec = SweepSpec(BASE, "temperature_K", (0.010, 0.050, 0.150))
        curves = sweep_temperature(spec, (0.0008, 1.0))
        assert set(curves) == {0.0008, 1.0}
        for rows in curves.values():
            fid = [r["fidelity"] for r in rows]
            assert fid == sorted(fid, reverse=True)


class TestEfficiencyVsTime:
    def test_orderering_with_dephasing(self):
        curves = efficiency_vs_time(BASE, (0.0008, 1.0))
        _, _, low = curves[0.0008]
        _, _, high = curves[1.0]
        assert low > high
        times, n_opt, final = curves[0.0008]
        assert len(times) == len(n_opt)
        assert n_opt[-1] == pytest.approx(final, abs=1e-9)


class TestScheduleTrace:
    def test_normalization_residual(self):
        blocks = schedule_trace(2.0, [0.3, 0.7])
        for rows in blocks.values():
            resid = max(abs(r["normalization_residual"]) for r in rows)
            assert resid < 1e-12 * 4.0

    def test_larger_alpha_ramps_earlier(self):
        blocks = schedule_trace(1.0, [0.2, 0.8], t_final=10.0)

        def t_at_99(rows):
            for r in rows:
                if r["G1"] >= 0.99:
                    return r["t"]
            return np.inf

        assert t_at_99(blocks[0.8]) < t_at_99(blocks[0.2])

    def test_invalid(self):
        with pytest.raises(InvalidParameterError):
            schedule_trace(0.0, [0.1])
        with pytest.raises(InvalidParameterError):
            schedule_trace(1.0, [-0.1])


class TestWriteCsv:
    def test_metadata_and_rows(self, tmp_path):
        path = tmp_path / "out.csv"
        write_csv(path, {"tool": "x"}, ["a", "b"], [{"a": 1, "b": 2}])
        text = path.read_text().splitlines()
        assert text[0] == "# tool = x"
        assert text[1] == "a,b"
        assert text[2] == "1,2"

    def test_deterministic(self, tmp_path):
        rows = [{"a": i, "b": i * i} for i in range(5)]
        p1, p2 = tmp_path / "1.csv", tmp_path / "2.csv"
        write_csv(p1, {"k": "v"}, ["a", "b"], rows)
        write_csv(p2, {"k": "v"}, ["a", "b"], rows)
        assert p1.read_bytes() == p2.read_bytes()
