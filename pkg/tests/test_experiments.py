import pytest

from sociable.config import preset
from sociable.experiments import DEFAULT_SWEEP, format_summary, run_comparison, run_sweep, spearman

SMALL = dict(vehicle_count=30, duration=60.0, lane_length=400.0, event_start=5.0, event_duration=40.0)


def test_zero_vehicle_comparison_is_empty():
    cmp = run_comparison(preset("LD", vehicle_count=0))
    assert cmp.sociable.epo == cmp.flooding.epo == 0
    assert cmp.epo_reduction_pct is None and cmp.ngm_equal


def test_ld_comparison_summary():
    cmp = run_comparison(preset("LD", seed=1))
    s = cmp.summary()
    assert s["epo_reduction_pct"] > 0
    assert s["ncv_max_sociable"] <= s["ncv_max_flooding"]
    assert cmp.ngm_equal
    assert "epo_reduction_pct" in format_summary(s)


def test_comparison_writes_paired_files(tmp_path):
    cmp = run_comparison(preset("LD", **SMALL))
    soc, flood = cmp.write(tmp_path)
    assert soc.name == "sociable_seed1.csv" and flood.name == "flooding_seed1.csv"


def test_default_sweep_has_nine_rows():
    assert DEFAULT_SWEEP == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    report = run_sweep(preset("LD", **SMALL))
    assert [r.w_ec for r in report.rows] == list(DEFAULT_SWEEP)
    assert report.csv().count("\n") == 10


def test_single_value_and_pure_gateway_weighting():
    report = run_sweep(preset("LD", **SMALL), [1.0])
    assert len(report.rows) == 1 and report.rows[0].w_ec == 1.0


@pytest.mark.parametrize("values", [[1.5], [-0.1], []])
def test_invalid_sweep_values_rejected(values):
    with pytest.raises(ValueError):
        run_sweep(preset("LD", **SMALL), values)


def test_spearman_helper():
    assert spearman([1, 2, 3], [3.0, 2.0, 1.0]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3], [1.0, None, 5.0]) == pytest.approx(1.0)
    assert spearman([1, 2], [1.0, 1.0]) is None
    assert spearman([1, 2], [None, None]) is None
