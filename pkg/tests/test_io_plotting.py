import numpy as np
import pytest

from csmetric.channels import AWGNChannel, PoissonChannel
from csmetric.gamp import run_gamp
from csmetric.io import (load_estimate, load_gamp_result, load_instance, prior_from_fields, read_table, save_estimate,
                         save_gamp_result, save_instance, write_table)
from csmetric.model import make_instance
from csmetric.plotting import Axes, Series, emit_plot
from csmetric.priors import sparse_gaussian, sparse_weibull


@pytest.mark.parametrize("prior,channel", [(sparse_gaussian(), AWGNChannel(3e-4)), (sparse_weibull(), PoissonChannel(100))])
def test_instance_round_trip(tmp_path, prior, channel):
    inst = make_instance(prior, channel, 50, 20, 4)
    save_instance(inst, tmp_path / "inst")
    back = load_instance(tmp_path / "inst")
    for f in ("x", "phi", "w", "y"):
        assert np.array_equal(getattr(inst, f), getattr(back, f))
    assert back.prior == prior and back.channel == channel
    head, _, _ = read_table(tmp_path / "inst" / "phi.csv", has_columns=False)
    assert head["n"] == "50" and head["m"] == "20" and head["seed"] == "4"


def test_instance_shape_check(tmp_path):
    inst = make_instance(sparse_gaussian(), AWGNChannel(1e-3), 10, 4, 0)
    save_instance(inst, tmp_path)
    text = (tmp_path / "phi.csv").read_text().splitlines()
    (tmp_path / "phi.csv").write_text("\n".join(text[:-1]) + "\n")
    with pytest.raises(ValueError):
        load_instance(tmp_path)


def test_gamp_result_round_trip(tmp_path):
    inst = make_instance(sparse_gaussian(), AWGNChannel(3e-4), 200, 80, 1)
    res = run_gamp(inst)
    save_gamp_result(res, tmp_path / "g.csv", extra={"prior_p": 0.03})
    back = load_gamp_result(tmp_path / "g.csv")
    assert np.array_equal(back.q, res.q) and np.array_equal(back.x_var, res.x_var)
    assert back.mu == res.mu and back.mu_trajectory == res.mu_trajectory
    _, cols, _ = read_table(tmp_path / "g.csv")
    assert cols == ["index", "q", "x_mmse", "x_var"]


def test_estimate_round_trip(tmp_path):
    save_estimate([0.0, 1.0, 1.0], tmp_path / "b.csv", "support", binary=True)
    head, vals = load_estimate(tmp_path / "b.csv")
    assert head["metric"] == "support" and list(vals) == [0, 1, 1]
    assert (tmp_path / "b.csv").read_text().splitlines()[1] == "index,bhat"


def test_prior_fields_errors():
    with pytest.raises(ValueError):
        prior_from_fields({"prior_p": "0.1", "slab": "cauchy"})


def test_write_table_is_stable(tmp_path):
    write_table(tmp_path / "a.csv", {"k": 0.1}, ["x"], [[1 / 3]])
    assert (tmp_path / "a.csv").read_text() == "# k = 0.1\nx\n0.3333333333333333\n"


def test_single_point_single_marker():
    svg = emit_plot(Axes(series=[Series("a", [0.3], [1.0])]))
    assert svg.count('class="marker"') == 1
    assert 'class="series"' not in svg


def test_two_identical_series():
    s = Series("a", [0.2, 0.3, 0.4], [3.0, 2.0, 1.0])
    svg = emit_plot(Axes(logy=True, series=[s, Series("b", s.x, s.y)]))
    lines = [line for line in svg.splitlines() if 'class="series"' in line]
    assert len(lines) == 2
    pts = [line.split('points="')[1].split('"')[0] for line in lines]
    assert pts[0] == pts[1]
    assert svg.count('class="legend"') == 2 and ">a<" in svg and ">b<" in svg


def test_plot_deterministic_and_error_bars():
    ax = Axes(title="t <&>", series=[Series("est", [1, 2], [0.5, 0.25], [0.1, 0.05])])
    assert emit_plot(ax) == emit_plot(ax)
    assert emit_plot(ax).count('class="errbar"') == 2
    assert "t &lt;&amp;&gt;" in emit_plot(ax)


def test_plot_errors():
    with pytest.raises(ValueError):
        emit_plot(Axes(series=[]))
    with pytest.raises(ValueError):
        emit_plot(Axes(series=[Series("a", [], [])]))
    with pytest.raises(ValueError):
        emit_plot(Axes(series=[Series("a", [1, 2], [1])]))
    with pytest.raises(ValueError):
        emit_plot(Axes(logy=True, series=[Series("a", [1], [0.0])]))
