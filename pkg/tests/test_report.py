import pytest

from exprlab.experiments import ReTable, write_metrics_csv
from exprlab.report import (REPORT_COLUMNS, Y_FLOOR, collect_metrics,
                            svg_plot, write_report)


def seeded_table(res_by_seed, k=5, c=7):
    table = ReTable()
    for seed, re in res_by_seed.items():
        table.add(k, c, seed, re)
    return table


def demo_run(tmp_path):
    """Run dir with two models on one task, three seeds each."""
    run = tmp_path / "run"
    for model, base in (("mean", 0.01), ("sum", 1.0)):
        sub = run / model
        sub.mkdir(parents=True)
        table = ReTable()
        for seed in range(3):
            for k in (5, 6):
                for c in (5, 6):
                    table.add(k, c, seed, base * (1 + 0.1 * seed))
        write_metrics_csv(sub / "metrics.csv", table, "uc", model)
    return run


class TestCollect:
    def test_merges_by_task_and_model(self, tmp_path):
        run = demo_run(tmp_path)
        groups = collect_metrics(run)
        assert set(groups) == {("uc", "mean"), ("uc", "sum")}
        # 2 k values x 2 c values x 3 seeds
        assert len(groups[("uc", "mean")]) == 12

    def test_merges_split_files_for_one_model(self, tmp_path):
        # per-seed metrics files are the common layout for multi-seed runs
        for seed in range(2):
            write_metrics_csv(tmp_path / ("metrics_s%d.csv" % seed),
                              seeded_table({seed: 0.25}), "sv", "sum")
        groups = collect_metrics(tmp_path)
        table = groups[("sv", "sum")]
        assert len(table) == 2
        assert table.median() == 0.25

    def test_requires_metrics_files(self, tmp_path):
        with pytest.raises(ValueError, match="no metrics"):
            collect_metrics(tmp_path)


class TestSvgPlot:
    def test_identical_inputs_identical_bytes(self):
        series = [("mean", [(1, 1e-3), (2, 2e-3)]), ("sum", [(1, 0.5), (2, 1.5)])]
        a = svg_plot(series, "uc, k=5")
        b = svg_plot([(label, list(pts)) for label, pts in series], "uc, k=5")
        assert a == b
        assert a.startswith("<svg ") and a.endswith("</svg>\n")

    def test_zero_errors_clamp_to_floor(self):
        # a perfect model plots on the floor decade instead of crashing log10
        out = svg_plot([("mean", [(1, 0.0), (2, 0.0)])], "t")
        assert "1e-12" in out
        assert "nan" not in out and "inf" not in out

    def test_every_series_labeled(self):
        out = svg_plot([("alpha", [(1, 0.1)]), ("beta", [(1, 0.2)])], "t")
        assert ">alpha</text>" in out and ">beta</text>" in out
        assert out.count("<polyline") == 2

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="nothing to plot"):
            svg_plot([], "t")
        with pytest.raises(ValueError, match="nothing to plot"):
            svg_plot([("mean", [])], "t")


class TestWriteReport:
    def test_writes_csv_and_per_k_svgs(self, tmp_path):
        run = demo_run(tmp_path)
        out = tmp_path / "report"
        written = write_report(run, out)
        names = sorted(p.split("/")[-1] for p in written)
        assert names == ["re_uc.csv", "re_uc_k5.svg", "re_uc_k6.svg"]

    def test_aggregate_rows_hold_seed_median_and_mean(self, tmp_path):
        write_metrics_csv(tmp_path / "metrics.csv",
                          seeded_table({0: 0.1, 1: 0.2, 2: 0.6}), "uc", "mean")
        write_report(tmp_path, tmp_path / "rep", svg=False)
        lines = (tmp_path / "rep" / "re_uc.csv").read_text().splitlines()
        assert lines[0] == ",".join(REPORT_COLUMNS)
        assert lines[1] == "uc,mean,5,7,0.2,0.3"

    def test_ks_filter_limits_svgs(self, tmp_path):
        run = demo_run(tmp_path)
        written = write_report(run, tmp_path / "rep", ks=[6])
        names = [p.split("/")[-1] for p in written]
        assert "re_uc_k6.svg" in names
        assert "re_uc_k5.svg" not in names

    def test_svg_flag_off_writes_only_csv(self, tmp_path):
        run = demo_run(tmp_path)
        written = write_report(run, tmp_path / "rep", svg=False)
        assert [p.split("/")[-1] for p in written] == ["re_uc.csv"]

    def test_rerun_is_byte_stable(self, tmp_path):
        run = demo_run(tmp_path)
        write_report(run, tmp_path / "a")
        write_report(run, tmp_path / "b")
        for name in ("re_uc.csv", "re_uc_k5.svg"):
            assert ((tmp_path / "a" / name).read_bytes()
                    == (tmp_path / "b" / name).read_bytes())


def test_floor_is_below_any_plausible_error():
    assert Y_FLOOR <= 1e-12
