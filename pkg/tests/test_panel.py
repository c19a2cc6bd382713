"""Panel ingestion: date handling, cross-file validation, preprocessing
transforms, and the CSV round trip."""

import numpy as np
import pytest

from premia.panel import (
    PanelError,
    PreprocessOptions,
    asset_matrices,
    format_month,
    load_panel,
    parse_month,
    preprocess,
    save_panel,
)


def fixture_tables():
    """Editable row lists for a 2-asset, 5-month panel.

    aaa is observed every month 2001-01..2001-05, bbb only 02..04.
    Instruments and characteristics sit at the month before each return.
    """
    return {
        "returns": (
            ["asset_id", "date", "excess_return"],
            [
                ["aaa", "2001-01", "0.01"],
                ["aaa", "2001-02", "0.02"],
                ["aaa", "2001-03", "0.03"],
                ["aaa", "2001-04", "0.04"],
                ["aaa", "2001-05", "0.05"],
                ["bbb", "2001-02", "-0.01"],
                ["bbb", "2001-03", "-0.02"],
                ["bbb", "2001-04", "-0.03"],
            ],
        ),
        "factors": (
            ["date", "f1", "f2"],
            [
                ["2001-01", "0.1", "-0.1"],
                ["2001-02", "0.2", "-0.2"],
                ["2001-03", "0.3", "-0.3"],
                ["2001-04", "0.4", "-0.4"],
                ["2001-05", "0.5", "-0.5"],
            ],
        ),
        "instruments": (
            ["date", "z1"],
            [
                ["2000-12", "1.0"],
                ["2001-01", "2.0"],
                ["2001-02", "3.0"],
                ["2001-03", "4.0"],
                ["2001-04", "5.0"],
            ],
        ),
        "characteristics": (
            ["asset_id", "date", "c1", "c2"],
            [
                ["aaa", "2000-12", "5", "0.3"],
                ["aaa", "2001-01", "5", "0.6"],
                ["aaa", "2001-02", "5", "0.9"],
                ["aaa", "2001-03", "9", "1.2"],
                ["aaa", "2001-04", "9", "1.5"],
                ["bbb", "2001-01", "1", "0.4"],
                ["bbb", "2001-02", "5", "0.8"],
                ["bbb", "2001-03", "2", "1.0"],
            ],
        ),
    }


def write_files(tmp_path, tables):
    paths = {}
    for name, (header, rows) in tables.items():
        p = tmp_path / f"{name}.csv"
        lines = [",".join(header)] + [",".join(r) for r in rows]
        p.write_text("\n".join(lines) + "\n")
        paths[name] = str(p)
    return paths


@pytest.fixture
def panel_paths(tmp_path):
    return write_files(tmp_path, fixture_tables())


# ---------------------------------------------------------------------------
# month serials
# ---------------------------------------------------------------------------

class TestMonths:
    def test_parse_and_format(self):
        assert parse_month("1990-01") == 1990 * 12
        assert format_month(1990 * 12) == "1990-01"
        for s in (0, 11, 24013, 27_777):
            assert parse_month(format_month(s)) == s

    @pytest.mark.parametrize("bad", ["1990-13", "1990-00", "199-01",
                                     "1990/01", "jan 1990", "1990-1"])
    def test_rejects_malformed(self, bad):
        with pytest.raises(PanelError):
            parse_month(bad)


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------

class TestLoad:
    def test_alignment(self, panel_paths):
        panel = load_panel(panel_paths)
        assert panel.assets == ["aaa", "bbb"]
        assert panel.T == 5
        assert panel.date_labels() == ["2001-01", "2001-02", "2001-03",
                                       "2001-04", "2001-05"]
        assert panel.observed.tolist() == [
            [True] * 5, [False, True, True, True, False]]
        assert panel.T_i.tolist() == [5, 3]
        assert np.allclose(panel.returns[0], [0.01, 0.02, 0.03, 0.04, 0.05])
        assert np.isnan(panel.returns[1, 0]) and np.isnan(panel.returns[1, 4])
        # factor row t matches the return month, instrument row t is lagged
        assert np.allclose(panel.factors[:, 0], [0.1, 0.2, 0.3, 0.4, 0.5])
        assert np.allclose(panel.instruments[:, 0], [1, 2, 3, 4, 5])
        assert np.allclose(panel.characteristics[0, :, 0], [5, 5, 5, 9, 9])
        assert np.allclose(panel.characteristics[1, 1:4, 1], [0.4, 0.8, 1.0])
        assert np.isnan(panel.characteristics[1, 0]).all()

    def test_missing_path_key(self, panel_paths):
        del panel_paths["factors"]
        with pytest.raises(PanelError, match="factors"):
            load_panel(panel_paths)

    def test_file_not_found(self, panel_paths):
        panel_paths["returns"] = panel_paths["returns"] + ".nope"
        with pytest.raises(PanelError, match="not found"):
            load_panel(panel_paths)

    def test_header_only_file(self, tmp_path):
        tables = fixture_tables()
        tables["returns"] = (tables["returns"][0], [])
        with pytest.raises(PanelError, match="no rows"):
            load_panel(write_files(tmp_path, tables))

    def test_missing_column(self, tmp_path):
        tables = fixture_tables()
        header, rows = tables["returns"]
        tables["returns"] = (header[:2], [r[:2] for r in rows])
        with pytest.raises(PanelError, match="excess_return"):
            load_panel(write_files(tmp_path, tables))

    def test_non_numeric_value_reports_row(self, tmp_path):
        tables = fixture_tables()
        tables["returns"][1][5][2] = "oops"  # first bbb row, file line 7
        with pytest.raises(PanelError, match="row 7"):
            load_panel(write_files(tmp_path, tables))

    def test_duplicate_key_reports_row(self, tmp_path):
        tables = fixture_tables()
        tables["returns"][1].append(["aaa", "2001-02", "0.9"])
        with pytest.raises(PanelError, match="duplicate.*row 10"):
            load_panel(write_files(tmp_path, tables))

    def test_missing_factor_month(self, tmp_path):
        tables = fixture_tables()
        tables["factors"][1].pop()  # drop 2001-05
        with pytest.raises(PanelError, match="no factor row.*2001-05"):
            load_panel(write_files(tmp_path, tables))

    def test_missing_lagged_instrument(self, tmp_path):
        tables = fixture_tables()
        tables["instruments"][1].pop(0)  # drop 2000-12
        with pytest.raises(PanelError, match="2000-12"):
            load_panel(write_files(tmp_path, tables))

    def test_missing_characteristics_listed(self, tmp_path):
        tables = fixture_tables()
        header, rows = tables["characteristics"]
        tables["characteristics"] = (header,
                                     [r for r in rows if r[0] != "bbb"])
        with pytest.raises(PanelError) as err:
            load_panel(write_files(tmp_path, tables))
        msg = str(err.value)
        assert "3 observed return rows" in msg
        assert "(bbb, 2001-02) at returns row 7" in msg

    def test_gap_in_return_months(self, tmp_path):
        tables = fixture_tables()
        header, rows = tables["returns"]
        tables["returns"] = (header, [r for r in rows if r[1] != "2001-02"])
        with pytest.raises(PanelError, match="non-monthly gap"):
            load_panel(write_files(tmp_path, tables))

    def test_unsorted_factor_dates(self, tmp_path):
        tables = fixture_tables()
        rows = tables["factors"][1]
        rows[0], rows[1] = rows[1], rows[0]
        with pytest.raises(PanelError, match="strictly increasing"):
            load_panel(write_files(tmp_path, tables))

    def test_min_obs_flags_short_assets(self, panel_paths):
        panel = load_panel(panel_paths, min_obs=4)
        assert panel.short_assets == ["bbb"]
        assert panel.n_assets == 2  # flagged, not dropped


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------

class TestPreprocess:
    def test_rank_characteristics(self, panel_paths):
        panel = load_panel(panel_paths)
        opts = PreprocessOptions(standardize_instruments=False)
        with pytest.warns(UserWarning, match="single observed asset"):
            out = preprocess(panel, opts)
        # aaa: solo months 0.5, wins month 2 and 4, ties month 3
        assert np.allclose(out.characteristics[0, :, 0],
                           [0.5, 1.0, 0.5, 1.0, 0.5])
        assert np.allclose(out.characteristics[1, 1:4, 0], [0.0, 0.5, 0.0])
        assert np.isnan(out.characteristics[1, 0, 0])
        # c2 has no ties; bbb loses every shared month
        assert np.allclose(out.characteristics[1, 1:4, 1], [0.0, 0.0, 0.0])
        # input panel untouched
        assert np.allclose(panel.characteristics[0, :, 0], [5, 5, 5, 9, 9])

    def test_standardize_full_sample(self, panel_paths):
        panel = load_panel(panel_paths)
        opts = PreprocessOptions(rank_characteristics=False)
        out = preprocess(panel, opts)
        z = out.instruments[:, 0]
        assert abs(z.mean()) < 1e-14
        assert abs(z.std(ddof=0) - 1.0) < 1e-14

    def test_standardize_without_lookahead(self, panel_paths):
        panel = load_panel(panel_paths)
        opts = PreprocessOptions(rank_characteristics=False,
                                 train_end="2001-03")
        out = preprocess(panel, opts)
        raw = panel.instruments[:, 0]
        mu, sd = raw[:3].mean(), raw[:3].std(ddof=0)
        assert np.allclose(out.instruments[:, 0], (raw - mu) / sd)

    def test_constant_instrument_raises(self, tmp_path):
        tables = fixture_tables()
        for r in tables["instruments"][1][:3]:
            r[1] = "2.0"  # flat on the 2001-01..03 training window
        panel = load_panel(write_files(tmp_path, tables))
        opts = PreprocessOptions(rank_characteristics=False,
                                 train_end="2001-03")
        with pytest.raises(PanelError, match="constant on the training"):
            preprocess(panel, opts)

    def test_disabled_transforms_keep_data(self, panel_paths):
        panel = load_panel(panel_paths)
        out = preprocess(panel, PreprocessOptions(
            rank_characteristics=False, standardize_instruments=False))
        assert np.array_equal(out.instruments, panel.instruments)
        assert np.array_equal(out.characteristics, panel.characteristics,
                              equal_nan=True)

    def test_train_mask_bounds(self, panel_paths):
        panel = load_panel(panel_paths)
        assert panel.train_mask("2001-02").tolist() == [True, True, False,
                                                        False, False]
        with pytest.raises(PanelError, match="empty train or test"):
            panel.train_mask("2000-12")
        with pytest.raises(PanelError, match="empty train or test"):
            panel.train_mask("2001-05")


# ---------------------------------------------------------------------------
# extraction and round trip
# ---------------------------------------------------------------------------

class TestRoundTrip:
    def test_asset_matrices(self, panel_paths):
        panel = load_panel(panel_paths)
        r, obs, F, Z, Zi = asset_matrices(panel, "bbb")
        r2, obs2, _, _, Zi2 = asset_matrices(panel, 1)
        assert np.array_equal(obs, panel.observed[1])
        assert np.array_equal(r, r2, equal_nan=True)
        assert np.array_equal(Zi, Zi2, equal_nan=True)
        assert F.shape == (5, 2) and Z.shape == (5, 1) and Zi.shape == (5, 2)

    def test_save_load_is_lossless(self, panel_paths, tmp_path):
        panel = preprocess(load_panel(panel_paths),
                           PreprocessOptions(rank_characteristics=False))
        out_dir = tmp_path / "copy"
        paths = save_panel(panel, str(out_dir))
        again = load_panel(paths)
        assert again.assets == panel.assets
        assert np.array_equal(again.months, panel.months)
        assert np.array_equal(again.observed, panel.observed)
        assert np.array_equal(again.returns, panel.returns, equal_nan=True)
        assert np.array_equal(again.factors, panel.factors)
        assert np.array_equal(again.instruments, panel.instruments)
        assert np.array_equal(again.characteristics, panel.characteristics,
                              equal_nan=True)
        assert again.characteristic_names == panel.characteristic_names

    def test_custom_column_bindings(self, panel_paths, tmp_path):
        bindings = {"asset": "permno", "date": "month", "ret": "xret"}
        panel = load_panel(panel_paths)
        paths = save_panel(panel, str(tmp_path / "alt"), bindings=bindings)
        again = load_panel(paths, bindings=bindings)
        assert np.array_equal(again.returns, panel.returns, equal_nan=True)
        with pytest.raises(PanelError, match="missing columns"):
            load_panel(paths)  # default names no longer present
