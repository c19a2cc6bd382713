"""Monthly panel ingestion, validation, and preprocessing.

Input layout: returns and characteristics arrive in long form keyed by
(asset_id, date), factors and common instruments in wide form keyed by date.
Dates are ISO year-month strings.  A return observed at month t is matched
with the factor realization at t and the instrument/characteristic values at
t-1; the loader validates that every observed return row has all three.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

__all__ = [
    "PanelError",
    "PanelData",
    "PreprocessOptions",
    "load_panel",
    "preprocess",
    "save_panel",
    "asset_matrices",
    "parse_month",
    "format_month",
]

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")

DEFAULT_BINDINGS = {
    "asset": "asset_id",
    "date": "date",
    "ret": "excess_return",
}


class PanelError(ValueError):
    """Input data failed validation."""


def parse_month(text):
    """ISO year-month string -> month serial (year*12 + month-1)."""
    m = _MONTH_RE.match(str(text).strip())
    if not m:
        raise PanelError(f"bad date {text!r}; expected yyyy-mm")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise PanelError(f"bad month in date {text!r}")
    return year * 12 + month - 1


def format_month(serial):
    return f"{serial // 12:04d}-{serial % 12 + 1:02d}"


@dataclass
class PanelData:
    """Validated monthly panel on a common return timeline.

    months: (T,) month serials of the return dates.  Per-asset series are
    aligned to this timeline; instruments/characteristics are stored at their
    own observation month and shifted at design-build time.  factor rows
    cover months, instrument/characteristic rows cover months-1.
    """

    assets: list
    months: np.ndarray
    returns: np.ndarray          # (n, T), NaN when unobserved
    observed: np.ndarray         # (n, T) bool
    factors: np.ndarray          # (T, K) at month t
    instruments: np.ndarray      # (T, p) at month t-1
    characteristics: np.ndarray  # (n, T, q) at month t-1, NaN when absent
    factor_names: list
    instrument_names: list
    characteristic_names: list
    short_assets: list = field(default_factory=list)

    @property
    def n_assets(self):
        return len(self.assets)

    @property
    def T(self):
        return self.months.size

    @property
    def T_i(self):
        return self.observed.sum(axis=1)

    def date_labels(self):
        return [format_month(int(m)) for m in self.months]

    def train_mask(self, train_end):
        """Boolean mask of months <= train_end (ISO string or serial)."""
        if isinstance(train_end, str):
            train_end = parse_month(train_end)
        mask = self.months <= int(train_end)
        if not mask.any() or mask.all():
            raise PanelError(
                f"split boundary {format_month(int(train_end))} leaves an "
                "empty train or test window"
            )
        return mask


def _read_csv(path, label):
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise PanelError(f"{label} file not found: {path}")
    except Exception as exc:  # malformed csv
        raise PanelError(f"could not parse {label} file {path}: {exc}")
    if frame.empty:
        raise PanelError(f"{label} file {path} has no rows")
    return frame


def _require_columns(frame, cols, label):
    missing = [c for c in cols if c not in frame.columns]
    if missing:
        raise PanelError(f"{label} file is missing columns {missing}; "
                         f"found {list(frame.columns)}")


def _numeric(frame, cols, label):
    out = {}
    for c in cols:
        raw = frame[c].str.strip()
        vals = pd.to_numeric(raw, errors="coerce")
        bad = vals.isna() & (raw != "")
        if bad.any():
            row = int(bad.idxmax()) + 2  # header line + 1-based
            raise PanelError(f"{label} column {c!r} has a non-numeric value "
                             f"at row {row}")
        # pandas' fast parser can drop the last ulp; reconvert exactly
        out[c] = raw.replace("", "nan").to_numpy(dtype=float)
    return out


def _check_monthly(months, label):
    t = np.asarray(months)
    d = np.diff(t)
    if (d <= 0).any():
        row = int(np.argmax(d <= 0)) + 3
        raise PanelError(f"{label} dates are not strictly increasing at "
                         f"row {row}")
    if (d != 1).any():
        i = int(np.argmax(d != 1))
        raise PanelError(
            f"{label} series has a non-monthly gap between "
            f"{format_month(int(t[i]))} and {format_month(int(t[i + 1]))}"
        )


def _load_wide(path, label):
    frame = _read_csv(path, label)
    _require_columns(frame, ["date"], label)
    months = np.array([parse_month(s) for s in frame["date"]])
    _check_monthly(months, label)
    names = [c for c in frame.columns if c != "date"]
    if not names:
        raise PanelError(f"{label} file has no value columns")
    vals = _numeric(frame, names, label)
    mat = np.column_stack([vals[c] for c in names])
    if np.isnan(mat).any():
        r, c = np.argwhere(np.isnan(mat))[0]
        raise PanelError(f"{label} column {names[c]!r} is empty at row "
                         f"{int(r) + 2}")
    return months, mat, names


def _check_duplicates(frame, asset_col, date_col, label):
    dup = frame.duplicated(subset=[asset_col, date_col], keep="first")
    if dup.any():
        i = int(dup.idxmax())
        raise PanelError(
            f"duplicate ({frame[asset_col][i]}, {frame[date_col][i]}) in "
            f"{label} file at row {i + 2}"
        )


def load_panel(paths, bindings=None, min_obs=0):
    """Load and cross-validate the four panel files.

    paths: mapping with keys returns, factors, instruments, characteristics.
    bindings: optional column-name overrides for the long files (keys asset,
    date, ret).  Assets with fewer than min_obs observed months are listed in
    short_assets, not dropped.
    """
    cols = dict(DEFAULT_BINDINGS)
    if bindings:
        cols.update(bindings)
    for key in ("returns", "factors", "instruments", "characteristics"):
        if key not in paths:
            raise PanelError(f"missing input path for {key!r}")

    fac_months, factors, factor_names = _load_wide(paths["factors"], "factors")
    ins_months, instruments, instrument_names = _load_wide(
        paths["instruments"], "instruments")

    ret = _read_csv(paths["returns"], "returns")
    _require_columns(ret, [cols["asset"], cols["date"], cols["ret"]],
                     "returns")
    _check_duplicates(ret, cols["asset"], cols["date"], "returns")
    ret_months = np.array([parse_month(s) for s in ret[cols["date"]]])
    ret_vals = _numeric(ret, [cols["ret"]], "returns")[cols["ret"]]
    if np.isnan(ret_vals).any():
        row = int(np.argmax(np.isnan(ret_vals))) + 2
        raise PanelError(f"returns value is empty at row {row}")

    cha = _read_csv(paths["characteristics"], "characteristics")
    _require_columns(cha, [cols["asset"], cols["date"]], "characteristics")
    characteristic_names = [c for c in cha.columns
                            if c not in (cols["asset"], cols["date"])]
    if not characteristic_names:
        raise PanelError("characteristics file has no value columns")
    _check_duplicates(cha, cols["asset"], cols["date"], "characteristics")
    cha_months = np.array([parse_month(s) for s in cha[cols["date"]]])
    cha_vals = _numeric(cha, characteristic_names, "characteristics")
    cha_mat = np.column_stack([cha_vals[c] for c in characteristic_names])

    months = np.unique(ret_months)
    _check_monthly(months, "returns (distinct dates)")
    fac_pos = {int(m): i for i, m in enumerate(fac_months)}
    ins_pos = {int(m): i for i, m in enumerate(ins_months)}
    for m in months:
        if int(m) not in fac_pos:
            raise PanelError(f"no factor row for return month "
                             f"{format_month(int(m))}")
        if int(m) - 1 not in ins_pos:
            raise PanelError(
                f"no instrument row at {format_month(int(m) - 1)} "
                f"(needed for returns at {format_month(int(m))})"
            )

    assets = sorted(set(ret[cols["asset"]]))
    a_pos = {a: i for i, a in enumerate(assets)}
    m_pos = {int(m): t for t, m in enumerate(months)}
    n, T = len(assets), months.size
    q = len(characteristic_names)

    returns = np.full((n, T), np.nan)
    observed = np.zeros((n, T), dtype=bool)
    for row in range(ret_months.size):
        i = a_pos[ret[cols["asset"]][row]]
        t = m_pos[int(ret_months[row])]
        returns[i, t] = ret_vals[row]
        observed[i, t] = True

    # characteristics are matched at the month before each return month
    chars = np.full((n, T, q), np.nan)
    cha_index = {}
    for row in range(cha_months.size):
        key = (cha[cols["asset"]][row], int(cha_months[row]))
        cha_index[key] = row
    missing_rows = []
    for i, a in enumerate(assets):
        for t, m in enumerate(months):
            if not observed[i, t]:
                continue
            row = cha_index.get((a, int(m) - 1))
            if row is None or np.isnan(cha_mat[row]).any():
                ret_row = int(np.flatnonzero(
                    (ret[cols["asset"]] == a).to_numpy()
                    & (ret_months == m))[0]) + 2
                missing_rows.append((a, format_month(int(m)), ret_row))
                continue
            chars[i, t] = cha_mat[row]
    if missing_rows:
        shown = ", ".join(f"({a}, {d}) at returns row {r}"
                          for a, d, r in missing_rows[:8])
        more = "" if len(missing_rows) <= 8 else \
            f" and {len(missing_rows) - 8} more"
        raise PanelError(
            f"characteristic values missing at the month before "
            f"{len(missing_rows)} observed return rows: {shown}{more}"
        )

    fac_rows = np.array([fac_pos[int(m)] for m in months])
    ins_rows = np.array([ins_pos[int(m) - 1] for m in months])
    panel = PanelData(
        assets=assets,
        months=months,
        returns=returns,
        observed=observed,
        factors=factors[fac_rows],
        instruments=instruments[ins_rows],
        characteristics=chars,
        factor_names=factor_names,
        instrument_names=instrument_names,
        characteristic_names=characteristic_names,
    )
    if min_obs:
        T_i = panel.T_i
        panel.short_assets = [a for a, ti in zip(assets, T_i)
                              if ti < min_obs]
    return panel


@dataclass
class PreprocessOptions:
    """rank_characteristics maps each characteristic to cross-sectional
    ranks (rank-1)/(n_t-1) per month; standardize_instruments centers and
    scales each instrument with moments from the training window only
    (train_end None means the full sample is the training window)."""

    rank_characteristics: bool = True
    standardize_instruments: bool = True
    train_end: object = None


def _rank_unit(values):
    """Ranks mapped to [0,1]; average ranks on ties, midpoint for n=1."""
    v = pd.Series(values)
    n = v.size
    if n == 1:
        return np.array([0.5])
    r = v.rank(method="average").to_numpy()
    return (r - 1.0) / (n - 1.0)


def preprocess(panel, options=None):
    """Apply the rank/standardization transforms; returns a new PanelData."""
    opt = options or PreprocessOptions()
    chars = panel.characteristics
    if opt.rank_characteristics:
        chars = chars.copy()
        warned = False
        for t in range(panel.T):
            obs = np.flatnonzero(panel.observed[:, t])
            if obs.size == 0:
                continue
            if obs.size == 1 and not warned:
                warnings.warn(
                    f"single observed asset at "
                    f"{format_month(int(panel.months[t]))}; rank set to "
                    "the midpoint 0.5"
                )
                warned = True
            for j in range(chars.shape[2]):
                chars[obs, t, j] = _rank_unit(panel.characteristics[obs, t, j])

    instruments = panel.instruments
    if opt.standardize_instruments:
        if opt.train_end is None:
            window = np.ones(panel.T, dtype=bool)
        else:
            window = panel.train_mask(opt.train_end)
        mu = instruments[window].mean(axis=0)
        sd = instruments[window].std(axis=0, ddof=0)
        zero = sd < 1e-14 * np.maximum(1.0, np.abs(mu))
        if zero.any():
            bad = [panel.instrument_names[j] for j in np.flatnonzero(zero)]
            raise PanelError(
                f"instrument(s) {bad} are constant on the training window; "
                "cannot standardize"
            )
        instruments = (instruments - mu) / sd
    return replace(panel, instruments=instruments, characteristics=chars)


def asset_matrices(panel, asset):
    """Aligned per-asset arrays (returns, observed, F, Z, Zi) on the panel
    timeline, ready for the design builder."""
    if isinstance(asset, str):
        i = panel.assets.index(asset)
    else:
        i = int(asset)
    return (panel.returns[i], panel.observed[i], panel.factors,
            panel.instruments, panel.characteristics[i])


def save_panel(panel, directory, bindings=None):
    """Write the four CSV files (inverse of load_panel, lossless to 15
    significant digits).  Instruments/characteristics are written at their
    own observation months (one month before the return timeline)."""
    import os

    cols = dict(DEFAULT_BINDINGS)
    if bindings:
        cols.update(bindings)
    os.makedirs(directory, exist_ok=True)
    fmt = lambda x: f"{x:.17g}"
    labels = panel.date_labels()
    lag_labels = [format_month(int(m) - 1) for m in panel.months]

    paths = {}

    def write(name, header, rows):
        path = os.path.join(directory, f"{name}.csv")
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(r) + "\n")
        paths[name] = path

    write("returns", [cols["asset"], cols["date"], cols["ret"]],
          ([a, labels[t], fmt(panel.returns[i, t])]
           for i, a in enumerate(panel.assets)
           for t in range(panel.T) if panel.observed[i, t]))
    write("factors", ["date"] + list(panel.factor_names),
          ([labels[t]] + [fmt(v) for v in panel.factors[t]]
           for t in range(panel.T)))
    write("instruments", ["date"] + list(panel.instrument_names),
          ([lag_labels[t]] + [fmt(v) for v in panel.instruments[t]]
           for t in range(panel.T)))
    write("characteristics",
          [cols["asset"], cols["date"]] + list(panel.characteristic_names),
          ([a, lag_labels[t]] + [fmt(v) for v in panel.characteristics[i, t]]
           for i, a in enumerate(panel.assets)
           for t in range(panel.T) if panel.observed[i, t]))
    return paths
