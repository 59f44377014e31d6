"""
Row-level validation of trace files.

Rules run in file order and stop at the first failing row, naming its line
number (1-based, header included). Validators never touch the filesystem
beyond what they are handed.
"""
import numpy as np
import pandas as pd

from app.validators.errors import ValidationError

RAW_COLUMNS = ["timestamp", "rnti_count"]


def validate_trace_frame(frame: pd.DataFrame, path: str) -> tuple[np.ndarray, np.ndarray]:
    """
    Turn a raw two-column string frame into validated (timestamps, counts).

    The frame is read with every cell as a string and its index equal to the
    0-based file row. An optional header row is detected and skipped, blank
    rows are ignored, and a single missing step is forward-filled from the row
    above: an empty count, or a row skipped in an otherwise regular cadence.

    Args:
        frame: Raw frame with columns RAW_COLUMNS.
        path: Source path, used in error details.

    Returns:
        (datetime64[ns] UTC-naive timestamps, int64 counts).

    Raises:
        ValidationError: UNPARSEABLE_ROW, NEGATIVE_COUNT, GAP_TOO_LONG,
            NON_MONOTONE_TIMESTAMP or EMPTY_TRACE.
    """
    frame = frame.fillna("")
    frame = frame[(frame["timestamp"].str.strip() != "") | (frame["rnti_count"].str.strip() != "")]
    if not frame.empty and _looks_like_header(frame.iloc[0]):
        frame = frame.iloc[1:]
    if frame.empty:
        raise ValidationError(
            code="EMPTY_TRACE",
            message=f"{path} holds no data rows",
            details={"path": path},
        )

    lines = frame.index.to_numpy() + 1
    timestamps = _parse_timestamps(frame["timestamp"].str.strip(), lines, path)
    counts = _parse_counts(frame["rnti_count"].str.strip(), lines, path)
    _validate_monotone(timestamps, lines, path)
    filled = (frame["rnti_count"].str.strip() == "").to_numpy()
    return _fill_skipped_steps(timestamps, counts, filled, lines, path)


def _looks_like_header(row: pd.Series) -> bool:
    count_is_number = pd.notna(pd.to_numeric(row["rnti_count"], errors="coerce"))
    stamp = row["timestamp"].strip()
    stamp_is_time = pd.notna(pd.to_numeric(stamp, errors="coerce")) or pd.notna(
        pd.to_datetime(stamp, errors="coerce", format="ISO8601", utc=True)
    )
    return not count_is_number and not stamp_is_time


def _parse_timestamps(column: pd.Series, lines: np.ndarray, path: str) -> np.ndarray:
    epoch = pd.to_numeric(column, errors="coerce")
    iso = pd.to_datetime(column.where(epoch.isna()), errors="coerce", format="ISO8601", utc=True)
    from_epoch = pd.to_datetime(epoch, unit="s", utc=True, errors="coerce")
    parsed = from_epoch.where(epoch.notna(), iso)

    bad = parsed.isna().to_numpy()
    if bad.any():
        first = int(np.argmax(bad))
        raise ValidationError(
            code="UNPARSEABLE_ROW",
            message=f"{path}, line {lines[first]}: timestamp {column.iloc[first]!r} is neither ISO-8601 nor epoch seconds",
            details={"path": path, "line": int(lines[first]), "field": "timestamp"},
        )
    return parsed.dt.tz_localize(None).to_numpy(dtype="datetime64[ns]")


def _parse_counts(column: pd.Series, lines: np.ndarray, path: str) -> np.ndarray:
    empty = (column == "").to_numpy()
    values = pd.to_numeric(column, errors="coerce").to_numpy(dtype=np.float64)

    unparseable = ~empty & np.isnan(values)
    if unparseable.any():
        position = int(np.argmax(unparseable))
        raise ValidationError(
            code="UNPARSEABLE_ROW",
            message=f"{path}, line {lines[position]}: count {column.iloc[position]!r} is not a number",
            details={"path": path, "line": int(lines[position]), "field": "rnti_count"},
        )
    finite = ~empty
    non_integer = finite & (np.floor(np.nan_to_num(values)) != np.nan_to_num(values))
    if non_integer.any():
        position = int(np.argmax(non_integer))
        raise ValidationError(
            code="UNPARSEABLE_ROW",
            message=f"{path}, line {lines[position]}: count {column.iloc[position]!r} is not an integer",
            details={"path": path, "line": int(lines[position]), "field": "rnti_count"},
        )
    negative = finite & (np.nan_to_num(values) < 0)
    if negative.any():
        position = int(np.argmax(negative))
        raise ValidationError(
            code="NEGATIVE_COUNT",
            message=f"{path}, line {lines[position]}: negative RNTI count {column.iloc[position]}",
            details={"path": path, "line": int(lines[position]), "value": float(values[position])},
        )

    for position in np.flatnonzero(empty):
        if position == 0 or empty[position - 1]:
            raise ValidationError(
                code="GAP_TOO_LONG",
                message=f"{path}, line {lines[position]}: missing count cannot be forward-filled",
                details={"path": path, "line": int(lines[position])},
            )
        values[position] = values[position - 1]
    return values.astype(np.int64)


def _validate_monotone(timestamps: np.ndarray, lines: np.ndarray, path: str) -> None:
    steps = np.diff(timestamps.astype(np.int64))
    bad = steps <= 0
    if bad.any():
        position = int(np.argmax(bad)) + 1
        raise ValidationError(
            code="NON_MONOTONE_TIMESTAMP",
            message=f"{path}, line {lines[position]}: timestamp does not increase over line {lines[position - 1]}",
            details={"path": path, "line": int(lines[position]), "previous_line": int(lines[position - 1])},
        )


def _fill_skipped_steps(
    timestamps: np.ndarray, counts: np.ndarray, filled: np.ndarray, lines: np.ndarray, path: str
) -> tuple[np.ndarray, np.ndarray]:
    """
    Insert a forward-filled row wherever exactly one step is missing.

    The cadence is the median spacing. A spacing of about two cadences is one
    skipped row; a longer gap, or a skipped row next to an empty count, is two
    or more missing steps in a row.
    """
    if timestamps.size < 3:
        return timestamps, counts
    spacing = np.diff(timestamps.astype(np.int64))
    cadence = int(np.median(spacing))
    missing = np.rint(spacing / cadence).astype(np.int64) - 1
    skipped = np.flatnonzero(missing > 0)
    for position in skipped:
        after = position + 1
        if missing[position] > 1 or filled[position] or filled[after]:
            raise ValidationError(
                code="GAP_TOO_LONG",
                message=f"{path}, line {lines[after]}: {int(missing[position])} step(s) missing before this row cannot be forward-filled",
                details={"path": path, "line": int(lines[after]), "missing_steps": int(missing[position])},
            )
    if skipped.size == 0:
        return timestamps, counts
    stamps = np.insert(timestamps, skipped + 1, timestamps[skipped] + np.timedelta64(cadence, "ns"))
    return stamps, np.insert(counts, skipped + 1, counts[skipped])
