"""Episode logs as versioned CSV.

Layout: a `# dagmarl-log v1` header line, then a column row, then one row
per episode.  Columns are `episode,team_reward,goal_periods`, one
`reward:<role>` column per agent, and `sr:<node>` columns when synthetic
rewards were active.  Floats are written with repr so a parse round-trips
bit for bit.  No timestamps or host details appear here; those go in the
run_meta.json sidecar so reruns with one seed diff clean.
"""

from __future__ import annotations

import numpy as np

VERSION_LINE = "# dagmarl-log v1"


class IoError(OSError):
    pass


class SchemaMismatch(ValueError):
    pass


def _format(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def episode_columns(record) -> dict:
    """Flatten an EpisodeRecord into an ordered column -> value mapping."""
    row = {"episode": record.episode,
           "team_reward": record.team_reward,
           "goal_periods": record.goal_periods}
    for role, value in record.agent_rewards.items():
        row[f"reward:{role}"] = value
    if record.sr_sums is not None:
        for i, value in enumerate(record.sr_sums):
            row[f"sr:{i}"] = float(value)
    return row


def write_episode_csv(path, records) -> None:
    if not records:
        raise IoError("refusing to write an empty episode log")
    rows = [episode_columns(r) for r in records]
    header = list(rows[0])
    for row in rows:
        if list(row) != header:
            raise SchemaMismatch("episode records disagree on columns")
    try:
        with open(path, "w") as fh:
            fh.write(VERSION_LINE + "\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_format(row[c]) for c in header) + "\n")
    except OSError as err:
        raise IoError(str(err)) from err


def read_episode_csv(path) -> dict:
    """Parse a log back into {column: array}; validates the version line."""
    try:
        with open(path) as fh:
            lines = [line.rstrip("\n") for line in fh]
    except OSError as err:
        raise IoError(str(err)) from err
    if not lines or not lines[0].startswith("# dagmarl-log"):
        raise SchemaMismatch(f"{path}: missing dagmarl-log header")
    if lines[0] != VERSION_LINE:
        raise SchemaMismatch(f"{path}: unsupported log version "
                             f"{lines[0]!r}")
    if len(lines) < 2:
        raise SchemaMismatch(f"{path}: missing column row")
    header = lines[1].split(",")
    body = [line for line in lines[2:] if line]
    columns = {name: [] for name in header}
    if len(set(header)) != len(header):
        raise SchemaMismatch(f"{path}: duplicate column names")
    for line in body:
        parts = line.split(",")
        if len(parts) != len(header):
            raise SchemaMismatch(f"{path}: row width {len(parts)} does not "
                                 f"match {len(header)} columns")
        for name, text in zip(header, parts):
            columns[name].append(float(text))
    out = {}
    for name, values in columns.items():
        arr = np.asarray(values, dtype=float)
        if name in ("episode", "goal_periods"):
            arr = arr.astype(int)
        out[name] = arr
    return out
