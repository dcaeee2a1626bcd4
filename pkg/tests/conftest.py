import numpy as np
import pytest

from featforge.table import ColumnKind, Table, table_from_columns


@pytest.fixture
def user_logs() -> Table:
    """Small purchase-log table used across query and engine tests."""
    return table_from_columns(
        "User_Logs",
        {
            "cname": (ColumnKind.TEXT, ["alice", "bob", "alice", "carol", "bob", "alice"]),
            "pname": (ColumnKind.TEXT, ["kindle", "soap", "tv", "lamp", "tv", "usb"]),
            "department": (
                ColumnKind.TEXT,
                ["Electronics", "Grocery", "Electronics", "Home", "Electronics", "Electronics"],
            ),
            "pprice": (ColumnKind.FLOAT, [100.0, 5.0, 400.0, 40.0, 350.0, 15.0]),
            "timestamp": (
                ColumnKind.DATETIME,
                [
                    "2023-07-15",
                    "2023-06-01",
                    "2023-07-01",
                    "2023-05-20",
                    "2023-06-28",
                    "2023-07-30",
                ],
            ),
        },
    )


def random_table(rng: np.random.Generator, n_rows: int, name: str = "rand") -> Table:
    """Random mixed-kind table with nulls, for oracle comparisons."""
    def with_nulls(values):
        return [None if rng.random() < 0.15 else v for v in values]

    return table_from_columns(
        name,
        {
            "k1": (ColumnKind.TEXT, with_nulls([f"g{rng.integers(0, 4)}" for _ in range(n_rows)])),
            "k2": (ColumnKind.INT, with_nulls([int(rng.integers(0, 3)) for _ in range(n_rows)])),
            "cat": (ColumnKind.TEXT, with_nulls([f"c{rng.integers(0, 3)}" for _ in range(n_rows)])),
            "num": (ColumnKind.FLOAT, with_nulls([float(np.round(rng.normal(), 3)) for _ in range(n_rows)])),
            "ival": (ColumnKind.INT, with_nulls([int(rng.integers(-5, 6)) for _ in range(n_rows)])),
            "when": (
                ColumnKind.DATETIME,
                with_nulls([int(1_680_000_000 + rng.integers(0, 10_000_000)) for _ in range(n_rows)]),
            ),
        },
    )
