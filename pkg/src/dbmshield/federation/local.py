"""Spawn site servers on localhost, one per dataset (tests, demos, networked scenarios)."""

import contextlib
import secrets
import tempfile
from pathlib import Path

from ..data import write_csv
from .client import LoginRecord
from .server import SiteConfig, SiteServer


@contextlib.contextmanager
def local_sites(datasets, table="data", root=None, **cfg_kw):
    """Serve each ``{label: BinaryDataset}`` from its own data directory.

    Yields the list of :class:`LoginRecord` for the running sites; the servers
    are stopped on exit.
    """
    with contextlib.ExitStack() as stack:
        if root is None:
            root = stack.enter_context(tempfile.TemporaryDirectory(prefix="dbmshield-sites-"))
        records = []
        for label in sorted(datasets):
            data_dir = Path(root) / label
            data_dir.mkdir(parents=True, exist_ok=True)
            write_csv(datasets[label], data_dir / f"{table}.csv")
            token = secrets.token_hex(8)
            cfg = SiteConfig(data_directory=data_dir, credentials={"analyst": token}, **cfg_kw)
            server = stack.enter_context(SiteServer(cfg))
            host, port = server.address
            records.append(LoginRecord(label, f"tcp://{host}:{port}", "analyst", token, table))
        yield records
