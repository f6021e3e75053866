"""Client orchestrator: log in to several sites and broadcast whitelisted operations."""

import csv
import socket
import ssl
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..data import BinaryDataset
from . import protocol as P

DEFAULT_TIMEOUT = 600.0


@dataclass(frozen=True)
class LoginRecord:
    server: str
    url: str
    user: str
    password: str
    table: str = ""

    def __repr__(self):
        return (f"LoginRecord(server={self.server!r}, url={self.url!r}, "
                f"user={self.user!r}, password='***', table={self.table!r})")


def read_logins(path):
    """Read a logins CSV with columns ``server,url,user,password,table``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"server", "url", "user", "password", "table"}
        missing = need - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"logins file is missing columns {sorted(missing)}")
        records = [LoginRecord(**{k: row[k].strip() for k in need}) for row in reader]
    _check_records(records)
    return records


def _check_records(records):
    if not records:
        raise ValueError("no login records given")
    labels = [r.server for r in records]
    if len(set(labels)) != len(labels):
        raise ValueError("site labels in login records must be unique")


class RemoteError(Exception):
    """An error reported by (or while talking to) exactly one site."""

    def __init__(self, site, kind, message):
        super().__init__(f"[{site}] {kind}: {message}")
        self.site = site
        self.kind = kind
        self.message = message


class RemoteCallError(Exception):
    """One or more sites failed a broadcast; ``errors`` maps site label to RemoteError."""

    def __init__(self, errors):
        self.errors = dict(sorted(errors.items()))
        super().__init__("; ".join(str(e) for e in self.errors.values()))

    @property
    def kinds(self):
        return {site: e.kind for site, e in self.errors.items()}


def parse_url(url):
    """Return ``(host, port, use_tls)`` for ``tcp://h:p``, ``tls://h:p`` or ``h:p``."""
    use_tls = url.startswith("tls://")
    for scheme in ("tcp://", "tls://"):
        if url.startswith(scheme):
            url = url[len(scheme):]
    host, sep, port = url.rstrip("/").rpartition(":")
    if not sep or not host:
        raise ValueError(f"site url must be host:port, got {url!r}")
    return host, int(port), use_tls


class SiteChannel:
    """One TCP connection to one site; requests on it are strictly sequential."""

    def __init__(self, label, url, timeout=DEFAULT_TIMEOUT, ssl_context=None):
        self.label = label
        self.url = url
        self.timeout = timeout
        self.session = None
        self._lock = threading.Lock()
        host, port, use_tls = parse_url(url)
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            if use_tls:
                ctx = ssl_context or ssl.create_default_context()
                sock = ctx.wrap_socket(sock, server_hostname=host)
        except OSError as exc:
            raise RemoteError(label, P.UNREACHABLE, exc) from None
        self._sock = sock
        self._file = sock.makefile("rwb")

    def call(self, op, args=None):
        with self._lock:
            try:
                self._file.write(P.encode(P.request(op, args, self.session)))
                self._file.flush()
                line = self._file.readline(P.MAX_LINE_BYTES + 1)
            except socket.timeout:
                raise RemoteError(self.label, P.TIMEOUT, f"no answer within {self.timeout} s") from None
            except OSError as exc:
                raise RemoteError(self.label, P.UNREACHABLE, exc) from None
        if not line:
            raise RemoteError(self.label, P.UNREACHABLE, "connection closed by site")
        try:
            response = P.decode(line)
        except P.ProtocolError as exc:
            raise RemoteError(self.label, P.PROTOCOL, exc) from None
        if response.get("status") != "ok":
            raise RemoteError(self.label, response.get("error_kind") or P.PROTOCOL,
                              response.get("message") or "")
        return response.get("payload")

    def close(self):
        try:
            self._file.close()
            self._sock.close()
        except OSError:
            pass


class Connections:
    """Handle on a set of logged-in sites, keyed by site label."""

    def __init__(self, channels):
        self.channels = dict(sorted(channels.items()))
        self._pool = ThreadPoolExecutor(max_workers=max(1, len(self.channels)))

    @property
    def labels(self):
        return list(self.channels)

    def call(self, op, args=None, per_site_args=None, sites=None):
        """Send ``op`` to every site concurrently and return ``{label: payload}``.

        ``per_site_args`` maps labels to extra arguments merged over ``args``.
        Raises :class:`RemoteCallError` if any site fails.
        """
        labels = self.labels if sites is None else sorted(sites)
        per_site_args = per_site_args or {}

        def one(label):
            merged = {**(args or {}), **per_site_args.get(label, {})}
            return self.channels[label].call(op, merged)

        futures = {label: self._pool.submit(one, label) for label in labels}
        results, errors = {}, {}
        for label, fut in futures.items():
            try:
                results[label] = fut.result()
            except RemoteError as exc:
                errors[label] = exc
        if errors:
            raise RemoteCallError(errors)
        return results

    def logout(self):
        for label, channel in self.channels.items():
            try:
                channel.call("logout")
            except RemoteError:
                pass
            channel.close()
        self.channels = {}
        self._pool.shutdown(wait=False)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.logout()


def login(records, assign=True, timeout=DEFAULT_TIMEOUT, workspace=None, ssl_context=None):
    """Open one session per site; all-or-nothing.

    If any site is unreachable or refuses the login, every session already
    opened is closed again and :class:`RemoteCallError` is raised.
    """
    records = list(records)
    _check_records(records)
    channels, errors = {}, {}

    def connect(rec):
        ch = SiteChannel(rec.server, rec.url, timeout, ssl_context)
        try:
            args = {"user": rec.user, "token": rec.password, "table": rec.table, "assign": bool(assign)}
            if workspace is not None:
                args["workspace"] = workspace
            ch.session = ch.call("login", args)["session"]
        except BaseException:
            ch.close()
            raise
        return ch

    with ThreadPoolExecutor(max_workers=len(records)) as pool:
        futures = {rec.server: pool.submit(connect, rec) for rec in records}
        for label, fut in futures.items():
            try:
                channels[label] = fut.result()
            except RemoteError as exc:
                errors[label] = exc
    if errors:
        Connections(channels).logout()
        raise RemoteCallError(errors)
    return Connections(channels)


def remote_call(handle, op, args=None, per_site_args=None):
    return handle.call(op, args, per_site_args)


def logout(handle):
    handle.logout()


def payload_dataset(payload):
    """Turn a synthetic-row payload into a :class:`BinaryDataset`."""
    rows = np.asarray(payload["rows"], dtype=np.int8).reshape(-1, len(payload["columns"]))
    return BinaryDataset(rows, payload["columns"])


def pool_samples(per_site):
    """Row-concatenate per-site datasets in ascending site-label order."""
    if not per_site:
        raise ValueError("nothing to pool")
    parts = [per_site[k] for k in sorted(per_site)]
    parts = [payload_dataset(p) if isinstance(p, dict) else p for p in parts]
    n_cols = parts[0].n_columns
    for p in parts[1:]:
        if p.n_columns != n_cols:
            raise ValueError(f"column mismatch when pooling: {p.n_columns} vs {n_cols}")
    return BinaryDataset(np.concatenate([p.values for p in parts], axis=0), parts[0].column_names)


def write_logins(path, records):
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["server", "url", "user", "password", "table"])
        for r in records:
            w.writerow([r.server, r.url, r.user, r.password, r.table])
