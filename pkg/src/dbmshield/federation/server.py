"""Site server: private data behind an authenticated, whitelisted, aggregate-only API.

Each connection speaks the newline-delimited JSON protocol of
:mod:`dbmshield.federation.protocol`. Datasets and models live in a per-session
object store on the server and are referred to by label; only monitoring
scalars, aggregate values, synthetic rows and acknowledgements are returned.
"""

import configparser
import logging
import secrets
import socketserver
import ssl
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import evaluation, training
from ..data import BinaryDataset, read_csv, splitdata
from ..inference import reconstruction_error
from ..models import Dbm, Rbm, model_to_dict
from ..sampling import dbn_samples, samples
from . import protocol as P

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SiteConfig:
    listen_address: tuple = ("127.0.0.1", 0)
    data_directory: Path = Path(".")
    allow_model_export: bool = False
    min_rows_for_training: int = 10
    credentials: dict = field(default_factory=dict)
    tls_certfile: Path = None
    tls_keyfile: Path = None

    def __post_init__(self):
        if self.min_rows_for_training < 1:
            raise ValueError("min_rows_for_training must be >= 1")
        object.__setattr__(self, "data_directory", Path(self.data_directory))
        host, port = self.listen_address
        object.__setattr__(self, "listen_address", (str(host), int(port)))


def _parse_bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_address(text):
    text = text.strip()
    if text.startswith("tcp://"):
        text = text[len("tcp://"):]
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"address must be host:port, got {text!r}")
    return host, int(port)


def parse_site_config(text, base_dir="."):
    """Parse the ``key = value`` site configuration format.

    Keys: ``address`` (host:port), ``data_dir``, ``allow_model_export``,
    ``min_rows_for_training``, ``users`` (comma-separated ``user:token``) and
    optionally ``tls_cert``/``tls_key`` to wrap connections in TLS.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string("[site]\n" + text)
    sec = parser["site"]
    known = {"address", "data_dir", "allow_model_export", "min_rows_for_training", "users",
             "tls_cert", "tls_key"}
    unknown = set(sec) - known
    if unknown:
        raise ValueError(f"unknown site config keys: {sorted(unknown)}")
    users = {}
    for item in sec.get("users", "").split(","):
        item = item.strip()
        if not item:
            continue
        user, sep, token = item.partition(":")
        if not sep or not user or not token:
            raise ValueError(f"malformed users entry {item!r}; expected user:token")
        users[user.strip()] = token.strip()
    def path(key, default=None):
        value = sec.get(key, default)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else Path(base_dir) / p

    return SiteConfig(
        listen_address=parse_address(sec.get("address", "127.0.0.1:0")),
        data_directory=path("data_dir", "."),
        allow_model_export=_parse_bool(sec.get("allow_model_export", "false")),
        min_rows_for_training=int(sec.get("min_rows_for_training", "10")),
        credentials=users,
        tls_certfile=path("tls_cert"),
        tls_keyfile=path("tls_key"),
    )


def load_site_config(path):
    path = Path(path)
    return parse_site_config(path.read_text(), base_dir=path.parent)


class RemoteOpError(Exception):
    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


@dataclass
class ModelEntry:
    model: object
    n_training_rows: int
    column_names: tuple = None


class Session:
    def __init__(self, user, objects=None):
        self.session_id = secrets.token_hex(16)
        self.user = user
        self.named_objects = {} if objects is None else objects
        self.rng = np.random.default_rng(0)
        self.lock = threading.Lock()


def guard_training(dataset, cfg):
    """Refuse training or sampling on datasets below the site's row threshold."""
    if dataset.n_rows < cfg.min_rows_for_training:
        raise RemoteOpError(
            P.DISCLOSURE_GUARD,
            f"dataset has {dataset.n_rows} rows; this site requires at least "
            f"{cfg.min_rows_for_training}",
        )


# -- argument helpers ----------------------------------------------------------

def _arg(args, name, kind, default=..., allow_none=False):
    if name not in args or (args[name] is None and default is not ...):
        if default is ...:
            raise RemoteOpError(P.INVALID_ARGUMENT, f"missing argument {name!r}")
        return default
    value = args[name]
    if value is None and allow_none:
        return None
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise RemoteOpError(P.INVALID_ARGUMENT, f"argument {name!r} must be int")
    if not isinstance(value, kind):
        raise RemoteOpError(P.INVALID_ARGUMENT, f"argument {name!r} must be {kind.__name__}")
    return value


def _label_list(args, name):
    value = args.get(name) or []
    if isinstance(value, str):
        value = [value]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise RemoteOpError(P.INVALID_ARGUMENT, f"argument {name!r} must be a list of labels")
    return value


def _ais_config(args):
    try:
        return evaluation.AisConfig(
            ntemperatures=_arg(args, "ntemperatures", int, 100),
            nparticles=_arg(args, "nparticles", int, 100),
            burnin=_arg(args, "burnin", int, None),
        )
    except (TypeError, ValueError) as exc:
        raise RemoteOpError(P.INVALID_ARGUMENT, str(exc)) from None


ALLOWED_PAYLOAD_KEYS = (
    {"label", "overwritten"},
    {"label", "overwritten", "monitoring"},
    {"value"},
    {"columns", "rows"},
    {"dims"},
    {"model"},
    {"session"},
    {"labels"},
)


def check_disclosure_safe(payload):
    """Assert that a response payload has one of the permitted shapes."""
    if payload is None:
        return
    if not isinstance(payload, dict) or set(payload) not in ALLOWED_PAYLOAD_KEYS:
        raise AssertionError(f"payload shape {sorted(payload) if isinstance(payload, dict) else type(payload)} is not disclosure-safe")


class SiteServer:
    """One data-holding site. Use :meth:`start` for a background thread."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._sessions = {}
        self._workspaces = {}
        self._lock = threading.Lock()
        self._tcp = None
        self._thread = None
        self.handlers = {
            "set_seed": self.op_set_seed,
            "splitdata": self.op_splitdata,
            "define_layer": self.op_define_layer,
            "define_partitioned_layer": self.op_define_partitioned_layer,
            "fitrbm": self.op_fitrbm,
            "stackrbms": self.op_stackrbms,
            "fitdbm": self.op_fitdbm,
            "samples": self.op_samples,
            "reconstruction_error": self.op_reconstruction_error,
            "exact_loglikelihood": self.op_exact_loglikelihood,
            "rbm_loglikelihood": self.op_rbm_loglikelihood,
            "dbm_loglikelihood": self.op_dbm_loglikelihood,
            "logproblowerbound": self.op_logproblowerbound,
            "top2latentdims": self.op_top2latentdims,
            "export_model": self.op_export_model,
        }

    # -- session plumbing -----------------------------------------------------

    @property
    def whitelist(self):
        return frozenset(self.handlers) | {"login", "logout"}

    def handle(self, message):
        """Process one decoded request object and return a response object."""
        try:
            session_id, op, args = P.parse_request(message)
        except P.ProtocolError as exc:
            return P.error(P.BAD_REQUEST, exc)
        try:
            if op == "login":
                return P.ok(self.op_login(args))
            with self._lock:
                session = self._sessions.get(session_id) if session_id else None
            if session is None:
                return P.error(P.UNAUTHORIZED, "unknown or expired session")
            if op == "logout":
                return P.ok(self.op_logout(session))
            handler = self.handlers.get(op)
            if handler is None:
                return P.error(P.FORBIDDEN_OPERATION, f"operation {op!r} is not permitted")
            with session.lock:
                payload = handler(session, args)
            check_disclosure_safe(payload)
            return P.ok(payload)
        except RemoteOpError as exc:
            return P.error(exc.kind, exc)
        except (ValueError, TypeError) as exc:
            return P.error(P.INVALID_ARGUMENT, exc)
        except Exception as exc:  # noqa: BLE001 - never leak a traceback to the client
            log.exception("operation %s failed", op)
            return P.error(P.INTERNAL, type(exc).__name__)

    def op_login(self, args):
        user = _arg(args, "user", str)
        token = _arg(args, "token", str)
        expected = self.cfg.credentials.get(user)
        if expected is None or not secrets.compare_digest(expected, token):
            raise RemoteOpError(P.UNAUTHORIZED, "invalid credentials")
        workspace = _arg(args, "workspace", str, None)
        objects = None
        if workspace is not None:
            with self._lock:
                objects = self._workspaces.setdefault((user, workspace), {})
        session = Session(user, objects)
        if args.get("assign", False):
            table = _arg(args, "table", str)
            session.named_objects["D"] = self._load_table(table)
        with self._lock:
            self._sessions[session.session_id] = session
        return {"session": session.session_id}

    def op_logout(self, session):
        with self._lock:
            self._sessions.pop(session.session_id, None)
        return None

    def _load_table(self, table):
        if not table or "/" in table or "\\" in table or table.startswith("."):
            raise RemoteOpError(P.INVALID_ARGUMENT, f"invalid table name {table!r}")
        path = self.cfg.data_directory / f"{table}.csv"
        if not path.is_file():
            raise RemoteOpError(P.NOT_FOUND, f"table {table!r} not found")
        return read_csv(path)

    # -- object store ---------------------------------------------------------

    @staticmethod
    def _get(session, label, kinds, what):
        obj = session.named_objects.get(label)
        if obj is None:
            raise RemoteOpError(P.NOT_FOUND, f"no object labelled {label!r}")
        if not isinstance(obj, kinds):
            raise RemoteOpError(P.INVALID_ARGUMENT, f"object {label!r} is not a {what}")
        return obj

    def _dataset(self, session, label):
        return self._get(session, label, BinaryDataset, "dataset")

    def _model(self, session, label, kinds=(Rbm, Dbm, list), what="model"):
        entry = self._get(session, label, ModelEntry, what)
        if not isinstance(entry.model, kinds):
            raise RemoteOpError(P.INVALID_ARGUMENT, f"object {label!r} is not a {what}")
        return entry

    @staticmethod
    def _store(session, label, obj):
        overwritten = label in session.named_objects
        session.named_objects[label] = obj
        return {"label": label, "overwritten": overwritten}

    # -- operations -----------------------------------------------------------

    def op_set_seed(self, session, args):
        seed = _arg(args, "seed", int)
        if seed < 0:
            raise RemoteOpError(P.INVALID_ARGUMENT, "seed must be non-negative")
        session.rng = np.random.default_rng(seed)
        return None

    def op_splitdata(self, session, args):
        data = self._dataset(session, _arg(args, "data", str, "D"))
        ratio = _arg(args, "ratio", float)
        train, test = splitdata(data, ratio, rng=session.rng)
        a = self._store(session, _arg(args, "train", str), train)
        b = self._store(session, _arg(args, "test", str), test)
        return {"labels": [a["label"], b["label"]]}

    def op_define_layer(self, session, args):
        layer = training.define_layer(
            _arg(args, "n_hidden", int),
            learningrate=_arg(args, "learningrate", float, None),
            epochs=_arg(args, "epochs", int, None),
            n_visible=_arg(args, "n_visible", int, None),
        )
        return self._store(session, _arg(args, "label", str), layer)

    def op_define_partitioned_layer(self, session, args):
        parts = [self._get(session, lbl, training.LayerSpec, "layer definition")
                 for lbl in _label_list(args, "parts")]
        if not parts:
            raise RemoteOpError(P.INVALID_ARGUMENT, "a partitioned layer needs parts")
        layer = training.define_partitioned_layer(parts)
        return self._store(session, _arg(args, "label", str), layer)

    def _nhiddens(self, session, args, default):
        raw = args.get("nhiddens", default)
        if isinstance(raw, (int, str)):
            raw = [raw]
        if not isinstance(raw, list) or not raw:
            raise RemoteOpError(P.INVALID_ARGUMENT, "nhiddens must be a non-empty list")
        out = []
        for item in raw:
            if isinstance(item, str):
                out.append(self._get(session, item, training.LayerSpec, "layer definition"))
            elif isinstance(item, int) and not isinstance(item, bool):
                out.append(item)
            else:
                raise RemoteOpError(P.INVALID_ARGUMENT, "nhiddens entries must be ints or layer labels")
        return tuple(out)

    def _train_spec(self, session, args, default_nhiddens):
        defaults = training.TrainSpec()
        kw = dict(
            nhiddens=self._nhiddens(session, args, default_nhiddens),
            epochs=_arg(args, "epochs", int, defaults.epochs),
            learningrate=_arg(args, "learningrate", float, defaults.learningrate),
            epochspretraining=_arg(args, "epochspretraining", int, defaults.epochspretraining),
            learningratepretraining=_arg(args, "learningratepretraining", float,
                                         defaults.learningratepretraining),
            batchsize=_arg(args, "batchsize", int, defaults.batchsize),
            cdsteps=_arg(args, "cdsteps", int, defaults.cdsteps),
            n_particles=_arg(args, "n_particles", int, defaults.n_particles),
            monitoring_datasets=tuple(_label_list(args, "monitoringdata")),
            monitoring_metrics=tuple(_label_list(args, "monitoring_metrics")
                                     or defaults.monitoring_metrics),
        )
        try:
            return training.TrainSpec(**kw)
        except (TypeError, ValueError) as exc:
            raise RemoteOpError(P.INVALID_ARGUMENT, str(exc)) from None

    def _training_inputs(self, session, args, default_nhiddens):
        data = self._dataset(session, _arg(args, "data", str, "D"))
        guard_training(data, self.cfg)
        spec = self._train_spec(session, args, default_nhiddens)
        monitoring = {lbl: self._dataset(session, lbl) for lbl in spec.monitoring_datasets}
        return data, spec, monitoring

    def _train_result(self, session, label, model, data, mlog):
        ack = self._store(session, label, ModelEntry(model, data.n_rows, tuple(data.column_names)))
        ack["monitoring"] = mlog.to_records()
        return ack

    def op_fitrbm(self, session, args):
        data, spec, mon = self._training_inputs(session, args, [10])
        rbm, mlog = training.fitrbm(data, spec, monitoring=mon, rng=session.rng)
        return self._train_result(session, _arg(args, "label", str, "rbm"), rbm, data, mlog)

    def op_stackrbms(self, session, args):
        data, spec, mon = self._training_inputs(session, args, [10])
        for_dbm = _arg(args, "for_dbm", bool, False)
        rbms, mlog = training.stackrbms(data, spec, for_dbm=for_dbm, monitoring=mon, rng=session.rng)
        return self._train_result(session, _arg(args, "label", str, "dbn"), rbms, data, mlog)

    def op_fitdbm(self, session, args):
        data, spec, mon = self._training_inputs(session, args, [10, 10])
        dbm, mlog = training.fitdbm(data, spec, monitoring=mon, rng=session.rng,
                                    ais_config=_ais_config(args))
        return self._train_result(session, _arg(args, "label", str, "dbm"), dbm, data, mlog)

    def op_samples(self, session, args):
        entry = self._model(session, _arg(args, "model", str, "dbm"))
        if entry.n_training_rows < self.cfg.min_rows_for_training:
            raise RemoteOpError(P.DISCLOSURE_GUARD, "model was trained on too few rows")
        n = _arg(args, "n", int)
        burnin = _arg(args, "burnin", int, None)
        idx = args.get("conditionindices")
        vals = args.get("conditionvalues")
        clamp = None if idx is None else (idx, vals if vals is not None else [])
        if isinstance(entry.model, list):
            if clamp is not None:
                raise RemoteOpError(P.INVALID_ARGUMENT, "conditional sampling needs an RBM or DBM")
            out = dbn_samples(entry.model, n, burnin, rng=session.rng,
                              column_names=entry.column_names)
        else:
            out = samples(entry.model, n, burnin, clamp, rng=session.rng,
                          column_names=entry.column_names)
        return {"columns": list(out.column_names), "rows": out.values.astype(int).tolist()}

    def _eval_inputs(self, session, args, kinds, what):
        entry = self._model(session, _arg(args, "model", str), kinds, what)
        return entry.model, self._dataset(session, _arg(args, "data", str, "D"))

    def op_reconstruction_error(self, session, args):
        model, data = self._eval_inputs(session, args, (Rbm, Dbm), "RBM or DBM")
        return {"value": reconstruction_error(model, data)}

    def op_exact_loglikelihood(self, session, args):
        model, data = self._eval_inputs(session, args, (Rbm, Dbm), "RBM or DBM")
        try:
            return {"value": evaluation.exact_loglikelihood(model, data)}
        except evaluation.ModelTooLargeError as exc:
            raise RemoteOpError(P.INVALID_ARGUMENT, str(exc)) from None

    def op_rbm_loglikelihood(self, session, args):
        model, data = self._eval_inputs(session, args, Rbm, "RBM")
        return {"value": evaluation.loglikelihood_rbm(model, data, _ais_config(args), session.rng)}

    def op_dbm_loglikelihood(self, session, args):
        model, data = self._eval_inputs(session, args, Dbm, "DBM")
        return {"value": evaluation.loglikelihood_dbm(model, data, _ais_config(args), session.rng)}

    def op_logproblowerbound(self, session, args):
        model, data = self._eval_inputs(session, args, Dbm, "DBM")
        return {"value": evaluation.logproblowerbound(model, data, _ais_config(args), session.rng)}

    def op_top2latentdims(self, session, args):
        model, data = self._eval_inputs(session, args, Dbm, "DBM")
        return {"dims": evaluation.top2latentdims(model, data).tolist()}

    def op_export_model(self, session, args):
        if not self.cfg.allow_model_export:
            raise RemoteOpError(P.EXPORT_DISABLED, "model export is disabled at this site")
        entry = self._model(session, _arg(args, "model", str), (Rbm, Dbm), "RBM or DBM")
        return {"model": model_to_dict(entry.model)}

    # -- networking -----------------------------------------------------------

    def _make_tcp(self):
        server = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                while True:
                    line = self.rfile.readline(P.MAX_LINE_BYTES + 1)
                    if not line:
                        return
                    if not line.strip():
                        continue
                    try:
                        response = server.handle(P.decode(line))
                    except P.ProtocolError as exc:
                        response = P.error(P.BAD_REQUEST, exc)
                    self.wfile.write(P.encode(response))
                    self.wfile.flush()

        class TCPServer(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        tcp = TCPServer(self.cfg.listen_address, Handler)
        if self.cfg.tls_certfile is not None:
            ctx = ssl.create_default_context(ssl.Purpose.CLIENT_AUTH)
            ctx.load_cert_chain(self.cfg.tls_certfile, self.cfg.tls_keyfile)
            tcp.socket = ctx.wrap_socket(tcp.socket, server_side=True)
        return tcp

    @property
    def address(self):
        if self._tcp is None:
            raise RuntimeError("server is not bound")
        return self._tcp.server_address[:2]

    def bind(self):
        if self._tcp is None:
            self._tcp = self._make_tcp()
        return self.address

    def serve_forever(self):
        self.bind()
        log.info("site serving on %s:%d", *self.address)
        self._tcp.serve_forever()

    def start(self):
        """Serve in a daemon thread; returns the bound ``(host, port)``."""
        self.bind()
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()
        return self.address

    def stop(self):
        if self._tcp is not None:
            self._tcp.shutdown()
            self._tcp.server_close()
            self._tcp = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()


def serve(cfg):
    """Run a site server in the foreground until interrupted."""
    SiteServer(cfg).serve_forever()
