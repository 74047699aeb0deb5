"""Python front for the causaldebias C++ core.

JSON-valued results from the core are returned as Python objects.
"""

import json as _json

from . import _causaldebias as _core
from ._causaldebias import (  # noqa: F401
    CausalDebiasError,
    CausalModel,
    Dataset,
    Service,
    discover,
    gower_distortion,
    individual_bias,
    load_csv,
    load_csv_like,
    load_model,
    statistical_parity_diff,
    synthesize,
)

__version__ = _core.__version__


def error_kind(exc):
    """Machine-readable kind of a CausalDebiasError, e.g. 'CycleError'."""
    return str(exc).split(":", 1)[0]


def default_hiring_spec():
    return _json.loads(_core.default_hiring_spec())


def debias(model, data, seed, noise="per-term"):
    """Returns (debiased Dataset, run metadata dict)."""
    out, meta = _core.debias(model, data, seed, noise)
    return out, _json.loads(meta)


def evaluate(original, debiased, groups, classifier="logistic", k=10, seed=0):
    """Metrics report pair; `groups` is a group-spec dict such as
    {"column": "gender", "privileged": "Male"}."""
    return _json.loads(
        _core.evaluate(original, debiased, _json.dumps(groups), classifier, k, seed)
    )


def graph(model):
    return _json.loads(model.graph_json())


def model_view(model, data):
    return _json.loads(model.view_json(data))


def apply_edit(model, data, edit):
    """Applies one edit dict in place and returns its BIC delta."""
    return model.apply(data, _json.dumps(edit))


def apply_script(model, data, edits):
    return model.apply_script(data, _json.dumps(edits))


def request(service, method, path, body=None, query=None):
    """Calls the in-process service. Returns (status, parsed body)."""
    payload = "" if body is None else (body if isinstance(body, str) else _json.dumps(body))
    status, ctype, raw = service.handle(method, path, payload, query or {})
    text = raw.decode()
    return status, (_json.loads(text) if "json" in ctype else text)
