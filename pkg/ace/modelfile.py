"""Plain-text model files.

An INI-style document: a [model] header (format_version, class_count,
provenance) followed by one section per layer. Arrays are written with 17
significant digits, so a saved model loads back bit-exactly. The format_version
alone tells a plain network from a selective network.
"""

import configparser
import io
import os

import numpy as np

from .engine import Dense, LayerSpec, NetworkParams
from .exceptions import ConfigurationError, LabError
from .selnet import SelNetParams

PLAIN_FORMAT = "ace-model/1"
SELNET_FORMAT = "ace-selnet/1"
SELNET_GROUPS = ("backbone", "prediction", "selector", "auxiliary")


def _numbers(array):
    return " ".join("%.17g" % v for v in np.asarray(array).ravel())


def _optional(value):
    return "" if value is None else ("%.17g" % value if isinstance(value, float) else str(value))


def _write_layer(parser, name, layer):
    spec = layer.spec
    parser[name] = {
        "in_dim": str(spec.in_dim),
        "out_dim": str(spec.out_dim),
        "activation": spec.activation,
        "dropout_rate": "%.17g" % spec.dropout_rate,
        "weight": _numbers(layer.weight),
        "bias": _numbers(layer.bias),
    }


def dumps_model(params):
    parser = configparser.ConfigParser(interpolation=None)
    header = {
        "class_count": str(params.class_count),
        "seed": _optional(params.seed),
        "train_accuracy": _optional(params.train_accuracy),
    }
    if isinstance(params, SelNetParams):
        parser["model"] = {"format_version": SELNET_FORMAT, **header,
                           "train_coverage": _optional(params.train_coverage)}
        for group, layers in zip(SELNET_GROUPS, params.groups()):
            for i, layer in enumerate(layers):
                _write_layer(parser, f"{group}.{i}", layer)
    elif isinstance(params, NetworkParams):
        parser["model"] = {"format_version": PLAIN_FORMAT, **header}
        for i, layer in enumerate(params.layers):
            _write_layer(parser, f"layer.{i}", layer)
    else:
        raise ConfigurationError(f"cannot save {type(params).__name__}")
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def save_model(params, path):
    text = dumps_model(params)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _read_layer(section):
    try:
        spec = LayerSpec(
            in_dim=int(section["in_dim"]),
            out_dim=int(section["out_dim"]),
            activation=section["activation"],
            dropout_rate=float(section["dropout_rate"]),
        )
        weight = np.array([float(v) for v in section["weight"].split()]).reshape(spec.out_dim, spec.in_dim)
        bias = np.array([float(v) for v in section["bias"].split()])
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"bad layer section [{section.name}]: {exc}") from exc
    return Dense(spec, weight, bias)


def _group(parser, prefix):
    names = sorted((s for s in parser.sections() if s.startswith(prefix + ".")),
                   key=lambda s: int(s.split(".", 1)[1]))
    return tuple(_read_layer(parser[name]) for name in names)


def _provenance(header, key, cast):
    value = header.get(key, "")
    return cast(value) if value else None


def loads_model(text, source="<string>"):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
        header = parser["model"]
    except (configparser.Error, KeyError) as exc:
        raise ConfigurationError(f"{source}: not a model file ({exc})") from exc
    try:
        extra = {
            "seed": _provenance(header, "seed", int),
            "train_accuracy": _provenance(header, "train_accuracy", float),
        }
        class_count = int(header["class_count"])
        version = header.get("format_version")
        if version == PLAIN_FORMAT:
            return NetworkParams(layers=_group(parser, "layer"), class_count=class_count, **extra)
        if version == SELNET_FORMAT:
            groups = [_group(parser, name) for name in SELNET_GROUPS]
            return SelNetParams.from_layers(groups, class_count,
                                            train_coverage=_provenance(header, "train_coverage", float), **extra)
    except ConfigurationError:
        raise
    except (LabError, KeyError, ValueError) as exc:
        raise ConfigurationError(f"{source}: {exc}") from exc
    raise ConfigurationError(f"{source}: unsupported format_version {version!r}")


def load_model(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read model {path}: {exc}") from exc
    return loads_model(text, source=str(path))
