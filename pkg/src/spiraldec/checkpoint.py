"""Named-parameter checkpoint files (versioned JSON)."""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .autograd import Param
from .errors import CheckpointFormatError, TemplateMismatch

FORMAT_VERSION = 1


def config_hash(config_dict: dict) -> str:
    canon = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def dump_checkpoint(params: list[Param], cfg_hash: str = "") -> str:
    """Serialize named parameters; float64 values round-trip exactly."""
    entries = [{"name": p.name, "shape": list(p.shape), "values": p.data.reshape(-1).tolist()}
               for p in params]
    return json.dumps({"format_version": FORMAT_VERSION,
                       "config_hash": cfg_hash,
                       "params": entries})


def save_checkpoint(path, params: list[Param], cfg_hash: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_checkpoint(params, cfg_hash))


def load_checkpoint(path, params: list[Param], cfg_hash: str | None = None) -> None:
    """Load values into an existing parameter list, by name.

    Raises
    ------
    CheckpointFormatError
        On malformed files or version mismatch.
    TemplateMismatch
        When names, shapes or the config hash disagree with the model.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        version = obj["format_version"]
        stored_hash = obj["config_hash"]
        entries = {e["name"]: e for e in obj["params"]}
        for e in entries.values():
            e["shape"], e["values"]
    except (json.JSONDecodeError, KeyError, TypeError, UnicodeDecodeError) as exc:
        raise CheckpointFormatError(f"not a valid checkpoint file: {path} ({exc})") from exc
    if version != FORMAT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    if cfg_hash is not None and stored_hash and stored_hash != cfg_hash:
        raise TemplateMismatch("checkpoint was trained with a different config "
                               f"(hash {stored_hash} != {cfg_hash})")
    names = {p.name for p in params}
    if names != set(entries):
        missing = names - set(entries)
        extra = set(entries) - names
        raise TemplateMismatch(f"parameter names disagree (missing={sorted(missing)[:4]}, "
                               f"unexpected={sorted(extra)[:4]})")
    for p in params:
        e = entries[p.name]
        if tuple(e["shape"]) != p.shape:
            raise TemplateMismatch(f"{p.name}: checkpoint shape {e['shape']} != model {list(p.shape)}")
        values = np.asarray(e["values"], dtype=np.float64)
        if values.size != p.data.size:
            raise TemplateMismatch(f"{p.name}: value count {values.size} != {p.data.size}")
        p.data[...] = values.reshape(p.shape)
