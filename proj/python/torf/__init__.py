# Copyright 2026 The torf-grid Authors
# SPDX-License-Identifier: Apache-2.0
"""Time-of-flight radiance fields."""

import json as _json

from . import _torf
from ._torf import (
    FormatError,
    ToFModel,
    combine_quad,
    depth_mse,
    importance_weight,
    phasor_to_depth,
    psnr,
    read_pfm,
    set_thread_count,
    simulate_quad,
    thread_count,
    unwrap_depth,
    write_pfm,
    load_frame,
    render,
)


def _text(doc):
    return doc if isinstance(doc, str) else _json.dumps(doc)


def simulate(scene, capture, out_dir):
    """Capture a dataset; scene and capture are dicts or JSON text."""
    return _torf.simulate(_text(scene), _text(capture), str(out_dir))


def fit(data_dir, config, ckpt_path, box_min, box_max, resolution=16, time_steps=1, seed=0):
    """Fit fields to a dataset; returns the loss trace as a dict of lists."""
    return _torf.fit(str(data_dir), _text(config), str(ckpt_path), resolution=resolution,
                     time_steps=time_steps, box_min=list(box_min), box_max=list(box_max), seed=seed)


def evaluate(ckpt_path, data_dir, samples=0):
    return _json.loads(_torf.evaluate(str(ckpt_path), str(data_dir), samples))


def lambda_at(iteration, config):
    return _torf.lambda_at(iteration, _text(config))


__all__ = [
    "FormatError", "ToFModel", "combine_quad", "depth_mse", "evaluate", "fit", "importance_weight",
    "lambda_at", "load_frame", "phasor_to_depth", "psnr", "read_pfm", "render", "set_thread_count",
    "simulate", "simulate_quad", "thread_count", "unwrap_depth", "write_pfm",
]
