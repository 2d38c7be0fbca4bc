# Copyright 2026 The nandspin-sim Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""NAND-SPIN processing-in-MRAM functional simulator.

Models, inputs and configs are JSON documents (dicts or JSON text); results
come back as dicts in the formats the command line tool writes.
"""

import json

from . import _core
from ._core import Device, Error, MtjState, batch_norm, bitwise_convolution, quantize

__all__ = [
    "Device",
    "Error",
    "MtjState",
    "batch_norm",
    "bitwise_convolution",
    "quantize",
    "run_model",
    "run_reference",
    "toy_input",
    "toy_model",
]


def _text(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def run_model(model, input, config=None, threads=0, trace=False):
    """Simulates `model` on `input`.

    Returns {"output", "report", "layers"} plus "trace" (a list of event
    dicts) when `trace` is set. threads=0 keeps the config's thread count.
    """
    doc = json.loads(
        _core.run_model(_text(model), _text(input), "" if config is None else _text(config), threads, trace)
    )
    if trace:
        doc["trace"] = [json.loads(line) for line in doc["trace"].splitlines()]
    return doc


def run_reference(model, input):
    """Pure-integer pipeline; same output document as run_model."""
    return json.loads(_core.run_reference(_text(model), _text(input)))


def toy_model(seed):
    return json.loads(_core.toy_model(seed))


def toy_input(seed):
    return json.loads(_core.toy_input(seed))
